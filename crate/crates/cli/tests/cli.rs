use std::path::Path;
use std::process::{Command, Output};

fn nfbs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nfbs"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL_SWEEP: &str = "\
seed = 5
trials = 3
estimators = [\"ls\", \"nf-omp\", \"nba-omp\"]

[system]
n_antennas = 16
subcarriers = 4
users = 2
range_min_m = 0.05
range_max_m = 0.12
grid_range_min_m = 0.05
q_angle = 32
q_range = 3

[sweep]
axis = \"snr\"
values = [0.0, 10.0]
";

#[test]
fn sweep_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sweep.toml", SMALL_SWEEP);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = nfbs(&["nmse-sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["nmse_sweep.csv", "nmse_trials.csv"] {
        let x = std::fs::read(a.join(name)).unwrap();
        assert_eq!(x, std::fs::read(b.join(name)).unwrap());
        assert!(x.starts_with(b"# nfbs "));
    }
    // A different seed changes the draws.
    let c = dir.path().join("c");
    let o = nfbs(&[
        "nmse-sweep",
        "--config",
        &cfg,
        "--seed",
        "6",
        "--out",
        c.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_ne!(
        std::fs::read(a.join("nmse_trials.csv")).unwrap(),
        std::fs::read(c.join("nmse_trials.csv")).unwrap()
    );
}

#[test]
fn overhead_uses_configured_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "ov.toml",
        "profile = \"paper\"\n[overhead]\nsamples_per_user = 128000000\nparams = 1196928\nrounds = 100\n",
    );
    let o = nfbs(&["overhead", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("overhead.csv")).unwrap();
    assert!(text.contains("0,8,128000000,8,256,1196928,100,24576000000,1915084800,"));
}

#[test]
fn errors_point_at_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.toml",
        "seed = 1\n[sweep]\naxis = \"snr\"\nvalues = []\n",
    );
    let o = nfbs(&["nmse-sweep", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 4"), "{err}");

    let o = nfbs(&["gain-map", "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));

    let o = nfbs(&["gain-map", "--seed", "1", "--profile", "huge"]);
    assert!(!o.status.success());
}

#[test]
fn gain_map_writes_raster_and_markers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "gm.toml",
        "seed = 1\nprofile = \"paper\"\n[system]\nsubcarriers = 2\n\
         [gain_map]\nx = { min = 3.0, max = 5.0, count = 5 }\ny = { min = 3.0, max = 5.0, count = 4 }\n",
    );
    let o = nfbs(&["gain-map", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let raster = std::fs::read_to_string(dir.path().join("gain_map.csv")).unwrap();
    // Header comment, column row, then 20 cells for each of 2 layers and the sum.
    assert_eq!(raster.lines().count(), 2 + 60);
    let markers = std::fs::read_to_string(dir.path().join("gain_map_markers.csv")).unwrap();
    assert!(markers
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("kind,m,x_m,y_m,sin_doa,range_m"));
}
