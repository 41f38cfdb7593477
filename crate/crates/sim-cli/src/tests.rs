use super::*;

fn sim(args: &[&str]) -> u8 {
    let mut argv = vec!["sim"];
    argv.extend_from_slice(args);
    match Cli::try_parse_from(argv) {
        Ok(cli) => dispatch(cli),
        Err(_) => CONFIG_ERROR,
    }
}

fn scenario(dir: &Path, body: &str) -> String {
    let p = dir.join("s.toml");
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn summaries(dir: &Path) -> Vec<serde_json::Value> {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

const TROT: &str = "name = \"t\"\nduration = 0.3\ncontroller = \"mpc\"\n[gait]\nkind = \"trot\"\n";

#[test]
fn run_writes_a_log() {
    let d = tempfile::tempdir().unwrap();
    let s = scenario(d.path(), TROT);
    let out = d.path().join("out");
    assert_eq!(sim(&["run", "--scenario", &s, "--out", out.to_str().unwrap()]), 0);
    let csv = std::fs::read_to_string(out.join("t_mpc.csv")).unwrap();
    assert_eq!(csv.lines().count(), 301);
}

#[test]
fn compare_runs_every_controller() {
    let d = tempfile::tempdir().unwrap();
    let s = scenario(d.path(), TROT);
    let out = d.path().join("cmp");
    assert_eq!(sim(&["compare", "--scenario", &s, "--controllers", "mpc,adaptive-mpc", "--out", out.to_str().unwrap()]), 0);
    assert!(out.join("t_mpc.csv").exists() && out.join("t_adaptive_mpc.csv").exists());
    let list = summaries(&out);
    assert_eq!(list.len(), 2);
    assert_eq!(list[1]["controller"], "adaptive_mpc");
}

#[test]
fn sweep_reports_each_value_and_the_worst_status() {
    let d = tempfile::tempdir().unwrap();
    let s = scenario(d.path(), "duration = 2.0\ncontroller = \"balance\"\n");
    let out = d.path().join("sw");
    std::fs::create_dir_all(&out).unwrap();
    let code = sim(&["sweep", "--scenario", &s, "--param", "plant.load_mass", "--values", "0,36", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    let list = summaries(&out);
    assert_eq!(list[0]["status"]["kind"], "completed");
    assert_eq!(list[1]["status"]["kind"], "fallen");
}

#[test]
fn parameters_can_be_set_by_path() {
    let base = ScenarioConfig::from_toml_str(TROT).unwrap();
    let c = with_param(&base, "terrain.kind", "\"soft\"").unwrap();
    assert_eq!(c.terrain.kind, srb_adaptive::terrain::TerrainKind::Soft);
    let c = with_param(&base, "mpc.horizon", "4").unwrap();
    assert_eq!(c.mpc.horizon, 4);
    assert!(with_param(&base, "gait.nope", "1").is_err());
    assert!(with_param(&base, "duration", "-1.0").is_err());
}

#[test]
fn config_errors_exit_with_three() {
    let d = tempfile::tempdir().unwrap();
    let s = scenario(d.path(), "duration = 1.0\ncontroller = \"mpc\"\nbogus = 1\n");
    assert_eq!(sim(&["run", "--scenario", &s, "--out", d.path().to_str().unwrap()]), 3);
    let s = scenario(d.path(), TROT);
    assert_eq!(sim(&["sweep", "--scenario", &s, "--param", "gait.nope", "--values", "1"]), 3);
    assert_eq!(sim(&["compare", "--scenario", &s, "--controllers", "pid", "--out", d.path().to_str().unwrap()]), 3);
    assert_eq!(sim(&["run", "--scenario", "missing.toml", "--out", d.path().to_str().unwrap()]), 3);
    assert_eq!(sim(&["run", "--out", "x"]), 3);
}

#[test]
fn lyapunov_report_for_a_gain_file() {
    let d = tempfile::tempdir().unwrap();
    let g = d.path().join("g.toml");
    std::fs::write(&g, "kp = [1, 1, 1, 1, 1, 1]\nkd = [1, 1, 1, 1, 1, 1]\n").unwrap();
    let r = lyapunov_report(&g, None, 1.0).unwrap();
    // P = [[1.5, .5], [.5, 1]] per axis and Q_L = I.
    let lmax = 1.25 + (0.0625f64 + 0.25).sqrt();
    assert!((r.lambda - 1.0 / lmax).abs() < 1e-9);
    assert!(r.residual <= 1e-8);
    assert_eq!(sim(&["check-lyapunov", "--gains", g.to_str().unwrap()]), 0);

    std::fs::write(&g, "kp = [0, 1, 1, 1, 1, 1]\nkd = [1, 1, 1, 1, 1, 1]\n").unwrap();
    assert_eq!(sim(&["check-lyapunov", "--gains", g.to_str().unwrap()]), 3);
}

#[test]
fn lyapunov_decay_check_on_a_log() {
    let d = tempfile::tempdir().unwrap();
    let s = scenario(d.path(), "name = \"st\"\nduration = 1.5\ncontroller = \"balance\"\n");
    let out = d.path().join("o");
    assert_eq!(sim(&["run", "--scenario", &s, "--out", out.to_str().unwrap()]), 0);
    let log = out.join("st_balance.csv");
    let r = lyapunov_report(Path::new(&s), Some(&log), 1.0).unwrap();
    let decay = r.decay.unwrap();
    assert!(decay.samples > 1400);
    assert!(decay.post_transient_fraction <= 0.05);
}
