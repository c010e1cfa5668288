use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn shockwalk(args: &[&str], workers: Option<&str>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_shockwalk"));
    c.args(args);
    match workers {
        Some(w) => c.env("SHOCKWALK_WORKERS", w),
        None => c.env_remove("SHOCKWALK_WORKERS"),
    };
    c.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn text(o: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    )
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const ASEP_SHOCK: &str = r#"
command = "verify"
[model]
kind = "asep"
p = 0.7
q = 0.3
[measure]
kind = "shock"
rho = 0.3
lambda = 0.5
"#;

#[test]
fn asep_preset_passes_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c01");
    let o = shockwalk(
        &[
            "verify",
            "--preset",
            "c01-asep-single-shock",
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(code(&o), 0, "{}", text(&o));
    assert!(text(&o).contains("RESULT PASS"));
    for f in ["report.json", "checks.csv", "residuals.csv", "config.toml"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert!(report["details"]["max_residual"].as_f64().unwrap() < 1e-12);
    let residuals = fs::read_to_string(out.join("residuals.csv")).unwrap();
    assert!(residuals.lines().next().unwrap().contains("tolerance"));
}

#[test]
fn negative_control_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let body = ASEP_SHOCK.replace("lambda = 0.5", "lambda = 0.55\nunchecked = true");
    let path = write(dir.path(), "neg.toml", &body);
    let o = shockwalk(&["verify", "--config", &path], None);
    assert_eq!(code(&o), 1, "{}", text(&o));
    assert!(text(&o).contains("FAIL"));
}

#[test]
fn inconsistent_parameters_are_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "bad.toml",
        &ASEP_SHOCK.replace("lambda = 0.5", "lambda = 0.55"),
    );
    let o = shockwalk(&["verify", "--config", &path], None);
    assert_eq!(code(&o), 2, "{}", text(&o));
}

#[test]
fn oversized_enumeration_is_a_budget_error() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"
command = "verify"
[model]
kind = "gzrp"
beta = 1.0
[measure]
kind = "shock"
theta = 0.5
sigma = -0.5
[exact]
window = [-8, 8]
truncation = 12
basis = "full"
"#;
    let path = write(dir.path(), "big.toml", body);
    let o = shockwalk(&["verify", "--config", &path], None);
    assert_eq!(code(&o), 3, "{}", text(&o));
}

#[test]
fn typos_and_missing_fields_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "typo.toml", &ASEP_SHOCK.replace("lambda", "lamda"));
    let o = shockwalk(&["verify", "--config", &path], None);
    assert_eq!(code(&o), 2);
    assert!(text(&o).contains("lamda"), "{}", text(&o));

    let body =
        "command = \"verify\"\n[model]\nkind = \"gzrp\"\n[measure]\nkind = \"shock\"\ntheta = 0.5\nsigma = -0.5\n";
    let path = write(dir.path(), "nobeta.toml", body);
    let o = shockwalk(&["verify", "--config", &path], None);
    assert_eq!(code(&o), 2);
    assert!(text(&o).contains("beta"), "{}", text(&o));
}

#[test]
fn subcommand_must_match_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "v.toml", ASEP_SHOCK);
    let o = shockwalk(&["simulate", "--config", &path], None);
    assert_eq!(code(&o), 2);
}

const SIM: &str = r#"
command = "simulate"
[model]
kind = "asep"
p = 0.7
q = 0.3
[measure]
kind = "shock"
rho = 0.3
lambda = 0.5
[simulation.run]
half_width = 40
horizon = 4.0
replicas = 400
seed = 3
samples = 4
[simulation.bands]
mean_se = 4.0
variance_se = 5.0
"#;

#[test]
fn simulation_outputs_are_reproducible_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "sim.toml", SIM);
    let mut files = Vec::new();
    for (k, w) in [Some("1"), Some("2"), None].into_iter().enumerate() {
        let out = dir.path().join(format!("run{k}"));
        let o = shockwalk(&["simulate", "--config", &path, "--out", out.to_str().unwrap()], w);
        assert_eq!(code(&o), 0, "{}", text(&o));
        files.push(["trajectories.csv", "histogram.csv", "checks.csv"].map(|f| fs::read(out.join(f)).unwrap()));
    }
    assert_eq!(files[0], files[1]);
    assert_eq!(files[0], files[2]);
    let traj = String::from_utf8(files[0][0].clone()).unwrap();
    assert_eq!(traj.lines().next().unwrap(), "replica,t,tracked_position");
    assert_eq!(traj.lines().count(), 1 + 400 * 5);
    let hist = String::from_utf8(files[0][1].clone()).unwrap();
    assert!(hist.starts_with("position,count,empirical,empirical_se,predicted_probability"));
}

#[test]
fn tiny_lattice_is_a_resource_error() {
    let dir = tempfile::tempdir().unwrap();
    let body = SIM
        .replace("half_width = 40", "half_width = 5")
        .replace("horizon = 4.0", "horizon = 40.0");
    let path = write(dir.path(), "tiny.toml", &body);
    let o = shockwalk(&["simulate", "--config", &path], None);
    assert_eq!(code(&o), 3, "{}", text(&o));
}

#[test]
fn bad_worker_count_is_rejected() {
    let o = shockwalk(&["list-presets"], Some("zero"));
    assert_eq!(code(&o), 2);
}

#[test]
fn hydro_writes_flux_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("h");
    let o = shockwalk(
        &["hydro", "--preset", "c09-gzrp-drift", "--out", out.to_str().unwrap()],
        None,
    );
    assert_eq!(code(&o), 0, "{}", text(&o));
    let flux = fs::read_to_string(out.join("flux.csv")).unwrap();
    assert_eq!(flux.lines().count(), 22);
    assert!(flux.starts_with("parameter,rho,flux,tail_bound"));
}

#[test]
fn rates_check_from_the_command_line() {
    let o = shockwalk(&["rates-check", "--model", "asep", "p=0.7", "q=0.3"], None);
    assert_eq!(code(&o), 0, "{}", text(&o));
    let o = shockwalk(&["rates-check", "--model", "blp", "beta=1.0"], None);
    assert_eq!(code(&o), 0, "{}", text(&o));
    let o = shockwalk(&["rates-check", "--model", "asep", "p=0.7"], None);
    assert_eq!(code(&o), 2);
    let o = shockwalk(&["rates-check", "--model", "asep", "p"], None);
    assert_eq!(code(&o), 2);
}

#[test]
fn presets_cover_every_criterion() {
    let o = shockwalk(&["list-presets"], None);
    let list = String::from_utf8(o.stdout).unwrap();
    for k in 1..=13 {
        assert!(
            list.lines().any(|l| l.starts_with(&format!("c{k:02}-"))),
            "criterion {k}"
        );
    }
    let o = shockwalk(&["run-all-presets", "--filter", "c04"], None);
    assert_eq!(code(&o), 0, "{}", text(&o));
    assert_eq!(text(&o).matches("RESULT PASS").count(), 3);
}

#[test]
fn unknown_preset_is_a_usage_error() {
    let o = shockwalk(&["verify", "--preset", "nope"], None);
    assert_eq!(code(&o), 2);
}
