use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gel_cli::suite::write_witnesses;
use gel_core::verify::gradient_fd_check_with;
use gel_core::{energy_gradient, Graph, GraphKind, Weights};
use ndarray::array;
use tempfile::TempDir;

fn gel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gel"))
        .args(args)
        .env_remove("GEL_SEED")
        .output()
        .expect("spawn gel")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn last_rq(csv: &str) -> f64 {
    let line = csv.lines().last().unwrap();
    line.split(',').nth(2).unwrap().parse().unwrap()
}

const K55: &str = "
graph = complete_bipartite(5,5)
variant = gradient_flow
W = [[-1]]
tau = 0.5
steps = 60
init = random_normal
seed = 7
csv = out/t.csv
svg = out/rq.svg
report = out/report.txt
";

#[test]
fn k55_gradient_flow_reaches_lambda_max() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "k55.cfg", K55);
    let out = gel(&["run", &cfg]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let csv = fs::read_to_string(dir.path().join("out/t.csv")).unwrap();
    assert!(csv.starts_with(
        "step,time,rayleigh_quotient,dirichlet_direction,parametric_energy_direction,log_scale\n"
    ));
    assert_eq!(csv.lines().count(), 62);
    assert!((last_rq(&csv) - 2.0).abs() <= 1e-6);
    let report = fs::read_to_string(dir.path().join("out/report.txt")).unwrap();
    assert!(report.contains("regime: HFD"), "{report}");
    let svg = fs::read_to_string(dir.path().join("out/rq.svg")).unwrap();
    assert!(svg.contains(r#"viewBox="0 0 800 500""#) && svg.contains("stroke-dasharray"));
}

#[test]
fn runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "k55.cfg", K55);
    let read = || {
        assert_eq!(code(&gel(&["run", &cfg])), 0);
        (
            fs::read(dir.path().join("out/t.csv")).unwrap(),
            fs::read(dir.path().join("out/report.txt")).unwrap(),
            fs::read(dir.path().join("out/rq.svg")).unwrap(),
        )
    };
    assert_eq!(read(), read());
}

#[test]
fn gel_seed_overrides_the_config_seed() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "k55.cfg", K55);
    let csv_path = dir.path().join("out/t.csv");
    assert_eq!(code(&gel(&["run", &cfg])), 0);
    let base = fs::read(&csv_path).unwrap();
    let run_with = |seed: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_gel")).args(["run", &cfg]).env("GEL_SEED", seed).output().unwrap();
        assert_eq!(code(&out), 0);
        fs::read(&csv_path).unwrap()
    };
    assert_eq!(run_with("7"), base);
    assert_ne!(run_with("8"), base);
    let bad = Command::new(env!("CARGO_BIN_EXE_gel")).args(["run", &cfg]).env("GEL_SEED", "x").output().unwrap();
    assert_eq!(code(&bad), 2);
}

#[test]
fn no_residual_on_bipartite_emits_the_hypothesis_note() {
    let dir = TempDir::new().unwrap();
    let body = K55.replace("variant = gradient_flow", "variant = no_residual").replace("[[-1]]", "[[1]]");
    let cfg = write_config(dir.path(), "nr.cfg", &body);
    let out = gel(&["run", &cfg]);
    assert_eq!(code(&out), 0);
    let report = fs::read_to_string(dir.path().join("out/report.txt")).unwrap();
    assert!(report.contains("hypothesis violated"), "{report}");
    assert!(!report.contains("regime: LFD (residual-free"), "{report}");
}

#[test]
fn no_residual_on_odd_cycle_smooths() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c5.cfg",
        "graph = cycle(5)\nvariant = no_residual\nW = [[2,0],[0,-1]]\ntau = 0.5\nsteps = 300\n\
         init = random_normal\nseed = 3\ncsv = t.csv\nreport = r.txt\n",
    );
    let out = gel(&["run", &cfg]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let csv = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert!(last_rq(&csv) <= 1e-6);
    let report = fs::read_to_string(dir.path().join("r.txt")).unwrap();
    assert!(report.contains("regime: LFD (residual-free flow on a non-bipartite graph"), "{report}");
}

#[test]
fn parse_errors_exit_2_and_name_the_key() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bad.cfg", &format!("{K55}\ncolour = blue\n"));
    let out = gel(&["run", &cfg]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
    let cfg = write_config(dir.path(), "bad2.cfg", &K55.replace("tau = 0.5", "tau = fast"));
    assert_eq!(code(&gel(&["run", &cfg])), 2);
}

#[test]
fn validation_errors_exit_3() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "v.cfg", &K55.replace("complete_bipartite(5,5)", "cycle(2)"));
    assert_eq!(code(&gel(&["run", &cfg])), 3);
    assert_eq!(code(&gel(&["bipartite", "1", "5"])), 3);
}

#[test]
fn oversized_monotonicity_check_is_a_resource_error() {
    let dir = TempDir::new().unwrap();
    let d = 41;
    let rows: Vec<String> = (0..d)
        .map(|i| {
            let row: Vec<String> = (0..d).map(|j| if i == j { "0.5".into() } else { "0".into() }).collect();
            row.join(" ")
        })
        .collect();
    fs::write(dir.path().join("w.txt"), rows.join("\n")).unwrap();
    let cfg = write_config(
        dir.path(),
        "big.cfg",
        "graph = complete_bipartite(50,50)\nvariant = gradient_flow_nonlinear\nW_file = w.txt\nsigma = tanh\n\
         tau = 0.001\nsteps = 5\ninit = random_normal\nseed = 1\nchecks = monotonicity\n",
    );
    let out = gel(&["run", &cfg]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn io_errors_exit_5() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("blocker"), "").unwrap();
    let cfg = write_config(dir.path(), "io.cfg", &K55.replace("csv = out/t.csv", "csv = blocker/t.csv"));
    assert_eq!(code(&gel(&["run", &cfg])), 5);
    assert_eq!(code(&gel(&["run", dir.path().join("missing.cfg").to_str().unwrap()])), 5);
}

#[test]
fn bipartite_demo_passes_and_writes_artifacts() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("demo");
    let out = gel(&["bipartite", "5", "5", "--seed", "1", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let text = stdout(&out);
    assert_eq!(text.matches("PASS (").count(), 3, "{text}");
    for f in ["report.txt", "rayleigh.svg", "gradient_flow.csv", "heat.csv"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    assert_eq!(fs::read_to_string(out_dir.join("rayleigh.svg")).unwrap().matches("<polyline").count(), 2);

    let uneven = gel(&["bipartite", "2", "3"]);
    assert_eq!(code(&uneven), 0, "{}", stdout(&uneven));
}

#[test]
fn bipartite_demo_failure_exits_1_with_the_clause() {
    // an unstable heat step keeps the Rayleigh quotient away from zero
    let out = gel(&["bipartite", "5", "5", "--tau", "5"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("(ii) heat RQ"));
}

#[test]
fn suite_passes() {
    let dir = TempDir::new().unwrap();
    let wd = dir.path().join("w");
    let out = gel(&["suite", "--witness-dir", wd.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.lines().filter(|l| l.starts_with("PASS ")).count() >= 30, "{text}");
    assert!(text.contains(", 0 failed"));
    assert!(!wd.exists());
}

#[test]
fn sign_flipped_gradient_leaves_a_replayable_witness() {
    let g = Graph::generate(&GraphKind::Cycle(5)).unwrap();
    let w = Weights::zeros(2)
        .with_w(array![[1.0, -0.3], [-0.3, 0.5]])
        .and_then(|w| w.with_omega(array![[0.8, 0.1], [0.1, 0.6]]))
        .unwrap();
    let f = array![[0.1, 0.4], [-0.2, 0.3], [0.5, -0.1], [0.0, 0.2], [0.3, 0.3]];
    let f0 = f.mapv(|x| 0.5 * x);
    let flipped = |g: &Graph, f: &ndarray::ArrayView2<f64>, f0: &ndarray::ArrayView2<f64>, w: &Weights| {
        energy_gradient(g, f, f0, w).map(|x| -x)
    };
    let report = gradient_fd_check_with(&g, &f.view(), &f0.view(), &w, 1e-5, flipped).unwrap();
    assert!(!report.passed);

    let dir = TempDir::new().unwrap();
    let paths = write_witnesses(&[report], dir.path()).unwrap();
    assert_eq!(paths.len(), 1);
    let text = fs::read_to_string(&paths[0]).unwrap();
    assert!(text.starts_with("gradient_fd") || text.contains("gradient_fd"));

    // replay uses the real gradient, which agrees with finite differences
    let out = gel(&["replay", paths[0].to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).contains("PASS gradient_fd"));

    fs::write(&paths[0], "not a witness\n").unwrap();
    assert_eq!(code(&gel(&["replay", paths[0].to_str().unwrap()])), 2);
}
