use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn purify(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_purify"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(i).unwrap().parse().unwrap()).collect()
}

#[test]
fn zero_steps_gives_one_row() {
    let out = purify(&["protocol", "--steps", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 2);
    assert!(text.starts_with("N,p_step,P_cumulative,F,Y_product,Y_survival,P_closed_form"));
    assert_eq!(column(&text, "P_cumulative"), vec![1.0]);
}

#[test]
fn quarter_period_row() {
    let out = purify(&["protocol", "--emitters", "2", "--gamma-tau", "pi/(2*sqrt(6))", "--steps", "1"]);
    let text = stdout(&out);
    assert!((column(&text, "P_cumulative")[1] - 0.5).abs() < 1e-12);
    assert!((column(&text, "F")[1] - 1.0).abs() < 1e-12);
}

#[test]
fn gamma_and_tau_equal_gamma_tau() {
    let a = purify(&["protocol", "--gamma-tau", "0.8", "--steps", "4"]);
    let b = purify(&["protocol", "--gamma", "2", "--tau", "0.4", "--steps", "4"]);
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn closed_form_columns_only_for_the_default_scenario() {
    let custom = stdout(&purify(&["protocol", "--initial", "ge", "--steps", "2"]));
    assert!(!custom.contains("P_closed_form"));
    let perturbed = stdout(&purify(&["protocol", "--couplings", "1,1.1", "--steps", "2"]));
    assert!(!perturbed.contains("P_closed_form"));
    let literal = stdout(&purify(&["protocol", "--formula-variant", "literal", "--steps", "2"]));
    assert!(literal.lines().nth(2).unwrap().ends_with(",false"), "{literal}");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# demo\nemitters = 3\ngamma_tau = pi/sqrt(10)\nsteps = 5\n").unwrap();
    let out = purify(&["protocol", "--config", cfg.to_str().unwrap(), "--steps", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 4);
    assert!((column(&text, "F")[0] - 1.0 / 3.0).abs() < 1e-12);

    fs::write(&cfg, "emitters = 3\nsteps = -1\n").unwrap();
    let out = purify(&["protocol", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("run.cfg:2: steps"), "{}", stderr(&out));
}

#[test]
fn configuration_errors_exit_2() {
    for args in [
        &["protocol", "--emitters", "0"][..],
        &["protocol", "--gamma-tau", "pi/"],
        &["protocol", "--target", "ghz"],
        &["protocol", "--format", "xml"],
        &["protocol", "--trajectories", "10"],
        &["protocol", "--initial", "file:/nonexistent/rho.txt"],
        &["spectrum", "--gamma-tau", "0:1:5"],
        &["sweep", "--gamma-tau", "0.1:3:1000", "--kept-photons", "1,2", "--max-points", "1500"],
        &["frobnicate"],
    ] {
        let out = purify(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn mixed_state_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rho.txt");
    // Equal mixture of |eg> and |ge>, which has singlet fidelity 1/2.
    let mut text = String::from("# rows of `re im` pairs\n4\n");
    for r in 0..4 {
        let row: Vec<String> = (0..4)
            .map(|c| if r == c && (r == 1 || r == 2) { "0.5 0".into() } else { "0 0".into() })
            .collect();
        text.push_str(&row.join("  "));
        text.push('\n');
    }
    fs::write(&path, text).unwrap();
    let arg = format!("file:{}", path.display());
    let out = purify(&["protocol", "--initial", &arg, "--steps", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let f = column(&stdout(&out), "F");
    assert!((f[0] - 0.5).abs() < 1e-12);
    assert!(f.windows(2).all(|w| w[1] >= w[0] - 1e-12));

    fs::write(&path, "4\n1 0\n").unwrap();
    assert_eq!(purify(&["protocol", "--initial", &arg]).status.code(), Some(2));
}

#[test]
fn empty_sweep_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    let out = purify(&["sweep", "--grid", "0.1:3.0:0", "--output", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("kept_photons,gamma_tau,N,"));
}

#[test]
fn sweep_rows_follow_grid_order() {
    let text = stdout(&purify(&[
        "sweep", "--gamma-tau", "0.1:3.0:30", "--kept-photons", "1,2", "--steps", "10", "--jobs", "3",
    ]));
    assert_eq!(text.lines().count(), 61);
    let k = column(&text, "kept_photons");
    let gt = column(&text, "gamma_tau");
    assert!(k[..30].iter().all(|&x| x == 1.0) && k[30..].iter().all(|&x| x == 2.0));
    assert!(gt[..30].windows(2).all(|w| w[1] > w[0]));
    let p = column(&text, "P_cumulative");
    let pc = column(&text, "P_closed_form");
    for i in 0..60 {
        assert!((p[i] - pc[i]).abs() < 1e-10);
    }
}

#[test]
fn spectrum_flags_the_singlet() {
    let text = stdout(&purify(&["spectrum", "--gamma-tau", "0.9"]));
    let rows: Vec<&str> = text.lines().filter(|l| l.starts_with("eigenvalue,")).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].ends_with(",true"));
    assert!(rows[1..].iter().all(|r| r.ends_with(",false")));

    let identity = stdout(&purify(&["spectrum", "--emitters", "3", "--gamma-tau", "0"]));
    let mags: Vec<f64> = identity
        .lines()
        .filter(|l| l.starts_with("eigenvalue,"))
        .map(|l| l.split(',').nth(6).unwrap().parse().unwrap())
        .collect();
    assert_eq!(mags.len(), 8);
    assert!(mags.iter().all(|m| (m - 1.0).abs() < 1e-12));
}

#[test]
fn json_outputs_parse() {
    let out = stdout(&purify(&["protocol", "--format", "json", "--steps", "2", "--trajectories", "100", "--seed", "1"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["records"].as_array().unwrap().len(), 3);
    assert_eq!(v["config"]["target"], "singlet");
    assert!(v["records"][2]["Y_sampled"].is_number());

    let out = stdout(&purify(&["spectrum", "--emitters", "3", "--format", "json"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["eigenpairs"].as_array().unwrap().len(), 8);
    assert_eq!(v["ghz"]["verdict"], "NotPreserved");
}

#[test]
fn verify_exit_codes() {
    let ok = purify(&["verify", "--format", "csv"]);
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));
    assert_eq!(stdout(&ok).lines().count(), 16);

    let perturbed = purify(&["verify", "--couplings", "1,1.1"]);
    assert_eq!(perturbed.status.code(), Some(1));
    assert!(stdout(&perturbed).contains("FAIL singlet_trapping"));
    assert!(stderr(&perturbed).contains("singlet_trapping (residual"));

    let literal = purify(&["verify", "--formula-variant", "two_fidelity_literal"]);
    assert_eq!(literal.status.code(), Some(1));
    assert!(stdout(&literal).contains("FAIL two_emitter_closed_form"));
}

#[test]
fn output_to_unwritable_path_is_a_config_error() {
    let out = purify(&["protocol", "--output", Path::new("/nonexistent/dir/out.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
