use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use smtlab_cli::{run, Experiment, ExperimentConfig, Overrides};

const BASE: &str = r#"
beta = 0.5
seed = 3

[domain]
shape = "half_disc"
radius = 1.0
level = 3

[sweep]
eps_list = [0.3, 0.2]

[test_family]
eps_list = [1e-3, 1e-4]
"#;

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn smtlab(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_smtlab"));
    cmd.args(args).env_remove("SMTLAB_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn resolved(experiment: Experiment, out: &Path, text: &str) -> ExperimentConfig {
    let o = Overrides { output_dir: Some(out.to_path_buf()), ..Overrides::default() };
    ExperimentConfig::from_toml(text).unwrap().resolve(experiment, &o).unwrap()
}

#[test]
fn config_defaults_and_overrides() {
    let cfg = ExperimentConfig::from_toml(BASE).unwrap();
    assert_eq!(cfg.betas(), vec![0.5]);
    assert_eq!(cfg.sweep.eps_list, vec![0.3, 0.2]);
    assert_eq!(cfg.tolerances.green_a0_rel, 0.02);
    let o = Overrides { level: Some(4), beta: Some(0.25), eps_list: Some(vec![0.1]), ..Overrides::default() };
    let r = cfg.clone().resolve(Experiment::SubcriticalSweep, &o).unwrap();
    assert_eq!(r.domain.level, 4);
    assert_eq!(r.betas(), vec![0.25]);
    assert_eq!(r.sweep.eps_list, vec![0.1]);
    let t = cfg.resolve(Experiment::TestFamily, &o).unwrap();
    assert_eq!(t.test_family.eps_list, vec![0.1]);
}

#[test]
fn config_errors_name_the_field() {
    let cases = [
        (BASE.replace("beta = 0.5", "beta = 1.5"), "beta"),
        (BASE.replace("radius = 1.0", ""), "domain.radius"),
        (BASE.replace("seed = 3", "seed = 3\nsede = 4"), "sede"),
        (BASE.replace("level = 3", "level = \"three\""), "level"),
        (BASE.replace("eps_list = [0.3, 0.2]", "eps_list = [0.3, 0.6]"), "sweep.eps_list"),
        (format!("{BASE}\n[tolerances]\nel_residual = -1.0\n"), "tolerances.el_residual"),
    ];
    for (text, field) in cases {
        let err = ExperimentConfig::from_toml(&text)
            .and_then(|c| c.resolve(Experiment::FullPipeline, &Overrides::default()))
            .unwrap_err();
        assert!(format!("{err:#}").contains(field), "`{err:#}` does not mention {field}");
    }
    let mismatch = format!("experiment = \"green\"\n{BASE}");
    let err = ExperimentConfig::from_toml(&mismatch).unwrap().resolve(Experiment::Sharpness, &Overrides::default());
    assert!(format!("{:#}", err.unwrap_err()).contains("experiment"));
}

#[test]
fn green_run_writes_manifest_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = resolved(Experiment::Green, dir.path(), BASE);
    let m = run(&cfg).unwrap();
    assert!(m.checks.iter().any(|c| c.name == "green.A0"));
    for f in ["manifest.json", "green.json", "green_field.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let man = manifest(dir.path());
    assert_eq!(man["experiment"], "green");
    assert_eq!(man["config"]["domain"]["level"], 3);
    assert!(man["versions"]["smtlab"].is_string());
    assert!(man["timings"].as_array().unwrap().iter().any(|t| t["stage"] == "green"));
    let green: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("green.json")).unwrap()).unwrap();
    for key in ["A0", "log_coefficient", "fit_window", "residual_norm", "mean", "field_csv"] {
        assert!(green.get(key).is_some(), "{key}");
    }
    let field = std::fs::read_to_string(dir.path().join("green_field.csv")).unwrap();
    assert!(field.starts_with("vertex,x,y,value\n"));
}

#[test]
fn bubble_check_binary_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let out = dir.path().join("out");
    let o = smtlab(&["bubble_check", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let man = manifest(&out);
    assert_eq!(man["pass"], true);
    let mass = man["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "bubble.mass_full_plane[beta=0.5]")
        .unwrap()["value"]
        .as_f64()
        .unwrap();
    assert!((mass - 2.0).abs() < 1e-6);
    let csv = std::fs::read_to_string(out.join("bubble.csv")).unwrap();
    assert!(csv.starts_with("beta,param,value,energy,margin,notes\n"));
}

#[test]
fn failed_check_gives_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let text = BASE.replace("beta = 0.5", "beta = 0.25").replace("level = 3", "level = 4");
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    let o = smtlab(&["sharpness", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    let man = manifest(&out);
    assert_eq!(o.status.code(), Some(if man["pass"] == true { 0 } else { 1 }));
    let csv = std::fs::read_to_string(out.join("sharpness.csv")).unwrap();
    assert!(csv.starts_with("beta,alpha_factor,alpha,l,J\n"));
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &BASE.replace("beta = 0.5", "beta = [0.5, 1.0]"));
    let o = smtlab(&["green", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("beta"));
    let good = write_config(dir.path(), BASE);
    let o = smtlab(&["green", "--config", good.to_str().unwrap()], &[("SMTLAB_THREADS", "zero")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("SMTLAB_THREADS"));
    let o = smtlab(&["nonsense", "--config", good.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    let o = smtlab(&["green", "--config", good.to_str().unwrap(), "--eps-list", "0.3,x"], &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn module_errors_are_surfaced_verbatim() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let out = dir.path().join("out");
    let o = smtlab(
        &["test_family", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--eps-list", "0.1"],
        &[],
    );
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("invalid parameter: Rε"), "{err}");
}

#[test]
fn thread_count_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let out = dir.path().join("out");
    let o = smtlab(
        &["green", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
        &[("SMTLAB_THREADS", "1")],
    );
    assert!(o.status.code().is_some_and(|c| c <= 1));
    assert_eq!(manifest(&out)["threads"], 1);
}

#[test]
fn sweep_outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(&resolved(Experiment::SubcriticalSweep, &a, BASE)).unwrap();
    let m = run(&resolved(Experiment::SubcriticalSweep, &b, BASE)).unwrap();
    for name in m.outputs.iter().filter(|n| n.as_str() != "manifest.json") {
        let (x, y) = (std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap());
        assert!(x == y, "{name} differs");
    }
    let sweep = std::fs::read_to_string(a.join("sweep.csv")).unwrap();
    let mut lines = sweep.lines();
    assert_eq!(
        lines.next().unwrap(),
        "beta,eps,J,c_eps,lambda_eps,r_eps,t_eps,lambda_over_c2,el_residual,iterations,converged"
    );
    assert_eq!(lines.count(), 2);
    assert!(a.join("solve_beta0.5_eps0.3.json").exists());
    assert!(a.join("u_beta0.5_eps0.2.csv").exists());
}

#[test]
fn full_pipeline_emits_the_headline_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let m = run(&resolved(Experiment::FullPipeline, dir.path(), BASE)).unwrap();
    for f in ["summary.json", "threshold.json", "sweep.csv", "test_family.csv", "green.json"] {
        assert!(m.outputs.iter().any(|o| o == f), "{f}");
    }
    let s: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let b = &s["betas"][0];
    assert!(b["threshold"]["total"].as_f64().unwrap() > 0.0);
    assert_eq!(b["functional"].as_object().unwrap().len(), 2);
    assert_eq!(b["test_family_eps"], 1e-4);
    assert_eq!(b["test_family_beats_threshold"], b["test_family_margin"].as_f64().unwrap() > 0.0);
    assert!(m.checks.iter().any(|c| c.name == "pipeline[beta=0.5].J_below_threshold"));
}
