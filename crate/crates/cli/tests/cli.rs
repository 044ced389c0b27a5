use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stefan-spde"))
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out-dir").arg(out).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_with_bundled_default() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = text.lines();
    let first = lines.next().unwrap();
    assert!(first.starts_with("# config_sha256=") && first.ends_with(" seed=2024"), "{first}");
    assert!(lines.next().unwrap().starts_with("# blown_up=false"));
    assert_eq!(lines.next().unwrap(), "step,t,p,p_prime,norm1,norm2");
    assert!(lines.count() > 100);
    assert!(String::from_utf8_lossy(&o.stdout).contains("blown_up=false"));
}

#[test]
fn missing_nx_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[grid]\nnt = 100\nhorizon = 0.01\n").unwrap();
    let o = run(&["simulate", "--config", cfg.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("grid.nx"), "{}", stderr(&o));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn bad_values_and_usage_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // CFL violation
    let o = run(&["simulate", "--set", "grid.nt=10"], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let o = run(&["no-such-command"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn seed_override_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = run(&["simulate", "--seed", "7", "--set", "output.profile_stride=512"], d.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for name in ["trajectory.csv", "profiles.csv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs");
        assert!(String::from_utf8_lossy(&x).lines().next().unwrap().ends_with(" seed=7"));
    }
    let c = tempfile::tempdir().unwrap();
    run(&["simulate", "--seed", "8"], c.path());
    assert_ne!(std::fs::read(a.path().join("trajectory.csv")).unwrap(), std::fs::read(c.path().join("trajectory.csv")).unwrap());
}

#[test]
fn blow_up_is_reported_not_failed() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--set", "simulate.m_max=0.02", "--set", "simulate.m=0.02"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("# blown_up=true"), "{text}");
}

#[test]
fn numerical_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    // an unclamped fast boundary drives the advection past its CFL limit
    let o = run(
        &[
            "simulate",
            "--set", "boundary.alpha=1e6",
            "--set", "boundary.clamp=1e9",
            "--set", "coefficients.f1={kind=\"constant\", value=50.0}",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn every_subcommand_stays_in_out_dir() {
    let root = tempfile::tempdir().unwrap();
    let out = root.path().join("out");
    let small = ["--set", "grid.nx=16", "--set", "grid.nt=512", "--set", "grid.horizon=0.02"];
    let cases: &[(&[&str], &str)] = &[
        (&["obstacle"], "obstacle.csv"),
        (&["picard-check", "--set", "picard.n_iters=3"], "picard_report.json"),
        (&["holder", "--set", "holder.n_paths=2", "--set", "holder.time_lags=[4,64]", "--set", "holder.space_lags=[1,8]", "--set", "holder.boundary_lags=[2,32]"], "holder.json"),
        (&["kernel-check", "--set", "kernel_check.n_t=3", "--set", "kernel_check.n_x=5"], "kernel_check.json"),
        (&["fit-lob", "--set", "fit_lob.synthetic.horizon=60.0"], "fit_lob.csv"),
        (&["simulate-price"], "price.csv"),
    ];
    for (args, file) in cases {
        let mut all: Vec<&str> = args.to_vec();
        all.extend_from_slice(&small);
        let o = bin().args(&all).arg("--out-dir").arg(&out).current_dir(root.path()).output().unwrap();
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        let text = std::fs::read_to_string(out.join(file)).unwrap();
        if file.ends_with(".json") {
            let v: serde_json::Value = serde_json::from_str(&text).unwrap();
            assert_eq!(v["seed"], 2024);
            assert_eq!(v["config_sha256"].as_str().unwrap().len(), 64);
            assert_eq!(v["schema"], 1);
        } else {
            assert!(text.starts_with("# config_sha256="), "{file}");
        }
    }
    let mut names: Vec<String> = std::fs::read_dir(root.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, vec!["out".to_string()]);
    assert_eq!(std::fs::read_dir(&out).unwrap().count(), cases.len());
}
