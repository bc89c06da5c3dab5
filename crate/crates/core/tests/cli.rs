use std::process::Command;

fn mdsolve(args: &[&str]) -> (bool, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_mdsolve"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.success(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn generate_reports_cross_layout() {
    let (ok, stdout, _) = mdsolve(&["generate", "--n", "4"]);
    assert!(ok);
    assert!(stdout.contains("25 omega + 20 gamma = 45"), "{stdout}");
    let (ok, json, _) = mdsolve(&["generate", "--n", "4", "--format", "json"]);
    assert!(ok);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["n_gamma"], 20);
}

#[test]
fn solve_with_each_preconditioner() {
    for p in ["ml", "bl", "bu", "bd", "none"] {
        let (ok, stdout, stderr) = mdsolve(&[
            "solve",
            "--n",
            "8",
            "--kpar",
            "1e4",
            "--kappa",
            "1e-4",
            "--precond",
            p,
        ]);
        assert!(ok, "{p}: {stderr}");
        assert!(stdout.contains("converged true"), "{stdout}");
    }
    let (ok, _, stderr) = mdsolve(&["solve", "--n", "48", "--precond", "bl"]);
    assert!(!ok);
    assert!(stderr.contains("2000"), "{stderr}");
    let (ok, _, _) = mdsolve(&[
        "solve",
        "--n",
        "48",
        "--precond",
        "bl",
        "--schur",
        "diag",
        "--inner-omega",
        "amg",
    ]);
    assert!(ok);
}

#[test]
fn export_import_and_solve_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("sys");
    let hist = dir.path().join("hist.csv");
    let sys_s = sys.to_str().unwrap();
    assert!(
        mdsolve(&[
            "export",
            "--n",
            "6",
            "--geometry",
            "random_2d",
            "--out",
            sys_s
        ])
        .0
    );
    let (ok, stdout, _) = mdsolve(&["import", "--system", sys_s]);
    assert!(ok);
    assert!(stdout.contains("A_omega_gamma == A_gamma_omega^T: true"));
    assert!(mdsolve(&["solve", "--system", sys_s, "--out", hist.to_str().unwrap()]).0);
    let csv = std::fs::read_to_string(&hist).unwrap();
    assert!(csv.starts_with("iteration,relative_residual\n0,1e0\n"));
    let (ok, stdout, _) = mdsolve(&[
        "amg-stats",
        "--matrix",
        sys.join("A_gamma_gamma.mtx").to_str().unwrap(),
    ]);
    assert!(ok);
    assert!(stdout.contains("diagonal, direct"), "{stdout}");
}

#[test]
fn sweep_from_flags_and_config() {
    let (ok, stdout, _) = mdsolve(&["sweep", "--n", "4", "--n", "8", "--format", "markdown"]);
    assert!(ok);
    assert_eq!(stdout.lines().count(), 2 + 9);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(
        &cfg,
        "geometry = { kind = \"regular_3d\", planes = 3 }\nsizes = [4]\nk_parallel = [1.0]\nkappa = [1.0]\n",
    )
    .unwrap();
    let (ok, stdout, _) = mdsolve(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert!(ok);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("regular_3d(planes=3),4,1,1e0,1e0,ml,"));
}

#[test]
fn bad_input_fails_cleanly() {
    let (ok, _, stderr) = mdsolve(&["import", "--system", "/nonexistent/dir"]);
    assert!(!ok);
    assert!(stderr.starts_with("error:"));
    assert!(!mdsolve(&["solve", "--precond", "xyz"]).0);
}
