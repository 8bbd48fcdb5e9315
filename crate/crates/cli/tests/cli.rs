use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lagsol(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lagsol"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("LAGSOL_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn value(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
        .to_string()
}

fn numbers(s: &str) -> Vec<f64> {
    s.split(',').map(|x| x.trim().parse().unwrap()).collect()
}

#[test]
fn expander_run_writes_files_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = lagsol(&["expander", "--n", "2", "--alpha", "1", "--a", "1,1", "--samples", "200", "--points", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["profile.csv", "mesh.csv", "planes.txt", "summary.txt", "residuals.csv", "run.cfg"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let mesh = fs::read_to_string(dir.path().join("mesh.csv")).unwrap();
    assert!(mesh.starts_with("re_z1,im_z1,re_z2,im_z2,s_or_y,theta\n"));
    assert_eq!(mesh.lines().count(), 1 + 400);
    let profile = fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    assert!(profile.starts_with("y,r_1,r_2,phi_1,phi_2,theta\n"));
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert_eq!(value(&summary, "status"), "pass");
    let planes = fs::read_to_string(dir.path().join("planes.txt")).unwrap();
    let l1 = numbers(&value(&planes, "L1_angles"));
    let l2 = numbers(&value(&planes, "L2_angles"));
    assert!((l1[0] + l2[0]).abs() < 1e-15 && l1[0] > 0.0);
    let residuals = fs::read_to_string(dir.path().join("residuals.csv")).unwrap();
    assert!(residuals.starts_with("point_id,s_or_y,lagrangian_residual,angle_residual,soliton_residual\n"));
}

#[test]
fn special_lagrangian_expander_has_constant_angle() {
    let dir = tempfile::tempdir().unwrap();
    let o = lagsol(&["expander", "--alpha", "0", "--a", "1,1"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("theta constant: special Lagrangian"));
    assert!(text.contains("theta_spread"));
    assert!(text.contains("mean_curvature_max"));
}

#[test]
fn missing_required_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = lagsol(&["expander", "--alpha", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--a"));
    let o = lagsol(&["expander", "--n", "3", "--alpha", "1", "--a", "1,1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invert_angles_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let o = lagsol(&["invert-angles", "--alpha", "1", "--target", "0.3,0.4"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(value(&text, "residual").parse::<f64>().unwrap() < 1e-10);
    let achieved = numbers(&value(&text, "achieved"));
    assert!((achieved[0] - 0.3).abs() < 1e-10 && (achieved[1] - 0.4).abs() < 1e-10);

    let q = std::f64::consts::FRAC_PI_4.to_string();
    let target = format!("{q},{q}");
    let o = lagsol(&["invert-angles", "--alpha", "0", "--target", &target], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let a = numbers(&value(&stdout(&o), "a"));
    assert!((a[0] - 0.5).abs() < 1e-10 && (a[1] - 0.5).abs() < 1e-10);

    let o = lagsol(&["invert-angles", "--alpha", "1", "--target", "0.9,0.9"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("π/2"), "{}", stderr(&o));
}

#[test]
fn periodic_example_classes() {
    let dir = tempfile::tempdir().unwrap();
    // A² = G(0): u constant.
    let o = lagsol(
        &["periodic", "--lambdas", "1,-1", "--alpha", "0", "--alphas", "1,1", "--first-integral", "1"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(value(&text, "case"), "i");
    assert_eq!(value(&text, "verdict"), "periodic");

    // Oscillating and closed.
    let o = lagsol(
        &["periodic", "--lambdas", "1,-1", "--alpha", "0", "--alphas", "1,1", "--first-integral", "0.7", "--mesh"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(value(&text, "case"), "ii");
    assert_eq!(value(&text, "r"), "2");
    assert_eq!(value(&text, "topology"), "S^1 x S^0 x R^1");
    assert!(dir.path().join("mesh.csv").exists());
    let orbit = fs::read_to_string(dir.path().join("orbit.csv")).unwrap();
    assert!(orbit.starts_with("u1,u2,S,gamma_1,gamma_2,case_tag,periodic_r,topology_tag\n"));

    // Generic data do not close.
    let o = lagsol(
        &["periodic", "--lambdas", "1,-1", "--alpha", "0.3", "--alphas", "1,2", "--first-integral", "0.7"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(value(&text, "verdict").starts_with("quasi-periodic"));
    assert_eq!(value(&text, "topology"), "non-closed immersion");
}

#[test]
fn shrinker_requires_negative_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let o = lagsol(&["shrinker", "--alpha", "1", "--alphas", "1,1", "--first-integral", "0.5"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = lagsol(&["shrinker", "--alpha", "-1", "--alphas", "1,1", "--first-integral", "0.5"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn verify_accepts_exported_runs_and_rejects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let o = lagsol(&["expander", "--alpha", "1", "--a", "1,2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = lagsol(&["verify", "--dir", dir.path().to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("profile_consistency"));

    // Move one vertex off the surface.
    let mesh_path = dir.path().join("mesh.csv");
    let mesh = fs::read_to_string(&mesh_path).unwrap();
    let mut lines: Vec<String> = mesh.lines().map(String::from).collect();
    let mut cells: Vec<String> = lines[5].split(',').map(String::from).collect();
    let v: f64 = cells[1].parse().unwrap();
    cells[1] = (v + 1e-3).to_string();
    lines[5] = cells.join(",");
    fs::write(&mesh_path, lines.join("\n") + "\n").unwrap();
    let o = lagsol(&["verify", "--dir", dir.path().to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("mesh_consistency"), "{}", stderr(&o));

    // Corrupt an angle instead.
    fs::write(&mesh_path, &mesh).unwrap();
    let mut lines: Vec<String> = mesh.lines().map(String::from).collect();
    let mut cells: Vec<String> = lines[7].split(',').map(String::from).collect();
    let last = cells.len() - 1;
    let v: f64 = cells[last].parse().unwrap();
    cells[last] = (v + 1e-6).to_string();
    lines[7] = cells.join(",");
    fs::write(&mesh_path, lines.join("\n") + "\n").unwrap();
    let o = lagsol(&["verify", "--dir", dir.path().to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("angle_max"), "{}", stderr(&o));
}

#[test]
fn verify_periodic_and_translator_runs() {
    let dir = tempfile::tempdir().unwrap();
    let o = lagsol(
        &["periodic", "--lambdas", "1,-1", "--alpha", "0", "--alphas", "1,1", "--first-integral", "0.7", "--mesh"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = lagsol(&["verify"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));

    let dir = tempfile::tempdir().unwrap();
    let o = lagsol(&["translator", "--alpha", "1", "--a", "1,2", "--k", "0,0.5"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let text = stdout(&o);
    assert_eq!(value(&text, "injective"), "true");
    assert!(text.contains("maslov_constant = 0.5"), "{text}");
    let o = lagsol(&["verify"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn periodic_search_hits_target() {
    let dir = tempfile::tempdir().unwrap();
    let target = format!("{},{}", -0.9 * std::f64::consts::PI, 1.05 * std::f64::consts::PI);
    let o = lagsol(
        &[
            "periodic-search",
            "--lambdas",
            "1,-1",
            "--alpha",
            "0.2",
            "--alphas",
            "1,1",
            "--first-integral",
            "0.5",
            "--target",
            &target,
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(value(&text, "residual").parse::<f64>().unwrap() < 1e-10);
    assert_eq!(value(&text, "r"), "40");
}

#[test]
fn flow_family_meshes() {
    let dir = tempfile::tempdir().unwrap();
    let o = lagsol(
        &[
            "flow-family",
            "--lambdas",
            "1,-1",
            "--alpha",
            "0",
            "--alphas",
            "1,1",
            "--first-integral",
            "0.7",
            "--t-list",
            "-1,0,1",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for i in 0..3 {
        assert!(dir.path().join(format!("flow_{i}.csv")).exists());
    }
    let report = fs::read_to_string(dir.path().join("flow_family.txt")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert!(lines[0].ends_with("singular_at_origin = false"));
    assert!(lines[1].contains("t = 0") && lines[1].ends_with("singular_at_origin = true"));
    assert!(lines[2].ends_with("singular_at_origin = false"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["translator", "--alpha", "2", "--a", "1", "--ply"];
    assert_eq!(lagsol(&args, a.path()).status.code(), Some(0));
    assert_eq!(lagsol(&args, b.path()).status.code(), Some(0));
    for f in ["mesh.csv", "mesh.ply", "residuals.csv", "summary.txt", "run.cfg"] {
        let x = fs::read(a.path().join(f)).unwrap();
        let y = fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
    let ply = fs::read_to_string(a.path().join("mesh.ply")).unwrap();
    assert!(ply.starts_with("ply\nformat ascii 1.0\nelement vertex 240\n"));
}

#[test]
fn config_file_and_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    fs::write(&cfg, "# expander run\ncommand = expander\nalpha = 5\na = 1,1\nsamples = 10\npoints = 2\n").unwrap();
    let out = dir.path().join("env_out");
    let o = Command::new(env!("CARGO_BIN_EXE_lagsol"))
        .args(["expander", "--alpha", "1", "--config", cfg.to_str().unwrap()])
        .env("LAGSOL_OUT_DIR", &out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let run = fs::read_to_string(out.join("run.cfg")).unwrap();
    assert!(run.contains("alpha = 1\n"), "{run}");
    let mesh = fs::read_to_string(out.join("mesh.csv")).unwrap();
    assert_eq!(mesh.lines().count(), 1 + 20);

    fs::write(&cfg, "alpha = 1\nthis line is broken\n").unwrap();
    let o = lagsol(&["expander", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}
