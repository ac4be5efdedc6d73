use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_rotor-activation");

fn data(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name);
    p.to_str().unwrap().replace('\\', "/")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn run(config: &Path, args: &[&str]) -> Output {
    Command::new(BIN).arg("-c").arg(config).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn smoke_config(dir: &Path, extra_ocp: &str, vtk: bool) -> PathBuf {
    let body = format!(
        "[mesh]\nfile = \"{}\"\n\n[ocp]\n{extra_ocp}\n\n[output]\ndir = \"out\"\nvtk = {vtk}\n",
        data("disk_blade_coarse.msh")
    );
    write_config(dir, "smoke.toml", &body)
}

#[test]
fn mesh_info_unit_box() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "box.toml",
        "[mesh]\nbox = { lx = 1.0, ly = 1.0, lz = 1.0, nx = 1, ny = 1, nz = 1 }\n",
    );
    let o = run(&cfg, &["mesh-info"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    assert_eq!(field(&s, "nodes"), "8");
    assert_eq!(field(&s, "boundary_triangles"), "12");
    assert_eq!(field(&s, "tetrahedra"), "6");
    let vol: f64 = field(&s, "volume_m3").parse().unwrap();
    assert!((vol - 1.0).abs() < 1e-12);
}

#[test]
fn mesh_info_demo_counts_match_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "demo.toml", &format!("[mesh]\nfile = \"{}\"\n", data("disk_blade.msh")));
    let o = run(&cfg, &["mesh-info"]);
    assert!(o.status.success());
    let s = stdout(&o);
    let text = fs::read_to_string(data("disk_blade.msh")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let at = lines.iter().position(|l| *l == "$Nodes").unwrap();
    assert_eq!(field(&s, "nodes"), lines[at + 1].trim());
    let at = lines.iter().position(|l| *l == "$Elements").unwrap();
    let n: usize = lines[at + 1].trim().parse().unwrap();
    let kinds: Vec<&str> = lines[at + 2..at + 2 + n]
        .iter()
        .map(|l| l.split_whitespace().nth(1).unwrap())
        .collect();
    let count = |k: &str| kinds.iter().filter(|&&x| x == k).count().to_string();
    assert_eq!(field(&s, "tetrahedra"), count("4"));
    assert_eq!(field(&s, "boundary_triangles"), count("2"));
}

#[test]
fn missing_mesh_file_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "[mesh]\nfile = \"nowhere.msh\"\n");
    let o = run(&cfg, &["mesh-info"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("nowhere.msh"), "{err}");
    let o = run(&dir.path().join("absent.toml"), &["mesh-info"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "typo.toml", "[mesh]\npreset = \"demo-coarse\"\n\n[ocp]\nomega_fnial = 50.0\n");
    let o = run(&cfg, &["mesh-info"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("omega_fnial"));
}

#[test]
fn simulate_zero_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke_config(dir.path(), "", true);
    let o = run(&cfg, &["simulate", "--guess", "zero"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let (header, rows) = read_csv(&out.join("controls.csv"));
    assert_eq!(
        header,
        ["step", "time_s", "T_e_C", "omega_Hz", "max_sigma_v_MPa", "max_T_C", "argmax_node"]
    );
    assert_eq!(rows.len(), 21);
    for (k, r) in rows.iter().enumerate() {
        assert_eq!(r[0], k as f64);
        assert_eq!(r[1], 90.0 * k as f64);
        assert!(r[2..6].iter().all(|&v| v == 0.0), "row {k}: {r:?}");
    }
    for k in 0..=20 {
        assert!(out.join(format!("step_{k:04}.vtk")).is_file());
    }
    let echo = fs::read_to_string(out.join("config.echo")).unwrap();
    assert!(echo.contains("omega_rate_limit"));
}

#[test]
fn simulate_ramp_and_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke_config(dir.path(), "", false);
    let ramp = dir.path().join("ramp");
    let again = dir.path().join("again");
    let o = run(
        &cfg,
        &["simulate", "--guess", "linear-ramp", "--output", ramp.to_str().unwrap()],
    );
    assert!(o.status.success());
    let first = ramp.join("controls.csv");
    let (_, rows) = read_csv(&first);
    let max_t: Vec<f64> = rows.iter().map(|r| r[5]).collect();
    assert!(max_t.windows(2).all(|w| w[1] >= w[0]), "{max_t:?}");
    assert!(max_t[20] > 400.0);

    let o2 = run(
        &cfg,
        &["simulate", "--schedule", first.to_str().unwrap(), "--output", again.to_str().unwrap()],
    );
    assert!(o2.status.success(), "{}", String::from_utf8_lossy(&o2.stderr));
    let (_, rows2) = read_csv(&again.join("controls.csv"));
    let j = |rows: &[Vec<f64>]| rows.iter().map(|r| r[4]).fold(0.0, f64::max);
    assert!((j(&rows) - j(&rows2)).abs() <= 1e-12 * j(&rows));
    assert_eq!(field(&stdout(&o), "J_MPa"), field(&stdout(&o2), "J_MPa"));
}

#[test]
fn infeasible_rate_limit_stops_optimize() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke_config(dir.path(), "omega_rate_limit = 0.02", false);
    let o = run(&cfg, &["optimize"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rate limit"));
}

#[test]
fn smoke_optimize_meets_terminal_constraints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke_config(dir.path(), "", false);
    let o = run(&cfg, &["optimize"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    assert_eq!(field(&s, "status"), "Converged");
    let j_final: f64 = field(&s, "J_final_MPa").parse().unwrap();
    let j_ramp: f64 = field(&s, "J_linear_ramp_MPa").parse().unwrap();
    assert!(j_final < j_ramp);

    let out = dir.path().join("out");
    let (_, rows) = read_csv(&out.join("controls.csv"));
    let last = &rows[20];
    // scaled as in the optimizer: 1000 °C and 60 Hz
    assert!(((last[3] - 60.0) / 60.0).abs() <= 1e-6);
    assert!((last[2] - 750.0) / 1000.0 >= -1e-6);
    assert!((last[5] - 400.0) / 1000.0 >= -1e-6);
    for w in rows.windows(2) {
        assert!((0.1 * 90.0 - (w[1][3] - w[0][3])) / 60.0 >= -1e-6);
    }
    assert!(rows.iter().all(|r| r[2] >= -1e-9 && r[2] <= 1000.0 + 1e-9));
    let peak = rows.iter().map(|r| r[4]).fold(0.0, f64::max);
    assert!((peak - j_final).abs() < 1e-5);

    let (header, iters) = read_csv(&out.join("iterations.csv"));
    assert_eq!(header[0], "iter");
    assert_eq!(iters.len(), field(&s, "iterations").parse::<usize>().unwrap());
    let (_, base) = read_csv(&out.join("baseline.csv"));
    assert!((base.iter().map(|r| r[4]).fold(0.0, f64::max) - j_ramp).abs() < 1e-5);
}
