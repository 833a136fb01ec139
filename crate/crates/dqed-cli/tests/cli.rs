use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_dqed");

fn small_config(extra: &str) -> String {
    format!(
        r#"{{
  "schema_version": 1,
  "mesh": {{ "kind": "ball", "subdivisions": 2, "radius_m": 2e-8 }},
  "material": {{ "omega_p_rad_s": 1.37e16, "gamma_rad_s": 1e14 }},
  "modes": {{ "longitudinal": 3, "transverse": 3 }},
  "sweep": {{ "n_f": 256 }}{extra}
}}"#
    )
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.json");
    std::fs::write(&p, text).unwrap();
    p
}

fn dqed(cmd: &str, config: &Path, out: &Path, cache: Option<&Path>) -> Output {
    let mut c = Command::new(BIN);
    c.arg(cmd).arg("--config").arg(config).arg("--out").arg(out).arg("--threads").arg("2");
    if let Some(d) = cache {
        c.arg("--cache").arg(d);
    }
    c.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = vec![];
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn missing_mesh_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = small_config("").replace(
        r#"{ "kind": "ball", "subdivisions": 2, "radius_m": 2e-8 }"#,
        r#"{ "kind": "file", "path": "nowhere.msh" }"#,
    );
    let o = dqed("modes", &write_config(dir.path(), &text), &dir.path().join("out"), None);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = small_config(r#", "sweeep": {}"#);
    let o = dqed("modes", &write_config(dir.path(), &text), &dir.path().join("out"), None);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("sweeep"));
}

#[test]
fn failed_quality_check_is_a_numeric_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = small_config(r#", "synthesis": { "realness_limit": 0.0 }"#);
    let o = dqed("impulse", &write_config(dir.path(), &text), &dir.path().join("out"), None);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn grid_contract_row_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_config(""));
    let out = dir.path().join("out");
    assert_eq!(code(&dqed("response", &cfg, &out, None)), 0);
    assert_eq!(rows(&out.join("response/H_par1_perp2.csv")).len(), 256);
    assert_eq!(code(&dqed("impulse", &cfg, &out, None)), 0);
    let h = rows(&out.join("impulse/h_par1_par1.csv"));
    assert_eq!(h.len(), 512);
    assert!(h[0][0].parse::<f64>().unwrap() < 0.0);
    assert_eq!(code(&dqed("coupling", &cfg, &out, None)), 0);
    assert_eq!(rows(&out.join("coupling/S_perp1_perp1.csv")).len(), 256);
    let meta = std::fs::read_to_string(out.join("metadata.json")).unwrap();
    for key in ["degeneracy_gap", "guard_fraction", "series_switch", "shift_factor", "window", "mesh", "beta"] {
        assert!(meta.contains(&format!("\"{key}\"")), "metadata lacks {key}");
    }
}

#[test]
fn reruns_are_byte_identical_and_hit_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_config(""));
    let cache = dir.path().join("cache");
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    let first = dqed("impulse", &cfg, &a, Some(&cache));
    assert_eq!(code(&first), 0);
    assert!(!String::from_utf8_lossy(&first.stderr).contains("mode cache hit"));
    let second = dqed("impulse", &cfg, &b, Some(&cache));
    assert_eq!(code(&second), 0);
    assert!(String::from_utf8_lossy(&second.stderr).contains("mode cache hit"));
    assert_eq!(code(&dqed("impulse", &cfg, &c, None)), 0);
    let (ta, tb, tc) = (tree(&a), tree(&b), tree(&c));
    assert!(ta.len() > 10);
    assert_eq!(ta, tb);
    assert_eq!(ta, tc);
}

#[test]
fn modes_table_carries_the_sphere_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_config(""));
    let out = dir.path().join("out");
    assert_eq!(code(&dqed("modes", &cfg, &out, None)), 0);
    let t = rows(&out.join("kappa.csv"));
    assert_eq!(t.len(), 6);
    assert_eq!(t[0][0], "par");
    assert_eq!(t[0][5].parse::<f64>().unwrap(), 3.0);
    let kappa: f64 = t[0][2].parse().unwrap();
    assert!((kappa - 3.0).abs() / 3.0 < 0.1);
    assert!(t[3][5].is_empty());
}

/// One longitudinal mode of a small ball peaks where `1/χ + 1/κ∥ = 0`,
/// `ω = ω_P/√κ∥`, for weak damping.
#[test]
fn small_ball_single_mode_peak() {
    let dir = tempfile::tempdir().unwrap();
    let omega_p = 1.0e16;
    let text = format!(
        r#"{{
  "schema_version": 1,
  "mesh": {{ "kind": "ball", "subdivisions": 3, "radius_m": 3e-10 }},
  "material": {{ "omega_p_rad_s": {omega_p:e}, "gamma_rad_s": 1e13 }},
  "modes": {{ "longitudinal": 1, "transverse": 0 }},
  "selection": {{ "labels": ["par1"] }},
  "sweep": {{ "n_f": 2048, "omega_max": {{ "kind": "fixed", "value_rad_s": 2e16 }} }}
}}"#
    );
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    assert_eq!(code(&dqed("modes", &cfg, &out, None)), 0);
    let kappa: f64 = rows(&out.join("kappa.csv"))[0][2].parse().unwrap();
    let o = dqed("response", &cfg, &out, None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let h = rows(&out.join("response/H_par1_par1.csv"));
    let peak = h
        .iter()
        .map(|r| (r[0].parse::<f64>().unwrap(), r[1].parse::<f64>().unwrap().hypot(r[2].parse().unwrap())))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
        .0;
    let closed = omega_p / kappa.sqrt();
    assert!((peak - closed).abs() / closed < 0.02, "peak {peak:e} vs {closed:e}");
}

#[test]
fn field_command_writes_point_tables() {
    let dir = tempfile::tempdir().unwrap();
    let text = small_config(
        r#", "drive": { "kind": "white_band", "lo_rad_s": 0.0, "hi_rad_s": 2e16, "amplitude_re": 1.0 },
  "field": { "points_m": [[0.0, 0.0, 0.0], [0.0, 0.0, 6e-8]] }"#,
    );
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    let o = dqed("field", &cfg, &out, None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(rows(&out.join("field/efield_inside.csv")).len(), 256);
    assert_eq!(rows(&out.join("field/efield_outside.csv")).len(), 256);
    assert_eq!(rows(&out.join("field/coordinates_time.csv")).len(), 512);

    let boundary = small_config(
        r#", "drive": { "kind": "white_band", "lo_rad_s": 0.0, "hi_rad_s": 2e16, "amplitude_re": 1.0 },
  "field": { "points_m": [[0.0, 0.0, 2e-8]] }"#,
    );
    let o = dqed("field", &write_config(dir.path(), &boundary), &out, None);
    assert_eq!(code(&o), 1);
}

#[test]
fn validation_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    // 1280 triangles split the l = 3 multiplet beyond the degeneracy gap.
    let text = small_config(r#", "validate": { "sphere_subdivisions": 8 }"#);
    let out = dir.path().join("out");
    let o = dqed("validate", &write_config(dir.path(), &text), &out, None);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let table = rows(&out.join("validate.csv"));
    let failed: Vec<&str> = table.iter().filter(|r| r[4] == "false").map(|r| r[0].as_str()).collect();
    assert_eq!(failed, ["sphere_multiplets_3_5_7"]);
}

#[test]
fn default_validation_battery_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = dqed("validate", &write_config(dir.path(), &small_config("")), &out, None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(rows(&out.join("validate.csv")).iter().all(|r| r[4] == "true"));
}
