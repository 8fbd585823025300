use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bitempo"))
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn command_of(path: &Path) -> String {
    let table: toml::Table = fs::read_to_string(path).unwrap().parse().unwrap();
    table["command"].as_str().unwrap().to_string()
}

fn run_in(out: &Path, path: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(command_of(path))
        .arg("--config")
        .arg(path)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect();
    (header, rows)
}

#[test]
fn every_bundled_scenario_runs() {
    let out = tempfile::tempdir().unwrap();
    let mut n = 0;
    for entry in fs::read_dir(scenarios()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let o = run_in(out.path(), &path, &[]);
            assert!(o.status.success(), "{}: {}", path.display(), stderr(&o));
            let stem = path.file_stem().unwrap().to_str().unwrap();
            let report: Value =
                serde_json::from_slice(&fs::read(out.path().join(format!("{stem}.report.json"))).unwrap()).unwrap();
            for a in report["artifacts"].as_array().unwrap() {
                let (header, rows) = read_csv(&out.path().join(a["file"].as_str().unwrap()));
                assert_eq!(header.len(), a["columns"].as_array().unwrap().len());
                assert_eq!(rows.len() as u64, a["rows"].as_u64().unwrap());
            }
            n += 1;
        }
    }
    assert!(n >= 10);
}

#[test]
fn harmonic_surface_is_a_travelling_cosine() {
    let out = tempfile::tempdir().unwrap();
    let o = run_in(out.path(), &scenarios().join("harmonic_rank_one.toml"), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&out.path().join("harmonic_rank_one.surface.csv"));
    assert_eq!(header, ["t1", "t2", "x", "p1", "p2"]);
    assert_eq!(rows.len(), 101 * 101);
    let worst = rows
        .iter()
        .map(|r| {
            let v: Vec<f64> = r.iter().map(|s| s.parse().unwrap()).collect();
            (v[2] - (v[0] + 2.0 * v[1]).cos()).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst < 1e-6, "max deviation {worst:e}");
}

#[test]
fn mass_spectrum_crosses_zero_at_unit_frequency() {
    let out = tempfile::tempdir().unwrap();
    let o = run_in(out.path(), &scenarios().join("mass_sweep.toml"), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&out.path().join("mass_sweep.mass_spectrum.csv"));
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let (w, m, tach) = (col("omega"), col("m_eff"), col("tachyonic"));
    let mut seen_edge = false;
    for r in &rows {
        let omega: f64 = r[w].parse().unwrap();
        let m_eff: f64 = r[m].parse().unwrap();
        if (omega - 1.0).abs() < 1e-9 {
            assert!(m_eff.abs() < 1e-7, "m_eff({omega}) = {m_eff}");
            seen_edge = true;
        }
        assert_eq!(r[tach] == "true", omega > 1.0 + 1e-9, "omega = {omega}");
    }
    assert!(seen_edge);
}

#[test]
fn missing_required_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let body = fs::read_to_string(scenarios().join("two_level_fluct.toml")).unwrap();
    let body: String = body.lines().filter(|l| !l.starts_with("e1")).map(|l| format!("{l}\n")).collect();
    let cfg = write_config(dir.path(), "no_e1.toml", &body);
    let o = run_in(dir.path(), &cfg, &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("e1"), "{}", stderr(&o));
    assert!(!dir.path().join("no_e1.report.json").exists());
}

#[test]
fn unknown_command_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "typo.toml", "command = \"mass-spectrun\"\n");
    let o = bin().args(["mass-spectrum", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("mass-spectrum"), "{}", stderr(&o));

    let o = bin().args(["frobnicate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn mismatched_subcommand_is_a_usage_error() {
    let out = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["dirac", "--config"])
        .arg(scenarios().join("mass_sweep.toml"))
        .arg("--out")
        .arg(out.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_accepts_bundled_scenarios() {
    let o = bin().args(["validate", "--config"]).arg(scenarios().join("dirac_plane_wave.toml")).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("ok (dirac)"));
}

#[test]
fn validate_names_a_negative_grid_count() {
    let dir = tempfile::tempdir().unwrap();
    let body = fs::read_to_string(scenarios().join("harmonic_rank_one.toml")).unwrap().replacen("n = 101", "n = -5", 1);
    let cfg = write_config(dir.path(), "neg.toml", &body);
    let o = bin().args(["validate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("grid.t1.n") && err.contains("-5"), "{err}");

    let o = run_in(dir.path(), &cfg, &[]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn validate_suggests_known_families() {
    let dir = tempfile::tempdir().unwrap();
    let body = fs::read_to_string(scenarios().join("rank_one_2d.toml"))
        .unwrap()
        .replace("family = \"rank_one\"", "family = \"rank_on\"");
    let cfg = write_config(dir.path(), "fam.toml", &body);
    let o = bin().args(["validate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("rank_on") && err.contains("rank_one"), "{err}");
    for f in bitempo_cli::families::FAMILIES {
        assert!(err.contains(f), "{err}");
    }
}

#[test]
fn reports_are_deterministic_apart_from_timing() {
    let comparable = |dir: &Path, stem: &str| {
        let mut v: Value =
            serde_json::from_slice(&fs::read(dir.join(format!("{stem}.report.json"))).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("timing");
        serde_json::to_vec(&v).unwrap()
    };
    for name in ["harmonic_rank_one", "dirac_plane_wave", "continuity_wave", "two_level_fluct"] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let cfg = scenarios().join(format!("{name}.toml"));
        for d in [&a, &b] {
            assert!(run_in(d.path(), &cfg, &[]).status.success());
        }
        assert_eq!(comparable(a.path(), name), comparable(b.path(), name), "{name}");
        let report: Value =
            serde_json::from_slice(&fs::read(a.path().join(format!("{name}.report.json"))).unwrap()).unwrap();
        for art in report["artifacts"].as_array().unwrap() {
            let f = art["file"].as_str().unwrap();
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
        }
    }
}

#[test]
fn csv_report_flattens_results() {
    let out = tempfile::tempdir().unwrap();
    let o = run_in(out.path(), &scenarios().join("mass_sweep.toml"), &["--format", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&out.path().join("mass_sweep.report.csv"));
    assert_eq!(header, ["key", "value"]);
    let get = |k: &str| rows.iter().find(|r| r[0] == k).map(|r| r[1].clone());
    assert_eq!(get("scenario.command").as_deref(), Some("mass-spectrum"));
    assert!(get("timing.wall_seconds").is_some());
    assert!(rows.iter().any(|r| r[0].starts_with("results.")));
}
