mod common;

use std::path::Path;
use std::process::Command;

use common::fixture;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shapeforge::config::RunConfig;
use shapeforge::driver::*;
use shapeforge::vtk::{parse_vtk, read_vtk, render_vtk, export_vtk, PointField};

fn small_config(dir: &Path, steps: usize) -> RunConfig {
    let mut cfg = RunConfig { refinements: 0, nu: 0.1, output_dir: dir.to_path_buf(), vtk_every: 2, ..Default::default() };
    cfg.optimizer.max_steps = steps;
    cfg.optimizer.max_inner = 2;
    cfg
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shapeforge"))
}

#[test]
fn vtk_round_trip() {
    let mesh = fixture();
    let nv = mesh.num_vertices();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let s: Vec<f64> = (0..nv).map(|_| rng.gen_range(-1e3..1e3)).collect();
    let v: Vec<f64> = (0..2 * nv).map(|_| rng.gen_range(-1.0..1.0) * 1e-7).collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.vtk");
    export_vtk(&mesh, &[PointField::scalar("eta", s.clone()), PointField::vector("w", v.clone())], &path, false).unwrap();
    let back = read_vtk(&path).unwrap();
    assert_eq!(back.triangles, mesh.triangles);
    let check = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(1.0));
    match back.field("eta").unwrap() {
        PointField::Scalar { values, .. } => assert!(check(values, &s)),
        _ => panic!("eta is scalar"),
    }
    match back.field("w").unwrap() {
        PointField::Vector { values, .. } => assert!(check(values, &v)),
        _ => panic!("w is vector"),
    }
}

#[test]
fn vtk_geometry_only_and_zero_deformation() {
    let mesh = fixture();
    let text = render_vtk(&mesh, &[], false).unwrap();
    let data = parse_vtk(&text, "mem").unwrap();
    assert!(data.fields.is_empty());
    assert_eq!(data.points.len(), mesh.num_vertices());
    let zero = PointField::vector("w", vec![0.0; 2 * mesh.num_vertices()]);
    let a = parse_vtk(&render_vtk(&mesh, &[zero.clone()], false).unwrap(), "a").unwrap();
    let b = parse_vtk(&render_vtk(&mesh, &[zero], true).unwrap(), "b").unwrap();
    assert_eq!(a.points, b.points);
    assert!(render_vtk(&mesh, &[], true).is_err());
}

#[test]
fn config_errors_name_the_field() {
    let base = Path::new(".");
    let e = RunConfig::parse("physics.viscosity = 0.1\n", "t.cfg", base).unwrap_err().to_string();
    assert!(e.contains("physics.viscosity"), "{e}");
    let e = RunConfig::parse("penalty.eta_lb = 0.8\npenalty.eta_init = 0.5\n", "t.cfg", base).unwrap_err().to_string();
    assert!(e.contains("eta"), "{e}");
    let e = RunConfig::parse("outer.eps_inner = 0\n", "t.cfg", base).unwrap_err().to_string();
    assert!(e.contains("eps_inner"), "{e}");
    let e = RunConfig::parse("physics.nu = 0.1\nphysics.nu = 0.2\n", "t.cfg", base).unwrap_err().to_string();
    assert!(e.contains("t.cfg") && e.contains('2'), "{e}");
}

#[test]
fn config_text_round_trip() {
    let mut cfg = RunConfig::default();
    cfg.nu = 0.07;
    cfg.solvers.extension.newton.line_search = true;
    let back = RunConfig::parse(&cfg.to_text(), "rt", Path::new("")).unwrap();
    assert_eq!(back.to_text(), cfg.to_text());
}

#[test]
fn shipped_presets_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../studies");
    for name in ["square2d.cfg", "gridstudy.cfg"] {
        RunConfig::from_file(&root.join(name)).unwrap();
    }
}

#[test]
fn missing_config_exits_2() {
    let out = bin().args(["run", "--config", "/nonexistent/x.cfg"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/x.cfg"));
}

#[test]
fn dry_run_prints_parameters_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("never");
    let out = bin().args(["run", "--dry-run", "--output"]).arg(&out_dir).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("physics.nu = ") && text.contains("penalty.b = "));
    assert!(!out_dir.exists());
}

#[test]
fn single_level_grid_study_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_grid_study(&small_config(dir.path(), 1), &[2]).is_err());
    let out = bin().args(["grid-study", "--levels", "2", "--dry-run"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn equal_levels_have_zero_distance() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_grid_study(&small_config(dir.path(), 2), &[0, 0]).unwrap();
    assert_eq!(report.max_hausdorff(), 0.0);
    assert_eq!(report.tip_spread(), (0.0, 0.0));
    assert!(dir.path().join("grid_study.txt").is_file());
}

#[test]
fn hausdorff_oracle() {
    let sq = |s: f64| vec![[-s, -s], [s, -s], [s, s], [-s, s]];
    assert!((hausdorff_distance(&sq(1.0), &sq(1.5)) - 0.5 * 2f64.sqrt()).abs() <= 1e-15);
    assert_eq!(hausdorff_distance(&sq(1.0), &sq(1.0)), 0.0);
}

fn walk(dir: &Path, out: &mut Vec<std::path::PathBuf>) {
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            walk(&p, out);
        } else {
            out.push(p);
        }
    }
}

#[test]
fn run_writes_artifacts_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let ra = run_optimization(&small_config(&a, 4)).unwrap();
    run_optimization(&small_config(&b, 4)).unwrap();
    assert!(ra.summary.min_det > 0.0 && ra.summary.inverted == 0);
    assert!(ra.summary.failure.is_none());
    for f in ["convergence.csv", "reference.vtk", "deformed.vtk", "deformed.mesh", "summary.txt", "step_0002.vtk", "step_0004.vtk"] {
        assert!(a.join(f).is_file(), "missing {f}");
    }
    let csv = std::fs::read(a.join("convergence.csv")).unwrap();
    assert_eq!(csv, std::fs::read(b.join("convergence.csv")).unwrap());
    assert_eq!(String::from_utf8_lossy(&csv).lines().count(), 1 + 4);
    let mut files = Vec::new();
    walk(dir.path(), &mut files);
    assert!(files.iter().all(|f| f.starts_with(&a) || f.starts_with(&b)));
    let deformed = read_vtk(&a.join("deformed.vtk")).unwrap();
    assert!(deformed.field("eta").is_some());
}

#[test]
fn bad_csv_name_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(&dir.path().join("x"), 1);
    cfg.csv_name = "../escape.csv".into();
    assert!(run_optimization(&cfg).is_err());
    assert!(!dir.path().join("escape.csv").exists());
}

#[test]
fn cli_run_exit_zero_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    std::fs::write(&cfg, "mesh.refinements = 0\nphysics.nu = 0.1\nouter.max_inner = 1\noutput.dir = out\n").unwrap();
    let out = bin().args(["run", "--steps", "1", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("min_detDF = "));
    assert!(dir.path().join("out/summary.txt").is_file());
}
