use std::path::Path;
use std::process::{Command, Output};

use discrete_conformal::mesh::load_mesh;

fn dconf(out_root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dconf"))
        .args(args)
        .env("DCONF_OUT", out_root)
        .output()
        .expect("binary runs")
}

fn read_kv(path: &Path) -> Vec<(String, String)> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            (rec[0].to_string(), rec[1].to_string())
        })
        .collect()
}

fn value(kv: &[(String, String)], key: &str) -> String {
    kv.iter().find(|(k, _)| k == key).map(|(_, v)| v.clone()).unwrap()
}

#[test]
fn gen_writes_off_under_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let out = dconf(dir.path(), &["gen", "--n", "8", "--m", "6"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mesh = load_mesh(dir.path().join("hemisphere_n8_m6.off")).unwrap();
    assert_eq!(mesh.vertex_count(), 1 + 8 * 6);

    let disk = dir.path().join("sub/disk.off");
    let out = dconf(
        dir.path(),
        &["gen", "--disk-rings", "3", "--out", disk.to_str().unwrap()],
    );
    assert!(out.status.success());
    assert_eq!(load_mesh(&disk).unwrap().ambient_dim(), 2);
}

#[test]
fn solve_hemisphere_reports_relative_error() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let out = dconf(
        dir.path(),
        &[
            "solve",
            "--n",
            "12",
            "--r",
            "0.9166666666666666",
            "--out-dir",
            run.to_str().unwrap(),
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let kv = read_kv(&run.join("report.csv"));
    assert_eq!(value(&kv, "converged"), "true");
    assert_eq!(value(&kv, "folds"), "0");
    let err: f64 = value(&kv, "relative_error").parse().unwrap();
    assert!(err < 1e-2, "{err}");
    let map = std::fs::read_to_string(run.join("map.csv")).unwrap();
    assert_eq!(map.lines().count(), 1 + 1 + 12 * 9);
    assert!(std::fs::read_to_string(run.join("trace.csv")).unwrap().lines().count() > 2);
}

#[test]
fn solve_planar_disk_is_already_conformal() {
    let dir = tempfile::tempdir().unwrap();
    let out = dconf(dir.path(), &["solve", "--disk-rings", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let kv = read_kv(&dir.path().join("solve_disk_k4/report.csv"));
    let ec: f64 = value(&kv, "conformal").parse().unwrap();
    assert!(ec.abs() < 1e-10, "{ec}");
}

#[test]
fn quality_and_bounds_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dconf(dir.path(), &["quality", "--n", "16", "--r", "0.25"]);
    assert!(out.status.success());
    let q = std::fs::read_to_string(dir.path().join("quality_hemisphere_n16_m3.csv")).unwrap();
    assert!(q.lines().count() > 1);

    let out = dconf(dir.path(), &["bounds", "--n", "8", "--m", "6", "--samples", "8"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("bounds_hemisphere_n8_m6.csv")).unwrap();
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("max,"));
    assert!(last.ends_with("true,true"), "{last}");
}

#[test]
fn converge_is_deterministic_and_honours_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    std::fs::write(&cfg, "# small sweep\nns = 8,12,16\nrho = unit\n").unwrap();
    let mut outputs = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "3")] {
        let run = dir.path().join(name);
        let out = dconf(
            dir.path(),
            &[
                "converge",
                "--r",
                "0.9166666666666666",
                "--config",
                cfg.to_str().unwrap(),
                "--threads",
                threads,
                "--out-dir",
                run.to_str().unwrap(),
            ],
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(["convergence.csv", "plot_data.dat", "fit.csv"].map(|f| std::fs::read(run.join(f)).unwrap()));
        assert!(run.join("timing.csv").exists());
    }
    assert_eq!(outputs[0], outputs[1]);
    let rows = String::from_utf8(outputs[0][0].clone()).unwrap();
    assert_eq!(rows.lines().count(), 4);
}

#[test]
fn beltrami_reproduces_linear_boundary_data() {
    let dir = tempfile::tempdir().unwrap();
    let mesh_path = dir.path().join("disk.off");
    assert!(dconf(
        dir.path(),
        &["gen", "--disk-rings", "3", "--out", mesh_path.to_str().unwrap()]
    )
    .status
    .success());
    let mesh = load_mesh(&mesh_path).unwrap();
    let mut b = String::from("vertex,x,y\n");
    for i in mesh.boundary_vertices() {
        let v = mesh.vertex(i);
        b.push_str(&format!("{i},{},{}\n", 2.0 * v.x + 1.0, v.y - 0.5));
    }
    let bpath = dir.path().join("boundary.csv");
    std::fs::write(&bpath, b).unwrap();
    let out_path = dir.path().join("g.csv");
    let out = dconf(
        dir.path(),
        &[
            "beltrami",
            "--mesh",
            mesh_path.to_str().unwrap(),
            "--boundary",
            bpath.to_str().unwrap(),
            "--out",
            out_path.to_str().unwrap(),
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut r = csv::Reader::from_path(&out_path).unwrap();
    for rec in r.records() {
        let rec = rec.unwrap();
        let i: usize = rec[0].parse().unwrap();
        let (x, y): (f64, f64) = (rec[1].parse().unwrap(), rec[2].parse().unwrap());
        let v = mesh.vertex(i);
        assert!((x - (2.0 * v.x + 1.0)).abs() < 1e-9 && (y - (v.y - 0.5)).abs() < 1e-9);
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(dconf(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(dconf(dir.path(), &["gen"]).status.code(), Some(2));
    assert_eq!(
        dconf(dir.path(), &["gen", "--n", "8", "--m", "2"]).status.code(),
        Some(2)
    );
    assert_eq!(
        dconf(dir.path(), &["quality", "--mesh", "/nonexistent.off"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        dconf(dir.path(), &["converge", "--r", "1.5", "--ns", "8"])
            .status
            .code(),
        Some(2)
    );
    // an iteration cap of one cannot reach the tolerance
    let out = dconf(dir.path(), &["solve", "--n", "8", "--m", "8", "--max-iterations", "1"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}
