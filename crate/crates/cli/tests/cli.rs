use std::path::Path;
use std::process::{Command, Output};

use ecap_core::{GridFunction, GridSpec, C64};
use serde_json::Value;

fn ecap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecap")).args(args).env_remove("ECAP_THREADS").output().expect("run ecap")
}

fn summary(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    assert_eq!(text.trim_end().lines().count(), 1);
    serde_json::from_str(text.trim()).unwrap()
}

fn complex(v: &Value) -> C64 {
    C64::new(v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

#[test]
fn roots_of_the_laplacian() {
    let s = summary(&ecap(&["roots", "--op", "1,0,1"]));
    let (l1, l2) = (complex(&s["lambda1"]), complex(&s["lambda2"]));
    assert!((l1 - C64::new(0.0, 1.0)).norm() < 1e-14 && (l2 - C64::new(0.0, -1.0)).norm() < 1e-14);
    assert!((complex(&s["k1"]).re - 1.0 / (4.0 * std::f64::consts::PI)).abs() < 1e-12);
    assert_eq!(s["config"]["command"], "roots");
}

#[test]
fn exit_codes() {
    assert_eq!(ecap(&["roots", "--op", "1,0,-1"]).status.code(), Some(1));
    assert_eq!(ecap(&["roots", "--op", "1,0"]).status.code(), Some(2));
    assert_eq!(ecap(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(ecap(&["curv", "--in", "/nonexistent/points.csv"]).status.code(), Some(2));
    assert_eq!(ecap(&["phi", "--op", "1,0,1", "--z", "0"]).status.code(), Some(1));
    assert_eq!(ecap(&["--threads", "0", "roots", "--op", "1,0,1"]).status.code(), Some(2));
    assert_eq!(ecap(&["--help"]).status.code(), Some(0));
}

#[test]
fn malformed_csv_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.csv");
    std::fs::write(&p, "a,b,c\n1,2,3\n").unwrap();
    assert_eq!(ecap(&["cap", "--in", p.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn collinear_measure_has_zero_energy() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("line.csv");
    let mut text = String::from("x,y,w\n");
    for k in 0..12 {
        text.push_str(&format!("{},{},0.5\n", 0.1 * k as f64, -0.3 * k as f64 + 1.0));
    }
    std::fs::write(&p, text).unwrap();
    let s = summary(&ecap(&["curv", "--in", p.to_str().unwrap()]));
    assert_eq!(s["energy"].as_f64(), Some(0.0));
    let s = summary(&ecap(&["--threads", "2", "cap", "--in", p.to_str().unwrap()]));
    assert!(s["estimate"]["value"].as_f64().unwrap() > 0.0);
    assert_eq!(s["threads"], 2);
}

#[test]
fn phi_at_a_point() {
    let s = summary(&ecap(&["phi", "--op", "0.25,0+0.25i,-0.25", "--z", "0.25+0.25i"]));
    // Bitsadze: Φ = z̄/(πz)
    let z = C64::new(0.25, 0.25);
    let want = z.conj() / (std::f64::consts::PI * z);
    assert!((complex(&s["phi"]) - want).norm() < 1e-12 * want.norm());
}

#[test]
fn cheese_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let p = dir.path().join(name);
        summary(&ecap(&["cheese", "--seed", "7", "--holes", "20", "--hole-scale", "0.1", "--spacing", "0.0078125", "--out", p.to_str().unwrap()]));
        (std::fs::read(&p).unwrap(), std::fs::read(p.with_extension("json")).unwrap())
    };
    let (a, b) = (run("a.pgm"), run("b.pgm"));
    assert_eq!(a, b);
    assert!(a.0.starts_with(b"P5"));
    let side: Value = serde_json::from_slice(&a.1).unwrap();
    assert_eq!(side["spacing"], 0.0078125);
    assert_eq!(side["construction"]["holes"].as_array().unwrap().len(), 20);
}

fn write_json(f: &GridFunction, path: &Path) {
    f.write_json(path).unwrap();
}

#[test]
fn localize_writes_cells_and_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let grid = GridSpec::square(-1.0, 1.0, 1.0 / 128.0).unwrap();
    let bump = |z: C64| {
        let t = z.norm_sqr() / 0.16;
        C64::new(if t < 1.0 { (-1.0 / (1.0 - t)).exp() } else { 0.0 }, 0.0)
    };
    let fpath = dir.path().join("f.json");
    write_json(&GridFunction::from_fn(grid, bump), &fpath);
    let out = dir.path().join("pieces");
    let s = summary(&ecap(&[
        "localize", "--op", "1,0,1", "--f", fpath.to_str().unwrap(), "--delta", "0.25", "--out", out.to_str().unwrap(), "--check",
    ]));
    assert!(s["reconstruction_rel_error"].as_f64().unwrap() < 1e-3);
    let csv = std::fs::read_to_string(out.join("coefficients.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("j1,j2,re_c0,im_c0,re_c11,im_c11,re_c12,im_c12"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len() as u64, s["nonzero"].as_u64().unwrap());
    let first: Vec<&str> = rows[0].split(',').collect();
    let cell: Value = serde_json::from_str(&std::fs::read_to_string(out.join(format!("cell_{}_{}.json", first[0], first[1]))).unwrap()).unwrap();
    assert!((cell["laurent"]["c0"][0].as_f64().unwrap() - first[2].parse::<f64>().unwrap()).abs() < 1e-15);
    // Σ c₀ = ∫ 𝓛f = 0 for compactly supported f
    let total: f64 = rows.iter().map(|r| r.split(',').nth(2).unwrap().parse::<f64>().unwrap()).sum();
    assert!(total.abs() < 1e-6, "{total}");
}

#[test]
fn scan_flags_interior_sources() {
    let dir = tempfile::tempdir().unwrap();
    let h = 1.0 / 256.0;
    let grid = GridSpec::square(-1.0, 1.0, h).unwrap();
    let f = GridFunction::from_fn_with_grad(
        grid,
        |z| C64::new(z.norm_sqr(), 0.0),
        |z| C64::new(2.0 * z.re, 0.0),
        |z| C64::new(2.0 * z.im, 0.0),
    );
    let fpath = dir.path().join("quad.json");
    write_json(&f, &fpath);
    let mask = dir.path().join("x.pgm");
    summary(&ecap(&["cheese", "--seed", "1", "--holes", "0", "--radius", "0.5", "--spacing", "0.00390625", "--out", mask.to_str().unwrap()]));
    let out = dir.path().join("scan");
    let s = summary(&ecap(&[
        "scan", "--op", "1,0,1", "--f", fpath.to_str().unwrap(), "--mask", mask.to_str().unwrap(), "--radii", "0.125",
        "--centers", "0+0i;0.1-0.1i", "--out", out.to_str().unwrap(),
    ]));
    assert_eq!(s["per_radius"][0]["infinite"], 2);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema"], "ecap-report/1");
    assert_eq!(report["function_id"], "quad");
    assert_eq!(report["records"][0]["ratio_lower"], "inf");
    assert!(report["disclaimer"].as_str().unwrap().contains("constants"));
    let svg = std::fs::read_to_string(out.join("heatmap.svg")).unwrap();
    assert!(svg.contains("version=\"1.1\"") && svg.trim_end().ends_with("</svg>"));
    let coarse = ecap(&[
        "scan", "--op", "1,0,1", "--f", fpath.to_str().unwrap(), "--mask", mask.to_str().unwrap(), "--radii", "0.01",
        "--centers", "0+0i", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(coarse.status.code(), Some(1));
}

#[test]
fn localize_reports_capacity_ratios_against_a_mask() {
    let dir = tempfile::tempdir().unwrap();
    let grid = GridSpec::square(-1.0, 1.0, 1.0 / 64.0).unwrap();
    let fpath = dir.path().join("f.json");
    write_json(&GridFunction::from_fn(grid, |z| C64::new((1.0 - z.norm_sqr() / 0.16).max(0.0).powi(4), 0.0)), &fpath);
    let mask = dir.path().join("x.pgm");
    summary(&ecap(&["cheese", "--seed", "3", "--holes", "0", "--center", "0.5+0.5i", "--radius", "0.25", "--spacing", "0.015625", "--out", mask.to_str().unwrap()]));
    let out = dir.path().join("pieces");
    let s = summary(&ecap(&[
        "localize", "--op", "1,0,1", "--f", fpath.to_str().unwrap(), "--delta", "0.25", "--out", out.to_str().unwrap(),
        "--mask", mask.to_str().unwrap(), "--k", "1.5", "--k4", "6",
    ]));
    assert_eq!(s["constants"]["k4"], 6.0);
    assert!(s["omega"].as_f64().unwrap() > 0.0);
    let mut seen = 0;
    for entry in std::fs::read_dir(&out).unwrap() {
        let path = entry.unwrap().path();
        if !path.file_name().unwrap().to_str().unwrap().starts_with("cell_") {
            continue;
        }
        let cell: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let cap = &cell["capacity"];
        assert!((cap["radius"].as_f64().unwrap() - 0.875).abs() < 1e-15);
        let (lo, up) = (cap["cap_lower"].as_f64().unwrap(), cap["cap_upper"].as_f64().unwrap());
        assert!(lo > 0.0 && lo <= up);
        assert!(cap["c0"].is_number() && cap["c1"].is_number());
        let decay = &cell["decay"];
        let ratio = decay["radii"][0].as_f64().unwrap() / decay["support_radius"].as_f64().unwrap();
        assert!((ratio - 6.0 * 17.0 / 16.0).abs() < 1e-12, "{ratio}");
        seen += 1;
    }
    assert_eq!(seen, s["nonzero"].as_u64().unwrap());
}

#[test]
fn scan_rejects_a_nonpositive_omega_scale() {
    let dir = tempfile::tempdir().unwrap();
    let grid = GridSpec::square(-1.0, 1.0, 1.0 / 64.0).unwrap();
    let fpath = dir.path().join("f.json");
    write_json(&GridFunction::from_fn(grid, |z| C64::new(z.norm_sqr(), 0.0)), &fpath);
    let mask = dir.path().join("x.pgm");
    summary(&ecap(&["cheese", "--seed", "1", "--holes", "0", "--radius", "0.5", "--spacing", "0.015625", "--out", mask.to_str().unwrap()]));
    let run = |scale: &str| {
        ecap(&[
            "scan", "--op", "1,0,1", "--f", fpath.to_str().unwrap(), "--mask", mask.to_str().unwrap(), "--radii", "0.5",
            "--centers", "0+0i", "--omega-scale", scale, "--out", dir.path().join("scan").to_str().unwrap(),
        ])
    };
    let ok = run("2");
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert_ne!(run("0").status.code(), Some(0));
}
