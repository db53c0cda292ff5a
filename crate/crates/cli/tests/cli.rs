use std::path::Path;
use std::process::{Command, Output};

fn shfd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shfd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_constant_pgm(path: &Path) {
    let mut bytes = b"P5\n64 64\n255\n".to_vec();
    bytes.extend(std::iter::repeat_n(128u8, 64 * 64));
    std::fs::write(path, bytes).unwrap();
}

#[test]
fn constant_image_exits_genuine() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("flat.pgm");
    write_constant_pgm(&img);
    let out = shfd(&["detect", p(&img)]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["verdict"], "genuine");
    assert_eq!(report["keypoints"], 0);
    assert!(report["config"]["matcher"]["epsilon"].is_number());
}

#[test]
fn missing_file_exits_with_error() {
    let out = shfd(&["detect", "/nonexistent/image.png"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn invalid_parameters_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("flat.pgm");
    write_constant_pgm(&img);
    let out = shfd(&["detect", p(&img), "--epsilon", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = shfd(&[
        "perturb",
        p(&img),
        "--op",
        "blur",
        "--param",
        "1",
        "--window",
        "4",
        "--out",
        p(&dir.path().join("x.png")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_then_detect_and_match() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    let out = shfd(&[
        "synth",
        "--out",
        p(&suite),
        "--n",
        "5",
        "--size",
        "256",
        "--seed",
        "3",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let pngs = std::fs::read_dir(&suite)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "png")
        })
        .count();
    assert_eq!(pngs, 10);
    assert!(suite.join("000_forged.truth.json").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(suite.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest.as_array().unwrap().len(), 10);

    let forged = suite.join("000_forged.png");
    let out = shfd(&[
        "detect",
        p(&forged),
        "--overlay",
        p(&dir.path().join("o.png")),
    ]);
    assert_eq!(
        out.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    assert!(dir.path().join("o.png").exists());

    let out = shfd(&["match", p(&forged)]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config="));
    assert_eq!(lines.next().unwrap(), "ax,ay,bx,by,d1,d2,d3,d4");
    assert!(lines.count() >= 5);

    let kp = dir.path().join("kp.csv");
    let desc = dir.path().join("desc.csv");
    let out = shfd(&[
        "dump-keypoints",
        p(&forged),
        "--out",
        p(&kp),
        "--descriptors",
        p(&desc),
    ]);
    assert!(out.status.success());
    assert!(std::fs::read_to_string(&kp).unwrap().lines().count() > 2);
    assert!(std::fs::read_to_string(&desc).unwrap().lines().count() > 2);
}

#[test]
fn perturb_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    assert!(
        shfd(&["synth", "--out", p(&suite), "--n", "1", "--size", "256"])
            .status
            .success()
    );
    let src = suite.join("000_genuine.png");
    let a = dir.path().join("a.png");
    let b = dir.path().join("b.png");
    for target in [&a, &b] {
        let out = shfd(&[
            "perturb",
            p(&src),
            "--op",
            "noise",
            "--param",
            "3",
            "--seed",
            "7",
            "--out",
            p(target),
        ]);
        assert!(out.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let out = shfd(&[
        "perturb",
        p(&src),
        "--op",
        "jpeg",
        "--param",
        "60",
        "--out",
        p(&a),
    ]);
    assert!(out.status.success());
}

#[test]
fn eval_grid_is_complete_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    assert!(
        shfd(&["synth", "--out", p(&suite), "--n", "2", "--size", "256"])
            .status
            .success()
    );
    let manifest = suite.join("manifest.json");
    let runs = [dir.path().join("r1"), dir.path().join("r2")];
    for run in &runs {
        let out = shfd(&[
            "eval",
            "--manifest",
            p(&manifest),
            "--out",
            p(run),
            "--grid",
            "default",
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for file in ["roc.csv", "summary.json", "roc.svg"] {
        assert_eq!(
            std::fs::read(runs[0].join(file)).unwrap(),
            std::fs::read(runs[1].join(file)).unwrap(),
            "{file} differs between runs"
        );
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(runs[0].join("summary.json")).unwrap())
            .unwrap();
    let cells = summary["cells"].as_array().unwrap();
    assert_eq!(cells.iter().filter(|c| c["op"] != "none").count(), 9);
}

#[test]
fn coverage_manifest_pairs_files() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["1.png", "1t.png", "2.png", "2t.png"] {
        std::fs::write(dir.path().join(name), b"").unwrap();
    }
    let factors = dir.path().join("f.json");
    std::fs::write(&factors, r#"{"1": "rotation"}"#).unwrap();
    let out_path = dir.path().join("m.json");
    let out = shfd(&[
        "coverage-manifest",
        "--root",
        p(dir.path()),
        "--factors",
        p(&factors),
        "--out",
        p(&out_path),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_path).unwrap()).unwrap();
    let entries = m.as_array().unwrap();
    assert_eq!(entries.len(), 4);
    assert!(entries
        .iter()
        .any(|e| e["image_path"] == "1t.png" && e["tamper_factor"] == "rotation"));
}
