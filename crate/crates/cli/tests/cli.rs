use std::process::{Command, Output};

fn mixdim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixdim")).args(args).output().unwrap()
}

fn text(o: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    )
}

#[test]
fn study_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = mixdim(&[
        "study",
        "--method",
        "mixed1",
        "--levels",
        "2,3,4",
        "--ref-level",
        "5",
        "--out",
        out,
    ]);
    assert!(o.status.success(), "{}", text(&o));
    for f in ["errors.csv", "errors.txt", "errors.svg"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let csv = std::fs::read_to_string(dir.path().join("errors.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.starts_with("mixed1,")));
    assert_eq!(csv.lines().count(), 1 + 3 * 5);
}

#[test]
fn diagnose_passes_on_coarse_mesh() {
    let o = mixdim(&["diagnose", "--level", "2", "--samples", "5"]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).contains("all checks passed"));
}

#[test]
fn solve_exports_bounded_pressure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = mixdim(&["solve", "--method", "primal", "--level", "4", "--out", out]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(dir.path().join("pressure.svg").is_file());
    for id in 0..9 {
        let csv = std::fs::read_to_string(dir.path().join(format!("pressure_{id}.csv"))).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("entity,x,y,pressure"));
        for l in lines {
            let p: f64 = l.rsplit(',').next().unwrap().parse().unwrap();
            assert!((-1e-12..=1.0 + 1e-12).contains(&p), "{id}: {l}");
        }
    }
}

#[test]
fn check_spaces_reports_compatibility() {
    let o = mixdim(&["check-spaces"]);
    assert!(o.status.success(), "{}", text(&o));
    assert_eq!(text(&o).matches("compatible").count(), 3);
}

#[test]
fn bad_usage_is_rejected() {
    for args in [&["frobnicate"][..], &["study", "--bogus"], &[]] {
        let o = mixdim(args);
        assert!(!o.status.success(), "{args:?}");
        assert!(text(&o).contains("Usage"), "{args:?}: {}", text(&o));
    }
    let o = mixdim(&["solve", "--method", "mixed3"]);
    assert!(!o.status.success());
}

#[test]
fn bad_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bench.cfg");
    std::fs::write(&path, "aperture = 1e-3\nk_normal = lots\n").unwrap();
    let o = mixdim(&[
        "solve",
        "--level",
        "2",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(text(&o).contains("line 2"), "{}", text(&o));

    std::fs::write(&path, "# coarse run\naperture = 1e-2\nk_normal = 10\n").unwrap();
    let o = mixdim(&[
        "solve",
        "--level",
        "2",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", text(&o));
}
