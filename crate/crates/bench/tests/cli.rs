use std::path::Path;

use ambench::cli::main_with;
use ambench::trace_csv::TraceFile;

fn ambench(args: &[&str]) -> i32 {
    main_with(std::iter::once("ambench").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_is_byte_identical_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for out in [&a, &b] {
        let code = ambench(&[
            "generate",
            "--problem",
            "logsumexp-quad",
            "--n",
            "50",
            "--m",
            "2000",
            "--density",
            "0.01",
            "--seed",
            "1",
            "--out",
            s(out),
        ]);
        assert_eq!(code, 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let bad = dir.path().join("bad.json");
    assert_eq!(ambench(&["generate", "--problem", "logsumexp-quad", "--density", "0", "--out", s(&bad)]), 64);
    assert!(!bad.exists());
    assert_eq!(ambench(&["generate", "--problem", "quartic", "--reg", "1", "--out", s(&bad)]), 64);
}

#[test]
fn run_writes_stable_csv_and_honors_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("q.json");
    assert_eq!(ambench(&["generate", "--problem", "quadratic", "--n", "20", "--out", s(&problem)]), 0);
    let (x, y) = (dir.path().join("x.csv"), dir.path().join("y.csv"));
    for out in [&x, &y] {
        let code = ambench(&["run", "--problem", s(&problem), "--method", "am", "--iters", "200", "--out", s(out)]);
        assert_eq!(code, 0);
    }
    let bytes = std::fs::read(&x).unwrap();
    assert_eq!(bytes, std::fs::read(&y).unwrap());
    let trace = TraceFile::read(&x).unwrap();
    assert_eq!(trace.rows.len(), 200);
    assert!(trace.rows.iter().all(|r| r.wall_ms.is_none()));
    // Final gap under the p = 1 envelope 4HR²/K², from the problem's own data.
    let p = ambench::files::read_problem(&problem).unwrap().problem;
    let r = (p.x0.as_ref().unwrap() - p.x_star.as_ref().unwrap()).norm();
    let h = 2.0 * p.lip(1).unwrap();
    assert!(trace.rows.last().unwrap().gap <= 4.0 * h * r * r / (200.0f64 * 200.0));

    let z = dir.path().join("z.csv");
    for criterion in ["grad-ratio", "contraction", "sigma-residual"] {
        let inexact = [
            "run",
            "--problem",
            s(&problem),
            "--method",
            "am",
            "--criterion",
            criterion,
            "--inner",
            "gd",
            "--iters",
            "20",
            "--out",
            s(&z),
        ];
        assert_eq!(ambench(&inexact), 0, "{criterion}");
    }
    let short =
        ["run", "--problem", s(&problem), "--method", "am", "--iters", "3", "--target-rel-gap", "1e-9", "--out", s(&z)];
    assert_eq!(ambench(&short), 2);
    let wrong = ["run", "--problem", s(&problem), "--method", "fgm", "--p", "2", "--out", s(&z)];
    assert_eq!(ambench(&wrong), 64);
    assert_eq!(ambench(&["run", "--problem", "/nonexistent.json", "--method", "am", "--out", s(&z)]), 64);
}

#[test]
fn config_file_and_flags_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("q.json");
    ambench(&["generate", "--problem", "quadratic", "--n", "5", "--g-l", "3", "--out", s(&problem)]);
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, format!("problem = {:?}\nmethod = \"fgm\"\niters = 50\n", s(&problem))).unwrap();
    let out = dir.path().join("t.csv");
    assert_eq!(ambench(&["run", "--config", s(&cfg), "--iters", "7", "--out", s(&out)]), 0);
    let t = TraceFile::read(&out).unwrap();
    assert_eq!(t.rows.len(), 7);
    assert_eq!(t.meta("method"), Some("fgm"));
    assert!(t.meta("config").unwrap().contains("iters = 50"));
    assert_eq!(t.meta("flags"), Some("iters = 7"));
}

#[test]
fn compare_self_and_assertions() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("q.json");
    ambench(&["generate", "--problem", "quadratic", "--n", "10", "--g-l", "5", "--out", s(&problem)]);
    let am = dir.path().join("am.csv");
    let fgm = dir.path().join("fgm.csv");
    ambench(&["run", "--problem", s(&problem), "--method", "am", "--iters", "300", "--out", s(&am)]);
    ambench(&["run", "--problem", s(&problem), "--method", "fgm", "--iters", "300", "--out", s(&fgm)]);
    let long = dir.path().join("long.csv");
    let ok = ["compare", s(&am), s(&am), "--long-out", s(&long), "--assert", "am:wf <= am:wf @ 1e-2"];
    assert_eq!(ambench(&ok), 0);
    assert!(std::fs::read_to_string(&long).unwrap().starts_with("method,axis,x,y\n"));
    assert_eq!(ambench(&["compare", s(&am), s(&fgm), "--assert", "am:wf < am:wf @ 1e-2"]), 3);

    let other = dir.path().join("other.json");
    ambench(&["generate", "--problem", "quadratic", "--n", "10", "--seed", "9", "--out", s(&other)]);
    let foreign = dir.path().join("foreign.csv");
    ambench(&["run", "--problem", s(&other), "--method", "fgm", "--iters", "5", "--out", s(&foreign)]);
    assert_eq!(ambench(&["compare", s(&am), s(&foreign)]), 64);
}

#[test]
fn grid_writes_one_file_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("q.json");
    ambench(&["generate", "--problem", "quadratic", "--n", "8", "--g-l", "4", "--out", s(&problem)]);
    let out = dir.path().join("grid");
    let code = ambench(&[
        "grid",
        "--problem",
        s(&problem),
        "--methods",
        "am,acdm,ms",
        "--seeds",
        "1,2",
        "--iters",
        "10",
        "--out-dir",
        s(&out),
    ]);
    assert_eq!(code, 0);
    let mut names: Vec<String> =
        std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["acdm-s1.csv", "acdm-s2.csv", "am.csv", "ms+acdm-s1.csv", "ms+acdm-s2.csv"]);
}

#[test]
fn verify_reports_suites_and_catches_planted_faults() {
    assert_eq!(ambench(&["verify"]), 0);
    assert_eq!(ambench(&["verify", "--fault", "momentum-without-four", "--suite", "momentum_identity"]), 3);
    assert_eq!(ambench(&["verify", "--fault", "band-upper-one", "--suite", "step_band"]), 3);
    assert_eq!(ambench(&["verify", "--suite", "no_such_suite"]), 64);
    assert!(ameta::verify::SUITES.len() >= 12);
}
