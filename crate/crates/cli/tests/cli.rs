use std::path::PathBuf;
use std::process::{Command, Output};

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

fn art(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_art")).args(args).output().expect("run art")
}

fn art_on(sub: Option<&str>, file: &str, extra: &[&str]) -> Output {
    let f = corpus(file);
    let q = corpus("base.quals");
    let mut args: Vec<&str> = sub.into_iter().collect();
    args.extend([f.to_str().unwrap(), "-q", q.to_str().unwrap()]);
    args.extend(extra);
    art(&args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn safe_program_exits_zero() {
    let o = art_on(None, "insert.limp", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("insert: SAFE"), "{out}");
    assert!(out.contains("len(v) = 1 + len(x0)"), "{out}");
}

#[test]
fn verify_subcommand_matches_default() {
    let a = art_on(None, "absl.limp", &[]);
    let b = art_on(Some("verify"), "absl.limp", &[]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a).lines().filter(|l| !l.contains("ms")).collect::<Vec<_>>(), stdout(&b).lines().filter(|l| !l.contains("ms")).collect::<Vec<_>>());
}

#[test]
fn unsafe_program_exits_one() {
    let o = art_on(None, "nullderef.limp", &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("UNSAFE"));
}

#[test]
fn bad_input_exits_two() {
    assert_eq!(art(&["/no/such/file.limp"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.limp");
    std::fs::write(&f, "function (").unwrap();
    let o = art(&[f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}

#[test]
fn missing_solver_exits_three() {
    let o = art_on(None, "absl.limp", &["--smt", "/no/such/solver"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn json_report() {
    let o = art_on(None, "nullpad.limp", &["--json"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["status"], "unsafe");
    let fs = v["functions"].as_array().unwrap();
    let g = fs.iter().find(|f| f["function"] == "g").unwrap();
    assert_eq!(g["status"], "unsafe");
    let d = &g["diagnostics"][0];
    assert!(d["message"].as_str().unwrap().contains("assertion may fail"));
    assert_eq!(d["line"], 9);
    assert!(v["time_ms"].is_u64() && v["checks"].is_u64());
}

#[test]
fn elaborate_prints_annotations() {
    let o = art_on(Some("elaborate"), "client.limp", &[]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let expected = std::fs::read_to_string(corpus("golden/client.annotated.limp")).unwrap();
    assert_eq!(out, expected);
}

#[test]
fn elaborated_output_verifies_the_same() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("insert.annotated.limp");
    let o = art_on(Some("elaborate"), "insert.limp", &["--emit-annotated", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let q = corpus("base.quals");
    let again = art(&[f.to_str().unwrap(), "-q", q.to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(0));
    let first = art_on(None, "insert.limp", &[]);
    let sig = |o: &Output| stdout(o).lines().filter(|l| l.starts_with("  ")).map(String::from).collect::<Vec<_>>();
    assert_eq!(sig(&first), sig(&again));
}

#[test]
fn emitted_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cs = dir.path().join("c.txt");
    let sol = dir.path().join("s.txt");
    let smt = dir.path().join("smt");
    let o = art_on(
        None,
        "absl.limp",
        &["--emit-constraints", cs.to_str().unwrap(), "--emit-solution", sol.to_str().unwrap(), "--emit-smt", smt.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(std::fs::read_to_string(&cs).unwrap().contains("|-"));
    assert!(std::fs::read_to_string(&sol).unwrap().contains("k1 := 0 <= v"));
    assert!(std::fs::read_dir(&smt).unwrap().count() > 0);
}

#[test]
fn constraints_and_solution_subcommands() {
    let c = art_on(Some("constraints"), "absl.limp", &[]);
    assert_eq!(c.status.code(), Some(0));
    assert!(stdout(&c).lines().any(|l| l.contains("absL fold")));
    let s = art_on(Some("solution"), "absl.limp", &[]);
    assert_eq!(s.status.code(), Some(0));
    assert!(stdout(&s).contains("k1 := 0 <= v"));
}

#[test]
fn audit_subcommand() {
    let o = art_on(Some("audit"), "insert.limp", &["--function", "insert", "--line", "12", "--depth", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("Unf(&x, x0)"), "{out}");
    assert!(out.trim_end().ends_with("pure part: sat"), "{out}");
    let bad = art_on(Some("audit"), "insert.limp", &["--function", "nope"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn parallel_sessions_agree() {
    let a = art_on(None, "insertsort.limp", &["-j", "1"]);
    let b = art_on(None, "insertsort.limp", &["-j", "4"]);
    let sig = |o: &Output| stdout(o).lines().filter(|l| !l.contains("ms")).map(String::from).collect::<Vec<_>>();
    assert_eq!(sig(&a), sig(&b));
}
