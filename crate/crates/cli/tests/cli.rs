use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn programs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../programs")
}

fn mgale(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mgale")).args(args).output().expect("binary runs")
}

fn program(name: &str) -> String {
    programs().join(name).display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const SUITE: [&str; 6] = ["geom", "gamble", "gamble2", "momentum", "miniabra", "fullabra"];

#[test]
fn reports_match_golden_files() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    for name in SUITE {
        let o = mgale(&["analyze", &program(&format!("{name}.spp"))]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        let want = std::fs::read_to_string(golden.join(format!("{name}.txt"))).unwrap();
        assert_eq!(stdout(&o), want, "{name}");
        // Twice in a row: no hash-order or timing leaks into the report.
        assert_eq!(stdout(&mgale(&["analyze", &program(&format!("{name}.spp"))])), want);
    }
}

fn without(name: &str, pragma: &str, dir: &Path) -> String {
    let src = std::fs::read_to_string(programs().join(name)).unwrap();
    let kept: String = src.lines().filter(|l| !l.starts_with(pragma)).map(|l| format!("{l}\n")).collect();
    let p = dir.join(name);
    std::fs::write(&p, kept).unwrap();
    p.display().to_string()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mgale(&["analyze", &program("geom.spp")]).status.code(), Some(0));

    // Two unknowns and no fact file.
    let o = mgale(&["analyze", &without("gamble2.spp", "#use-fact", dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("residual; unknowns: E[tau], Pr[x[tau] = b]"));

    // No variant and no assumption: optional stopping is refused.
    let o = mgale(&["analyze", &without("momentum.spp", "#assume-ost", dir.path())]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("refused"));
    let o = mgale(&["analyze", "--assume-ost", &without("momentum.spp", "#assume-ost", dir.path())]);
    assert_eq!(o.status.code(), Some(0));

    let o = mgale(&["analyze", &dir.path().join("missing.spp").display().to_string()]);
    assert_eq!(o.status.code(), Some(1));
    let bad = dir.path().join("bad.spp");
    std::fs::write(&bad, "x[0] := 0;\nwhile (x < 3) do\n    x := x + ;\nend\n").unwrap();
    let o = mgale(&["analyze", &bad.display().to_string()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.starts_with("error: bad.spp:3:"), "{err}");
}

#[test]
fn json_errors_are_structured() {
    let o = mgale(&["analyze", "--format", "json", "/nonexistent/x.spp"]);
    assert_eq!(o.status.code(), Some(1));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["status"], "error");
    assert_eq!(v["schema"], 1);
}

#[test]
fn flags_override_pragmas_with_a_warning() {
    let o = mgale(&["analyze", "--seed", "x", "--solve-for", "Pr[x[tau] = b]", &program("gamble.spp")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--solve-for overrides the #solve-for pragma"));
    assert!(stdout(&o).contains("Pr[x[tau] = b] = a/b"), "{}", stdout(&o));
}

#[test]
fn json_and_text_carry_the_same_content() {
    for name in SUITE {
        let file = program(&format!("{name}.spp"));
        let text = stdout(&mgale(&["analyze", &file]));
        let v: Value = serde_json::from_str(&stdout(&mgale(&["analyze", "--format", "json", &file]))).unwrap();
        assert_eq!(v["schema"], 1);
        assert_eq!(v["program"], format!("{name}.spp"));
        assert!(text.contains(&format!("status: {}", v["status"].as_str().unwrap())), "{name}");
        let m = &v["martingale"];
        assert!(text.contains(&format!("M_{} = {}", m["base"], m["m0"].as_str().unwrap())), "{name}");
        assert!(text.contains(&format!("M_i = {}", m["mi"].as_str().unwrap())), "{name}");
        for c in v["side_conditions"].as_array().unwrap() {
            let line = format!(
                "[{}] {}: {}",
                c["status"].as_str().unwrap(),
                c["name"].as_str().unwrap(),
                c["detail"].as_str().unwrap()
            );
            assert!(text.contains(&line), "{name}: {line}");
        }
        let fact = format!("{} = {}", v["fact"]["lhs"].as_str().unwrap(), v["fact"]["rhs"].as_str().unwrap());
        assert!(text.contains(&fact), "{name}: {fact}");
        let s = &v["solved"];
        let solved = format!("{} = {}", s["target"].as_str().unwrap(), s["closed_form"].as_str().unwrap());
        assert!(text.contains(&solved), "{name}: {solved}");
        for (x, r) in v["recurrences"].as_object().unwrap() {
            let line = format!("{x}[i] = {}", r.as_str().unwrap());
            assert!(text.contains(&line), "{name}: {line}");
        }
    }
}

#[test]
fn validate_passes_on_shipped_programs() {
    let o = mgale(&["analyze", "--validate", "--trials", "4000", &program("gamble2.spp")]);
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{out}");
    assert!(out.contains("VALIDATION") && out.trim_end().ends_with("PASS"), "{out}");
}

#[test]
fn validate_catches_a_wrong_fact() {
    let dir = tempfile::tempdir().unwrap();
    let fact = dir.path().join("wrong.fact");
    std::fs::write(&fact, "Pr[x[tau] = b] = 1/2\n").unwrap();
    let o = mgale(&[
        "analyze",
        "--validate",
        "--trials",
        "20000",
        "--use-fact",
        &fact.display().to_string(),
        &program("gamble2.spp"),
    ]);
    let out = stdout(&o);
    assert!(out.contains("E[tau] = -a^2 + b^2/2"), "{out}");
    assert!(out.trim_end().ends_with("FAIL"), "{out}");
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_reports_tau() {
    let o =
        mgale(&["simulate", "--trials", "5000", "--format", "json", "--quantity", "x[tau]", &program("gamble.spp")]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let tau = v["tau"]["mean"].as_f64().unwrap();
    assert!((tau - 21.0).abs() < 2.0, "{tau}");
}

#[test]
fn check_martingale_verdicts() {
    let gamble = program("gamble.spp");
    let o = mgale(&["check-martingale", &gamble]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("verdict: martingale"));
    let o = mgale(&["check-martingale", "--candidate", "x[i]^2 - i", &gamble]);
    assert_eq!(o.status.code(), Some(0));
    let o = mgale(&["check-martingale", "--candidate", "x[i]^2", &gamble]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("= 1"));
}

#[test]
fn bench_over_directories() {
    let o = mgale(&["bench", &programs().display().to_string()]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    for name in ["geom", "gamble", "gamble2", "miniabra", "fullabra"] {
        let row = out.lines().find(|l| l.starts_with(name) && l.split_whitespace().next() == Some(name)).unwrap();
        assert!(row.contains("solved"), "{row}");
        let secs: f64 = row.split_whitespace().nth(1).unwrap().parse().unwrap();
        assert!(secs < 60.0);
    }

    let empty = tempfile::tempdir().unwrap();
    let o = mgale(&["bench", &empty.path().display().to_string()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 1);

    let part = tempfile::tempdir().unwrap();
    std::fs::copy(programs().join("geom.spp"), part.path().join("geom.spp")).unwrap();
    let o = mgale(&["bench", "--format", "json", &part.path().display().to_string()]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0]["status"], "solved");
    assert!(rows[1..].iter().all(|r| r["status"] == "skipped"));
}
