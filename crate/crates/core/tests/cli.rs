use std::io::Write;
use std::process::{Command, Output};

fn turnpike(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_turnpike"));
    cmd.args(args);
    if let Some(n) = threads {
        cmd.env("TURNPIKE_THREADS", n);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn tables_match_golden_files_for_any_thread_count() {
    for id in 1..=5 {
        let golden = std::fs::read_to_string(format!("{}/golden/table{id}.csv", env!("CARGO_MANIFEST_DIR"))).unwrap();
        for threads in ["1", "4", "0"] {
            let out = turnpike(&["table", "--id", &id.to_string()], Some(threads));
            assert_eq!(out.status.code(), Some(0));
            assert_eq!(stdout(&out), golden, "table {id} with {threads} threads");
        }
    }
}

#[test]
fn table_markdown_and_overrides() {
    let out = turnpike(&["table", "--id", "4", "--format", "markdown", "--times", "1,100", "--precision", "6"], None);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("| case | r | delta | t | x | pi_star | e_M | e |"));
    assert!(text.contains("1.200"), "{text}");
    assert_eq!(text.lines().count(), 2 + 6);
}

#[test]
fn table_writes_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t1.csv");
    let out = turnpike(&["table", "--id", "1", "--out", path.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.contains("1,case1,0.02,0.03,1,10,2.6075,"));
}

#[test]
fn derive_reports_threshold() {
    let out = turnpike(&["derive", "--r", "0.06", "--classify", "-0.5", "-2"], None);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((v["q_star"].as_f64().unwrap() + 1.0).abs() < 1e-12);
    assert!((v["delta"].as_f64().unwrap() - 0.05).abs() < 1e-15);
    assert_eq!(v["regime"], "Turnpike");
}

#[test]
fn strategy_and_limit_commands() {
    let out = turnpike(&["strategy", "--u1", "power:q=-3", "--u2", "power:q=-3", "--x", "1", "--t", "10"], None);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[5], "4.0000");

    let out = turnpike(&["limit", "--u1", "power:q=-1/3", "--u2", "nonhara:p=1/4", "--x", "10"], None);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("0.02,0.03,10,inf,"));
}

#[test]
fn scenario_from_config() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    write!(
        file,
        "[market]\ndelta_rule = 0.02+r/2\n[utility]\nutility1 = power:q=-2\nutility2 = zero\n[grid]\nx = 1, 10\nt = 1, 10\nr = 0.02, 0.06\n[output]\nprecision = 5\n"
    )
    .unwrap();
    let out = turnpike(&["scenario", "--config", file.path().to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 3);
    assert!(text.lines().skip(1).all(|l| l.contains(",3.00000,")));
}

#[test]
fn exit_codes() {
    assert_eq!(turnpike(&["--help"], None).status.code(), Some(0));
    assert_eq!(turnpike(&["table"], None).status.code(), Some(1));
    assert_eq!(turnpike(&["table", "--id", "9"], None).status.code(), Some(1));
    assert_eq!(turnpike(&["derive", "--delta", "0"], None).status.code(), Some(1));
    assert_eq!(turnpike(&["strategy", "--u1", "power:q=2", "--u2", "zero"], None).status.code(), Some(1));
    assert_eq!(turnpike(&["table", "--id", "1", "--precision", "3"], None).status.code(), Some(1));
    assert_eq!(turnpike(&["table", "--id", "1"], Some("many")).status.code(), Some(1));

    let mut bad = tempfile::NamedTempFile::new().unwrap();
    write!(bad, "[grid]\nx = 1\nt = 1\n[utility]\nutility1 = power:q=-2\nutility2 = zero\nnope = 1\n").unwrap();
    let out = turnpike(&["scenario", "--config", bad.path().to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 7"));

    // e^{λt} overflows at this horizon, so the budget equation cannot be bracketed.
    let out = turnpike(&["strategy", "--u1", "power:q=-2", "--u2", "power:q=-0.5", "--t", "100000"], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("could not bracket"));
}

#[test]
fn verify_single_suite() {
    let out = turnpike(&["verify", "--suite", "duality"], Some("1"));
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["passed"], true);
    }
}
