use std::path::PathBuf;

use serde_json::Value;
use twoway::cli::{run_command, Invocation, Report};
use twoway::machines::parse_machine;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .display()
        .to_string()
}

fn run(args: &[&str]) -> Invocation {
    let argv: Vec<String> = std::iter::once("twoway".to_string())
        .chain(args.iter().map(|a| match a.strip_suffix(".fst") {
            Some(_) => fixture(a),
            None => a.to_string(),
        }))
        .collect();
    run_command(argv)
}

fn json(args: &[&str]) -> (i32, Report, String) {
    let mut a = args.to_vec();
    a.extend(["--format", "json"]);
    let inv = run(&a);
    let report: Report = serde_json::from_str(&inv.stdout).expect("report parses");
    (inv.status, report, inv.stdout)
}

fn masked(line: &str) -> Value {
    let mut v: Value = serde_json::from_str(line).unwrap();
    v["timing_ms"] = Value::Null;
    v
}

#[test]
fn eval_prints_the_output() {
    let inv = run(&["eval", "t0.fst", "ba"]);
    assert_eq!(inv.status, 0);
    assert_eq!(inv.stdout, "aa");
    let inv = run(&["eval", "t0.fst", "ab"]);
    assert_eq!(inv.status, 1);
    let inv = run(&["eval", "t2.fst", "#ab#"]);
    assert_eq!(inv.stdout, "#ba#");
}

#[test]
fn oracle_compares_renamed_machines() {
    let inv = run(&["oracle", "t0.fst", "t0_renamed.fst", "--max-len", "6"]);
    assert_eq!(inv.status, 0);
    assert_eq!(inv.stdout.lines().next(), Some("equal at bound 6"));
    let inv = run(&["oracle", "t0.fst", "t1.fst", "--max-len", "3"]);
    assert_eq!(inv.status, 1);
    assert_eq!(inv.stdout.lines().next(), Some("differ on b"));
}

#[test]
fn mirror_machine_is_refuted_with_evidence() {
    let (status, report, line) = json(&["definable", "mirror2dft.fst", "--k-override", "2", "--max-len", "20"]);
    assert_eq!(status, 1);
    assert!(!line.contains('\n'));
    assert!(report.outcome.conclusion.starts_with("NOT DEFINABLE"));
    let word = report.witnesses["violation_word"].as_str().unwrap();
    assert!(word.len() <= 20);
    let text = report.witnesses["component_machine"].as_str().unwrap();
    parse_machine(text).expect("component re-parses");
}

#[test]
fn definable_reports_a_reparseable_witness() {
    let inv = run(&["definable", "t0.fst"]);
    assert_eq!(inv.status, 0);
    assert_eq!(inv.stdout.lines().next(), Some("DEFINABLE (witness: 2 states)"));
    let (status, report, line) = json(&["definable", "identity_forward.fst", "--k-override", "1"]);
    assert_eq!(status, 0);
    let text = report.witnesses["witness_machine"].as_str().unwrap();
    let m = parse_machine(text).expect("witness re-parses");
    assert_eq!(
        report.outcome.conclusion,
        format!("DEFINABLE (witness: {} states)", m.state_count())
    );
    // JSON round trip
    let again = serde_json::to_string(&report).unwrap();
    assert_eq!(again, line);
}

#[test]
fn json_keys_come_in_a_fixed_order() {
    let (_, _, line) = json(&["eval", "t1.fst", "ab"]);
    let keys: Vec<String> = serde_json::from_str::<serde_json::Map<String, Value>>(&line)
        .unwrap()
        .keys()
        .cloned()
        .collect();
    assert_eq!(keys, ["command", "inputs", "outcome", "witnesses", "bounds_used", "timing_ms"]);
}

#[test]
fn reports_are_deterministic_apart_from_timing() {
    for args in [
        &["squeeze", "t2_copy.fst", "--k-override", "0"][..],
        &["domain", "t2.fst"][..],
        &["subsequential", "t1.fst"][..],
    ] {
        let (_, _, a) = json(args);
        let (_, _, b) = json(args);
        assert_eq!(masked(&a), masked(&b), "{args:?}");
    }
}

#[test]
fn exit_statuses_over_the_corpus() {
    let table: &[(&[&str], i32)] = &[
        (&["functional", "t0.fst"], 0),
        (&["functional", "t2.fst"], 0),
        (&["subsequential", "t0.fst"], 0),
        (&["subsequential", "t1.fst"], 1),
        (&["subsequential", "t2.fst"], 3),
        (&["domain", "empty.fst"], 1),
        (&["domain", "mirror.fst"], 0),
        (&["definable", "empty.fst"], 0),
        (&["definable", "t1.fst"], 0),
        (&["definable", "t2.fst", "--k-override", "1"], 1),
        (&["definable", "t2_copy.fst", "--k-override", "0"], 0),
        (&["definable", "mirror.fst", "--k-override", "1"], 1),
        (&["definable", "mirror.fst"], 2),
        (&["definable", "identity_forward.fst"], 2),
        (&["squeeze", "t2_copy.fst", "--k-override", "0"], 0),
        (&["squeeze", "t2.fst", "--k-override", "0"], 1),
        (&["squeeze", "mirror.fst"], 3),
        (&["equiv", "t0.fst", "t0_renamed.fst"], 0),
        (&["equiv", "t0.fst", "t1.fst"], 1),
    ];
    for (args, want) in table {
        assert_eq!(run(args).status, *want, "{args:?}");
    }
}

#[test]
fn input_errors_exit_with_three() {
    let inv = run(&["frobnicate", "t0.fst"]);
    assert_eq!(inv.status, 3);
    assert!(inv.stderr.contains("Usage"));
    let inv = run(&["eval", "t0.fst", "ba", "--bogus"]);
    assert_eq!(inv.status, 3);
    assert!(inv.stderr.contains("Usage"));
    assert_eq!(run(&["eval", "t0.fst", "xyz"]).status, 3);
    assert_eq!(run(&["eval", "missing.fst", "a"]).status, 3);
    assert_eq!(run(&["to-oneway", "t0.fst"]).status, 3);
}

#[test]
fn conversion_of_an_automaton_file() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("ends_in_a.fsa");
    std::fs::write(
        &src,
        "machine ends_in_a\ntype 2nfa\nalphabet a b\nstates p q\ninitial p\nfinal q\n\
         t p a +1 p\nt p b +1 p\nt p a +1 q\n",
    )
    .unwrap();
    let out = dir.path().join("report.json");
    let inv = run(&["to-oneway", src.to_str().unwrap(), "--format", "json", "--out", out.to_str().unwrap()]);
    assert_eq!(inv.status, 0, "{}", inv.stderr);
    assert!(inv.stdout.is_empty());
    let report: Report = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let text = report.witnesses["witness_machine"].as_str().unwrap();
    parse_machine(text).expect("converted automaton re-parses");
    assert_eq!(run(&["eval", src.to_str().unwrap(), "bba"]).stdout, "ACCEPTED");
}
