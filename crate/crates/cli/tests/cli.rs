//! End-to-end checks of the command-line surface: exit codes, file formats,
//! and the run-then-audit pipelines on the bundled markets.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_reserves"))
}

fn workdir(tag: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(tag);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn export_fixtures(dir: &Path) {
    let out = bin()
        .args(["fixtures", "--out-dir", dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "bad json ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process exited")
}

#[test]
fn validate_exit_codes() {
    let dir = workdir("validate");
    export_fixtures(&dir);

    let ok = bin()
        .arg("validate")
        .arg(dir.join("ex1.instance.json"))
        .output()
        .unwrap();
    assert_eq!(code(&ok), 0);
    assert_eq!(stdout_json(&ok)["valid"], serde_json::json!(true));

    // A boundary market violates the full assumptions: property fails, exit 1.
    let boundary = bin()
        .arg("validate")
        .arg(dir.join("ex3.instance.json"))
        .output()
        .unwrap();
    assert_eq!(code(&boundary), 1);
    let report = stdout_json(&boundary);
    assert_eq!(report["valid"], serde_json::json!(false));
    assert!(!report["violations"].as_array().unwrap().is_empty());

    // Unreadable input is a usage error, exit 2.
    let missing = bin()
        .arg("validate")
        .arg(dir.join("nope.json"))
        .output()
        .unwrap();
    assert_eq!(code(&missing), 2);
}

#[test]
fn run_then_audit_pipeline_over_every_mechanism() {
    let dir = workdir("pipeline");
    export_fixtures(&dir);

    // (mechanism, fixture, prefs file, audit check, expected audit exit)
    let cases: &[(&str, &str, &str, &str, i32)] = &[
        ("sim-or", "ex3", "ex3.prefs.json", "or", 0),
        ("sim-ro", "ex3", "ex3.prefs.json", "ro", 0),
        ("sim-or", "ex3", "ex3.prefs.json", "stable", 0),
        ("sim-oro", "ex6", "ex6.prefs.json", "or", 1),
        ("sim-oro", "ex6", "ex6.prefs.json", "ro", 1),
        ("sim-oro", "ex6", "ex6.prefs.json", "stable", 0),
        ("seq-ro", "ex2", "ex2.seq-prefs.json", "seq-ro", 0),
        ("seq-or", "ex2", "ex2.seq-prefs.json", "seq-or", 0),
    ];
    for &(mechanism, fixture, prefs, check, expected) in cases {
        let instance = dir.join(format!("{fixture}.instance.json"));
        let prefs = dir.join(prefs);
        let result = dir.join(format!("{fixture}.{mechanism}.result.json"));
        let run = bin()
            .args(["run", "--mechanism", mechanism, "--instance"])
            .arg(&instance)
            .arg("--prefs")
            .arg(&prefs)
            .arg("--out")
            .arg(&result)
            .output()
            .unwrap();
        assert_eq!(code(&run), 0, "run {mechanism} on {fixture}: {run:?}");

        let audit = bin()
            .args(["audit", "--check", check, "--instance"])
            .arg(&instance)
            .arg("--prefs")
            .arg(&prefs)
            .arg("--result")
            .arg(&result)
            .output()
            .unwrap();
        assert_eq!(
            code(&audit),
            expected,
            "audit {check} of {mechanism} on {fixture}: {}",
            String::from_utf8_lossy(&audit.stdout)
        );
    }
}

#[test]
fn sim_flex_on_the_printed_lists_fails_the_audits_with_mixed_orders() {
    // The eight-student market's published lists mix the two side orders, so
    // the outcome is not verifiable under either rule.
    let dir = workdir("flex-audit");
    export_fixtures(&dir);
    let instance = dir.join("ex12.instance.json");
    let subschool = dir.join("ex12.subschool-prefs.json");
    let result = dir.join("ex12.result.json");
    let run = bin()
        .args(["run", "--mechanism", "sim-flex", "--instance"])
        .arg(&instance)
        .arg("--prefs")
        .arg(&subschool)
        .arg("--out")
        .arg(&result)
        .output()
        .unwrap();
    assert_eq!(code(&run), 0);

    // School-level audits read plain school lists; derive them from the
    // subschool lists' school order.
    let prefs = dir.join("ex12.school-prefs.json");
    let lists: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(&subschool).unwrap(),
    )
    .unwrap();
    let mut school_lists = serde_json::Map::new();
    for (student, entries) in lists.as_object().unwrap() {
        let mut seen = Vec::new();
        for entry in entries.as_array().unwrap() {
            let school = entry.as_str().unwrap().rsplit_once('.').unwrap().0.to_string();
            if !seen.contains(&school) {
                seen.push(school);
            }
        }
        school_lists.insert(student.clone(), serde_json::json!(seen));
    }
    std::fs::write(&prefs, serde_json::to_string(&school_lists).unwrap()).unwrap();

    for check in ["ro", "or"] {
        let audit = bin()
            .args(["audit", "--check", check, "--instance"])
            .arg(&instance)
            .arg("--prefs")
            .arg(&prefs)
            .arg("--result")
            .arg(&result)
            .output()
            .unwrap();
        assert_eq!(code(&audit), 1, "{check} unexpectedly passed");
    }
}

#[test]
fn corrupting_a_stable_matching_yields_an_envy_witness() {
    let dir = workdir("corrupt");
    export_fixtures(&dir);
    let instance = dir.join("ex1.instance.json");

    // Fourth published row with the two lowest same-type students swapped.
    let golden: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("ex1.golden.json")).unwrap())
            .unwrap();
    let mut matching = golden["published_stable_matchings"][3].clone();
    for entry in matching.as_array_mut().unwrap() {
        match entry["student"].as_str().unwrap() {
            "i5" => {
                entry["school"] = serde_json::Value::Null;
                entry["seat"] = serde_json::Value::Null;
            }
            "i6" => {
                entry["school"] = serde_json::json!("s");
                entry["seat"] = serde_json::json!("reserved");
            }
            _ => {}
        }
    }
    let result = dir.join("corrupted.result.json");
    std::fs::write(
        &result,
        serde_json::to_string(&serde_json::json!({
            "mechanism": "sim-or",
            "matching": matching,
            "cutoffs": {},
        }))
        .unwrap(),
    )
    .unwrap();

    let audit = bin()
        .args(["audit", "--check", "stable", "--instance"])
        .arg(&instance)
        .arg("--prefs")
        .arg(dir.join("ex1.prefs.json"))
        .arg("--result")
        .arg(&result)
        .output()
        .unwrap();
    assert_eq!(code(&audit), 1);
    let report = stdout_json(&audit);
    let envy = report["justified_envy"].as_array().unwrap();
    assert!(envy
        .iter()
        .any(|w| w["envier"] == "i5" && w["envied"] == "i6"));
}

#[test]
fn cutoffs_subcommand_recomputes_both_conventions() {
    let dir = workdir("cutoffs");
    export_fixtures(&dir);
    let instance = dir.join("ex2.instance.json");
    let result = dir.join("seqor.result.json");
    let run = bin()
        .args(["run", "--mechanism", "seq-or", "--instance"])
        .arg(&instance)
        .arg("--prefs")
        .arg(dir.join("ex2.seq-prefs.json"))
        .arg("--out")
        .arg(&result)
        .output()
        .unwrap();
    assert_eq!(code(&run), 0);

    let eq2 = bin()
        .args(["cutoffs", "--mode", "eq2", "--instance"])
        .arg(&instance)
        .arg("--result")
        .arg(&result)
        .output()
        .unwrap();
    assert_eq!(code(&eq2), 0);
    let eq2 = stdout_json(&eq2);
    // Truthful two-stage open-first run fills only the open seats; under the
    // set-aside convention those categories are full.
    assert_eq!(eq2["s1"]["open"], serde_json::json!(4));
    assert_eq!(eq2["s2"]["open"], serde_json::json!(3));

    let eq1 = bin()
        .args(["cutoffs", "--mode", "eq1", "--instance"])
        .arg(&instance)
        .arg("--result")
        .arg(&result)
        .output()
        .unwrap();
    let eq1 = stdout_json(&eq1);
    // Pooled: the schools still have empty seats, so open cutoffs drop.
    assert_eq!(eq1["s1"]["open"], serde_json::json!(0));
    assert_eq!(eq1["s2"]["open"], serde_json::json!(0));
}

#[test]
fn gen_is_deterministic_and_strict_valid() {
    let dir = workdir("gen");
    let a = dir.join("a.json");
    let b = dir.join("b.json");
    for out in [&a, &b] {
        let run = bin()
            .args([
                "gen",
                "--students",
                "6",
                "--schools",
                "2",
                "--types",
                "2",
                "--seed",
                "42",
                "--out",
            ])
            .arg(out)
            .output()
            .unwrap();
        assert_eq!(code(&run), 0);
    }
    assert_eq!(
        std::fs::read_to_string(&a).unwrap(),
        std::fs::read_to_string(&b).unwrap()
    );
    let validate = bin().arg("validate").arg(&a).output().unwrap();
    assert_eq!(code(&validate), 0);

    // Infeasible parameters are a usage error.
    let bad = bin()
        .args([
            "gen", "--students", "2", "--schools", "1", "--types", "3", "--seed", "1",
        ])
        .output()
        .unwrap();
    assert_eq!(code(&bad), 2);
}

#[test]
fn shape_mismatch_is_a_usage_error() {
    let dir = workdir("shape");
    export_fixtures(&dir);
    let out = bin()
        .args(["run", "--mechanism", "seq-ro", "--instance"])
        .arg(dir.join("ex2.instance.json"))
        .arg("--prefs")
        .arg(dir.join("ex2.prefs.json")) // simultaneous shape
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);

    let out = bin()
        .args(["run", "--mechanism", "sim-xx", "--instance"])
        .arg(dir.join("ex2.instance.json"))
        .arg("--prefs")
        .arg(dir.join("ex2.prefs.json"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn trace_file_records_six_rounds_on_the_published_subschool_run() {
    let dir = workdir("trace");
    export_fixtures(&dir);
    let trace = dir.join("ex12.trace.json");
    let run = bin()
        .args(["run", "--mechanism", "sim-flex", "--instance"])
        .arg(dir.join("ex12.instance.json"))
        .arg("--prefs")
        .arg(dir.join("ex12.subschool-prefs.json"))
        .arg("--trace")
        .arg(&trace)
        .arg("--out")
        .arg(dir.join("ex12.result.json"))
        .output()
        .unwrap();
    assert_eq!(code(&run), 0);
    let trace: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&trace).unwrap()).unwrap();
    assert_eq!(trace.as_array().unwrap().len(), 6);
}

#[test]
fn oracle_equivalence_and_sp_audit_exit_codes() {
    let dir = workdir("oracle-codes");
    export_fixtures(&dir);
    for pair in ["flex-o", "flex-r", "bt"] {
        let out = bin()
            .args(["oracle", "equivalence", "--pair", pair, "--instance"])
            .arg(dir.join("ex3.instance.json"))
            .arg("--prefs")
            .arg(dir.join("ex3.prefs.json"))
            .output()
            .unwrap();
        assert_eq!(code(&out), 0, "pair {pair}");
    }
    for (mechanism, expected) in [("sim-or", 0), ("sim-ro", 0), ("seq-ro", 1)] {
        let out = bin()
            .args(["oracle", "sp-audit", "--mechanism", mechanism, "--instance"])
            .arg(dir.join("ex2.instance.json"))
            .arg("--prefs")
            .arg(dir.join("ex2.prefs.json"))
            .output()
            .unwrap();
        assert_eq!(code(&out), expected, "mechanism {mechanism}");
    }
}
