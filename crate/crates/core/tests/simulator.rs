use std::path::{Path, PathBuf};

use shardswap_core::sim::{read_run, run_scenario, write_run, ReportFormat, RunReport, Scenario};

fn shipped() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    paths.sort();
    paths
}

fn load(path: &Path) -> Scenario {
    Scenario::load(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn shipped_scenarios_pass_every_audit() {
    for path in shipped() {
        let scenario = load(&path);
        let (_, report) = run_scenario(&scenario, scenario.seed).unwrap();
        let failed: Vec<_> = report.audits.iter().filter(|a| !a.passed).collect();
        assert!(failed.is_empty(), "{}: {failed:?}", path.display());
        let stuck: Vec<_> = report.outcomes.iter().filter(|o| !o.ok).collect();
        assert!(stuck.is_empty(), "{}: {stuck:?}", path.display());
    }
}

#[test]
fn excess_faults_break_agreement() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/scenarios/double-sign.toml");
    let scenario = load(&path);
    let (_, report) = run_scenario(&scenario, scenario.seed).unwrap();
    assert!(!report.audit("agreement").unwrap().passed);
}

#[test]
fn excess_faults_need_opt_in() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/scenarios/double-sign.toml");
    let text = std::fs::read_to_string(path).unwrap();
    let text = text.replace("allow_excess_faults = true", "");
    assert!(Scenario::from_toml(&text).is_err());
}

#[test]
fn written_run_audits_the_same() {
    let dir = tempfile::tempdir().unwrap();
    let path = shipped().into_iter().find(|p| p.ends_with("swap-crash.toml")).unwrap();
    let scenario = load(&path);
    let (output, report) = run_scenario(&scenario, 3).unwrap();
    write_run(dir.path(), &output, &report, ReportFormat::Structured).unwrap();
    assert!(dir.path().join("report.json").exists());
    assert!(dir.path().join("snapshots/authority-0.json").exists());

    let (trace, meta) = read_run(dir.path()).unwrap();
    assert_eq!(RunReport::build(&trace, &meta), report);
}

#[test]
fn seed_changes_the_schedule() {
    let path = shipped().into_iter().find(|p| p.ends_with("lossy-network.toml")).unwrap();
    let scenario = load(&path);
    let (a, _) = run_scenario(&scenario, 1).unwrap();
    let (b, _) = run_scenario(&scenario, 2).unwrap();
    assert_ne!(a.trace.trace_bytes(), b.trace.trace_bytes());
}

/// Full-system counterpart of the model checker's ablation for rule (b):
/// flip-flopping owners and one byzantine authority fork the instance.
#[test]
fn without_rule_b_flip_flops_fork() {
    let text = r#"
        version = 1
        name = "no-rule-b"
        [consensus]
        escalation_round = 1
        interval = 200
        disabled_rules = ["b"]
        [network]
        gst = 20000
        max_delay = 800
        drop = 0.2
        [[faults]]
        authority = 3
        kind = "arbitrary-signer"
        [[accounts]]
        name = "a"
        balance = 1
        [[accounts]]
        name = "b"
        balance = 1
        [[swaps]]
        name = "s"
        first = "a"
        second = "b"
        first_behavior = "flip-flop"
        second_behavior = "flip-flop"
    "#;
    let scenario = Scenario::from_toml(text).unwrap();
    let forked = (0..10)
        .filter(|&seed| {
            let (_, report) = run_scenario(&scenario, seed).unwrap();
            !report.audit("agreement").unwrap().passed
        })
        .count();
    assert!(forked > 0);

    let mut safe = scenario.clone();
    safe.consensus.disabled_rules.clear();
    for seed in 0..10 {
        let (_, report) = run_scenario(&safe, seed).unwrap();
        assert!(report.audit("agreement").unwrap().passed, "seed {seed}");
    }
}
