use std::path::Path;
use std::process::Command;

use proptest::prelude::*;
use ris_cellfree::experiment::config::{parse_config, RawConfig};
use ris_cellfree::Error;

const SMALL: &str = "
num_aps = 2
antennas = 2
num_users = 2
num_ris = 1
elements = 4
tau_p = 2
tau_c = 200
rho_dbm = 0
sigma2_dbm = -104
kappa = 10
epsilon = 10
box_width = 40
box_depth = 40
exponent_ap_user = 5
n_samples = 2000
num_placements = 2
sweep = 4, 8
seed = 7
";

fn simulate(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_simulate"))
        .args(args)
        .output()
        .unwrap()
}

fn run_in(dir: &Path, scenario: &str, extra: &str) -> String {
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, format!("{SMALL}{extra}")).unwrap();
    let out = dir.join("out");
    let o = simulate(&[
        scenario,
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::read_to_string(out.join(format!("{scenario}.csv"))).unwrap()
}

#[test]
fn powers_convert_from_dbm() {
    let cfg = parse_config(SMALL, None).unwrap();
    assert!((cfg.rho() - 1e-3).abs() < 1e-18);
    assert!((cfg.sigma2() / 3.981_071_705_534_97e-14 - 1.0).abs() < 1e-12);
    assert_eq!(cfg.rho_s(), cfg.rho());
}

#[test]
fn missing_key_is_named() {
    let text = SMALL.replace("tau_p = 2\n", "");
    let err = parse_config(&text, None).unwrap_err();
    assert!(matches!(&err, Error::MissingKey(k) if k == "tau_p"));
    assert_eq!(err.to_string(), "missing key: tau_p");
}

#[test]
fn type_errors_report_the_line() {
    let text = "num_aps = 2\nantennas = two\n";
    match parse_config(text, Some("desk")).unwrap_err() {
        Error::Config { line, message } => {
            assert_eq!(line, 2);
            assert!(message.contains("antennas"));
        }
        e => panic!("unexpected {e}"),
    }
    assert!(matches!(
        parse_config("bogus = 1\n", Some("desk")),
        Err(Error::Config { line: 1, .. })
    ));
}

#[test]
fn presets_accept_overrides() {
    let cfg = parse_config("elements = 16\n", Some("desk")).unwrap();
    assert_eq!(cfg.elements, 16);
    assert_eq!(cfg.num_aps, 2);
    assert!(parse_config("", Some("nope")).is_err());
}

proptest! {
    #[test]
    fn later_lines_override_earlier_ones(a in any::<u64>(), b in any::<u64>()) {
        let raw = RawConfig::parse(&format!("seed = {a}\nseed = {b}\n")).unwrap();
        let expect = b.to_string();
        prop_assert_eq!(raw.get("seed"), Some(expect.as_str()));
    }

    #[test]
    fn dbm_round_trips(dbm in -150.0f64..50.0) {
        let cfg = parse_config(&SMALL.replace("sigma2_dbm = -104", &format!("sigma2_dbm = {dbm}")), None).unwrap();
        prop_assert!((10.0 * (cfg.sigma2() * 1e3).log10() - dbm).abs() < 1e-9);
    }
}

#[test]
fn unknown_scenario_fails_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate(&["warp-drive", "--preset", "desk", "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8(o.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.contains("unknown scenario"));
}

#[test]
fn missing_config_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate(&["se-vs-m", "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert_eq!(String::from_utf8(o.stderr).unwrap().lines().count(), 1);
}

#[test]
fn run_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let csv = run_in(dir.path(), "nmse-vs-m", "");
    assert!(csv.starts_with("elements,placement,seed,user,nmse_closed_form,nmse_monte_carlo,nmse_monte_carlo_se\n"));
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 2);
    let text = std::fs::read_to_string(dir.path().join("out/manifest.json")).unwrap();
    let m: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(m["scenario"], "nmse-vs-m");
    assert_eq!(m["master_seed"], 7);
    assert_eq!(m["jobs"].as_array().unwrap().len(), 4);
    let hash = m["outputs"]["nmse-vs-m.csv"].as_str().unwrap();
    assert_eq!(hash, ris_cellfree::experiment::output::content_hash(csv.as_bytes()));
}

#[test]
fn reruns_are_byte_identical() {
    let sac = "optimizer = sac\nsac_num_episodes = 3\nsac_steps_per_episode = 6\nsac_batch_size = 8\n";
    for (scenario, extra) in [("nmse-vs-m", ""), ("se-vs-m", sac)] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        assert_eq!(run_in(a.path(), scenario, extra), run_in(b.path(), scenario, extra));
        if !extra.is_empty() {
            let ta = std::fs::read(a.path().join("out/trace.csv")).unwrap();
            let tb = std::fs::read(b.path().join("out/trace.csv")).unwrap();
            assert_eq!(ta, tb);
        }
    }
}
