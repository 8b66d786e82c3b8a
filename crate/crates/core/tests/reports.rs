use std::fs;

use extinct_core::config::RunConfig;
use extinct_core::report::{cmd_bounds, cmd_propcheck, cmd_simulate, cmd_verify, Verdict, STATS_JSON};
use extinct_core::Error;

const NOISY: &str = r#"
[operator]
n = 1
n_modes = 8

[graph]
kind = "soc"
theta1 = 1.0
theta2 = 1.0

[noise]
kind = "diagonal"
mu = { rule = "powerlaw", a = 3.0, p = 2.0 }

[sim]
h = 1e-3
t_max = 0.3
m_traj = 32
seed = 5
"#;

#[test]
fn vacuous_case1_is_never_violated() {
    let res = RunConfig::from_toml(NOISY).unwrap().resolve().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let b = cmd_bounds(&res, dir.path()).unwrap();
    assert!(b.case1.unwrap().raw > 1.0);
    let v = cmd_verify(&res, dir.path()).unwrap();
    let row = v.rows.iter().find(|r| r.name == "case1_survival").unwrap();
    assert_eq!(row.verdict, Verdict::Vacuous);
}

#[test]
fn verify_reuses_stored_statistics() {
    let res = RunConfig::from_toml(NOISY).unwrap().resolve().unwrap();
    let dir = tempfile::tempdir().unwrap();
    cmd_simulate(&res, dir.path()).unwrap();
    let before = fs::read(dir.path().join(STATS_JSON)).unwrap();
    cmd_verify(&res, dir.path()).unwrap();
    assert_eq!(fs::read(dir.path().join(STATS_JSON)).unwrap(), before);
}

#[test]
fn foreign_statistics_are_refused() {
    let res = RunConfig::from_toml(NOISY).unwrap().resolve().unwrap();
    let dir = tempfile::tempdir().unwrap();
    cmd_simulate(&res, dir.path()).unwrap();
    let mut other = RunConfig::from_toml(NOISY).unwrap();
    other.sim.m_traj = 33;
    let other = other.resolve().unwrap();
    let err = cmd_verify(&other, dir.path()).unwrap_err();
    assert!(matches!(err, Error::HashMismatch { .. }), "{err}");
}

#[test]
fn deterministic_zhang_row_is_consistent() {
    let text = r#"
[operator]
n = 1
n_modes = 16

[graph]
kind = "soc"
theta1 = 1.0
theta2 = 1.0

[sim]
h = 2e-4
t_max = 0.5
"#;
    let res = RunConfig::from_toml(text).unwrap().resolve().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let v = cmd_verify(&res, dir.path()).unwrap();
    let row = v.rows.iter().find(|r| r.name == "zhang_time").unwrap();
    assert_eq!(row.verdict, Verdict::Consistent);
    assert!(row.empirical.unwrap() <= row.bound.unwrap());
    assert!(!v.any_violated());
}

#[test]
fn invariant_suite_passes() {
    let text = r#"
[operator]
n = 1
n_modes = 16

[graph]
kind = "fast_diffusion"
r = 0.5

[noise]
kind = "rank_one"
c = 0.5
"#;
    let res = RunConfig::from_toml(text).unwrap().resolve().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = cmd_propcheck(&res, dir.path()).unwrap();
    for r in &p.rows {
        assert!(r.pass, "{r:?}");
    }
}

#[test]
fn interpolation_row_flags_small_r() {
    // the heat bound behind γ overstates the decay for r < 1/3
    let res = RunConfig::from_toml(NOISY).unwrap().resolve().unwrap();
    assert!(res.derived.warnings.iter().any(|w| w.contains("1/3")));
    let dir = tempfile::tempdir().unwrap();
    let p = cmd_propcheck(&res, dir.path()).unwrap();
    let row = p.rows.iter().find(|r| r.name == "lemma23_negative_slack").unwrap();
    assert!(!row.pass && row.worst > 0.0);
    assert!(p.rows.iter().filter(|r| r.name != row.name).all(|r| r.pass));
}
