//! The four commands behind the CLI and the files they write.
//!
//! Every file starts with the config hash, tool version and master seed
//! (a `#` comment line in CSV, a `meta` object in JSON). Floats are written
//! with 17 significant digits, and nothing time- or host-dependent is
//! recorded, so equal inputs give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::bounds::{
    alpha_beta, gamma, gamma_quadrature, lemma23_slack, lemma24, thm21_case1, thm21_case2, thm21_case3, thm22_ratio,
    thm_ttt_bound, zhang_at, zhang_deterministic_bound, ProbabilityBound, Thm22Result, TttInputs,
};
use crate::config::{case_name, BoundCase, Derived, Resolved, RunConfig, TOOL_VERSION};
use crate::error::{Error, Result};
use crate::noise::{NoiseOperator, NoiseSpec};
use crate::nonlinearity::{check_condition_p, resolvent_bisection, PsiVariant};
use crate::sde::{run_ensemble, Engine, EnsembleStats, Trajectory};
use crate::spectral::{h_norm_sq_coeffs, SpectralField, SpectralGrid};

pub const BOUNDS_JSON: &str = "bounds.json";
pub const BOUNDS_THETA_CSV: &str = "bounds_theta.csv";
pub const BOUNDS_BETA_CSV: &str = "bounds_beta.csv";
pub const STATS_JSON: &str = "stats.json";
pub const TRAJECTORIES_CSV: &str = "trajectories.csv";
pub const CURVES_CSV: &str = "curves.csv";
pub const VERIFY_JSON: &str = "verify.json";
pub const VERIFY_CSV: &str = "verify.csv";
pub const PROPCHECK_JSON: &str = "propcheck.json";
pub const PROPCHECK_CSV: &str = "propcheck.csv";

/// Provenance stamped on every output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Meta {
    pub fn of(res: &Resolved) -> Self {
        Self {
            tool: "extinct".into(),
            tool_version: TOOL_VERSION.into(),
            config_hash: res.hash.clone(),
            seed: res.seed(),
        }
    }

    fn csv_line(&self) -> String {
        format!(
            "# tool={} tool_version={} config_hash={} seed={}\n",
            self.tool, self.tool_version, self.config_hash, self.seed
        )
    }
}

/// `{:.16e}`, i.e. 17 significant digits; non-finite values spelled out.
pub fn f17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn opt17(x: Option<f64>) -> String {
    x.map(f17).unwrap_or_default()
}

/// Pretty JSON with every float at 17 significant digits.
struct Sig17<'a>(PrettyFormatter<'a>);

impl Formatter for Sig17<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(f17(value).as_bytes())
    }
    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, text)?;
    Ok(path)
}

fn csv(meta: &Meta, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = meta.csv_line();
    out.push_str(&header.join(","));
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

/// Load a JSON artifact and check that it belongs to this configuration.
fn load_artifact<T: DeserializeOwned>(path: &Path, res: &Resolved) -> Result<Option<T>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(path)?;
    #[derive(Deserialize)]
    struct Stamp {
        meta: Meta,
    }
    let stamp: Stamp = serde_json::from_str(&text)?;
    if stamp.meta.config_hash != res.hash {
        return Err(Error::HashMismatch {
            artifact: path.display().to_string(),
            expected: res.hash.clone(),
            found: stamp.meta.config_hash,
        });
    }
    Ok(Some(serde_json::from_str(&text)?))
}

// ---------------------------------------------------------------- bounds

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaRow {
    pub beta: f64,
    pub bound: f64,
    /// `α_β` for the case-2 rows, the brace `θ₂ − ρ₀ − β/(λ₁θ(1−r))` for the
    /// strongly monotone rows.
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaRow {
    pub theta: f64,
    pub gamma: f64,
    pub case1: Option<f64>,
    /// Case 2 at half the θ-dependent maximal β.
    pub case2_half_beta: Option<f64>,
    pub zhang: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZhangReport {
    pub value: f64,
    pub argmin: f64,
    pub curvature: Option<f64>,
    /// Evaluation at θ = 1 for reference.
    pub at_theta_one: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub meta: Meta,
    pub config: RunConfig,
    pub derived: Derived,
    pub case1: Option<ProbabilityBound>,
    pub case2: Vec<BetaRow>,
    pub case3: Option<f64>,
    pub ratio: Option<Thm22Result>,
    pub zhang: Option<ZhangReport>,
    pub ttt_beta_max: Option<f64>,
    pub ttt: Vec<BetaRow>,
    pub theta_table: Vec<ThetaRow>,
}

/// Evaluate every selected bound.
pub fn compute_bounds(res: &Resolved) -> Result<BoundReport> {
    let d = &res.derived;
    let inp = d.bound_inputs();
    let sel = |c: BoundCase| d.selected.contains(&c);
    let betas = res.config.bounds.betas.clone().unwrap_or_default();

    let case1 = if sel(BoundCase::Case1) { Some(thm21_case1(&inp)?) } else { None };
    let case2 = if sel(BoundCase::Case2) {
        betas
            .iter()
            .map(|&b| {
                Ok(BetaRow {
                    beta: b,
                    bound: thm21_case2(&inp, b)?,
                    alpha: alpha_beta(&inp, b),
                })
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let case3 = if sel(BoundCase::Case3) { Some(thm21_case3(&inp)?) } else { None };
    let ratio = if sel(BoundCase::Ratio) {
        let qv = d.qv.expect("ratio selected only with an envelope");
        Some(thm22_ratio(d.x0_h_norm * d.x0_h_norm, &inp, qv.c1, qv.c2)?)
    } else {
        None
    };
    let gc = res.graph.growth_constants();
    let op = &res.op;
    let r = d.r;
    let zhang = if sel(BoundCase::Zhang) {
        let inf = zhang_deterministic_bound(d.x0_h_norm, gc.theta1, gc.theta2, d.lambda1, d.theta_window, |t| {
            gamma(t, r, op).unwrap_or(f64::INFINITY)
        })?;
        let at_one = d
            .theta_window
            .contains(1.0)
            .then(|| zhang_at(1.0, d.x0_h_norm, gc.theta1, gc.theta2, d.lambda1, gamma(1.0, r, op).unwrap_or(f64::INFINITY)));
        Some(ZhangReport {
            value: inf.value,
            argmin: inf.argmin,
            curvature: inf.curvature.is_finite().then_some(inf.curvature),
            at_theta_one: at_one,
        })
    } else {
        None
    };
    let (ttt_beta_max, ttt) = if sel(BoundCase::Ttt) {
        let t = TttInputs {
            r,
            theta: d.theta,
            theta1: gc.theta1,
            theta2: gc.theta2,
            kappa: d.kappa,
            rho0: d.rho0.expect("ttt selected only with ρ₀"),
            lambda1: d.lambda1,
            gamma_theta: d.gamma_theta,
            x_moment: d.x_moment,
        };
        let bmax = t.beta_max();
        let list: Vec<f64> = if betas.is_empty() || betas.iter().any(|b| *b >= bmax) {
            vec![res.config.bounds.beta_fraction * bmax]
        } else {
            betas.clone()
        };
        let rows = list
            .iter()
            .map(|&b| {
                Ok(BetaRow {
                    beta: b,
                    bound: thm_ttt_bound(&t, b)?,
                    alpha: gc.theta2 - t.rho0 - b / (d.lambda1 * d.theta * (1.0 - r)),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        (Some(bmax), rows)
    } else {
        (None, Vec::new())
    };

    let theta_table = d
        .gamma_table
        .iter()
        .map(|&(theta, g)| {
            let mut i = inp;
            i.theta = theta;
            i.gamma_theta = g;
            i.x_moment = d.x0_h_norm.powf(theta * (1.0 - r));
            let ok = g.is_finite() && i.rho1 > 0.0;
            let case1 = (ok && i.case1_valid()).then(|| thm21_case1(&i).map(|b| b.raw).ok()).flatten();
            let case2_half_beta = (ok && i.case2_valid())
                .then(|| thm21_case2(&i, 0.5 * i.beta_max()).ok())
                .flatten();
            let zhang = zhang.is_some().then(|| zhang_at(theta, d.x0_h_norm, gc.theta1, gc.theta2, d.lambda1, g));
            ThetaRow {
                theta,
                gamma: g,
                case1,
                case2_half_beta,
                zhang,
            }
        })
        .collect();

    Ok(BoundReport {
        meta: Meta::of(res),
        config: res.config.clone(),
        derived: d.clone(),
        case1,
        case2,
        case3,
        ratio,
        zhang,
        ttt_beta_max,
        ttt,
        theta_table,
    })
}

fn write_bounds(rep: &BoundReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let theta_rows = rep.theta_table.iter().map(|t| {
        vec![
            f17(t.theta),
            f17(t.gamma),
            opt17(t.case1),
            opt17(t.case1.map(|v| v.clamp(0.0, 1.0))),
            opt17(t.case2_half_beta),
            opt17(t.zhang),
        ]
    });
    let mut beta_rows: Vec<Vec<String>> = rep
        .case2
        .iter()
        .map(|b| vec!["case2".into(), f17(b.beta), f17(b.bound), f17(b.alpha)])
        .collect();
    beta_rows.extend(rep.ttt.iter().map(|b| vec!["ttt".into(), f17(b.beta), f17(b.bound), f17(b.alpha)]));
    Ok(vec![
        write_file(dir, BOUNDS_JSON, &to_json(rep)?)?,
        write_file(
            dir,
            BOUNDS_THETA_CSV,
            &csv(
                &rep.meta,
                &["theta", "gamma", "case1_raw", "case1_clamped", "case2_half_beta", "zhang"],
                theta_rows,
            ),
        )?,
        write_file(dir, BOUNDS_BETA_CSV, &csv(&rep.meta, &["bound", "beta", "value", "alpha"], beta_rows))?,
    ])
}

pub fn cmd_bounds(res: &Resolved, dir: &Path) -> Result<BoundReport> {
    let rep = compute_bounds(res)?;
    write_bounds(&rep, dir)?;
    Ok(rep)
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub meta: Meta,
    pub config: RunConfig,
    pub stats: EnsembleStats,
}

fn simulate(res: &Resolved) -> Result<(StatsReport, Vec<Trajectory>)> {
    let sim = res
        .sim
        .as_ref()
        .ok_or_else(|| Error::Unsupported("simulation needs a box operator, not an eigenvalue table".into()))?;
    let ens = run_ensemble(sim)?;
    Ok((
        StatsReport {
            meta: Meta::of(res),
            config: res.config.clone(),
            stats: ens.stats,
        },
        ens.trajectories,
    ))
}

fn write_stats(rep: &StatsReport, trajs: &[Trajectory], t_max: f64, dir: &Path) -> Result<Vec<PathBuf>> {
    let s = &rep.stats;
    let traj_rows = trajs.iter().map(|t| {
        vec![
            t.index.to_string(),
            format!("{:?}", t.status).to_lowercase(),
            opt17(t.hitting_time),
            opt17(t.hitting_time_fine),
            f17(t.stopped_time(t_max)),
            t.steps.to_string(),
            t.retries.to_string(),
            t.max_solver_iterations.to_string(),
        ]
    });
    let curve_rows = (0..s.times.len()).map(|j| {
        vec![
            f17(s.times[j]),
            f17(s.mean_h_sq[j]),
            f17(s.mean_l2_sq[j]),
            f17(s.mean_lp_pow[j]),
            f17(s.compensated_mean[j]),
            f17(s.compensated_se[j]),
        ]
    });
    Ok(vec![
        write_file(dir, STATS_JSON, &to_json(rep)?)?,
        write_file(
            dir,
            TRAJECTORIES_CSV,
            &csv(
                &rep.meta,
                &[
                    "index",
                    "status",
                    "hitting_time",
                    "hitting_time_fine",
                    "stopped_time",
                    "steps",
                    "retries",
                    "max_solver_iterations",
                ],
                traj_rows,
            ),
        )?,
        write_file(
            dir,
            CURVES_CSV,
            &csv(
                &rep.meta,
                &["t", "h_sq", "l2_sq", "lp_pow", "compensated_mean", "compensated_se"],
                curve_rows,
            ),
        )?,
    ])
}

pub fn cmd_simulate(res: &Resolved, dir: &Path) -> Result<StatsReport> {
    let (rep, trajs) = simulate(res)?;
    write_stats(&rep, &trajs, res.config.sim.t_max, dir)?;
    Ok(rep)
}

// ---------------------------------------------------------------- verify

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    Violated,
    Vacuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub bound: Option<f64>,
    pub empirical: Option<f64>,
    pub se: Option<f64>,
    pub verdict: Verdict,
    pub note: String,
}

impl ComparisonRow {
    /// `violated` only when the estimate exceeds the bound by more than 3 SE.
    fn upper(name: impl Into<String>, bound: f64, empirical: f64, se: f64, vacuous: bool, note: impl Into<String>) -> Self {
        let verdict = if vacuous {
            Verdict::Vacuous
        } else if empirical - 3.0 * se > bound {
            Verdict::Violated
        } else {
            Verdict::Consistent
        };
        Self {
            name: name.into(),
            bound: Some(bound),
            empirical: Some(empirical),
            se: Some(se),
            verdict,
            note: note.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub meta: Meta,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn any_violated(&self) -> bool {
        self.rows.iter().any(|r| r.verdict == Verdict::Violated)
    }
}

/// Place bounds and Monte Carlo estimates side by side.
pub fn compare(bounds: &BoundReport, stats: &StatsReport) -> ComparisonReport {
    let s = &stats.stats;
    let n = (s.m_traj - s.failed).max(1) as f64;
    let surv = 1.0 - s.extinction_fraction;
    let surv_se = (surv * (1.0 - surv) / n).sqrt();
    let t_max = stats.config.sim.t_max;
    let mut rows = Vec::new();
    if let Some(b) = bounds.case1 {
        rows.push(ComparisonRow::upper(
            "case1_survival",
            b.raw,
            surv,
            surv_se,
            b.is_vacuous(),
            format!("P(τ₀ = ∞) vs fraction alive at T_max = {t_max} (an over-estimate)"),
        ));
    }
    let moment_rows = |label: &str, list: &[BetaRow], rows: &mut Vec<ComparisonRow>| {
        for b in list {
            if let Some(m) = s.exp_moments.iter().find(|m| m.beta == b.beta) {
                rows.push(ComparisonRow::upper(
                    format!("{label}_beta_{}", f17(b.beta)),
                    b.bound,
                    m.mean,
                    m.se,
                    !b.bound.is_finite(),
                    "E e^{β(τ₀∧T_max)}, a lower estimate of E e^{βτ₀}",
                ));
            }
        }
    };
    moment_rows("case2", &bounds.case2, &mut rows);
    moment_rows("ttt", &bounds.ttt, &mut rows);
    if let Some(b) = bounds.case3 {
        let row = match (s.extinction_fraction == 1.0, s.mean_tau_extinct) {
            (true, Some(m)) => ComparisonRow::upper("case3_mean_time", b, m.mean, m.se, false, "all trajectories extinct"),
            _ => ComparisonRow::upper(
                "case3_mean_time",
                b,
                s.mean_stopped_time.mean,
                s.mean_stopped_time.se,
                false,
                "censored mean of τ₀∧T_max: a lower estimate of Eτ₀",
            ),
        };
        rows.push(row);
    }
    if let Some(r) = bounds.ratio {
        rows.push(ComparisonRow::upper(
            "ratio_survival",
            r.ratio,
            surv,
            surv_se,
            r.ratio >= 1.0,
            if r.denominator_infinite {
                "F(∞) = ∞: extinction is almost sure"
            } else {
                "P(τ₀ = ∞) vs fraction alive at T_max"
            },
        ));
    }
    if let Some(z) = &bounds.zhang {
        let row = match s.mean_tau_extinct {
            Some(m) if s.extinction_fraction == 1.0 => {
                ComparisonRow::upper("zhang_time", z.value, m.mean, m.se, !z.value.is_finite(), "deterministic τ̂₀")
            }
            _ => ComparisonRow::upper(
                "zhang_time",
                z.value,
                t_max,
                0.0,
                !z.value.is_finite(),
                "no extinction before T_max; τ̂₀ ≥ T_max",
            ),
        };
        rows.push(row);
    }
    let sm = &s.supermartingale;
    rows.push(ComparisonRow {
        name: "supermartingale".into(),
        bound: Some(3.0),
        empirical: Some(sm.max_uptick_se),
        se: None,
        verdict: if sm.pass { Verdict::Consistent } else { Verdict::Violated },
        note: format!(
            "largest increase of the mean of e^{{−2ρ₃t}}‖X_t‖²_H in SE units, ρ₃ = {}; {} pairs over 3 SE",
            f17(sm.rho3),
            sm.violating_pairs
        ),
    });
    ComparisonReport {
        meta: stats.meta.clone(),
        rows,
    }
}

/// Compare stored (or freshly computed) bounds and statistics.
pub fn cmd_verify(res: &Resolved, dir: &Path) -> Result<ComparisonReport> {
    let bounds = match load_artifact::<BoundReport>(&dir.join(BOUNDS_JSON), res)? {
        Some(b) => b,
        None => cmd_bounds(res, dir)?,
    };
    let stats = match load_artifact::<StatsReport>(&dir.join(STATS_JSON), res)? {
        Some(s) => s,
        None => cmd_simulate(res, dir)?,
    };
    let rep = compare(&bounds, &stats);
    write_file(dir, VERIFY_JSON, &to_json(&rep)?)?;
    let rows = rep.rows.iter().map(|r| {
        vec![
            r.name.clone(),
            opt17(r.bound),
            opt17(r.empirical),
            opt17(r.se),
            format!("{:?}", r.verdict).to_lowercase(),
        ]
    });
    write_file(dir, VERIFY_CSV, &csv(&rep.meta, &["name", "bound", "empirical", "se", "verdict"], rows))?;
    Ok(rep)
}

// ---------------------------------------------------------------- propcheck

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropRow {
    pub name: String,
    pub samples: usize,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropReport {
    pub meta: Meta,
    pub rows: Vec<PropRow>,
}

impl PropReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

fn row_max(name: &str, samples: usize, worst: f64, tolerance: f64) -> PropRow {
    PropRow {
        name: name.into(),
        samples,
        worst,
        tolerance,
        pass: worst <= tolerance,
    }
}

fn random_field(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let decay = rng.random_range(0.0..2.0);
    (0..k)
        .map(|i| rng.random_range(-1.0..1.0) * (1.0 + i as f64).powf(-decay))
        .collect()
}

/// Invariant suite for the configured operator, graph and noise.
pub fn propcheck(res: &Resolved) -> Result<PropReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(res.seed());
    let d = &res.derived;
    let op = &res.op;
    let graph = res.graph;
    let mut rows = Vec::new();

    // scalar lemma
    let n = 100_000;
    let fails = (0..n)
        .filter(|_| {
            let a = rng.random_range(0.0..1e3);
            let b = rng.random_range(f64::MIN_POSITIVE..1e3);
            let t = 1.0 - rng.random_range(0.0..1.0);
            !lemma24(a, b, t)
        })
        .count();
    rows.push(row_max("lemma24_violations", n, fails as f64, 0.0));

    // closed form vs quadrature for γ
    let worst = d
        .gamma_table
        .iter()
        .map(|&(t, g)| {
            let q = gamma_quadrature(t, d.r, op).unwrap_or(f64::NAN);
            ((q - g) / g).abs()
        })
        .fold(0.0, f64::max);
    rows.push(row_max("gamma_closed_vs_quadrature_rel", d.gamma_table.len(), worst, 1e-6));

    // resolvents against bisection, and the inclusion they certify
    let n = 10_000;
    let (mut diff, mut incl) = (0.0f64, 0.0f64);
    for _ in 0..n {
        let c = 10f64.powf(rng.random_range(-3.0..2.0));
        let z = rng.random_range(-10.0..10.0);
        let v = graph.resolvent(c, z);
        diff = diff.max((v - resolvent_bisection(&graph, c, z)).abs());
        let (lo, hi) = graph.interval(v);
        let y = (z - v) / c;
        incl = incl.max((lo - y).max(y - hi).max(0.0) * c);
    }
    rows.push(row_max("resolvent_vs_bisection_abs", n, diff, 1e-10));
    rows.push(row_max("resolvent_inclusion_residual", n, incl, 1e-10));

    if op.basis() == crate::spectral::Basis::DirichletBox {
        let grid = SpectralGrid::new(op.clone(), op.modes_per_axis())?;
        let k = op.len();
        let lam = op.eigenvalues();
        let m = 500;
        let (mut round, mut hvl2, mut slack) = (0.0f64, 0.0f64, 0.0f64);
        let thetas: Vec<(f64, f64)> = d.gamma_table.iter().copied().filter(|(_, g)| g.is_finite()).collect();
        let fine = (4 * op.modes_per_axis()).max(64);
        for i in 0..m {
            let a = random_field(&mut rng, k);
            let back = grid.to_spectral(&grid.to_physical(&a)?)?.coeffs;
            round = round.max(a.iter().zip(&back).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
            let h = h_norm_sq_coeffs(lam, &a).sqrt();
            let l2 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            hvl2 = hvl2.max(h - l2 / d.lambda1.sqrt());
            if op.dim() == 1 && i < 50 {
                let f = SpectralField::new(op.clone(), a)?;
                for &(t, g) in &thetas {
                    slack = slack.max(-lemma23_slack(&f, t, d.r, g, fine)?);
                }
            }
        }
        rows.push(row_max("transform_round_trip_abs", m, round, 1e-12));
        rows.push(row_max("h_norm_below_l2_over_sqrt_lambda1", m, hvl2, 1e-14));
        if op.dim() == 1 {
            rows.push(row_max("lemma23_negative_slack", 50 * thetas.len(), slack, 1e-12));
        }

        // drift substep: dissipative and selecting from the graph
        if let Some(sim) = &res.sim {
            let engine = Engine::new(sim.clone())?;
            let mut work = engine.work();
            let (mut grow, mut sel) = (0.0f64, 0.0f64);
            let m = 20;
            let x_h = sim.x0_h_norm();
            for _ in 0..m {
                let mut x = random_field(&mut rng, k);
                let s = x_h / h_norm_sq_coeffs(lam, &x).sqrt();
                x.iter_mut().for_each(|a| *a *= s);
                let out = engine.drift(&x, sim.h, &mut work)?;
                grow = grow.max(h_norm_sq_coeffs(lam, &out.v).sqrt() / x_h - 1.0);
                let v_nodes = grid.to_physical(&out.v)?;
                let e_nodes = grid.to_physical(&out.eta)?;
                let scale = e_nodes.iter().fold(1.0f64, |a, b| a.max(b.abs()));
                for (v, e) in v_nodes.iter().zip(&e_nodes) {
                    let (lo, hi) = graph.interval(*v);
                    let (lo, hi) = if v.abs() <= 1e-9 * x_h.max(1.0) {
                        graph.interval(0.0)
                    } else {
                        (lo, hi)
                    };
                    sel = sel.max((lo - e).max(e - hi).max(0.0) / scale);
                }
            }
            rows.push(row_max("drift_h_norm_growth_rel", m, grow, 10.0 * sim.solver_tol));
            rows.push(row_max("drift_selection_outside_graph_rel", m, sel, 1e-6));

            // noise: ‖B(x)‖²_HS ≤ 2ρ₃‖x‖²_H
            if !sim.noise.is_zero() && !matches!(sim.noise, NoiseSpec::Uncoloured { .. } | NoiseSpec::Mixed { .. }) {
                let grid = std::sync::Arc::new(grid);
                let b = NoiseOperator::new(&sim.noise, op.clone(), Some(grid.clone()))?;
                let mut ws = grid.scratch();
                let mut worst = f64::NEG_INFINITY;
                let m = 200;
                for _ in 0..m {
                    let x = random_field(&mut rng, k);
                    let nodes = grid.to_physical(&x)?;
                    let (hs, _) = b.hs_and_martingale(&x, Some(&nodes), &mut ws);
                    let x2 = h_norm_sq_coeffs(lam, &x);
                    worst = worst.max(hs / (2.0 * x2) - d.rho3);
                }
                rows.push(row_max("hs_norm_above_rho3_bound", m, worst, 1e-9 * d.rho3.max(1.0)));
            }
        }
    }

    // slack is relative, negative when violated; the literal SOC graph
    // vanishes on s < 0, so the condition is checked on its odd extension
    let samples: Vec<f64> = (-200..=200).map(|i| (i as f64 / 20.0).powi(3)).collect();
    let (name, p) = if matches!(graph.variant, PsiVariant::Soc { .. }) && !graph.odd_extend {
        let odd = graph.odd_extended();
        ("growth_condition_odd_extension", check_condition_p(&odd, &odd.growth_constants(), &samples))
    } else {
        ("growth_condition", d.condition_p.clone())
    };
    rows.push(row_max(name, samples.len(), -p.worst_slack, 1e-12));
    if let Some(t) = &d.condition_t {
        rows.push(PropRow {
            name: "noise_summability".into(),
            samples: d.total_modes,
            worst: t.partial_sum,
            tolerance: f64::INFINITY,
            pass: t.pass,
        });
    }
    if d.cases.ratio {
        let qv = d.qv.expect("ratio implies an envelope");
        let inp = d.bound_inputs();
        let mut prev = 0.0;
        let mut worst = 0.0f64;
        for i in 0..64 {
            let s = 1e-4 * 1.25f64.powi(i);
            let r = thm22_ratio(s, &inp, qv.c1, qv.c2)?.ratio;
            worst = worst.max(prev - r);
            prev = r;
        }
        rows.push(row_max("ratio_monotone_decrease", 64, worst, 1e-12));
    }
    Ok(PropReport {
        meta: Meta::of(res),
        rows,
    })
}

pub fn cmd_propcheck(res: &Resolved, dir: &Path) -> Result<PropReport> {
    let rep = propcheck(res)?;
    write_file(dir, PROPCHECK_JSON, &to_json(&rep)?)?;
    let rows = rep.rows.iter().map(|r| {
        vec![
            r.name.clone(),
            r.samples.to_string(),
            f17(r.worst),
            f17(r.tolerance),
            r.pass.to_string(),
        ]
    });
    write_file(dir, PROPCHECK_CSV, &csv(&rep.meta, &["name", "samples", "worst", "tolerance", "pass"], rows))?;
    Ok(rep)
}

/// One-line summary per report row, for the terminal.
pub fn summary_lines(rep: &ComparisonReport) -> String {
    let mut s = String::new();
    for r in &rep.rows {
        let _ = writeln!(
            s,
            "{:<28} {:>10} bound={} empirical={} se={}",
            r.name,
            format!("{:?}", r.verdict).to_lowercase(),
            opt17(r.bound),
            opt17(r.empirical),
            opt17(r.se)
        );
    }
    s
}

pub fn bound_names(rep: &BoundReport) -> Vec<&'static str> {
    rep.derived.selected.iter().map(|c| case_name(*c)).collect()
}
