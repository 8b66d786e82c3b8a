use serde::{Deserialize, Serialize};

use super::engine::{run_trajectory, Engine, Trajectory, TrajectoryStatus};
use super::SimConfig;
use crate::error::{Error, Result};
use crate::par::map_indexed;
use crate::stats::{mean_se, wilson, MeanSe};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpMoment {
    pub beta: f64,
    /// Mean of `e^{β(τ̂₀∧T_max)}`, a lower estimate of `E e^{βτ₀}`.
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupermartingaleReport {
    pub pass: bool,
    /// Largest `(mean increase)/SE` over checkpoint pairs `s < t`.
    pub max_uptick_se: f64,
    /// Largest raw increase of the mean curve.
    pub max_uptick: f64,
    pub violating_pairs: usize,
    pub rho3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub m_traj: usize,
    pub failed: usize,
    pub extinct: usize,
    pub censored: usize,
    pub extinction_fraction: f64,
    pub wilson_lower: f64,
    pub wilson_upper: f64,
    pub exp_moments: Vec<ExpMoment>,
    /// Mean hitting time over extinct trajectories.
    pub mean_tau_extinct: Option<MeanSe>,
    /// Mean of `τ̂₀∧T_max` over all usable trajectories.
    pub mean_stopped_time: MeanSe,
    pub times: Vec<f64>,
    pub mean_h_sq: Vec<f64>,
    pub mean_l2_sq: Vec<f64>,
    pub mean_lp_pow: Vec<f64>,
    /// Mean and SE of `e^{−2ρ₃t}‖X_t‖²_H`.
    pub compensated_mean: Vec<f64>,
    pub compensated_se: Vec<f64>,
    pub supermartingale: SupermartingaleReport,
    /// Largest `τ̂(eps/10) − τ̂(eps)` over extinct trajectories.
    pub threshold_shift_max: Option<f64>,
    /// Every extinct trajectory reached `eps/10` within one step of `τ̂`.
    pub threshold_stable: bool,
    pub positivity_min: Option<f64>,
    pub total_retries: usize,
    pub max_solver_iterations: usize,
    pub hitting_times: Vec<Option<f64>>,
}

/// Trajectories plus their summary.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub stats: EnsembleStats,
    pub trajectories: Vec<Trajectory>,
}

/// Run `m_traj` independent trajectories and summarise them.
///
/// Results are reduced in trajectory-index order, so they do not depend on
/// scheduling or worker count.
pub fn run_ensemble(cfg: &SimConfig) -> Result<Ensemble> {
    let engine = Engine::new(cfg.clone())?;
    let trajectories = map_indexed(cfg.m_traj, cfg.execution, |i| run_trajectory(&engine, i));
    let stats = summarise(cfg, &trajectories)?;
    Ok(Ensemble { stats, trajectories })
}

fn summarise(cfg: &SimConfig, trajs: &[Trajectory]) -> Result<EnsembleStats> {
    let failed = trajs.iter().filter(|t| t.status == TrajectoryStatus::Failed).count();
    if failed * 100 > trajs.len() {
        let first = trajs.iter().find_map(|t| t.failure.clone()).unwrap_or_default();
        return Err(Error::Ensemble(format!(
            "{failed} of {} trajectories failed (h too large?); first failure: {first}",
            trajs.len()
        )));
    }
    let usable: Vec<&Trajectory> = trajs.iter().filter(|t| t.status != TrajectoryStatus::Failed).collect();
    let n = usable.len();
    let extinct = usable.iter().filter(|t| t.status == TrajectoryStatus::Extinct).count();
    let (wl, wu) = wilson(extinct, n);
    let stopped: Vec<f64> = usable.iter().map(|t| t.stopped_time(cfg.t_max)).collect();
    let exp_moments = cfg
        .betas
        .iter()
        .map(|&beta| {
            let vals: Vec<f64> = stopped.iter().map(|s| (beta * s).exp()).collect();
            let m = mean_se(&vals);
            ExpMoment {
                beta,
                mean: m.mean,
                se: m.se,
            }
        })
        .collect();
    let taus: Vec<f64> = usable.iter().filter_map(|t| t.hitting_time).collect();
    let times = cfg.checkpoint_times();
    let m = times.len();
    let column = |f: &dyn Fn(&Trajectory, usize) -> f64| -> Vec<f64> {
        (0..m)
            .map(|j| usable.iter().map(|t| f(t, j)).sum::<f64>() / n.max(1) as f64)
            .collect()
    };
    let mean_h_sq = column(&|t, j| t.curve[j].h_sq);
    let mean_l2_sq = column(&|t, j| t.curve[j].l2_sq);
    let mean_lp_pow = column(&|t, j| t.curve[j].lp_pow);
    let owned: Vec<Trajectory> = usable.iter().map(|t| (*t).clone()).collect();
    let (compensated_mean, compensated_se) = compensated_curve(&owned, cfg.rho3);
    let supermartingale = supermartingale_check(&owned, cfg.rho3);
    let shifts: Vec<Option<f64>> = usable
        .iter()
        .filter_map(|t| t.hitting_time.map(|tau| t.hitting_time_fine.map(|f| f - tau)))
        .collect();
    let threshold_shift_max = shifts.iter().flatten().copied().reduce(f64::max);
    let threshold_stable = shifts.iter().all(|s| matches!(s, Some(d) if *d < cfg.h));
    let positivity_min = usable.iter().filter_map(|t| t.positivity_min).reduce(f64::min);
    Ok(EnsembleStats {
        m_traj: trajs.len(),
        failed,
        extinct,
        censored: n - extinct,
        extinction_fraction: if n == 0 { 0.0 } else { extinct as f64 / n as f64 },
        wilson_lower: wl,
        wilson_upper: wu,
        exp_moments,
        mean_tau_extinct: (!taus.is_empty()).then(|| mean_se(&taus)),
        mean_stopped_time: mean_se(&stopped),
        times,
        mean_h_sq,
        mean_l2_sq,
        mean_lp_pow,
        compensated_mean,
        compensated_se,
        supermartingale,
        threshold_shift_max,
        threshold_stable,
        positivity_min,
        total_retries: trajs.iter().map(|t| t.retries).sum(),
        max_solver_iterations: trajs.iter().map(|t| t.max_solver_iterations).max().unwrap_or(0),
        hitting_times: trajs.iter().map(|t| t.hitting_time).collect(),
    })
}

fn compensated(t: &Trajectory, rho3: f64) -> Vec<f64> {
    t.curve.iter().map(|p| (-2.0 * rho3 * p.t).exp() * p.h_sq).collect()
}

fn compensated_curve(trajs: &[Trajectory], rho3: f64) -> (Vec<f64>, Vec<f64>) {
    let rows: Vec<Vec<f64>> = trajs.iter().map(|t| compensated(t, rho3)).collect();
    let m = rows.first().map_or(0, Vec::len);
    let mut mean = Vec::with_capacity(m);
    let mut se = Vec::with_capacity(m);
    for j in 0..m {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let s = mean_se(&col);
        mean.push(s.mean);
        se.push(s.se);
    }
    (mean, se)
}

/// Check that the Monte Carlo mean of `e^{−2ρ₃t}‖X_t‖²_H` does not increase
/// by more than 3 standard errors between any two checkpoints `s < t`.
///
/// The SE is that of the paired per-trajectory difference. A deterministic
/// ensemble (zero SE) must be nonincreasing up to rounding.
pub fn supermartingale_check(trajs: &[Trajectory], rho3: f64) -> SupermartingaleReport {
    let rows: Vec<Vec<f64>> = trajs.iter().map(|t| compensated(t, rho3)).collect();
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    let scale = rows.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs()));
    let round_off = 1e-12 * scale;
    let mut max_uptick: f64 = f64::NEG_INFINITY;
    let mut max_uptick_se: f64 = f64::NEG_INFINITY;
    let mut violating_pairs = 0;
    let mut diffs = vec![0.0; n];
    for s in 0..m {
        for t in s + 1..m {
            for (d, r) in diffs.iter_mut().zip(&rows) {
                *d = r[t] - r[s];
            }
            let st = mean_se(&diffs);
            max_uptick = max_uptick.max(st.mean);
            if st.se > 0.0 {
                max_uptick_se = max_uptick_se.max(st.mean / st.se);
            }
            if st.mean > 3.0 * st.se + round_off {
                violating_pairs += 1;
            }
        }
    }
    SupermartingaleReport {
        pass: violating_pairs == 0,
        max_uptick_se: if max_uptick_se.is_finite() { max_uptick_se } else { 0.0 },
        max_uptick: if max_uptick.is_finite() { max_uptick } else { 0.0 },
        violating_pairs,
        rho3,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItoSummary {
    pub steps: usize,
    pub max_abs: f64,
    pub rms: f64,
    /// `Σ_n R_n` over the recorded steps.
    pub cumulative: f64,
}

/// Summary of the per-step residuals of the energy identity recorded along
/// a trajectory (empty unless the run recorded diagnostics).
pub fn ito_residual(traj: &Trajectory) -> ItoSummary {
    let r: Vec<f64> = traj.records.iter().map(|s| s.ito_residual).collect();
    let steps = r.len();
    ItoSummary {
        steps,
        max_abs: r.iter().fold(0.0f64, |a, b| a.max(b.abs())),
        rms: if steps == 0 {
            0.0
        } else {
            (r.iter().map(|v| v * v).sum::<f64>() / steps as f64).sqrt()
        },
        cumulative: r.iter().sum(),
    }
}
