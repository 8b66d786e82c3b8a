//! Time integration of the truncated equation `dX + LΨ(X)dt ∋ B(X)dW`,
//! extinction-time measurement and Monte Carlo ensembles.

mod engine;
mod ensemble;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::noise::NoiseSpec;
use crate::nonlinearity::PsiGraph;
use crate::par::Execution;
use crate::spectral::{h_norm_sq_coeffs, OperatorSpec, SpectralGrid};

pub use engine::{run_trajectory, CurvePoint, DriftSolve, Engine, StepRecord, Trajectory, TrajectoryStatus, Work};
pub use ensemble::{
    ito_residual, run_ensemble, supermartingale_check, Ensemble, EnsembleStats, ExpMoment, ItoSummary, SupermartingaleReport,
};

/// Number of uniformly spaced checkpoints on `[0, T_max]` for norm curves.
pub const CHECKPOINTS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Implicit drift via the resolvent of `hLΨ`, then the noise increment.
    #[default]
    SemiImplicitResolvent,
    /// `X − hLΨ_δ(X)` with the Yosida approximation, then the noise increment.
    ExplicitYosida,
}

/// Initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// `scale · e_k` (one-based `k`, default the ground mode).
    Mode {
        #[serde(default = "one")]
        scale: f64,
        #[serde(default = "one_usize")]
        k: usize,
    },
    /// Nonnegative bump `A·exp(−|s−c|²/(2w²))·∏ sin(πs_i/L_i)` projected on
    /// the truncation; a missing centre is drawn uniformly from the seed.
    Bump {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        centre: Option<Vec<f64>>,
    },
    /// Explicit coefficients `a_k` (missing tail is zero).
    Coeffs { values: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::Mode { scale: 1.0, k: 1 }
    }
}

impl InitialCondition {
    /// Spectral coefficients on `op`.
    pub fn coefficients(&self, op: &Arc<OperatorSpec>, seed: u64) -> Result<Vec<f64>> {
        let k_total = op.len();
        match self {
            InitialCondition::Mode { scale, k } => {
                if *k == 0 || *k > k_total {
                    return Err(param("x0.k", format!("mode index must be in 1..={k_total}")));
                }
                let mut a = vec![0.0; k_total];
                a[k - 1] = *scale;
                Ok(a)
            }
            InitialCondition::Coeffs { values } => {
                if values.len() > k_total {
                    return Err(param("x0.values", format!("more than {k_total} coefficients")));
                }
                let mut a = vec![0.0; k_total];
                a[..values.len()].copy_from_slice(values);
                Ok(a)
            }
            InitialCondition::Bump {
                amplitude,
                width,
                centre,
            } => {
                if !(*width > 0.0) {
                    return Err(param("x0.width", "must be positive"));
                }
                let sides = op.side_lengths().to_vec();
                let centre = match centre {
                    Some(c) if c.len() == sides.len() => c.clone(),
                    Some(_) => return Err(param("x0.centre", "one coordinate per axis")),
                    None => {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        rng.set_stream(u64::MAX);
                        sides.iter().map(|l| rng.random_range(0.25..0.75) * l).collect()
                    }
                };
                let grid = SpectralGrid::new(op.clone(), op.modes_per_axis())?;
                let axes: Vec<Vec<f64>> = (0..sides.len()).map(|i| grid.axis_nodes(i)).collect();
                let g = grid.grid_size();
                let n = sides.len();
                let values: Vec<f64> = (0..grid.node_count())
                    .map(|idx| {
                        let mut rest = idx;
                        let mut dist2 = 0.0;
                        let mut env = 1.0;
                        for axis in (0..n).rev() {
                            let s = axes[axis][rest % g];
                            rest /= g;
                            dist2 += (s - centre[axis]).powi(2);
                            env *= (std::f64::consts::PI * s / sides[axis]).sin();
                        }
                        amplitude * (-dist2 / (2.0 * width * width)).exp() * env
                    })
                    .collect();
                Ok(grid.to_spectral(&values)?.coeffs)
            }
        }
    }
}

/// Everything a simulation needs, already resolved against an operator.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub op: Arc<OperatorSpec>,
    pub graph: PsiGraph,
    pub noise: NoiseSpec,
    pub x0: Vec<f64>,
    pub h: f64,
    pub t_max: f64,
    pub eps_ext: f64,
    pub delta_yosida: f64,
    pub m_traj: usize,
    pub seed: u64,
    pub scheme: Scheme,
    /// Drift solve stops when `‖v + hLη − X_n‖_H ≤ solver_tol · ‖X_n‖_H`.
    pub solver_tol: f64,
    pub solver_max_iter: usize,
    /// Compensation rate in `e^{−2ρ₃t}‖X_t‖²_H`.
    pub rho3: f64,
    /// Exponents β for the estimates of `E e^{β(τ₀∧T)}`.
    pub betas: Vec<f64>,
    /// Record per-step Itô residuals and martingale increments.
    pub diagnostics: bool,
    pub execution: Execution,
}

pub fn default_eps(noise: &NoiseSpec) -> f64 {
    if noise.is_zero() {
        1e-8
    } else {
        1e-6
    }
}

impl SimConfig {
    pub fn new(op: Arc<OperatorSpec>, graph: PsiGraph, noise: NoiseSpec, x0: Vec<f64>) -> Self {
        let eps_ext = default_eps(&noise);
        Self {
            op,
            graph,
            noise,
            x0,
            h: 1e-4,
            t_max: 1.0,
            eps_ext,
            delta_yosida: 0.0,
            m_traj: 1,
            seed: 0,
            scheme: Scheme::default(),
            solver_tol: 1e-10,
            solver_max_iter: 20_000,
            rho3: 0.0,
            betas: Vec::new(),
            diagnostics: false,
            execution: Execution::default(),
        }
    }

    pub fn x0_h_norm(&self) -> f64 {
        h_norm_sq_coeffs(self.op.eigenvalues(), &self.x0).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        self.graph.validate()?;
        self.noise.validate()?;
        if self.x0.len() != self.op.len() {
            return Err(param("x0", "coefficient count differs from the mode count"));
        }
        if self.x0.iter().any(|a| !a.is_finite()) {
            return Err(param("x0", "coefficients must be finite"));
        }
        if !(self.h > 0.0 && self.t_max > 0.0 && self.h < self.t_max) {
            return Err(param("sim.h", "need 0 < h < t_max"));
        }
        if !(self.eps_ext > 0.0) {
            return Err(param("sim.eps_ext", "must be positive"));
        }
        if self.eps_ext >= self.x0_h_norm() {
            return Err(param(
                "sim.eps_ext",
                format!(
                    "threshold {} is not below ‖x0‖_H = {}",
                    self.eps_ext,
                    self.x0_h_norm()
                ),
            ));
        }
        if !(self.delta_yosida >= 0.0) {
            return Err(param("sim.delta_yosida", "must be nonnegative"));
        }
        if self.scheme == Scheme::ExplicitYosida && self.delta_yosida == 0.0 {
            return Err(param("sim.delta_yosida", "the explicit scheme needs δ > 0"));
        }
        if self.m_traj == 0 {
            return Err(param("sim.m_traj", "need at least one trajectory"));
        }
        if !(self.solver_tol > 0.0) || self.solver_max_iter == 0 {
            return Err(param("sim.solver_tol", "need a positive tolerance and iteration cap"));
        }
        if !(self.rho3 >= 0.0) {
            return Err(param("sim.rho3", "must be nonnegative"));
        }
        if self.betas.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(param("sim.betas", "must be finite and nonnegative"));
        }
        Ok(())
    }

    /// Number of steps to cover `[0, T_max]`.
    pub fn n_steps(&self) -> usize {
        (self.t_max / self.h - 1e-9).ceil() as usize
    }

    pub fn checkpoint_times(&self) -> Vec<f64> {
        (0..CHECKPOINTS)
            .map(|j| self.t_max * j as f64 / (CHECKPOINTS - 1) as f64)
            .collect()
    }
}
