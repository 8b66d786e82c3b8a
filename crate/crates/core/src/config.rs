//! Run configuration: TOML schema, defaults, load-time validation and the
//! derived constants echoed back to the user.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{
    admissible_thetas, fast_diffusion_threshold, gamma, BoundInputs, ThetaInterval, Threshold,
};
use crate::error::{Error, Result};
use crate::noise::{check_condition_t, qv_envelope, rho3, ConditionTReport, MuRule, NoiseSpec, QvEnvelope, Rho3Report};
use crate::nonlinearity::{check_condition_p, ConditionPReport, PsiGraph, PsiVariant};
use crate::par::Execution;
use crate::sde::{default_eps, InitialCondition, Scheme, SimConfig};
use crate::spectral::{h_norm_sq_coeffs, Basis, OperatorSpec, DEFAULT_C_INF};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

fn cfg_err(path: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        reason: reason.into(),
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorBlock {
    pub n: usize,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side_lengths: Option<Vec<f64>>,
    #[serde(default = "default_modes")]
    pub n_modes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_inf: Option<f64>,
    /// User-supplied eigenvalue table; bounds only, no simulation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<f64>>,
}

fn default_modes() -> usize {
    32
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphBlock {
    Soc {
        theta1: f64,
        theta2: f64,
        #[serde(default)]
        odd_extend: bool,
    },
    FastDiffusion {
        r: f64,
    },
    PowerPlusLinear {
        theta1: f64,
        r: f64,
        theta2: f64,
    },
    Linear {
        theta2: f64,
    },
}

impl GraphBlock {
    pub fn graph(&self) -> Result<PsiGraph> {
        let g = match *self {
            GraphBlock::Soc {
                theta1,
                theta2,
                odd_extend,
            } => {
                let g = PsiGraph::soc(theta1, theta2)?;
                if odd_extend {
                    g.odd_extended()
                } else {
                    g
                }
            }
            GraphBlock::FastDiffusion { r } => PsiGraph::new(PsiVariant::FastDiffusion { r })?,
            GraphBlock::PowerPlusLinear { theta1, r, theta2 } => PsiGraph::power_plus_linear(theta1, r, theta2)?,
            GraphBlock::Linear { theta2 } => PsiGraph::linear(theta2)?,
        };
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimBlock {
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "one")]
    pub t_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_ext: Option<f64>,
    #[serde(default)]
    pub delta_yosida: f64,
    #[serde(default = "default_m")]
    pub m_traj: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_tol")]
    pub solver_tol: f64,
    #[serde(default = "default_max_iter")]
    pub solver_max_iter: usize,
    #[serde(default)]
    pub diagnostics: bool,
    /// Compensation rate for the supermartingale check; defaults to ρ₃.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho3: Option<f64>,
}

fn default_h() -> f64 {
    1e-4
}

fn default_m() -> usize {
    1
}

fn default_tol() -> f64 {
    1e-10
}

fn default_max_iter() -> usize {
    20_000
}

impl Default for SimBlock {
    fn default() -> Self {
        toml::from_str("").expect("all fields defaulted")
    }
}

/// Bounds that can be requested explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundCase {
    Case1,
    Case2,
    Case3,
    Ratio,
    Zhang,
    Ttt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsBlock {
    /// θ used for the case bounds; defaults to 1 when admissible, otherwise
    /// 0.9 of the window's upper end.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default = "default_theta_grid")]
    pub theta_grid: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    /// Default β as a fraction of the admissible maximum.
    #[serde(default = "half")]
    pub beta_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho3: Option<f64>,
    /// ρ₀ for the strongly monotone bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho0: Option<f64>,
    /// Explicit requests; each must be valid. Empty means every applicable bound.
    #[serde(default)]
    pub request: Vec<BoundCase>,
}

fn default_theta_grid() -> usize {
    16
}

fn half() -> f64 {
    0.5
}

impl Default for BoundsBlock {
    fn default() -> Self {
        toml::from_str("").expect("all fields defaulted")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_dir")]
    pub dir: String,
}

fn default_dir() -> String {
    "out".into()
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub operator: OperatorBlock,
    pub graph: GraphBlock,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub x0: InitialCondition,
    #[serde(default)]
    pub sim: SimBlock,
    #[serde(default)]
    pub bounds: BoundsBlock,
    /// Not part of the hash.
    #[serde(default)]
    pub output: OutputBlock,
}

/// Which bounds apply to this configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseFlags {
    pub case1: bool,
    pub case2: bool,
    pub case3: bool,
    pub ratio: bool,
    pub zhang: bool,
    pub ttt: bool,
}

impl CaseFlags {
    pub fn get(&self, c: BoundCase) -> bool {
        match c {
            BoundCase::Case1 => self.case1,
            BoundCase::Case2 => self.case2,
            BoundCase::Case3 => self.case3,
            BoundCase::Ratio => self.ratio,
            BoundCase::Zhang => self.zhang,
            BoundCase::Ttt => self.ttt,
        }
    }
}

/// Constants derived at load time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub lambda1: f64,
    pub d_eff: f64,
    pub c_inf: f64,
    pub total_modes: usize,
    pub r: f64,
    pub theta_window: ThetaInterval,
    /// `(θ, γ(θ))` on the admissible grid.
    pub gamma_table: Vec<(f64, f64)>,
    pub theta: f64,
    pub gamma_theta: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
    pub rho3_report: Option<Rho3Report>,
    pub rho0: Option<f64>,
    pub kappa: f64,
    pub x0_h_norm: f64,
    pub x_moment: f64,
    pub beta_max: f64,
    pub cases: CaseFlags,
    /// Bounds to evaluate: the explicit request, or every applicable one.
    pub selected: Vec<BoundCase>,
    pub qv: Option<QvEnvelope>,
    pub condition_p: ConditionPReport,
    pub condition_t: Option<ConditionTReport>,
    pub threshold: Threshold,
    pub warnings: Vec<String>,
}

impl Derived {
    pub fn bound_inputs(&self) -> BoundInputs {
        BoundInputs {
            r: self.r,
            theta: self.theta,
            rho1: self.rho1,
            rho2: self.rho2,
            rho3: self.rho3,
            lambda1: self.lambda1,
            gamma_theta: self.gamma_theta,
            x_moment: self.x_moment,
        }
    }
}

/// A validated configuration with defaults filled in.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub hash: String,
    pub derived: Derived,
    pub op: Arc<OperatorSpec>,
    pub graph: PsiGraph,
    /// `None` for operators given only by an eigenvalue table.
    pub sim: Option<SimConfig>,
}

impl Resolved {
    pub fn seed(&self) -> u64 {
        self.config.sim.seed
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        parse_text(text, "<config>")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        parse_text(&text, &path.display().to_string())
    }

    /// Canonical TOML: every default explicit, fixed key order.
    pub fn emit(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// SHA-256 of the canonical form without the output block.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.output = OutputBlock::default();
        Ok(hex::encode(Sha256::digest(c.emit()?.as_bytes())))
    }

    fn operator(&self) -> Result<OperatorSpec> {
        let o = &self.operator;
        let c_inf = o.c_inf.unwrap_or(DEFAULT_C_INF);
        if !(c_inf > 0.0 && c_inf.is_finite()) {
            return Err(cfg_err("operator.c_inf", "must be positive and finite"));
        }
        let op = match &o.eigenvalues {
            Some(table) => OperatorSpec::from_eigenvalues(o.n, o.alpha, table, c_inf),
            None => {
                let sides = o.side_lengths.clone().unwrap_or_else(|| vec![1.0; o.n]);
                OperatorSpec::dirichlet_box(o.n, o.alpha, &sides, o.n_modes).and_then(|op| op.with_c_inf(c_inf))
            }
        };
        op.map_err(|e| cfg_err("operator", e.to_string()))
    }

    /// Validate, fill defaults and compute the derived constants.
    pub fn resolve(mut self) -> Result<Resolved> {
        let op = Arc::new(self.operator()?);
        if self.operator.eigenvalues.is_none() {
            self.operator.side_lengths = Some(op.side_lengths().to_vec());
        }
        self.operator.c_inf = Some(op.c_inf());
        let graph = self.graph.graph().map_err(|e| cfg_err("graph", e.to_string()))?;
        self.noise.validate().map_err(|e| cfg_err("noise", e.to_string()))?;
        let mut warnings = Vec::new();

        let r = graph.r();
        if r < 1.0 / 3.0 {
            warnings.push(format!(
                "r = {r} < 1/3: the heat bound behind γ(θ) assumes more decay than interpolation \
                 gives (e^{{-λ₁(1-r)t/(1+r)}} vs e^{{-2rλ₁t/(1+r)}}), so γ-based bounds are not certified"
            ));
        }
        let d_eff = op.d_eff();
        let window = admissible_thetas(r, d_eff)?;
        let b = self.bounds.clone();
        if b.theta_grid == 0 {
            return Err(cfg_err("bounds.theta_grid", "need at least one point"));
        }
        if !(b.beta_fraction > 0.0 && b.beta_fraction < 1.0) {
            return Err(cfg_err("bounds.beta_fraction", "must lie in (0,1)"));
        }
        let theta = match b.theta {
            Some(t) if window.contains(t) => t,
            Some(t) => {
                return Err(cfg_err(
                    "bounds.theta",
                    format!("θ = {t} is outside the admissible window (0, {}){}", window.upper, if window.closed { "]" } else { ")" }),
                ))
            }
            None if window.closed => 1.0,
            None => 0.9 * window.upper,
        };
        self.bounds.theta = Some(theta);
        let gamma_table = window
            .grid(b.theta_grid)
            .into_iter()
            .map(|t| gamma(t, r, &op).map(|g| (t, g)))
            .collect::<Result<Vec<_>>>()?;
        let gamma_theta = gamma(theta, r, &op)?;

        // noise constants
        let is_uncoloured = matches!(self.noise, NoiseSpec::Uncoloured { .. });
        let (rho3_report, noise_rho3, rho0_noise) = match rho3(&self.noise, &op) {
            Ok(rep) => {
                warnings.extend(rep.warnings.iter().cloned());
                let v = rep.value;
                let r0 = rep.rho0;
                (Some(rep), Some(v), r0)
            }
            Err(Error::Undecidable(why)) => {
                warnings.push(format!("ρ₃ undecidable: {why}"));
                (None, None, None)
            }
            Err(e) => return Err(cfg_err("noise", e.to_string())),
        };
        let rho3_v = match (b.rho3, noise_rho3) {
            (Some(v), _) if v >= 0.0 => v,
            (Some(_), _) => return Err(cfg_err("bounds.rho3", "must be nonnegative")),
            (None, Some(v)) => v,
            (None, None) => return Err(cfg_err("bounds.rho3", "ρ₃ cannot be computed for this noise; give it explicitly")),
        };
        self.bounds.rho3 = Some(rho3_v);
        let gc = graph.growth_constants();
        let kappa = graph.kappa();
        let rho0 = b.rho0.or(rho0_noise);
        if let Some(r0) = rho0 {
            self.bounds.rho0 = Some(r0);
        }
        let rho1 = b.rho1.unwrap_or(gc.theta1);
        let rho2 = match (b.rho2, is_uncoloured, rho0) {
            (Some(v), _, _) => v,
            (None, true, Some(r0)) => gc.theta2 - r0,
            _ => gc.theta2,
        };
        if !(rho1 >= 0.0) {
            return Err(cfg_err("bounds.rho1", "must be nonnegative"));
        }
        if !(rho2 >= 0.0) {
            return Err(cfg_err("bounds.rho2", format!("ρ₂ = {rho2} is negative (ρ₀ too large?)")));
        }
        self.bounds.rho1 = Some(rho1);
        self.bounds.rho2 = Some(rho2);

        // initial state
        let x0 = self
            .x0
            .coefficients(&op, self.sim.seed)
            .map_err(|e| cfg_err("x0", e.to_string()))?;
        let x0_h_norm = h_norm_sq_coeffs(op.eigenvalues(), &x0).sqrt();
        let x_moment = x0_h_norm.powf(theta * (1.0 - r));

        let qv = qv_envelope(&self.noise).ok();
        let inputs = BoundInputs {
            r,
            theta,
            rho1,
            rho2,
            rho3: rho3_v,
            lambda1: op.lambda1(),
            gamma_theta,
            x_moment,
        };
        let finite = gamma_theta.is_finite() && rho1 > 0.0;
        let (theta1, theta2) = (gc.theta1, gc.theta2);
        let cases = CaseFlags {
            case1: finite && inputs.case1_valid(),
            case2: finite && inputs.case2_valid(),
            case3: finite && inputs.case3_valid(),
            ratio: finite && inputs.case1_valid() && qv.is_some_and(|q| q.c1 > 0.0),
            zhang: matches!(graph.variant, PsiVariant::Soc { .. }) && self.noise.is_zero() && theta1 > 0.0 && theta2 > 0.0,
            ttt: finite && rho0.is_some_and(|r0| r0 > 0.0 && r0 <= kappa && r0 < theta2),
        };
        for c in &self.bounds.request {
            if !cases.get(*c) {
                let why = match c {
                    BoundCase::Case1 => format!("needs ρ₂ > 0 or θ = 1 with finite γ(θ) and ρ₁ > 0 (ρ₂ = {rho2}, θ = {theta})"),
                    BoundCase::Case2 => format!("needs ρ₃ < λ₁ρ₂ (ρ₃ = {rho3_v}, λ₁ρ₂ = {})", op.lambda1() * rho2),
                    BoundCase::Case3 => format!(
                        "needs ρ₃ = λ₁ρ₂ and θ = 1 (ρ₃ = {rho3_v}, λ₁ρ₂ = {}, θ = {theta})",
                        op.lambda1() * rho2
                    ),
                    BoundCase::Ratio => "needs a quadratic-variation envelope with c₁ > 0 (rank-one, finite-mode or mixed noise)".into(),
                    BoundCase::Zhang => "needs the SOC graph with θ₁, θ₂ > 0 and no noise".into(),
                    BoundCase::Ttt => format!("needs ρ₀ ∈ (0, κ] ∩ (0, θ₂) (ρ₀ = {rho0:?}, κ = {kappa}, θ₂ = {theta2})"),
                };
                return Err(cfg_err(&format!("bounds.request.{}", case_name(*c)), why));
            }
        }
        let selected: Vec<BoundCase> = if self.bounds.request.is_empty() {
            [BoundCase::Case1, BoundCase::Case2, BoundCase::Case3, BoundCase::Ratio, BoundCase::Zhang, BoundCase::Ttt]
                .into_iter()
                .filter(|c| cases.get(*c))
                .collect()
        } else {
            let mut s = self.bounds.request.clone();
            s.sort();
            s.dedup();
            s
        };
        let beta_max = if cases.case2 { inputs.beta_max() } else { 0.0 };
        match &self.bounds.betas {
            Some(betas) => {
                if let Some(bad) = betas.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
                    return Err(cfg_err("bounds.betas", format!("β = {bad} must be positive")));
                }
                if cases.case2 && selected.contains(&BoundCase::Case2) {
                    if let Some(bad) = betas.iter().find(|b| **b >= beta_max) {
                        return Err(cfg_err(
                            "bounds.betas",
                            format!("β = {bad} outside the admissible range (0, {beta_max})"),
                        ));
                    }
                }
            }
            None => {
                self.bounds.betas = Some(if cases.case2 { vec![b.beta_fraction * beta_max] } else { Vec::new() });
            }
        }

        // load-time graph and noise checks
        let samples: Vec<f64> = (-200..=200).map(|i| (i as f64 / 20.0).powi(3)).collect();
        let condition_p = check_condition_p(&graph, &gc, &samples);
        if !condition_p.pass {
            warnings.push(format!(
                "growth condition fails at {} samples (worst s = {}); the bounds assume it",
                condition_p.violations.len(),
                condition_p.worst_s
            ));
        }
        let condition_t = match &self.noise {
            NoiseSpec::Diagonal { mu } if !matches!(mu, MuRule::List { open_ended: true, .. }) => {
                let rep = check_condition_t(mu, &op, 1e-3)?;
                if !rep.pass {
                    warnings.push("diagonal noise fails the summability condition".into());
                }
                Some(rep)
            }
            _ => None,
        };
        let threshold = fast_diffusion_threshold(op.dim(), op.alpha())?;

        // simulation block
        let s = &mut self.sim;
        let eps = s.eps_ext.unwrap_or_else(|| default_eps(&self.noise));
        s.eps_ext = Some(eps);
        let sim = if op.basis() == Basis::DirichletBox {
            let mut c = SimConfig::new(op.clone(), graph, self.noise.clone(), x0);
            c.h = s.h;
            c.t_max = s.t_max;
            c.eps_ext = eps;
            c.delta_yosida = s.delta_yosida;
            c.m_traj = s.m_traj;
            c.seed = s.seed;
            c.scheme = s.scheme;
            c.solver_tol = s.solver_tol;
            c.solver_max_iter = s.solver_max_iter;
            c.diagnostics = s.diagnostics;
            c.rho3 = s.rho3.unwrap_or(rho3_v);
            c.betas = self.bounds.betas.clone().unwrap_or_default();
            c.execution = Execution::default();
            c.validate().map_err(|e| match e {
                Error::Parameter { name, reason } => cfg_err(&name, reason),
                other => other,
            })?;
            Some(c)
        } else {
            None
        };

        let derived = Derived {
            lambda1: op.lambda1(),
            d_eff,
            c_inf: op.c_inf(),
            total_modes: op.len(),
            r,
            theta_window: window,
            gamma_table,
            theta,
            gamma_theta,
            rho1,
            rho2,
            rho3: rho3_v,
            rho3_report,
            rho0,
            kappa,
            x0_h_norm,
            x_moment,
            beta_max,
            cases,
            selected,
            qv,
            condition_p,
            condition_t,
            threshold,
            warnings,
        };
        let hash = self.hash()?;
        Ok(Resolved {
            config: self,
            hash,
            derived,
            op,
            graph,
            sim,
        })
    }
}

fn parse_text(text: &str, origin: &str) -> Result<RunConfig> {
    toml::from_str(text).map_err(|e| {
        let at = match e.span() {
            Some(span) => format!("{origin}:{}", text[..span.start].matches('\n').count() + 1),
            None => origin.to_string(),
        };
        cfg_err(&at, e.message())
    })
}

pub fn case_name(c: BoundCase) -> &'static str {
    match c {
        BoundCase::Case1 => "case1",
        BoundCase::Case2 => "case2",
        BoundCase::Case3 => "case3",
        BoundCase::Ratio => "ratio",
        BoundCase::Zhang => "zhang",
        BoundCase::Ttt => "ttt",
    }
}

/// Read, validate and resolve a config file.
pub fn parse_config(path: &Path) -> Result<Resolved> {
    RunConfig::load(path)?.resolve()
}
