//! Noise operators `B(x)` and their derived constants.
//!
//! Variants: diagonal multiplicative `B(x)h = Σ μ_k⟨h,e_k⟩₂ x e_k`,
//! uncoloured `B(x)h = x·B₀h` with `B₀ = σI`, rank-one `B(x)h = c x⟨h,e⟩₂`,
//! and the finite-mode operator acting on `e_1..e_N` and on the
//! complement `π_N^⊥ x`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::spectral::{h_inner_coeffs, h_norm_sq_coeffs, DstScratch, OperatorSpec, SpectralGrid};

/// How the diagonal weights `μ_k` are given (k is the one-based position in
/// the sorted eigen-table).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum MuRule {
    /// Explicit leading values; the rest are zero unless `open_ended`, in
    /// which case the tail is unknown.
    List {
        values: Vec<f64>,
        #[serde(default)]
        open_ended: bool,
    },
    /// `μ_k = a·k^{-p}`.
    Powerlaw { a: f64, p: f64 },
}

impl MuRule {
    pub fn mu(&self, k: usize) -> f64 {
        match self {
            MuRule::List { values, .. } => values.get(k - 1).copied().unwrap_or(0.0),
            MuRule::Powerlaw { a, p } => a * (k as f64).powf(-p),
        }
    }

    pub fn truncated(&self, modes: usize) -> Vec<f64> {
        (1..=modes).map(|k| self.mu(k)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    None,
    Diagonal {
        mu: MuRule,
    },
    Uncoloured {
        sigma: f64,
    },
    RankOne {
        c: f64,
        /// One-based eigen-index of the unit direction `e`.
        #[serde(default = "default_direction")]
        direction: usize,
    },
    FiniteMode {
        mu: Vec<f64>,
    },
    /// Rank-one noise plus an independent perturbation with
    /// `‖B̃(x)‖²_{HS} ≤ c̃²‖x‖²_H`; only its constants are supported.
    Mixed {
        c: f64,
        c_tilde: f64,
    },
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec::None
    }
}

fn default_direction() -> usize {
    1
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseSpec::Diagonal { mu: MuRule::Powerlaw { a, p } } => {
                if !a.is_finite() || !p.is_finite() {
                    return Err(param("noise.mu", "power law needs finite a and p"));
                }
            }
            NoiseSpec::Diagonal { mu: MuRule::List { values, .. } } => {
                if values.iter().any(|m| !m.is_finite()) {
                    return Err(param("noise.mu.values", "entries must be finite"));
                }
            }
            NoiseSpec::Uncoloured { sigma } if !sigma.is_finite() => {
                return Err(param("noise.sigma", "must be finite"));
            }
            NoiseSpec::RankOne { c, direction } => {
                if !c.is_finite() {
                    return Err(param("noise.c", "must be finite"));
                }
                if *direction == 0 {
                    return Err(param("noise.direction", "eigen-index is one-based"));
                }
            }
            NoiseSpec::FiniteMode { mu } => {
                if mu.is_empty() {
                    return Err(param("noise.mu", "finite-mode noise needs N+1 >= 1 weights"));
                }
                if mu.iter().any(|m| !m.is_finite()) {
                    return Err(param("noise.mu", "entries must be finite"));
                }
            }
            NoiseSpec::Mixed { c, c_tilde } if !(c.is_finite() && c_tilde.is_finite()) => {
                return Err(param("noise", "mixed noise constants must be finite"));
            }
            _ => {}
        }
        Ok(())
    }

    /// True when `B ≡ 0`.
    pub fn is_zero(&self) -> bool {
        match self {
            NoiseSpec::None => true,
            NoiseSpec::Diagonal { mu: MuRule::List { values, open_ended } } => {
                !open_ended && values.iter().all(|m| *m == 0.0)
            }
            NoiseSpec::Diagonal { mu: MuRule::Powerlaw { a, .. } } => *a == 0.0,
            NoiseSpec::Uncoloured { sigma } => *sigma == 0.0,
            NoiseSpec::RankOne { c, .. } => *c == 0.0,
            NoiseSpec::FiniteMode { mu } => mu.iter().all(|m| *m == 0.0),
            NoiseSpec::Mixed { c, c_tilde } => *c == 0.0 && *c_tilde == 0.0,
        }
    }
}

/// `B` realised on a truncation, ready to be applied per step.
#[derive(Debug, Clone)]
pub struct NoiseOperator {
    spec: NoiseSpec,
    op: Arc<OperatorSpec>,
    grid: Option<Arc<SpectralGrid>>,
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Zero,
    /// Per-mode weights and node values of `e_j` for the nonzero weights.
    Pointwise {
        mu: Vec<f64>,
        active: Vec<usize>,
        basis_nodes: Vec<Vec<f64>>,
    },
    RankOne {
        c: f64,
    },
    FiniteMode {
        mu: Vec<f64>,
    },
}

impl NoiseOperator {
    /// `grid` is needed for the pointwise (diagonal/uncoloured) variants and
    /// must be the bijective grid of `op` (one node per mode per axis).
    pub fn new(spec: &NoiseSpec, op: Arc<OperatorSpec>, grid: Option<Arc<SpectralGrid>>) -> Result<Self> {
        spec.validate()?;
        let k_total = op.len();
        let kind = if spec.is_zero() {
            Kind::Zero
        } else {
            match spec {
                NoiseSpec::None => Kind::Zero,
                NoiseSpec::Diagonal { mu: MuRule::List { open_ended: true, .. } } => {
                    return Err(Error::Undecidable(
                        "open-ended μ list has no values beyond the ones given".into(),
                    ))
                }
                NoiseSpec::Diagonal { mu } => pointwise(mu.truncated(k_total), grid.as_deref())?,
                NoiseSpec::Uncoloured { sigma } => pointwise(vec![*sigma; k_total], grid.as_deref())?,
                NoiseSpec::RankOne { c, direction } => {
                    if *direction > k_total {
                        return Err(param("noise.direction", "direction beyond the truncation"));
                    }
                    Kind::RankOne { c: *c }
                }
                NoiseSpec::FiniteMode { mu } => {
                    if mu.len() > k_total {
                        return Err(param(
                            "noise.mu",
                            format!("{} weights but only {k_total} modes", mu.len()),
                        ));
                    }
                    Kind::FiniteMode { mu: mu.clone() }
                }
                NoiseSpec::Mixed { .. } => {
                    return Err(Error::Unsupported(
                        "mixed noise is supported for its constants only, not for simulation".into(),
                    ))
                }
            }
        };
        Ok(Self {
            spec: spec.clone(),
            op,
            grid,
            kind,
        })
    }

    pub fn spec(&self) -> &NoiseSpec {
        &self.spec
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, Kind::Zero)
    }

    /// Number of independent scalar Brownian increments per step.
    pub fn wiener_dim(&self) -> usize {
        match &self.kind {
            Kind::Zero => 0,
            Kind::Pointwise { mu, .. } => mu.len(),
            Kind::RankOne { .. } => 1,
            Kind::FiniteMode { mu } => mu.len(),
        }
    }

    fn grid(&self) -> &SpectralGrid {
        self.grid.as_deref().expect("pointwise noise carries its grid")
    }

    /// `B(v)dW` in spectral coordinates, written to `out`.
    ///
    /// `v_nodes` must hold the node values of `v` for the pointwise variants
    /// (ignored otherwise).
    pub fn apply_into(&self, v: &[f64], v_nodes: Option<&[f64]>, dw: &[f64], out: &mut [f64], ws: &mut DstScratch) -> Result<()> {
        if dw.len() != self.wiener_dim() {
            return Err(param(
                "dW",
                format!("expected {} increments, got {}", self.wiener_dim(), dw.len()),
            ));
        }
        if v.len() != self.op.len() || out.len() != self.op.len() {
            return Err(param("field", "dimension mismatch with the operator"));
        }
        match &self.kind {
            Kind::Zero => out.fill(0.0),
            Kind::RankOne { c } => {
                let s = c * dw[0];
                for (o, a) in out.iter_mut().zip(v) {
                    *o = s * a;
                }
            }
            Kind::FiniteMode { mu } => {
                let n = mu.len() - 1;
                for k in 0..v.len() {
                    out[k] = if k < n { mu[k] * dw[k] * v[k] } else { mu[n] * dw[n] * v[k] };
                }
            }
            Kind::Pointwise { mu, .. } => {
                let grid = self.grid();
                let weighted: Vec<f64> = mu.iter().zip(dw).map(|(m, w)| m * w).collect();
                let mut zeta = vec![0.0; grid.node_count()];
                grid.to_physical_into(&weighted, &mut zeta, ws);
                let owned;
                let vn = match v_nodes {
                    Some(n) => n,
                    None => {
                        let mut tmp = vec![0.0; grid.node_count()];
                        grid.to_physical_into(v, &mut tmp, ws);
                        owned = tmp;
                        &owned
                    }
                };
                for (z, x) in zeta.iter_mut().zip(vn) {
                    *z *= x;
                }
                grid.to_spectral_into(&zeta, out, ws);
            }
        }
        Ok(())
    }

    pub fn apply(&self, v: &[f64], dw: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; v.len()];
        let mut ws = self.grid.as_deref().map(|g| g.scratch()).unwrap_or_default();
        self.apply_into(v, None, dw, &mut out, &mut ws)?;
        Ok(out)
    }

    /// `‖B(v)‖²_{L₂(L²;H)}` together with the martingale coefficients
    /// `m_j = 2⟨B(v)ε_j, v⟩_H` (ε_j the driving directions), so that
    /// `2⟨B(v)dW, v⟩_H = Σ m_j dW_j` and the quadratic-variation rate is `Σ m_j²`.
    pub fn hs_and_martingale(&self, v: &[f64], v_nodes: Option<&[f64]>, ws: &mut DstScratch) -> (f64, Vec<f64>) {
        let lam = self.op.eigenvalues();
        match &self.kind {
            Kind::Zero => (0.0, Vec::new()),
            Kind::RankOne { c } => {
                let h2 = h_norm_sq_coeffs(lam, v);
                (c * c * h2, vec![2.0 * c * h2])
            }
            Kind::FiniteMode { mu } => {
                let n = mu.len() - 1;
                let mut hs = 0.0;
                let mut m = Vec::with_capacity(mu.len());
                for k in 0..n {
                    let q = v[k] * v[k] / lam[k];
                    hs += mu[k] * mu[k] * q;
                    m.push(2.0 * mu[k] * q);
                }
                let tail = h_norm_sq_coeffs(&lam[n..], &v[n..]);
                hs += mu[n] * mu[n] * tail;
                m.push(2.0 * mu[n] * tail);
                (hs, m)
            }
            Kind::Pointwise { mu, active, basis_nodes } => {
                let grid = self.grid();
                let owned;
                let vn = match v_nodes {
                    Some(n) => n,
                    None => {
                        let mut tmp = vec![0.0; grid.node_count()];
                        grid.to_physical_into(v, &mut tmp, ws);
                        owned = tmp;
                        &owned
                    }
                };
                let mut prod = vec![0.0; grid.node_count()];
                let mut spec = vec![0.0; v.len()];
                let mut m = vec![0.0; mu.len()];
                let mut hs = 0.0;
                for (&j, ej) in active.iter().zip(basis_nodes) {
                    for ((p, x), e) in prod.iter_mut().zip(vn).zip(ej) {
                        *p = x * e;
                    }
                    grid.to_spectral_into(&prod, &mut spec, ws);
                    hs += mu[j] * mu[j] * h_norm_sq_coeffs(lam, &spec);
                    m[j] = 2.0 * mu[j] * h_inner_coeffs(lam, &spec, v);
                }
                (hs, m)
            }
        }
    }
}

fn pointwise(mu: Vec<f64>, grid: Option<&SpectralGrid>) -> Result<Kind> {
    let grid = grid.ok_or_else(|| Error::Unsupported("pointwise noise needs a physical grid".into()))?;
    if grid.node_count() != grid.op().len() {
        return Err(param(
            "grid_size",
            "pointwise noise needs the bijective grid (one node per mode per axis)",
        ));
    }
    let active: Vec<usize> = (0..mu.len()).filter(|&j| mu[j] != 0.0).collect();
    let basis_nodes = active.iter().map(|&j| grid.basis_values(j)).collect();
    Ok(Kind::Pointwise { mu, active, basis_nodes })
}

pub fn apply_noise(noise: &NoiseOperator, field: &[f64], dw: &[f64]) -> Result<Vec<f64>> {
    noise.apply(field, dw)
}

/// Drift-compensation constant `ρ₃ = ½ sup ‖B(x)‖²_{HS}/‖x‖²_H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rho3Report {
    pub value: f64,
    /// Maximiser with `‖x*‖_H = 1` (pointwise variants only).
    pub witness: Option<Vec<f64>>,
    /// Value recomputed on half the per-axis modes.
    pub half_truncation: Option<f64>,
    pub converged: bool,
    /// `ρ₀` for uncoloured noise, which enters through `ρ₂ = θ₂ − ρ₀` instead.
    pub rho0: Option<f64>,
    pub warnings: Vec<String>,
}

impl Rho3Report {
    fn exact(value: f64) -> Self {
        Self {
            value,
            witness: None,
            half_truncation: None,
            converged: true,
            rho0: None,
            warnings: Vec::new(),
        }
    }
}

/// `ρ₃` for `spec` on the truncation `op`.
///
/// Diagonal noise is handled numerically: the quadratic form
/// `Q(x) = Σ_j μ_j²‖x e_j‖²_H` is maximised over `‖x‖_H = 1` by power
/// iteration on `D^{-1/2} A D^{-1/2}`, with products formed on the bijective
/// grid. The value is repeated on half the modes and a relative drift above
/// 5% is reported as a warning.
pub fn rho3(spec: &NoiseSpec, op: &Arc<OperatorSpec>) -> Result<Rho3Report> {
    spec.validate()?;
    match spec {
        _ if spec.is_zero() => Ok(Rho3Report::exact(0.0)),
        NoiseSpec::None => Ok(Rho3Report::exact(0.0)),
        NoiseSpec::RankOne { c, .. } => Ok(Rho3Report::exact(0.5 * c * c)),
        NoiseSpec::FiniteMode { mu } => Ok(Rho3Report::exact(0.5 * mu.iter().map(|m| m * m).fold(0.0, f64::max))),
        NoiseSpec::Mixed { c, c_tilde } => Ok(Rho3Report::exact(0.5 * (c * c + c_tilde * c_tilde))),
        NoiseSpec::Uncoloured { sigma } => {
            let r0 = rho0_uncoloured(op, sigma.abs(), None)?;
            let mut rep = Rho3Report::exact(0.0);
            rep.rho0 = Some(r0.value);
            if !r0.converged {
                rep.warnings.push("sup-norm series for rho0 diverges".into());
            }
            Ok(rep)
        }
        NoiseSpec::Diagonal { mu } => {
            if let MuRule::List { open_ended: true, .. } = mu {
                return Err(Error::Undecidable("open-ended μ list".into()));
            }
            let (value, witness, converged) = diagonal_rho3(mu, op)?;
            let mut rep = Rho3Report {
                value,
                witness: Some(witness),
                half_truncation: None,
                converged,
                rho0: None,
                warnings: Vec::new(),
            };
            if !converged {
                rep.warnings.push("power iteration did not reach its tolerance".into());
            }
            if op.modes_per_axis() >= 2 {
                let half = Arc::new(op.retruncated(op.modes_per_axis() / 2)?);
                let (hv, _, _) = diagonal_rho3(mu, &half)?;
                rep.half_truncation = Some(hv);
                if value > 0.0 && (value - hv).abs() / value > 0.05 {
                    rep.warnings.push(format!(
                        "rho3 drifts {:.1}% between {} and {} modes per axis",
                        100.0 * (value - hv).abs() / value,
                        op.modes_per_axis() / 2,
                        op.modes_per_axis()
                    ));
                }
            }
            if let Ok(t) = check_condition_t(mu, op, 1e-3) {
                if !t.pass {
                    rep.warnings.push("condition (T) fails: value holds on this truncation only".into());
                }
            }
            Ok(rep)
        }
    }
}

fn diagonal_rho3(mu: &MuRule, op: &Arc<OperatorSpec>) -> Result<(f64, Vec<f64>, bool)> {
    let grid = SpectralGrid::new(op.clone(), op.modes_per_axis())?;
    let k = op.len();
    let weights = mu.truncated(k);
    let lam = op.eigenvalues();
    let active: Vec<usize> = (0..k).filter(|&j| weights[j] != 0.0).collect();
    if active.is_empty() {
        return Ok((0.0, vec![0.0; k], true));
    }
    let basis: Vec<Vec<f64>> = active.iter().map(|&j| grid.basis_values(j)).collect();
    let mut ws = grid.scratch();
    let nodes = grid.node_count();
    let mut xp = vec![0.0; nodes];
    let mut prod = vec![0.0; nodes];
    let mut tmp = vec![0.0; k];

    // y ↦ D^{-1/2} Σ_j μ_j² M_j D M_j D^{-1/2} y, with D = diag(1/λ)
    let apply = |y: &[f64], out: &mut [f64], ws: &mut DstScratch, xp: &mut [f64], prod: &mut [f64], tmp: &mut [f64]| {
        let x: Vec<f64> = y.iter().zip(lam).map(|(a, l)| a * l.sqrt()).collect();
        grid.to_physical_into(&x, xp, ws);
        out.fill(0.0);
        for (&j, ej) in active.iter().zip(&basis) {
            for ((p, a), e) in prod.iter_mut().zip(xp.iter()).zip(ej) {
                *p = a * e;
            }
            grid.to_spectral_into(prod, tmp, ws);
            for (t, l) in tmp.iter_mut().zip(lam) {
                *t /= l;
            }
            grid.to_physical_into(tmp, prod, ws);
            for (p, e) in prod.iter_mut().zip(ej) {
                *p *= e;
            }
            grid.to_spectral_into(prod, tmp, ws);
            let w2 = weights[j] * weights[j];
            for (o, t) in out.iter_mut().zip(tmp.iter()) {
                *o += w2 * t;
            }
        }
        for (o, l) in out.iter_mut().zip(lam) {
            *o *= l.sqrt();
        }
    };

    let mut y: Vec<f64> = (0..k).map(|i| 1.0 / (1.0 + i as f64)).collect();
    normalise(&mut y);
    let mut sy = vec![0.0; k];
    let mut rho = 0.0;
    let mut converged = false;
    for _ in 0..20_000 {
        apply(&y, &mut sy, &mut ws, &mut xp, &mut prod, &mut tmp);
        let rq: f64 = y.iter().zip(&sy).map(|(a, b)| a * b).sum();
        let resid: f64 = y
            .iter()
            .zip(&sy)
            .map(|(a, b)| (b - rq * a).powi(2))
            .sum::<f64>()
            .sqrt();
        rho = rq;
        std::mem::swap(&mut y, &mut sy);
        normalise(&mut y);
        if resid <= 1e-10 * rq.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    // witness x* = D^{-1/2} y, already of unit H-norm
    let witness: Vec<f64> = y.iter().zip(lam).map(|(a, l)| a * l.sqrt()).collect();
    Ok((0.5 * rho, witness, converged))
}

fn normalise(y: &mut [f64]) {
    let n = y.iter().map(|a| a * a).sum::<f64>().sqrt();
    if n > 0.0 {
        for a in y.iter_mut() {
            *a /= n;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionTReport {
    pub pass: bool,
    /// `Σ_{k≤K} μ_k² λ_k^{max(d/2, 1+ε)}` over the truncation.
    pub partial_sum: f64,
    pub exponent: f64,
    /// Supremum of admissible ε for power laws (`None` if no ε > 0 works
    /// or the list is finite).
    pub sup_epsilon: Option<f64>,
}

/// Summability test `Σ μ_k² λ_k^{d/2 ∨ (1+ε)} < ∞`, decided from the power
/// law exponent using the growth `λ_k ≍ k^{2α/n}`.
pub fn check_condition_t(mu: &MuRule, op: &OperatorSpec, epsilon: f64) -> Result<ConditionTReport> {
    if !(epsilon > 0.0) {
        return Err(param("epsilon", "need epsilon > 0"));
    }
    let exponent = (op.d_eff() / 2.0).max(1.0 + epsilon);
    let partial_sum = op
        .eigenvalues()
        .iter()
        .enumerate()
        .map(|(i, l)| mu.mu(i + 1).powi(2) * l.powf(exponent))
        .sum();
    match mu {
        MuRule::List { open_ended: true, .. } => Err(Error::Undecidable(
            "open-ended μ list: convergence of (T) cannot be decided".into(),
        )),
        MuRule::List { .. } => Ok(ConditionTReport {
            pass: true,
            partial_sum,
            exponent,
            sup_epsilon: None,
        }),
        MuRule::Powerlaw { a, p } => {
            let growth = 2.0 * op.alpha() / op.dim() as f64;
            let pass = *a == 0.0 || 2.0 * p - growth * exponent > 1.0;
            // 2p − growth·(d/2) = 2p − 1, so the d/2 branch needs p > 1
            let sup = (2.0 * p - 1.0) / growth - 1.0;
            let sup_epsilon = (*p > 1.0 && sup > 0.0).then_some(sup);
            Ok(ConditionTReport {
                pass,
                partial_sum,
                exponent,
                sup_epsilon,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rho0Report {
    pub value: f64,
    pub converged: bool,
    /// Sum over the eigen-table only.
    pub truncated_sum: f64,
}

/// `ρ₀ = ½‖B₀‖² Σ_k ‖e_k‖²_∞/λ_k`.
///
/// On an interval the series is `(2/L)(L²/π²)^α ζ(2α)`, finite iff `α > 1/2`;
/// for `n ≥ 2` it diverges. A user sup-norm table is summed as given.
pub fn rho0_uncoloured(op: &OperatorSpec, norm_b0: f64, sup_norms: Option<&[f64]>) -> Result<Rho0Report> {
    if !(norm_b0 >= 0.0 && norm_b0.is_finite()) {
        return Err(param("norm_b0", "operator norm must be finite and nonnegative"));
    }
    let lam = op.eigenvalues();
    let scale = 0.5 * norm_b0 * norm_b0;
    if let Some(table) = sup_norms {
        let s: f64 = table.iter().zip(lam).map(|(e, l)| e * e / l).sum();
        return Ok(Rho0Report {
            value: scale * s,
            converged: true,
            truncated_sum: scale * s,
        });
    }
    let sup2 = op
        .sup_norm_sq()
        .ok_or_else(|| Error::Unsupported("custom eigen-table needs a sup-norm table for rho0".into()))?;
    let truncated_sum = scale * lam.iter().map(|l| sup2 / l).sum::<f64>();
    if norm_b0 == 0.0 {
        return Ok(Rho0Report {
            value: 0.0,
            converged: true,
            truncated_sum: 0.0,
        });
    }
    let s = 2.0 * op.alpha();
    if op.dim() == 1 && s > 1.0 {
        let l = op.side_lengths()[0];
        let series = sup2 * (l * l / (std::f64::consts::PI * std::f64::consts::PI)).powf(op.alpha()) * zeta(s);
        Ok(Rho0Report {
            value: scale * series,
            converged: true,
            truncated_sum,
        })
    } else {
        Ok(Rho0Report {
            value: f64::INFINITY,
            converged: false,
            truncated_sum,
        })
    }
}

/// Riemann zeta for `s > 1` by Euler–Maclaurin summation.
pub(crate) fn zeta(s: f64) -> f64 {
    const N: usize = 16;
    // B_2/2!, B_4/4!, ...
    const B: [f64; 6] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
        -691.0 / 1307674368000.0,
    ];
    let n = N as f64;
    let mut sum: f64 = (1..N).map(|k| (k as f64).powf(-s)).sum();
    sum += n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s);
    // s(s+1)...(s+2j-2) · N^{-s-2j+1}
    let mut rising = s;
    let mut power = n.powf(-s - 1.0);
    for (j, b) in B.iter().enumerate() {
        sum += b * rising * power;
        let m = 2 * j as i32 + 1;
        rising *= (s + m as f64) * (s + m as f64 + 1.0);
        power /= n * n;
    }
    sum
}

/// Quadratic-variation envelope `g_i(s) = c_i s²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QvEnvelope {
    pub c1: f64,
    pub c2: f64,
    /// `c₁ = 0`: the lower envelope is degenerate and the probability-one
    /// extinction argument does not apply.
    pub degenerate: bool,
}

pub fn qv_envelope(spec: &NoiseSpec) -> Result<QvEnvelope> {
    match spec {
        NoiseSpec::RankOne { c, .. } => Ok(QvEnvelope {
            c1: 4.0 * c * c,
            c2: 4.0 * c * c,
            degenerate: *c == 0.0,
        }),
        NoiseSpec::FiniteMode { mu } => {
            if mu.iter().any(|m| *m == 0.0) {
                return Ok(QvEnvelope {
                    c1: 0.0,
                    c2: 4.0 * mu.iter().map(|m| m * m).sum::<f64>(),
                    degenerate: true,
                });
            }
            Ok(QvEnvelope {
                c1: 4.0 / mu.iter().map(|m| 1.0 / (m * m)).sum::<f64>(),
                c2: 4.0 * mu.iter().map(|m| m * m).sum::<f64>(),
                degenerate: false,
            })
        }
        NoiseSpec::Mixed { c, c_tilde } => Ok(QvEnvelope {
            c1: 4.0 * c * c,
            c2: 4.0 * (c * c + c_tilde * c_tilde),
            degenerate: *c == 0.0,
        }),
        _ => Err(Error::Inapplicable(
            "quadratic-variation envelopes exist for rank-one, finite-mode and mixed noise only".into(),
        )),
    }
}
