//! Maximal monotone graphs Ψ, their pointwise resolvents `(I + cΨ)⁻¹` and
//! Yosida approximations, plus diagnostic checkers for the growth condition
//! `C(|s|^q + |s|) ≥ sy ≥ θ₁|s|^{1+r} + θ₂s²` and strong monotonicity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PsiVariant {
    /// `θ₁ + θ₂s` for `s > 0`, `[0, θ₁]` at 0, `0` for `s < 0`.
    Soc { theta1: f64, theta2: f64 },
    /// `|s|^r sgn s`.
    FastDiffusion { r: f64 },
    /// `θ₁|s|^r sgn s + θ₂s`.
    PowerPlusLinear { theta1: f64, r: f64, theta2: f64 },
    /// `θ₂s`.
    Linear { theta2: f64 },
}

/// Structure constants for the growth condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthConstants {
    pub c: f64,
    pub q: f64,
    pub r: f64,
    pub theta1: f64,
    pub theta2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiGraph {
    pub variant: PsiVariant,
    /// Replace Ψ on `(-∞,0)` by `-Ψ(-s)`; only changes the SOC graph.
    #[serde(default)]
    pub odd_extend: bool,
}

impl PsiGraph {
    pub fn new(variant: PsiVariant) -> Result<Self> {
        let g = Self {
            variant,
            odd_extend: false,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn soc(theta1: f64, theta2: f64) -> Result<Self> {
        Self::new(PsiVariant::Soc { theta1, theta2 })
    }

    pub fn fast_diffusion(r: f64) -> Result<Self> {
        Self::new(PsiVariant::FastDiffusion { r })
    }

    pub fn power_plus_linear(theta1: f64, r: f64, theta2: f64) -> Result<Self> {
        Self::new(PsiVariant::PowerPlusLinear { theta1, r, theta2 })
    }

    pub fn linear(theta2: f64) -> Result<Self> {
        Self::new(PsiVariant::Linear { theta2 })
    }

    pub fn odd_extended(mut self) -> Self {
        self.odd_extend = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, why: &str| {
            Err(Error::Parameter {
                name: name.into(),
                reason: why.into(),
            })
        };
        match self.variant {
            PsiVariant::Soc { theta1, theta2 } => {
                if !(theta1 >= 0.0 && theta1.is_finite()) {
                    return bad("theta1", "SOC needs theta1 >= 0");
                }
                if !(theta2 >= 0.0 && theta2.is_finite()) {
                    return bad("theta2", "SOC needs theta2 >= 0");
                }
            }
            PsiVariant::FastDiffusion { r } => {
                if !(r > 0.0 && r < 1.0) {
                    return bad("r", "fast diffusion needs r in (0,1)");
                }
            }
            PsiVariant::PowerPlusLinear { theta1, r, theta2 } => {
                if !(theta1 > 0.0 && theta1.is_finite()) {
                    return bad("theta1", "power-plus-linear needs theta1 > 0");
                }
                if !(r > 0.0 && r < 1.0) {
                    return bad("r", "power-plus-linear needs r in (0,1)");
                }
                if !(theta2 > 0.0 && theta2.is_finite()) {
                    return bad("theta2", "power-plus-linear needs theta2 > 0");
                }
            }
            PsiVariant::Linear { theta2 } => {
                if !(theta2 > 0.0 && theta2.is_finite()) {
                    return bad("theta2", "linear graph needs theta2 > 0");
                }
            }
        }
        Ok(())
    }

    /// True when some `Ψ(s)` is a nondegenerate interval.
    pub fn is_multivalued(&self) -> bool {
        matches!(self.variant, PsiVariant::Soc { theta1, .. } if theta1 > 0.0)
    }

    /// Structure constants the graph satisfies with (used as defaults for
    /// the bounds). SOC is quoted with its odd extension in mind.
    pub fn growth_constants(&self) -> GrowthConstants {
        match self.variant {
            PsiVariant::Soc { theta1, theta2 } => GrowthConstants {
                c: theta1.max(theta2).max(f64::MIN_POSITIVE),
                q: if theta2 > 0.0 { 2.0 } else { 1.0 },
                r: 0.0,
                theta1,
                theta2,
            },
            PsiVariant::FastDiffusion { r } => GrowthConstants {
                c: 1.0,
                q: 1.0 + r,
                r,
                theta1: 1.0,
                theta2: 0.0,
            },
            PsiVariant::PowerPlusLinear { theta1, r, theta2 } => GrowthConstants {
                c: theta1 + theta2,
                q: 2.0,
                r,
                theta1,
                theta2,
            },
            PsiVariant::Linear { theta2 } => GrowthConstants {
                c: theta2,
                q: 2.0,
                r: 0.0,
                theta1: 0.0,
                theta2,
            },
        }
    }

    /// Exponent `r` of the power part (0 for SOC and linear graphs).
    pub fn r(&self) -> f64 {
        self.growth_constants().r
    }

    /// Strong-monotonicity constant κ (0 where it fails).
    pub fn kappa(&self) -> f64 {
        match self.variant {
            PsiVariant::PowerPlusLinear { theta2, .. } | PsiVariant::Linear { theta2 } => theta2,
            PsiVariant::Soc { theta1, theta2 } if theta1 == 0.0 && self.odd_extend => theta2,
            _ => 0.0,
        }
    }

    /// `Ψ(s)` as a closed interval `[lo, hi]`.
    pub fn interval(&self, s: f64) -> (f64, f64) {
        match self.variant {
            PsiVariant::Soc { theta1, theta2 } => {
                if s > 0.0 {
                    let y = theta1 + theta2 * s;
                    (y, y)
                } else if s == 0.0 {
                    if self.odd_extend {
                        (-theta1, theta1)
                    } else {
                        (0.0, theta1)
                    }
                } else if self.odd_extend {
                    let y = -theta1 + theta2 * s;
                    (y, y)
                } else {
                    (0.0, 0.0)
                }
            }
            _ => {
                let y = self.single(s);
                (y, y)
            }
        }
    }

    fn single(&self, s: f64) -> f64 {
        match self.variant {
            PsiVariant::FastDiffusion { r } => s.abs().powf(r).copysign(s),
            PsiVariant::PowerPlusLinear { theta1, r, theta2 } => {
                let p = if s == 0.0 { 0.0 } else { s.abs().powf(r).copysign(s) };
                theta1 * p + theta2 * s
            }
            PsiVariant::Linear { theta2 } => theta2 * s,
            PsiVariant::Soc { .. } => {
                let (lo, hi) = self.interval(s);
                min_modulus(lo, hi)
            }
        }
    }

    /// Element of `Ψ(s)` of minimal absolute value.
    pub fn minimal_section(&self, s: f64) -> f64 {
        let (lo, hi) = self.interval(s);
        min_modulus(lo, hi)
    }

    /// Whether `y ∈ Ψ(s)` up to `tol`.
    pub fn contains(&self, s: f64, y: f64, tol: f64) -> bool {
        let (lo, hi) = self.interval(s);
        y >= lo - tol && y <= hi + tol
    }

    /// Unique `v` with `z − v ∈ cΨ(v)`.
    pub fn resolvent(&self, c: f64, z: f64) -> f64 {
        debug_assert!(c > 0.0);
        match self.variant {
            PsiVariant::Soc { theta1, theta2 } => {
                let jump = c * theta1;
                if z > jump {
                    (z - jump) / (1.0 + c * theta2)
                } else if z >= 0.0 {
                    0.0
                } else if !self.odd_extend {
                    z
                } else if z >= -jump {
                    0.0
                } else {
                    (z + jump) / (1.0 + c * theta2)
                }
            }
            PsiVariant::Linear { theta2 } => z / (1.0 + c * theta2),
            PsiVariant::FastDiffusion { r } => power_resolvent(1.0, c, r, z),
            PsiVariant::PowerPlusLinear { theta1, r, theta2 } => power_resolvent(1.0 + c * theta2, c * theta1, r, z),
        }
    }

    /// Derivative of `z ↦ (I + cΨ)⁻¹z`, in `[0, 1]`; zero where the
    /// resolvent sits on a vertical piece of the graph.
    pub fn resolvent_slope(&self, c: f64, z: f64) -> f64 {
        let s = self.resolvent(c, z);
        let dpsi = match self.variant {
            PsiVariant::Soc { theta1, theta2 } => {
                if s != 0.0 {
                    theta2
                } else if z < 0.0 && !self.odd_extend {
                    0.0
                } else if theta1 > 0.0 {
                    f64::INFINITY
                } else {
                    theta2
                }
            }
            PsiVariant::Linear { theta2 } => theta2,
            PsiVariant::FastDiffusion { r } => r * s.abs().powf(r - 1.0),
            PsiVariant::PowerPlusLinear { theta1, r, theta2 } => theta1 * r * s.abs().powf(r - 1.0) + theta2,
        };
        1.0 / (1.0 + c * dpsi)
    }

    /// `Ψ_δ(s) = (s − (I + δΨ)⁻¹ s)/δ`.
    pub fn yosida(&self, delta: f64, s: f64) -> f64 {
        (s - self.resolvent(delta, s)) / delta
    }

    /// Local slope of the graph at magnitude `m > 0` (used to pick solver
    /// step parameters); `∞` where the graph is vertical.
    pub fn slope_at(&self, m: f64) -> f64 {
        let m = m.abs();
        match self.variant {
            PsiVariant::Soc { theta2, .. } => theta2,
            PsiVariant::Linear { theta2 } => theta2,
            PsiVariant::FastDiffusion { r } => {
                if m == 0.0 {
                    f64::INFINITY
                } else {
                    r * m.powf(r - 1.0)
                }
            }
            PsiVariant::PowerPlusLinear { theta1, r, theta2 } => {
                if m == 0.0 {
                    f64::INFINITY
                } else {
                    theta1 * r * m.powf(r - 1.0) + theta2
                }
            }
        }
    }
}

/// Slow reference for `(I + cΨ)⁻¹z`: bisection on the monotone set-valued
/// map `v ↦ v + cΨ(v)` using only the graph's intervals.
pub fn resolvent_bisection(graph: &PsiGraph, c: f64, z: f64) -> f64 {
    let (mut lo, mut hi) = (-z.abs() - 1.0, z.abs() + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let (a, b) = graph.interval(mid);
        if mid + c * a > z {
            hi = mid;
        } else if mid + c * b < z {
            lo = mid;
        } else {
            return mid;
        }
    }
    0.5 * (lo + hi)
}

fn min_modulus(lo: f64, hi: f64) -> f64 {
    if lo <= 0.0 && hi >= 0.0 {
        0.0
    } else if lo > 0.0 {
        lo
    } else {
        hi
    }
}

/// Solve `a·v + b·|v|^r sgn v = z` for the odd map with `a, b > 0`.
///
/// Works in `w = |v|^r`, where `a w^{1/r} + b w − |z|` is convex and
/// increasing, so Newton from the right converges monotonically.
fn power_resolvent(a: f64, b: f64, r: f64, z: f64) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    let target = z.abs();
    let p = 1.0 / r;
    let mut w = (target / b).min((target / a).powf(r));
    for _ in 0..100 {
        let wp = w.powf(p);
        let f = a * wp + b * w - target;
        if f <= 0.0 {
            break;
        }
        let df = a * p * wp / w + b;
        let next = w - f / df;
        if !(next > 0.0) {
            w = 0.5 * w;
            continue;
        }
        if w - next <= 4.0 * f64::EPSILON * w {
            w = next;
            break;
        }
        w = next;
    }
    w.powf(p).copysign(z)
}

/// Outcome of a growth-condition scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionPReport {
    pub pass: bool,
    /// Smallest normalised slack over both inequalities.
    pub worst_slack: f64,
    /// Sample where the worst slack occurred.
    pub worst_s: f64,
    /// Samples violating either inequality.
    pub violations: Vec<f64>,
}

/// Check `C(|s|^q + |s|) ≥ sy ≥ θ₁|s|^{1+r} + θ₂s²` at every sample, for the
/// minimal section and for both ends of multivalued points.
pub fn check_condition_p(graph: &PsiGraph, k: &GrowthConstants, samples: &[f64]) -> ConditionPReport {
    const TOL: f64 = 1e-12;
    let mut worst_slack = f64::INFINITY;
    let mut worst_s = f64::NAN;
    let mut violations = Vec::new();
    for &s in samples {
        let (lo, hi) = graph.interval(s);
        let upper = k.c * (s.abs().powf(k.q) + s.abs());
        let lower = k.theta1 * s.abs().powf(1.0 + k.r) + k.theta2 * s * s;
        let mut bad = false;
        for y in [graph.minimal_section(s), lo, hi] {
            let sy = s * y;
            let scale = 1.0 + upper.abs() + lower.abs() + sy.abs();
            let slack = ((upper - sy) / scale).min((sy - lower) / scale);
            if slack < worst_slack {
                worst_slack = slack;
                worst_s = s;
            }
            bad |= slack < -TOL;
        }
        if bad {
            violations.push(s);
        }
    }
    ConditionPReport {
        pass: violations.is_empty(),
        worst_slack,
        worst_s,
        violations,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongMonotoneReport {
    pub pass: bool,
    /// Smallest difference quotient `(s−t)(Ψ(s)−Ψ(t))/|s−t|²` seen.
    pub worst_ratio: f64,
    pub worst_pair: (f64, f64),
}

/// Check `(s−t)(Ψ(s)−Ψ(t)) ≥ κ|s−t|²` on the sampled pairs.
pub fn check_strong_monotone(graph: &PsiGraph, kappa: f64, pairs: &[(f64, f64)]) -> Result<StrongMonotoneReport> {
    if graph.is_multivalued() {
        return Err(Error::Unsupported(
            "strong monotonicity is only checked for continuous single-valued graphs".into(),
        ));
    }
    let mut worst_ratio = f64::INFINITY;
    let mut worst_pair = (f64::NAN, f64::NAN);
    for &(s, t) in pairs {
        if s == t {
            continue;
        }
        let ratio = (graph.minimal_section(s) - graph.minimal_section(t)) / (s - t);
        if ratio < worst_ratio {
            worst_ratio = ratio;
            worst_pair = (s, t);
        }
    }
    Ok(StrongMonotoneReport {
        pass: worst_ratio >= kappa * (1.0 - 1e-12),
        worst_ratio,
        worst_pair,
    })
}
