//! Dirichlet eigenbasis of `L = (-Δ)^α` on a box, sine transforms between
//! coefficient and grid representations, and the norms used throughout.
//!
//! Coefficients are stored in a flat table sorted by eigenvalue (ties broken
//! by lexicographic multi-index). The physical representation is the uniform
//! interior grid `x_j = j·L/(G+1)`, `j = 1..G`, on every axis; boundary nodes
//! are implicit zeros.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// Default ultracontractivity constant: Gaussian domination of the Dirichlet
/// heat kernel, `‖P_t‖_{1→∞} ≤ (4πt)^{-n/2}`.
pub const DEFAULT_C_INF: f64 = 4.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Tensor sine basis on a box; transforms available.
    DirichletBox,
    /// User-supplied eigenvalue table with no physical realisation.
    Custom,
}

/// Spectral description of the operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    n: usize,
    alpha: f64,
    side_lengths: Vec<f64>,
    modes_per_axis: usize,
    eigenvalues: Vec<f64>,
    /// `n` one-based indices per mode, row-major; empty for custom tables.
    multi_indices: Vec<u32>,
    c_inf: f64,
    basis: Basis,
}

/// Eigen-table for `(−Δ)^α` on `∏ (0, L_i)` with `n_modes` modes per axis.
///
/// `side_lengths = None` means the unit box.
pub fn build_operator(
    n: usize,
    alpha: f64,
    side_lengths: Option<&[f64]>,
    n_modes: usize,
) -> Result<OperatorSpec> {
    let sides = match side_lengths {
        Some(s) => s.to_vec(),
        None => vec![1.0; n],
    };
    OperatorSpec::dirichlet_box(n, alpha, &sides, n_modes)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(param("alpha", format!("must lie in (0,1], got {alpha}")));
    }
    Ok(())
}

impl OperatorSpec {
    pub fn dirichlet_box(n: usize, alpha: f64, side_lengths: &[f64], n_modes: usize) -> Result<Self> {
        if n == 0 {
            return Err(param("n", "spatial dimension must be at least 1"));
        }
        check_alpha(alpha)?;
        if n_modes == 0 {
            return Err(param("n_modes", "need at least one mode per axis"));
        }
        if side_lengths.len() != n {
            return Err(param(
                "side_lengths",
                format!("expected {n} lengths, got {}", side_lengths.len()),
            ));
        }
        if let Some(bad) = side_lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(param("side_lengths", format!("lengths must be positive, got {bad}")));
        }
        let total = n_modes
            .checked_pow(n as u32)
            .filter(|t| *t <= 1 << 24)
            .ok_or_else(|| param("n_modes", "tensor truncation too large"))?;

        let mut modes: Vec<(f64, Vec<u32>)> = Vec::with_capacity(total);
        let mut idx = vec![1u32; n];
        for _ in 0..total {
            let s: f64 = idx
                .iter()
                .zip(side_lengths)
                .map(|(&k, &l)| {
                    let k = k as f64;
                    k * k / (l * l)
                })
                .sum();
            modes.push(((PI * PI * s).powf(alpha), idx.clone()));
            // odometer increment, last axis fastest
            for a in (0..n).rev() {
                if (idx[a] as usize) < n_modes {
                    idx[a] += 1;
                    break;
                }
                idx[a] = 1;
            }
        }
        modes.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));

        let eigenvalues = modes.iter().map(|m| m.0).collect();
        let multi_indices = modes.into_iter().flat_map(|m| m.1).collect();
        Ok(Self {
            n,
            alpha,
            side_lengths: side_lengths.to_vec(),
            modes_per_axis: n_modes,
            eigenvalues,
            multi_indices,
            c_inf: DEFAULT_C_INF,
            basis: Basis::DirichletBox,
        })
    }

    /// Operator known only through its eigenvalues (e.g. a potential `V ≠ 0`
    /// whose spectrum was computed elsewhere). Transforms are unavailable.
    pub fn from_eigenvalues(n: usize, alpha: f64, table: &[f64], c_inf: f64) -> Result<Self> {
        if n == 0 {
            return Err(param("n", "spatial dimension must be at least 1"));
        }
        check_alpha(alpha)?;
        if table.is_empty() {
            return Err(param("eigenvalues", "table is empty"));
        }
        if let Some(bad) = table.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(param("eigenvalues", format!("eigenvalues must be positive, got {bad}")));
        }
        let mut eigenvalues = table.to_vec();
        eigenvalues.sort_by(f64::total_cmp);
        let spec = Self {
            n,
            alpha,
            side_lengths: Vec::new(),
            modes_per_axis: eigenvalues.len(),
            eigenvalues,
            multi_indices: Vec::new(),
            c_inf: DEFAULT_C_INF,
            basis: Basis::Custom,
        };
        spec.with_c_inf(c_inf)
    }

    pub fn with_c_inf(mut self, c_inf: f64) -> Result<Self> {
        if !(c_inf.is_finite() && c_inf > 0.0) {
            return Err(param("c_inf", format!("must be positive, got {c_inf}")));
        }
        self.c_inf = c_inf;
        Ok(self)
    }

    /// Same box with a different per-axis truncation.
    pub fn retruncated(&self, n_modes: usize) -> Result<Self> {
        match self.basis {
            Basis::DirichletBox => {
                Self::dirichlet_box(self.n, self.alpha, &self.side_lengths, n_modes)?.with_c_inf(self.c_inf)
            }
            Basis::Custom => {
                let keep = n_modes.min(self.eigenvalues.len()).max(1);
                Self::from_eigenvalues(self.n, self.alpha, &self.eigenvalues[..keep], self.c_inf)
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Effective dimension `d = n/α` in the ultracontractivity bound.
    pub fn d_eff(&self) -> f64 {
        self.n as f64 / self.alpha
    }

    pub fn c_inf(&self) -> f64 {
        self.c_inf
    }

    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().expect("nonempty table")
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Total number of truncated modes.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn side_lengths(&self) -> &[f64] {
        &self.side_lengths
    }

    pub fn modes_per_axis(&self) -> usize {
        self.modes_per_axis
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn volume(&self) -> f64 {
        self.side_lengths.iter().product()
    }

    /// One-based multi-index of flattened mode `k` (zero-based).
    pub fn multi_index(&self, k: usize) -> Option<&[u32]> {
        match self.basis {
            Basis::DirichletBox => Some(&self.multi_indices[k * self.n..(k + 1) * self.n]),
            Basis::Custom => None,
        }
    }

    /// `‖e_k‖²_∞` for the sine basis, `∏ 2/L_i`.
    pub fn sup_norm_sq(&self) -> Option<f64> {
        match self.basis {
            Basis::DirichletBox => Some(self.side_lengths.iter().map(|l| 2.0 / l).product()),
            Basis::Custom => None,
        }
    }
}

/// `Σ a_k²/λ_k`.
pub fn h_norm_sq_coeffs(eigenvalues: &[f64], coeffs: &[f64]) -> f64 {
    coeffs.iter().zip(eigenvalues).map(|(a, l)| a * a / l).sum()
}

/// `⟨a, b⟩_H = Σ a_k b_k/λ_k`.
pub fn h_inner_coeffs(eigenvalues: &[f64], a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).zip(eigenvalues).map(|((x, y), l)| x * y / l).sum()
}

pub fn l2_norm_sq_coeffs(coeffs: &[f64]) -> f64 {
    coeffs.iter().map(|a| a * a).sum()
}

/// State expressed in the eigenbasis, `a_k = ⟨x, e_k⟩₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub coeffs: Vec<f64>,
    pub op: Arc<OperatorSpec>,
}

impl SpectralField {
    pub fn zeros(op: Arc<OperatorSpec>) -> Self {
        Self {
            coeffs: vec![0.0; op.len()],
            op,
        }
    }

    pub fn new(op: Arc<OperatorSpec>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != op.len() {
            return Err(param(
                "coeffs",
                format!("expected {} coefficients, got {}", op.len(), coeffs.len()),
            ));
        }
        Ok(Self { coeffs, op })
    }

    /// `scale · e_k` for the zero-based flattened mode `k`.
    pub fn basis(op: Arc<OperatorSpec>, k: usize, scale: f64) -> Self {
        let mut f = Self::zeros(op);
        f.coeffs[k] = scale;
        f
    }

    pub fn h_norm_sq(&self) -> f64 {
        h_norm_sq_coeffs(self.op.eigenvalues(), &self.coeffs)
    }

    pub fn h_norm(&self) -> f64 {
        self.h_norm_sq().sqrt()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        l2_norm_sq_coeffs(&self.coeffs)
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|a| a.is_finite())
    }
}

pub fn h_norm(field: &SpectralField) -> f64 {
    field.h_norm()
}

pub fn l2_norm(field: &SpectralField) -> f64 {
    field.l2_norm()
}

/// Scratch buffers for one in-flight transform.
#[derive(Debug, Default, Clone)]
pub struct DstScratch {
    line: Vec<Complex<f64>>,
    fft: Vec<Complex<f64>>,
    tensor: Vec<f64>,
}

/// Sine transforms between the flat coefficient table and the interior grid.
#[derive(Clone)]
pub struct SpectralGrid {
    op: Arc<OperatorSpec>,
    grid: usize,
    total: usize,
    fft: Arc<dyn Fft<f64>>,
    /// Tensor position of each flattened mode.
    positions: Vec<usize>,
    phys_scale: f64,
    spec_scale: f64,
    cell_volume: f64,
}

impl std::fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("grid", &self.grid)
            .field("total", &self.total)
            .finish()
    }
}

impl SpectralGrid {
    /// `grid_size` interior nodes per axis; must be at least the per-axis mode
    /// count or the transform aliases.
    pub fn new(op: Arc<OperatorSpec>, grid_size: usize) -> Result<Self> {
        if op.basis() != Basis::DirichletBox {
            return Err(Error::Unsupported(
                "physical transforms need the sine basis of a box".into(),
            ));
        }
        if grid_size < op.modes_per_axis() {
            return Err(param(
                "grid_size",
                format!(
                    "grid of {grid_size} nodes cannot resolve {} modes per axis (aliasing)",
                    op.modes_per_axis()
                ),
            ));
        }
        let n = op.dim();
        let total = grid_size
            .checked_pow(n as u32)
            .filter(|t| *t <= 1 << 26)
            .ok_or_else(|| param("grid_size", "physical grid too large"))?;
        let m = (grid_size + 1) as f64;
        let fft = FftPlanner::new().plan_fft_forward(2 * (grid_size + 1));
        let positions = (0..op.len())
            .map(|k| {
                op.multi_index(k)
                    .expect("box basis")
                    .iter()
                    .fold(0usize, |acc, &ki| acc * grid_size + (ki as usize - 1))
            })
            .collect();
        let sides = op.side_lengths();
        let phys_scale = sides.iter().map(|l| (2.0 / l).sqrt()).product();
        let spec_scale = sides.iter().map(|l| (2.0 * l).sqrt() / m).product();
        let cell_volume = sides.iter().map(|l| l / m).product();
        Ok(Self {
            op,
            grid: grid_size,
            total,
            fft,
            positions,
            phys_scale,
            spec_scale,
            cell_volume,
        })
    }

    pub fn op(&self) -> &Arc<OperatorSpec> {
        &self.op
    }

    pub fn grid_size(&self) -> usize {
        self.grid
    }

    /// Number of physical nodes, `G^n`.
    pub fn node_count(&self) -> usize {
        self.total
    }

    /// Quadrature weight of a node, `∏ L_i/(G+1)`.
    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    /// Interior node coordinates along `axis`.
    pub fn axis_nodes(&self, axis: usize) -> Vec<f64> {
        let l = self.op.side_lengths()[axis];
        let m = (self.grid + 1) as f64;
        (1..=self.grid).map(|j| j as f64 * l / m).collect()
    }

    pub fn scratch(&self) -> DstScratch {
        DstScratch {
            line: vec![Complex::default(); 2 * (self.grid + 1)],
            fft: vec![Complex::default(); self.fft.get_inplace_scratch_len()],
            tensor: vec![0.0; self.total],
        }
    }

    fn ensure(&self, ws: &mut DstScratch) {
        if ws.line.len() != 2 * (self.grid + 1) {
            *ws = self.scratch();
        }
    }

    /// Unnormalised DST-I `S_k = Σ_j x_j sin(πjk/(G+1))` along every axis.
    fn dst_all_axes(&self, data: &mut [f64], ws: &mut DstScratch) {
        let g = self.grid;
        let n = self.op.dim();
        let mlen = g + 1;
        for axis in 0..n {
            let stride = g.pow((n - 1 - axis) as u32);
            let outer = g.pow(axis as u32);
            for o in 0..outer {
                for inner in 0..stride {
                    let base = o * g * stride + inner;
                    let line = &mut ws.line;
                    line[0] = Complex::default();
                    line[mlen] = Complex::default();
                    for j in 0..g {
                        let x = data[base + j * stride];
                        line[j + 1] = Complex::new(x, 0.0);
                        line[2 * mlen - j - 1] = Complex::new(-x, 0.0);
                    }
                    self.fft.process_with_scratch(line, &mut ws.fft);
                    for k in 0..g {
                        data[base + k * stride] = -0.5 * line[k + 1].im;
                    }
                }
            }
        }
    }

    /// Node values of the truncated sine series.
    pub fn to_physical_into(&self, coeffs: &[f64], out: &mut [f64], ws: &mut DstScratch) {
        debug_assert_eq!(coeffs.len(), self.positions.len());
        debug_assert_eq!(out.len(), self.total);
        self.ensure(ws);
        out.fill(0.0);
        for (&p, &a) in self.positions.iter().zip(coeffs) {
            out[p] = a;
        }
        self.dst_all_axes(out, ws);
        for v in out.iter_mut() {
            *v *= self.phys_scale;
        }
    }

    /// Discrete projection of node values onto the truncated basis.
    pub fn to_spectral_into(&self, values: &[f64], out: &mut [f64], ws: &mut DstScratch) {
        debug_assert_eq!(values.len(), self.total);
        debug_assert_eq!(out.len(), self.positions.len());
        self.ensure(ws);
        let mut tensor = std::mem::take(&mut ws.tensor);
        tensor.clear();
        tensor.extend_from_slice(values);
        self.dst_all_axes(&mut tensor, ws);
        for (o, &p) in out.iter_mut().zip(&self.positions) {
            *o = tensor[p] * self.spec_scale;
        }
        ws.tensor = tensor;
    }

    pub fn to_physical(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.op.len() {
            return Err(param(
                "coeffs",
                format!("expected {} coefficients, got {}", self.op.len(), coeffs.len()),
            ));
        }
        let mut out = vec![0.0; self.total];
        let mut ws = self.scratch();
        self.to_physical_into(coeffs, &mut out, &mut ws);
        Ok(out)
    }

    pub fn to_spectral(&self, values: &[f64]) -> Result<SpectralField> {
        if values.len() != self.total {
            return Err(param(
                "values",
                format!("expected {} node values, got {}", self.total, values.len()),
            ));
        }
        let mut out = vec![0.0; self.op.len()];
        let mut ws = self.scratch();
        self.to_spectral_into(values, &mut out, &mut ws);
        Ok(SpectralField {
            coeffs: out,
            op: self.op.clone(),
        })
    }

    /// Node values of the basis function `e_k`.
    pub fn basis_values(&self, k: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.op.len()];
        c[k] = 1.0;
        let mut out = vec![0.0; self.total];
        self.to_physical_into(&c, &mut out, &mut self.scratch());
        out
    }

    /// Trapezoid `L^p` norm of node values (zero boundary values).
    pub fn lp_norm_values(&self, values: &[f64], p: f64) -> f64 {
        let s: f64 = if p == 1.0 {
            values.iter().map(|v| v.abs()).sum()
        } else if p == 2.0 {
            values.iter().map(|v| v * v).sum()
        } else {
            values.iter().map(|v| v.abs().powf(p)).sum()
        };
        (s * self.cell_volume).powf(1.0 / p)
    }

    /// `Σ |x_j|^p · cell` without the root.
    pub fn lp_power_values(&self, values: &[f64], p: f64) -> f64 {
        values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * self.cell_volume
    }
}

pub fn to_physical(field: &SpectralField, grid_size: usize) -> Result<Vec<f64>> {
    SpectralGrid::new(field.op.clone(), grid_size)?.to_physical(&field.coeffs)
}

pub fn to_spectral(values: &[f64], op: Arc<OperatorSpec>) -> Result<SpectralField> {
    let n = op.dim();
    let g = (values.len() as f64).powf(1.0 / n as f64).round() as usize;
    if g.checked_pow(n as u32) != Some(values.len()) {
        return Err(param(
            "values",
            format!("{} values do not form a {n}-dimensional square grid", values.len()),
        ));
    }
    SpectralGrid::new(op, g)?.to_spectral(values)
}

pub fn lp_norm(field: &SpectralField, p: f64, grid_size: usize) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(param("p", format!("need p >= 1, got {p}")));
    }
    let grid = SpectralGrid::new(field.op.clone(), grid_size)?;
    let values = grid.to_physical(&field.coeffs)?;
    Ok(grid.lp_norm_values(&values, p))
}

/// `‖P_t‖_{1+r → (1+r)/r} ≤ (c∞t)^{-d(1-r)/(2(1+r))} e^{-λ₁(1-r)t/(1+r)}`.
pub fn heat_norm_bound(t: f64, r: f64, op: &OperatorSpec) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("heat bound needs t > 0, got {t}")));
    }
    if !(0.0..1.0).contains(&r) {
        return Err(Error::Domain(format!("r must lie in [0,1), got {r}")));
    }
    let expo = op.d_eff() * (1.0 - r) / (2.0 * (1.0 + r));
    Ok((op.c_inf() * t).powf(-expo) * (-op.lambda1() * (1.0 - r) * t / (1.0 + r)).exp())
}
