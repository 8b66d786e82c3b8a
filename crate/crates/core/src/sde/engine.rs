use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Scheme, SimConfig, CHECKPOINTS};
use crate::error::{Error, Result};
use crate::noise::{NoiseOperator, NoiseSpec};
use crate::nonlinearity::{PsiGraph, PsiVariant};
use crate::spectral::{h_norm_sq_coeffs, DstScratch, SpectralGrid};

/// Deepest step-halving attempted after a failed drift solve.
const MAX_RETRY_DEPTH: u32 = 3;

/// Largest node count for which the drift uses dense semismooth Newton.
const DENSE_LIMIT: usize = 256;
const NEWTON_MAX_ITER: usize = 60;

/// Sine basis as dense matrices: `nodes = t·coeffs`, `coeffs = tinv·nodes`.
#[derive(Debug, Clone)]
struct DenseBasis {
    t: DMatrix<f64>,
    tinv: DMatrix<f64>,
}

/// Immutable per-ensemble data shared by all trajectories.
#[derive(Debug, Clone)]
pub struct Engine {
    cfg: SimConfig,
    grid: Arc<SpectralGrid>,
    noise: NoiseOperator,
    track_positivity: bool,
    dense: Option<Arc<DenseBasis>>,
}

/// Buffers owned by one trajectory.
#[derive(Debug)]
pub struct Work {
    ws: DstScratch,
    z: Vec<f64>,
    prev_v: Vec<f64>,
    warm: bool,
    gamma: f64,
    nodes: Vec<f64>,
    nodes2: Vec<f64>,
    spec: Vec<f64>,
    /// `hL` in nodal coordinates for the step length it was built for.
    hl: Option<(f64, DMatrix<f64>)>,
    eta_nodes: Option<DVector<f64>>,
}

/// Result of the drift substep `v + hLΨ(v) ∋ x`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftSolve {
    pub v: Vec<f64>,
    /// Recorded selection `η = (x − v)/(hL)` in spectral coordinates.
    pub eta: Vec<f64>,
    pub iterations: usize,
    /// `‖v + hLη_sel − x‖_H` at exit.
    pub residual: f64,
}

/// Per-step diagnostics (recorded only when requested).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    /// `Δ‖X‖²_H + 2⟨v,η⟩₂h − ‖B(v)‖²_{HS}h − 2⟨B(v)ΔW, v⟩_H`.
    pub ito_residual: f64,
    /// `2⟨B(v)ΔW, v⟩_H`.
    pub martingale_increment: f64,
    /// `‖v‖²_H` at the state the noise acts on.
    pub h_norm_sq: f64,
    /// Instantaneous rate `Σ_j m_j²` of the martingale's quadratic variation.
    pub qv_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryStatus {
    Extinct,
    Censored,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: f64,
    pub h_sq: f64,
    pub l2_sq: f64,
    /// `‖X‖^{1+r}_{1+r}`.
    pub lp_pow: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub index: usize,
    pub status: TrajectoryStatus,
    /// First crossing of `eps_ext`, linearly interpolated.
    pub hitting_time: Option<f64>,
    /// Crossing of `eps_ext/10`, for the threshold-sensitivity report.
    pub hitting_time_fine: Option<f64>,
    pub failure: Option<String>,
    pub curve: Vec<CurvePoint>,
    pub steps: usize,
    pub retries: usize,
    pub max_solver_iterations: usize,
    /// Smallest `min_j x_j / max_j |x_j|` over the run, when tracked.
    pub positivity_min: Option<f64>,
    pub records: Vec<StepRecord>,
}

impl Trajectory {
    /// `τ̂₀ ∧ T_max`.
    pub fn stopped_time(&self, t_max: f64) -> f64 {
        self.hitting_time.unwrap_or(t_max)
    }
}

impl Engine {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = Arc::new(SpectralGrid::new(cfg.op.clone(), cfg.op.modes_per_axis())?);
        let noise = NoiseOperator::new(&cfg.noise, cfg.op.clone(), Some(grid.clone()))?;
        let sign_preserving_graph = matches!(
            cfg.graph.variant,
            PsiVariant::Soc { .. } | PsiVariant::FastDiffusion { .. }
        );
        let sign_preserving_noise = matches!(
            cfg.noise,
            NoiseSpec::None | NoiseSpec::Diagonal { .. } | NoiseSpec::Uncoloured { .. }
        ) || noise.is_zero();
        let x0_nodes = grid.to_physical(&cfg.x0)?;
        let track_positivity = sign_preserving_graph && sign_preserving_noise && x0_nodes.iter().all(|v| *v >= 0.0);
        let k = cfg.op.len();
        let dense = (k <= DENSE_LIMIT && grid.node_count() == k).then(|| {
            let mut t = DMatrix::zeros(k, k);
            let mut tinv = DMatrix::zeros(k, k);
            let mut e = vec![0.0; k];
            let mut ws = grid.scratch();
            let mut col = vec![0.0; k];
            for j in 0..k {
                e.fill(0.0);
                e[j] = 1.0;
                grid.to_physical_into(&e, &mut col, &mut ws);
                t.set_column(j, &DVector::from_column_slice(&col));
                grid.to_spectral_into(&e, &mut col, &mut ws);
                tinv.set_column(j, &DVector::from_column_slice(&col));
            }
            Arc::new(DenseBasis { t, tinv })
        });
        Ok(Self {
            cfg,
            grid,
            noise,
            track_positivity,
            dense,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn noise(&self) -> &NoiseOperator {
        &self.noise
    }

    pub fn work(&self) -> Work {
        let k = self.cfg.op.len();
        let nodes = self.grid.node_count();
        Work {
            ws: self.grid.scratch(),
            z: vec![0.0; k],
            prev_v: vec![0.0; k],
            warm: false,
            gamma: 1.0,
            nodes: vec![0.0; nodes],
            nodes2: vec![0.0; nodes],
            spec: vec![0.0; k],
            hl: None,
            eta_nodes: None,
        }
    }

    fn graph(&self) -> &PsiGraph {
        &self.cfg.graph
    }

    /// Drift substep of length `h` from `x`.
    pub fn drift(&self, x: &[f64], h: f64, work: &mut Work) -> Result<DriftSolve> {
        let lam = self.cfg.op.eigenvalues();
        let k = x.len();
        if x.iter().all(|a| *a == 0.0) {
            return Ok(DriftSolve {
                v: vec![0.0; k],
                eta: vec![0.0; k],
                iterations: 0,
                residual: 0.0,
            });
        }
        let x_h = h_norm_sq_coeffs(lam, x).sqrt();
        let (v, iterations, residual) = match (self.cfg.scheme, self.graph().variant) {
            (Scheme::ExplicitYosida, _) => {
                self.grid.to_physical_into(x, &mut work.nodes, &mut work.ws);
                let delta = self.cfg.delta_yosida;
                for s in work.nodes.iter_mut() {
                    *s = self.graph().yosida(delta, *s);
                }
                self.grid.to_spectral_into(&work.nodes, &mut work.spec, &mut work.ws);
                let v: Vec<f64> = (0..k).map(|i| x[i] - h * lam[i] * work.spec[i]).collect();
                (v, 1, 0.0)
            }
            (_, PsiVariant::Linear { theta2 }) => {
                let v: Vec<f64> = (0..k).map(|i| x[i] / (1.0 + h * theta2 * lam[i])).collect();
                (v, 1, 0.0)
            }
            _ => match self.dense.as_ref().and_then(|d| self.newton(d, x, x_h, h, work)) {
                Some(out) => out,
                None => self.douglas_rachford(x, x_h, h, work)?,
            },
        };
        let v_h = h_norm_sq_coeffs(lam, &v).sqrt();
        // monotone Ψ and positive L make the exact substep contract in H
        let slack = 10.0 * self.cfg.solver_tol * x_h + 1e-15 * x_h;
        if v_h > x_h + slack {
            return Err(Error::Dissipativity { before: x_h, after: v_h });
        }
        let eta: Vec<f64> = (0..k).map(|i| (x[i] - v[i]) / (h * lam[i])).collect();
        Ok(DriftSolve {
            v,
            eta,
            iterations,
            residual,
        })
    }

    /// Semismooth Newton on the nodal selection `η`: with `v = x − hLη` and
    /// `w = v + cη`, solve `v = (I + cΨ)⁻¹w`. The Jacobian reduces to an SPD
    /// system `(hL + cD/(1−D))δ = F/(1−D)` on nodes where the resolvent
    /// slope `D` is below one. `None` when the line search stalls.
    fn newton(&self, basis: &DenseBasis, x: &[f64], x_h: f64, h: f64, work: &mut Work) -> Option<(Vec<f64>, usize, f64)> {
        let lam = self.cfg.op.eigenvalues();
        let k = x.len();
        if work.hl.as_ref().is_none_or(|(hh, _)| *hh != h) {
            let scaled = DMatrix::from_fn(k, k, |i, j| h * lam[j] * basis.tinv[(j, i)]);
            let a = &basis.t * scaled.transpose();
            let sym = 0.5 * (&a + a.transpose());
            work.hl = Some((h, sym));
        }
        let a = &work.hl.as_ref().expect("built above").1;
        let xn = &basis.t * DVector::from_column_slice(x);
        let rms = (xn.norm_squared() / k as f64).sqrt();
        let slope = self.graph().slope_at(rms);
        let c = if slope.is_finite() && slope > 0.0 { 1.0 / slope } else { 1.0 }.clamp(1e-8, 1e8);
        let graph = self.graph();
        let tol = self.cfg.solver_tol * x_h;

        // returns w = v + cη, s = (I + cΨ)⁻¹w and F = v − s
        let eval = |eta: &DVector<f64>| -> (DVector<f64>, DVector<f64>, DVector<f64>) {
            let v = &xn - a * eta;
            let w = &v + c * eta;
            let s = w.map(|z| graph.resolvent(c, z));
            let f = v - &s;
            (w, s, f)
        };
        let mut eta = match work.eta_nodes.take() {
            Some(e) if e.len() == k => e,
            _ => xn.map(|z| graph.yosida(c, z)),
        };
        let (mut w, mut s, mut f) = eval(&eta);
        let mut fnorm = f.norm();
        for it in 1..=NEWTON_MAX_ITER {
            // exact graph point s with selection b = (w − s)/c
            let b = (&w - &s) / c;
            let r_nodes = &s + a * &b - &xn;
            let r_spec = &basis.tinv * r_nodes;
            let residual = r_spec.iter().zip(lam).map(|(r, l)| r * r / l).sum::<f64>().sqrt();
            if residual <= tol {
                work.eta_nodes = Some(b);
                let v_spec = &basis.tinv * &s;
                return Some((v_spec.as_slice().to_vec(), it, residual));
            }
            let d: Vec<f64> = w.iter().map(|z| graph.resolvent_slope(c, *z)).collect();
            let free: Vec<usize> = (0..k).filter(|&i| d[i] < 1.0).collect();
            let mut delta = DVector::zeros(k);
            for i in 0..k {
                if d[i] >= 1.0 {
                    delta[i] = f[i] / c;
                }
            }
            if !free.is_empty() {
                let m = free.len();
                let mut sys = DMatrix::from_fn(m, m, |p, q| a[(free[p], free[q])]);
                let mut rhs = DVector::zeros(m);
                for (p, &i) in free.iter().enumerate() {
                    sys[(p, p)] += c * d[i] / (1.0 - d[i]);
                    let mut r = f[i] / (1.0 - d[i]);
                    for j in 0..k {
                        if d[j] >= 1.0 {
                            r -= a[(i, j)] * delta[j];
                        }
                    }
                    rhs[p] = r;
                }
                let chol = sys.cholesky()?;
                let sol = chol.solve(&rhs);
                for (p, &i) in free.iter().enumerate() {
                    delta[i] = sol[p];
                }
            }
            let mut step = 1.0;
            loop {
                let trial = &eta + step * &delta;
                let (tw, ts, tf) = eval(&trial);
                let tn = tf.norm();
                if tn <= (1.0 - 1e-4 * step) * fnorm || tn == 0.0 {
                    eta = trial;
                    (w, s, f, fnorm) = (tw, ts, tf, tn);
                    break;
                }
                step *= 0.5;
                if step < 1e-10 {
                    return None;
                }
            }
        }
        None
    }

    /// Douglas–Rachford splitting of `0 ∈ L⁻¹(v − x)/h + Ψ(v)`: the first
    /// operator is diagonal in the sine basis, the second pointwise on the
    /// grid, so both resolvents are explicit.
    fn douglas_rachford(&self, x: &[f64], x_h: f64, h: f64, work: &mut Work) -> Result<(Vec<f64>, usize, f64)> {
        let lam = self.cfg.op.eigenvalues();
        let k = x.len();
        let grid = &self.grid;
        // step length from the graph's slope at the state's RMS magnitude
        grid.to_physical_into(x, &mut work.nodes, &mut work.ws);
        let rms = (work.nodes.iter().map(|s| s * s).sum::<f64>() / work.nodes.len() as f64).sqrt();
        let slope = self.graph().slope_at(rms);
        let gamma = if slope.is_finite() && slope > 0.0 { 1.0 / slope } else { 1.0 };
        let gamma = gamma.clamp(1e-8, 1e8);
        let rho: Vec<f64> = lam.iter().map(|l| gamma / (h * l)).collect();

        if work.warm {
            // keep the previous selection b = (z − v)/γ and re-centre on x
            let scale = gamma / work.gamma;
            for i in 0..k {
                work.z[i] = x[i] + scale * (work.z[i] - work.prev_v[i]);
            }
        } else {
            work.z.copy_from_slice(x);
        }
        let tol = self.cfg.solver_tol * x_h;
        let mut v = vec![0.0; k];
        let mut residual = f64::INFINITY;
        for it in 1..=self.cfg.solver_max_iter {
            grid.to_physical_into(&work.z, &mut work.nodes, &mut work.ws);
            for (o, z) in work.nodes2.iter_mut().zip(&work.nodes) {
                *o = self.graph().resolvent(gamma, *z);
            }
            grid.to_spectral_into(&work.nodes2, &mut v, &mut work.ws);
            // selection b = (z − v)/γ ∈ Ψ(v) on the grid
            let mut r2 = 0.0;
            for i in 0..k {
                let b = (work.z[i] - v[i]) / gamma;
                let r = v[i] + h * lam[i] * b - x[i];
                r2 += r * r / lam[i];
            }
            residual = r2.sqrt();
            if residual <= tol {
                work.prev_v.copy_from_slice(&v);
                work.warm = true;
                work.gamma = gamma;
                return Ok((v, it, residual));
            }
            for i in 0..k {
                let w = (2.0 * v[i] - work.z[i] + rho[i] * x[i]) / (1.0 + rho[i]);
                work.z[i] += w - v[i];
            }
        }
        work.warm = false;
        Err(Error::StepConvergence {
            iterations: self.cfg.solver_max_iter,
            residual,
        })
    }

    /// One step of length `h` with Brownian increment `dw`, halving up to
    /// three times on a failed drift solve (increments split by a Brownian
    /// bridge drawn from `bridge`).
    fn advance(
        &self,
        x: &[f64],
        h: f64,
        dw: &[f64],
        work: &mut Work,
        bridge: &mut ChaCha8Rng,
        depth: u32,
        acc: &mut StepAccumulator,
    ) -> Result<Vec<f64>> {
        match self.drift(x, h, work) {
            Ok(d) => {
                acc.iterations = acc.iterations.max(d.iterations);
                Ok(self.noise_substep(x, d, h, dw, work, acc))
            }
            Err(Error::StepConvergence { .. }) if depth < MAX_RETRY_DEPTH => {
                acc.retries += 1;
                work.warm = false;
                let half = 0.5 * h;
                let dw1: Vec<f64> = dw
                    .iter()
                    .map(|w| {
                        let z: f64 = StandardNormal.sample(bridge);
                        0.5 * w + (0.25 * h).sqrt() * z
                    })
                    .collect();
                let dw2: Vec<f64> = dw.iter().zip(&dw1).map(|(w, a)| w - a).collect();
                let mid = self.advance(x, half, &dw1, work, bridge, depth + 1, acc)?;
                self.advance(&mid, half, &dw2, work, bridge, depth + 1, acc)
            }
            Err(e) => Err(e),
        }
    }

    fn noise_substep(&self, x: &[f64], d: DriftSolve, h: f64, dw: &[f64], work: &mut Work, acc: &mut StepAccumulator) -> Vec<f64> {
        let lam = self.cfg.op.eigenvalues();
        let v = d.v;
        if self.noise.is_zero() {
            if self.cfg.diagnostics {
                let x2 = h_norm_sq_coeffs(lam, x);
                let v2 = h_norm_sq_coeffs(lam, &v);
                let ve: f64 = v.iter().zip(&d.eta).map(|(a, b)| a * b).sum();
                acc.push(v2 - x2 + 2.0 * h * ve, 0.0, v2, 0.0);
            }
            return v;
        }
        let pointwise = self.grid.node_count() == v.len();
        let v_nodes = if pointwise {
            self.grid.to_physical_into(&v, &mut work.nodes, &mut work.ws);
            Some(&work.nodes[..])
        } else {
            None
        };
        let mut inc = vec![0.0; v.len()];
        self.noise
            .apply_into(&v, v_nodes, dw, &mut inc, &mut work.ws)
            .expect("increment dimension fixed by the engine");
        let next: Vec<f64> = v.iter().zip(&inc).map(|(a, b)| a + b).collect();
        if self.cfg.diagnostics {
            let (hs, m) = self.noise.hs_and_martingale(&v, v_nodes, &mut work.ws);
            let x2 = h_norm_sq_coeffs(lam, x);
            let n2 = h_norm_sq_coeffs(lam, &next);
            let ve: f64 = v.iter().zip(&d.eta).map(|(a, b)| a * b).sum();
            let mart: f64 = m.iter().zip(dw).map(|(a, b)| a * b).sum();
            let qv: f64 = m.iter().map(|a| a * a).sum();
            let v2 = h_norm_sq_coeffs(lam, &v);
            acc.push(n2 - x2 + 2.0 * h * ve - hs * h - mart, mart, v2, qv);
        }
        next
    }
}

#[derive(Debug, Default)]
struct StepAccumulator {
    residual: f64,
    martingale: f64,
    h_norm_sq: Option<f64>,
    qv_rate: Option<f64>,
    iterations: usize,
    retries: usize,
}

impl StepAccumulator {
    fn push(&mut self, residual: f64, mart: f64, h2: f64, qv: f64) {
        self.residual += residual;
        self.martingale += mart;
        self.h_norm_sq.get_or_insert(h2);
        self.qv_rate.get_or_insert(qv);
    }
}

/// Per-trajectory RNG: key from the master seed, stream from the index.
pub(crate) fn trajectory_rngs(seed: u64, index: usize) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut main = ChaCha8Rng::seed_from_u64(seed);
    main.set_stream(2 * index as u64);
    let mut bridge = ChaCha8Rng::seed_from_u64(seed);
    bridge.set_stream(2 * index as u64 + 1);
    (main, bridge)
}

fn crossing(t0: f64, h: f64, a: f64, b: f64, level: f64) -> f64 {
    if a <= b {
        return t0 + h;
    }
    t0 + h * ((a - level) / (a - b)).clamp(0.0, 1.0)
}

/// Integrate one trajectory until `‖X‖_H ≤ eps_ext` or `T_max`.
pub fn run_trajectory(engine: &Engine, index: usize) -> Trajectory {
    let cfg = engine.config();
    let lam = cfg.op.eigenvalues();
    let grid = engine.grid();
    let r = cfg.graph.r();
    let (mut rng, mut bridge) = trajectory_rngs(cfg.seed, index);
    let mut work = engine.work();
    let times = cfg.checkpoint_times();
    let n_steps = cfg.n_steps();
    let eps = cfg.eps_ext;
    let eps_fine = 0.1 * eps;
    let wdim = engine.noise().wiener_dim();

    let norms = |x: &[f64], work: &mut Work| -> (f64, f64, f64, f64) {
        grid.to_physical_into(x, &mut work.nodes, &mut work.ws);
        let h2 = h_norm_sq_coeffs(lam, x);
        let l2: f64 = x.iter().map(|a| a * a).sum();
        let lp = grid.lp_power_values(&work.nodes, 1.0 + r);
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for v in &work.nodes {
            lo = lo.min(*v);
            hi = hi.max(v.abs());
        }
        let pos = if hi > 0.0 { lo / hi } else { 0.0 };
        (h2, l2, lp, pos)
    };

    let mut x = cfg.x0.clone();
    let (h2, l2, lp, pos0) = norms(&x, &mut work);
    let mut curve = Vec::with_capacity(CHECKPOINTS);
    curve.push(CurvePoint {
        t: 0.0,
        h_sq: h2,
        l2_sq: l2,
        lp_pow: lp,
    });
    let mut positivity_min = engine.track_positivity.then_some(pos0);
    let mut next_cp = 1;
    let mut prev_h = h2.sqrt();
    let mut hitting_time = None;
    let mut hitting_time_fine = None;
    let mut failure = None;
    let mut records = Vec::new();
    let mut steps = 0;
    let mut retries = 0;
    let mut max_iter = 0;
    let mut dw = vec![0.0; wdim];

    for n in 0..n_steps {
        let t0 = n as f64 * cfg.h;
        let h = cfg.h.min(cfg.t_max - t0);
        let sq = h.sqrt();
        for w in dw.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *w = sq * z;
        }
        let mut acc = StepAccumulator::default();
        match engine.advance(&x, h, &dw, &mut work, &mut bridge, 0, &mut acc) {
            Ok(next) => x = next,
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        }
        steps += 1;
        retries += acc.retries;
        max_iter = max_iter.max(acc.iterations);
        let t1 = t0 + h;
        let (h2, l2, lp, pos) = norms(&x, &mut work);
        let cur = h2.sqrt();
        if !cur.is_finite() {
            failure = Some(format!("non-finite state at t = {t1}"));
            break;
        }
        if let Some(p) = positivity_min.as_mut() {
            *p = p.min(pos);
        }
        if cfg.diagnostics && hitting_time.is_none() {
            records.push(StepRecord {
                t: t1,
                ito_residual: acc.residual,
                martingale_increment: acc.martingale,
                h_norm_sq: acc.h_norm_sq.unwrap_or(0.0),
                qv_rate: acc.qv_rate.unwrap_or(0.0),
            });
        }
        if hitting_time.is_none() && cur <= eps {
            hitting_time = Some(crossing(t0, h, prev_h, cur, eps));
        }
        if hitting_time_fine.is_none() && cur <= eps_fine {
            hitting_time_fine = Some(crossing(t0, h, prev_h, cur, eps_fine));
        }
        while next_cp < CHECKPOINTS && times[next_cp] <= t1 + 1e-9 * cfg.h {
            curve.push(if hitting_time.is_some() {
                CurvePoint {
                    t: times[next_cp],
                    h_sq: 0.0,
                    l2_sq: 0.0,
                    lp_pow: 0.0,
                }
            } else {
                CurvePoint {
                    t: times[next_cp],
                    h_sq: h2,
                    l2_sq: l2,
                    lp_pow: lp,
                }
            });
            next_cp += 1;
        }
        prev_h = cur;
        if hitting_time_fine.is_some() {
            break;
        }
    }
    let status = if failure.is_some() {
        TrajectoryStatus::Failed
    } else if hitting_time.is_some() {
        TrajectoryStatus::Extinct
    } else {
        TrajectoryStatus::Censored
    };
    // absorbed at zero for the rest of the horizon
    let last = *curve.last().expect("initial point");
    while curve.len() < CHECKPOINTS {
        let t = times[curve.len()];
        curve.push(if hitting_time.is_some() || failure.is_some() {
            CurvePoint {
                t,
                h_sq: 0.0,
                l2_sq: 0.0,
                lp_pow: 0.0,
            }
        } else {
            CurvePoint { t, ..last }
        });
    }
    Trajectory {
        index,
        status,
        hitting_time,
        hitting_time_fine,
        failure,
        curve,
        steps,
        retries,
        max_solver_iterations: max_iter,
        positivity_min,
        records,
    }
}
