//! Leading eigendata of the transfer operator `L_A f(x) = (1/k) Σ_j
//! e^{A(x^j)} f(x^j)` on a uniform grid, the normalized potential, and the
//! invariant measure of the dual operator.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{CircleFunction, GridFunction, Potential, DEFAULT_GRID};
use crate::maps::MapModel;
use crate::transport::{dual_pushforward, DiscreteMeasure};

/// Start point of the dual fixed-point iteration.
pub const FIXED_POINT_START: f64 = 0.37;

/// `L_A` restricted to grid nodes: branch points and weights are computed
/// once, exactly, and `f` is interpolated at the branch points.
#[derive(Debug, Clone)]
pub struct TransferOperator {
    k: usize,
    n: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl TransferOperator {
    pub fn new(map: &MapModel, potential: &dyn CircleFunction, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("grid size {n} too small")));
        }
        let k = map.k;
        let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let b = map.inverse_branches(i as f64 / n as f64);
                let w = b
                    .iter()
                    .map(|&p| potential.eval(p).exp() / k as f64)
                    .collect();
                (b, w)
            })
            .collect();
        let mut points = Vec::with_capacity(n * k);
        let mut weights = Vec::with_capacity(n * k);
        for (b, w) in rows {
            points.extend(b);
            weights.extend(w);
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "potential weight {w} is not finite"
            )));
        }
        Ok(Self {
            k,
            n,
            points,
            weights,
        })
    }

    pub fn grid_size(&self) -> usize {
        self.n
    }

    /// `L_A f` at the grid nodes, with `f` evaluated at the branch points.
    pub fn apply_fn(&self, f: &(impl CircleFunction + ?Sized)) -> GridFunction {
        let k = self.k;
        let values: Vec<f64> = (0..self.n)
            .into_par_iter()
            .map(|i| {
                let mut s = 0.0;
                for j in i * k..(i + 1) * k {
                    s += self.weights[j] * f.eval(self.points[j]);
                }
                s
            })
            .collect();
        GridFunction::new(values).expect("finite transfer values")
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        if f.len() != self.n {
            return Err(Error::GridMismatch(self.n, f.len()));
        }
        Ok(self.apply_fn(f))
    }

    /// `L_A^t f`.
    pub fn iterate(&self, f: &GridFunction, t: usize) -> Result<GridFunction> {
        let mut g = f.clone();
        for _ in 0..t {
            g = self.apply(&g)?;
        }
        Ok(g)
    }
}

/// One application of `L_A` to a grid function.
pub fn transfer_apply(
    map: &MapModel,
    potential: &dyn CircleFunction,
    f: &GridFunction,
) -> Result<GridFunction> {
    TransferOperator::new(map, potential, f.len())?.apply(f)
}

/// Result of the power iteration.
#[derive(Debug, Clone, Serialize)]
pub struct Eigenpair {
    pub rho: f64,
    #[serde(skip)]
    pub h: GridFunction,
    /// `‖L_A h − ρ h‖∞ / ρ`.
    pub residual: f64,
    pub iterations: usize,
}

/// Iterates `f ← L_A f / ‖L_A f‖∞` from `f = 1` until the node-wise
/// relative change drops below `tol`. The relative criterion keeps the
/// eigen-equation accurate where `h` is small.
pub fn power_iteration(op: &TransferOperator, tol: f64, max_iter: usize) -> Result<Eigenpair> {
    let mut f = GridFunction::constant(op.n, 1.0);
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        let g = op.apply(&f)?;
        let s = g.sup_norm();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::NotConverged {
                iterations,
                residual: change,
            });
        }
        let g = g.map(|v| v / s);
        change = g
            .values()
            .iter()
            .zip(f.values())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs() / a.abs()));
        f = g;
        iterations += 1;
        if change < tol {
            break;
        }
    }
    let lh = op.apply(&f)?;
    let rho = lh.sup_norm() / f.sup_norm();
    let residual = lh.zip_with(&f, |a, b| a - rho * b)?.sup_norm() / rho;
    if change >= tol {
        return Err(Error::NotConverged {
            iterations,
            residual: change,
        });
    }
    if f.min() <= 0.0 {
        return Err(Error::InvalidArgument(
            "eigenfunction is not positive".into(),
        ));
    }
    let top = f.max();
    Ok(Eigenpair {
        rho,
        h: f.map(|v| v / top),
        residual,
        iterations,
    })
}

/// `Ã = A + log h − log h∘T − log ρ`, evaluated pointwise with `h`
/// interpolated from the grid.
#[derive(Clone)]
pub struct NormalizedPotential {
    map: MapModel,
    base: Potential,
    h: GridFunction,
    log_rho: f64,
}

impl std::fmt::Debug for NormalizedPotential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NormalizedPotential")
            .field("log_rho", &self.log_rho)
            .field("grid", &self.h.len())
            .finish()
    }
}

impl CircleFunction for NormalizedPotential {
    fn eval(&self, z: f64) -> f64 {
        let tz = self.map.forward(z);
        // log of the interpolant, so that e^Ã reproduces L_A h / ρ h exactly
        self.base.eval(z) + (self.h.interpolate(z) / self.h.interpolate(tz)).ln() - self.log_rho
    }
}

impl NormalizedPotential {
    /// Samples `Ã` at the nodes of an `n`-grid.
    pub fn to_grid(&self, n: usize) -> GridFunction {
        GridFunction::from_fn(n, |x| self.eval(x))
    }
}

pub fn normalize_potential(
    map: &MapModel,
    potential: Potential,
    rho: f64,
    h: &GridFunction,
) -> Result<NormalizedPotential> {
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rho must be positive, got {rho}"
        )));
    }
    if h.min() <= 0.0 {
        return Err(Error::InvalidArgument("h must be positive".into()));
    }
    Ok(NormalizedPotential {
        map: map.clone(),
        base: potential,
        h: h.clone(),
        log_rho: rho.ln(),
    })
}

/// `‖L_A 1 − 1‖∞` on an `n`-grid.
pub fn normalization_residual(
    map: &MapModel,
    potential: &dyn CircleFunction,
    n: usize,
) -> Result<f64> {
    let op = TransferOperator::new(map, potential, n)?;
    let one = op.apply_fn(&|_: f64| 1.0);
    Ok(one
        .values()
        .iter()
        .fold(0.0_f64, |m, v| m.max((v - 1.0).abs())))
}

/// Fixed point of the (deposited, renormalized) dual operator.
#[derive(Debug, Clone, Serialize)]
pub struct FixedPoint {
    #[serde(skip)]
    pub measure: DiscreteMeasure,
    pub iterations: usize,
    /// Total variation between successive iterates.
    pub trace: Vec<f64>,
}

/// Iterates `μ ← L*_Ã μ` from `δ_start` until successive iterates differ
/// by less than `tol` in total variation. Total variation bounds every
/// `W_ω` up to the factor `ω(½)`.
pub fn dual_fixed_point(
    map: &MapModel,
    normalized: &dyn CircleFunction,
    merge_resolution: f64,
    tol: f64,
    max_iter: usize,
    start: f64,
) -> Result<FixedPoint> {
    if merge_resolution <= 0.0 {
        return Err(Error::InvalidArgument(
            "the fixed-point iteration needs a positive merge_resolution".into(),
        ));
    }
    let mut mu = DiscreteMeasure::dirac(start);
    let mut trace = Vec::new();
    for it in 1..=max_iter {
        let next = dual_pushforward(map, normalized, &mu, merge_resolution)?.normalized();
        let diff = next.l1_distance(&mu);
        trace.push(diff);
        mu = next;
        if diff < tol {
            return Ok(FixedPoint {
                measure: mu,
                iterations: it,
                trace,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: trace.last().copied().unwrap_or(f64::INFINITY),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceRow {
    pub lhs: f64,
    pub rhs: f64,
    pub deviation: f64,
    pub allowed: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub rows: Vec<InvarianceRow>,
    pub passed: bool,
}

/// Checks `|μ(f∘T) − μ(f)| ≤ 10 (tol + merge_resolution · Lip(f))`.
pub fn invariance_check(
    map: &MapModel,
    mu: &DiscreteMeasure,
    probes: &[GridFunction],
    tol: f64,
    merge_resolution: f64,
) -> InvarianceReport {
    let rows: Vec<InvarianceRow> = probes
        .iter()
        .map(|f| {
            let n = f.len() as f64;
            let v = f.values();
            let lip = (0..v.len())
                .map(|i| (v[(i + 1) % v.len()] - v[i]).abs() * n)
                .fold(0.0, f64::max);
            let lhs = mu.integrate(&|x: f64| f.interpolate(map.forward(x)));
            let rhs = mu.integrate(f);
            let deviation = (lhs - rhs).abs();
            let allowed = 10.0 * (tol + merge_resolution * lip);
            InvarianceRow {
                lhs,
                rhs,
                deviation,
                allowed,
                ok: deviation <= allowed,
            }
        })
        .collect();
    let passed = rows.iter().all(|r| r.ok);
    InvarianceReport { rows, passed }
}

/// Numerical settings for [`compute_rpf`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RpfSettings {
    pub grid: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub merge_resolution: f64,
    pub fixed_point_tol: f64,
    pub fixed_point_max_iter: usize,
}

impl Default for RpfSettings {
    fn default() -> Self {
        Self {
            grid: DEFAULT_GRID,
            tol: 1e-12,
            max_iter: 20_000,
            merge_resolution: 1.0 / DEFAULT_GRID as f64,
            fixed_point_tol: 1e-10,
            fixed_point_max_iter: 20_000,
        }
    }
}

/// Eigenvalue, eigenfunction, normalized potential and the two measures.
#[derive(Debug, Clone)]
pub struct RpfData {
    pub rho: f64,
    pub h: GridFunction,
    pub residual: f64,
    pub iterations: usize,
    pub normalized: NormalizedPotential,
    /// `‖L_Ã 1 − 1‖∞` on the grid.
    pub normalization_residual: f64,
    /// `μ_A`, the fixed point of `L*_Ã`.
    pub mu: DiscreteMeasure,
    /// `ν_A ∝ h⁻¹ μ_A`.
    pub nu: DiscreteMeasure,
    pub fixed_point: FixedPoint,
}

pub fn compute_rpf(map: &MapModel, potential: Potential, s: &RpfSettings) -> Result<RpfData> {
    let op = TransferOperator::new(map, &*potential, s.grid)?;
    let pair = power_iteration(&op, s.tol, s.max_iter)?;
    let normalized = normalize_potential(map, Arc::clone(&potential), pair.rho, &pair.h)?;
    let normalization_residual = normalization_residual(map, &normalized, s.grid)?;
    let fixed_point = dual_fixed_point(
        map,
        &normalized,
        s.merge_resolution,
        s.fixed_point_tol,
        s.fixed_point_max_iter,
        FIXED_POINT_START,
    )?;
    let mu = fixed_point.measure.clone();
    let h = pair.h.clone();
    let nu = mu.reweighted(|x| 1.0 / h.interpolate(x))?.normalized();
    Ok(RpfData {
        rho: pair.rho,
        h: pair.h,
        residual: pair.residual,
        iterations: pair.iterations,
        normalized,
        normalization_residual,
        mu,
        nu,
        fixed_point,
    })
}
