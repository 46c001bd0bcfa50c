//! Decay functions `F(t, r)`, decay times, iterated-contraction bounds and
//! measured decay of the normalized transfer operator and its dual.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{circle_dist, CircleFunction, GridFunction};
use crate::kernel::telescoping_gap;
use crate::maps::{ContractionFn, ContractionForm, MapModel};
use crate::moduli::{holder_constant, ModulusSpec};
use crate::rpf::{RpfData, TransferOperator};
use crate::transport::{dual_pushforward, wasserstein, DiscreteMeasure};

/// Values below this are treated as numerical floor.
pub const FLOOR: f64 = 1e-13;
/// Leading steps excluded from automatic fit windows.
pub const TRANSIENT_STEPS: usize = 5;
const BOOTSTRAP_RESAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecayForm {
    /// `F(t, r) = C (1 − δ)^t r`.
    Exponential { c: f64, delta: f64 },
    /// `F(t, r) = B r / (t r^α + b)^{1/α}`.
    Polynomial { big_b: f64, b: f64, alpha: f64 },
}

/// Which family to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayFamily {
    Exponential,
    Polynomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayModel {
    #[serde(flatten)]
    pub form: DecayForm,
    /// Steps used by the fit.
    pub fit_range: Option<(usize, usize)>,
    /// RMS residual of the fit in log coordinates.
    pub fit_residual: f64,
    /// Fitted slope (log value against `t`, or against `log t`).
    pub slope: Option<f64>,
    /// Bootstrap 95% half-width of the slope.
    pub slope_half_width: Option<f64>,
}

impl DecayModel {
    pub fn exponential(c: f64, delta: f64) -> Result<Self> {
        Self::from_form(DecayForm::Exponential { c, delta })
    }

    pub fn polynomial(big_b: f64, b: f64, alpha: f64) -> Result<Self> {
        Self::from_form(DecayForm::Polynomial { big_b, b, alpha })
    }

    fn from_form(form: DecayForm) -> Result<Self> {
        let m = Self {
            form,
            fit_range: None,
            fit_residual: 0.0,
            slope: None,
            slope_half_width: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match self.form {
            DecayForm::Exponential { c, delta } => {
                if !(c >= 1.0 && c.is_finite()) || !(delta > 0.0 && delta < 1.0) {
                    return Err(Error::InvalidModel(format!(
                        "exponential model needs C >= 1 and delta in (0,1), got {c}, {delta}"
                    )));
                }
            }
            DecayForm::Polynomial { big_b, b, alpha } => {
                if !(big_b >= 1.0 && big_b.is_finite())
                    || !(b > 0.0 && b <= 1.0)
                    || !(alpha > 0.0 && alpha.is_finite())
                {
                    return Err(Error::InvalidModel(format!(
                        "polynomial model needs B >= 1, b in (0,1], alpha > 0, got {big_b}, {b}, {alpha}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `F(t, r)`.
    pub fn eval(&self, t: f64, r: f64) -> f64 {
        match self.form {
            DecayForm::Exponential { c, delta } => c * (1.0 - delta).powf(t) * r,
            DecayForm::Polynomial { big_b, b, alpha } => {
                if r <= 0.0 {
                    0.0
                } else {
                    big_b * r / (t * r.powf(alpha) + b).powf(1.0 / alpha)
                }
            }
        }
    }

    /// `τ_θ(r) = min{t : F(t, r) ≤ θ r}`.
    pub fn decay_time(&self, theta: f64, r: f64) -> Result<usize> {
        if !(theta > 0.0 && theta < 1.0) || !(r > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "decay time needs theta in (0,1) and r > 0, got {theta}, {r}"
            )));
        }
        let guess = match self.form {
            DecayForm::Exponential { c, delta } => ((theta / c).ln() / (1.0 - delta).ln()).ceil(),
            DecayForm::Polynomial { big_b, b, alpha } => {
                (((big_b / theta).powf(alpha) - b) / r.powf(alpha)).ceil()
            }
        };
        let mut t = guess.max(0.0) as usize;
        let ok = |t: usize| self.eval(t as f64, r) <= theta * r;
        while !ok(t) {
            t += 1;
        }
        while t > 0 && ok(t - 1) {
            t -= 1;
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: usize,
    pub value: f64,
    /// Initial scale of the measured quantity.
    pub r: f64,
}

/// A measured decay profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayTrace {
    pub quantity: String,
    pub rows: Vec<TraceRow>,
}

impl DecayTrace {
    pub fn new(quantity: impl Into<String>, rows: Vec<TraceRow>) -> Result<Self> {
        if rows.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::InvalidArgument("trace steps must increase".into()));
        }
        if rows.iter().any(|r| !(r.value >= 0.0)) {
            return Err(Error::InvalidArgument(
                "trace values must be nonnegative".into(),
            ));
        }
        Ok(Self {
            quantity: quantity.into(),
            rows,
        })
    }

    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.value).collect()
    }

    pub fn value_at(&self, t: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.t == t).map(|r| r.value)
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "t,value")?;
        for r in &self.rows {
            writeln!(out, "{},{:e}", r.t, r.value)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(f)
    }
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, intercept, rms)
}

fn bootstrap_half_width(xs: &[f64], ys: &[f64]) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    let n = xs.len();
    let mut slopes: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .filter_map(|_| {
            let (mut bx, mut by) = (Vec::with_capacity(n), Vec::with_capacity(n));
            for _ in 0..n {
                let i = rng.gen_range(0..n);
                bx.push(xs[i]);
                by.push(ys[i]);
            }
            let (s, _, _) = least_squares(&bx, &by);
            s.is_finite().then_some(s)
        })
        .collect();
    if slopes.len() < 2 {
        return f64::NAN;
    }
    slopes.sort_by(f64::total_cmp);
    let at = |q: f64| slopes[((slopes.len() - 1) as f64 * q).round() as usize];
    0.5 * (at(0.975) - at(0.025))
}

/// Clips the window `[lo, hi]` just before the first value under [`FLOOR`].
/// Returns `None` when the trace is already floor-limited at `lo`.
pub fn clip_at_floor(trace: &DecayTrace, lo: usize, hi: usize) -> Option<(usize, usize)> {
    let mut end = None;
    for r in trace.rows.iter().filter(|r| r.t >= lo && r.t <= hi) {
        if r.value < FLOOR {
            break;
        }
        end = Some(r.t);
    }
    end.map(|e| (lo, e))
}

/// Rows entering a fit: the explicit window (which must stay above the
/// floor), or everything after the transient up to the first floor value.
fn fit_rows(trace: &DecayTrace, window: Option<(usize, usize)>) -> Result<Vec<TraceRow>> {
    let rows: Vec<TraceRow> = match window {
        Some((lo, hi)) => {
            let rows: Vec<TraceRow> = trace
                .rows
                .iter()
                .copied()
                .filter(|r| r.t >= lo && r.t <= hi)
                .collect();
            if let Some(r) = rows.iter().find(|r| r.value < FLOOR) {
                return Err(Error::Fit(format!(
                    "value {:e} at t = {} is below the numerical floor",
                    r.value, r.t
                )));
            }
            rows
        }
        None => {
            let t0 = trace.rows.first().map_or(0, |r| r.t);
            trace
                .rows
                .iter()
                .copied()
                .filter(|r| r.t >= t0 + TRANSIENT_STEPS)
                .take_while(|r| r.value >= FLOOR)
                .collect()
        }
    };
    if rows.len() < 8 {
        return Err(Error::Fit(format!(
            "{} usable rows, need at least 8",
            rows.len()
        )));
    }
    Ok(rows)
}

/// Least-squares fit of a decay family in log coordinates.
pub fn fit_decay(
    trace: &DecayTrace,
    family: DecayFamily,
    window: Option<(usize, usize)>,
) -> Result<DecayModel> {
    let rows = fit_rows(trace, window)?;
    let r = rows[0].r;
    let scale = if r > 0.0 { r } else { 1.0 };
    let ys: Vec<f64> = rows.iter().map(|row| row.value.ln()).collect();
    let fit_range = Some((rows[0].t, rows[rows.len() - 1].t));
    match family {
        DecayFamily::Exponential => {
            let xs: Vec<f64> = rows.iter().map(|row| row.t as f64).collect();
            let (slope, intercept, rms) = least_squares(&xs, &ys);
            if !(slope < 0.0) {
                return Err(Error::Fit(format!("trace does not decay (slope {slope})")));
            }
            let delta = -slope.exp_m1();
            let c = (intercept.exp() / scale).max(1.0);
            Ok(DecayModel {
                form: DecayForm::Exponential { c, delta },
                fit_range,
                fit_residual: rms,
                slope: Some(slope),
                slope_half_width: Some(bootstrap_half_width(&xs, &ys)),
            })
        }
        DecayFamily::Polynomial => {
            if rows[0].t == 0 {
                return Err(Error::Fit("polynomial fits need t >= 1".into()));
            }
            let xs: Vec<f64> = rows.iter().map(|row| (row.t as f64).ln()).collect();
            let (slope, intercept, rms) = least_squares(&xs, &ys);
            if !(slope < 0.0) {
                return Err(Error::Fit(format!("trace does not decay (slope {slope})")));
            }
            // F(t, r) ~ B t^{-1/α} for large t
            let alpha = -1.0 / slope;
            let big_b = intercept.exp().max(1.0);
            Ok(DecayModel {
                form: DecayForm::Polynomial {
                    big_b,
                    b: 1.0,
                    alpha,
                },
                fit_range,
                fit_residual: rms,
                slope: Some(slope),
                slope_half_width: Some(bootstrap_half_width(&xs, &ys)),
            })
        }
    }
}

/// Per-radius outcome of [`contraction_bound_check`].
#[derive(Debug, Clone, Serialize)]
pub struct ContractionBoundRow {
    pub r: f64,
    /// Largest `cⁿ(r) / bound(n, r)` over `n ≤ n_max`.
    pub max_ratio: f64,
    pub final_iterate: f64,
    pub final_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionBoundReport {
    /// Telescoping constant used in the bound (minimum over all visited
    /// iterates).
    pub a: f64,
    /// The same minimum over `r_grid` only.
    pub a_grid: f64,
    pub rows: Vec<ContractionBoundRow>,
    pub passed: bool,
}

/// Closed-form majorant of `cⁿ(r)` for power and log contraction forms.
pub fn iterate_bound(form: ContractionForm, a: f64, n: usize, r: f64) -> Result<f64> {
    let n = n as f64;
    match form {
        ContractionForm::Power { q, .. } => Ok((a * n + r.powf(-q)).powf(-1.0 / q)),
        ContractionForm::Log { q } => {
            Ok((-(a * n + (1.0 / r).ln().powf(q + 1.0)).powf(1.0 / (q + 1.0))).exp())
        }
        ContractionForm::Linear { .. } => Err(Error::InvalidArgument(
            "iterate bounds apply to power and log contraction forms".into(),
        )),
    }
}

/// Verifies the telescoping inequality and the resulting bound on `cⁿ(r)`
/// by direct iteration.
pub fn contraction_bound_check(
    c: &ContractionFn,
    form: ContractionForm,
    r_grid: &[f64],
    n_max: usize,
) -> Result<ContractionBoundReport> {
    if matches!(form, ContractionForm::Linear { .. }) {
        return Err(Error::InvalidArgument(
            "contraction bound check needs a power or log form".into(),
        ));
    }
    if r_grid.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
        return Err(Error::InvalidArgument("r_grid must lie in (0, 1]".into()));
    }
    let orbits: Vec<Vec<f64>> = r_grid
        .iter()
        .map(|&r| {
            let mut orbit = Vec::with_capacity(n_max + 1);
            let mut s = r;
            orbit.push(s);
            for _ in 0..n_max {
                s = c.eval(s);
                orbit.push(s);
            }
            orbit
        })
        .collect();
    let gap = |s: f64| telescoping_gap(form, s, c.eval(s));
    let a_grid = r_grid.iter().map(|&r| gap(r)).fold(f64::INFINITY, f64::min);
    let a = orbits
        .iter()
        .flat_map(|o| o[..o.len() - 1].iter())
        .map(|&s| gap(s))
        .fold(a_grid, f64::min);
    if !(a > 0.0) {
        return Err(Error::ContractionBound(a));
    }
    let mut rows = Vec::with_capacity(r_grid.len());
    for (&r, orbit) in r_grid.iter().zip(&orbits) {
        let mut max_ratio = 0.0_f64;
        for (n, &s) in orbit.iter().enumerate() {
            max_ratio = max_ratio.max(s / iterate_bound(form, a, n, r)?);
        }
        rows.push(ContractionBoundRow {
            r,
            max_ratio,
            final_iterate: orbit[n_max],
            final_bound: iterate_bound(form, a, n_max, r)?,
        });
    }
    let passed = rows.iter().all(|row| row.max_ratio <= 1.0 + 1e-12);
    Ok(ContractionBoundReport {
        a,
        a_grid,
        rows,
        passed,
    })
}

/// `‖L̃^t (f − μ(f))‖∞` for `t = 0..=t_max`, with the `ω`-Hölder constant of
/// each iterate when `holder` is given (reported as a second trace).
pub fn measure_operator_decay(
    map: &MapModel,
    rpf: &RpfData,
    f: &GridFunction,
    t_max: usize,
    holder: Option<&ModulusSpec>,
) -> Result<(DecayTrace, Option<DecayTrace>)> {
    let op = TransferOperator::new(map, &rpf.normalized, f.len())?;
    let mean = rpf.mu.integrate(f);
    let mut g = f.map(|v| v - mean);
    let r = g.sup_norm();
    let mut rows = Vec::with_capacity(t_max + 1);
    let mut hrows = Vec::new();
    for t in 0..=t_max {
        if t > 0 {
            g = op.apply(&g)?;
        }
        rows.push(TraceRow {
            t,
            value: g.sup_norm(),
            r,
        });
        if let Some(spec) = holder {
            hrows.push(TraceRow {
                t,
                value: holder_constant(&g, spec),
                r,
            });
        }
    }
    let hol = match holder {
        Some(_) => Some(DecayTrace::new("holder_norm", hrows)?),
        None => None,
    };
    Ok((DecayTrace::new("sup_norm", rows)?, hol))
}

/// `W_ω(L*^t δ_x, L*^t δ_y)` for `t = 0..=t_max`.
pub fn measure_wasserstein_decay(
    map: &MapModel,
    normalized: &dyn CircleFunction,
    x: f64,
    y: f64,
    spec: &ModulusSpec,
    t_max: usize,
    merge_resolution: f64,
) -> Result<DecayTrace> {
    let mut mu = DiscreteMeasure::dirac(x);
    let mut nu = DiscreteMeasure::dirac(y);
    let r = circle_dist(x, y);
    let mut rows = Vec::with_capacity(t_max + 1);
    rows.push(TraceRow {
        t: 0,
        value: spec.eval(r),
        r,
    });
    for t in 1..=t_max {
        mu = dual_pushforward(map, normalized, &mu, merge_resolution)?.normalized();
        nu = dual_pushforward(map, normalized, &nu, merge_resolution)?.normalized();
        let (w, _) = wasserstein(&mu, &nu, spec)?;
        rows.push(TraceRow { t, value: w, r });
    }
    DecayTrace::new("wasserstein", rows)
}

/// `|∫ L̃^t (f − μ(f)) · g dμ|` for `t = 0..=t_max`.
pub fn measure_correlation_decay(
    map: &MapModel,
    rpf: &RpfData,
    f: &GridFunction,
    g: &GridFunction,
    t_max: usize,
) -> Result<DecayTrace> {
    let op = TransferOperator::new(map, &rpf.normalized, f.len())?;
    let mean = rpf.mu.integrate(f);
    let mut h = f.map(|v| v - mean);
    let r = h.sup_norm();
    let mut rows = Vec::with_capacity(t_max + 1);
    for t in 0..=t_max {
        if t > 0 {
            h = op.apply(&h)?;
        }
        let value = rpf
            .mu
            .integrate(&|x: f64| h.interpolate(x) * g.interpolate(x))
            .abs();
        rows.push(TraceRow { t, value, r });
    }
    DecayTrace::new("correlation", rows)
}
