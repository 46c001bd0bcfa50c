//! Generalized Hölder moduli of continuity
//! `ω(r) = r^α / (log(r0 / r))^β` and Hölder constants of grid functions.
//!
//! The calibration constant `r0` is the smallest power of `e` for which the
//! formula is increasing and concave on `[0, 1]` (checked on a 10⁴-point
//! grid). Past `diam_clip` the modulus continues linearly with matching
//! slope; only the germ at zero influences the induced norms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;

/// Number of grid intervals used when calibrating `r0`.
pub const CALIBRATION_GRID: usize = 10_000;

/// Largest exponent `m` tried for `r0 = e^m`.
const MAX_LOG_R0: u32 = 64;

/// Second differences may exceed zero by this many ulps of the values.
const CONCAVITY_ULPS: f64 = 8.0;

fn default_clip() -> f64 {
    1.0
}

/// A modulus `ω_{α + β log}` with its calibration constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulusSpec {
    pub alpha: f64,
    pub beta: f64,
    pub r0: f64,
    #[serde(default = "default_clip", skip_serializing)]
    pub diam_clip: f64,
}

fn check_admissible(alpha: f64, beta: f64) -> Result<()> {
    let ok = alpha.is_finite()
        && beta.is_finite()
        && (0.0..=1.0).contains(&alpha)
        && (alpha > 0.0 || beta > 0.0);
    if ok {
        Ok(())
    } else {
        Err(Error::InadmissibleModulus { alpha, beta })
    }
}

/// Picks the smallest `r0 = e^m`, `m ≥ 1`, making the modulus a valid
/// (increasing, concave, and for `α > 0` half-contracting) modulus.
pub fn choose_r0(alpha: f64, beta: f64) -> Result<ModulusSpec> {
    check_admissible(alpha, beta)?;
    for m in 1..=MAX_LOG_R0 {
        let spec = ModulusSpec {
            alpha,
            beta,
            r0: (m as f64).exp(),
            diam_clip: 1.0,
        };
        if beta == 0.0 || spec.is_valid_on_grid(CALIBRATION_GRID) {
            return Ok(spec);
        }
    }
    Err(Error::NoCalibration { alpha, beta })
}

impl ModulusSpec {
    /// Same as [`choose_r0`].
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        choose_r0(alpha, beta)
    }

    /// Builds a spec with an explicit `r0`, checking it on the calibration
    /// grid.
    pub fn with_r0(alpha: f64, beta: f64, r0: f64) -> Result<Self> {
        check_admissible(alpha, beta)?;
        if !(r0 > 1.0) || !r0.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "r0 must exceed 1, got {r0}"
            )));
        }
        let spec = Self {
            alpha,
            beta,
            r0,
            diam_clip: 1.0,
        };
        if beta != 0.0 && !spec.is_valid_on_grid(CALIBRATION_GRID) {
            return Err(Error::NoCalibration { alpha, beta });
        }
        Ok(spec)
    }

    /// Lipschitz modulus `ω(r) = r`.
    pub fn lipschitz() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.0,
            r0: std::f64::consts::E,
            diam_clip: 1.0,
        }
    }

    /// Re-checks a deserialized spec. A missing or inconsistent `r0` is a
    /// configuration error.
    pub fn validate(&self) -> Result<()> {
        Self::with_r0(self.alpha, self.beta, self.r0).map(|_| ())
    }

    #[inline]
    fn raw(&self, r: f64) -> f64 {
        let p = if self.alpha == 0.0 {
            1.0
        } else {
            r.powf(self.alpha)
        };
        if self.beta == 0.0 {
            p
        } else {
            p / (self.r0 / r).ln().powf(self.beta)
        }
    }

    #[inline]
    fn raw_slope(&self, r: f64) -> f64 {
        let l = (self.r0 / r).ln();
        self.raw(r) * (self.alpha + self.beta / l) / r
    }

    /// Evaluates `ω(r)`; zero at zero, linear past `diam_clip`.
    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            0.0
        } else if r <= self.diam_clip {
            self.raw(r)
        } else {
            self.raw(self.diam_clip) + self.raw_slope(self.diam_clip) * (r - self.diam_clip)
        }
    }

    /// `θ` with `ω(r/2) ≤ θ ω(r)` on `(0, 1]`.
    pub fn half_ratio(&self) -> Result<f64> {
        if self.alpha <= 0.0 {
            return Err(Error::HalfRatioUndefined);
        }
        let base = 2f64.powf(-self.alpha);
        if self.beta >= 0.0 {
            Ok(base)
        } else {
            Ok(base * (1.0 + std::f64::consts::LN_2 / self.r0.ln()).powf(-self.beta))
        }
    }

    fn is_valid_on_grid(&self, n: usize) -> bool {
        let h = 1.0 / n as f64;
        let w: Vec<f64> = (0..=n).map(|i| self.eval(i as f64 * h)).collect();
        if w.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let increasing = w.windows(2).all(|p| p[1] > p[0]);
        let concave = w
            .windows(3)
            .all(|p| p[0] + p[2] - 2.0 * p[1] <= CONCAVITY_ULPS * f64::EPSILON * p[1]);
        let contracting = self.alpha == 0.0 || self.half_ratio().is_ok_and(|t| t < 1.0);
        increasing && concave && contracting
    }
}

/// Largest ratio `|f(x) - f(y)| / ω(d(x, y))` over all pairs of grid nodes.
///
/// This is exact for the node values and a lower bound for the Hölder
/// constant of the continuum function the grid samples.
pub fn holder_constant(f: &GridFunction, spec: &ModulusSpec) -> f64 {
    let n = f.len();
    let v = f.values();
    // weights indexed by node separation
    let inv_w: Vec<f64> = (0..=n / 2)
        .map(|m| {
            if m == 0 {
                0.0
            } else {
                1.0 / spec.eval(m as f64 / n as f64)
            }
        })
        .collect();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut best = 0.0_f64;
            for j in (i + 1)..n {
                let m = (j - i).min(n - (j - i));
                let r = (v[i] - v[j]).abs() * inv_w[m];
                if r > best {
                    best = r;
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}
