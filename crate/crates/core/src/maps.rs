//! Circle maps with full branches: the intermittent family `T_q`, its
//! log-tangent variant, the `k`-fold map and table-driven custom kernels.
//!
//! Inverse branches are ordered so that branch 0 is the one through the
//! neutral fixed point when there is one. The neutral branch has no closed
//! form and is found by a safeguarded Newton/bisection solve.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{circle_dist, wrap};
use crate::kernel::natural_pairing;

/// Default expansion threshold defining the neutral neighbourhood.
pub const DEFAULT_NEUTRAL_LAMBDA: f64 = 1.05;

/// Iteration cap for the neutral-branch solve.
const ROOT_MAX_ITER: usize = 200;
/// Absolute bracket tolerance for the neutral-branch solve.
const ROOT_ABS_TOL: f64 = 1e-14;

/// Which member of the map zoo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapKind {
    /// `x ↦ (1 + (2x)^q) x` on `[0, ½]`, `2x - 1` on `[½, 1)`.
    Pm { q: f64 },
    /// `x ↦ (1 + (1 - log 2x)^{-q}) x` on `(0, ½]`, `2x - 1` on `[½, 1)`.
    PmLog { q: f64 },
    /// `x ↦ k x mod 1`.
    KFold { k: usize },
    /// Branches supplied as a table.
    Custom,
}

/// Shape of a contraction function, used to pick the matching decay bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum ContractionForm {
    /// `c(r) = (1 - D r^q) r + o(r^{1+q})`.
    Power { q: f64, d: f64 },
    /// `c(r) = (1 - (log 1/r)^{-q}) r + o(...)`.
    Log { q: f64 },
    /// `c(r) = r / λ`.
    Linear { lambda: f64 },
}

/// A continuous map `c` with `c(0) = 0` bounding paired branch distances.
#[derive(Clone)]
pub struct ContractionFn {
    pub form: ContractionForm,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for ContractionFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ContractionFn")
            .field("form", &self.form)
            .finish()
    }
}

impl ContractionFn {
    pub fn from_fn(form: ContractionForm, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            form,
            eval: Arc::new(f),
        }
    }

    pub fn linear(lambda: f64) -> Self {
        Self::from_fn(ContractionForm::Linear { lambda }, move |r| r / lambda)
    }

    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            0.0
        } else {
            (self.eval)(r)
        }
    }

    /// `cⁿ(r)`.
    pub fn iterate(&self, r: f64, n: usize) -> f64 {
        (0..n).fold(r, |s, _| self.eval(s))
    }
}

/// Branch table of a custom kernel: rows `(y, b_1(y), …, b_k(y))` with the
/// branch columns lifted to be non-decreasing in `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomBranches {
    ys: Vec<f64>,
    lifts: Vec<Vec<f64>>,
}

impl CustomBranches {
    /// Builds a table from rows. Branch columns may be given modulo 1; they
    /// are unwrapped into continuous non-decreasing lifts.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::InvalidArgument(
                "custom map needs at least 2 rows".into(),
            ));
        }
        let width = rows[0].len();
        if width < 3 {
            return Err(Error::InvalidArgument(
                "custom map rows need y and at least 2 branches".into(),
            ));
        }
        if rows
            .iter()
            .any(|r| r.len() != width || r.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::InvalidArgument(
                "ragged or non-finite custom map table".into(),
            ));
        }
        let ys: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        if ys[0] != 0.0 || (ys[ys.len() - 1] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(
                "custom map table must span y in [0, 1]".into(),
            ));
        }
        if ys.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "custom map y column must increase".into(),
            ));
        }
        let mut lifts = Vec::with_capacity(width - 1);
        for j in 1..width {
            let mut col = Vec::with_capacity(rows.len());
            let mut shift = 0.0;
            let mut prev = rows[0][j];
            col.push(prev);
            for r in &rows[1..] {
                let mut v = r[j] + shift;
                while v < prev - 0.5 {
                    v += 1.0;
                    shift += 1.0;
                }
                if v < prev {
                    return Err(Error::InvalidArgument(format!(
                        "branch {j} is not monotone in the custom map table"
                    )));
                }
                col.push(v);
                prev = v;
            }
            lifts.push(col);
        }
        Ok(Self { ys, lifts })
    }

    /// Reads a headerless or headed CSV of `(y, b_1, …, b_k)` rows.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse).collect();
            match parsed {
                Ok(row) => rows.push(row),
                // header line
                Err(_) if rows.is_empty() => continue,
                Err(e) => return Err(Error::InvalidArgument(format!("bad custom map row: {e}"))),
            }
        }
        Self::from_rows(&rows)
    }

    pub fn branch_count(&self) -> usize {
        self.lifts.len()
    }

    fn lift(&self, j: usize, y: f64) -> f64 {
        let ys = &self.ys;
        let col = &self.lifts[j];
        let i = match ys.binary_search_by(|v| v.total_cmp(&y)) {
            Ok(i) => return col[i],
            Err(i) => i.clamp(1, ys.len() - 1),
        };
        let t = (y - ys[i - 1]) / (ys[i] - ys[i - 1]);
        col[i - 1] + t * (col[i] - col[i - 1])
    }

    fn branch(&self, j: usize, y: f64) -> f64 {
        wrap(self.lift(j, y))
    }

    /// Inverts branch `j` at circle point `x`, if `x` lies in its image.
    fn invert(&self, j: usize, x: f64) -> Option<f64> {
        let col = &self.lifts[j];
        let (lo, hi) = (col[0], col[col.len() - 1]);
        if hi <= lo {
            return None;
        }
        let mut xl = x + (lo - x).ceil();
        if xl < lo {
            xl += 1.0;
        }
        if xl > hi {
            return None;
        }
        let i = col.partition_point(|&v| v < xl).clamp(1, col.len() - 1);
        let (a, b) = (col[i - 1], col[i]);
        let t = if b > a { (xl - a) / (b - a) } else { 0.0 };
        Some(self.ys[i - 1] + t * (self.ys[i] - self.ys[i - 1]))
    }

    fn slope_at(&self, j: usize, y: f64) -> f64 {
        let ys = &self.ys;
        let i = ys.partition_point(|&v| v <= y).clamp(1, ys.len() - 1);
        (self.lifts[j][i] - self.lifts[j][i - 1]) / (ys[i] - ys[i - 1])
    }
}

/// A `k`-to-1 circle map (or `1`-to-`k` kernel) with contraction metadata.
#[derive(Debug, Clone)]
pub struct MapModel {
    pub kind: MapKind,
    pub k: usize,
    /// Radius of the neutral neighbourhood `N` around 0.
    pub neutral_radius: f64,
    /// Contraction factor of the expanding paired branch.
    pub lambda: f64,
    /// Expansion threshold used to size `N`.
    pub neutral_lambda: f64,
    custom: Option<Arc<CustomBranches>>,
    custom_contraction: f64,
    wrap_perm: Vec<usize>,
}

impl MapModel {
    pub fn pm(q: f64) -> Result<Self> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "pm exponent must be positive, got {q}"
            )));
        }
        Ok(Self::build(MapKind::Pm { q }, 2, 2.0, None, 0.0))
    }

    pub fn pm_log(q: f64) -> Result<Self> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "pm_log exponent must be positive, got {q}"
            )));
        }
        Ok(Self::build(MapKind::PmLog { q }, 2, 2.0, None, 0.0))
    }

    pub fn k_fold(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidArgument(format!(
                "k_fold needs k >= 2, got {k}"
            )));
        }
        Ok(Self::build(MapKind::KFold { k }, k, k as f64, None, 0.0))
    }

    /// A table-driven kernel. `lambda` is the contraction factor of the
    /// strongest paired branch and `contraction_lambda` the uniform factor
    /// bounding every paired branch (`1` allows isometric branches).
    pub fn custom(branches: CustomBranches, lambda: f64, contraction_lambda: f64) -> Result<Self> {
        if !(lambda > 1.0) || !(contraction_lambda >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "custom map needs lambda > 1 and contraction_lambda >= 1, got {lambda}, {contraction_lambda}"
            )));
        }
        let k = branches.branch_count();
        if k > 8 {
            return Err(Error::InvalidArgument(format!(
                "custom maps support at most 8 branches, got {k}"
            )));
        }
        Ok(Self::build(
            MapKind::Custom,
            k,
            lambda,
            Some(Arc::new(branches)),
            contraction_lambda,
        ))
    }

    fn build(
        kind: MapKind,
        k: usize,
        lambda: f64,
        custom: Option<Arc<CustomBranches>>,
        custom_contraction: f64,
    ) -> Self {
        let mut m = Self {
            kind,
            k,
            neutral_radius: 0.0,
            lambda,
            neutral_lambda: DEFAULT_NEUTRAL_LAMBDA,
            custom,
            custom_contraction,
            wrap_perm: Vec::new(),
        };
        m.wrap_perm = m.compute_wrap_perm();
        m.neutral_radius = m.scan_neutral_radius();
        m
    }

    /// Re-sizes the neutral neighbourhood for another expansion threshold.
    pub fn with_neutral_lambda(mut self, neutral_lambda: f64) -> Result<Self> {
        if !(neutral_lambda > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "neutral_lambda must exceed 1, got {neutral_lambda}"
            )));
        }
        self.neutral_lambda = neutral_lambda;
        self.neutral_radius = self.scan_neutral_radius();
        Ok(self)
    }

    /// Evaluates `T(x)`.
    pub fn forward(&self, x: f64) -> f64 {
        let x = wrap(x);
        match self.kind {
            MapKind::Pm { q } => {
                if x <= 0.5 {
                    wrap((1.0 + (2.0 * x).powf(q)) * x)
                } else {
                    wrap(2.0 * x - 1.0)
                }
            }
            MapKind::PmLog { q } => {
                if x == 0.0 {
                    0.0
                } else if x <= 0.5 {
                    wrap((1.0 + (1.0 - (2.0 * x).ln()).powf(-q)) * x)
                } else {
                    wrap(2.0 * x - 1.0)
                }
            }
            MapKind::KFold { k } => wrap(k as f64 * x),
            MapKind::Custom => {
                let c = self.custom.as_ref().expect("custom table");
                for j in 0..c.branch_count() {
                    if let Some(y) = c.invert(j, x) {
                        return wrap(y);
                    }
                }
                // outside every branch image: nearest branch endpoint
                let mut best = (f64::INFINITY, 0.0);
                for j in 0..c.branch_count() {
                    for &y in &[0.0, 1.0] {
                        let d = circle_dist(c.branch(j, y), x);
                        if d < best.0 {
                            best = (d, y);
                        }
                    }
                }
                wrap(best.1)
            }
        }
    }

    /// `|T'(x)|`, one-sided from the right at branch junctions.
    pub fn derivative(&self, x: f64) -> f64 {
        let x = wrap(x);
        match self.kind {
            MapKind::Pm { q } => {
                if x < 0.5 {
                    1.0 + (q + 1.0) * (2.0 * x).powf(q)
                } else {
                    2.0
                }
            }
            MapKind::PmLog { q } => {
                if x == 0.0 {
                    1.0
                } else if x < 0.5 {
                    let l = 1.0 - (2.0 * x).ln();
                    1.0 + l.powf(-q) + q * l.powf(-q - 1.0)
                } else {
                    2.0
                }
            }
            MapKind::KFold { k } => k as f64,
            MapKind::Custom => {
                let c = self.custom.as_ref().expect("custom table");
                for j in 0..c.branch_count() {
                    if let Some(y) = c.invert(j, x) {
                        let s = c.slope_at(j, y);
                        return if s > 0.0 { 1.0 / s } else { f64::INFINITY };
                    }
                }
                1.0
            }
        }
    }

    /// Branch `j` (0-based) evaluated at `y`.
    pub fn branch(&self, j: usize, y: f64) -> f64 {
        let y = wrap(y);
        match self.kind {
            MapKind::Pm { q } => {
                if j == 0 {
                    pm_branch_one(q, y)
                } else {
                    (y + 1.0) / 2.0
                }
            }
            MapKind::PmLog { q } => {
                if j == 0 {
                    pm_log_branch_one(q, y)
                } else {
                    (y + 1.0) / 2.0
                }
            }
            MapKind::KFold { k } => (y + j as f64) / k as f64,
            MapKind::Custom => self.custom.as_ref().expect("custom table").branch(j, y),
        }
    }

    /// All `k` preimages of `y`, neutral branch first.
    pub fn inverse_branches(&self, y: f64) -> Vec<f64> {
        (0..self.k).map(|j| self.branch(j, y)).collect()
    }

    /// Writes the `k` preimages of `y` into `out`.
    #[inline]
    pub fn inverse_branches_into(&self, y: f64, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate().take(self.k) {
            *o = self.branch(j, y);
        }
    }

    /// Permutation pairing branch `j` just after 0 with the branch `π(j)`
    /// it continues into just before 1.
    pub fn wrap_permutation(&self) -> &[usize] {
        &self.wrap_perm
    }

    /// Whether `x` lies in the neutral neighbourhood `N`.
    #[inline]
    pub fn in_neutral_set(&self, x: f64) -> bool {
        self.neutral_radius > 0.0 && circle_dist(x, 0.0) <= self.neutral_radius
    }

    fn branch_end(&self, j: usize) -> f64 {
        match self.kind {
            MapKind::Custom => {
                let c = self.custom.as_ref().expect("custom table");
                wrap(c.lift(j, 1.0))
            }
            _ => wrap(self.branch(j, 1.0 - 1e-15)),
        }
    }

    fn compute_wrap_perm(&self) -> Vec<usize> {
        let k = self.k;
        let starts: Vec<f64> = (0..k).map(|j| self.branch(j, 0.0)).collect();
        let ends: Vec<f64> = (0..k).map(|j| self.branch_end(j)).collect();
        let mut best: (f64, Vec<usize>) = (f64::INFINITY, (0..k).collect());
        let mut perm: Vec<usize> = (0..k).collect();
        permute(&mut perm, 0, &mut |p| {
            let cost: f64 = (0..k).map(|j| circle_dist(starts[j], ends[p[j]])).sum();
            if cost < best.0 - 1e-12 {
                best = (cost, p.to_vec());
            }
        });
        best.1
    }

    fn scan_neutral_radius(&self) -> f64 {
        if matches!(self.kind, MapKind::KFold { .. }) {
            return 0.0;
        }
        if self.derivative(0.0) >= self.neutral_lambda {
            return 0.0;
        }
        // log-spaced scan of (0, ½], then bisection on the first crossing
        let n = 4000;
        let (lo_exp, hi_exp) = (-15.0_f64, 0.5f64.log10());
        let mut good = 0.0;
        let mut bad = None;
        for i in 0..=n {
            let x = 10f64.powf(lo_exp + (hi_exp - lo_exp) * i as f64 / n as f64);
            if self.derivative(x) < self.neutral_lambda {
                good = x;
            } else {
                bad = Some(x);
                break;
            }
        }
        let Some(mut bad) = bad else { return 0.5 };
        for _ in 0..100 {
            let mid = 0.5 * (good + bad);
            if self.derivative(mid) < self.neutral_lambda {
                good = mid;
            } else {
                bad = mid;
            }
        }
        good
    }

    /// The contraction function of the natural pairing.
    ///
    /// For the intermittent maps this is the exact supremum of paired
    /// branch distances at separation `r`: `b_1(r)` below the point where
    /// `|T'| = 2` and a line of slope ½ beyond it.
    pub fn contraction_fn(&self) -> ContractionFn {
        match self.kind {
            MapKind::KFold { k } => ContractionFn::linear(k as f64),
            MapKind::Custom => {
                let l = self.custom_contraction;
                ContractionFn::from_fn(ContractionForm::Linear { lambda: l }, move |r| r / l)
            }
            MapKind::Pm { q } => {
                let z = 0.5 * (q + 1.0).powf(-1.0 / q);
                let xs = (1.0 + (2.0 * z).powf(q)) * z;
                ContractionFn::from_fn(ContractionForm::Power { q, d: 2f64.powf(q) }, move |r| {
                    regularize(
                        r,
                        if r <= xs {
                            pm_branch_one(q, r)
                        } else {
                            z + 0.5 * (r - xs)
                        },
                    )
                })
            }
            MapKind::PmLog { q } => {
                let deriv = move |x: f64| {
                    let l = 1.0 - (2.0 * x).ln();
                    1.0 + l.powf(-q) + q * l.powf(-q - 1.0)
                };
                // |T'| is increasing on (0, ½] and exceeds 2 at ½
                let (mut lo, mut hi) = (1e-300_f64, 0.5_f64);
                for _ in 0..2000 {
                    let mid = if hi / lo > 4.0 {
                        (lo * hi).sqrt()
                    } else {
                        0.5 * (lo + hi)
                    };
                    if deriv(mid) < 2.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-16 * hi {
                        break;
                    }
                }
                let z = lo;
                let xs = (1.0 + (1.0 - (2.0 * z).ln()).powf(-q)) * z;
                ContractionFn::from_fn(ContractionForm::Log { q }, move |r| {
                    regularize(
                        r,
                        if r <= xs {
                            pm_log_branch_one(q, r)
                        } else {
                            z + 0.5 * (r - xs)
                        },
                    )
                })
            }
        }
    }
}

#[inline]
fn regularize(r: f64, c: f64) -> f64 {
    if c < r {
        c
    } else {
        r * (1.0 - f64::EPSILON)
    }
}

fn permute(p: &mut Vec<usize>, i: usize, visit: &mut impl FnMut(&[usize])) {
    if i == p.len() {
        visit(p);
        return;
    }
    for j in i..p.len() {
        p.swap(i, j);
        permute(p, i + 1, visit);
        p.swap(i, j);
    }
}

/// Solves `g(x) = target` for increasing `g` on `[lo, hi]`, where `gd`
/// returns the value and derivative. Newton steps are taken when they stay
/// inside the bracket, bisection otherwise.
fn solve_increasing(gd: impl Fn(f64) -> (f64, f64), target: f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut x = hi;
    for _ in 0..ROOT_MAX_ITER {
        let (g, d) = gd(x);
        let f = g - target;
        if f == 0.0 {
            return x;
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - f / d;
        let next = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - x).abs();
        x = next;
        if step <= 2.0 * f64::EPSILON * x.abs()
            || hi - lo <= ROOT_ABS_TOL.min(4.0 * f64::EPSILON * hi)
        {
            break;
        }
    }
    x
}

/// Neutral branch of `T_q`: the solution of `x + 2^q x^{q+1} = y` in
/// `[y/2, y]`.
pub fn pm_branch_one(q: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let c = 2f64.powf(q);
    solve_increasing(
        |x| {
            let p = c * x.powf(q);
            (x + p * x, 1.0 + (q + 1.0) * p)
        },
        y,
        0.5 * y,
        y,
    )
}

/// Neutral branch of `T_{q log}`.
pub fn pm_log_branch_one(q: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    solve_increasing(
        |x| {
            let l = 1.0 - (2.0 * x).ln();
            let p = l.powf(-q);
            (x * (1.0 + p), 1.0 + p + q * l.powf(-q - 1.0))
        },
        y,
        0.5 * y,
        y,
    )
}

/// Outcome of a Monte-Carlo check of the weak-contraction property.
#[derive(Debug, Clone, Serialize)]
pub struct ContractionReport {
    pub samples: usize,
    /// Largest `d(x^{η(j)}, y^{σ(j)}) / d(x, y)` over all samples and pairs.
    pub max_pair_ratio: f64,
    /// Largest value, over samples, of the best pair ratio.
    pub max_best_ratio: f64,
    /// Largest excess of a paired distance over `c(d(x, y))`.
    pub max_excess: f64,
    pub violations: Vec<ContractionViolation>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionViolation {
    pub x: f64,
    pub y: f64,
    pub pair: usize,
    pub distance: f64,
    pub bound: f64,
}

/// Draws random pairs and checks the natural pairing against `c` and `λ`.
pub fn verify_branch_contraction(
    map: &MapModel,
    samples: usize,
    seed: u64,
) -> Result<ContractionReport> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be >= 1".into()));
    }
    let c = map.contraction_fn();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ContractionReport {
        samples,
        max_pair_ratio: 0.0,
        max_best_ratio: 0.0,
        max_excess: f64::NEG_INFINITY,
        violations: Vec::new(),
    };
    let mut bx = vec![0.0; map.k];
    let mut by = vec![0.0; map.k];
    for s in 0..samples {
        let x: f64 = rng.gen();
        // alternate between uniform pairs and close pairs at random scales
        let y = if s % 2 == 0 {
            rng.gen::<f64>()
        } else {
            let sep = 10f64.powf(rng.gen_range(-8.0..-0.31));
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            wrap(x + sign * sep)
        };
        let d = circle_dist(x, y);
        map.inverse_branches_into(x, &mut bx);
        map.inverse_branches_into(y, &mut by);
        let pairing = natural_pairing(map, x, y);
        let bound = c.eval(d);
        let mut best = f64::INFINITY;
        for j in 0..map.k {
            let dist = circle_dist(bx[pairing.eta[j]], by[pairing.sigma[j]]);
            best = best.min(dist);
            report.max_excess = report.max_excess.max(dist - bound);
            if d > 0.0 {
                report.max_pair_ratio = report.max_pair_ratio.max(dist / d);
            }
            if dist > bound + 1e-12 {
                report.violations.push(ContractionViolation {
                    x,
                    y,
                    pair: j,
                    distance: dist,
                    bound,
                });
            }
        }
        if d > 0.0 {
            report.max_best_ratio = report.max_best_ratio.max(best / d);
        }
        if best > d / map.lambda + 1e-12 {
            report.violations.push(ContractionViolation {
                x,
                y,
                pair: pairing.contracted_index,
                distance: best,
                bound: d / map.lambda,
            });
        }
    }
    Ok(report)
}
