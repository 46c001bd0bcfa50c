//! The uniform backward walk `m_x = (1/k) Σ δ_{x^j}`, its natural coupling,
//! coupled trajectories and costs, and flatness certification of potentials.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{circle_dist, path_crosses_zero, wrap, CircleFunction, GridFunction};
use crate::maps::{ContractionFn, ContractionForm, MapModel};
use crate::moduli::{holder_constant, ModulusSpec};

/// Largest number of words summed by exhaustive coupling costs.
pub const EXHAUSTIVE_WORD_CAP: u128 = 1 << 20;

/// How the natural coupling matches branches of `x` with branches of `y`:
/// letter `j` moves `x` to `x^{eta[j]}` and `y` to `y^{sigma[j]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Pairing {
    pub eta: Vec<usize>,
    pub sigma: Vec<usize>,
    /// Letter whose paired branches are closest.
    pub contracted_index: usize,
}

impl Pairing {
    pub fn is_identity(&self) -> bool {
        self.eta.iter().enumerate().all(|(i, &e)| i == e)
            && self.sigma.iter().enumerate().all(|(i, &s)| i == s)
    }
}

/// Branch permutations of the natural pairing, without the contracted index.
fn pairing_perms(map: &MapModel, x: f64, y: f64) -> (Vec<usize>, Vec<usize>) {
    let id: Vec<usize> = (0..map.k).collect();
    if !path_crosses_zero(x, y) {
        return (id.clone(), id);
    }
    let wrapped = map.wrap_permutation().to_vec();
    if wrap(x) < wrap(y) {
        // x sits just after 0, y just before 1
        (id, wrapped)
    } else {
        (wrapped, id)
    }
}

fn closest_pair(bx: &[f64], by: &[f64], eta: &[usize], sigma: &[usize]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for j in 0..eta.len() {
        let d = circle_dist(bx[eta[j]], by[sigma[j]]);
        if d <= best.0 {
            best = (d, j);
        }
    }
    best.1
}

/// The natural pairing at `(x, y)`: same-index branches when the shortest
/// path between the points avoids 0, otherwise each branch leaving 0 on one
/// side is paired with the branch arriving at the same point from the other.
pub fn natural_pairing(map: &MapModel, x: f64, y: f64) -> Pairing {
    let (eta, sigma) = pairing_perms(map, x, y);
    let bx = map.inverse_branches(x);
    let by = map.inverse_branches(y);
    let contracted_index = closest_pair(&bx, &by, &eta, &sigma);
    Pairing {
        eta,
        sigma,
        contracted_index,
    }
}

/// One natural-coupling step along letter `j`.
#[inline]
fn step(map: &MapModel, x: f64, y: f64, j: usize, bx: &mut [f64], by: &mut [f64]) -> (f64, f64) {
    let (eta, sigma) = pairing_perms(map, x, y);
    map.inverse_branches_into(x, bx);
    map.inverse_branches_into(y, by);
    (bx[eta[j]], by[sigma[j]])
}

/// A pair of backward orbits driven by the same word.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledTrajectory {
    pub word: Vec<usize>,
    /// `x_1, …, x_t` (the starting point is not repeated).
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Running Birkhoff sums `A^n(x̄)`, `n = 1..t`; empty without a potential.
    pub sums_x: Vec<f64>,
    pub sums_y: Vec<f64>,
}

impl CoupledTrajectory {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn birkhoff_x(&self) -> f64 {
        self.sums_x.last().copied().unwrap_or(0.0)
    }

    pub fn birkhoff_y(&self) -> f64 {
        self.sums_y.last().copied().unwrap_or(0.0)
    }

    /// Writes `t, x_t, y_t, d, A^t_x, A^t_y` rows.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "t,x,y,d,sum_x,sum_y")?;
        for n in 0..self.len() {
            let (ax, ay) = if self.sums_x.is_empty() {
                (0.0, 0.0)
            } else {
                (self.sums_x[n], self.sums_y[n])
            };
            writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{:e}",
                n + 1,
                self.xs[n],
                self.ys[n],
                circle_dist(self.xs[n], self.ys[n]),
                ax,
                ay
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(f)
    }
}

/// Follows the natural coupling from `(x, y)` along `word` (letters `0..k`).
pub fn coupled_trajectory(
    map: &MapModel,
    x: f64,
    y: f64,
    word: &[usize],
    potential: Option<&dyn CircleFunction>,
) -> Result<CoupledTrajectory> {
    if let Some(&bad) = word.iter().find(|&&j| j >= map.k) {
        return Err(Error::InvalidArgument(format!(
            "word letter {bad} out of range for {} branches",
            map.k
        )));
    }
    let t = word.len();
    let mut tr = CoupledTrajectory {
        word: word.to_vec(),
        xs: Vec::with_capacity(t),
        ys: Vec::with_capacity(t),
        sums_x: Vec::new(),
        sums_y: Vec::new(),
    };
    let (mut bx, mut by) = (vec![0.0; map.k], vec![0.0; map.k]);
    let (mut cx, mut cy) = (wrap(x), wrap(y));
    let (mut sx, mut sy) = (0.0, 0.0);
    for &j in word {
        (cx, cy) = step(map, cx, cy, j, &mut bx, &mut by);
        tr.xs.push(cx);
        tr.ys.push(cy);
        if let Some(a) = potential {
            sx += a.eval(cx);
            sy += a.eval(cy);
            tr.sums_x.push(sx);
            tr.sums_y.push(sy);
        }
    }
    Ok(tr)
}

/// Exhaustive word sum or Monte-Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostMode {
    Exhaustive,
    Sampled { words: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingCost {
    /// `∫ ω(d(x_t, y_t)) dΠ^t_{x,y}`, or its estimate.
    pub mean: f64,
    /// Standard error of the estimate; 0 when exhaustive.
    pub std_error: f64,
    pub words: u128,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic generator keyed by `(seed, pair, word)`, independent of
/// the order in which words are processed.
pub fn word_rng(seed: u64, pair: u64, word: u64) -> ChaCha8Rng {
    let key = splitmix64(seed ^ splitmix64(pair ^ splitmix64(word).rotate_left(17)));
    ChaCha8Rng::seed_from_u64(key)
}

fn subtree_cost(map: &MapModel, x: f64, y: f64, depth: usize, spec: &ModulusSpec) -> f64 {
    if depth == 0 {
        return spec.eval(circle_dist(x, y));
    }
    if x == y {
        return 0.0;
    }
    let (eta, sigma) = pairing_perms(map, x, y);
    let bx = map.inverse_branches(x);
    let by = map.inverse_branches(y);
    (0..map.k)
        .map(|j| subtree_cost(map, bx[eta[j]], by[sigma[j]], depth - 1, spec))
        .sum()
}

/// Expected `ω`-cost of the natural coupling after `t` steps.
pub fn coupling_cost(
    map: &MapModel,
    x: f64,
    y: f64,
    t: usize,
    spec: &ModulusSpec,
    mode: CostMode,
) -> Result<CouplingCost> {
    let (x, y) = (wrap(x), wrap(y));
    match mode {
        CostMode::Exhaustive => {
            let count = (map.k as u128)
                .checked_pow(t as u32)
                .filter(|&c| c <= EXHAUSTIVE_WORD_CAP)
                .ok_or(Error::TooManyWords {
                    count: (map.k as f64).powi(t as i32) as u128,
                    cap: EXHAUSTIVE_WORD_CAP,
                })?;
            // expand a fixed frontier, evaluate subtrees in parallel and
            // combine in frontier order so the sum is bit-stable
            let mut frontier = vec![(x, y)];
            let mut depth = 0;
            while depth < t && frontier.len() < 256 {
                let mut next = Vec::with_capacity(frontier.len() * map.k);
                for &(a, b) in &frontier {
                    let (eta, sigma) = pairing_perms(map, a, b);
                    let ba = map.inverse_branches(a);
                    let bb = map.inverse_branches(b);
                    for j in 0..map.k {
                        next.push((ba[eta[j]], bb[sigma[j]]));
                    }
                }
                frontier = next;
                depth += 1;
            }
            let parts: Vec<f64> = frontier
                .par_iter()
                .map(|&(a, b)| subtree_cost(map, a, b, t - depth, spec))
                .collect();
            Ok(CouplingCost {
                mean: pairwise_sum(&parts) / count as f64,
                std_error: 0.0,
                words: count,
            })
        }
        CostMode::Sampled { words, seed } => {
            if words < 2 {
                return Err(Error::InvalidArgument(
                    "sampled cost needs at least 2 words".into(),
                ));
            }
            let costs: Vec<f64> = (0..words as u64)
                .into_par_iter()
                .map(|w| {
                    let mut rng = word_rng(seed, 0, w);
                    let (mut bx, mut by) = (vec![0.0; map.k], vec![0.0; map.k]);
                    let (mut cx, mut cy) = (x, y);
                    for _ in 0..t {
                        let j = rng.gen_range(0..map.k);
                        (cx, cy) = step(map, cx, cy, j, &mut bx, &mut by);
                    }
                    spec.eval(circle_dist(cx, cy))
                })
                .collect();
            let n = words as f64;
            let mean = pairwise_sum(&costs) / n;
            let var = costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
            Ok(CouplingCost {
                mean,
                std_error: (var / n).sqrt(),
                words: words as u128,
            })
        }
    }
}

/// Recursive pairwise summation in a fixed order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        v.iter().sum()
    } else {
        let (a, b) = v.split_at(v.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Method used to certify flatness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlatnessMethod {
    Series,
    Runs,
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesRow {
    pub r: f64,
    /// `Σ_{n ≤ n_max} ω̃(cⁿ(r))`.
    pub partial_sum: f64,
    /// Analytic bound on the remaining terms.
    pub tail: f64,
    /// `partial_sum + tail`.
    pub bound: f64,
    /// `C ω(r)`.
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupRow {
    pub t: usize,
    pub sup_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    Series(Vec<SeriesRow>),
    Sup(Vec<SupRow>),
}

/// Outcome of a flatness check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatnessCertificate {
    pub potential_modulus: Option<ModulusSpec>,
    pub target_modulus: ModulusSpec,
    /// Flatness constant `C`; infinite when refuted by divergence.
    pub constant: f64,
    pub method: FlatnessMethod,
    pub refuted: bool,
    pub reason: Option<String>,
    /// Extra named quantities (run constant, Hölder constant, …).
    pub details: Vec<(String, f64)>,
    pub evidence: Evidence,
}

impl FlatnessCertificate {
    pub fn passed(&self) -> bool {
        !self.refuted && self.constant.is_finite()
    }

    pub fn detail(&self, name: &str) -> Option<f64> {
        self.details
            .iter()
            .find(|(n, _)| n == name)
            .map(|&(_, v)| v)
    }
}

/// Composite Simpson rule with `n` (even) panels.
fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `a` in the telescoping inequality for the contraction form, at `r`.
pub(crate) fn telescoping_gap(form: ContractionForm, r: f64, c: f64) -> f64 {
    match form {
        ContractionForm::Power { q, .. } => {
            // r^{-q} ((r/c)^q - 1), computed without cancellation
            let ratio_log = -((c - r) / r).ln_1p();
            r.powf(-q) * (q * ratio_log).exp_m1()
        }
        ContractionForm::Log { q } => {
            let (lc, lr) = ((1.0 / c).ln(), (1.0 / r).ln());
            lc.powf(q + 1.0) - lr.powf(q + 1.0)
        }
        ContractionForm::Linear { .. } => f64::INFINITY,
    }
}

/// Smallest telescoping gap of `c` on a geometric grid below `s`.
fn gap_below(c: &ContractionFn, s: f64) -> f64 {
    let mut a = f64::INFINITY;
    let mut r = s;
    while r > 1e-280 {
        let cr = c.eval(r);
        if cr > 0.0 && cr < r {
            a = a.min(telescoping_gap(c.form, r, cr));
        }
        r *= 0.8;
    }
    a
}

type Majorant = Box<dyn Fn(f64) -> f64>;

/// Bound on `Σ_{m ≥ 1} ω̃(c^m(s))` from the closed-form majorant of the
/// iterates, or `None` when the majorant series diverges.
fn series_tail(c: &ContractionFn, potential: &ModulusSpec, s: f64) -> Option<f64> {
    if s <= 0.0 {
        return Some(0.0);
    }
    let (al, be) = (potential.alpha, potential.beta);
    // exponential rate `kappa` (in log x) and log-power `b` of the integrand
    // decay, `None` for super-polynomial decay
    let (majorant, rate): (Majorant, Option<(f64, f64)>) = match c.form {
        ContractionForm::Power { q, .. } => {
            let a = gap_below(c, s);
            if !(a > 0.0) {
                return None;
            }
            let s0 = s.powf(-q);
            (
                Box::new(move |x: f64| (a * x + s0).powf(-1.0 / q)),
                Some((al / q - 1.0, be)),
            )
        }
        ContractionForm::Log { q } => {
            let a = gap_below(c, s);
            if !(a > 0.0) {
                return None;
            }
            let l0 = (1.0 / s).ln().powf(q + 1.0);
            let rate = if al > 0.0 {
                None
            } else {
                Some((be / (q + 1.0) - 1.0, 0.0))
            };
            (
                Box::new(move |x: f64| (-(a * x + l0).powf(1.0 / (q + 1.0))).exp()),
                rate,
            )
        }
        ContractionForm::Linear { lambda } => {
            if !(lambda > 1.0) {
                return None;
            }
            let rate = if al > 0.0 {
                None
            } else {
                Some((be - 1.0, 0.0))
            };
            (Box::new(move |x: f64| s * lambda.powf(-x)), rate)
        }
    };
    if let Some((kappa, b)) = rate {
        if kappa < 0.0 || (kappa == 0.0 && b <= 1.0) {
            return None;
        }
    }
    let g = |x: f64| potential.eval(majorant(x));
    let mut total = simpson(&g, 0.0, 1.0, 256);
    // x = e^u on [0, U]
    let h = |u: f64| {
        let x = u.exp();
        g(x) * x
    };
    let u_max = 650.0;
    let mut u = 0.0;
    while u < u_max {
        let part = simpson(&h, u, u + 1.0, 64);
        total += part;
        u += 1.0;
        if part <= 1e-17 * total && rate.is_none() {
            return Some(total);
        }
        if part == 0.0 {
            return Some(total);
        }
    }
    let hu = h(u);
    let rest = match rate {
        None => 0.0,
        Some((kappa, b)) if kappa > 0.0 => {
            let eff = kappa + b.min(0.0) / u;
            if eff <= 0.0 {
                return None;
            }
            hu / eff
        }
        Some((_, b)) => hu * u / (b - 1.0),
    };
    let total = total + rest;
    total.is_finite().then_some(total)
}

/// Certifies `Σ_{n ≥ 1} ω̃(cⁿ(r)) ≤ C ω(r)` on `r_grid`, summing `n_max`
/// terms directly and bounding the rest analytically.
pub fn flatness_series(
    c: &ContractionFn,
    potential_spec: &ModulusSpec,
    target_spec: &ModulusSpec,
    r_grid: &[f64],
    n_max: usize,
) -> Result<FlatnessCertificate> {
    if r_grid.is_empty() || r_grid.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
        return Err(Error::InvalidArgument(
            "r_grid must be non-empty within (0, 1]".into(),
        ));
    }
    let rows: Vec<Option<SeriesRow>> = r_grid
        .par_iter()
        .map(|&r| {
            let mut s = r;
            let mut terms = Vec::with_capacity(n_max);
            for _ in 0..n_max {
                s = c.eval(s);
                terms.push(potential_spec.eval(s));
            }
            let partial_sum = pairwise_sum(&terms);
            let tail = series_tail(c, potential_spec, s)?;
            Some(SeriesRow {
                r,
                partial_sum,
                tail,
                bound: partial_sum + tail,
                target: 0.0,
            })
        })
        .collect();
    let refuted = rows.iter().any(Option::is_none);
    let mut rows: Vec<SeriesRow> = rows.into_iter().flatten().collect();
    let constant = if refuted {
        f64::INFINITY
    } else {
        rows.iter()
            .map(|row| row.bound / target_spec.eval(row.r))
            .fold(0.0, f64::max)
    };
    for row in &mut rows {
        row.target = constant * target_spec.eval(row.r);
    }
    let tail_max = rows.iter().map(|r| r.tail).fold(0.0, f64::max);
    Ok(FlatnessCertificate {
        potential_modulus: Some(*potential_spec),
        target_modulus: *target_spec,
        constant,
        method: FlatnessMethod::Series,
        refuted,
        reason: refuted
            .then(|| "series of potential moduli along contraction iterates diverges".to_string()),
        details: vec![
            ("tail_max".into(), tail_max),
            ("n_max".into(), n_max as f64),
        ],
        evidence: Evidence::Series(rows),
    })
}

/// Draws a starting pair with a log-uniform separation in `[1e-6, ½]`.
fn sample_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let x: f64 = rng.gen();
    let sep = 10f64.powf(rng.gen_range(-6.0..0.5f64.log10()));
    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    (x, wrap(x + sign * sep))
}

/// Per-`t` running sup of `|Aᵗ(x̄) − Aᵗ(ȳ)| / ω(d(x, y))` over sampled pairs
/// and words.
fn sup_ratio_profile(
    map: &MapModel,
    potential: &dyn CircleFunction,
    normalizer: impl Fn(f64) -> f64 + Sync,
    t_max: usize,
    pair_samples: usize,
    word_samples: usize,
    seed: u64,
) -> Vec<f64> {
    let per_pair: Vec<Vec<f64>> = (0..pair_samples as u64)
        .into_par_iter()
        .map(|p| {
            let mut prng = word_rng(seed, p, u64::MAX);
            let (x0, y0) = sample_pair(&mut prng);
            let norm = normalizer(circle_dist(x0, y0));
            let mut best = vec![0.0_f64; t_max];
            let (mut bx, mut by) = (vec![0.0; map.k], vec![0.0; map.k]);
            for w in 0..word_samples as u64 {
                let mut rng = word_rng(seed, p, w);
                let (mut x, mut y) = (x0, y0);
                let mut diff = 0.0;
                for b in best.iter_mut() {
                    let j = rng.gen_range(0..map.k);
                    (x, y) = step(map, x, y, j, &mut bx, &mut by);
                    diff += potential.eval(x) - potential.eval(y);
                    *b = b.max(diff.abs() / norm);
                }
            }
            best
        })
        .collect();
    let mut sup = vec![0.0_f64; t_max];
    for row in per_pair {
        for (s, v) in sup.iter_mut().zip(row) {
            *s = s.max(v);
        }
    }
    // running sup over t
    for t in 1..t_max {
        sup[t] = sup[t].max(sup[t - 1]);
    }
    sup
}

/// Whether a running-sup profile keeps growing between `t_max / 2` and `t_max`.
fn growth_refutes(sup: &[f64]) -> bool {
    let n = sup.len();
    if n < 4 {
        return false;
    }
    let (half, end) = (sup[n / 2 - 1], sup[n - 1]);
    end > 1e-12 && end > 1.5 * half
}

/// Monte-Carlo flatness: sup over sampled `(x, y, w, t ≤ t_max)`.
pub fn flatness_empirical(
    map: &MapModel,
    potential: &dyn CircleFunction,
    target_spec: &ModulusSpec,
    t_max: usize,
    pair_samples: usize,
    word_samples: usize,
    seed: u64,
) -> Result<FlatnessCertificate> {
    if t_max == 0 || pair_samples == 0 || word_samples == 0 {
        return Err(Error::InvalidArgument(
            "t_max and sample counts must be >= 1".into(),
        ));
    }
    let sup = sup_ratio_profile(
        map,
        potential,
        |d| target_spec.eval(d),
        t_max,
        pair_samples,
        word_samples,
        seed,
    );
    let refuted = growth_refutes(&sup);
    let constant = sup.last().copied().unwrap_or(0.0);
    Ok(FlatnessCertificate {
        potential_modulus: None,
        target_modulus: *target_spec,
        constant,
        method: FlatnessMethod::Empirical,
        refuted,
        reason: refuted.then(|| "running sup keeps growing with t".to_string()),
        details: vec![],
        evidence: Evidence::Sup(
            sup.iter()
                .enumerate()
                .map(|(t, &s)| SupRow {
                    t: t + 1,
                    sup_ratio: s,
                })
                .collect(),
        ),
    })
}

/// Bound `|A'(r)| ≤ constant · r^exponent` on the neutral set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeBound {
    pub constant: f64,
    pub exponent: f64,
}

/// Flatness by runs in the neutral set: Birkhoff differences accumulated
/// while both orbits stay in `N`, combined with geometric contraction
/// outside `N`.
pub fn flatness_runs(
    map: &MapModel,
    potential: &dyn CircleFunction,
    alpha: f64,
    t_max: usize,
    samples: usize,
    seed: u64,
    derivative_bound: Option<DerivativeBound>,
) -> Result<FlatnessCertificate> {
    if map.neutral_radius <= 0.0 {
        return Err(Error::NeutralPrecondition("map has no neutral set".into()));
    }
    if !(alpha > 0.0 && alpha <= 1.0) || t_max == 0 || samples == 0 {
        return Err(Error::InvalidArgument(
            "alpha must be in (0, 1], t_max and samples >= 1".into(),
        ));
    }
    let r = map.neutral_radius;
    if derivative_bound.is_none() {
        let probe: Vec<f64> = (0..=2000)
            .map(|i| potential.eval(wrap(-r + 2.0 * r * i as f64 / 2000.0)))
            .collect();
        let (lo, hi) = probe
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
                (l.min(v), h.max(v))
            });
        if hi - lo > 1e-12 * (1.0 + hi.abs()) {
            return Err(Error::NeutralPrecondition(format!(
                "potential varies by {:e} on the neutral set of radius {r:e}",
                hi - lo
            )));
        }
    }
    let spec = ModulusSpec::new(alpha, 0.0)?;
    let grid = GridFunction::from_fn(4096, |x| potential.eval(x));
    let hol = holder_constant(&grid, &spec);

    // sup over runs of |Σ_{run} A(x_n) - A(y_n)| / d(run start)^α
    let runs: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = word_rng(seed, p, u64::MAX - 1);
            let (mut x, mut y) = sample_pair(&mut rng);
            let (mut bx, mut by) = (vec![0.0; map.k], vec![0.0; map.k]);
            let mut worst = 0.0_f64;
            let mut run: Option<(f64, f64)> = None;
            for _ in 0..t_max {
                let j = rng.gen_range(0..map.k);
                let d_prev = circle_dist(x, y);
                (x, y) = step(map, x, y, j, &mut bx, &mut by);
                if map.in_neutral_set(x) && map.in_neutral_set(y) {
                    let (d0, acc) = run.unwrap_or((d_prev, 0.0));
                    let acc = acc + potential.eval(x) - potential.eval(y);
                    if d0 > 0.0 {
                        worst = worst.max(acc.abs() / d0.powf(alpha));
                    }
                    run = Some((d0, acc));
                } else {
                    run = None;
                }
            }
            worst
        })
        .collect();
    let run_constant = runs.iter().copied().fold(0.0, f64::max);
    let geometric = 1.0 / (1.0 - map.neutral_lambda.powf(-alpha));
    let constant = (run_constant + hol) * geometric;

    let sup = sup_ratio_profile(map, potential, |d| d.powf(alpha), t_max, samples, 1, seed);
    let direct = sup.last().copied().unwrap_or(0.0);
    let refuted = direct > constant || growth_refutes(&sup);
    Ok(FlatnessCertificate {
        potential_modulus: None,
        target_modulus: spec,
        constant,
        method: FlatnessMethod::Runs,
        refuted,
        reason: refuted.then(|| "direct Birkhoff sup exceeds the run bound".to_string()),
        details: vec![
            ("run_constant".into(), run_constant),
            ("holder_constant".into(), hol),
            ("geometric_factor".into(), geometric),
            ("direct_sup".into(), direct),
        ],
        evidence: Evidence::Sup(
            sup.iter()
                .enumerate()
                .map(|(t, &s)| SupRow {
                    t: t + 1,
                    sup_ratio: s,
                })
                .collect(),
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairing_examples() {
        let m = MapModel::pm(0.5).unwrap();
        assert!(natural_pairing(&m, 0.2, 0.4).is_identity());
        let p = natural_pairing(&m, 0.1, 0.9);
        assert_eq!(p.eta, vec![0, 1]);
        assert_eq!(p.sigma, vec![1, 0]);
        let p = natural_pairing(&m, 0.9, 0.1);
        assert_eq!(p.eta, vec![1, 0]);
        assert_eq!(p.sigma, vec![0, 1]);
        assert!(natural_pairing(&m, 0.3, 0.3).is_identity());
        // antipodal: same-index
        assert!(natural_pairing(&m, 0.0, 0.5).is_identity());
    }

    #[test]
    fn crossed_pairs_are_close() {
        let m = MapModel::pm(1.0).unwrap();
        let c = m.contraction_fn();
        let p = natural_pairing(&m, 0.02, 0.97);
        let bx = m.inverse_branches(0.02);
        let by = m.inverse_branches(0.97);
        for j in 0..2 {
            assert!(circle_dist(bx[p.eta[j]], by[p.sigma[j]]) <= c.eval(0.05) + 1e-12);
        }
        let j = p.contracted_index;
        assert!(circle_dist(bx[p.eta[j]], by[p.sigma[j]]) <= 0.05 / 2.0 + 1e-12);
    }

    #[test]
    fn empty_word() {
        let m = MapModel::k_fold(2).unwrap();
        let tr = coupled_trajectory(&m, 0.1, 0.2, &[], None).unwrap();
        assert!(tr.is_empty());
        assert_eq!(tr.birkhoff_x(), 0.0);
    }

    #[test]
    fn halving_word() {
        let m = MapModel::k_fold(2).unwrap();
        let tr = coupled_trajectory(&m, 0.0, 0.5, &[1, 1, 1], None).unwrap();
        let d = circle_dist(tr.xs[2], tr.ys[2]);
        assert!((d - 0.0625).abs() < 1e-15);
        assert!(coupled_trajectory(&m, 0.0, 0.5, &[2], None).is_err());
    }

    #[test]
    fn constant_potential_sums_agree() {
        let m = MapModel::pm(0.7).unwrap();
        let a = |_: f64| 1.25;
        let tr = coupled_trajectory(&m, 0.3, 0.8, &[0, 1, 1, 0, 0, 1, 0], Some(&a)).unwrap();
        assert_eq!(tr.birkhoff_x(), tr.birkhoff_y());
    }

    #[test]
    fn exhaustive_cap() {
        let m = MapModel::k_fold(2).unwrap();
        let spec = ModulusSpec::lipschitz();
        assert!(matches!(
            coupling_cost(&m, 0.1, 0.2, 21, &spec, CostMode::Exhaustive),
            Err(Error::TooManyWords { .. })
        ));
    }

    #[test]
    fn doubling_cost_closed_form() {
        let m = MapModel::k_fold(2).unwrap();
        let spec = ModulusSpec::lipschitz();
        for t in 0..10 {
            let c = coupling_cost(&m, 0.1, 0.35, t, &spec, CostMode::Exhaustive).unwrap();
            assert!((c.mean - 0.25 * 0.5f64.powi(t as i32)).abs() < 1e-15);
        }
        let c = coupling_cost(&m, 0.3, 0.3, 5, &spec, CostMode::Exhaustive).unwrap();
        assert_eq!(c.mean, 0.0);
    }

    #[test]
    fn series_geometric_constant() {
        let c = ContractionFn::linear(2.0);
        for alpha in [0.5, 1.0] {
            let spec = ModulusSpec::new(alpha, 0.0).unwrap();
            let grid: Vec<f64> = (1..=20).map(|j| 2f64.powi(-j)).collect();
            let cert = flatness_series(&c, &spec, &spec, &grid, 100).unwrap();
            let oracle = 1.0 / (2f64.powf(alpha) - 1.0);
            assert!(cert.passed());
            assert!(
                (cert.constant - oracle).abs() < 1e-9 * oracle,
                "{alpha}: {}",
                cert.constant
            );
        }
    }

    #[test]
    fn word_rng_is_keyed() {
        let a: u64 = word_rng(1, 2, 3).gen();
        let b: u64 = word_rng(1, 2, 3).gen();
        let c: u64 = word_rng(1, 3, 2).gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
