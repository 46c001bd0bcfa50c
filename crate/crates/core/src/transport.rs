//! Finitely supported measures on the circle, exact Wasserstein distances
//! for concave ground costs `ω∘d`, and the dual transfer operator acting on
//! measures.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{circle_dist, wrap, CircleFunction, GridFunction};
use crate::maps::MapModel;
use crate::moduli::{holder_constant, ModulusSpec};

/// Tolerance on total mass for probability measures.
pub const MASS_TOL: f64 = 1e-12;
/// Largest atom count per side handled by the assignment solver.
pub const ASSIGNMENT_MAX_ATOMS: usize = 64;
/// Largest number of unit atoms handed to the assignment solver.
pub const ASSIGNMENT_MAX_UNITS: usize = 256;
/// Mass quantum of the min-cost-flow solver.
const FLOW_SCALE: f64 = (1u64 << 48) as f64;

/// A finite measure on the circle with atoms sorted by position.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteMeasure {
    positions: Vec<f64>,
    masses: Vec<f64>,
}

impl DiscreteMeasure {
    /// A probability measure; masses must sum to 1 within [`MASS_TOL`].
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let m = Self::finite(atoms)?;
        let total = m.total_mass();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidMeasure(format!(
                "total mass {total} is not 1"
            )));
        }
        Ok(m)
    }

    /// A finite measure of any total mass. Positions are wrapped to
    /// `[0, 1)`, zero-mass atoms dropped and coincident atoms merged.
    pub fn finite(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if let Some(&(p, m)) = atoms
            .iter()
            .find(|(p, m)| !p.is_finite() || !m.is_finite() || *m < 0.0)
        {
            return Err(Error::InvalidMeasure(format!("bad atom ({p}, {m})")));
        }
        let mut atoms: Vec<(f64, f64)> = atoms
            .into_iter()
            .filter(|&(_, m)| m > 0.0)
            .map(|(p, m)| (wrap(p), m))
            .collect();
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms with positive mass".into()));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut positions = Vec::with_capacity(atoms.len());
        let mut masses: Vec<f64> = Vec::with_capacity(atoms.len());
        for (p, m) in atoms {
            if positions.last() == Some(&p) {
                *masses.last_mut().unwrap() += m;
            } else {
                positions.push(p);
                masses.push(m);
            }
        }
        Ok(Self { positions, masses })
    }

    pub fn dirac(x: f64) -> Self {
        Self {
            positions: vec![wrap(x)],
            masses: vec![1.0],
        }
    }

    /// Equal masses on the given points.
    pub fn uniform(points: &[f64]) -> Result<Self> {
        let w = 1.0 / points.len() as f64;
        Self::finite(points.iter().map(|&p| (p, w)).collect())
    }

    /// Equal masses on the `n` nodes `i / n`.
    pub fn uniform_grid(n: usize) -> Self {
        Self {
            positions: (0..n).map(|i| i as f64 / n as f64).collect(),
            masses: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.positions
            .iter()
            .copied()
            .zip(self.masses.iter().copied())
    }

    pub fn total_mass(&self) -> f64 {
        crate::kernel::pairwise_sum(&self.masses)
    }

    /// Rescales to total mass 1.
    pub fn normalized(&self) -> Self {
        let t = self.total_mass();
        Self {
            positions: self.positions.clone(),
            masses: self.masses.iter().map(|m| m / t).collect(),
        }
    }

    /// Multiplies each atom's mass by `f` at its position.
    pub fn reweighted(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::finite(self.atoms().map(|(p, m)| (p, m * f(p))).collect())
    }

    /// `∫ f dμ`.
    pub fn integrate(&self, f: &dyn CircleFunction) -> f64 {
        let terms: Vec<f64> = self.atoms().map(|(p, m)| m * f.eval(p)).collect();
        crate::kernel::pairwise_sum(&terms)
    }

    /// Kolmogorov–Smirnov distance to Lebesgue measure, with the
    /// distribution function anchored at 0.
    pub fn ks_to_uniform(&self) -> f64 {
        let total = self.total_mass();
        let mut cum = 0.0;
        let mut worst = 0.0_f64;
        for (p, m) in self.atoms() {
            worst = worst.max((cum - p).abs());
            cum += m / total;
            worst = worst.max((cum - p).abs());
        }
        worst
    }

    /// Total-variation norm `Σ |μ_i − ν_i|` between two measures.
    pub fn l1_distance(&self, other: &Self) -> f64 {
        let (mut i, mut j) = (0, 0);
        let mut s = 0.0;
        while i < self.len() || j < other.len() {
            let pi = self.positions.get(i).copied().unwrap_or(f64::INFINITY);
            let pj = other.positions.get(j).copied().unwrap_or(f64::INFINITY);
            if pi == pj {
                s += (self.masses[i] - other.masses[j]).abs();
                i += 1;
                j += 1;
            } else if pi < pj {
                s += self.masses[i];
                i += 1;
            } else {
                s += other.masses[j];
                j += 1;
            }
        }
        s
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "position,mass")?;
        for (p, m) in self.atoms() {
            writeln!(out, "{p:e},{m:e}")?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(f)
    }

    /// Reads `position,mass` rows (a header line is optional).
    pub fn read_csv(input: impl BufRead) -> Result<Self> {
        let mut atoms = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(',').map(str::trim);
            let parsed = (|| {
                let p: f64 = parts.next()?.parse().ok()?;
                let m: f64 = parts.next()?.parse().ok()?;
                Some((p, m))
            })();
            match parsed {
                Some(a) => atoms.push(a),
                None if n == 0 => continue,
                None => {
                    return Err(Error::InvalidMeasure(format!(
                        "bad measure row {}: {line}",
                        n + 1
                    )))
                }
            }
        }
        Self::finite(atoms)
    }
}

/// A coupling of two discrete measures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportPlan {
    /// `(source atom, target atom, mass)`, sorted by source then target.
    pub entries: Vec<(usize, usize, f64)>,
    pub cost: f64,
}

impl TransportPlan {
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "i,j,mass")?;
        for &(i, j, m) in &self.entries {
            writeln!(out, "{i},{j},{m:e}")?;
        }
        Ok(())
    }

    /// Largest marginal error against the two measures.
    pub fn marginal_error(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
        let mut rows = vec![0.0; mu.len()];
        let mut cols = vec![0.0; nu.len()];
        for &(i, j, m) in &self.entries {
            rows[i] += m;
            cols[j] += m;
        }
        let r = rows.iter().zip(mu.masses()).map(|(a, b)| (a - b).abs());
        let c = cols.iter().zip(nu.masses()).map(|(a, b)| (a - b).abs());
        r.chain(c).fold(0.0, f64::max)
    }
}

/// Optimal assignment for a square cost matrix (row `i` ↦ column `out[i]`).
///
/// Shortest augmenting paths with row/column potentials, `O(n³)`.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    #[cfg(feature = "fault-injection")]
    {
        // corrupted solver: ignores costs entirely
        let _ = cost;
        return (0..n).rev().collect();
    }
    #[allow(unreachable_code)]
    {
        let inf = f64::INFINITY;
        let mut u = vec![0.0; n + 1];
        let mut v = vec![0.0; n + 1];
        let mut p = vec![0usize; n + 1];
        let mut way = vec![0usize; n + 1];
        for i in 1..=n {
            p[0] = i;
            let mut j0 = 0;
            let mut minv = vec![inf; n + 1];
            let mut used = vec![false; n + 1];
            loop {
                used[j0] = true;
                let i0 = p[j0];
                let mut delta = inf;
                let mut j1 = 0;
                for j in 1..=n {
                    if !used[j] {
                        let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                        if cur < minv[j] {
                            minv[j] = cur;
                            way[j] = j0;
                        }
                        if minv[j] < delta {
                            delta = minv[j];
                            j1 = j;
                        }
                    }
                }
                for j in 0..=n {
                    if used[j] {
                        u[p[j]] += delta;
                        v[j] -= delta;
                    } else {
                        minv[j] -= delta;
                    }
                }
                j0 = j1;
                if p[j0] == 0 {
                    break;
                }
            }
            loop {
                let j1 = way[j0];
                p[j0] = p[j1];
                j0 = j1;
                if j0 == 0 {
                    break;
                }
            }
        }
        let mut out = vec![0; n];
        for j in 1..=n {
            out[p[j] - 1] = j - 1;
        }
        out
    }
}

/// Min-cost transportation with integer supplies and demands by successive
/// shortest paths (dense Dijkstra with potentials). Returns the flow matrix.
pub fn min_cost_flow(supply: &[u64], demand: &[u64], cost: &[Vec<f64>]) -> Vec<Vec<u64>> {
    let (n, m) = (supply.len(), demand.len());
    let v = n + m;
    let mut flow = vec![vec![0u64; m]; n];
    let mut left: Vec<u64> = supply.to_vec();
    let mut need: Vec<u64> = demand.to_vec();
    let mut pot = vec![0.0; v];
    let mut dist = vec![f64::INFINITY; v];
    let mut prev = vec![usize::MAX; v];
    let mut done = vec![false; v];
    loop {
        if need.iter().all(|&d| d == 0) {
            break;
        }
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        prev.iter_mut().for_each(|p| *p = usize::MAX);
        done.iter_mut().for_each(|d| *d = false);
        for i in 0..n {
            if left[i] > 0 {
                dist[i] = 0.0;
            }
        }
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for (w, &d) in dist.iter().enumerate() {
                if !done[w] && d < best {
                    best = d;
                    u = w;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u < n {
                for (j, &c) in cost[u].iter().enumerate() {
                    let w = n + j;
                    if done[w] {
                        continue;
                    }
                    let rc = (c + pot[u] - pot[w]).max(0.0);
                    if best + rc < dist[w] {
                        dist[w] = best + rc;
                        prev[w] = u;
                    }
                }
            } else {
                let j = u - n;
                for i in 0..n {
                    if done[i] || flow[i][j] == 0 {
                        continue;
                    }
                    let rc = (-cost[i][j] + pot[u] - pot[i]).max(0.0);
                    if best + rc < dist[i] {
                        dist[i] = best + rc;
                        prev[i] = u;
                    }
                }
            }
        }
        let Some(t) = (0..m)
            .filter(|&j| need[j] > 0 && dist[n + j].is_finite())
            .min_by(|&a, &b| dist[n + a].total_cmp(&dist[n + b]))
        else {
            break;
        };
        let sink = n + t;
        // bottleneck along the path
        let mut amount = need[t];
        let mut w = sink;
        while prev[w] != usize::MAX {
            let u = prev[w];
            if u >= n {
                // backward edge sink u -> source w
                amount = amount.min(flow[w][u - n]);
            }
            w = u;
        }
        amount = amount.min(left[w]);
        let mut w = sink;
        while prev[w] != usize::MAX {
            let u = prev[w];
            if u < n {
                flow[u][w - n] += amount;
            } else {
                flow[w][u - n] -= amount;
            }
            w = u;
        }
        left[w] -= amount;
        need[t] -= amount;
        let dt = dist[sink];
        for x in 0..v {
            pot[x] += dist[x].min(dt);
        }
    }
    flow
}

/// Finds `D ≤ max_units` with every mass an integer multiple of `1/D`.
fn common_denominator(masses: &[f64], max_units: usize) -> Option<usize> {
    (1..=max_units).find(|&d| {
        masses.iter().all(|&m| {
            let u = m * d as f64;
            u.round() >= 1.0 && (u - u.round()).abs() <= 1e-10
        })
    })
}

/// Exact `W_ω(μ, ν)` with ground cost `ω(d(x, y))` and an optimal plan.
///
/// Mass at positions shared by both measures stays in place (valid since
/// `ω∘d` is a metric). The remainder goes to the assignment solver when it
/// splits into at most [`ASSIGNMENT_MAX_UNITS`] equal units, otherwise to
/// min-cost flow with masses quantized to `2^-48`.
pub fn wasserstein(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    spec: &ModulusSpec,
) -> Result<(f64, TransportPlan)> {
    let (tm, tn) = (mu.total_mass(), nu.total_mass());
    if (tm - tn).abs() > 1e-9 * tm.max(tn) {
        return Err(Error::MassMismatch(tm, tn));
    }
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    let mut rest_mu: Vec<(usize, f64)> = Vec::new();
    let mut rest_nu: Vec<(usize, f64)> = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < mu.len() || j < nu.len() {
        let pi = mu.positions.get(i).copied().unwrap_or(f64::INFINITY);
        let pj = nu.positions.get(j).copied().unwrap_or(f64::INFINITY);
        if pi == pj {
            let (a, b) = (mu.masses[i], nu.masses[j]);
            let common = a.min(b);
            entries.push((i, j, common));
            if a > common {
                rest_mu.push((i, a - common));
            }
            if b > common {
                rest_nu.push((j, b - common));
            }
            i += 1;
            j += 1;
        } else if pi < pj {
            rest_mu.push((i, mu.masses[i]));
            i += 1;
        } else {
            rest_nu.push((j, nu.masses[j]));
            j += 1;
        }
    }
    if !rest_mu.is_empty() && !rest_nu.is_empty() {
        let cost: Vec<Vec<f64>> = rest_mu
            .iter()
            .map(|&(a, _)| {
                rest_nu
                    .iter()
                    .map(|&(b, _)| spec.eval(circle_dist(mu.positions[a], nu.positions[b])))
                    .collect()
            })
            .collect();
        entries.extend(solve_rest(&rest_mu, &rest_nu, &cost));
    }
    entries.retain(|e| e.2 > 0.0);
    entries.sort_by_key(|a| (a.0, a.1));
    let terms: Vec<f64> = entries
        .iter()
        .map(|&(a, b, m)| m * spec.eval(circle_dist(mu.positions[a], nu.positions[b])))
        .collect();
    let cost: f64 = terms.iter().sum();
    Ok((cost, TransportPlan { entries, cost }))
}

fn solve_rest(
    rest_mu: &[(usize, f64)],
    rest_nu: &[(usize, f64)],
    cost: &[Vec<f64>],
) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    let small = rest_mu.len() <= ASSIGNMENT_MAX_ATOMS && rest_nu.len() <= ASSIGNMENT_MAX_ATOMS;
    let all: Vec<f64> = rest_mu.iter().chain(rest_nu).map(|a| a.1).collect();
    if let Some(d) = small
        .then(|| common_denominator(&all, ASSIGNMENT_MAX_UNITS))
        .flatten()
    {
        let units = |side: &[(usize, f64)]| -> Vec<usize> {
            side.iter()
                .enumerate()
                .flat_map(|(k, a)| std::iter::repeat_n(k, (a.1 * d as f64).round() as usize))
                .collect()
        };
        let (ru, cu) = (units(rest_mu), units(rest_nu));
        if ru.len() == cu.len() && ru.len() <= ASSIGNMENT_MAX_UNITS {
            let unit_cost: Vec<Vec<f64>> = ru
                .iter()
                .map(|&a| cu.iter().map(|&b| cost[a][b]).collect())
                .collect();
            let assign = hungarian(&unit_cost);
            let mut agg = vec![vec![0usize; rest_nu.len()]; rest_mu.len()];
            for (r, &c) in assign.iter().enumerate() {
                agg[ru[r]][cu[c]] += 1;
            }
            for (a, row) in agg.iter().enumerate() {
                for (b, &k) in row.iter().enumerate() {
                    if k > 0 {
                        out.push((rest_mu[a].0, rest_nu[b].0, k as f64 / d as f64));
                    }
                }
            }
            return out;
        }
    }
    let quantize = |side: &[(usize, f64)]| -> Vec<u64> {
        side.iter()
            .map(|a| (a.1 * FLOW_SCALE).round() as u64)
            .collect()
    };
    let (mut sup, mut dem) = (quantize(rest_mu), quantize(rest_nu));
    // balance rounding on the largest atom
    let (s, t): (u64, u64) = (sup.iter().sum(), dem.iter().sum());
    if s > t {
        let k = argmax(&dem);
        dem[k] += s - t;
    } else if t > s {
        let k = argmax(&sup);
        sup[k] += t - s;
    }
    let flow = min_cost_flow(&sup, &dem, cost);
    for (a, row) in flow.iter().enumerate() {
        for (b, &f) in row.iter().enumerate() {
            if f > 0 {
                out.push((rest_mu[a].0, rest_nu[b].0, f as f64 / FLOW_SCALE));
            }
        }
    }
    out
}

fn argmax(v: &[u64]) -> usize {
    v.iter()
        .enumerate()
        .max_by_key(|&(i, &x)| (x, std::cmp::Reverse(i)))
        .map_or(0, |(i, _)| i)
}

/// Applies the dual transfer operator: each atom `(x, m)` spreads to the
/// preimages `(x^j, m e^{A(x^j)} / k)`.
///
/// With `merge_resolution > 0` the new atoms are deposited linearly onto
/// the nodes of a uniform grid of that spacing, so the atom count stays
/// bounded. Deposition is the adjoint of piecewise-linear interpolation,
/// preserves mass exactly and does not increase `W_ω`.
pub fn dual_pushforward(
    map: &MapModel,
    potential: &dyn CircleFunction,
    mu: &DiscreteMeasure,
    merge_resolution: f64,
) -> Result<DiscreteMeasure> {
    let mut pre = vec![0.0; map.k];
    if merge_resolution <= 0.0 {
        let mut atoms = Vec::with_capacity(mu.len() * map.k);
        for (x, m) in mu.atoms() {
            map.inverse_branches_into(x, &mut pre);
            for &p in &pre {
                atoms.push((p, m * potential.eval(p).exp() / map.k as f64));
            }
        }
        return DiscreteMeasure::finite(atoms);
    }
    let n = (1.0 / merge_resolution).round() as usize;
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "merge_resolution {merge_resolution} is coarser than the circle"
        )));
    }
    let mut bins = vec![0.0; n];
    for (x, m) in mu.atoms() {
        map.inverse_branches_into(x, &mut pre);
        for &p in &pre {
            let w = m * potential.eval(p).exp() / map.k as f64;
            let (i, t) = crate::grid::locate(p, n);
            let j = if i + 1 == n { 0 } else { i + 1 };
            bins[i] += w * (1.0 - t);
            bins[j] += w * t;
        }
    }
    DiscreteMeasure::finite(
        bins.into_iter()
            .enumerate()
            .map(|(i, m)| (i as f64 / n as f64, m))
            .collect(),
    )
}

/// One probe of a Kantorovich check.
#[derive(Debug, Clone, Serialize)]
pub struct KantorovichRow {
    pub holder: f64,
    /// `|μ(f) − ν(f)|`.
    pub gap: f64,
    /// `Hol_ω(f) · W_ω(μ, ν)`.
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct KantorovichReport {
    pub distance: f64,
    pub rows: Vec<KantorovichRow>,
    pub passed: bool,
}

/// Checks `|μ(f) − ν(f)| ≤ Hol_ω(f) W_ω(μ, ν)` for each probe.
pub fn kantorovich_check(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    spec: &ModulusSpec,
    probes: &[GridFunction],
) -> Result<KantorovichReport> {
    let (w, _) = wasserstein(mu, nu, spec)?;
    let rows: Vec<KantorovichRow> = probes
        .iter()
        .map(|f| {
            let holder = holder_constant(f, spec);
            let gap = (mu.integrate(f) - nu.integrate(f)).abs();
            let bound = holder * w;
            KantorovichRow {
                holder,
                gap,
                bound,
                ok: gap <= bound + 1e-9,
            }
        })
        .collect();
    let passed = rows.iter().all(|r| r.ok);
    Ok(KantorovichReport {
        distance: w,
        rows,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirac_distance() {
        let spec = ModulusSpec::new(0.5, 0.0).unwrap();
        let (w, plan) = wasserstein(
            &DiscreteMeasure::dirac(0.1),
            &DiscreteMeasure::dirac(0.35),
            &spec,
        )
        .unwrap();
        assert!((w - 0.5).abs() < 1e-15);
        assert_eq!(plan.entries.len(), 1);
    }

    #[test]
    fn interleaved_uniforms() {
        let mu = DiscreteMeasure::uniform(&[0.0, 0.5]).unwrap();
        let nu = DiscreteMeasure::uniform(&[0.25, 0.75]).unwrap();
        let (w, plan) = wasserstein(&mu, &nu, &ModulusSpec::lipschitz()).unwrap();
        assert!((w - 0.25).abs() < 1e-15);
        assert!(plan.marginal_error(&mu, &nu) < 1e-12);
    }

    #[test]
    fn identical_measures() {
        let mu = DiscreteMeasure::new(vec![(0.1, 0.25), (0.4, 0.75)]).unwrap();
        let (w, plan) = wasserstein(&mu, &mu, &ModulusSpec::lipschitz()).unwrap();
        assert_eq!(w, 0.0);
        assert_eq!(plan.entries, vec![(0, 0, 0.25), (1, 1, 0.75)]);
    }

    #[test]
    fn rejects_mass_mismatch() {
        let mu = DiscreteMeasure::finite(vec![(0.1, 0.5)]).unwrap();
        let nu = DiscreteMeasure::dirac(0.2);
        assert!(matches!(
            wasserstein(&mu, &nu, &ModulusSpec::lipschitz()),
            Err(Error::MassMismatch(..))
        ));
    }

    #[test]
    fn flow_handles_irrational_masses() {
        let a = 1.0 / std::f64::consts::PI;
        let mu = DiscreteMeasure::new(vec![(0.1, a), (0.6, 1.0 - a)]).unwrap();
        let nu = DiscreteMeasure::new(vec![(0.2, 0.5), (0.7, 0.5)]).unwrap();
        let (w, plan) = wasserstein(&mu, &nu, &ModulusSpec::lipschitz()).unwrap();
        // 0.1 feeds 0.2 fully, 0.6 covers the rest of 0.2 and all of 0.7
        let expect = 0.1 * a + 0.4 * (0.5 - a) + 0.1 * 0.5;
        assert!((w - expect).abs() < 1e-12, "{w} vs {expect}");
        assert!(plan.marginal_error(&mu, &nu) < 1e-10);
    }

    #[test]
    fn measure_csv_roundtrip() {
        let mu = DiscreteMeasure::new(vec![(0.1, 0.25), (0.4, 0.75)]).unwrap();
        let mut buf = Vec::new();
        mu.write_csv(&mut buf).unwrap();
        let back = DiscreteMeasure::read_csv(&buf[..]).unwrap();
        assert_eq!(mu, back);
    }

    #[test]
    fn pushforward_of_dirac() {
        let m = MapModel::pm(0.5).unwrap();
        let zero = |_: f64| 0.0;
        let out = dual_pushforward(&m, &zero, &DiscreteMeasure::dirac(0.3), 0.0).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out.masses().iter().all(|&w| (w - 0.5).abs() < 1e-15));
        let a = |x: f64| x;
        let out = dual_pushforward(&m, &a, &DiscreteMeasure::dirac(0.3), 0.0).unwrap();
        let b = m.inverse_branches(0.3);
        let expect = (b[0].exp() + b[1].exp()) / 2.0;
        assert!((out.total_mass() - expect).abs() < 1e-15);
    }

    #[test]
    fn ks_of_grid_uniform() {
        let u = DiscreteMeasure::uniform_grid(1000);
        assert!((u.ks_to_uniform() - 1e-3).abs() < 1e-12);
    }
}
