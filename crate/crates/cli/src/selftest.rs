//! Invariant suite run by `transfer selftest`.

use std::f64::consts::TAU;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::result::Result;
use transfer_core::*;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type Check = fn() -> Result<String, String>;

fn checks() -> Vec<(&'static str, Check)> {
    vec![
        ("assignment_vs_brute_force", assignment_vs_brute_force),
        ("wasserstein_metric_axioms", wasserstein_metric_axioms),
        ("modulus_concavity", modulus_concavity),
        ("doubling_rpf_is_trivial", doubling_rpf_is_trivial),
        ("pm_normalization", pm_normalization),
        ("pm_branch_contraction", pm_branch_contraction),
        ("isometry_coupling_rate", isometry_coupling_rate),
        ("series_admissibility_boundary", series_admissibility_boundary),
        ("contraction_bounds", contraction_bounds),
        ("grid_vs_word_sum", grid_vs_word_sum),
        ("decay_fit_recovers_rate", decay_fit_recovers_rate),
    ]
}

pub fn run() -> Vec<CheckResult> {
    checks()
        .into_iter()
        .map(|(name, check)| {
            let start = Instant::now();
            let outcome = std::panic::catch_unwind(check)
                .unwrap_or_else(|_| Err("check panicked".to_string()));
            let seconds = start.elapsed().as_secs_f64();
            let (passed, detail) = match outcome {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckResult {
                name,
                passed,
                detail,
                seconds,
            }
        })
        .collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

fn moduli() -> Result<Vec<ModulusSpec>, String> {
    Ok(vec![
        ModulusSpec::lipschitz(),
        ModulusSpec::new(0.5, 0.0).map_err(err)?,
        choose_r0(0.0, 2.0).map_err(err)?,
    ])
}

fn assignment_vs_brute_force() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for spec in moduli()? {
        for _ in 0..40 {
            let n = rng.gen_range(2..=6);
            let xs: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            let ys: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            let mu = DiscreteMeasure::uniform(&xs).map_err(err)?;
            let nu = DiscreteMeasure::uniform(&ys).map_err(err)?;
            let (w, _) = wasserstein(&mu, &nu, &spec).map_err(err)?;
            let m = 1.0 / n as f64;
            let bf = permutations(n)
                .iter()
                .map(|p| {
                    (0..n)
                        .map(|i| m * spec.eval(circle_dist(xs[i], ys[p[i]])))
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min);
            let rel = (w - bf).abs() / bf.max(f64::MIN_POSITIVE);
            worst = worst.max(rel);
            ensure(rel <= 8.0 * f64::EPSILON, || {
                format!("n={n}: solver {w} vs brute force {bf}")
            })?;
        }
    }
    Ok(format!("120 instances, worst relative gap {worst:.1e}"))
}

fn random_measure(rng: &mut ChaCha8Rng, atoms: usize) -> Result<DiscreteMeasure, String> {
    let raw: Vec<(f64, f64)> = (0..atoms)
        .map(|_| (rng.gen::<f64>(), rng.gen_range(0.05..1.0)))
        .collect();
    let total: f64 = raw.iter().map(|a| a.1).sum();
    DiscreteMeasure::new(raw.into_iter().map(|(x, m)| (x, m / total)).collect()).map_err(err)
}

fn wasserstein_metric_axioms() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for spec in moduli()? {
        for _ in 0..10 {
            let a = random_measure(&mut rng, 5)?;
            let b = random_measure(&mut rng, 6)?;
            let c = random_measure(&mut rng, 4)?;
            let w = |p: &DiscreteMeasure, q: &DiscreteMeasure| {
                wasserstein(p, q, &spec).map(|r| r.0).map_err(err)
            };
            let (ab, ba, bc, ac, aa) = (w(&a, &b)?, w(&b, &a)?, w(&b, &c)?, w(&a, &c)?, w(&a, &a)?);
            ensure(aa == 0.0, || format!("W(a, a) = {aa}"))?;
            ensure((ab - ba).abs() <= 1e-12, || format!("asymmetric: {ab} vs {ba}"))?;
            ensure(ac <= ab + bc + 1e-12, || {
                format!("triangle: {ac} > {ab} + {bc}")
            })?;
        }
    }
    Ok("30 triples per modulus".into())
}

fn modulus_concavity() -> Result<String, String> {
    for (alpha, beta) in [(1.0, 0.0), (0.2, 0.0), (0.5, 1.0), (0.0, 2.0), (0.3, 2.0)] {
        let spec = choose_r0(alpha, beta).map_err(err)?;
        let rs: Vec<f64> = (1..=500).map(|i| 0.5 * i as f64 / 500.0).collect();
        let vals: Vec<f64> = rs.iter().map(|&r| spec.eval(r)).collect();
        ensure(vals.windows(2).all(|w| w[1] >= w[0]), || {
            format!("ω not increasing for ({alpha}, {beta})")
        })?;
        ensure(
            vals.windows(3)
                .all(|w| w[0] + w[2] - 2.0 * w[1] <= 1e-12 * w[2].abs().max(1.0)),
            || format!("ω not concave for ({alpha}, {beta})"),
        )?;
    }
    Ok("5 moduli".into())
}

fn doubling_rpf_is_trivial() -> Result<String, String> {
    let map = MapModel::k_fold(2).map_err(err)?;
    let rpf = compute_rpf(&map, Arc::new(|_: f64| 0.0), &RpfSettings::default()).map_err(err)?;
    let h_err = rpf.h.values().iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    let ks = rpf.mu.ks_to_uniform();
    ensure((rpf.rho - 1.0).abs() <= 1e-10, || format!("rho = {}", rpf.rho))?;
    ensure(h_err <= 1e-8, || format!("h error {h_err}"))?;
    ensure(ks <= 1e-3, || format!("KS {ks}"))?;
    Ok(format!("|rho - 1| = {:.1e}, KS = {ks:.1e}", (rpf.rho - 1.0).abs()))
}

fn pm_normalization() -> Result<String, String> {
    let map = MapModel::pm(0.5).map_err(err)?;
    let rpf = compute_rpf(
        &map,
        Arc::new(|x: f64| 0.5 * (TAU * x).cos()),
        &RpfSettings::default(),
    )
    .map_err(err)?;
    ensure(rpf.residual <= 1e-8, || format!("residual {}", rpf.residual))?;
    ensure(rpf.normalization_residual <= 1e-7, || {
        format!("normalization residual {}", rpf.normalization_residual)
    })?;
    ensure(rpf.h.min() > 0.0, || "h not positive".into())?;
    ensure((rpf.mu.total_mass() - 1.0).abs() <= 1e-12, || "mu not a probability".into())?;
    Ok(format!("rho = {:.10}", rpf.rho))
}

fn pm_branch_contraction() -> Result<String, String> {
    let report = verify_branch_contraction(&MapModel::pm(0.5).map_err(err)?, 10_000, 5)
        .map_err(err)?;
    ensure(report.violations.is_empty(), || {
        format!("{} violations", report.violations.len())
    })?;
    Ok(format!("best ratio {:.4}", report.max_best_ratio))
}

fn isometry_coupling_rate() -> Result<String, String> {
    let rows: Vec<Vec<f64>> = (0..=16)
        .map(|i| {
            let y = i as f64 / 16.0;
            vec![y, y, y / 2.0]
        })
        .collect();
    let branches = CustomBranches::from_rows(&rows).map_err(err)?;
    let map = MapModel::custom(branches, 2.0, 1.0).map_err(err)?;
    let spec = ModulusSpec::lipschitz();
    for t in 0..=10 {
        let cost = coupling_cost(&map, 0.2, 0.45, t, &spec, CostMode::Exhaustive).map_err(err)?;
        let expect = 0.25 * 0.75_f64.powi(t as i32);
        ensure((cost.mean - expect).abs() <= 1e-10, || {
            format!("t={t}: {} vs {expect}", cost.mean)
        })?;
    }
    Ok("t ≤ 10".into())
}

fn series_admissibility_boundary() -> Result<String, String> {
    let c = MapModel::pm(0.5).map_err(err)?.contraction_fn();
    let grid: Vec<f64> = (1..=40).map(|j| 2f64.powf(-(j as f64) / 2.0)).collect();
    let target = ModulusSpec::new(0.2, 0.0).map_err(err)?;
    let cert = |gamma: f64| -> Result<FlatnessCertificate, String> {
        let pot = ModulusSpec::new(gamma, 0.0).map_err(err)?;
        flatness_series(&c, &pot, &target, &grid, 20_000).map_err(err)
    };
    let ok = cert(0.75)?;
    let bad = cert(0.3)?;
    ensure(ok.passed(), || format!("γ = 0.75 not certified: {:?}", ok.reason))?;
    ensure(bad.refuted, || "γ = 0.3 not refuted".into())?;
    Ok(format!("constant {:.3} at γ = 0.75", ok.constant))
}

fn contraction_bounds() -> Result<String, String> {
    let rs: Vec<f64> = (0..=12).map(|j| 2f64.powi(-j)).collect();
    let mut out = Vec::new();
    for (map, q) in [
        (MapModel::pm(0.5), 0.5),
        (MapModel::pm(1.0), 1.0),
        (MapModel::pm_log(0.5), 0.5),
    ] {
        let map = map.map_err(err)?;
        let c = map.contraction_fn();
        let form = c.form;
        let rep = contraction_bound_check(&c, form, &rs, 2000).map_err(err)?;
        ensure(rep.passed && rep.a > 0.0, || format!("q = {q}: a = {}", rep.a))?;
        out.push(format!("{:.3}", rep.a));
    }
    Ok(format!("a = {}", out.join(", ")))
}

fn grid_vs_word_sum() -> Result<String, String> {
    let map = MapModel::k_fold(3).map_err(err)?;
    let potential = |x: f64| 0.3 * (TAU * x).sin();
    let n = 4096;
    let op = TransferOperator::new(&map, &potential, n).map_err(err)?;
    let f = GridFunction::from_fn(n, |x| (TAU * 2.0 * x).cos() + x * (1.0 - x));
    let t = 4;
    let iterated = op.iterate(&f, t).map_err(err)?;
    let k = map.k as f64;
    let mut worst: f64 = 0.0;
    for i in [0usize, 700, 2048, 3001] {
        let x = f.node(i);
        let mut level = vec![(x, 0.0)];
        for _ in 0..t {
            level = level
                .iter()
                .flat_map(|&(y, s)| {
                    map.inverse_branches(y)
                        .into_iter()
                        .map(move |z| (z, s + potential(z)))
                })
                .collect();
        }
        let direct: f64 = level
            .iter()
            .map(|&(z, s)| s.exp() * f.interpolate(z))
            .sum::<f64>()
            / k.powi(t as i32);
        let gap = (direct - iterated.values()[i]).abs();
        worst = worst.max(gap);
    }
    ensure(worst <= 1e-6, || format!("gap {worst}"))?;
    Ok(format!("gap {worst:.1e}"))
}

fn decay_fit_recovers_rate() -> Result<String, String> {
    let rows: Vec<TraceRow> = (0..60)
        .map(|t| TraceRow {
            t,
            value: 0.4 * 0.7_f64.powi(t as i32),
            r: 0.4,
        })
        .collect();
    let trace = DecayTrace::new("synthetic", rows).map_err(err)?;
    let m = fit_decay(&trace, DecayFamily::Exponential, None).map_err(err)?;
    let DecayForm::Exponential { delta, .. } = m.form else {
        return Err("exponential form expected".into());
    };
    ensure((delta - 0.3).abs() <= 1e-9, || format!("delta = {delta}"))?;
    m.validate().map_err(err)?;
    Ok(format!("delta = {delta:.6}"))
}
