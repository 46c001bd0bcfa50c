use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use transfer_core::*;

/// Two-branch kernel: branch 0 is the identity, branch 1 halves.
fn isometry_kernel(k: usize) -> MapModel {
    let rows: Vec<Vec<f64>> = (0..=16)
        .map(|i| {
            let y = i as f64 / 16.0;
            let mut row = vec![y];
            row.extend(std::iter::repeat_n(y, k - 1));
            row.push(y / 2.0);
            row
        })
        .collect();
    MapModel::custom(CustomBranches::from_rows(&rows).unwrap(), 2.0, 1.0).unwrap()
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[test]
fn isometry_kernel_decays_at_the_averaged_rate() {
    let map = isometry_kernel(2);
    let (x, y) = (0.2, 0.45);
    for t in 0..=12 {
        let cost = coupling_cost(
            &map,
            x,
            y,
            t,
            &ModulusSpec::lipschitz(),
            CostMode::Exhaustive,
        )
        .unwrap();
        let expect = 0.25 * 0.75_f64.powi(t as i32);
        assert!((cost.mean - expect).abs() < 1e-10, "t={t}");
    }
}

#[test]
fn word_counts_follow_the_binomial_law() {
    for k in [2usize, 3] {
        let map = isometry_kernel(k);
        let (x, y) = (0.3, 0.4);
        let t = 6;
        let mut counts = vec![0u64; t + 1];
        let total = (k as u64).pow(t as u32);
        for w in 0..total {
            let word: Vec<usize> = (0..t)
                .map(|s| (w / (k as u64).pow(s as u32)) as usize % k)
                .collect();
            let tr = coupled_trajectory(&map, x, y, &word, None).unwrap();
            let hits = word.iter().filter(|&&j| j == k - 1).count();
            counts[hits] += 1;
            let d = circle_dist(*tr.xs.last().unwrap(), *tr.ys.last().unwrap());
            assert!((d - 0.1 / 2f64.powi(hits as i32)).abs() < 1e-15);
        }
        let mut sum = 0.0;
        for (n, &c) in counts.iter().enumerate() {
            let expect = binomial(t as u64, n as u64) * ((k - 1) as f64).powi((t - n) as i32);
            assert_eq!(c as f64, expect);
            sum += expect * 0.1 / 2f64.powi(n as i32);
        }
        let binomial_sum = sum / total as f64;
        let cost = coupling_cost(
            &map,
            x,
            y,
            t,
            &ModulusSpec::lipschitz(),
            CostMode::Exhaustive,
        )
        .unwrap();
        assert!((cost.mean - binomial_sum).abs() < 1e-15);
        let lambda_prime = k as f64 * 2.0 / (k as f64 * 2.0 + 1.0 - 2.0);
        assert!((binomial_sum - 0.1 * lambda_prime.powi(-(t as i32))).abs() < 1e-15);
    }
}

#[test]
fn sampled_cost_agrees_with_exhaustive() {
    let spec = ModulusSpec::new(0.5, 0.0).unwrap();
    for (map, t) in [
        (MapModel::k_fold(3).unwrap(), 8),
        (MapModel::pm(0.5).unwrap(), 10),
    ] {
        for (x, y) in [(0.1, 0.35), (0.05, 0.93)] {
            let exact = coupling_cost(&map, x, y, t, &spec, CostMode::Exhaustive).unwrap();
            let est = coupling_cost(
                &map,
                x,
                y,
                t,
                &spec,
                CostMode::Sampled {
                    words: 20_000,
                    seed: 3,
                },
            )
            .unwrap();
            let tol = 3.0 * est.std_error + 1e-14;
            assert!(
                (exact.mean - est.mean).abs() <= tol,
                "{} vs {}",
                exact.mean,
                est.mean
            );
        }
    }
}

#[test]
fn exhaustive_cost_is_bit_stable() {
    let map = MapModel::pm(1.0).unwrap();
    let spec = ModulusSpec::new(0.3, 0.0).unwrap();
    let a = coupling_cost(&map, 0.1, 0.8, 14, &spec, CostMode::Exhaustive).unwrap();
    let b = coupling_cost(&map, 0.1, 0.8, 14, &spec, CostMode::Exhaustive).unwrap();
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
}

#[test]
fn coupled_steps_follow_the_contraction_function() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for map in [
        MapModel::pm(0.5).unwrap(),
        MapModel::pm(1.5).unwrap(),
        MapModel::pm_log(1.0).unwrap(),
        MapModel::k_fold(3).unwrap(),
    ] {
        let c = map.contraction_fn();
        let linear = matches!(map.kind, MapKind::KFold { .. });
        for _ in 0..200 {
            let (x, y) = (rng.gen::<f64>(), rng.gen::<f64>());
            let word: Vec<usize> = (0..40).map(|_| rng.gen_range(0..map.k)).collect();
            let tr = coupled_trajectory(&map, x, y, &word, None).unwrap();
            let mut bound = circle_dist(x, y);
            let mut prev = bound;
            for (a, b) in tr.xs.iter().zip(&tr.ys) {
                bound = c.eval(bound);
                let d = circle_dist(*a, *b);
                assert!(d <= bound + 1e-10, "{:?} d={d} bound={bound}", map.kind);
                if linear {
                    assert!(d <= prev + 1e-15);
                }
                prev = d;
                assert!(map
                    .inverse_branches(map.forward(*a))
                    .iter()
                    .any(|p| circle_dist(*p, *a) < 1e-9));
            }
        }
    }
}

#[test]
fn half_contraction_is_available_on_pm() {
    let report = verify_branch_contraction(&MapModel::pm(0.5).unwrap(), 10_000, 5).unwrap();
    assert!(report.violations.is_empty());
    assert!(report.max_best_ratio <= 0.5 + 1e-6);
}

#[test]
fn series_certificates_for_pm_half() {
    let map = MapModel::pm(0.5).unwrap();
    let c = map.contraction_fn();
    let grid: Vec<f64> = (1..=40).map(|j| 2f64.powf(-(j as f64) / 2.0)).collect();
    let target = ModulusSpec::new(0.2, 0.0).unwrap();
    let ok = flatness_series(
        &c,
        &ModulusSpec::new(0.75, 0.0).unwrap(),
        &target,
        &grid,
        20_000,
    )
    .unwrap();
    assert!(ok.passed(), "{:?}", ok.reason);
    assert!(ok.constant.is_finite() && ok.constant > 0.0);
    // S(r) / r^{γ - q} stays bounded
    if let Evidence::Series(rows) = &ok.evidence {
        let scaled: Vec<f64> = rows
            .iter()
            .map(|r| (r.partial_sum + r.tail) / r.r.powf(0.25))
            .collect();
        let max = scaled.iter().copied().fold(0.0, f64::max);
        let min = scaled.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(max / min < 20.0, "{min} {max}");
    } else {
        panic!("series evidence expected");
    }
    let bad = flatness_series(
        &c,
        &ModulusSpec::new(0.3, 0.0).unwrap(),
        &target,
        &grid,
        20_000,
    )
    .unwrap();
    assert!(bad.refuted);
    assert!(!bad.passed());
}

#[test]
fn divergent_partial_sums_beat_a_harmonic_lower_bound() {
    // for γ < q the terms behave like n^{-γ/q}, so partial sums grow
    let map = MapModel::pm(0.5).unwrap();
    let c = map.contraction_fn();
    let pot = ModulusSpec::new(0.3, 0.0).unwrap();
    let partial = |n: usize| {
        let mut s = 0.1;
        (0..n)
            .map(|_| {
                s = c.eval(s);
                pot.eval(s)
            })
            .sum::<f64>()
    };
    let (a, b) = (partial(1000), partial(100_000));
    assert!(b > 5.0 * a, "{a} {b}");
}

#[test]
fn empirical_flatness_examples() {
    let map = MapModel::k_fold(2).unwrap();
    let lip = ModulusSpec::lipschitz();
    let zero = |_: f64| 2.5;
    let cert = flatness_empirical(&map, &zero, &lip, 30, 50, 20, 1).unwrap();
    assert_eq!(cert.constant, 0.0);
    assert!(cert.passed());

    let a = |x: f64| 0.3 * (TAU * x).sin();
    let hol = holder_constant(&GridFunction::from_fn(4096, a), &lip);
    let cert = flatness_empirical(&map, &a, &lip, 30, 200, 40, 2).unwrap();
    assert!(cert.passed());
    assert!(
        cert.constant <= 2.0 * hol,
        "{} vs {}",
        cert.constant,
        2.0 * hol
    );
    let series = flatness_series(
        &map.contraction_fn(),
        &lip,
        &lip,
        &[1.0, 0.5, 0.1, 0.01],
        200,
    )
    .unwrap();
    assert!(cert.constant <= series.constant * hol + 1e-12);

    let pm = MapModel::pm(1.5).unwrap();
    let smooth = |x: f64| ((PI * x).sin() / PI).powf(2.7);
    let cert = flatness_empirical(&pm, &smooth, &lip, 50, 200, 20, 3).unwrap();
    assert!(cert.passed(), "{:?}", cert.evidence);
}

#[test]
fn running_sup_profile_is_monotone() {
    let pm = MapModel::pm(1.5).unwrap();
    let rough = |x: f64| circle_dist(x, 0.0).sqrt();
    let cert = flatness_empirical(&pm, &rough, &ModulusSpec::lipschitz(), 400, 100, 10, 4).unwrap();
    assert!(cert.constant.is_finite());
    if let Evidence::Sup(rows) = &cert.evidence {
        assert!(rows.windows(2).all(|w| w[1].sup_ratio >= w[0].sup_ratio));
    }
}

fn flattened(eps: f64) -> impl Fn(f64) -> f64 + Send + Sync + Clone {
    move |x: f64| {
        let d = circle_dist(x, 0.0);
        let b = |d: f64| 0.3 * d.sqrt();
        if d <= eps / 2.0 {
            0.0
        } else if d >= eps {
            b(d)
        } else {
            b(eps) * (d - eps / 2.0) / (eps / 2.0)
        }
    }
}

#[test]
fn runs_certificate_for_constant_near_zero() {
    let map = MapModel::pm(1.0).unwrap();
    let a = flattened(0.1);
    let cert = flatness_runs(&map, &a, 0.5, 100, 500, 7, None).unwrap();
    assert!(cert.passed());
    assert_eq!(cert.detail("run_constant"), Some(0.0));
    let hol = cert.detail("holder_constant").unwrap();
    let geometric: f64 = (0..2000)
        .map(|j| map.neutral_lambda.powf(-0.5 * j as f64))
        .sum();
    assert!((cert.constant - hol * geometric).abs() < 1e-9 * cert.constant);

    let rough = |x: f64| 0.3 * circle_dist(x, 0.0).sqrt();
    assert!(matches!(
        flatness_runs(&map, &rough, 0.5, 10, 10, 1, None),
        Err(Error::NeutralPrecondition(_))
    ));
}

#[test]
fn runs_certificate_with_derivative_bound() {
    let map = MapModel::pm(1.5).unwrap();
    let a = |x: f64| ((PI * x).sin() / PI).powf(2.7);
    let bound = DerivativeBound {
        constant: 2.7,
        exponent: 1.7,
    };
    let cert = flatness_runs(&map, &a, 0.5, 200, 1000, 9, Some(bound)).unwrap();
    assert!(cert.passed(), "{:?}", cert.reason);

    // majorant: |A(x_n) - A(y_n)| ≤ C |x_n|^γ d_n with both orbits bounded
    // by the closed-form iterate bound
    let c = map.contraction_fn();
    let form = ContractionForm::Power {
        q: 1.5,
        d: 2f64.powf(1.5),
    };
    let rs: Vec<f64> = (1..=30)
        .map(|j| map.neutral_radius * 2f64.powi(-j))
        .collect();
    let report = contraction_bound_check(&c, form, &rs, 10_000).unwrap();
    let (a_tel, q, r_n) = (report.a, 1.5, map.neutral_radius);
    let oracle = rs
        .iter()
        .map(|&r| {
            let sum: f64 = (1..200_000)
                .map(|n| {
                    let u = (a_tel * (n - 1) as f64 + r_n.powf(-q)).powf(-1.0 / q);
                    let v = (a_tel * n as f64 + r.powf(-q)).powf(-1.0 / q);
                    2.7 * u.powf(1.7) * v
                })
                .sum();
            sum / r.powf(0.5)
        })
        .fold(0.0, f64::max);
    let run = cert.detail("run_constant").unwrap();
    assert!(run <= oracle, "{run} > {oracle}");
}

#[test]
fn normalized_potential_stays_flat() {
    let map = MapModel::k_fold(2).unwrap();
    let a: Potential = Arc::new(|x: f64| 0.5 * (TAU * x).cos());
    let lip = ModulusSpec::lipschitz();
    let ca = flatness_empirical(&map, &*a, &lip, 40, 200, 20, 11).unwrap();
    let rpf = compute_rpf(&map, Arc::clone(&a), &RpfSettings::default()).unwrap();
    let ct = flatness_empirical(&map, &rpf.normalized, &lip, 40, 200, 20, 11).unwrap();
    let hol_log_h = holder_constant(&rpf.h.map(f64::ln), &lip);
    assert!(ca.passed() && ct.passed());
    assert!(
        ct.constant <= ca.constant + 2.0 * hol_log_h + 1e-6,
        "{} {} {}",
        ct.constant,
        ca.constant,
        hol_log_h
    );
}
