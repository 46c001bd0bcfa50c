//! One function per subcommand. Configuration is fully resolved before the
//! output directory is created, so a bad config leaves no artifacts.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use transfer_core::decay::{clip_at_floor, DecayTrace};
use transfer_core::transport::KantorovichReport;
use transfer_core::{
    compute_rpf, coupled_trajectory, coupling_cost, fit_decay, flatness_empirical, flatness_runs,
    flatness_series, kantorovich_check, measure_correlation_decay, measure_operator_decay,
    measure_wasserstein_decay, wasserstein, CostMode, DecayModel, FlatnessCertificate,
    GridFunction, MapModel, RpfData,
};

use crate::config::{
    CouplingModeConfig, ExperimentConfig, FitConfig, FlatnessConfig, FlatnessMethodConfig,
};
use crate::{CliError, Outcome, Output};

/// Sup-norm eigen-residual, normalization residual and mass tolerances
/// that a finished RPF computation must meet.
const EIGEN_RESIDUAL_MAX: f64 = 1e-8;
const NORMALIZATION_MAX: f64 = 1e-8;
const MASS_TOL: f64 = 1e-12;

#[derive(Serialize)]
struct RpfSummary {
    rho: f64,
    residual: f64,
    iterations: usize,
    normalization_residual: f64,
    h_min: f64,
    h_max: f64,
    fixed_point_iterations: usize,
    fixed_point_last_change: f64,
    mu_atoms: usize,
    mu_mass: f64,
    invariants: Vec<(String, bool)>,
    passed: bool,
}

fn rpf_summary(rpf: &RpfData) -> RpfSummary {
    let invariants = vec![
        ("eigen_residual".to_string(), rpf.residual <= EIGEN_RESIDUAL_MAX),
        ("h_positive".to_string(), rpf.h.min() > 0.0),
        (
            "normalization_residual".to_string(),
            rpf.normalization_residual <= NORMALIZATION_MAX,
        ),
        (
            "mu_mass".to_string(),
            (rpf.mu.total_mass() - 1.0).abs() <= MASS_TOL,
        ),
    ];
    let passed = invariants.iter().all(|(_, ok)| *ok);
    RpfSummary {
        rho: rpf.rho,
        residual: rpf.residual,
        iterations: rpf.iterations,
        normalization_residual: rpf.normalization_residual,
        h_min: rpf.h.min(),
        h_max: rpf.h.max(),
        fixed_point_iterations: rpf.fixed_point.iterations,
        fixed_point_last_change: rpf.fixed_point.trace.last().copied().unwrap_or(0.0),
        mu_atoms: rpf.mu.len(),
        mu_mass: rpf.mu.total_mass(),
        invariants,
        passed,
    }
}

fn write_grid_csv(path: &Path, header: &str, f: &GridFunction) -> Result<(), CliError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "x,{header}")?;
    for (i, v) in f.values().iter().enumerate() {
        writeln!(w, "{},{}", f.node(i), v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn rpf(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Outcome, CliError> {
    let map = cfg.map()?;
    let potential = cfg.potential(&map)?;
    let settings = cfg.rpf_settings()?;
    let rpf = compute_rpf(&map, potential, &settings)?;
    let summary = rpf_summary(&rpf);
    let out = Output::create(out_dir)?;
    write_grid_csv(&out.path("h.csv"), "h", &rpf.h)?;
    rpf.mu.save_csv(out.path("mu.csv")).map_err(CliError::from)?;
    rpf.nu.save_csv(out.path("nu.csv")).map_err(CliError::from)?;
    let passed = summary.passed;
    eprintln!(
        "rho = {:.12}  residual = {:.3e}  normalization = {:.3e}",
        summary.rho, summary.residual, summary.normalization_residual
    );
    out.json("rpf.json", "rpf", cfg, summary)?;
    if passed {
        Ok(Outcome::Passed)
    } else {
        Err(CliError::Numerical("RPF invariants failed, see rpf.json".into()))
    }
}

fn default_r_grid() -> Vec<f64> {
    (1..=40).map(|j| 2f64.powf(-(j as f64) / 2.0)).collect()
}

fn certificate(
    cfg: &ExperimentConfig,
    fc: &FlatnessConfig,
    map: &MapModel,
) -> Result<FlatnessCertificate, CliError> {
    Ok(match fc.method {
        FlatnessMethodConfig::Series => {
            let pot = cfg.potential_modulus()?;
            let target = cfg.observable_modulus()?;
            let grid = fc.r_grid.clone().unwrap_or_else(default_r_grid);
            flatness_series(&map.contraction_fn(), &pot, &target, &grid, fc.n_max)?
        }
        FlatnessMethodConfig::Empirical => {
            let potential = cfg.potential(map)?;
            let target = cfg.observable_modulus()?;
            let seed = cfg.seed()?;
            flatness_empirical(
                map,
                &*potential,
                &target,
                cfg.t_max,
                fc.pair_samples,
                fc.word_samples,
                seed,
            )?
        }
        FlatnessMethodConfig::Runs => {
            let potential = cfg.potential(map)?;
            let alpha = fc
                .alpha
                .ok_or_else(|| CliError::Config("runs method needs `flatness.alpha`".into()))?;
            let seed = cfg.seed()?;
            flatness_runs(
                map,
                &*potential,
                alpha,
                cfg.t_max,
                fc.pair_samples,
                seed,
                fc.derivative_bound.map(Into::into),
            )?
        }
    })
}

pub fn flatness(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Outcome, CliError> {
    let map = cfg.map()?;
    let fc = cfg
        .flatness
        .as_ref()
        .ok_or_else(|| CliError::Config("missing `flatness` section".into()))?;
    let cert = certificate(cfg, fc, &map)?;
    let out = Output::create(out_dir)?;
    let outcome = Outcome::from_pass(cert.passed());
    eprintln!(
        "flatness ({:?}): constant = {:.6e}  {}",
        cert.method,
        cert.constant,
        if cert.passed() { "certified" } else { "refuted" }
    );
    out.json("certificate.json", "flatness", cfg, &cert)?;
    Ok(outcome)
}

#[derive(Serialize)]
pub struct FitOutcome {
    pub trace: String,
    pub window: Option<(usize, usize)>,
    pub model: Option<DecayModel>,
    pub error: Option<String>,
    pub passed: bool,
}

fn fit_trace(name: &str, trace: &DecayTrace, fit: &FitConfig) -> FitOutcome {
    let window = match (fit.window, fit.clip_at_floor) {
        (Some((lo, hi)), true) => clip_at_floor(trace, lo, hi),
        (w, _) => w,
    };
    let clipped_away = fit.clip_at_floor && fit.window.is_some() && window.is_none();
    let result = if clipped_away {
        Err("trace is at the numerical floor for the whole window".to_string())
    } else {
        fit_decay(trace, fit.family, window).map_err(|e| e.to_string())
    };
    match result {
        Ok(model) => {
            let residual_ok = fit.max_residual.is_none_or(|m| model.fit_residual < m);
            let slope_ok = fit
                .max_slope
                .is_none_or(|m| model.slope.is_some_and(|s| s <= m));
            FitOutcome {
                trace: name.to_string(),
                window,
                passed: residual_ok && slope_ok,
                model: Some(model),
                error: None,
            }
        }
        Err(e) => FitOutcome {
            trace: name.to_string(),
            window,
            model: None,
            error: Some(e),
            passed: false,
        },
    }
}

#[derive(Serialize)]
struct WassersteinDecaySummary {
    separations: Vec<f64>,
    fits: Vec<FitOutcome>,
    half_lives: Vec<Option<f64>>,
    half_life_ratio: Option<f64>,
    passed: bool,
}

#[derive(Serialize, Default)]
struct DecaySummary {
    rho: f64,
    operator: Option<FitOutcome>,
    wasserstein: Option<WassersteinDecaySummary>,
    correlation: Option<FitOutcome>,
    passed: bool,
}

/// Steps for a factor-2 reduction under a fitted exponential slope.
fn half_life(model: &DecayModel) -> Option<f64> {
    model
        .slope
        .filter(|s| *s < 0.0)
        .map(|s| std::f64::consts::LN_2 / -s)
}

pub fn decay(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Outcome, CliError> {
    let map = cfg.map()?;
    let potential = cfg.potential(&map)?;
    let settings = cfg.rpf_settings()?;
    let dc = cfg
        .decay
        .as_ref()
        .ok_or_else(|| CliError::Config("missing `decay` section".into()))?;
    if dc.operator.is_none() && dc.wasserstein.is_none() && dc.correlation.is_none() {
        return Err(CliError::Config("`decay` section lists no measurement".into()));
    }
    let operator_f = match &dc.operator {
        Some(o) => Some(o.observable.grid(&map, cfg.grid)?),
        None => None,
    };
    let correlation_fg = match &dc.correlation {
        Some(c) => Some((c.f.grid(&map, cfg.grid)?, c.g.grid(&map, cfg.grid)?)),
        None => None,
    };
    let spec = match (&dc.wasserstein, &dc.operator) {
        (Some(_), _) | (_, Some(crate::config::OperatorDecayConfig { holder_trace: true, .. })) => {
            Some(cfg.observable_modulus()?)
        }
        _ => None,
    };
    if let Some(w) = &dc.wasserstein {
        if w.separations.is_empty() || w.separations.iter().any(|s| !(*s > 0.0 && *s <= 0.5)) {
            return Err(CliError::Config("separations must lie in (0, 0.5]".into()));
        }
    }

    let rpf = compute_rpf(&map, potential, &settings)?;
    let out = Output::create(out_dir)?;
    let mut summary = DecaySummary {
        rho: rpf.rho,
        passed: true,
        ..Default::default()
    };

    if let (Some(o), Some(f)) = (&dc.operator, &operator_f) {
        let t_max = o.t_max.unwrap_or(cfg.t_max);
        let holder = if o.holder_trace { spec.as_ref() } else { None };
        let (trace, hol) = measure_operator_decay(&map, &rpf, f, t_max, holder)?;
        trace.save_csv(out.path("operator_decay.csv")).map_err(CliError::from)?;
        if let Some(h) = hol {
            h.save_csv(out.path("operator_holder.csv")).map_err(CliError::from)?;
        }
        let fit = fit_trace("operator_decay.csv", &trace, &o.fit);
        summary.passed &= fit.passed;
        summary.operator = Some(fit);
    }

    if let (Some(w), Some(spec)) = (&dc.wasserstein, &spec) {
        let t_max = w.t_max.unwrap_or(cfg.t_max);
        let merge = w.merge_resolution.unwrap_or(settings.merge_resolution);
        let traces: Vec<transfer_core::Result<DecayTrace>> = w
            .separations
            .par_iter()
            .map(|s| measure_wasserstein_decay(&map, &rpf.normalized, w.x, w.x + s, spec, t_max, merge))
            .collect();
        let mut fits = Vec::new();
        for (i, tr) in traces.into_iter().enumerate() {
            let tr = tr?;
            let name = format!("wasserstein_{i}.csv");
            tr.save_csv(out.path(&name)).map_err(CliError::from)?;
            fits.push(fit_trace(&name, &tr, &w.fit));
        }
        let half_lives: Vec<Option<f64>> =
            fits.iter().map(|f| f.model.as_ref().and_then(half_life)).collect();
        let known: Vec<f64> = half_lives.iter().flatten().copied().collect();
        let half_life_ratio = (known.len() == half_lives.len()).then(|| {
            let max = known.iter().copied().fold(0.0, f64::max);
            let min = known.iter().copied().fold(f64::INFINITY, f64::min);
            max / min
        });
        let ratio_ok = match w.max_half_life_ratio {
            Some(m) => half_life_ratio.is_some_and(|r| r <= m),
            None => true,
        };
        let passed = ratio_ok && fits.iter().all(|f| f.passed);
        summary.passed &= passed;
        summary.wasserstein = Some(WassersteinDecaySummary {
            separations: w.separations.clone(),
            fits,
            half_lives,
            half_life_ratio,
            passed,
        });
    }

    if let (Some(c), Some((f, g))) = (&dc.correlation, &correlation_fg) {
        let t_max = c.t_max.unwrap_or(cfg.t_max);
        let trace = measure_correlation_decay(&map, &rpf, f, g, t_max)?;
        trace.save_csv(out.path("correlation_decay.csv")).map_err(CliError::from)?;
        let fit = fit_trace("correlation_decay.csv", &trace, &c.fit);
        summary.passed &= fit.passed;
        summary.correlation = Some(fit);
    }

    let outcome = Outcome::from_pass(summary.passed);
    eprintln!(
        "decay: {}",
        if summary.passed { "all fits meet their thresholds" } else { "thresholds not met" }
    );
    out.json("decay.json", "decay", cfg, &summary)?;
    Ok(outcome)
}

#[derive(Serialize)]
struct WassersteinSummary {
    distance: f64,
    plan_entries: usize,
    marginal_error: f64,
    kantorovich: Option<KantorovichReport>,
}

pub fn wasserstein_cmd(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Outcome, CliError> {
    let map = cfg.map()?;
    let wc = cfg
        .wasserstein
        .as_ref()
        .ok_or_else(|| CliError::Config("missing `wasserstein` section".into()))?;
    let spec = cfg.observable_modulus()?;
    let mu = wc.mu.resolve()?;
    let nu = wc.nu.resolve()?;
    let probes: Vec<GridFunction> = wc
        .probes
        .iter()
        .map(|p| p.grid(&map, cfg.grid))
        .collect::<Result<_, _>>()?;
    let (distance, plan) = wasserstein(&mu, &nu, &spec)?;
    let kantorovich = if probes.is_empty() {
        None
    } else {
        Some(kantorovich_check(&mu, &nu, &spec, &probes)?)
    };
    let out = Output::create(out_dir)?;
    let f = std::io::BufWriter::new(std::fs::File::create(out.path("plan.csv"))?);
    plan.write_csv(f).map_err(CliError::from)?;
    let passed = kantorovich.as_ref().is_none_or(|k| k.passed);
    eprintln!("W = {distance:.12e}");
    out.json(
        "wasserstein.json",
        "wasserstein",
        cfg,
        WassersteinSummary {
            distance,
            plan_entries: plan.entries.len(),
            marginal_error: plan.marginal_error(&mu, &nu),
            kantorovich,
        },
    )?;
    Ok(Outcome::from_pass(passed))
}

#[derive(Serialize)]
struct CouplingSummary {
    mean: f64,
    std_error: f64,
    words: u128,
    mode: CouplingModeConfig,
}

pub fn coupling(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Outcome, CliError> {
    let map = cfg.map()?;
    let cc = cfg
        .coupling
        .as_ref()
        .ok_or_else(|| CliError::Config("missing `coupling` section".into()))?;
    let spec = cfg.observable_modulus()?;
    let mode = match cc.mode {
        CouplingModeConfig::Exhaustive => CostMode::Exhaustive,
        CouplingModeConfig::Sampled => CostMode::Sampled {
            words: cc
                .words
                .ok_or_else(|| CliError::Config("sampled mode needs `coupling.words`".into()))?,
            seed: cfg.seed()?,
        },
    };
    let potential = match &cfg.potential {
        Some(p) => Some(p.build(&map, cfg.grid)?),
        None => None,
    };
    let cost = coupling_cost(&map, cc.x, cc.y, cc.t, &spec, mode)?;
    let trajectory = match &cc.trajectory_word {
        Some(word) => Some(coupled_trajectory(&map, cc.x, cc.y, word, potential.as_deref())?),
        None => None,
    };
    let out = Output::create(out_dir)?;
    if let Some(tr) = trajectory {
        tr.save_csv(out.path("trajectory.csv")).map_err(CliError::from)?;
    }
    eprintln!("coupling cost = {:.12e} (± {:.2e})", cost.mean, cost.std_error);
    out.json(
        "coupling.json",
        "coupling",
        cfg,
        CouplingSummary {
            mean: cost.mean,
            std_error: cost.std_error,
            words: cost.words,
            mode: cc.mode,
        },
    )?;
    Ok(Outcome::Passed)
}
