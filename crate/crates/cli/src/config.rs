//! Experiment configuration: a strict JSON schema and its resolution into
//! library objects.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use transfer_core::decay::DecayFamily;
use transfer_core::{
    circle_dist, CustomBranches, DerivativeBound, DiscreteMeasure, GridFunction, MapModel,
    ModulusSpec, Potential, RpfSettings,
};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub map: MapConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neutral_lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<FunctionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential_modulus: Option<ModulusConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable_modulus: Option<ModulusConfig>,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_t_max")]
    pub t_max: usize,
    /// Not echoed into artifacts, so runs differing only in their output
    /// location produce identical files.
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flatness: Option<FlatnessConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecayConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wasserstein: Option<WassersteinConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingConfig>,
}

fn default_grid() -> usize {
    transfer_core::DEFAULT_GRID
}

fn default_t_max() -> usize {
    60
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapConfig {
    Pm {
        q: f64,
    },
    PmLog {
        q: f64,
    },
    KFold {
        k: usize,
    },
    Custom {
        table: PathBuf,
        lambda: f64,
        #[serde(default = "one")]
        contraction_lambda: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulusConfig {
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
}

impl ModulusConfig {
    pub fn resolve(&self) -> Result<ModulusSpec, CliError> {
        let spec = match self.r0 {
            Some(r0) => ModulusSpec::with_r0(self.alpha, self.beta, r0),
            None => ModulusSpec::new(self.alpha, self.beta),
        };
        spec.map_err(|e| CliError::Config(format!("modulus: {e}")))
    }
}

/// Potentials and observables by formula.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "formula", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionConfig {
    Zero {},
    Constant {
        value: f64,
    },
    /// `amplitude · cos(2π frequency x)`.
    Cosine {
        amplitude: f64,
        #[serde(default = "one_u32")]
        frequency: u32,
    },
    /// `log ρ + log g(Tx) − log g(x)` with `g = offset + amplitude cos 2πx`.
    Coboundary {
        rho: f64,
        offset: f64,
        amplitude: f64,
    },
    /// `amplitude · (sin(πx)/π)^exponent`, smooth away from 0 and of
    /// order `d(x,0)^exponent` near it.
    NeutralPower {
        amplitude: f64,
        exponent: f64,
    },
    /// `amplitude · d(x, center)^exponent`.
    DistancePower {
        amplitude: f64,
        exponent: f64,
        #[serde(default)]
        center: f64,
    },
    /// `distance_power` around 0, set to 0 on `d ≤ ε/2` and interpolated
    /// linearly on `[ε/2, ε]`.
    Flattened {
        amplitude: f64,
        exponent: f64,
        epsilon: f64,
    },
    /// `ω(d(x, center))` for a modulus `ω`.
    ModulusOfDistance {
        alpha: f64,
        #[serde(default)]
        beta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r0: Option<f64>,
        #[serde(default)]
        center: f64,
    },
    /// Grid values from a CSV file, one value per row or `(x, value)` rows.
    Csv {
        path: PathBuf,
    },
}

fn one_u32() -> u32 {
    1
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigen: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub merge_resolution: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_point: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_point_max_iter: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlatnessMethodConfig {
    Series,
    Runs,
    Empirical,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlatnessConfig {
    pub method: FlatnessMethodConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_grid: Option<Vec<f64>>,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_pairs")]
    pub pair_samples: usize,
    #[serde(default = "default_words")]
    pub word_samples: usize,
    /// Hölder exponent for the runs method.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivative_bound: Option<DerivativeBoundConfig>,
}

fn default_n_max() -> usize {
    20_000
}

fn default_pairs() -> usize {
    200
}

fn default_words() -> usize {
    20
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivativeBoundConfig {
    pub constant: f64,
    pub exponent: f64,
}

impl From<DerivativeBoundConfig> for DerivativeBound {
    fn from(d: DerivativeBoundConfig) -> Self {
        DerivativeBound {
            constant: d.constant,
            exponent: d.exponent,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub family: DecayFamily,
    /// Fit window `[t_min, t_max]`; the automatic window when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<(usize, usize)>,
    /// Cut the window before the first value under the numerical floor
    /// instead of rejecting it.
    #[serde(default)]
    pub clip_at_floor: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_residual: Option<f64>,
    /// Upper bound on the fitted slope (e.g. a log-log decay degree).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_slope: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorDecayConfig {
    pub observable: FunctionConfig,
    pub fit: FitConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<usize>,
    /// Also record the observable-modulus Hölder constant of each iterate
    /// (quadratic in the grid size per step).
    #[serde(default)]
    pub holder_trace: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WassersteinDecayConfig {
    #[serde(default = "default_base")]
    pub x: f64,
    pub separations: Vec<f64>,
    pub fit: FitConfig,
    /// Largest allowed ratio between fitted half-lives across separations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_half_life_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub merge_resolution: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<usize>,
}

fn default_base() -> f64 {
    0.37
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationDecayConfig {
    pub f: FunctionConfig,
    pub g: FunctionConfig,
    pub fit: FitConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<OperatorDecayConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wasserstein: Option<WassersteinDecayConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation: Option<CorrelationDecayConfig>,
}

/// A measure given inline as `[[position, mass], …]` or as a CSV path.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeasureConfig {
    Atoms(Vec<(f64, f64)>),
    Csv { csv: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WassersteinConfig {
    pub mu: MeasureConfig,
    pub nu: MeasureConfig,
    /// Probe functions for a Kantorovich check.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<FunctionConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingModeConfig {
    Exhaustive,
    Sampled,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub x: f64,
    pub y: f64,
    pub t: usize,
    pub mode: CouplingModeConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub words: Option<usize>,
    /// Letters `0..k` of a word whose coupled trajectory is exported.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_word: Option<Vec<usize>>,
}

fn config_err(what: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{what}: {e}"))
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(&format!("reading {}", path.display()), e))?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| config_err("parsing config", e))?;
        // relative paths inside the config are relative to the config file
        if let Some(dir) = path.parent() {
            cfg.rebase_paths(dir);
        }
        Ok(cfg)
    }

    fn rebase_paths(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        if let MapConfig::Custom { table, .. } = &mut self.map {
            fix(table);
        }
        if let Some(out) = &mut self.output_dir {
            fix(out);
        }
        let mut funcs: Vec<&mut FunctionConfig> = Vec::new();
        if let Some(p) = &mut self.potential {
            funcs.push(p);
        }
        if let Some(d) = &mut self.decay {
            if let Some(o) = &mut d.operator {
                funcs.push(&mut o.observable);
            }
            if let Some(c) = &mut d.correlation {
                funcs.push(&mut c.f);
                funcs.push(&mut c.g);
            }
        }
        if let Some(w) = &mut self.wasserstein {
            for m in [&mut w.mu, &mut w.nu] {
                if let MeasureConfig::Csv { csv } = m {
                    fix(csv);
                }
            }
            funcs.extend(w.probes.iter_mut());
        }
        for f in funcs {
            if let FunctionConfig::Csv { path } = f {
                fix(path);
            }
        }
    }

    pub fn map(&self) -> Result<MapModel, CliError> {
        let map = match &self.map {
            MapConfig::Pm { q } => MapModel::pm(*q),
            MapConfig::PmLog { q } => MapModel::pm_log(*q),
            MapConfig::KFold { k } => MapModel::k_fold(*k),
            MapConfig::Custom {
                table,
                lambda,
                contraction_lambda,
            } => CustomBranches::from_csv(table)
                .and_then(|b| MapModel::custom(b, *lambda, *contraction_lambda)),
        }
        .map_err(|e| config_err("map", e))?;
        match self.neutral_lambda {
            Some(l) => map.with_neutral_lambda(l).map_err(|e| config_err("neutral_lambda", e)),
            None => Ok(map),
        }
    }

    pub fn potential(&self, map: &MapModel) -> Result<Potential, CliError> {
        let p = self
            .potential
            .as_ref()
            .ok_or_else(|| CliError::Config("missing `potential`".into()))?;
        p.build(map, self.grid)
    }

    pub fn potential_modulus(&self) -> Result<ModulusSpec, CliError> {
        self.potential_modulus
            .ok_or_else(|| CliError::Config("missing `potential_modulus`".into()))?
            .resolve()
    }

    pub fn observable_modulus(&self) -> Result<ModulusSpec, CliError> {
        self.observable_modulus
            .ok_or_else(|| CliError::Config("missing `observable_modulus`".into()))?
            .resolve()
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Config("a seed is required for sampled computations".into()))
    }

    pub fn rpf_settings(&self) -> Result<RpfSettings, CliError> {
        if !self.grid.is_power_of_two() || self.grid < 16 {
            return Err(CliError::Config(format!(
                "grid must be a power of two >= 16, got {}",
                self.grid
            )));
        }
        let d = RpfSettings::default();
        let t = self.tolerances;
        let s = RpfSettings {
            grid: self.grid,
            tol: t.eigen.unwrap_or(d.tol),
            max_iter: t.max_iter.unwrap_or(d.max_iter),
            merge_resolution: t.merge_resolution.unwrap_or(1.0 / self.grid as f64),
            fixed_point_tol: t.fixed_point.unwrap_or(d.fixed_point_tol),
            fixed_point_max_iter: t.fixed_point_max_iter.unwrap_or(d.fixed_point_max_iter),
        };
        let positive = [s.tol, s.merge_resolution, s.fixed_point_tol];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(CliError::Config("tolerances must be positive".into()));
        }
        Ok(s)
    }
}

fn flattened(amplitude: f64, exponent: f64, eps: f64) -> impl Fn(f64) -> f64 + Send + Sync {
    move |x: f64| {
        let d = circle_dist(x, 0.0);
        let base = |d: f64| amplitude * d.powf(exponent);
        if d <= eps / 2.0 {
            0.0
        } else if d >= eps {
            base(d)
        } else {
            base(eps) * (d - eps / 2.0) / (eps / 2.0)
        }
    }
}

fn read_grid_csv(path: &Path) -> Result<GridFunction, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(&path.display().to_string(), e))?;
    let mut values = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let last = line.rsplit(',').next().unwrap_or(line).trim();
        match last.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if values.is_empty() => continue,
            Err(e) => return Err(config_err(&path.display().to_string(), e)),
        }
    }
    GridFunction::new(values).map_err(|e| config_err(&path.display().to_string(), e))
}

impl FunctionConfig {
    /// Evaluable function; `grid` only matters for CSV-backed functions,
    /// which carry their own node count.
    pub fn build(&self, map: &MapModel, _grid: usize) -> Result<Potential, CliError> {
        let tau = 2.0 * PI;
        Ok(match self.clone() {
            FunctionConfig::Zero {} => Arc::new(|_: f64| 0.0),
            FunctionConfig::Constant { value } => Arc::new(move |_: f64| value),
            FunctionConfig::Cosine {
                amplitude,
                frequency,
            } => Arc::new(move |x: f64| amplitude * (tau * frequency as f64 * x).cos()),
            FunctionConfig::Coboundary {
                rho,
                offset,
                amplitude,
            } => {
                if !(rho > 0.0) || !(offset > amplitude.abs()) {
                    return Err(CliError::Config(
                        "coboundary needs rho > 0 and offset > |amplitude|".into(),
                    ));
                }
                let map = map.clone();
                let g = move |x: f64| offset + amplitude * (tau * x).cos();
                Arc::new(move |x: f64| rho.ln() + g(map.forward(x)).ln() - g(x).ln())
            }
            FunctionConfig::NeutralPower {
                amplitude,
                exponent,
            } => Arc::new(move |x: f64| amplitude * ((PI * x).sin() / PI).abs().powf(exponent)),
            FunctionConfig::DistancePower {
                amplitude,
                exponent,
                center,
            } => Arc::new(move |x: f64| amplitude * circle_dist(x, center).powf(exponent)),
            FunctionConfig::Flattened {
                amplitude,
                exponent,
                epsilon,
            } => {
                if !(epsilon > 0.0 && epsilon <= 0.5) {
                    return Err(CliError::Config("flattened epsilon must be in (0, 0.5]".into()));
                }
                Arc::new(flattened(amplitude, exponent, epsilon))
            }
            FunctionConfig::ModulusOfDistance {
                alpha,
                beta,
                r0,
                center,
            } => {
                let spec = ModulusConfig { alpha, beta, r0 }.resolve()?;
                Arc::new(move |x: f64| spec.eval(circle_dist(x, center)))
            }
            FunctionConfig::Csv { path } => Arc::new(read_grid_csv(&path)?),
        })
    }

    /// Samples the function on an `n`-grid.
    pub fn grid(&self, map: &MapModel, n: usize) -> Result<GridFunction, CliError> {
        let f = self.build(map, n)?;
        Ok(GridFunction::from_fn(n, |x| f.eval(x)))
    }
}

impl MeasureConfig {
    pub fn resolve(&self) -> Result<DiscreteMeasure, CliError> {
        match self {
            MeasureConfig::Atoms(atoms) => {
                DiscreteMeasure::new(atoms.clone()).map_err(|e| config_err("measure", e))
            }
            MeasureConfig::Csv { csv } => {
                let f = std::fs::File::open(csv).map_err(|e| config_err(&csv.display().to_string(), e))?;
                DiscreteMeasure::read_csv(std::io::BufReader::new(f))
                    .map_err(|e| config_err(&csv.display().to_string(), e))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, serde_json::Error> {
        serde_json::from_str(text)
    }

    #[test]
    fn unknown_keys_are_rejected_at_every_level() {
        let base = r#"{ "map": { "kind": "pm", "q": 0.5 } }"#;
        assert!(parse(base).is_ok());
        assert!(parse(r#"{ "map": { "kind": "pm", "q": 0.5 }, "extra": 1 }"#).is_err());
        assert!(parse(r#"{ "map": { "kind": "pm", "q": 0.5, "k": 2 } }"#).is_err());
        assert!(parse(
            r#"{ "map": { "kind": "pm", "q": 0.5 }, "potential": { "formula": "zero", "a": 1 } }"#
        )
        .is_err());
        assert!(parse(
            r#"{ "map": { "kind": "pm", "q": 0.5 }, "tolerances": { "eigenvalue": 1e-9 } }"#
        )
        .is_err());
    }

    #[test]
    fn defaults_and_settings() {
        let cfg = parse(r#"{ "map": { "kind": "k_fold", "k": 3 } }"#).unwrap();
        assert_eq!(cfg.grid, 4096);
        assert_eq!(cfg.t_max, 60);
        let s = cfg.rpf_settings().unwrap();
        assert_eq!(s.merge_resolution, 1.0 / 4096.0);
        assert_eq!(cfg.map().unwrap().k, 3);
        assert!(cfg.seed().is_err());
        assert!(cfg.potential(&cfg.map().unwrap()).is_err());

        let mut bad = cfg.clone();
        bad.grid = 100;
        assert!(bad.rpf_settings().is_err());
        bad.grid = 1024;
        bad.tolerances.eigen = Some(-1.0);
        assert!(bad.rpf_settings().is_err());
    }

    #[test]
    fn formulas_evaluate_as_documented() {
        let map = MapModel::k_fold(2).unwrap();
        let eval = |f: FunctionConfig, x: f64| f.build(&map, 64).unwrap().eval(x);
        let cos = FunctionConfig::Cosine {
            amplitude: 0.5,
            frequency: 2,
        };
        assert!((eval(cos, 0.125) - 0.5 * (PI / 2.0).cos()).abs() < 1e-15);
        let flat = FunctionConfig::Flattened {
            amplitude: 1.0,
            exponent: 0.5,
            epsilon: 0.2,
        };
        assert_eq!(eval(flat.clone(), 0.95), 0.0);
        assert!((eval(flat.clone(), 0.3) - 0.3f64.sqrt()).abs() < 1e-15);
        assert!((eval(flat, 0.15) - 0.5 * 0.2f64.sqrt()).abs() < 1e-15);
        // the coboundary cancels along an orbit segment
        let cob = FunctionConfig::Coboundary {
            rho: 2.0,
            offset: 1.5,
            amplitude: 1.0,
        };
        let g = |x: f64| (1.5 + (2.0 * PI * x).cos()).ln();
        let x = 0.3;
        assert!((eval(cob, x) - (2f64.ln() + g(map.forward(x)) - g(x))).abs() < 1e-14);
        let bad = FunctionConfig::Coboundary {
            rho: 2.0,
            offset: 0.5,
            amplitude: 1.0,
        };
        assert!(bad.build(&map, 64).is_err());
    }

    #[test]
    fn measures_parse_inline_or_from_csv() {
        let m: MeasureConfig = serde_json::from_str("[[0.1, 0.5], [0.7, 0.5]]").unwrap();
        assert_eq!(m.resolve().unwrap().len(), 2);
        let m: MeasureConfig = serde_json::from_str(r#"{ "csv": "/nonexistent.csv" }"#).unwrap();
        assert!(matches!(m.resolve(), Err(CliError::Config(_))));
    }

    #[test]
    fn output_dir_is_not_echoed() {
        let mut cfg = parse(r#"{ "map": { "kind": "pm", "q": 0.5 }, "output_dir": "x" }"#).unwrap();
        assert!(cfg.output_dir.is_some());
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(!text.contains("output_dir"));
        cfg.rebase_paths(Path::new("/base"));
        assert_eq!(cfg.output_dir.unwrap(), PathBuf::from("/base/x"));
    }
}
