//! Run configuration: one JSON or TOML file, with command-line overrides.

use std::path::{Path, PathBuf};

use gimvi_core::{draw_affine_instance, DynParams, InstanceConstants, InstanceRecipe, ProblemInstance, Region};
use serde::Deserialize;

use crate::exit::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[serde(rename = "continuous-3rd")]
    Continuous3rd,
    #[serde(rename = "continuous-2nd")]
    Continuous2nd,
    #[serde(rename = "continuous-1st")]
    Continuous1st,
    Discrete,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Continuous3rd => "continuous-3rd",
            Mode::Continuous2nd => "continuous-2nd",
            Mode::Continuous1st => "continuous-1st",
            Mode::Discrete => "discrete",
        }
    }
}

/// Where the instance comes from.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum InstanceSource {
    /// One-dimensional `F = g = id` on `[−1, 1]`.
    Canonical,
    /// The seeded ten-dimensional affine instance.
    CanonicalAffine,
    /// An instance document; relative paths resolve against the config file.
    File { path: PathBuf },
    Recipe {
        dim: usize,
        #[serde(default)]
        seed: u64,
        recipe: InstanceRecipe,
    },
}

/// Partial replacement of the declared constants.
#[derive(Clone, Copy, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsOverride {
    pub eta: Option<f64>,
    pub beta: Option<f64>,
    pub lambda: Option<f64>,
    pub zeta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct InstanceConfig {
    #[serde(flatten)]
    pub source: InstanceSource,
    pub gamma: Option<f64>,
    pub constants: Option<ConstantsOverride>,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        Self {
            source: InstanceSource::Canonical,
            gamma: None,
            constants: None,
        }
    }
}

/// Exactly one parameter source: explicit coefficients or a region.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ParamsSource {
    Explicit {
        a0: f64,
        a1: f64,
        a2: f64,
    },
    #[serde(alias = "cor35")]
    SmallRate,
    #[serde(alias = "thm36")]
    UnitRate,
    #[serde(alias = "eps2")]
    DoubleRate,
    #[serde(alias = "cor43")]
    LinearRate,
    Common,
}

impl ParamsSource {
    pub fn region(&self) -> Option<Region> {
        match self {
            ParamsSource::Explicit { .. } => None,
            ParamsSource::SmallRate => Some(Region::SmallRate),
            ParamsSource::UnitRate => Some(Region::UnitRate),
            ParamsSource::DoubleRate => Some(Region::DoubleRate),
            ParamsSource::LinearRate => Some(Region::LinearRate),
            ParamsSource::Common => Some(Region::Common),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub instance: InstanceConfig,
    pub mode: Option<Mode>,
    pub params: Option<ParamsSource>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Second-order damping `κ`.
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// Gain `ρ` of the first- and second-order baselines.
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Starting point; defaults to a seeded perturbation of the solution.
    pub init: Option<Vec<f64>>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_dt() -> f64 {
    gimvi_core::dynamics::DEFAULT_DT
}
fn default_horizon() -> f64 {
    gimvi_core::dynamics::DEFAULT_HORIZON
}
fn default_max_iter() -> usize {
    1_000_000
}
fn default_tol() -> f64 {
    gimvi_core::discrete::DEFAULT_TOL
}
fn default_kappa() -> f64 {
    2.0
}
fn default_rho() -> f64 {
    1.0
}
fn default_trials() -> usize {
    1000
}
fn default_runs() -> usize {
    10
}
fn default_out() -> PathBuf {
    PathBuf::from("gimvi-out")
}

impl Default for RunConfig {
    fn default() -> Self {
        // an empty document takes every serde default
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

/// Values given on the command line; they win over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, Failure> {
        let mut cfg = match path {
            None => RunConfig::default(),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
                let mut cfg = parse(path, &text)?;
                cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
                cfg
            }
        };
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        if let Some(dt) = overrides.dt {
            cfg.dt = dt;
        }
        if let Some(horizon) = overrides.horizon {
            cfg.horizon = horizon;
        }
        if let Some(out) = &overrides.out {
            cfg.out = out.clone();
        }
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), Failure> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Failure::Usage(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        positive("dt", self.dt)?;
        positive("horizon", self.horizon)?;
        positive("tol", self.tol)?;
        positive("kappa", self.kappa)?;
        positive("rho", self.rho)?;
        if self.trials == 0 || self.runs == 0 {
            return Err(Failure::Usage("trials and runs must be >= 1".into()));
        }
        if let (Some(mode), Some(source)) = (self.mode, self.params) {
            let compatible = match (mode, source.region()) {
                (_, None) => matches!(mode, Mode::Continuous3rd | Mode::Discrete),
                (Mode::Continuous3rd, Some(r)) => r.is_continuous(),
                (Mode::Discrete, Some(r)) => r.is_discrete(),
                _ => false,
            };
            if !compatible {
                return Err(Failure::Usage(format!(
                    "params source {source:?} does not apply to mode {}",
                    mode.name()
                )));
            }
        }
        Ok(())
    }

    pub fn mode(&self) -> Mode {
        self.mode.unwrap_or(Mode::Continuous3rd)
    }

    /// The configured source, or the default region of the mode.
    pub fn params_source(&self) -> ParamsSource {
        self.params.unwrap_or(match self.mode() {
            Mode::Discrete => ParamsSource::LinearRate,
            _ => ParamsSource::SmallRate,
        })
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone()
    }

    /// Builds the instance with overrides applied, without enforcing its
    /// invariants.
    pub fn raw_instance(&self) -> Result<ProblemInstance, Failure> {
        let inst = match &self.instance.source {
            InstanceSource::Canonical => ProblemInstance::canonical(),
            InstanceSource::CanonicalAffine => gimvi_core::canonical_affine_instance(),
            InstanceSource::File { path } => {
                let path = self.base_dir.join(path);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
                ProblemInstance::from_json(&text).map_err(|e| Failure::Invalid(e.to_string()))?
            }
            InstanceSource::Recipe { dim, seed, recipe } => {
                draw_affine_instance(*dim, *seed, recipe).map_err(|e| Failure::Invalid(e.to_string()))?
            }
        };
        let inst = match self.instance.gamma {
            Some(gamma) => inst.with_gamma(gamma),
            None => inst,
        };
        Ok(match self.instance.constants {
            Some(o) => {
                let k = *inst.constants();
                inst.with_constants(InstanceConstants {
                    eta: o.eta.unwrap_or(k.eta),
                    beta: o.beta.unwrap_or(k.beta),
                    lambda: o.lambda.unwrap_or(k.lambda),
                    zeta: o.zeta.unwrap_or(k.zeta),
                })
            }
            None => inst,
        })
    }

    /// Explicit coefficients when given.
    pub fn explicit_params(&self) -> Option<Result<DynParams, Failure>> {
        match self.params_source() {
            ParamsSource::Explicit { a0, a1, a2 } => {
                Some(DynParams::new(a0, a1, a2).map_err(|e| Failure::Usage(e.to_string())))
            }
            _ => None,
        }
    }
}

fn parse(path: &Path, text: &str) -> Result<RunConfig, Failure> {
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    let parsed = if is_toml {
        toml::from_str(text).map_err(|e| e.to_string())
    } else {
        serde_json::from_str(text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| Failure::Usage(format!("bad config {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toml_cfg(text: &str) -> RunConfig {
        let mut cfg: RunConfig = toml::from_str(text).unwrap();
        cfg.check().unwrap();
        cfg.base_dir = PathBuf::new();
        cfg
    }

    #[test]
    fn empty_config_takes_defaults() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.mode(), Mode::Continuous3rd);
        assert_eq!(cfg.params_source(), ParamsSource::SmallRate);
        assert_eq!(cfg.instance.source, InstanceSource::Canonical);
        assert_eq!((cfg.dt, cfg.horizon, cfg.trials), (0.01, 40.0, 1000));
    }

    #[test]
    fn source_tokens_accept_aliases() {
        let cfg = toml_cfg("mode = \"discrete\"\n[params]\nsource = \"cor43\"\n");
        assert_eq!(cfg.params_source(), ParamsSource::LinearRate);
        let cfg = toml_cfg("[params]\nsource = \"eps2\"\n");
        assert_eq!(cfg.params_source(), ParamsSource::DoubleRate);
        let cfg = toml_cfg("[params]\nsource = \"thm36\"\n");
        assert_eq!(cfg.params_source(), ParamsSource::UnitRate);
        let cfg = toml_cfg("[params]\nsource = \"cor35\"\n");
        assert_eq!(cfg.params_source(), ParamsSource::SmallRate);
    }

    #[test]
    fn explicit_params_parse() {
        let cfg = toml_cfg("[params]\nsource = \"explicit\"\na0 = 1.0\na1 = 2.0\na2 = 3.0\n");
        let p = cfg.explicit_params().unwrap().unwrap();
        assert_eq!((p.a0, p.a1, p.a2), (1.0, 2.0, 3.0));
    }

    #[test]
    fn incompatible_source_is_rejected() {
        let cfg: RunConfig = toml::from_str("mode = \"discrete\"\n[params]\nsource = \"eps2\"\n").unwrap();
        assert!(matches!(cfg.check(), Err(Failure::Usage(_))));
        let cfg: RunConfig = toml::from_str("mode = \"continuous-3rd\"\n[params]\nsource = \"cor43\"\n").unwrap();
        assert!(matches!(cfg.check(), Err(Failure::Usage(_))));
        let cfg: RunConfig = toml::from_str("mode = \"continuous-2nd\"\n[params]\nsource = \"cor35\"\n").unwrap();
        assert!(matches!(cfg.check(), Err(Failure::Usage(_))));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(toml::from_str::<RunConfig>("modes = \"discrete\"\n").is_err());
    }

    #[test]
    fn recipe_instance_and_overrides() {
        let cfg = toml_cfg(
            "[instance]\nsource = \"recipe\"\ndim = 3\nseed = 7\ngamma = 0.5\n\
             [instance.recipe]\nfamily = \"scaled-identity\"\nf_scale = 1.0\ng_scale = 1.0\ngamma = 1.0\n\
             [instance.constants]\neta = 0.5\n",
        );
        let inst = cfg.raw_instance().unwrap();
        assert_eq!(inst.dim(), 3);
        assert_eq!(inst.gamma(), 0.5);
        assert_eq!(inst.constants().eta, 0.5);
        assert!(!inst.is_certified());
    }

    #[test]
    fn json_config_parses() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"mode": "continuous-1st", "instance": {"source": "canonical-affine"}, "rho": 0.5}"#,
        )
        .unwrap();
        assert_eq!(cfg.mode(), Mode::Continuous1st);
        assert_eq!(cfg.rho, 0.5);
    }
}
