use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{BayesConfig, Kernel, KernelGrid};
use crate::error::{Error, Result};
use crate::piecewise::{preset_experiment_target, PiecewiseSmoothFunction, Target};
use crate::relu_net::TrainerConfig;

/// Environment variable that, when set, is prepended to relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "RATELAB_OUTPUT_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed from which every dataset, fit and error estimate is derived.
    pub seed: u64,
    /// Sample sizes, strictly increasing.
    pub n: Vec<usize>,
    pub replications: usize,
    pub sigma: f64,
    #[serde(default = "default_mc_n")]
    pub mc_n: usize,
    pub output_dir: PathBuf,
    pub target: TargetSpec,
    pub methods: MethodsConfig,
    /// Directory that a relative target path is resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_mc_n() -> usize {
    10_000
}

/// Either a named preset or a path to a target JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct MethodsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dnn: Option<DnnMethod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaussian_kernel: Option<GaussianKernelMethod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poly_kernel: Option<PolyKernelMethod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<SeriesMethod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bayes_dnn: Option<BayesMethod>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DnnMethod {
    pub shape: Vec<usize>,
    #[serde(default)]
    pub trainer: TrainerConfig,
}

fn default_folds() -> usize {
    5
}

fn default_ridges() -> Vec<f64> {
    KernelGrid::gaussian_default().ridges
}

fn default_bandwidths() -> Vec<f64> {
    KernelGrid::gaussian_default()
        .kernels
        .iter()
        .map(|k| match k {
            Kernel::Gaussian { bandwidth } => *bandwidth,
            Kernel::Polynomial { .. } => unreachable!(),
        })
        .collect()
}

fn default_degrees() -> Vec<u32> {
    (1..=5).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianKernelMethod {
    #[serde(default = "default_bandwidths")]
    pub bandwidths: Vec<f64>,
    #[serde(default = "default_ridges")]
    pub ridges: Vec<f64>,
    #[serde(default = "default_folds")]
    pub folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyKernelMethod {
    #[serde(default = "default_degrees")]
    pub degrees: Vec<u32>,
    #[serde(default = "default_ridges")]
    pub ridges: Vec<f64>,
    #[serde(default = "default_folds")]
    pub folds: usize,
}

fn default_j_max() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesMethod {
    #[serde(default = "default_j_max")]
    pub j_max: usize,
    #[serde(default = "default_folds")]
    pub folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BayesMethod {
    pub shape: Vec<usize>,
    #[serde(default)]
    pub chain: BayesConfig,
}

impl Default for GaussianKernelMethod {
    fn default() -> Self {
        Self {
            bandwidths: default_bandwidths(),
            ridges: default_ridges(),
            folds: default_folds(),
        }
    }
}

impl Default for PolyKernelMethod {
    fn default() -> Self {
        Self {
            degrees: default_degrees(),
            ridges: default_ridges(),
            folds: default_folds(),
        }
    }
}

impl Default for SeriesMethod {
    fn default() -> Self {
        Self {
            j_max: default_j_max(),
            folds: default_folds(),
        }
    }
}

impl GaussianKernelMethod {
    pub fn grid(&self) -> KernelGrid {
        KernelGrid {
            kernels: self.bandwidths.iter().map(|&bandwidth| Kernel::Gaussian { bandwidth }).collect(),
            ridges: self.ridges.clone(),
        }
    }
}

impl PolyKernelMethod {
    pub fn grid(&self) -> KernelGrid {
        KernelGrid {
            kernels: self.degrees.iter().map(|&degree| Kernel::Polynomial { degree }).collect(),
            ridges: self.ridges.clone(),
        }
    }
}

/// Estimators known to the runner, in their canonical output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Dnn,
    GaussianKernel,
    PolyKernel,
    Series,
    BayesDnn,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Dnn,
        Method::GaussianKernel,
        Method::PolyKernel,
        Method::Series,
        Method::BayesDnn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Dnn => "dnn",
            Method::GaussianKernel => "gaussian-kernel",
            Method::PolyKernel => "poly-kernel",
            Method::Series => "series",
            Method::BayesDnn => "bayes-dnn",
        }
    }

    pub fn from_name(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == s)
    }

    pub fn index(self) -> u64 {
        self as u64
    }

    /// Whether the estimator is linear in the responses.
    pub fn is_linear(self) -> bool {
        matches!(self, Method::GaussianKernel | Method::PolyKernel | Method::Series)
    }
}

impl MethodsConfig {
    pub fn enabled(&self) -> Vec<Method> {
        let mut out = Vec::new();
        if self.dnn.is_some() {
            out.push(Method::Dnn);
        }
        if self.gaussian_kernel.is_some() {
            out.push(Method::GaussianKernel);
        }
        if self.poly_kernel.is_some() {
            out.push(Method::PolyKernel);
        }
        if self.series.is_some() {
            out.push(Method::Series);
        }
        if self.bayes_dnn.is_some() {
            out.push(Method::BayesDnn);
        }
        out
    }
}

fn check_shape(shape: &[usize], dim: usize, what: &str) -> Result<()> {
    if shape.len() < 2 || shape[0] != dim || *shape.last().unwrap() != 1 || shape.contains(&0) {
        return Err(Error::Config(format!(
            "{what} shape {shape:?} must start with the target dimension {dim}, end with 1 and have no zero widths"
        )));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn parse(src: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig =
            toml::from_str(src).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&src, &base)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn target(&self) -> Result<PiecewiseSmoothFunction> {
        match (&self.target.preset, &self.target.path) {
            (Some(name), None) => match name.as_str() {
                "experiment" => Ok(preset_experiment_target()),
                other => Err(Error::Config(format!("unknown target preset `{other}`"))),
            },
            (None, Some(path)) => {
                let p = if path.is_absolute() { path.clone() } else { self.base_dir.join(path) };
                PiecewiseSmoothFunction::load(&p).map_err(|e| match e {
                    Error::Io { .. } => e,
                    other => Error::Config(format!("target {}: {other}", p.display())),
                })
            }
            _ => Err(Error::Config("target needs exactly one of `preset` or `path`".into())),
        }
    }

    /// Output directory, prefixed by `root` (or the environment override) when relative.
    /// Without either, a relative directory is taken from the working directory.
    pub fn resolve_output(&self, root: Option<&Path>) -> PathBuf {
        if self.output_dir.is_absolute() {
            return self.output_dir.clone();
        }
        match root {
            Some(r) => r.join(&self.output_dir),
            None => match std::env::var_os(OUTPUT_ROOT_ENV) {
                Some(r) => PathBuf::from(r).join(&self.output_dir),
                None => self.output_dir.clone(),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.n.is_empty() || self.n.windows(2).any(|w| w[1] <= w[0]) || self.n[0] == 0 {
            return err("`n` must be a nonempty, strictly increasing list of positive sizes".into());
        }
        if *self.n.last().unwrap() >= 1 << 32 {
            return err("sample sizes must be below 2^32".into());
        }
        if self.replications == 0 || self.replications >= 1 << 24 {
            return err("`replications` must be between 1 and 2^24 - 1".into());
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return err("`sigma` must be nonnegative".into());
        }
        if self.mc_n == 0 {
            return err("`mc_n` must be at least 1".into());
        }
        let dim = self.target()?.dim();
        let m = &self.methods;
        if m.enabled().is_empty() {
            return err("at least one method must be configured".into());
        }
        if let Some(d) = &m.dnn {
            check_shape(&d.shape, dim, "dnn")?;
            d.trainer.validate()?;
        }
        let folds_ok = |folds: usize| folds >= 2 && folds <= self.n[0];
        if let Some(g) = &m.gaussian_kernel {
            if g.bandwidths.is_empty() || g.ridges.is_empty() || !folds_ok(g.folds) {
                return err("gaussian-kernel needs bandwidths, ridges and 2 <= folds <= min n".into());
            }
            if g.bandwidths.iter().any(|h| !(*h > 0.0)) || g.ridges.iter().any(|r| !(*r >= 0.0)) {
                return err("bandwidths must be positive and ridges nonnegative".into());
            }
        }
        if let Some(p) = &m.poly_kernel {
            if p.degrees.is_empty() || p.ridges.is_empty() || !folds_ok(p.folds) {
                return err("poly-kernel needs degrees, ridges and 2 <= folds <= min n".into());
            }
            if p.degrees.contains(&0) || p.ridges.iter().any(|r| !(*r >= 0.0)) {
                return err("degrees must be at least 1 and ridges nonnegative".into());
            }
        }
        if let Some(s) = &m.series {
            if s.j_max == 0 || !folds_ok(s.folds) {
                return err("series needs j_max >= 1 and 2 <= folds <= min n".into());
            }
        }
        if let Some(b) = &m.bayes_dnn {
            check_shape(&b.shape, dim, "bayes-dnn")?;
            if b.chain.steps <= b.chain.burn_in || !(b.chain.bound > 0.0) || b.chain.thin == 0 {
                return err("bayes-dnn chain needs steps > burn_in, bound > 0 and thin >= 1".into());
            }
        }
        Ok(())
    }

    /// Reduced schedule that runs in well under an hour on one core: sizes
    /// {100, 400, 800, 1500}, 20 replications and 10 restarts.
    pub fn desk_profile() -> Self {
        Self {
            seed: 20_190_101,
            n: vec![100, 400, 800, 1500],
            replications: 20,
            sigma: 0.5,
            mc_n: default_mc_n(),
            output_dir: PathBuf::from("results/desk"),
            target: TargetSpec {
                preset: Some("experiment".into()),
                path: None,
            },
            methods: MethodsConfig {
                dnn: Some(DnnMethod {
                    shape: vec![2, 3, 3, 3, 1],
                    trainer: TrainerConfig::default(),
                }),
                gaussian_kernel: Some(GaussianKernelMethod::default()),
                poly_kernel: Some(PolyKernelMethod::default()),
                series: Some(SeriesMethod::default()),
                bayes_dnn: None,
            },
            base_dir: PathBuf::new(),
        }
    }

    /// Full schedule: sizes 100..=1500 in steps of 100, 100 replications and 100
    /// restarts.
    pub fn paper_profile() -> Self {
        let mut cfg = Self::desk_profile();
        cfg.n = (1..=15).map(|i| 100 * i).collect();
        cfg.replications = 100;
        cfg.output_dir = PathBuf::from("results/full");
        if let Some(d) = cfg.methods.dnn.as_mut() {
            d.trainer.restarts = 100;
        }
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 1
n = [20, 40]
replications = 2
sigma = 0.5
output_dir = "out"

[target]
preset = "experiment"

[methods.series]
j_max = 3
"#;

    #[test]
    fn parses_minimal_config_with_defaults() {
        let cfg = ExperimentConfig::parse(MINIMAL, Path::new("/tmp")).unwrap();
        assert_eq!(cfg.mc_n, 10_000);
        assert_eq!(cfg.methods.enabled(), vec![Method::Series]);
        assert_eq!(cfg.methods.series.as_ref().unwrap().folds, 5);
        assert_eq!(cfg.resolve_output(Some(Path::new("/r"))), PathBuf::from("/r/out"));
    }

    #[test]
    fn rejects_unknown_keys_and_methods() {
        let bad = MINIMAL.replace("[methods.series]", "[methods.forest]");
        assert!(matches!(ExperimentConfig::parse(&bad, Path::new(".")), Err(Error::Config(_))));
        let bad = MINIMAL.replace("sigma = 0.5", "sigma = 0.5\nfoo = 1");
        assert!(matches!(ExperimentConfig::parse(&bad, Path::new(".")), Err(Error::Config(_))));
        let bad = MINIMAL.replace("n = [20, 40]", "n = [40, 20]");
        assert!(matches!(ExperimentConfig::parse(&bad, Path::new(".")), Err(Error::Config(_))));
        let bad = MINIMAL.replace("preset = \"experiment\"", "preset = \"nope\"");
        assert!(matches!(ExperimentConfig::parse(&bad, Path::new(".")), Err(Error::Config(_))));
        let bad = MINIMAL.replace("j_max = 3", "j_max = 3\n[methods.dnn]\nshape = [3, 1]");
        assert!(matches!(ExperimentConfig::parse(&bad, Path::new(".")), Err(Error::Config(_))));
    }

    #[test]
    fn profiles_validate_and_roundtrip() {
        for cfg in [ExperimentConfig::desk_profile(), ExperimentConfig::paper_profile()] {
            cfg.validate().unwrap();
            let back = ExperimentConfig::parse(&cfg.to_toml(), Path::new("")).unwrap();
            assert_eq!(back, cfg);
        }
        let paper = ExperimentConfig::paper_profile();
        assert_eq!(paper.n.len(), 15);
        assert_eq!(paper.methods.dnn.unwrap().trainer.restarts, 100);
    }
}
