//! Run configuration files.
//!
//! ```toml
//! env = "cartpole"
//! mode = "hmc"
//! output_dir = "runs/cartpole-hmc"
//!
//! [train]
//! horizon = 30
//!
//! [hmc]
//! n_samples = 100
//!
//! [heatmap]
//! dims = [0, 1]
//! fixed = [2, 2]
//! ```
//!
//! Every key is optional; omitted keys take the defaults listed in
//! [`RunConfig::default`]. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use hamq_core::{CompletionConfig, EnvName, EnvOptions, HmcConfig, Mode, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const OUTPUT_DIR_VAR: &str = "HAMQ_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: String,
    pub mode: String,
    pub output_dir: Option<PathBuf>,
    /// Writes measured per-iteration times to `wall_ms`; off by default so
    /// repeated runs produce identical files.
    pub record_wall_time: bool,
    pub train: TrainSection,
    pub hmc: HmcSection,
    pub completion: CompletionSection,
    pub environment: EnvSection,
    pub heatmap: Option<SliceSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: "cartpole".into(),
            mode: "hmc".into(),
            output_dir: None,
            record_wall_time: false,
            train: TrainSection::default(),
            hmc: HmcSection::default(),
            completion: CompletionSection::default(),
            environment: EnvSection::default(),
            heatmap: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub gamma: f64,
    pub horizon: usize,
    pub support_prob: f64,
    pub kappa: f64,
    pub q_init_seed: u64,
    pub support_seed: u64,
    pub reference_tolerance: f64,
    pub reference_max_sweeps: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            gamma: t.gamma,
            horizon: t.horizon,
            support_prob: t.support_prob,
            kappa: t.kappa,
            q_init_seed: t.q_init_seed,
            support_seed: t.support_seed,
            reference_tolerance: t.reference_tolerance,
            reference_max_sweeps: t.reference_max_sweeps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HmcSection {
    pub trajectory_steps: usize,
    pub step_size: f64,
    pub n_samples: usize,
    pub burn_in: usize,
}

impl Default for HmcSection {
    fn default() -> Self {
        let h = HmcConfig::default();
        Self {
            trajectory_steps: h.trajectory_steps,
            step_size: h.step_size,
            n_samples: h.n_samples,
            burn_in: h.burn_in,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompletionSection {
    pub max_iterations: usize,
    pub rel_tolerance: f64,
    pub shrinkage: Option<f64>,
    pub shrinkage_decay: f64,
    pub min_shrinkage_ratio: f64,
}

impl Default for CompletionSection {
    fn default() -> Self {
        let c = CompletionConfig::default();
        Self {
            max_iterations: c.max_iterations,
            rel_tolerance: c.rel_tolerance,
            shrinkage: c.shrinkage,
            shrinkage_decay: c.shrinkage_decay,
            min_shrinkage_ratio: c.min_shrinkage_ratio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub euler_dt: f64,
    pub noise_variance: f64,
}

impl Default for EnvSection {
    fn default() -> Self {
        let e = EnvOptions::default();
        Self {
            euler_dt: e.euler_dt,
            noise_variance: e.noise_variance,
        }
    }
}

/// Two free state dimensions plus grid indices for the remaining ones, in
/// dimension order. Missing fixed indices default to the grid center.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceSpec {
    pub dims: [usize; 2],
    #[serde(default)]
    pub fixed: Vec<usize>,
}

impl SliceSpec {
    /// Parses `i,j` or `i,j:k,l,...`.
    pub fn parse(text: &str) -> Result<Self, String> {
        let (free, fixed) = match text.split_once(':') {
            Some((f, x)) => (f, Some(x)),
            None => (text, None),
        };
        let parse_list = |s: &str| -> Result<Vec<usize>, String> {
            s.split(',')
                .filter(|t| !t.trim().is_empty())
                .map(|t| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}")))
                .collect()
        };
        let free = parse_list(free)?;
        let dims: [usize; 2] = free
            .try_into()
            .map_err(|_| format!("slice `{text}` needs exactly two free dimensions"))?;
        Ok(Self {
            dims,
            fixed: fixed.map(parse_list).transpose()?.unwrap_or_default(),
        })
    }
}

/// Configuration after validation, ready to run.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub raw: RunConfig,
    pub env: EnvName,
    pub mode: Mode,
    pub env_options: EnvOptions,
    pub train: TrainConfig,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start));
            CliError::Config {
                line,
                message: e.message().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Ok((Self::from_toml(&text)?, text))
    }

    /// Checks every value and fills in derived settings. `source` is the
    /// file text, used to point diagnostics at the offending line.
    pub fn resolve(
        &self,
        source: &str,
        output_override: Option<PathBuf>,
    ) -> Result<ResolvedConfig, CliError> {
        let fail = |section: Option<&str>, key: &str, message: String| CliError::Config {
            line: locate(source, section, key),
            message,
        };
        let env: EnvName = self
            .env
            .parse()
            .map_err(|e: hamq_core::Error| fail(None, "env", e.to_string()))?;
        let mode: Mode = self
            .mode
            .parse()
            .map_err(|e: hamq_core::Error| fail(None, "mode", e.to_string()))?;
        let env_options = EnvOptions {
            euler_dt: self.environment.euler_dt,
            noise_variance: self.environment.noise_variance,
            gamma: self.train.gamma,
        };
        if !(env_options.euler_dt.is_finite() && env_options.euler_dt > 0.0) {
            return Err(fail(
                Some("environment"),
                "euler_dt",
                "euler_dt must be positive".into(),
            ));
        }
        if !(env_options.noise_variance.is_finite() && env_options.noise_variance >= 0.0) {
            return Err(fail(
                Some("environment"),
                "noise_variance",
                "noise_variance must be finite and non-negative".into(),
            ));
        }
        let t = &self.train;
        let c = &self.completion;
        let train = TrainConfig {
            gamma: t.gamma,
            horizon: t.horizon,
            support_prob: t.support_prob,
            hmc: HmcConfig {
                trajectory_steps: self.hmc.trajectory_steps,
                step_size: self.hmc.step_size,
                n_samples: self.hmc.n_samples,
                burn_in: self.hmc.burn_in,
                seed: t.support_seed,
            },
            completion: CompletionConfig {
                max_iterations: c.max_iterations,
                rel_tolerance: c.rel_tolerance,
                shrinkage: c.shrinkage,
                shrinkage_decay: c.shrinkage_decay,
                min_shrinkage_ratio: c.min_shrinkage_ratio,
                warm_start: None,
            },
            kappa: t.kappa,
            q_init_seed: t.q_init_seed,
            support_seed: t.support_seed,
            reference_tolerance: t.reference_tolerance,
            reference_max_sweeps: t.reference_max_sweeps,
        };
        if let Err(e) = train.validate() {
            let (section, key) = match &e {
                hamq_core::Error::InvalidParameter { name, .. } => (section_of(name), *name),
                _ => (None, ""),
            };
            return Err(fail(section, key, e.to_string()));
        }
        if let Some(spec) = &self.heatmap {
            check_slice(spec, env).map_err(|m| fail(Some("heatmap"), "dims", m))?;
        }
        let output_dir = output_override
            .or_else(|| self.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from(format!("runs/{}-{}", env, mode)));
        Ok(ResolvedConfig {
            raw: self.clone(),
            env,
            mode,
            env_options,
            train,
            output_dir,
        })
    }
}

fn section_of(key: &str) -> Option<&'static str> {
    match key {
        "trajectory_steps" | "step_size" | "n_samples" | "burn_in" => Some("hmc"),
        "max_iterations"
        | "rel_tolerance"
        | "shrinkage"
        | "shrinkage_decay"
        | "min_shrinkage_ratio" => Some("completion"),
        _ => Some("train"),
    }
}

/// Validates a heatmap slice against the state grid of `env`.
pub fn check_slice(spec: &SliceSpec, env: EnvName) -> Result<(), String> {
    let dims = env.dim_names().len();
    let [i, j] = spec.dims;
    if i >= dims || j >= dims || i == j {
        return Err(format!(
            "heatmap dims {:?} must be two distinct indices below {dims}",
            spec.dims
        ));
    }
    if !spec.fixed.is_empty() && spec.fixed.len() != dims - 2 {
        return Err(format!(
            "heatmap needs {} fixed indices, got {}",
            dims - 2,
            spec.fixed.len()
        ));
    }
    Ok(())
}

/// 1-based line of byte offset `pos`.
pub fn line_of(text: &str, pos: usize) -> usize {
    text[..pos.min(text.len())].matches('\n').count() + 1
}

/// 1-based line on which `key` is assigned inside `[section]`, or at top
/// level when `section` is `None`.
pub fn locate(text: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = Some(name.trim().to_string());
            continue;
        }
        let Some((k, _)) = line.split_once('=') else {
            continue;
        };
        if k.trim() == key && current.as_deref() == section {
            return Some(n + 1);
        }
    }
    None
}

pub fn output_override() -> Option<PathBuf> {
    std::env::var_os(OUTPUT_DIR_VAR)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}
