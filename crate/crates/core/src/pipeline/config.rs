//! Line-oriented `key = value` configuration. `#` starts a comment; unknown
//! keys are rejected. Command-line overrides go through [`PipelineConfig::set`].

use std::fmt::Write as _;
use std::path::Path;

use crate::correspondence::{DEFAULT_SINKHORN_ITERATIONS, DEFAULT_TEMPERATURE};
use crate::descriptors::{FeatureKind, DEFAULT_HKS_TIMES, DEFAULT_WKS_ENERGIES};
use crate::error::{Error, Result};
use crate::fmap::{DEFAULT_GAMMA, DEFAULT_LAMBDA};
use crate::losses::{LossWeights, RefineOptions};
use crate::spectral::DEFAULT_KNN;

pub const DEFAULT_K_COMPLETE: usize = 80;
pub const DEFAULT_K_PARTIAL: usize = 50;
pub const DEFAULT_FEATURE_SCALE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Basis size; `None` picks 80 for complete and 50 for partial pairs.
    pub k: Option<usize>,
    pub lambda_reg: f64,
    pub gamma: f64,
    pub sinkhorn_iterations: usize,
    pub temperature: f64,
    /// Row length of similarity-route features.
    pub feature_scale: f64,
    pub weights: LossWeights,
    pub descriptor: FeatureKind,
    pub hks_times: usize,
    pub wks_energies: usize,
    pub knn: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub partial: bool,
    /// Slanted-diagonal length; estimated from the area ratio when unset.
    pub r: Option<usize>,
    pub refine: RefineOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k: None,
            lambda_reg: DEFAULT_LAMBDA,
            gamma: DEFAULT_GAMMA,
            sinkhorn_iterations: DEFAULT_SINKHORN_ITERATIONS,
            temperature: DEFAULT_TEMPERATURE,
            feature_scale: DEFAULT_FEATURE_SCALE,
            weights: LossWeights::default(),
            descriptor: FeatureKind::Wks,
            hks_times: DEFAULT_HKS_TIMES,
            wks_energies: DEFAULT_WKS_ENERGIES,
            knn: DEFAULT_KNN,
            noise_sigma: 0.0,
            seed: 0,
            partial: false,
            r: None,
            refine: RefineOptions::default(),
        }
    }
}

pub const KEYS: &[&str] = &[
    "k",
    "lambda_reg",
    "gamma",
    "sinkhorn_iterations",
    "temperature",
    "feature_scale",
    "lambda_bij",
    "lambda_orth",
    "lambda_align",
    "lambda_nce",
    "tau",
    "descriptor",
    "hks_times",
    "wks_energies",
    "knn",
    "noise_sigma",
    "seed",
    "partial",
    "r",
    "refine_steps",
    "refine_step_size",
    "refine_out_dim",
    "fd_eps",
];

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("invalid value '{value}' for '{key}'")))
}

fn optional<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value == "auto" {
        Ok(None)
    } else {
        number(key, value).map(Some)
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, format!("expected 'key = value', got '{line}'")))?;
            config
                .set(key.trim(), value.trim())
                .map_err(|e| Error::parse(i + 1, e.to_string()))?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| e.context(format!("config {}", path.display())))
    }

    /// Sets one key. Does not re-validate the whole configuration.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "k" => self.k = optional(key, value)?,
            "lambda_reg" => self.lambda_reg = number(key, value)?,
            "gamma" => self.gamma = number(key, value)?,
            "sinkhorn_iterations" => self.sinkhorn_iterations = number(key, value)?,
            "temperature" => self.temperature = number(key, value)?,
            "feature_scale" => self.feature_scale = number(key, value)?,
            "lambda_bij" => self.weights.lambda_bij = number(key, value)?,
            "lambda_orth" => self.weights.lambda_orth = number(key, value)?,
            "lambda_align" => self.weights.lambda_align = number(key, value)?,
            "lambda_nce" => self.weights.lambda_nce = number(key, value)?,
            "tau" => self.weights.tau = number(key, value)?,
            "descriptor" => self.descriptor = value.parse()?,
            "hks_times" => self.hks_times = number(key, value)?,
            "wks_energies" => self.wks_energies = number(key, value)?,
            "knn" => self.knn = number(key, value)?,
            "noise_sigma" => self.noise_sigma = number(key, value)?,
            "seed" => self.seed = number(key, value)?,
            "partial" => self.partial = number(key, value)?,
            "r" => self.r = optional(key, value)?,
            "refine_steps" => self.refine.steps = number(key, value)?,
            "refine_step_size" => self.refine.step_size = number(key, value)?,
            "refine_out_dim" => self.refine.out_dim = number(key, value)?,
            "fd_eps" => self.refine.fd_eps = number(key, value)?,
            other => return Err(Error::InvalidArgument(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Applies `key=value` overrides in order, then validates.
    pub fn with_overrides<S: AsRef<str>>(mut self, overrides: &[S]) -> Result<Self> {
        for item in overrides {
            let item = item.as_ref();
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("override '{item}' is not key=value")))?;
            self.set(key.trim(), value.trim())?;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
        if self.k == Some(0) {
            return bad("k must be >= 1");
        }
        if !(self.lambda_reg >= 0.0) || !self.lambda_reg.is_finite() {
            return bad("lambda_reg must be finite and >= 0");
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return bad("gamma must be > 0");
        }
        if self.sinkhorn_iterations == 0 {
            return bad("sinkhorn_iterations must be >= 1");
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return bad("temperature must be > 0");
        }
        if !(self.feature_scale > 0.0) || !self.feature_scale.is_finite() {
            return bad("feature_scale must be > 0");
        }
        if self.hks_times == 0 || self.wks_energies < 2 {
            return bad("hks_times must be >= 1 and wks_energies >= 2");
        }
        if self.knn == 0 {
            return bad("knn must be >= 1");
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return bad("noise_sigma must be finite and >= 0");
        }
        if self.r == Some(0) {
            return bad("r must be >= 1");
        }
        if self.refine.out_dim == 0 || !(self.refine.step_size > 0.0) || !(self.refine.fd_eps > 0.0) {
            return bad("refine_out_dim, refine_step_size and fd_eps must be positive");
        }
        self.weights.validate()
    }

    pub fn effective_k(&self) -> usize {
        self.k.unwrap_or(if self.partial {
            DEFAULT_K_PARTIAL
        } else {
            DEFAULT_K_COMPLETE
        })
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<usize>| v.map_or_else(|| "auto".to_string(), |v| v.to_string());
        vec![
            ("k", opt(self.k)),
            ("lambda_reg", self.lambda_reg.to_string()),
            ("gamma", self.gamma.to_string()),
            ("sinkhorn_iterations", self.sinkhorn_iterations.to_string()),
            ("temperature", self.temperature.to_string()),
            ("feature_scale", self.feature_scale.to_string()),
            ("lambda_bij", self.weights.lambda_bij.to_string()),
            ("lambda_orth", self.weights.lambda_orth.to_string()),
            ("lambda_align", self.weights.lambda_align.to_string()),
            ("lambda_nce", self.weights.lambda_nce.to_string()),
            ("tau", self.weights.tau.to_string()),
            ("descriptor", self.descriptor.to_string()),
            ("hks_times", self.hks_times.to_string()),
            ("wks_energies", self.wks_energies.to_string()),
            ("knn", self.knn.to_string()),
            ("noise_sigma", self.noise_sigma.to_string()),
            ("seed", self.seed.to_string()),
            ("partial", self.partial.to_string()),
            ("r", opt(self.r)),
            ("refine_steps", self.refine.steps.to_string()),
            ("refine_step_size", self.refine.step_size.to_string()),
            ("refine_out_dim", self.refine.out_dim.to_string()),
            ("fd_eps", self.refine.fd_eps.to_string()),
        ]
    }

    /// Full effective configuration in the same format `parse` reads.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (key, value) in self.entries() {
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Object(
            self.entries()
                .into_iter()
                .map(|(k, v)| (k.to_string(), serde_json::Value::String(v)))
                .collect(),
        )
    }
}
