//! Flat `key = value` scenario configuration.
//!
//! Blank lines and `#` comments are ignored. Every key has a default, so an
//! empty file describes the full-rank M = 20 scenario.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::algorithms::{AlgorithmKind, EstimatorParams, StepNormalization};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: expected `key = value`, found {text:?}")]
    Syntax { line: usize, text: String },
    #[error("invalid value {value:?} for `{key}`: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ConfigError {
    /// The config key the error refers to, if any.
    pub fn key(&self) -> Option<&str> {
        match self {
            Self::UnknownKey { key, .. } | Self::InvalidValue { key, .. } => Some(key),
            Self::Invalid { key, .. } => Some(key),
            _ => None,
        }
    }
}

/// Documented config keys and their meaning.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("m", "full parameter dimension M (default 20)"),
    ("d", "reduced dimension D, 1 <= D <= M (default 5)"),
    ("n_nodes", "number of network nodes N (default 20)"),
    ("iterations", "time instants per run (default 1000)"),
    ("runs", "Monte-Carlo runs (default 100)"),
    ("mu0", "NLMS convergence factor for all NLMS-type schemes (default 0.15)"),
    ("eta0", "projection convergence factor (default 0.5)"),
    ("eps", "step-size regularization (default 1e-8)"),
    ("rls_lambda", "RLS forgetting factor (default 0.99)"),
    ("rls_delta", "RLS initialization, P(0) = I / delta (default 0.11)"),
    ("noise_var", "measurement noise variance (default 0.001)"),
    ("alpha", "AR(1) correlation, one value or one per node (default 0.5)"),
    ("sparse", "only the first D ground-truth coefficients are nonzero (default false)"),
    ("radius", "geometric-graph connection radius (default 0.35)"),
    ("topology_seed", "topology RNG seed (default 1)"),
    ("signal_seed", "signal and ground-truth RNG seed (default 1)"),
    ("average_topologies", "draw a fresh topology per run (default false)"),
    ("krylov_warmup", "samples used to estimate Krylov statistics (default 200)"),
    ("step_normalization", "`full` or `reduced` input energy for the reduced-rank step (default full)"),
    ("algorithms", "comma-separated subset of drjio-nlms, diffusion-nlms, diffusion-rls, krylov-nlms"),
    ("dump_streams", "write run 1's (x, d) streams to streams.csv (default false)"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub m: usize,
    pub d: usize,
    pub n_nodes: usize,
    pub iterations: usize,
    pub runs: usize,
    pub mu0: f64,
    pub eta0: f64,
    pub eps: f64,
    pub rls_lambda: f64,
    pub rls_delta: f64,
    pub noise_var: f64,
    pub alpha: Vec<f64>,
    pub sparse: bool,
    pub radius: f64,
    pub topology_seed: u64,
    pub signal_seed: u64,
    pub average_topologies: bool,
    pub krylov_warmup: usize,
    pub step_normalization: StepNormalization,
    pub algorithms: Vec<AlgorithmKind>,
    pub dump_streams: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            m: 20,
            d: 5,
            n_nodes: 20,
            iterations: 1000,
            runs: 100,
            mu0: 0.15,
            eta0: 0.5,
            eps: 1e-8,
            rls_lambda: 0.99,
            rls_delta: 0.11,
            noise_var: 0.001,
            alpha: vec![0.5],
            sparse: false,
            radius: 0.35,
            topology_seed: 1,
            signal_seed: 1,
            average_topologies: false,
            krylov_warmup: 200,
            step_normalization: StepNormalization::FullInput,
            algorithms: AlgorithmKind::ALL.to_vec(),
            dump_streams: false,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

impl ScenarioConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        text.parse()
    }

    /// Sets one key. Line number 0 marks a command-line override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        self.set_at(key, value, 0)
    }

    fn set_at(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let value = value.trim();
        match key.trim() {
            "m" => self.m = parse_value(key, value)?,
            "d" => self.d = parse_value(key, value)?,
            "n_nodes" => self.n_nodes = parse_value(key, value)?,
            "iterations" => self.iterations = parse_value(key, value)?,
            "runs" => self.runs = parse_value(key, value)?,
            "mu0" => self.mu0 = parse_value(key, value)?,
            "eta0" => self.eta0 = parse_value(key, value)?,
            "eps" => self.eps = parse_value(key, value)?,
            "rls_lambda" => self.rls_lambda = parse_value(key, value)?,
            "rls_delta" => self.rls_delta = parse_value(key, value)?,
            "noise_var" => self.noise_var = parse_value(key, value)?,
            "alpha" => {
                self.alpha = value
                    .split(',')
                    .map(|v| parse_value::<f64>(key, v.trim()))
                    .collect::<Result<_, _>>()?
            }
            "sparse" => self.sparse = parse_value(key, value)?,
            "radius" => self.radius = parse_value(key, value)?,
            "topology_seed" => self.topology_seed = parse_value(key, value)?,
            "signal_seed" => self.signal_seed = parse_value(key, value)?,
            "average_topologies" => self.average_topologies = parse_value(key, value)?,
            "krylov_warmup" => self.krylov_warmup = parse_value(key, value)?,
            "step_normalization" => self.step_normalization = parse_value(key, value)?,
            "algorithms" => {
                self.algorithms = value
                    .split(',')
                    .map(|v| parse_value::<AlgorithmKind>(key, v.trim()))
                    .collect::<Result<_, _>>()?
            }
            "dump_streams" => self.dump_streams = parse_value(key, value)?,
            other => return Err(ConfigError::UnknownKey { key: other.to_string(), line }),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |key: &'static str, reason: &str| Err(ConfigError::Invalid { key, reason: reason.to_string() });
        if self.m == 0 {
            return fail("m", "must be at least 1");
        }
        if self.d == 0 || self.d > self.m {
            return fail("d", &format!("must satisfy 1 <= d <= m = {}, got {}", self.m, self.d));
        }
        if self.n_nodes == 0 {
            return fail("n_nodes", "must be at least 1");
        }
        if self.iterations == 0 {
            return fail("iterations", "must be at least 1");
        }
        if self.runs == 0 {
            return fail("runs", "must be at least 1");
        }
        if !(self.mu0 > 0.0 && self.mu0 < 2.0) {
            return fail("mu0", "must lie in (0, 2)");
        }
        if !(self.eta0 > 0.0 && self.eta0 < 2.0) {
            return fail("eta0", "must lie in (0, 2)");
        }
        if !(self.eps > 0.0) {
            return fail("eps", "must be positive");
        }
        if !(self.rls_lambda > 0.0 && self.rls_lambda <= 1.0) {
            return fail("rls_lambda", "must lie in (0, 1]");
        }
        if !(self.rls_delta > 0.0) {
            return fail("rls_delta", "must be positive");
        }
        if !(self.noise_var >= 0.0) {
            return fail("noise_var", "must be nonnegative");
        }
        if self.alpha.len() != 1 && self.alpha.len() != self.n_nodes {
            return fail("alpha", "give one value or exactly n_nodes values");
        }
        if self.alpha.iter().any(|a| !(a.abs() < 1.0)) {
            return fail("alpha", "every |alpha| must be < 1");
        }
        if !(self.radius > 0.0) {
            return fail("radius", "must be positive");
        }
        if self.krylov_warmup == 0 {
            return fail("krylov_warmup", "must be at least 1");
        }
        if self.algorithms.is_empty() {
            return fail("algorithms", "select at least one algorithm");
        }
        Ok(())
    }

    /// Per-node correlation coefficients.
    pub fn node_alphas(&self) -> Vec<f64> {
        if self.alpha.len() == 1 {
            vec![self.alpha[0]; self.n_nodes]
        } else {
            self.alpha.clone()
        }
    }

    pub fn estimator_params(&self) -> EstimatorParams {
        EstimatorParams {
            m: self.m,
            d: self.d,
            mu0: self.mu0,
            eta0: self.eta0,
            eps: self.eps,
            rls_lambda: self.rls_lambda,
            rls_delta: self.rls_delta,
            krylov_warmup: self.krylov_warmup,
            normalization: self.step_normalization,
        }
    }

    /// Serializes every key, in documented order; parsing the output yields
    /// an equal config.
    pub fn to_config_string(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|a| format!("{a:?}")).collect::<Vec<_>>().join(",");
        let algorithms = self.algorithms.iter().map(|a| a.name()).collect::<Vec<_>>().join(",");
        let normalization = match self.step_normalization {
            StepNormalization::FullInput => "full",
            StepNormalization::ReducedInput => "reduced",
        };
        let mut out = String::new();
        let _ = writeln!(out, "m = {}", self.m);
        let _ = writeln!(out, "d = {}", self.d);
        let _ = writeln!(out, "n_nodes = {}", self.n_nodes);
        let _ = writeln!(out, "iterations = {}", self.iterations);
        let _ = writeln!(out, "runs = {}", self.runs);
        let _ = writeln!(out, "mu0 = {:?}", self.mu0);
        let _ = writeln!(out, "eta0 = {:?}", self.eta0);
        let _ = writeln!(out, "eps = {:?}", self.eps);
        let _ = writeln!(out, "rls_lambda = {:?}", self.rls_lambda);
        let _ = writeln!(out, "rls_delta = {:?}", self.rls_delta);
        let _ = writeln!(out, "noise_var = {:?}", self.noise_var);
        let _ = writeln!(out, "alpha = {}", list(&self.alpha));
        let _ = writeln!(out, "sparse = {}", self.sparse);
        let _ = writeln!(out, "radius = {:?}", self.radius);
        let _ = writeln!(out, "topology_seed = {}", self.topology_seed);
        let _ = writeln!(out, "signal_seed = {}", self.signal_seed);
        let _ = writeln!(out, "average_topologies = {}", self.average_topologies);
        let _ = writeln!(out, "krylov_warmup = {}", self.krylov_warmup);
        let _ = writeln!(out, "step_normalization = {normalization}");
        let _ = writeln!(out, "algorithms = {algorithms}");
        let _ = writeln!(out, "dump_streams = {}", self.dump_streams);
        out
    }
}

impl std::str::FromStr for ScenarioConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut config = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            })?;
            config.set_at(key.trim(), value, i + 1)?;
        }
        Ok(config)
    }
}
