//! Seeded Monte-Carlo experiments over a fixed (or per-run) topology.
//!
//! Every run draws a fresh ground truth and fresh signal streams; all
//! selected algorithms consume the same per-iteration samples, so their
//! curves are paired. Runs are independent and may execute in parallel; the
//! reduction over runs is done in run order so results are bit-reproducible
//! regardless of the worker count.

mod config;
mod export;

use std::hash::Hasher;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::algorithms::{build_estimator, AlgorithmError, AlgorithmKind, TrafficCounters};
use crate::network::{generate_geometric_topology, metropolis_weights, CombinationMatrix, Topology, TopologyError};
use crate::signal::{build_ground_truth, NetworkSignal, SignalSample};

pub use config::{ConfigError, ScenarioConfig, CONFIG_KEYS};
pub use export::{
    export_cost_csv, export_csv, export_traces_csv, read_cost_csv, read_traces_csv, COST_FILE, COST_HEADER,
    TRACE_FILE, TRACE_HEADER,
};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "DRIFTRANK_THREADS";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("{algorithm} aborted in run {run} at iteration {iteration}: {source}")]
    Algorithm {
        algorithm: &'static str,
        run: usize,
        iteration: usize,
        #[source]
        source: AlgorithmError,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed csv {path} at line {line}: {reason}")]
    Csv { path: String, line: usize, reason: String },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// Network- and run-averaged learning curve of one algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct MseTrace {
    pub algorithm: String,
    /// `10 log10` of the mean squared a-priori error, one entry per iteration.
    pub mse_db: Vec<f64>,
    /// `10 log10` of the mean squared deviation of the estimate used at that
    /// iteration from the ground truth.
    pub msd_db: Vec<f64>,
    pub runs: usize,
}

impl MseTrace {
    /// First 1-based iteration at which the trailing `window`-iteration mean
    /// of the (linear) MSE drops to `threshold_db` or below.
    pub fn iterations_to_reach(&self, threshold_db: f64, window: usize) -> Option<usize> {
        let window = window.max(1);
        let linear: Vec<f64> = self.mse_db.iter().map(|v| 10f64.powf(v / 10.0)).collect();
        let threshold = 10f64.powf(threshold_db / 10.0);
        let mut sum = 0.0;
        for (i, v) in linear.iter().enumerate() {
            sum += v;
            if i >= window {
                sum -= linear[i - window];
            }
            if i + 1 >= window && sum / window as f64 <= threshold {
                return Some(i + 1);
            }
        }
        None
    }

    /// Mean MSE in dB over the last `last` iterations (averaged linearly).
    pub fn steady_state_db(&self, last: usize) -> f64 {
        mean_db(&self.mse_db[self.mse_db.len().saturating_sub(last)..])
    }

    /// Mean MSE in dB over the 1-based iteration range `first..=last`.
    pub fn window_db(&self, first: usize, last: usize) -> f64 {
        mean_db(&self.mse_db[first - 1..last])
    }
}

fn mean_db(values: &[f64]) -> f64 {
    let mean = values.iter().map(|v| 10f64.powf(v / 10.0)).sum::<f64>() / values.len() as f64;
    10.0 * mean.log10()
}

fn to_db(value: f64) -> f64 {
    10.0 * value.max(f64::MIN_POSITIVE).log10()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostEntry {
    pub algorithm: String,
    /// Analytic complex MACs of one node's adaptation step.
    pub macs_per_node_iter: u64,
    /// Metered complex scalars broadcast per node per iteration.
    pub scalars_tx_per_node_iter: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CostReport {
    pub entries: Vec<CostEntry>,
}

impl CostReport {
    pub fn get(&self, kind: AlgorithmKind) -> Option<&CostEntry> {
        self.entries.iter().find(|e| e.algorithm == kind.name())
    }
}

/// Complex multiply-accumulates per node-iteration of `kind`'s adaptation
/// step at dimensions `(m, d)`.
pub fn count_macs(kind: AlgorithmKind, m: usize, d: usize) -> u64 {
    kind.adapt_macs(m, d)
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub traces: Vec<MseTrace>,
    pub cost: CostReport,
    /// Checksum of the sample stream each algorithm consumed, per run.
    pub stream_checksums: Vec<Vec<u64>>,
    /// Traffic counters summed over runs.
    pub counters: Vec<TrafficCounters>,
    /// Run 1's streams when `dump_streams` is set.
    pub streams: Option<Vec<Vec<SignalSample>>>,
}

impl ScenarioResult {
    pub fn trace(&self, kind: AlgorithmKind) -> Option<&MseTrace> {
        self.traces.iter().find(|t| t.algorithm == kind.name())
    }
}

#[derive(Debug)]
struct RunOutput {
    mse: Vec<Vec<f64>>,
    msd: Vec<Vec<f64>>,
    checksums: Vec<u64>,
    counters: Vec<TrafficCounters>,
    streams: Option<Vec<Vec<SignalSample>>>,
}

/// Independent RNG stream for `(seed, run, purpose)`.
fn stream_rng(seed: u64, run: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((run as u64) << 8 | purpose);
    rng
}

const TRUTH_STREAM: u64 = 0;
const SIGNAL_STREAM: u64 = 1;

/// FNV-1a over the bit patterns of a sample slice.
#[derive(Debug, Clone)]
struct StreamChecksum(u64);

impl Default for StreamChecksum {
    fn default() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }
}

impl Hasher for StreamChecksum {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }
}

impl StreamChecksum {
    fn absorb(&mut self, samples: &[SignalSample]) {
        for s in samples {
            for v in s.x.iter().chain(std::iter::once(&s.d)) {
                self.write_u64(v.re.to_bits());
                self.write_u64(v.im.to_bits());
            }
        }
    }
}

fn topology_for_run(config: &ScenarioConfig, run: usize) -> Result<Topology, TopologyError> {
    let seed = if config.average_topologies {
        config.topology_seed.wrapping_add(run as u64 * 1_000_003)
    } else {
        config.topology_seed
    };
    generate_geometric_topology(config.n_nodes, config.radius, seed)
}

fn simulate_run(config: &ScenarioConfig, run: usize, weights: &CombinationMatrix) -> Result<RunOutput, HarnessError> {
    let sparse = config.sparse.then_some(config.d);
    let truth = build_ground_truth(config.m, sparse, &mut stream_rng(config.signal_seed, run, TRUTH_STREAM));
    let mut rng = stream_rng(config.signal_seed, run, SIGNAL_STREAM);
    let mut signal = NetworkSignal::new(truth.clone(), &config.node_alphas(), config.noise_var);

    let params = config.estimator_params();
    let n = config.n_nodes as f64;
    let mut estimators: Vec<_> = config.algorithms.iter().map(|&k| build_estimator(k, &params, config.n_nodes)).collect();
    let mut mse = vec![vec![0.0; config.iterations]; estimators.len()];
    let mut msd = vec![vec![0.0; config.iterations]; estimators.len()];
    let mut checksums = vec![StreamChecksum::default(); estimators.len()];
    let mut streams = (config.dump_streams && run == 0).then(Vec::new);

    for i in 0..config.iterations {
        let samples = signal.next_samples(&mut rng);
        for (a, estimator) in estimators.iter_mut().enumerate() {
            checksums[a].absorb(&samples);
            msd[a][i] = estimator.mean_square_deviation(&truth.w0);
            let errors = estimator.step(&samples, weights).map_err(|source| HarnessError::Algorithm {
                algorithm: estimator.kind().name(),
                run,
                iteration: i + 1,
                source,
            })?;
            mse[a][i] = errors.iter().map(|e| e.norm_sqr()).sum::<f64>() / n;
        }
        if let Some(streams) = streams.as_mut() {
            streams.push(samples);
        }
    }
    Ok(RunOutput {
        mse,
        msd,
        checksums: checksums.iter().map(Hasher::finish).collect(),
        counters: estimators.iter().map(|e| e.counters().clone()).collect(),
        streams,
    })
}

fn worker_threads() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse::<usize>().ok().filter(|&n| n > 0)
}

/// Runs every Monte-Carlo repetition of `config` and aggregates the traces.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioResult, HarnessError> {
    config.validate()?;
    let fixed = if config.average_topologies { None } else { Some(metropolis_weights(&topology_for_run(config, 0)?)) };
    let one_run = |run: usize| -> Result<RunOutput, HarnessError> {
        match &fixed {
            Some(weights) => simulate_run(config, run, weights),
            None => simulate_run(config, run, &metropolis_weights(&topology_for_run(config, run)?)),
        }
    };
    let outputs: Vec<RunOutput> = match worker_threads() {
        Some(1) => (0..config.runs).map(one_run).collect::<Result<_, _>>()?,
        threads => {
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(t) = threads {
                builder = builder.num_threads(t);
            }
            let pool = builder.build().map_err(|e| HarnessError::ThreadPool(e.to_string()))?;
            pool.install(|| (0..config.runs).into_par_iter().map(one_run).collect::<Result<_, _>>())?
        }
    };
    Ok(aggregate(config, outputs))
}

fn aggregate(config: &ScenarioConfig, outputs: Vec<RunOutput>) -> ScenarioResult {
    let n_alg = config.algorithms.len();
    let mut mse = vec![vec![0.0; config.iterations]; n_alg];
    let mut msd = vec![vec![0.0; config.iterations]; n_alg];
    let mut counters: Vec<TrafficCounters> = (0..n_alg).map(|_| TrafficCounters::new(config.n_nodes)).collect();
    let mut stream_checksums = Vec::with_capacity(outputs.len());
    let mut streams = None;
    for output in outputs {
        for a in 0..n_alg {
            for (acc, v) in mse[a].iter_mut().zip(&output.mse[a]) {
                *acc += v;
            }
            for (acc, v) in msd[a].iter_mut().zip(&output.msd[a]) {
                *acc += v;
            }
            counters[a].merge(&output.counters[a]);
        }
        stream_checksums.push(output.checksums);
        if output.streams.is_some() {
            streams = output.streams;
        }
    }
    let runs = config.runs as f64;
    let traces = config
        .algorithms
        .iter()
        .enumerate()
        .map(|(a, kind)| MseTrace {
            algorithm: kind.name().to_string(),
            mse_db: mse[a].iter().map(|v| to_db(v / runs)).collect(),
            msd_db: msd[a].iter().map(|v| to_db(v / runs)).collect(),
            runs: config.runs,
        })
        .collect();
    let cost = CostReport {
        entries: config
            .algorithms
            .iter()
            .zip(&counters)
            .map(|(kind, c)| CostEntry {
                algorithm: kind.name().to_string(),
                macs_per_node_iter: count_macs(*kind, config.m, config.d),
                scalars_tx_per_node_iter: c.scalars_per_node_iteration(),
            })
            .collect(),
    };
    ScenarioResult { traces, cost, stream_checksums, counters, streams }
}
