//! Diffusion estimators under a common adapt-then-combine interface.
//!
//! Every algorithm runs one iteration per call to [`NetworkEstimator::step`]:
//! all nodes adapt from their time `i-1` state and broadcast a
//! [`LocalEstimateMessage`], then every node convexly combines the messages
//! of its neighborhood. Messages are the unit the traffic counters meter.

mod drjio;
mod krylov;
mod nlms;
mod rls;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::network::CombinationMatrix;
use crate::signal::SignalSample;
use crate::{CVector, C64};

pub use drjio::{
    dim_reduce, drjio_combine, drjio_error, drjio_reconstruct, DrjioNetwork, DrjioNodeState,
    StepNormalization,
};
pub use krylov::{build_krylov_projection, KrylovBasis, KrylovNetwork};
pub use nlms::NlmsNetwork;
pub use rls::RlsNetwork;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgorithmError {
    #[error("node {node} is missing the message from neighbor {from}")]
    MissingMessage { node: usize, from: usize },
    #[error("message from node {origin} carries {got} scalars, expected {expected}")]
    PayloadLength { origin: usize, got: usize, expected: usize },
    #[error("expected {expected} per-node samples, got {got}")]
    SampleCount { expected: usize, got: usize },
    #[error("node {node}: regressor has length {got}, expected {expected}")]
    Dimension { node: usize, got: usize, expected: usize },
    #[error("{algorithm}: non-finite state at node {node}")]
    NonFinite { algorithm: &'static str, node: usize },
    #[error("krylov projection: {0}")]
    Krylov(String),
}

/// The payload a node broadcasts to its neighbors in one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalEstimateMessage {
    pub origin: usize,
    pub payload: CVector,
}

/// Per-node traffic and arithmetic meters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrafficCounters {
    pub iterations: u64,
    pub messages_tx: Vec<u64>,
    pub scalars_tx: Vec<u64>,
    pub macs: Vec<u64>,
}

impl TrafficCounters {
    pub fn new(n_nodes: usize) -> Self {
        Self {
            iterations: 0,
            messages_tx: vec![0; n_nodes],
            scalars_tx: vec![0; n_nodes],
            macs: vec![0; n_nodes],
        }
    }

    pub(crate) fn record_broadcast(&mut self, node: usize, payload_len: usize) {
        self.messages_tx[node] += 1;
        self.scalars_tx[node] += payload_len as u64;
    }

    /// Transmitted complex scalars per node per iteration, averaged.
    pub fn scalars_per_node_iteration(&self) -> f64 {
        let nodes = self.scalars_tx.len() as f64;
        if self.iterations == 0 || nodes == 0.0 {
            return 0.0;
        }
        self.scalars_tx.iter().sum::<u64>() as f64 / (nodes * self.iterations as f64)
    }

    pub fn macs_per_node_iteration(&self) -> f64 {
        let nodes = self.macs.len() as f64;
        if self.iterations == 0 || nodes == 0.0 {
            return 0.0;
        }
        self.macs.iter().sum::<u64>() as f64 / (nodes * self.iterations as f64)
    }

    pub fn merge(&mut self, other: &TrafficCounters) {
        self.iterations += other.iterations;
        for (a, b) in self.messages_tx.iter_mut().zip(&other.messages_tx) {
            *a += b;
        }
        for (a, b) in self.scalars_tx.iter_mut().zip(&other.scalars_tx) {
            *a += b;
        }
        for (a, b) in self.macs.iter_mut().zip(&other.macs) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AlgorithmKind {
    Drjio,
    DiffusionNlms,
    DiffusionRls,
    KrylovNlms,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 4] =
        [Self::Drjio, Self::DiffusionNlms, Self::DiffusionRls, Self::KrylovNlms];

    pub fn name(self) -> &'static str {
        match self {
            Self::Drjio => "drjio-nlms",
            Self::DiffusionNlms => "diffusion-nlms",
            Self::DiffusionRls => "diffusion-rls",
            Self::KrylovNlms => "krylov-nlms",
        }
    }

    /// Complex multiply-accumulates one node spends in the adaptation phase of
    /// one iteration, counted from the implemented update formulas. The
    /// combination step adds one payload length per neighbor on top.
    ///
    /// Krylov figures are for the adaptive phase after the projection is built.
    pub fn adapt_macs(self, m: usize, d: usize) -> u64 {
        let (m, d) = (m as u64, d as u64);
        match self {
            // S^H x, ||x||^2, w^H xbar, psi update, ||w||^2, rank-one S update
            Self::Drjio => m * d + m + d + d + d + m * d,
            // w^H x, ||x||^2, psi update
            Self::DiffusionNlms => 3 * m,
            // P x, x^H P x, w^H x, psi update, rank-one P update
            Self::DiffusionRls => m * m + m + m + m + m * m,
            // S^H x, ||xbar||^2, w^H x, S xbar, psi update
            Self::KrylovNlms => m * d + d + m + m * d + m,
        }
    }

    /// Length of the broadcast payload.
    pub fn payload_len(self, m: usize, d: usize) -> usize {
        match self {
            Self::Drjio => d,
            _ => m,
        }
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "drjio-nlms" | "drjio" => Ok(Self::Drjio),
            "diffusion-nlms" | "nlms" => Ok(Self::DiffusionNlms),
            "diffusion-rls" | "rls" => Ok(Self::DiffusionRls),
            "krylov-nlms" | "krylov" => Ok(Self::KrylovNlms),
            other => Err(format!("unknown algorithm {other:?}")),
        }
    }
}

/// Common per-iteration interface shared by all diffusion estimators.
pub trait NetworkEstimator: Send {
    fn kind(&self) -> AlgorithmKind;

    fn node_count(&self) -> usize;

    /// One adapt-then-combine iteration. Returns each node's a-priori error
    /// `d_k(i) - w_k(i-1)^H x_k(i)`.
    fn step(&mut self, samples: &[SignalSample], weights: &CombinationMatrix) -> Result<Vec<C64>, AlgorithmError>;

    /// Current full-rank estimate of every node.
    fn full_rank_estimates(&self) -> Vec<CVector>;

    fn counters(&self) -> &TrafficCounters;

    /// Network-averaged squared deviation from `w0`.
    fn mean_square_deviation(&self, w0: &CVector) -> f64 {
        let estimates = self.full_rank_estimates();
        estimates.iter().map(|w| (w - w0).norm_squared()).sum::<f64>() / estimates.len() as f64
    }
}

/// Convex combination `sum_{l in N_k} c_kl * payload_l` for node `k`.
///
/// `messages` may be in any order; every neighbor of `k` must have exactly
/// one message.
pub fn combine_messages(
    node: usize,
    messages: &[LocalEstimateMessage],
    weights: &CombinationMatrix,
) -> Result<CVector, AlgorithmError> {
    let len = messages.first().map_or(0, |m| m.payload.len());
    let mut out = CVector::zeros(len);
    for (l, c_kl) in weights.row(node) {
        let message = match messages.get(l) {
            Some(m) if m.origin == l => m,
            _ => messages
                .iter()
                .find(|m| m.origin == l)
                .ok_or(AlgorithmError::MissingMessage { node, from: l })?,
        };
        if message.payload.len() != len {
            return Err(AlgorithmError::PayloadLength {
                origin: l,
                got: message.payload.len(),
                expected: len,
            });
        }
        out.axpy(C64::new(c_kl, 0.0), &message.payload, C64::new(1.0, 0.0));
    }
    Ok(out)
}

pub(crate) fn check_samples(samples: &[SignalSample], n: usize, m: usize) -> Result<(), AlgorithmError> {
    if samples.len() != n {
        return Err(AlgorithmError::SampleCount { expected: n, got: samples.len() });
    }
    for (node, s) in samples.iter().enumerate() {
        if s.x.len() != m {
            return Err(AlgorithmError::Dimension { node, got: s.x.len(), expected: m });
        }
    }
    Ok(())
}

/// Combination phase shared by the full-rank baselines: combines the
/// broadcast messages into each node's estimate and meters the traffic.
pub(crate) fn combine_phase(
    messages: &[LocalEstimateMessage],
    weights: &CombinationMatrix,
    estimates: &mut [CVector],
    counters: &mut TrafficCounters,
    adapt_macs: u64,
) -> Result<(), AlgorithmError> {
    for (k, estimate) in estimates.iter_mut().enumerate() {
        *estimate = combine_messages(k, messages, weights)?;
        let payload = messages[k].payload.len() as u64;
        counters.macs[k] += adapt_macs + payload * weights.neighbors(k).len() as u64;
    }
    for message in messages {
        counters.record_broadcast(message.origin, message.payload.len());
    }
    counters.iterations += 1;
    Ok(())
}

/// Parameters shared by every algorithm in a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorParams {
    pub m: usize,
    pub d: usize,
    pub mu0: f64,
    pub eta0: f64,
    pub eps: f64,
    pub rls_lambda: f64,
    pub rls_delta: f64,
    pub krylov_warmup: usize,
    pub normalization: StepNormalization,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        Self {
            m: 20,
            d: 5,
            mu0: 0.15,
            eta0: 0.5,
            eps: 1e-8,
            rls_lambda: 0.99,
            rls_delta: 0.11,
            krylov_warmup: 200,
            normalization: StepNormalization::FullInput,
        }
    }
}

/// Builds the initial network state of `kind` for `n_nodes` nodes.
pub fn build_estimator(kind: AlgorithmKind, params: &EstimatorParams, n_nodes: usize) -> Box<dyn NetworkEstimator> {
    match kind {
        AlgorithmKind::Drjio => Box::new(DrjioNetwork::new(n_nodes, params)),
        AlgorithmKind::DiffusionNlms => Box::new(NlmsNetwork::new(n_nodes, params.m, params.mu0, params.eps)),
        AlgorithmKind::DiffusionRls => {
            Box::new(RlsNetwork::new(n_nodes, params.m, params.rls_lambda, params.rls_delta))
        }
        AlgorithmKind::KrylovNlms => Box::new(KrylovNetwork::new(n_nodes, params)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{metropolis_weights, Topology};

    #[test]
    fn parse_names() {
        for kind in AlgorithmKind::ALL {
            assert_eq!(kind.name().parse::<AlgorithmKind>().unwrap(), kind);
        }
        assert!("lms".parse::<AlgorithmKind>().is_err());
    }

    #[test]
    fn missing_neighbor_is_protocol_error() {
        let t = Topology::from_edges(2, &[(0, 1)]).unwrap();
        let c = metropolis_weights(&t);
        let messages = vec![LocalEstimateMessage { origin: 0, payload: CVector::zeros(2) }];
        assert_eq!(
            combine_messages(0, &messages, &c),
            Err(AlgorithmError::MissingMessage { node: 0, from: 1 })
        );
    }

    #[test]
    fn out_of_order_messages() {
        let t = Topology::from_edges(2, &[(0, 1)]).unwrap();
        let c = metropolis_weights(&t);
        let one = C64::new(1.0, 0.0);
        let messages = vec![
            LocalEstimateMessage { origin: 1, payload: CVector::from_element(1, one * 3.0) },
            LocalEstimateMessage { origin: 0, payload: CVector::from_element(1, one) },
        ];
        assert_eq!(combine_messages(0, &messages, &c).unwrap()[0], one * 2.0);
    }

    #[test]
    fn mac_ordering() {
        let nlms = AlgorithmKind::DiffusionNlms.adapt_macs(20, 5);
        let drjio = AlgorithmKind::Drjio.adapt_macs(20, 5);
        let rls = AlgorithmKind::DiffusionRls.adapt_macs(20, 5);
        assert!(nlms < drjio && drjio < rls);
    }
}
