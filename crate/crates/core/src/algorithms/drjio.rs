//! Reduced-rank joint iterative NLMS over a diffusion network.
//!
//! Each node keeps an `M x D` projection `S` locally and estimates a
//! `D`-dimensional parameter `w_bar` on the projected regressor
//! `x_bar = S^H x`. Per iteration a node computes one a-priori error with
//! both quantities from time `i-1`, uses it to form the local estimate
//! `psi_bar = w_bar + mu e^* x_bar` (broadcast, `D` scalars) and to update
//! `S += eta e^* x w_bar^H`, then combines its neighbors' `psi_bar`.
//! The full-rank estimate is `S w_bar`.

use nalgebra::DMatrix;

use super::{
    check_samples, combine_messages, AlgorithmError, AlgorithmKind, EstimatorParams,
    LocalEstimateMessage, NetworkEstimator, TrafficCounters,
};
use crate::network::CombinationMatrix;
use crate::signal::SignalSample;
use crate::{CMatrix, CVector, C64};

/// Which energy normalizes the reduced-rank step size `mu(i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepNormalization {
    /// `mu0 / (x^H x + eps)`, the full input energy.
    #[default]
    FullInput,
    /// `mu0 / (x_bar^H x_bar + eps)`, the projected input energy.
    ReducedInput,
}

impl std::str::FromStr for StepNormalization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "full" => Ok(Self::FullInput),
            "reduced" => Ok(Self::ReducedInput),
            other => Err(format!("expected `full` or `reduced`, found {other:?}")),
        }
    }
}

/// Per-node state: projection `s_d`, reduced estimate `w_bar` and step constants.
#[derive(Debug, Clone, PartialEq)]
pub struct DrjioNodeState {
    pub s_d: CMatrix,
    pub w_bar: CVector,
    pub mu0: f64,
    pub eta0: f64,
    pub eps: f64,
    pub normalization: StepNormalization,
    /// When false the projection is held fixed and only `w_bar` adapts.
    pub adapt_projection: bool,
}

impl DrjioNodeState {
    /// `S(0) = [I_D 0]^T`, `w_bar(0) = 0`.
    pub fn new(m: usize, d: usize, mu0: f64, eta0: f64, eps: f64) -> Self {
        assert!(d >= 1 && d <= m, "reduced dimension must satisfy 1 <= d <= m");
        Self {
            s_d: DMatrix::identity(m, d),
            w_bar: CVector::zeros(d),
            mu0,
            eta0,
            eps,
            normalization: StepNormalization::FullInput,
            adapt_projection: true,
        }
    }

    pub fn full_dim(&self) -> usize {
        self.s_d.nrows()
    }

    pub fn reduced_dim(&self) -> usize {
        self.s_d.ncols()
    }

    /// `mu(i)` for the given full and reduced regressors.
    pub fn reduced_step(&self, x: &CVector, x_bar: &CVector) -> f64 {
        let energy = match self.normalization {
            StepNormalization::FullInput => x.norm_squared(),
            StepNormalization::ReducedInput => x_bar.norm_squared(),
        };
        self.mu0 / (energy + self.eps)
    }

    /// `eta(i) = eta0 / (w_bar^H w_bar * x^H x + eps)`.
    pub fn projection_step(&self, x: &CVector) -> f64 {
        self.eta0 / (self.w_bar.norm_squared() * x.norm_squared() + self.eps)
    }

    /// Local reduced-rank estimate from a precomputed projection and error.
    pub fn local_estimate(&self, x: &CVector, x_bar: &CVector, e: C64) -> CVector {
        let mu = self.reduced_step(x, x_bar);
        let mut psi = self.w_bar.clone();
        psi.axpy(e.conj() * mu, x_bar, C64::new(1.0, 0.0));
        psi
    }

    /// Adaptation step: returns `psi_bar` without touching `w_bar`, which the
    /// combination step overwrites.
    pub fn adapt(&self, origin: usize, x: &CVector, d: C64) -> LocalEstimateMessage {
        let x_bar = dim_reduce(&self.s_d, x);
        let e = d - self.w_bar.dotc(&x_bar);
        LocalEstimateMessage { origin, payload: self.local_estimate(x, &x_bar, e) }
    }

    /// `S(i) = S(i-1) + eta(i) e^* x w_bar^H(i-1)`.
    pub fn update_projection(&mut self, x: &CVector, e: C64) {
        if !self.adapt_projection {
            return;
        }
        let eta = self.projection_step(x);
        self.s_d.gerc(e.conj() * eta, x, &self.w_bar, C64::new(1.0, 0.0));
    }
}

/// `x_bar = S^H x`.
pub fn dim_reduce(s_d: &CMatrix, x: &CVector) -> CVector {
    s_d.ad_mul(x)
}

/// A-priori error `d - w_bar^H S^H x`.
pub fn drjio_error(w_bar: &CVector, s_d: &CMatrix, x: &CVector, d: C64) -> C64 {
    d - w_bar.dotc(&dim_reduce(s_d, x))
}

/// Combines the reduced-rank messages of node `node`'s neighborhood.
pub fn drjio_combine(
    node: usize,
    messages: &[LocalEstimateMessage],
    weights: &CombinationMatrix,
) -> Result<CVector, AlgorithmError> {
    combine_messages(node, messages, weights)
}

/// Full-rank estimate `S w_bar`.
pub fn drjio_reconstruct(state: &DrjioNodeState) -> CVector {
    &state.s_d * &state.w_bar
}

#[derive(Debug, Clone)]
pub struct DrjioNetwork {
    pub nodes: Vec<DrjioNodeState>,
    counters: TrafficCounters,
}

impl DrjioNetwork {
    pub fn new(n_nodes: usize, params: &EstimatorParams) -> Self {
        let nodes = (0..n_nodes)
            .map(|_| {
                let mut node = DrjioNodeState::new(params.m, params.d, params.mu0, params.eta0, params.eps);
                node.normalization = params.normalization;
                node
            })
            .collect();
        Self::from_nodes(nodes)
    }

    pub fn from_nodes(nodes: Vec<DrjioNodeState>) -> Self {
        let counters = TrafficCounters::new(nodes.len());
        Self { nodes, counters }
    }

    /// One iteration with an explicit processing order for the adaptation
    /// phase. Results do not depend on `order`.
    pub fn step_in_order(
        &mut self,
        samples: &[SignalSample],
        weights: &CombinationMatrix,
        order: &[usize],
    ) -> Result<Vec<C64>, AlgorithmError> {
        let n = self.nodes.len();
        let m = self.nodes.first().map_or(0, DrjioNodeState::full_dim);
        let d = self.nodes.first().map_or(0, DrjioNodeState::reduced_dim);
        check_samples(samples, n, m)?;
        for (node, state) in self.nodes.iter().enumerate() {
            if state.full_dim() != m || state.reduced_dim() != d {
                return Err(AlgorithmError::Dimension { node, got: state.reduced_dim(), expected: d });
            }
        }

        // Phase 1: adapt from the frozen i-1 snapshot. Each node only reads
        // and writes its own state here.
        let mut messages: Vec<LocalEstimateMessage> =
            (0..n).map(|origin| LocalEstimateMessage { origin, payload: CVector::zeros(0) }).collect();
        let mut errors = vec![C64::new(0.0, 0.0); n];
        for &k in order {
            let state = &mut self.nodes[k];
            let SignalSample { x, d } = &samples[k];
            let x_bar = dim_reduce(&state.s_d, x);
            let e = *d - state.w_bar.dotc(&x_bar);
            messages[k].payload = state.local_estimate(x, &x_bar, e);
            state.update_projection(x, e);
            errors[k] = e;
        }

        // Phase 2: combine.
        let adapt_macs = AlgorithmKind::Drjio.adapt_macs(m, d);
        for k in 0..n {
            self.nodes[k].w_bar = drjio_combine(k, &messages, weights)?;
            self.counters.macs[k] += adapt_macs + (d * weights.neighbors(k).len()) as u64;
        }
        for message in &messages {
            self.counters.record_broadcast(message.origin, message.payload.len());
        }
        self.counters.iterations += 1;
        if let Some(node) = self.nodes.iter().position(|s| !s.w_bar.iter().all(|v| v.is_finite())) {
            return Err(AlgorithmError::NonFinite { algorithm: AlgorithmKind::Drjio.name(), node });
        }
        Ok(errors)
    }
}

impl NetworkEstimator for DrjioNetwork {
    fn kind(&self) -> AlgorithmKind {
        AlgorithmKind::Drjio
    }

    fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn step(&mut self, samples: &[SignalSample], weights: &CombinationMatrix) -> Result<Vec<C64>, AlgorithmError> {
        let order: Vec<usize> = (0..self.nodes.len()).collect();
        self.step_in_order(samples, weights, &order)
    }

    fn full_rank_estimates(&self) -> Vec<CVector> {
        self.nodes.iter().map(drjio_reconstruct).collect()
    }

    fn counters(&self) -> &TrafficCounters {
        &self.counters
    }
}
