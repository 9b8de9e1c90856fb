use super::{
    check_samples, combine_phase, AlgorithmError, AlgorithmKind, LocalEstimateMessage, NetworkEstimator,
    TrafficCounters,
};
use crate::network::CombinationMatrix;
use crate::signal::SignalSample;
use crate::{CVector, C64};

/// Adapt-then-combine diffusion NLMS:
/// `psi_k = w_k + mu0 / (x^H x + eps) * x e^*`, then `w_k = sum c_kl psi_l`.
#[derive(Debug, Clone)]
pub struct NlmsNetwork {
    pub estimates: Vec<CVector>,
    pub mu0: f64,
    pub eps: f64,
    counters: TrafficCounters,
}

impl NlmsNetwork {
    pub fn new(n_nodes: usize, m: usize, mu0: f64, eps: f64) -> Self {
        Self {
            estimates: vec![CVector::zeros(m); n_nodes],
            mu0,
            eps,
            counters: TrafficCounters::new(n_nodes),
        }
    }

    fn dim(&self) -> usize {
        self.estimates.first().map_or(0, |w| w.len())
    }
}

impl NetworkEstimator for NlmsNetwork {
    fn kind(&self) -> AlgorithmKind {
        AlgorithmKind::DiffusionNlms
    }

    fn node_count(&self) -> usize {
        self.estimates.len()
    }

    fn step(&mut self, samples: &[SignalSample], weights: &CombinationMatrix) -> Result<Vec<C64>, AlgorithmError> {
        let m = self.dim();
        check_samples(samples, self.estimates.len(), m)?;
        let mut errors = Vec::with_capacity(samples.len());
        let messages: Vec<LocalEstimateMessage> = self
            .estimates
            .iter()
            .zip(samples)
            .enumerate()
            .map(|(origin, (w, s))| {
                let e = s.d - w.dotc(&s.x);
                errors.push(e);
                let mu = self.mu0 / (s.x.norm_squared() + self.eps);
                let mut psi = w.clone();
                psi.axpy(e.conj() * mu, &s.x, C64::new(1.0, 0.0));
                LocalEstimateMessage { origin, payload: psi }
            })
            .collect();
        let macs = AlgorithmKind::DiffusionNlms.adapt_macs(m, 0);
        combine_phase(&messages, weights, &mut self.estimates, &mut self.counters, macs)?;
        if let Some(node) = self.estimates.iter().position(|w| !w.iter().all(|v| v.is_finite())) {
            return Err(AlgorithmError::NonFinite { algorithm: self.kind().name(), node });
        }
        Ok(errors)
    }

    fn full_rank_estimates(&self) -> Vec<CVector> {
        self.estimates.clone()
    }

    fn counters(&self) -> &TrafficCounters {
        &self.counters
    }
}
