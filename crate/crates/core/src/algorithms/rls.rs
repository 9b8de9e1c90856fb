use nalgebra::DMatrix;

use super::{
    check_samples, combine_phase, AlgorithmError, AlgorithmKind, LocalEstimateMessage, NetworkEstimator,
    TrafficCounters,
};
use crate::network::CombinationMatrix;
use crate::signal::SignalSample;
use crate::{CMatrix, CVector, C64};

/// Diffusion RLS: every node runs exponentially weighted RLS on its own data
/// (`P_k(0) = I / delta`) and the intermediate estimates are combined as in
/// the other ATC schemes. `P_k` stays local.
#[derive(Debug, Clone)]
pub struct RlsNetwork {
    pub estimates: Vec<CVector>,
    /// Inverse correlation matrices `P_k`, Hermitian positive definite.
    pub inverse_correlations: Vec<CMatrix>,
    pub lambda: f64,
    pub delta: f64,
    counters: TrafficCounters,
    px: CVector,
}

impl RlsNetwork {
    pub fn new(n_nodes: usize, m: usize, lambda: f64, delta: f64) -> Self {
        assert!(delta > 0.0, "rls delta must be positive");
        assert!(lambda > 0.0 && lambda <= 1.0, "forgetting factor must lie in (0, 1]");
        let p0 = DMatrix::identity(m, m).unscale(delta);
        Self {
            estimates: vec![CVector::zeros(m); n_nodes],
            inverse_correlations: vec![p0; n_nodes],
            lambda,
            delta,
            counters: TrafficCounters::new(n_nodes),
            px: CVector::zeros(m),
        }
    }

    fn dim(&self) -> usize {
        self.px.len()
    }
}

/// Replaces `p` by its Hermitian part.
pub(crate) fn symmetrize(p: &mut CMatrix) {
    let n = p.nrows();
    for i in 0..n {
        p[(i, i)].im = 0.0;
        for j in i + 1..n {
            let avg = (p[(i, j)] + p[(j, i)].conj()) * 0.5;
            p[(i, j)] = avg;
            p[(j, i)] = avg.conj();
        }
    }
}

impl NetworkEstimator for RlsNetwork {
    fn kind(&self) -> AlgorithmKind {
        AlgorithmKind::DiffusionRls
    }

    fn node_count(&self) -> usize {
        self.estimates.len()
    }

    fn step(&mut self, samples: &[SignalSample], weights: &CombinationMatrix) -> Result<Vec<C64>, AlgorithmError> {
        let m = self.dim();
        check_samples(samples, self.estimates.len(), m)?;
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let mut errors = Vec::with_capacity(samples.len());
        let mut messages = Vec::with_capacity(samples.len());
        for (k, s) in samples.iter().enumerate() {
            let p = &mut self.inverse_correlations[k];
            self.px.gemv(one, p, &s.x, zero);
            let denom = self.lambda + s.x.dotc(&self.px).re;
            let e = s.d - self.estimates[k].dotc(&s.x);
            errors.push(e);
            // gain g = P x / denom
            let mut psi = self.estimates[k].clone();
            psi.axpy(e.conj() / denom, &self.px, one);
            // P <- (P - g (P x)^H) / lambda
            p.gerc(C64::new(-1.0 / denom, 0.0), &self.px, &self.px, one);
            p.unscale_mut(self.lambda);
            symmetrize(p);
            if !p.iter().all(|v| v.is_finite()) || !denom.is_finite() {
                return Err(AlgorithmError::NonFinite { algorithm: self.kind().name(), node: k });
            }
            messages.push(LocalEstimateMessage { origin: k, payload: psi });
        }
        let macs = AlgorithmKind::DiffusionRls.adapt_macs(m, 0);
        combine_phase(&messages, weights, &mut self.estimates, &mut self.counters, macs)?;
        Ok(errors)
    }

    fn full_rank_estimates(&self) -> Vec<CVector> {
        self.estimates.clone()
    }

    fn counters(&self) -> &TrafficCounters {
        &self.counters
    }
}
