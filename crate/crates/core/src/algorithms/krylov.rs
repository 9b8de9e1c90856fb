//! Fixed-projection Krylov-subspace NLMS baseline.
//!
//! Each node spends a warm-up window collecting sample estimates of
//! `R = E[x x^H]` and `p = E[x d^*]` while its estimate stays at zero, then
//! freezes an orthonormal basis of `span{p, Rp, ..., R^{D-1} p}` and runs NLMS
//! restricted to that subspace. Estimates are exchanged at full rank.

use log::warn;

use super::{
    check_samples, combine_phase, AlgorithmError, AlgorithmKind, EstimatorParams, LocalEstimateMessage,
    NetworkEstimator, TrafficCounters,
};
use crate::network::CombinationMatrix;
use crate::signal::SignalSample;
use crate::{CMatrix, CVector, C64};

/// Relative residual below which a new Krylov direction is treated as
/// linearly dependent.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct KrylovBasis {
    /// `M x r` matrix with orthonormal columns, `r <= requested`.
    pub basis: CMatrix,
    pub requested: usize,
}

impl KrylovBasis {
    pub fn is_truncated(&self) -> bool {
        self.basis.ncols() < self.requested
    }
}

/// Orthonormal basis of the `d`-dimensional Krylov subspace generated by
/// `r_hat` from `p_hat`, built with Arnoldi and two passes of Gram-Schmidt.
/// When the subspace has lower dimension the basis is truncated and a warning
/// is logged.
pub fn build_krylov_projection(r_hat: &CMatrix, p_hat: &CVector, d: usize) -> Result<KrylovBasis, AlgorithmError> {
    let m = p_hat.len();
    if r_hat.nrows() != m || r_hat.ncols() != m {
        return Err(AlgorithmError::Krylov(format!(
            "correlation is {}x{}, cross-correlation has length {m}",
            r_hat.nrows(),
            r_hat.ncols()
        )));
    }
    if d == 0 || d > m {
        return Err(AlgorithmError::Krylov(format!("rank {d} outside 1..={m}")));
    }
    let p_norm = p_hat.norm();
    if !(p_norm > 0.0) || !p_norm.is_finite() {
        return Err(AlgorithmError::Krylov("cross-correlation vector is zero".into()));
    }
    let mut columns: Vec<CVector> = vec![p_hat.unscale(p_norm)];
    while columns.len() < d {
        let mut v = r_hat * columns.last().expect("basis is nonempty");
        let scale = v.norm();
        for _ in 0..2 {
            for q in &columns {
                let proj = q.dotc(&v);
                v.axpy(-proj, q, C64::new(1.0, 0.0));
            }
        }
        let residual = v.norm();
        if !(residual > RANK_TOLERANCE * scale.max(f64::MIN_POSITIVE)) {
            warn!("krylov subspace has dimension {} < requested {d}; truncating", columns.len());
            break;
        }
        columns.push(v.unscale(residual));
    }
    Ok(KrylovBasis { basis: CMatrix::from_columns(&columns), requested: d })
}

#[derive(Debug, Clone)]
pub struct KrylovNetwork {
    pub estimates: Vec<CVector>,
    /// Frozen per-node projections, available once the warm-up ends.
    pub projections: Vec<Option<CMatrix>>,
    r_sums: Vec<CMatrix>,
    p_sums: Vec<CVector>,
    warmup: usize,
    seen: usize,
    rank: usize,
    mu0: f64,
    eps: f64,
    counters: TrafficCounters,
}

impl KrylovNetwork {
    pub fn new(n_nodes: usize, params: &EstimatorParams) -> Self {
        let m = params.m;
        Self {
            estimates: vec![CVector::zeros(m); n_nodes],
            projections: vec![None; n_nodes],
            r_sums: vec![CMatrix::zeros(m, m); n_nodes],
            p_sums: vec![CVector::zeros(m); n_nodes],
            warmup: params.krylov_warmup.max(1),
            seen: 0,
            rank: params.d,
            mu0: params.mu0,
            eps: params.eps,
            counters: TrafficCounters::new(n_nodes),
        }
    }

    fn freeze_projections(&mut self) -> Result<(), AlgorithmError> {
        let scale = 1.0 / self.seen as f64;
        for k in 0..self.estimates.len() {
            let r_hat = &self.r_sums[k] * C64::new(scale, 0.0);
            let p_hat = &self.p_sums[k] * C64::new(scale, 0.0);
            let basis = build_krylov_projection(&r_hat, &p_hat, self.rank)?;
            self.projections[k] = Some(basis.basis);
        }
        // statistics are no longer needed
        self.r_sums = Vec::new();
        self.p_sums = Vec::new();
        Ok(())
    }
}

impl NetworkEstimator for KrylovNetwork {
    fn kind(&self) -> AlgorithmKind {
        AlgorithmKind::KrylovNlms
    }

    fn node_count(&self) -> usize {
        self.estimates.len()
    }

    fn step(&mut self, samples: &[SignalSample], weights: &CombinationMatrix) -> Result<Vec<C64>, AlgorithmError> {
        let m = self.estimates.first().map_or(0, |w| w.len());
        check_samples(samples, self.estimates.len(), m)?;
        let one = C64::new(1.0, 0.0);
        let mut errors = Vec::with_capacity(samples.len());
        let mut messages = Vec::with_capacity(samples.len());
        let warming_up = self.projections.iter().any(Option::is_none);
        for (k, s) in samples.iter().enumerate() {
            let w = &self.estimates[k];
            let e = s.d - w.dotc(&s.x);
            errors.push(e);
            let mut psi = w.clone();
            if warming_up {
                self.r_sums[k].gerc(one, &s.x, &s.x, one);
                self.p_sums[k].axpy(s.d.conj(), &s.x, one);
            } else {
                let basis = self.projections[k].as_ref().expect("projection frozen");
                let x_bar = basis.ad_mul(&s.x);
                let mu = self.mu0 / (x_bar.norm_squared() + self.eps);
                psi.gemv(e.conj() * mu, basis, &x_bar, one);
            }
            messages.push(LocalEstimateMessage { origin: k, payload: psi });
        }
        let macs = if warming_up {
            // x x^H and x d^* accumulation
            (m * m + m) as u64
        } else {
            let d = self.projections[0].as_ref().map_or(self.rank, |b| b.ncols());
            AlgorithmKind::KrylovNlms.adapt_macs(m, d)
        };
        combine_phase(&messages, weights, &mut self.estimates, &mut self.counters, macs)?;
        if warming_up {
            self.seen += 1;
            if self.seen >= self.warmup {
                self.freeze_projections()?;
            }
        }
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

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(rng: &mut ChaCha8Rng, m: usize) -> CMatrix {
        let a = CMatrix::from_fn(m, m, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        &a * a.adjoint() + CMatrix::identity(m, m)
    }

    #[test]
    fn identity_correlation_collapses() {
        let p = CVector::from_vec(vec![C64::new(1.0, 1.0), C64::new(0.0, 2.0), C64::new(0.0, 0.0)]);
        let basis = build_krylov_projection(&CMatrix::identity(3, 3), &p, 2).unwrap();
        assert!(basis.is_truncated());
        assert_eq!(basis.basis.ncols(), 1);
    }

    #[test]
    fn orthonormal_and_spans_krylov_sequence() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = 8;
        let r = random_hermitian(&mut rng, m);
        let p = CVector::from_fn(m, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let kb = build_krylov_projection(&r, &p, 4).unwrap();
        let q = &kb.basis;
        assert_eq!(q.ncols(), 4);
        let gram = q.adjoint() * q;
        assert!((gram - CMatrix::identity(4, 4)).camax() < 1e-10);
        // every power R^j p lies in the span
        let mut v = p.clone();
        for _ in 0..4 {
            let residual = &v - q * (q.adjoint() * &v);
            assert!(residual.norm() < 1e-9 * v.norm());
            v = &r * v;
        }
    }

    #[test]
    fn zero_cross_correlation_errors() {
        assert!(build_krylov_projection(&CMatrix::identity(3, 3), &CVector::zeros(3), 2).is_err());
    }
}
