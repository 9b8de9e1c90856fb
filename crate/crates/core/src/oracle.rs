//! Closed-form MMSE expressions and the constrained-update Lagrangian.
//!
//! These are the independent references the adaptive algorithms are checked
//! against. Inverses are never formed explicitly: every `A^{-1} b` is a
//! Cholesky solve with a residual bound, since all matrices inverted here are
//! Hermitian positive definite when well posed.

pub mod checks;

use nalgebra::Cholesky;
use thiserror::Error;

use crate::{CMatrix, CVector, C64};

/// Relative residual a linear solve must meet.
const SOLVE_RESIDUAL: f64 = 1e-10;
/// Smallest admissible ratio between the extreme Cholesky pivots (squared).
const PIVOT_RATIO: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("{0} is singular or not positive definite")]
    Singular(&'static str),
    #[error("solve against {name} left relative residual {residual:e}")]
    Residual { name: &'static str, residual: f64 },
    #[error("reduced-rank MMSE evaluated to {0:e} < 0: statistics are inconsistent")]
    NegativeMmse(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("statistics need at least one sample")]
    NoSamples,
}

/// Second-order statistics of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct StatisticsSnapshot {
    /// `R = E[x x^H]`, M x M.
    pub r: CMatrix,
    /// `p = E[d^* x]`, M x 1.
    pub p: CVector,
    /// `R_bar = E[x_bar x_bar^H]`, D x D.
    pub r_bar: CMatrix,
    /// `p_bar = E[d^* x_bar]`, D x 1.
    pub p_bar: CVector,
    /// `P_D = E[d^* x w_bar^H]`, M x D.
    pub p_d: CMatrix,
    /// `R_w = E[w_bar w_bar^H]`, D x D.
    pub r_wbar: CMatrix,
    /// `E[|d|^2]`.
    pub sigma_d2: f64,
}

impl StatisticsSnapshot {
    /// Statistics implied exactly by `d = w0^H x + n` with `E[x x^H] = r` and
    /// noise variance `sigma_n2`, for projection `s_d` and a fixed `w_bar`.
    pub fn exact(r: &CMatrix, w0: &CVector, sigma_n2: f64, s_d: &CMatrix, w_bar: &CVector) -> Self {
        let p = r * w0;
        let sigma_d2 = w0.dotc(&p).re + sigma_n2;
        Self {
            r_bar: s_d.adjoint() * r * s_d,
            p_bar: s_d.ad_mul(&p),
            p_d: &p * w_bar.adjoint(),
            r_wbar: w_bar * w_bar.adjoint(),
            r: r.clone(),
            p,
            sigma_d2,
        }
    }
}

fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// Empirical statistics over `(x, d, w_bar)` triples for projection `s_d`.
pub fn sample_statistics<'a, I>(s_d: &CMatrix, samples: I) -> Result<StatisticsSnapshot, OracleError>
where
    I: IntoIterator<Item = (&'a CVector, C64, &'a CVector)>,
{
    let (m, d) = s_d.shape();
    let mut r = CMatrix::zeros(m, m);
    let mut p = CVector::zeros(m);
    let mut p_d = CMatrix::zeros(m, d);
    let mut r_wbar = CMatrix::zeros(d, d);
    let mut sigma_d2 = 0.0;
    let one = C64::new(1.0, 0.0);
    let mut count = 0usize;
    for (x, dk, w_bar) in samples {
        if x.len() != m || w_bar.len() != d {
            return Err(OracleError::Dimension(format!(
                "sample has x of length {} and w_bar of length {}, projection is {m}x{d}",
                x.len(),
                w_bar.len()
            )));
        }
        r.gerc(one, x, x, one);
        p.axpy(dk.conj(), x, one);
        p_d.gerc(dk.conj(), x, w_bar, one);
        r_wbar.gerc(one, w_bar, w_bar, one);
        sigma_d2 += dk.norm_sqr();
        count += 1;
    }
    if count == 0 {
        return Err(OracleError::NoSamples);
    }
    let scale = C64::new(1.0 / count as f64, 0.0);
    let r = hermitian_part(&(r * scale));
    let p = p * scale;
    Ok(StatisticsSnapshot {
        r_bar: hermitian_part(&(s_d.adjoint() * &r * s_d)),
        p_bar: s_d.ad_mul(&p),
        p_d: p_d * scale,
        r_wbar: hermitian_part(&(r_wbar * scale)),
        r,
        p,
        sigma_d2: sigma_d2 / count as f64,
    })
}

/// Solves `a x = b` for Hermitian positive definite `a`.
pub fn hermitian_solve(name: &'static str, a: &CMatrix, b: &CMatrix) -> Result<CMatrix, OracleError> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(OracleError::Dimension(format!(
            "{name} is {}x{}, right-hand side has {} rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    let chol = Cholesky::new(a.clone()).ok_or(OracleError::Singular(name))?;
    let pivots = chol.l_dirty().diagonal().map(|v| v.re * v.re);
    let (lo, hi) = (pivots.min(), pivots.max());
    if !(lo > PIVOT_RATIO * hi) {
        return Err(OracleError::Singular(name));
    }
    let x = chol.solve(b);
    let scale = b.norm().max(f64::MIN_POSITIVE);
    let residual = (a * &x - b).norm() / scale;
    if residual > SOLVE_RESIDUAL && b.norm() > 0.0 {
        return Err(OracleError::Residual { name, residual });
    }
    Ok(x)
}

fn hermitian_solve_vec(name: &'static str, a: &CMatrix, b: &CVector) -> Result<CVector, OracleError> {
    let x = hermitian_solve(name, a, &CMatrix::from_column_slice(b.len(), 1, b.as_slice()))?;
    Ok(x.column(0).into_owned())
}

/// Optimal reduced-rank estimator for a fixed projection: `R_bar^{-1} p_bar`.
pub fn wbar_mmse(stats: &StatisticsSnapshot) -> Result<CVector, OracleError> {
    hermitian_solve_vec("R_bar", &stats.r_bar, &stats.p_bar)
}

/// Optimal projection for a fixed estimator: `R^{-1} P_D R_w^{-1}`.
pub fn sd_mmse(stats: &StatisticsSnapshot) -> Result<CMatrix, OracleError> {
    let left = hermitian_solve("R", &stats.r, &stats.p_d)?;
    // X R_w^{-1} = (R_w^{-1} X^H)^H for Hermitian R_w
    let right = hermitian_solve("R_w", &stats.r_wbar, &left.adjoint())?;
    Ok(right.adjoint())
}

/// Reduced-rank MMSE `sigma_d^2 - p_bar^H R_bar^{-1} p_bar`.
pub fn mmse_value(stats: &StatisticsSnapshot) -> Result<f64, OracleError> {
    let w = wbar_mmse(stats)?;
    let value = stats.sigma_d2 - stats.p_bar.dotc(&w).re;
    if value < -1e-10 {
        return Err(OracleError::NegativeMmse(value));
    }
    Ok(value)
}

/// Mean-square error `E|d - w_bar^H S^H x|^2` of an arbitrary pair, from the
/// full-rank statistics in `stats`.
pub fn joint_cost(stats: &StatisticsSnapshot, s_d: &CMatrix, w_bar: &CVector) -> f64 {
    let w = s_d * w_bar;
    stats.sigma_d2 - 2.0 * w.dotc(&stats.p).re + w.dotc(&(&stats.r * &w)).re
}

/// Evaluation point of the Lagrangian of the minimum-disturbance update.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianPoint {
    pub w_bar_prev: CVector,
    pub w_bar: CVector,
    pub s_prev: CMatrix,
    pub s: CMatrix,
    pub x: CVector,
    pub d: C64,
    pub lambda1: C64,
    pub lambda2: C64,
}

impl LagrangianPoint {
    /// Residual of the constraint with the new estimator and old projection.
    pub fn residual_estimator(&self) -> C64 {
        self.d - self.w_bar.dotc(&self.s_prev.ad_mul(&self.x))
    }

    /// Residual of the constraint with the old estimator and new projection.
    pub fn residual_projection(&self) -> C64 {
        self.d - self.w_bar_prev.dotc(&self.s.ad_mul(&self.x))
    }
}

/// `||w - w_prev||^2 + ||S - S_prev||_F^2 + Re[l1^* r1] + Re[l2^* r2]`.
pub fn lagrangian_value(pt: &LagrangianPoint) -> f64 {
    (&pt.w_bar - &pt.w_bar_prev).norm_squared()
        + (&pt.s - &pt.s_prev).norm_squared()
        + (pt.lambda1.conj() * pt.residual_estimator()).re
        + (pt.lambda2.conj() * pt.residual_projection()).re
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianGradients {
    pub w_bar: CVector,
    pub s: CMatrix,
    pub lambda1: C64,
    pub lambda2: C64,
}

/// Gradients of [`lagrangian_value`] with respect to each argument, using
/// the real-valued-function convention `grad_z = dL/dRe(z) + j dL/dIm(z)`
/// (twice the Wirtinger derivative in `z^*`).
///
/// The estimator and projection gradients carry the multipliers as
/// `-lambda^*`; under the substitution `lambda -> -lambda^*` they take the
/// customary form `2(w - w_prev) + S_prev^H x lambda1` and
/// `2(S - S_prev) + x w_prev^H lambda2`. The multiplier gradients are the
/// constraint residuals.
pub fn lagrangian_gradients(pt: &LagrangianPoint) -> LagrangianGradients {
    let mut w_bar = (&pt.w_bar - &pt.w_bar_prev) * C64::new(2.0, 0.0);
    w_bar.axpy(-pt.lambda1.conj(), &pt.s_prev.ad_mul(&pt.x), C64::new(1.0, 0.0));
    let mut s = (&pt.s - &pt.s_prev) * C64::new(2.0, 0.0);
    s.gerc(-pt.lambda2.conj(), &pt.x, &pt.w_bar_prev, C64::new(1.0, 0.0));
    LagrangianGradients {
        w_bar,
        s,
        lambda1: pt.residual_estimator(),
        lambda2: pt.residual_projection(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{ar1_correlation, build_ground_truth, complex_gaussian, NetworkSignal};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn random_cvector(rng: &mut ChaCha8Rng, n: usize) -> CVector {
        CVector::from_fn(n, |_, _| complex_gaussian(rng, 1.0))
    }

    fn random_cmatrix(rng: &mut ChaCha8Rng, r: usize, k: usize) -> CMatrix {
        CMatrix::from_fn(r, k, |_, _| complex_gaussian(rng, 1.0))
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        let a = random_cmatrix(rng, n, n);
        &a * a.adjoint() + CMatrix::identity(n, n) * c(0.5)
    }

    fn stats_with(r_bar: CMatrix, p_bar: CVector, sigma_d2: f64) -> StatisticsSnapshot {
        let d = p_bar.len();
        StatisticsSnapshot {
            r: CMatrix::identity(d, d),
            p: p_bar.clone(),
            r_bar,
            p_bar,
            p_d: CMatrix::zeros(d, d),
            r_wbar: CMatrix::identity(d, d),
            sigma_d2,
        }
    }

    #[test]
    fn wbar_identity_and_scalar() {
        let p = CVector::from_vec(vec![C64::new(1.0, 2.0), c(-0.5)]);
        let s = stats_with(CMatrix::identity(2, 2), p.clone(), 10.0);
        assert!((wbar_mmse(&s).unwrap() - p).norm() < 1e-15);
        let s = stats_with(CMatrix::from_element(1, 1, c(2.0)), CVector::from_element(1, c(4.0)), 10.0);
        assert!((wbar_mmse(&s).unwrap()[0] - c(2.0)).norm() < 1e-15);
    }

    #[test]
    fn wbar_is_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r_bar = random_spd(&mut rng, 4);
        let p_bar = random_cvector(&mut rng, 4);
        let s = stats_with(r_bar.clone(), p_bar.clone(), 50.0);
        let w = wbar_mmse(&s).unwrap();
        let cost = |w: &CVector| 50.0 - 2.0 * w.dotc(&p_bar).re + w.dotc(&(&r_bar * w)).re;
        let h = 1e-6;
        for j in 0..4 {
            for dir in [c(1.0), C64::i()] {
                let mut plus = w.clone();
                let mut minus = w.clone();
                plus[j] += dir * h;
                minus[j] -= dir * h;
                let g = (cost(&plus) - cost(&minus)) / (2.0 * h);
                assert!(g.abs() < 1e-8, "gradient {g}");
            }
        }
    }

    #[test]
    fn singular_r_bar_errors() {
        let s = stats_with(CMatrix::zeros(2, 2), CVector::from_element(2, c(1.0)), 1.0);
        assert_eq!(wbar_mmse(&s), Err(OracleError::Singular("R_bar")));
        let v = CVector::from_vec(vec![c(1.0), c(1.0)]);
        let s = stats_with(&v * v.adjoint(), v, 1.0);
        assert!(matches!(wbar_mmse(&s), Err(OracleError::Singular(_))));
    }

    #[test]
    fn sd_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p_d = random_cmatrix(&mut rng, 3, 2);
        let mut s = stats_with(CMatrix::identity(2, 2), CVector::zeros(2), 1.0);
        s.r = CMatrix::identity(3, 3);
        s.p_d = p_d.clone();
        assert!((sd_mmse(&s).unwrap() - &p_d).norm() < 1e-14);
        s.p_d = CMatrix::zeros(3, 2);
        assert_eq!(sd_mmse(&s).unwrap(), CMatrix::zeros(3, 2));

        s.r = random_spd(&mut rng, 3);
        s.r_wbar = random_spd(&mut rng, 2);
        s.p_d = p_d.clone();
        let naive = s.r.clone().try_inverse().unwrap() * &p_d * s.r_wbar.clone().try_inverse().unwrap();
        assert!((sd_mmse(&s).unwrap() - naive).camax() < 1e-10);
    }

    #[test]
    fn mmse_examples() {
        let s = stats_with(CMatrix::identity(2, 2), CVector::zeros(2), 1.7);
        assert!((mmse_value(&s).unwrap() - 1.7).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let w0 = build_ground_truth(2, None, &mut rng).w0;
        let r = random_spd(&mut rng, 2);
        let eye = CMatrix::identity(2, 2);
        let exact = StatisticsSnapshot::exact(&r, &w0, 0.0, &eye, &w0);
        assert!(mmse_value(&exact).unwrap().abs() < 1e-10);
        let exact = StatisticsSnapshot::exact(&r, &w0, 0.001, &eye, &w0);
        assert!((mmse_value(&exact).unwrap() - 0.001).abs() < 1e-10);

        let bad = stats_with(CMatrix::identity(1, 1), CVector::from_element(1, c(2.0)), 1.0);
        assert!(matches!(mmse_value(&bad), Err(OracleError::NegativeMmse(_))));
    }

    #[test]
    fn truncation_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (m, d) = (8, 3);
        let mut w0 = build_ground_truth(m, Some(d), &mut rng).w0;
        w0 *= c(1.3);
        let r = ar1_correlation(m, 0.5);
        let s = CMatrix::identity(m, d);
        let stats = StatisticsSnapshot::exact(&r, &w0, 0.001, &s, &CVector::zeros(d));
        let w = wbar_mmse(&stats).unwrap();
        assert!((w - w0.rows(0, d)).norm() < 1e-8);
        assert!((mmse_value(&stats).unwrap() - 0.001).abs() < 1e-8);
    }

    #[test]
    fn lagrangian_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w = random_cvector(&mut rng, 2);
        let s = random_cmatrix(&mut rng, 3, 2);
        let x = random_cvector(&mut rng, 3);
        let d = w.dotc(&s.ad_mul(&x));
        let pt = LagrangianPoint {
            w_bar_prev: w.clone(),
            w_bar: w.clone(),
            s_prev: s.clone(),
            s: s.clone(),
            x,
            d,
            lambda1: c(0.0),
            lambda2: c(0.0),
        };
        assert_eq!(lagrangian_value(&pt), 0.0);
        let g = lagrangian_gradients(&pt);
        assert!(g.w_bar.norm() == 0.0 && g.s.norm() == 0.0);
        assert!(g.lambda1.norm() < 1e-14 && g.lambda2.norm() < 1e-14);

        let mut moved = pt.clone();
        moved.w_bar = random_cvector(&mut rng, 2);
        moved.s = random_cmatrix(&mut rng, 3, 2);
        let expected = (&moved.w_bar - &w).norm_squared() + (&moved.s - &s).norm_squared();
        assert!((lagrangian_value(&moved) - expected).abs() < 1e-12);
    }

    #[test]
    fn sample_statistics_single_and_lln() {
        let x = CVector::from_vec(vec![C64::new(1.0, 1.0), c(2.0)]);
        let w = CVector::from_vec(vec![c(0.5)]);
        let s = CMatrix::identity(2, 1);
        let d = C64::new(0.0, 3.0);
        let st = sample_statistics(&s, [(&x, d, &w)]).unwrap();
        assert!((&st.r - &x * x.adjoint()).norm() < 1e-15);
        assert!((&st.p - &x * d.conj()).norm() < 1e-15);
        assert!((st.sigma_d2 - 9.0).abs() < 1e-15);
        assert!(matches!(sample_statistics(&s, []), Err(OracleError::NoSamples)));

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = 4;
        let truth = build_ground_truth(m, None, &mut rng);
        let mut signal = NetworkSignal::new(truth.clone(), &[0.0], 0.001);
        let data: Vec<_> = (0..100_000).map(|_| signal.next_samples(&mut rng).remove(0)).collect();
        let w = CVector::zeros(1);
        let st = sample_statistics(&CMatrix::identity(m, 1), data.iter().map(|s| (&s.x, s.d, &w))).unwrap();
        assert!((&st.r - CMatrix::identity(m, m)).camax() <= 0.05);
        let wiener = &st.r * &truth.w0;
        assert!((&st.p - &wiener).norm() <= 0.05 * wiener.norm());
    }
}
