//! Correlated regressors, ground truth and noisy measurements.
//!
//! Each node drives a complex AR(1) process `x(i) = u(i) + alpha * x(i-1)`
//! whose innovation variance `1 - alpha^2` keeps the stationary variance at
//! one. The regressor is a delay line of the `M` newest samples, newest first.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{CMatrix, CVector, C64};

/// Circularly-symmetric complex Gaussian sample: real and imaginary parts are
/// independent with variance `variance / 2` each.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * scale, im * scale)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub w0: CVector,
    /// Number of nonzero leading coefficients, when sparse.
    pub sparsity: Option<usize>,
}

impl GroundTruth {
    pub fn dim(&self) -> usize {
        self.w0.len()
    }
}

/// Draws a unit-norm parameter vector with i.i.d. circular Gaussian entries.
/// In sparse mode only the first `sparse_d` entries are nonzero.
///
/// Panics if `m == 0` or `sparse_d` is outside `1..=m`.
pub fn build_ground_truth<R: Rng + ?Sized>(m: usize, sparse_d: Option<usize>, rng: &mut R) -> GroundTruth {
    assert!(m >= 1, "ground truth needs m >= 1");
    let active = match sparse_d {
        Some(d) => {
            assert!((1..=m).contains(&d), "sparse_d must lie in 1..=m");
            d
        }
        None => m,
    };
    let mut w0 = CVector::zeros(m);
    loop {
        for entry in w0.iter_mut().take(active) {
            *entry = complex_gaussian(rng, 1.0);
        }
        let norm = w0.norm();
        if norm > 0.0 {
            w0.unscale_mut(norm);
            break;
        }
    }
    GroundTruth { w0, sparsity: sparse_d }
}

/// Per-node AR(1) source and delay line.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSignalState {
    pub alpha: f64,
    pub last_sample: C64,
    /// Newest sample first; length is the regressor dimension.
    pub delay_line: CVector,
    pub sigma_n2: f64,
}

impl NodeSignalState {
    /// Zero-initialized delay line, so the first `m - 1` regressors are only
    /// partially filled.
    pub fn new(m: usize, alpha: f64, sigma_n2: f64) -> Self {
        assert!((0.0..1.0).contains(&alpha.abs()), "|alpha| must be < 1");
        Self { alpha, last_sample: C64::new(0.0, 0.0), delay_line: CVector::zeros(m), sigma_n2 }
    }

    /// Innovation variance keeping the stationary variance at one.
    pub fn drive_variance(&self) -> f64 {
        1.0 - self.alpha * self.alpha
    }

    /// Applies the recursion with an explicit innovation `u` and shifts the
    /// result into the delay line.
    pub fn push_innovation(&mut self, u: C64) -> C64 {
        let sample = u + self.last_sample * self.alpha;
        self.last_sample = sample;
        let m = self.delay_line.len();
        if m > 0 {
            self.delay_line.as_mut_slice().copy_within(0..m - 1, 1);
            self.delay_line[0] = sample;
        }
        sample
    }

    pub fn regressor(&self) -> &CVector {
        &self.delay_line
    }
}

/// Advances the node's AR(1) process by one sample.
pub fn ar1_advance<R: Rng + ?Sized>(state: &mut NodeSignalState, rng: &mut R) -> C64 {
    let u = complex_gaussian(rng, state.drive_variance());
    state.push_innovation(u)
}

/// `d = w0^H x + n` with `n` circular Gaussian of variance `sigma_n2`.
pub fn measure<R: Rng + ?Sized>(w0: &GroundTruth, x: &CVector, sigma_n2: f64, rng: &mut R) -> C64 {
    let clean = w0.w0.dotc(x);
    if sigma_n2 > 0.0 {
        clean + complex_gaussian(rng, sigma_n2)
    } else {
        clean
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalSample {
    pub x: CVector,
    pub d: C64,
}

/// All nodes' sources for one Monte-Carlo run.
#[derive(Debug, Clone)]
pub struct NetworkSignal {
    pub truth: GroundTruth,
    pub nodes: Vec<NodeSignalState>,
}

impl NetworkSignal {
    pub fn new(truth: GroundTruth, alphas: &[f64], sigma_n2: f64) -> Self {
        let m = truth.dim();
        let nodes = alphas.iter().map(|&a| NodeSignalState::new(m, a, sigma_n2)).collect();
        Self { truth, nodes }
    }

    /// Draws one time instant for every node, in node order.
    pub fn next_samples<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<SignalSample> {
        let truth = &self.truth;
        self.nodes
            .iter_mut()
            .map(|node| {
                ar1_advance(node, rng);
                let x = node.regressor().clone();
                let d = measure(truth, &x, node.sigma_n2, rng);
                SignalSample { x, d }
            })
            .collect()
    }
}

/// Exact regressor correlation `E[x x^H]` of the unit-variance AR(1) delay
/// line: Toeplitz with entries `alpha^|i-j|`.
pub fn ar1_correlation(m: usize, alpha: f64) -> CMatrix {
    DMatrix::from_fn(m, m, |i, j| C64::new(alpha.powi(i.abs_diff(j) as i32), 0.0))
}

/// Debug dump of a sample stream: `iteration,node,d_re,d_im,x0_re,x0_im,...`.
pub fn write_stream_csv(path: &Path, stream: &[Vec<SignalSample>]) -> io::Result<()> {
    let m = stream.first().and_then(|s| s.first()).map_or(0, |s| s.x.len());
    let mut out = String::from("iteration,node,d_re,d_im");
    for j in 0..m {
        let _ = write!(out, ",x{j}_re,x{j}_im");
    }
    out.push('\n');
    for (i, samples) in stream.iter().enumerate() {
        for (k, s) in samples.iter().enumerate() {
            let _ = write!(out, "{},{},{:.16e},{:.16e}", i + 1, k + 1, s.d.re, s.d.im);
            for v in s.x.iter() {
                let _ = write!(out, ",{:.16e},{:.16e}", v.re, v.im);
            }
            out.push('\n');
        }
    }
    std::fs::write(path, out)
}

/// Unit selector helper used by tests and examples.
pub fn unit_vector(m: usize, index: usize) -> CVector {
    let mut v = DVector::zeros(m);
    v[index] = C64::new(1.0, 0.0);
    v
}
