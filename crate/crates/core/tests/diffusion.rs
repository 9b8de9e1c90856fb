#![allow(clippy::needless_range_loop)]

use driftrank_core::algorithms::{
    combine_messages, DrjioNetwork, DrjioNodeState, EstimatorParams, LocalEstimateMessage, NetworkEstimator,
};
use driftrank_core::harness::{run_scenario, ScenarioConfig};
use driftrank_core::network::{generate_geometric_topology, metropolis_weights, Topology};
use driftrank_core::signal::{complex_gaussian, SignalSample};
use driftrank_core::{CMatrix, CVector, C64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_cvector(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| complex_gaussian(rng, 1.0))
}

fn random_node(rng: &mut ChaCha8Rng, m: usize, d: usize) -> DrjioNodeState {
    let mut node = DrjioNodeState::new(m, d, 0.15, 0.5, 1e-8);
    node.s_d = CMatrix::from_fn(m, d, |_, _| complex_gaussian(rng, 1.0));
    node.w_bar = random_cvector(rng, d);
    node
}

fn random_samples(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<SignalSample> {
    (0..n).map(|_| SignalSample { x: random_cvector(rng, m), d: complex_gaussian(rng, 1.0) }).collect()
}

/// Straight-line evaluation of one iteration with explicit index loops.
fn scripted_iteration(
    s: &[Vec<Vec<C64>>],
    w: &[Vec<C64>],
    samples: &[SignalSample],
    c: &[[f64; 3]; 3],
    mu0: f64,
    eta0: f64,
    eps: f64,
) -> (Vec<Vec<Vec<C64>>>, Vec<Vec<C64>>) {
    let n = s.len();
    let m = s[0].len();
    let d = w[0].len();
    let mut psi = vec![vec![C64::new(0.0, 0.0); d]; n];
    let mut s_new = s.to_vec();
    for k in 0..n {
        let x = samples[k].x.as_slice();
        let mut x_bar = vec![C64::new(0.0, 0.0); d];
        for j in 0..d {
            for r in 0..m {
                x_bar[j] += s[k][r][j].conj() * x[r];
            }
        }
        let mut y = C64::new(0.0, 0.0);
        for j in 0..d {
            y += w[k][j].conj() * x_bar[j];
        }
        let e = samples[k].d - y;
        let x_energy: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let w_energy: f64 = w[k].iter().map(|v| v.norm_sqr()).sum();
        let mu = mu0 / (x_energy + eps);
        let eta = eta0 / (w_energy * x_energy + eps);
        for j in 0..d {
            psi[k][j] = w[k][j] + x_bar[j] * e.conj() * mu;
        }
        for r in 0..m {
            for j in 0..d {
                s_new[k][r][j] = s[k][r][j] + x[r] * w[k][j].conj() * e.conj() * eta;
            }
        }
    }
    let mut w_new = vec![vec![C64::new(0.0, 0.0); d]; n];
    for k in 0..n {
        for l in 0..n {
            for j in 0..d {
                w_new[k][j] += psi[l][j] * c[k][l];
            }
        }
    }
    (s_new, w_new)
}

#[test]
fn path_network_matches_scripted_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (m, d) = (5, 2);
    let nodes: Vec<_> = (0..3).map(|_| random_node(&mut rng, m, d)).collect();
    let samples = random_samples(&mut rng, 3, m);
    // path 1 - 2 - 3: |N| = 2, 3, 2
    let third = 1.0 / 3.0;
    let c = [[1.0 - third, third, 0.0], [third, third, third], [0.0, third, 1.0 - third]];
    let t = Topology::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
    let weights = metropolis_weights(&t);
    for k in 0..3 {
        for l in 0..3 {
            assert!((weights.weight(k, l) - c[k][l]).abs() < 1e-15);
        }
    }

    let s: Vec<Vec<Vec<C64>>> =
        nodes.iter().map(|n| (0..m).map(|r| (0..d).map(|j| n.s_d[(r, j)]).collect()).collect()).collect();
    let w: Vec<Vec<C64>> = nodes.iter().map(|n| n.w_bar.iter().copied().collect()).collect();
    let (s_expected, w_expected) = scripted_iteration(&s, &w, &samples, &c, 0.15, 0.5, 1e-8);

    let mut net = DrjioNetwork::from_nodes(nodes);
    net.step(&samples, &weights).unwrap();
    for k in 0..3 {
        for j in 0..d {
            let got = net.nodes[k].w_bar[j];
            assert!((got - w_expected[k][j]).norm() <= 1e-13 * (1.0 + got.norm()), "w_bar[{k}][{j}]");
            for r in 0..m {
                let got = net.nodes[k].s_d[(r, j)];
                assert!((got - s_expected[k][r][j]).norm() <= 1e-13 * (1.0 + got.norm()), "S[{k}][{r},{j}]");
            }
        }
    }
}

#[test]
fn processing_order_does_not_matter() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (n, m, d) = (8, 6, 3);
    let t = generate_geometric_topology(n, 0.6, 4).unwrap();
    let weights = metropolis_weights(&t);
    let nodes: Vec<_> = (0..n).map(|_| random_node(&mut rng, m, d)).collect();
    let orders: [Vec<usize>; 3] = [(0..n).collect(), (0..n).rev().collect(), vec![3, 7, 0, 5, 1, 6, 2, 4]];
    let mut reference: Option<DrjioNetwork> = None;
    for order in &orders {
        let mut net = DrjioNetwork::from_nodes(nodes.clone());
        let mut stream = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10 {
            net.step_in_order(&random_samples(&mut stream, n, m), &weights, order).unwrap();
        }
        match &reference {
            None => reference = Some(net),
            Some(r) => assert_eq!(r.nodes, net.nodes),
        }
    }
}

#[test]
fn identical_nodes_stay_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (n, m, d) = (6, 5, 2);
    let t = generate_geometric_topology(n, 0.7, 1).unwrap();
    let node = random_node(&mut rng, m, d);
    let mut net = DrjioNetwork::from_nodes(vec![node; n]);
    let sample = random_samples(&mut rng, 1, m).remove(0);
    net.step(&vec![sample; n], &metropolis_weights(&t)).unwrap();
    for k in 1..n {
        assert!((&net.nodes[k].w_bar - &net.nodes[0].w_bar).norm() <= 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn combination_is_non_expansive(n in 1usize..25, len in 1usize..6, seed in any::<u64>()) {
        let t = generate_geometric_topology(n, 0.5, seed).unwrap();
        let weights = metropolis_weights(&t);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let messages: Vec<_> = (0..n)
            .map(|origin| LocalEstimateMessage { origin, payload: random_cvector(&mut rng, len) })
            .collect();
        let largest_in = messages.iter().map(|m| m.payload.norm()).fold(0.0, f64::max);
        for k in 0..n {
            let out = combine_messages(k, &messages, &weights).unwrap();
            prop_assert!(out.norm() <= largest_in * (1.0 + 1e-12));
        }
    }
}

#[test]
fn full_dimension_krylov_behaves_like_nlms() {
    let config: ScenarioConfig = "m = 6\nd = 6\nn_nodes = 6\nradius = 0.7\niterations = 600\nruns = 20\n\
                                  krylov_warmup = 50\nalgorithms = diffusion-nlms, krylov-nlms"
        .parse()
        .unwrap();
    let result = run_scenario(&config).unwrap();
    let nlms = result.traces[0].steady_state_db(200);
    let krylov = result.traces[1].steady_state_db(200);
    assert!((nlms - krylov).abs() < 0.5, "nlms {nlms:.2} dB vs krylov {krylov:.2} dB");
}

#[test]
fn default_parameters_follow_the_scenarios() {
    let p = EstimatorParams::default();
    assert_eq!((p.m, p.d, p.mu0, p.eta0, p.rls_lambda, p.rls_delta), (20, 5, 0.15, 0.5, 0.99, 0.11));
}
