//! The benchmark environments: the 100-state random walk, the 15-state
//! random chain and Baird's star counterexample, plus a small random MDP
//! generator used by tests.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Environment, FeatureMap, FiniteMdp, Policy};

/// Added to every uniform draw before normalising so that all transitions
/// have positive probability.
pub const RANDOM_WALK_EPSILON: f64 = 0.01;

fn random_distribution(rng: &mut ChaCha8Rng, len: usize, epsilon: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.random::<f64>() + epsilon).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

fn random_stochastic(rng: &mut ChaCha8Rng, rows: usize, cols: usize, epsilon: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        for (c, v) in random_distribution(rng, cols, epsilon)
            .into_iter()
            .enumerate()
        {
            m[(r, c)] = v;
        }
    }
    m
}

/// 100 states, 5 actions, uniform random transitions, rewards, policy and
/// start distribution; γ = 0.95, tabular features, episodes of 100 steps.
pub fn gen_random_walk_100(seed: u64) -> Environment {
    const N: usize = 100;
    const ACTIONS: usize = 5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let transitions = (0..ACTIONS)
        .map(|_| random_stochastic(&mut rng, N, N, RANDOM_WALK_EPSILON))
        .collect();
    let rewards = DMatrix::from_fn(N, N, |_, _| rng.random::<f64>());
    let policy = Policy::new(random_stochastic(&mut rng, N, ACTIONS, RANDOM_WALK_EPSILON))
        .expect("normalised");
    let start = DVector::from_vec(random_distribution(&mut rng, N, RANDOM_WALK_EPSILON));
    let mdp = FiniteMdp::new(transitions, rewards, 0.95)
        .and_then(|m| m.with_start(start))
        .expect("generated MDP is valid")
        .with_episode_length(Some(100));
    let features = FeatureMap::tabular(&mdp);
    Environment::new("random_walk_100", mdp, policy, None, features).expect("consistent bundle")
}

/// Index of action L in the random chain.
pub const CHAIN_LEFT: usize = 0;
/// Index of action R in the random chain.
pub const CHAIN_RIGHT: usize = 1;

/// 15 interior states (indices 1..=15) between absorbing ends 0 and 16.
/// Reward 1 on every transition entering state 5 or 10. Behavior picks L/R
/// with 0.5/0.5, the target with 0.6/0.4. γ = 0.9, tabular features on the
/// interior states, episodes start uniformly at random.
pub fn gen_random_chain() -> Environment {
    const N: usize = 17;
    let mut left = DMatrix::zeros(N, N);
    let mut right = DMatrix::zeros(N, N);
    for s in [0, N - 1] {
        left[(s, s)] = 1.0;
        right[(s, s)] = 1.0;
    }
    for s in 1..N - 1 {
        left[(s, s - 1)] = 0.9;
        left[(s, s + 1)] = 0.1;
        right[(s, s - 1)] = 0.1;
        right[(s, s + 1)] = 0.9;
    }
    let mut rewards = DMatrix::zeros(N, N);
    for goal in [5, 10] {
        rewards[(goal - 1, goal)] = 1.0;
        rewards[(goal + 1, goal)] = 1.0;
    }
    let mdp = FiniteMdp::new(vec![left, right], rewards, 0.9)
        .and_then(|m| m.with_absorbing(&[0, N - 1]))
        .expect("random chain is valid");
    let behavior = Policy::uniform_rows(N, &[0.5, 0.5]).expect("distribution");
    let target = Policy::uniform_rows(N, &[0.6, 0.4]).expect("distribution");
    let features = FeatureMap::tabular(&mdp);
    Environment::new("random_chain", mdp, behavior, Some(target), features)
        .expect("consistent bundle")
}

/// Index of the "dashed" action (uniform jump to states 1..=6).
pub const BAIRD_DASH: usize = 0;
/// Index of the "solid" action (jump to state 7).
pub const BAIRD_SOLID: usize = 1;

/// Baird's seven-state star. Behavior takes dash w.p. 6/7, the target
/// always takes solid. All rewards are zero, γ = 0.99, features
/// `φ(i) = 2e_i + e_8` for `i = 1..6` and `φ(7) = e_7 + 2e_8`, and the
/// conventional start `θ₀ = (1, 1, 1, 1, 1, 1, 10, 1)`.
pub fn gen_baird() -> Environment {
    const N: usize = 7;
    const D: usize = 8;
    let dash = DMatrix::from_fn(N, N, |_, j| if j < 6 { 1.0 / 6.0 } else { 0.0 });
    let solid = DMatrix::from_fn(N, N, |_, j| if j == 6 { 1.0 } else { 0.0 });
    let mdp =
        FiniteMdp::new(vec![dash, solid], DMatrix::zeros(N, N), 0.99).expect("Baird MDP is valid");
    let behavior = Policy::uniform_rows(N, &[6.0 / 7.0, 1.0 / 7.0]).expect("distribution");
    let target = Policy::uniform_rows(N, &[0.0, 1.0]).expect("distribution");
    let mut phi = DMatrix::zeros(N, D);
    for i in 0..6 {
        phi[(i, i)] = 2.0;
        phi[(i, 7)] = 1.0;
    }
    phi[(6, 6)] = 1.0;
    phi[(6, 7)] = 2.0;
    let features = FeatureMap::new(phi).expect("Baird features have rank 7");
    let mut theta0 = DVector::from_element(D, 1.0);
    theta0[6] = 10.0;
    Environment::new("baird", mdp, behavior, Some(target), features)
        .and_then(|e| e.with_theta0(theta0))
        .expect("consistent bundle")
}

/// Dense random continuing MDP with `d` random features (`d <= n`), a
/// random behavior policy and a random target policy.
pub fn gen_random_mdp(n: usize, actions: usize, d: usize, seed: u64) -> Environment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let transitions = (0..actions)
        .map(|_| random_stochastic(&mut rng, n, n, RANDOM_WALK_EPSILON))
        .collect();
    let rewards = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let behavior = Policy::new(random_stochastic(&mut rng, n, actions, 0.1)).expect("normalised");
    let target = Policy::new(random_stochastic(&mut rng, n, actions, 0.1)).expect("normalised");
    let mdp = FiniteMdp::new(transitions, rewards, 0.9).expect("generated MDP is valid");
    let features = loop {
        let phi = DMatrix::from_fn(n, d, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        if let Ok(f) = FeatureMap::new(phi) {
            break f;
        }
    };
    Environment::new(
        format!("random_mdp_{n}x{actions}"),
        mdp,
        behavior,
        Some(target),
        features,
    )
    .expect("consistent bundle")
}
