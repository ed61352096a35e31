//! Finite MDPs, policies, linear features and exact chain quantities.
//!
//! Episodic models carry a set of absorbing states. All analytic quantities
//! are computed on the *live* (non-absorbing) states: a transition into an
//! absorbing state ends the episode and the chain restarts from the start
//! distribution. The restart-augmented kernel gives the stationary
//! distribution, the continuation kernel (live-to-live moves only) carries
//! the discount. For continuing models both kernels coincide.

mod envfile;
pub mod generators;

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use thiserror::Error;

pub use envfile::EnvFile;
pub use generators::{gen_baird, gen_random_chain, gen_random_mdp, gen_random_walk_100};

const STOCHASTIC_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-10;
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("{what} row {row} is not a probability distribution (sum {sum})")]
    NotStochastic { what: String, row: usize, sum: f64 },
    #[error("discount factor {0} is outside (0, 1)")]
    InvalidGamma(f64),
    #[error("reward table contains a non-finite entry at ({0}, {1})")]
    NonFiniteReward(usize, usize),
    #[error("absorbing state {0} does not self-loop under every action")]
    NotAbsorbing(usize),
    #[error("induced chain is reducible: no unique stationary distribution")]
    Reducible,
    #[error("induced chain is periodic (period {0})")]
    Periodic(usize),
    #[error("stationary distribution did not converge (residual {0:e})")]
    StationaryFailed(f64),
    #[error("feature matrix has rank {rank}, expected {expected}")]
    RankDeficient { rank: usize, expected: usize },
    #[error(
        "target policy takes action {action} in state {state} where the behavior policy never does"
    )]
    NotAbsolutelyContinuous { state: usize, action: usize },
    #[error(
        "unknown environment `{0}` (expected random_walk_100, random_chain, baird or a file path)"
    )]
    UnknownEnv(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
}

fn check_distribution(
    what: &str,
    row: usize,
    values: impl Iterator<Item = f64>,
) -> Result<(), MdpError> {
    let mut sum = 0.0;
    for v in values {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(MdpError::NotStochastic {
                what: what.to_string(),
                row,
                sum: f64::NAN,
            });
        }
        sum += v;
    }
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(MdpError::NotStochastic {
            what: what.to_string(),
            row,
            sum,
        });
    }
    Ok(())
}

/// A finite MDP with rewards of the form `r(s, s')`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    transitions: Vec<DMatrix<f64>>,
    rewards: DMatrix<f64>,
    gamma: f64,
    absorbing: Vec<bool>,
    start: DVector<f64>,
    episode_length: Option<usize>,
}

impl FiniteMdp {
    /// `transitions[a][(s, s')]` is the probability of `s → s'` under `a`.
    pub fn new(
        transitions: Vec<DMatrix<f64>>,
        rewards: DMatrix<f64>,
        gamma: f64,
    ) -> Result<Self, MdpError> {
        let n = rewards.nrows();
        if transitions.is_empty() {
            return Err(MdpError::Dimension(
                "at least one action is required".into(),
            ));
        }
        if rewards.ncols() != n || n == 0 {
            return Err(MdpError::Dimension(format!(
                "reward table is {}x{}, expected square",
                rewards.nrows(),
                rewards.ncols()
            )));
        }
        for (a, p) in transitions.iter().enumerate() {
            if p.nrows() != n || p.ncols() != n {
                return Err(MdpError::Dimension(format!(
                    "transition matrix for action {a} is {}x{}, expected {n}x{n}",
                    p.nrows(),
                    p.ncols()
                )));
            }
            for s in 0..n {
                check_distribution(&format!("transition[{a}]"), s, p.row(s).iter().copied())?;
            }
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(MdpError::InvalidGamma(gamma));
        }
        for i in 0..n {
            for j in 0..n {
                if !rewards[(i, j)].is_finite() {
                    return Err(MdpError::NonFiniteReward(i, j));
                }
            }
        }
        Ok(Self {
            transitions,
            rewards,
            gamma,
            absorbing: vec![false; n],
            start: DVector::from_element(n, 1.0 / n as f64),
            episode_length: None,
        })
    }

    /// Marks terminal states. The start distribution is reset to uniform over
    /// the remaining states.
    pub fn with_absorbing(mut self, states: &[usize]) -> Result<Self, MdpError> {
        let n = self.n_states();
        let mut absorbing = vec![false; n];
        for &s in states {
            if s >= n {
                return Err(MdpError::Dimension(format!(
                    "absorbing state {s} out of range"
                )));
            }
            if self
                .transitions
                .iter()
                .any(|p| (p[(s, s)] - 1.0).abs() > STOCHASTIC_TOL)
            {
                return Err(MdpError::NotAbsorbing(s));
            }
            absorbing[s] = true;
        }
        let live = absorbing.iter().filter(|a| !**a).count();
        if live == 0 {
            return Err(MdpError::Dimension("every state is absorbing".into()));
        }
        self.start = DVector::from_iterator(
            n,
            absorbing
                .iter()
                .map(|&a| if a { 0.0 } else { 1.0 / live as f64 }),
        );
        self.absorbing = absorbing;
        Ok(self)
    }

    pub fn with_start(mut self, start: DVector<f64>) -> Result<Self, MdpError> {
        if start.len() != self.n_states() {
            return Err(MdpError::Dimension("start distribution length".into()));
        }
        check_distribution("start", 0, start.iter().copied())?;
        if (0..start.len()).any(|s| self.absorbing[s] && start[s] > 0.0) {
            return Err(MdpError::Dimension(
                "start distribution puts mass on an absorbing state".into(),
            ));
        }
        self.start = start;
        Ok(self)
    }

    /// Episodes are cut (without termination) after this many steps.
    pub fn with_episode_length(mut self, length: Option<usize>) -> Self {
        self.episode_length = length.filter(|&l| l > 0);
        self
    }

    pub fn n_states(&self) -> usize {
        self.rewards.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.transitions.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn transition(&self, action: usize) -> &DMatrix<f64> {
        &self.transitions[action]
    }

    pub fn transitions(&self) -> &[DMatrix<f64>] {
        &self.transitions
    }

    pub fn reward(&self, s: usize, next: usize) -> f64 {
        self.rewards[(s, next)]
    }

    pub fn rewards(&self) -> &DMatrix<f64> {
        &self.rewards
    }

    pub fn is_absorbing(&self, s: usize) -> bool {
        self.absorbing[s]
    }

    pub fn absorbing_states(&self) -> Vec<usize> {
        (0..self.n_states())
            .filter(|&s| self.absorbing[s])
            .collect()
    }

    /// Non-absorbing states in increasing order.
    pub fn live_states(&self) -> Vec<usize> {
        (0..self.n_states())
            .filter(|&s| !self.absorbing[s])
            .collect()
    }

    pub fn start(&self) -> &DVector<f64> {
        &self.start
    }

    pub fn episode_length(&self) -> Option<usize> {
        self.episode_length
    }

    pub fn is_episodic(&self) -> bool {
        self.absorbing.iter().any(|&a| a)
    }
}

/// Action probabilities `π(a|s)`, one row per state.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    probs: DMatrix<f64>,
}

impl Policy {
    pub fn new(probs: DMatrix<f64>) -> Result<Self, MdpError> {
        for s in 0..probs.nrows() {
            check_distribution("policy", s, probs.row(s).iter().copied())?;
        }
        Ok(Self { probs })
    }

    /// The same action distribution in every state.
    pub fn uniform_rows(n_states: usize, action_probs: &[f64]) -> Result<Self, MdpError> {
        Self::new(DMatrix::from_fn(n_states, action_probs.len(), |_, a| {
            action_probs[a]
        }))
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[(s, a)]
    }

    pub fn probs(&self) -> &DMatrix<f64> {
        &self.probs
    }

    pub fn n_states(&self) -> usize {
        self.probs.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.probs.ncols()
    }
}

/// Feature matrix Φ (row `s` is `φ(s)ᵀ`).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    phi: DMatrix<f64>,
    rank: usize,
}

/// Numerical rank with tolerance `RANK_TOL × σ_max`.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * max).count()
}

impl FeatureMap {
    /// Rejects Φ unless its rank equals `min(n, d)`.
    pub fn new(phi: DMatrix<f64>) -> Result<Self, MdpError> {
        let rank = numerical_rank(&phi);
        let expected = phi.nrows().min(phi.ncols());
        if rank != expected || expected == 0 {
            return Err(MdpError::RankDeficient { rank, expected });
        }
        Ok(Self { phi, rank })
    }

    /// Identity features on the live states, zero rows on absorbing states.
    pub fn tabular(mdp: &FiniteMdp) -> Self {
        let live = mdp.live_states();
        let mut phi = DMatrix::zeros(mdp.n_states(), live.len());
        for (j, &s) in live.iter().enumerate() {
            phi[(s, j)] = 1.0;
        }
        Self::new(phi).expect("tabular features have full rank")
    }

    pub fn n_states(&self) -> usize {
        self.phi.nrows()
    }

    pub fn dim(&self) -> usize {
        self.phi.ncols()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// True when the columns are linearly independent, i.e. `ΦᵀDΦ` is
    /// invertible for any positive `D`.
    pub fn has_full_column_rank(&self) -> bool {
        self.rank == self.dim()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn phi(&self, s: usize) -> DVector<f64> {
        self.phi.row(s).transpose()
    }

    /// All feature vectors, indexed by state.
    pub fn rows(&self) -> Vec<DVector<f64>> {
        (0..self.n_states()).map(|s| self.phi(s)).collect()
    }

    /// Φ restricted to the given states.
    pub fn select_rows(&self, states: &[usize]) -> DMatrix<f64> {
        self.phi.select_rows(states)
    }

    pub fn values(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.phi * theta
    }
}

/// Policy-averaged quantities on the live states, without any stationarity
/// requirement.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyKernel {
    live: Vec<usize>,
    transition: DMatrix<f64>,
    continuation: DMatrix<f64>,
    expected_reward: DVector<f64>,
}

impl PolicyKernel {
    pub fn new(mdp: &FiniteMdp, policy: &Policy) -> Result<Self, MdpError> {
        if policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions() {
            return Err(MdpError::Dimension(format!(
                "policy is {}x{}, MDP has {} states and {} actions",
                policy.n_states(),
                policy.n_actions(),
                mdp.n_states(),
                mdp.n_actions()
            )));
        }
        let n = mdp.n_states();
        let mut full = DMatrix::zeros(n, n);
        for a in 0..mdp.n_actions() {
            let p = mdp.transition(a);
            for s in 0..n {
                let w = policy.prob(s, a);
                if w != 0.0 {
                    for t in 0..n {
                        full[(s, t)] += w * p[(s, t)];
                    }
                }
            }
        }
        let live = mdp.live_states();
        let m = live.len();
        let mut continuation = DMatrix::zeros(m, m);
        let mut transition = DMatrix::zeros(m, m);
        let mut expected_reward = DVector::zeros(m);
        for (i, &s) in live.iter().enumerate() {
            let mut exit = 0.0;
            for t in 0..n {
                expected_reward[i] += full[(s, t)] * mdp.reward(s, t);
                if mdp.is_absorbing(t) {
                    exit += full[(s, t)];
                }
            }
            for (j, &t) in live.iter().enumerate() {
                continuation[(i, j)] = full[(s, t)];
                transition[(i, j)] = full[(s, t)] + exit * mdp.start()[t];
            }
        }
        Ok(Self {
            live,
            transition,
            continuation,
            expected_reward,
        })
    }

    /// A continuing chain given directly by its transition matrix.
    pub fn from_transition(
        transition: DMatrix<f64>,
        expected_reward: DVector<f64>,
    ) -> Result<Self, MdpError> {
        let n = transition.nrows();
        if transition.ncols() != n || expected_reward.len() != n {
            return Err(MdpError::Dimension(
                "transition matrix and reward vector".into(),
            ));
        }
        for s in 0..n {
            check_distribution("chain", s, transition.row(s).iter().copied())?;
        }
        Ok(Self {
            live: (0..n).collect(),
            continuation: transition.clone(),
            transition,
            expected_reward,
        })
    }

    /// Full-MDP indices of the live states.
    pub fn live(&self) -> &[usize] {
        &self.live
    }

    /// Restart-augmented transition matrix `P_π` on the live states.
    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    /// Live-to-live part of `P_π`; substochastic for episodic models.
    pub fn continuation(&self) -> &DMatrix<f64> {
        &self.continuation
    }

    /// `r̄(s) = Σ_{s'} P_π(s, s') r(s, s')`.
    pub fn expected_reward(&self) -> &DVector<f64> {
        &self.expected_reward
    }

    /// `(I - γ P_cont)⁻¹ r̄`.
    pub fn true_values(&self, gamma: f64) -> DVector<f64> {
        true_values_of(&self.continuation, &self.expected_reward, gamma)
    }
}

fn true_values_of(continuation: &DMatrix<f64>, rbar: &DVector<f64>, gamma: f64) -> DVector<f64> {
    let n = continuation.nrows();
    let system = DMatrix::identity(n, n) - continuation * gamma;
    system
        .lu()
        .solve(rbar)
        .expect("I - γP is invertible for γ < 1 and substochastic P")
}

/// The Markov chain a policy induces, with its stationary distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedChain {
    kernel: PolicyKernel,
    stationary: DVector<f64>,
}

impl InducedChain {
    pub fn from_kernel(kernel: PolicyKernel) -> Result<Self, MdpError> {
        let stationary = stationary_distribution(&kernel.transition)?;
        Ok(Self { kernel, stationary })
    }

    pub fn from_transition(
        transition: DMatrix<f64>,
        expected_reward: DVector<f64>,
    ) -> Result<Self, MdpError> {
        Self::from_kernel(PolicyKernel::from_transition(transition, expected_reward)?)
    }

    pub fn kernel(&self) -> &PolicyKernel {
        &self.kernel
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        self.kernel.transition()
    }

    pub fn continuation(&self) -> &DMatrix<f64> {
        self.kernel.continuation()
    }

    pub fn expected_reward(&self) -> &DVector<f64> {
        self.kernel.expected_reward()
    }

    pub fn stationary(&self) -> &DVector<f64> {
        &self.stationary
    }

    pub fn d_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.stationary)
    }

    pub fn live(&self) -> &[usize] {
        self.kernel.live()
    }
}

pub fn induced_chain(mdp: &FiniteMdp, policy: &Policy) -> Result<InducedChain, MdpError> {
    InducedChain::from_kernel(PolicyKernel::new(mdp, policy)?)
}

/// `V^π = (I - γ P)⁻¹ r̄` on the live states of the chain.
pub fn true_values(chain: &InducedChain, gamma: f64) -> DVector<f64> {
    chain.kernel.true_values(gamma)
}

fn reachable(adj: &[Vec<usize>], from: usize) -> Vec<Option<usize>> {
    let mut level = vec![None; adj.len()];
    let mut queue = std::collections::VecDeque::new();
    level[from] = Some(0);
    queue.push_back(from);
    while let Some(u) = queue.pop_front() {
        let lu = level[u].unwrap();
        for &v in &adj[u] {
            if level[v].is_none() {
                level[v] = Some(lu + 1);
                queue.push_back(v);
            }
        }
    }
    level
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Period of an irreducible chain (1 means aperiodic); `None` if reducible.
pub fn chain_period(p: &DMatrix<f64>) -> Option<usize> {
    let n = p.nrows();
    let mut fwd = vec![Vec::new(); n];
    let mut bwd = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if p[(i, j)] > 0.0 {
                fwd[i].push(j);
                bwd[j].push(i);
            }
        }
    }
    let levels = reachable(&fwd, 0);
    if levels.iter().any(Option::is_none) || reachable(&bwd, 0).iter().any(Option::is_none) {
        return None;
    }
    let mut g = 0;
    for (u, succ) in fwd.iter().enumerate() {
        let lu = levels[u].unwrap();
        for &v in succ {
            let lv = levels[v].unwrap();
            g = gcd(g, (lu + 1).abs_diff(lv));
        }
    }
    Some(g)
}

/// Unique stationary distribution of an irreducible aperiodic chain: a direct
/// solve of `(Pᵀ - I) d = 0, Σd = 1` up to 1000 states, power iteration
/// beyond.
pub fn stationary_distribution(p: &DMatrix<f64>) -> Result<DVector<f64>, MdpError> {
    let n = p.nrows();
    match chain_period(p) {
        None => return Err(MdpError::Reducible),
        Some(1) => {}
        Some(k) => return Err(MdpError::Periodic(k)),
    }
    let d = if n <= 1000 {
        let mut system = p.transpose() - DMatrix::identity(n, n);
        system.row_mut(n - 1).fill(1.0);
        let mut rhs = DVector::zeros(n);
        rhs[n - 1] = 1.0;
        system
            .lu()
            .solve(&rhs)
            .ok_or(MdpError::StationaryFailed(f64::INFINITY))?
    } else {
        power_iteration(p)
    };
    let residual = (p.transpose() * &d - &d).amax();
    if residual > STATIONARY_TOL || d.iter().any(|&x| x <= 0.0) {
        return Err(MdpError::StationaryFailed(residual));
    }
    Ok(&d / d.sum())
}

fn power_iteration(p: &DMatrix<f64>) -> DVector<f64> {
    let n = p.nrows();
    let pt = p.transpose();
    let mut d = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..100_000 {
        let next = &pt * &d;
        let delta = (&next - &d).amax();
        d = next;
        if delta < 1e-15 {
            break;
        }
    }
    d
}

/// One sampled transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub action: usize,
    pub next: usize,
    pub reward: f64,
}

/// Draws `a ~ π(·|s)`, `s' ~ P[a][s][·]` and returns `r(s, s')`.
pub fn sample_step<R: Rng + ?Sized>(
    mdp: &FiniteMdp,
    policy: &Policy,
    s: usize,
    rng: &mut R,
) -> Step {
    let action = WeightedIndex::new(policy.probs.row(s).iter().copied())
        .expect("policy row is a distribution")
        .sample(rng);
    let next = WeightedIndex::new(mdp.transition(action).row(s).iter().copied())
        .expect("transition row is a distribution")
        .sample(rng);
    Step {
        action,
        next,
        reward: mdp.reward(s, next),
    }
}

/// Precomputed sampling tables for one `(mdp, policy)` pair. Draws the same
/// stream as [`sample_step`].
#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    mdp: &'a FiniteMdp,
    actions: Vec<WeightedIndex<f64>>,
    next: Vec<Vec<WeightedIndex<f64>>>,
    start: WeightedIndex<f64>,
}

impl<'a> Sampler<'a> {
    pub fn new(mdp: &'a FiniteMdp, policy: &Policy) -> Self {
        let n = mdp.n_states();
        let actions = (0..n)
            .map(|s| WeightedIndex::new(policy.probs.row(s).iter().copied()).expect("policy row"))
            .collect();
        let next = (0..mdp.n_actions())
            .map(|a| {
                (0..n)
                    .map(|s| {
                        WeightedIndex::new(mdp.transition(a).row(s).iter().copied())
                            .expect("transition row")
                    })
                    .collect()
            })
            .collect();
        let start = WeightedIndex::new(mdp.start().iter().copied()).expect("start distribution");
        Self {
            mdp,
            actions,
            next,
            start,
        }
    }

    pub fn start_state<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.start.sample(rng)
    }

    pub fn step<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> Step {
        let action = self.actions[s].sample(rng);
        let next = self.next[action][s].sample(rng);
        Step {
            action,
            next,
            reward: self.mdp.reward(s, next),
        }
    }
}

/// Everything a prediction experiment needs: the model, the behavior policy
/// generating data, an optional target policy and the features.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub name: String,
    pub mdp: FiniteMdp,
    pub behavior: Policy,
    pub target: Option<Policy>,
    pub features: FeatureMap,
    pub theta0: Option<DVector<f64>>,
}

impl Environment {
    pub fn new(
        name: impl Into<String>,
        mdp: FiniteMdp,
        behavior: Policy,
        target: Option<Policy>,
        features: FeatureMap,
    ) -> Result<Self, MdpError> {
        let env = Self {
            name: name.into(),
            mdp,
            behavior,
            target,
            features,
            theta0: None,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn with_theta0(mut self, theta0: DVector<f64>) -> Result<Self, MdpError> {
        if theta0.len() != self.features.dim() {
            return Err(MdpError::Dimension(format!(
                "theta0 has length {}, features have dimension {}",
                theta0.len(),
                self.features.dim()
            )));
        }
        self.theta0 = Some(theta0);
        Ok(self)
    }

    fn validate(&self) -> Result<(), MdpError> {
        let n = self.mdp.n_states();
        let na = self.mdp.n_actions();
        for (what, p) in std::iter::once(("behavior", &self.behavior))
            .chain(self.target.iter().map(|t| ("target", t)))
        {
            if p.n_states() != n || p.n_actions() != na {
                return Err(MdpError::Dimension(format!("{what} policy shape")));
            }
        }
        if self.features.n_states() != n {
            return Err(MdpError::Dimension(format!(
                "features have {} rows, MDP has {n} states",
                self.features.n_states()
            )));
        }
        if let Some(target) = &self.target {
            for s in self.mdp.live_states() {
                for a in 0..na {
                    if target.prob(s, a) > 0.0 && self.behavior.prob(s, a) == 0.0 {
                        return Err(MdpError::NotAbsolutelyContinuous {
                            state: s,
                            action: a,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.features.dim()
    }

    pub fn gamma(&self) -> f64 {
        self.mdp.gamma()
    }

    /// Initial parameters: the environment's own when it has one, else zero.
    pub fn initial_theta(&self) -> DVector<f64> {
        self.theta0
            .clone()
            .unwrap_or_else(|| DVector::zeros(self.dim()))
    }

    /// Φ on the live states, matching the rows of the chain quantities.
    pub fn live_features(&self) -> DMatrix<f64> {
        self.features.select_rows(&self.mdp.live_states())
    }

    /// Importance ratio `π(a|s)/μ(a|s)`; 1 without a target policy.
    pub fn ratio(&self, s: usize, a: usize) -> f64 {
        match &self.target {
            Some(t) => t.prob(s, a) / self.behavior.prob(s, a),
            None => 1.0,
        }
    }

    /// Builds one of the named benchmark environments.
    pub fn by_name(name: &str, seed: u64) -> Result<Self, MdpError> {
        match name {
            "random_walk_100" => Ok(gen_random_walk_100(seed)),
            "random_chain" => Ok(gen_random_chain()),
            "baird" => Ok(gen_baird()),
            other => Err(MdpError::UnknownEnv(other.to_string())),
        }
    }

    /// A benchmark name, or else a path to an environment file.
    pub fn resolve(spec: &str, seed: u64) -> Result<Self, MdpError> {
        match Self::by_name(spec, seed) {
            Err(MdpError::UnknownEnv(_)) if std::path::Path::new(spec).exists() => Self::load(spec),
            other => other,
        }
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, MdpError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| MdpError::Io {
            path: path.display().to_string(),
            source,
        })?;
        EnvFile::from_toml(&text)
            .and_then(EnvFile::into_environment)
            .map_err(|e| MdpError::Parse {
                path: path.display().to_string(),
                message: e.to_string(),
            })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<(), MdpError> {
        let path = path.as_ref();
        let text = EnvFile::from_environment(self).to_toml();
        std::fs::write(path, text).map_err(|source| MdpError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}
