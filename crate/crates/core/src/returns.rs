//! Forward-view λ-schedule returns and TD errors over recorded trajectories.
//!
//! These are the oracles the incremental learners are checked against. A
//! trajectory that ends in a terminal state contributes no reward or value
//! past the end, so any λ-product reaching past termination is cut there.

use nalgebra::DVector;
use thiserror::Error;

use crate::schedule::{LambdaSchedule, WeightMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReturnsError {
    #[error("return at t = {t} needs {needed} transitions, trajectory has {available}")]
    WindowTooShort {
        t: usize,
        needed: usize,
        available: usize,
    },
    #[error("off-policy return requested on a trajectory without importance ratios")]
    MissingRatios,
    #[error(
        "a weight-matrix mixture needs a terminated trajectory of at most {rows} steps from t"
    )]
    NotTerminated { rows: usize },
    #[error("inconsistent trajectory: {0}")]
    Inconsistent(String),
}

/// `δ = R + γ θᵀφ' - θᵀφ`. Pass a zero `phi_next` for a terminal next state.
pub fn td_error(
    theta: &DVector<f64>,
    phi: &DVector<f64>,
    phi_next: &DVector<f64>,
    reward: f64,
    gamma: f64,
) -> f64 {
    reward + gamma * theta.dot(phi_next) - theta.dot(phi)
}

/// Recorded feature vectors `φ(s_0..s_k)`, rewards `R_1..R_k` and,
/// off-policy, ratios `ρ_0..ρ_{k-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    phis: Vec<DVector<f64>>,
    rewards: Vec<f64>,
    rhos: Option<Vec<f64>>,
    terminal: bool,
}

impl Trajectory {
    /// `terminal` marks the final state as terminal (value 0 whatever its
    /// features).
    pub fn new(
        phis: Vec<DVector<f64>>,
        rewards: Vec<f64>,
        rhos: Option<Vec<f64>>,
        terminal: bool,
    ) -> Result<Self, ReturnsError> {
        if phis.len() != rewards.len() + 1 {
            return Err(ReturnsError::Inconsistent(format!(
                "{} transitions need {} states, got {}",
                rewards.len(),
                rewards.len() + 1,
                phis.len()
            )));
        }
        if let Some(r) = &rhos {
            if r.len() != rewards.len() {
                return Err(ReturnsError::Inconsistent(
                    "one ratio per transition".into(),
                ));
            }
            if r.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(ReturnsError::Inconsistent(
                    "ratios must be finite and nonnegative".into(),
                ));
            }
        }
        let d = phis[0].len();
        if phis.iter().any(|p| p.len() != d) {
            return Err(ReturnsError::Inconsistent(
                "feature dimensions differ".into(),
            ));
        }
        Ok(Self {
            phis,
            rewards,
            rhos,
            terminal,
        })
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal
    }

    pub fn phi(&self, t: usize) -> &DVector<f64> {
        &self.phis[t]
    }

    pub fn reward(&self, t: usize) -> f64 {
        self.rewards[t]
    }

    pub fn rhos(&self) -> Option<&[f64]> {
        self.rhos.as_deref()
    }

    fn rho(&self, t: usize) -> Result<f64, ReturnsError> {
        self.rhos
            .as_ref()
            .map(|r| r[t])
            .ok_or(ReturnsError::MissingRatios)
    }

    fn ends_at(&self, t: usize) -> bool {
        self.terminal && t == self.len()
    }

    /// `V_θ(s_t)`, zero at a terminal state.
    pub fn value(&self, t: usize, theta: &DVector<f64>) -> f64 {
        if self.ends_at(t) {
            0.0
        } else {
            theta.dot(&self.phis[t])
        }
    }

    /// `δ_t`, using the zero value of a terminal next state.
    pub fn delta(&self, t: usize, theta: &DVector<f64>, gamma: f64) -> f64 {
        self.rewards[t] + gamma * self.value(t + 1, theta) - self.value(t, theta)
    }

    /// Offset `K` of the last transition the recursion from `t` reads.
    fn horizon(&self, t: usize, schedule: &LambdaSchedule) -> Result<usize, ReturnsError> {
        if t >= self.len() {
            return Err(ReturnsError::WindowTooShort {
                t,
                needed: 1,
                available: self.len().saturating_sub(t),
            });
        }
        let mut k = 0;
        while schedule.lambda(k + 1) != 0.0 && !self.ends_at(t + k + 1) {
            k += 1;
            if t + k >= self.len() {
                return Err(ReturnsError::WindowTooShort {
                    t,
                    needed: k + 1,
                    available: self.len() - t,
                });
            }
        }
        Ok(k)
    }
}

/// `G_t = R_{t+1} + γ[(1-λ_1)V(s_{t+1}) + λ_1 G_{t+1}^{[λ_2:λ_L]}]`, with
/// the one-step target once the schedule runs out.
pub fn lambda_schedule_return(
    traj: &Trajectory,
    t: usize,
    theta: &DVector<f64>,
    schedule: &LambdaSchedule,
    gamma: f64,
) -> Result<f64, ReturnsError> {
    let k = traj.horizon(t, schedule)?;
    let last = t + k;
    let mut g = traj.reward(last) + gamma * traj.value(last + 1, theta);
    for i in (0..k).rev() {
        let l = schedule.lambda(i + 1);
        let s = t + i;
        g = traj.reward(s) + gamma * ((1.0 - l) * traj.value(s + 1, theta) + l * g);
    }
    Ok(g)
}

/// `Σ_k (∏_{j≤k} γλ_j) δ_{t+k}`.
pub fn telescoped_return_gap(
    traj: &Trajectory,
    t: usize,
    theta: &DVector<f64>,
    schedule: &LambdaSchedule,
    gamma: f64,
) -> Result<f64, ReturnsError> {
    let k = traj.horizon(t, schedule)?;
    let coeffs = schedule.trace_coefficients(gamma);
    Ok((0..=k)
        .map(|i| coeffs[i] * traj.delta(t + i, theta, gamma))
        .sum())
}

/// Per-decision importance-sampled return
/// `G_t = ρ_t(R_{t+1} + γ[(1-λ_1)V(s_{t+1}) + λ_1 G_{t+1}]) + (1-ρ_t)V(s_t)`,
/// whose gap to `V(s_t)` is exactly [`off_policy_return_gap`].
pub fn off_policy_lambda_schedule_return(
    traj: &Trajectory,
    t: usize,
    theta: &DVector<f64>,
    schedule: &LambdaSchedule,
    gamma: f64,
) -> Result<f64, ReturnsError> {
    let k = traj.horizon(t, schedule)?;
    let last = t + k;
    let cv = |s: usize, rho: f64| (1.0 - rho) * traj.value(s, theta);
    let rho = traj.rho(last)?;
    let mut g = rho * (traj.reward(last) + gamma * traj.value(last + 1, theta)) + cv(last, rho);
    for i in (0..k).rev() {
        let l = schedule.lambda(i + 1);
        let s = t + i;
        let rho = traj.rho(s)?;
        g = rho * (traj.reward(s) + gamma * ((1.0 - l) * traj.value(s + 1, theta) + l * g))
            + cv(s, rho);
    }
    Ok(g)
}

/// `ρ_tδ_t + γλ_1ρ_tρ_{t+1}δ_{t+1} + ⋯ + γ^Lλ_1⋯λ_Lρ_t⋯ρ_{t+L}δ_{t+L}`.
pub fn off_policy_return_gap(
    traj: &Trajectory,
    t: usize,
    theta: &DVector<f64>,
    schedule: &LambdaSchedule,
    gamma: f64,
) -> Result<f64, ReturnsError> {
    let k = traj.horizon(t, schedule)?;
    let coeffs = schedule.trace_coefficients(gamma);
    let mut rho_prod = 1.0;
    let mut gap = 0.0;
    for i in 0..=k {
        rho_prod *= traj.rho(t + i)?;
        gap += coeffs[i] * rho_prod * traj.delta(t + i, theta, gamma);
    }
    Ok(gap)
}

/// `G^ρ_t = ρ_t(R_{t+1} + γ[(1-λ_1)V(s_{t+1}) + λ_1 G^ρ_{t+1}])`, the
/// importance-weighted return whose expectation under the behavior policy
/// matches the target-policy return (no control variate).
pub fn rho_weighted_return(
    traj: &Trajectory,
    t: usize,
    theta: &DVector<f64>,
    schedule: &LambdaSchedule,
    gamma: f64,
) -> Result<f64, ReturnsError> {
    let k = traj.horizon(t, schedule)?;
    let last = t + k;
    let mut g = traj.rho(last)? * (traj.reward(last) + gamma * traj.value(last + 1, theta));
    for i in (0..k).rev() {
        let l = schedule.lambda(i + 1);
        let s = t + i;
        g = traj.rho(s)?
            * (traj.reward(s) + gamma * ((1.0 - l) * traj.value(s + 1, theta) + l * g));
    }
    Ok(g)
}

/// `Σ_{i<n} γ^i R_{t+i+1} + γ^n V(s_{t+n})`, stopping at termination.
pub fn n_step_return(
    traj: &Trajectory,
    t: usize,
    n: usize,
    theta: &DVector<f64>,
    gamma: f64,
) -> Result<f64, ReturnsError> {
    let available = traj.len().saturating_sub(t);
    let steps = n.min(available);
    if steps < n && !traj.is_terminal() {
        return Err(ReturnsError::WindowTooShort {
            t,
            needed: n,
            available,
        });
    }
    let mut g = 0.0;
    let mut discount = 1.0;
    for i in 0..steps {
        g += discount * traj.reward(t + i);
        discount *= gamma;
    }
    Ok(g + discount * traj.value(t + steps, theta))
}

/// For an episode that terminates `m` steps after `t`: the Λ-weighted
/// mixture `Σ_{k<m} Λ[m][k] G^{(k)}_t + Λ[m][m] G^{flat}_t` of bootstrapped
/// and flat returns read off row `m` of the weight matrix.
pub fn weight_matrix_mixture_return(
    traj: &Trajectory,
    t: usize,
    theta: &DVector<f64>,
    weights: &WeightMatrix,
    gamma: f64,
) -> Result<f64, ReturnsError> {
    let m = traj.len().saturating_sub(t);
    if !traj.is_terminal() || m == 0 || m > weights.n_rows() {
        return Err(ReturnsError::NotTerminated {
            rows: weights.n_rows(),
        });
    }
    let mut g = 0.0;
    for k in 1..=m {
        g += weights.get(m, k) * n_step_return(traj, t, k, theta, gamma)?;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{equal_weights, make_schedule};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn random_traj(
        rng: &mut ChaCha8Rng,
        len: usize,
        d: usize,
        rhos: bool,
        terminal: bool,
    ) -> Trajectory {
        let mut phis: Vec<DVector<f64>> = (0..=len)
            .map(|_| DVector::from_fn(d, |_, _| rng.random::<f64>() * 2.0 - 1.0))
            .collect();
        if terminal {
            phis[len] = DVector::zeros(d);
        }
        let rewards = (0..len).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let rhos = rhos.then(|| (0..len).map(|_| rng.random::<f64>() * 2.0).collect());
        Trajectory::new(phis, rewards, rhos, terminal).unwrap()
    }

    #[test]
    fn td_error_examples() {
        assert_eq!(td_error(&v(&[0.0]), &v(&[1.0]), &v(&[1.0]), 1.0, 0.9), 1.0);
        let gamma = 0.8;
        let value = 2.5;
        assert!(
            td_error(
                &v(&[value]),
                &v(&[1.0]),
                &v(&[1.0]),
                (1.0 - gamma) * value,
                gamma
            )
            .abs()
                < 1e-15
        );
        assert!((td_error(&v(&[1.0]), &v(&[1.0]), &v(&[2.0]), 0.5, 0.9) - 1.3).abs() < 1e-15);
    }

    #[test]
    fn zero_schedule_is_one_step_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let traj = random_traj(&mut rng, 5, 3, false, false);
        let theta = v(&[0.3, -0.2, 0.5]);
        let zero = LambdaSchedule::zeros(3);
        for t in 0..5 {
            let g = lambda_schedule_return(&traj, t, &theta, &zero, 0.9).unwrap();
            assert!((g - (traj.reward(t) + 0.9 * theta.dot(traj.phi(t + 1)))).abs() < 1e-14);
            let gap = telescoped_return_gap(&traj, t, &theta, &zero, 0.9).unwrap();
            assert!((gap - traj.delta(t, &theta, 0.9)).abs() < 1e-14);
        }
    }

    #[test]
    fn equal_weights_n_n_is_n_step_return() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let traj = random_traj(&mut rng, 12, 2, false, false);
        let theta = v(&[1.0, -0.5]);
        for n in 1..=4 {
            let s = equal_weights(n, n).unwrap();
            for t in 0..=(12 - n) {
                let g = lambda_schedule_return(&traj, t, &theta, &s, 0.95).unwrap();
                let expected = n_step_return(&traj, t, n, &theta, 0.95).unwrap();
                assert!((g - expected).abs() < 1e-13, "n={n} t={t}");
            }
        }
    }

    #[test]
    fn single_lambda_unrolls_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let traj = random_traj(&mut rng, 4, 2, false, false);
        let theta = v(&[0.7, 0.1]);
        let s = make_schedule(vec![0.5], 1).unwrap();
        let g = lambda_schedule_return(&traj, 0, &theta, &s, 0.9).unwrap();
        let expected = traj.delta(0, &theta, 0.9) + 0.5 * 0.9 * traj.delta(1, &theta, 0.9);
        assert!((g - theta.dot(traj.phi(0)) - expected).abs() < 1e-14);
    }

    #[test]
    fn gap_matches_recursion_on_random_trajectory() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let traj = random_traj(&mut rng, 10, 3, false, false);
        let theta = v(&[0.2, 0.4, -1.0]);
        let s = equal_weights(2, 4).unwrap();
        for t in 0..=5 {
            let g = lambda_schedule_return(&traj, t, &theta, &s, 0.9).unwrap();
            let gap = telescoped_return_gap(&traj, t, &theta, &s, 0.9).unwrap();
            assert!((g - theta.dot(traj.phi(t)) - gap).abs() < 1e-12);
        }
        assert!(matches!(
            lambda_schedule_return(&traj, 8, &theta, &s, 0.9),
            Err(ReturnsError::WindowTooShort { .. })
        ));
    }

    #[test]
    fn zero_rewards_and_theta_give_zero_gap() {
        let phis = vec![v(&[1.0]), v(&[0.5]), v(&[2.0]), v(&[1.0])];
        let traj = Trajectory::new(phis, vec![0.0; 3], None, false).unwrap();
        let s = equal_weights(1, 2).unwrap();
        assert_eq!(
            telescoped_return_gap(&traj, 0, &v(&[0.0]), &s, 0.9).unwrap(),
            0.0
        );
    }

    #[test]
    fn off_policy_reductions() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = random_traj(&mut rng, 10, 2, true, false);
        let theta = v(&[0.3, 0.9]);
        let s = equal_weights(2, 4).unwrap();
        let ones = Trajectory::new(
            base.phis.clone(),
            base.rewards.clone(),
            Some(vec![1.0; 10]),
            false,
        )
        .unwrap();
        for t in 0..=5 {
            let a = off_policy_return_gap(&ones, t, &theta, &s, 0.9).unwrap();
            let b = telescoped_return_gap(&ones, t, &theta, &s, 0.9).unwrap();
            assert!((a - b).abs() < 1e-13);
        }
        let mut rhos = base.rhos.clone().unwrap();
        rhos[2] = 0.0;
        let zeroed =
            Trajectory::new(base.phis.clone(), base.rewards.clone(), Some(rhos), false).unwrap();
        assert_eq!(
            off_policy_return_gap(&zeroed, 2, &theta, &s, 0.9).unwrap(),
            0.0
        );
        for t in 0..=5 {
            let g = off_policy_lambda_schedule_return(&base, t, &theta, &s, 0.9).unwrap();
            let gap = off_policy_return_gap(&base, t, &theta, &s, 0.9).unwrap();
            assert!((g - theta.dot(base.phi(t)) - gap).abs() < 1e-12);
        }
        assert_eq!(
            off_policy_return_gap(&ones.clone_without_rhos(), 0, &theta, &s, 0.9),
            Err(ReturnsError::MissingRatios)
        );
    }

    #[test]
    fn terminal_truncates_the_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let traj = random_traj(&mut rng, 3, 2, false, true);
        let theta = v(&[1.0, 2.0]);
        let s = equal_weights(4, 6).unwrap();
        // λ_1..λ_3 = 1 so every return from t is the flat discounted sum.
        for t in 0..3 {
            let g = lambda_schedule_return(&traj, t, &theta, &s, 0.9).unwrap();
            let flat: f64 = (t..3)
                .map(|i| 0.9f64.powi((i - t) as i32) * traj.reward(i))
                .sum();
            assert!((g - flat).abs() < 1e-13);
        }
    }

    #[test]
    fn mixture_matches_recursion_for_short_episodes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = make_schedule(vec![0.3, 0.8, 0.5, 0.9, 0.2, 0.6], 6).unwrap();
        let w = s.weight_matrix(7);
        for len in 1..=6 {
            let traj = random_traj(&mut rng, len, 3, false, true);
            let theta = DVector::from_fn(3, |_, _| rng.random::<f64>());
            for t in 0..len {
                let g = lambda_schedule_return(&traj, t, &theta, &s, 0.9).unwrap();
                let mix = weight_matrix_mixture_return(&traj, t, &theta, &w, 0.9).unwrap();
                assert!((g - mix).abs() < 1e-10, "len={len} t={t}");
            }
        }
        let open = random_traj(&mut rng, 3, 3, false, false);
        assert!(weight_matrix_mixture_return(&open, 0, &DVector::zeros(3), &w, 0.9).is_err());
    }

    impl Trajectory {
        fn clone_without_rhos(&self) -> Self {
            Self {
                rhos: None,
                ..self.clone()
            }
        }
    }
}
