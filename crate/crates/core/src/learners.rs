//! Incremental λ-schedule learners.
//!
//! The trace is rebuilt from a window of the last `L + 1` feature vectors
//! every step: a general schedule does not admit a one-step recursion for
//! `z_t`.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::mdp::{Environment, Sampler};
use crate::schedule::LambdaSchedule;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("unknown learner `{0}` (expected td_schedule, offpolicy_td_schedule, gtd_schedule or tdc_schedule)")]
    UnknownLearner(String),
    #[error("cannot parse step size `{0}` (expected const(a), harmonic(a,b) or power(a,b,p))")]
    StepSizeParse(String),
    #[error("invalid step size: {0}")]
    InvalidStepSize(String),
    #[error("{learner} needs a target policy but environment `{env}` has none")]
    MissingTarget { learner: LearnerKind, env: String },
    #[error("{0} needs an auxiliary step size (beta or eta)")]
    MissingBeta(LearnerKind),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Window of the most recent feature vectors (newest last) and the
/// importance ratios of the actions taken from them.
#[derive(Debug, Clone)]
pub struct TraceBuffer {
    capacity: usize,
    entries: VecDeque<(DVector<f64>, f64)>,
}

impl TraceBuffer {
    /// Holds `truncation + 1` entries.
    pub fn new(truncation: usize) -> Self {
        Self {
            capacity: truncation + 1,
            entries: VecDeque::with_capacity(truncation + 1),
        }
    }

    pub fn for_schedule(schedule: &LambdaSchedule) -> Self {
        Self::new(schedule.truncation())
    }

    pub fn push(&mut self, phi: DVector<f64>, rho: f64) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back((phi, rho));
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// `(φ_{t-k}, ρ_{t-k})` for `k = 0, 1, ...`.
    pub fn recent(&self) -> impl Iterator<Item = &(DVector<f64>, f64)> {
        self.entries.iter().rev()
    }

    pub fn current(&self) -> Option<&DVector<f64>> {
        self.entries.back().map(|(phi, _)| phi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceMode {
    OnPolicy,
    /// Each term carries the ratios `ρ_t ρ_{t-1} ⋯ ρ_{t-k}`.
    OffPolicy,
}

/// `z_t = Σ_k (∏_{j≤k} γλ_j) φ_{t-k}`, or with the ratio products folded in
/// off-policy.
pub fn compute_trace(
    buffer: &TraceBuffer,
    schedule: &LambdaSchedule,
    gamma: f64,
    mode: TraceMode,
) -> DVector<f64> {
    trace_from_coefficients(buffer, &schedule.trace_coefficients(gamma), mode)
}

fn trace_from_coefficients(buffer: &TraceBuffer, coeffs: &[f64], mode: TraceMode) -> DVector<f64> {
    let current = buffer.current().expect("trace of an empty buffer");
    let mut z = DVector::zeros(current.len());
    let mut rho_prod = 1.0;
    for (k, (phi, rho)) in buffer.recent().enumerate().take(coeffs.len()) {
        if mode == TraceMode::OffPolicy {
            rho_prod *= rho;
        }
        let c = coeffs[k] * rho_prod;
        if c == 0.0 {
            if coeffs[k] == 0.0 {
                break;
            }
            continue;
        }
        z.axpy(c, phi, 1.0);
    }
    z
}

/// A step-size sequence indexed by the learner's step counter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Const(f64),
    /// `a / (t + b)`
    Harmonic {
        a: f64,
        b: f64,
    },
    /// `a / (t + b)^p`
    Power {
        a: f64,
        b: f64,
        p: f64,
    },
}

impl StepSize {
    pub fn at(&self, t: u64) -> f64 {
        let t = t as f64;
        match *self {
            StepSize::Const(a) => a,
            StepSize::Harmonic { a, b } => a / (t + b),
            StepSize::Power { a, b, p } => a / (t + b).powf(p),
        }
    }

    /// Polynomial decay rate: 0 for constants, 1 for harmonic.
    pub fn decay_exponent(&self) -> f64 {
        match *self {
            StepSize::Const(_) => 0.0,
            StepSize::Harmonic { .. } => 1.0,
            StepSize::Power { p, .. } => p,
        }
    }

    pub fn validate(&self) -> Result<(), LearnerError> {
        let ok = match *self {
            StepSize::Const(a) => a > 0.0 && a.is_finite(),
            StepSize::Harmonic { a, b } => a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite(),
            StepSize::Power { a, b, p } => {
                a > 0.0 && b > 0.0 && p > 0.0 && a.is_finite() && b.is_finite() && p <= 1.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(LearnerError::InvalidStepSize(self.to_string()))
        }
    }
}

impl fmt::Display for StepSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            StepSize::Const(a) => write!(f, "const({a})"),
            StepSize::Harmonic { a, b } => write!(f, "harmonic({a},{b})"),
            StepSize::Power { a, b, p } => write!(f, "power({a},{b},{p})"),
        }
    }
}

impl FromStr for StepSize {
    type Err = LearnerError;

    /// `const(0.01)`, a bare number, `harmonic(a,b)` or `power(a,b,p)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let err = || LearnerError::StepSizeParse(s.to_string());
        let parsed = if let Ok(a) = s.parse::<f64>() {
            StepSize::Const(a)
        } else {
            let (name, rest) = s.split_once('(').ok_or_else(err)?;
            let args = rest
                .strip_suffix(')')
                .ok_or_else(err)?
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| err()))
                .collect::<Result<Vec<_>, _>>()?;
            match (name.trim(), args.as_slice()) {
                ("const", [a]) => StepSize::Const(*a),
                ("harmonic", [a, b]) => StepSize::Harmonic { a: *a, b: *b },
                ("power", [a, b, p]) => StepSize::Power {
                    a: *a,
                    b: *b,
                    p: *p,
                },
                _ => return Err(err()),
            }
        };
        parsed.validate()?;
        Ok(parsed)
    }
}

/// How the auxiliary step size `β_t` is derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AuxStepSize {
    None,
    /// `β_t = η α_t`
    Ratio(f64),
    Schedule(StepSize),
}

/// The pair `(α_t, β_t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizes {
    pub alpha: StepSize,
    pub beta: AuxStepSize,
}

impl StepSizes {
    pub fn new(alpha: StepSize) -> Self {
        Self {
            alpha,
            beta: AuxStepSize::None,
        }
    }

    pub fn constant(alpha: f64) -> Self {
        Self::new(StepSize::Const(alpha))
    }

    pub fn with_beta(mut self, beta: StepSize) -> Self {
        self.beta = AuxStepSize::Schedule(beta);
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.beta = AuxStepSize::Ratio(eta);
        self
    }

    pub fn alpha(&self, t: u64) -> f64 {
        self.alpha.at(t)
    }

    pub fn beta(&self, t: u64) -> f64 {
        match self.beta {
            AuxStepSize::None => 0.0,
            AuxStepSize::Ratio(eta) => eta * self.alpha.at(t),
            AuxStepSize::Schedule(b) => b.at(t),
        }
    }

    /// GTD needs a fixed ratio `β_t/α_t`; TDC needs `α_t/β_t → 0` unless
    /// both sequences are constant.
    pub fn validate_for(&self, kind: LearnerKind) -> Result<(), LearnerError> {
        self.alpha.validate()?;
        if !kind.is_gradient() {
            return Ok(());
        }
        match self.beta {
            AuxStepSize::None => Err(LearnerError::MissingBeta(kind)),
            AuxStepSize::Ratio(eta) if !(eta > 0.0 && eta.is_finite()) => Err(
                LearnerError::InvalidStepSize(format!("eta = {eta} must be positive")),
            ),
            AuxStepSize::Ratio(_) => {
                if kind == LearnerKind::Tdc && !matches!(self.alpha, StepSize::Const(_)) {
                    return Err(LearnerError::InvalidStepSize(
                        "TDC with a diminishing alpha needs a beta schedule that decays more slowly, not a fixed ratio".into(),
                    ));
                }
                Ok(())
            }
            AuxStepSize::Schedule(beta) => {
                beta.validate()?;
                let both_const =
                    matches!((self.alpha, beta), (StepSize::Const(_), StepSize::Const(_)));
                match kind {
                    LearnerKind::Gtd if !both_const => Err(LearnerError::InvalidStepSize(
                        "GTD needs beta/alpha fixed: give eta, or constant alpha and beta".into(),
                    )),
                    LearnerKind::Tdc
                        if !both_const && self.alpha.decay_exponent() <= beta.decay_exponent() =>
                    {
                        Err(LearnerError::InvalidStepSize(
                            "TDC needs alpha to decay faster than beta".into(),
                        ))
                    }
                    _ => Ok(()),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LearnerKind {
    TdSchedule,
    OffPolicyTdSchedule,
    Gtd,
    Tdc,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 4] = [
        LearnerKind::TdSchedule,
        LearnerKind::OffPolicyTdSchedule,
        LearnerKind::Gtd,
        LearnerKind::Tdc,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            LearnerKind::TdSchedule => "td_schedule",
            LearnerKind::OffPolicyTdSchedule => "offpolicy_td_schedule",
            LearnerKind::Gtd => "gtd_schedule",
            LearnerKind::Tdc => "tdc_schedule",
        }
    }

    /// Learns about the target policy from behavior data.
    pub fn is_off_policy(&self) -> bool {
        !matches!(self, LearnerKind::TdSchedule)
    }

    pub fn is_gradient(&self) -> bool {
        matches!(self, LearnerKind::Gtd | LearnerKind::Tdc)
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LearnerKind {
    type Err = LearnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| LearnerError::UnknownLearner(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    pub theta: DVector<f64>,
    /// Auxiliary vector of the gradient learners.
    pub w: Option<DVector<f64>>,
    pub t: u64,
    pub stepsizes: StepSizes,
}

impl LearnerState {
    pub fn new(theta: DVector<f64>, stepsizes: StepSizes) -> Self {
        Self {
            theta,
            w: None,
            t: 0,
            stepsizes,
        }
    }

    /// With `w₀ = 0`.
    pub fn with_aux(theta: DVector<f64>, stepsizes: StepSizes) -> Self {
        let w = DVector::zeros(theta.len());
        Self {
            theta,
            w: Some(w),
            t: 0,
            stepsizes,
        }
    }

    fn w(&self) -> &DVector<f64> {
        self.w.as_ref().expect("gradient learner state carries w")
    }
}

/// One transition `(φ_t, φ_{t+1}, R_{t+1})` with `φ_{t+1} = 0` when `s_{t+1}`
/// is terminal. The trace buffer must already hold `φ_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub phi: DVector<f64>,
    pub phi_next: DVector<f64>,
    pub reward: f64,
}

fn delta(theta: &DVector<f64>, tr: &Transition, gamma: f64) -> f64 {
    crate::returns::td_error(theta, &tr.phi, &tr.phi_next, tr.reward, gamma)
}

/// `θ ← θ + α_t δ_t z_t` with the on-policy trace.
pub fn td_schedule_step(
    state: &mut LearnerState,
    buffer: &TraceBuffer,
    tr: &Transition,
    schedule: &LambdaSchedule,
    gamma: f64,
) {
    let z = compute_trace(buffer, schedule, gamma, TraceMode::OnPolicy);
    td_update(state, &z, tr, gamma);
}

/// `θ ← θ + α_t δ_t z_t` with the ratio-weighted trace. The buffer's newest
/// ratio is `ρ_t`.
pub fn off_policy_td_step(
    state: &mut LearnerState,
    buffer: &TraceBuffer,
    tr: &Transition,
    schedule: &LambdaSchedule,
    gamma: f64,
) {
    let z = compute_trace(buffer, schedule, gamma, TraceMode::OffPolicy);
    td_update(state, &z, tr, gamma);
}

fn td_update(state: &mut LearnerState, z: &DVector<f64>, tr: &Transition, gamma: f64) {
    let alpha = state.stepsizes.alpha(state.t);
    let d = delta(&state.theta, tr, gamma);
    state.theta.axpy(alpha * d, z, 1.0);
    state.t += 1;
}

/// `θ ← θ + α(φ - γφ')(zᵀw)`, `w ← w + β(δz - φφᵀw)`, both from the
/// pre-update `(θ, w)`.
pub fn gtd_step(
    state: &mut LearnerState,
    buffer: &TraceBuffer,
    tr: &Transition,
    schedule: &LambdaSchedule,
    gamma: f64,
) {
    let z = compute_trace(buffer, schedule, gamma, TraceMode::OffPolicy);
    gtd_update(state, &z, tr, gamma);
}

fn gtd_update(state: &mut LearnerState, z: &DVector<f64>, tr: &Transition, gamma: f64) {
    let (alpha, beta) = (
        state.stepsizes.alpha(state.t),
        state.stepsizes.beta(state.t),
    );
    let d = delta(&state.theta, tr, gamma);
    let w = state.w();
    let zw = z.dot(w);
    let phi_w = tr.phi.dot(w);
    let mut dw = z * (beta * d);
    dw.axpy(-beta * phi_w, &tr.phi, 1.0);
    state.theta.axpy(alpha * zw, &tr.phi, 1.0);
    state.theta.axpy(-alpha * gamma * zw, &tr.phi_next, 1.0);
    *state.w.as_mut().expect("gradient learner state carries w") += dw;
    state.t += 1;
}

/// `θ ← θ + αδz - α((γφ' - φ)(zᵀw) + φ(φᵀw))`, with `w` as in [`gtd_step`].
pub fn tdc_step(
    state: &mut LearnerState,
    buffer: &TraceBuffer,
    tr: &Transition,
    schedule: &LambdaSchedule,
    gamma: f64,
) {
    let z = compute_trace(buffer, schedule, gamma, TraceMode::OffPolicy);
    tdc_update(state, &z, tr, gamma);
}

fn tdc_update(state: &mut LearnerState, z: &DVector<f64>, tr: &Transition, gamma: f64) {
    let (alpha, beta) = (
        state.stepsizes.alpha(state.t),
        state.stepsizes.beta(state.t),
    );
    let d = delta(&state.theta, tr, gamma);
    let w = state.w();
    let zw = z.dot(w);
    let phi_w = tr.phi.dot(w);
    let mut dw = z * (beta * d);
    dw.axpy(-beta * phi_w, &tr.phi, 1.0);
    state.theta.axpy(alpha * d, z, 1.0);
    state.theta.axpy(-alpha * gamma * zw, &tr.phi_next, 1.0);
    state.theta.axpy(alpha * zw - alpha * phi_w, &tr.phi, 1.0);
    *state.w.as_mut().expect("gradient learner state carries w") += dw;
    state.t += 1;
}

/// Applies the update rule of `kind` given a precomputed trace.
fn apply(
    kind: LearnerKind,
    state: &mut LearnerState,
    z: &DVector<f64>,
    tr: &Transition,
    gamma: f64,
) {
    match kind {
        LearnerKind::TdSchedule | LearnerKind::OffPolicyTdSchedule => {
            td_update(state, z, tr, gamma)
        }
        LearnerKind::Gtd => gtd_update(state, z, tr, gamma),
        LearnerKind::Tdc => tdc_update(state, z, tr, gamma),
    }
}

/// `‖θ‖` above this (or any non-finite entry) stops a run as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub steps: u64,
    pub seed: u64,
    pub eval_every: u64,
    pub divergence_threshold: f64,
}

impl RunOptions {
    pub fn new(steps: u64, seed: u64, eval_every: u64) -> Self {
        Self {
            steps,
            seed,
            eval_every,
            divergence_threshold: DIVERGENCE_THRESHOLD,
        }
    }
}

/// One learner run: metric values at steps `0, eval_every, 2·eval_every, …`
/// (cut short at divergence).
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub steps: Vec<u64>,
    pub metrics: Vec<Vec<f64>>,
    pub final_theta: DVector<f64>,
    pub final_w: Option<DVector<f64>>,
    /// Step at which `θ` left the divergence threshold.
    pub diverged_at: Option<u64>,
}

impl RunResult {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    /// Values of metric `i` along the series.
    pub fn series(&self, i: usize) -> Vec<f64> {
        self.metrics.iter().map(|m| m[i]).collect()
    }
}

/// Checks that `kind` can run on `env` with `stepsizes`.
pub fn check_setup(
    kind: LearnerKind,
    env: &Environment,
    stepsizes: &StepSizes,
) -> Result<(), LearnerError> {
    if kind.is_off_policy() && env.target.is_none() {
        return Err(LearnerError::MissingTarget {
            learner: kind,
            env: env.name.clone(),
        });
    }
    stepsizes.validate_for(kind)
}

/// Samples behavior-policy experience from `env` and applies `kind`'s
/// update each step. The trace window is cleared at termination and at
/// truncation, and the episode restarts from the start distribution.
/// `evaluate` is called on `θ` at step 0, every `eval_every` steps and at
/// divergence. `td_schedule` evaluates the behavior policy; the other
/// learners evaluate the target policy.
pub fn run<F>(
    kind: LearnerKind,
    env: &Environment,
    schedule: &LambdaSchedule,
    stepsizes: StepSizes,
    options: &RunOptions,
    evaluate: F,
) -> Result<RunResult, LearnerError>
where
    F: Fn(&DVector<f64>) -> Vec<f64>,
{
    check_setup(kind, env, &stepsizes)?;
    if options.eval_every == 0 {
        return Err(LearnerError::InvalidStepSize(
            "eval_every must be positive".into(),
        ));
    }
    let gamma = env.gamma();
    let coeffs = schedule.trace_coefficients(gamma);
    let mode = if kind.is_off_policy() {
        TraceMode::OffPolicy
    } else {
        TraceMode::OnPolicy
    };
    let theta0 = env.initial_theta();
    let mut state = if kind.is_gradient() {
        LearnerState::with_aux(theta0, stepsizes)
    } else {
        LearnerState::new(theta0, stepsizes)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let sampler = Sampler::new(&env.mdp, &env.behavior);
    let mut buffer = TraceBuffer::for_schedule(schedule);

    let mut steps = vec![0];
    let mut metrics = vec![evaluate(&state.theta)];
    let mut diverged_at = None;

    let mut s = sampler.start_state(&mut rng);
    let mut episode_steps = 0usize;
    for step in 1..=options.steps {
        let sampled = sampler.step(s, &mut rng);
        let rho = if kind.is_off_policy() {
            env.ratio(s, sampled.action)
        } else {
            1.0
        };
        let terminal = env.mdp.is_absorbing(sampled.next);
        let phi = env.features.phi(s);
        let phi_next = if terminal {
            DVector::zeros(env.dim())
        } else {
            env.features.phi(sampled.next)
        };
        buffer.push(phi.clone(), rho);
        let z = trace_from_coefficients(&buffer, &coeffs, mode);
        let tr = Transition {
            phi,
            phi_next,
            reward: sampled.reward,
        };
        apply(kind, &mut state, &z, &tr, gamma);

        episode_steps += 1;
        if terminal || env.mdp.episode_length() == Some(episode_steps) {
            buffer.clear();
            s = sampler.start_state(&mut rng);
            episode_steps = 0;
        } else {
            s = sampled.next;
        }

        let norm = state.theta.norm();
        if !norm.is_finite() || norm > options.divergence_threshold {
            diverged_at = Some(step);
            steps.push(step);
            metrics.push(evaluate(&state.theta));
            break;
        }
        if step % options.eval_every == 0 {
            steps.push(step);
            metrics.push(evaluate(&state.theta));
        }
    }
    Ok(RunResult {
        steps,
        metrics,
        final_theta: state.theta,
        final_w: state.w,
        diverged_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{gen_baird, gen_random_chain, FeatureMap, FiniteMdp, Policy};
    use crate::returns::{lambda_schedule_return, Trajectory};
    use crate::schedule::{equal_weights, make_schedule};
    use nalgebra::DMatrix;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn filled(phis: &[DVector<f64>], rhos: &[f64], truncation: usize) -> TraceBuffer {
        let mut b = TraceBuffer::new(truncation);
        for (p, r) in phis.iter().zip(rhos) {
            b.push(p.clone(), *r);
        }
        b
    }

    #[test]
    fn buffer_evicts_oldest() {
        let mut b = TraceBuffer::new(2);
        for i in 0..5 {
            b.push(v(&[i as f64]), 1.0);
        }
        assert_eq!(b.len(), 3);
        let order: Vec<f64> = b.recent().map(|(p, _)| p[0]).collect();
        assert_eq!(order, vec![4.0, 3.0, 2.0]);
        b.clear();
        assert!(b.is_empty());
    }

    #[test]
    fn trace_examples() {
        let zero = LambdaSchedule::zeros(3);
        let b = filled(&[v(&[0.0, 1.0]), v(&[1.0, 0.0])], &[1.0, 1.0], 3);
        assert_eq!(
            compute_trace(&b, &zero, 0.9, TraceMode::OnPolicy),
            v(&[1.0, 0.0])
        );

        let s = make_schedule(vec![0.5], 1).unwrap();
        let z = compute_trace(&b, &s, 0.9, TraceMode::OnPolicy);
        assert!((z - v(&[1.0, 0.45])).amax() < 1e-15);

        let s = LambdaSchedule::constant(0.7, 10).unwrap();
        let mut buffer = TraceBuffer::for_schedule(&s);
        let mut recursive = DVector::zeros(3);
        for i in 0..8 {
            let phi = v(&[i as f64, 1.0, -(i as f64) * 0.5]);
            recursive = recursive * (0.9 * 0.7) + &phi;
            buffer.push(phi, 1.0);
            let z = compute_trace(&buffer, &s, 0.9, TraceMode::OnPolicy);
            assert!((z - &recursive).amax() < 1e-12);
        }
    }

    #[test]
    fn off_policy_trace_reductions() {
        let s = equal_weights(2, 4).unwrap();
        let phis = [v(&[1.0, 2.0]), v(&[0.5, -1.0]), v(&[3.0, 0.0])];
        let ones = filled(&phis, &[1.0; 3], 4);
        assert_eq!(
            compute_trace(&ones, &s, 0.9, TraceMode::OffPolicy),
            compute_trace(&ones, &s, 0.9, TraceMode::OnPolicy)
        );
        let zeroed = filled(&phis, &[2.0, 1.5, 0.0], 4);
        assert_eq!(
            compute_trace(&zeroed, &s, 0.9, TraceMode::OffPolicy),
            DVector::zeros(2)
        );
    }

    fn constant_state(theta: DVector<f64>) -> LearnerState {
        LearnerState::new(theta, StepSizes::constant(0.1))
    }

    #[test]
    fn td_step_examples() {
        let s = LambdaSchedule::zeros(1);
        let mut state = constant_state(v(&[0.0]));
        let b = filled(&[v(&[1.0])], &[1.0], 1);
        let tr = Transition {
            phi: v(&[1.0]),
            phi_next: v(&[0.0]),
            reward: 1.0,
        };
        td_schedule_step(&mut state, &b, &tr, &s, 0.9);
        assert!((state.theta[0] - 0.1).abs() < 1e-15);
        assert_eq!(state.t, 1);

        let mut state = constant_state(v(&[2.0]));
        let tr = Transition {
            phi: v(&[1.0]),
            phi_next: v(&[1.0]),
            reward: 1.0,
        };
        td_schedule_step(&mut state, &b, &tr, &s, 0.5);
        assert_eq!(state.theta[0], 2.0);
    }

    #[test]
    fn off_policy_step_reductions() {
        let s = equal_weights(1, 3).unwrap();
        let phis = [v(&[1.0, 0.0]), v(&[0.2, 0.7])];
        let tr = Transition {
            phi: phis[1].clone(),
            phi_next: v(&[0.5, 0.5]),
            reward: 0.3,
        };
        let mut a = constant_state(v(&[0.4, -0.1]));
        let mut b = a.clone();
        off_policy_td_step(&mut a, &filled(&phis, &[1.0, 1.0], 3), &tr, &s, 0.9);
        td_schedule_step(&mut b, &filled(&phis, &[1.0, 1.0], 3), &tr, &s, 0.9);
        assert_eq!(a, b);
        let mut c = constant_state(v(&[0.4, -0.1]));
        off_policy_td_step(&mut c, &filled(&phis, &[3.0, 0.0], 3), &tr, &s, 0.9);
        assert_eq!(c.theta, v(&[0.4, -0.1]));
    }

    fn gradient_case() -> (LambdaSchedule, TraceBuffer, Transition) {
        let s = equal_weights(2, 3).unwrap();
        let phis = [
            v(&[1.0, 0.0, 0.5]),
            v(&[0.2, 0.7, -0.3]),
            v(&[0.0, 1.0, 1.0]),
        ];
        let buf = filled(&phis, &[1.2, 0.5, 2.0], 3);
        let tr = Transition {
            phi: phis[2].clone(),
            phi_next: v(&[0.4, 0.1, 0.9]),
            reward: -0.7,
        };
        (s, buf, tr)
    }

    #[test]
    fn gradient_steps_with_zero_w() {
        let (s, buf, tr) = gradient_case();
        let sizes = StepSizes::constant(0.05).with_eta(4.0);
        let theta = v(&[0.3, -0.2, 0.1]);
        let z = compute_trace(&buf, &s, 0.9, TraceMode::OffPolicy);
        let d = delta(&theta, &tr, 0.9);

        let mut g = LearnerState::with_aux(theta.clone(), sizes);
        gtd_step(&mut g, &buf, &tr, &s, 0.9);
        assert_eq!(g.theta, theta);
        assert!((g.w.unwrap() - &z * (0.2 * d)).amax() < 1e-15);

        let mut t = LearnerState::with_aux(theta.clone(), sizes);
        tdc_step(&mut t, &buf, &tr, &s, 0.9);
        let mut td = LearnerState::new(theta.clone(), sizes);
        off_policy_td_step(&mut td, &buf, &tr, &s, 0.9);
        assert!((t.theta - td.theta).amax() < 1e-15);

        // δ = 0 and w = 0 leave both vectors alone.
        let fixed = Transition {
            reward: theta.dot(&tr.phi) - 0.9 * theta.dot(&tr.phi_next),
            ..tr.clone()
        };
        for step in [gtd_step, tdc_step] {
            let mut st = LearnerState::with_aux(theta.clone(), sizes);
            step(&mut st, &buf, &fixed, &s, 0.9);
            assert!((st.theta - &theta).amax() < 1e-15);
            assert!(st.w.unwrap().amax() < 1e-15);
        }
    }

    #[test]
    fn gradient_steps_use_pre_update_snapshot() {
        let (s, buf, tr) = gradient_case();
        let gamma = 0.9;
        let sizes = StepSizes::constant(0.05).with_beta(StepSize::Const(0.3));
        let theta = v(&[0.3, -0.2, 0.1]);
        let w = v(&[0.5, 0.25, -0.4]);
        let z = compute_trace(&buf, &s, gamma, TraceMode::OffPolicy);
        let d = delta(&theta, &tr, gamma);
        let w_ref = &w + (&z * d - &tr.phi * tr.phi.dot(&w)) * 0.3;
        let gtd_ref = &theta + (&tr.phi - &tr.phi_next * gamma) * (z.dot(&w) * 0.05);
        let tdc_ref = &theta + &z * (0.05 * d)
            - ((&tr.phi_next * gamma - &tr.phi) * z.dot(&w) + &tr.phi * tr.phi.dot(&w)) * 0.05;

        let start = LearnerState {
            w: Some(w.clone()),
            ..LearnerState::with_aux(theta.clone(), sizes)
        };
        let mut g = start.clone();
        gtd_step(&mut g, &buf, &tr, &s, gamma);
        assert!((g.theta - gtd_ref).amax() < 1e-14);
        assert!((g.w.unwrap() - &w_ref).amax() < 1e-14);
        let mut t = start;
        tdc_step(&mut t, &buf, &tr, &s, gamma);
        assert!((t.theta - tdc_ref).amax() < 1e-14);
        assert!((t.w.unwrap() - &w_ref).amax() < 1e-14);
    }

    #[test]
    fn offline_sum_matches_forward_view() {
        let s = make_schedule(vec![0.9, 0.6, 0.8, 0.4, 0.7, 0.5, 0.3, 0.2], 8).unwrap();
        let gamma = 0.95;
        let theta = v(&[0.5, -0.3, 0.8]);
        let phis: Vec<DVector<f64>> = (0..6)
            .map(|i| v(&[(i as f64).sin(), (i as f64 * 0.7).cos(), 0.1 * i as f64]))
            .chain(std::iter::once(DVector::zeros(3)))
            .collect();
        let rewards: Vec<f64> = (0..6).map(|i| (i as f64 * 1.3).cos()).collect();
        let traj = Trajectory::new(phis.clone(), rewards.clone(), None, true).unwrap();

        let mut backward = DVector::zeros(3);
        let mut buffer = TraceBuffer::for_schedule(&s);
        for t in 0..6 {
            buffer.push(phis[t].clone(), 1.0);
            let z = compute_trace(&buffer, &s, gamma, TraceMode::OnPolicy);
            backward += z * traj.delta(t, &theta, gamma);
        }
        let mut forward = DVector::zeros(3);
        for t in 0..6 {
            let g = lambda_schedule_return(&traj, t, &theta, &s, gamma).unwrap();
            forward += &phis[t] * (g - theta.dot(&phis[t]));
        }
        assert!((backward - forward).amax() < 1e-10);
    }

    #[test]
    fn parses_names_and_step_sizes() {
        for k in LearnerKind::ALL {
            assert_eq!(k.name().parse::<LearnerKind>().unwrap(), k);
        }
        assert!("gtd".parse::<LearnerKind>().is_err());
        assert_eq!(
            "const(0.01)".parse::<StepSize>().unwrap(),
            StepSize::Const(0.01)
        );
        assert_eq!("0.5".parse::<StepSize>().unwrap(), StepSize::Const(0.5));
        let h: StepSize = "harmonic(1, 10)".parse().unwrap();
        assert_eq!(h.at(0), 0.1);
        assert_eq!(h.at(10), 0.05);
        assert!("const(-1)".parse::<StepSize>().is_err());
        assert!("cosine(1)".parse::<StepSize>().is_err());
        let p: StepSize = "power(1,1,0.5)".parse().unwrap();
        assert_eq!(p.at(3), 0.5);
    }

    #[test]
    fn step_size_rules() {
        let h = StepSize::Harmonic { a: 1.0, b: 10.0 };
        let slow = StepSize::Power {
            a: 1.0,
            b: 10.0,
            p: 0.6,
        };
        assert!(StepSizes::new(h)
            .with_eta(2.0)
            .validate_for(LearnerKind::Gtd)
            .is_ok());
        assert!(StepSizes::new(h)
            .with_beta(slow)
            .validate_for(LearnerKind::Gtd)
            .is_err());
        assert!(StepSizes::new(h)
            .with_beta(slow)
            .validate_for(LearnerKind::Tdc)
            .is_ok());
        assert!(StepSizes::new(slow)
            .with_beta(h)
            .validate_for(LearnerKind::Tdc)
            .is_err());
        assert!(StepSizes::constant(0.1)
            .validate_for(LearnerKind::Gtd)
            .is_err());
        assert!(StepSizes::constant(0.1)
            .with_eta(0.0)
            .validate_for(LearnerKind::Gtd)
            .is_err());
        assert!(StepSizes::constant(0.005)
            .with_beta(StepSize::Const(0.05))
            .validate_for(LearnerKind::Tdc)
            .is_ok());
        let s = StepSizes::new(h).with_eta(3.0);
        assert_eq!(s.beta(5) / s.alpha(5), 3.0);
    }

    fn single_state_env() -> Environment {
        let mdp = FiniteMdp::new(
            vec![DMatrix::from_element(1, 1, 1.0)],
            DMatrix::from_element(1, 1, 1.0),
            0.5,
        )
        .unwrap();
        let features = FeatureMap::tabular(&mdp);
        Environment::new(
            "single",
            mdp,
            Policy::uniform_rows(1, &[1.0]).unwrap(),
            None,
            features,
        )
        .unwrap()
    }

    #[test]
    fn single_state_converges_to_true_value() {
        let env = single_state_env();
        let result = run(
            LearnerKind::TdSchedule,
            &env,
            &LambdaSchedule::zeros(1),
            StepSizes::constant(0.1),
            &RunOptions::new(1000, 0, 100),
            |theta| vec![theta[0]],
        )
        .unwrap();
        assert!((result.final_theta[0] - 2.0).abs() < 1e-2);
        assert_eq!(result.steps.len(), 11);
    }

    #[test]
    fn runs_are_reproducible_and_validated() {
        let env = gen_random_chain();
        let s = equal_weights(2, 4).unwrap();
        let sizes = StepSizes::constant(0.01).with_beta(StepSize::Const(0.1));
        let eval = |theta: &DVector<f64>| vec![theta.norm()];
        let a = run(
            LearnerKind::Tdc,
            &env,
            &s,
            sizes,
            &RunOptions::new(2000, 3, 100),
            eval,
        )
        .unwrap();
        let b = run(
            LearnerKind::Tdc,
            &env,
            &s,
            sizes,
            &RunOptions::new(2000, 3, 100),
            eval,
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.steps.len(), 21);

        let empty = run(
            LearnerKind::TdSchedule,
            &env,
            &s,
            sizes,
            &RunOptions::new(0, 3, 100),
            eval,
        )
        .unwrap();
        assert_eq!(empty.steps, vec![0]);

        let walk = crate::mdp::gen_random_walk_100(0);
        assert!(matches!(
            run(
                LearnerKind::Gtd,
                &walk,
                &s,
                sizes,
                &RunOptions::new(10, 0, 1),
                eval
            ),
            Err(LearnerError::MissingTarget { .. })
        ));
    }

    #[test]
    fn off_policy_td_diverges_on_baird() {
        let env = gen_baird();
        let s = equal_weights(4, 6).unwrap();
        let norm0 = env.initial_theta().norm();
        let result = run(
            LearnerKind::OffPolicyTdSchedule,
            &env,
            &s,
            StepSizes::constant(0.005),
            &RunOptions::new(5000, 1, 50),
            |theta| vec![theta.norm()],
        )
        .unwrap();
        let last = *result.series(0).last().unwrap();
        assert!(
            result.diverged() || last > 10.0 * norm0,
            "final norm {last}"
        );
    }
}
