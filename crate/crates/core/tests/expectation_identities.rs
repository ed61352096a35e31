//! Forward-view gaps and backward-view `δ_t z_t` have the same expectation
//! under the behavior chain, equal to `Aθ + b`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tdschedule::analysis::{compute_abc, Mode};
use tdschedule::learners::{compute_trace, TraceBuffer, TraceMode};
use tdschedule::mdp::{gen_random_chain, Environment, Sampler};
use tdschedule::returns::{
    off_policy_return_gap, rho_weighted_return, td_error, telescoped_return_gap, Trajectory,
};
use tdschedule::{equal_weights, LambdaSchedule};

const STEPS: usize = 1_000_000;
const BATCHES: usize = 100;

struct Samples {
    forward: Vec<DVector<f64>>,
    rho_weighted: Vec<DVector<f64>>,
    backward: Vec<DVector<f64>>,
}

fn simulate(
    env: &Environment,
    schedule: &LambdaSchedule,
    mode: Mode,
    theta: &DVector<f64>,
    seed: u64,
) -> Samples {
    let gamma = env.gamma();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = Sampler::new(&env.mdp, &env.behavior);
    let trace_mode = match mode {
        Mode::OnPolicy => TraceMode::OnPolicy,
        Mode::OffPolicy => TraceMode::OffPolicy,
    };
    let mut out = Samples {
        forward: Vec::with_capacity(STEPS),
        rho_weighted: Vec::with_capacity(STEPS),
        backward: Vec::with_capacity(STEPS),
    };
    while out.forward.len() < STEPS {
        let mut s = sampler.start_state(&mut rng);
        let (mut phis, mut rewards, mut rhos) = (vec![env.features.phi(s)], Vec::new(), Vec::new());
        let mut buffer = TraceBuffer::for_schedule(schedule);
        loop {
            let step = sampler.step(s, &mut rng);
            let rho = match mode {
                Mode::OnPolicy => 1.0,
                Mode::OffPolicy => env.ratio(s, step.action),
            };
            let terminal = env.mdp.is_absorbing(step.next);
            let phi = env.features.phi(s);
            let phi_next = if terminal {
                DVector::zeros(env.dim())
            } else {
                env.features.phi(step.next)
            };
            buffer.push(phi.clone(), rho);
            let z = compute_trace(&buffer, schedule, gamma, trace_mode);
            out.backward
                .push(z * td_error(theta, &phi, &phi_next, step.reward, gamma));
            phis.push(env.features.phi(step.next));
            rewards.push(step.reward);
            rhos.push(rho);
            if terminal {
                break;
            }
            s = step.next;
        }
        let traj = Trajectory::new(phis, rewards, Some(rhos), true).unwrap();
        for t in 0..traj.len() {
            let gap = match mode {
                Mode::OnPolicy => telescoped_return_gap(&traj, t, theta, schedule, gamma),
                Mode::OffPolicy => off_policy_return_gap(&traj, t, theta, schedule, gamma),
            }
            .unwrap();
            let g_rho = rho_weighted_return(&traj, t, theta, schedule, gamma).unwrap();
            out.forward.push(traj.phi(t) * gap);
            out.rho_weighted
                .push(traj.phi(t) * (g_rho - traj.value(t, theta)));
        }
    }
    out
}

/// Mean and batch-means standard error of each coordinate.
fn batch_means(xs: &[DVector<f64>]) -> (DVector<f64>, DVector<f64>) {
    let per = xs.len() / BATCHES;
    let means: Vec<DVector<f64>> = (0..BATCHES)
        .map(|i| {
            xs[i * per..(i + 1) * per]
                .iter()
                .fold(DVector::zeros(xs[0].len()), |acc, x| acc + x)
                / per as f64
        })
        .collect();
    let k = BATCHES as f64;
    let mean = means
        .iter()
        .fold(DVector::zeros(xs[0].len()), |acc, m| acc + m)
        / k;
    let var = means.iter().fold(DVector::zeros(xs[0].len()), |acc, m| {
        acc + (m - &mean).map(|x| x * x)
    });
    (mean, var.map(|v| (v / (k - 1.0) / k).sqrt()))
}

fn within_three_se(label: &str, est: &DVector<f64>, se: &DVector<f64>, exact: &DVector<f64>) {
    for i in 0..exact.len() {
        let diff = (est[i] - exact[i]).abs();
        assert!(
            diff <= 3.0 * se[i] + 1e-12,
            "{label}[{i}]: estimate {} vs {} (se {})",
            est[i],
            exact[i],
            se[i]
        );
    }
}

fn check(mode: Mode, seed: u64) {
    let env = gen_random_chain();
    let schedule = equal_weights(2, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = DVector::from_fn(env.dim(), |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let sys = compute_abc(&env, &schedule, mode).unwrap();
    let exact = &sys.a * &theta + &sys.b;
    let samples = simulate(&env, &schedule, mode, &theta, seed);

    let (fwd, fwd_se) = batch_means(&samples.forward);
    let (bwd, bwd_se) = batch_means(&samples.backward);
    let (rho, rho_se) = batch_means(&samples.rho_weighted);
    within_three_se("forward", &fwd, &fwd_se, &exact);
    within_three_se("backward", &bwd, &bwd_se, &exact);
    within_three_se("rho-weighted", &rho, &rho_se, &exact);
}

#[test]
fn on_policy_views_agree_in_expectation() {
    check(Mode::OnPolicy, 11);
}

#[test]
fn off_policy_views_agree_in_expectation() {
    check(Mode::OffPolicy, 12);
}
