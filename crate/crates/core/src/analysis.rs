//! Exact fixed-point quantities of the λ-schedule learners.
//!
//! All chain quantities live on the non-absorbing states. `Q` below is the
//! discounted continuation kernel `γ P_cont`: it equals `γP` for continuing
//! chains and drops the probability of absorbing for episodic ones, which is
//! what clearing the trace at termination computes.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Schur};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::learners::{compute_trace, TraceBuffer, TraceMode};
use crate::mdp::{induced_chain, Environment, MdpError, PolicyKernel, Sampler};
use crate::schedule::LambdaSchedule;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error("off-policy analysis needs a target policy; environment `{0}` has none")]
    MissingTarget(String),
    #[error("matrix is singular or ill-conditioned (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },
    #[error("linear solve residual {residual:e} exceeds tolerance")]
    Residual { residual: f64 },
    #[error("eta must be positive, got {0}")]
    InvalidEta(f64),
    #[error("C is singular and the residual has a component of size {0:e} outside its range")]
    OutsideRange(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unknown mode `{0}` (expected on or off)")]
    UnknownMode(String),
}

/// Which policy the fixed point refers to. Samples always come from the
/// behavior policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Evaluate the behavior policy itself.
    OnPolicy,
    /// Evaluate the target policy from behavior data.
    OffPolicy,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::OnPolicy => "on",
            Mode::OffPolicy => "off",
        })
    }
}

impl FromStr for Mode {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "on" | "on-policy" | "on_policy" => Ok(Mode::OnPolicy),
            "off" | "off-policy" | "off_policy" => Ok(Mode::OffPolicy),
            other => Err(AnalysisError::UnknownMode(other.to_string())),
        }
    }
}

/// `M = Σ_{k<L} γ^{k+1} λ_1⋯λ_k(1-λ_{k+1}) P^{k+1} + γ^{L+1} λ_1⋯λ_L P^{L+1}`.
pub fn compute_m(p: &DMatrix<f64>, gamma: f64, schedule: &LambdaSchedule) -> DMatrix<f64> {
    compute_m_discounted(&(p * gamma), schedule)
}

/// [`compute_m`] with the discount already folded into `q`.
pub fn compute_m_discounted(q: &DMatrix<f64>, schedule: &LambdaSchedule) -> DMatrix<f64> {
    let n = q.nrows();
    let products = schedule.lambda_products();
    let l = schedule.truncation();
    let mut m = DMatrix::zeros(n, n);
    let mut power = q.clone();
    for k in 0..=l {
        let weight = if k < l {
            products[k] * (1.0 - schedule.lambda(k + 1))
        } else {
            products[l]
        };
        if weight != 0.0 {
            m += &power * weight;
        }
        if k < l {
            if products[k + 1] == 0.0 {
                break;
            }
            power = &power * q;
        }
    }
    m
}

/// `A`, `b`, `C` and the chain quantities they were built from.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub mode: Mode,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DMatrix<f64>,
    pub m: DMatrix<f64>,
    /// Sampling distribution over the live states.
    pub d: DVector<f64>,
    /// Features of the live states.
    pub phi: DMatrix<f64>,
    /// True values of the evaluated policy on the live states.
    pub values: DVector<f64>,
    /// `γ P_cont` of the evaluated policy.
    pub q: DMatrix<f64>,
    pub expected_reward: DVector<f64>,
}

/// `A = ΦᵀD(M - I)Φ`, `b = ΦᵀD Σ_k λ_1⋯λ_k Q^k r̄`, `C = ΦᵀDΦ`, with `D` the
/// behavior chain's stationary distribution and `Q`, `r̄` from the
/// evaluated policy.
pub fn compute_abc(
    env: &Environment,
    schedule: &LambdaSchedule,
    mode: Mode,
) -> Result<LinearSystem, AnalysisError> {
    let chain = induced_chain(&env.mdp, &env.behavior)?;
    let evaluated = match mode {
        Mode::OnPolicy => chain.kernel().clone(),
        Mode::OffPolicy => {
            let target = env
                .target
                .as_ref()
                .ok_or_else(|| AnalysisError::MissingTarget(env.name.clone()))?;
            PolicyKernel::new(&env.mdp, target)?
        }
    };
    let gamma = env.gamma();
    let phi = env.live_features();
    let d = chain.stationary().clone();
    let q = evaluated.continuation() * gamma;
    let rbar = evaluated.expected_reward().clone();
    let m = compute_m_discounted(&q, schedule);
    let n = q.nrows();

    let mut reward_sum = DVector::zeros(n);
    let mut ahead = rbar.clone();
    let products = schedule.lambda_products();
    for (k, &w) in products.iter().enumerate() {
        if w == 0.0 {
            break;
        }
        reward_sum.axpy(w, &ahead, 1.0);
        if k + 1 < products.len() {
            ahead = &q * ahead;
        }
    }

    let dphi = DMatrix::from_fn(n, phi.ncols(), |i, j| d[i] * phi[(i, j)]);
    let phi_t_d = dphi.transpose();
    let a = &phi_t_d * (&m - DMatrix::identity(n, n)) * &phi;
    let b = &phi_t_d * reward_sum;
    let c = &phi_t_d * &phi;
    let values = evaluated.true_values(gamma);
    Ok(LinearSystem {
        mode,
        a,
        b,
        c,
        m,
        d,
        phi,
        values,
        q,
        expected_reward: rbar,
    })
}

/// Sample averages of `z_t(γφ_{t+1} - φ_t)ᵀ`, `z_t R_{t+1}` and `φ_tφ_tᵀ`
/// with batch-means standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DMatrix<f64>,
    pub se_a: DMatrix<f64>,
    pub se_b: DVector<f64>,
    pub se_c: DMatrix<f64>,
    pub samples: u64,
}

/// Number of batches used for the batch-means standard errors.
pub const MC_BATCHES: usize = 100;

/// Simulates the behavior chain from its stationary distribution for
/// `steps` transitions after an `L`-step warm-up. Termination clears the
/// trace and restarts; episode truncation is ignored, so the simulated
/// process is exactly the continuing chain the closed forms describe.
pub fn compute_abc_mc(
    env: &Environment,
    schedule: &LambdaSchedule,
    mode: Mode,
    steps: u64,
    seed: u64,
) -> Result<McEstimate, AnalysisError> {
    if mode == Mode::OffPolicy && env.target.is_none() {
        return Err(AnalysisError::MissingTarget(env.name.clone()));
    }
    if steps < MC_BATCHES as u64 {
        return Err(AnalysisError::Dimension(format!(
            "need at least {MC_BATCHES} steps"
        )));
    }
    let chain = induced_chain(&env.mdp, &env.behavior)?;
    let gamma = env.gamma();
    let dim = env.dim();
    let trace_mode = match mode {
        Mode::OnPolicy => TraceMode::OnPolicy,
        Mode::OffPolicy => TraceMode::OffPolicy,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = Sampler::new(&env.mdp, &env.behavior);
    let stationary =
        WeightedIndex::new(chain.stationary().iter().copied()).expect("stationary distribution");
    let live = chain.live().to_vec();
    let mut buffer = TraceBuffer::for_schedule(schedule);
    let mut s = live[stationary.sample(&mut rng)];

    let batch = steps / MC_BATCHES as u64;
    let used = batch * MC_BATCHES as u64;
    let warmup = schedule.truncation() as u64;
    let mut acc_a = DMatrix::zeros(dim, dim);
    let mut acc_b = DVector::zeros(dim);
    let mut acc_c = DMatrix::zeros(dim, dim);
    let mut means_a = Vec::with_capacity(MC_BATCHES);
    let mut means_b = Vec::with_capacity(MC_BATCHES);
    let mut means_c = Vec::with_capacity(MC_BATCHES);

    for step in 0..warmup + used {
        let sampled = sampler.step(s, &mut rng);
        let rho = match mode {
            Mode::OnPolicy => 1.0,
            Mode::OffPolicy => env.ratio(s, sampled.action),
        };
        let terminal = env.mdp.is_absorbing(sampled.next);
        let phi = env.features.phi(s);
        buffer.push(phi.clone(), rho);
        if step >= warmup {
            let z = compute_trace(&buffer, schedule, gamma, trace_mode);
            let mut diff = -&phi;
            if !terminal {
                diff.axpy(gamma, &env.features.phi(sampled.next), 1.0);
            }
            acc_a.ger(1.0, &z, &diff, 1.0);
            acc_b.axpy(sampled.reward, &z, 1.0);
            acc_c.ger(1.0, &phi, &phi, 1.0);
            if (step - warmup + 1).is_multiple_of(batch) {
                let scale = 1.0 / batch as f64;
                means_a.push(&acc_a * scale);
                means_b.push(&acc_b * scale);
                means_c.push(&acc_c * scale);
                acc_a.fill(0.0);
                acc_b.fill(0.0);
                acc_c.fill(0.0);
            }
        }
        if terminal {
            buffer.clear();
            s = sampler.start_state(&mut rng);
        } else {
            s = sampled.next;
        }
    }

    let (a, se_a) = batch_stats(&means_a);
    let (b, se_b) = batch_stats(&means_b);
    let (c, se_c) = batch_stats(&means_c);
    Ok(McEstimate {
        a,
        b,
        c,
        se_a,
        se_b,
        se_c,
        samples: used,
    })
}

fn batch_stats<R: nalgebra::Dim, C: nalgebra::Dim>(
    means: &[nalgebra::OMatrix<f64, R, C>],
) -> (nalgebra::OMatrix<f64, R, C>, nalgebra::OMatrix<f64, R, C>)
where
    nalgebra::DefaultAllocator: nalgebra::allocator::Allocator<R, C>,
{
    let k = means.len() as f64;
    let mut mean = means[0].clone() * 0.0;
    for m in means {
        mean += m;
    }
    mean /= k;
    let mut var = mean.clone() * 0.0;
    for m in means {
        var += (m - &mean).map(|x| x * x);
    }
    let se = var.map(|v| (v / (k - 1.0) / k).sqrt());
    (mean, se)
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Eigenvalues of `(M + Mᵀ)/2`, ascending.
pub fn symmetric_part_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut eig: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    eig
}

/// Largest real part of the eigenvalues (NaN if the Schur iteration does
/// not converge).
pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    [1e-14, 1e-12]
        .into_iter()
        .find_map(|eps| Schur::try_new(m.clone(), eps, 100_000))
        .map_or(f64::NAN, |schur| {
            schur
                .complex_eigenvalues()
                .iter()
                .map(|z| z.re)
                .fold(f64::NEG_INFINITY, f64::max)
        })
}

/// Condition number from the singular values (infinite when singular).
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Default relative tolerance for the definiteness certificates.
pub const DEFINITENESS_TOL: f64 = 1e-10;

/// Outcome of a definiteness test on the symmetric part of a matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub holds: bool,
    /// Largest (negative test) or smallest (positive test) eigenvalue of
    /// the symmetric part.
    pub extreme_eigenvalue: f64,
    pub norm: f64,
}

/// Holds iff the largest eigenvalue of `(M + Mᵀ)/2` is below `-tol·‖M‖₂`.
pub fn check_negative_definite(m: &DMatrix<f64>, tol: f64) -> Certificate {
    let eig = symmetric_part_eigenvalues(m);
    let extreme = *eig.last().expect("non-empty matrix");
    let norm = spectral_norm(m);
    Certificate {
        holds: extreme < -tol * norm,
        extreme_eigenvalue: extreme,
        norm,
    }
}

/// Holds iff the smallest eigenvalue of `(M + Mᵀ)/2` exceeds `tol·‖M‖₂`.
pub fn check_positive_definite(m: &DMatrix<f64>, tol: f64) -> Certificate {
    let eig = symmetric_part_eigenvalues(m);
    let extreme = eig[0];
    let norm = spectral_norm(m);
    Certificate {
        holds: extreme > tol * norm,
        extreme_eigenvalue: extreme,
        norm,
    }
}

/// Solves `Aθ = -b`.
pub fn solve_fixed_point(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
) -> Result<DVector<f64>, AnalysisError> {
    if !a.is_square() || a.nrows() != b.len() {
        return Err(AnalysisError::Dimension(format!(
            "A is {}x{}, b has length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let condition = condition_number(a);
    if !(condition <= 1e12) {
        return Err(AnalysisError::IllConditioned { condition });
    }
    let theta = a
        .clone()
        .lu()
        .solve(&(-b))
        .ok_or(AnalysisError::IllConditioned { condition })?;
    let residual = (a * &theta + b).norm();
    if residual > 1e-8 * b.norm() {
        return Err(AnalysisError::Residual { residual });
    }
    Ok(theta)
}

/// `-AᵀC⁻¹A`, the matrix governing the slow TDC iterate.
pub fn tdc_limit_matrix(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>, AnalysisError> {
    let condition = condition_number(c);
    if !(condition <= 1e12) {
        return Err(AnalysisError::IllConditioned { condition });
    }
    let c_inv_a = c
        .clone()
        .lu()
        .solve(a)
        .ok_or(AnalysisError::IllConditioned { condition })?;
    Ok(-(a.transpose() * c_inv_a))
}

/// The expected GTD iterate in the scaled coordinates `ξ = (w/√η, θ)`
/// is `ξ̇ ∝ Gξ + (b, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GtdBlockReport {
    pub eta: f64,
    pub g: DMatrix<f64>,
    /// Largest eigenvalue of `(G + Gᵀ)/2`; never below 0 because of the
    /// zero block.
    pub max_sym_eig: f64,
    /// Largest real part among the eigenvalues of `G`.
    pub spectral_abscissa: f64,
    /// Symmetric part negative semidefinite and every eigenvalue strictly in
    /// the left half plane (relative to `tol·‖G‖`).
    pub certified: bool,
    pub w_star: Option<DVector<f64>>,
    pub theta_star: Option<DVector<f64>>,
}

pub fn gtd_block_matrix(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    b: &DVector<f64>,
    eta: f64,
) -> Result<GtdBlockReport, AnalysisError> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(AnalysisError::InvalidEta(eta));
    }
    let d = a.nrows();
    if a.ncols() != d || c.shape() != (d, d) || b.len() != d {
        return Err(AnalysisError::Dimension("A, C and b must agree".into()));
    }
    let root = eta.sqrt();
    let mut g = DMatrix::zeros(2 * d, 2 * d);
    g.view_mut((0, 0), (d, d)).copy_from(&(c * -root));
    g.view_mut((0, d), (d, d)).copy_from(a);
    g.view_mut((d, 0), (d, d)).copy_from(&(-a.transpose()));

    let norm = spectral_norm(&g);
    let max_sym_eig = *symmetric_part_eigenvalues(&g).last().expect("non-empty");
    let spectral_abscissa = spectral_abscissa(&g);
    let tol = DEFINITENESS_TOL * norm;
    let certified = max_sym_eig <= tol && spectral_abscissa < -tol;

    let mut rhs = DVector::zeros(2 * d);
    rhs.rows_mut(0, d).copy_from(&(-b));
    let (w_star, theta_star) = if condition_number(&g) <= 1e12 {
        match g.clone().lu().solve(&rhs) {
            Some(xi) => (Some(xi.rows(0, d) * root), Some(xi.rows(d, d).into_owned())),
            None => (None, None),
        }
    } else {
        (None, None)
    };
    Ok(GtdBlockReport {
        eta,
        g,
        max_sym_eig,
        spectral_abscissa,
        certified,
        w_star,
        theta_star,
    })
}

/// `√(Σ_s d(s)(V(s) - θᵀφ(s))²)`.
pub fn rmse(
    theta: &DVector<f64>,
    phi: &DMatrix<f64>,
    values: &DVector<f64>,
    d: &DVector<f64>,
) -> f64 {
    let err = values - phi * theta;
    err.iter()
        .zip(d.iter())
        .map(|(e, w)| w * e * e)
        .sum::<f64>()
        .sqrt()
}

/// `√(Σ_s d(s) v(s)²)`.
pub fn d_norm(v: &DVector<f64>, d: &DVector<f64>) -> f64 {
    v.iter()
        .zip(d.iter())
        .map(|(x, w)| w * x * x)
        .sum::<f64>()
        .sqrt()
}

/// `√((Aθ + b)ᵀ C⁺ (Aθ + b))` with the eigen-decomposition of `C` computed
/// once.
#[derive(Debug, Clone)]
pub struct PbeEvaluator {
    a: DMatrix<f64>,
    b: DVector<f64>,
    basis: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    null_basis: DMatrix<f64>,
}

impl PbeEvaluator {
    pub fn new(
        a: &DMatrix<f64>,
        b: &DVector<f64>,
        c: &DMatrix<f64>,
    ) -> Result<Self, AnalysisError> {
        let d = a.nrows();
        if a.ncols() != d || c.shape() != (d, d) || b.len() != d {
            return Err(AnalysisError::Dimension("A, C and b must agree".into()));
        }
        let eig = ((c + c.transpose()) * 0.5).symmetric_eigen();
        let max = eig.eigenvalues.amax();
        let keep: Vec<usize> = (0..d)
            .filter(|&i| eig.eigenvalues[i] > 1e-10 * max)
            .collect();
        let drop: Vec<usize> = (0..d).filter(|i| !keep.contains(i)).collect();
        Ok(Self {
            a: a.clone(),
            b: b.clone(),
            basis: eig.eigenvectors.select_columns(&keep),
            eigenvalues: keep.iter().map(|&i| eig.eigenvalues[i]).collect(),
            null_basis: eig.eigenvectors.select_columns(&drop),
        })
    }

    pub fn eval(&self, theta: &DVector<f64>) -> Result<f64, AnalysisError> {
        let r = &self.a * theta + &self.b;
        if self.null_basis.ncols() > 0 {
            let outside = (self.null_basis.transpose() * &r).norm();
            if outside > 1e-8 * r.norm() + 1e-12 {
                return Err(AnalysisError::OutsideRange(outside));
            }
        }
        let coords = self.basis.transpose() * r;
        Ok(coords
            .iter()
            .zip(&self.eigenvalues)
            .map(|(x, l)| x * x / l)
            .sum::<f64>()
            .sqrt())
    }
}

/// `√((Aθ + b)ᵀ C⁻¹ (Aθ + b))`, using the pseudo-inverse for singular `C`.
pub fn rmspbe(
    theta: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &DMatrix<f64>,
) -> Result<f64, AnalysisError> {
    PbeEvaluator::new(a, b, c)?.eval(theta)
}

/// Certificates after restricting to the row space of Φ, the subspace on
/// which `θ` is identifiable when Φ has fewer rows than columns.
#[derive(Debug, Clone, PartialEq)]
pub struct RowSpaceReport {
    pub rank: usize,
    pub a_negative_definite: Certificate,
    pub c_positive_definite: Certificate,
    pub gtd: Option<GtdBlockReport>,
    /// Minimum-norm fixed point.
    pub theta_star: Option<DVector<f64>>,
}

/// Orthonormal basis (as columns) of the row space of `phi`.
pub fn row_space_basis(phi: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = phi.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let max = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 1e-10 * max)
        .collect();
    v_t.select_rows(&keep).transpose()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointReport {
    pub system: LinearSystem,
    pub theta_star: Result<DVector<f64>, String>,
    pub a_negative_definite: Certificate,
    pub c_positive_definite: Certificate,
    pub tdc_negative_definite: Option<Certificate>,
    pub gtd: Option<GtdBlockReport>,
    pub row_space: Option<RowSpaceReport>,
    pub rmse_at_zero: f64,
    pub rmspbe_at_zero: Result<f64, String>,
}

impl FixedPointReport {
    pub fn max_sym_eig_a(&self) -> f64 {
        self.a_negative_definite.extreme_eigenvalue
    }

    pub fn min_eig_c(&self) -> f64 {
        self.c_positive_definite.extreme_eigenvalue
    }
}

/// Assembles `A`, `b`, `C`, `θ*` and every certificate for one environment.
pub fn fixed_point_report(
    env: &Environment,
    schedule: &LambdaSchedule,
    mode: Mode,
    eta: Option<f64>,
) -> Result<FixedPointReport, AnalysisError> {
    let system = compute_abc(env, schedule, mode)?;
    let (a, b, c) = (&system.a, &system.b, &system.c);
    let theta_star = solve_fixed_point(a, b).map_err(|e| e.to_string());
    let a_nd = check_negative_definite(a, DEFINITENESS_TOL);
    let c_pd = check_positive_definite(c, DEFINITENESS_TOL);
    let tdc = tdc_limit_matrix(a, c)
        .ok()
        .map(|m| check_negative_definite(&m, DEFINITENESS_TOL));
    let gtd = eta.map(|eta| gtd_block_matrix(a, c, b, eta)).transpose()?;
    let row_space = if env.features.has_full_column_rank() {
        None
    } else {
        let u = row_space_basis(&system.phi);
        let (ar, br, cr) = (
            u.transpose() * a * &u,
            u.transpose() * b,
            u.transpose() * c * &u,
        );
        Some(RowSpaceReport {
            rank: u.ncols(),
            a_negative_definite: check_negative_definite(&ar, DEFINITENESS_TOL),
            c_positive_definite: check_positive_definite(&cr, DEFINITENESS_TOL),
            gtd: eta
                .map(|eta| gtd_block_matrix(&ar, &cr, &br, eta))
                .transpose()?,
            theta_star: solve_fixed_point(&ar, &br).ok().map(|t| &u * t),
        })
    };
    let zero = DVector::zeros(env.dim());
    let rmse_at_zero = rmse(&zero, &system.phi, &system.values, &system.d);
    let rmspbe_at_zero = rmspbe(&zero, a, b, c).map_err(|e| e.to_string());
    Ok(FixedPointReport {
        theta_star,
        a_negative_definite: a_nd,
        c_positive_definite: c_pd,
        tdc_negative_definite: tdc,
        gtd,
        row_space,
        rmse_at_zero,
        rmspbe_at_zero,
        system,
    })
}
