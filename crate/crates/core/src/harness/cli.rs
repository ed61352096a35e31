//! Command-line entry point.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use super::{emit_csv, run_experiment, ExperimentConfig, HarnessError};
use crate::analysis::{
    compute_abc, fixed_point_report, gtd_block_matrix, Certificate, FixedPointReport,
    GtdBlockReport, Mode,
};
use crate::mdp::{induced_chain, Environment, PolicyKernel};
use crate::schedule::LambdaSchedule;

#[derive(Debug, Parser)]
#[command(
    name = "tdschedule",
    version,
    about = "λ-schedule TD prediction: experiments, fixed points and certificates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config and write its CSVs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's `out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print A, b, C, the fixed point and its certificates.
    Solve {
        /// Benchmark name (random_walk_100, random_chain, baird) or environment file.
        #[arg(long)]
        env: String,
        /// Generator seed for random_walk_100.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `[1, 2/3, 0.5]`, `equal_weights(2,4)`, `constant(0.9,10)` or `zeros(L)`.
        #[arg(long)]
        schedule: String,
        /// `on` evaluates the behavior policy, `off` the target policy.
        #[arg(long, default_value = "on")]
        mode: String,
        /// Step-size ratio for the GTD block matrix.
        #[arg(long)]
        eta: Option<f64>,
        /// Also write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the model invariants and report every definiteness certificate.
    Check {
        #[arg(long)]
        env: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "equal_weights(2,4)")]
        schedule: String,
        /// Ratios for the GTD block matrix.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 10.0])]
        eta: Vec<f64>,
    },
    /// Write a benchmark environment to a TOML file.
    Gen {
        #[arg(long)]
        env: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("{0}")]
    Message(String),
}

impl From<crate::mdp::MdpError> for CliError {
    fn from(e: crate::mdp::MdpError) -> Self {
        CliError::Harness(e.into())
    }
}

impl From<crate::analysis::AnalysisError> for CliError {
    fn from(e: crate::analysis::AnalysisError) -> Self {
        CliError::Harness(e.into())
    }
}

impl From<crate::schedule::ScheduleError> for CliError {
    fn from(e: crate::schedule::ScheduleError) -> Self {
        CliError::Harness(e.into())
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit status.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Run { config, out } => cmd_run(config, out),
        Command::Solve {
            env,
            seed,
            schedule,
            mode,
            eta,
            out,
        } => cmd_solve(&env, seed, &schedule, &mode, eta, out),
        Command::Check {
            env,
            seed,
            schedule,
            eta,
        } => cmd_check(&env, seed, &schedule, &eta),
        Command::Gen { env, seed, out } => cmd_gen(&env, seed, out),
    };
    match outcome {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            1
        }
    }
}

fn cmd_run(config_path: PathBuf, out: Option<PathBuf>) -> Result<String, CliError> {
    let config = ExperimentConfig::load(&config_path)?;
    let with_path = |e: HarnessError| CliError::Message(format!("{}: {e}", config_path.display()));
    let result = run_experiment(&config).map_err(with_path)?;
    let out = out.or_else(|| config.out.clone()).ok_or_else(|| {
        CliError::Message(format!("{}: no `out` path given", config_path.display()))
    })?;
    let agg = emit_csv(&result, &out)?;

    let mut text = String::new();
    let _ = writeln!(text, "wrote {} and {}", out.display(), agg.display());
    let _ = writeln!(
        text,
        "runs: {}, diverged: {}",
        result.runs.len(),
        result.diverged_runs()
    );
    for (i, r) in result.runs.iter().enumerate() {
        if let Some(step) = r.diverged_at {
            let _ = writeln!(text, "run {i} diverged at step {step}");
        }
    }
    if let Some(last) = result.aggregate.last() {
        for (k, m) in result.metrics.iter().enumerate() {
            let _ = writeln!(
                text,
                "step {}: mean {m} = {} (se {})",
                last.step, last.mean[k], last.se[k]
            );
        }
    }
    Ok(text)
}

fn fmt_vec(v: &DVector<f64>) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.6e}")).collect();
    format!("[{}]", items.join(", "))
}

fn fmt_matrix(m: &DMatrix<f64>) -> String {
    let mut s = String::new();
    for r in 0..m.nrows() {
        let row: Vec<String> = m.row(r).iter().map(|x| format!("{x:>14.6e}")).collect();
        let _ = writeln!(s, "  {}", row.join(" "));
    }
    s
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn fmt_cert(label: &str, c: &Certificate) -> String {
    format!(
        "{label}: {} (extreme symmetric eigenvalue {:.6e}, norm {:.6e})\n",
        yes_no(c.holds),
        c.extreme_eigenvalue,
        c.norm
    )
}

fn fmt_gtd(prefix: &str, g: &GtdBlockReport) -> String {
    let mut s = format!(
        "{prefix}G(eta = {}) negative definite: {} (max symmetric eigenvalue {:.6e}, spectral abscissa {:.6e})\n",
        g.eta,
        yes_no(g.certified),
        g.max_sym_eig,
        g.spectral_abscissa
    );
    match &g.w_star {
        Some(w) => {
            let _ = writeln!(s, "{prefix}  w* max |entry| = {:.3e}", w.amax());
        }
        None => {
            let _ = writeln!(s, "{prefix}  G is singular; no unique (w*, theta*)");
        }
    }
    s
}

fn matrix_json(m: &DMatrix<f64>) -> Value {
    json!(m
        .row_iter()
        .map(|r| r.iter().copied().collect::<Vec<f64>>())
        .collect::<Vec<_>>())
}

fn vector_json(v: &DVector<f64>) -> Value {
    json!(v.iter().copied().collect::<Vec<f64>>())
}

fn cert_json(c: &Certificate) -> Value {
    json!({ "holds": c.holds, "extreme_eigenvalue": c.extreme_eigenvalue, "norm": c.norm })
}

fn gtd_json(g: &GtdBlockReport) -> Value {
    json!({
        "eta": g.eta,
        "certified": g.certified,
        "max_sym_eig": g.max_sym_eig,
        "spectral_abscissa": g.spectral_abscissa,
        "w_star": g.w_star.as_ref().map(vector_json),
        "theta_star": g.theta_star.as_ref().map(vector_json),
    })
}

fn report_json(env: &Environment, schedule: &LambdaSchedule, r: &FixedPointReport) -> Value {
    let sys = &r.system;
    json!({
        "env": env.name,
        "mode": sys.mode.to_string(),
        "schedule": schedule.to_string(),
        "gamma": env.gamma(),
        "A": matrix_json(&sys.a),
        "b": vector_json(&sys.b),
        "C": matrix_json(&sys.c),
        "theta_star": r.theta_star.as_ref().ok().map(vector_json),
        "theta_star_error": r.theta_star.as_ref().err(),
        "max_sym_eig_A": r.max_sym_eig_a(),
        "min_eig_C": r.min_eig_c(),
        "A_negative_definite": cert_json(&r.a_negative_definite),
        "C_positive_definite": cert_json(&r.c_positive_definite),
        "tdc_negative_definite": r.tdc_negative_definite.as_ref().map(cert_json),
        "gtd": r.gtd.as_ref().map(gtd_json),
        "row_space": r.row_space.as_ref().map(|rs| json!({
            "rank": rs.rank,
            "A_negative_definite": cert_json(&rs.a_negative_definite),
            "C_positive_definite": cert_json(&rs.c_positive_definite),
            "gtd": rs.gtd.as_ref().map(gtd_json),
            "theta_star": rs.theta_star.as_ref().map(vector_json),
        })),
        "rmse_at_zero": r.rmse_at_zero,
        "rmspbe_at_zero": r.rmspbe_at_zero.as_ref().ok(),
    })
}

fn cmd_solve(
    env_spec: &str,
    seed: u64,
    schedule: &str,
    mode: &str,
    eta: Option<f64>,
    out: Option<PathBuf>,
) -> Result<String, CliError> {
    let env = Environment::resolve(env_spec, seed)?;
    let schedule: LambdaSchedule = schedule.parse()?;
    let mode: Mode = mode.parse()?;
    let r = fixed_point_report(&env, &schedule, mode, eta)?;
    let sys = &r.system;

    let mut s = String::new();
    let _ = writeln!(s, "env: {}", env.name);
    let _ = writeln!(s, "mode: {mode}");
    let _ = writeln!(s, "schedule: {schedule}");
    let _ = writeln!(s, "gamma: {}", env.gamma());
    let _ = write!(s, "A:\n{}", fmt_matrix(&sys.a));
    let _ = writeln!(s, "b: {}", fmt_vec(&sys.b));
    let _ = write!(s, "C:\n{}", fmt_matrix(&sys.c));
    match &r.theta_star {
        Ok(t) => {
            let _ = writeln!(s, "theta*: {}", fmt_vec(t));
        }
        Err(e) => {
            let _ = writeln!(s, "theta*: unavailable ({e})");
        }
    }
    let _ = writeln!(s, "max_sym_eig_A: {:.6e}", r.max_sym_eig_a());
    let _ = writeln!(s, "min_eig_C: {:.6e}", r.min_eig_c());
    s += &fmt_cert("A negative definite", &r.a_negative_definite);
    s += &fmt_cert("C positive definite", &r.c_positive_definite);
    if let Some(c) = &r.tdc_negative_definite {
        s += &fmt_cert("-A^T C^-1 A negative definite", c);
    }
    if let Some(g) = &r.gtd {
        s += &fmt_gtd("", g);
    }
    if let Some(rs) = &r.row_space {
        let _ = writeln!(s, "row space of features (rank {}):", rs.rank);
        s += &fmt_cert("  A negative definite", &rs.a_negative_definite);
        s += &fmt_cert("  C positive definite", &rs.c_positive_definite);
        if let Some(g) = &rs.gtd {
            s += &fmt_gtd("  ", g);
        }
        if let Some(t) = &rs.theta_star {
            let _ = writeln!(s, "  minimum-norm theta*: {}", fmt_vec(t));
        }
    }
    let _ = writeln!(s, "rmse(theta = 0): {:.6e}", r.rmse_at_zero);
    match &r.rmspbe_at_zero {
        Ok(v) => {
            let _ = writeln!(s, "rmspbe(theta = 0): {v:.6e}");
        }
        Err(e) => {
            let _ = writeln!(s, "rmspbe(theta = 0): unavailable ({e})");
        }
    }
    if let Some(path) = out {
        let text = serde_json::to_string_pretty(&report_json(&env, &schedule, &r))
            .expect("finite JSON values");
        std::fs::write(&path, text).map_err(|source| HarnessError::Io {
            path: path.clone(),
            source,
        })?;
        let _ = writeln!(s, "wrote {}", path.display());
    }
    Ok(s)
}

fn cmd_check(env_spec: &str, seed: u64, schedule: &str, etas: &[f64]) -> Result<String, CliError> {
    let env = Environment::resolve(env_spec, seed)?;
    let schedule: LambdaSchedule = schedule.parse()?;
    let mdp = &env.mdp;
    let mut s = String::new();
    let mut failures = Vec::new();
    let _ = writeln!(
        s,
        "environment {}: {} states, {} actions, {} features, gamma {}",
        env.name,
        mdp.n_states(),
        mdp.n_actions(),
        env.dim(),
        env.gamma()
    );

    let row_err = mdp
        .transitions()
        .iter()
        .flat_map(|p| {
            p.row_iter()
                .map(|r| (r.sum() - 1.0).abs())
                .collect::<Vec<_>>()
        })
        .fold(0.0_f64, f64::max);
    let _ = writeln!(s, "transition rows stochastic: max deviation {row_err:.3e}");
    if row_err > 1e-12 {
        failures.push("transition rows");
    }

    let chain = induced_chain(mdp, &env.behavior)?;
    let d = chain.stationary();
    let residual = (chain.transition().transpose() * d - d).amax();
    let _ = writeln!(s, "behavior chain stationary residual: {residual:.3e}");
    if residual > 1e-10 {
        failures.push("stationary distribution");
    }

    let mut policies = vec![("behavior", &env.behavior)];
    if let Some(t) = &env.target {
        policies.push(("target", t));
    }
    for (name, policy) in &policies {
        let kernel = PolicyKernel::new(mdp, policy)?;
        let v = kernel.true_values(env.gamma());
        let bellman =
            (kernel.expected_reward() + kernel.continuation() * &v * env.gamma() - &v).amax();
        let _ = writeln!(s, "{name} values Bellman residual: {bellman:.3e}");
        if bellman > 1e-10 {
            failures.push("Bellman identity");
        }
    }

    let _ = writeln!(
        s,
        "feature rank: {} of {} columns{}",
        env.features.rank(),
        env.dim(),
        if env.features.has_full_column_rank() {
            ""
        } else {
            " (rank deficient: C is singular)"
        }
    );

    let w = schedule.weight_matrix(20);
    let row_sum_err = (1..=w.n_rows())
        .map(|m| (w.row(m).iter().sum::<f64>() - 1.0).abs())
        .fold(0.0_f64, f64::max);
    let _ = writeln!(
        s,
        "schedule {schedule}: weight-matrix row-sum deviation {row_sum_err:.3e}"
    );
    if row_sum_err > 1e-12 {
        failures.push("weight matrix");
    }

    let mut modes = vec![(Mode::OnPolicy, "on-policy TD (behavior)")];
    if env.target.is_some() {
        modes.push((Mode::OffPolicy, "off-policy TD (target)"));
    }
    for (mode, label) in modes {
        let r = fixed_point_report(&env, &schedule, mode, None)?;
        let _ = writeln!(s, "[{label}]");
        s += &fmt_cert("  A negative definite", &r.a_negative_definite);
        s += &fmt_cert("  C positive definite", &r.c_positive_definite);
        match &r.tdc_negative_definite {
            Some(c) => s += &fmt_cert("  -A^T C^-1 A negative definite", c),
            None => s += "  -A^T C^-1 A: unavailable (C singular)\n",
        }
        let sys = compute_abc(&env, &schedule, mode)?;
        for &eta in etas {
            s += &fmt_gtd("  ", &gtd_block_matrix(&sys.a, &sys.c, &sys.b, eta)?);
        }
        if let Some(rs) = &r.row_space {
            let _ = writeln!(
                s,
                "  restricted to the feature row space (rank {}):",
                rs.rank
            );
            s += &fmt_cert("    A negative definite", &rs.a_negative_definite);
            s += &fmt_cert("    C positive definite", &rs.c_positive_definite);
            let u = crate::analysis::row_space_basis(&sys.phi);
            let (ar, br, cr) = (
                u.transpose() * &sys.a * &u,
                u.transpose() * &sys.b,
                u.transpose() * &sys.c * &u,
            );
            for &eta in etas {
                s += &fmt_gtd("    ", &gtd_block_matrix(&ar, &cr, &br, eta)?);
            }
        }
    }
    if failures.is_empty() {
        s += "invariants: ok\n";
        Ok(s)
    } else {
        print!("{s}");
        Err(CliError::Message(format!(
            "invariant checks failed: {}",
            failures.join(", ")
        )))
    }
}

fn cmd_gen(name: &str, seed: u64, out: PathBuf) -> Result<String, CliError> {
    let env = Environment::by_name(name, seed)?;
    env.save(&out)?;
    Ok(format!("wrote {} to {}\n", env.name, out.display()))
}
