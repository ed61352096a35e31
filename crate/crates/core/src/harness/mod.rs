//! Multi-run experiments, metric aggregation and CSV emission.
//!
//! ```toml
//! env = "random_chain"            # benchmark name or environment file
//! env_seed = 0                    # generator seed (random_walk_100)
//! learner = "tdc_schedule"
//! schedule = "equal_weights(2,4)"
//! alpha = "const(0.005)"
//! beta = "const(0.05)"            # or eta = 10.0
//! steps = 20000
//! runs = 10
//! seed = 0
//! eval_every = 50
//! metrics = ["rmse", "rmspbe", "theta_norm"]
//! out = "results/chain.csv"
//! ```

pub mod cli;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{compute_abc, rmse, AnalysisError, Mode, PbeEvaluator};
use crate::learners::{run, LearnerError, LearnerKind, RunOptions, RunResult, StepSize, StepSizes};
use crate::mdp::{Environment, MdpError};
use crate::schedule::{LambdaSchedule, ScheduleError};

/// Caps the number of runs executed in parallel; 0 runs them serially.
pub const THREADS_ENV: &str = "TDSCHEDULE_THREADS";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{0}")]
    Threads(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Rmse,
    Rmspbe,
    ThetaNorm,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Rmse => "rmse",
            Metric::Rmspbe => "rmspbe",
            Metric::ThetaNorm => "theta_norm",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A step size written either as text such as `harmonic(1,100)` or a bare number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepSizeSpec {
    Number(f64),
    Text(String),
}

impl StepSizeSpec {
    fn parse(&self) -> Result<StepSize, LearnerError> {
        match self {
            StepSizeSpec::Number(a) => {
                let size = StepSize::Const(*a);
                size.validate()?;
                Ok(size)
            }
            StepSizeSpec::Text(s) => s.parse(),
        }
    }
}

fn default_eval_every() -> u64 {
    50
}

fn default_runs() -> usize {
    1
}

fn default_metrics() -> Vec<Metric> {
    vec![Metric::Rmse]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: String,
    #[serde(default)]
    pub env_seed: u64,
    pub learner: String,
    pub schedule: String,
    pub alpha: StepSizeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<StepSizeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    pub steps: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_eval_every")]
    pub eval_every: u64,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Reads a config file. A relative `env` path that does not exist from
    /// the working directory is looked up next to the config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::from_toml(&text).map_err(|e| HarnessError::Config {
            path: path.to_path_buf(),
            message: e.message().to_string(),
        })?;
        if let Some(dir) = path.parent() {
            let env_path = Path::new(&config.env);
            if Environment::by_name(&config.env, 0).is_err()
                && !env_path.exists()
                && dir.join(env_path).exists()
            {
                config.env = dir.join(env_path).to_string_lossy().into_owned();
            }
        }
        Ok(config)
    }

    pub fn learner_kind(&self) -> Result<LearnerKind, LearnerError> {
        self.learner.parse()
    }

    pub fn lambda_schedule(&self) -> Result<LambdaSchedule, ScheduleError> {
        self.schedule.parse()
    }

    pub fn stepsizes(&self) -> Result<StepSizes, LearnerError> {
        let mut sizes = StepSizes::new(self.alpha.parse()?);
        match (&self.beta, self.eta) {
            (Some(_), Some(_)) => {
                return Err(LearnerError::InvalidStepSize(
                    "give either beta or eta, not both".into(),
                ));
            }
            (Some(beta), None) => sizes = sizes.with_beta(beta.parse()?),
            (None, Some(eta)) => sizes = sizes.with_eta(eta),
            (None, None) => {}
        }
        Ok(sizes)
    }

    pub fn environment(&self) -> Result<Environment, HarnessError> {
        let env = Environment::resolve(&self.env, self.env_seed)?;
        Ok(match &self.theta0 {
            Some(theta) => env.with_theta0(DVector::from_column_slice(theta))?,
            None => env,
        })
    }

    fn validate(&self) -> Result<(), HarnessError> {
        if self.runs == 0 {
            return Err(HarnessError::Invalid("runs must be positive".into()));
        }
        if self.eval_every == 0 {
            return Err(HarnessError::Invalid("eval_every must be positive".into()));
        }
        if self.metrics.is_empty() {
            return Err(HarnessError::Invalid(
                "at least one metric is required".into(),
            ));
        }
        Ok(())
    }
}

/// Mean and standard error of each metric over the runs that reached a
/// step.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub step: u64,
    pub runs: usize,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub metrics: Vec<Metric>,
    pub runs: Vec<RunResult>,
    pub aggregate: Vec<AggregateRow>,
}

impl ExperimentResult {
    pub fn aggregate_at(&self, step: u64) -> Option<&AggregateRow> {
        self.aggregate.iter().find(|r| r.step == step)
    }

    pub fn diverged_runs(&self) -> usize {
        self.runs.iter().filter(|r| r.diverged()).count()
    }
}

/// Metric values of `θ` for one environment and learner.
pub struct Evaluator {
    metrics: Vec<Metric>,
    system: crate::analysis::LinearSystem,
    pbe: Option<PbeEvaluator>,
}

impl Evaluator {
    pub fn new(
        env: &Environment,
        schedule: &LambdaSchedule,
        mode: Mode,
        metrics: &[Metric],
    ) -> Result<Self, HarnessError> {
        let system = compute_abc(env, schedule, mode)?;
        let pbe = if metrics.contains(&Metric::Rmspbe) {
            Some(PbeEvaluator::new(&system.a, &system.b, &system.c)?)
        } else {
            None
        };
        Ok(Self {
            metrics: metrics.to_vec(),
            system,
            pbe,
        })
    }

    pub fn system(&self) -> &crate::analysis::LinearSystem {
        &self.system
    }

    pub fn evaluate(&self, theta: &DVector<f64>) -> Vec<f64> {
        self.metrics
            .iter()
            .map(|m| match m {
                Metric::Rmse => rmse(theta, &self.system.phi, &self.system.values, &self.system.d),
                Metric::Rmspbe => self
                    .pbe
                    .as_ref()
                    .expect("built when requested")
                    .eval(theta)
                    .unwrap_or(f64::NAN),
                Metric::ThetaNorm => theta.norm(),
            })
            .collect()
    }
}

/// Reads [`THREADS_ENV`]: `None` leaves rayon's default.
fn thread_cap() -> Result<Option<usize>, HarnessError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| {
            HarnessError::Threads(format!("{THREADS_ENV}={v} is not a non-negative integer"))
        }),
        Err(_) => Ok(None),
    }
}

/// Runs `config.runs` independent learners with seeds `seed, seed + 1, …`
/// and aggregates their series.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    config.validate()?;
    let kind = config.learner_kind()?;
    let schedule = config.lambda_schedule()?;
    let sizes = config.stepsizes()?;
    let env = config.environment()?;
    crate::learners::check_setup(kind, &env, &sizes)?;
    let mode = if kind.is_off_policy() {
        Mode::OffPolicy
    } else {
        Mode::OnPolicy
    };
    let evaluator = Evaluator::new(&env, &schedule, mode, &config.metrics)?;

    let one = |i: usize| {
        let options = RunOptions::new(
            config.steps,
            config.seed.wrapping_add(i as u64),
            config.eval_every,
        );
        run(kind, &env, &schedule, sizes, &options, |theta| {
            evaluator.evaluate(theta)
        })
    };
    let runs: Vec<RunResult> = match thread_cap()? {
        Some(0) => (0..config.runs).map(one).collect::<Result<_, _>>()?,
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HarnessError::Threads(e.to_string()))?
            .install(|| {
                (0..config.runs)
                    .into_par_iter()
                    .map(one)
                    .collect::<Result<_, _>>()
            })?,
        None => (0..config.runs)
            .into_par_iter()
            .map(one)
            .collect::<Result<_, _>>()?,
    };
    let aggregate = aggregate(&runs, config.metrics.len());
    Ok(ExperimentResult {
        metrics: config.metrics.clone(),
        runs,
        aggregate,
    })
}

/// Per-step mean and standard error (`s/√n`, 0 for a single run). Values
/// are sorted before summing so the result does not depend on run order.
pub fn aggregate(runs: &[RunResult], n_metrics: usize) -> Vec<AggregateRow> {
    let mut by_step: BTreeMap<u64, Vec<&Vec<f64>>> = BTreeMap::new();
    for r in runs {
        for (step, values) in r.steps.iter().zip(&r.metrics) {
            by_step.entry(*step).or_default().push(values);
        }
    }
    by_step
        .into_iter()
        .map(|(step, rows)| {
            let n = rows.len();
            let mut mean = Vec::with_capacity(n_metrics);
            let mut se = Vec::with_capacity(n_metrics);
            for m in 0..n_metrics {
                let mut xs: Vec<f64> = rows.iter().map(|r| r[m]).collect();
                xs.sort_by(f64::total_cmp);
                let mu = xs.iter().sum::<f64>() / n as f64;
                let spread = if n > 1 {
                    let mut sq: Vec<f64> = xs.iter().map(|x| (x - mu) * (x - mu)).collect();
                    sq.sort_by(f64::total_cmp);
                    (sq.iter().sum::<f64>() / (n - 1) as f64 / n as f64).sqrt()
                } else {
                    0.0
                };
                mean.push(mu);
                se.push(spread);
            }
            AggregateRow {
                step,
                runs: n,
                mean,
                se,
            }
        })
        .collect()
}

/// `results/x.csv` → `results/x_aggregate.csv`.
pub fn aggregate_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_aggregate.{}", ext.to_string_lossy()),
        None => format!("{stem}_aggregate"),
    };
    path.with_file_name(name)
}

/// Writes `step,run,<metric>…` rows to `path` and
/// `step,mean_<metric>,se_<metric>…` rows to [`aggregate_path`].
pub fn emit_csv(
    result: &ExperimentResult,
    path: impl AsRef<Path>,
) -> Result<PathBuf, HarnessError> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    let csv_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| HarnessError::Csv { path, source }
    };

    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let mut header = vec!["step".to_string(), "run".to_string()];
    header.extend(result.metrics.iter().map(|m| m.name().to_string()));
    w.write_record(&header).map_err(csv_err(path))?;
    for (i, r) in result.runs.iter().enumerate() {
        for (step, values) in r.steps.iter().zip(&r.metrics) {
            let mut row = vec![step.to_string(), i.to_string()];
            row.extend(values.iter().map(f64::to_string));
            w.write_record(&row).map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;

    let agg_path = aggregate_path(path);
    let mut w = csv::Writer::from_path(&agg_path).map_err(csv_err(&agg_path))?;
    let mut header = vec!["step".to_string()];
    for m in &result.metrics {
        header.push(format!("mean_{m}"));
        header.push(format!("se_{m}"));
    }
    w.write_record(&header).map_err(csv_err(&agg_path))?;
    for row in &result.aggregate {
        let mut fields = vec![row.step.to_string()];
        for (mu, se) in row.mean.iter().zip(&row.se) {
            fields.push(mu.to_string());
            fields.push(se.to_string());
        }
        w.write_record(&fields).map_err(csv_err(&agg_path))?;
    }
    w.flush().map_err(|source| HarnessError::Io {
        path: agg_path.clone(),
        source,
    })?;
    Ok(agg_path)
}
