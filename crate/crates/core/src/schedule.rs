//! λ-schedules and the weight matrices they induce on n-step returns.
//!
//! A schedule is a finite sequence `λ_1, ..., λ_L` with every `λ_j ∈ [0, 1]`
//! and `λ_j = 0` for `j > L`. Row `m` of the weight matrix distributes the
//! weight of an `m`-step episode among bootstrapping after `1..m-1` steps
//! and the flat return:
//!
//! ```text
//! Λ[m][k] = λ_1 ⋯ λ_{k-1} (1 - λ_k)   for k < m
//! Λ[m][m] = λ_1 ⋯ λ_{m-1}
//! ```
//!
//! Schedules built from rationals (`equal_weights`, parsed fractions or
//! decimals) keep an exact copy of their values so the weight matrix can be
//! expanded in exact arithmetic.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("λ-schedule must contain at least one value")]
    Empty,
    #[error("λ_{index} = {value} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("truncation {truncation} does not match the {len} supplied values")]
    TruncationMismatch { truncation: usize, len: usize },
    #[error("equal_weights requires 1 <= n1 <= n2, got ({n1}, {n2})")]
    InvalidEqualWeights { n1: usize, n2: usize },
    #[error("cannot parse schedule `{0}`")]
    Parse(String),
}

/// A truncated λ-schedule `λ_1..λ_L`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSchedule {
    values: Vec<f64>,
    exact: Option<Vec<BigRational>>,
}

impl LambdaSchedule {
    /// Validates a floating-point schedule. `truncation` must equal the
    /// number of values.
    pub fn new(values: Vec<f64>, truncation: usize) -> Result<Self, ScheduleError> {
        if values.is_empty() {
            return Err(ScheduleError::Empty);
        }
        if truncation != values.len() {
            return Err(ScheduleError::TruncationMismatch {
                truncation,
                len: values.len(),
            });
        }
        for (i, &v) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(ScheduleError::OutOfRange {
                    index: i + 1,
                    value: v,
                });
            }
        }
        Ok(Self {
            values,
            exact: None,
        })
    }

    /// Builds a schedule from exact rationals; the floating-point values are
    /// the nearest doubles.
    pub fn from_rationals(values: Vec<BigRational>) -> Result<Self, ScheduleError> {
        if values.is_empty() {
            return Err(ScheduleError::Empty);
        }
        let zero = BigRational::zero();
        let one = BigRational::one();
        let mut floats = Vec::with_capacity(values.len());
        for (i, v) in values.iter().enumerate() {
            let f = v.to_f64().unwrap_or(f64::NAN);
            if *v < zero || *v > one {
                return Err(ScheduleError::OutOfRange {
                    index: i + 1,
                    value: f,
                });
            }
            floats.push(f);
        }
        Ok(Self {
            values: floats,
            exact: Some(values),
        })
    }

    /// `EqualWeights(n1, n2)`: equal weight `1/(n2-n1+1)` on every n-step
    /// return with `n1 <= n <= n2` once the episode is at least `n2` long.
    pub fn equal_weights(n1: usize, n2: usize) -> Result<Self, ScheduleError> {
        if n1 < 1 || n2 < n1 {
            return Err(ScheduleError::InvalidEqualWeights { n1, n2 });
        }
        let values = (1..=n2)
            .map(|i| {
                if i < n1 {
                    BigRational::one()
                } else {
                    let denom = BigInt::from(n2 - i + 1);
                    BigRational::one() - BigRational::new(BigInt::one(), denom)
                }
            })
            .collect();
        Self::from_rationals(values)
    }

    /// Constant schedule `λ_j = λ` for `j <= truncation` (truncated TD(λ)).
    pub fn constant(lambda: f64, truncation: usize) -> Result<Self, ScheduleError> {
        Self::new(vec![lambda; truncation], truncation)
    }

    /// All-zero schedule of the given truncation: plain TD(0).
    pub fn zeros(truncation: usize) -> Self {
        Self::from_rationals(vec![BigRational::zero(); truncation.max(1)])
            .expect("zero schedule is valid")
    }

    /// Number of stored past states `L`.
    pub fn truncation(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn exact_values(&self) -> Option<&[BigRational]> {
        self.exact.as_deref()
    }

    /// `λ_j` for 1-based `j`; zero past `L`.
    pub fn lambda(&self, j: usize) -> f64 {
        if j == 0 {
            panic!("λ-schedule indices start at 1");
        }
        self.values.get(j - 1).copied().unwrap_or(0.0)
    }

    /// Values with trailing zeros removed.
    pub fn effective_values(&self) -> &[f64] {
        let end = self
            .values
            .iter()
            .rposition(|&v| v != 0.0)
            .map_or(0, |p| p + 1);
        &self.values[..end]
    }

    /// True when both schedules put the same weights on every n-step return,
    /// regardless of how many trailing zeros they store.
    pub fn same_weights(&self, other: &Self) -> bool {
        match (self.exact_values(), other.exact_values()) {
            (Some(a), Some(b)) => {
                let trim = |v: &[BigRational]| {
                    let end = v.iter().rposition(|x| !x.is_zero()).map_or(0, |p| p + 1);
                    v[..end].to_vec()
                };
                trim(a) == trim(b)
            }
            _ => self.effective_values() == other.effective_values(),
        }
    }

    /// `∏_{j=1}^{k} γ λ_j`, with the empty product equal to 1.
    pub fn prefix_product(&self, k: usize, gamma: f64) -> f64 {
        (1..=k).fold(1.0, |acc, j| acc * (gamma * self.lambda(j)))
    }

    /// Trace coefficients `c_k = ∏_{j=1}^{k} γλ_j` for `k = 0..=L`.
    pub fn trace_coefficients(&self, gamma: f64) -> Vec<f64> {
        let mut coeffs = Vec::with_capacity(self.truncation() + 1);
        let mut c = 1.0;
        coeffs.push(c);
        for &l in &self.values {
            c *= gamma * l;
            coeffs.push(c);
        }
        coeffs
    }

    /// Products `∏_{j=1}^{k} λ_j` for `k = 0..=L` (no discount).
    pub fn lambda_products(&self) -> Vec<f64> {
        self.trace_coefficients(1.0)
    }

    /// Floating-point weight matrix with `rows` rows.
    pub fn weight_matrix(&self, rows: usize) -> WeightMatrix {
        if let Some(exact) = self.exact_weight_matrix(rows) {
            return exact.to_f64();
        }
        let rows = (1..=rows)
            .map(|m| {
                let mut row = Vec::with_capacity(m);
                let mut prefix = 1.0;
                for k in 1..m {
                    let l = self.lambda(k);
                    row.push(prefix * (1.0 - l));
                    prefix *= l;
                }
                row.push(prefix);
                row
            })
            .collect();
        WeightMatrix { rows }
    }

    /// Exact weight matrix, available when the schedule was built from
    /// rationals.
    pub fn exact_weight_matrix(&self, rows: usize) -> Option<ExactWeightMatrix> {
        let exact = self.exact.as_ref()?;
        let lambda = |j: usize| exact.get(j - 1).cloned().unwrap_or_else(BigRational::zero);
        let rows = (1..=rows)
            .map(|m| {
                let mut row = Vec::with_capacity(m);
                let mut prefix = BigRational::one();
                for k in 1..m {
                    let l = lambda(k);
                    row.push(&prefix * (BigRational::one() - &l));
                    prefix *= l;
                }
                row.push(prefix);
                row
            })
            .collect();
        Some(ExactWeightMatrix { rows })
    }
}

/// Free-function form of [`LambdaSchedule::new`].
pub fn make_schedule(values: Vec<f64>, truncation: usize) -> Result<LambdaSchedule, ScheduleError> {
    LambdaSchedule::new(values, truncation)
}

pub fn equal_weights(n1: usize, n2: usize) -> Result<LambdaSchedule, ScheduleError> {
    LambdaSchedule::equal_weights(n1, n2)
}

pub fn weight_matrix(schedule: &LambdaSchedule, rows: usize) -> WeightMatrix {
    schedule.weight_matrix(rows)
}

pub fn schedule_prefix_product(schedule: &LambdaSchedule, k: usize, gamma: f64) -> f64 {
    schedule.prefix_product(k, gamma)
}

/// Lower-triangular row-stochastic matrix Λ; row `m` (1-based) has `m`
/// entries.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    rows: Vec<Vec<f64>>,
}

impl WeightMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Row `m`, 1-based, without the zero padding above the diagonal.
    pub fn row(&self, m: usize) -> &[f64] {
        &self.rows[m - 1]
    }

    /// `Λ[m][k]`, 1-based; zero above the diagonal.
    pub fn get(&self, m: usize, k: usize) -> f64 {
        self.rows[m - 1].get(k - 1).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactWeightMatrix {
    rows: Vec<Vec<BigRational>>,
}

impl ExactWeightMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, m: usize) -> &[BigRational] {
        &self.rows[m - 1]
    }

    pub fn get(&self, m: usize, k: usize) -> BigRational {
        self.rows[m - 1]
            .get(k - 1)
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    pub fn to_f64(&self) -> WeightMatrix {
        WeightMatrix {
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect())
                .collect(),
        }
    }
}

fn format_rational(x: &BigRational) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

impl fmt::Display for LambdaSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = match &self.exact {
            Some(exact) => exact.iter().map(format_rational).collect(),
            None => self.values.iter().map(|v| format!("{v}")).collect(),
        };
        write!(f, "[{}]", items.join(", "))
    }
}

/// Parses `"0.25"`, `"2/3"`, `"1"` or `"1e-3"` into an exact rational.
fn parse_rational(token: &str) -> Option<BigRational> {
    let token = token.trim();
    if let Some((num, den)) = token.split_once('/') {
        let num: BigInt = num.trim().parse().ok()?;
        let den: BigInt = den.trim().parse().ok()?;
        if den.is_zero() {
            return None;
        }
        return Some(BigRational::new(num, den));
    }
    if token.contains(['e', 'E']) {
        let v: f64 = token.parse().ok()?;
        return BigRational::from_float(v);
    }
    let (negative, digits) = match token.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, token.strip_prefix('+').unwrap_or(token)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let all: BigInt = format!("{int_part}{frac_part}").parse().ok()?;
    let scale = num_traits::pow(BigInt::from(10), frac_part.len());
    let value = BigRational::new(all, scale);
    Some(if negative { -value } else { value })
}

fn parse_call<'a>(s: &'a str, name: &str) -> Option<Vec<&'a str>> {
    let rest = s.strip_prefix(name)?.trim_start();
    let inner = rest.strip_prefix('(')?.strip_suffix(')')?;
    Some(inner.split(',').map(str::trim).collect())
}

impl FromStr for LambdaSchedule {
    type Err = ScheduleError;

    /// Accepts `[1, 1, 2/3, 0.5]`, `equal_weights(3,5)`, `constant(0.9, 10)`
    /// and `zeros(L)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let err = || ScheduleError::Parse(s.to_string());
        if let Some(args) = parse_call(s, "equal_weights") {
            let [a, b] = args.as_slice() else {
                return Err(err());
            };
            let n1 = a.parse().map_err(|_| err())?;
            let n2 = b.parse().map_err(|_| err())?;
            return Self::equal_weights(n1, n2);
        }
        if let Some(args) = parse_call(s, "constant") {
            let [l, n] = args.as_slice() else {
                return Err(err());
            };
            let lambda = parse_rational(l).ok_or_else(err)?;
            let n: usize = n.parse().map_err(|_| err())?;
            if n == 0 {
                return Err(ScheduleError::Empty);
            }
            return Self::from_rationals(vec![lambda; n]);
        }
        if let Some(args) = parse_call(s, "zeros") {
            let [n] = args.as_slice() else {
                return Err(err());
            };
            let n: usize = n.parse().map_err(|_| err())?;
            if n == 0 {
                return Err(ScheduleError::Empty);
            }
            return Ok(Self::zeros(n));
        }
        let inner = s
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(err)?;
        if inner.trim().is_empty() {
            return Err(ScheduleError::Empty);
        }
        let values = inner
            .split(',')
            .map(|t| parse_rational(t).ok_or_else(err))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_rationals(values)
    }
}
