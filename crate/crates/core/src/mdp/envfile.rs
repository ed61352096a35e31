//! TOML environment files.
//!
//! ```toml
//! name = "two_state"
//! gamma = 0.9
//! absorbing = []                 # optional
//! start = [0.5, 0.5]             # optional, default uniform over live states
//! episode_length = 100           # optional truncation
//! transitions = [[[0.5, 0.5], [0.2, 0.8]]]   # [action][state][next]
//! rewards = [[0.0, 1.0], [0.0, 0.0]]         # r(s, s')
//! behavior = [[1.0], [1.0]]                  # [state][action]
//! target = [[1.0], [1.0]]                    # optional
//! features = "tabular"                       # or an n x d matrix
//! theta0 = [0.0, 0.0]                        # optional
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Environment, FeatureMap, FiniteMdp, MdpError, Policy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureSpec {
    Named(String),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvFile {
    #[serde(default)]
    pub name: String,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub absorbing: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episode_length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<Vec<f64>>,
    pub features: FeatureSpec,
    pub transitions: Vec<Vec<Vec<f64>>>,
    pub rewards: Vec<Vec<f64>>,
    pub behavior: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<Vec<f64>>>,
}

fn to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, MdpError> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(MdpError::Dimension(format!(
            "`{what}` must be a non-empty rectangular matrix"
        )));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl EnvFile {
    pub fn from_toml(text: &str) -> Result<Self, MdpError> {
        toml::from_str(text).map_err(|e| MdpError::Parse {
            path: "<environment>".into(),
            message: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("environment files always serialise")
    }

    pub fn into_environment(self) -> Result<Environment, MdpError> {
        let transitions = self
            .transitions
            .iter()
            .enumerate()
            .map(|(a, m)| to_matrix(m, &format!("transitions[{a}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let rewards = to_matrix(&self.rewards, "rewards")?;
        let mut mdp =
            FiniteMdp::new(transitions, rewards, self.gamma)?.with_absorbing(&self.absorbing)?;
        if let Some(start) = self.start {
            mdp = mdp.with_start(DVector::from_vec(start))?;
        }
        let mdp = mdp.with_episode_length(self.episode_length);
        let behavior = Policy::new(to_matrix(&self.behavior, "behavior")?)?;
        let target = self
            .target
            .map(|t| to_matrix(&t, "target").and_then(Policy::new))
            .transpose()?;
        let features = match self.features {
            FeatureSpec::Named(ref name) if name == "tabular" => FeatureMap::tabular(&mdp),
            FeatureSpec::Named(name) => {
                return Err(MdpError::Dimension(format!(
                    "unknown feature kind `{name}` (expected \"tabular\" or a matrix)"
                )))
            }
            FeatureSpec::Matrix(rows) => FeatureMap::new(to_matrix(&rows, "features")?)?,
        };
        let env = Environment::new(self.name, mdp, behavior, target, features)?;
        match self.theta0 {
            Some(t) => env.with_theta0(DVector::from_vec(t)),
            None => Ok(env),
        }
    }

    pub fn from_environment(env: &Environment) -> Self {
        let mdp = &env.mdp;
        let features = if env.features == FeatureMap::tabular(mdp) {
            FeatureSpec::Named("tabular".into())
        } else {
            FeatureSpec::Matrix(from_matrix(env.features.matrix()))
        };
        let live = mdp.live_states().len() as f64;
        let default_start = DVector::from_iterator(
            mdp.n_states(),
            (0..mdp.n_states()).map(|s| if mdp.is_absorbing(s) { 0.0 } else { 1.0 / live }),
        );
        let start = (default_start != *mdp.start()).then(|| mdp.start().iter().copied().collect());
        Self {
            name: env.name.clone(),
            gamma: mdp.gamma(),
            absorbing: mdp.absorbing_states(),
            start,
            episode_length: mdp.episode_length(),
            theta0: env.theta0.as_ref().map(|t| t.iter().copied().collect()),
            features,
            transitions: mdp.transitions().iter().map(from_matrix).collect(),
            rewards: from_matrix(mdp.rewards()),
            behavior: from_matrix(env.behavior.probs()),
            target: env.target.as_ref().map(|t| from_matrix(t.probs())),
        }
    }
}
