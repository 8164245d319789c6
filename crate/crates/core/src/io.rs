//! JSON schemas for problem files, mixture files, policies, plans, and
//! Monte-Carlo reports. Matrices are row-major nested arrays.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SteeringError};
use crate::gmm::{Gaussian, Gmm};
use crate::policy::{GmmPolicy, SteeringLaw, Synthesis};
use crate::sim::McReport;
use crate::system::{LtvSystem, QuadraticCost};

pub type MatrixJson = Vec<Vec<f64>>;

pub fn matrix_to_json(m: &DMatrix<f64>) -> MatrixJson {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn matrix_from_json(rows: &MatrixJson, what: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(SteeringError::InvalidArgument(format!("{what}: empty matrix")));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(SteeringError::InvalidArgument(format!("{what}: ragged matrix rows")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), ncols, &flat))
}

/// One matrix (interpreted as time-invariant) or a per-step list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSeqJson {
    Single(MatrixJson),
    PerStep(Vec<MatrixJson>),
}

impl MatrixSeqJson {
    fn resolve(&self, len: usize, what: &str) -> Result<Vec<DMatrix<f64>>> {
        match self {
            MatrixSeqJson::Single(m) => Ok(vec![matrix_from_json(m, what)?; len]),
            MatrixSeqJson::PerStep(list) => {
                if list.len() != len {
                    return Err(SteeringError::InvalidArgument(format!(
                        "{what}: expected {len} matrices, got {}",
                        list.len()
                    )));
                }
                list.iter().map(|m| matrix_from_json(m, what)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianJson {
    pub mean: Vec<f64>,
    pub cov: MatrixJson,
}

impl GaussianJson {
    pub fn from_gaussian(g: &Gaussian) -> Self {
        Self {
            mean: g.mean().iter().copied().collect(),
            cov: matrix_to_json(g.cov()),
        }
    }

    pub fn to_gaussian(&self) -> Result<Gaussian> {
        Gaussian::new(
            DVector::from_vec(self.mean.clone()),
            matrix_from_json(&self.cov, "gaussian covariance")?,
        )
    }
}

/// Mixture schema: either parallel weight/component arrays or a flat list
/// of weighted components. Serialization always emits the former.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GmmJson {
    Split {
        weights: Vec<f64>,
        components: Vec<GaussianJson>,
    },
    Flat(Vec<WeightedGaussianJson>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightedGaussianJson {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub cov: MatrixJson,
}

impl GmmJson {
    pub fn from_gmm(g: &Gmm) -> Self {
        GmmJson::Split {
            weights: g.weights().to_vec(),
            components: g.components().iter().map(GaussianJson::from_gaussian).collect(),
        }
    }

    pub fn to_gmm(&self) -> Result<Gmm> {
        match self {
            GmmJson::Split { weights, components } => Gmm::new(
                weights.clone(),
                components.iter().map(|c| c.to_gaussian()).collect::<Result<_>>()?,
            ),
            GmmJson::Flat(list) => Gmm::new(
                list.iter().map(|c| c.weight).collect(),
                list.iter()
                    .map(|c| {
                        Gaussian::new(
                            DVector::from_vec(c.mean.clone()),
                            matrix_from_json(&c.cov, "gaussian covariance")?,
                        )
                    })
                    .collect::<Result<_>>()?,
            ),
        }
    }
}

/// A distribution in a problem file: inline mixture or a sample file to be
/// fitted with EM.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistributionJson {
    Samples {
        samples: String,
        components: usize,
        #[serde(default)]
        seed: u64,
    },
    Gmm(GmmJson),
}

/// Top-level problem file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemJson {
    #[serde(rename = "A")]
    pub a: MatrixSeqJson,
    #[serde(rename = "B")]
    pub b: MatrixSeqJson,
    #[serde(rename = "N")]
    pub horizon: usize,
    #[serde(rename = "Q")]
    pub q: MatrixSeqJson,
    #[serde(rename = "R")]
    pub r: MatrixSeqJson,
    #[serde(default)]
    pub x_ref: Option<Vec<Vec<f64>>>,
    pub initial_gmm: DistributionJson,
    pub desired_gmm: DistributionJson,
}

impl ProblemJson {
    pub fn system(&self) -> Result<LtvSystem> {
        if self.horizon == 0 {
            return Err(SteeringError::InvalidArgument("N must be >= 1".into()));
        }
        LtvSystem::new(self.a.resolve(self.horizon, "A")?, self.b.resolve(self.horizon, "B")?)
    }

    pub fn cost(&self) -> Result<QuadraticCost> {
        let q = self.q.resolve(self.horizon + 1, "Q")?;
        let r = self.r.resolve(self.horizon, "R")?;
        let n = q[0].nrows();
        let x_ref = match &self.x_ref {
            None => vec![DVector::zeros(n); self.horizon + 1],
            Some(list) => {
                if list.len() != self.horizon + 1 {
                    return Err(SteeringError::InvalidArgument(format!(
                        "x_ref: expected {} vectors, got {}",
                        self.horizon + 1,
                        list.len()
                    )));
                }
                list.iter().map(|v| DVector::from_vec(v.clone())).collect()
            }
        };
        QuadraticCost::new(q, r, x_ref)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SteeringLawJson {
    pub u_bar: Vec<f64>,
    pub l: MatrixJson,
}

/// Serialized policy: enough to re-load and simulate without re-solving.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyJson {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "N")]
    pub horizon: usize,
    pub base_weights: Vec<f64>,
    pub base_components: Vec<GaussianJson>,
    pub lambda: MatrixJson,
    /// Row-major r × t grid; `null` marks structural zeros.
    pub laws: Vec<Vec<Option<SteeringLawJson>>>,
}

impl PolicyJson {
    pub fn from_policy(p: &GmmPolicy) -> Self {
        let r = p.source_count();
        let t = p.target_count();
        Self {
            n: p.state_dim(),
            m: p.input_dim(),
            horizon: p.horizon(),
            base_weights: p.base().weights().to_vec(),
            base_components: p
                .base()
                .components()
                .iter()
                .map(GaussianJson::from_gaussian)
                .collect(),
            lambda: matrix_to_json(p.lambda()),
            laws: (0..r)
                .map(|i| {
                    (0..t)
                        .map(|j| {
                            p.law(i, j).map(|law| SteeringLawJson {
                                u_bar: law.u_bar().iter().copied().collect(),
                                l: matrix_to_json(law.l()),
                            })
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn to_policy(&self) -> Result<GmmPolicy> {
        let base = Gmm::new(
            self.base_weights.clone(),
            self.base_components
                .iter()
                .map(|c| c.to_gaussian())
                .collect::<Result<_>>()?,
        )?;
        let lambda = matrix_from_json(&self.lambda, "lambda")?;
        let laws = self
            .laws
            .iter()
            .map(|row| {
                row.iter()
                    .map(|cell| {
                        cell.as_ref()
                            .map(|law| {
                                Ok(SteeringLaw::new(
                                    DVector::from_vec(law.u_bar.clone()),
                                    matrix_from_json(&law.l, "law gain")?,
                                ))
                            })
                            .transpose()
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        GmmPolicy::new(base, lambda, laws, self.n, self.m, self.horizon)
    }
}

/// Transport plan and cost matrix dump written by `solve`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanJson {
    pub cost_matrix: MatrixJson,
    pub tilde_lambda: MatrixJson,
    pub objective: f64,
}

impl PlanJson {
    pub fn from_synthesis(s: &Synthesis) -> Self {
        Self {
            cost_matrix: matrix_to_json(&s.cost_matrix),
            tilde_lambda: matrix_to_json(&s.plan.tilde_lambda),
            objective: s.plan.objective,
        }
    }
}

/// Monte-Carlo report as written to disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McReportJson {
    pub sample_count: usize,
    pub pair_frequencies: MatrixJson,
    pub empirical_mean_cost: f64,
    pub pair_terminal_means: Vec<Vec<Option<Vec<f64>>>>,
    pub pair_terminal_covs: Vec<Vec<Option<MatrixJson>>>,
}

impl McReportJson {
    pub fn from_report(r: &McReport) -> Self {
        Self {
            sample_count: r.sample_count,
            pair_frequencies: matrix_to_json(&r.pair_frequencies),
            empirical_mean_cost: r.empirical_mean_cost,
            pair_terminal_means: r
                .pair_terminal_means
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|m| m.as_ref().map(|v| v.iter().copied().collect()))
                        .collect()
                })
                .collect(),
            pair_terminal_covs: r
                .pair_terminal_covs
                .iter()
                .map(|row| row.iter().map(|c| c.as_ref().map(matrix_to_json)).collect())
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gmm_accepts_both_schemas() {
        let split = r#"{"weights": [1.0], "components": [{"mean": [0.0], "cov": [[1.0]]}]}"#;
        let flat = r#"[{"weight": 1.0, "mean": [0.0], "cov": [[1.0]]}]"#;
        let a: GmmJson = serde_json::from_str(split).unwrap();
        let b: GmmJson = serde_json::from_str(flat).unwrap();
        let ga = a.to_gmm().unwrap();
        let gb = b.to_gmm().unwrap();
        assert_eq!(ga.weights(), gb.weights());
        assert_eq!(ga.component(0).mean(), gb.component(0).mean());
    }

    #[test]
    fn problem_time_invariant_shorthand() {
        let text = r#"{
            "A": [[1.0, 0.0], [0.0, 1.0]],
            "B": [[1.0, 0.0], [0.0, 1.0]],
            "N": 3,
            "Q": [[0.0, 0.0], [0.0, 0.0]],
            "R": [[1.0, 0.0], [0.0, 1.0]],
            "initial_gmm": [{"weight": 1.0, "mean": [0.0, 0.0], "cov": [[0.1, 0.0], [0.0, 0.1]]}],
            "desired_gmm": [{"weight": 1.0, "mean": [1.0, 1.0], "cov": [[0.1, 0.0], [0.0, 0.1]]}]
        }"#;
        let p: ProblemJson = serde_json::from_str(text).unwrap();
        let sys = p.system().unwrap();
        assert_eq!(sys.horizon(), 3);
        let cost = p.cost().unwrap();
        assert_eq!(cost.horizon(), 3);
    }

    #[test]
    fn matrix_rejects_ragged() {
        let rows = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(matrix_from_json(&rows, "test").is_err());
    }

    #[test]
    fn policy_roundtrip_preserves_numbers() {
        use crate::policy::synthesize;
        let sys = LtvSystem::time_invariant(DMatrix::identity(2, 2), DMatrix::identity(2, 2), 2)
            .unwrap();
        let cost = QuadraticCost::time_invariant(DMatrix::zeros(2, 2), DMatrix::identity(2, 2), 2)
            .unwrap();
        let g = Gaussian::new(DVector::zeros(2), DMatrix::identity(2, 2) * 0.1).unwrap();
        let gd = Gaussian::new(
            DVector::from_row_slice(&[1.0, -1.0]),
            DMatrix::identity(2, 2) * 0.2,
        )
        .unwrap();
        let syn = synthesize(&sys, &cost, &Gmm::single(g), &Gmm::single(gd)).unwrap();
        let json = serde_json::to_string(&PolicyJson::from_policy(&syn.policy)).unwrap();
        let back: PolicyJson = serde_json::from_str(&json).unwrap();
        let policy = back.to_policy().unwrap();
        assert_eq!(policy.lambda(), syn.policy.lambda());
        assert_eq!(
            policy.law(0, 0).unwrap().u_bar(),
            syn.policy.law(0, 0).unwrap().u_bar()
        );
    }
}
