//! Randomized GMM steering policy: synthesis from the pairwise steering
//! costs and the transportation LP, γ-weight evaluation, control sampling,
//! and the terminal-mixture prediction.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SteeringError};
use crate::gmm::{Gaussian, Gmm};
use crate::steering;
use crate::system::{null_basis, LiftedMatrices, LtvSystem, QuadraticCost};
use crate::transport::{self, TransportPlan};

/// Mixing weights below this are treated as structural zeros: no steering
/// law is materialized for the pair.
const STRUCTURAL_ZERO: f64 = 1e-12;

/// One (i, j) pair's feedforward stack Ū and feedback stack L.
#[derive(Debug, Clone)]
pub struct SteeringLaw {
    u_bar: DVector<f64>,
    l: DMatrix<f64>,
}

impl SteeringLaw {
    pub fn new(u_bar: DVector<f64>, l: DMatrix<f64>) -> Self {
        Self { u_bar, l }
    }

    pub fn u_bar(&self) -> &DVector<f64> {
        &self.u_bar
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Control stack for a realized initial state: U = L (x₀ − μ̄) + Ū.
    pub fn control(&self, x0: &DVector<f64>, base_mean: &DVector<f64>) -> DVector<f64> {
        &self.l * (x0 - base_mean) + &self.u_bar
    }
}

/// The full randomized policy: base mixture parameters, mixing weights λ,
/// and the r × t grid of steering laws (absent at structural zeros).
#[derive(Debug, Clone)]
pub struct GmmPolicy {
    base: Gmm,
    lambda: DMatrix<f64>,
    laws: Vec<Vec<Option<SteeringLaw>>>,
    n: usize,
    m: usize,
    horizon: usize,
}

impl GmmPolicy {
    pub fn new(
        base: Gmm,
        lambda: DMatrix<f64>,
        laws: Vec<Vec<Option<SteeringLaw>>>,
        n: usize,
        m: usize,
        horizon: usize,
    ) -> Result<Self> {
        let r = base.len();
        let t = lambda.ncols();
        if lambda.nrows() != r || laws.len() != r || laws.iter().any(|row| row.len() != t) {
            return Err(SteeringError::InvalidArgument(
                "lambda and law grid must be r x t".into(),
            ));
        }
        for i in 0..r {
            let s: f64 = lambda.row(i).iter().sum();
            if (s - 1.0).abs() > 1e-9 || lambda.row(i).iter().any(|&v| v < 0.0) {
                return Err(SteeringError::InvalidArgument(format!(
                    "lambda row {i} is not on the simplex (sum {s})"
                )));
            }
        }
        Ok(Self { base, lambda, laws, n, m, horizon })
    }

    pub fn base(&self) -> &Gmm {
        &self.base
    }

    pub fn lambda(&self) -> &DMatrix<f64> {
        &self.lambda
    }

    pub fn law(&self, i: usize, j: usize) -> Option<&SteeringLaw> {
        self.laws[i][j].as_ref()
    }

    pub fn source_count(&self) -> usize {
        self.base.len()
    }

    pub fn target_count(&self) -> usize {
        self.lambda.ncols()
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Pair-selection probabilities γ_{i,j}(x₀): component responsibility
    /// times the mixing weight. Entries sum to 1.
    pub fn gamma(&self, x0: &DVector<f64>) -> DMatrix<f64> {
        let log_resp = self.base.log_responsibilities(x0);
        let r = self.source_count();
        let t = self.target_count();
        DMatrix::from_fn(r, t, |i, j| log_resp[i].exp() * self.lambda[(i, j)])
    }

    /// Draw a pair (i, j) ~ γ(x₀) and return its control stack.
    pub fn sample_control(&self, x0: &DVector<f64>, seed: u64) -> ((usize, usize), DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_control_with(x0, &mut rng)
    }

    /// As [`sample_control`](Self::sample_control) but drawing from a
    /// caller-owned stream.
    pub fn sample_control_with<R: Rng>(
        &self,
        x0: &DVector<f64>,
        rng: &mut R,
    ) -> ((usize, usize), DVector<f64>) {
        let gamma = self.gamma(x0);
        let (r, t) = gamma.shape();
        // Inverse-CDF over the flattened matrix in fixed row-major order.
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = (r - 1, t - 1);
        'outer: for i in 0..r {
            for j in 0..t {
                acc += gamma[(i, j)];
                if u < acc {
                    pick = (i, j);
                    break 'outer;
                }
            }
        }
        // Fall back to the last materialized law if rounding selected a
        // structural zero.
        if self.laws[pick.0][pick.1].is_none() {
            'fix: for i in (0..r).rev() {
                for j in (0..t).rev() {
                    if self.laws[i][j].is_some() && gamma[(i, j)] > 0.0 {
                        pick = (i, j);
                        break 'fix;
                    }
                }
            }
        }
        let law = self.laws[pick.0][pick.1].as_ref().expect("policy has at least one law");
        let u_stack = law.control(x0, self.base.component(pick.0).mean());
        (pick, u_stack)
    }

    /// Predicted terminal mixture under this policy (push-forward of each
    /// initial component through its steering laws).
    ///
    /// Requires all pairs (i, j) with λ_{i,j} above `STRUCTURAL_ZERO` to push
    /// component i onto the same terminal Gaussian for each j.
    pub fn predict_terminal(&self, initial: &Gmm, lift: &LiftedMatrices) -> Result<Gmm> {
        let r = self.source_count();
        let t = self.target_count();
        if initial.len() != r || initial.dim() != self.n {
            return Err(SteeringError::InvalidArgument(
                "initial mixture does not match the policy's base components".into(),
            ));
        }
        let p = initial.weights();
        let mut weights = Vec::with_capacity(t);
        let mut components: Vec<Gaussian> = Vec::with_capacity(t);
        for j in 0..t {
            let q_j: f64 = (0..r).map(|i| p[i] * self.lambda[(i, j)]).sum();
            let mut mean_j: Option<DVector<f64>> = None;
            let mut cov_j: Option<DMatrix<f64>> = None;
            for i in 0..r {
                if self.lambda[(i, j)] <= STRUCTURAL_ZERO {
                    continue;
                }
                let law = self.laws[i][j].as_ref().ok_or_else(|| {
                    SteeringError::Infeasible(format!(
                        "pair ({i},{j}) has positive weight but no steering law"
                    ))
                })?;
                let comp = initial.component(i);
                let h_ij = &lift.phi_n0 + &lift.b_n * law.l();
                let mean = &lift.phi_n0 * comp.mean() + &lift.b_n * law.u_bar();
                let cov = &h_ij * comp.cov() * h_ij.transpose();
                if let (Some(m0), Some(c0)) = (&mean_j, &cov_j) {
                    let mean_ok = (&mean - m0).amax() <= 1e-6;
                    let cov_ok = (&cov - c0).norm() <= 1e-6 * (1.0 + c0.norm());
                    if !mean_ok || !cov_ok {
                        return Err(SteeringError::Infeasible(format!(
                            "policy does not define a {t}-component terminal mixture: \
                             component {i} maps to a different Gaussian for target {j}"
                        )));
                    }
                } else {
                    mean_j = Some(mean);
                    cov_j = Some(cov);
                }
            }
            match (mean_j, cov_j) {
                (Some(mean), Some(cov)) => {
                    weights.push(q_j);
                    components.push(Gaussian::new(mean, crate::linalg::symmetrize(&cov))?);
                }
                _ => {
                    return Err(SteeringError::Infeasible(format!(
                        "terminal component {j} receives no probability mass"
                    )))
                }
            }
        }
        // Normalize away accumulated rounding in the weights.
        let s: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= s;
        }
        Gmm::new(weights, components)
    }
}

/// Everything produced by policy synthesis.
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub policy: GmmPolicy,
    pub cost_matrix: DMatrix<f64>,
    pub plan: TransportPlan,
    pub expected_cost: f64,
}

/// Synthesize the optimal randomized policy for steering `initial` to
/// `desired`: fill the pairwise cost matrix, solve the transportation LP,
/// and materialize steering laws on the plan's support.
pub fn synthesize(
    sys: &LtvSystem,
    cost: &QuadraticCost,
    initial: &Gmm,
    desired: &Gmm,
) -> Result<Synthesis> {
    if initial.dim() != sys.state_dim() || desired.dim() != sys.state_dim() {
        return Err(SteeringError::InvalidArgument(
            "mixture dimension does not match the system state dimension".into(),
        ));
    }
    if !sys.is_controllable(1e-9) {
        return Err(SteeringError::Uncontrollable(
            "controllability Grammian is (near-)singular over the horizon".into(),
        ));
    }
    let lift = sys.lift(cost)?;
    let d = null_basis(&lift.b_n, 1e-9)?;

    let r = initial.len();
    let t = desired.len();
    let mut cost_matrix = DMatrix::<f64>::zeros(r, t);
    let mut all_laws: Vec<Vec<SteeringLaw>> = Vec::with_capacity(r);
    for i in 0..r {
        let mut row = Vec::with_capacity(t);
        for j in 0..t {
            let (c_ij, law) =
                steering::pair_cost(&lift, &d, initial.component(i), desired.component(j))?;
            cost_matrix[(i, j)] = c_ij;
            row.push(law);
        }
        all_laws.push(row);
    }

    let plan = transport::solve_transport(&cost_matrix, initial.weights(), desired.weights())?;

    // Zero-weight initial components never get sampled; their λ rows are
    // uniform placeholders and carry no laws.
    let mut lambda = DMatrix::<f64>::zeros(r, t);
    let mut laws: Vec<Vec<Option<SteeringLaw>>> = vec![vec![None; t]; r];
    for (i, row) in all_laws.into_iter().enumerate() {
        if initial.weights()[i] <= STRUCTURAL_ZERO {
            for j in 0..t {
                lambda[(i, j)] = 1.0 / t as f64;
            }
            continue;
        }
        let mut kept: Vec<(usize, SteeringLaw)> = Vec::new();
        for (j, law) in row.into_iter().enumerate() {
            let lam = plan.tilde_lambda[(i, j)] / initial.weights()[i];
            if lam > STRUCTURAL_ZERO {
                lambda[(i, j)] = lam;
                kept.push((j, law));
            }
        }
        let s: f64 = lambda.row(i).iter().sum();
        for j in 0..t {
            lambda[(i, j)] /= s;
        }
        for (j, law) in kept {
            laws[i][j] = Some(law);
        }
    }

    let expected_cost = plan.objective;
    let policy = GmmPolicy::new(
        initial.clone(),
        lambda,
        laws,
        sys.state_dim(),
        sys.input_dim(),
        sys.horizon(),
    )?;
    Ok(Synthesis { policy, cost_matrix, plan, expected_cost })
}
