//! Deterministic rollouts and Monte-Carlo validation of synthesized
//! policies.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SteeringError};
use crate::gmm::Gmm;
use crate::policy::GmmPolicy;
use crate::system::{LtvSystem, QuadraticCost};

/// One simulated trajectory with its realized cost.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// States x_0..x_N.
    pub states: Vec<DVector<f64>>,
    /// Inputs u_0..u_{N-1}.
    pub inputs: Vec<DVector<f64>>,
    /// Which (i, j) steering pair generated the inputs, if any.
    pub pair: Option<(usize, usize)>,
    /// Realized quadratic cost, when evaluated.
    pub realized_cost: Option<f64>,
}

/// Aggregate Monte-Carlo report.
#[derive(Debug, Clone)]
pub struct McReport {
    pub sample_count: usize,
    /// Empirical frequency of each (i, j) pair; sums to 1 (empty when
    /// `sample_count` is 0).
    pub pair_frequencies: DMatrix<f64>,
    /// Per-pair sample counts.
    pub pair_counts: DMatrix<f64>,
    /// Per-pair empirical terminal means (None for unobserved pairs).
    pub pair_terminal_means: Vec<Vec<Option<DVector<f64>>>>,
    /// Per-pair empirical terminal covariances (None when fewer than two
    /// observations).
    pub pair_terminal_covs: Vec<Vec<Option<DMatrix<f64>>>>,
    /// Mean realized cost across samples.
    pub empirical_mean_cost: f64,
    /// Terminal states with their pair labels, in sample order.
    pub terminal_samples: Vec<((usize, usize), DVector<f64>)>,
}

/// Roll the system forward from x₀ under a stacked input vector.
pub fn rollout(sys: &LtvSystem, x0: &DVector<f64>, u_stack: &DVector<f64>) -> Result<Trajectory> {
    let n = sys.state_dim();
    let m = sys.input_dim();
    let big_n = sys.horizon();
    if x0.len() != n || u_stack.len() != big_n * m {
        return Err(SteeringError::InvalidArgument(format!(
            "expected x0 of length {n} and input stack of length {}",
            big_n * m
        )));
    }
    let mut states = Vec::with_capacity(big_n + 1);
    let mut inputs = Vec::with_capacity(big_n);
    states.push(x0.clone());
    for k in 0..big_n {
        let u_k = u_stack.rows(k * m, m).into_owned();
        let next = sys.a(k) * &states[k] + sys.b(k) * &u_k;
        states.push(next);
        inputs.push(u_k);
    }
    Ok(Trajectory { states, inputs, pair: None, realized_cost: None })
}

/// Realized quadratic cost of a trajectory.
pub fn evaluate_cost(traj: &Trajectory, cost: &QuadraticCost) -> f64 {
    let big_n = traj.inputs.len();
    let mut total = 0.0;
    for k in 0..big_n {
        let u = &traj.inputs[k];
        let dx = &traj.states[k] - cost.x_ref(k);
        total += (u.transpose() * cost.r(k) * u)[(0, 0)];
        total += (dx.transpose() * cost.q(k) * &dx)[(0, 0)];
    }
    let dx_n = &traj.states[big_n] - cost.x_ref(big_n);
    total + (dx_n.transpose() * cost.q(big_n) * &dx_n)[(0, 0)]
}

/// Sample `count` initial states, apply the policy, roll out, and
/// aggregate. Sample index s draws from an independent RNG substream, so
/// the report is reproducible regardless of evaluation order.
pub fn monte_carlo(
    sys: &LtvSystem,
    cost: &QuadraticCost,
    initial: &Gmm,
    policy: &GmmPolicy,
    count: usize,
    seed: u64,
) -> Result<McReport> {
    let trajectories = simulate_trajectories(sys, cost, initial, policy, count, seed)?;
    aggregate(policy, &trajectories)
}

/// Full per-sample trajectories (used by the CLI's snapshot export).
pub fn simulate_trajectories(
    sys: &LtvSystem,
    cost: &QuadraticCost,
    initial: &Gmm,
    policy: &GmmPolicy,
    count: usize,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    if policy.state_dim() != sys.state_dim()
        || policy.input_dim() != sys.input_dim()
        || policy.horizon() != sys.horizon()
    {
        return Err(SteeringError::InvalidArgument(
            "policy dimensions do not match the system".into(),
        ));
    }
    if initial.dim() != sys.state_dim() {
        return Err(SteeringError::InvalidArgument(
            "initial mixture dimension does not match the system".into(),
        ));
    }
    let mut out = Vec::with_capacity(count);
    for s in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(s as u64);
        let comp = initial.sample_component(&mut rng);
        let x0 = initial.component(comp).sample(&mut rng);
        let (pair, u_stack) = policy.sample_control_with(&x0, &mut rng);
        let mut traj = rollout(sys, &x0, &u_stack)?;
        traj.pair = Some(pair);
        traj.realized_cost = Some(evaluate_cost(&traj, cost));
        out.push(traj);
    }
    Ok(out)
}

/// Aggregate pre-simulated trajectories into a report.
pub fn mc_report_from_trajectories(
    policy: &GmmPolicy,
    trajectories: &[Trajectory],
) -> Result<McReport> {
    aggregate(policy, trajectories)
}

fn aggregate(policy: &GmmPolicy, trajectories: &[Trajectory]) -> Result<McReport> {
    let r = policy.source_count();
    let t = policy.target_count();
    let n = policy.state_dim();
    let count = trajectories.len();
    let mut pair_counts = DMatrix::<f64>::zeros(r, t);
    let mut sums: Vec<Vec<DVector<f64>>> = vec![vec![DVector::zeros(n); t]; r];
    let mut sq_sums: Vec<Vec<DMatrix<f64>>> = vec![vec![DMatrix::zeros(n, n); t]; r];
    let mut cost_sum = 0.0;
    let mut terminal_samples = Vec::with_capacity(count);
    for traj in trajectories {
        let (i, j) = traj.pair.expect("simulated trajectories carry a pair");
        let x_n = traj.states.last().unwrap().clone();
        pair_counts[(i, j)] += 1.0;
        sums[i][j] += &x_n;
        sq_sums[i][j] += &x_n * x_n.transpose();
        cost_sum += traj.realized_cost.unwrap_or(0.0);
        terminal_samples.push(((i, j), x_n));
    }
    let pair_frequencies = if count > 0 {
        &pair_counts / count as f64
    } else {
        DMatrix::zeros(r, t)
    };
    let mut pair_terminal_means: Vec<Vec<Option<DVector<f64>>>> = vec![vec![None; t]; r];
    let mut pair_terminal_covs: Vec<Vec<Option<DMatrix<f64>>>> = vec![vec![None; t]; r];
    for i in 0..r {
        for j in 0..t {
            let c = pair_counts[(i, j)];
            if c >= 1.0 {
                let mean = &sums[i][j] / c;
                pair_terminal_means[i][j] = Some(mean.clone());
                if c >= 2.0 {
                    let cov = &sq_sums[i][j] / c - &mean * mean.transpose();
                    pair_terminal_covs[i][j] = Some(cov);
                }
            }
        }
    }
    Ok(McReport {
        sample_count: count,
        pair_frequencies,
        pair_counts,
        pair_terminal_means,
        pair_terminal_covs,
        empirical_mean_cost: if count > 0 { cost_sum / count as f64 } else { 0.0 },
        terminal_samples,
    })
}
