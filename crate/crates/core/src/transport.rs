//! Transportation simplex for the mixing-weight linear program:
//! min tr(Cᵀ λ̃) over the transportation polytope with marginals p⁰ and pᵈ.

use nalgebra::DMatrix;

use crate::error::{Result, SteeringError};

const MARGINAL_TOL: f64 = 1e-9;
const ZERO_CLAMP: f64 = 1e-12;

/// A vertex-optimal transportation plan.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    /// r × t joint matrix λ̃ with row sums p⁰ and column sums pᵈ.
    pub tilde_lambda: DMatrix<f64>,
    /// Optimal objective tr(Cᵀ λ̃).
    pub objective: f64,
}

/// Solve the transportation LP by the transportation simplex
/// (northwest-corner start, Bland's anti-cycling pivot rule).
pub fn solve_transport(c: &DMatrix<f64>, p0: &[f64], pd: &[f64]) -> Result<TransportPlan> {
    let r = p0.len();
    let t = pd.len();
    if c.nrows() != r || c.ncols() != t {
        return Err(SteeringError::InvalidArgument(format!(
            "cost matrix must be {r}x{t}, got {}x{}",
            c.nrows(),
            c.ncols()
        )));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(SteeringError::InvalidArgument("cost matrix must be finite".into()));
    }
    check_simplex(p0, "initial marginal")?;
    check_simplex(pd, "desired marginal")?;

    // Strip zero-weight marginals; the reduced problem is solved and the
    // stripped rows/columns re-inserted as zeros.
    let rows: Vec<usize> = (0..r).filter(|&i| p0[i] > ZERO_CLAMP).collect();
    let cols: Vec<usize> = (0..t).filter(|&j| pd[j] > ZERO_CLAMP).collect();
    let supply: Vec<f64> = rows.iter().map(|&i| p0[i]).collect();
    let demand: Vec<f64> = cols.iter().map(|&j| pd[j]).collect();
    let cost_red = DMatrix::from_fn(rows.len(), cols.len(), |a, b| c[(rows[a], cols[b])]);

    let flow_red = simplex(&cost_red, &supply, &demand);

    let mut tilde = DMatrix::<f64>::zeros(r, t);
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in cols.iter().enumerate() {
            let mut v = flow_red[(a, b)];
            if v < 0.0 {
                v = 0.0;
            }
            tilde[(i, j)] = v;
        }
    }
    let objective = (c.transpose() * &tilde).trace();
    Ok(TransportPlan { tilde_lambda: tilde, objective })
}

/// Extract row-stochastic mixing weights λ_{i,j} = λ̃_{i,j} / p_i⁰.
pub fn mixing_weights(plan: &TransportPlan, p0: &[f64]) -> Result<DMatrix<f64>> {
    let r = plan.tilde_lambda.nrows();
    if p0.len() != r {
        return Err(SteeringError::InvalidArgument(format!(
            "marginal length {} does not match plan rows {r}",
            p0.len()
        )));
    }
    if p0.iter().any(|&p| p <= 0.0) {
        return Err(SteeringError::InvalidArgument(
            "mixing weights require strictly positive initial marginals".into(),
        ));
    }
    let t = plan.tilde_lambda.ncols();
    let mut lambda = DMatrix::zeros(r, t);
    for i in 0..r {
        for j in 0..t {
            lambda[(i, j)] = plan.tilde_lambda[(i, j)] / p0[i];
        }
        // Re-normalize the row exactly.
        let s: f64 = lambda.row(i).iter().sum();
        if s > 0.0 {
            for j in 0..t {
                lambda[(i, j)] /= s;
            }
        }
    }
    Ok(lambda)
}

fn check_simplex(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() {
        return Err(SteeringError::InvalidArgument(format!("{what} is empty")));
    }
    if p.iter().any(|&v| v < -MARGINAL_TOL) {
        return Err(SteeringError::InvalidArgument(format!(
            "{what} has negative entries"
        )));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > MARGINAL_TOL {
        return Err(SteeringError::InvalidArgument(format!(
            "{what} must sum to 1, got {s}"
        )));
    }
    Ok(())
}

/// Basic cell of the simplex tableau.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Cell {
    i: usize,
    j: usize,
}

fn simplex(cost: &DMatrix<f64>, supply: &[f64], demand: &[f64]) -> DMatrix<f64> {
    let r = supply.len();
    let t = demand.len();
    let mut flow = DMatrix::<f64>::zeros(r, t);
    if r == 0 || t == 0 {
        return flow;
    }

    // Northwest-corner start. Always records exactly r + t - 1 basic cells,
    // adding zero-flow cells on simultaneous exhaustion.
    let mut basis: Vec<Cell> = Vec::with_capacity(r + t - 1);
    let mut s = supply.to_vec();
    let mut d = demand.to_vec();
    let (mut i, mut j) = (0, 0);
    loop {
        let q = s[i].min(d[j]);
        flow[(i, j)] = q;
        basis.push(Cell { i, j });
        s[i] -= q;
        d[j] -= q;
        if i == r - 1 && j == t - 1 {
            break;
        }
        if j == t - 1 || (s[i] <= d[j] && i < r - 1) {
            i += 1;
        } else {
            j += 1;
        }
    }
    debug_assert_eq!(basis.len(), r + t - 1);

    loop {
        // Duals from the basis tree: u_i + v_j = c_ij on basic cells, u_0 = 0.
        let (u, v) = duals(cost, &basis, r, t);

        // Bland: entering variable is the first (row-major) cell with a
        // negative reduced cost.
        let mut entering = None;
        'scan: for ei in 0..r {
            for ej in 0..t {
                if basis.iter().any(|c| c.i == ei && c.j == ej) {
                    continue;
                }
                if cost[(ei, ej)] - u[ei] - v[ej] < -1e-12 {
                    entering = Some(Cell { i: ei, j: ej });
                    break 'scan;
                }
            }
        }
        let Some(enter) = entering else {
            break;
        };

        // Unique alternating cycle through the entering cell.
        let cycle = find_cycle(&basis, enter, r, t);
        // Odd positions lose flow; the leaving cell is the minimizer with the
        // smallest index (Bland again).
        let mut theta = f64::INFINITY;
        let mut leave_pos = 1;
        for (pos, cell) in cycle.iter().enumerate().skip(1).step_by(2) {
            let f = flow[(cell.i, cell.j)];
            let better = f < theta - 1e-15;
            let tie = (f - theta).abs() <= 1e-15
                && (cell.i, cell.j) < (cycle[leave_pos].i, cycle[leave_pos].j);
            if better || (tie && theta.is_finite()) {
                theta = theta.min(f);
                leave_pos = pos;
            }
        }
        for (pos, cell) in cycle.iter().enumerate() {
            if pos % 2 == 0 {
                flow[(cell.i, cell.j)] += theta;
            } else {
                flow[(cell.i, cell.j)] -= theta;
            }
        }
        let leaving = cycle[leave_pos];
        flow[(leaving.i, leaving.j)] = 0.0;
        let idx = basis.iter().position(|&c| c == leaving).unwrap();
        basis[idx] = enter;
    }
    flow
}

fn duals(cost: &DMatrix<f64>, basis: &[Cell], r: usize, t: usize) -> (Vec<f64>, Vec<f64>) {
    let mut u = vec![f64::NAN; r];
    let mut v = vec![f64::NAN; t];
    u[0] = 0.0;
    let mut changed = true;
    while changed {
        changed = false;
        for cell in basis {
            if u[cell.i].is_nan() && !v[cell.j].is_nan() {
                u[cell.i] = cost[(cell.i, cell.j)] - v[cell.j];
                changed = true;
            } else if v[cell.j].is_nan() && !u[cell.i].is_nan() {
                v[cell.j] = cost[(cell.i, cell.j)] - u[cell.i];
                changed = true;
            }
        }
    }
    (u, v)
}

/// Find the unique cycle created by adding `enter` to the basis tree.
/// Returned as an alternating sequence starting at `enter` (gets +θ).
fn find_cycle(basis: &[Cell], enter: Cell, r: usize, t: usize) -> Vec<Cell> {
    // Nodes: rows 0..r, columns r..r+t. Basic cells are tree edges; find the
    // tree path from the entering cell's column node back to its row node.
    let nodes = r + t;
    let mut adj: Vec<Vec<(usize, Cell)>> = vec![Vec::new(); nodes];
    for &cell in basis {
        adj[cell.i].push((r + cell.j, cell));
        adj[r + cell.j].push((cell.i, cell));
    }
    // DFS from column node of `enter` to its row node.
    let start = r + enter.j;
    let goal = enter.i;
    let mut stack = vec![(start, usize::MAX)];
    let mut parent: Vec<Option<(usize, Cell)>> = vec![None; nodes];
    let mut visited = vec![false; nodes];
    visited[start] = true;
    while let Some((node, _)) = stack.pop() {
        if node == goal {
            break;
        }
        for &(next, cell) in &adj[node] {
            if !visited[next] {
                visited[next] = true;
                parent[next] = Some((node, cell));
                stack.push((next, node));
            }
        }
    }
    // Walk back from goal to start collecting the path edges.
    let mut path = Vec::new();
    let mut node = goal;
    while node != start {
        let (prev, cell) = parent[node].expect("basis tree is connected");
        path.push(cell);
        node = prev;
    }
    // Cycle: enter, then path edges from the row node of enter back to its
    // column node (path was collected goal→start, i.e. row→column order).
    let mut cycle = Vec::with_capacity(path.len() + 1);
    cycle.push(enter);
    cycle.extend(path);
    cycle
}
