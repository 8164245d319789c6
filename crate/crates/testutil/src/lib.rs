//! Independent numerical oracles and random instance generators used by the
//! test suites. Everything here is deliberately written against plain
//! matrices so it shares no solution path with the library under test.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic RNG for test instances.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random matrix with entries uniform in [-1, 1].
pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>() * 2.0 - 1.0)
}

/// Random vector with entries uniform in [-1, 1].
pub fn random_vector<R: Rng>(rng: &mut R, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.random::<f64>() * 2.0 - 1.0)
}

/// Random symmetric positive-definite matrix A Aᵀ + εI.
pub fn random_spd<R: Rng>(rng: &mut R, n: usize, eps: f64) -> DMatrix<f64> {
    let a = random_matrix(rng, n, n);
    &a * a.transpose() + DMatrix::identity(n, n) * eps
}

/// Random symmetric positive semi-definite matrix A Aᵀ with A thin.
pub fn random_psd<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let a = random_matrix(rng, n, n.max(1));
    &a * a.transpose()
}

/// Random orthogonal matrix from the QR factorization of a random matrix.
pub fn random_orthogonal<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let a = random_matrix(rng, n, n);
    let qr = a.qr();
    qr.q()
}

/// Random simplex vector with strictly positive entries.
pub fn random_simplex<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.random::<f64>() + 0.05).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Mean-steering oracle: solve the KKT system of the equality-constrained
/// QP min Ūᵀ M Ū + 2 (H_uᵀ Q Y)ᵀ Ū (+const) s.t. B_N Ū = rhs directly
/// by factoring [[2M, −B_Nᵀ], [B_N, 0]].
pub struct KktMeanOracle {
    pub u_bar: DVector<f64>,
    pub multiplier: DVector<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn kkt_solve_mean(
    m: &DMatrix<f64>,
    b_n: &DMatrix<f64>,
    hqy: &DVector<f64>,
    rhs: &DVector<f64>,
) -> KktMeanOracle {
    let nm = m.nrows();
    let n = b_n.nrows();
    let mut kkt = DMatrix::<f64>::zeros(nm + n, nm + n);
    kkt.view_mut((0, 0), (nm, nm)).copy_from(&(m * 2.0));
    kkt.view_mut((0, nm), (nm, n)).copy_from(&(-b_n.transpose()));
    kkt.view_mut((nm, 0), (n, nm)).copy_from(b_n);
    let mut b = DVector::<f64>::zeros(nm + n);
    b.rows_mut(0, nm).copy_from(&(-2.0 * hqy));
    b.rows_mut(nm, n).copy_from(rhs);
    let sol = kkt.lu().solve(&b).expect("KKT system is nonsingular");
    KktMeanOracle {
        u_bar: sol.rows(0, nm).into_owned(),
        multiplier: sol.rows(nm, n).into_owned(),
    }
}

/// Quadratic mean-steering objective evaluated directly:
/// Ūᵀ R Ū + (Γ μ₀ + H_u Ū − X')ᵀ Q (Γ μ₀ + H_u Ū − X').
pub fn eval_mean_objective(
    r_blk: &DMatrix<f64>,
    q_blk: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
    h_u: &DMatrix<f64>,
    x_ref: &DVector<f64>,
    mu0: &DVector<f64>,
    u_bar: &DVector<f64>,
) -> f64 {
    let dx = gamma * mu0 + h_u * u_bar - x_ref;
    (u_bar.transpose() * r_blk * u_bar)[(0, 0)] + (dx.transpose() * q_blk * &dx)[(0, 0)]
}

/// Covariance-steering objective evaluated directly on a gain stack L:
/// tr(R L Σ₀ Lᵀ) + tr(Q (Γ + H_u L) Σ₀ (Γ + H_u L)ᵀ).
pub fn eval_cov_objective(
    r_blk: &DMatrix<f64>,
    q_blk: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
    h_u: &DMatrix<f64>,
    sigma0: &DMatrix<f64>,
    l: &DMatrix<f64>,
) -> f64 {
    let a = l * sigma0 * l.transpose();
    let g = gamma + h_u * l;
    let b = &g * sigma0 * g.transpose();
    (r_blk * a).trace() + (q_blk * b).trace()
}

/// A feasible competitor gain for the covariance steering constraint:
/// L(T, Z) = B_Nᵀ G⁻¹ (Σ_d^{1/2} T Σ₀^{-1/2} − Φ) + D Z for an orthogonal T.
pub fn feasible_cov_gain(
    b_n: &DMatrix<f64>,
    phi: &DMatrix<f64>,
    d: &DMatrix<f64>,
    sigma0: &DMatrix<f64>,
    sigmad: &DMatrix<f64>,
    t_orth: &DMatrix<f64>,
    z: &DMatrix<f64>,
) -> DMatrix<f64> {
    let g = b_n * b_n.transpose();
    let g_inv = g.cholesky().expect("grammian PD").inverse();
    let sd_sqrt = sym_sqrt(sigmad);
    let s0_inv_sqrt = sym_inv_sqrt(sigma0);
    b_n.transpose() * g_inv * (&sd_sqrt * t_orth * s0_inv_sqrt - phi) + d * z
}

/// Symmetric PSD square root (eigendecomposition, no clamping).
pub fn sym_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = ((a + a.transpose()) * 0.5).symmetric_eigen();
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// Symmetric inverse square root.
pub fn sym_inv_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = ((a + a.transpose()) * 0.5).symmetric_eigen();
    let d = eig.eigenvalues.map(|v| 1.0 / v.sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// Brute-force transportation LP: enumerate all bases (spanning trees of
/// the bipartite supply/demand graph with r + t − 1 edges), solve each for
/// its unique flow, and keep the best feasible objective. Exponential;
/// intended for r + t ≤ 8.
pub fn transport_bruteforce(c: &DMatrix<f64>, p0: &[f64], pd: &[f64]) -> f64 {
    let r = p0.len();
    let t = pd.len();
    let cells: Vec<(usize, usize)> =
        (0..r).flat_map(|i| (0..t).map(move |j| (i, j))).collect();
    let k = r + t - 1;
    let mut best = f64::INFINITY;
    let mut combo: Vec<usize> = (0..k).collect();
    loop {
        let edges: Vec<(usize, usize)> = combo.iter().map(|&idx| cells[idx]).collect();
        if let Some(flow) = solve_tree_flow(&edges, p0, pd) {
            if flow.iter().all(|&f| f >= -1e-9) {
                let obj: f64 = edges
                    .iter()
                    .zip(&flow)
                    .map(|(&(i, j), &f)| c[(i, j)] * f)
                    .sum();
                if obj < best {
                    best = obj;
                }
            }
        }
        // Next combination in lexicographic order.
        let mut pos = k;
        loop {
            if pos == 0 {
                return best;
            }
            pos -= 1;
            if combo[pos] < cells.len() - (k - pos) {
                combo[pos] += 1;
                for p in pos + 1..k {
                    combo[p] = combo[p - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Solve for the unique flow on a candidate spanning tree by leaf
/// elimination; returns None if the edge set is not a spanning tree.
fn solve_tree_flow(edges: &[(usize, usize)], p0: &[f64], pd: &[f64]) -> Option<Vec<f64>> {
    let r = p0.len();
    let t = pd.len();
    let nodes = r + t;
    let mut degree = vec![0usize; nodes];
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    for (e, &(i, j)) in edges.iter().enumerate() {
        degree[i] += 1;
        degree[r + j] += 1;
        incident[i].push(e);
        incident[r + j].push(e);
    }
    // Balance: supply positive, demand negative.
    let mut balance: Vec<f64> = p0.iter().copied().chain(pd.iter().map(|&d| -d)).collect();
    let mut flow = vec![f64::NAN; edges.len()];
    let mut removed_edges = vec![false; edges.len()];
    let mut removed_nodes = vec![false; nodes];
    for _ in 0..edges.len() {
        // Find a current leaf.
        let leaf = (0..nodes).find(|&v| !removed_nodes[v] && degree[v] == 1)?;
        let e = *incident[leaf]
            .iter()
            .find(|&&e| !removed_edges[e])
            .expect("leaf has a live edge");
        let (i, j) = edges[e];
        let other = if leaf == i { r + j } else { i };
        // Edge flow is +balance at a supply leaf, −balance at a demand leaf.
        let f = if leaf < r { balance[leaf] } else { -balance[leaf] };
        flow[e] = f;
        balance[other] += if other < r { -f } else { f };
        removed_edges[e] = true;
        removed_nodes[leaf] = true;
        degree[leaf] = 0;
        degree[other] -= 1;
    }
    // A spanning tree consumes every edge and leaves one balanced node.
    if flow.iter().any(|f| f.is_nan()) {
        return None;
    }
    Some(flow)
}

/// Match fitted mixture components to ground-truth ones by exhaustive
/// minimal-cost assignment over mean distances. Returns the permutation
/// `perm` with `perm[truth_index] = fitted_index`.
pub fn match_components(
    truth_means: &[DVector<f64>],
    fitted_means: &[DVector<f64>],
) -> Vec<usize> {
    let k = truth_means.len();
    assert_eq!(k, fitted_means.len());
    assert!(k <= 8, "exhaustive matching is for small k");
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best_perm = perm.clone();
    let mut best_cost = f64::INFINITY;
    permute(&mut perm, 0, &mut |p| {
        let cost: f64 = p
            .iter()
            .enumerate()
            .map(|(ti, &fi)| (&truth_means[ti] - &fitted_means[fi]).norm())
            .sum();
        if cost < best_cost {
            best_cost = cost;
            best_perm = p.to_vec();
        }
    });
    best_perm
}

fn permute(arr: &mut Vec<usize>, start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == arr.len() {
        visit(arr);
        return;
    }
    for i in start..arr.len() {
        arr.swap(start, i);
        permute(arr, start + 1, visit);
        arr.swap(start, i);
    }
}

/// Step-by-step rollout oracle: simulate x_{k+1} = A_k x_k + B_k u_k and
/// return the stacked state vector X.
pub fn rollout_stacked(
    a_seq: &[DMatrix<f64>],
    b_seq: &[DMatrix<f64>],
    x0: &DVector<f64>,
    u_stack: &DVector<f64>,
) -> DVector<f64> {
    let n = x0.len();
    let big_n = a_seq.len();
    let m = b_seq[0].ncols();
    let mut x = x0.clone();
    let mut stacked = DVector::<f64>::zeros((big_n + 1) * n);
    stacked.rows_mut(0, n).copy_from(&x);
    for k in 0..big_n {
        let u = u_stack.rows(k * m, m).into_owned();
        x = &a_seq[k] * &x + &b_seq[k] * &u;
        stacked.rows_mut((k + 1) * n, n).copy_from(&x);
    }
    stacked
}

/// Draw samples uniformly from an axis-aligned rectangle.
pub fn uniform_rect<R: Rng>(
    rng: &mut R,
    count: usize,
    x_range: (f64, f64),
    y_range: (f64, f64),
) -> Vec<DVector<f64>> {
    (0..count)
        .map(|_| {
            DVector::from_row_slice(&[
                x_range.0 + rng.random::<f64>() * (x_range.1 - x_range.0),
                y_range.0 + rng.random::<f64>() * (y_range.1 - y_range.0),
            ])
        })
        .collect()
}

/// Draw samples uniformly from a block-letter "T": a horizontal bar on top
/// of a vertical stem, sized to fit in [0, 5]².
pub fn uniform_t_shape<R: Rng>(rng: &mut R, count: usize) -> Vec<DVector<f64>> {
    // Bar: [0,5] x [4,5] (area 5), stem: [2,3] x [0,4] (area 4).
    let bar_area = 5.0;
    let stem_area = 4.0;
    let p_bar = bar_area / (bar_area + stem_area);
    (0..count)
        .map(|_| {
            if rng.random::<f64>() < p_bar {
                DVector::from_row_slice(&[
                    rng.random::<f64>() * 5.0,
                    4.0 + rng.random::<f64>(),
                ])
            } else {
                DVector::from_row_slice(&[
                    2.0 + rng.random::<f64>(),
                    rng.random::<f64>() * 4.0,
                ])
            }
        })
        .collect()
}
