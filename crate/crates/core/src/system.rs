//! Time-varying linear system, quadratic cost, and the lifted block matrices
//! that collapse the horizon into a single linear map.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SteeringError};
use crate::linalg;

/// Discrete-time linear time-varying system x_{k+1} = A_k x_k + B_k u_k.
#[derive(Debug, Clone)]
pub struct LtvSystem {
    a_seq: Vec<DMatrix<f64>>,
    b_seq: Vec<DMatrix<f64>>,
    n: usize,
    m: usize,
    horizon: usize,
}

impl LtvSystem {
    pub fn new(a_seq: Vec<DMatrix<f64>>, b_seq: Vec<DMatrix<f64>>) -> Result<Self> {
        if a_seq.is_empty() || a_seq.len() != b_seq.len() {
            return Err(SteeringError::InvalidArgument(format!(
                "need equal, nonzero counts of A and B matrices (got {} and {})",
                a_seq.len(),
                b_seq.len()
            )));
        }
        let n = a_seq[0].nrows();
        let m = b_seq[0].ncols();
        if n == 0 || m == 0 {
            return Err(SteeringError::InvalidArgument(
                "state and input dimensions must be positive".into(),
            ));
        }
        for (k, a) in a_seq.iter().enumerate() {
            if a.nrows() != n || a.ncols() != n {
                return Err(SteeringError::InvalidArgument(format!(
                    "A[{k}] must be {n}x{n}, got {}x{}",
                    a.nrows(),
                    a.ncols()
                )));
            }
        }
        for (k, b) in b_seq.iter().enumerate() {
            if b.nrows() != n || b.ncols() != m {
                return Err(SteeringError::InvalidArgument(format!(
                    "B[{k}] must be {n}x{m}, got {}x{}",
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
        let horizon = a_seq.len();
        Ok(Self { a_seq, b_seq, n, m, horizon })
    }

    /// Time-invariant convenience constructor: repeats (A, B) for `horizon` steps.
    pub fn time_invariant(a: DMatrix<f64>, b: DMatrix<f64>, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(SteeringError::InvalidArgument("horizon must be >= 1".into()));
        }
        Self::new(vec![a; horizon], vec![b; horizon])
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

    pub fn a(&self, k: usize) -> &DMatrix<f64> {
        &self.a_seq[k]
    }

    pub fn b(&self, k: usize) -> &DMatrix<f64> {
        &self.b_seq[k]
    }

    /// State transition matrix Φ_{k2,k1} = A_{k2-1} ··· A_{k1}, with Φ_{k,k} = I.
    pub fn state_transition(&self, k1: usize, k2: usize) -> Result<DMatrix<f64>> {
        if k1 > k2 || k2 > self.horizon {
            return Err(SteeringError::InvalidArgument(format!(
                "need 0 <= k1 <= k2 <= N, got k1={k1}, k2={k2}, N={}",
                self.horizon
            )));
        }
        let mut phi = DMatrix::<f64>::identity(self.n, self.n);
        for k in k1..k2 {
            phi = &self.a_seq[k] * phi;
        }
        Ok(phi)
    }

    /// Controllability Grammian G_{N:0} = Σ_k Φ_{N,k+1} B_k B_kᵀ Φ_{N,k+1}ᵀ.
    pub fn grammian(&self) -> DMatrix<f64> {
        let mut g = DMatrix::<f64>::zeros(self.n, self.n);
        // Accumulate Φ_{N,k+1} backwards to avoid O(N^2) products.
        let mut phi = DMatrix::<f64>::identity(self.n, self.n); // Φ_{N,N}
        for k in (0..self.horizon).rev() {
            let pb = &phi * &self.b_seq[k];
            g += &pb * pb.transpose();
            phi *= &self.a_seq[k];
        }
        g
    }

    /// Controllability test: smallest singular value of the Grammian must
    /// exceed `tol` times the largest.
    pub fn is_controllable(&self, tol: f64) -> bool {
        let sv = self.grammian().singular_values();
        let max = sv.iter().cloned().fold(0.0_f64, f64::max);
        let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        max > 0.0 && min > tol * max
    }

    /// Build all lifted block matrices for this system and cost.
    pub fn lift(&self, cost: &QuadraticCost) -> Result<LiftedMatrices> {
        if cost.state_dim() != self.n || cost.input_dim() != self.m || cost.horizon() != self.horizon {
            return Err(SteeringError::InvalidArgument(format!(
                "cost dims (n={}, m={}, N={}) do not match system (n={}, m={}, N={})",
                cost.state_dim(),
                cost.input_dim(),
                cost.horizon(),
                self.n,
                self.m,
                self.horizon
            )));
        }
        let (n, m, big_n) = (self.n, self.m, self.horizon);

        // Φ_{k,0} for k = 0..N.
        let mut phis = Vec::with_capacity(big_n + 1);
        phis.push(DMatrix::<f64>::identity(n, n));
        for k in 0..big_n {
            let next = &self.a_seq[k] * &phis[k];
            phis.push(next);
        }

        let mut gamma = DMatrix::<f64>::zeros((big_n + 1) * n, n);
        for (k, phi) in phis.iter().enumerate() {
            gamma.view_mut((k * n, 0), (n, n)).copy_from(phi);
        }

        // Block (k, j) of H_u is Φ_{k,j+1} B_j for j < k.
        let mut h_u = DMatrix::<f64>::zeros((big_n + 1) * n, big_n * m);
        for k in 1..=big_n {
            let mut phi = DMatrix::<f64>::identity(n, n); // Φ_{k,k}
            for j in (0..k).rev() {
                // phi currently holds Φ_{k,j+1}
                let block = &phi * &self.b_seq[j];
                h_u.view_mut((k * n, j * m), (n, m)).copy_from(&block);
                phi *= &self.a_seq[j];
            }
        }

        // B_N is the last block row of H_u.
        let b_n = h_u.view((big_n * n, 0), (n, big_n * m)).into_owned();

        let mut q_blk = DMatrix::<f64>::zeros((big_n + 1) * n, (big_n + 1) * n);
        for k in 0..=big_n {
            q_blk.view_mut((k * n, k * n), (n, n)).copy_from(cost.q(k));
        }
        let mut r_blk = DMatrix::<f64>::zeros(big_n * m, big_n * m);
        for k in 0..big_n {
            r_blk.view_mut((k * m, k * m), (m, m)).copy_from(cost.r(k));
        }
        let mut x_ref_stacked = DVector::<f64>::zeros((big_n + 1) * n);
        for k in 0..=big_n {
            x_ref_stacked.view_mut((k * n, 0), (n, 1)).copy_from(cost.x_ref(k));
        }

        Ok(LiftedMatrices {
            gamma,
            h_u,
            b_n,
            phi_n0: phis[big_n].clone(),
            q_blk,
            r_blk,
            x_ref_stacked,
            n,
            m,
            horizon: big_n,
        })
    }
}

/// Quadratic stage/terminal cost Σ ‖u_k‖²_{R_k} + ‖x_k − x'_k‖²_{Q_k}.
#[derive(Debug, Clone)]
pub struct QuadraticCost {
    q_seq: Vec<DMatrix<f64>>,
    r_seq: Vec<DMatrix<f64>>,
    x_ref: Vec<DVector<f64>>,
}

impl QuadraticCost {
    /// `q_seq` has N+1 entries (terminal weight included), `r_seq` has N,
    /// `x_ref` has N+1.
    pub fn new(
        q_seq: Vec<DMatrix<f64>>,
        r_seq: Vec<DMatrix<f64>>,
        x_ref: Vec<DVector<f64>>,
    ) -> Result<Self> {
        if r_seq.is_empty() || q_seq.len() != r_seq.len() + 1 || x_ref.len() != q_seq.len() {
            return Err(SteeringError::InvalidArgument(format!(
                "expected |Q| = N+1, |R| = N, |x_ref| = N+1; got {}, {}, {}",
                q_seq.len(),
                r_seq.len(),
                x_ref.len()
            )));
        }
        let n = q_seq[0].nrows();
        let m = r_seq[0].nrows();
        let tol = 1e-9;
        for (k, q) in q_seq.iter().enumerate() {
            if q.nrows() != n || q.ncols() != n {
                return Err(SteeringError::InvalidArgument(format!("Q[{k}] must be {n}x{n}")));
            }
            if (q - q.transpose()).amax() > 1e-9 || linalg::min_eigenvalue(q) < -tol {
                return Err(SteeringError::InvalidArgument(format!(
                    "Q[{k}] must be symmetric positive semi-definite"
                )));
            }
        }
        for (k, r) in r_seq.iter().enumerate() {
            if r.nrows() != m || r.ncols() != m {
                return Err(SteeringError::InvalidArgument(format!("R[{k}] must be {m}x{m}")));
            }
            if (r - r.transpose()).amax() > 1e-9 || linalg::min_eigenvalue(r) <= tol {
                return Err(SteeringError::InvalidArgument(format!(
                    "R[{k}] must be symmetric positive definite"
                )));
            }
        }
        for (k, x) in x_ref.iter().enumerate() {
            if x.len() != n {
                return Err(SteeringError::InvalidArgument(format!(
                    "x_ref[{k}] must have length {n}"
                )));
            }
        }
        Ok(Self { q_seq, r_seq, x_ref })
    }

    /// Time-invariant cost with zero reference trajectory.
    pub fn time_invariant(q: DMatrix<f64>, r: DMatrix<f64>, horizon: usize) -> Result<Self> {
        let n = q.nrows();
        Self::new(
            vec![q; horizon + 1],
            vec![r; horizon],
            vec![DVector::zeros(n); horizon + 1],
        )
    }

    pub fn state_dim(&self) -> usize {
        self.q_seq[0].nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.r_seq[0].nrows()
    }

    pub fn horizon(&self) -> usize {
        self.r_seq.len()
    }

    pub fn q(&self, k: usize) -> &DMatrix<f64> {
        &self.q_seq[k]
    }

    pub fn r(&self, k: usize) -> &DMatrix<f64> {
        &self.r_seq[k]
    }

    pub fn x_ref(&self, k: usize) -> &DVector<f64> {
        &self.x_ref[k]
    }
}

/// Block matrices of the lifted horizon: X = Γ x₀ + H_u U.
#[derive(Debug, Clone)]
pub struct LiftedMatrices {
    /// (N+1)n × n; block row k is Φ_{k,0}.
    pub gamma: DMatrix<f64>,
    /// (N+1)n × Nm; block (k,j) is Φ_{k,j+1} B_j for j < k.
    pub h_u: DMatrix<f64>,
    /// n × Nm; last block row of H_u. B_N B_Nᵀ equals the Grammian.
    pub b_n: DMatrix<f64>,
    /// Φ_{N,0}.
    pub phi_n0: DMatrix<f64>,
    /// bdiag(Q_0..Q_N).
    pub q_blk: DMatrix<f64>,
    /// bdiag(R_0..R_{N-1}).
    pub r_blk: DMatrix<f64>,
    /// Stacked reference trajectory X'.
    pub x_ref_stacked: DVector<f64>,
    pub n: usize,
    pub m: usize,
    pub horizon: usize,
}

impl LiftedMatrices {
    /// M = R + H_uᵀ Q H_u, the input-space Hessian of the lifted cost.
    pub fn cost_hessian(&self) -> DMatrix<f64> {
        &self.r_blk + self.h_u.transpose() * &self.q_blk * &self.h_u
    }
}

/// Orthonormal basis D of the kernel of B_N, computed from the SVD.
///
/// Returns an Nm × (Nm − n) matrix with B_N D = 0 and Dᵀ D = I. When
/// Nm = n the kernel is trivial and D has zero columns.
pub fn null_basis(b_n: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let n = b_n.nrows();
    let cols = b_n.ncols();
    let svd = b_n.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("svd requested v_t");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > tol * sigma_max.max(1e-300))
        .count();
    if rank < n {
        return Err(SteeringError::Uncontrollable(format!(
            "B_N has row rank {rank} < {n}"
        )));
    }
    // nalgebra's thin SVD yields min(n, cols) right singular vectors; the
    // remaining kernel directions are completed by orthogonalizing the
    // residual complement. For full row rank, rows rank..min(n,cols) of v_t
    // are absent, so build the kernel by projecting out the row space.
    let kernel_dim = cols - n;
    if kernel_dim == 0 {
        return Ok(DMatrix::zeros(cols, 0));
    }
    // Projector onto the orthogonal complement of span(B_Nᵀ).
    let mut proj = DMatrix::<f64>::identity(cols, cols);
    for i in 0..rank {
        let v = v_t.row(i).transpose();
        proj -= &v * v.transpose();
    }
    // Orthonormalize the projector's range with a rank-revealing pass.
    let eig = proj.symmetric_eigen();
    let mut idx: Vec<usize> = (0..cols).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let mut d = DMatrix::<f64>::zeros(cols, kernel_dim);
    for (c, &i) in idx.iter().take(kernel_dim).enumerate() {
        if eig.eigenvalues[i] < 0.5 {
            return Err(SteeringError::Numeric(
                "kernel basis extraction failed: projector rank deficient".into(),
            ));
        }
        d.set_column(c, &eig.eigenvectors.column(i));
    }
    Ok(d)
}
