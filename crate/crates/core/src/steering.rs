//! Closed-form solvers for the decoupled mean and covariance steering
//! problems, plus the pairwise Gaussian-to-Gaussian optimal cost.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SteeringError};
use crate::gmm::Gaussian;
use crate::linalg;
use crate::policy::SteeringLaw;
use crate::system::LiftedMatrices;

/// Eigenvalue clamp used when taking symmetric PSD square roots.
const SQRT_FLOOR: f64 = 1e-12;

/// Solution of the equality-constrained mean steering QP.
#[derive(Debug, Clone)]
pub struct MeanSteeringSolution {
    /// Stacked feedforward inputs ū_0..ū_{N-1}.
    pub u_bar: DVector<f64>,
    /// Lagrange multiplier of the terminal-mean constraint.
    pub multiplier: DVector<f64>,
    /// Optimal objective value.
    pub cost: f64,
}

/// Solution of the covariance steering problem.
#[derive(Debug, Clone)]
pub struct CovSteeringSolution {
    /// Stacked feedback gains L_0..L_{N-1} (Nm × n).
    pub l: DMatrix<f64>,
    /// Optimal orthogonal matrix from the trace minimization.
    pub t: DMatrix<f64>,
    /// Kernel-space component of the gain.
    pub z: DMatrix<f64>,
    /// Optimal objective value.
    pub cost: f64,
}

/// Feedforward term of the lifted mean steering objective:
/// Ūᵀ R Ū + (Γμ₀ + H_u Ū − X')ᵀ Q (Γμ₀ + H_u Ū − X').
pub fn mean_cost(lift: &LiftedMatrices, mu0: &DVector<f64>, u_bar: &DVector<f64>) -> f64 {
    let x_bar = &lift.gamma * mu0 + &lift.h_u * u_bar;
    let dx = x_bar - &lift.x_ref_stacked;
    linalg::quad_form(&lift.r_blk, u_bar) + linalg::quad_form(&lift.q_blk, &dx)
}

/// Feedback term of the lifted objective evaluated at a gain stack L:
/// tr(R L Σ₀ Lᵀ) + tr(Q (Γ + H_u L) Σ₀ (Γ + H_u L)ᵀ).
pub fn cov_cost(lift: &LiftedMatrices, sigma0: &DMatrix<f64>, l: &DMatrix<f64>) -> f64 {
    let a = l * sigma0 * l.transpose();
    let g = &lift.gamma + &lift.h_u * l;
    let b = &g * sigma0 * g.transpose();
    (&lift.r_blk * a).trace() + (&lift.q_blk * b).trace()
}

/// Solve the mean steering QP in closed form.
pub fn solve_mean(
    lift: &LiftedMatrices,
    mu0: &DVector<f64>,
    mud: &DVector<f64>,
) -> Result<MeanSteeringSolution> {
    let n = lift.n;
    if mu0.len() != n || mud.len() != n {
        return Err(SteeringError::InvalidArgument(format!(
            "mean vectors must have length {n}"
        )));
    }
    let m_mat = lift.cost_hessian();
    let m_inv = linalg::spd_inverse(&m_mat, "M = R + H_u' Q H_u")?;
    let y = &lift.gamma * mu0 - &lift.x_ref_stacked;
    let hqy = lift.h_u.transpose() * &lift.q_blk * &y;

    let bn_minv = &lift.b_n * &m_inv;
    let schur = &bn_minv * lift.b_n.transpose();
    let schur_inv = linalg::spd_inverse(&schur, "B_N M^-1 B_N'").map_err(|_| {
        SteeringError::Uncontrollable("B_N M^-1 B_N' is singular".into())
    })?;

    let rhs = &bn_minv * &hqy + (mud - &lift.phi_n0 * mu0);
    let multiplier = 2.0 * &schur_inv * rhs;
    let u_bar = 0.5 * &m_inv * (lift.b_n.transpose() * &multiplier - 2.0 * &hqy);
    let cost = mean_cost(lift, mu0, &u_bar);
    Ok(MeanSteeringSolution { u_bar, multiplier, cost })
}

/// Solve the covariance steering problem in closed form.
///
/// `d` is an orthonormal basis of the kernel of B_N (possibly with zero
/// columns when Nm = n).
pub fn solve_cov(
    lift: &LiftedMatrices,
    d: &DMatrix<f64>,
    sigma0: &DMatrix<f64>,
    sigmad: &DMatrix<f64>,
) -> Result<CovSteeringSolution> {
    let n = lift.n;
    let nm = lift.horizon * lift.m;
    if !linalg::is_spd(sigma0, 1e-9) || !linalg::is_spd(sigmad, 1e-9) {
        return Err(SteeringError::InvalidArgument(
            "initial and desired covariances must be symmetric positive definite".into(),
        ));
    }
    if d.nrows() != nm {
        return Err(SteeringError::InvalidArgument(format!(
            "kernel basis must have {nm} rows"
        )));
    }

    let g_inv = linalg::spd_inverse(&(&lift.b_n * lift.b_n.transpose()), "Grammian")
        .map_err(|_| SteeringError::Uncontrollable("Grammian is singular".into()))?;
    let m_mat = lift.cost_hessian();

    let s0_sqrt = linalg::sym_sqrt(sigma0, SQRT_FLOOR);
    let s0_inv_sqrt = linalg::sym_inv_sqrt(sigma0, SQRT_FLOOR);
    let sd_sqrt = linalg::sym_sqrt(sigmad, SQRT_FLOOR);

    let bn_t_ginv = lift.b_n.transpose() * &g_inv;
    let kernel_dim = d.ncols();

    // Kernel-space projections; all zero when the kernel is trivial.
    let (theta1, dmd_inv) = if kernel_dim > 0 {
        let dmd_inv = linalg::spd_inverse(&(d.transpose() * &m_mat * d), "D' M D")?;
        let theta1 =
            DMatrix::<f64>::identity(nm, nm) - d * &dmd_inv * d.transpose() * &m_mat;
        (theta1, Some(dmd_inv))
    } else {
        (DMatrix::<f64>::identity(nm, nm), None)
    };
    let theta2 = match &dmd_inv {
        Some(inv) => d * inv * d.transpose() * lift.h_u.transpose() * &lift.q_blk * &lift.gamma,
        None => DMatrix::zeros(nm, n),
    };
    let theta3 = &bn_t_ginv * &lift.phi_n0;
    let theta4 = &theta1 * &theta3 + &theta2;
    let theta5 = &lift.gamma - &lift.h_u * &theta4;

    let omega = &s0_sqrt
        * (theta5.transpose() * &lift.q_blk * &lift.h_u - theta4.transpose() * &lift.r_blk)
        * &theta1
        * &bn_t_ginv
        * &sd_sqrt;

    let svd = omega.clone().svd(true, true);
    let u_om = svd.u.as_ref().expect("svd requested u");
    let v_t_om = svd.v_t.as_ref().expect("svd requested v_t");
    let t = -(v_t_om.transpose() * u_om.transpose());
    let nuclear: f64 = svd.singular_values.iter().sum();

    let h = &bn_t_ginv * (&sd_sqrt * &t * &s0_inv_sqrt - &lift.phi_n0);
    let z = match &dmd_inv {
        Some(inv) => {
            -(inv * d.transpose()
                * (&m_mat * &h + lift.h_u.transpose() * &lift.q_blk * &lift.gamma))
        }
        None => DMatrix::zeros(0, n),
    };
    let l = &h + d * &z;

    // Closed-form optimum: constant term minus twice the nuclear norm.
    let zscript = &bn_t_ginv * sigmad * &g_inv * &lift.b_n;
    let term_r = (&lift.r_blk
        * (&theta1 * &zscript * theta1.transpose() + &theta4 * sigma0 * theta4.transpose()))
        .trace();
    let term_q = (&lift.q_blk
        * (&lift.h_u * &theta1 * &zscript * theta1.transpose() * lift.h_u.transpose()
            + &theta5 * sigma0 * theta5.transpose()))
        .trace();
    let cost = term_r + term_q - 2.0 * nuclear;

    Ok(CovSteeringSolution { l, t, z, cost })
}

/// Pairwise optimal steering cost between two Gaussians and its law.
pub fn pair_cost(
    lift: &LiftedMatrices,
    d: &DMatrix<f64>,
    g0: &Gaussian,
    gd: &Gaussian,
) -> Result<(f64, SteeringLaw)> {
    let mean = solve_mean(lift, g0.mean(), gd.mean())?;
    let cov = solve_cov(lift, d, g0.cov(), gd.cov())?;
    Ok((
        mean.cost + cov.cost,
        SteeringLaw::new(mean.u_bar, cov.l),
    ))
}
