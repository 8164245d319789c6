//! Cross-checks of the closed-form solvers against independent oracles
//! from the testutil crate: a KKT linear-system solve for the mean
//! problem, direct objective evaluation and random feasible competitors
//! for the covariance problem, brute-force vertex enumeration for the
//! transportation LP, and a step-by-step rollout of the raw recursion.

use gmm_steering::{
    null_basis, rollout, solve_cov, solve_mean, solve_transport, LtvSystem, QuadraticCost,
};
use gmm_steering_testutil as oracle;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Random controllable instance with per-step cost data.
fn random_instance<R: Rng>(
    rng: &mut R,
    n: usize,
    m: usize,
    horizon: usize,
) -> (LtvSystem, QuadraticCost) {
    assert!(horizon * m >= n, "instance cannot be controllable");
    loop {
        let a_seq: Vec<DMatrix<f64>> =
            (0..horizon).map(|_| oracle::random_matrix(rng, n, n)).collect();
        let b_seq: Vec<DMatrix<f64>> =
            (0..horizon).map(|_| oracle::random_matrix(rng, n, m)).collect();
        let sys = LtvSystem::new(a_seq, b_seq).unwrap();
        if !sys.is_controllable(1e-9) {
            continue;
        }
        let q_seq: Vec<DMatrix<f64>> =
            (0..=horizon).map(|_| oracle::random_psd(rng, n)).collect();
        let r_seq: Vec<DMatrix<f64>> =
            (0..horizon).map(|_| oracle::random_spd(rng, m, 0.1)).collect();
        let x_ref: Vec<DVector<f64>> =
            (0..=horizon).map(|_| oracle::random_vector(rng, n)).collect();
        let cost = QuadraticCost::new(q_seq, r_seq, x_ref).unwrap();
        return (sys, cost);
    }
}

fn random_dims<R: Rng>(rng: &mut R) -> (usize, usize, usize) {
    loop {
        let n = rng.random_range(1..=4usize);
        let m = rng.random_range(1..=3usize);
        let horizon = rng.random_range(1..=10usize);
        if horizon * m >= n {
            return (n, m, horizon);
        }
    }
}

#[test]
fn rollout_matches_step_oracle() {
    let mut rng = oracle::rng(11);
    for _ in 0..30 {
        let (n, m, horizon) = random_dims(&mut rng);
        let (sys, _) = random_instance(&mut rng, n, m, horizon);
        let x0 = oracle::random_vector(&mut rng, n);
        let u = oracle::random_vector(&mut rng, horizon * m);
        let traj = rollout(&sys, &x0, &u).unwrap();
        let a_seq: Vec<DMatrix<f64>> = (0..horizon).map(|k| sys.a(k).clone()).collect();
        let b_seq: Vec<DMatrix<f64>> = (0..horizon).map(|k| sys.b(k).clone()).collect();
        let stacked = oracle::rollout_stacked(&a_seq, &b_seq, &x0, &u);
        for k in 0..=horizon {
            let expect = stacked.rows(k * n, n).into_owned();
            assert!((&traj.states[k] - &expect).amax() < 1e-10);
        }
    }
}

#[test]
fn null_basis_postconditions() {
    let mut rng = oracle::rng(12);
    for _ in 0..30 {
        let (n, m, horizon) = random_dims(&mut rng);
        let (sys, cost) = random_instance(&mut rng, n, m, horizon);
        let lift = sys.lift(&cost).unwrap();
        let d = null_basis(&lift.b_n, 1e-9).unwrap();
        let kd = horizon * m - n;
        assert_eq!(d.shape(), (horizon * m, kd));
        if kd > 0 {
            let gram = d.transpose() * &d;
            assert!((gram - DMatrix::identity(kd, kd)).amax() < 1e-10);
            assert!((&lift.b_n * &d).amax() < 1e-8);
        }
    }
}

#[test]
fn mean_solver_agrees_with_kkt_oracle() {
    let mut rng = oracle::rng(13);
    for _ in 0..30 {
        let (n, m, horizon) = random_dims(&mut rng);
        let (sys, cost) = random_instance(&mut rng, n, m, horizon);
        let lift = sys.lift(&cost).unwrap();
        let mu0 = oracle::random_vector(&mut rng, n);
        let mud = oracle::random_vector(&mut rng, n);
        let sol = solve_mean(&lift, &mu0, &mud).unwrap();

        let m_mat = lift.cost_hessian();
        let hqy = lift.h_u.transpose()
            * &lift.q_blk
            * (&lift.gamma * &mu0 - &lift.x_ref_stacked);
        let rhs = &mud - &lift.phi_n0 * &mu0;
        let kkt = oracle::kkt_solve_mean(&m_mat, &lift.b_n, &hqy, &rhs);

        let rel = (&sol.u_bar - &kkt.u_bar).norm() / (1.0 + kkt.u_bar.norm());
        assert!(rel < 1e-8, "input stack mismatch: {rel}");
        let oracle_cost = oracle::eval_mean_objective(
            &lift.r_blk,
            &lift.q_blk,
            &lift.gamma,
            &lift.h_u,
            &lift.x_ref_stacked,
            &mu0,
            &kkt.u_bar,
        );
        assert!((sol.cost - oracle_cost).abs() <= 1e-8 * (1.0 + oracle_cost.abs()));
        assert!((&lift.b_n * &sol.u_bar - &rhs).norm() <= 1e-8 * (1.0 + rhs.norm()));
    }
}

#[test]
fn cov_solver_feasible_and_unbeaten() {
    let mut rng = oracle::rng(14);
    for _ in 0..30 {
        let (n, m, horizon) = random_dims(&mut rng);
        let (sys, cost) = random_instance(&mut rng, n, m, horizon);
        let lift = sys.lift(&cost).unwrap();
        let d = null_basis(&lift.b_n, 1e-9).unwrap();
        let sigma0 = oracle::random_spd(&mut rng, n, 0.1);
        let sigmad = oracle::random_spd(&mut rng, n, 0.1);
        let sol = solve_cov(&lift, &d, &sigma0, &sigmad).unwrap();

        // Terminal covariance constraint.
        let h_cl = &lift.phi_n0 + &lift.b_n * &sol.l;
        let reached = &h_cl * &sigma0 * h_cl.transpose();
        assert!((&reached - &sigmad).norm() <= 1e-8 * (1.0 + sigmad.norm()));

        // Reported optimum equals the direct objective at the returned gain.
        let direct = oracle::eval_cov_objective(
            &lift.r_blk,
            &lift.q_blk,
            &lift.gamma,
            &lift.h_u,
            &sigma0,
            &sol.l,
        );
        assert!((sol.cost - direct).abs() <= 1e-8 * (1.0 + direct.abs()));

        // No feasible competitor does better.
        for _ in 0..20 {
            let t_orth = oracle::random_orthogonal(&mut rng, n);
            let z = oracle::random_matrix(&mut rng, d.ncols(), n);
            let competitor = oracle::feasible_cov_gain(
                &lift.b_n,
                &lift.phi_n0,
                &d,
                &sigma0,
                &sigmad,
                &t_orth,
                &z,
            );
            let c = oracle::eval_cov_objective(
                &lift.r_blk,
                &lift.q_blk,
                &lift.gamma,
                &lift.h_u,
                &sigma0,
                &competitor,
            );
            assert!(c >= sol.cost - 1e-8 * (1.0 + sol.cost.abs()));
        }
    }
}

#[test]
fn transport_agrees_with_bruteforce() {
    let mut rng = oracle::rng(15);
    for _ in 0..40 {
        let r = rng.random_range(1..=4usize);
        let t = rng.random_range(1..=4usize);
        let c = DMatrix::from_fn(r, t, |_, _| rng.random::<f64>());
        let p0 = oracle::random_simplex(&mut rng, r);
        let pd = oracle::random_simplex(&mut rng, t);
        let plan = solve_transport(&c, &p0, &pd).unwrap();
        let best = oracle::transport_bruteforce(&c, &p0, &pd);
        assert!((plan.objective - best).abs() < 1e-9, "{} vs {best}", plan.objective);
        for i in 0..r {
            let row: f64 = plan.tilde_lambda.row(i).iter().sum();
            assert!((row - p0[i]).abs() < 1e-9);
        }
        for j in 0..t {
            let col: f64 = plan.tilde_lambda.column(j).iter().sum();
            assert!((col - pd[j]).abs() < 1e-9);
        }
    }
}
