//! Gaussian and Gaussian-mixture types: density evaluation, sampling, and
//! expectation-maximization fitting.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, SteeringError};
use crate::linalg;

/// Covariance floor added in every EM M-step.
const COV_FLOOR: f64 = 1e-6;

/// A multivariate Gaussian with positive-definite covariance.
#[derive(Debug, Clone)]
pub struct Gaussian {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    // Cached factorization for pdf evaluation and sampling.
    chol_lower: DMatrix<f64>,
    log_norm_const: f64,
}

impl Gaussian {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(SteeringError::InvalidArgument(format!(
                "covariance must be {n}x{n}"
            )));
        }
        if (&cov - cov.transpose()).amax() > 1e-12 * (1.0 + cov.amax()) {
            return Err(SteeringError::InvalidArgument(
                "covariance must be symmetric".into(),
            ));
        }
        let sym = linalg::symmetrize(&cov);
        let chol = sym.clone().cholesky().ok_or_else(|| {
            SteeringError::InvalidArgument("covariance must be positive definite".into())
        })?;
        let lower = chol.l();
        let log_det: f64 = lower.diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let log_norm_const =
            -0.5 * (n as f64) * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det;
        Ok(Self { mean, cov: sym, chol_lower: lower, log_norm_const })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn log_pdf(&self, x: &DVector<f64>) -> f64 {
        let diff = x - &self.mean;
        // Solve L y = diff; the quadratic form is ‖y‖².
        let y = self
            .chol_lower
            .clone()
            .solve_lower_triangular(&diff)
            .expect("cholesky factor is nonsingular");
        self.log_norm_const - 0.5 * y.norm_squared()
    }

    pub fn pdf(&self, x: &DVector<f64>) -> f64 {
        self.log_pdf(x).exp()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| StandardNormal.sample(rng));
        &self.mean + &self.chol_lower * z
    }
}

/// Finite Gaussian mixture with simplex weights.
#[derive(Debug, Clone)]
pub struct Gmm {
    weights: Vec<f64>,
    components: Vec<Gaussian>,
}

impl Gmm {
    pub fn new(weights: Vec<f64>, components: Vec<Gaussian>) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(SteeringError::InvalidArgument(
                "weights and components must be nonempty and equal length".into(),
            ));
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(SteeringError::InvalidArgument(
                "mixture weights must be nonnegative".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(SteeringError::InvalidArgument(format!(
                "mixture weights must sum to 1, got {sum}"
            )));
        }
        let n = components[0].dim();
        if components.iter().any(|c| c.dim() != n) {
            return Err(SteeringError::InvalidArgument(
                "all components must share a dimension".into(),
            ));
        }
        Ok(Self { weights, components })
    }

    pub fn single(g: Gaussian) -> Self {
        Self { weights: vec![1.0], components: vec![g] }
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[Gaussian] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &Gaussian {
        &self.components[i]
    }

    pub fn pdf(&self, x: &DVector<f64>) -> f64 {
        self.log_pdf(x).exp()
    }

    pub fn log_pdf(&self, x: &DVector<f64>) -> f64 {
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| {
                if *w > 0.0 {
                    w.ln() + c.log_pdf(x)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        linalg::log_sum_exp(&terms)
    }

    /// Log responsibilities: log posterior over components given x.
    pub fn log_responsibilities(&self, x: &DVector<f64>) -> Vec<f64> {
        let mut terms: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| {
                if *w > 0.0 {
                    w.ln() + c.log_pdf(x)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let norm = linalg::log_sum_exp(&terms);
        for t in terms.iter_mut() {
            *t -= norm;
        }
        terms
    }

    /// Mean of the mixture: Σ w_i μ_i.
    pub fn mixture_mean(&self) -> DVector<f64> {
        let mut mu = DVector::zeros(self.dim());
        for (w, c) in self.weights.iter().zip(&self.components) {
            mu += c.mean() * *w;
        }
        mu
    }

    /// Covariance of the mixture: Σ w_i (Σ_i + μ_iμ_iᵀ) − μμᵀ.
    pub fn mixture_cov(&self) -> DMatrix<f64> {
        let mu = self.mixture_mean();
        let mut cov = DMatrix::zeros(self.dim(), self.dim());
        for (w, c) in self.weights.iter().zip(&self.components) {
            cov += (c.cov() + c.mean() * c.mean().transpose()) * *w;
        }
        cov - &mu * mu.transpose()
    }

    /// Draw a component index from the weights using inverse-CDF.
    pub fn sample_component<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        self.weights.len() - 1
    }

    /// Deterministic sampling given a seed; returns samples with their
    /// component labels.
    pub fn sample(&self, count: usize, seed: u64) -> (Vec<DVector<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut samples = Vec::with_capacity(count);
        let mut labels = Vec::with_capacity(count);
        for _ in 0..count {
            let i = self.sample_component(&mut rng);
            samples.push(self.components[i].sample(&mut rng));
            labels.push(i);
        }
        (samples, labels)
    }
}

/// Sum of log mixture densities over a sample set.
pub fn log_likelihood(gmm: &Gmm, samples: &[DVector<f64>]) -> f64 {
    samples.iter().map(|x| gmm.log_pdf(x)).sum()
}

/// Fit a `k`-component GMM to samples by expectation-maximization.
///
/// Initialization is a k-means++ style seeding driven by `seed`;
/// responsibilities are evaluated in the log domain and every M-step adds a
/// small diagonal floor so degenerate clusters stay positive definite.
pub fn em_fit(
    samples: &[DVector<f64>],
    k: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<Gmm> {
    em_fit_with_trace(samples, k, seed, max_iters, tol).map(|(g, _)| g)
}

/// Like [`em_fit`], additionally returning the per-iteration log-likelihood
/// sequence (non-decreasing up to floating-point slack).
pub fn em_fit_with_trace(
    samples: &[DVector<f64>],
    k: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<(Gmm, Vec<f64>)> {
    if k == 0 {
        return Err(SteeringError::InvalidArgument("component count must be >= 1".into()));
    }
    if samples.len() < k {
        return Err(SteeringError::InvalidArgument(format!(
            "need at least {k} samples, got {}",
            samples.len()
        )));
    }
    let n = samples[0].len();
    if samples.iter().any(|s| s.len() != n) {
        return Err(SteeringError::InvalidArgument("samples must share a dimension".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = kmeans_pp_centers(samples, k, &mut rng);

    // Shared initial covariance: overall sample scatter plus the floor.
    let scatter = sample_covariance(samples) + DMatrix::identity(n, n) * COV_FLOOR;
    let mut weights = vec![1.0 / k as f64; k];
    let mut components: Vec<Gaussian> = centers
        .into_iter()
        .map(|c| Gaussian::new(c, scatter.clone()))
        .collect::<Result<_>>()?;

    let mut trace = Vec::new();
    let mut prev_ll = f64::NEG_INFINITY;
    for _ in 0..max_iters {
        // E-step in the log domain.
        let mut resp = vec![vec![0.0; samples.len()]; k];
        let mut ll = 0.0;
        for (s_idx, x) in samples.iter().enumerate() {
            let terms: Vec<f64> = (0..k)
                .map(|i| {
                    if weights[i] > 0.0 {
                        weights[i].ln() + components[i].log_pdf(x)
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect();
            let norm = linalg::log_sum_exp(&terms);
            ll += norm;
            for i in 0..k {
                resp[i][s_idx] = (terms[i] - norm).exp();
            }
        }
        trace.push(ll);

        // M-step.
        for i in 0..k {
            let nk: f64 = resp[i].iter().sum();
            if nk <= 0.0 {
                // Empty cluster: keep the previous parameters.
                weights[i] = 0.0;
                continue;
            }
            let mut mu = DVector::zeros(n);
            for (r, x) in resp[i].iter().zip(samples) {
                mu += x * *r;
            }
            mu /= nk;
            let mut cov = DMatrix::zeros(n, n);
            for (r, x) in resp[i].iter().zip(samples) {
                let d = x - &mu;
                cov += (&d * d.transpose()) * *r;
            }
            cov = cov / nk + DMatrix::identity(n, n) * COV_FLOOR;
            weights[i] = nk / samples.len() as f64;
            components[i] = Gaussian::new(mu, cov)?;
        }
        let wsum: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= wsum;
        }

        if prev_ll.is_finite() && (ll - prev_ll).abs() <= tol * (1.0 + prev_ll.abs()) {
            prev_ll = ll;
            break;
        }
        prev_ll = ll;
    }
    let _ = prev_ll;
    Ok((Gmm::new(weights, components)?, trace))
}

fn sample_covariance(samples: &[DVector<f64>]) -> DMatrix<f64> {
    let n = samples[0].len();
    let count = samples.len() as f64;
    let mut mu = DVector::zeros(n);
    for s in samples {
        mu += s;
    }
    mu /= count;
    let mut cov = DMatrix::zeros(n, n);
    for s in samples {
        let d = s - &mu;
        cov += &d * d.transpose();
    }
    cov / count
}

fn kmeans_pp_centers<R: Rng>(
    samples: &[DVector<f64>],
    k: usize,
    rng: &mut R,
) -> Vec<DVector<f64>> {
    let mut centers = Vec::with_capacity(k);
    let first = rng.random_range(0..samples.len());
    centers.push(samples[first].clone());
    let mut dist2: Vec<f64> = samples
        .iter()
        .map(|s| (s - &centers[0]).norm_squared())
        .collect();
    while centers.len() < k {
        let total: f64 = dist2.iter().sum();
        let next = if total > 0.0 {
            let mut u: f64 = rng.random::<f64>() * total;
            let mut chosen = samples.len() - 1;
            for (i, d) in dist2.iter().enumerate() {
                u -= d;
                if u <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All points coincide with existing centers.
            rng.random_range(0..samples.len())
        };
        centers.push(samples[next].clone());
        for (i, s) in samples.iter().enumerate() {
            let d = (s - &centers[centers.len() - 1]).norm_squared();
            if d < dist2[i] {
                dist2[i] = d;
            }
        }
    }
    centers
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn standard_1d() -> Gaussian {
        Gaussian::new(DVector::zeros(1), DMatrix::identity(1, 1)).unwrap()
    }

    #[test]
    fn pdf_standard_normal_at_origin() {
        let g = standard_1d();
        assert_abs_diff_eq!(g.pdf(&DVector::zeros(1)), 0.3989422804014327, epsilon = 1e-12);
    }

    #[test]
    fn pdf_2d_standard_at_origin() {
        let g = Gaussian::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        assert_abs_diff_eq!(g.pdf(&DVector::zeros(2)), 0.15915494309189535, epsilon = 1e-12);
    }

    #[test]
    fn pdf_shifted_scaled() {
        // N(1, 4) at x = 3: (1/(2√(2π))) e^{−1/2}.
        let g = Gaussian::new(
            DVector::from_element(1, 1.0),
            DMatrix::from_element(1, 1, 4.0),
        )
        .unwrap();
        assert_abs_diff_eq!(
            g.pdf(&DVector::from_element(1, 3.0)),
            0.5 * 0.3989422804014327 * (-0.5_f64).exp(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn gaussian_rejects_singular_cov() {
        assert!(Gaussian::new(DVector::zeros(1), DMatrix::zeros(1, 1)).is_err());
    }

    #[test]
    fn gmm_pdf_single_component() {
        let g = standard_1d();
        let gmm = Gmm::single(g.clone());
        let x = DVector::from_element(1, 0.7);
        assert_abs_diff_eq!(gmm.pdf(&x), g.pdf(&x), epsilon = 1e-15);
    }

    #[test]
    fn gmm_pdf_duplicate_components() {
        let gmm = Gmm::new(vec![0.5, 0.5], vec![standard_1d(), standard_1d()]).unwrap();
        let x = DVector::from_element(1, -1.3);
        assert_abs_diff_eq!(gmm.pdf(&x), standard_1d().pdf(&x), epsilon = 1e-15);
    }

    #[test]
    fn gmm_rejects_bad_weights() {
        assert!(Gmm::new(vec![0.5, 0.4], vec![standard_1d(), standard_1d()]).is_err());
        assert!(Gmm::new(vec![1.5, -0.5], vec![standard_1d(), standard_1d()]).is_err());
    }

    #[test]
    fn sampling_count_zero() {
        let gmm = Gmm::single(standard_1d());
        let (s, l) = gmm.sample(0, 42);
        assert!(s.is_empty() && l.is_empty());
    }

    #[test]
    fn sampling_is_deterministic() {
        let gmm = Gmm::new(vec![0.3, 0.7], vec![standard_1d(), standard_1d()]).unwrap();
        let (a, la) = gmm.sample(100, 7);
        let (b, lb) = gmm.sample(100, 7);
        assert_eq!(la, lb);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn sampling_label_frequencies() {
        let g0 = Gaussian::new(DVector::zeros(1), DMatrix::identity(1, 1)).unwrap();
        let g1 = Gaussian::new(DVector::from_element(1, 5.0), DMatrix::identity(1, 1)).unwrap();
        let gmm = Gmm::new(vec![0.8, 0.2], vec![g0, g1]).unwrap();
        let (_, labels) = gmm.sample(100_000, 3);
        let f0 = labels.iter().filter(|&&l| l == 0).count() as f64 / 100_000.0;
        // 4σ binomial bound.
        assert!((f0 - 0.8).abs() < 0.006, "frequency {f0}");
    }

    #[test]
    fn sampling_mean_of_single_component() {
        let g = Gaussian::new(
            DVector::from_row_slice(&[1.0, -2.0]),
            DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.3]),
        )
        .unwrap();
        let gmm = Gmm::single(g.clone());
        let (samples, _) = gmm.sample(100_000, 11);
        let mut mean = DVector::zeros(2);
        for s in &samples {
            mean += s;
        }
        mean /= samples.len() as f64;
        let bound = 4.0 * (g.cov().trace() / 100_000.0).sqrt();
        assert!((mean - g.mean()).norm() < bound);
    }

    #[test]
    fn log_likelihood_single_point() {
        let gmm = Gmm::single(standard_1d());
        let ll = log_likelihood(&gmm, &[DVector::zeros(1)]);
        assert_abs_diff_eq!(ll, -0.9189385332046727, epsilon = 1e-10);
    }

    #[test]
    fn log_likelihood_permutation_invariant() {
        let g0 = Gaussian::new(DVector::zeros(1), DMatrix::identity(1, 1)).unwrap();
        let g1 = Gaussian::new(DVector::from_element(1, 2.0), DMatrix::from_element(1, 1, 0.5))
            .unwrap();
        let a = Gmm::new(vec![0.3, 0.7], vec![g0.clone(), g1.clone()]).unwrap();
        let b = Gmm::new(vec![0.7, 0.3], vec![g1, g0]).unwrap();
        let samples: Vec<_> = (0..50).map(|i| DVector::from_element(1, i as f64 * 0.1)).collect();
        assert_abs_diff_eq!(
            log_likelihood(&a, &samples),
            log_likelihood(&b, &samples),
            epsilon = 1e-10
        );
    }

    #[test]
    fn log_likelihood_matches_naive_sum() {
        let g0 = Gaussian::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        let g1 = Gaussian::new(
            DVector::from_row_slice(&[1.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.7]),
        )
        .unwrap();
        let gmm = Gmm::new(vec![0.4, 0.6], vec![g0, g1]).unwrap();
        let (samples, _) = gmm.sample(100, 5);
        let naive: f64 = samples.iter().map(|x| gmm.pdf(x).ln()).sum();
        assert_abs_diff_eq!(log_likelihood(&gmm, &samples), naive, epsilon = 1e-9);
    }

    #[test]
    fn em_identical_samples_single_component() {
        let p = DVector::from_row_slice(&[1.0, 2.0]);
        let samples = vec![p.clone(); 20];
        let fit = em_fit(&samples, 1, 0, 100, 1e-6).unwrap();
        assert_abs_diff_eq!(fit.component(0).mean(), &p, epsilon = 1e-12);
        assert_abs_diff_eq!(
            fit.component(0).cov(),
            &(DMatrix::identity(2, 2) * COV_FLOOR),
            epsilon = 1e-12
        );
    }

    #[test]
    fn em_single_component_matches_moments() {
        let g = Gaussian::new(
            DVector::from_row_slice(&[0.5, -0.5]),
            DMatrix::from_row_slice(2, 2, &[0.4, 0.1, 0.1, 0.2]),
        )
        .unwrap();
        let (samples, _) = Gmm::single(g).sample(5000, 9);
        let fit = em_fit(&samples, 1, 0, 100, 1e-8).unwrap();
        // Single-Gaussian EM fixed point: sample mean and covariance (+floor).
        let mut mu = DVector::zeros(2);
        for s in &samples {
            mu += s;
        }
        mu /= samples.len() as f64;
        assert_abs_diff_eq!(fit.component(0).mean(), &mu, epsilon = 1e-9);
        let expected = sample_covariance(&samples) + DMatrix::identity(2, 2) * COV_FLOOR;
        assert_abs_diff_eq!(fit.component(0).cov(), &expected, epsilon = 1e-8);
    }

    #[test]
    fn em_rejects_too_few_samples() {
        let samples = vec![DVector::zeros(1); 2];
        assert!(em_fit(&samples, 3, 0, 10, 1e-6).is_err());
    }
}
