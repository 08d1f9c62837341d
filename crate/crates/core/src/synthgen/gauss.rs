//! Small numeric helpers for the generator: standard normal sampling and
//! CDF, a dense Cholesky factorization for the latent correlation matrix,
//! and a Poisson quantile for count marginals.

use rand::Rng;

/// Box-Muller draw; two uniforms per normal keeps the stream layout simple
/// and deterministic.
pub fn std_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Standard normal CDF via the Abramowitz-Stegun 7.1.26 erf approximation
/// (absolute error < 1.5e-7, far below the generator's calibration slack).
pub fn normal_cdf(z: f64) -> f64 {
    let x = z / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.3275911 * x.abs());
    let poly = t
        * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let erf = 1.0 - poly * (-x * x).exp();
    let erf = if x >= 0.0 { erf } else { -erf };
    0.5 * (1.0 + erf)
}

/// Lower-triangular Cholesky factor of a symmetric matrix given in row-major
/// order; `None` when the matrix is not positive definite.
pub fn cholesky(matrix: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = matrix[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Smallest k with P(Poisson(lambda) <= k) >= u, capped.
pub fn poisson_quantile(u: f64, lambda: f64, cap: u32) -> u32 {
    let mut pmf = (-lambda).exp();
    let mut cdf = pmf;
    let mut k = 0u32;
    while cdf < u && k < cap {
        k += 1;
        pmf *= lambda / f64::from(k);
        cdf += pmf;
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_points() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-7);
        assert!((normal_cdf(1.96) - 0.9750).abs() < 1e-4);
        assert!((normal_cdf(-1.0) - 0.158655).abs() < 1e-5);
    }

    #[test]
    fn cholesky_reconstructs_identity_and_rejects_indefinite() {
        let eye = vec![1.0, 0.0, 0.0, 1.0];
        let l = cholesky(&eye, 2).unwrap();
        assert_eq!(l, eye);
        let bad = vec![1.0, 2.0, 2.0, 1.0]; // correlation > 1 equivalent
        assert!(cholesky(&bad, 2).is_none());
    }

    #[test]
    fn poisson_quantile_is_monotone_in_u() {
        let a = poisson_quantile(0.1, 1.5, 10);
        let b = poisson_quantile(0.5, 1.5, 10);
        let c = poisson_quantile(0.95, 1.5, 10);
        assert!(a <= b && b <= c);
        assert_eq!(poisson_quantile(0.0, 1.5, 10), 0);
    }

    #[test]
    fn std_normal_moments_are_sane() {
        let mut rng = crate::seed::rng_for(1, "gauss-test", 0);
        let n = 20_000;
        let draws: Vec<f64> = (0..n).map(|_| std_normal(&mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.03, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }
}
