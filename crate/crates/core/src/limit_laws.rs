//! Closed-form limiting laws for the top of the spectrum and the
//! inhomogeneous Poisson point-process reference oracle with intensity
//! `alpha / x^{1+alpha}` on the positive half-line.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Frechet limit law `exp(-x^{-alpha})` for the largest normalized
/// eigenvalue / entry magnitude.
#[derive(Clone, Copy, Debug)]
pub struct FrechetLaw<F> {
    alpha: F,
}

impl<F: Real> FrechetLaw<F> {
    pub fn new(alpha: F) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(FrechetLaw { alpha })
    }

    pub fn alpha(&self) -> F {
        self.alpha
    }

    pub fn cdf(&self, x: F) -> F {
        if x <= F::zero() {
            F::zero()
        } else {
            (-x.powf(-self.alpha)).exp()
        }
    }

    /// Density `alpha x^{-alpha-1} exp(-x^{-alpha})` on `x > 0`.
    pub fn pdf(&self, x: F) -> F {
        if x <= F::zero() {
            F::zero()
        } else {
            self.alpha * x.powf(-self.alpha - F::one()) * (-x.powf(-self.alpha)).exp()
        }
    }
}

fn check_alpha<F: Real>(alpha: F) -> Result<()> {
    if !(alpha > F::zero() && alpha < F::of(2.0)) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 2), got {alpha}"
        )));
    }
    Ok(())
}

/// `lim Pr(lambda_1 <= x) = exp(-x^{-alpha})`.
pub fn frechet_cdf<F: Real>(alpha: F, x: F) -> Result<F> {
    Ok(FrechetLaw::new(alpha)?.cdf(x))
}

/// Limit CDF of the k-th largest point: the probability that the Poisson
/// process with intensity `alpha/x^{1+alpha}` has at most `k - 1` points
/// above `x`, i.e. `exp(-x^{-alpha}) * sum_{l=0}^{k-1} x^{-l alpha}/l!`.
///
/// The sum starts at `l = 0` so that `k = 1` reduces to the Frechet CDF.
pub fn order_stat_cdf<F: Real>(alpha: F, k: usize, x: F) -> Result<F> {
    check_alpha(alpha)?;
    if k < 1 {
        return Err(Error::InvalidParameter("k must be >= 1".to_string()));
    }
    if x <= F::zero() {
        return Ok(F::zero());
    }
    let mu = x.powf(-alpha);
    let mut term = F::one();
    let mut sum = F::one();
    for l in 1..k {
        term = term * mu / F::of_usize(l);
        sum += term;
    }
    Ok(((-mu).exp() * sum).min(F::one()))
}

/// Open interval `(c, d)` on the positive half-line, `d` possibly infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval<F> {
    c: F,
    d: F,
}

impl<F: Real> Interval<F> {
    pub fn new(c: F, d: F) -> Result<Self> {
        if !(c > F::zero() && d > c) {
            return Err(Error::InvalidParameter(format!(
                "interval requires 0 < c < d, got ({c}, {d})"
            )));
        }
        Ok(Interval { c, d })
    }

    pub fn lower(&self) -> F {
        self.c
    }

    pub fn upper(&self) -> F {
        self.d
    }

    pub fn contains(&self, x: F) -> bool {
        x > self.c && x < self.d
    }
}

/// Mean count of the limit process on an interval:
/// `integral of alpha/x^{1+alpha}` = `c^{-alpha} - d^{-alpha}`.
pub fn poisson_mean<F: Real>(alpha: F, interval: Interval<F>) -> Result<F> {
    check_alpha(alpha)?;
    let upper_term = if interval.d.is_infinite() {
        F::zero()
    } else {
        interval.d.powf(-alpha)
    };
    Ok(interval.c.powf(-alpha) - upper_term)
}

/// Samples the restriction of the limit process to `(epsilon, inf)`:
/// `N ~ Poisson(epsilon^{-alpha})` points, each `epsilon * U^{-1/alpha}`,
/// returned in descending order.
pub fn sample_poisson_process<F: Real, R: Rng + ?Sized>(
    alpha: F,
    epsilon: F,
    rng: &mut R,
) -> Result<Vec<F>> {
    check_alpha(alpha)?;
    if !(epsilon > F::zero()) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let mean = epsilon.powf(-alpha).to_f64_lossy();
    let count = Poisson::new(mean)
        .map_err(|e| Error::InvalidParameter(format!("bad Poisson mean {mean}: {e}")))?
        .sample(rng) as usize;
    let inv_alpha = alpha.recip();
    let mut points: Vec<F> = (0..count)
        .map(|_| {
            let u: f64 = rng.sample(rand_distr::OpenClosed01);
            epsilon * F::of(u).powf(-inv_alpha)
        })
        .collect();
    points.sort_by(|a, b| b.partial_cmp(a).expect("finite points"));
    Ok(points)
}

/// Semicircle density `sqrt(2 sigma^2 - t^2) / (pi sigma^2)` on
/// `[-sqrt(2) sigma, sqrt(2) sigma]`; the finite-variance contrast baseline.
pub fn semicircle_density<F: Real>(sigma: F, t: F) -> Result<F> {
    if !(sigma > F::zero()) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let two_sigma2 = F::of(2.0) * sigma * sigma;
    let disc = two_sigma2 - t * t;
    if disc <= F::zero() {
        return Ok(F::zero());
    }
    Ok(disc.sqrt() / (F::of(std::f64::consts::PI) * sigma * sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn frechet_cdf_values() {
        let e = std::f64::consts::E;
        assert!((frechet_cdf(1.0, 1.0).unwrap() - 1.0 / e).abs() < 1e-12);
        assert!((frechet_cdf(1.0, 1e12f64).unwrap() - 1.0).abs() < 1e-10);
        assert!((frechet_cdf(0.5, 4.0).unwrap() - (-0.5f64).exp()).abs() < 1e-12);
        assert_eq!(frechet_cdf(1.0, -3.0).unwrap(), 0.0);
        assert!(frechet_cdf(2.0, 1.0).is_err());
    }

    #[test]
    fn order_stat_cdf_values() {
        let e = std::f64::consts::E;
        // k = 1 must reduce to the Frechet CDF.
        assert!((order_stat_cdf(1.0, 1, 1.0).unwrap() - 1.0 / e).abs() < 1e-12);
        assert!((order_stat_cdf(1.0, 2, 1.0).unwrap() - 2.0 / e).abs() < 1e-12);
        let expected = (-0.5f64).exp() * (1.0 + 0.5 + 0.125);
        assert!((order_stat_cdf(1.0, 3, 2.0).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.985612).abs() < 1e-6);
        assert!(order_stat_cdf(1.0, 0, 1.0).is_err());
    }

    #[test]
    fn order_stat_cdf_monotone_in_k() {
        for k in 1..6 {
            for &x in &[0.3, 1.0, 2.5] {
                let lo = order_stat_cdf(1.2, k, x).unwrap();
                let hi = order_stat_cdf(1.2, k + 1, x).unwrap();
                assert!(hi >= lo, "k={k} x={x}");
            }
        }
    }

    #[test]
    fn poisson_mean_values() {
        let i = Interval::<f64>::new(1.0, 2.0).unwrap();
        assert!((poisson_mean(1.0, i).unwrap() - 0.5).abs() < 1e-15);
        let i = Interval::new(1.0, f64::INFINITY).unwrap();
        assert!((poisson_mean(1.0, i).unwrap() - 1.0).abs() < 1e-15);
        let i = Interval::new(4.0, f64::INFINITY).unwrap();
        assert!((poisson_mean(0.5, i).unwrap() - 0.5).abs() < 1e-15);
        assert!(Interval::new(2.0, 1.0).is_err());
        assert!(Interval::<f64>::new(0.0, 1.0).is_err());
    }

    #[test]
    fn frechet_is_exponential_of_tail_mean() {
        // frechet_cdf(alpha, x) = exp(-poisson_mean(alpha, (x, inf))) exactly.
        for &alpha in &[0.5, 1.0, 1.5] {
            for &x in &[0.3, 1.0, 4.0] {
                let mean = poisson_mean(alpha, Interval::new(x, f64::INFINITY).unwrap()).unwrap();
                let cdf = frechet_cdf(alpha, x).unwrap();
                assert_eq!(cdf, (-mean).exp());
            }
        }
    }

    #[test]
    fn process_sample_mean_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000usize;
        let total: usize = (0..draws)
            .map(|_| sample_poisson_process(1.0, 1.0, &mut rng).unwrap().len())
            .sum();
        let mean = total as f64 / draws as f64;
        assert!((mean - 1.0).abs() <= 0.01, "mean count {mean}");
    }

    #[test]
    fn process_max_matches_frechet() {
        // P(max point <= 2) with epsilon = 0.1 should match frechet_cdf(1, 2);
        // points below epsilon cannot affect a max above epsilon.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let draws = 100_000usize;
        let hits = (0..draws)
            .filter(|_| {
                let pts = sample_poisson_process(1.0, 0.1, &mut rng).unwrap();
                pts.first().map_or(true, |&m| m <= 2.0)
            })
            .count();
        let frac = hits as f64 / draws as f64;
        let expected = frechet_cdf(1.0, 2.0).unwrap();
        assert!((frac - expected).abs() <= 0.005, "{frac} vs {expected}");
    }

    #[test]
    fn process_counts_uncorrelated() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let draws = 100_000usize;
        let i1 = Interval::new(1.0, 2.0).unwrap();
        let i2 = Interval::new(2.0, 3.0).unwrap();
        let mut xs = Vec::with_capacity(draws);
        let mut ys = Vec::with_capacity(draws);
        for _ in 0..draws {
            let pts = sample_poisson_process(1.0, 0.5, &mut rng).unwrap();
            xs.push(pts.iter().filter(|&&p| i1.contains(p)).count() as f64);
            ys.push(pts.iter().filter(|&&p| i2.contains(p)).count() as f64);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let mx = mean(&xs);
        let my = mean(&ys);
        let cov: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - mx) * (y - my))
            .sum::<f64>()
            / draws as f64;
        let vx = xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>() / draws as f64;
        let vy = ys.iter().map(|y| (y - my).powi(2)).sum::<f64>() / draws as f64;
        let corr = cov / (vx * vy).sqrt();
        assert!(corr.abs() <= 0.01, "correlation {corr}");
    }

    #[test]
    fn semicircle_values_and_mass() {
        assert!((semicircle_density(1.0, 0.0).unwrap() - 2f64.sqrt() / std::f64::consts::PI).abs()
            < 1e-12);
        assert_eq!(semicircle_density(1.0, 2f64.sqrt()).unwrap(), 0.0);
        // Quadrature with the substitution t = sqrt(2) sigma sin(theta), which
        // removes the square-root edge and lets Simpson reach 1e-8.
        let sigma = 1.3f64;
        let edge = 2f64.sqrt() * sigma;
        let m = 4_000usize;
        let h = std::f64::consts::PI / m as f64;
        let mut integral = 0.0;
        for i in 0..=m {
            let theta = -std::f64::consts::FRAC_PI_2 + i as f64 * h;
            let t = edge * theta.sin();
            let w = if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            integral += w * semicircle_density(sigma, t).unwrap() * edge * theta.cos();
        }
        integral *= h / 3.0;
        assert!((integral - 1.0).abs() <= 1e-8, "mass {integral}");
    }
}
