//! Summary statistics and the hypothesis tests used by the experiment suites.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{invalid, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the `n - 1` denominator; 0 for fewer than two values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn sample_std(xs: &[f64]) -> f64 {
    sample_variance(xs).sqrt()
}

/// Standard error of the mean.
pub fn std_err(xs: &[f64]) -> f64 {
    sample_std(xs) / (xs.len() as f64).sqrt()
}

/// Streaming mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
pub struct Running {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Running {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_err(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub dof: f64,
    pub p_value: f64,
}

fn t_cdf(t: f64, dof: f64) -> Result<f64> {
    let dist = StudentsT::new(0.0, 1.0, dof).map_err(|e| invalid(format!("t distribution: {e}")))?;
    Ok(dist.cdf(t))
}

/// One-sided paired test of `H1: mean(a - b) < 0`.
pub fn paired_t_less(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(invalid("paired test needs two equal samples of size >= 2"));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let se = std_err(&diffs);
    let dof = (diffs.len() - 1) as f64;
    if se == 0.0 {
        let m = mean(&diffs);
        let p_value = if m < 0.0 { 0.0 } else { 1.0 };
        return Ok(TTest { t: f64::NAN, dof, p_value });
    }
    let t = mean(&diffs) / se;
    Ok(TTest { t, dof, p_value: t_cdf(t, dof)? })
}

/// Welch's unequal-variance t statistic with Welch-Satterthwaite degrees of freedom.
fn welch(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() < 2 || b.len() < 2 {
        return Err(invalid("Welch test needs samples of size >= 2"));
    }
    let (va, vb) = (sample_variance(a) / a.len() as f64, sample_variance(b) / b.len() as f64);
    let se2 = va + vb;
    if se2 == 0.0 {
        return Err(invalid("Welch test on zero-variance samples"));
    }
    let t = (mean(a) - mean(b)) / se2.sqrt();
    let dof = se2 * se2 / (va * va / (a.len() - 1) as f64 + vb * vb / (b.len() - 1) as f64);
    Ok((t, dof))
}

/// Two-sided Welch test of equal means.
pub fn welch_two_sided(a: &[f64], b: &[f64]) -> Result<TTest> {
    let (t, dof) = welch(a, b)?;
    Ok(TTest { t, dof, p_value: 2.0 * t_cdf(-t.abs(), dof)? })
}

/// One-sided Welch test of `H1: mean(a) < mean(b)`.
pub fn welch_less(a: &[f64], b: &[f64]) -> Result<TTest> {
    let (t, dof) = welch(a, b)?;
    Ok(TTest { t, dof, p_value: t_cdf(t, dof)? })
}

/// Kolmogorov-Smirnov distance between the sample and Uniform(0, 1).
pub fn ks_uniform_statistic(xs: &[f64]) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| ((i as f64 + 1.0) / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at `alpha = 0.01`.
pub fn ks_critical_01(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}

/// Standard error of a binomial proportion estimate with true probability `q`.
pub fn binomial_se(q: f64, n: u64) -> f64 {
    (q * (1.0 - q) / n as f64).sqrt()
}
