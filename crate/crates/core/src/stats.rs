//! Small statistics toolkit: pairwise reductions, log-space means,
//! the two-sample Kolmogorov-Smirnov test and weighted line fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pairwise (tree) sum. The association order depends only on the length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// `ln Σ exp(x_i)` reduced as a balanced tree; `-∞` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    fn combine(a: f64, b: f64) -> f64 {
        let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
        if lo == f64::NEG_INFINITY {
            hi
        } else {
            hi + (lo - hi).exp().ln_1p()
        }
    }
    match xs.len() {
        0 => f64::NEG_INFINITY,
        1 => xs[0],
        n => {
            let (a, b) = xs.split_at(n / 2);
            combine(log_sum_exp(a), log_sum_exp(b))
        }
    }
}

/// Summary of the sample mean of `exp(ℓ_i)` computed without leaving log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogMean {
    /// `ln( (1/n) Σ exp(ℓ_i) )`.
    pub log_mean: f64,
    /// Standard error of the mean, on the natural scale.
    pub stderr: f64,
    /// Delta-method standard error of `log_mean`.
    pub log_stderr: f64,
    /// `(Σ w)² / Σ w²`.
    pub ess: f64,
}

pub fn log_mean_exp(logs: &[f64]) -> Result<LogMean> {
    let n = logs.len();
    if n == 0 {
        return Err(Error::invalid("log_mean_exp of an empty sample"));
    }
    if logs.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
        return Err(Error::invalid("log-weights contain NaN or +inf"));
    }
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return Err(Error::invalid("every weight is zero"));
    }
    let scaled: Vec<f64> = logs.iter().map(|l| (l - peak).exp()).collect();
    let total = pairwise_sum(&scaled);
    let mean = total / n as f64;
    let sq: Vec<f64> = scaled.iter().map(|w| w * w).collect();
    let sum_sq = pairwise_sum(&sq);
    let dev: Vec<f64> = scaled.iter().map(|w| (w - mean) * (w - mean)).collect();
    let var = if n > 1 {
        pairwise_sum(&dev) / (n - 1) as f64
    } else {
        0.0
    };
    let rel = (var / n as f64).sqrt() / mean;
    let log_mean = peak + mean.ln();
    Ok(LogMean {
        log_mean,
        stderr: rel * log_mean.exp(),
        log_stderr: rel,
        ess: total * total / sum_sq,
    })
}

/// Mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value
/// (Stephens' small-sample correction).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = if x[i] <= y[j] { x[i] } else { y[j] };
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    KsResult {
        statistic: d,
        p_value: kolmogorov_q(lambda),
    }
}

/// Survival function of the Kolmogorov distribution.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Weighted least squares `y ≈ intercept + slope·x`; `r2` is the weighted
/// coefficient of determination.
pub fn weighted_line_fit(x: &[f64], y: &[f64], w: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() != w.len() || x.len() < 2 {
        return Err(Error::IllConditioned(format!(
            "line fit needs ≥ 2 matching points, got {}/{}/{}",
            x.len(),
            y.len(),
            w.len()
        )));
    }
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        let dx = x[i] - xm;
        let dy = y[i] - ym;
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * dy;
        syy += w[i] * dy * dy;
    }
    if !(sxx > 0.0) {
        return Err(Error::IllConditioned("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LineFit {
        slope,
        intercept,
        r2,
    })
}
