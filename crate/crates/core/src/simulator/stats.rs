//! Moments, the Poisson-difference law and distances between distributions.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub se_mean: f64,
    /// Standard error of the sample variance, from the fourth central moment.
    pub se_variance: f64,
}

pub fn moments(xs: &[f64]) -> Moments {
    let n = xs.len();
    if n == 0 {
        return Moments {
            n,
            mean: f64::NAN,
            variance: f64::NAN,
            se_mean: f64::NAN,
            se_variance: f64::NAN,
        };
    }
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / nf;
    let variance = if n > 1 { m2 * nf / (nf - 1.0) } else { 0.0 };
    Moments {
        n,
        mean,
        variance,
        se_mean: (variance / nf).sqrt(),
        se_variance: ((m4 - m2 * m2).max(0.0) / nf).sqrt(),
    }
}

/// `|value - target| <= k * se`.
pub fn within_band(value: f64, target: f64, se: f64, k: f64) -> bool {
    (value - target).abs() <= k * se
}

fn poisson(mean: f64) -> Result<Option<Poisson>> {
    if mean == 0.0 {
        return Ok(None);
    }
    Poisson::new(mean)
        .map(Some)
        .map_err(|e| Error::param("poisson mean", e.to_string()))
}

fn pois_pmf(d: &Option<Poisson>, k: i64) -> f64 {
    match d {
        None => (k == 0) as u8 as f64,
        Some(d) => {
            if k < 0 {
                0.0
            } else {
                d.pmf(k as u64)
            }
        }
    }
}

/// Law of `N_1 - N_2` for independent Poisson variables with means `a`, `b`,
/// on `lo..=hi`, by direct convolution.
pub fn poisson_difference_pmf(a: f64, b: f64, lo: i64, hi: i64) -> Result<Vec<f64>> {
    if !(a >= 0.0 && b >= 0.0) {
        return Err(Error::param("means", format!("must be nonnegative, got {a}, {b}")));
    }
    let (pa, pb) = (poisson(a)?, poisson(b)?);
    // terms of N_2 beyond b + 40 sqrt(b) + 60 are far below double precision
    let n_max = (b + 40.0 * b.sqrt() + 60.0).ceil() as i64;
    Ok((lo..=hi)
        .map(|k| (0..=n_max).map(|n| pois_pmf(&pa, n + k) * pois_pmf(&pb, n)).sum())
        .collect())
}

/// Total variation distance between an empirical sample and a pmf given on
/// `lo..=hi`; predicted mass outside the range counts fully.
pub fn tv_distance(samples: &[i64], pmf: &[f64], lo: i64) -> f64 {
    let hi = lo + pmf.len() as i64 - 1;
    let n = samples.len() as f64;
    let mut counts = vec![0usize; pmf.len()];
    let mut outside = 0usize;
    for &s in samples {
        if s < lo || s > hi {
            outside += 1;
        } else {
            counts[(s - lo) as usize] += 1;
        }
    }
    let covered: f64 = pmf.iter().sum();
    let inside: f64 = counts.iter().zip(pmf).map(|(&c, &p)| (c as f64 / n - p).abs()).sum();
    0.5 * (inside + outside as f64 / n + (1.0 - covered).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson test of counts against `pmf` on `lo..=hi`, merging neighbouring
/// cells until each expects at least 5 observations; tails form one cell each.
pub fn chi_square(samples: &[i64], pmf: &[f64], lo: i64) -> Result<ChiSquare> {
    let n = samples.len() as f64;
    let hi = lo + pmf.len() as i64 - 1;
    let mut counts = vec![0.0; pmf.len()];
    let (mut below, mut above) = (0.0, 0.0);
    for &s in samples {
        if s < lo {
            below += 1.0;
        } else if s > hi {
            above += 1.0;
        } else {
            counts[(s - lo) as usize] += 1.0;
        }
    }
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (below, 0.0);
    let covered: f64 = pmf.iter().sum();
    let tail = (1.0 - covered).max(0.0) / 2.0;
    exp += tail * n;
    for (c, p) in counts.iter().zip(pmf) {
        obs += c;
        exp += p * n;
        if exp >= 5.0 {
            cells.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    obs += above;
    exp += tail * n;
    match cells.last_mut() {
        Some(last) if exp < 5.0 => {
            last.0 += obs;
            last.1 += exp;
        }
        _ => cells.push((obs, exp)),
    }
    if cells.len() < 2 {
        return Err(Error::Degenerate("fewer than two chi-square cells".into()));
    }
    let statistic: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = cells.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::Degenerate(e.to_string()))?;
    Ok(ChiSquare {
        statistic,
        dof,
        p_value: 1.0 - dist.cdf(statistic),
    })
}
