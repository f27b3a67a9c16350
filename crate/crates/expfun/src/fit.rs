//! Goodness of fit of simulated functionals against the reciprocal-gamma
//! limit law: if I is the Brownian exponential functional with drift nu,
//! then 2/I is gamma distributed with shape 2 nu and rate 1.

use crate::error::{Error, Result};
use crate::moments::{bm_moment, MomentSign};
use crate::numeric::mean_stderr;
use serde::Serialize;
use statrs::function::gamma::gamma_lr;

/// One standardized moment comparison: z = (sample mean of y^(+-p) minus
/// the reference moment) / standard error.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MomentZScore {
    pub sign: MomentSign,
    pub p: u32,
    pub sample_mean: f64,
    pub reference: f64,
    pub stderr: f64,
    pub z: f64,
}

/// Kolmogorov-Smirnov comparison of 2/Y against Gamma(2 nu, 1) plus the
/// first three positive and negative moment z-scores (entries whose
/// reference moment diverges are omitted).
#[derive(Clone, Debug, Serialize)]
pub struct GammaReport {
    pub n: usize,
    pub nu: f64,
    pub ks: f64,
    pub ks_critical_1pct: f64,
    pub moment_zscores: Vec<MomentZScore>,
}

/// CDF of Gamma(shape, rate 1) via the regularized lower incomplete gamma.
pub fn gamma_cdf(shape: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        gamma_lr(shape, x)
    }
}

/// Two-sided KS statistic of the values against a supplied CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n);
        d = d.max((i + 1) as f64 / n - f);
    }
    d
}

pub fn gamma_compare(values: &[f64], nu: f64) -> Result<GammaReport> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "drift nu = {nu} must be positive"
        )));
    }
    if values.len() < 1000 {
        return Err(Error::InsufficientData(format!(
            "{} samples; the KS comparison needs at least 1000",
            values.len()
        )));
    }
    if values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument(
            "functional samples must be positive".into(),
        ));
    }
    let shape = 2.0 * nu;
    let transformed: Vec<f64> = values.iter().map(|&v| 2.0 / v).collect();
    let ks = ks_statistic(&transformed, |x| gamma_cdf(shape, x));
    let mut moment_zscores = Vec::new();
    for sign in [MomentSign::Positive, MomentSign::Negative] {
        for p in 1..=3u32 {
            let Ok(reference) = bm_moment(nu, p, sign) else {
                continue;
            };
            let powers: Vec<f64> = values
                .iter()
                .map(|&v| match sign {
                    MomentSign::Positive => v.powi(p as i32),
                    MomentSign::Negative => v.powi(-(p as i32)),
                })
                .collect();
            let (sample_mean, stderr) = mean_stderr(&powers);
            moment_zscores.push(MomentZScore {
                sign,
                p,
                sample_mean,
                reference,
                stderr,
                z: (sample_mean - reference) / stderr,
            });
        }
    }
    Ok(GammaReport {
        n: values.len(),
        nu,
        ks,
        ks_critical_1pct: 1.63 / (values.len() as f64).sqrt(),
        moment_zscores,
    })
}
