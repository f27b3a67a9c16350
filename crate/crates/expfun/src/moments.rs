//! Exact and asymptotic moments of the series: the binomial recursion for
//! E(Y^p), its lattice variant, the closed-form limits from the Brownian
//! functional, and Monte Carlo estimators for the negative moments.

use crate::error::{Error, Result};
use crate::law::StepLaw;
use crate::numeric::{binomial, mean_stderr, CompensatedSum};
use crate::rng::RngStream;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

/// Moments mu_k = E(xi^k) and E(Y^p) with per-entry finiteness (None marks a
/// provably infinite moment, which is a value here, not an error).
/// `scale` is 1 for the plain series and 4^-m for the level-m lattice
/// functional.
#[derive(Clone, Debug, Serialize)]
pub struct MomentTable {
    pub law: StepLaw,
    pub p_max: usize,
    pub mu: Vec<f64>,
    pub ey: Vec<Option<f64>>,
    pub scale: f64,
}

/// E(Y^p) for p = 0..=p_max via the recursion
/// E(Y^p) = (1/(1-mu_p)) sum_{k<p} C(p,k) mu_k E(Y^k).
/// An entry is finite iff mu_p < 1; once some mu_p >= 1, every higher entry
/// is infinite too (mu is log-convex with mu_0 = 1).
pub fn positive_moments(law: &StepLaw, p_max: usize) -> MomentTable {
    let mut mu = Vec::with_capacity(p_max + 1);
    for k in 0..=p_max {
        mu.push(if k == 0 { 1.0 } else { law.mu(k as i64) });
    }
    let mut ey: Vec<Option<f64>> = vec![Some(1.0)];
    let mut diverged = false;
    for p in 1..=p_max {
        if diverged || mu[p] >= 1.0 {
            diverged = true;
            ey.push(None);
            continue;
        }
        let mut acc = CompensatedSum::new();
        for k in 0..p {
            // All lower entries are finite here, else mu monotonicity would
            // already have set `diverged`.
            acc.add(binomial(p as u64, k as u64) * mu[k] * ey[k].expect("lower moment finite"));
        }
        ey.push(Some(acc.value() / (1.0 - mu[p])));
    }
    MomentTable {
        law: law.clone(),
        p_max,
        mu,
        ey,
        scale: 1.0,
    }
}

/// 1 - mu_{mk} for the level-m lattice law, evaluated in a form that keeps
/// full precision even though the difference is Theta(4^-m):
/// 1 - e^(-a) cosh b = -(expm1(b-a) + expm1(-b-a)) / 2 with b = k 2^-m,
/// a = nu k 4^-m.
pub fn lattice_one_minus_mu(nu: f64, m: u32, k: i64) -> f64 {
    let h = 2f64.powi(-(m as i32));
    let b = k as f64 * h;
    let a = nu * k as f64 * h * h;
    -0.5 * ((b - a).exp_m1() + (-b - a).exp_m1())
}

/// mu_{mk} = exp(-nu k 4^-m) cosh(k 2^-m), any integer k (negative k gives
/// the reciprocal-moment factors).
pub fn lattice_mu(nu: f64, m: u32, k: i64) -> f64 {
    let h = 2f64.powi(-(m as i32));
    (-nu * k as f64 * h * h).exp() * (k as f64 * h).cosh()
}

/// Moments of the level-m lattice functional Y_m = 4^-m sum of running
/// products, via
/// E(Y_m^p) = (1/(1-mu_{mp})) sum_{k<p} C(p,k) 4^{-m(p-k)} mu_{mk} E(Y_m^k).
/// Finiteness: mu_{mp} < 1, guaranteed whenever nu >= p/2 and otherwise
/// decided by the sign of the stable 1 - mu_{mp} form.
pub fn lattice_moments(nu: f64, m: u32, p_max: usize) -> Result<MomentTable> {
    let law = StepLaw::lattice(nu, m)?;
    let scale = 4f64.powi(-(m as i32));
    let mut mu = Vec::with_capacity(p_max + 1);
    let mut one_minus = Vec::with_capacity(p_max + 1);
    for k in 0..=p_max {
        mu.push(if k == 0 { 1.0 } else { lattice_mu(nu, m, k as i64) });
        one_minus.push(if k == 0 {
            0.0
        } else {
            lattice_one_minus_mu(nu, m, k as i64)
        });
    }
    let mut ey: Vec<Option<f64>> = vec![Some(1.0)];
    let mut diverged = false;
    for p in 1..=p_max {
        let finite = nu >= p as f64 / 2.0 || one_minus[p] > 0.0;
        if diverged || !finite {
            diverged = true;
            ey.push(None);
            continue;
        }
        let mut acc = CompensatedSum::new();
        for k in 0..p {
            acc.add(
                binomial(p as u64, k as u64)
                    * scale.powi((p - k) as i32)
                    * mu[k]
                    * ey[k].expect("lower moment finite"),
            );
        }
        ey.push(Some(acc.value() / one_minus[p]));
    }
    Ok(MomentTable {
        law,
        p_max,
        mu,
        ey,
        scale,
    })
}

/// The bound E(Y^p) <= (1 - mu_p^(1/p))^-p, valid for real p >= 1 whenever
/// mu_p < 1.
pub fn moment_bound(law: &StepLaw, p: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "moment order p = {p} must be >= 1"
        )));
    }
    let mu_p = law.mu_real(p);
    if mu_p >= 1.0 {
        return Err(Error::UndefinedMoment(format!(
            "E(xi^{p}) = {mu_p} >= 1, so E(Y^{p}) is infinite and the bound does not apply"
        )));
    }
    Ok((1.0 - mu_p.powf(1.0 / p)).powf(-p))
}

/// lim_m E(Y_m^p) = 1 / prod_{k=1}^p (nu - k/2), defined for p < 2 nu.
pub fn lattice_moment_limit(nu: f64, p: u32) -> Result<f64> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "drift nu = {nu} must be positive"
        )));
    }
    if p < 1 {
        return Err(Error::InvalidArgument("moment order p must be >= 1".into()));
    }
    if p as f64 >= 2.0 * nu {
        return Err(Error::UndefinedMoment(format!(
            "p = {p} >= 2 nu = {}, the limit moment diverges",
            2.0 * nu
        )));
    }
    let mut prod = 1.0f64;
    for k in 1..=p {
        prod *= nu - k as f64 / 2.0;
    }
    Ok(1.0 / prod)
}

/// Sign selector for the Brownian-functional moments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentSign {
    Positive,
    Negative,
}

/// Reference moments of the Brownian exponential functional I:
/// E(I^p) = 2^p Gamma(2 nu - p) / Gamma(2 nu) for p < 2 nu, and
/// E(I^-p) = 2^-p (2 nu)(2 nu + 1)...(2 nu + p - 1) for any p >= 1.
pub fn bm_moment(nu: f64, p: u32, sign: MomentSign) -> Result<f64> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "drift nu = {nu} must be positive"
        )));
    }
    if p < 1 {
        return Err(Error::InvalidArgument("moment order p must be >= 1".into()));
    }
    match sign {
        MomentSign::Positive => {
            if p as f64 >= 2.0 * nu {
                return Err(Error::UndefinedMoment(format!(
                    "p = {p} >= 2 nu = {}, E(I^p) diverges",
                    2.0 * nu
                )));
            }
            Ok((p as f64 * std::f64::consts::LN_2 + ln_gamma(2.0 * nu - p as f64)
                - ln_gamma(2.0 * nu))
            .exp())
        }
        MomentSign::Negative => {
            let mut prod = 1.0f64;
            for i in 0..p {
                prod *= 2.0 * nu + i as f64;
            }
            Ok(prod * 2f64.powi(-(p as i32)))
        }
    }
}

/// Monte Carlo estimate of one negative moment z_{m,k} = E(Y_m^-k).
#[derive(Clone, Debug, Serialize)]
pub struct NegMomentEstimate {
    pub m: u32,
    pub k: u32,
    pub z: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

/// Estimates z_{m,k} for k = 1..=k_max from one shared set of samples.
pub fn neg_moments_from_samples(samples: &[f64], m: u32, k_max: u32) -> Vec<NegMomentEstimate> {
    (1..=k_max)
        .map(|k| {
            let powers: Vec<f64> = samples.iter().map(|&y| y.powi(-(k as i32))).collect();
            let (z, stderr) = mean_stderr(&powers);
            NegMomentEstimate {
                m,
                k,
                z,
                stderr,
                n_samples: samples.len(),
            }
        })
        .collect()
}

/// Draws n samples of Y_m through `sampler` (index-addressed so the result
/// is identical for any thread count) and estimates z_{m,1}..z_{m,k_max}
/// from the shared set. n below 1000 is allowed but leaves the standard
/// errors too coarse to be useful; callers should warn.
pub fn neg_moment_mc<F>(
    sampler: F,
    m: u32,
    k_max: u32,
    n: usize,
    rng: &RngStream,
) -> Vec<NegMomentEstimate>
where
    F: Fn(&RngStream, u64) -> f64 + Sync,
{
    let samples: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| sampler(rng, i))
        .collect();
    neg_moments_from_samples(&samples, m, k_max)
}

/// Residual of the negative-moment identity
/// mu_{m,-k} z_{m,k} = sum_{n>=k} C(n-1, k-1) 4^{-m(n-k)} z_{m,n},
/// truncated after `n_terms` extra terms:
/// returns mu_{m,-k} z_k - sum_{n=k}^{k+n_terms} C(n-1,k-1) 4^{-m(n-k)} z_n.
/// The exact residual equals the positive series tail, which is bounded by
/// `recurs_tail_bound` for m large relative to k.
pub fn neg_moment_identity_residual(
    estimates: &[NegMomentEstimate],
    nu: f64,
    m: u32,
    k: u32,
    n_terms: u32,
) -> Result<f64> {
    if k < 1 {
        return Err(Error::InvalidArgument("index k must be >= 1".into()));
    }
    let z = |order: u32| -> Result<f64> {
        estimates
            .iter()
            .find(|e| e.k == order && e.m == m)
            .map(|e| e.z)
            .ok_or_else(|| {
                Error::InsufficientData(format!(
                    "estimates must cover orders {k}..={} at level {m}; missing {order}",
                    k + n_terms
                ))
            })
    };
    let mu_neg = lattice_mu(nu, m, -(k as i64));
    let scale = 4f64.powi(-(m as i32));
    let mut acc = CompensatedSum::with(mu_neg * z(k)?);
    for n in k..=k + n_terms {
        acc.add(-binomial(n as u64 - 1, k as u64 - 1) * scale.powi((n - k) as i32) * z(n)?);
    }
    Ok(acc.value())
}

/// Per-sample mean and standard error of the same truncated residual. The
/// estimates of different orders share samples, so this correlated form is
/// the honest error bar (the mean equals `neg_moment_identity_residual` on
/// estimates built from the same samples, by linearity).
pub fn neg_moment_residual_stats(
    samples: &[f64],
    nu: f64,
    m: u32,
    k: u32,
    n_terms: u32,
) -> (f64, f64) {
    let mu_neg = lattice_mu(nu, m, -(k as i64));
    let scale = 4f64.powi(-(m as i32));
    let coeffs: Vec<f64> = (k..=k + n_terms)
        .map(|n| binomial(n as u64 - 1, k as u64 - 1) * scale.powi((n - k) as i32))
        .collect();
    let residuals: Vec<f64> = samples
        .iter()
        .map(|&y| {
            let mut r = mu_neg * y.powi(-(k as i32));
            for (j, c) in coeffs.iter().enumerate() {
                r -= c * y.powi(-((k + j as u32) as i32));
            }
            r
        })
        .collect();
    mean_stderr(&residuals)
}

/// Upper bound on the truncation tail of the negative-moment identity:
/// tail <= z_{m,k+1} * 2 k (k+1) * 2^-3m (valid once m is large relative
/// to k; at small m it is reported, not asserted).
pub fn recurs_tail_bound(z_k_plus_1: f64, m: u32, k: u32) -> f64 {
    z_k_plus_1 * 2.0 * k as f64 * (k as f64 + 1.0) * 2f64.powi(-(3 * m as i32))
}

/// Phi(k) = -log mu_k, the discrete analogue of a subordinator's Laplace
/// exponent at integer arguments.
pub fn laplace_exponent(law: &StepLaw, k: u32) -> Result<f64> {
    if k < 1 {
        return Err(Error::InvalidArgument("order k must be >= 1".into()));
    }
    let mu_k = law.mu(k as i64);
    if !(mu_k > 0.0) {
        return Err(Error::UndefinedMoment(format!(
            "mu_{k} = {mu_k} is not positive"
        )));
    }
    Ok(-mu_k.ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_moment_is_geometric_sum() {
        let law = StepLaw::basic(2.0).unwrap();
        let t = positive_moments(&law, 1);
        let expect = 1.0 / (1.0 - law.mu(1));
        assert_eq!(t.ey[1], Some(expect));
        assert_eq!(t.ey[0], Some(1.0));
        assert_eq!(t.scale, 1.0);
    }

    #[test]
    fn second_moment_closed_form() {
        let law = StepLaw::basic(2.0).unwrap();
        let t = positive_moments(&law, 2);
        let (m1, m2) = (law.mu(1), law.mu(2));
        let closed = (1.0 + m1) / ((1.0 - m1) * (1.0 - m2));
        let got = t.ey[2].unwrap();
        assert!((got - closed).abs() / closed < 1e-15);
        // Frozen reference value for the nu = 2 basic law.
        assert!((got - 1.640987681935862).abs() < 1e-14);
    }

    #[test]
    fn all_moments_finite_at_unit_drift_and_above() {
        for nu in [1.0, 1.5, 3.0] {
            let law = StepLaw::basic(nu).unwrap();
            let t = positive_moments(&law, 12);
            assert!(t.ey.iter().all(|e| e.is_some()), "nu = {nu}");
        }
    }

    #[test]
    fn finiteness_frontier_below_unit_drift() {
        // nu = 0.6: mu_1 < 1 but mu_2 >= 1, so exactly one finite moment.
        let law = StepLaw::basic(0.6).unwrap();
        let t = positive_moments(&law, 5);
        assert!(t.ey[1].is_some());
        assert!(t.ey[2..].iter().all(|e| e.is_none()));

        // nu = 0.9: the frontier sits deeper (k^-1 log cosh k grows to 1).
        let law = StepLaw::basic(0.9).unwrap();
        let t = positive_moments(&law, 12);
        assert!(t.ey[1].is_some());
        assert!(t.ey[12].is_none());
        let first_inf = t.ey.iter().position(|e| e.is_none()).unwrap();
        assert!(law.mu(first_inf as i64) >= 1.0);
        assert!(law.mu(first_inf as i64 - 1) < 1.0);
    }

    #[test]
    fn point_mass_attains_bound() {
        let law = StepLaw::new(&[(0.5, 1.0)]).unwrap();
        let t = positive_moments(&law, 8);
        for p in 1..=8usize {
            let v = t.ey[p].unwrap();
            assert!((v - 2f64.powi(p as i32)).abs() / v < 1e-14, "p={p}");
            let b = moment_bound(&law, p as f64).unwrap();
            assert!((b - 2f64.powi(p as i32)).abs() / b < 1e-14);
        }
        assert_eq!(moment_bound(&law, 3.0).unwrap(), 8.0);
    }

    #[test]
    fn bound_dominates_recursion() {
        for nu in [1.1, 1.5, 2.0, 4.0] {
            let law = StepLaw::basic(nu).unwrap();
            let t = positive_moments(&law, 8);
            for p in 1..=8usize {
                if let Some(v) = t.ey[p] {
                    let b = moment_bound(&law, p as f64).unwrap();
                    assert!(v <= b * (1.0 + 1e-12), "nu={nu} p={p} v={v} b={b}");
                }
            }
        }
    }

    #[test]
    fn bound_rejects_divergent_orders() {
        let law = StepLaw::basic(0.9).unwrap();
        assert!(moment_bound(&law, 10.0).is_err());
        assert!(moment_bound(&law, 0.5).is_err());
        // p = 1 bound coincides with the exact first moment.
        let law2 = StepLaw::basic(2.0).unwrap();
        let b = moment_bound(&law2, 1.0).unwrap();
        let e = positive_moments(&law2, 1).ey[1].unwrap();
        assert!((b - e).abs() / e < 1e-15);
    }

    #[test]
    fn stable_one_minus_mu_is_exact() {
        // Against the direct form where it is still accurate (small m), and
        // positivity deep into the mesh where the direct form loses digits.
        for m in 0..=6u32 {
            let direct = 1.0 - lattice_mu(2.0, m, 1);
            let stable = lattice_one_minus_mu(2.0, m, 1);
            assert!(
                (direct - stable).abs() <= 1e-12 * stable.abs().max(1e-300),
                "m={m}"
            );
        }
        for m in [10u32, 15, 20, 25] {
            let v = lattice_one_minus_mu(2.0, m, 1);
            // 1 - mu_{m1} = (nu - 1/2) 4^-m + O(4^-2m).
            let lead = 1.5 * 4f64.powi(-(m as i32));
            assert!((v - lead).abs() / lead < 1e-3, "m={m} v={v}");
        }
    }

    #[test]
    fn lattice_level_zero_matches_plain_recursion() {
        let nu = 2.0;
        let basic = positive_moments(&StepLaw::basic(nu).unwrap(), 5);
        let lattice = lattice_moments(nu, 0, 5).unwrap();
        assert_eq!(lattice.scale, 1.0);
        for p in 0..=5usize {
            let a = basic.ey[p].unwrap();
            let b = lattice.ey[p].unwrap();
            assert!((a - b).abs() / a < 1e-12, "p={p} {a} vs {b}");
        }
    }

    #[test]
    fn lattice_moments_converge_to_limit() {
        let nu = 2.0;
        for p in 1..=3u32 {
            let lim = lattice_moment_limit(nu, p).unwrap();
            let mut prev_err = f64::INFINITY;
            for m in 4..=9u32 {
                let v = lattice_moments(nu, m, p as usize).unwrap().ey[p as usize].unwrap();
                let err = (v - lim).abs() / lim;
                assert!(err < prev_err, "error not shrinking at m={m}");
                prev_err = err;
            }
        }
    }

    #[test]
    fn lattice_finiteness_flags() {
        // Divergence needs nu < 2^m. At nu = 2, m = 2 the frontier sits at
        // p = 5: mu_{2,5} = e^-0.625 cosh(1.25) > 1, while p <= 4 satisfies
        // nu >= p/2 and stays finite.
        let t = lattice_moments(2.0, 2, 6).unwrap();
        assert!(t.ey[4].is_some());
        assert!(lattice_mu(2.0, 2, 5) > 1.0);
        assert!(t.ey[5].is_none());
        // Once one order diverges all higher orders do.
        let first = t.ey.iter().position(|e| e.is_none()).unwrap();
        assert_eq!(first, 5);
        assert!(t.ey[first..].iter().all(|e| e.is_none()));
        // At or above nu = 2^m every order is finite.
        let t = lattice_moments(2.0, 1, 12).unwrap();
        assert!(t.ey.iter().all(|e| e.is_some()));
    }

    #[test]
    fn limit_values() {
        assert!((lattice_moment_limit(2.0, 1).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((lattice_moment_limit(2.0, 3).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!(lattice_moment_limit(2.0, 4).is_err());
        assert!(lattice_moment_limit(1.6, 4).is_err());
        assert!(lattice_moment_limit(-1.0, 1).is_err());
    }

    #[test]
    fn bm_moment_values() {
        assert!((bm_moment(2.0, 1, MomentSign::Positive).unwrap() - 2.0 / 3.0).abs() < 1e-14);
        for nu in [0.7, 1.6, 2.0, 3.0] {
            let v = bm_moment(nu, 1, MomentSign::Negative).unwrap();
            assert!((v - nu).abs() / nu < 1e-14);
        }
        assert!((bm_moment(2.0, 2, MomentSign::Negative).unwrap() - 5.0).abs() < 1e-14);
        assert!(bm_moment(2.0, 4, MomentSign::Positive).is_err());
        assert!(bm_moment(2.0, 5, MomentSign::Positive).is_err());
        assert!(bm_moment(3.0, 5, MomentSign::Positive).is_ok());
    }

    #[test]
    fn laplace_exponent_values() {
        let law = StepLaw::basic(1.5).unwrap();
        for k in 1..=4u32 {
            let expect = k as f64 * 1.5 - (k as f64).cosh().ln();
            let got = laplace_exponent(&law, k).unwrap();
            assert!((got - expect).abs() < 1e-12);
        }
        let half = StepLaw::new(&[(0.5, 1.0)]).unwrap();
        assert!((laplace_exponent(&half, 1).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(laplace_exponent(&half, 0).is_err());
    }

    #[test]
    fn one_minus_mu_is_tangent_to_laplace_exponent() {
        // |(1 - mu_k) - Phi(k)| <= Phi(k)^2 whenever mu_k > 0.9, from
        // 0 <= x - 1 + e^-x <= x^2 / 2.
        for m in 3..=8u32 {
            let law = StepLaw::lattice(2.0, m).unwrap();
            for k in 1..=3u32 {
                let mu_k = law.mu(k as i64);
                if mu_k > 0.9 {
                    let phi = laplace_exponent(&law, k).unwrap();
                    let one_minus = lattice_one_minus_mu(2.0, m, k as i64);
                    assert!(
                        (one_minus - phi).abs() <= phi * phi,
                        "m={m} k={k} |{one_minus} - {phi}|"
                    );
                }
            }
        }
    }

    #[test]
    fn residual_matches_per_sample_mean() {
        // The estimate-based residual and the per-sample residual mean are
        // the same linear functional of the shared samples.
        let samples: Vec<f64> = (1..=500).map(|i| 0.3 + (i as f64) * 1e-3).collect();
        let (nu, m, k, n_terms) = (2.0, 4u32, 1u32, 6u32);
        let est = neg_moments_from_samples(&samples, m, k + n_terms);
        let from_est = neg_moment_identity_residual(&est, nu, m, k, n_terms).unwrap();
        let (from_samples, stderr) = neg_moment_residual_stats(&samples, nu, m, k, n_terms);
        assert!(
            (from_est - from_samples).abs() <= 1e-12 * from_est.abs().max(1e-12),
            "{from_est} vs {from_samples}"
        );
        assert!(stderr.is_finite());
    }

    #[test]
    fn residual_requires_covering_orders() {
        let samples = vec![0.5; 100];
        let est = neg_moments_from_samples(&samples, 4, 3);
        assert!(neg_moment_identity_residual(&est, 2.0, 4, 1, 6).is_err());
        assert!(neg_moment_identity_residual(&est, 2.0, 4, 1, 2).is_ok());
    }

    #[test]
    fn neg_moment_mc_is_deterministic_and_bounded() {
        // A mock sampler standing in for the lattice functional: positive
        // values above the hard floor 4^-m.
        let m = 3u32;
        let sampler = |rng: &RngStream, i: u64| {
            let mut r = rng.substream(1000 + i);
            0.2 + 0.6 * r.uniform()
        };
        let base = RngStream::new(5, 0);
        let a = neg_moment_mc(sampler, m, 3, 2000, &base);
        let b = neg_moment_mc(sampler, m, 3, 2000, &base);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.z.to_bits(), y.z.to_bits());
            assert!(x.z > 0.0);
            assert!(x.z < 4f64.powi((m * x.k) as i32));
            assert_eq!(x.n_samples, 2000);
        }
    }
}
