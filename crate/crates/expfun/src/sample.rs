//! Sampling the series Y = 1 + xi_1 + xi_1 xi_2 + ... with controlled
//! truncation. The running product P_n decides when the unseen tail is
//! provably or plausibly below the requested tolerance.

use crate::error::{Error, Result};
use crate::law::StepLaw;
use crate::numeric::CompensatedSum;
use crate::rng::RngStream;
use serde::Serialize;
use std::collections::VecDeque;

/// How the truncation bound of a sample is justified.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruncationKind {
    /// All multipliers are below 1: tail <= P_n * gamma_max / (1 - gamma_max)
    /// holds pathwise.
    Deterministic,
    /// mu_1 < 1: the bound is the conditional tail mean P_n * E(Y).
    ConditionalMean,
    /// Neither bound applies; stopping is judged from the running product
    /// and the recent terms (see `sample_y`), and the reported bound is the
    /// last window's contribution, not a guarantee.
    Heuristic,
}

/// One realized sample of the series.
#[derive(Clone, Debug, Serialize)]
pub struct FunctionalSample {
    /// Realized partial sum Y_n.
    pub value: f64,
    /// Index n of the partial sum (the sum has n+1 terms, k = 0..n).
    pub terms_used: u64,
    /// Upper bound (or heuristic estimate, per `truncation_kind`) on Y - Y_n.
    pub truncation_bound: f64,
    pub truncation_kind: TruncationKind,
}

/// Hard cap on series length; convergent laws stop long before this, and
/// hitting it means the tolerance is unreachable in practice.
const MAX_TERMS: u64 = 100_000_000;

/// Sample Y once. Stops when the tail beyond the current partial sum is
/// at most `eps`:
/// - gamma_max < 1: pathwise bound P_n * gamma_max / (1 - gamma_max);
/// - else mu_1 < 1: conditional mean bound P_n * E(Y) = P_n / (1 - mu_1);
/// - else: heuristic, once P_n < eps and the last ceil(2/|E log xi|) terms
///   added less than eps in total.
pub fn sample_y(law: &StepLaw, eps: f64, rng: &mut RngStream) -> Result<FunctionalSample> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "eps = {eps} must be positive and finite"
        )));
    }
    let log_moment = law.log_moment();
    if log_moment >= 0.0 {
        return Err(Error::Divergent { log_moment });
    }

    let gamma_max = law.gamma_max();
    let mu1 = law.mu(1);
    let (kind, det_factor, cond_factor) = if gamma_max < 1.0 {
        (
            TruncationKind::Deterministic,
            gamma_max / (1.0 - gamma_max),
            0.0,
        )
    } else if mu1 < 1.0 {
        (TruncationKind::ConditionalMean, 0.0, 1.0 / (1.0 - mu1))
    } else {
        (TruncationKind::Heuristic, 0.0, 0.0)
    };
    let window = ((2.0 / log_moment.abs()).ceil() as usize).max(1);

    let mut sum = CompensatedSum::with(1.0);
    let mut product = 1.0f64;
    let mut n: u64 = 0;
    let mut recent: VecDeque<f64> = VecDeque::new();
    let mut window_sum = 0.0f64;

    loop {
        let bound = match kind {
            TruncationKind::Deterministic => product * det_factor,
            TruncationKind::ConditionalMean => product * cond_factor,
            TruncationKind::Heuristic => {
                // Stop only once the window is full, so early small products
                // cannot end the series before the drift has taken hold.
                if product < eps && recent.len() == window && window_sum < eps {
                    window_sum
                } else {
                    f64::INFINITY
                }
            }
        };
        if bound <= eps {
            return Ok(FunctionalSample {
                value: sum.value(),
                terms_used: n,
                truncation_bound: bound,
                truncation_kind: kind,
            });
        }
        if n >= MAX_TERMS {
            return Err(Error::InsufficientData(format!(
                "series did not reach tolerance {eps} within {MAX_TERMS} terms"
            )));
        }
        product *= law.draw(rng);
        sum.add(product);
        n += 1;
        if kind == TruncationKind::Heuristic {
            recent.push_back(product);
            window_sum += product;
            if recent.len() > window {
                window_sum -= recent.pop_front().unwrap_or(0.0);
            }
        }
    }
}
