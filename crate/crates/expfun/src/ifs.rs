//! The stationary law of Y as the attractor of the iterated function system
//! T_i(x) = gamma_i x + 1: support interval, cylinder structure, rigorous
//! cdf enclosures, the singularity criterion, and the Hausdorff
//! dimension/measure of the attractor in the non-overlapping case.

use crate::error::{Error, Result};
use crate::law::StepLaw;
use serde::Serialize;

/// The IFS induced by a step law with all ratios below one. Fixpoints
/// y_i = 1/(1 - gamma_i) are strictly increasing with the atoms; the
/// attractor lives in [y_1, y_N].
#[derive(Clone, Debug)]
pub struct IfsSystem {
    law: StepLaw,
    fixpoints: Vec<f64>,
}

/// Mutual position of the adjacent first-level images T_i([y_1, y_N]).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlapStatus {
    Disjoint,
    Touching,
    Overlapping,
}

/// Two-sided bracket for the distribution function at one point.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CdfEnclosure {
    pub lower: f64,
    pub upper: f64,
}

impl CdfEnclosure {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// One depth-k cylinder T_{w_1} ... T_{w_k}([y_1, y_N]), word letters being
/// 0-based atom indices.
#[derive(Clone, Debug, Serialize)]
pub struct CylinderInterval {
    pub word: Vec<u8>,
    pub lo: f64,
    pub hi: f64,
}

/// Exact dyadic rational numerator / 2^log2_denominator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Dyadic {
    pub numerator: u64,
    pub log2_denominator: u32,
}

impl Dyadic {
    pub fn to_f64(self) -> f64 {
        self.numerator as f64 * 2f64.powi(-(self.log2_denominator as i32))
    }
}

/// Outcome of the entropy singularity criterion. The criterion is
/// one-directional: when it does not apply nothing is claimed about
/// absolute continuity.
#[derive(Clone, Debug, Serialize)]
pub struct SingularityVerdict {
    pub singular_proven: bool,
    pub not_applicable: bool,
    pub reason: String,
}

pub fn build_ifs(law: &StepLaw) -> Result<IfsSystem> {
    for (i, a) in law.atoms().iter().enumerate() {
        if a.gamma >= 1.0 {
            return Err(Error::NonContractive {
                index: i,
                gamma: a.gamma,
            });
        }
    }
    let fixpoints = law.atoms().iter().map(|a| 1.0 / (1.0 - a.gamma)).collect();
    Ok(IfsSystem {
        law: law.clone(),
        fixpoints,
    })
}

impl IfsSystem {
    pub fn law(&self) -> &StepLaw {
        &self.law
    }

    pub fn n_maps(&self) -> usize {
        self.fixpoints.len()
    }

    pub fn fixpoints(&self) -> &[f64] {
        &self.fixpoints
    }

    /// Support interval [y_1, y_N] of the stationary law.
    pub fn interval(&self) -> (f64, f64) {
        (self.fixpoints[0], *self.fixpoints.last().unwrap())
    }

    pub fn interval_length(&self) -> f64 {
        let (lo, hi) = self.interval();
        hi - lo
    }

    fn gamma(&self, i: usize) -> f64 {
        self.law.atoms()[i].gamma
    }

    fn prob(&self, i: usize) -> f64 {
        self.law.atoms()[i].p
    }

    /// T_{w_1}(T_{w_2}(... T_{w_k}(x))), identity for the empty word.
    pub fn apply_word(&self, word: &[u8], x: f64) -> f64 {
        let mut v = x;
        for &i in word.iter().rev() {
            v = self.gamma(i as usize) * v + 1.0;
        }
        v
    }

    /// Classifies each adjacent image pair and reports the worst case.
    pub fn overlap_status(&self) -> OverlapStatus {
        let (y1, yn) = self.interval();
        let mut status = OverlapStatus::Disjoint;
        for i in 0..self.n_maps() - 1 {
            let right_of_left = self.gamma(i) * yn + 1.0;
            let left_of_right = self.gamma(i + 1) * y1 + 1.0;
            if right_of_left > left_of_right {
                return OverlapStatus::Overlapping;
            }
            if right_of_left == left_of_right {
                status = OverlapStatus::Touching;
            }
        }
        status
    }

    /// Rigorous bracket for F(y) = P(Y <= y) from the self-similarity
    /// F(y) = sum_i p_i F((y - 1) / gamma_i). Any branch still unresolved
    /// when the depth runs out contributes [0, p_w]; with disjoint images at
    /// most one branch per level stays unresolved, so the work is
    /// O(N * depth) and the width at most (max p_i)^depth.
    pub fn cdf(&self, y: f64, depth: u32) -> CdfEnclosure {
        let (lower, upper) = self.cdf_rec(y, depth);
        CdfEnclosure {
            lower,
            upper: upper.min(1.0),
        }
    }

    fn cdf_rec(&self, y: f64, depth: u32) -> (f64, f64) {
        let (y1, yn) = self.interval();
        if y < y1 {
            return (0.0, 0.0);
        }
        if y >= yn {
            return (1.0, 1.0);
        }
        if depth == 0 {
            return (0.0, 1.0);
        }
        let mut lo = 0.0;
        let mut hi = 0.0;
        for i in 0..self.n_maps() {
            let x = (y - 1.0) / self.gamma(i);
            if x < y1 {
                continue;
            }
            if x >= yn {
                lo += self.prob(i);
                hi += self.prob(i);
                continue;
            }
            let (clo, chi) = self.cdf_rec(x, depth - 1);
            lo += self.prob(i) * clo;
            hi += self.prob(i) * chi;
        }
        (lo, hi)
    }

    /// All N^k depth-k cylinders in word-lexicographic order. Their union
    /// covers the attractor and the total length is |I| (sum gamma_i)^k,
    /// which witnesses measure zero whenever sum gamma_i < 1.
    pub fn covering_intervals(&self, k: u32, cap: usize) -> Result<Vec<CylinderInterval>> {
        let n = self.n_maps() as u128;
        let count = n
            .checked_pow(k)
            .ok_or_else(|| Error::InvalidArgument(format!("N^{k} overflows")))?;
        if count > cap as u128 {
            return Err(Error::InvalidArgument(format!(
                "depth {k} needs {count} cylinders, above the cap {cap}"
            )));
        }
        let (y1, yn) = self.interval();
        let mut out = Vec::with_capacity(count as usize);
        let mut word = vec![0u8; k as usize];
        loop {
            out.push(CylinderInterval {
                word: word.clone(),
                lo: self.apply_word(&word, y1),
                hi: self.apply_word(&word, yn),
            });
            // Increment the word as a base-N counter, most significant
            // letter first so the output stays lexicographic.
            let mut pos = k as usize;
            loop {
                if pos == 0 {
                    return Ok(out);
                }
                pos -= 1;
                if (word[pos] as usize) + 1 < self.n_maps() {
                    word[pos] += 1;
                    for w in &mut word[pos + 1..] {
                        *w = 0;
                    }
                    break;
                }
            }
        }
    }

    /// The gap between the two children of cylinder w (symmetric binary
    /// laws only): [T_w(T_1(y_2)), T_w(T_2(y_1))), empty word giving the
    /// central gap. Word letters are 0-based.
    pub fn plateau_interval(&self, word: &[u8]) -> Result<(f64, f64)> {
        self.require_symmetric_binary("plateau_interval")?;
        let (y1, y2) = self.interval();
        let left = self.apply_word(word, self.gamma(0) * y2 + 1.0);
        let right = self.apply_word(word, self.gamma(1) * y1 + 1.0);
        Ok((left, right))
    }

    fn require_symmetric_binary(&self, what: &str) -> Result<()> {
        if !self.law.is_symmetric_binary() {
            return Err(Error::InvalidArgument(format!(
                "{what} requires a two-atom law with equal weights"
            )));
        }
        Ok(())
    }
}

/// Exact cdf value on the plateau over the gap below cylinder w2 (symmetric
/// binary laws): F = sum_j (i_j - 1) 2^-j + 2^-(k+1) with the word's letters
/// i_j in {1, 2} (0-based input letters are i_j - 1).
pub fn plateau_value(word: &[u8]) -> Result<Dyadic> {
    if word.len() >= 63 {
        return Err(Error::InvalidArgument("word too long for exact dyadic".into()));
    }
    let mut digits = 0u64;
    for &letter in word {
        if letter > 1 {
            return Err(Error::InvalidArgument(format!(
                "letter {letter} outside the binary alphabet"
            )));
        }
        digits = (digits << 1) | letter as u64;
    }
    Ok(Dyadic {
        numerator: (digits << 1) | 1,
        log2_denominator: word.len() as u32 + 1,
    })
}

/// Entropy criterion: with every gamma_i < 1, the stationary law is
/// singular (and lives on a set of the Moran dimension) whenever
/// sum p_i log gamma_i < sum p_i log p_i.
pub fn is_singular(law: &StepLaw) -> SingularityVerdict {
    let gamma_max = law.gamma_max();
    if gamma_max >= 1.0 {
        return SingularityVerdict {
            singular_proven: false,
            not_applicable: true,
            reason: format!(
                "largest ratio {gamma_max} is not below 1, the contraction hypothesis fails"
            ),
        };
    }
    let mut log_gamma = 0.0;
    let mut log_p = 0.0;
    for a in law.atoms() {
        log_gamma += a.p * a.gamma.ln();
        log_p += a.p * a.p.ln();
    }
    if log_gamma < log_p {
        SingularityVerdict {
            singular_proven: true,
            not_applicable: false,
            reason: format!(
                "sum p_i log gamma_i = {log_gamma} < sum p_i log p_i = {log_p}"
            ),
        }
    } else {
        SingularityVerdict {
            singular_proven: false,
            not_applicable: true,
            reason: format!(
                "entropy condition fails ({log_gamma} >= {log_p}); the criterion is silent"
            ),
        }
    }
}

/// Moran dimension of the attractor: the root s of sum gamma_i^s = 1,
/// located by bisection on [1e-6, 1] to 1e-12. Valid for disjoint or
/// touching images; strict overlap is an error because the similarity
/// dimension then only bounds the true one.
pub fn hausdorff_dimension(ifs: &IfsSystem) -> Result<f64> {
    if ifs.overlap_status() == OverlapStatus::Overlapping {
        return Err(Error::Overlapping(
            "adjacent images overlap; the Moran equation no longer gives the dimension".into(),
        ));
    }
    if ifs.n_maps() == 1 {
        return Ok(0.0);
    }
    let f = |s: f64| -> f64 {
        ifs.law()
            .atoms()
            .iter()
            .map(|a| a.gamma.powf(s))
            .sum::<f64>()
            - 1.0
    };
    let (mut lo, mut hi) = (1e-6, 1.0);
    if f(lo) <= 0.0 {
        return Err(Error::InvalidArgument(
            "dimension below the bracket floor 1e-6".into(),
        ));
    }
    if f(hi) >= 0.0 {
        // Touching two-atom systems land exactly on the boundary root 1.
        if f(hi) == 0.0 {
            return Ok(1.0);
        }
        return Err(Error::Overlapping(format!(
            "sum of ratios {} exceeds 1",
            f(hi) + 1.0
        )));
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// s-dimensional Hausdorff measure of the attractor in the non-overlapping
/// case: exactly |I|^s at s = the Moran dimension.
pub fn hausdorff_measure(ifs: &IfsSystem) -> Result<f64> {
    let s = hausdorff_dimension(ifs)?;
    Ok(ifs.interval_length().powf(s))
}

/// Drift that makes the two-atom walk law attain Moran dimension s:
/// nu(s) = s^-1 log(e^s + e^-s), decreasing on (0, 1] with nu(1) the
/// touching point.
pub fn nu_of_dimension(s: f64) -> Result<f64> {
    if !(s > 0.0 && s <= 1.0) || !s.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "dimension s = {s} must lie in (0, 1]"
        )));
    }
    Ok((s.exp() + (-s).exp()).ln() / s)
}

/// Closed form for the measure of the basic attractor as a function of its
/// dimension: |I|^s with gamma = e^{+-1} (2 cosh s)^{-1/s}.
pub fn basic_measure_from_dimension(s: f64) -> Result<f64> {
    if !(s > 0.0 && s <= 1.0) || !s.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "dimension s = {s} must lie in (0, 1]"
        )));
    }
    let root = (2.0 * s.cosh()).powf(-1.0 / s);
    let g2 = std::f64::consts::E * root;
    let g1 = root / std::f64::consts::E;
    Ok((1.0 / (1.0 - g2) - 1.0 / (1.0 - g1)).powf(s))
}
