//! Small numeric helpers shared by the moment and lattice code: compensated
//! summation and exact binomial coefficients.

/// Neumaier's variant of Kahan summation. The lattice functionals add
/// millions of near-equal terms; naive summation would lose several digits.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(initial: f64) -> Self {
        Self {
            sum: initial,
            comp: 0.0,
        }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sum an iterator with compensation.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for x in iter {
        acc.add(x);
    }
    acc.value()
}

/// Binomial coefficient as f64, exact for every value representable in the
/// 53-bit mantissa (u128 internally, so exact through n = 120 and far beyond
/// any moment order used here).
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    let mut overflowed = false;
    for i in 0..k {
        match acc
            .checked_mul((n - i) as u128)
            .map(|v| v / (i as u128 + 1))
        {
            Some(v) => acc = v,
            None => {
                overflowed = true;
                break;
            }
        }
    }
    if !overflowed {
        return acc as f64;
    }
    // Fall back to a float product for astronomically large orders.
    let mut f = 1.0f64;
    for i in 0..k {
        f = f * (n - i) as f64 / (i + 1) as f64;
    }
    f
}

/// Mean and standard error of a sample.
pub fn mean_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = compensated_sum(samples.iter().copied()) / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let ss = compensated_sum(samples.iter().map(|&x| {
        let d = x - mean;
        d * d
    }));
    let var = ss / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_lost_bits() {
        // 1 + 1e-16 added 10^7 times loses the small part entirely in naive
        // f64 addition; compensation keeps it.
        let mut acc = CompensatedSum::new();
        acc.add(1.0);
        for _ in 0..10_000_000 {
            acc.add(1e-16);
        }
        let got = acc.value() - 1.0;
        assert!((got - 1e-9).abs() < 1e-14, "got {got}");
    }

    #[test]
    fn binomial_small_values() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(12, 6), 924.0);
        assert_eq!(binomial(0, 0), 1.0);
        assert_eq!(binomial(3, 5), 0.0);
        assert_eq!(binomial(60, 30), 118264581564861424.0);
    }

    #[test]
    fn mean_stderr_matches_direct() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let (m, se) = mean_stderr(&xs);
        assert!((m - 2.5).abs() < 1e-15);
        let var = ((1.5f64 * 1.5) * 2.0 + (0.5 * 0.5) * 2.0) / 3.0;
        assert!((se - (var / 4.0).sqrt()).abs() < 1e-15);
    }
}
