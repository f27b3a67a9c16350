//! Structural invariants checked by exhaustive enumeration where the state
//! space allows it and by randomized search where it does not.

use expfun::descent::coefficient_row;
use expfun::hierarchy::{build_hierarchy, refine_twist};
use expfun::ifs::build_ifs;
use expfun::moments::positive_moments;
use expfun::{sample_y, RngStream, StepLaw};
use proptest::prelude::*;

/// Twisting maps (parent, raw) pairs to output coin sequences 2^P-to-one:
/// for each output with b completed bridges, 2^(P-b) parents match its
/// bridge signs and each contributes 2^b raw preimages. Uniform input
/// therefore stays uniform, which is the whole reason the coupled walk is
/// still a simple symmetric walk. Small lengths are checked exhaustively.
#[test]
fn twisting_preserves_the_uniform_coin_measure() {
    let p_len = 3usize;
    let l_len = 10usize;
    let mut counts = vec![0u32; 1 << l_len];
    for parent_bits in 0..1u32 << p_len {
        let parent: Vec<i8> = (0..p_len)
            .map(|i| if parent_bits >> i & 1 == 1 { 1 } else { -1 })
            .collect();
        for raw_bits in 0..1u32 << l_len {
            let raw: Vec<i8> = (0..l_len)
                .map(|i| if raw_bits >> i & 1 == 1 { 1 } else { -1 })
                .collect();
            let out = refine_twist(&parent, &raw).unwrap();
            assert_eq!(out.twisted.len() + out.raw_left, l_len);
            let mut key = 0usize;
            for (i, &s) in out
                .twisted
                .iter()
                .chain(&raw[out.twisted.len()..])
                .enumerate()
            {
                if s == 1 {
                    key |= 1 << i;
                }
            }
            counts[key] += 1;
        }
    }
    let want = 1u32 << p_len;
    assert!(
        counts.iter().all(|&c| c == want),
        "twisted outputs are not uniform: counts range {:?}..{:?}",
        counts.iter().min(),
        counts.iter().max()
    );
}

/// Bridge lengths are i.i.d. first exit times of +-2, so their mean is 4.
#[test]
fn expected_bridge_length_is_four() {
    let h = build_hierarchy(1, 25_000.0, 2.0, &RngStream::new(11, 0)).unwrap();
    let times = h.crossing_times(1);
    let mut prev = 0usize;
    let spacings: Vec<f64> = times
        .iter()
        .map(|&t| {
            let d = (t - prev) as f64;
            prev = t;
            d
        })
        .collect();
    let n = spacings.len() as f64;
    assert!(n > 20_000.0, "expected ~25k bridges, got {n}");
    let mean = spacings.iter().sum::<f64>() / n;
    let var = spacings.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    assert!(
        (mean - 4.0).abs() <= 4.0 * se,
        "mean bridge length {mean:.4} is {:.1} se away from 4",
        (mean - 4.0).abs() / se
    );
}

fn two_sample_ks(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0f64);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// The sampler's output distribution solves Y =d= 1 + xi Y with xi drawn
/// fresh and independent of Y. Checked as a two-sample KS test at the 0.1%
/// level, so a failure means a real distributional defect, not noise.
#[test]
fn perpetuity_fixed_point_in_distribution() {
    let law = StepLaw::basic(2.0).unwrap();
    let n = 20_000usize;
    let eps = 1e-10;
    let base_a = RngStream::new(21, 0);
    let base_b = RngStream::new(22, 0);
    let mut direct: Vec<f64> = (0..n)
        .map(|i| {
            let mut rng = base_a.substream(i as u64 * 32 + 31);
            sample_y(&law, eps, &mut rng).unwrap().value
        })
        .collect();
    let mut mapped: Vec<f64> = (0..n)
        .map(|i| {
            let mut rng = base_b.substream(i as u64 * 32 + 31);
            let xi = law.draw(&mut rng);
            let w = sample_y(&law, eps, &mut rng).unwrap().value;
            1.0 + xi * w
        })
        .collect();
    let ks = two_sample_ks(&mut direct, &mut mapped);
    let critical = 1.9494 * (2.0 / n as f64).sqrt();
    assert!(
        ks <= critical,
        "two-sample KS {ks:.5} exceeds the 0.1% critical value {critical:.5}"
    );
}

proptest! {
    #[test]
    fn basic_law_log_moment_is_minus_nu(nu in 0.05f64..15.0) {
        let law = StepLaw::basic(nu).unwrap();
        prop_assert!((law.log_moment() + nu).abs() <= 1e-12 * nu.max(1.0));
    }

    #[test]
    fn lattice_level_zero_is_the_basic_law(nu in 0.05f64..15.0) {
        let basic = StepLaw::basic(nu).unwrap();
        let lattice = StepLaw::lattice(nu, 0).unwrap();
        prop_assert_eq!(basic.atoms(), lattice.atoms());
    }

    /// p = 1 and p = 2 admit closed forms straight from the fixed-point
    /// equation, independent of the general recursion's bookkeeping.
    #[test]
    fn low_moments_solve_the_fixed_point_equations(nu in 1.1f64..8.0) {
        let law = StepLaw::basic(nu).unwrap();
        let table = positive_moments(&law, 2);
        let (mu1, mu2) = (law.mu(1), law.mu(2));
        let ey1 = 1.0 / (1.0 - mu1);
        let ey2 = (1.0 + 2.0 * mu1 * ey1) / (1.0 - mu2);
        prop_assert!((table.ey[1].unwrap() - ey1).abs() <= 1e-12 * ey1);
        prop_assert!((table.ey[2].unwrap() - ey2).abs() <= 1e-12 * ey2);
    }

    /// Reversing a permutation complements its descent set, so every row
    /// of the coefficient triangle reads the same in both directions.
    #[test]
    fn coefficient_rows_are_palindromes(p in 1u32..=10) {
        let row = coefficient_row(p).unwrap();
        let n = row.coefficients.len();
        for i in 0..n / 2 {
            prop_assert_eq!(&row.coefficients[i], &row.coefficients[n - 1 - i]);
        }
    }

    #[test]
    fn cdf_enclosures_are_ordered_monotone_and_nested(
        nu in 1.05f64..6.0,
        a in 0.0f64..1.0,
        b in 0.0f64..1.0,
        depth in 1u32..20,
    ) {
        let ifs = build_ifs(&StepLaw::basic(nu).unwrap()).unwrap();
        let (y1, y2) = ifs.interval();
        let span = y2 - y1;
        let (lo_pt, hi_pt) = if a <= b {
            (y1 + a * span, y1 + b * span)
        } else {
            (y1 + b * span, y1 + a * span)
        };
        let e1 = ifs.cdf(lo_pt, depth);
        let e2 = ifs.cdf(hi_pt, depth);
        prop_assert!(0.0 <= e1.lower && e1.lower <= e1.upper && e1.upper <= 1.0);
        prop_assert!(e1.lower <= e2.lower && e1.upper <= e2.upper);
        let deeper = ifs.cdf(lo_pt, depth + 6);
        prop_assert!(deeper.lower >= e1.lower && deeper.upper <= e1.upper);
    }

    #[test]
    fn streams_reproduce_bit_for_bit(seed in any::<u64>(), stream in any::<u64>()) {
        let mut a = RngStream::new(seed, stream);
        let mut b = RngStream::new(seed, stream);
        for _ in 0..8 {
            prop_assert_eq!(a.next_u64(), b.next_u64());
        }
    }
}
