//! The universal coefficient triangle behind the moment recursion.
//!
//! E(Y^p) * prod_{k=1}^p (1 - mu_k) is a polynomial in mu_1..mu_{p-1} with
//! non-negative integer coefficients, multilinear because every exponent
//! vector is a 0/1 vector. Indexing a monomial mu_1^{j_1}...mu_{p-1}^{j_{p-1}}
//! by the bitmask with bit i-1 = j_i, the row of coefficients (read with
//! (j_{p-1},...,j_1) as binary numbers) counts permutations of {1..p} by
//! descent set.

use crate::error::{Error, Result};
use crate::numeric::binomial;
use num_bigint::BigInt;
use num_traits::{One, Zero};
use std::collections::{HashMap, HashSet};

/// Rows grow like 2^(p-1) entries of size up to p!; p = 12 keeps the
/// exact-arithmetic walk under a second.
pub const P_CAP: u32 = 12;

/// A polynomial in mu_1..mu_{p-1}, multilinear, with exact integer
/// coefficients keyed by exponent bitmask (bit i-1 set iff mu_i divides the
/// monomial).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MultilinearPoly {
    terms: HashMap<u64, BigInt>,
}

impl MultilinearPoly {
    pub fn one() -> Self {
        let mut terms = HashMap::new();
        terms.insert(0u64, BigInt::one());
        MultilinearPoly { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, mask: u64) -> BigInt {
        self.terms.get(&mask).cloned().unwrap_or_else(BigInt::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (u64, &BigInt)> {
        self.terms.iter().map(|(&m, c)| (m, c))
    }

    pub fn add_assign(&mut self, other: &MultilinearPoly) {
        for (&mask, c) in &other.terms {
            let e = self.terms.entry(mask).or_insert_with(BigInt::zero);
            *e += c;
            if e.is_zero() {
                self.terms.remove(&mask);
            }
        }
    }

    pub fn scale(&self, c: &BigInt) -> MultilinearPoly {
        if c.is_zero() {
            return MultilinearPoly::default();
        }
        MultilinearPoly {
            terms: self.terms.iter().map(|(&m, v)| (m, v * c)).collect(),
        }
    }

    /// Multiplies by the single variable mu_i. Multilinearity is an
    /// invariant: the factor may not already divide any term.
    pub fn mul_var(&self, i: u32) -> MultilinearPoly {
        let bit = 1u64 << (i - 1);
        MultilinearPoly {
            terms: self
                .terms
                .iter()
                .map(|(&m, v)| {
                    debug_assert_eq!(m & bit, 0, "monomial already contains mu_{i}");
                    (m | bit, v.clone())
                })
                .collect(),
        }
    }

    /// Multiplies by (1 - mu_i).
    pub fn mul_one_minus_var(&self, i: u32) -> MultilinearPoly {
        let mut out = self.clone();
        let shifted = self.mul_var(i).scale(&BigInt::from(-1));
        out.add_assign(&shifted);
        out
    }

    /// Evaluates at mu_i = values[i - 1].
    pub fn substitute(&self, values: &[f64]) -> f64 {
        let mut acc = 0.0f64;
        for (&mask, c) in &self.terms {
            let mut prod = bigint_to_f64(c);
            let mut bits = mask;
            while bits != 0 {
                let i = bits.trailing_zeros() as usize;
                prod *= values[i];
                bits &= bits - 1;
            }
            acc += prod;
        }
        acc
    }
}

fn bigint_to_f64(c: &BigInt) -> f64 {
    use num_traits::ToPrimitive;
    c.to_f64().expect("BigInt magnitude fits in f64 range")
}

/// Row p of the triangle: the 2^(p-1) coefficients of
/// N_p = E(Y^p) prod_{k<=p} (1 - mu_k), ordered by reading
/// (j_{p-1},...,j_1) as binary numbers, i.e. by bitmask value.
#[derive(Clone, Debug)]
pub struct CoefficientRow {
    pub p: u32,
    pub coefficients: Vec<BigInt>,
}

impl CoefficientRow {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Coefficient of the monomial with exponent bitmask `mask`.
    pub fn at_mask(&self, mask: u64) -> &BigInt {
        &self.coefficients[mask as usize]
    }

    pub fn row_sum(&self) -> BigInt {
        self.coefficients.iter().sum()
    }
}

/// Builds row p by running the moment recursion in exact polynomial
/// arithmetic:
/// N_p = sum_{k<p} C(p,k) mu_k N_k prod_{q=k+1}^{p-1} (1 - mu_q),
/// which eliminates the denominators and, in particular, mu_p itself. The
/// absence of mu_p is checked structurally, not assumed.
pub fn coefficient_row(p: u32) -> Result<CoefficientRow> {
    if p < 1 || p > P_CAP {
        return Err(Error::InvalidArgument(format!(
            "row index p = {p} out of range 1..={P_CAP}"
        )));
    }
    let polys = numerator_polys(p);
    let poly = &polys[p as usize];
    let width = 1u64 << (p - 1);
    let mut coefficients = vec![BigInt::zero(); width as usize];
    for (mask, c) in poly.terms() {
        // The recursion never introduces mu_p or higher; a violation here
        // means the polynomial is not a function of mu_1..mu_{p-1} alone.
        if mask >> (p - 1) != 0 {
            return Err(Error::InvalidArgument(format!(
                "row {p} produced a monomial containing mu_{} or higher",
                64 - mask.leading_zeros()
            )));
        }
        coefficients[mask as usize] = c.clone();
    }
    Ok(CoefficientRow { p, coefficients })
}

fn numerator_polys(p_max: u32) -> Vec<MultilinearPoly> {
    let mut polys = vec![MultilinearPoly::one()];
    for p in 1..=p_max {
        let mut acc = MultilinearPoly::default();
        for k in 0..p {
            let mut term = polys[k as usize].scale(&BigInt::from(binomial(p as u64, k as u64) as u64));
            if k >= 1 {
                term = term.mul_var(k);
            }
            for q in k + 1..p {
                term = term.mul_one_minus_var(q);
            }
            acc.add_assign(&term);
        }
        polys.push(acc);
    }
    polys
}

/// Counts permutations of {1..p} by descent set; the map is keyed by the
/// bitmask with bit i-1 set iff position i is a descent (w_i > w_{i+1}).
/// Exhaustive enumeration, so p is capped where 9! stays fast.
pub fn descent_counts(p: u32) -> Result<HashMap<u64, u64>> {
    if p < 1 || p > 9 {
        return Err(Error::InvalidArgument(format!(
            "descent enumeration is exhaustive; p = {p} out of range 1..=9"
        )));
    }
    let mut counts: HashMap<u64, u64> = HashMap::new();
    let mut perm: Vec<u32> = (1..=p).collect();
    // Heap's algorithm, iterative form.
    let mut c = vec![0usize; p as usize];
    record_descents(&perm, &mut counts);
    let mut i = 0usize;
    while i < p as usize {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            record_descents(&perm, &mut counts);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(counts)
}

fn record_descents(perm: &[u32], counts: &mut HashMap<u64, u64>) {
    let mut mask = 0u64;
    for i in 0..perm.len() - 1 {
        if perm[i] > perm[i + 1] {
            mask |= 1 << i;
        }
    }
    *counts.entry(mask).or_insert(0) += 1;
}

/// Checks that row p+1 follows from row p by digit deletion:
/// a^(p+1)_J = sum over distinct masks obtained by deleting one digit
/// position from J (set semantics: repeated masks count once) of a^(p)_mask.
/// Deleting position d (1-based) from a (p)-bit mask J keeps the bits below
/// d-1 and shifts the bits from d down by one.
pub fn check_deletion_recursion(p: u32) -> Result<()> {
    if p + 1 > P_CAP {
        return Err(Error::InvalidArgument(format!(
            "needs rows {p} and {}, beyond the cap {P_CAP}",
            p + 1
        )));
    }
    let row_p = coefficient_row(p)?;
    let row_next = coefficient_row(p + 1)?;
    for mask in 0..(1u64 << p) {
        let mut parents = HashSet::new();
        for d in 1..=p {
            let low = mask & ((1u64 << (d - 1)) - 1);
            let high = (mask >> d) << (d - 1);
            parents.insert(low | high);
        }
        let expect: BigInt = parents.iter().map(|&pm| row_p.at_mask(pm)).sum();
        if *row_next.at_mask(mask) != expect {
            return Err(Error::InvalidArgument(format!(
                "deletion recursion fails at row {} mask {mask:#b}: {} != {expect}",
                p + 1,
                row_next.at_mask(mask)
            )));
        }
    }
    Ok(())
}

/// Row p rendered as a CSV block: mask, binary digits (j_{p-1}...j_1),
/// coefficient.
pub fn row_to_csv(row: &CoefficientRow) -> String {
    let mut out = String::from("mask,digits,coefficient\n");
    let width = (row.p.max(2) - 1) as usize;
    for (mask, c) in row.coefficients.iter().enumerate() {
        out.push_str(&format!("{mask},{mask:0width$b},{c}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::StepLaw;
    use crate::moments::positive_moments;

    fn row_u64(p: u32) -> Vec<u64> {
        use num_traits::ToPrimitive;
        coefficient_row(p)
            .unwrap()
            .coefficients
            .iter()
            .map(|c| c.to_u64().unwrap())
            .collect()
    }

    #[test]
    fn small_rows_match_reference() {
        assert_eq!(row_u64(1), vec![1]);
        assert_eq!(row_u64(2), vec![1, 1]);
        assert_eq!(row_u64(3), vec![1, 2, 2, 1]);
        assert_eq!(row_u64(4), vec![1, 3, 5, 3, 3, 5, 3, 1]);
        assert_eq!(
            row_u64(5),
            vec![1, 4, 9, 6, 9, 16, 11, 4, 4, 11, 16, 9, 6, 9, 4, 1]
        );
    }

    #[test]
    fn row_sums_are_factorials() {
        let mut fact = BigInt::one();
        for p in 1..=10u32 {
            fact *= p;
            assert_eq!(coefficient_row(p).unwrap().row_sum(), fact, "p = {p}");
        }
    }

    #[test]
    fn rows_are_palindromic_and_complement_symmetric() {
        // a[mask] = a[reverse(mask)] = a[complement(mask)] in p-1 bits.
        for p in 2..=9u32 {
            let row = coefficient_row(p).unwrap();
            let bits = p - 1;
            for mask in 0..(1u64 << bits) {
                let rev = mask.reverse_bits() >> (64 - bits);
                let comp = !mask & ((1 << bits) - 1);
                assert_eq!(row.at_mask(mask), row.at_mask(rev), "p={p} mask={mask}");
                assert_eq!(row.at_mask(mask), row.at_mask(comp), "p={p} mask={mask}");
            }
        }
    }

    #[test]
    fn rows_count_descent_sets() {
        for p in 1..=8u32 {
            let row = coefficient_row(p).unwrap();
            let counts = descent_counts(p).unwrap();
            for mask in 0..(1u64 << (p - 1)) {
                let expect = counts.get(&mask).copied().unwrap_or(0);
                assert_eq!(
                    row.at_mask(mask),
                    &BigInt::from(expect),
                    "p={p} mask={mask:#b}"
                );
            }
        }
    }

    #[test]
    fn deletion_recursion_holds() {
        for p in 1..=8u32 {
            check_deletion_recursion(p).unwrap();
        }
    }

    #[test]
    fn deletion_example_with_repeated_parent() {
        // Deleting a digit from 0110 (mask 6, p = 5) gives masks
        // {011, 010, 110} with 010 arising twice but counted once:
        // 3 + 5 + 3 = 11.
        let row4 = coefficient_row(4).unwrap();
        let row5 = coefficient_row(5).unwrap();
        let expect = row4.at_mask(0b011) + row4.at_mask(0b010) + row4.at_mask(0b110);
        assert_eq!(expect, BigInt::from(11));
        assert_eq!(row5.at_mask(0b0110), &BigInt::from(11));
    }

    #[test]
    fn substitution_matches_moment_recursion() {
        // N_p(mu_1..mu_{p-1}) / prod_{k<=p}(1 - mu_k) reproduces E(Y^p).
        for nu in [1.2, 2.0, 3.5] {
            let law = StepLaw::basic(nu).unwrap();
            let table = positive_moments(&law, 7);
            let mu: Vec<f64> = (1..=7).map(|k| law.mu(k)).collect();
            for p in 1..=7u32 {
                let Some(exact) = table.ey[p as usize] else {
                    continue;
                };
                let polys = numerator_polys(p);
                let num = polys[p as usize].substitute(&mu);
                let denom: f64 = (1..=p).map(|k| 1.0 - mu[k as usize - 1]).product();
                let got = num / denom;
                assert!(
                    (got - exact).abs() <= 1e-10 * exact.abs(),
                    "nu={nu} p={p}: {got} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn cap_enforced() {
        assert!(coefficient_row(0).is_err());
        assert!(coefficient_row(P_CAP + 1).is_err());
        assert!(coefficient_row(P_CAP).is_ok());
        assert!(descent_counts(10).is_err());
        assert!(check_deletion_recursion(P_CAP).is_err());
    }

    #[test]
    fn csv_rendering_orders_by_mask() {
        let row = coefficient_row(3).unwrap();
        let csv = row_to_csv(&row);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "mask,digits,coefficient");
        assert_eq!(lines[1], "0,00,1");
        assert_eq!(lines[2], "1,01,2");
        assert_eq!(lines[3], "2,10,2");
        assert_eq!(lines[4], "3,11,1");
    }
}
