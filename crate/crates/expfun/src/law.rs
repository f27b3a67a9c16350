//! Step laws: the finitely supported distribution of the positive multiplier
//! xi. The functional under study is Y = sum of running products of i.i.d.
//! multipliers, so everything downstream is parameterized by this law.

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;
use serde::Serialize;

/// Tolerance for the probability normalization check on user-supplied atoms.
/// Derived laws use exact halves; this only guards external input.
pub const PROB_TOL: f64 = 1e-12;

/// One atom of the multiplier law: P(xi = gamma) = p.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Atom {
    pub gamma: f64,
    pub p: f64,
}

/// Finitely supported law of the positive multiplier xi, atoms sorted by
/// ascending gamma. `drift_nu` records the drift when the law was built from
/// a drifted walk; plain user laws leave it unset.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepLaw {
    atoms: Vec<Atom>,
    drift_nu: Option<f64>,
}

impl StepLaw {
    /// Build a law from (gamma, p) pairs. Atoms are sorted ascending by
    /// gamma; gammas must be positive and distinct, probabilities positive
    /// and summing to 1 within `PROB_TOL`.
    pub fn new(atoms: &[(f64, f64)]) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidArgument("atom list is empty".into()));
        }
        let mut parsed: Vec<Atom> = Vec::with_capacity(atoms.len());
        for (i, &(gamma, p)) in atoms.iter().enumerate() {
            if !gamma.is_finite() || gamma <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "atom {i}: multiplier gamma = {gamma} must be positive and finite"
                )));
            }
            if !p.is_finite() || p <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "atom {i}: probability p = {p} must be positive and finite"
                )));
            }
            parsed.push(Atom { gamma, p });
        }
        parsed.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
        for w in parsed.windows(2) {
            if w[0].gamma == w[1].gamma {
                return Err(Error::InvalidArgument(format!(
                    "duplicate multiplier gamma = {}",
                    w[0].gamma
                )));
            }
        }
        let total: f64 = compensated_sum(parsed.iter().map(|a| a.p));
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidArgument(format!(
                "probabilities sum to {total}, not 1 (tolerance {PROB_TOL})"
            )));
        }
        Ok(Self {
            atoms: parsed,
            drift_nu: None,
        })
    }

    /// The two-point law of exp(X - nu) for a simple symmetric +/-1 step X:
    /// gamma = e^(-1-nu), e^(1-nu), each with probability 1/2.
    pub fn basic(nu: f64) -> Result<Self> {
        Self::lattice(nu, 0)
    }

    /// The level-m lattice refinement: steps +/-2^(-m) on a time grid of
    /// mesh 4^(-m), multipliers exp(+/-2^(-m) - nu 4^(-m)), probability 1/2
    /// each. Level 0 is exactly `basic`.
    pub fn lattice(nu: f64, m: u32) -> Result<Self> {
        if !nu.is_finite() || nu <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "drift nu = {nu} must be positive and finite"
            )));
        }
        if m > 30 {
            return Err(Error::InvalidArgument(format!(
                "lattice level m = {m} exceeds the supported cap of 30"
            )));
        }
        let h = 2f64.powi(-(m as i32));
        let drift = nu * h * h;
        let mut law = Self::new(&[(((-h) - drift).exp(), 0.5), ((h - drift).exp(), 0.5)])?;
        law.drift_nu = Some(nu);
        Ok(law)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    /// The drift recorded at construction, when the law came from a drifted
    /// walk.
    pub fn drift_nu(&self) -> Option<f64> {
        self.drift_nu
    }

    pub fn gamma_min(&self) -> f64 {
        self.atoms[0].gamma
    }

    pub fn gamma_max(&self) -> f64 {
        self.atoms[self.atoms.len() - 1].gamma
    }

    /// mu_k = E(xi^k) for integer k (negative k gives the reciprocal
    /// moments used by the lattice analysis).
    pub fn mu(&self, k: i64) -> f64 {
        let k: i32 = k.clamp(i32::MIN as i64, i32::MAX as i64) as i32;
        compensated_sum(self.atoms.iter().map(|a| a.p * a.gamma.powi(k)))
    }

    /// E(xi^p) for real p >= 0 (used by the real-order moment bound).
    pub fn mu_real(&self, p: f64) -> f64 {
        compensated_sum(self.atoms.iter().map(|a| a.p * a.gamma.powf(p)))
    }

    /// E(log xi) = sum p_i log gamma_i. The series converges a.s. iff this
    /// is negative.
    pub fn log_moment(&self) -> f64 {
        compensated_sum(self.atoms.iter().map(|a| a.p * a.gamma.ln()))
    }

    /// Whether the functional is finite a.s. (negative log moment).
    pub fn converges(&self) -> bool {
        self.log_moment() < 0.0
    }

    /// True when the law is a fair two-point law, which lets samplers draw
    /// the atom choice from the walk-step bit stream. This makes a sampled
    /// path reproducible against a lattice walk built on the same stream.
    pub fn is_symmetric_binary(&self) -> bool {
        self.atoms.len() == 2 && self.atoms[0].p == 0.5
    }

    /// Draw one multiplier.
    #[inline]
    pub fn draw(&self, rng: &mut crate::rng::RngStream) -> f64 {
        if self.is_symmetric_binary() {
            let i = (self.step_sign(rng) > 0) as usize;
            return self.atoms[i].gamma;
        }
        let u = rng.uniform();
        let mut acc = 0.0;
        for a in &self.atoms {
            acc += a.p;
            if u < acc {
                return a.gamma;
            }
        }
        self.atoms[self.atoms.len() - 1].gamma
    }

    #[inline]
    fn step_sign(&self, rng: &mut crate::rng::RngStream) -> i8 {
        rng.step()
    }
}
