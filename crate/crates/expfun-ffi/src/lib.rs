//! C ABI for the expfun library. Every function returns an `ExpfunStatus`;
//! results travel through out-pointers. Handles are opaque and must be
//! released with the matching `_free` function. On any failure the message
//! is retrievable with `expfun_last_error` until the next call on the same
//! thread.

use expfun::error::Error;
use expfun::hierarchy::{discrete_functional, sup_distance, TwistedHierarchy};
use expfun::law::StepLaw;
use expfun::moments::{bm_moment, lattice_moments, positive_moments, MomentSign};
use expfun::rng::RngStream;
use expfun::sample::sample_y;
use std::cell::RefCell;
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Result of every API call. Values other than OK leave a description in
/// the thread-local buffer read by `expfun_last_error`.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ExpfunStatus {
    Ok = 0,
    InvalidArgument = 1,
    NonContractive = 2,
    Overlapping = 3,
    Divergent = 4,
    UndefinedMoment = 5,
    InsufficientData = 6,
    Io = 7,
    NullPointer = 8,
    Panic = 9,
}

pub struct ExpfunLaw {
    inner: StepLaw,
}

pub struct ExpfunHierarchy {
    inner: TwistedHierarchy,
    base: RngStream,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(message: &str) {
    LAST_ERROR.with(|e| {
        let mut e = e.borrow_mut();
        e.clear();
        e.extend_from_slice(message.as_bytes());
    });
}

fn fail(e: &Error) -> ExpfunStatus {
    set_error(&e.to_string());
    match e {
        Error::InvalidArgument(_) => ExpfunStatus::InvalidArgument,
        Error::NonContractive { .. } => ExpfunStatus::NonContractive,
        Error::Overlapping(_) => ExpfunStatus::Overlapping,
        Error::Divergent { .. } => ExpfunStatus::Divergent,
        Error::UndefinedMoment(_) => ExpfunStatus::UndefinedMoment,
        Error::InsufficientData(_) => ExpfunStatus::InsufficientData,
        Error::Io(_) => ExpfunStatus::Io,
    }
}

fn null_pointer(what: &str) -> ExpfunStatus {
    set_error(&format!("null pointer: {what}"));
    ExpfunStatus::NullPointer
}

/// Runs the body behind a panic guard so unwinding never crosses the ABI.
fn guarded(f: impl FnOnce() -> ExpfunStatus) -> ExpfunStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            ExpfunStatus::Panic
        }
    }
}

/// Copies the last error message into `buf` (NUL-terminated, truncated to
/// `cap` bytes) and returns the full message length in bytes. A null `buf`
/// only queries the length.
#[no_mangle]
pub unsafe extern "C" fn expfun_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = e.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(e.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        e.len()
    })
}

/// Static version string of the library.
#[no_mangle]
pub extern "C" fn expfun_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Two-atom walk law exp(+-1 - nu) with probability 1/2 each.
#[no_mangle]
pub unsafe extern "C" fn expfun_law_basic(nu: f64, out: *mut *mut ExpfunLaw) -> ExpfunStatus {
    if out.is_null() {
        return null_pointer("out");
    }
    guarded(|| match StepLaw::basic(nu) {
        Ok(law) => {
            *out = Box::into_raw(Box::new(ExpfunLaw { inner: law }));
            ExpfunStatus::Ok
        }
        Err(e) => fail(&e),
    })
}

/// Level-m lattice refinement law exp(+-2^-m - nu 4^-m).
#[no_mangle]
pub unsafe extern "C" fn expfun_law_lattice(
    nu: f64,
    m: u32,
    out: *mut *mut ExpfunLaw,
) -> ExpfunStatus {
    if out.is_null() {
        return null_pointer("out");
    }
    guarded(|| match StepLaw::lattice(nu, m) {
        Ok(law) => {
            *out = Box::into_raw(Box::new(ExpfunLaw { inner: law }));
            ExpfunStatus::Ok
        }
        Err(e) => fail(&e),
    })
}

/// General finite multiplier law from parallel arrays of length `n_atoms`.
#[no_mangle]
pub unsafe extern "C" fn expfun_law_new(
    gammas: *const f64,
    probs: *const f64,
    n_atoms: usize,
    out: *mut *mut ExpfunLaw,
) -> ExpfunStatus {
    if gammas.is_null() || probs.is_null() {
        return null_pointer("gammas/probs");
    }
    if out.is_null() {
        return null_pointer("out");
    }
    guarded(|| {
        let g = std::slice::from_raw_parts(gammas, n_atoms);
        let p = std::slice::from_raw_parts(probs, n_atoms);
        let pairs: Vec<(f64, f64)> = g.iter().copied().zip(p.iter().copied()).collect();
        match StepLaw::new(&pairs) {
            Ok(law) => {
                *out = Box::into_raw(Box::new(ExpfunLaw { inner: law }));
                ExpfunStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Releases a law handle; a null handle is ignored.
#[no_mangle]
pub unsafe extern "C" fn expfun_law_free(law: *mut ExpfunLaw) {
    if !law.is_null() {
        drop(Box::from_raw(law));
    }
}

/// Mean of log xi; negative iff the functional converges.
#[no_mangle]
pub unsafe extern "C" fn expfun_law_log_moment(
    law: *const ExpfunLaw,
    out: *mut f64,
) -> ExpfunStatus {
    let Some(law) = law.as_ref() else {
        return null_pointer("law");
    };
    if out.is_null() {
        return null_pointer("out");
    }
    *out = law.inner.log_moment();
    ExpfunStatus::Ok
}

/// Writes mu_k = E(xi^k) and E(Y^k) for k = 1..=p_max into arrays of
/// length `p_max` (entry k-1 holds order k). Divergent moments are
/// written as +infinity.
#[no_mangle]
pub unsafe extern "C" fn expfun_moments(
    law: *const ExpfunLaw,
    p_max: usize,
    mu_out: *mut f64,
    ey_out: *mut f64,
) -> ExpfunStatus {
    let Some(law) = law.as_ref() else {
        return null_pointer("law");
    };
    if mu_out.is_null() || ey_out.is_null() {
        return null_pointer("mu_out/ey_out");
    }
    if p_max == 0 {
        set_error("p_max must be positive");
        return ExpfunStatus::InvalidArgument;
    }
    guarded(|| {
        let table = positive_moments(&law.inner, p_max);
        for k in 1..=p_max {
            *mu_out.add(k - 1) = table.mu[k];
            *ey_out.add(k - 1) = table.ey[k].unwrap_or(f64::INFINITY);
        }
        ExpfunStatus::Ok
    })
}

/// Same layout as `expfun_moments` for the scaled lattice functional Y_m.
#[no_mangle]
pub unsafe extern "C" fn expfun_lattice_moments(
    nu: f64,
    m: u32,
    p_max: usize,
    mu_out: *mut f64,
    ey_out: *mut f64,
) -> ExpfunStatus {
    if mu_out.is_null() || ey_out.is_null() {
        return null_pointer("mu_out/ey_out");
    }
    if p_max == 0 {
        set_error("p_max must be positive");
        return ExpfunStatus::InvalidArgument;
    }
    guarded(|| match lattice_moments(nu, m, p_max) {
        Ok(table) => {
            for k in 1..=p_max {
                *mu_out.add(k - 1) = table.mu[k];
                *ey_out.add(k - 1) = table.ey[k].unwrap_or(f64::INFINITY);
            }
            ExpfunStatus::Ok
        }
        Err(e) => fail(&e),
    })
}

/// Reference moment of the Brownian exponential functional; `sign` is 0
/// for E(I^p), nonzero for E(I^-p).
#[no_mangle]
pub unsafe extern "C" fn expfun_bm_moment(
    nu: f64,
    p: u32,
    sign: i32,
    out: *mut f64,
) -> ExpfunStatus {
    if out.is_null() {
        return null_pointer("out");
    }
    let sign = if sign == 0 {
        MomentSign::Positive
    } else {
        MomentSign::Negative
    };
    guarded(|| match bm_moment(nu, p, sign) {
        Ok(v) => {
            *out = v;
            ExpfunStatus::Ok
        }
        Err(e) => fail(&e),
    })
}

/// Draws `n` independent samples of Y = sum of running products under the
/// law, truncated at relative tail weight `eps`, into `values`. The stream
/// layout is indexed by sample, so results do not depend on thread count.
#[no_mangle]
pub unsafe extern "C" fn expfun_sample_values(
    law: *const ExpfunLaw,
    eps: f64,
    seed: u64,
    n: usize,
    values: *mut f64,
) -> ExpfunStatus {
    let Some(law) = law.as_ref() else {
        return null_pointer("law");
    };
    if values.is_null() {
        return null_pointer("values");
    }
    guarded(|| {
        let base = RngStream::new(seed, 0);
        for i in 0..n {
            let mut rng = base.substream(i as u64 * 32 + 31);
            match sample_y(&law.inner, eps, &mut rng) {
                Ok(s) => *values.add(i) = s.value,
                Err(e) => return fail(&e),
            }
        }
        ExpfunStatus::Ok
    })
}

/// Moran dimension of the attractor of the law's contraction system.
#[no_mangle]
pub unsafe extern "C" fn expfun_hausdorff_dimension(
    law: *const ExpfunLaw,
    out: *mut f64,
) -> ExpfunStatus {
    let Some(law) = law.as_ref() else {
        return null_pointer("law");
    };
    if out.is_null() {
        return null_pointer("out");
    }
    guarded(|| {
        let r = expfun::ifs::build_ifs(&law.inner)
            .and_then(|ifs| expfun::ifs::hausdorff_dimension(&ifs));
        match r {
            Ok(v) => {
                *out = v;
                ExpfunStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Hausdorff measure |I|^s of the attractor at its Moran dimension.
#[no_mangle]
pub unsafe extern "C" fn expfun_hausdorff_measure(
    law: *const ExpfunLaw,
    out: *mut f64,
) -> ExpfunStatus {
    let Some(law) = law.as_ref() else {
        return null_pointer("law");
    };
    if out.is_null() {
        return null_pointer("out");
    }
    guarded(|| {
        let r = expfun::ifs::build_ifs(&law.inner)
            .and_then(|ifs| expfun::ifs::hausdorff_measure(&ifs));
        match r {
            Ok(v) => {
                *out = v;
                ExpfunStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Entropy singularity criterion: `proven` is set when the law of Y is
/// provably singular, `not_applicable` when the criterion is silent.
#[no_mangle]
pub unsafe extern "C" fn expfun_singular(
    law: *const ExpfunLaw,
    proven: *mut bool,
    not_applicable: *mut bool,
) -> ExpfunStatus {
    let Some(law) = law.as_ref() else {
        return null_pointer("law");
    };
    if proven.is_null() || not_applicable.is_null() {
        return null_pointer("proven/not_applicable");
    }
    guarded(|| {
        let v = expfun::ifs::is_singular(&law.inner);
        *proven = v.singular_proven;
        *not_applicable = v.not_applicable;
        ExpfunStatus::Ok
    })
}

/// Rigorous bounds lower <= F(y) <= upper on the distribution function of
/// Y after `depth` subdivision rounds.
#[no_mangle]
pub unsafe extern "C" fn expfun_cdf_enclosure(
    law: *const ExpfunLaw,
    y: f64,
    depth: u32,
    lower: *mut f64,
    upper: *mut f64,
) -> ExpfunStatus {
    let Some(law) = law.as_ref() else {
        return null_pointer("law");
    };
    if lower.is_null() || upper.is_null() {
        return null_pointer("lower/upper");
    }
    guarded(|| match expfun::ifs::build_ifs(&law.inner) {
        Ok(ifs) => {
            let e = ifs.cdf(y, depth);
            *lower = e.lower;
            *upper = e.upper;
            ExpfunStatus::Ok
        }
        Err(e) => fail(&e),
    })
}

/// Coupled tower of twisted walks for levels 0..=m_max; `family` selects
/// an independent replica under the same seed.
#[no_mangle]
pub unsafe extern "C" fn expfun_hierarchy_new(
    m_max: u32,
    nu: f64,
    seed: u64,
    family: u64,
    out: *mut *mut ExpfunHierarchy,
) -> ExpfunStatus {
    if out.is_null() {
        return null_pointer("out");
    }
    guarded(|| {
        let base = RngStream::new(seed, 0);
        match TwistedHierarchy::new(m_max, nu, &base, family) {
            Ok(h) => {
                *out = Box::into_raw(Box::new(ExpfunHierarchy { inner: h, base }));
                ExpfunStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Releases a hierarchy handle; a null handle is ignored.
#[no_mangle]
pub unsafe extern "C" fn expfun_hierarchy_free(h: *mut ExpfunHierarchy) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Rewinds the hierarchy to a fresh replica of another family, reusing
/// the allocated walk storage.
#[no_mangle]
pub unsafe extern "C" fn expfun_hierarchy_reset(
    h: *mut ExpfunHierarchy,
    family: u64,
) -> ExpfunStatus {
    let Some(h) = h.as_mut() else {
        return null_pointer("h");
    };
    h.inner.reset(&h.base, family);
    ExpfunStatus::Ok
}

/// Evaluates the lattice functional Y_m on the level-m path, extending the
/// walk until the truncation tail is below `eps`. `value` receives the
/// functional, `tail_bound` the bound on the discarded tail, `terms` the
/// number of grid terms summed.
#[no_mangle]
pub unsafe extern "C" fn expfun_hierarchy_functional(
    h: *mut ExpfunHierarchy,
    m: u32,
    eps: f64,
    value: *mut f64,
    tail_bound: *mut f64,
    terms: *mut usize,
) -> ExpfunStatus {
    let Some(h) = h.as_mut() else {
        return null_pointer("h");
    };
    if value.is_null() || tail_bound.is_null() || terms.is_null() {
        return null_pointer("value/tail_bound/terms");
    }
    guarded(|| match discrete_functional(&mut h.inner, m, eps) {
        Ok(est) => {
            *value = est.i_estimate;
            *tail_bound = est.tail_bound;
            *terms = est.terms;
            ExpfunStatus::Ok
        }
        Err(e) => fail(&e),
    })
}

/// Exact sup distance between the rescaled paths of two levels on [0, t_max].
#[no_mangle]
pub unsafe extern "C" fn expfun_hierarchy_sup_distance(
    h: *const ExpfunHierarchy,
    m_coarse: u32,
    m_fine: u32,
    t_max: f64,
    out: *mut f64,
) -> ExpfunStatus {
    let Some(h) = h.as_ref() else {
        return null_pointer("h");
    };
    if out.is_null() {
        return null_pointer("out");
    }
    guarded(|| match sup_distance(&h.inner, m_coarse, m_fine, t_max) {
        Ok(v) => {
            *out = v;
            ExpfunStatus::Ok
        }
        Err(e) => fail(&e),
    })
}

/// Draws `n` independent Y_m values through full hierarchies (one family
/// per sample) into `values`; the estimator of the Brownian functional.
#[no_mangle]
pub unsafe extern "C" fn expfun_estimate_i(
    m_fine: u32,
    nu: f64,
    n: usize,
    eps: f64,
    seed: u64,
    values: *mut f64,
) -> ExpfunStatus {
    if values.is_null() {
        return null_pointer("values");
    }
    guarded(|| {
        let base = RngStream::new(seed, 0);
        match expfun::hierarchy::estimate_i(m_fine, nu, n, eps, &base) {
            Ok(set) => {
                std::ptr::copy_nonoverlapping(set.values.as_ptr(), values, n);
                ExpfunStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}
