//! Exercises the C ABI through the exported symbols, including the error
//! paths a C caller would hit.

use expfun_ffi::*;
use std::os::raw::c_char;
use std::ptr;

fn last_error() -> String {
    let mut buf = vec![0u8; 256];
    let n = unsafe { expfun_last_error(buf.as_mut_ptr() as *mut c_char, buf.len()) };
    buf.truncate(n.min(buf.len() - 1));
    String::from_utf8(buf).unwrap()
}

#[test]
fn law_lifecycle_and_moments() {
    let mut law: *mut ExpfunLaw = ptr::null_mut();
    let status = unsafe { expfun_law_basic(2.0, &mut law) };
    assert_eq!(status, ExpfunStatus::Ok);
    assert!(!law.is_null());

    let mut lm = 0.0f64;
    assert_eq!(
        unsafe { expfun_law_log_moment(law, &mut lm) },
        ExpfunStatus::Ok
    );
    assert!((lm + 2.0).abs() < 1e-15);

    let mut mu = [0.0f64; 3];
    let mut ey = [0.0f64; 3];
    let status = unsafe { expfun_moments(law, 3, mu.as_mut_ptr(), ey.as_mut_ptr()) };
    assert_eq!(status, ExpfunStatus::Ok);
    assert!((ey[1] - 1.640987681935862).abs() < 1e-12);
    unsafe { expfun_law_free(law) };
}

#[test]
fn divergent_moments_are_infinity() {
    let mut law: *mut ExpfunLaw = ptr::null_mut();
    assert_eq!(
        unsafe { expfun_law_basic(0.5, &mut law) },
        ExpfunStatus::Ok
    );
    let mut mu = [0.0f64; 3];
    let mut ey = [0.0f64; 3];
    assert_eq!(
        unsafe { expfun_moments(law, 3, mu.as_mut_ptr(), ey.as_mut_ptr()) },
        ExpfunStatus::Ok
    );
    assert!(ey[0].is_finite());
    assert!(ey[1].is_infinite() && ey[2].is_infinite());
    unsafe { expfun_law_free(law) };
}

#[test]
fn invalid_arguments_set_the_error_message() {
    let mut law: *mut ExpfunLaw = ptr::null_mut();
    let status = unsafe { expfun_law_basic(-1.0, &mut law) };
    assert_eq!(status, ExpfunStatus::InvalidArgument);
    assert!(law.is_null());
    assert!(last_error().contains("nu"), "message: {}", last_error());

    assert_eq!(
        unsafe { expfun_law_basic(2.0, ptr::null_mut()) },
        ExpfunStatus::NullPointer
    );

    // Length query without a buffer.
    let n = unsafe { expfun_last_error(ptr::null_mut(), 0) };
    assert!(n > 0);
}

#[test]
fn custom_law_roundtrip_and_noncontractive_dimension() {
    let gammas = [0.2f64, 1.1];
    let probs = [0.5f64, 0.5];
    let mut law: *mut ExpfunLaw = ptr::null_mut();
    assert_eq!(
        unsafe { expfun_law_new(gammas.as_ptr(), probs.as_ptr(), 2, &mut law) },
        ExpfunStatus::Ok
    );
    let mut s = 0.0f64;
    assert_eq!(
        unsafe { expfun_hausdorff_dimension(law, &mut s) },
        ExpfunStatus::NonContractive
    );
    unsafe { expfun_law_free(law) };
}

#[test]
fn fractal_suite_matches_library() {
    let mut law: *mut ExpfunLaw = ptr::null_mut();
    assert_eq!(
        unsafe { expfun_law_basic(1.5, &mut law) },
        ExpfunStatus::Ok
    );
    let mut s = 0.0;
    let mut measure = 0.0;
    assert_eq!(
        unsafe { expfun_hausdorff_dimension(law, &mut s) },
        ExpfunStatus::Ok
    );
    assert_eq!(
        unsafe { expfun_hausdorff_measure(law, &mut measure) },
        ExpfunStatus::Ok
    );
    assert!(s > 0.0 && s < 1.0);
    assert!(measure > 0.0);

    let mut proven = false;
    let mut na = true;
    assert_eq!(
        unsafe { expfun_singular(law, &mut proven, &mut na) },
        ExpfunStatus::Ok
    );
    assert!(proven && !na);

    let mut lo = -1.0;
    let mut hi = -1.0;
    assert_eq!(
        unsafe { expfun_cdf_enclosure(law, 1.4524426380095887, 40, &mut lo, &mut hi) },
        ExpfunStatus::Ok
    );
    assert_eq!(lo, 0.5);
    assert_eq!(hi, 0.5);
    unsafe { expfun_law_free(law) };
}

#[test]
fn sampling_matches_the_library_streams() {
    let mut law: *mut ExpfunLaw = ptr::null_mut();
    assert_eq!(
        unsafe { expfun_law_basic(2.0, &mut law) },
        ExpfunStatus::Ok
    );
    let mut values = [0.0f64; 8];
    assert_eq!(
        unsafe { expfun_sample_values(law, 1e-9, 7, values.len(), values.as_mut_ptr()) },
        ExpfunStatus::Ok
    );
    unsafe { expfun_law_free(law) };

    let inner = expfun::law::StepLaw::basic(2.0).unwrap();
    let base = expfun::rng::RngStream::new(7, 0);
    for (i, &v) in values.iter().enumerate() {
        let mut rng = base.substream(i as u64 * 32 + 31);
        let want = expfun::sample::sample_y(&inner, 1e-9, &mut rng).unwrap().value;
        assert_eq!(v.to_bits(), want.to_bits(), "sample {i}");
    }
}

#[test]
fn hierarchy_functional_and_reset() {
    let mut h: *mut ExpfunHierarchy = ptr::null_mut();
    assert_eq!(
        unsafe { expfun_hierarchy_new(5, 2.0, 42, 0, &mut h) },
        ExpfunStatus::Ok
    );
    let mut value = 0.0;
    let mut tail = 0.0;
    let mut terms = 0usize;
    assert_eq!(
        unsafe { expfun_hierarchy_functional(h, 5, 1e-6, &mut value, &mut tail, &mut terms) },
        ExpfunStatus::Ok
    );
    assert!(value > 0.0 && tail <= 1e-6 && terms > 0);

    let mut d = 0.0;
    assert_eq!(
        unsafe { expfun_hierarchy_sup_distance(h, 3, 5, 1.0, &mut d) },
        ExpfunStatus::Ok
    );
    assert!(d >= 0.0);
    assert_eq!(
        unsafe { expfun_hierarchy_sup_distance(h, 5, 3, 1.0, &mut d) },
        ExpfunStatus::InvalidArgument
    );

    // Reset to family 1, then back to family 0: same value again.
    assert_eq!(unsafe { expfun_hierarchy_reset(h, 1) }, ExpfunStatus::Ok);
    let mut other = 0.0;
    assert_eq!(
        unsafe { expfun_hierarchy_functional(h, 5, 1e-6, &mut other, &mut tail, &mut terms) },
        ExpfunStatus::Ok
    );
    assert_ne!(value.to_bits(), other.to_bits());
    assert_eq!(unsafe { expfun_hierarchy_reset(h, 0) }, ExpfunStatus::Ok);
    let mut again = 0.0;
    assert_eq!(
        unsafe { expfun_hierarchy_functional(h, 5, 1e-6, &mut again, &mut tail, &mut terms) },
        ExpfunStatus::Ok
    );
    assert_eq!(value.to_bits(), again.to_bits());
    unsafe { expfun_hierarchy_free(h) };
}

#[test]
fn estimate_matches_library_bitwise() {
    let n = 8usize;
    let mut values = vec![0.0f64; n];
    assert_eq!(
        unsafe { expfun_estimate_i(6, 2.0, n, 1e-6, 5150, values.as_mut_ptr()) },
        ExpfunStatus::Ok
    );
    let base = expfun::rng::RngStream::new(5150, 0);
    let want = expfun::hierarchy::estimate_i(6, 2.0, n, 1e-6, &base).unwrap();
    for (a, b) in values.iter().zip(&want.values) {
        assert_eq!(a.to_bits(), b.to_bits());
    }

    assert_eq!(
        unsafe { expfun_estimate_i(3, 2.0, 4, 1e-6, 0, values.as_mut_ptr()) },
        ExpfunStatus::InvalidArgument
    );
}

#[test]
fn bm_moment_signs_and_version() {
    let mut v = 0.0;
    assert_eq!(unsafe { expfun_bm_moment(2.0, 1, 0, &mut v) }, ExpfunStatus::Ok);
    assert!((v - 2.0 / 3.0).abs() < 1e-14);
    assert_eq!(unsafe { expfun_bm_moment(2.0, 1, 1, &mut v) }, ExpfunStatus::Ok);
    assert!((v - 2.0).abs() < 1e-14);
    assert_eq!(
        unsafe { expfun_bm_moment(2.0, 4, 0, &mut v) },
        ExpfunStatus::UndefinedMoment
    );

    let version = unsafe { std::ffi::CStr::from_ptr(expfun_version()) };
    assert!(!version.to_str().unwrap().is_empty());
}

#[test]
fn lattice_moments_match_library() {
    let mut mu = [0.0f64; 2];
    let mut ey = [0.0f64; 2];
    assert_eq!(
        unsafe { expfun_lattice_moments(2.0, 4, 2, mu.as_mut_ptr(), ey.as_mut_ptr()) },
        ExpfunStatus::Ok
    );
    let table = expfun::moments::lattice_moments(2.0, 4, 2).unwrap();
    assert_eq!(ey[0].to_bits(), table.ey[1].unwrap().to_bits());
    assert_eq!(ey[1].to_bits(), table.ey[2].unwrap().to_bits());
}
