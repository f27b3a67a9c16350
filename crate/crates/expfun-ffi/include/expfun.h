#ifndef EXPFUN_H
#define EXPFUN_H

/* Generated by cbindgen from expfun-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef struct ExpfunLaw ExpfunLaw;
typedef struct ExpfunHierarchy ExpfunHierarchy;

// Result of every API call. Values other than OK leave a description in
// the thread-local buffer read by `expfun_last_error`.
typedef enum ExpfunStatus {
  EXPFUN_STATUS_OK = 0,
  EXPFUN_STATUS_INVALID_ARGUMENT = 1,
  EXPFUN_STATUS_NON_CONTRACTIVE = 2,
  EXPFUN_STATUS_OVERLAPPING = 3,
  EXPFUN_STATUS_DIVERGENT = 4,
  EXPFUN_STATUS_UNDEFINED_MOMENT = 5,
  EXPFUN_STATUS_INSUFFICIENT_DATA = 6,
  EXPFUN_STATUS_IO = 7,
  EXPFUN_STATUS_NULL_POINTER = 8,
  EXPFUN_STATUS_PANIC = 9,
} ExpfunStatus;

// Copies the last error message into `buf` (NUL-terminated, truncated to
// `cap` bytes) and returns the full message length in bytes. A null `buf`
// only queries the length.
size_t expfun_last_error(char *buf, size_t cap);

// Static version string of the library.
const char *expfun_version(void);

// Two-atom walk law exp(+-1 - nu) with probability 1/2 each.
enum ExpfunStatus expfun_law_basic(double nu, ExpfunLaw **out);

// Level-m lattice refinement law exp(+-2^-m - nu 4^-m).
enum ExpfunStatus expfun_law_lattice(double nu, uint32_t m, ExpfunLaw **out);

// General finite multiplier law from parallel arrays of length `n_atoms`.
enum ExpfunStatus expfun_law_new(const double *gammas,
                                 const double *probs,
                                 size_t n_atoms,
                                 ExpfunLaw **out);

// Releases a law handle; a null handle is ignored.
void expfun_law_free(ExpfunLaw *law);

// Mean of log xi; negative iff the functional converges.
enum ExpfunStatus expfun_law_log_moment(const ExpfunLaw *law, double *out);

// Writes mu_k = E(xi^k) and E(Y^k) for k = 1..=p_max into arrays of
// length `p_max` (entry k-1 holds order k). Divergent moments are
// written as +infinity.
enum ExpfunStatus expfun_moments(const ExpfunLaw *law,
                                 size_t p_max,
                                 double *mu_out,
                                 double *ey_out);

// Same layout as `expfun_moments` for the scaled lattice functional Y_m.
enum ExpfunStatus expfun_lattice_moments(double nu,
                                         uint32_t m,
                                         size_t p_max,
                                         double *mu_out,
                                         double *ey_out);

// Reference moment of the Brownian exponential functional; `sign` is 0
// for E(I^p), nonzero for E(I^-p).
enum ExpfunStatus expfun_bm_moment(double nu, uint32_t p, int32_t sign, double *out);

// Draws `n` independent samples of Y = sum of running products under the
// law, truncated at relative tail weight `eps`, into `values`. The stream
// layout is indexed by sample, so results do not depend on thread count.
enum ExpfunStatus expfun_sample_values(const ExpfunLaw *law,
                                       double eps,
                                       uint64_t seed,
                                       size_t n,
                                       double *values);

// Moran dimension of the attractor of the law's contraction system.
enum ExpfunStatus expfun_hausdorff_dimension(const ExpfunLaw *law, double *out);

// Hausdorff measure |I|^s of the attractor at its Moran dimension.
enum ExpfunStatus expfun_hausdorff_measure(const ExpfunLaw *law, double *out);

// Entropy singularity criterion: `proven` is set when the law of Y is
// provably singular, `not_applicable` when the criterion is silent.
enum ExpfunStatus expfun_singular(const ExpfunLaw *law, bool *proven, bool *not_applicable);

// Rigorous bounds lower <= F(y) <= upper on the distribution function of
// Y after `depth` subdivision rounds.
enum ExpfunStatus expfun_cdf_enclosure(const ExpfunLaw *law,
                                       double y,
                                       uint32_t depth,
                                       double *lower,
                                       double *upper);

// Coupled tower of twisted walks for levels 0..=m_max; `family` selects
// an independent replica under the same seed.
enum ExpfunStatus expfun_hierarchy_new(uint32_t m_max,
                                       double nu,
                                       uint64_t seed,
                                       uint64_t family,
                                       ExpfunHierarchy **out);

// Releases a hierarchy handle; a null handle is ignored.
void expfun_hierarchy_free(ExpfunHierarchy *h);

// Rewinds the hierarchy to a fresh replica of another family, reusing
// the allocated walk storage.
enum ExpfunStatus expfun_hierarchy_reset(ExpfunHierarchy *h, uint64_t family);

// Evaluates the lattice functional Y_m on the level-m path, extending the
// walk until the truncation tail is below `eps`. `value` receives the
// functional, `tail_bound` the bound on the discarded tail, `terms` the
// number of grid terms summed.
enum ExpfunStatus expfun_hierarchy_functional(ExpfunHierarchy *h,
                                              uint32_t m,
                                              double eps,
                                              double *value,
                                              double *tail_bound,
                                              size_t *terms);

// Exact sup distance between the rescaled paths of two levels on [0, t_max].
enum ExpfunStatus expfun_hierarchy_sup_distance(const ExpfunHierarchy *h,
                                                uint32_t m_coarse,
                                                uint32_t m_fine,
                                                double t_max,
                                                double *out);

// Draws `n` independent Y_m values through full hierarchies (one family
// per sample) into `values`; the estimator of the Brownian functional.
enum ExpfunStatus expfun_estimate_i(uint32_t m_fine,
                                    double nu,
                                    size_t n,
                                    double eps,
                                    uint64_t seed,
                                    double *values);

#endif  /* EXPFUN_H */
