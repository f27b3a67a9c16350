//! Nested simple random walks coupled across dyadic scales. Level m carries
//! an independent fair-coin walk whose excursions between +-2 crossings are
//! sign-matched to the level m-1 steps, so that the rescaled paths
//! B_m(t) = 2^-m S_m(t 4^m) converge uniformly on compacts. The lattice
//! functional Y_m evaluated on these paths converges to the exponential
//! functional of Brownian motion with drift.

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::rng::RngStream;
use rayon::prelude::*;
use serde::Serialize;

/// Hard cap on the refinement level; 4^30 grid points per unit time is
/// already far beyond anything evaluable.
pub const MAX_LEVEL: u32 = 30;

/// One walk level. Raw steps are drawn lazily from the level's own stream
/// (append-only, so the realized path never depends on how growth was
/// chunked); consumed raw steps become twisted steps one for one, recorded
/// as partial sums.
struct Level {
    stream: RngStream,
    raw: Vec<i8>,
    raw_consumed: usize,
    /// prefix[j] = twisted walk value after j steps; prefix[0] = 0.
    prefix: Vec<i64>,
    /// crossings[k-1] = tau_k, the step count after k completed bridges.
    crossings: Vec<usize>,
}

impl Level {
    fn new(stream: RngStream) -> Self {
        Level {
            stream,
            raw: Vec::new(),
            raw_consumed: 0,
            prefix: vec![0],
            crossings: Vec::new(),
        }
    }

    fn twisted_len(&self) -> usize {
        self.prefix.len() - 1
    }

    fn grow_raw(&mut self, at_least_total: usize) {
        let slack = 8 * (at_least_total as f64).sqrt() as usize + 64;
        let target = at_least_total + slack;
        self.raw.reserve(target - self.raw.len());
        while self.raw.len() < target {
            self.raw.push(self.stream.step());
        }
    }
}

/// The coupled family of twisted walks for levels 0..=m_max, sharing one
/// base seed. Each level draws from substream family * 32 + level, so
/// distinct families (Monte Carlo sample indices) never share bits.
pub struct TwistedHierarchy {
    levels: Vec<Level>,
    nu: f64,
    family: u64,
}

/// Read-only view of one rescaled path B_m.
pub struct PathView<'a> {
    level: &'a Level,
    m: u32,
}

/// One evaluation of the lattice functional on a hierarchy path.
/// `value` is the bare sum of step multipliers, `i_estimate = 4^-m value`
/// is the functional itself (the estimator of the Brownian limit), and
/// `tail_bound` bounds what the truncation at `terms` terms discarded, on
/// the `i_estimate` scale.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FunctionalEstimate {
    pub level: u32,
    pub nu: f64,
    pub value: f64,
    pub terms: usize,
    pub tail_bound: f64,
    pub i_estimate: f64,
}

/// A batch of functional values drawn from independent hierarchy families.
#[derive(Clone, Debug, Serialize)]
pub struct SampleSet {
    pub level: u32,
    pub nu: f64,
    pub eps: f64,
    pub values: Vec<f64>,
}

/// Outcome of twisting a raw walk against a parent walk, one-shot form.
#[derive(Clone, Debug)]
pub struct RefineOutcome {
    /// Twisted steps, one per consumed raw step.
    pub twisted: Vec<i8>,
    /// tau_k for k = 1..=bridges, indices into `twisted`.
    pub crossing_times: Vec<usize>,
    /// Raw steps left over (incomplete final bridge or exhausted parent).
    pub raw_left: usize,
}

/// Decomposes `child_raw` at its +-2 crossings and flips each completed
/// bridge whose net sign disagrees with the corresponding parent step.
/// Stops at the first incomplete bridge or when the parent runs out; the
/// outcome reports how far it got. Errors only on malformed steps.
pub fn refine_twist(parent_steps: &[i8], child_raw: &[i8]) -> Result<RefineOutcome> {
    for &s in parent_steps.iter().chain(child_raw) {
        if s != 1 && s != -1 {
            return Err(Error::InvalidArgument(format!(
                "walk steps must be +-1, found {s}"
            )));
        }
    }
    let mut twisted = Vec::with_capacity(child_raw.len());
    let mut crossing_times = Vec::new();
    let mut start = 0usize;
    let mut sum = 0i32;
    let mut pos = 0usize;
    while pos < child_raw.len() && crossing_times.len() < parent_steps.len() {
        sum += child_raw[pos] as i32;
        pos += 1;
        if sum.abs() == 2 {
            let parent = parent_steps[crossing_times.len()] as i32;
            let flip = sum != 2 * parent;
            for &s in &child_raw[start..pos] {
                twisted.push(if flip { -s } else { s });
            }
            crossing_times.push(pos);
            start = pos;
            sum = 0;
        }
    }
    Ok(RefineOutcome {
        twisted,
        crossing_times,
        raw_left: child_raw.len() - start,
    })
}

impl TwistedHierarchy {
    /// A fresh hierarchy for levels 0..=m_max; nothing is sampled yet.
    pub fn new(m_max: u32, nu: f64, base: &RngStream, family: u64) -> Result<Self> {
        if m_max > MAX_LEVEL {
            return Err(Error::InvalidArgument(format!(
                "level {m_max} above the cap {MAX_LEVEL}"
            )));
        }
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "drift nu = {nu} must be positive"
            )));
        }
        let levels = (0..=m_max)
            .map(|m| Level::new(base.substream(family * 32 + m as u64)))
            .collect();
        Ok(TwistedHierarchy { levels, nu, family })
    }

    pub fn m_max(&self) -> u32 {
        self.levels.len() as u32 - 1
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn family(&self) -> u64 {
        self.family
    }

    pub fn twisted_len(&self, m: u32) -> usize {
        self.levels[m as usize].twisted_len()
    }

    /// Twisted walk value after j steps at level m.
    pub fn walk_value(&self, m: u32, j: usize) -> i64 {
        self.levels[m as usize].prefix[j]
    }

    /// Crossing times tau_1, tau_2, ... of level m against level m-1.
    pub fn crossing_times(&self, m: u32) -> &[usize] {
        &self.levels[m as usize].crossings
    }

    /// Extends level m until it holds at least `need` twisted steps,
    /// recursively extending coarser levels as bridges complete.
    pub fn ensure_twisted(&mut self, m: u32, need: usize) {
        ensure_level(&mut self.levels, m as usize, need);
    }

    pub fn path(&self, m: u32) -> PathView<'_> {
        PathView {
            level: &self.levels[m as usize],
            m,
        }
    }

    /// Rewinds to an unsampled hierarchy for another family, keeping the
    /// allocated buffers. Equivalent to `new` with the same arguments;
    /// Monte Carlo loops use it to avoid re-paging tens of megabytes of
    /// walk storage per sample.
    pub fn reset(&mut self, base: &RngStream, family: u64) {
        for (m, level) in self.levels.iter_mut().enumerate() {
            level.stream = base.substream(family * 32 + m as u64);
            level.raw.clear();
            level.raw_consumed = 0;
            level.prefix.clear();
            level.prefix.push(0);
            level.crossings.clear();
        }
        self.family = family;
    }
}

fn ensure_level(levels: &mut [Level], m: usize, need: usize) {
    if m == 0 {
        let level = &mut levels[0];
        if level.twisted_len() >= need {
            return;
        }
        if level.raw.len() < need {
            level.grow_raw(need);
        }
        // The base walk is its own twisted walk.
        level.prefix.reserve(need + 1 - level.prefix.len());
        let mut last = *level.prefix.last().unwrap();
        for j in level.twisted_len()..need {
            last += level.raw[j] as i64;
            level.prefix.push(last);
        }
        level.raw_consumed = need;
        return;
    }
    let (head, tail) = levels.split_at_mut(m);
    let level = &mut tail[0];
    if level.twisted_len() >= need {
        return;
    }
    level.prefix.reserve(need + 1 - level.prefix.len());
    let mut last = *level.prefix.last().unwrap();
    while level.twisted_len() < need {
        let bridge_index = level.crossings.len();
        ensure_level(head, m - 1, bridge_index + 1);
        let parent = &head[m - 1];
        let parent_step = parent.prefix[bridge_index + 1] - parent.prefix[bridge_index];
        // Scan forward to the next +-2 crossing of the unconsumed raw tail.
        let mut sum = 0i64;
        let mut pos = level.raw_consumed;
        loop {
            if pos >= level.raw.len() {
                let deficit = need.saturating_sub(level.twisted_len()).max(1);
                level.grow_raw(level.raw.len() + deficit);
            }
            sum += level.raw[pos] as i64;
            pos += 1;
            if sum == 2 || sum == -2 {
                break;
            }
        }
        let flip = sum != 2 * parent_step;
        if flip {
            for &s in &level.raw[level.raw_consumed..pos] {
                last -= s as i64;
                level.prefix.push(last);
            }
        } else {
            for &s in &level.raw[level.raw_consumed..pos] {
                last += s as i64;
                level.prefix.push(last);
            }
        }
        level.raw_consumed = pos;
        level.crossings.push(level.twisted_len());
        debug_assert_eq!(
            last,
            2 * parent.prefix[bridge_index + 1],
            "crossing value must be twice the parent walk"
        );
    }
}

impl PathView<'_> {
    pub fn level(&self) -> u32 {
        self.m
    }

    /// Largest t with B_m defined on [0, t].
    pub fn horizon(&self) -> f64 {
        self.level.twisted_len() as f64 * 4f64.powi(-(self.m as i32))
    }

    /// B_m at the j-th grid point t = j 4^-m.
    pub fn value_at_grid(&self, j: usize) -> f64 {
        self.level.prefix[j] as f64 * 2f64.powi(-(self.m as i32))
    }

    /// B_m(t), linearly interpolated between grid points.
    pub fn value(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) || t > self.horizon() {
            return Err(Error::InvalidArgument(format!(
                "t = {t} outside the sampled horizon [0, {}]",
                self.horizon()
            )));
        }
        let scale = 4f64.powi(self.m as i32);
        let x = t * scale;
        let j = (x.floor() as usize).min(self.level.twisted_len() - 1);
        let frac = x - j as f64;
        let a = self.value_at_grid(j);
        let b = self.value_at_grid(j + 1);
        Ok(a + (b - a) * frac)
    }
}

/// Exact sup of |B_fine - B_coarse| over [0, t_max]. Both rescaled paths
/// are piecewise linear with nodes on the fine grid, so the sup over the
/// interval is attained at a fine grid point and the scan is exact.
pub fn sup_distance(
    h: &TwistedHierarchy,
    m_coarse: u32,
    m_fine: u32,
    t_max: f64,
) -> Result<f64> {
    if m_coarse > m_fine || m_fine > h.m_max() {
        return Err(Error::InvalidArgument(format!(
            "need m_coarse <= m_fine <= {}, got {m_coarse}, {m_fine}",
            h.m_max()
        )));
    }
    if m_coarse == m_fine {
        return Ok(0.0);
    }
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::InvalidArgument(format!("bad horizon t_max = {t_max}")));
    }
    let n_fine = (t_max * 4f64.powi(m_fine as i32)).ceil() as usize;
    let gap = 2 * (m_fine - m_coarse);
    // Interior points with nonzero fractional part only ever read up to
    // coarse node n_fine >> gap; the exact right endpoint short-circuits.
    let fine = &h.levels[m_fine as usize];
    let coarse = &h.levels[m_coarse as usize];
    if fine.twisted_len() < n_fine || coarse.twisted_len() < (n_fine >> gap) {
        return Err(Error::InsufficientData(format!(
            "hierarchy sampled to horizons {} and {}; extend before comparing to t_max = {t_max}",
            fine.twisted_len() as f64 * 4f64.powi(-(m_fine as i32)),
            coarse.twisted_len() as f64 * 4f64.powi(-(m_coarse as i32)),
        )));
    }
    let sf = 2f64.powi(-(m_fine as i32));
    let sc = 2f64.powi(-(m_coarse as i32));
    let cells = 1u64 << gap;
    let mut sup = 0.0f64;
    for k in 0..=n_fine {
        let b_fine = fine.prefix[k] as f64 * sf;
        let idx = k >> gap;
        let frac = (k as u64 & (cells - 1)) as f64 / cells as f64;
        let a = coarse.prefix[idx] as f64;
        let b_coarse = if frac == 0.0 {
            a * sc
        } else {
            (a + (coarse.prefix[idx + 1] as f64 - a) * frac) * sc
        };
        sup = sup.max((b_fine - b_coarse).abs());
    }
    Ok(sup)
}

/// Y_m on the level-m twisted walk: 4^-m times the sum of running products
/// of the two step multipliers exp(+-2^-m - nu 4^-m). The horizon starts at
/// K_0 = max(10, (2/nu) log(1/eps) + 10) and doubles until either the
/// deterministic geometric tail (when the up-multiplier is below one) or
/// the mass added by the last doubling falls under eps/2.
pub fn discrete_functional(
    h: &mut TwistedHierarchy,
    m: u32,
    eps: f64,
) -> Result<FunctionalEstimate> {
    if m > h.m_max() {
        return Err(Error::InvalidArgument(format!(
            "level {m} not present; hierarchy stops at {}",
            h.m_max()
        )));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "tolerance eps = {eps} must be positive"
        )));
    }
    let nu = h.nu;
    let hstep = 2f64.powi(-(m as i32));
    let scale = hstep * hstep;
    let up = (hstep - nu * scale).exp();
    let down = (-hstep - nu * scale).exp();
    let k0 = 10f64.max((2.0 / nu) * (1.0 / eps).ln() + 10.0);
    let mut horizon = (k0 / scale).ceil() as usize;
    let mut acc = CompensatedSum::with(1.0);
    let mut product = 1.0f64;
    let mut j = 0usize;
    let mut tail_bound;
    loop {
        h.ensure_twisted(m, horizon);
        let level = &h.levels[m as usize];
        let before = acc.value();
        for w in level.prefix[j..=horizon].windows(2) {
            product *= if w[1] > w[0] { up } else { down };
            acc.add(product);
        }
        j = horizon;
        let added = acc.value() - before;
        if up < 1.0 {
            // Supermartingale-free case: every continuation is dominated by
            // the geometric series from the current product.
            tail_bound = product * up / (1.0 - up) * scale;
            if tail_bound <= eps / 2.0 {
                break;
            }
        } else {
            tail_bound = added * scale;
            if added * scale <= eps / 2.0 && j > (k0 / scale).ceil() as usize {
                break;
            }
        }
        horizon *= 2;
    }
    let value = acc.value();
    Ok(FunctionalEstimate {
        level: m,
        nu,
        value,
        terms: j + 1,
        tail_bound,
        i_estimate: value * scale,
    })
}

/// Builds the full hierarchy for levels 0..=m_max with every rescaled path
/// defined on [0, horizon_k].
pub fn build_hierarchy(
    m_max: u32,
    horizon_k: f64,
    nu: f64,
    rng: &RngStream,
) -> Result<TwistedHierarchy> {
    if !(horizon_k > 0.0) || !horizon_k.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "horizon {horizon_k} must be positive"
        )));
    }
    let mut h = TwistedHierarchy::new(m_max, nu, rng, 0)?;
    for m in 0..=m_max {
        let need = (horizon_k * 4f64.powi(m as i32)).ceil() as usize;
        h.ensure_twisted(m, need);
    }
    Ok(h)
}

/// Independent samples of Y_{m_fine}, one hierarchy family per sample,
/// evaluated in parallel with an index-addressed stream layout so the
/// result is identical for any thread count. Levels below 6 are refused:
/// the lattice bias would dominate anything estimated from the samples.
pub fn estimate_i(
    m_fine: u32,
    nu: f64,
    n_samples: usize,
    eps: f64,
    rng: &RngStream,
) -> Result<SampleSet> {
    if m_fine < 6 {
        return Err(Error::InvalidArgument(format!(
            "m_fine = {m_fine} too coarse; need at least 6"
        )));
    }
    if n_samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    // Validate the parameters once so the per-thread constructor cannot fail.
    TwistedHierarchy::new(m_fine, nu, rng, 0)?;
    let values: Result<Vec<f64>> = (0..n_samples as u64)
        .into_par_iter()
        .map_init(
            || TwistedHierarchy::new(m_fine, nu, rng, 0).expect("parameters validated above"),
            |h, i| {
                h.reset(rng, i);
                Ok(discrete_functional(h, m_fine, eps)?.i_estimate)
            },
        )
        .collect();
    Ok(SampleSet {
        level: m_fine,
        nu,
        eps,
        values: values?,
    })
}
