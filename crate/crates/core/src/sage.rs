//! SAGE: Hedge over all `C`-subsets of the library, realized without
//! enumerating subsets.
//!
//! Hedge assigns subset `S` mass proportional to `exp(eta * hits(S))`. The
//! caching reward is linear, so only the per-file inclusion probabilities
//! matter, and those are ratios of elementary symmetric polynomials (ESPs)
//! of the per-file weights `w(i) = exp(eta * R(i))`:
//!
//! ```text
//! p(i) = w(i) * e_{C-1}(w without i) / e_C(w)
//! ```
//!
//! A cache set with exactly these marginals is then drawn by Madow's
//! systematic sampling from a single uniform variate.
//!
//! ESPs are evaluated by the `O(N*C)` recurrence
//! `E[j][k] = E[j-1][k] + w_j * E[j-1][k-1]`. Each column `k` carries its own
//! log-scale so that weights spanning hundreds of orders of magnitude neither
//! overflow nor underflow.

use crate::error::{Error, Result};
use crate::rng::PolicyRng;
use crate::types::{CachePolicy, CacheSet, FileId};

/// Tolerance on `sum(p) - C` for marginal vectors.
pub const MARGINAL_SUM_TOL: f64 = 1e-9;

/// Largest estimated relative error the deletion recurrence may accumulate
/// before `e_k(w_{-i})` is recomputed from scratch.
const DELETION_REL_TOL: f64 = 1e-12;

const RESCALE_HI: f64 = 1e100;
const RESCALE_LO: f64 = 1e-100;

/// `mant * exp(log_scale)`; zero is `mant == 0`.
#[derive(Debug, Clone, Copy)]
struct ScaledColumn {
    mant: f64,
    log_scale: f64,
}

impl ScaledColumn {
    const ZERO: Self = Self {
        mant: 0.0,
        log_scale: 0.0,
    };

    /// Add `mant * exp(log_scale)`.
    fn accumulate(&mut self, mant: f64, log_scale: f64) {
        if self.mant == 0.0 {
            self.mant = mant;
            self.log_scale = log_scale;
        } else {
            let d = log_scale - self.log_scale;
            if d <= 0.0 {
                self.mant += mant * d.exp();
            } else {
                self.mant = self.mant * (-d).exp() + mant;
                self.log_scale = log_scale;
            }
        }
        if self.mant > RESCALE_HI || (self.mant > 0.0 && self.mant < RESCALE_LO) {
            self.log_scale += self.mant.ln();
            self.mant = 1.0;
        }
    }

    fn ln(self) -> f64 {
        if self.mant == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.log_scale + self.mant.ln()
        }
    }
}

/// Natural logs of `e_0 .. e_order` for weights given by their logs.
///
/// Entries of `log_weights` may be `-inf` (zero weight). An ESP that is
/// exactly zero comes back as `-inf`.
pub fn log_esp_all(log_weights: &[f64], order: usize) -> Result<Vec<f64>> {
    if order > log_weights.len() {
        return Err(Error::domain(format!(
            "ESP order {order} exceeds number of weights {}",
            log_weights.len()
        )));
    }
    if let Some(a) = log_weights
        .iter()
        .find(|a| a.is_nan() || **a == f64::INFINITY)
    {
        return Err(Error::Numeric(format!("invalid log-weight {a}")));
    }
    Ok(log_esp_unchecked(log_weights.iter().copied(), order))
}

fn log_esp_unchecked(log_weights: impl Iterator<Item = f64>, order: usize) -> Vec<f64> {
    let mut cols = vec![ScaledColumn::ZERO; order + 1];
    cols[0] = ScaledColumn {
        mant: 1.0,
        log_scale: 0.0,
    };
    for (j, a) in log_weights.enumerate() {
        if a == f64::NEG_INFINITY {
            continue;
        }
        for k in (1..=order.min(j + 1)).rev() {
            let prev = cols[k - 1];
            if prev.mant == 0.0 {
                continue;
            }
            cols[k].accumulate(prev.mant, a + prev.log_scale);
        }
    }
    cols.into_iter().map(ScaledColumn::ln).collect()
}

/// Elementary symmetric polynomials `e_0 .. e_order` of positive weights.
pub fn esp_all(weights: &[f64], order: usize) -> Result<Vec<f64>> {
    let logs = positive_logs(weights)?;
    let log_e = log_esp_all(&logs, order)?;
    exp_all(log_e, "e_k")
}

/// For every `i`, the order-`order` ESP of all weights except `w_i`.
pub fn esp_leave_one_out(weights: &[f64], order: usize) -> Result<Vec<f64>> {
    if weights.is_empty() {
        return Err(Error::domain("leave-one-out ESP needs at least one weight"));
    }
    let logs = positive_logs(weights)?;
    let log_e = log_esp_all(&logs, order)?;
    let loo = log_esp_leave_one_out(&logs, order, &log_e);
    exp_all(loo, "e_k(w_-i)")
}

/// Leave-one-out ESPs in log space by the backward deletion recurrence
/// `f_0 = 1`, `f_k = e_k - w_i f_{k-1}`.
///
/// `log_e` must hold `ln e_0 .. ln e_order` of the full weight vector. Each
/// step divides the surviving fraction `1 - w_i f_{k-1} / e_k` into the
/// rounding error carried so far; once the running estimate exceeds
/// `DELETION_REL_TOL` the value is recomputed without `w_i`.
pub fn log_esp_leave_one_out(log_weights: &[f64], order: usize, log_e: &[f64]) -> Vec<f64> {
    let n = log_weights.len();
    let mut out = Vec::with_capacity(n);
    for (i, &a_i) in log_weights.iter().enumerate() {
        let mut lf = 0.0f64;
        let mut rel_err = 0.0f64;
        let mut stable = order < log_e.len();
        if a_i == f64::NEG_INFINITY {
            // Deleting a zero weight changes nothing.
            out.push(log_e.get(order).copied().unwrap_or(f64::NEG_INFINITY));
            continue;
        }
        for &le in log_e.iter().take(order + 1).skip(1) {
            if !stable {
                break;
            }
            if le == f64::NEG_INFINITY {
                lf = f64::NEG_INFINITY;
                continue;
            }
            let r = (a_i + lf - le).exp();
            let step_err = f64::EPSILON * (4.0 + a_i.abs() + lf.abs() + le.abs());
            let surviving = 1.0 - r;
            rel_err = r * (rel_err + step_err) / surviving + step_err;
            if !(surviving > 0.0 && rel_err <= DELETION_REL_TOL) {
                stable = false;
                break;
            }
            lf = le + (-r).ln_1p();
        }
        if !stable {
            lf = if order > n - 1 {
                f64::NEG_INFINITY
            } else {
                let others = log_weights
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &a)| a);
                log_esp_unchecked(others, order)[order]
            };
        }
        out.push(lf);
    }
    out
}

fn positive_logs(weights: &[f64]) -> Result<Vec<f64>> {
    weights
        .iter()
        .map(|&w| {
            if w > 0.0 && w.is_finite() {
                Ok(w.ln())
            } else {
                Err(Error::domain(format!(
                    "ESP weights must be positive and finite, got {w}"
                )))
            }
        })
        .collect()
}

fn exp_all(logs: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    logs.into_iter()
        .map(|l| {
            let v = l.exp();
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Numeric(format!(
                    "{what} overflows a double (ln = {l})"
                )))
            }
        })
        .collect()
}

/// Per-file inclusion probabilities summing to an integer cache size.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalVector {
    p: Vec<f64>,
    cache_size: usize,
}

impl MarginalVector {
    /// Validate `p`: each entry in `[0, 1]`, sum within
    /// [`MARGINAL_SUM_TOL`] of an integer.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if let Some(v) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Precondition(format!(
                "inclusion probability {v} outside [0, 1]"
            )));
        }
        let sum: f64 = p.iter().sum();
        let c = sum.round();
        if (sum - c).abs() > MARGINAL_SUM_TOL {
            return Err(Error::Precondition(format!(
                "inclusion probabilities sum to {sum}, not an integer"
            )));
        }
        Ok(Self {
            p,
            cache_size: c as usize,
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn cache_size(&self) -> usize {
        self.cache_size
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

/// Madow's systematic sampling: select `C` elements whose inclusion
/// probabilities are exactly `p`.
///
/// With cumulative sums `P_j = p_0 + .. + p_j` (and `P_{-1} = 0`), element
/// `j` is selected when `P_{j-1} <= u + i < P_j` for some `i` in `0..C`.
/// Each interval has length at most one, so no element is selected twice.
pub fn madow_sample(p: &MarginalVector, u: f64) -> Result<CacheSet> {
    if !(0.0..1.0).contains(&u) {
        return Err(Error::Precondition(format!(
            "uniform draw {u} outside [0, 1)"
        )));
    }
    let probs = &p.p;
    let n = probs.len();
    let c = p.cache_size;
    let mut chosen = Vec::with_capacity(c);
    let mut j = 0usize;
    let mut cum = 0.0f64;
    for i in 0..c {
        let target = u + i as f64;
        while j < n && cum + probs[j] <= target {
            cum += probs[j];
            j += 1;
        }
        if j == n {
            // Rounding left P_{N-1} just short of u + C - 1: the draw belongs
            // to the last element with positive mass not yet taken.
            let last = (0..n)
                .rev()
                .find(|&x| probs[x] > 0.0 && !chosen.contains(&x))
                .ok_or_else(|| Error::Numeric("Madow sampling ran out of elements".into()))?;
            chosen.push(last);
            continue;
        }
        chosen.push(j);
        cum += probs[j];
        j += 1;
    }
    CacheSet::new(n, chosen.into_iter().map(|x| FileId(x as u32)))
}

/// How the learning rate is chosen for a [`SageState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaConfig {
    /// A constant learning rate.
    Fixed(f64),
    /// `eta = sqrt(2 ln(Ne/C) / max(1, C * horizon))` for a horizon hint.
    Horizon(u64),
    /// Doubling trick on the state's own misses: the horizon formula with
    /// the horizon replaced by a miss budget `B`, i.e.
    /// `eta = sqrt(2 ln(Ne/C) / (C B))`. `B` starts at 1 and doubles each
    /// time cumulative misses reach it, so `eta` shrinks by `sqrt(2)` per
    /// epoch and tracks the small-loss tuning. Counts are kept across epochs.
    Doubling,
}

/// `ln(N e / C)`.
pub fn log_ne_over_c(n_files: usize, cache_size: usize) -> f64 {
    (n_files as f64).ln() + 1.0 - (cache_size as f64).ln()
}

impl EtaConfig {
    /// Learning rate at the start of a run.
    pub fn initial_eta(&self, n_files: usize, cache_size: usize) -> f64 {
        let l = log_ne_over_c(n_files, cache_size);
        let c = cache_size as f64;
        match *self {
            EtaConfig::Fixed(eta) => eta,
            EtaConfig::Horizon(t) => (2.0 * l / (c * t as f64).max(1.0)).sqrt(),
            EtaConfig::Doubling => (2.0 * l / c).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EtaSchedule {
    Fixed,
    Doubling { budget: u64 },
}

/// Sufficient statistic of the SAGE policy for one context: cumulative
/// per-file request counts plus the learning rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SageState {
    n_files: usize,
    cache_size: usize,
    counts: Vec<u64>,
    updates: u64,
    eta: f64,
    schedule: EtaSchedule,
    misses: u64,
}

impl SageState {
    pub fn new(n_files: usize, cache_size: usize, eta: &EtaConfig) -> Result<Self> {
        if cache_size == 0 || cache_size > n_files {
            return Err(Error::domain(format!(
                "cache size C = {cache_size} must lie in [1, N = {n_files}]"
            )));
        }
        let eta0 = eta.initial_eta(n_files, cache_size);
        if !(eta0 > 0.0 && eta0.is_finite()) {
            return Err(Error::domain(format!(
                "learning rate must be positive, got {eta0}"
            )));
        }
        let schedule = match eta {
            EtaConfig::Doubling => EtaSchedule::Doubling { budget: 1 },
            _ => EtaSchedule::Fixed,
        };
        Ok(Self {
            n_files,
            cache_size,
            counts: vec![0; n_files],
            updates: 0,
            eta: eta0,
            schedule,
            misses: 0,
        })
    }

    /// A fixed-rate state with preset counts.
    pub fn with_counts(cache_size: usize, eta: f64, counts: Vec<u64>) -> Result<Self> {
        let mut s = Self::new(counts.len(), cache_size, &EtaConfig::Fixed(eta))?;
        s.updates = counts.iter().sum();
        s.counts = counts;
        Ok(s)
    }

    pub fn n_files(&self) -> usize {
        self.n_files
    }

    pub fn cache_size(&self) -> usize {
        self.cache_size
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Hedge marginals `p(i) = w(i) e_{C-1}(w_{-i}) / e_C(w)` with
    /// `w(i) = exp(eta (R(i) - max R))`.
    pub fn marginals(&self) -> Result<MarginalVector> {
        let max = self.counts.iter().copied().max().unwrap_or(0);
        let log_w: Vec<f64> = self
            .counts
            .iter()
            .map(|&r| -self.eta * (max - r) as f64)
            .collect();
        marginals_from_log_weights(&log_w, self.cache_size)
    }

    /// Draw this round's cache set; consumes exactly one uniform.
    pub fn predict(&self, rng: &mut PolicyRng) -> Result<CacheSet> {
        let p = self.marginals()?;
        madow_sample(&p, rng.uniform())
    }

    /// Multiply the requested file's weight by `exp(eta)`.
    pub fn update(&mut self, request: FileId) -> Result<()> {
        let slot = self.counts.get_mut(request.index()).ok_or_else(|| {
            Error::domain(format!(
                "request {request} outside library [0, {})",
                self.n_files
            ))
        })?;
        *slot += 1;
        self.updates += 1;
        Ok(())
    }

    /// Feed back whether this state's prediction hit; drives the doubling
    /// schedule and is a no-op for fixed rates.
    pub fn record_outcome(&mut self, hit: bool) {
        if hit {
            return;
        }
        self.misses += 1;
        if let EtaSchedule::Doubling { budget } = &mut self.schedule {
            if self.misses >= *budget {
                *budget *= 2;
                self.eta = EtaConfig::Horizon(*budget).initial_eta(self.n_files, self.cache_size);
            }
        }
    }
}

/// Marginals from log-weights for cache size `cache_size`.
pub fn marginals_from_log_weights(log_w: &[f64], cache_size: usize) -> Result<MarginalVector> {
    let log_e = log_esp_all(log_w, cache_size)?;
    let log_total = log_e[cache_size];
    if !log_total.is_finite() {
        return Err(Error::Numeric(format!(
            "e_C(w) is not finite (ln = {log_total})"
        )));
    }
    let loo = log_esp_leave_one_out(log_w, cache_size - 1, &log_e);
    let mut p: Vec<f64> = log_w
        .iter()
        .zip(&loo)
        .map(|(&a, &f)| (a + f - log_total).exp())
        .collect();
    let sum: f64 = p.iter().sum();
    if !((sum - cache_size as f64).abs() <= MARGINAL_SUM_TOL) {
        return Err(Error::Numeric(format!(
            "marginals sum to {sum}, expected {cache_size}"
        )));
    }
    let scale = cache_size as f64 / sum;
    for v in &mut p {
        *v = (*v * scale).clamp(0.0, 1.0);
    }
    MarginalVector::new(p)
}

/// Largest subset count the brute-force Hedge oracle will enumerate.
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

/// `n choose k` in `u128`, saturating.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Exact Hedge marginals by enumerating every `C`-subset as an expert with
/// mass proportional to `exp(eta * hits(S))`. Test oracle for
/// [`SageState::marginals`].
pub fn hedge_bruteforce_marginals(
    counts: &[u64],
    eta: f64,
    n_files: usize,
    cache_size: usize,
) -> Result<MarginalVector> {
    if counts.len() != n_files {
        return Err(Error::domain("counts length must equal N"));
    }
    if cache_size == 0 || cache_size > n_files {
        return Err(Error::domain("cache size must lie in [1, N]"));
    }
    let experts = binomial(n_files, cache_size);
    if experts > BRUTE_FORCE_LIMIT {
        return Err(Error::ScaleGuard {
            what: "number of C-subsets",
            size: experts,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let mut sorted = counts.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let best: u64 = sorted[..cache_size].iter().sum();

    let mut mass = vec![0.0f64; n_files];
    let mut total = 0.0f64;
    for_each_combination(n_files, cache_size, |subset| {
        let hits: u64 = subset.iter().map(|&i| counts[i]).sum();
        let w = (-eta * (best - hits) as f64).exp();
        total += w;
        for &i in subset {
            mass[i] += w;
        }
    });
    MarginalVector::new(mass.into_iter().map(|m| (m / total).min(1.0)).collect())
}

/// Call `f` on every `k`-subset of `0..n` in lexicographic order.
pub fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Single-state SAGE caching policy with its own generator.
#[derive(Debug, Clone)]
pub struct SagePolicy {
    state: SageState,
    rng: PolicyRng,
}

impl SagePolicy {
    pub fn new(n_files: usize, cache_size: usize, eta: &EtaConfig, seed: u64) -> Result<Self> {
        Ok(Self {
            state: SageState::new(n_files, cache_size, eta)?,
            rng: PolicyRng::new(seed),
        })
    }

    pub fn state(&self) -> &SageState {
        &self.state
    }
}

impl CachePolicy for SagePolicy {
    fn name(&self) -> String {
        "sage".into()
    }

    fn prefetch(&mut self) -> Result<CacheSet> {
        self.state.predict(&mut self.rng)
    }

    fn observe(&mut self, request: FileId, hit: bool) -> Result<()> {
        self.state.update(request)?;
        self.state.record_outcome(hit);
        Ok(())
    }
}
