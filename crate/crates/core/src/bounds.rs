//! Closed-form regret and hit-rate bounds.
//!
//! All logarithms are natural. `L = ln(N e / C)` appears in every online
//! bound; it bounds `ln binom(N, C) / C`.

use crate::error::{Error, Result};
use crate::sage::log_ne_over_c;

fn check_nc(n_files: usize, cache_size: usize) -> Result<()> {
    if cache_size == 0 || cache_size > n_files {
        return Err(Error::domain(format!(
            "cache size C = {cache_size} must lie in [1, N = {n_files}]"
        )));
    }
    Ok(())
}

fn check_states(states: u64) -> Result<()> {
    if states == 0 {
        return Err(Error::domain("state count must be at least 1"));
    }
    Ok(())
}

/// Largest hit-rate gap between the best `S`-state FSP and the best order-`k`
/// Markov prefetcher: `min(1 - C/N, sqrt(ln S / (2 (k + 1))))`.
pub fn thm1_gap(states: u64, k: u32, n_files: usize, cache_size: usize) -> Result<f64> {
    check_nc(n_files, cache_size)?;
    check_states(states)?;
    let trivial = 1.0 - cache_size as f64 / n_files as f64;
    let info = ((states as f64).ln() / (2.0 * (k as f64 + 1.0))).sqrt();
    Ok(trivial.min(info))
}

/// Small-loss static regret of SAGE against the best fixed cache:
/// `sqrt(2 C l* L) + C L`.
pub fn static_regret_bound(l_star: f64, n_files: usize, cache_size: usize) -> Result<f64> {
    fsm_regret_bound(1.0, l_star, n_files, cache_size)
}

/// Regret of per-state SAGE against the best prefetcher for a fixed FSM with
/// `S` states: `sqrt(2 C S L* L) + C S L`.
///
/// `states` is real-valued so that `N^k` can exceed `u64`.
pub fn fsm_regret_bound(
    states: f64,
    l_star: f64,
    n_files: usize,
    cache_size: usize,
) -> Result<f64> {
    check_nc(n_files, cache_size)?;
    if !(states >= 1.0) || !(l_star >= 0.0) {
        return Err(Error::domain("need S >= 1 and L* >= 0"));
    }
    let l = log_ne_over_c(n_files, cache_size);
    let c = cache_size as f64;
    Ok((2.0 * c * states * l_star * l).sqrt() + c * states * l)
}

/// [`fsm_regret_bound`] with `S = N^k` contexts.
pub fn markov_regret_bound(k: u32, l_star: f64, n_files: usize, cache_size: usize) -> Result<f64> {
    fsm_regret_bound((n_files as f64).powi(k as i32), l_star, n_files, cache_size)
}

/// Regret of order-`k` Markov SAGE against any `S`-state FSP:
/// `T * thm1_gap + markov_regret_bound`.
pub fn thm2_total_bound(
    states: u64,
    k: u32,
    n_files: usize,
    cache_size: usize,
    horizon: u64,
    l_star_k: f64,
) -> Result<f64> {
    Ok(horizon as f64 * thm1_gap(states, k, n_files, cache_size)?
        + markov_regret_bound(k, l_star_k, n_files, cache_size)?)
}

/// Expected miss fraction of order-`k` Markov SAGE on a trace that some
/// `Q`-state FSP predicts without a miss:
/// `g + sqrt(2 N^k C L g / T) + N^k C L / T` with `g = thm1_gap(Q, k)`.
pub fn miss_fraction_bound(
    states: u64,
    k: u32,
    n_files: usize,
    cache_size: usize,
    horizon: u64,
) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::domain("horizon T must be positive"));
    }
    let g = thm1_gap(states, k, n_files, cache_size)?;
    let contexts = (n_files as f64).powi(k as i32);
    let scale = contexts * cache_size as f64 * log_ne_over_c(n_files, cache_size) / horizon as f64;
    Ok(g + (2.0 * scale * g).sqrt() + scale)
}

/// `delta(B, L*) = sqrt(2 B C L* L) + C B L`.
pub fn lz_delta(nodes: f64, l_star: f64, n_files: usize, cache_size: usize) -> Result<f64> {
    fsm_regret_bound(nodes.max(1.0), l_star, n_files, cache_size)
}

/// Regret of the LZ policy against the order-`k` Markov oracle:
/// `delta(c(T), L*_LZ) + k c(T)`.
pub fn thm3_bound(
    k: u32,
    c_t: u64,
    l_star_lz: f64,
    n_files: usize,
    cache_size: usize,
) -> Result<f64> {
    Ok(lz_delta(c_t as f64, l_star_lz, n_files, cache_size)? + k as f64 * c_t as f64)
}

/// `(k, bound)` for `k` in `0..=max_k`, and the minimizing `k`.
pub fn miss_fraction_sweep(
    states: u64,
    n_files: usize,
    cache_size: usize,
    horizon: u64,
    max_k: u32,
) -> Result<(Vec<(u32, f64)>, u32)> {
    let rows = (0..=max_k)
        .map(|k| {
            Ok((
                k,
                miss_fraction_bound(states, k, n_files, cache_size, horizon)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let best = rows
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|r| r.0)
        .unwrap_or(0);
    Ok((rows, best))
}
