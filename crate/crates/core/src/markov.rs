//! Order-`k` Markov prefetchers, whose state is the last `k` requests.
//!
//! Rounds `t <= k` have an incomplete history; all of them share one
//! reserved warm-up context. Contexts are created on first visit, so the
//! table holds at most one entry per distinct context actually seen.

use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::fsm::labelled_oracle_hits;
use crate::rng::PolicyRng;
use crate::sage::{EtaConfig, SageState};
use crate::types::{run_policy, CachePolicy, CacheSet, FileId, RequestTrace, RunRecord};

/// Identity of a context: the warm-up bucket, or the last `k` requests
/// packed base-`N` (most recent request in the least significant digit).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ContextKey {
    Warmup,
    Window(u128),
}

/// Sliding window over the last `k` requests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkovContext {
    k: usize,
    n_files: u128,
    modulus: u128,
    window: VecDeque<FileId>,
    code: u128,
}

impl MarkovContext {
    /// Fails when `N^k` does not fit the packed 128-bit key.
    pub fn new(k: usize, n_files: usize) -> Result<Self> {
        if n_files == 0 {
            return Err(Error::domain("library size N must be positive"));
        }
        let modulus = (n_files as u128).checked_pow(k as u32).ok_or_else(|| {
            Error::domain(format!("context space N^k = {n_files}^{k} is too large"))
        })?;
        Ok(Self {
            k,
            n_files: n_files as u128,
            modulus,
            window: VecDeque::with_capacity(k),
            code: 0,
        })
    }

    pub fn order(&self) -> usize {
        self.k
    }

    /// Most recent request last.
    pub fn window(&self) -> Vec<FileId> {
        self.window.iter().copied().collect()
    }

    pub fn is_warm(&self) -> bool {
        self.window.len() == self.k
    }

    pub fn key(&self) -> ContextKey {
        if self.is_warm() {
            ContextKey::Window(self.code)
        } else {
            ContextKey::Warmup
        }
    }

    /// Drop the oldest request and append `x`.
    pub fn shift(&mut self, x: FileId) -> Result<()> {
        if x.index() as u128 >= self.n_files {
            return Err(Error::domain(format!(
                "file {x} outside [0, {})",
                self.n_files
            )));
        }
        if self.k == 0 {
            return Ok(());
        }
        if self.window.len() == self.k {
            self.window.pop_front();
        }
        self.window.push_back(x);
        // Drop the oldest digit before appending so the key never exceeds N^k.
        self.code = (self.code % (self.modulus / self.n_files)) * self.n_files + x.0 as u128;
        Ok(())
    }
}

/// Functional form of [`MarkovContext::shift`].
pub fn shift_context(ctx: &MarkovContext, x: FileId) -> Result<MarkovContext> {
    let mut next = ctx.clone();
    next.shift(x)?;
    Ok(next)
}

/// Context occupied before each request of `trace`.
pub fn context_labels(trace: &RequestTrace, k: usize) -> Result<Vec<ContextKey>> {
    let mut ctx = MarkovContext::new(k, trace.n_files())?;
    trace
        .requests()
        .iter()
        .map(|&x| {
            let key = ctx.key();
            ctx.shift(x)?;
            Ok(key)
        })
        .collect()
}

/// Best order-`k` Markov prefetcher in hindsight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovOracle {
    pub hits: u64,
    pub hit_rate: f64,
    /// Cache misses `L*_{T,k}`.
    pub misses: u64,
}

/// `mu_k`: per context, cache the `C` files requested most often after it.
pub fn offline_markov_hit_rate(
    trace: &RequestTrace,
    k: usize,
    cache_size: usize,
) -> Result<MarkovOracle> {
    if cache_size == 0 || cache_size > trace.n_files() {
        return Err(Error::domain("cache size must lie in [1, N]"));
    }
    let labels = context_labels(trace, k)?;
    let hits = labelled_oracle_hits(labels, trace, cache_size);
    let t = trace.len() as u64;
    Ok(MarkovOracle {
        hits,
        hit_rate: if t == 0 { 0.0 } else { hits as f64 / t as f64 },
        misses: t - hits,
    })
}

/// One SAGE instance per visited order-`k` context, sharing one generator.
#[derive(Debug, Clone)]
pub struct MarkovSagePolicy {
    n_files: usize,
    cache_size: usize,
    eta: EtaConfig,
    ctx: MarkovContext,
    table: HashMap<ContextKey, SageState>,
    rng: PolicyRng,
}

impl MarkovSagePolicy {
    pub fn new(
        n_files: usize,
        cache_size: usize,
        k: usize,
        eta: EtaConfig,
        seed: u64,
    ) -> Result<Self> {
        // Validates (N, C, eta) once up front.
        SageState::new(n_files, cache_size, &eta)?;
        Ok(Self {
            n_files,
            cache_size,
            eta,
            ctx: MarkovContext::new(k, n_files)?,
            table: HashMap::new(),
            rng: PolicyRng::new(seed),
        })
    }

    /// Contexts instantiated so far.
    pub fn contexts(&self) -> usize {
        self.table.len()
    }

    pub fn state(&self, key: &ContextKey) -> Option<&SageState> {
        self.table.get(key)
    }

    fn current_state(&mut self) -> Result<&mut SageState> {
        let key = self.ctx.key();
        if !self.table.contains_key(&key) {
            let fresh = SageState::new(self.n_files, self.cache_size, &self.eta)?;
            self.table.insert(key, fresh);
        }
        Ok(self.table.get_mut(&key).expect("inserted above"))
    }
}

impl CachePolicy for MarkovSagePolicy {
    fn name(&self) -> String {
        format!("markov:{}", self.ctx.order())
    }

    fn prefetch(&mut self) -> Result<CacheSet> {
        let key = self.ctx.key();
        self.current_state()?;
        self.table[&key].predict(&mut self.rng)
    }

    fn observe(&mut self, request: FileId, hit: bool) -> Result<()> {
        let state = self.current_state()?;
        state.update(request)?;
        state.record_outcome(hit);
        self.ctx.shift(request)
    }
}

/// Run order-`k` Markov SAGE over `trace`.
pub fn online_markov_sage(
    trace: &RequestTrace,
    k: usize,
    cache_size: usize,
    eta: EtaConfig,
    seed: u64,
) -> Result<RunRecord> {
    let mut policy = MarkovSagePolicy::new(trace.n_files(), cache_size, k, eta, seed)?;
    run_policy(&mut policy, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fsm::{offline_fsp_hits, FsmSpec};
    use crate::sage::SagePolicy;

    fn ids(v: &[u32]) -> Vec<FileId> {
        v.iter().copied().map(FileId).collect()
    }

    #[test]
    fn shift_examples() {
        let mut ctx = MarkovContext::new(2, 6).unwrap();
        ctx.shift(FileId(1)).unwrap();
        ctx.shift(FileId(5)).unwrap();
        assert_eq!(ctx.window(), ids(&[1, 5]));
        let next = shift_context(&ctx, FileId(2)).unwrap();
        assert_eq!(next.window(), ids(&[5, 2]));
        assert_eq!(next.key(), ContextKey::Window(5 * 6 + 2));

        let mut zero = MarkovContext::new(0, 4).unwrap();
        let key = zero.key();
        for x in 0..4 {
            zero.shift(FileId(x)).unwrap();
            assert_eq!(zero.key(), key);
        }
        assert!(zero.shift(FileId(4)).is_err());
    }

    #[test]
    fn order_one_contexts_on_short_trace() {
        let t = RequestTrace::from_ids(3, &[0, 1, 2]).unwrap();
        let labels = context_labels(&t, 1).unwrap();
        assert_eq!(
            labels,
            vec![
                ContextKey::Warmup,
                ContextKey::Window(0),
                ContextKey::Window(1)
            ]
        );
    }

    #[test]
    fn oversized_context_space_is_rejected() {
        assert!(MarkovContext::new(40, 1000).is_err());
        assert!(MarkovContext::new(12, 1000).is_ok());
    }

    #[test]
    fn order_zero_oracle_is_best_static() {
        let t = RequestTrace::from_ids(4, &[0, 1, 1, 3, 1, 0, 2, 2, 1]).unwrap();
        let m = offline_markov_hit_rate(&t, 0, 2).unwrap();
        let (static_hits, _) = offline_fsp_hits(&FsmSpec::single_state(4).unwrap(), &t, 2).unwrap();
        assert_eq!(m.hits, static_hits);
        assert_eq!(m.misses, 9 - static_hits);
    }

    #[test]
    fn periodic_trace_is_predictable_at_order_one() {
        let ids: Vec<u32> = (0..3000).map(|t| (t % 3) as u32).collect();
        let t = RequestTrace::from_ids(3, &ids).unwrap();
        let m = offline_markov_hit_rate(&t, 1, 1).unwrap();
        // Only the warm-up round can miss.
        assert_eq!(m.hits, 3000);
        let short = offline_markov_hit_rate(&t.truncated(30), 1, 1).unwrap();
        assert!(short.hit_rate <= m.hit_rate);
    }

    #[test]
    fn order_zero_policy_matches_single_state_sage() {
        let t = RequestTrace::from_ids(5, &[0, 4, 4, 2, 1, 4, 0, 0, 3, 4, 2, 4, 4, 1]).unwrap();
        let a = online_markov_sage(&t, 0, 2, EtaConfig::Fixed(0.8), 99).unwrap();
        let mut sage = SagePolicy::new(5, 2, &EtaConfig::Fixed(0.8), 99).unwrap();
        let b = run_policy(&mut sage, &t).unwrap();
        assert_eq!(a.hits, b.hits);
    }

    #[test]
    fn context_table_stays_small() {
        let ids: Vec<u32> = (0..500u32).map(|t| (t * 7 + t / 3) % 4).collect();
        let t = RequestTrace::from_ids(4, &ids).unwrap();
        for k in 0..5 {
            let mut p = MarkovSagePolicy::new(4, 2, k, EtaConfig::Doubling, 1).unwrap();
            run_policy(&mut p, &t).unwrap();
            let limit = (4usize.pow(k as u32) + usize::from(k > 0)).min(t.len());
            assert!(p.contexts() <= limit);
        }
    }
}
