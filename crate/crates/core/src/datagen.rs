//! Synthetic request traces with a built-in zero-miss prefetcher.
//!
//! A random FSM is drawn together with a `C`-file array `A_s` per state.
//! Each request is picked uniformly from `A_s` of the current state, so the
//! FSP that prefetches `A_s` in state `s` hits every request.
//!
//! Draw order from the seeded stream, fixed so that runs reproduce exactly:
//! the transition table row-major (one `index(Q)` per entry), then each
//! `A_s` by a partial Fisher-Yates shuffle of `0..N`, then `s0`.

use crate::error::{Error, Result};
use crate::fsm::{FsmSpec, Prefetcher};
use crate::rng::PolicyRng;
use crate::types::{CacheSet, FileId, RequestTrace};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticFsm {
    pub spec: FsmSpec,
    /// `A_s` per state, which doubles as the zero-miss prefetcher.
    pub arrays: Prefetcher,
}

impl SyntheticFsm {
    pub fn cache_size(&self) -> usize {
        self.arrays.cache(0).len()
    }
}

fn check_sizes(n_states: usize, n_files: usize, cache_size: usize) -> Result<()> {
    if n_states == 0 || n_files == 0 {
        return Err(Error::domain("need Q >= 1 and N >= 1"));
    }
    if cache_size == 0 || cache_size > n_files {
        return Err(Error::domain(format!(
            "cache size {cache_size} outside [1, {n_files}]"
        )));
    }
    if n_states > u32::MAX as usize || n_files > u32::MAX as usize {
        return Err(Error::domain("Q and N must fit in 32 bits"));
    }
    Ok(())
}

fn sample_subset(rng: &mut PolicyRng, n_files: usize, size: usize) -> Result<CacheSet> {
    let mut pool: Vec<u32> = (0..n_files as u32).collect();
    for j in 0..size {
        let r = j + rng.index(n_files - j);
        pool.swap(j, r);
    }
    CacheSet::from_ids(n_files, &pool[..size])
}

pub fn random_fsm(
    n_states: usize,
    n_files: usize,
    cache_size: usize,
    seed: u64,
) -> Result<SyntheticFsm> {
    check_sizes(n_states, n_files, cache_size)?;
    let mut rng = PolicyRng::new(seed);
    let transition = (0..n_states * n_files)
        .map(|_| rng.index(n_states) as u32)
        .collect();
    let arrays = (0..n_states)
        .map(|_| sample_subset(&mut rng, n_files, cache_size))
        .collect::<Result<Vec<_>>>()?;
    let s0 = rng.index(n_states);
    Ok(SyntheticFsm {
        spec: FsmSpec::new(n_states, n_files, transition, s0)?,
        arrays: Prefetcher::new(arrays)?,
    })
}

/// An order-1 Markov source: the state is the previous request, so
/// `g(s, x) = x` and only the arrays and `s0` are random.
pub fn random_markov1_fsm(n_files: usize, cache_size: usize, seed: u64) -> Result<SyntheticFsm> {
    check_sizes(n_files, n_files, cache_size)?;
    let mut rng = PolicyRng::new(seed);
    let transition = (0..n_files).flat_map(|_| 0..n_files as u32).collect();
    let arrays = (0..n_files)
        .map(|_| sample_subset(&mut rng, n_files, cache_size))
        .collect::<Result<Vec<_>>>()?;
    let s0 = rng.index(n_files);
    Ok(SyntheticFsm {
        spec: FsmSpec::new(n_files, n_files, transition, s0)?,
        arrays: Prefetcher::new(arrays)?,
    })
}

pub fn generate_trace(fsm: &SyntheticFsm, len: usize, seed: u64) -> Result<RequestTrace> {
    let spec = &fsm.spec;
    if fsm.arrays.n_states() != spec.n_states() {
        return Err(Error::domain("one file array per state required"));
    }
    let mut rng = PolicyRng::new(seed);
    let mut s = spec.initial_state();
    let mut requests = Vec::with_capacity(len);
    for _ in 0..len {
        let files = fsm.arrays.cache(s).files();
        let x: FileId = files[rng.index(files.len())];
        requests.push(x);
        s = spec.step(s, x)?;
    }
    RequestTrace::new(spec.n_files(), requests)
}
