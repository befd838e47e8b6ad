//! Finite state machines and finite-state prefetchers (FSPs).
//!
//! An FSP is an FSM `(states, g, s0)` plus a prefetcher `f` assigning a cache
//! set to every state. On round `t` it caches `f(s_t)`, sees `x_t`, then moves
//! to `s_{t+1} = g(s_t, x_t)`. For a fixed FSM the best prefetcher in
//! hindsight caches, in each state, the `C` files requested most often
//! while the machine was in that state.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};
use crate::types::{run_policy, CachePolicy, CacheSet, FileId, RequestTrace, RunRecord};

/// Dense transition table over `n_states x n_files`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FsmSpec {
    n_states: usize,
    n_files: usize,
    transition: Vec<u32>,
    initial_state: usize,
}

impl FsmSpec {
    /// `transition[s * n_files + x]` is the successor of state `s` on file `x`.
    pub fn new(
        n_states: usize,
        n_files: usize,
        transition: Vec<u32>,
        initial_state: usize,
    ) -> Result<Self> {
        if n_states == 0 || n_files == 0 {
            return Err(Error::domain("FSM needs at least one state and one file"));
        }
        if transition.len() != n_states * n_files {
            return Err(Error::domain(format!(
                "transition table has {} entries, expected {} x {}",
                transition.len(),
                n_states,
                n_files
            )));
        }
        if let Some(pos) = transition.iter().position(|&s| s as usize >= n_states) {
            return Err(Error::domain(format!(
                "transition ({}, {}) -> {} is not a state",
                pos / n_files,
                pos % n_files,
                transition[pos]
            )));
        }
        if initial_state >= n_states {
            return Err(Error::domain(format!(
                "initial state {initial_state} is not a state"
            )));
        }
        Ok(Self {
            n_states,
            n_files,
            transition,
            initial_state,
        })
    }

    /// The one-state machine; its oracle is the best static cache.
    pub fn single_state(n_files: usize) -> Result<Self> {
        Self::new(1, n_files, vec![0; n_files], 0)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_files(&self) -> usize {
        self.n_files
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn transitions(&self) -> &[u32] {
        &self.transition
    }

    /// `g(s, x)`.
    pub fn step(&self, s: usize, x: FileId) -> Result<usize> {
        if s >= self.n_states {
            return Err(Error::domain(format!(
                "state {s} outside [0, {})",
                self.n_states
            )));
        }
        if x.index() >= self.n_files {
            return Err(Error::domain(format!(
                "file {x} outside [0, {})",
                self.n_files
            )));
        }
        Ok(self.next(s, x))
    }

    #[inline]
    fn next(&self, s: usize, x: FileId) -> usize {
        self.transition[s * self.n_files + x.index()] as usize
    }

    /// State occupied before each request of `trace`.
    pub fn state_sequence(&self, trace: &RequestTrace) -> Result<Vec<usize>> {
        self.check_trace(trace)?;
        let mut s = self.initial_state;
        Ok(trace
            .requests()
            .iter()
            .map(|&x| {
                let cur = s;
                s = self.next(s, x);
                cur
            })
            .collect())
    }

    fn check_trace(&self, trace: &RequestTrace) -> Result<()> {
        if trace.n_files() > self.n_files {
            return Err(Error::domain(format!(
                "trace library N = {} exceeds FSM library N = {}",
                trace.n_files(),
                self.n_files
            )));
        }
        Ok(())
    }
}

/// One cache set per state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prefetcher {
    caches: Vec<CacheSet>,
}

impl Prefetcher {
    pub fn new(caches: Vec<CacheSet>) -> Result<Self> {
        if let Some(w) = caches.windows(2).find(|w| w[0].len() != w[1].len()) {
            return Err(Error::domain(format!(
                "prefetcher cache sizes differ ({} vs {})",
                w[0].len(),
                w[1].len()
            )));
        }
        Ok(Self { caches })
    }

    pub fn n_states(&self) -> usize {
        self.caches.len()
    }

    pub fn cache(&self, s: usize) -> &CacheSet {
        &self.caches[s]
    }

    pub fn caches(&self) -> &[CacheSet] {
        &self.caches
    }
}

/// `N_T(s, x)`: requests for file `x` seen while in state `s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisitCounts {
    n_states: usize,
    n_files: usize,
    table: Vec<u64>,
}

impl VisitCounts {
    pub fn zeros(n_states: usize, n_files: usize) -> Self {
        Self {
            n_states,
            n_files,
            table: vec![0; n_states * n_files],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_files(&self) -> usize {
        self.n_files
    }

    pub fn get(&self, s: usize, x: usize) -> u64 {
        self.table[s * self.n_files + x]
    }

    pub fn row(&self, s: usize) -> &[u64] {
        &self.table[s * self.n_files..(s + 1) * self.n_files]
    }

    pub fn total(&self) -> u64 {
        self.table.iter().sum()
    }
}

/// Replay `trace` from `s0`, counting each request under the state occupied
/// when it arrives.
pub fn visit_counts(spec: &FsmSpec, trace: &RequestTrace) -> Result<VisitCounts> {
    let states = spec.state_sequence(trace)?;
    let mut counts = VisitCounts::zeros(spec.n_states, spec.n_files);
    for (&s, &x) in states.iter().zip(trace.requests()) {
        counts.table[s * spec.n_files + x.index()] += 1;
    }
    Ok(counts)
}

/// Indices of the `c` largest entries of `row`, ties to the smallest index.
pub fn top_c(row: &[u64], c: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[b].cmp(&row[a]).then(a.cmp(&b)));
    idx.truncate(c);
    idx
}

/// Sum of the `c` largest entries of `row`.
pub fn top_c_sum(row: &[u64], c: usize) -> u64 {
    if c >= row.len() {
        return row.iter().sum();
    }
    let mut v = row.to_vec();
    v.select_nth_unstable_by(c - 1, |a, b| b.cmp(a));
    v[..c].iter().sum()
}

/// `f*(s)`: the `C` most requested files in each state.
pub fn optimal_prefetcher(counts: &VisitCounts, cache_size: usize) -> Result<Prefetcher> {
    if cache_size == 0 || cache_size > counts.n_files {
        return Err(Error::domain(format!(
            "cache size C = {cache_size} must lie in [1, N = {}]",
            counts.n_files
        )));
    }
    let caches = (0..counts.n_states)
        .map(|s| {
            let top = top_c(counts.row(s), cache_size);
            CacheSet::new(counts.n_files, top.into_iter().map(|x| FileId(x as u32)))
        })
        .collect::<Result<Vec<_>>>()?;
    Prefetcher::new(caches)
}

/// Hits of the best prefetcher for `spec` in hindsight, and that prefetcher.
pub fn offline_fsp_hits(
    spec: &FsmSpec,
    trace: &RequestTrace,
    cache_size: usize,
) -> Result<(u64, Prefetcher)> {
    let counts = visit_counts(spec, trace)?;
    let prefetcher = optimal_prefetcher(&counts, cache_size)?;
    let hits = (0..spec.n_states)
        .map(|s| {
            prefetcher
                .cache(s)
                .files()
                .iter()
                .map(|x| counts.get(s, x.index()))
                .sum::<u64>()
        })
        .sum();
    Ok((hits, prefetcher))
}

/// Best-in-hindsight hits for an arbitrary state labelling: requests are
/// grouped by the label of the round they arrive in, and each group keeps
/// its `C` most frequent files.
pub fn labelled_oracle_hits<K, I>(labels: I, trace: &RequestTrace, cache_size: usize) -> u64
where
    K: Hash + Eq,
    I: IntoIterator<Item = K>,
{
    let n = trace.n_files();
    let mut rows: HashMap<K, Vec<u64>> = HashMap::new();
    for (label, &x) in labels.into_iter().zip(trace.requests()) {
        rows.entry(label).or_insert_with(|| vec![0; n])[x.index()] += 1;
    }
    rows.values().map(|row| top_c_sum(row, cache_size)).sum()
}

/// Run a fixed FSP over `trace`.
pub fn simulate_fsp(
    spec: &FsmSpec,
    prefetcher: &Prefetcher,
    trace: &RequestTrace,
) -> Result<RunRecord> {
    let mut policy = FspPolicy::new(spec.clone(), prefetcher.clone())?;
    run_policy(&mut policy, trace)
}

/// A fixed FSP as an online policy.
#[derive(Debug, Clone)]
pub struct FspPolicy {
    spec: FsmSpec,
    prefetcher: Prefetcher,
    state: usize,
    name: String,
}

impl FspPolicy {
    pub fn new(spec: FsmSpec, prefetcher: Prefetcher) -> Result<Self> {
        if prefetcher.n_states() != spec.n_states {
            return Err(Error::domain(format!(
                "prefetcher covers {} states, FSM has {}",
                prefetcher.n_states(),
                spec.n_states
            )));
        }
        let state = spec.initial_state;
        Ok(Self {
            spec,
            prefetcher,
            state,
            name: "fsp".into(),
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

impl CachePolicy for FspPolicy {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn prefetch(&mut self) -> Result<CacheSet> {
        Ok(self.prefetcher.cache(self.state).clone())
    }

    fn observe(&mut self, request: FileId, _hit: bool) -> Result<()> {
        self.state = self.spec.step(self.state, request)?;
        Ok(())
    }
}

/// Upper limit on `N (N-1) ... (N-C+1)` for tuple FSPs.
pub const TUPLE_STATE_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Replacement {
    /// Tuple ordered by last request; a hit moves the file to the back.
    Lru,
    /// Tuple ordered by insertion; a hit leaves the state unchanged.
    Fifo,
}

/// LRU or FIFO realized as an FSP whose states are ordered `C`-tuples of
/// distinct files and whose prefetcher caches the tuple itself.
///
/// States are interned on first reach; the full table is only built by
/// [`TupleFsp::materialize`].
#[derive(Debug, Clone)]
pub struct TupleFsp {
    kind: Replacement,
    n_files: usize,
    cache_size: usize,
    tuples: Vec<Vec<FileId>>,
    index: HashMap<Vec<FileId>, usize>,
    current: usize,
}

pub fn lru_fsp(n_files: usize, cache_size: usize) -> Result<TupleFsp> {
    TupleFsp::new(Replacement::Lru, n_files, cache_size)
}

pub fn fifo_fsp(n_files: usize, cache_size: usize) -> Result<TupleFsp> {
    TupleFsp::new(Replacement::Fifo, n_files, cache_size)
}

impl TupleFsp {
    pub fn new(kind: Replacement, n_files: usize, cache_size: usize) -> Result<Self> {
        if cache_size == 0 || cache_size > n_files || n_files > u32::MAX as usize {
            return Err(Error::domain(format!(
                "cache size C = {cache_size} must lie in [1, N = {n_files}]"
            )));
        }
        let states =
            (0..cache_size).fold(1u128, |acc, i| acc.saturating_mul((n_files - i) as u128));
        if states > TUPLE_STATE_LIMIT {
            return Err(Error::ScaleGuard {
                what: "tuple FSP state count",
                size: states,
                limit: TUPLE_STATE_LIMIT,
            });
        }
        let initial: Vec<FileId> = (0..cache_size as u32).map(FileId).collect();
        let mut fsp = Self {
            kind,
            n_files,
            cache_size,
            tuples: Vec::new(),
            index: HashMap::new(),
            current: 0,
        };
        fsp.current = fsp.intern(initial);
        Ok(fsp)
    }

    fn intern(&mut self, tuple: Vec<FileId>) -> usize {
        if let Some(&id) = self.index.get(&tuple) {
            return id;
        }
        let id = self.tuples.len();
        self.index.insert(tuple.clone(), id);
        self.tuples.push(tuple);
        id
    }

    pub fn kind(&self) -> Replacement {
        self.kind
    }

    pub fn cache_size(&self) -> usize {
        self.cache_size
    }

    /// The state `(0, 1, .., C-1)`.
    pub fn initial_state(&self) -> usize {
        0
    }

    /// States reached so far.
    pub fn materialized_states(&self) -> usize {
        self.tuples.len()
    }

    pub fn tuple(&self, s: usize) -> &[FileId] {
        &self.tuples[s]
    }

    /// `f(sigma) = sigma`.
    pub fn cache(&self, s: usize) -> CacheSet {
        CacheSet::new(self.n_files, self.tuples[s].iter().copied())
            .expect("tuple states hold distinct in-range files")
    }

    /// `g(sigma, x)` for the configured replacement rule.
    pub fn step(&mut self, s: usize, x: FileId) -> Result<usize> {
        if x.index() >= self.n_files {
            return Err(Error::domain(format!(
                "file {x} outside [0, {})",
                self.n_files
            )));
        }
        let sigma = &self.tuples[s];
        let next = match (sigma.iter().position(|&f| f == x), self.kind) {
            (Some(_), Replacement::Fifo) => return Ok(s),
            (Some(i), Replacement::Lru) => {
                let mut t = sigma.clone();
                t.remove(i);
                t.push(x);
                t
            }
            (None, _) => {
                let mut t = sigma[1..].to_vec();
                t.push(x);
                t
            }
        };
        Ok(self.intern(next))
    }

    /// Rewind to the initial state.
    pub fn reset(&mut self) {
        self.current = self.initial_state();
    }

    /// Replay `trace` from the initial state.
    pub fn simulate(&mut self, trace: &RequestTrace) -> Result<RunRecord> {
        self.reset();
        run_policy(self, trace)
    }

    /// Explicit `(FsmSpec, Prefetcher)` over every state reachable from the
    /// initial tuple.
    pub fn materialize(&mut self) -> Result<(FsmSpec, Prefetcher)> {
        let mut table: Vec<u32> = Vec::new();
        let mut s = 0;
        while s < self.tuples.len() {
            for x in 0..self.n_files as u32 {
                let next = self.step(s, FileId(x))?;
                table.push(next as u32);
            }
            s += 1;
        }
        let spec = FsmSpec::new(self.tuples.len(), self.n_files, table, self.initial_state())?;
        let prefetcher = Prefetcher::new((0..self.tuples.len()).map(|s| self.cache(s)).collect())?;
        Ok((spec, prefetcher))
    }
}

impl CachePolicy for TupleFsp {
    fn name(&self) -> String {
        match self.kind {
            Replacement::Lru => "lru".into(),
            Replacement::Fifo => "fifo".into(),
        }
    }

    fn prefetch(&mut self) -> Result<CacheSet> {
        Ok(self.cache(self.current))
    }

    fn observe(&mut self, request: FileId, _hit: bool) -> Result<()> {
        self.current = self.step(self.current, request)?;
        Ok(())
    }
}
