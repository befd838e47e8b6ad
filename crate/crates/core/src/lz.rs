//! The universal policy: an `N`-ary LZ-78 parse tree whose nodes each run
//! their own SAGE instance.
//!
//! Parsing walks from the root along the requested files. When the current
//! node has no child for the request, that child is created (completing a
//! phrase, the shortest string not parsed before) and the walk restarts at
//! the root. Children are created only when first needed, so the tree holds
//! one node per completed phrase plus the root. The fully expanded tree with
//! `N` offspring per internal node has `internal * N + 1` nodes.
//!
//! A request is predicted and learned at the node that is current when it
//! arrives, including the request that completes a phrase.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fsm::labelled_oracle_hits;
use crate::rng::PolicyRng;
use crate::sage::{EtaConfig, SageState};
use crate::types::{run_policy, CachePolicy, CacheSet, FileId, RequestTrace, RunRecord};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LzNode {
    pub parent: Option<usize>,
    pub depth: u32,
    pub symbol: Option<FileId>,
    pub children: HashMap<FileId, usize>,
    /// Requests consumed while this node was current.
    pub visits: u64,
}

impl LzNode {
    fn new(parent: Option<usize>, depth: u32, symbol: Option<FileId>) -> Self {
        Self {
            parent,
            depth,
            symbol,
            children: HashMap::new(),
            visits: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LzTree {
    n_files: usize,
    nodes: Vec<LzNode>,
    current: usize,
    phrase_count: u64,
}

pub const ROOT: usize = 0;

impl LzTree {
    pub fn new(n_files: usize) -> Self {
        Self {
            n_files,
            nodes: vec![LzNode::new(None, 0, None)],
            current: ROOT,
            phrase_count: 0,
        }
    }

    pub fn n_files(&self) -> usize {
        self.n_files
    }

    pub fn nodes(&self) -> &[LzNode] {
        &self.nodes
    }

    /// `c(T)`: materialized nodes including the root.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn phrase_count(&self) -> u64 {
        self.phrase_count
    }

    pub fn current(&self) -> usize {
        self.current
    }

    pub fn max_depth(&self) -> u32 {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Node count of the fully expanded tree (`N` children per internal node).
    pub fn expanded_node_count(&self) -> u64 {
        let internal = self.nodes.iter().filter(|n| !n.children.is_empty()).count() as u64;
        internal * self.n_files as u64 + 1
    }

    /// Consume `x` at the current node. Returns the new node when `x`
    /// completes a phrase.
    pub fn advance(&mut self, x: FileId) -> Result<Option<usize>> {
        if x.index() >= self.n_files {
            return Err(Error::domain(format!(
                "file {x} outside [0, {})",
                self.n_files
            )));
        }
        let cur = self.current;
        self.nodes[cur].visits += 1;
        if let Some(&child) = self.nodes[cur].children.get(&x) {
            self.current = child;
            return Ok(None);
        }
        let id = self.nodes.len();
        let depth = self.nodes[cur].depth + 1;
        self.nodes.push(LzNode::new(Some(cur), depth, Some(x)));
        self.nodes[cur].children.insert(x, id);
        self.phrase_count += 1;
        self.current = ROOT;
        Ok(Some(id))
    }

    /// The phrase spelled by the path from the root to `node`.
    pub fn phrase(&self, node: usize) -> Vec<FileId> {
        let mut out = Vec::with_capacity(self.nodes[node].depth as usize);
        let mut cur = node;
        while let (Some(p), Some(sym)) = (self.nodes[cur].parent, self.nodes[cur].symbol) {
            out.push(sym);
            cur = p;
        }
        out.reverse();
        out
    }

    /// Diagnostics dump, one line per node:
    /// `node_id parent_id depth symbol visit_count` (`-1` for the root's
    /// parent and symbol).
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (id, n) in self.nodes.iter().enumerate() {
            let parent = n.parent.map_or(-1, |p| p as i64);
            let symbol = n.symbol.map_or(-1, |s| s.0 as i64);
            let _ = writeln!(out, "{id} {parent} {} {symbol} {}", n.depth, n.visits);
        }
        out
    }
}

/// Parse a whole trace.
pub fn parse_trace(trace: &RequestTrace) -> LzTree {
    let mut tree = LzTree::new(trace.n_files());
    for &x in trace.requests() {
        tree.advance(x).expect("trace ids are in range");
    }
    tree
}

/// Requests consumed at nodes of depth `< k` and `>= k`.
pub fn j_split_counts(tree: &LzTree, k: u32) -> (u64, u64) {
    tree.nodes.iter().fold((0, 0), |(shallow, deep), n| {
        if n.depth < k {
            (shallow + n.visits, deep)
        } else {
            (shallow, deep + n.visits)
        }
    })
}

/// SAGE at every node of a growing LZ-78 tree.
#[derive(Debug, Clone)]
pub struct LzPolicy {
    cache_size: usize,
    eta: EtaConfig,
    tree: LzTree,
    states: Vec<Option<SageState>>,
    rng: PolicyRng,
}

impl LzPolicy {
    pub fn new(n_files: usize, cache_size: usize, eta: EtaConfig, seed: u64) -> Result<Self> {
        SageState::new(n_files, cache_size, &eta)?;
        Ok(Self {
            cache_size,
            eta,
            tree: LzTree::new(n_files),
            states: Vec::new(),
            rng: PolicyRng::new(seed),
        })
    }

    pub fn tree(&self) -> &LzTree {
        &self.tree
    }

    pub fn into_tree(self) -> LzTree {
        self.tree
    }

    pub fn state(&self, node: usize) -> Option<&SageState> {
        self.states.get(node).and_then(Option::as_ref)
    }

    fn current_state(&mut self) -> Result<&mut SageState> {
        let node = self.tree.current();
        if self.states.len() <= node {
            self.states.resize(node + 1, None);
        }
        if self.states[node].is_none() {
            self.states[node] = Some(SageState::new(
                self.tree.n_files(),
                self.cache_size,
                &self.eta,
            )?);
        }
        Ok(self.states[node].as_mut().expect("created above"))
    }
}

impl CachePolicy for LzPolicy {
    fn name(&self) -> String {
        "lz".into()
    }

    fn prefetch(&mut self) -> Result<CacheSet> {
        self.current_state()?;
        let node = self.tree.current();
        self.states[node]
            .as_ref()
            .expect("created by current_state")
            .predict(&mut self.rng)
    }

    fn observe(&mut self, request: FileId, hit: bool) -> Result<()> {
        let state = self.current_state()?;
        state.update(request)?;
        state.record_outcome(hit);
        self.tree.advance(request)?;
        Ok(())
    }
}

pub fn run_lz_policy(
    trace: &RequestTrace,
    cache_size: usize,
    eta: EtaConfig,
    seed: u64,
) -> Result<(RunRecord, LzTree)> {
    let mut policy = LzPolicy::new(trace.n_files(), cache_size, eta, seed)?;
    let record = run_policy(&mut policy, trace)?;
    Ok((record, policy.into_tree()))
}

/// Best per-node prefetcher for the LZ tree grown by the trace itself.
#[derive(Debug, Clone)]
pub struct LzOracle {
    pub hits: u64,
    /// `L*_{T,LZ}`.
    pub misses: u64,
    pub tree: LzTree,
}

pub fn offline_lz_oracle(trace: &RequestTrace, cache_size: usize) -> Result<LzOracle> {
    if cache_size == 0 || cache_size > trace.n_files() {
        return Err(Error::domain("cache size must lie in [1, N]"));
    }
    let mut tree = LzTree::new(trace.n_files());
    let mut labels = Vec::with_capacity(trace.len());
    for &x in trace.requests() {
        labels.push(tree.current());
        tree.advance(x)?;
    }
    let hits = labelled_oracle_hits(labels, trace, cache_size);
    Ok(LzOracle {
        hits,
        misses: trace.len() as u64 - hits,
        tree,
    })
}

/// Per-node request counts of the tree grown by `trace`, keyed by node id.
pub fn node_request_counts(trace: &RequestTrace) -> HashMap<usize, Vec<u64>> {
    let mut tree = LzTree::new(trace.n_files());
    let mut rows: HashMap<usize, Vec<u64>> = HashMap::new();
    for &x in trace.requests() {
        rows.entry(tree.current())
            .or_insert_with(|| vec![0; trace.n_files()])[x.index()] += 1;
        tree.advance(x).expect("trace ids are in range");
    }
    rows
}
