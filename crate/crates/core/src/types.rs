//! Domain types shared by every policy: file ids, request traces, cache sets
//! and per-run hit accounting.
//!
//! File ids are 0-based throughout the library. Trace files may declare
//! 1-based ids; they are shifted on load (see [`crate::io`]).

use std::fmt;

use crate::error::{Error, Result};

/// Index of a file in the library `[0, N)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FileId(pub u32);

impl FileId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<u32> for FileId {
    fn from(v: u32) -> Self {
        FileId(v)
    }
}

impl fmt::Display for FileId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// An ordered sequence of file requests over a library of `n_files` files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestTrace {
    n_files: usize,
    requests: Vec<FileId>,
}

impl RequestTrace {
    pub fn new(n_files: usize, requests: Vec<FileId>) -> Result<Self> {
        if n_files == 0 {
            return Err(Error::domain("library size N must be positive"));
        }
        if n_files > u32::MAX as usize {
            return Err(Error::domain(
                "library size N does not fit a 32-bit file id",
            ));
        }
        if let Some((t, x)) = requests
            .iter()
            .enumerate()
            .find(|(_, x)| x.index() >= n_files)
        {
            return Err(Error::domain(format!(
                "request {x} at round {} outside library [0, {n_files})",
                t + 1
            )));
        }
        Ok(Self { n_files, requests })
    }

    /// Convenience constructor from raw integer ids.
    pub fn from_ids(n_files: usize, ids: &[u32]) -> Result<Self> {
        Self::new(n_files, ids.iter().copied().map(FileId).collect())
    }

    pub fn n_files(&self) -> usize {
        self.n_files
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    pub fn requests(&self) -> &[FileId] {
        &self.requests
    }

    /// Prefix of the first `t` requests.
    pub fn truncated(&self, t: usize) -> Self {
        Self {
            n_files: self.n_files,
            requests: self.requests[..t.min(self.requests.len())].to_vec(),
        }
    }

    /// Per-file request frequencies over the whole trace.
    pub fn frequencies(&self) -> Vec<u64> {
        let mut freq = vec![0u64; self.n_files];
        for x in &self.requests {
            freq[x.index()] += 1;
        }
        freq
    }
}

/// A set of exactly `C` distinct cached files, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheSet {
    n_files: usize,
    files: Vec<FileId>,
}

impl CacheSet {
    pub fn new(n_files: usize, files: impl IntoIterator<Item = FileId>) -> Result<Self> {
        let mut files: Vec<FileId> = files.into_iter().collect();
        files.sort_unstable();
        if let Some(w) = files.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::domain(format!(
                "duplicate file {} in cache set",
                w[0]
            )));
        }
        if let Some(x) = files.iter().find(|x| x.index() >= n_files) {
            return Err(Error::domain(format!(
                "cached file {x} outside library [0, {n_files})"
            )));
        }
        Ok(Self { n_files, files })
    }

    pub fn from_ids(n_files: usize, ids: &[u32]) -> Result<Self> {
        Self::new(n_files, ids.iter().copied().map(FileId))
    }

    pub fn n_files(&self) -> usize {
        self.n_files
    }

    /// Cache capacity `C`.
    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn files(&self) -> &[FileId] {
        &self.files
    }

    pub fn contains(&self, x: FileId) -> bool {
        self.files.binary_search(&x).is_ok()
    }
}

impl fmt::Display for CacheSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, x) in self.files.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, "}}")
    }
}

/// Unit reward iff the request is cached.
pub fn score_round(cache: &CacheSet, request: FileId) -> Result<u8> {
    if request.index() >= cache.n_files {
        return Err(Error::domain(format!(
            "request {request} outside library [0, {})",
            cache.n_files
        )));
    }
    Ok(u8::from(cache.contains(request)))
}

/// Per-round hit sequence of one policy run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunRecord {
    pub policy_name: String,
    pub hits: Vec<bool>,
    pub cumulative_hits: u64,
}

impl RunRecord {
    pub fn new(policy_name: impl Into<String>) -> Self {
        Self {
            policy_name: policy_name.into(),
            hits: Vec::new(),
            cumulative_hits: 0,
        }
    }

    pub fn from_hits(policy_name: impl Into<String>, hits: Vec<bool>) -> Self {
        let cumulative_hits = hits.iter().filter(|&&h| h).count() as u64;
        Self {
            policy_name: policy_name.into(),
            hits,
            cumulative_hits,
        }
    }

    pub fn push(&mut self, hit: bool) {
        self.hits.push(hit);
        self.cumulative_hits += u64::from(hit);
    }

    /// Number of rounds `T`.
    pub fn rounds(&self) -> usize {
        self.hits.len()
    }

    pub fn misses(&self) -> u64 {
        self.rounds() as u64 - self.cumulative_hits
    }
}

/// Fraction of rounds that were hits.
pub fn hit_rate(record: &RunRecord) -> Result<f64> {
    match record.rounds() {
        0 => Err(Error::EmptyRun),
        t => Ok(record.cumulative_hits as f64 / t as f64),
    }
}

/// Signed difference of cumulative rewards, benchmark minus policy.
pub fn regret(benchmark_hits: u64, policy_hits: u64) -> i64 {
    benchmark_hits as i64 - policy_hits as i64
}

/// An online caching policy: prefetch `C` files, then learn the request.
pub trait CachePolicy {
    fn name(&self) -> String;

    /// Cache contents for the upcoming round.
    fn prefetch(&mut self) -> Result<CacheSet>;

    /// Reveal the round's request and whether the prefetched set hit it.
    fn observe(&mut self, request: FileId, hit: bool) -> Result<()>;
}

/// Replay `trace` against `policy` and record every round's outcome.
pub fn run_policy<P: CachePolicy + ?Sized>(
    policy: &mut P,
    trace: &RequestTrace,
) -> Result<RunRecord> {
    let mut record = RunRecord::new(policy.name());
    record.hits.reserve(trace.len());
    for &x in trace.requests() {
        let cache = policy.prefetch()?;
        let hit = score_round(&cache, x)? == 1;
        policy.observe(x, hit)?;
        record.push(hit);
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_round_examples() {
        // Files 2 and 5 of the 5-file example, shifted to 0-based.
        let cache = CacheSet::from_ids(5, &[1, 4]).unwrap();
        assert_eq!(score_round(&cache, FileId(1)).unwrap(), 1);
        let cache = CacheSet::from_ids(5, &[0, 2]).unwrap();
        assert_eq!(score_round(&cache, FileId(3)).unwrap(), 0);
        let cache = CacheSet::from_ids(1, &[0]).unwrap();
        assert_eq!(score_round(&cache, FileId(0)).unwrap(), 1);
    }

    #[test]
    fn score_round_rejects_out_of_range() {
        let cache = CacheSet::from_ids(3, &[0, 1]).unwrap();
        assert!(matches!(
            score_round(&cache, FileId(3)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn cache_set_validation() {
        assert!(CacheSet::from_ids(3, &[1, 1]).is_err());
        assert!(CacheSet::from_ids(3, &[0, 3]).is_err());
        let c = CacheSet::from_ids(4, &[3, 0]).unwrap();
        assert_eq!(c.files(), &[FileId(0), FileId(3)]);
        assert_eq!(c.to_string(), "{0,3}");
    }

    #[test]
    fn hit_rate_examples() {
        let r = RunRecord::from_hits("a", vec![true; 3]);
        assert_eq!(hit_rate(&r).unwrap(), 1.0);
        let r = RunRecord::from_hits("b", vec![false; 2]);
        assert_eq!(hit_rate(&r).unwrap(), 0.0);
        let mut hits = vec![true; 12];
        hits[7] = false;
        let r = RunRecord::from_hits("c", hits);
        assert!((hit_rate(&r).unwrap() - 11.0 / 12.0).abs() < 1e-12);
        assert!((1.0 - hit_rate(&r).unwrap() - 0.083).abs() < 1e-3);
        assert!(matches!(
            hit_rate(&RunRecord::new("d")),
            Err(Error::EmptyRun)
        ));
    }

    #[test]
    fn regret_is_signed() {
        assert_eq!(regret(11, 8), 3);
        assert_eq!(regret(5, 5), 0);
        assert_eq!(regret(2, 5), -3);
    }

    #[test]
    fn trace_rejects_out_of_range_ids() {
        assert!(RequestTrace::from_ids(3, &[0, 1, 3]).is_err());
        assert!(RequestTrace::from_ids(0, &[]).is_err());
        let t = RequestTrace::from_ids(3, &[0, 2, 2]).unwrap();
        assert_eq!(t.frequencies(), vec![1, 0, 2]);
    }
}
