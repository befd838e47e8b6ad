//! Text formats for traces and FSMs.
//!
//! Trace: one integer file id per line, optionally preceded by a header
//! `# N=<int> BASE=<0|1>`. Without a header ids are 0-based and `N` is one
//! more than the largest id. 1-based ids are shifted to 0-based on load.
//!
//! FSM: a header line `Q N C`, then `Q` lines of `N` successor states, one
//! line holding the initial state, and optionally `Q` lines of `C` prefetched
//! file ids. States and files are 0-based. Blank lines and `#` comments are
//! ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsm::{FsmSpec, Prefetcher};
use crate::types::{CacheSet, FileId, RequestTrace};

fn data_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Data {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_trace(path: &Path) -> Result<RequestTrace> {
    parse_trace(&read_file(path)?, path)
}

/// Parse trace text; `origin` labels error messages.
pub fn parse_trace(text: &str, origin: &Path) -> Result<RequestTrace> {
    let mut declared_n: Option<usize> = None;
    let mut base = 0u64;
    let mut raw: Vec<(usize, u64)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            if lineno != 1 || !raw.is_empty() {
                return Err(data_err(
                    origin,
                    lineno,
                    "header is only allowed on the first line",
                ));
            }
            for token in header.split_whitespace() {
                let (key, value) = token.split_once('=').ok_or_else(|| {
                    data_err(origin, lineno, format!("bad header token `{token}`"))
                })?;
                let value: u64 = value
                    .parse()
                    .map_err(|_| data_err(origin, lineno, format!("bad header value `{token}`")))?;
                match key {
                    "N" => declared_n = Some(value as usize),
                    "BASE" if value <= 1 => base = value,
                    "BASE" => return Err(data_err(origin, lineno, "BASE must be 0 or 1")),
                    _ => {
                        return Err(data_err(
                            origin,
                            lineno,
                            format!("unknown header key `{key}`"),
                        ))
                    }
                }
            }
            if declared_n.is_none() {
                return Err(data_err(origin, lineno, "header must declare N"));
            }
            continue;
        }
        let id: u64 = line.parse().map_err(|_| {
            data_err(
                origin,
                lineno,
                format!("expected a file id, found `{line}`"),
            )
        })?;
        raw.push((lineno, id));
    }

    let n = match declared_n {
        Some(n) => n,
        None => {
            let max = raw
                .iter()
                .map(|&(_, id)| id)
                .max()
                .ok_or_else(|| data_err(origin, 1, "empty trace without an `N=` header"))?;
            (max + 1) as usize
        }
    };
    if n == 0 || n > u32::MAX as usize {
        return Err(data_err(
            origin,
            1,
            format!("library size N = {n} out of range"),
        ));
    }
    let requests = raw
        .into_iter()
        .map(|(lineno, id)| {
            if id < base || id - base >= n as u64 {
                Err(data_err(
                    origin,
                    lineno,
                    format!("file id {id} outside [{base}, {})", n as u64 + base),
                ))
            } else {
                Ok(FileId((id - base) as u32))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    RequestTrace::new(n, requests)
}

/// Trace text with a 0-based header.
pub fn format_trace(trace: &RequestTrace) -> String {
    let mut out = String::with_capacity(trace.len() * 4 + 16);
    let _ = writeln!(out, "# N={} BASE=0", trace.n_files());
    for x in trace.requests() {
        let _ = writeln!(out, "{x}");
    }
    out
}

/// Parsed FSM file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FsmFile {
    pub spec: FsmSpec,
    pub cache_size: usize,
    pub prefetcher: Option<Prefetcher>,
}

pub fn read_fsm(path: &Path) -> Result<FsmFile> {
    parse_fsm(&read_file(path)?, path)
}

pub fn parse_fsm(text: &str, origin: &Path) -> Result<FsmFile> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let ints = |lineno: usize, line: &str| -> Result<Vec<usize>> {
        line.split_whitespace()
            .map(|t| {
                t.parse::<usize>().map_err(|_| {
                    data_err(origin, lineno, format!("expected an integer, found `{t}`"))
                })
            })
            .collect()
    };
    let mut expect_line = |what: &str| {
        lines.next().ok_or_else(|| {
            data_err(
                origin,
                0,
                format!("unexpected end of file, expected {what}"),
            )
        })
    };

    let (lineno, header) = expect_line("header `Q N C`")?;
    let header = ints(lineno, header)?;
    let [q, n, c] = header[..] else {
        return Err(data_err(origin, lineno, "header must be `Q N C`"));
    };
    if q == 0 || n == 0 || c == 0 || c > n {
        return Err(data_err(
            origin,
            lineno,
            format!("invalid dimensions Q={q} N={n} C={c}"),
        ));
    }

    let mut table = Vec::with_capacity(q * n);
    for s in 0..q {
        let (lineno, line) = expect_line(&format!("transition row {s}"))?;
        let row = ints(lineno, line)?;
        if row.len() != n {
            return Err(data_err(
                origin,
                lineno,
                format!("row has {} entries, expected {n}", row.len()),
            ));
        }
        if let Some(bad) = row.iter().find(|&&t| t >= q) {
            return Err(data_err(
                origin,
                lineno,
                format!("state {bad} outside [0, {q})"),
            ));
        }
        table.extend(row.into_iter().map(|t| t as u32));
    }
    let (lineno, line) = expect_line("initial state")?;
    let init = ints(lineno, line)?;
    let [s0] = init[..] else {
        return Err(data_err(
            origin,
            lineno,
            "initial-state line must hold one integer",
        ));
    };
    if s0 >= q {
        return Err(data_err(
            origin,
            lineno,
            format!("initial state {s0} outside [0, {q})"),
        ));
    }
    let spec =
        FsmSpec::new(q, n, table, s0).map_err(|e| data_err(origin, lineno, e.to_string()))?;

    let mut caches = Vec::new();
    for (lineno, line) in lines.by_ref() {
        let ids = ints(lineno, line)?;
        if ids.len() != c {
            return Err(data_err(
                origin,
                lineno,
                format!("prefetch line has {} ids, expected {c}", ids.len()),
            ));
        }
        let set = CacheSet::new(n, ids.into_iter().map(|x| FileId(x as u32)))
            .map_err(|e| data_err(origin, lineno, e.to_string()))?;
        caches.push(set);
    }
    let prefetcher = match caches.len() {
        0 => None,
        len if len == q => Some(Prefetcher::new(caches)?),
        len => {
            return Err(data_err(
                origin,
                0,
                format!("found {len} prefetch lines, expected {q}"),
            ))
        }
    };
    Ok(FsmFile {
        spec,
        cache_size: c,
        prefetcher,
    })
}

pub fn format_fsm(spec: &FsmSpec, cache_size: usize, prefetcher: Option<&Prefetcher>) -> String {
    let mut out = String::new();
    let n = spec.n_files();
    let _ = writeln!(out, "{} {} {}", spec.n_states(), n, cache_size);
    for row in spec.transitions().chunks(n) {
        let line: Vec<String> = row.iter().map(u32::to_string).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    let _ = writeln!(out, "{}", spec.initial_state());
    if let Some(f) = prefetcher {
        for cache in f.caches() {
            let line: Vec<String> = cache.files().iter().map(FileId::to_string).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("mem")
    }

    #[test]
    fn trace_with_one_based_header() {
        let t = parse_trace("# N=5 BASE=1\n2\n1\n5\n", p()).unwrap();
        assert_eq!(t.n_files(), 5);
        assert_eq!(t.requests(), &[FileId(1), FileId(0), FileId(4)]);
    }

    #[test]
    fn trace_without_header_infers_n() {
        let t = parse_trace("0\n3\n1\n\n", p()).unwrap();
        assert_eq!(t.n_files(), 4);
        assert_eq!(t.len(), 3);
    }

    #[test]
    fn malformed_trace_lines_report_line_numbers() {
        let err = parse_trace("# N=3 BASE=0\n0\nx\n", p()).unwrap_err();
        assert!(matches!(err, Error::Data { line: 3, .. }), "{err}");
        let err = parse_trace("# N=3 BASE=1\n0\n", p()).unwrap_err();
        assert!(matches!(err, Error::Data { line: 2, .. }));
        let err = parse_trace("# N=3 BASE=0\n3\n", p()).unwrap_err();
        assert!(matches!(err, Error::Data { line: 2, .. }));
        assert!(parse_trace("1\n# N=3 BASE=0\n", p()).is_err());
        assert!(parse_trace("", p()).is_err());
        assert!(parse_trace("# N=2 BASE=2\n", p()).is_err());
    }

    #[test]
    fn trace_round_trip() {
        let t = RequestTrace::from_ids(6, &[5, 0, 0, 3]).unwrap();
        assert_eq!(parse_trace(&format_trace(&t), p()).unwrap(), t);
    }

    #[test]
    fn fsm_round_trip_with_prefetcher() {
        let spec = FsmSpec::new(2, 3, vec![1, 0, 0, 1, 1, 0], 1).unwrap();
        let f = Prefetcher::new(vec![
            CacheSet::from_ids(3, &[0, 2]).unwrap(),
            CacheSet::from_ids(3, &[1, 2]).unwrap(),
        ])
        .unwrap();
        let text = format_fsm(&spec, 2, Some(&f));
        assert_eq!(text, "2 3 2\n1 0 0\n1 1 0\n1\n0 2\n1 2\n");
        let parsed = parse_fsm(&text, p()).unwrap();
        assert_eq!(parsed.spec, spec);
        assert_eq!(parsed.prefetcher, Some(f));
        let bare = parse_fsm("# comment\n2 3 2\n1 0 0\n1 1 0\n0\n", p()).unwrap();
        assert!(bare.prefetcher.is_none());
    }

    #[test]
    fn fsm_errors() {
        assert!(matches!(
            parse_fsm("2 3 2\n1 0 0\n1 1 5\n0\n", p()),
            Err(Error::Data { line: 3, .. })
        ));
        assert!(parse_fsm("2 3 2\n1 0 0\n", p()).is_err());
        assert!(parse_fsm("2 3 4\n", p()).is_err());
        assert!(parse_fsm("1 2 1\n0 0\n0\n1\n0\n", p()).is_err());
    }
}
