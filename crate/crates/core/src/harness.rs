//! Config-driven experiments: every listed policy and oracle over one trace
//! (or one generated trace per seed), one result row per `(policy, seed)`.
//!
//! Configs are INI files:
//!
//! ```ini
//! [trace]
//! path = requests.txt        # or a [generator] section instead
//!
//! [generator]
//! states = 50
//! files = 3
//! cache_size = 2
//! length = 100000
//! seed = 7
//! per_seed = false           # true: a fresh trace for every run seed
//!
//! [experiment]
//! cache_size = 2             # defaults to the generator's
//! policies = sage, markov:2, lz, lru, static-oracle, markov-oracle:2
//! eta = horizon              # horizon | doubling | <positive float>
//! seeds = 0..20              # or a list: 1, 2, 5
//! k = 1                      # comparator order for rows without their own
//! out = results.csv
//! ```
//!
//! Relative paths are resolved against the config file's directory. Cells
//! run in parallel, but rows always come back in config order.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ini::Ini;
use rayon::prelude::*;

use crate::bounds;
use crate::datagen::{generate_trace, random_fsm, SyntheticFsm};
use crate::error::{Error, Result};
use crate::fsm::{fifo_fsp, lru_fsp, offline_fsp_hits, FsmSpec};
use crate::io::{read_fsm, read_trace};
use crate::lz::{offline_lz_oracle, run_lz_policy, LzOracle};
use crate::markov::{offline_markov_hit_rate, online_markov_sage, MarkovOracle};
use crate::sage::{EtaConfig, SagePolicy};
use crate::types::{regret, run_policy, RequestTrace};

pub const CSV_HEADER: &str =
    "policy,k,seed,T,N,C,hits,hit_rate,regret_static,regret_markov_k,bound_value";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorSpec {
    pub states: usize,
    pub files: usize,
    pub cache_size: usize,
    pub length: usize,
    pub seed: u64,
    pub per_seed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceSource {
    File(PathBuf),
    Generator(GeneratorSpec),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicySpec {
    Sage,
    Markov(u32),
    /// The LZ policy; the order names the Markov comparator of its bound.
    Lz(Option<u32>),
    Lru,
    Fifo,
    StaticOracle,
    MarkovOracle(u32),
    /// Best prefetcher for an FSM file, or for the generating FSM.
    FspOracle(Option<PathBuf>),
    LzOracle,
}

impl PolicySpec {
    pub fn parse(text: &str, base_dir: &Path) -> std::result::Result<Self, String> {
        let (head, arg) = match text.split_once(':') {
            Some((h, a)) => (h.trim(), Some(a.trim())),
            None => (text.trim(), None),
        };
        let order = |a: Option<&str>| -> std::result::Result<u32, String> {
            let a = a.ok_or_else(|| format!("`{head}` needs an order, as in `{head}:2`"))?;
            a.parse()
                .map_err(|_| format!("bad order `{a}` in `{text}`"))
        };
        let no_arg = |spec: PolicySpec| match arg {
            None => Ok(spec),
            Some(_) => Err(format!("`{head}` takes no argument")),
        };
        match head {
            "sage" => no_arg(PolicySpec::Sage),
            "markov" => Ok(PolicySpec::Markov(order(arg)?)),
            "lz" => Ok(PolicySpec::Lz(arg.map(|a| order(Some(a))).transpose()?)),
            "lru" => no_arg(PolicySpec::Lru),
            "fifo" => no_arg(PolicySpec::Fifo),
            "static-oracle" => no_arg(PolicySpec::StaticOracle),
            "markov-oracle" => Ok(PolicySpec::MarkovOracle(order(arg)?)),
            "fsp-oracle" => Ok(PolicySpec::FspOracle(
                arg.filter(|a| !a.is_empty()).map(|a| base_dir.join(a)),
            )),
            "lz-oracle" => no_arg(PolicySpec::LzOracle),
            _ => Err(format!("unknown policy `{head}`")),
        }
    }

    /// Name written to the `policy` column.
    pub fn label(&self) -> String {
        match self {
            PolicySpec::Sage => "sage".into(),
            PolicySpec::Markov(k) => format!("markov:{k}"),
            PolicySpec::Lz(_) => "lz".into(),
            PolicySpec::Lru => "lru".into(),
            PolicySpec::Fifo => "fifo".into(),
            PolicySpec::StaticOracle => "static-oracle".into(),
            PolicySpec::MarkovOracle(k) => format!("markov-oracle:{k}"),
            PolicySpec::FspOracle(_) => "fsp-oracle".into(),
            PolicySpec::LzOracle => "lz-oracle".into(),
        }
    }

    fn order(&self) -> Option<u32> {
        match *self {
            PolicySpec::Markov(k) | PolicySpec::MarkovOracle(k) | PolicySpec::Lz(Some(k)) => {
                Some(k)
            }
            _ => None,
        }
    }
}

/// Learning-rate choice; `Horizon` takes the trace length as its hint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaSetting {
    Horizon,
    Doubling,
    Fixed(f64),
}

impl EtaSetting {
    pub fn resolve(self, horizon: usize) -> EtaConfig {
        match self {
            EtaSetting::Horizon => EtaConfig::Horizon(horizon as u64),
            EtaSetting::Doubling => EtaConfig::Doubling,
            EtaSetting::Fixed(eta) => EtaConfig::Fixed(eta),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: TraceSource,
    pub cache_size: usize,
    pub policies: Vec<PolicySpec>,
    pub eta: EtaSetting,
    pub seeds: Vec<u64>,
    pub k: u32,
    pub out: Option<PathBuf>,
}

const TRACE_KEYS: &[&str] = &["path"];
const GENERATOR_KEYS: &[&str] = &[
    "states",
    "files",
    "cache_size",
    "length",
    "seed",
    "per_seed",
];
const EXPERIMENT_KEYS: &[&str] = &["cache_size", "policies", "eta", "seeds", "k", "out"];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
}

fn parse_seeds(value: &str) -> Result<Vec<u64>> {
    let key = "experiment.seeds";
    let seeds: Vec<u64> = if let Some((lo, hi)) = value.split_once("..") {
        let (lo, hi): (u64, u64) = (parse_num(key, lo)?, parse_num(key, hi)?);
        (lo..hi).collect()
    } else {
        value
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| parse_num(key, s))
            .collect::<Result<_>>()?
    };
    if seeds.is_empty() {
        return Err(Error::config(key, "no seeds"));
    }
    Ok(seeds)
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::config("<file>", e.to_string()))?;
        for (section, props) in ini.iter() {
            let (name, allowed) = match section {
                Some("trace") => ("trace", TRACE_KEYS),
                Some("generator") => ("generator", GENERATOR_KEYS),
                Some("experiment") => ("experiment", EXPERIMENT_KEYS),
                None if props.is_empty() => continue,
                None => ("", &[][..]),
                Some(other) => return Err(Error::config(other, "unknown section")),
            };
            if let Some((key, _)) = props.iter().find(|(k, _)| !allowed.contains(k)) {
                return Err(Error::config(format!("{name}.{key}"), "unknown key"));
            }
        }
        let get = |section: &str, key: &str| ini.get_from(Some(section), key).map(str::trim);

        let generator = if ini.section(Some("generator")).is_some() {
            let need = |key: &str| {
                get("generator", key)
                    .ok_or_else(|| Error::config(format!("generator.{key}"), "missing"))
            };
            Some(GeneratorSpec {
                states: parse_num("generator.states", need("states")?)?,
                files: parse_num("generator.files", need("files")?)?,
                cache_size: parse_num("generator.cache_size", need("cache_size")?)?,
                length: parse_num("generator.length", need("length")?)?,
                seed: get("generator", "seed").map_or(Ok(0), |v| parse_num("generator.seed", v))?,
                per_seed: get("generator", "per_seed")
                    .map_or(Ok(false), |v| parse_num("generator.per_seed", v))?,
            })
        } else {
            None
        };
        let source = match (get("trace", "path"), generator) {
            (Some(_), Some(_)) => {
                return Err(Error::config(
                    "trace.path",
                    "give either [trace] or [generator], not both",
                ))
            }
            (Some(p), None) => TraceSource::File(base_dir.join(p)),
            (None, Some(g)) => TraceSource::Generator(g),
            (None, None) => return Err(Error::config("trace.path", "no trace source")),
        };

        let cache_size = match (get("experiment", "cache_size"), &source) {
            (Some(v), _) => parse_num("experiment.cache_size", v)?,
            (None, TraceSource::Generator(g)) => g.cache_size,
            (None, TraceSource::File(_)) => {
                return Err(Error::config("experiment.cache_size", "missing"))
            }
        };
        if cache_size == 0 {
            return Err(Error::config("experiment.cache_size", "must be at least 1"));
        }
        if let TraceSource::Generator(g) = &source {
            if g.states == 0 || g.files == 0 || g.cache_size == 0 || g.cache_size > g.files {
                return Err(Error::config(
                    "generator",
                    "need states, files >= 1 and 1 <= cache_size <= files",
                ));
            }
            if cache_size > g.files {
                return Err(Error::config(
                    "experiment.cache_size",
                    "exceeds the number of files",
                ));
            }
        }

        let policies = get("experiment", "policies")
            .ok_or_else(|| Error::config("experiment.policies", "missing"))?
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| {
                PolicySpec::parse(s, base_dir).map_err(|m| Error::config("experiment.policies", m))
            })
            .collect::<Result<Vec<_>>>()?;
        if policies.is_empty() {
            return Err(Error::config(
                "experiment.policies",
                "at least one policy required",
            ));
        }

        let eta = match get("experiment", "eta").unwrap_or("horizon") {
            "horizon" => EtaSetting::Horizon,
            "doubling" => EtaSetting::Doubling,
            v => {
                let eta: f64 = parse_num("experiment.eta", v)?;
                if !(eta > 0.0 && eta.is_finite()) {
                    return Err(Error::config("experiment.eta", "must be positive"));
                }
                EtaSetting::Fixed(eta)
            }
        };
        let seeds = parse_seeds(get("experiment", "seeds").unwrap_or("0"))?;
        let k = get("experiment", "k").map_or(Ok(1), |v| parse_num("experiment.k", v))?;
        let out = get("experiment", "out").map(|p| base_dir.join(p));
        Ok(Self {
            source,
            cache_size,
            policies,
            eta,
            seeds,
            k,
            out,
        })
    }

    /// Offset every run seed, as `--seed-base` does.
    pub fn with_seed_base(mut self, base: u64) -> Self {
        for s in &mut self.seeds {
            *s = s.wrapping_add(base);
        }
        self
    }

    fn row_order(&self, policy: &PolicySpec) -> u32 {
        policy.order().unwrap_or(self.k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub policy: String,
    pub k: u32,
    pub seed: u64,
    pub t: u64,
    pub n: usize,
    pub c: usize,
    pub hits: u64,
    pub hit_rate: f64,
    pub regret_static: i64,
    pub regret_markov_k: i64,
    /// The matching bound: static regret for `sage`, Markov regret for
    /// `markov:k`, the LZ bound for `lz`, the FSP-vs-Markov gap for
    /// `fsp-oracle` and `markov-oracle:k` (the latter only when the
    /// generating state count is known). Empty otherwise.
    pub bound_value: Option<f64>,
}

/// One trace and the oracle values every row on it needs.
struct TraceContext {
    trace: RequestTrace,
    generator: Option<SyntheticFsm>,
    static_hits: u64,
    markov: HashMap<u32, MarkovOracle>,
    lz: Option<LzOracle>,
}

fn load_source(
    config: &ExperimentConfig,
    seed: u64,
) -> Result<(RequestTrace, Option<SyntheticFsm>)> {
    match &config.source {
        TraceSource::File(path) => {
            let trace = read_trace(path)?;
            if config.cache_size > trace.n_files() {
                return Err(Error::config(
                    "experiment.cache_size",
                    format!("exceeds N = {} of the trace", trace.n_files()),
                ));
            }
            Ok((trace, None))
        }
        TraceSource::Generator(g) => {
            let gen_seed = if g.per_seed {
                g.seed.wrapping_add(seed)
            } else {
                g.seed
            };
            let fsm = random_fsm(g.states, g.files, g.cache_size, gen_seed)?;
            let trace = generate_trace(&fsm, g.length, gen_seed ^ 0x9e37_79b9_7f4a_7c15)?;
            Ok((trace, Some(fsm)))
        }
    }
}

fn build_context(config: &ExperimentConfig, seed: u64) -> Result<TraceContext> {
    let (trace, generator) = load_source(config, seed)?;
    if trace.is_empty() {
        return Err(Error::EmptyRun);
    }
    let c = config.cache_size;
    let mut ks: Vec<u32> = config
        .policies
        .iter()
        .map(|p| config.row_order(p))
        .collect();
    ks.sort_unstable();
    ks.dedup();
    let markov = ks
        .into_iter()
        .map(|k| Ok((k, offline_markov_hit_rate(&trace, k as usize, c)?)))
        .collect::<Result<HashMap<_, _>>>()?;
    let static_hits = offline_markov_hit_rate(&trace, 0, c)?.hits;
    let wants_lz = config
        .policies
        .iter()
        .any(|p| matches!(p, PolicySpec::Lz(_) | PolicySpec::LzOracle));
    let lz = if wants_lz {
        Some(offline_lz_oracle(&trace, c)?)
    } else {
        None
    };
    Ok(TraceContext {
        trace,
        generator,
        static_hits,
        markov,
        lz,
    })
}

fn run_cell(
    config: &ExperimentConfig,
    ctx: &TraceContext,
    policy: &PolicySpec,
    seed: u64,
) -> Result<ResultRow> {
    let trace = &ctx.trace;
    let (n, c) = (trace.n_files(), config.cache_size);
    let t = trace.len() as u64;
    let k = config.row_order(policy);
    let markov_k = &ctx.markov[&k];
    let eta = config.eta.resolve(trace.len());
    let state_hint = match &config.source {
        TraceSource::Generator(g) => Some(g.states as u64),
        TraceSource::File(_) => None,
    };

    let (hits, bound) = match policy {
        PolicySpec::Sage => {
            let mut p = SagePolicy::new(n, c, &eta, seed)?;
            let run = run_policy(&mut p, trace)?;
            let l_star = (t - ctx.static_hits) as f64;
            (
                run.cumulative_hits,
                Some(bounds::static_regret_bound(l_star, n, c)?),
            )
        }
        PolicySpec::Markov(k) => {
            let run = online_markov_sage(trace, *k as usize, c, eta, seed)?;
            let bound = bounds::markov_regret_bound(*k, markov_k.misses as f64, n, c)?;
            (run.cumulative_hits, Some(bound))
        }
        PolicySpec::Lz(_) => {
            let (run, tree) = run_lz_policy(trace, c, eta, seed)?;
            let oracle = ctx.lz.as_ref().expect("lz oracle computed for lz rows");
            let bound =
                bounds::thm3_bound(k, tree.node_count() as u64, oracle.misses as f64, n, c)?;
            (run.cumulative_hits, Some(bound))
        }
        PolicySpec::Lru => (lru_fsp(n, c)?.simulate(trace)?.cumulative_hits, None),
        PolicySpec::Fifo => (fifo_fsp(n, c)?.simulate(trace)?.cumulative_hits, None),
        PolicySpec::StaticOracle => (ctx.static_hits, None),
        PolicySpec::MarkovOracle(k) => {
            let bound = state_hint
                .map(|q| bounds::thm1_gap(q, *k, n, c))
                .transpose()?;
            (markov_k.hits, bound)
        }
        PolicySpec::FspOracle(path) => {
            let spec: FsmSpec = match (path, &ctx.generator) {
                (Some(path), _) => read_fsm(path)?.spec,
                (None, Some(g)) => g.spec.clone(),
                (None, None) => {
                    return Err(Error::config(
                        "experiment.policies",
                        "fsp-oracle needs a path unless the trace is generated",
                    ))
                }
            };
            if spec.n_files() != n {
                return Err(Error::Precondition(format!(
                    "FSM has {} files but the trace has {n}",
                    spec.n_files()
                )));
            }
            let (hits, _) = offline_fsp_hits(&spec, trace, c)?;
            (
                hits,
                Some(bounds::thm1_gap(spec.n_states() as u64, k, n, c)?),
            )
        }
        PolicySpec::LzOracle => (ctx.lz.as_ref().expect("lz oracle computed").hits, None),
    };

    Ok(ResultRow {
        policy: policy.label(),
        k,
        seed,
        t,
        n,
        c,
        hits,
        hit_rate: hits as f64 / t as f64,
        regret_static: regret(ctx.static_hits, hits),
        regret_markov_k: regret(markov_k.hits, hits),
        bound_value: bound,
    })
}

/// Run every `(policy, seed)` cell. Rows are ordered policy-major, then by
/// seed, as listed in the config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let per_seed = matches!(&config.source, TraceSource::Generator(g) if g.per_seed);
    let trace_seeds: Vec<u64> = if per_seed {
        config.seeds.clone()
    } else {
        vec![0]
    };
    let contexts = trace_seeds
        .par_iter()
        .map(|&s| build_context(config, s))
        .collect::<Result<Vec<_>>>()?;

    let cells: Vec<(&PolicySpec, usize)> = config
        .policies
        .iter()
        .flat_map(|p| (0..config.seeds.len()).map(move |i| (p, i)))
        .collect();
    cells
        .par_iter()
        .map(|&(policy, i)| {
            let ctx = &contexts[if per_seed { i } else { 0 }];
            run_cell(config, ctx, policy, config.seeds[i])
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.policy,
            r.k,
            r.seed,
            r.t,
            r.n,
            r.c,
            r.hits,
            r.hit_rate,
            r.regret_static,
            r.regret_markov_k,
            fmt_opt(r.bound_value)
        );
    }
    out
}

/// Inverse of [`to_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>> {
    let origin = PathBuf::from("<csv>");
    let bad = |line: usize, msg: String| Error::Data {
        path: origin.clone(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(bad(1, "missing header".into())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 11 {
            return Err(bad(i + 1, format!("expected 11 fields, found {}", f.len())));
        }
        macro_rules! field {
            ($idx:expr) => {
                f[$idx]
                    .parse()
                    .map_err(|_| bad(i + 1, format!("bad field `{}`", f[$idx])))?
            };
        }
        rows.push(ResultRow {
            policy: f[0].to_string(),
            k: field!(1),
            seed: field!(2),
            t: field!(3),
            n: field!(4),
            c: field!(5),
            hits: field!(6),
            hit_rate: field!(7),
            regret_static: field!(8),
            regret_markov_k: field!(9),
            bound_value: if f[10].is_empty() {
                None
            } else {
                Some(field!(10))
            },
        });
    }
    Ok(rows)
}

/// Mean and standard error of a group of rows sharing `(policy, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryLine {
    pub policy: String,
    pub k: u32,
    pub runs: usize,
    pub mean_hit_rate: f64,
    pub stderr_hit_rate: f64,
    pub mean_regret_static: f64,
    pub mean_regret_markov_k: f64,
}

pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryLine> {
    let mut order: Vec<(String, u32)> = Vec::new();
    let mut groups: HashMap<(String, u32), Vec<&ResultRow>> = HashMap::new();
    for r in rows {
        let key = (r.policy.clone(), r.k);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let g = &groups[&key];
            let rates: Vec<f64> = g.iter().map(|r| r.hit_rate).collect();
            let (mean, se) = mean_stderr(&rates);
            let avg = |f: fn(&ResultRow) -> i64| {
                g.iter().map(|r| f(r) as f64).sum::<f64>() / g.len() as f64
            };
            SummaryLine {
                policy: key.0,
                k: key.1,
                runs: g.len(),
                mean_hit_rate: mean,
                stderr_hit_rate: se,
                mean_regret_static: avg(|r| r.regret_static),
                mean_regret_markov_k: avg(|r| r.regret_markov_k),
            }
        })
        .collect()
}

/// Aligned text table of [`summarize`].
pub fn format_summary(lines: &[SummaryLine]) -> String {
    let width = lines
        .iter()
        .map(|l| l.policy.len())
        .max()
        .unwrap_or(6)
        .max(6);
    let mut out = format!(
        "{:<width$}  {:>3}  {:>4}  {:>21}  {:>13}  {:>15}\n",
        "policy", "k", "runs", "hit_rate", "regret_static", "regret_markov_k"
    );
    for l in lines {
        let _ = writeln!(
            out,
            "{:<width$}  {:>3}  {:>4}  {:>10.6} ± {:<8.6}  {:>13.2}  {:>15.2}",
            l.policy,
            l.k,
            l.runs,
            l.mean_hit_rate,
            l.stderr_hit_rate,
            l.mean_regret_static,
            l.mean_regret_markov_k
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{format_fsm, format_trace, write_file};

    fn cfg(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::parse(text, Path::new("/data"))
    }

    #[test]
    fn parses_full_config() {
        let c = cfg(
            "[generator]\nstates=5\nfiles=4\ncache_size=2\nlength=100\nseed=3\n\
                     [experiment]\npolicies = sage, markov:2, lz:1, fsp-oracle:m.fsm, lz-oracle\n\
                     eta = doubling\nseeds = 0..3\nout = r.csv\n",
        )
        .unwrap();
        assert_eq!(c.cache_size, 2);
        assert_eq!(c.seeds, vec![0, 1, 2]);
        assert_eq!(c.eta, EtaSetting::Doubling);
        assert_eq!(c.out, Some(PathBuf::from("/data/r.csv")));
        assert_eq!(
            c.policies,
            vec![
                PolicySpec::Sage,
                PolicySpec::Markov(2),
                PolicySpec::Lz(Some(1)),
                PolicySpec::FspOracle(Some(PathBuf::from("/data/m.fsm"))),
                PolicySpec::LzOracle,
            ]
        );
        assert_eq!(c.clone().with_seed_base(10).seeds, vec![10, 11, 12]);
    }

    #[test]
    fn config_errors_name_the_key() {
        let key_of = |text: &str| match cfg(text) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected config error, got {other:?}"),
        };
        assert_eq!(
            key_of("[trace]\npath=t\n[experiment]\ncache_size=1\n"),
            "experiment.policies"
        );
        assert_eq!(
            key_of("[trace]\npath=t\n[experiment]\npolicies=sage\n"),
            "experiment.cache_size"
        );
        assert_eq!(
            key_of("[trace]\npath=t\n[experiment]\ncache_size=1\npolicies=sage,bogus\n"),
            "experiment.policies"
        );
        assert_eq!(
            key_of("[trace]\npath=t\n[experiment]\ncache_size=1\npolicies=sage\neta=-1\n"),
            "experiment.eta"
        );
        assert_eq!(
            key_of("[trace]\npath=t\n[experiment]\ncache_size=1\npolicies=sage\ncolour=red\n"),
            "experiment.colour"
        );
        assert_eq!(
            key_of("[generator]\nstates=2\n[experiment]\npolicies=sage\n"),
            "generator.files"
        );
        assert_eq!(
            key_of("[experiment]\npolicies=sage\ncache_size=1\n"),
            "trace.path"
        );
        assert_eq!(
            key_of("[trace]\npath=t\n[experiment]\ncache_size=1\npolicies=markov\n"),
            "experiment.policies"
        );
    }

    #[test]
    fn worked_fsm_example_through_the_harness() {
        let dir = tempfile::tempdir().unwrap();
        let spec =
            FsmSpec::new(3, 5, vec![0, 1, 0, 0, 0, 2, 0, 2, 0, 0, 0, 0, 0, 0, 0], 0).unwrap();
        let trace = RequestTrace::from_ids(5, &[1, 0, 4, 1, 2, 4, 1, 3, 4, 1, 2, 3]).unwrap();
        write_file(&dir.path().join("fig2.fsm"), &format_fsm(&spec, 2, None)).unwrap();
        write_file(&dir.path().join("fig2.txt"), &format_trace(&trace)).unwrap();
        let c = ExperimentConfig::parse(
            "[trace]\npath=fig2.txt\n[experiment]\ncache_size=2\npolicies=fsp-oracle:fig2.fsm\n",
            dir.path(),
        )
        .unwrap();
        let rows = run_experiment(&c).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].hits, 11);
        assert!((rows[0].hit_rate - 0.9167).abs() < 5e-5);
    }

    #[test]
    fn static_oracle_on_short_trace() {
        let dir = tempfile::tempdir().unwrap();
        write_file(&dir.path().join("t.txt"), "# N=4 BASE=1\n1\n1\n2\n3\n").unwrap();
        let c = ExperimentConfig::parse(
            "[trace]\npath=t.txt\n[experiment]\ncache_size=1\npolicies=sage,static-oracle\nseeds=0,1\n",
            dir.path(),
        )
        .unwrap();
        let rows = run_experiment(&c).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[2].policy, "static-oracle");
        assert_eq!(rows[2].hits, 2);
        assert_eq!(rows[2].regret_static, 0);
        for r in &rows[..2] {
            assert_eq!(r.regret_static, 2 - r.hits as i64);
            let bound = bounds::static_regret_bound(2.0, 4, 1).unwrap();
            assert_eq!(r.bound_value, Some(bound));
        }
    }

    fn generated(policies: &str, extra: &str) -> ExperimentConfig {
        cfg(&format!(
            "[generator]\nstates=6\nfiles=3\ncache_size=1\nlength=2000\nseed=5\n{extra}\
             [experiment]\npolicies={policies}\nseeds=0..3\neta=doubling\n"
        ))
        .unwrap()
    }

    #[test]
    fn deterministic_and_ordered() {
        let c = generated("sage, markov:1, lz, lru, fifo, lz-oracle, fsp-oracle", "");
        let a = to_csv(&run_experiment(&c).unwrap());
        let b = to_csv(&run_experiment(&c).unwrap());
        assert_eq!(a, b);
        let rows = parse_csv(&a).unwrap();
        let labels: Vec<&str> = rows.iter().map(|r| r.policy.as_str()).collect();
        assert_eq!(&labels[..4], ["sage", "sage", "sage", "markov:1"]);
        assert_eq!(
            rows.iter().map(|r| r.seed).take(3).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
        // The generating FSP never misses.
        assert!(rows
            .iter()
            .filter(|r| r.policy == "fsp-oracle")
            .all(|r| r.hits == 2000));
    }

    #[test]
    fn per_seed_traces_differ() {
        let c = generated("static-oracle", "per_seed=true\n");
        let rows = run_experiment(&c).unwrap();
        let hits: Vec<u64> = rows.iter().map(|r| r.hits).collect();
        assert!(hits.windows(2).any(|w| w[0] != w[1]), "{hits:?}");
    }

    #[test]
    fn bound_columns_match_bounds_module() {
        let c = generated("markov:2, lz:1, markov-oracle:2", "");
        let rows = run_experiment(&c).unwrap();
        let trace = load_source(&c, 0).unwrap().0;
        let l2 = offline_markov_hit_rate(&trace, 2, 1).unwrap().misses as f64;
        for r in &rows {
            match r.policy.as_str() {
                "markov:2" => assert_eq!(
                    r.bound_value,
                    Some(bounds::markov_regret_bound(2, l2, 3, 1).unwrap())
                ),
                "markov-oracle:2" => {
                    assert_eq!(r.bound_value, Some(bounds::thm1_gap(6, 2, 3, 1).unwrap()))
                }
                "lz" => {
                    assert_eq!(r.k, 1);
                    assert!(r.bound_value.unwrap() > 0.0);
                }
                other => panic!("unexpected row {other}"),
            }
        }
    }

    #[test]
    fn markov_oracle_rows_nondecreasing_in_k() {
        let policies: Vec<String> = (0..=8).map(|k| format!("markov-oracle:{k}")).collect();
        let c = cfg(&format!(
            "[generator]\nstates=10\nfiles=3\ncache_size=2\nlength=20000\nseed=1\n\
             [experiment]\npolicies={}\n",
            policies.join(",")
        ))
        .unwrap();
        let rows = run_experiment(&c).unwrap();
        for w in rows.windows(2) {
            assert!(
                w[1].hit_rate >= w[0].hit_rate,
                "{} < {}",
                w[1].policy,
                w[0].policy
            );
        }
    }

    #[test]
    fn csv_round_trip_and_empty_table() {
        assert_eq!(to_csv(&[]), format!("{CSV_HEADER}\n"));
        assert!(parse_csv(&to_csv(&[])).unwrap().is_empty());
        let row = ResultRow {
            policy: "markov:3".into(),
            k: 3,
            seed: 17,
            t: 3,
            n: 5,
            c: 2,
            hits: 1,
            hit_rate: 1.0 / 3.0,
            regret_static: -4,
            regret_markov_k: 2,
            bound_value: Some(0.1 + 0.2),
        };
        let back = parse_csv(&to_csv(std::slice::from_ref(&row))).unwrap();
        assert_eq!(back, vec![row.clone()]);
        let none = ResultRow {
            bound_value: None,
            ..row
        };
        assert_eq!(
            parse_csv(&to_csv(std::slice::from_ref(&none))).unwrap(),
            vec![none]
        );
    }

    #[test]
    fn summary_recomputes_mean_and_stderr() {
        let mk = |policy: &str, seed, hit_rate| ResultRow {
            policy: policy.into(),
            k: 1,
            seed,
            t: 10,
            n: 3,
            c: 1,
            hits: (hit_rate * 10.0) as u64,
            hit_rate,
            regret_static: seed as i64,
            regret_markov_k: 0,
            bound_value: None,
        };
        let rows = vec![
            mk("sage", 0, 0.2),
            mk("lz", 0, 0.5),
            mk("sage", 1, 0.4),
            mk("sage", 2, 0.9),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].policy.as_str(), s[0].runs), ("sage", 3));
        assert!((s[0].mean_hit_rate - 0.5).abs() < 1e-12);
        // Sample variance of (0.2, 0.4, 0.9) is 0.13; stderr = sqrt(0.13 / 3).
        assert!((s[0].stderr_hit_rate - (0.13f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((s[0].mean_regret_static - 1.0).abs() < 1e-12);
        assert_eq!(s[1].stderr_hit_rate, 0.0);
        let text = format_summary(&s);
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().starts_with("sage"));
    }
}
