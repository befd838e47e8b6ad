use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use unicache::bounds;
use unicache::datagen::{generate_trace, random_fsm};
use unicache::harness::{
    format_summary, run_experiment, summarize, to_csv, ExperimentConfig, TraceSource,
};
use unicache::io::{format_fsm, format_trace, read_trace, write_file};
use unicache::lz::{j_split_counts, offline_lz_oracle, parse_trace};
use unicache::Error;

#[derive(Debug, Parser)]
#[command(name = "unicache", version, about = "Universal caching simulator")]
struct Cli {
    /// Experiment config (INI).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path; defaults depend on the subcommand.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Added to every seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed_base: u64,
    /// Suppress summaries and progress on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a random FSM and a trace it predicts perfectly; writes
    /// `<out>.fsm` and `<out>.txt`.
    Gen(GenArgs),
    /// Run an experiment config and write the result CSV.
    Run,
    /// CSV sweep of the bounds over the Markov order k.
    Bounds(BoundsArgs),
    /// LZ-78 parse-tree statistics of a trace.
    ParseStats(ParseStatsArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    /// FSM states (Q).
    #[arg(long)]
    states: Option<usize>,
    /// Library size (N).
    #[arg(long)]
    files: Option<usize>,
    /// Files per state array (C).
    #[arg(long)]
    cache_size: Option<usize>,
    /// Trace length (T).
    #[arg(long)]
    length: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[arg(long)]
    files: usize,
    #[arg(long)]
    cache_size: usize,
    /// State count S of the comparator FSP.
    #[arg(long)]
    states: u64,
    #[arg(long)]
    horizon: u64,
    #[arg(long, default_value_t = 12)]
    max_k: u32,
}

#[derive(Debug, Args)]
struct ParseStatsArgs {
    trace: PathBuf,
    /// Depth split for the shallow/deep request counts.
    #[arg(long, default_value_t = 1)]
    k: u32,
    /// Also report the offline LZ oracle for this cache size.
    #[arg(long)]
    cache_size: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: &Cli) -> unicache::Result<()> {
    match &cli.command {
        Command::Gen(args) => gen(cli, args),
        Command::Run => run(cli),
        Command::Bounds(args) => sweep(cli, args),
        Command::ParseStats(args) => parse_stats(cli, args),
    }
}

fn emit(out: Option<&Path>, text: &str) -> unicache::Result<()> {
    match out {
        Some(path) => write_file(path, text),
        None => {
            let _ = std::io::stdout().write_all(text.as_bytes());
            Ok(())
        }
    }
}

fn gen(cli: &Cli, args: &GenArgs) -> unicache::Result<()> {
    let from_config = match &cli.config {
        Some(path) => match ExperimentConfig::load(path)?.source {
            TraceSource::Generator(g) => Some(g),
            TraceSource::File(_) => {
                return Err(Error::Config {
                    key: "generator".into(),
                    msg: "config has no [generator] section".into(),
                })
            }
        },
        None => None,
    };
    let pick = |flag: Option<usize>, cfg: Option<usize>, name: &str| {
        flag.or(cfg).ok_or_else(|| Error::Config {
            key: format!("generator.{name}"),
            msg: format!(
                "pass --{} or a config with [generator]",
                name.replace('_', "-")
            ),
        })
    };
    let g = from_config.as_ref();
    let states = pick(args.states, g.map(|g| g.states), "states")?;
    let files = pick(args.files, g.map(|g| g.files), "files")?;
    let cache_size = pick(args.cache_size, g.map(|g| g.cache_size), "cache_size")?;
    let length = pick(args.length, g.map(|g| g.length), "length")?;
    let seed = args
        .seed
        .or(g.map(|g| g.seed))
        .unwrap_or(0)
        .wrapping_add(cli.seed_base);

    let fsm = random_fsm(states, files, cache_size, seed)?;
    let trace = generate_trace(&fsm, length, seed ^ 0x9e37_79b9_7f4a_7c15)?;
    let prefix = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("synthetic"));
    let fsm_path = prefix.with_extension("fsm");
    let trace_path = prefix.with_extension("txt");
    write_file(
        &fsm_path,
        &format_fsm(&fsm.spec, cache_size, Some(&fsm.arrays)),
    )?;
    write_file(&trace_path, &format_trace(&trace))?;
    if !cli.quiet {
        eprintln!(
            "wrote {} (Q={states}, N={files}, C={cache_size}) and {} (T={length})",
            fsm_path.display(),
            trace_path.display()
        );
    }
    Ok(())
}

fn run(cli: &Cli) -> unicache::Result<()> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config {
        key: "--config".into(),
        msg: "`run` needs --config PATH".into(),
    })?;
    let config = ExperimentConfig::load(path)?.with_seed_base(cli.seed_base);
    let rows = run_experiment(&config)?;
    let out = cli.out.as_deref().or(config.out.as_deref());
    emit(out, &to_csv(&rows))?;
    if !cli.quiet {
        eprint!("{}", format_summary(&summarize(&rows)));
    }
    Ok(())
}

fn sweep(cli: &Cli, args: &BoundsArgs) -> unicache::Result<()> {
    let (n, c, q, t) = (args.files, args.cache_size, args.states, args.horizon);
    let (rows, best) = bounds::miss_fraction_sweep(q, n, c, t, args.max_k)?;
    let mut csv = String::from("k,fsp_markov_gap,markov_regret_bound,miss_fraction_bound\n");
    for (k, miss) in rows {
        let gap = bounds::thm1_gap(q, k, n, c)?;
        let regret = bounds::markov_regret_bound(k, 0.0, n, c)?;
        let _ = writeln!(csv, "{k},{gap},{regret},{miss}");
    }
    emit(cli.out.as_deref(), &csv)?;
    if !cli.quiet {
        eprintln!("miss-fraction bound is smallest at k = {best}");
    }
    Ok(())
}

fn parse_stats(cli: &Cli, args: &ParseStatsArgs) -> unicache::Result<()> {
    let trace = read_trace(&args.trace)?;
    let tree = parse_trace(&trace);
    let (shallow, deep) = j_split_counts(&tree, args.k);
    let mut text = String::new();
    let _ = writeln!(text, "T = {}", trace.len());
    let _ = writeln!(text, "N = {}", trace.n_files());
    let _ = writeln!(text, "nodes = {}", tree.node_count());
    let _ = writeln!(text, "phrases = {}", tree.phrase_count());
    let _ = writeln!(text, "max_depth = {}", tree.max_depth());
    let _ = writeln!(text, "expanded_nodes = {}", tree.expanded_node_count());
    let _ = writeln!(text, "requests_depth_lt_{} = {shallow}", args.k);
    let _ = writeln!(text, "requests_depth_ge_{} = {deep}", args.k);
    if let Some(c) = args.cache_size {
        let oracle = offline_lz_oracle(&trace, c)?;
        let _ = writeln!(text, "lz_oracle_hits = {}", oracle.hits);
        let _ = writeln!(text, "lz_oracle_misses = {}", oracle.misses);
    }
    print!("{text}");
    if let Some(path) = &cli.out {
        write_file(path, &tree.dump())?;
        if !cli.quiet {
            eprintln!("tree dump written to {}", path.display());
        }
    }
    Ok(())
}
