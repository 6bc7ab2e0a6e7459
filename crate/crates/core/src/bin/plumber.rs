//! Command-line driver: run experiment families against the simulator,
//! analyze archives into leakage templates, match templates in assembly
//! listings, and exercise the channel and branch-predictor scenarios.

use clap::{Parser, Subcommand};
use plumber_core::analyze::{analyze_family, assemble_lt_from_analysis, ClassKey};
use plumber_core::archive::{read_archive, write_archive};
use plumber_core::config::{parse_config, ExperimentConfig};
use plumber_core::experiment::{run_experiment, ExperimentError};
use plumber_core::lt::{deserialize_lt, serialize_lt};
use plumber_core::matcher::{
    classify_trace, compile_pattern, match_pattern, parse_listing, read_trace, MnemonicTable,
};
use plumber_core::report::render_analysis_report;
use plumber_core::scenarios::{encode_decode, run_bp_experiment, Channel};
use plumber_core::sim::SimConfig;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 2;
const EXIT_EXPANSION: u8 = 3;
const EXIT_IO: u8 = 4;
const EXIT_DEGENERATE: u8 = 5;
const EXIT_PARSE: u8 = 6;

/// The built-in pattern for the 3-load prefetching template.
const PREFETCH_PATTERN: &str = "LOAD(op1>g1)\n.{0,5}\nLOAD(op1=g1)\n.{0,5}\nLOAD(op1=g1)\n";

#[derive(Parser)]
#[command(name = "plumber", version, about = "leakage-template workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment family and write an observation archive.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Restrict to a shard, `i/k`.
        #[arg(long)]
        shard: Option<String>,
        /// Override the configured archive path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker count (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Classify an archive, extract relations, and emit a leakage template.
    Analyze {
        #[arg(long)]
        archive: PathBuf,
        #[arg(long)]
        key: String,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        out_lt: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Directory for per-class bit-table CSV exports.
        #[arg(long)]
        bit_tables: Option<PathBuf>,
    },
    /// Scan a listing for template instances; classify traces if given.
    Match {
        #[arg(long)]
        listing: PathBuf,
        #[arg(long)]
        lt: PathBuf,
        /// Access traces (JSON lines, blank-line separated).
        #[arg(long)]
        traces: Option<PathBuf>,
        /// Expected actual labels, one per trace line.
        #[arg(long)]
        actual: Option<PathBuf>,
        /// Pattern file (defaults to the built-in 3-load pattern).
        #[arg(long)]
        pattern: Option<PathBuf>,
        /// Mnemonic classification table.
        #[arg(long)]
        mnemonics: Option<PathBuf>,
        /// Exit nonzero when more than this fraction of lines is unparsable.
        #[arg(long, default_value_t = 0.2)]
        skip_threshold: f64,
    },
    /// Transmit random bits over a leakage channel scenario.
    Channel {
        #[arg(long)]
        name: String,
        #[arg(long, default_value_t = 128)]
        bits: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the branch-predictor structure experiment.
    BpExperiment {
        /// Initial conditional branches.
        #[arg(long)]
        initial: u64,
        /// Padding nops before the spy branch.
        #[arg(long, default_value_t = 0)]
        nops: u64,
        #[arg(long, default_value_t = 10240)]
        trials: u64,
    },
    /// Summarize an archive.
    Report {
        #[arg(long)]
        archive: PathBuf,
    },
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("plumber: {msg}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, shard, out, jobs } => cmd_run(&config, shard, out, jobs),
        Command::Analyze {
            archive,
            key,
            threshold,
            out_lt,
            report,
            bit_tables,
        } => cmd_analyze(&archive, &key, threshold, out_lt, report, bit_tables),
        Command::Match {
            listing,
            lt,
            traces,
            actual,
            pattern,
            mnemonics,
            skip_threshold,
        } => cmd_match(&listing, &lt, traces, actual, pattern, mnemonics, skip_threshold),
        Command::Channel { name, bits, seed } => cmd_channel(&name, bits, seed),
        Command::BpExperiment { initial, nops, trials } => cmd_bp(initial, nops, trials),
        Command::Report { archive } => cmd_report(&archive),
    }
}

fn parse_shard(s: &str) -> Result<(u64, u64), String> {
    let (i, k) = s.split_once('/').ok_or("shard looks like `i/k`")?;
    let i: u64 = i.parse().map_err(|_| "bad shard index")?;
    let k: u64 = k.parse().map_err(|_| "bad shard count")?;
    if k == 0 || i >= k {
        return Err("shard index must be below the count".into());
    }
    Ok((i, k))
}

fn load_config(path: &Path) -> Result<ExperimentConfig, (u8, String)> {
    let text = fs::read_to_string(path)
        .map_err(|e| (EXIT_CONFIG, format!("config {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| (EXIT_CONFIG, e.to_string()))
}

fn cmd_run(
    config: &Path,
    shard: Option<String>,
    out: Option<PathBuf>,
    jobs: Option<usize>,
) -> ExitCode {
    let mut cfg = match load_config(config) {
        Ok(c) => c,
        Err((code, msg)) => return fail(code, msg),
    };
    if jobs.is_some() {
        cfg.jobs = jobs;
    }
    let shard = match shard.as_deref().map(parse_shard).transpose() {
        Ok(s) => s,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let gts_text = match (&cfg.gts_text, &cfg.gts_path) {
        (Some(t), _) => t.clone(),
        (None, Some(p)) => {
            let resolved = if p.is_relative() {
                config.parent().unwrap_or(Path::new(".")).join(p)
            } else {
                p.clone()
            };
            match fs::read_to_string(&resolved) {
                Ok(t) => t,
                Err(e) => return fail(EXIT_CONFIG, format!("gts {}: {e}", resolved.display())),
            }
        }
        (None, None) => return fail(EXIT_CONFIG, "config names neither `gts` nor `gts_text`"),
    };
    let started = std::time::Instant::now();
    eprintln!("run: expanding and executing (seed {})...", cfg.seed);
    let output = match run_experiment(&cfg, &gts_text, shard) {
        Ok(o) => o,
        Err(e @ ExperimentError::TooManyTestcases { .. }) => return fail(EXIT_EXPANSION, e),
        Err(ExperimentError::Expand(e)) => return fail(EXIT_EXPANSION, e),
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let out_path = out
        .or(cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("archive.jsonl"));
    let mut file = match fs::File::create(&out_path) {
        Ok(f) => f,
        Err(e) => return fail(EXIT_IO, format!("{}: {e}", out_path.display())),
    };
    if let Err(e) = write_archive(&mut file, &output.meta, &output.records) {
        return fail(EXIT_IO, e);
    }
    println!(
        "run: {} variants, {} testcases total, {} records written to {} in {:.2?}",
        output.variants,
        output.total_testcases,
        output.records.len(),
        out_path.display(),
        started.elapsed()
    );
    ExitCode::SUCCESS
}

fn cmd_analyze(
    archive: &Path,
    key: &str,
    threshold: Option<f64>,
    out_lt: Option<PathBuf>,
    report: Option<PathBuf>,
    bit_tables: Option<PathBuf>,
) -> ExitCode {
    let file = match fs::File::open(archive) {
        Ok(f) => f,
        Err(e) => return fail(EXIT_IO, format!("{}: {e}", archive.display())),
    };
    let (meta, records) = match read_archive(BufReader::new(file)) {
        Ok(x) => x,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let key_parsed: ClassKey = match key.parse() {
        Ok(k) => k,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    if records.is_empty() {
        return fail(EXIT_DEGENERATE, "archive holds no records");
    }
    let analysis =
        match analyze_family(&records, key_parsed, threshold.unwrap_or(0.95), &meta.geometry) {
            Ok(a) => a,
            Err(e) => return fail(EXIT_DEGENERATE, e),
        };
    if analysis.classes.is_empty() {
        return fail(EXIT_DEGENERATE, "no stable classes");
    }

    let text = render_analysis_report(&meta, &analysis, key);
    print!("{text}");
    if let Some(path) = report {
        if let Err(e) = fs::write(&path, &text) {
            return fail(EXIT_IO, format!("{}: {e}", path.display()));
        }
    }
    if let Some(dir) = bit_tables {
        if let Err(e) = fs::create_dir_all(&dir) {
            return fail(EXIT_IO, format!("{}: {e}", dir.display()));
        }
        for ca in &analysis.per_class {
            let path = dir.join(format!("{}.csv", ca.label.replace(['/', ':'], "_")));
            if let Err(e) = fs::write(&path, ca.table.to_csv()) {
                return fail(EXIT_IO, format!("{}: {e}", path.display()));
            }
        }
    }
    if let Some(path) = out_lt {
        let lt = match assemble_lt_from_analysis(
            &format!("derived-{key}"),
            &analysis,
            &meta.geometry,
            vec![format!("archive:{}", archive.display())],
        ) {
            Ok(l) => l,
            Err(e) => return fail(EXIT_DEGENERATE, e),
        };
        if let Err(e) = fs::write(&path, serialize_lt(&lt)) {
            return fail(EXIT_IO, format!("{}: {e}", path.display()));
        }
        println!("leakage template written to {}", path.display());
    }
    ExitCode::SUCCESS
}

#[allow(clippy::too_many_arguments)]
fn cmd_match(
    listing_path: &Path,
    lt_path: &Path,
    traces: Option<PathBuf>,
    actual: Option<PathBuf>,
    pattern: Option<PathBuf>,
    mnemonics: Option<PathBuf>,
    skip_threshold: f64,
) -> ExitCode {
    let lt_bytes = match fs::read(lt_path) {
        Ok(b) => b,
        Err(e) => return fail(EXIT_IO, format!("{}: {e}", lt_path.display())),
    };
    let lt = match deserialize_lt(&lt_bytes) {
        Ok(l) => l,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let table = match mnemonics {
        Some(p) => match fs::read_to_string(&p) {
            Ok(t) => match MnemonicTable::parse(&t) {
                Ok(t) => t,
                Err(e) => return fail(EXIT_CONFIG, e),
            },
            Err(e) => return fail(EXIT_IO, format!("{}: {e}", p.display())),
        },
        None => MnemonicTable::default(),
    };
    let pattern_text = match pattern {
        Some(p) => match fs::read_to_string(&p) {
            Ok(t) => t,
            Err(e) => return fail(EXIT_IO, format!("{}: {e}", p.display())),
        },
        None => PREFETCH_PATTERN.to_string(),
    };
    let compiled = match compile_pattern(&pattern_text) {
        Ok(p) => p,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let listing_text = match fs::read_to_string(listing_path) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_IO, format!("{}: {e}", listing_path.display())),
    };
    let parsed = parse_listing(&listing_text, &table);
    let total_lines = parsed.listing.instructions.len() + parsed.skipped.len();
    for (line, content) in &parsed.skipped {
        eprintln!("warning: unparsable line {line}: {content}");
    }
    if total_lines > 0 && parsed.skipped.len() as f64 > skip_threshold * total_lines as f64 {
        return fail(
            EXIT_PARSE,
            format!(
                "{} of {} lines unparsable, above the threshold",
                parsed.skipped.len(),
                total_lines
            ),
        );
    }

    let candidates = match_pattern(&parsed.listing, &compiled);
    println!("candidates: {}", candidates.len());
    for c in &candidates {
        let gaps: Vec<String> = c.gaps.iter().map(|g| g.to_string()).collect();
        println!(
            "  {} @ {:#x} loads {:x?} gaps [{}]",
            c.section,
            c.start_addr,
            c.matched_addrs,
            gaps.join(",")
        );
    }

    if let Some(traces_path) = traces {
        let text = match fs::read_to_string(&traces_path) {
            Ok(t) => t,
            Err(e) => return fail(EXIT_IO, format!("{}: {e}", traces_path.display())),
        };
        let mut labels = Vec::new();
        for block in text.split("\n\n").filter(|b| !b.trim().is_empty()) {
            let trace = match read_trace(block.as_bytes()) {
                Ok(t) => t,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            match classify_trace(&trace, &lt, &lt.metadata.geometry) {
                Ok(label) => labels.push(label),
                Err(e) => return fail(EXIT_CONFIG, e),
            }
        }
        println!("trace classifications: {labels:?}");
        if let Some(actual_path) = actual {
            let actual_labels: Vec<String> = match fs::read_to_string(&actual_path) {
                Ok(t) => t.lines().map(|l| l.trim().to_string()).collect(),
                Err(e) => return fail(EXIT_IO, format!("{}: {e}", actual_path.display())),
            };
            match plumber_core::matcher::confusion_report(&labels, &actual_labels) {
                Ok(m) => print!("{}", m.render()),
                Err(e) => return fail(EXIT_CONFIG, e),
            }
        }
    }
    ExitCode::SUCCESS
}

fn cmd_channel(name: &str, bits: u64, seed: u64) -> ExitCode {
    let channel = match Channel::from_name(name) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let payload: Vec<bool> = (0..bits).map(|_| rng.random_bool(0.5)).collect();
    let cfg = SimConfig::default();
    let decoded = encode_decode(channel, &payload, &cfg);
    let errors = payload
        .iter()
        .zip(&decoded)
        .filter(|(a, b)| a != b)
        .count();
    println!(
        "channel {}: {} bits transmitted, {} bit errors",
        channel.name(),
        bits,
        errors
    );
    if errors > 0 {
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}

fn cmd_bp(initial: u64, nops: u64, trials: u64) -> ExitCode {
    let cfg = SimConfig::default();
    match run_bp_experiment(initial, nops, trials, &cfg) {
        Ok(rate) => {
            println!(
                "bp-experiment: X={initial} Y={nops} trials={trials} spy misprediction rate {rate:.4}"
            );
            ExitCode::SUCCESS
        }
        Err(e) => fail(EXIT_CONFIG, e),
    }
}

fn cmd_report(archive: &Path) -> ExitCode {
    let file = match fs::File::open(archive) {
        Ok(f) => f,
        Err(e) => return fail(EXIT_IO, format!("{}: {e}", archive.display())),
    };
    let (meta, records) = match read_archive(BufReader::new(file)) {
        Ok(x) => x,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let previctions: u64 = records
        .iter()
        .map(|r| r.trials.iter().filter(|t| t.previction).count() as u64)
        .sum();
    let prefetches: u64 = records
        .iter()
        .map(|r| {
            r.trials
                .iter()
                .map(|t| t.prefetch_count as u64)
                .sum::<u64>()
        })
        .sum();
    let provenances: std::collections::BTreeSet<&str> =
        records.iter().map(|r| r.provenance.as_str()).collect();
    println!(
        "archive: {} records, seed {}, policy {:?}\n  gts: {}\n  variants: {}\n  previcting trials: {previctions}\n  prefetched lines (all trials): {prefetches}",
        records.len(),
        meta.seed,
        meta.policy,
        meta.gts.replace('\n', " "),
        provenances.len(),
    );
    for p in provenances.iter().take(8) {
        println!("  variant: {p}");
    }
    ExitCode::SUCCESS
}
