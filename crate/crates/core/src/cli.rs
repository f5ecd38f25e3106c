//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use crate::entropy::{ExactEngine, DEFAULT_EXACT_ORDER_BOUND};
use crate::error::{Error, Result};
use crate::group::{make_full_group, make_prime_subgroup, CyclicGroup, GroupFamily};
use crate::permutation::{DhiTest, DEFAULT_REPLICATES};
use crate::report::{render, write_atomic, ReportFormat};
use crate::sampling::Sampler;
use crate::survey::{
    classify_primes, derive_seed, reproduce_table1, run_survey, SurveyConfig, SurveyMode, SurveyRecord,
    TABLE1_PRIME, TABLE1_SCHEDULE,
};

#[derive(Debug, Parser)]
#[command(name = "dhi", version, about = "Entropy-based DHI testing for subgroups of Z_p^*")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv, global = true)]
    format: Format,

    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads. Never changes the output.
    #[arg(long, default_value_t = 1, global = true)]
    threads: usize,

    /// Directory for cached results, keyed by command and flags.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
        }
    }
}

fn parse_seed(s: &str) -> std::result::Result<u64, String> {
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse::<u64>(),
    };
    parsed.map_err(|e| format!("invalid 64-bit seed {s:?}: {e}"))
}

#[derive(Clone, Debug, Subcommand)]
enum Command {
    /// Exact T_N over all N^2 exponent pairs.
    Exact {
        #[arg(long)]
        p: u64,
        /// Test the prime-order subgroup of a safe prime instead of Z_p^*.
        #[arg(long)]
        subgroup: bool,
        #[arg(long, default_value_t = DEFAULT_EXACT_ORDER_BOUND)]
        exact_bound: u64,
    },
    /// Sampled permutation test for one group.
    DhiTest {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        subgroup: bool,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = DEFAULT_REPLICATES)]
        replicates: usize,
        #[arg(long, value_parser = parse_seed, default_value = "0")]
        seed: u64,
        /// Defaults to a value derived from --seed.
        #[arg(long, value_parser = parse_seed)]
        null_seed: Option<u64>,
    },
    /// Every prime in [lo, hi]; exact mode unless --n is given.
    Survey {
        #[arg(long)]
        lo: u64,
        #[arg(long)]
        hi: u64,
        /// Also test the prime-order subgroup of every safe prime.
        #[arg(long)]
        subgroup: bool,
        /// Only test subgroups of safe primes.
        #[arg(long, conflicts_with = "subgroup")]
        subgroup_only: bool,
        /// Shared sample size; switches to sampled mode.
        #[arg(long)]
        n: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_REPLICATES)]
        replicates: usize,
        #[arg(long, value_parser = parse_seed, default_value = "0")]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_EXACT_ORDER_BOUND)]
        exact_bound: u64,
    },
    /// Convergence table for Z_p^* over a schedule of sample sizes.
    Table1 {
        #[arg(long, default_value_t = TABLE1_PRIME)]
        p: u64,
        /// Comma-separated increasing sample sizes; a fixed 41-entry schedule by default.
        #[arg(long, value_delimiter = ',')]
        schedule: Vec<u64>,
        #[arg(long, default_value_t = DEFAULT_REPLICATES)]
        replicates: usize,
        #[arg(long, value_parser = parse_seed, default_value = "0")]
        seed: u64,
        #[arg(long, value_parser = parse_seed)]
        null_seed: Option<u64>,
    },
    /// List primes in [lo, hi] tagged safe or other.
    Classify {
        #[arg(long)]
        lo: u64,
        #[arg(long)]
        hi: u64,
    },
}

fn group_for(p: u64, subgroup: bool) -> Result<CyclicGroup> {
    if subgroup {
        make_prime_subgroup(p)
    } else {
        make_full_group(p)
    }
}

fn default_null_seed(seed: u64) -> u64 {
    derive_seed(seed, &[u64::MAX])
}

fn check_threads(threads: usize) -> Result<usize> {
    if threads == 0 {
        return Err(Error::config("--threads must be at least 1"));
    }
    Ok(threads)
}

fn execute(command: &Command, format: ReportFormat, threads: usize) -> Result<Vec<u8>> {
    let threads = check_threads(threads)?;
    match *command {
        Command::Exact {
            p,
            subgroup,
            exact_bound,
        } => {
            let group = group_for(p, subgroup)?;
            let engine = ExactEngine {
                threads,
                order_bound: exact_bound,
            };
            let record = SurveyRecord::exact(&group, &engine).map_err(|e| match e {
                Error::ResourceLimit { order, bound } => Error::config(format!(
                    "order {order} exceeds --exact-bound {bound}; use dhi-test for sampled mode"
                )),
                other => other,
            })?;
            render(&[record], format)
        }
        Command::DhiTest {
            p,
            subgroup,
            n,
            replicates,
            seed,
            null_seed,
        } => {
            let group = group_for(p, subgroup)?;
            let test = DhiTest {
                replicates,
                threads,
                sampler: Sampler::default(),
            };
            let report = test.run(&group, n, seed, null_seed.unwrap_or_else(|| default_null_seed(seed)))?;
            render(&[SurveyRecord::sampled(&report)?], format)
        }
        Command::Survey {
            lo,
            hi,
            subgroup,
            subgroup_only,
            n,
            replicates,
            seed,
            exact_bound,
        } => {
            let families = if subgroup_only {
                vec![GroupFamily::PrimeSubgroup]
            } else if subgroup {
                vec![GroupFamily::FullGroup, GroupFamily::PrimeSubgroup]
            } else {
                vec![GroupFamily::FullGroup]
            };
            let config = SurveyConfig {
                mode: match n {
                    Some(n) => SurveyMode::Sampled { n, replicates },
                    None => SurveyMode::Exact,
                },
                base_seed: seed,
                families,
                threads,
                exact_bound,
            };
            render(&run_survey(lo, hi, &config)?, format)
        }
        Command::Table1 {
            p,
            ref schedule,
            replicates,
            seed,
            null_seed,
        } => {
            let schedule = if schedule.is_empty() {
                TABLE1_SCHEDULE.to_vec()
            } else {
                schedule.clone()
            };
            let test = DhiTest {
                replicates,
                threads,
                sampler: Sampler::default(),
            };
            let rows = reproduce_table1(
                p,
                &schedule,
                &test,
                seed,
                null_seed.unwrap_or_else(|| default_null_seed(seed)),
            )?;
            render(&rows, format)
        }
        Command::Classify { lo, hi } => render(&classify_primes(lo, hi)?, format),
    }
}

/// Cache key over everything that affects the output bytes.
fn cache_key(command: &Command, format: ReportFormat) -> String {
    let normalized = format!("{}|{command:?}|{format:?}", env!("CARGO_PKG_VERSION"));
    Sha256::digest(normalized.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    let format: ReportFormat = cli.output.format.into();
    let cached = cli
        .output
        .cache_dir
        .as_ref()
        .map(|dir| dir.join(format!("{}.{}", cache_key(&cli.command, format), format.extension())));

    let bytes = match cached.as_ref().filter(|p| p.is_file()) {
        Some(path) => std::fs::read(path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?,
        None => {
            let bytes = execute(&cli.command, format, cli.output.threads)?;
            if let Some(path) = &cached {
                if let Some(dir) = path.parent() {
                    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
                        path: dir.to_path_buf(),
                        source,
                    })?;
                }
                write_atomic(path, &bytes)?;
            }
            bytes
        }
    };

    match &cli.output.out {
        Some(path) => write_atomic(path, &bytes),
        None => std::io::stdout().write_all(&bytes).map_err(|source| Error::Io {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

/// Parses `args` and runs the command, returning the process exit code:
/// 0 on success, 1 on invalid input or configuration, 2 on I/O failure.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_accept_decimal_and_hex() {
        assert_eq!(parse_seed("42").unwrap(), 42);
        assert_eq!(parse_seed("0x2a").unwrap(), 42);
        assert_eq!(parse_seed("0XFFFFFFFFFFFFFFFF").unwrap(), u64::MAX);
        assert!(parse_seed("0x1_0000_0000_0000_0000").is_err());
        assert!(parse_seed("-1").is_err());
        assert!(parse_seed("seed").is_err());
    }

    #[test]
    fn schedule_parsing() {
        let cli = Cli::try_parse_from(["dhi", "table1", "--schedule", "59,118,354"]).unwrap();
        match cli.command {
            Command::Table1 { schedule, .. } => assert_eq!(schedule, vec![59, 118, 354]),
            other => panic!("parsed {other:?}"),
        }
        assert!(Cli::try_parse_from(["dhi", "table1", "--schedule", "59,x"]).is_err());
    }

    #[test]
    fn cache_key_ignores_threads_but_not_flags() {
        let a = Cli::try_parse_from(["dhi", "exact", "--p", "1193", "--threads", "4"]).unwrap();
        let b = Cli::try_parse_from(["dhi", "exact", "--p", "1193"]).unwrap();
        let c = Cli::try_parse_from(["dhi", "exact", "--p", "2131"]).unwrap();
        let k = |cli: &Cli| cache_key(&cli.command, cli.output.format.into());
        assert_eq!(k(&a), k(&b));
        assert_ne!(k(&a), k(&c));
        assert_ne!(
            cache_key(&b.command, ReportFormat::Csv),
            cache_key(&b.command, ReportFormat::Json)
        );
    }

    #[test]
    fn exit_codes() {
        assert_eq!(main_with_args(["dhi", "exact", "--p", "1194"]), 1);
        assert_eq!(main_with_args(["dhi", "exact"]), 1);
        assert_eq!(main_with_args(["dhi", "exact", "--p", "1193", "--exact-bound", "10"]), 1);
        assert_eq!(main_with_args(["dhi", "--help"]), 0);
        assert_eq!(
            main_with_args(["dhi", "classify", "--lo", "2", "--hi", "10", "--out", "/nonexistent/dir/x.csv"]),
            2
        );
    }
}
