use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use hessred::bench::{self, BenchConfig, Suite, Sweep};
use hessred::companion::companion_to_dpr1;
use hessred::dense::frob;
use hessred::io::{emit_condensed, emit_gv, emit_journal, parse_poly, ProblemFile};
use hessred::oracle::{backward_error, dense_hessenberg, unitarity_error};
use hessred::real::hessenberg_reduce_real;
use hessred::unitary::hessenberg_reduce_unitary;
use hessred::{HessError, Kind, Tolerance};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INTEGRITY: u8 = 3;
const DEFAULT_SEED: u64 = 1;

#[derive(Parser)]
#[command(name = "hessred", version, about = "Hessenberg reduction of diagonal-plus-low-rank matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Real,
    Unitary,
}

impl From<KindArg> for Kind {
    fn from(k: KindArg) -> Kind {
        match k {
            KindArg::Real => Kind::Real,
            KindArg::Unitary => Kind::Unitary,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    SweepN,
    SweepK,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Real,
    Unitary,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random problem file.
    Gen {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        /// Defaults to $HESSRED_SEED, then 1.
        #[arg(long)]
        seed: Option<u64>,
        /// Record padding to the next multiple of 2k for unitary problems.
        #[arg(long)]
        pad: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a unitary problem file from a `POLY` matrix polynomial.
    Companion {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reduce a problem file and print a key=value report.
    Reduce {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        accumulate_q: bool,
        /// Also run the dense reduction and compare similarity invariants.
        #[arg(long)]
        dense_oracle: bool,
        /// Pad unitary problems whose order is not a multiple of 2k.
        #[arg(long)]
        pad: bool,
        /// Write the condensed Hessenberg output here.
        #[arg(long)]
        out_h: Option<PathBuf>,
        /// Write the transformation journal here.
        #[arg(long)]
        out_journal: Option<PathBuf>,
    },
    /// Timing sweep written as a `.dat` table.
    Bench {
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, value_enum, default_value = "real")]
        kind: KindArg,
        /// Orders for sweep-n.
        #[arg(long, value_delimiter = ',', default_values_t = [256, 512, 1024, 2048])]
        ns: Vec<usize>,
        /// Fixed rank for sweep-n.
        #[arg(long, default_value_t = 4)]
        k: usize,
        /// Fixed order for sweep-k.
        #[arg(long, default_value_t = 2048)]
        n: usize,
        /// Ranks for sweep-k.
        #[arg(long, value_delimiter = ',', default_values_t = [4, 8, 16, 32, 64])]
        ks: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = bench::DEFAULT_DENSE_CAP)]
        dense_cap: usize,
        #[arg(long, default_value_t = 1024)]
        error_cap: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the verification suites; exits 0 iff every case passes.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: SuiteArg,
        #[arg(long, value_delimiter = ',', default_values_t = bench::DEFAULT_VERIFY_SIZES)]
        sizes: Vec<usize>,
        /// Number of seeds per cell, starting at the base seed.
        #[arg(long, default_value_t = 3)]
        seeds: u64,
        #[arg(long)]
        seed: Option<u64>,
        /// Perturb every output below the subdiagonal (negative control).
        #[arg(long)]
        corrupt: bool,
    },
}

enum Failure {
    Usage(String),
    Run(HessError),
    Checks(usize),
}

impl From<HessError> for Failure {
    fn from(e: HessError) -> Self {
        Failure::Run(e)
    }
}

fn resolve_seed(seed: Option<u64>) -> Result<u64, Failure> {
    if let Some(s) = seed {
        return Ok(s);
    }
    match std::env::var("HESSRED_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("HESSRED_SEED={v:?} is not an unsigned integer"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn pad_amount(n: usize, k: usize) -> usize {
    (2 * k - n % (2 * k)) % (2 * k)
}

fn write_or_print(out: Option<&PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Run(e.into())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read(path: &PathBuf) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Gen { kind, n, k, seed, pad, out } => {
            let kind = Kind::from(kind);
            let seed = resolve_seed(seed)?;
            if n == 0 || k == 0 || k > n {
                return Err(Failure::Usage(format!("need n >= 1 and 1 <= k <= n, got n={n} k={k}")));
            }
            let extra = if kind == Kind::Unitary { pad_amount(n, k) } else { 0 };
            if extra > 0 && !pad {
                return Err(Failure::Usage(format!(
                    "unitary order {n} is not a multiple of 2k = {}; pass --pad",
                    2 * k
                )));
            }
            let file = ProblemFile::generate(kind, n, k, seed, extra)?;
            write_or_print(out.as_ref(), &file.emit())
        }
        Command::Companion { input, out } => {
            let poly = parse_poly(&read(&input)?)?;
            let problem = companion_to_dpr1(&poly)?;
            let pad = pad_amount(problem.n(), problem.k());
            let file = ProblemFile { seed: 0, pad, problem };
            write_or_print(out.as_ref(), &file.emit())
        }
        Command::Reduce {
            input,
            accumulate_q,
            dense_oracle,
            pad,
            out_h,
            out_journal,
        } => reduce(&input, accumulate_q, dense_oracle, pad, out_h.as_ref(), out_journal.as_ref()),
        Command::Bench {
            mode,
            kind,
            ns,
            k,
            n,
            ks,
            reps,
            seed,
            dense_cap,
            error_cap,
            out,
        } => {
            let mut cfg = BenchConfig::new(kind.into());
            cfg.reps = reps;
            cfg.seed = resolve_seed(seed)?;
            cfg.dense_cap = dense_cap;
            cfg.error_cap = error_cap;
            let sweep = match mode {
                ModeArg::SweepN => Sweep::N { ns, k },
                ModeArg::SweepK => Sweep::K { n, ks },
            };
            let records = bench::run_sweep(&cfg, &sweep)?;
            write_or_print(out.as_ref(), &bench::format_dat(&cfg, &sweep, &records))
        }
        Command::Verify {
            suite,
            sizes,
            seeds,
            seed,
            corrupt,
        } => {
            let base = resolve_seed(seed)?;
            let suite = match suite {
                SuiteArg::Real => Suite::Real,
                SuiteArg::Unitary => Suite::Unitary,
                SuiteArg::All => Suite::All,
            };
            let seeds: Vec<u64> = (base..base + seeds.max(1)).collect();
            let cases = bench::verify(suite, &sizes, &seeds, corrupt)?;
            for c in &cases {
                println!("{}", c.line());
            }
            let failed = cases.iter().filter(|c| c.failure.is_some()).count();
            println!("verify: {} passed, {failed} failed", cases.len() - failed);
            if failed > 0 {
                return Err(Failure::Checks(failed));
            }
            Ok(())
        }
    }
}

fn reduce(
    input: &PathBuf,
    accumulate_q: bool,
    dense_oracle: bool,
    pad: bool,
    out_h: Option<&PathBuf>,
    out_journal: Option<&PathBuf>,
) -> Result<(), Failure> {
    let file = ProblemFile::parse(&read(input)?)?;
    let mut problem = file.problem.clone();
    let (n0, k) = (problem.n(), problem.k());
    let extra = if problem.kind == Kind::Unitary { pad_amount(n0, k) } else { 0 };
    if extra > 0 {
        if !(pad || file.pad > 0) {
            return Err(Failure::Usage(format!(
                "unitary order {n0} is not a multiple of 2k = {}; pass --pad",
                2 * k
            )));
        }
        problem = problem.padded(extra);
    }
    let tol = Tolerance::default();
    let n = problem.n();
    let t = Instant::now();
    let (h, q, rotation_count, h_text, journal_text) = match problem.kind {
        Kind::Real => {
            let r = hessenberg_reduce_real(&problem, accumulate_q, &tol)?;
            let wall = t.elapsed().as_secs_f64();
            let texts = (out_h.map(|_| emit_condensed(&r.h)), out_journal.map(|_| emit_journal(&r.rotation_log)));
            ((r.h_dense(), wall), r.q, r.rotation_log.rotation_count(), texts.0, texts.1)
        }
        Kind::Unitary => {
            let r = hessenberg_reduce_unitary(&problem, accumulate_q, &tol)?;
            let wall = t.elapsed().as_secs_f64();
            let texts = (out_h.map(|_| emit_gv(&r.h)), out_journal.map(|_| emit_journal(&r.rotation_log)));
            ((r.h_dense(), wall), r.q, r.rotation_log.rotation_count(), texts.0, texts.1)
        }
    };
    let (h, wall) = h;
    if let (Some(p), Some(s)) = (out_h, h_text) {
        std::fs::write(p, s).map_err(|e| Failure::Run(e.into()))?;
    }
    if let (Some(p), Some(s)) = (out_journal, journal_text) {
        std::fs::write(p, s).map_err(|e| Failure::Run(e.into()))?;
    }
    let a = problem.dense();
    println!("seed={}", file.seed);
    println!("kind={}", problem.kind.name());
    println!("n={n}");
    println!("k={k}");
    println!("pad={extra}");
    println!("rotation_count={rotation_count}");
    println!("wall_time={wall:.6e}");
    match &q {
        Some(q) => {
            println!("backward_error={:.6e}", backward_error(&a, &h, q));
            println!("unitarity_error={:.6e}", unitarity_error(q));
        }
        None => {
            println!("backward_error=na");
            println!("unitarity_error=na");
        }
    }
    if dense_oracle {
        let t = Instant::now();
        let (hd, qd) = dense_hessenberg(&a);
        println!("dense_wall_time={:.6e}", t.elapsed().as_secs_f64());
        println!("dense_backward_error={:.6e}", backward_error(&a, &hd, &qd));
        let scale = frob(&a).max(f64::MIN_POSITIVE);
        println!("trace_diff={:.6e}", (h.trace() - hd.trace()).norm() / scale);
        println!("frobenius_diff={:.6e}", (frob(&h) - frob(&hd)).abs() / scale);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Checks(n)) => {
            eprintln!("error: {n} verification case(s) failed");
            ExitCode::from(EXIT_FAILURE)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            match e {
                HessError::Integrity { .. } => ExitCode::from(EXIT_INTEGRITY),
                HessError::Parse(_) => ExitCode::from(EXIT_USAGE),
                _ => ExitCode::from(EXIT_FAILURE),
            }
        }
    }
}
