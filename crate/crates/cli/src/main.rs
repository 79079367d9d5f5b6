use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use ulpsat::bench::{self, BenchConfig, Expected, SuiteOutcome};
use ulpsat::engine::{render, solve, EngineConfig, VerdictKind};
use ulpsat::objective::Ablation;
use ulpsat::optimizer::OptimizerConfig;
use ulpsat::smt::{format_model, parse};

#[derive(Parser)]
#[command(name = "ulpsat", version, about = "Floating-point satisfiability by staged optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one SMT-LIB file.
    Solve {
        file: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
        /// Print the per-stage trace to stderr.
        #[arg(long)]
        stats: bool,
        /// Also write the model block to this file.
        #[arg(long)]
        model_out: Option<PathBuf>,
        /// Print the unsat-guess score.
        #[arg(long, short)]
        verbose: bool,
        /// Comma-separated: no_s1, no_s3, no_projection,
        /// absolute_residuals, no_clause_product.
        #[arg(long, value_name = "FLAGS")]
        ablation: Option<String>,
    },
    /// Run a directory of .smt2 files, or the bundled corpus.
    Bench {
        /// Directory of .smt2 files; the bundled corpus when omitted.
        dir: Option<PathBuf>,
        /// CSV with columns path,status (sat or unsat).
        #[arg(long)]
        expected: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        /// Where runs.csv, summary.csv and ablation.csv are written.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Without a value: the full pipeline plus every single-flag
        /// ablation. With a value: only that configuration.
        #[arg(long, num_args = 0..=1, default_missing_value = "")]
        ablation: Option<String>,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Run the bundled property checks and corpus.
    Selftest {
        /// Only groups whose name contains this string.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Clone)]
struct EngineArgs {
    /// Wall-clock limit in seconds.
    #[arg(long, default_value_t = 1200.0)]
    timeout: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Multi-start starts per restart.
    #[arg(long)]
    starts: Option<usize>,
    /// Outer restarts.
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    hops1: Option<usize>,
    #[arg(long)]
    hops2: Option<usize>,
    #[arg(long)]
    hops3: Option<usize>,
    #[arg(long)]
    s3_bound: Option<u32>,
    /// Run multi-start starts on all cores (not deterministic).
    #[arg(long)]
    parallel: bool,
}

impl EngineArgs {
    fn config(&self, ablation: Ablation) -> Result<EngineConfig, String> {
        if !(self.timeout >= 0.0 && self.timeout.is_finite()) {
            return Err(format!("invalid timeout {}", self.timeout));
        }
        let mut opt = OptimizerConfig { rng_seed: self.seed, parallel: self.parallel, ..Default::default() };
        if let Some(n) = self.starts {
            opt.n_restarts = n;
        }
        for (stage, hops) in [self.hops1, self.hops2, self.hops3].into_iter().enumerate() {
            if let Some(h) = hops {
                opt.stages[stage].hops = h;
            }
        }
        if let Some(b) = self.s3_bound {
            opt.s3_bound = b;
        }
        let mut cfg = EngineConfig {
            optimizer: opt,
            timeout: Some(Duration::from_secs_f64(self.timeout)),
            ablation,
            ..EngineConfig::default()
        };
        if let Some(r) = self.restarts {
            cfg.n_start_over = r;
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Solve { file, engine, stats, model_out, verbose, ablation } => {
            cmd_solve(&file, &engine, ablation.as_deref(), stats, model_out.as_deref(), verbose)
        }
        Command::Bench { dir, expected, repeats, out_dir, ablation, engine } => {
            match cmd_bench(dir.as_deref(), expected.as_deref(), repeats, &out_dir, ablation.as_deref(), &engine) {
                Ok(code) => code,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Selftest { filter, seed } => cmd_selftest(filter.as_deref(), seed),
    }
}

fn fail(message: impl std::fmt::Display) -> ExitCode {
    println!("error");
    eprintln!("{message}");
    ExitCode::from(1)
}

fn cmd_solve(
    file: &Path,
    args: &EngineArgs,
    ablation: Option<&str>,
    stats: bool,
    model_out: Option<&Path>,
    verbose: bool,
) -> ExitCode {
    let ablation = match ablation.unwrap_or("").parse::<Ablation>() {
        Ok(a) => a,
        Err(e) => return fail(e),
    };
    let cfg = match args.config(ablation) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let src = match fs::read_to_string(file) {
        Ok(s) => s,
        Err(e) => return fail(format!("{}: {e}", file.display())),
    };
    let f = match parse(&src) {
        Ok(f) => Arc::new(f),
        Err(e) => return fail(format!("{}:{e}", file.display())),
    };
    let verdict = match solve(&f, &cfg) {
        Ok(v) => v,
        Err(e) => return fail(e),
    };
    println!("{}", render(&f, &verdict, verbose));
    if stats {
        for s in &verdict.stage_trace {
            eprintln!("{s}");
        }
        eprintln!("total {:.3}s", verdict.elapsed.as_secs_f64());
    }
    if let (Some(path), Some(model)) = (model_out, &verdict.model) {
        if let Err(e) = fs::write(path, format_model(&f, model) + "\n") {
            eprintln!("{}: {e}", path.display());
            return ExitCode::from(1);
        }
    }
    match verdict.kind {
        VerdictKind::Timeout => ExitCode::from(2),
        _ => ExitCode::SUCCESS,
    }
}

fn load_dir(dir: &Path) -> Result<Vec<(String, String)>, String> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "smt2"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let name = p.file_name().expect("file").to_string_lossy().into_owned();
            fs::read_to_string(&p).map(|s| (name, s)).map_err(|e| format!("{}: {e}", p.display()))
        })
        .collect()
}

fn print_summary(name: &str, o: &SuiteOutcome) {
    let s = &o.summary;
    let recall = s.sat_recall.map(|r| format!("{:.3}", r)).unwrap_or_else(|| "-".into());
    println!(
        "{name:<20} n={} sat={} unsat-guess={} timeout={} error={} recall={recall} timeout_rate={:.3} mean={:.3}s median={:.3}s",
        s.n, s.n_sat, s.n_unsat_guess, s.n_timeout, s.n_error, s.timeout_rate, s.mean_time_s, s.median_time_s
    );
}

fn cmd_bench(
    dir: Option<&Path>,
    expected: Option<&Path>,
    repeats: usize,
    out_dir: &Path,
    ablation: Option<&str>,
    args: &EngineArgs,
) -> Result<ExitCode, String> {
    let instances = match dir {
        Some(d) => load_dir(d)?,
        None => ulpsat::corpus::FILES.iter().map(|(n, s)| (n.to_string(), s.to_string())).collect(),
    };
    let expected: Option<HashMap<String, Expected>> = match (expected, dir) {
        (Some(p), _) => {
            let file = fs::File::open(p).map_err(|e| format!("{}: {e}", p.display()))?;
            Some(bench::parse_expected(file).map_err(|e| e.to_string())?)
        }
        (None, Some(d)) if d.join("expected.csv").exists() => {
            let file = fs::File::open(d.join("expected.csv")).map_err(|e| e.to_string())?;
            Some(bench::parse_expected(file).map_err(|e| e.to_string())?)
        }
        (None, Some(_)) => None,
        (None, None) => Some(ulpsat::corpus::expected()),
    };
    fs::create_dir_all(out_dir).map_err(|e| format!("{}: {e}", out_dir.display()))?;
    let create = |name: &str| fs::File::create(out_dir.join(name)).map_err(|e| format!("{name}: {e}"));

    let study = ablation == Some("");
    let single: Ablation = match ablation {
        Some(a) if !a.is_empty() => a.parse().map_err(|e: ulpsat::objective::ObjectiveError| e.to_string())?,
        _ => Ablation::default(),
    };
    let cfg = BenchConfig { engine: args.config(single)?, repeats };
    let progress = |variant: &str, r: &bench::RunRecord| {
        eprintln!("{variant} {} run {} {} {:.3}s", r.path, r.run, r.verdict.as_str(), r.time_s);
    };

    let outcomes = if study {
        bench::run_ablation_study(&instances, expected.as_ref(), &cfg, &Ablation::study_variants(), progress)
    } else {
        let name = single.to_string();
        bench::run_suite(&instances, expected.as_ref(), &cfg, |r| progress(&name, r)).map(|o| vec![(name.clone(), o)])
    };
    let outcomes = match outcomes {
        Ok(o) => o,
        Err(e @ bench::BenchError::SoundnessViolation { .. }) | Err(e @ bench::BenchError::InvalidModel { .. }) => {
            eprintln!("{e}");
            return Ok(ExitCode::from(1));
        }
        Err(e) => return Err(e.to_string()),
    };
    for (name, o) in &outcomes {
        for w in &o.warnings {
            eprintln!("warning: {w}");
        }
        print_summary(name, o);
    }
    let (_, first) = &outcomes[0];
    bench::write_runs(create("runs.csv")?, &first.records).map_err(|e| e.to_string())?;
    bench::write_summary(create("summary.csv")?, &first.summary).map_err(|e| e.to_string())?;
    if study {
        bench::write_ablation(create("ablation.csv")?, &outcomes).map_err(|e| e.to_string())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_selftest(filter: Option<&str>, seed: u64) -> ExitCode {
    let results = ulpsat::selftest::run(filter, seed);
    if results.is_empty() {
        eprintln!("no checks match; groups are {}", ulpsat::selftest::GROUPS.join(", "));
        return ExitCode::from(1);
    }
    let mut failed = 0;
    for r in &results {
        let mark = if r.passed { "pass" } else { "FAIL" };
        println!("{mark}  {:<11} {:<28} {}", r.group, r.name, r.detail);
        failed += usize::from(!r.passed);
    }
    println!("{} checks, {} failed", results.len(), failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
