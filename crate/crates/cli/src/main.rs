use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use mgale_core::doob::{check_martingale, Verdict};
use mgale_core::frontend::parse_program;
use mgale_core::montecarlo::{SimConfig, SimVerdict};
use mgale_core::ost::{fact::fact_ctx, OstError};
use mgale_core::pipeline::{
    analyze, bench, bench_table, parse_assignments, sim_json, sim_text, simulate, validate, AnalysisRequest,
    BenchResult, PipelineError, SCHEMA,
};
use mgale_core::recurrence::extract_recurrences;
use mgale_core::symbolic::parse::parse_poly;
use mgale_core::symbolic::Rational;

#[derive(Parser)]
#[command(name = "mgale", version, about = "Martingale synthesis for probabilistic loops")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a martingale, apply optional stopping and solve.
    Analyze(AnalyzeArgs),
    /// Run the program many times and report statistics at termination.
    Simulate(SimulateArgs),
    /// Decide whether an expression is a martingale for the program.
    CheckMartingale(CheckArgs),
    /// Time the analysis of the example suite in a directory.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct SimArgs {
    /// Parameter value, `name=value`; repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    params: Vec<String>,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long = "rng-seed", default_value_t = 0x5eed)]
    rng_seed: u64,
    #[arg(long = "max-steps", default_value_t = 1_000_000)]
    max_steps: u64,
}

#[derive(Args)]
struct AnalyzeArgs {
    file: PathBuf,
    #[arg(long)]
    seed: Option<String>,
    /// `[at-exit:|every:|implication:] formula`; repeatable.
    #[arg(long = "hint")]
    hints: Vec<String>,
    /// `v, K[, eps]`.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long = "solve-for")]
    solve_for: Option<String>,
    #[arg(long = "use-fact")]
    use_facts: Vec<PathBuf>,
    #[arg(long = "assume-ost")]
    assume_ost: bool,
    #[arg(long = "trace-rules")]
    trace_rules: bool,
    /// Check every derived fact by simulation.
    #[arg(long)]
    validate: bool,
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    file: PathBuf,
    /// Expression at the stopping time to estimate, e.g. `x[tau]`; repeatable.
    #[arg(long = "quantity")]
    quantities: Vec<String>,
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    file: PathBuf,
    /// Expression over `x[i]`, `x[i-1]`, ..., parameters and `i`. Defaults
    /// to the martingale synthesized from the seed.
    #[arg(long)]
    candidate: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct BenchArgs {
    dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), PipelineError> {
    match out {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| PipelineError::Io { path: p.display().to_string(), msg: e.to_string() })
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn sim_config(a: &SimArgs) -> SimConfig {
    SimConfig { trials: a.trials, seed: a.rng_seed, max_steps: a.max_steps, ..Default::default() }
}

fn cli_params(a: &SimArgs) -> Result<Option<BTreeMap<String, Rational>>, PipelineError> {
    if a.params.is_empty() {
        return Ok(None);
    }
    let mut out = BTreeMap::new();
    for p in &a.params {
        out.extend(parse_assignments(p)?);
    }
    Ok(Some(out))
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn run_analyze(a: &AnalyzeArgs) -> Result<i32, PipelineError> {
    let mut req = AnalysisRequest::from_file(&a.file)?;
    req.seed = a.seed.clone();
    req.hints = a.hints.clone();
    req.variant = a.variant.clone();
    req.solve_for = a.solve_for.clone();
    req.use_facts = a.use_facts.clone();
    req.assume_ost = a.assume_ost;
    req.trace_rules = a.trace_rules;
    let analysis = analyze(&req)?;
    for w in &analysis.warnings {
        eprintln!("warning: {w}");
    }
    let mut code = analysis.status().exit_code();
    let mut text = analysis.text_report();
    let mut json = analysis.to_json();
    if a.validate && analysis.raw.is_some() {
        let params = match cli_params(&a.sim)? {
            Some(p) => p,
            None => analysis.sim_params()?.unwrap_or_default(),
        };
        let cfg = sim_config(&a.sim);
        let (report, v) = validate(&analysis, params.clone(), cfg.clone())?;
        text.push_str("\nVALIDATION\n");
        let shown: Vec<String> = params.iter().map(|(k, v)| format!("{k} = {v}")).collect();
        text.push_str(&format!("  at {}\n", if shown.is_empty() { "no parameters".into() } else { shown.join(", ") }));
        for l in sim_text(&report, &cfg, &[]).lines() {
            text.push_str(&format!("  {l}\n"));
        }
        for l in v.to_string().lines() {
            text.push_str(&format!("  {l}\n"));
        }
        json["validation"] = sim_json(&report, &cfg, &[], Some(&v));
        json["validation"]["params"] = params.iter().map(|(k, v)| (k.clone(), json!(v.to_string()))).collect();
        if v.verdict != SimVerdict::Pass {
            code = 1;
        }
    }
    emit(&a.output, &if a.format == Format::Json { pretty(&json) } else { text })?;
    Ok(code)
}

fn run_simulate(a: &SimulateArgs) -> Result<i32, PipelineError> {
    let text = std::fs::read_to_string(&a.file)
        .map_err(|e| PipelineError::Io { path: a.file.display().to_string(), msg: e.to_string() })?;
    let name = a.file.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    let program = parse_program(&text).map_err(|source| PipelineError::Frontend { file: name, source })?;
    let params = match cli_params(&a.sim)? {
        Some(p) => p,
        None => match &program.pragmas.sim_params {
            Some(p) => parse_assignments(&p.node)?,
            None => BTreeMap::new(),
        },
    };
    let cfg = sim_config(&a.sim);
    let report = simulate(&program, params, cfg.clone(), &a.quantities)?;
    let censored = report.censored as f64 / report.trials.max(1) as f64;
    if censored > cfg.max_censored {
        eprintln!(
            "warning: {} of {} trials hit the step limit; estimates are unreliable",
            report.censored, report.trials
        );
    }
    let out = match a.format {
        Format::Json => pretty(&sim_json(&report, &cfg, &a.quantities, None)),
        Format::Text => sim_text(&report, &cfg, &a.quantities),
    };
    emit(&a.output, &out)?;
    Ok(0)
}

fn run_check(a: &CheckArgs) -> Result<i32, PipelineError> {
    let (rs, candidate) = match &a.candidate {
        Some(c) => {
            let src = std::fs::read_to_string(&a.file)
                .map_err(|e| PipelineError::Io { path: a.file.display().to_string(), msg: e.to_string() })?;
            let name = a.file.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
            let program = parse_program(&src).map_err(|source| PipelineError::Frontend { file: name, source })?;
            let rs = extract_recurrences(&program)?;
            let p = parse_poly(c, &fact_ctx(&rs)).map_err(OstError::from)?;
            (rs, p)
        }
        None => {
            let mut req = AnalysisRequest::from_file(&a.file)?;
            req.seed = a.seed.clone();
            let an = analyze(&req)?;
            (an.rs, an.form.mi)
        }
    };
    let check = check_martingale(&rs, &candidate);
    let (verdict, detail, code) = match &check.verdict {
        Verdict::Martingale => ("martingale", String::new(), 0),
        Verdict::NotMartingale(r) => ("not a martingale", format!("E[M_i | F_(i-1)] - M_(i-1) = {r}"), 2),
        Verdict::Unknown(why) => ("unknown", format!("stuck on {why}"), 2),
    };
    match a.format {
        Format::Json => print!(
            "{}",
            pretty(&json!({
                "schema": SCHEMA,
                "candidate": candidate.to_string(),
                "verdict": verdict,
                "detail": detail,
                "certificate": check.certificate.iter().map(|s| json!({"rule": s.rule, "before": s.before.to_string(), "after": s.after.to_string()})).collect::<Vec<_>>(),
            }))
        ),
        Format::Text => {
            println!("candidate: {candidate}");
            println!("verdict: {verdict}");
            if !detail.is_empty() {
                println!("{detail}");
            }
        }
    }
    Ok(code)
}

fn run_bench(a: &BenchArgs) -> Result<i32, PipelineError> {
    let rows = bench(Path::new(&a.dir));
    match a.format {
        Format::Text => print!("{}", bench_table(&rows)),
        Format::Json => {
            let rows: Vec<_> = rows
                .iter()
                .map(|r| match &r.result {
                    BenchResult::Done { status, elapsed, fact } => json!({
                        "program": r.name, "status": status.as_str(), "seconds": elapsed.as_secs_f64(), "fact": fact,
                    }),
                    BenchResult::Error(e) => json!({"program": r.name, "status": "error", "error": e}),
                    BenchResult::Skipped => json!({"program": r.name, "status": "skipped"}),
                })
                .collect();
            print!("{}", pretty(&json!({"schema": SCHEMA, "rows": rows})));
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (result, format) = match &cli.command {
        Command::Analyze(a) => (run_analyze(a), a.format),
        Command::Simulate(a) => (run_simulate(a), a.format),
        Command::CheckMartingale(a) => (run_check(a), a.format),
        Command::Bench(a) => (run_bench(a), a.format),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            if format == Format::Json {
                print!("{}", pretty(&json!({"schema": SCHEMA, "status": "error", "error": e.to_string()})));
            }
            ExitCode::from(1)
        }
    }
}
