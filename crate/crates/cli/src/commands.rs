use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use regkit::elemental;
use regkit::solvers::{self, Algorithm, ExperimentConfig, Selection};
use regkit::transversal;

use crate::error::{CliError, Result, EXIT_ASSERTION, EXIT_INPUT, EXIT_OK};
use crate::report::{self, Assertion, ReportRecord};
use crate::scenario::{self, Analysis, Scenario, SET_A, SET_B};
use crate::suite::{self, SuiteConfig};
use crate::trace::TraceTable;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "REGKIT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "regkit", version, about = "Regularity constants and projection algorithms for pairs of sets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Overrides applied on top of a scenario file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Seed for every sampler (overrides the scenario's `seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sample budget (overrides `budget`).
    #[arg(long)]
    pub budget: Option<usize>,
    /// Neighbourhood radius δ (overrides `delta`).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Output directory (overrides `output`; default is the current directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Record wall time in the report. Reports are otherwise byte-identical across runs.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Alg {
    Ap,
    Dr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Paper,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate every constant of a scenario and audit the implications between them.
    Analyze {
        scenario: PathBuf,
        #[command(flatten)]
        over: Overrides,
    },
    /// Run the regularity ladder on one set of a scenario.
    Classify {
        scenario: PathBuf,
        /// Set to classify.
        #[arg(long, default_value = SET_A)]
        set: String,
        #[command(flatten)]
        over: Overrides,
    },
    /// Run alternating projections or Douglas-Rachford from seeded starts.
    Solve {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "ap")]
        alg: Alg,
        /// Number of starting points.
        #[arg(long, default_value_t = 4)]
        starts: usize,
        #[arg(long, default_value_t = solvers::DEFAULT_MAX_ITER)]
        max_iter: usize,
        #[arg(long, default_value_t = solvers::DEFAULT_TOL)]
        tol: f64,
        #[command(flatten)]
        over: Overrides,
    },
    /// Run the regression suite on the built-in fixtures.
    Verify {
        #[arg(long, value_enum, default_value = "paper")]
        suite: Suite,
        /// Keep only checks whose id contains this string.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Sample budget of the pair battery.
        #[arg(long)]
        budget: Option<usize>,
        /// Print the time spent per check.
        #[arg(long)]
        timing: bool,
    },
    /// Merge JSON reports into one flat CSV table.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Parse the scenario, apply the overrides, then build and validate it.
pub fn load_scenario(path: &Path, over: &Overrides) -> Result<Scenario> {
    let mut file = scenario::parse(&read(path)?)?;
    if let Some(s) = over.seed {
        file.seed = s;
    }
    if let Some(b) = over.budget {
        if b == 0 {
            return Err(CliError::Usage("--budget must be positive".into()));
        }
        file.budget = b;
    }
    if let Some(d) = over.delta {
        if !(d > 0.0 && d.is_finite()) {
            return Err(CliError::Usage("--delta must be positive".into()));
        }
        file.delta = d;
    }
    file.build()
}

fn out_dir(s: &Scenario, over: &Overrides) -> PathBuf {
    over.out
        .clone()
        .or_else(|| s.file.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn record(s: &Scenario) -> ReportRecord {
    ReportRecord::new(s.name(), s.pair.seed, s.pair.budget, s.pair.delta)
}

fn write_record(dir: &Path, stem: &str, rec: &ReportRecord) -> Result<PathBuf> {
    let json = dir.join(format!("{stem}.json"));
    report::write_atomic(&json, &rec.to_json())?;
    report::write_atomic(&dir.join(format!("{stem}.csv")), &rec.to_csv())?;
    Ok(json)
}

fn finish(rec: &ReportRecord, path: &Path) -> Result<()> {
    println!("wrote {}", path.display());
    let failed = rec.failures();
    if failed.is_empty() {
        return Ok(());
    }
    let names: Vec<String> = failed.iter().map(|a| format!("{} ({})", a.name, a.detail)).collect();
    Err(CliError::Assertion(names.join("; ")))
}

fn ladder_assertions(set: &str, rep: &elemental::LadderReport) -> Vec<Assertion> {
    vec![Assertion {
        name: format!("ladder implications on {set}"),
        holds: rep.violations.is_empty(),
        detail: rep.violations.join("; "),
    }]
}

fn fmt_value(e: &regkit::estimate::Estimate) -> String {
    match e.value.as_f64() {
        Some(v) if v.is_infinite() => "inf".into(),
        Some(v) => format!("{v:.6} ({:?})", e.bound).to_lowercase(),
        None => "vacuous".into(),
    }
}

pub fn analyze(path: &Path, over: &Overrides) -> Result<()> {
    let s = load_scenario(path, over)?;
    let t = Instant::now();
    let mut rec = record(&s);
    let c = transversal::analyze(&s.pair)?;
    println!("{}: sr = {}, r = {}", s.name(), fmt_value(&c.sr), fmt_value(&c.r.estimate));
    rec.assertions.extend(c.audit.iter().map(|a| Assertion {
        name: a.name.clone(),
        holds: a.holds,
        detail: a.detail.clone(),
    }));
    rec.constants = Some(c);
    if s.file.analyses.contains(&Analysis::Classify) {
        let cfg = s.ladder_config();
        for name in [SET_A, SET_B] {
            let l = elemental::classify(&s.sets[name], &s.pair.xbar, &cfg)?;
            rec.assertions.extend(ladder_assertions(name, &l));
            rec.ladders.insert(name.to_string(), l);
        }
    }
    if s.file.analyses.contains(&Analysis::Solve) {
        let cfg = ExperimentConfig {
            seed: s.pair.seed,
            eps: s.file.eps.unwrap_or(ExperimentConfig::default().eps),
            ..ExperimentConfig::default()
        };
        let e = solvers::convergence_experiment(&s.pair, &cfg)?;
        rec.assertions.push(Assertion {
            name: "satisfied hypothesis => contractive runs".into(),
            holds: e.consistent,
            detail: e.inconsistencies.join("; "),
        });
        rec.experiment = Some(e);
    }
    if over.timing {
        rec.wall_time = Some(t.elapsed().as_secs_f64());
    }
    let p = write_record(&out_dir(&s, over), s.name(), &rec)?;
    finish(&rec, &p)
}

pub fn classify(path: &Path, set: &str, over: &Overrides) -> Result<()> {
    let s = load_scenario(path, over)?;
    let Some(target) = s.sets.get(set) else {
        let names: Vec<&str> = s.sets.keys().map(String::as_str).collect();
        return Err(CliError::Usage(format!("no set {set:?} in scenario (have {})", names.join(", "))));
    };
    let t = Instant::now();
    let l = elemental::classify(target, &s.pair.xbar, &s.ladder_config())?;
    for (name, rung) in l.chain() {
        println!("{name:22} {:?}", rung.verdict.holds);
    }
    let mut rec = record(&s);
    rec.assertions = ladder_assertions(set, &l);
    rec.ladders.insert(set.to_string(), l);
    if over.timing {
        rec.wall_time = Some(t.elapsed().as_secs_f64());
    }
    let p = write_record(&out_dir(&s, over), &format!("{}-ladder-{set}", s.name()), &rec)?;
    finish(&rec, &p)
}

pub fn solve(path: &Path, alg: Alg, starts: usize, max_iter: usize, tol: f64, over: &Overrides) -> Result<()> {
    if starts == 0 {
        return Err(CliError::Usage("--starts must be positive".into()));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(CliError::Usage("--tol must be positive".into()));
    }
    let s = load_scenario(path, over)?;
    let dir = out_dir(&s, over);
    let (algorithm, tag) = match alg {
        Alg::Ap => (Algorithm::Ap, "ap"),
        Alg::Dr => (Algorithm::Dr, "dr"),
    };
    let t = Instant::now();
    let xs = solvers::starts(&s.pair, starts, ExperimentConfig::default().start_radius * s.pair.delta, regkit::rng::derive(s.pair.seed, 41));
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for (i, x0) in xs.iter().enumerate() {
        let tr = match algorithm {
            Algorithm::Ap => solvers::alternating_projections(&s.pair, x0, max_iter, tol, Selection::Lexicographic)?,
            Algorithm::Dr => solvers::douglas_rachford(&s.pair, x0, max_iter, tol, Selection::Lexicographic)?,
        };
        let trace_path = dir.join(format!("{}-{tag}-{i}.csv", s.name()));
        report::write_atomic(&trace_path, &TraceTable::from_trace(&tr).to_csv())?;
        let sum = solvers::summarize(&tr, x0, tol);
        let rate = sum.fit.as_ref().map(|f| f.rate.to_string()).unwrap_or_default();
        let r2 = sum.fit.as_ref().map(|f| f.r_squared.to_string()).unwrap_or_default();
        println!("start {i}: {} iterations, rate {}", sum.iterations, if rate.is_empty() { "n/a" } else { &rate });
        rows.push(vec![
            i.to_string(),
            tag.to_string(),
            sum.iterations.to_string(),
            format!("{:?}", sum.termination).to_lowercase(),
            sum.final_distance.to_string(),
            sum.finite.to_string(),
            rate,
            r2,
        ]);
        summaries.push(sum);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["start", "algorithm", "iterations", "termination", "final_distance", "finite", "rate", "r_squared"])
        .expect("in-memory write");
    for r in &rows {
        w.write_record(r).expect("in-memory write");
    }
    let csv_text = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv");
    report::write_atomic(&dir.join(format!("{}-{tag}-rates.csv", s.name())), &csv_text)?;
    let mut summary = serde_json::json!({
        "tool": report::TOOL,
        "version": report::VERSION,
        "scenario": s.name(),
        "seed": s.pair.seed,
        "algorithm": algorithm,
        "runs": summaries,
    });
    if over.timing {
        summary["wall_time"] = serde_json::json!(t.elapsed().as_secs_f64());
    }
    let json_path = dir.join(format!("{}-{tag}-rates.json", s.name()));
    report::write_atomic(&json_path, &(serde_json::to_string_pretty(&summary).expect("serializes") + "\n"))?;
    println!("wrote {}", json_path.display());
    Ok(())
}

pub fn verify(filter: Option<String>, seed: Option<u64>, budget: Option<usize>, timing: bool) -> Result<()> {
    let d = SuiteConfig::default();
    let cfg = SuiteConfig {
        filter,
        seed: seed.unwrap_or(d.seed),
        budget: budget.unwrap_or(d.budget),
        ..d
    };
    if cfg.budget == 0 {
        return Err(CliError::Usage("--budget must be positive".into()));
    }
    let t = Instant::now();
    let results = suite::run(&cfg)?;
    for r in &results {
        if timing {
            println!("{} [{:.2}s]", r.line(), r.seconds);
        } else {
            println!("{}", r.line());
        }
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    println!("{} checks, {} passed, {} failed", results.len(), results.len() - failed, failed);
    if timing {
        println!("wall time {:.2}s", t.elapsed().as_secs_f64());
    }
    if results.is_empty() {
        return Err(CliError::Usage("filter selected no checks".into()));
    }
    if failed > 0 {
        return Err(CliError::Assertion(format!("{failed} suite checks failed")));
    }
    Ok(())
}

pub fn merge_reports(paths: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let mut rows = Vec::new();
    for p in paths {
        let rec = report::parse_report(&read(p)?).map_err(|e| CliError::Report(format!("{}: {e}", p.display())))?;
        rows.extend(rec.csv_rows());
    }
    let text = report::rows_to_csv(&rows);
    match out {
        Some(p) => report::write_atomic(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    // A second call in the same process finds the pool already built.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn execute(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Analyze { scenario, over } => analyze(&scenario, &over),
        Command::Classify { scenario, set, over } => classify(&scenario, &set, &over),
        Command::Solve { scenario, alg, starts, max_iter, tol, over } => solve(&scenario, alg, starts, max_iter, tol, &over),
        Command::Verify { suite: Suite::Paper, filter, seed, budget, timing } => verify(filter, seed, budget, timing),
        Command::Report { reports, out } => merge_reports(&reports, out.as_deref()),
    }
}

/// Parse arguments, run, and map the outcome to an exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.exit_code() == EXIT_ASSERTION {
                EXIT_ASSERTION
            } else {
                EXIT_INPUT
            }
        }
    }
}
