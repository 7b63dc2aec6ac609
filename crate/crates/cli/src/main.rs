use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use noisy_evo::analysis::{self, AnalysisRow, MethodChoice};
use noisy_evo::harness::{self, Manifest, SummaryRow, SweepAxis};
use noisy_evo::presets::{self, PresetId, PresetOptions};
use noisy_evo::{Algorithm, ExperimentSpec, NoiseModel, NoisyObjective, Problem, ProblemKind, SamplePolicy, StateClass};

#[derive(Parser)]
#[command(name = "noisy-evo", version, about = "Evolutionary algorithms under noisy fitness evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment configuration.
    Run(RunArgs),
    /// Run the Cartesian product of one or two parameter axes.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Axis as FIELD=V1,V2,... (fields: n, m, mu, lambda, p, budget;
        /// policy, algo and noise values are separated by ';'). Repeat for a
        /// second axis.
        #[arg(long = "grid", required = true)]
        grid: Vec<String>,
    },
    /// Run a named experiment group.
    Preset {
        /// u-curve, symmetric-parent, reverse-offspring or segmented-adaptive
        id: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Drift of the (1+1)-EA with fixed sampling on OneMax, one row per state.
    Drift {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "onemax")]
        problem: ProblemKind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        m: u64,
        /// Zeros-count or inclusive range A..B.
        #[arg(long)]
        i: String,
        #[command(flatten)]
        method: MethodArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact distribution of one noisy evaluation.
    Spectrum {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        class: ClassArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Expected noisy fitness of a state class.
    Expected {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        class: ClassArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// onebit, symmetric, reverse or segmented (or onebit:p=<f>)
    #[arg(long)]
    noise: String,
    /// One-bit noise probability.
    #[arg(long)]
    p: Option<f64>,
}

impl ModelArgs {
    fn model(&self) -> Result<NoiseModel> {
        match (self.noise.as_str(), self.p) {
            ("onebit", Some(p)) => Ok(NoiseModel::one_bit(p)?),
            ("onebit", None) => bail!("--noise onebit needs --p"),
            (s, None) => Ok(s.parse()?),
            (s, Some(_)) => bail!("--p applies only to --noise onebit, got --noise {s}"),
        }
    }
}

#[derive(Args)]
struct ClassArgs {
    #[arg(long, default_value = "onemax")]
    problem: ProblemKind,
    #[arg(long)]
    n: usize,
    /// Zeros-count of a OneMax state.
    #[arg(long)]
    zeros: Option<usize>,
    /// LeadingOnes state 1^k 0 1^(n-k-1); k = n means all ones.
    #[arg(long)]
    k: Option<usize>,
}

impl ClassArgs {
    fn class(&self) -> Result<StateClass> {
        match (self.problem, self.zeros, self.k) {
            (ProblemKind::OneMax, Some(z), None) => Ok(StateClass::Zeros(z)),
            (ProblemKind::OneMax, None, Some(k)) => Ok(StateClass::Zeros(k)),
            (ProblemKind::LeadingOnes, None, Some(k)) if k == self.n => Ok(StateClass::AllOnes),
            (ProblemKind::LeadingOnes, None, Some(k)) => Ok(StateClass::LeadingOnesGap(k)),
            (ProblemKind::LeadingOnes, Some(_), _) => bail!("--zeros applies to onemax; use --k for leadingones"),
            _ => bail!("give exactly one of --zeros or --k"),
        }
    }
}

#[derive(Args)]
struct MethodArgs {
    /// exact, monte-carlo or auto
    #[arg(long, default_value = "exact")]
    method: String,
    /// Monte Carlo samples per acceptance probability.
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl MethodArgs {
    fn choice(&self) -> Result<MethodChoice> {
        let (samples, seed) = (self.samples, self.seed);
        Ok(match self.method.as_str() {
            "exact" => MethodChoice::Exact,
            "monte-carlo" => MethodChoice::MonteCarlo { samples, seed },
            "auto" => MethodChoice::Auto { samples, seed },
            other => bail!("unknown method {other:?}; expected exact, monte-carlo or auto"),
        })
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value = "onemax")]
    problem: ProblemKind,
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value = "1+1")]
    algo: Algorithm,
    #[arg(long, default_value = "single")]
    policy: SamplePolicy,
    #[arg(long)]
    budget: u64,
    #[arg(long, default_value_t = 100)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Experiment id recorded in every output row.
    #[arg(long, default_value = "run")]
    id: String,
}

impl RunArgs {
    fn spec(&self) -> Result<ExperimentSpec> {
        let spec = ExperimentSpec {
            id: self.id.clone(),
            problem: self.problem,
            n: self.n,
            model: self.model.model()?,
            algorithm: self.algo,
            policy: self.policy,
            budget: self.budget,
            trials: self.trials,
            base_seed: self.seed,
            output: Some(self.out.clone()),
        };
        Ok(spec)
    }
}

fn parse_range(s: &str) -> Result<RangeInclusive<usize>> {
    let bad = || anyhow!("invalid range {s:?}; expected A..B or a single integer");
    match s.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
            if a > b {
                return Err(bad());
            }
            Ok(a..=b)
        }
        None => {
            let a = s.parse().map_err(|_| bad())?;
            Ok(a..=a)
        }
    }
}

fn print_summary(row: &SummaryRow) {
    eprintln!(
        "done {}: {}/{} successes, rate {:.3} [{:.3}, {:.3}]",
        row.experiment_id, row.success_count, row.trials, row.success_rate, row.ci_low, row.ci_high
    );
}

/// Writes a manifest describing an analysis query next to its CSV.
fn write_analysis(out: &Path, file: &str, rows: &[AnalysisRow], params: serde_json::Value, start: Instant) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    analysis::write_rows(&out.join(file), rows)?;
    write_query_manifest(out, params, start)
}

fn write_query_manifest(out: &Path, params: serde_json::Value, start: Instant) -> Result<()> {
    let mut manifest = Manifest::new(Vec::new(), start.elapsed().as_secs_f64());
    if let serde_json::Value::Object(map) = params {
        manifest.parameters = map;
    }
    manifest.write(&out.join(harness::MANIFEST_FILE))?;
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    let start = Instant::now();
    match cli.command {
        Command::Run(args) => {
            let spec = args.spec()?;
            spec.validate()?;
            let outcome = harness::with_workers(args.jobs, || harness::run_experiment(&spec))??;
            print_summary(&outcome.summary);
            println!("{}", args.out.join(harness::SUMMARY_FILE).display());
        }
        Command::Sweep { run, grid } => {
            if grid.len() > 2 {
                bail!("a sweep takes one or two --grid axes, got {}", grid.len());
            }
            let axes = grid.iter().map(|g| g.parse()).collect::<Result<Vec<SweepAxis>, _>>()?;
            let base = run.spec()?;
            let cells = harness::expand_grid(&base, &axes)?;
            let outcome = harness::with_workers(run.jobs, || harness::run_cells(cells, print_summary))?;
            let mut manifest = Manifest::new(outcome.specs.clone(), start.elapsed().as_secs_f64());
            manifest.failures = outcome.failures.clone();
            manifest.parameters.insert("grid".into(), json!(grid));
            harness::write_outputs(&run.out, &outcome.records, &outcome.rows, &manifest)?;
            println!("{}", run.out.join(harness::SUMMARY_FILE).display());
            if !outcome.is_complete() {
                eprintln!("error: {} of {} cells failed: {}", outcome.failures.len(), outcome.failures.len() + outcome.rows.len(), outcome.failures.join("; "));
                return Ok(ExitCode::from(1));
            }
        }
        Command::Preset { id, n, budget, trials, seed, jobs, out } => {
            let id: PresetId = id.parse()?;
            let preset = presets::preset(id, PresetOptions { n, budget, trials, seed })?;
            let cells = preset.cells.iter().cloned().map(Ok).collect();
            let outcome = harness::with_workers(jobs, || harness::run_cells(cells, print_summary))?;
            let mut manifest = Manifest::new(outcome.specs.clone(), start.elapsed().as_secs_f64());
            manifest.preset = Some(id.to_string());
            manifest.scaling_notes.extend(preset.scaling_notes);
            manifest.parameters = preset.parameters;
            manifest.failures = outcome.failures.clone();
            harness::write_outputs(&out, &outcome.records, &outcome.rows, &manifest)?;
            println!("{}", out.join(harness::SUMMARY_FILE).display());
            if !outcome.is_complete() {
                eprintln!("error: cells failed: {}", outcome.failures.join("; "));
                return Ok(ExitCode::from(1));
            }
        }
        Command::Drift { model, problem, n, m, i, method, out } => {
            analysis::require_onemax(problem)?;
            let noise = model.model()?;
            noise.validate(&Problem::new(problem, n)?)?;
            let range = parse_range(&i)?;
            if *range.end() > n {
                bail!("state {} exceeds n = {n}", range.end());
            }
            let choice = method.choice()?;
            let mut rows = Vec::new();
            println!("i,e_plus,e_minus,drift,method,ci_halfwidth");
            for state in range {
                let rec = analysis::drift(n, state, &noise, m, choice)?;
                println!("{},{},{},{},{},{}", rec.i, rec.e_plus, rec.e_minus, rec.drift, rec.method, rec.ci_halfwidth);
                rows.push(AnalysisRow::drift(n, &noise, m, &rec));
            }
            if let Some(out) = out {
                let params = json!({"verb": "drift", "noise": noise.to_string(), "n": n, "m": m, "i": i, "method": method.method});
                write_analysis(&out, "drift.csv", &rows, params, start)?;
            }
        }
        Command::Spectrum { model, class, out } => {
            let noise = model.model()?;
            let objective = NoisyObjective::new(Problem::new(class.problem, class.n)?, noise)?;
            let spectrum = objective.spectrum(class.class()?)?;
            println!("kind,value_low,value_high,prob");
            for a in &spectrum.atoms {
                println!("atom,{},{},{}", a.value, a.value, a.prob);
            }
            if let Some(t) = spectrum.tail {
                println!("uniform,{},{},{}", t.lo, t.hi, t.prob);
            }
            if let Some(out) = out {
                std::fs::create_dir_all(&out)?;
                let mut w = std::fs::File::create(out.join("spectrum.csv"))?;
                use std::io::Write;
                writeln!(w, "kind,value_low,value_high,prob")?;
                for a in &spectrum.atoms {
                    writeln!(w, "atom,{},{},{}", a.value, a.value, a.prob)?;
                }
                if let Some(t) = spectrum.tail {
                    writeln!(w, "uniform,{},{},{}", t.lo, t.hi, t.prob)?;
                }
                let params = json!({"verb": "spectrum", "noise": noise.to_string(), "problem": class.problem.to_string(), "n": class.n, "zeros": class.zeros, "k": class.k});
                write_query_manifest(&out, params, start)?;
            }
        }
        Command::Expected { model, class, out } => {
            let noise = model.model()?;
            let n = class.n;
            let state = class.class()?;
            let value = match (class.problem, noise, state) {
                (ProblemKind::LeadingOnes, NoiseModel::OneBit { p }, StateClass::LeadingOnesGap(k)) => {
                    analysis::expected_noisy_leadingones(n, k, p)?
                }
                (ProblemKind::LeadingOnes, NoiseModel::OneBit { p }, StateClass::AllOnes) => {
                    analysis::expected_noisy_leadingones(n, n, p)?
                }
                (ProblemKind::OneMax, NoiseModel::Segmented, StateClass::Zeros(k))
                    if n % 200 == 0 && k > n / 100 && k <= n / 50 =>
                {
                    analysis::segment_expectation(n, k)?
                }
                _ => NoisyObjective::new(Problem::new(class.problem, n)?, noise)?.spectrum(state)?.mean(),
            };
            println!("{value}");
            if let Some(out) = out {
                std::fs::create_dir_all(&out)?;
                std::fs::write(out.join("expected.csv"), format!("value\n{value}\n"))?;
                let params = json!({"verb": "expected", "noise": noise.to_string(), "problem": class.problem.to_string(), "n": n, "zeros": class.zeros, "k": class.k});
                write_query_manifest(&out, params, start)?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            let text = e.to_string();
            let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            eprintln!("{}", line.trim());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::from(2)
        }
    }
}
