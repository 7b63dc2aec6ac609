//! Seeded trial batches, parameter sweeps, summaries and on-disk outputs.
//!
//! Trial `t` of an experiment always uses the streams derived from
//! `(base_seed, t)`, so results do not depend on the worker count.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{run_trial, Algorithm, TrialResult, UpdateRule};
use crate::error::{Error, Result};
use crate::estimation::SamplePolicy;
use crate::noise::NoiseModel;
use crate::problems::{Problem, ProblemKind};
use crate::stats::{mean, quantile, wilson_interval};

pub const TRIALS_FILE: &str = "trials.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub id: String,
    pub problem: ProblemKind,
    pub n: usize,
    pub model: NoiseModel,
    pub algorithm: Algorithm,
    pub policy: SamplePolicy,
    /// Maximum noisy evaluations per trial. The generation in progress when
    /// the budget runs out still completes.
    pub budget: u64,
    pub trials: u64,
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn problem(&self) -> Result<Problem> {
        Problem::new(self.problem, self.n)
    }

    /// Checks every field combination that would otherwise fail inside a trial.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidExperiment("trials must be at least 1".into()));
        }
        if self.budget == 0 {
            return Err(Error::InvalidExperiment("budget must be at least 1".into()));
        }
        let problem = self.problem()?;
        self.model.validate(&problem)?;
        self.algorithm.validate()?;
        self.policy.validate(self.n)?;
        if matches!(self.policy, SamplePolicy::Adaptive(_)) && self.algorithm != Algorithm::OnePlusOne {
            return Err(Error::InvalidExperiment(format!(
                "adaptive sampling needs the 1+1 algorithm, got {}",
                self.algorithm
            )));
        }
        Ok(())
    }

    pub fn is_nonstandard(&self) -> bool {
        self.algorithm.is_nonstandard_with(&self.policy)
    }
}

/// One row of the per-trial CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub experiment_id: String,
    pub trial: u64,
    pub seed: u64,
    pub n: usize,
    pub problem: ProblemKind,
    pub model: NoiseModel,
    pub algorithm: Algorithm,
    pub policy: SamplePolicy,
    pub budget: u64,
    pub success: bool,
    pub generations: u64,
    pub evals_at_hit: Option<u64>,
    pub total_evals: u64,
}

impl TrialRecord {
    fn new(spec: &ExperimentSpec, trial: u64, r: &TrialResult) -> Self {
        Self {
            experiment_id: spec.id.clone(),
            trial,
            seed: r.seed,
            n: spec.n,
            problem: spec.problem,
            model: spec.model,
            algorithm: spec.algorithm,
            policy: spec.policy,
            budget: spec.budget,
            success: r.success,
            generations: r.generations,
            evals_at_hit: r.evals_at_hit,
            total_evals: r.total_evals,
        }
    }

    fn same_config(&self, other: &Self) -> bool {
        self.experiment_id == other.experiment_id
            && self.n == other.n
            && self.problem == other.problem
            && self.model == other.model
            && self.algorithm == other.algorithm
            && self.policy == other.policy
            && self.budget == other.budget
    }
}

/// Success statistics of one configuration. Hit-time statistics cover
/// successful trials only; `censored` counts the trials that ran out of
/// budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment_id: String,
    pub n: usize,
    pub problem: ProblemKind,
    pub model: NoiseModel,
    pub algorithm: Algorithm,
    pub policy: SamplePolicy,
    pub budget: u64,
    pub trials: u64,
    pub success_count: u64,
    pub success_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub median_evals: Option<f64>,
    pub mean_evals: Option<f64>,
    pub q25_evals: Option<f64>,
    pub q75_evals: Option<f64>,
    pub censored: u64,
    pub nonstandard: bool,
}

pub fn summarize(records: &[TrialRecord]) -> Result<SummaryRow> {
    let first = records
        .first()
        .ok_or_else(|| Error::InvalidExperiment("cannot summarize zero trials".into()))?;
    if let Some(bad) = records.iter().find(|r| !r.same_config(first)) {
        return Err(Error::InvalidExperiment(format!(
            "mixed configurations: {:?} and {:?}",
            first.experiment_id, bad.experiment_id
        )));
    }
    let trials = records.len() as u64;
    let mut hits: Vec<f64> = records.iter().filter_map(|r| r.evals_at_hit).map(|v| v as f64).collect();
    hits.sort_by(f64::total_cmp);
    let success_count = hits.len() as u64;
    let (ci_low, ci_high) = wilson_interval(success_count, trials);
    Ok(SummaryRow {
        experiment_id: first.experiment_id.clone(),
        n: first.n,
        problem: first.problem,
        model: first.model,
        algorithm: first.algorithm,
        policy: first.policy,
        budget: first.budget,
        trials,
        success_count,
        success_rate: success_count as f64 / trials as f64,
        ci_low,
        ci_high,
        median_evals: quantile(&hits, 0.5),
        mean_evals: mean(&hits),
        q25_evals: quantile(&hits, 0.25),
        q75_evals: quantile(&hits, 0.75),
        censored: trials - success_count,
        nonstandard: first.algorithm.is_nonstandard_with(&first.policy),
    })
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub summary: SummaryRow,
    pub records: Vec<TrialRecord>,
}

/// Runs every trial of `spec` (in parallel on the current rayon pool) and,
/// when `spec.output` is set, writes the per-trial CSV, the summary CSV and
/// the manifest into that directory.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    let start = Instant::now();
    let outcome = run_cell(spec)?;
    if let Some(dir) = &spec.output {
        let manifest = Manifest::new(vec![spec.clone()], start.elapsed().as_secs_f64());
        write_outputs(dir, &outcome.records, std::slice::from_ref(&outcome.summary), &manifest)?;
    }
    Ok(outcome)
}

fn run_cell(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    spec.validate()?;
    let problem = spec.problem()?;
    let results: Vec<Result<TrialResult>> = (0..spec.trials)
        .into_par_iter()
        .map(|t| run_trial(problem, spec.model, spec.algorithm, spec.policy, spec.budget, spec.base_seed, t))
        .collect();
    let mut records = Vec::with_capacity(results.len());
    for (t, r) in results.into_iter().enumerate() {
        records.push(TrialRecord::new(spec, t as u64, &r?));
    }
    let summary = summarize(&records)?;
    Ok(ExperimentOutcome { summary, records })
}

/// A spec field a sweep can vary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepField {
    N,
    /// Fixed sample size; sets the policy to `fixed:m=<value>`.
    M,
    /// Parent population size; keeps an existing update rule.
    Mu,
    Lambda,
    /// One-bit noise probability.
    P,
    Budget,
    Policy,
    Algorithm,
    Model,
}

impl std::str::FromStr for SweepField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "n" => SweepField::N,
            "m" => SweepField::M,
            "mu" => SweepField::Mu,
            "lambda" => SweepField::Lambda,
            "p" => SweepField::P,
            "budget" => SweepField::Budget,
            "policy" => SweepField::Policy,
            "algo" | "algorithm" => SweepField::Algorithm,
            "noise" | "model" => SweepField::Model,
            _ => return Err(Error::Parse(format!("unknown sweep field {s:?}"))),
        })
    }
}

impl SweepField {
    fn name(self) -> &'static str {
        match self {
            SweepField::N => "n",
            SweepField::M => "m",
            SweepField::Mu => "mu",
            SweepField::Lambda => "lambda",
            SweepField::P => "p",
            SweepField::Budget => "budget",
            SweepField::Policy => "policy",
            SweepField::Algorithm => "algo",
            SweepField::Model => "noise",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub field: SweepField,
    pub values: Vec<String>,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    /// `field=v1,v2,...`; values containing commas (policy and algorithm
    /// strings) are separated by `;` instead.
    fn from_str(s: &str) -> Result<Self> {
        let (field, values) = s
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected field=v1,v2,... in grid {s:?}")))?;
        let field: SweepField = field.trim().parse()?;
        let sep = match field {
            SweepField::Policy | SweepField::Algorithm | SweepField::Model => ';',
            _ => ',',
        };
        let values: Vec<String> = values
            .split(sep)
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(String::from)
            .collect();
        if values.is_empty() {
            return Err(Error::Parse(format!("grid axis {s:?} has no values")));
        }
        Ok(SweepAxis { field, values })
    }
}

fn apply(spec: &mut ExperimentSpec, field: SweepField, value: &str) -> Result<()> {
    let bad = || Error::Parse(format!("invalid value {value:?} for sweep field {}", field.name()));
    match field {
        SweepField::N => spec.n = value.parse().map_err(|_| bad())?,
        SweepField::M => spec.policy = SamplePolicy::fixed(value.parse().map_err(|_| bad())?)?,
        SweepField::Mu => {
            let rule = match spec.algorithm {
                Algorithm::MuPlusOne { rule, .. } => rule,
                _ => UpdateRule::ReplaceIfNotWorse,
            };
            spec.algorithm = Algorithm::mu_plus_one(value.parse().map_err(|_| bad())?, rule)?;
        }
        SweepField::Lambda => spec.algorithm = Algorithm::one_plus_lambda(value.parse().map_err(|_| bad())?)?,
        SweepField::P => spec.model = NoiseModel::one_bit(value.parse().map_err(|_| bad())?)?,
        SweepField::Budget => spec.budget = value.parse().map_err(|_| bad())?,
        SweepField::Policy => spec.policy = value.parse()?,
        SweepField::Algorithm => spec.algorithm = value.parse()?,
        SweepField::Model => spec.model = value.parse()?,
    }
    Ok(())
}

/// The Cartesian product of the axes applied to `base`, in row-major order
/// (last axis fastest). Cell ids extend the base id with `field=value`.
pub fn expand_grid(base: &ExperimentSpec, axes: &[SweepAxis]) -> Result<Vec<Result<ExperimentSpec>>> {
    if axes.is_empty() || axes.iter().any(|a| a.values.is_empty()) {
        return Err(Error::InvalidExperiment("sweep grid is empty".into()));
    }
    let mut cells: Vec<(ExperimentSpec, Vec<String>, Option<Error>)> =
        vec![(ExperimentSpec { output: None, ..base.clone() }, Vec::new(), None)];
    for axis in axes {
        let mut next = Vec::with_capacity(cells.len() * axis.values.len());
        for (spec, labels, err) in &cells {
            for v in &axis.values {
                let mut s = spec.clone();
                let mut l = labels.clone();
                l.push(format!("{}={v}", axis.field.name()));
                let e = match err {
                    Some(e) => Some(Error::InvalidExperiment(e.to_string())),
                    None => apply(&mut s, axis.field, v).err(),
                };
                next.push((s, l, e));
            }
        }
        cells = next;
    }
    Ok(cells
        .into_iter()
        .map(|(mut s, labels, err)| {
            s.id = format!("{}[{}]", base.id, labels.join(","));
            match err {
                Some(e) => Err(Error::InvalidExperiment(format!("cell {}: {e}", s.id))),
                None => Ok(s),
            }
        })
        .collect())
}

/// Result of running a list of cells: summaries of the cells that ran and
/// diagnostics for those that were rejected.
#[derive(Clone, Debug, Default)]
pub struct SweepOutcome {
    pub specs: Vec<ExperimentSpec>,
    pub rows: Vec<SummaryRow>,
    pub records: Vec<TrialRecord>,
    pub failures: Vec<String>,
}

impl SweepOutcome {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs each cell independently. Invalid cells are reported in `failures`
/// and the remaining cells still run.
pub fn run_cells(cells: Vec<Result<ExperimentSpec>>, mut on_cell_done: impl FnMut(&SummaryRow)) -> SweepOutcome {
    let mut out = SweepOutcome::default();
    for cell in cells {
        let spec = match cell {
            Ok(s) => s,
            Err(e) => {
                out.failures.push(e.to_string());
                continue;
            }
        };
        match run_cell(&spec) {
            Ok(o) => {
                on_cell_done(&o.summary);
                out.rows.push(o.summary);
                out.records.extend(o.records);
                out.specs.push(spec);
            }
            Err(e) => out.failures.push(format!("cell {}: {e}", spec.id)),
        }
    }
    out
}

pub fn run_sweep(base: &ExperimentSpec, axes: &[SweepAxis]) -> Result<SweepOutcome> {
    Ok(run_cells(expand_grid(base, axes)?, |_| {}))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub scaling_notes: Vec<String>,
    pub specs: Vec<ExperimentSpec>,
    #[serde(default)]
    pub failures: Vec<String>,
    #[serde(default)]
    pub parameters: serde_json::Map<String, serde_json::Value>,
    pub wall_clock_seconds: f64,
}

impl Manifest {
    pub fn new(specs: Vec<ExperimentSpec>, wall_clock_seconds: f64) -> Self {
        let mut scaling_notes = Vec::new();
        for s in &specs {
            if s.is_nonstandard() {
                scaling_notes.push(format!(
                    "{}: sampling policy {} with algorithm {} is a nonstandard pairing",
                    s.id, s.policy, s.algorithm
                ));
            }
        }
        Self {
            tool: "noisy-evo".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            preset: None,
            scaling_notes,
            specs,
            failures: Vec::new(),
            parameters: Default::default(),
            wall_clock_seconds,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// Runs `f` on a dedicated pool of `jobs` workers, or on the global pool when
/// `jobs` is `None`. Results do not depend on the worker count.
pub fn with_workers<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(Error::InvalidExperiment("--jobs must be at least 1".into())),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::InvalidExperiment(format!("cannot start {k} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Writes `trials.csv`, `summary.csv` and `manifest.json` into `dir`.
pub fn write_outputs(dir: &Path, records: &[TrialRecord], rows: &[SummaryRow], manifest: &Manifest) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(&dir.join(TRIALS_FILE), records)?;
    write_csv(&dir.join(SUMMARY_FILE), rows)?;
    manifest.write(&dir.join(MANIFEST_FILE))
}
