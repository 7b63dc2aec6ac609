//! The (1+1), (μ+1) and (1+λ) elitist EAs under noisy evaluation.
//!
//! Every generation evaluates freshly: offspring first, then the parent(s),
//! so no noisy value survives from one generation to the next. Hitting the
//! true optimum is checked on every solution as it is created and costs no
//! evaluations; the generation in which it happens still completes, and the
//! run stops after it.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::bitstring::Bitstring;
use crate::error::{Error, Result};
use crate::estimation::{adaptive_compare, mean_of, AdaptiveParams, SamplePolicy};
use crate::noise::{EvalCounter, NoiseModel, NoisyObjective};
use crate::problems::Problem;
use crate::rng::TrialStreams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateRule {
    /// The offspring replaces the noisy-worst parent if it is not worse.
    ReplaceIfNotWorse,
    /// The offspring joins the population and the noisy-worst of all μ+1 leaves.
    AddThenDeleteWorst,
}

impl fmt::Display for UpdateRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UpdateRule::ReplaceIfNotWorse => "replace",
            UpdateRule::AddThenDeleteWorst => "add-delete",
        })
    }
}

impl FromStr for UpdateRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "replace" => Ok(UpdateRule::ReplaceIfNotWorse),
            "add-delete" => Ok(UpdateRule::AddThenDeleteWorst),
            _ => Err(Error::Parse(format!("unknown update rule {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Algorithm {
    OnePlusOne,
    MuPlusOne { mu: usize, rule: UpdateRule },
    OnePlusLambda { lambda: usize },
}

impl Algorithm {
    pub fn mu_plus_one(mu: usize, rule: UpdateRule) -> Result<Self> {
        if mu == 0 {
            return Err(Error::InvalidAlgorithm("population size mu must be at least 1".into()));
        }
        Ok(Algorithm::MuPlusOne { mu, rule })
    }

    pub fn one_plus_lambda(lambda: usize) -> Result<Self> {
        if lambda == 0 {
            return Err(Error::InvalidAlgorithm("offspring count lambda must be at least 1".into()));
        }
        Ok(Algorithm::OnePlusLambda { lambda })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Algorithm::MuPlusOne { mu, rule } => Self::mu_plus_one(mu, rule).map(|_| ()),
            Algorithm::OnePlusLambda { lambda } => Self::one_plus_lambda(lambda).map(|_| ()),
            Algorithm::OnePlusOne => Ok(()),
        }
    }

    /// Evaluations spent on the initial population, per unit sample size.
    pub fn initial_evals(&self) -> u64 {
        match *self {
            Algorithm::MuPlusOne { mu, .. } => mu as u64,
            _ => 1,
        }
    }

    /// Evaluations per generation, per unit sample size.
    pub fn evals_per_generation(&self) -> u64 {
        match *self {
            Algorithm::OnePlusOne => 2,
            Algorithm::MuPlusOne { mu, .. } => mu as u64 + 1,
            Algorithm::OnePlusLambda { lambda } => lambda as u64 + 1,
        }
    }

    /// Whether `policy` is a pairing outside the one analyzed for this
    /// algorithm (any sampling beyond one evaluation for the population EAs).
    pub fn is_nonstandard_with(&self, policy: &SamplePolicy) -> bool {
        !matches!(self, Algorithm::OnePlusOne) && !matches!(policy, SamplePolicy::Single | SamplePolicy::Fixed { m: 1 })
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::OnePlusOne => f.write_str("1+1"),
            Algorithm::MuPlusOne { mu, rule } => write!(f, "mu+1:mu={mu},rule={rule}"),
            Algorithm::OnePlusLambda { lambda } => write!(f, "1+lambda:lambda={lambda}"),
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let mut fields = Vec::new();
        for kv in args.split(',').filter(|kv| !kv.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value in algorithm {s:?}")))?;
            fields.push((k, v));
        }
        let int = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| Error::Parse(format!("invalid integer {v:?} in algorithm {s:?}")))
        };
        match name {
            "1+1" if fields.is_empty() => Ok(Algorithm::OnePlusOne),
            "mu+1" => {
                let mut mu = None;
                let mut rule = UpdateRule::ReplaceIfNotWorse;
                for (k, v) in fields {
                    match k {
                        "mu" => mu = Some(int(v)?),
                        "rule" => rule = v.parse()?,
                        _ => return Err(Error::Parse(format!("unknown key {k:?} in algorithm {s:?}"))),
                    }
                }
                let mu = mu.ok_or_else(|| Error::Parse(format!("missing mu in algorithm {s:?}")))?;
                Self::mu_plus_one(mu, rule)
            }
            "1+lambda" => match fields.as_slice() {
                [("lambda", v)] => Self::one_plus_lambda(int(v)?),
                _ => Err(Error::Parse(format!("expected 1+lambda:lambda=<int>, got {s:?}"))),
            },
            _ => Err(Error::Parse(format!("unknown algorithm {s:?}"))),
        }
    }
}

impl From<Algorithm> for String {
    fn from(a: Algorithm) -> String {
        a.to_string()
    }
}

impl TryFrom<String> for Algorithm {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialResult {
    pub success: bool,
    pub generations: u64,
    pub evals_at_hit: Option<u64>,
    pub total_evals: u64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug)]
enum Selection {
    Values { m: u64 },
    Comparator(AdaptiveParams),
}

/// One trial in progress. Construction draws and evaluates the initial
/// population; [`Run::step`] executes one generation.
#[derive(Clone, Debug)]
pub struct Run {
    objective: NoisyObjective,
    algorithm: Algorithm,
    selection: Selection,
    budget: u64,
    streams: TrialStreams,
    counter: EvalCounter,
    population: Vec<Bitstring>,
    values: Vec<f64>,
    generations: u64,
    evals_at_hit: Option<u64>,
}

impl Run {
    pub fn new(
        problem: Problem,
        model: NoiseModel,
        algorithm: Algorithm,
        policy: SamplePolicy,
        budget: u64,
        streams: TrialStreams,
    ) -> Result<Self> {
        algorithm.validate()?;
        if budget == 0 {
            return Err(Error::InvalidExperiment("budget must be at least 1".into()));
        }
        let objective = NoisyObjective::new(problem, model)?;
        policy.validate(problem.n)?;
        let selection = match policy {
            SamplePolicy::Single => Selection::Values { m: 1 },
            SamplePolicy::Fixed { m } => Selection::Values { m },
            SamplePolicy::Adaptive(spec) => {
                if algorithm != Algorithm::OnePlusOne {
                    return Err(Error::InvalidAlgorithm(format!(
                        "adaptive sampling is a two-solution comparator and needs the 1+1 algorithm, got {algorithm}"
                    )));
                }
                Selection::Comparator(spec.resolve(problem.n)?)
            }
        };
        let mut run = Self {
            objective,
            algorithm,
            selection,
            budget,
            streams,
            counter: EvalCounter::new(),
            population: Vec::new(),
            values: Vec::new(),
            generations: 0,
            evals_at_hit: None,
        };
        run.initialize()?;
        Ok(run)
    }

    fn initialize(&mut self) -> Result<()> {
        let n = self.objective.problem().n;
        let size = match self.algorithm {
            Algorithm::MuPlusOne { mu, .. } => mu,
            _ => 1,
        };
        for _ in 0..size {
            self.population.push(Bitstring::random(n, &mut self.streams.init)?);
        }
        let m = match self.selection {
            Selection::Values { m } => m,
            Selection::Comparator(_) => 1,
        };
        for x in &self.population {
            mean_of(&self.objective, x, m, &mut self.streams.noise, &mut self.counter);
        }
        if self.population.iter().any(is_optimum) {
            self.evals_at_hit = Some(self.counter.total());
        }
        Ok(())
    }

    pub fn is_finished(&self) -> bool {
        self.evals_at_hit.is_some() || self.counter.total() >= self.budget
    }

    pub fn population(&self) -> &[Bitstring] {
        &self.population
    }

    pub fn generations(&self) -> u64 {
        self.generations
    }

    pub fn evals(&self) -> u64 {
        self.counter.total()
    }

    /// Runs one generation unless the run has already finished. Returns
    /// whether a generation ran.
    pub fn step(&mut self) -> bool {
        if self.is_finished() {
            return false;
        }
        match self.algorithm {
            Algorithm::OnePlusOne => self.step_one_plus_one(),
            Algorithm::MuPlusOne { rule, .. } => self.step_mu_plus_one(rule),
            Algorithm::OnePlusLambda { lambda } => self.step_one_plus_lambda(lambda),
        }
        self.generations += 1;
        true
    }

    fn hit(&mut self, found: bool) {
        if found && self.evals_at_hit.is_none() {
            self.evals_at_hit = Some(self.counter.total());
        }
    }

    fn step_one_plus_one(&mut self) {
        let parent = &self.population[0];
        let offspring = parent.mutate(&mut self.streams.mutation);
        let found = is_optimum(&offspring);
        let accept = match self.selection {
            Selection::Values { m } => {
                let fo = mean_of(&self.objective, &offspring, m, &mut self.streams.noise, &mut self.counter);
                let fp = mean_of(&self.objective, parent, m, &mut self.streams.noise, &mut self.counter);
                fo >= fp
            }
            Selection::Comparator(params) => {
                adaptive_compare(
                    &offspring,
                    parent,
                    &params,
                    &self.objective,
                    &mut self.streams.noise,
                    &mut self.counter,
                )
                .offspring_not_worse
            }
        };
        if accept {
            self.population[0] = offspring;
        }
        self.hit(found);
    }

    fn sample_size(&self) -> u64 {
        match self.selection {
            Selection::Values { m } => m,
            Selection::Comparator(_) => unreachable!("comparator runs only under 1+1"),
        }
    }

    fn step_mu_plus_one(&mut self, rule: UpdateRule) {
        let m = self.sample_size();
        let mu = self.population.len();
        let idx = pick(mu, &mut self.streams.selection);
        let offspring = self.population[idx].mutate(&mut self.streams.mutation);
        let found = is_optimum(&offspring);
        let fo = mean_of(&self.objective, &offspring, m, &mut self.streams.noise, &mut self.counter);
        self.values.clear();
        for x in &self.population {
            let v = mean_of(&self.objective, x, m, &mut self.streams.noise, &mut self.counter);
            self.values.push(v);
        }
        match rule {
            UpdateRule::ReplaceIfNotWorse => {
                let worst = argmin_uniform(&self.values, &mut self.streams.selection);
                if fo >= self.values[worst] {
                    self.population[worst] = offspring;
                }
            }
            UpdateRule::AddThenDeleteWorst => {
                self.values.push(fo);
                let worst = argmin_uniform(&self.values, &mut self.streams.selection);
                if worst < mu {
                    self.population[worst] = offspring;
                }
            }
        }
        self.hit(found);
    }

    fn step_one_plus_lambda(&mut self, lambda: usize) {
        let m = self.sample_size();
        let mut found = false;
        let offspring: Vec<Bitstring> = (0..lambda)
            .map(|_| {
                let y = self.population[0].mutate(&mut self.streams.mutation);
                found |= is_optimum(&y);
                y
            })
            .collect();
        self.values.clear();
        for y in &offspring {
            let v = mean_of(&self.objective, y, m, &mut self.streams.noise, &mut self.counter);
            self.values.push(v);
        }
        let best = argmax_uniform(&self.values, &mut self.streams.selection);
        let fp = mean_of(&self.objective, &self.population[0], m, &mut self.streams.noise, &mut self.counter);
        if self.values[best] >= fp {
            self.population[0] = offspring.into_iter().nth(best).expect("best index within offspring");
        }
        self.hit(found);
    }

    pub fn result(&self, seed: u64) -> TrialResult {
        TrialResult {
            success: self.evals_at_hit.is_some(),
            generations: self.generations,
            evals_at_hit: self.evals_at_hit,
            total_evals: self.counter.total(),
            seed,
        }
    }

    pub fn run_to_end(&mut self) {
        while self.step() {}
    }
}

#[inline]
fn is_optimum(x: &Bitstring) -> bool {
    x.zeros_count() == 0
}

/// Uniform index in `0..len`; draws nothing when there is one choice.
fn pick<R: RngCore + ?Sized>(len: usize, rng: &mut R) -> usize {
    if len == 1 { 0 } else { rng.random_range(0..len) }
}

fn argmin_uniform<R: RngCore + ?Sized>(values: &[f64], rng: &mut R) -> usize {
    extreme_uniform(values, rng, |a, b| a < b)
}

fn argmax_uniform<R: RngCore + ?Sized>(values: &[f64], rng: &mut R) -> usize {
    extreme_uniform(values, rng, |a, b| a > b)
}

fn extreme_uniform<R: RngCore + ?Sized>(values: &[f64], rng: &mut R, better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = values[0];
    let mut ties = 1usize;
    for &v in &values[1..] {
        if better(v, best) {
            best = v;
            ties = 1;
        } else if v == best {
            ties += 1;
        }
    }
    let k = pick(ties, rng);
    values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == best)
        .nth(k)
        .map(|(i, _)| i)
        .expect("tie index within range")
}

/// Runs one trial with streams derived from `(seed, trial)`.
pub fn run_trial(
    problem: Problem,
    model: NoiseModel,
    algorithm: Algorithm,
    policy: SamplePolicy,
    budget: u64,
    seed: u64,
    trial: u64,
) -> Result<TrialResult> {
    let mut run = Run::new(problem, model, algorithm, policy, budget, TrialStreams::new(seed, trial))?;
    run.run_to_end();
    Ok(run.result(seed))
}

pub fn run_one_plus_one(
    problem: Problem,
    model: NoiseModel,
    policy: SamplePolicy,
    budget: u64,
    seed: u64,
    trial: u64,
) -> Result<TrialResult> {
    run_trial(problem, model, Algorithm::OnePlusOne, policy, budget, seed, trial)
}

pub fn run_mu_plus_one(
    problem: Problem,
    model: NoiseModel,
    mu: usize,
    rule: UpdateRule,
    budget: u64,
    seed: u64,
    trial: u64,
) -> Result<TrialResult> {
    let algorithm = Algorithm::mu_plus_one(mu, rule)?;
    run_trial(problem, model, algorithm, SamplePolicy::Single, budget, seed, trial)
}

pub fn run_one_plus_lambda(
    problem: Problem,
    model: NoiseModel,
    lambda: usize,
    budget: u64,
    seed: u64,
    trial: u64,
) -> Result<TrialResult> {
    let algorithm = Algorithm::one_plus_lambda(lambda)?;
    run_trial(problem, model, algorithm, SamplePolicy::Single, budget, seed, trial)
}
