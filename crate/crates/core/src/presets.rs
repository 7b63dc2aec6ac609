//! Scaled-down experiment groups that contrast sampling with populations
//! and with adaptive sampling.
//!
//! `log` in population sizes is `ceil(log2 n)`; sample sizes derived from
//! `log n` use the unrounded `log2 n`.

use std::fmt;
use std::str::FromStr;

use serde_json::{json, Map, Value};

use crate::algorithms::{Algorithm, UpdateRule};
use crate::error::{Error, Result};
use crate::estimation::{AdaptiveSpec, SamplePolicy};
use crate::harness::ExperimentSpec;
use crate::noise::NoiseModel;
use crate::problems::ProblemKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PresetId {
    /// LeadingOnes under one-bit noise: too little and too much sampling both fail.
    UCurve,
    /// OneMax under symmetric noise: parent populations against sampling.
    SymmetricParent,
    /// OneMax under reverse noise: offspring populations against sampling.
    ReverseOffspring,
    /// OneMax under segmented noise: adaptive sampling against everything else.
    SegmentedAdaptive,
}

impl PresetId {
    pub const ALL: [PresetId; 4] = [
        PresetId::UCurve,
        PresetId::SymmetricParent,
        PresetId::ReverseOffspring,
        PresetId::SegmentedAdaptive,
    ];

    fn defaults(self) -> (usize, u64, u64) {
        // (n, budget, trials)
        match self {
            PresetId::UCurve => (12, U_CURVE_BUDGET, 100),
            PresetId::SymmetricParent | PresetId::ReverseOffspring => (30, 10_000_000, 100),
            PresetId::SegmentedAdaptive => (200, 200_000_000, 30),
        }
    }
}

/// Frozen after pilot runs at n = 12: enough for the middle sample size to
/// finish (at most ~210 generations) while `n^5` gets about 20 generations.
pub const U_CURVE_BUDGET: u64 = 10_000_000;

impl fmt::Display for PresetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PresetId::UCurve => "u-curve",
            PresetId::SymmetricParent => "symmetric-parent",
            PresetId::ReverseOffspring => "reverse-offspring",
            PresetId::SegmentedAdaptive => "segmented-adaptive",
        })
    }
}

impl FromStr for PresetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PresetId::ALL
            .into_iter()
            .find(|p| p.to_string() == s)
            .ok_or_else(|| Error::Parse(format!("unknown preset {s:?}")))
    }
}

/// Optional overrides of a preset's defaults.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PresetOptions {
    pub n: Option<usize>,
    pub budget: Option<u64>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Preset {
    pub id: PresetId,
    pub cells: Vec<ExperimentSpec>,
    pub scaling_notes: Vec<String>,
    /// Derived constants (sample sizes, population sizes) for the manifest.
    pub parameters: Map<String, Value>,
}

pub fn ceil_log2(n: usize) -> usize {
    assert!(n >= 1);
    (usize::BITS - (n - 1).leading_zeros()) as usize
}

/// `round(4 n^4 log2(n) / 15)`.
pub fn u_curve_middle_m(n: usize) -> u64 {
    let nf = n as f64;
    (4.0 * nf.powi(4) * nf.log2() / 15.0).round() as u64
}

pub fn preset(id: PresetId, opts: PresetOptions) -> Result<Preset> {
    let (n0, budget0, trials0) = id.defaults();
    let n = opts.n.unwrap_or(n0);
    if n < 2 {
        return Err(Error::InvalidSize(n));
    }
    let budget = opts.budget.unwrap_or(budget0);
    let trials = opts.trials.unwrap_or(trials0);
    let base_seed = opts.seed.unwrap_or(0);
    let cell = |suffix: &str, problem, model, algorithm, policy| ExperimentSpec {
        id: format!("{id}/{suffix}"),
        problem,
        n,
        model,
        algorithm,
        policy,
        budget,
        trials,
        base_seed,
        output: None,
    };
    let log = ceil_log2(n);
    let mut parameters = Map::new();
    let mut notes = vec![format!("budget {budget} noisy evaluations per trial, {trials} trials")];
    let cells = match id {
        PresetId::UCurve => {
            let model = NoiseModel::OneBit { p: 1.0 };
            let mid = u_curve_middle_m(n);
            let high = (n as u64).pow(5);
            parameters.insert("m".into(), json!([1, mid, high]));
            notes.push(format!("middle sample size round(4 n^4 log2(n) / 15) = {mid}; upper n^5 = {high}"));
            [1, mid, high]
                .into_iter()
                .map(|m| {
                    let policy = SamplePolicy::fixed(m)?;
                    Ok(cell(&format!("m={m}"), ProblemKind::LeadingOnes, model, Algorithm::OnePlusOne, policy))
                })
                .collect::<Result<Vec<_>>>()?
        }
        PresetId::SymmetricParent => {
            let mu = 3 * log;
            parameters.insert("mu".into(), json!([mu, 2]));
            parameters.insert("m".into(), json!([1, 10, 100]));
            notes.push(format!("mu = 3 ceil(log2 n) = {mu}; constant mu = 2"));
            population_cells(&cell, NoiseModel::Symmetric, |size| {
                Algorithm::mu_plus_one(size, UpdateRule::ReplaceIfNotWorse)
            }, mu, "mu")?
        }
        PresetId::ReverseOffspring => {
            let lambda = 8 * log;
            parameters.insert("lambda".into(), json!([lambda, 2]));
            parameters.insert("m".into(), json!([1, 10, 100]));
            notes.push(format!("lambda = 8 ceil(log2 n) = {lambda}; constant lambda = 2"));
            population_cells(&cell, NoiseModel::Reverse, Algorithm::one_plus_lambda, lambda, "lambda")?
        }
        PresetId::SegmentedAdaptive => {
            if !n.is_multiple_of(200) {
                return Err(Error::InvalidModel(format!("segmented noise needs n divisible by 200, got {n}")));
            }
            let mesc = (n as u64).pow(2);
            parameters.insert("m_escalate".into(), json!(mesc));
            parameters.insert("m".into(), json!([1, 100]));
            parameters.insert("mu".into(), json!(8));
            parameters.insert("lambda".into(), json!(8));
            notes.push(format!(
                "adaptive comparator keeps tlow = 3n and thigh = n^4 but escalates to n^2 = {mesc} samples instead of n^5"
            ));
            let om = ProblemKind::OneMax;
            let seg = NoiseModel::Segmented;
            let adaptive = SamplePolicy::Adaptive(AdaptiveSpec { m_escalate: Some(mesc), ..Default::default() });
            vec![
                cell("adaptive", om, seg, Algorithm::OnePlusOne, adaptive),
                cell("m=1", om, seg, Algorithm::OnePlusOne, SamplePolicy::Fixed { m: 1 }),
                cell("m=100", om, seg, Algorithm::OnePlusOne, SamplePolicy::Fixed { m: 100 }),
                cell("mu=8", om, seg, Algorithm::mu_plus_one(8, UpdateRule::ReplaceIfNotWorse)?, SamplePolicy::Single),
                cell("lambda=8", om, seg, Algorithm::one_plus_lambda(8)?, SamplePolicy::Single),
            ]
        }
    };
    for c in &cells {
        c.validate()?;
    }
    Ok(Preset { id, cells, scaling_notes: notes, parameters })
}

fn population_cells(
    cell: &dyn Fn(&str, ProblemKind, NoiseModel, Algorithm, SamplePolicy) -> ExperimentSpec,
    model: NoiseModel,
    algo: impl Fn(usize) -> Result<Algorithm>,
    size: usize,
    name: &str,
) -> Result<Vec<ExperimentSpec>> {
    let om = ProblemKind::OneMax;
    let mut cells = Vec::new();
    for m in [1, 10, 100] {
        cells.push(cell(&format!("m={m}"), om, model, Algorithm::OnePlusOne, SamplePolicy::Fixed { m }));
    }
    cells.push(cell(&format!("{name}={size}"), om, model, algo(size)?, SamplePolicy::Single));
    cells.push(cell(&format!("{name}=2"), om, model, algo(2)?, SamplePolicy::Single));
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_and_middle_m() {
        assert_eq!(ceil_log2(30), 5);
        assert_eq!(ceil_log2(32), 5);
        assert_eq!(ceil_log2(33), 6);
        assert_eq!(ceil_log2(1), 0);
        let direct = (4.0 * 12f64.powi(4) * 12f64.log2() / 15.0).round() as u64;
        assert_eq!(u_curve_middle_m(12), direct);
        assert_eq!(u_curve_middle_m(12), 19_823);
    }

    #[test]
    fn preset_shapes() {
        let p = preset(PresetId::UCurve, PresetOptions::default()).unwrap();
        let ms: Vec<_> = p.cells.iter().map(|c| c.policy.sample_size().unwrap()).collect();
        assert_eq!(ms, vec![1, 19_823, 248_832]);
        let p = preset(PresetId::SymmetricParent, PresetOptions::default()).unwrap();
        assert_eq!(p.cells.len(), 5);
        assert_eq!(p.cells[3].algorithm.to_string(), "mu+1:mu=15,rule=replace");
        let p = preset(PresetId::ReverseOffspring, PresetOptions::default()).unwrap();
        assert_eq!(p.cells[3].algorithm.to_string(), "1+lambda:lambda=40");
        let p = preset(PresetId::SegmentedAdaptive, PresetOptions::default()).unwrap();
        assert_eq!(p.cells[0].policy.to_string(), "adaptive:mesc=40000");
        assert!(preset(PresetId::SegmentedAdaptive, PresetOptions { n: Some(100), ..Default::default() }).is_err());
    }

    #[test]
    fn ids_round_trip() {
        for id in PresetId::ALL {
            assert_eq!(id.to_string().parse::<PresetId>().unwrap(), id);
        }
        assert!("v-curve".parse::<PresetId>().is_err());
    }
}
