//! Fitness estimation: single evaluation, fixed-size sampling, and the
//! two-threshold adaptive comparator.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::analysis::{comparison_law, uniform_difference_cdf};
use crate::bitstring::Bitstring;
use crate::error::{Error, Result};
use crate::noise::{EvalCounter, NoiseModel, NoisyObjective, Segment, Spectrum, StateClass};
use crate::problems::Problem;
use crate::rng::{Purpose, RandomStream};
use crate::stats::wilson_interval;

/// Adaptive comparator settings as written in a config; missing values are
/// filled from `n` by [`AdaptiveSpec::resolve`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AdaptiveSpec {
    pub t_low: Option<f64>,
    pub t_high: Option<f64>,
    pub m_escalate: Option<u64>,
}

/// Fully resolved comparator: gaps in `[t_low, t_high)` are trusted after one
/// evaluation each, anything else escalates to `m_escalate` fresh samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptiveParams {
    pub t_low: f64,
    pub t_high: f64,
    pub m_escalate: u64,
}

impl AdaptiveParams {
    pub fn new(t_low: f64, t_high: f64, m_escalate: u64) -> Result<Self> {
        if !(t_low > 0.0 && t_low < t_high) {
            return Err(Error::InvalidPolicy(format!(
                "adaptive thresholds need 0 < tlow < thigh, got tlow={t_low}, thigh={t_high}"
            )));
        }
        if m_escalate == 0 {
            return Err(Error::InvalidPolicy("mesc must be at least 1".into()));
        }
        Ok(Self {
            t_low,
            t_high,
            m_escalate,
        })
    }

    /// `3n`, `n^4` and `n^5`.
    pub fn defaults(n: usize) -> Result<Self> {
        AdaptiveSpec::default().resolve(n)
    }
}

impl AdaptiveSpec {
    pub fn resolve(&self, n: usize) -> Result<AdaptiveParams> {
        let nf = n as f64;
        let m_escalate = match self.m_escalate {
            Some(m) => m,
            None => (n as u64)
                .checked_pow(5)
                .ok_or_else(|| Error::InvalidPolicy(format!("n^5 overflows for n = {n}")))?,
        };
        AdaptiveParams::new(
            self.t_low.unwrap_or(3.0 * nf),
            self.t_high.unwrap_or(nf.powi(4)),
            m_escalate,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum SamplePolicy {
    Single,
    Fixed { m: u64 },
    Adaptive(AdaptiveSpec),
}

impl SamplePolicy {
    pub fn fixed(m: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidPolicy("sample size m must be at least 1".into()));
        }
        Ok(SamplePolicy::Fixed { m })
    }

    /// Evaluations per estimate for value-based policies.
    pub fn sample_size(&self) -> Option<u64> {
        match *self {
            SamplePolicy::Single => Some(1),
            SamplePolicy::Fixed { m } => Some(m),
            SamplePolicy::Adaptive(_) => None,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            SamplePolicy::Fixed { m: 0 } => {
                Err(Error::InvalidPolicy("sample size m must be at least 1".into()))
            }
            SamplePolicy::Adaptive(spec) => spec.resolve(n).map(|_| ()),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for SamplePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplePolicy::Single => f.write_str("single"),
            SamplePolicy::Fixed { m } => write!(f, "fixed:m={m}"),
            SamplePolicy::Adaptive(spec) => {
                f.write_str("adaptive")?;
                let mut parts = Vec::new();
                if let Some(t) = spec.t_low {
                    parts.push(format!("tlow={t}"));
                }
                if let Some(t) = spec.t_high {
                    parts.push(format!("thigh={t}"));
                }
                if let Some(m) = spec.m_escalate {
                    parts.push(format!("mesc={m}"));
                }
                if !parts.is_empty() {
                    write!(f, ":{}", parts.join(","))?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for SamplePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let bad = |what: &str| Error::Parse(format!("{what} in policy {s:?}"));
        match name {
            "single" if args.is_empty() => Ok(SamplePolicy::Single),
            "fixed" => {
                let m = args.strip_prefix("m=").ok_or_else(|| bad("expected fixed:m=<int>"))?;
                let m: u64 = m.parse().map_err(|_| bad("invalid sample size"))?;
                SamplePolicy::fixed(m)
            }
            "adaptive" => {
                let mut spec = AdaptiveSpec::default();
                for kv in args.split(',').filter(|kv| !kv.is_empty()) {
                    let (k, v) = kv.split_once('=').ok_or_else(|| bad("expected key=value"))?;
                    match k {
                        "tlow" => spec.t_low = Some(v.parse().map_err(|_| bad("invalid tlow"))?),
                        "thigh" => spec.t_high = Some(v.parse().map_err(|_| bad("invalid thigh"))?),
                        "mesc" => {
                            spec.m_escalate = Some(v.parse().map_err(|_| bad("invalid mesc"))?)
                        }
                        _ => return Err(bad(&format!("unknown key {k:?}"))),
                    }
                }
                Ok(SamplePolicy::Adaptive(spec))
            }
            _ => Err(Error::Parse(format!("unknown policy {s:?}"))),
        }
    }
}

impl From<SamplePolicy> for String {
    fn from(p: SamplePolicy) -> String {
        p.to_string()
    }
}

impl TryFrom<String> for SamplePolicy {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    /// One evaluation each; the gap was trusted.
    Direct,
    /// Gap outside `[t_low, t_high)`; decided on fresh means.
    Escalated,
    /// Fixed-size means.
    Averaged,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ComparisonOutcome {
    pub offspring_not_worse: bool,
    pub evals_consumed: u64,
    pub route: Route,
}

/// Mean of `m` independent noisy evaluations (`m = 1` for `Single`).
pub fn estimate<R: RngCore + ?Sized>(
    policy: &SamplePolicy,
    objective: &NoisyObjective,
    x: &Bitstring,
    rng: &mut R,
    counter: &mut EvalCounter,
) -> Result<f64> {
    let m = policy.sample_size().ok_or_else(|| {
        Error::InvalidPolicy("adaptive sampling compares two solutions; it has no value estimate".into())
    })?;
    if m == 0 {
        return Err(Error::InvalidPolicy("sample size m must be at least 1".into()));
    }
    Ok(mean_of(objective, x, m, rng, counter))
}

#[inline]
pub(crate) fn mean_of<R: RngCore + ?Sized>(
    objective: &NoisyObjective,
    x: &Bitstring,
    m: u64,
    rng: &mut R,
    counter: &mut EvalCounter,
) -> f64 {
    if m == 1 {
        objective.evaluate(x, rng, counter)
    } else {
        objective.evaluate_sum(x, m, rng, counter) / m as f64
    }
}

/// Fixed-size comparison: offspring estimated first, then the parent.
pub fn fixed_compare<R: RngCore + ?Sized>(
    offspring: &Bitstring,
    parent: &Bitstring,
    m: u64,
    objective: &NoisyObjective,
    rng: &mut R,
    counter: &mut EvalCounter,
) -> ComparisonOutcome {
    let fo = mean_of(objective, offspring, m, rng, counter);
    let fp = mean_of(objective, parent, m, rng, counter);
    ComparisonOutcome {
        offspring_not_worse: fo >= fp,
        evals_consumed: 2 * m,
        route: Route::Averaged,
    }
}

/// Two-threshold adaptive comparison. Ties favour the offspring. Escalated
/// means use only the fresh samples, not the two probe evaluations.
pub fn adaptive_compare<R: RngCore + ?Sized>(
    offspring: &Bitstring,
    parent: &Bitstring,
    params: &AdaptiveParams,
    objective: &NoisyObjective,
    rng: &mut R,
    counter: &mut EvalCounter,
) -> ComparisonOutcome {
    let fo = objective.evaluate(offspring, rng, counter);
    let fp = objective.evaluate(parent, rng, counter);
    let gap = (fo - fp).abs();
    if params.t_low <= gap && gap < params.t_high {
        return ComparisonOutcome {
            offspring_not_worse: fo >= fp,
            evals_consumed: 2,
            route: Route::Direct,
        };
    }
    let m = params.m_escalate;
    let mo = mean_of(objective, offspring, m, rng, counter);
    let mp = mean_of(objective, parent, m, rng, counter);
    ComparisonOutcome {
        offspring_not_worse: mo >= mp,
        evals_consumed: 2 + 2 * m,
        route: Route::Escalated,
    }
}

/// Which of the four zeros-count regimes the better solution's successor
/// index `i` (better solution has `i - 1` zeros) falls into.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MisrankCase {
    /// `i > n/50`.
    First,
    /// `n/100 + 1 < i <= n/50`.
    Second,
    /// `n/200 + 1 < i <= n/100 + 1`.
    Third,
    /// `0 < i <= n/200 + 1`.
    Fourth,
}

impl MisrankCase {
    pub fn of(n: usize, i: usize) -> MisrankCase {
        if i > n / 50 {
            MisrankCase::First
        } else if i > n / 100 + 1 {
            MisrankCase::Second
        } else if i > n / 200 + 1 {
            MisrankCase::Third
        } else {
            MisrankCase::Fourth
        }
    }
}

/// Probability that the adaptive comparator does not rank the worse
/// solution below the better one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MisrankProbability {
    pub case: MisrankCase,
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Mass of first-draw pairs decided directly in favour of the worse solution.
    pub direct_not_below: f64,
    /// Mass of first-draw pairs that escalate.
    pub escalation: f64,
    /// Probability the escalated means favour the worse solution.
    pub escalated_not_below: f64,
    pub exact: bool,
}

/// `P(f̂(worse) >= f̂(better))` under adaptive sampling on OneMax with segmented
/// noise, where `better` and `worse` are zeros-counts. The direct route is
/// always computed exactly; the escalated route is exact when the two
/// escalated means have a tractable or dominated law, and otherwise estimated
/// from `mc_samples` simulated escalations.
pub fn misrank_probability_adaptive(
    n: usize,
    better: usize,
    worse: usize,
    params: &AdaptiveParams,
    mc_samples: u64,
    seed: u64,
) -> Result<MisrankProbability> {
    let objective = NoisyObjective::new(Problem::onemax(n)?, NoiseModel::Segmented)?;
    if !(better < worse && worse <= n) {
        return Err(Error::OutOfRange(format!(
            "need better < worse <= n, got better={better}, worse={worse}, n={n}"
        )));
    }
    let sw = objective.spectrum(StateClass::Zeros(worse))?;
    let sb = objective.spectrum(StateClass::Zeros(better))?;
    let (direct_not_below, escalation) = first_draw_routes(&sw, &sb, params);

    let case = MisrankCase::of(n, better + 1);
    if escalation == 0.0 {
        return Ok(MisrankProbability {
            case,
            value: direct_not_below,
            ci_low: direct_not_below,
            ci_high: direct_not_below,
            direct_not_below,
            escalation,
            escalated_not_below: 0.0,
            exact: true,
        });
    }

    let (esc, esc_lo, esc_hi, exact) = match comparison_law(&sw, &sb, params.m_escalate) {
        Ok(law) => {
            let p = law.not_worse();
            (p, p, p, true)
        }
        Err(Error::Intractable(_)) => {
            if mc_samples == 0 {
                return Err(Error::Intractable(
                    "escalated comparison needs Monte Carlo samples".into(),
                ));
            }
            let xw = StateClass::Zeros(worse).representative(n)?;
            let xb = StateClass::Zeros(better).representative(n)?;
            let mut rng = RandomStream::new(seed, 0, Purpose::Analysis);
            let mut counter = EvalCounter::new();
            let m = params.m_escalate;
            let hits = (0..mc_samples)
                .filter(|_| {
                    let a = mean_of(&objective, &xw, m, &mut rng, &mut counter);
                    let b = mean_of(&objective, &xb, m, &mut rng, &mut counter);
                    a >= b
                })
                .count() as u64;
            let (lo, hi) = wilson_interval(hits, mc_samples);
            (hits as f64 / mc_samples as f64, lo, hi, false)
        }
        Err(e) => return Err(e),
    };
    Ok(MisrankProbability {
        case,
        value: direct_not_below + escalation * esc,
        ci_low: direct_not_below + escalation * esc_lo,
        ci_high: direct_not_below + escalation * esc_hi,
        direct_not_below,
        escalation,
        escalated_not_below: esc,
        exact,
    })
}

/// Splits the joint law of one probe evaluation of each solution into the
/// mass decided directly with `a >= b` and the mass that escalates.
pub fn first_draw_routes(a: &Spectrum, b: &Spectrum, params: &AdaptiveParams) -> (f64, f64) {
    let (tl, th) = (params.t_low, params.t_high);
    let mut direct_geq = 0.0;
    let mut direct_lt = 0.0;
    let mut total = 0.0;

    for x in &a.atoms {
        for y in &b.atoms {
            let gap = (x.value - y.value).abs();
            let p = x.prob * y.prob;
            total += p;
            if tl <= gap && gap < th {
                if x.value >= y.value {
                    direct_geq += p;
                } else {
                    direct_lt += p;
                }
            }
        }
        if let Some(t) = b.tail {
            // b in (x - th, x - tl] puts a above; b in [x + tl, x + th) below.
            let w = t.hi - t.lo;
            let p = x.prob * t.prob;
            total += p;
            direct_geq += p * overlap(x.value - th, x.value - tl, t.lo, t.hi) / w;
            direct_lt += p * overlap(x.value + tl, x.value + th, t.lo, t.hi) / w;
        }
    }
    if let Some(t) = a.tail {
        let w = t.hi - t.lo;
        for y in &b.atoms {
            let p = t.prob * y.prob;
            total += p;
            direct_geq += p * overlap(y.value + tl, y.value + th, t.lo, t.hi) / w;
            direct_lt += p * overlap(y.value - th, y.value - tl, t.lo, t.hi) / w;
        }
        if let Some(u) = b.tail {
            let p = t.prob * u.prob;
            total += p;
            let cdf = |d: f64| uniform_difference_cdf((t.lo, t.hi), (u.lo, u.hi), d);
            direct_geq += p * (cdf(th) - cdf(tl));
            direct_lt += p * (cdf(-tl) - cdf(-th));
        }
    }
    let escalation = (total - direct_geq - direct_lt).max(0.0);
    (direct_geq, escalation)
}

fn overlap(lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    (hi.min(b) - lo.max(a)).max(0.0)
}

/// Segment helper re-exported for callers labelling results.
pub fn segment_of(n: usize, zeros: usize) -> Segment {
    Segment::of(n, zeros)
}
