//! Exact one-step analysis of the (1+1)-EA on OneMax: mutation kernels over
//! zeros-counts, acceptance probabilities under sampling, and the drift
//! decomposition. Closed forms for noisy LeadingOnes and the second
//! segmented band live here too.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{Atom, EvalCounter, NoiseModel, NoisyObjective, Segment, Spectrum, StateClass};
use crate::problems::{Problem, ProblemKind};
use crate::rng::{Purpose, RandomStream};
use crate::stats::wilson_interval;

/// Largest support any intermediate convolution may reach.
pub const MAX_SUPPORT: usize = 1_000_000;
const MAX_CONVOLUTION_WORK: f64 = 2e8;

/// Distribution of the zeros-count after one standard bit-wise mutation of a
/// string with `i` zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    pub n: usize,
    pub i: usize,
    pub probs: Vec<f64>,
}

impl Kernel {
    pub fn prob(&self, j: usize) -> f64 {
        self.probs.get(j).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

fn binomial_pmf(k: usize, p: f64) -> Vec<f64> {
    if p >= 1.0 {
        let mut v = vec![0.0; k + 1];
        v[k] = 1.0;
        return v;
    }
    let ratio = p / (1.0 - p);
    let mut v = Vec::with_capacity(k + 1);
    let mut cur = (1.0 - p).powi(k as i32);
    for a in 0..=k {
        v.push(cur);
        cur *= (k - a) as f64 / (a + 1) as f64 * ratio;
    }
    v
}

/// Zeros flipped to ones `a ~ Bin(i, 1/n)` and ones flipped to zeros
/// `b ~ Bin(n - i, 1/n)` give the new count `i - a + b`.
pub fn mutation_kernel(n: usize, i: usize) -> Result<Kernel> {
    if n == 0 {
        return Err(Error::InvalidSize(n));
    }
    if i > n {
        return Err(Error::OutOfRange(format!("zeros-count {i} exceeds n = {n}")));
    }
    let p = 1.0 / n as f64;
    let fix = binomial_pmf(i, p);
    let break_ = binomial_pmf(n - i, p);
    let mut probs = vec![0.0; n + 1];
    for (a, pa) in fix.iter().enumerate() {
        for (b, pb) in break_.iter().enumerate() {
            probs[i - a + b] += pa * pb;
        }
    }
    Ok(Kernel { n, i, probs })
}

/// How the mean of `m` draws of one distribution compares with the mean of
/// `m` draws of another.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComparisonLaw {
    pub greater: f64,
    pub equal: f64,
    pub less: f64,
}

impl ComparisonLaw {
    /// Probability that the first mean is at least the second.
    pub fn not_worse(&self) -> f64 {
        self.greater + self.equal
    }
}

/// Exact law of `mean_m(A)` against `mean_m(B)` for independent draws.
/// Disjoint supports are decided immediately; otherwise both spectra must be
/// discrete and the m-fold convolution of `A - B` must stay within
/// [`MAX_SUPPORT`] points, else [`Error::Intractable`].
pub fn comparison_law(a: &Spectrum, b: &Spectrum, m: u64) -> Result<ComparisonLaw> {
    if m == 0 {
        return Err(Error::InvalidPolicy("sample size m must be at least 1".into()));
    }
    if a.min() > b.max() {
        return Ok(ComparisonLaw { greater: 1.0, equal: 0.0, less: 0.0 });
    }
    if a.max() < b.min() {
        return Ok(ComparisonLaw { greater: 0.0, equal: 0.0, less: 1.0 });
    }
    if !a.is_discrete() || !b.is_discrete() {
        return Err(Error::Intractable(
            "overlapping spectra with a continuous part have no exact comparison".into(),
        ));
    }
    let z = difference_atoms(a, b);
    if z.len() == 1 {
        let v = z[0].value;
        return Ok(ComparisonLaw {
            greater: (v > 0.0) as u8 as f64,
            equal: (v == 0.0) as u8 as f64,
            less: (v < 0.0) as u8 as f64,
        });
    }
    check_convolution_cost(&z, m)?;
    let mut sum = vec![Atom { value: 0.0, prob: 1.0 }];
    let mut scratch = Vec::new();
    for _ in 0..m {
        scratch.clear();
        for s in &sum {
            for d in &z {
                scratch.push(Atom { value: s.value + d.value, prob: s.prob * d.prob });
            }
        }
        scratch.sort_by(|x, y| x.value.total_cmp(&y.value));
        sum.clear();
        merge_sorted(&scratch, &mut sum);
        if sum.len() > MAX_SUPPORT {
            return Err(Error::Intractable(format!(
                "convolution support exceeds {MAX_SUPPORT} points"
            )));
        }
    }
    let mut law = ComparisonLaw { greater: 0.0, equal: 0.0, less: 0.0 };
    for s in &sum {
        if s.value > 0.0 {
            law.greater += s.prob;
        } else if s.value < 0.0 {
            law.less += s.prob;
        } else {
            law.equal += s.prob;
        }
    }
    Ok(law)
}

fn difference_atoms(a: &Spectrum, b: &Spectrum) -> Vec<Atom> {
    let mut z: Vec<Atom> = a
        .atoms
        .iter()
        .flat_map(|x| b.atoms.iter().map(move |y| Atom { value: x.value - y.value, prob: x.prob * y.prob }))
        .collect();
    z.sort_by(|x, y| x.value.total_cmp(&y.value));
    let mut out = Vec::with_capacity(z.len());
    merge_sorted(&z, &mut out);
    out
}

fn merge_sorted(sorted: &[Atom], out: &mut Vec<Atom>) {
    for x in sorted {
        match out.last_mut() {
            Some(last) if last.value == x.value => last.prob += x.prob,
            _ => out.push(*x),
        }
    }
}

/// Rejects convolutions whose support or total work would blow up, using the
/// number of multisets of atoms and, for integer atoms, the lattice width as
/// upper bounds on each intermediate support.
fn check_convolution_cost(z: &[Atom], m: u64) -> Result<()> {
    let s = z.len() as f64;
    // Distinct sums of m draws from two or more atoms are at least m + 1.
    if m as f64 + 1.0 > MAX_SUPPORT as f64 {
        return Err(Error::Intractable(format!("{m}-fold convolution exceeds the support guard")));
    }
    let lattice = lattice_span(z);
    let mut work = 0.0;
    let mut multisets = 1.0f64;
    for k in 1..=m {
        // C(k + s - 1, s - 1) from C(k + s - 2, s - 1).
        multisets *= (k as f64 + s - 1.0) / k as f64;
        let mut size = multisets;
        if let Some(span) = lattice {
            size = size.min(k as f64 * span + 1.0);
        }
        if size > MAX_SUPPORT as f64 {
            return Err(Error::Intractable(format!(
                "{m}-fold convolution support exceeds {MAX_SUPPORT} points"
            )));
        }
        work += size * s;
        if work > MAX_CONVOLUTION_WORK {
            return Err(Error::Intractable(format!("{m}-fold convolution is too expensive")));
        }
    }
    Ok(())
}

/// Width of the support in units of the gcd of atom differences, when every
/// atom is an integer.
fn lattice_span(z: &[Atom]) -> Option<f64> {
    const EXACT: f64 = 9.0e15;
    if z.iter().any(|a| a.value.fract() != 0.0 || a.value.abs() > EXACT) {
        return None;
    }
    let base = z[0].value as i64;
    let g = z.iter().fold(0u64, |g, a| gcd(g, (a.value as i64 - base).unsigned_abs()));
    let span = (z[z.len() - 1].value - z[0].value) as u64;
    Some(span.checked_div(g).map_or(0.0, |s| s as f64))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// `P(A - B <= d)` for independent `A ~ U[a.0, a.1]` and `B ~ U[b.0, b.1]`.
pub fn uniform_difference_cdf(a: (f64, f64), b: (f64, f64), d: f64) -> f64 {
    let (wa, wb) = (a.1 - a.0, b.1 - b.0);
    // A - B <= d  iff  B >= A - d; integrate P(B >= t) over t = A - d.
    // H is an antiderivative of clamp(t, 0, wb).
    let h = |t: f64| {
        if t <= 0.0 {
            0.0
        } else if t <= wb {
            t * t / 2.0
        } else {
            wb * wb / 2.0 + wb * (t - wb)
        }
    };
    // P(B >= A - d) = clamp(b.1 - (A - d), 0, wb) / wb.
    let upper = b.1 + d - a.0;
    let lower = b.1 + d - a.1;
    ((h(upper) - h(lower)) / (wa * wb)).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    MonteCarlo,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Exact => "exact",
            Method::MonteCarlo => "monte-carlo",
        })
    }
}

/// How an analysis quantity should be obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodChoice {
    Exact,
    MonteCarlo { samples: u64, seed: u64 },
    /// Exact when tractable, Monte Carlo otherwise.
    Auto { samples: u64, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Acceptance {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub method: Method,
}

/// `P(mean of m draws for a j-zeros string >= mean of m draws for an
/// i-zeros string)` on OneMax, i.e. the chance that the (1+1)-EA with
/// Fixed(m) sampling accepts offspring class `j` over parent class `i`.
pub fn acceptance_probability(
    n: usize,
    i: usize,
    j: usize,
    model: &NoiseModel,
    m: u64,
    method: MethodChoice,
) -> Result<Acceptance> {
    let objective = NoisyObjective::new(Problem::onemax(n)?, *model)?;
    acceptance_on(&objective, i, j, m, method, 0)
}

fn acceptance_on(
    objective: &NoisyObjective,
    i: usize,
    j: usize,
    m: u64,
    method: MethodChoice,
    stream: u64,
) -> Result<Acceptance> {
    let n = objective.problem().n;
    if i > n || j > n {
        return Err(Error::OutOfRange(format!("zeros-counts {i}, {j} must not exceed n = {n}")));
    }
    if m == 0 {
        return Err(Error::InvalidPolicy("sample size m must be at least 1".into()));
    }
    let exact = || -> Result<Acceptance> {
        let offspring = objective.spectrum(StateClass::Zeros(j))?;
        let parent = objective.spectrum(StateClass::Zeros(i))?;
        let p = comparison_law(&offspring, &parent, m)?.not_worse();
        Ok(Acceptance { value: p, ci_low: p, ci_high: p, method: Method::Exact })
    };
    match method {
        MethodChoice::Exact => exact(),
        MethodChoice::MonteCarlo { samples, seed } => {
            simulate_acceptance(objective, i, j, m, samples, seed, stream)
        }
        MethodChoice::Auto { samples, seed } => match exact() {
            Err(Error::Intractable(_)) => simulate_acceptance(objective, i, j, m, samples, seed, stream),
            other => other,
        },
    }
}

fn simulate_acceptance(
    objective: &NoisyObjective,
    i: usize,
    j: usize,
    m: u64,
    samples: u64,
    seed: u64,
    stream: u64,
) -> Result<Acceptance> {
    if samples == 0 {
        return Err(Error::Intractable("Monte Carlo needs at least one sample".into()));
    }
    let n = objective.problem().n;
    let offspring = StateClass::Zeros(j).representative(n)?;
    let parent = StateClass::Zeros(i).representative(n)?;
    let mut rng = RandomStream::new(seed, stream, Purpose::Analysis);
    let mut counter = EvalCounter::new();
    let mut hits = 0u64;
    for _ in 0..samples {
        let fo = objective.evaluate_sum(&offspring, m, &mut rng, &mut counter);
        let fp = objective.evaluate_sum(&parent, m, &mut rng, &mut counter);
        hits += (fo >= fp) as u64;
    }
    let (lo, hi) = wilson_interval(hits, samples);
    Ok(Acceptance {
        value: hits as f64 / samples as f64,
        ci_low: lo,
        ci_high: hi,
        method: Method::MonteCarlo,
    })
}

/// Expected one-generation change of the zeros-count, split into the
/// improving part `e_plus` and the worsening part `e_minus`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftRecord {
    pub i: usize,
    pub e_plus: f64,
    pub e_minus: f64,
    pub drift: f64,
    pub method: Method,
    pub ci_halfwidth: f64,
}

/// Drift of the (1+1)-EA with Fixed(m) sampling on OneMax at zeros-count `i`.
/// Monte Carlo half-widths of the individual acceptance probabilities are
/// propagated linearly into `ci_halfwidth`.
pub fn drift(n: usize, i: usize, model: &NoiseModel, m: u64, method: MethodChoice) -> Result<DriftRecord> {
    let objective = NoisyObjective::new(Problem::onemax(n)?, *model)?;
    let kernel = mutation_kernel(n, i)?;
    let mut e_plus = 0.0;
    let mut e_minus = 0.0;
    let mut halfwidth = 0.0;
    let mut used = Method::Exact;
    for (j, &k) in kernel.probs.iter().enumerate() {
        if j == i || k == 0.0 {
            continue;
        }
        let acc = acceptance_on(&objective, i, j, m, method, j as u64)?;
        if acc.method == Method::MonteCarlo {
            used = Method::MonteCarlo;
        }
        let weight = k * j.abs_diff(i) as f64;
        if j < i {
            e_plus += weight * acc.value;
        } else {
            e_minus += weight * acc.value;
        }
        halfwidth += weight * (acc.ci_high - acc.ci_low) / 2.0;
    }
    Ok(DriftRecord {
        i,
        e_plus,
        e_minus,
        drift: e_plus - e_minus,
        method: used,
        ci_halfwidth: if used == Method::Exact { 0.0 } else { halfwidth },
    })
}

/// `E(f^n)` for LeadingOnes under one-bit noise with rate `p`, at the string
/// `1^k 0 1^(n-k-1)`; `k = n` stands for the all-ones string.
pub fn expected_noisy_leadingones(n: usize, k: usize, p: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidSize(n));
    }
    if k > n {
        return Err(Error::OutOfRange(format!("leading-ones count {k} exceeds n = {n}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidModel(format!("noise probability {p} outside [0, 1]")));
    }
    let nf = n as f64;
    // Flipping leading bit j drops the value to j - 1.
    let prefix: f64 = (1..=k).map(|j| (j - 1) as f64 / nf).sum();
    let flipped = if k == n {
        prefix
    } else {
        // Flipping the 0 gives n; any later bit leaves k.
        prefix + 1.0 + (n - k - 1) as f64 * k as f64 / nf
    };
    Ok((1.0 - p) * k as f64 + p * flipped)
}

/// `E(f^n)` for OneMax under segmented noise at a second-band zeros-count.
pub fn segment_expectation(n: usize, k: usize) -> Result<f64> {
    if n == 0 || !n.is_multiple_of(200) {
        return Err(Error::InvalidModel(format!("segmented noise needs n divisible by 200, got {n}")));
    }
    if Segment::of(n, k) != Segment::Second {
        return Err(Error::OutOfRange(format!(
            "zeros-count {k} is outside the second band ({}, {}]",
            n / 100,
            n / 50
        )));
    }
    let nf = n as f64;
    Ok(2.0 * nf - 2.0 - 2.0 * k as f64 / nf)
}

/// One exported analysis value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRow {
    pub n: usize,
    pub i: usize,
    pub j: Option<usize>,
    pub model: String,
    pub m: u64,
    pub value: f64,
    pub ci: f64,
    pub method: Method,
}

impl AnalysisRow {
    pub fn acceptance(n: usize, i: usize, j: usize, model: &NoiseModel, m: u64, acc: &Acceptance) -> Self {
        Self {
            n,
            i,
            j: Some(j),
            model: model.to_string(),
            m,
            value: acc.value,
            ci: (acc.ci_high - acc.ci_low) / 2.0,
            method: acc.method,
        }
    }

    pub fn drift(n: usize, model: &NoiseModel, m: u64, rec: &DriftRecord) -> Self {
        Self {
            n,
            i: rec.i,
            j: None,
            model: model.to_string(),
            m,
            value: rec.drift,
            ci: rec.ci_halfwidth,
            method: rec.method,
        }
    }
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Checks the exact-analysis preconditions shared by the CLI verbs.
pub fn require_onemax(kind: ProblemKind) -> Result<()> {
    match kind {
        ProblemKind::OneMax => Ok(()),
        ProblemKind::LeadingOnes => Err(Error::NoExactSpectrum(
            "zeros-count analysis is defined for OneMax only".into(),
        )),
    }
}
