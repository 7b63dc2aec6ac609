//! Noise models. One call to [`NoisyObjective::evaluate`] is one noisy
//! fitness evaluation and advances the caller's [`EvalCounter`] by one.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::bitstring::Bitstring;
use crate::error::{Error, Result};
use crate::problems::{Problem, ProblemKind};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum NoiseModel {
    /// With probability `p`, report the fitness of a copy with one uniformly
    /// chosen bit flipped.
    OneBit { p: f64 },
    /// Report `2n - f(x)` with probability 1/2.
    Symmetric,
    /// Report `-f(x)` with probability 1/2.
    Reverse,
    /// Four-regime law over zeros-count bands of OneMax; needs `n % 200 == 0`.
    Segmented,
}

impl NoiseModel {
    pub fn one_bit(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidModel(format!("one-bit probability {p} outside [0, 1]")));
        }
        Ok(NoiseModel::OneBit { p })
    }

    /// Checks that the model is defined for `problem`.
    pub fn validate(&self, problem: &Problem) -> Result<()> {
        match *self {
            NoiseModel::OneBit { p } if !(0.0..=1.0).contains(&p) => {
                Err(Error::InvalidModel(format!("one-bit probability {p} outside [0, 1]")))
            }
            NoiseModel::Segmented if problem.kind != ProblemKind::OneMax => Err(Error::InvalidModel(
                "segmented noise is only defined on onemax".into(),
            )),
            NoiseModel::Segmented if !problem.n.is_multiple_of(200) => Err(Error::InvalidModel(format!(
                "segmented noise needs n divisible by 200, got n = {}",
                problem.n
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseModel::OneBit { p } => write!(f, "onebit:p={p}"),
            NoiseModel::Symmetric => f.write_str("symmetric"),
            NoiseModel::Reverse => f.write_str("reverse"),
            NoiseModel::Segmented => f.write_str("segmented"),
        }
    }
}

impl FromStr for NoiseModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        match (name, args) {
            ("symmetric", "") => Ok(NoiseModel::Symmetric),
            ("reverse", "") => Ok(NoiseModel::Reverse),
            ("segmented", "") => Ok(NoiseModel::Segmented),
            ("onebit", args) => {
                let p = args
                    .strip_prefix("p=")
                    .ok_or_else(|| Error::Parse(format!("expected onebit:p=<float>, got {s:?}")))?;
                let p: f64 = p
                    .parse()
                    .map_err(|_| Error::Parse(format!("invalid one-bit probability {p:?}")))?;
                NoiseModel::one_bit(p)
            }
            _ => Err(Error::Parse(format!("unknown noise model {s:?}"))),
        }
    }
}

impl From<NoiseModel> for String {
    fn from(m: NoiseModel) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for NoiseModel {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Running total of noisy evaluations for one trial.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalCounter {
    total: u64,
}

impl EvalCounter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn total(&self) -> u64 {
        self.total
    }

    #[inline]
    pub(crate) fn add(&mut self, k: u64) {
        self.total += k;
    }
}

/// Band of the segmented law a zeros-count falls into.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Segment {
    /// `|x|_0 > n/50`: exact.
    Exact,
    /// `n/100 < |x|_0 <= n/50`.
    Second,
    /// `n/200 < |x|_0 <= n/100`.
    Third,
    /// `|x|_0 <= n/200`.
    Fourth,
}

impl Segment {
    pub fn of(n: usize, zeros: usize) -> Segment {
        if zeros > n / 50 {
            Segment::Exact
        } else if zeros > n / 100 {
            Segment::Second
        } else if zeros > n / 200 {
            Segment::Third
        } else {
            Segment::Fourth
        }
    }
}

/// State descriptor for which the noisy value distribution is known exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StateClass {
    /// Any string with this many zeros (OneMax).
    Zeros(usize),
    /// The LeadingOnes pattern `1^k 0 1^(n-k-1)`.
    LeadingOnesGap(usize),
    /// The all-ones string.
    AllOnes,
}

impl StateClass {
    /// A concrete member of the class.
    pub fn representative(&self, n: usize) -> Result<Bitstring> {
        match *self {
            StateClass::Zeros(i) => Bitstring::with_leading_zeros(n, i),
            StateClass::AllOnes => Bitstring::ones(n),
            StateClass::LeadingOnesGap(k) => {
                if k >= n {
                    return Err(Error::OutOfRange(format!("gap position {k} with n = {n}")));
                }
                let mut x = Bitstring::ones(n)?;
                x.set(k, false);
                Ok(x)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub value: f64,
    pub prob: f64,
}

/// Continuous uniform component on `[lo, hi]` carrying mass `prob`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformTail {
    pub lo: f64,
    pub hi: f64,
    pub prob: f64,
}

/// Exact law of one noisy evaluation: atoms sorted by value, plus an optional
/// continuous uniform part.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub atoms: Vec<Atom>,
    pub tail: Option<UniformTail>,
}

impl Spectrum {
    fn from_pairs(pairs: impl IntoIterator<Item = (f64, f64)>, tail: Option<UniformTail>) -> Self {
        let mut atoms: Vec<Atom> = Vec::new();
        let mut raw: Vec<(f64, f64)> = pairs.into_iter().filter(|&(_, p)| p > 0.0).collect();
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (value, prob) in raw {
            match atoms.last_mut() {
                Some(last) if last.value == value => last.prob += prob,
                _ => atoms.push(Atom { value, prob }),
            }
        }
        Self { atoms, tail }
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.prob).sum::<f64>() + self.tail.map_or(0.0, |t| t.prob)
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.value * a.prob).sum::<f64>()
            + self.tail.map_or(0.0, |t| t.prob * (t.lo + t.hi) / 2.0)
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        let second = self.atoms.iter().map(|a| a.value * a.value * a.prob).sum::<f64>()
            + self.tail.map_or(0.0, |t| {
                t.prob * (t.lo * t.lo + t.lo * t.hi + t.hi * t.hi) / 3.0
            });
        second - mean * mean
    }

    pub fn is_discrete(&self) -> bool {
        self.tail.is_none()
    }

    pub fn min(&self) -> f64 {
        let atoms = self.atoms.first().map_or(f64::INFINITY, |a| a.value);
        atoms.min(self.tail.map_or(f64::INFINITY, |t| t.lo))
    }

    pub fn max(&self) -> f64 {
        let atoms = self.atoms.last().map_or(f64::NEG_INFINITY, |a| a.value);
        atoms.max(self.tail.map_or(f64::NEG_INFINITY, |t| t.hi))
    }

    /// Probability of the exact value `v` among the atoms.
    pub fn prob_of(&self, v: f64) -> f64 {
        self.atoms.iter().filter(|a| a.value == v).map(|a| a.prob).sum()
    }
}

/// A problem paired with a noise model valid for it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoisyObjective {
    problem: Problem,
    model: NoiseModel,
}

impl NoisyObjective {
    pub fn new(problem: Problem, model: NoiseModel) -> Result<Self> {
        model.validate(&problem)?;
        Ok(Self { problem, model })
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn model(&self) -> &NoiseModel {
        &self.model
    }

    /// One noisy fitness evaluation.
    pub fn evaluate<R: RngCore + ?Sized>(
        &self,
        x: &Bitstring,
        rng: &mut R,
        counter: &mut EvalCounter,
    ) -> f64 {
        counter.add(1);
        self.draw(x, rng)
    }

    /// Sum of `m` independent noisy evaluations of `x`. Certain values use
    /// no randomness. For large `m` the sum is drawn through multinomial
    /// counts over the outcomes of `x`, which has the same distribution as
    /// drawing each evaluation separately.
    pub fn evaluate_sum<R: RngCore + ?Sized>(
        &self,
        x: &Bitstring,
        m: u64,
        rng: &mut R,
        counter: &mut EvalCounter,
    ) -> f64 {
        counter.add(m);
        if let Some(v) = self.certain_value(x) {
            return v * m as f64;
        }
        if m >= AGGREGATE_MIN {
            return aggregated_sum(&self.point_spectrum(x), m, rng);
        }
        (0..m).map(|_| self.draw(x, rng)).sum()
    }

    /// Outcome distribution of one evaluation of this particular `x`.
    fn point_spectrum(&self, x: &Bitstring) -> Spectrum {
        let n = self.problem.n;
        match (self.problem.kind, self.model) {
            (ProblemKind::OneMax, _) => self.onemax_spectrum(x.zeros_count()),
            (ProblemKind::LeadingOnes, NoiseModel::OneBit { p }) => {
                let lo = x.leading_ones();
                let q = p / n as f64;
                let mut pairs = vec![(lo as f64, 1.0 - p)];
                pairs.extend((0..lo).map(|j| (j as f64, q)));
                if lo < n {
                    pairs.push(((lo + 1 + x.ones_run_from(lo + 1)) as f64, q));
                    pairs.push((lo as f64, q * (n - lo - 1) as f64));
                }
                Spectrum::from_pairs(pairs, None)
            }
            (ProblemKind::LeadingOnes, NoiseModel::Symmetric) => {
                let f = x.leading_ones();
                Spectrum::from_pairs([(f as f64, 0.5), ((2 * n - f) as f64, 0.5)], None)
            }
            (ProblemKind::LeadingOnes, NoiseModel::Reverse) => {
                let f = x.leading_ones() as f64;
                Spectrum::from_pairs([(f, 0.5), (0.0 - f, 0.5)], None)
            }
            (ProblemKind::LeadingOnes, NoiseModel::Segmented) => {
                unreachable!("segmented noise is validated to OneMax")
            }
        }
    }

    /// The value every evaluation of `x` returns, when there is only one.
    pub fn certain_value(&self, x: &Bitstring) -> Option<f64> {
        let n = self.problem.n;
        let f = self.problem.fitness(x);
        match self.model {
            NoiseModel::OneBit { p: 0.0 } => Some(f as f64),
            NoiseModel::Symmetric if f == n => Some(f as f64),
            NoiseModel::Reverse if f == 0 => Some(0.0),
            NoiseModel::Segmented => {
                let zeros = x.zeros_count();
                (Segment::of(n, zeros) == Segment::Exact).then(|| (n - zeros) as f64)
            }
            _ => None,
        }
    }

    #[inline]
    fn draw<R: RngCore + ?Sized>(&self, x: &Bitstring, rng: &mut R) -> f64 {
        let n = self.problem.n;
        match self.model {
            NoiseModel::OneBit { p } => {
                if p > 0.0 && rng.random_bool(p) {
                    self.flipped_fitness(x, rng.random_range(0..n)) as f64
                } else {
                    self.problem.fitness(x) as f64
                }
            }
            NoiseModel::Symmetric => {
                let f = self.problem.fitness(x);
                if rng.random::<bool>() {
                    f as f64
                } else {
                    (2 * n - f) as f64
                }
            }
            NoiseModel::Reverse => {
                let f = self.problem.fitness(x) as f64;
                // 0.0 - f keeps the optimum's reversed value at +0.
                if rng.random::<bool>() { f } else { 0.0 - f }
            }
            NoiseModel::Segmented => segmented_draw(n, x.zeros_count(), rng),
        }
    }

    /// True fitness of `x` with bit `j` flipped, without building the copy.
    fn flipped_fitness(&self, x: &Bitstring, j: usize) -> usize {
        match self.problem.kind {
            ProblemKind::OneMax => {
                let f = x.ones_count();
                if x.get(j) {
                    f - 1
                } else {
                    f + 1
                }
            }
            ProblemKind::LeadingOnes => {
                let lo = x.leading_ones();
                match j.cmp(&lo) {
                    std::cmp::Ordering::Less => j,
                    std::cmp::Ordering::Equal => lo + 1 + x.ones_run_from(lo + 1),
                    std::cmp::Ordering::Greater => lo,
                }
            }
        }
    }

    fn onemax_spectrum(&self, i: usize) -> Spectrum {
        let n = self.problem.n;
        let nf = n as f64;
        let f = (n - i) as f64;
        match self.model {
            NoiseModel::OneBit { p } => Spectrum::from_pairs(
                [
                    (f, 1.0 - p),
                    (f + 1.0, p * i as f64 / nf),
                    (f - 1.0, p * (n - i) as f64 / nf),
                ],
                None,
            ),
            NoiseModel::Symmetric => Spectrum::from_pairs([(f, 0.5), (2.0 * nf - f, 0.5)], None),
            NoiseModel::Reverse => Spectrum::from_pairs([(f, 0.5), (0.0 - f, 0.5)], None),
            NoiseModel::Segmented => segmented_spectrum(n, i),
        }
    }

    /// Exact distribution of one noisy evaluation of any member of `class`.
    pub fn spectrum(&self, class: StateClass) -> Result<Spectrum> {
        let n = self.problem.n;
        let nf = n as f64;
        match (self.problem.kind, class) {
            (ProblemKind::OneMax, StateClass::Zeros(i)) if i > n => Err(Error::OutOfRange(
                format!("zeros-count {i} outside [0, {n}]"),
            )),
            (ProblemKind::OneMax, StateClass::Zeros(i)) => Ok(self.onemax_spectrum(i)),
            (ProblemKind::OneMax, StateClass::AllOnes) => Ok(self.onemax_spectrum(0)),
            (ProblemKind::LeadingOnes, StateClass::LeadingOnesGap(k)) if k < n => match self.model {
                NoiseModel::OneBit { p } => {
                    // Flipping position j (1-based) <= k cuts the prefix to j-1;
                    // flipping the 0 at k+1 yields 1^n; later flips keep k.
                    let each = p / nf;
                    let pairs = (1..=k)
                        .map(|j| ((j - 1) as f64, each))
                        .chain([(nf, each), (k as f64, 1.0 - p + each * (n - k - 1) as f64)]);
                    Ok(Spectrum::from_pairs(pairs, None))
                }
                _ => Err(no_spectrum(&self.model, class)),
            },
            (ProblemKind::LeadingOnes, StateClass::LeadingOnesGap(k)) => Err(Error::OutOfRange(
                format!("gap position {k} requires k <= n - 1 = {}", n - 1),
            )),
            (ProblemKind::LeadingOnes, StateClass::AllOnes | StateClass::Zeros(0)) => {
                match self.model {
                    NoiseModel::OneBit { p } => {
                        let each = p / nf;
                        let pairs = (1..=n).map(|j| ((j - 1) as f64, each)).chain([(nf, 1.0 - p)]);
                        Ok(Spectrum::from_pairs(pairs, None))
                    }
                    NoiseModel::Symmetric => Ok(Spectrum::from_pairs([(nf, 1.0)], None)),
                    NoiseModel::Reverse => Ok(Spectrum::from_pairs([(nf, 0.5), (-nf, 0.5)], None)),
                    NoiseModel::Segmented => Err(no_spectrum(&self.model, class)),
                }
            }
            _ => Err(no_spectrum(&self.model, class)),
        }
    }
}

fn no_spectrum(model: &NoiseModel, class: StateClass) -> Error {
    Error::NoExactSpectrum(format!("{class:?} is not a state abstraction under {model} noise"))
}

/// Sample size from which [`NoisyObjective::evaluate_sum`] draws outcome
/// counts instead of individual evaluations.
const AGGREGATE_MIN: u64 = 64;

/// Sum of `m` draws from `spec`: binomial counts per atom in turn, then one
/// draw per evaluation that lands in the uniform tail.
fn aggregated_sum<R: RngCore + ?Sized>(spec: &Spectrum, m: u64, rng: &mut R) -> f64 {
    let mut remaining = m;
    let mut mass_left = spec.total_mass();
    let mut sum = 0.0;
    let last = spec.atoms.len().saturating_sub(1);
    for (idx, a) in spec.atoms.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let count = if idx == last && spec.tail.is_none() {
            remaining
        } else {
            let q = (a.prob / mass_left).clamp(0.0, 1.0);
            Binomial::new(remaining, q).expect("probability in [0, 1]").sample(rng)
        };
        sum += count as f64 * a.value;
        remaining -= count;
        mass_left -= a.prob;
    }
    if let Some(t) = spec.tail {
        // Same orientation as the per-draw tail value hi - U.
        for _ in 0..remaining {
            sum += t.hi - rng.random::<f64>() * (t.hi - t.lo);
        }
    }
    sum
}

fn segmented_draw<R: RngCore + ?Sized>(n: usize, zeros: usize, rng: &mut R) -> f64 {
    let nf = n as f64;
    let k = zeros as f64;
    match Segment::of(n, zeros) {
        Segment::Exact => nf - k,
        Segment::Second => {
            if rng.random_bool(0.5 + 1.0 / nf) {
                nf - k
            } else {
                3.0 * nf + k
            }
        }
        Segment::Third => {
            if rng.random_bool(1.0 - 1.0 / nf) {
                4.0 * nf * (nf - k)
            } else {
                (2.0 * nf + k).powi(3)
            }
        }
        Segment::Fourth => {
            let n4 = nf.powi(4);
            if rng.random_bool(0.2) {
                n4 * (nf - k)
            } else {
                -n4 - rng.random::<f64>()
            }
        }
    }
}

fn segmented_spectrum(n: usize, zeros: usize) -> Spectrum {
    let nf = n as f64;
    let k = zeros as f64;
    match Segment::of(n, zeros) {
        Segment::Exact => Spectrum::from_pairs([(nf - k, 1.0)], None),
        Segment::Second => Spectrum::from_pairs(
            [(nf - k, 0.5 + 1.0 / nf), (3.0 * nf + k, 0.5 - 1.0 / nf)],
            None,
        ),
        Segment::Third => Spectrum::from_pairs(
            [(4.0 * nf * (nf - k), 1.0 - 1.0 / nf), ((2.0 * nf + k).powi(3), 1.0 / nf)],
            None,
        ),
        Segment::Fourth => {
            let n4 = nf.powi(4);
            Spectrum::from_pairs(
                [(n4 * (nf - k), 0.2)],
                Some(UniformTail {
                    lo: -n4 - 1.0,
                    hi: -n4,
                    prob: 0.8,
                }),
            )
        }
    }
}
