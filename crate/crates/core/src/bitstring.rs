//! Packed binary solutions and standard bit-wise mutation.
//!
//! Position 0 is the leftmost character of the textual form, so
//! `leading_ones` counts from the left as LeadingOnes expects.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};

const WORD: usize = 64;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Bitstring {
    words: Vec<u64>,
    len: usize,
}

impl Bitstring {
    pub fn zeros(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSize(n));
        }
        Ok(Self {
            words: vec![0; n.div_ceil(WORD)],
            len: n,
        })
    }

    pub fn ones(n: usize) -> Result<Self> {
        let mut x = Self::zeros(n)?;
        x.words.iter_mut().for_each(|w| *w = u64::MAX);
        x.clear_tail();
        Ok(x)
    }

    /// Uniformly random string: every bit is 1 with probability 1/2.
    pub fn random<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        let mut x = Self::zeros(n)?;
        x.words.iter_mut().for_each(|w| *w = rng.next_u64());
        x.clear_tail();
        Ok(x)
    }

    /// String with zeros at the first `zeros` positions and ones elsewhere.
    pub fn with_leading_zeros(n: usize, zeros: usize) -> Result<Self> {
        if zeros > n {
            return Err(Error::OutOfRange(format!("{zeros} zeros in a length-{n} string")));
        }
        let mut x = Self::ones(n)?;
        (0..zeros).for_each(|i| x.set(i, false));
        Ok(x)
    }

    fn clear_tail(&mut self) {
        let rem = self.len % WORD;
        if rem != 0 {
            let last = self.words.len() - 1;
            self.words[last] &= (1u64 << rem) - 1;
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        let mask = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        self.words[i / WORD] ^= 1u64 << (i % WORD);
    }

    #[inline]
    pub fn ones_count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    #[inline]
    pub fn zeros_count(&self) -> usize {
        self.len - self.ones_count()
    }

    /// Length of the maximal all-ones prefix.
    #[inline]
    pub fn leading_ones(&self) -> usize {
        self.ones_run_from(0)
    }

    /// Length of the run of ones starting at position `start`.
    pub fn ones_run_from(&self, start: usize) -> usize {
        let mut pos = start;
        while pos < self.len {
            let word = self.words[pos / WORD] >> (pos % WORD);
            let run = word.trailing_ones() as usize;
            let avail = WORD - pos % WORD;
            if run < avail {
                pos += run;
                break;
            }
            pos += avail;
        }
        pos.min(self.len) - start
    }

    pub fn hamming(&self, other: &Self) -> usize {
        assert_eq!(self.len, other.len, "hamming distance needs equal lengths");
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    /// Standard bit-wise mutation: a fresh string in which every position is
    /// flipped independently with probability 1/n.
    pub fn mutate<R: RngCore + ?Sized>(&self, rng: &mut R) -> Self {
        let mut y = self.clone();
        if self.len == 1 {
            y.flip(0);
            return y;
        }
        // Jump between flipped positions with geometric gaps.
        let log_keep = (1.0 - 1.0 / self.len as f64).ln();
        let mut pos = 0usize;
        loop {
            let u: f64 = rng.random();
            let gap = ((1.0 - u).ln() / log_keep).floor();
            if gap >= (self.len - pos) as f64 {
                break;
            }
            pos += gap as usize;
            y.flip(pos);
            pos += 1;
            if pos >= self.len {
                break;
            }
        }
        y
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = (0..self.len).map(|i| if self.get(i) { '1' } else { '0' }).collect();
        f.write_str(&s)
    }
}

impl fmt::Debug for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bitstring({self})")
    }
}

impl FromStr for Bitstring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut x = Self::zeros(s.len())?;
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => x.set(i, true),
                other => return Err(Error::Parse(format!("invalid bit character {other:?}"))),
            }
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, RandomStream};
    use proptest::prelude::*;
    use rand::RngCore;

    struct Forced(u64);

    impl RngCore for Forced {
        fn next_u32(&mut self) -> u32 {
            self.0 as u32
        }
        fn next_u64(&mut self) -> u64 {
            self.0
        }
        fn fill_bytes(&mut self, dst: &mut [u8]) {
            dst.fill(self.0 as u8)
        }
    }

    fn stream(seed: u64) -> RandomStream {
        RandomStream::new(seed, 0, Purpose::Analysis)
    }

    #[test]
    fn zeros_count_examples() {
        for (s, z) in [("0000", 4), ("1111", 0), ("10110", 2)] {
            assert_eq!(s.parse::<Bitstring>().unwrap().zeros_count(), z);
        }
    }

    #[test]
    fn zero_length_rejected() {
        assert!(matches!(Bitstring::random(0, &mut stream(1)), Err(Error::InvalidSize(0))));
        assert!("".parse::<Bitstring>().is_err());
    }

    #[test]
    fn single_bit_forced_heads() {
        let x = Bitstring::random(1, &mut Forced(u64::MAX)).unwrap();
        assert_eq!(x.to_string(), "1");
        let x = Bitstring::random(1, &mut Forced(0)).unwrap();
        assert_eq!(x.to_string(), "0");
    }

    #[test]
    fn single_bit_always_flips() {
        let x: Bitstring = "0".parse().unwrap();
        let mut rng = stream(2);
        for _ in 0..100 {
            assert_eq!(x.mutate(&mut rng).to_string(), "1");
        }
    }

    #[test]
    fn random_per_bit_mean() {
        let mut rng = stream(3);
        let mut ones = [0u32; 8];
        let draws = 100_000;
        for _ in 0..draws {
            let x = Bitstring::random(8, &mut rng).unwrap();
            for (i, c) in ones.iter_mut().enumerate() {
                *c += x.get(i) as u32;
            }
        }
        for c in ones {
            let mean = c as f64 / draws as f64;
            assert!((0.49..=0.51).contains(&mean), "per-bit mean {mean}");
        }
    }

    #[test]
    fn random_all_strings_uniform() {
        let mut rng = stream(4);
        let mut freq = [0u32; 16];
        let draws = 1_000_000;
        for _ in 0..draws {
            let x = Bitstring::random(4, &mut rng).unwrap();
            let idx = (0..4).fold(0, |acc, i| acc * 2 + x.get(i) as usize);
            freq[idx] += 1;
        }
        for f in freq {
            let p = f as f64 / draws as f64;
            assert!((p - 1.0 / 16.0).abs() <= 0.01, "frequency {p}");
        }
    }

    #[test]
    fn mutate_two_bits_hamming_distribution() {
        let x: Bitstring = "11".parse().unwrap();
        let mut rng = stream(5);
        let mut hist = [0u32; 3];
        let draws = 1_000_000;
        for _ in 0..draws {
            hist[x.mutate(&mut rng).hamming(&x)] += 1;
        }
        // Two independent flips at rate 1/2.
        for (h, expected) in hist.iter().zip([0.25, 0.5, 0.25]) {
            let p = *h as f64 / draws as f64;
            assert!((p - expected).abs() <= 0.005, "{p} vs {expected}");
        }
    }

    #[test]
    fn mutate_mean_distance_is_one() {
        let mut rng = stream(6);
        let x = Bitstring::random(20, &mut rng).unwrap();
        let draws = 100_000;
        let total: usize = (0..draws).map(|_| x.mutate(&mut rng).hamming(&x)).sum();
        let mean = total as f64 / draws as f64;
        assert!((mean - 1.0).abs() <= 0.05, "mean distance {mean}");
    }

    #[test]
    fn mutate_per_bit_flip_frequency() {
        for n in [3usize, 17, 64, 100] {
            let mut rng = stream(7 + n as u64);
            let x = Bitstring::random(n, &mut rng).unwrap();
            let reps = 100_000u32;
            let mut flips = vec![0u32; n];
            for _ in 0..reps {
                let y = x.mutate(&mut rng);
                assert_eq!(y.len(), n);
                for (i, f) in flips.iter_mut().enumerate() {
                    *f += (x.get(i) != y.get(i)) as u32;
                }
            }
            let p = 1.0 / n as f64;
            let sigma = (reps as f64 * p * (1.0 - p)).sqrt();
            for f in flips {
                assert!((f as f64 - reps as f64 * p).abs() <= 4.0 * sigma, "n={n}: {f} flips");
            }
        }
    }

    #[test]
    fn leading_ones_across_words() {
        let mut x = Bitstring::ones(130).unwrap();
        assert_eq!(x.leading_ones(), 130);
        x.set(70, false);
        assert_eq!(x.leading_ones(), 70);
        assert_eq!(x.ones_run_from(71), 59);
        x.set(64, false);
        assert_eq!(x.leading_ones(), 64);
        assert_eq!(x.ones_run_from(65), 5);
    }

    proptest! {
        #[test]
        fn counts_partition_length(s in "[01]{1,200}") {
            let x: Bitstring = s.parse().unwrap();
            prop_assert_eq!(x.zeros_count() + x.ones_count(), x.len());
            prop_assert_eq!(x.zeros_count(), s.chars().filter(|&c| c == '0').count());
            prop_assert_eq!(x.leading_ones(), s.chars().take_while(|&c| c == '1').count());
            prop_assert_eq!(x.to_string(), s);
        }

        #[test]
        fn mutation_is_deterministic_per_stream(n in 1usize..300, seed in any::<u64>()) {
            let x = Bitstring::random(n, &mut RandomStream::new(seed, 1, Purpose::Init)).unwrap();
            let a = x.mutate(&mut RandomStream::new(seed, 1, Purpose::Mutation));
            let b = x.mutate(&mut RandomStream::new(seed, 1, Purpose::Mutation));
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.len(), n);
        }
    }
}
