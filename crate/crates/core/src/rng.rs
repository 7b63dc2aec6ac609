//! Seeded random streams.
//!
//! Every stream is keyed by `(seed, purpose)` and selects the ChaCha stream
//! number from the trial index, so a trial's draws never depend on which
//! worker ran it or in what order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Separate purposes never share draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Purpose {
    Init,
    Mutation,
    Noise,
    Selection,
    Analysis,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Init => 1,
            Purpose::Mutation => 2,
            Purpose::Noise => 3,
            Purpose::Selection => 4,
            Purpose::Analysis => 5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RandomStream {
    inner: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, trial: u64, purpose: Purpose) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&purpose.tag().to_le_bytes());
        key[16..24].copy_from_slice(b"noisyevo");
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(trial);
        Self { inner }
    }
}

impl RngCore for RandomStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// The four streams owned by one trial.
#[derive(Clone, Debug)]
pub struct TrialStreams {
    pub init: RandomStream,
    pub mutation: RandomStream,
    pub noise: RandomStream,
    pub selection: RandomStream,
}

impl TrialStreams {
    pub fn new(seed: u64, trial: u64) -> Self {
        Self {
            init: RandomStream::new(seed, trial, Purpose::Init),
            mutation: RandomStream::new(seed, trial, Purpose::Mutation),
            noise: RandomStream::new(seed, trial, Purpose::Noise),
            selection: RandomStream::new(seed, trial, Purpose::Selection),
        }
    }
}
