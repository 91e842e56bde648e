//! Counter-based random numbers keyed by (stream, time, coordinate, retry).
//!
//! Every uniform is a pure function of its key, so replaying an epoch, or
//! scheduling coordinates on different threads, reproduces the same numbers.

use rand::RngCore;

use crate::error::{Error, Result};

/// Largest retry index a single key may use.
pub const RETRY_CAP: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stream {
    /// Allocation updates.
    Z,
    /// Configuration updates.
    C,
    /// Transition-matrix coordinates of the (Phi, gamma) perfect sampler.
    Theta,
    /// Hyperparameter coordinates of the (Phi, gamma) perfect sampler.
    Gamma,
    /// Optimizer randomness used while building bounds and kernels.
    Anneal,
    /// Sandwich probes.
    Probe,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Z => 0x5a,
            Stream::C => 0x43,
            Stream::Theta => 0x54,
            Stream::Gamma => 0x47,
            Stream::Anneal => 0x41,
            Stream::Probe => 0x50,
        }
    }
}

#[inline]
pub(crate) fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Maps 64 random bits to the open interval (0, 1).
#[inline]
pub fn to_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RandomLedger {
    seed: u64,
}

impl RandomLedger {
    pub fn new(seed: u64) -> Self {
        Self { seed: splitmix(seed ^ 0x6c65_6467_6572) }
    }

    /// Ledger for an independent run; distinct ids give unrelated streams.
    pub fn fork(&self, id: u64) -> Self {
        Self {
            seed: splitmix(splitmix(self.seed ^ 0x666f_726b) ^ id),
        }
    }

    fn key(&self, stream: Stream, time: i64, coord: u64, retry: u64) -> u64 {
        let mut h = splitmix(self.seed ^ stream.tag());
        h = splitmix(h ^ time as u64);
        h = splitmix(h ^ coord);
        splitmix(h ^ retry)
    }

    pub fn uniform(&self, stream: Stream, time: i64, coord: u64, retry: u64) -> Result<f64> {
        if retry >= RETRY_CAP {
            return Err(Error::RetryExhausted { stream, time, coord });
        }
        Ok(to_unit(self.key(stream, time, coord, retry)))
    }

    /// A generator seeded from one key, for draws that need a variable number
    /// of bits (Gamma variates, annealing proposals).
    pub fn rng(&self, stream: Stream, time: i64, coord: u64, retry: u64) -> KeyedRng {
        KeyedRng::new(self.key(stream, time, coord, retry))
    }

    pub fn substream(&self, stream: Stream, time: i64) -> Substream {
        Substream {
            ledger: *self,
            stream,
            time,
        }
    }
}

/// One (stream, time) slice of a ledger.
#[derive(Debug, Clone, Copy)]
pub struct Substream {
    ledger: RandomLedger,
    stream: Stream,
    time: i64,
}

impl Substream {
    pub fn uniform(&self, coord: u64, retry: u64) -> Result<f64> {
        self.ledger.uniform(self.stream, self.time, coord, retry)
    }

    pub fn rng(&self, coord: u64, retry: u64) -> KeyedRng {
        self.ledger.rng(self.stream, self.time, coord, retry)
    }

    pub fn time(&self) -> i64 {
        self.time
    }

    pub fn stream(&self) -> Stream {
        self.stream
    }
}

/// SplitMix64 sequence started at a ledger key.
#[derive(Debug, Clone)]
pub struct KeyedRng {
    state: u64,
}

impl KeyedRng {
    pub fn new(key: u64) -> Self {
        Self { state: key }
    }

    pub fn uniform(&mut self) -> f64 {
        to_unit(self.next_u64())
    }
}

impl RngCore for KeyedRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

/// Epoch `j` of the doubling schedule: its chains start at `-2^j` and the
/// epoch is responsible for the time window `{-2^j+1, ..., -2^(j-1)}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpochPlan {
    pub epoch: u32,
}

impl EpochPlan {
    pub fn new(epoch: u32) -> Self {
        assert!((1..=62).contains(&epoch), "epoch out of range");
        Self { epoch }
    }

    pub fn start(&self) -> i64 {
        -(1i64 << self.epoch)
    }

    /// Inclusive window of new time indices introduced by this epoch.
    pub fn window(&self) -> (i64, i64) {
        if self.epoch == 1 {
            (-1, 0)
        } else {
            (-(1i64 << self.epoch) + 1, -(1i64 << (self.epoch - 1)))
        }
    }
}
