//! Counter-based random substreams.
//!
//! Every replicate of an ensemble owns a ChaCha8 keystream selected by
//! `(master_seed, replicate_id)`. The keystream is a pure function of that
//! pair, so an ensemble reproduces bit-for-bit no matter how replicates are
//! scheduled across threads.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// An explicit random stream handed to every sampler.
#[derive(Clone, Debug)]
pub struct RandomStream {
    inner: ChaCha8Rng,
}

impl RandomStream {
    /// A stream keyed by a seed alone (stream id 0).
    pub fn from_seed(seed: u64) -> Self {
        Self::substream(seed, 0)
    }

    /// The substream for one replicate of an ensemble.
    pub fn substream(master_seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
        inner.set_stream(stream_id);
        inner.set_word_pos(0);
        Self { inner }
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.inner
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
