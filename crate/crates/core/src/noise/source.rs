use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Supplier of standard normal variates, positioned per time step.
pub trait NormalSource {
    /// Moves to the start of the variates reserved for step `step`.
    fn seek_step(&mut self, step: u64);
    fn next_normal(&mut self) -> f64;
}

/// Independent families of variates drawn from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Path,
    Bridge,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Path => 0x7061_7468_0000_0001,
            Purpose::Bridge => 0x6272_6964_0000_0002,
        }
    }
}

/// ChaCha8 keyed by `seed ⊕ purpose`, stream = sample index, and a window of
/// 2³⁶ words per step.
#[derive(Debug, Clone)]
pub struct ChaChaNormals {
    rng: ChaCha8Rng,
}

const STEP_WINDOW_BITS: u32 = 36;

impl ChaChaNormals {
    pub fn new(seed: u64, purpose: Purpose, sample_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ purpose.tag());
        rng.set_stream(sample_index);
        Self { rng }
    }
}

impl NormalSource for ChaChaNormals {
    fn seek_step(&mut self, step: u64) {
        self.rng.set_word_pos(u128::from(step) << STEP_WINDOW_BITS);
    }

    fn next_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

/// Always returns zero: forces `W ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroNormals;

impl NormalSource for ZeroNormals {
    fn seek_step(&mut self, _step: u64) {}

    fn next_normal(&mut self) -> f64 {
        0.0
    }
}
