use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Concrete generator handed to every stochastic routine.
pub type StreamRng = ChaCha8Rng;

/// A named, splittable seed. Deriving a child stream from a name and an
/// index is a pure function of the parent seed, so every consumer (weight
/// init, dropout masks, shuffles, CV folds) gets its own reproducible
/// stream regardless of call order elsewhere.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedStream {
    seed: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn derive(&self, name: &str, index: u64) -> Self {
        let mixed = splitmix64(self.seed ^ splitmix64(fnv1a(name)) ^ splitmix64(index.rotate_left(17)));
        Self { seed: mixed }
    }

    pub fn rng(&self) -> StreamRng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}
