use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// The generator behind every random draw in the crate: xoshiro256++, with its
/// 256-bit state expanded from a 64-bit seed by SplitMix64.
pub type TrialRng = Xoshiro256PlusPlus;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output finalizer (Stafford variant 13). A bijection on u64.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for trial `trial_index` under `base_seed`: the `(trial_index + 1)`-th
/// output of a SplitMix64 stream whose state starts at `base_seed`.
///
/// For a fixed base the map is injective in `trial_index`, so distinct trials
/// always get distinct seeds.
pub fn derive_trial_seed(base_seed: u64, trial_index: u64) -> u64 {
    mix64(base_seed.wrapping_add(GOLDEN_GAMMA.wrapping_mul(trial_index.wrapping_add(1))))
}

/// Fold a path of indices into one seed, e.g. `(dataset, n-index, trial)`.
pub fn derive_seed_path(base_seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(base_seed, |seed, &i| derive_trial_seed(seed, i))
}

pub fn rng_from_seed(seed: u64) -> TrialRng {
    TrialRng::seed_from_u64(seed)
}

/// Provenance of one seeded draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrialSeed {
    pub base_seed: u64,
    pub trial_index: u64,
}

impl TrialSeed {
    pub fn new(base_seed: u64, trial_index: u64) -> Self {
        Self {
            base_seed,
            trial_index,
        }
    }

    pub fn derived(&self) -> u64 {
        derive_trial_seed(self.base_seed, self.trial_index)
    }

    pub fn rng(&self) -> TrialRng {
        rng_from_seed(self.derived())
    }
}
