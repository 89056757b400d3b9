//! Deterministic seed derivation.

/// Stream identifiers mixed into per-channel seeds.
#[derive(Clone, Copy)]
pub(crate) enum Stream {
    Flow = 1,
    Leak = 2,
    Instrument = 3,
    Transient = 4,
    Init = 5,
    Split = 6,
    Shuffle = 7,
    Dropout = 8,
    Sweep = 9,
}

/// SplitMix64 finaliser; decorrelates nearby seeds.
pub(crate) fn mix_seed(seed: u64, stream: Stream, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add((stream as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
