//! Fixtures shared by the benchmarks.

use bmst_core::channel::{channel_llr, ebn0_to_sigma, transmit};
use bmst_core::encoder::{bpsk_map, encode_frame};
use bmst_core::{BitBlock, BmstSystem, EncodedFrame};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random frame, its encoding and the received channel outputs.
pub struct NoisyFrame {
    pub messages: Vec<BitBlock>,
    pub encoded: EncodedFrame,
    pub y: Vec<Vec<f64>>,
    pub llr: Vec<Vec<f64>>,
}

pub fn system(code: &str, m: usize, frame_len: usize) -> BmstSystem {
    BmstSystem::with_seed(code.parse().unwrap(), m, frame_len, 1).unwrap()
}

pub fn noisy_frame(sys: &BmstSystem, ebn0_db: f64, seed: u64) -> NoisyFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = ebn0_to_sigma(ebn0_db, sys.code().rate()).unwrap();
    let messages: Vec<BitBlock> = (0..sys.frame_len())
        .map(|_| BitBlock::from_bits((0..sys.k()).map(|_| rng.random::<bool>())))
        .collect();
    let encoded = encode_frame(sys, &messages).unwrap();
    let y: Vec<Vec<f64>> = encoded.coded.iter().map(|c| transmit(&bpsk_map(c), sigma, &mut rng)).collect();
    let llr = y.iter().map(|b| channel_llr(b, sigma)).collect();
    NoisyFrame { messages, encoded, y, llr }
}
