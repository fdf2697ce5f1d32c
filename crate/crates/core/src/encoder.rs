//! Superposition encoding.
//!
//! Sub-block `t` of a frame is
//!
//! ```text
//! c(t) = v(t) Pi_0 + v(t-1) Pi_1 + ... + v(t-m) Pi_m      (over GF(2))
//! ```
//!
//! where `v(t)` is the basic-code encoding of the message block `u(t)`,
//! `v(t) = 0` for `t < 0`, and the `m` blocks after the `L` data blocks carry
//! all-zero messages to terminate the frame.
//!
//! # Interleaver generation
//!
//! `Pi_0` is the identity. For `i >= 1`, `Pi_i` is produced by a Fisher-Yates
//! shuffle of the identity driven by a ChaCha8 generator seeded with
//! `seed_from_u64(seed)` and switched to stream `i`:
//!
//! ```text
//! for p in (1..n).rev():
//!     r = next_u64()
//!     q = (r * (p + 1)) >> 64        // 128-bit product
//!     swap(perm[p], perm[q])
//! ```
//!
//! A permutation maps positions as `(v Pi)[p] = v[perm[p]]`.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bits::BitBlock;
use crate::codes::CartesianCode;
use crate::error::{Error, Result};

/// The `m + 1` interleavers of a system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InterleaverSet {
    seed: u64,
    perms: Vec<Vec<u32>>,
    inverses: Vec<Vec<u32>>,
}

impl InterleaverSet {
    /// Generates `m + 1` interleavers of length `n`; see the module docs for
    /// the exact shuffle.
    pub fn generate(n: usize, memory: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("interleaver length must be >= 1".into()));
        }
        if n > u32::MAX as usize {
            return Err(Error::InvalidParameter("interleaver length exceeds u32".into()));
        }
        let mut perms = Vec::with_capacity(memory + 1);
        perms.push((0..n as u32).collect::<Vec<_>>());
        for branch in 1..=memory {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(branch as u64);
            let mut perm: Vec<u32> = (0..n as u32).collect();
            for p in (1..n).rev() {
                let q = ((rng.next_u64() as u128 * (p as u128 + 1)) >> 64) as usize;
                perm.swap(p, q);
            }
            perms.push(perm);
        }
        Self::from_perms(perms, seed)
    }

    /// Wraps explicit permutations. `perms[0]` may be any permutation here;
    /// [`InterleaverSet::generate`] always uses the identity.
    pub fn from_perms(perms: Vec<Vec<u32>>, seed: u64) -> Result<Self> {
        let n = perms.first().map(Vec::len).ok_or_else(|| {
            Error::InvalidParameter("at least one interleaver is required".into())
        })?;
        let mut inverses = Vec::with_capacity(perms.len());
        for (i, perm) in perms.iter().enumerate() {
            if perm.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: perm.len(),
                });
            }
            let mut inv = vec![u32::MAX; n];
            for (p, &src) in perm.iter().enumerate() {
                let src = src as usize;
                if src >= n || inv[src] != u32::MAX {
                    return Err(Error::InvalidParameter(format!(
                        "interleaver {i} is not a permutation"
                    )));
                }
                inv[src] = p as u32;
            }
            inverses.push(inv);
        }
        Ok(InterleaverSet {
            seed,
            perms,
            inverses,
        })
    }

    /// Encoding memory `m`.
    pub fn memory(&self) -> usize {
        self.perms.len() - 1
    }

    pub fn len(&self) -> usize {
        self.perms[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `perm(i)[p]` is the source position of output position `p`.
    pub fn perm(&self, i: usize) -> &[u32] {
        &self.perms[i]
    }

    /// `inverse(i)[j]` is the output position that source bit `j` lands on.
    pub fn inverse(&self, i: usize) -> &[u32] {
        &self.inverses[i]
    }

    pub fn perms(&self) -> &[Vec<u32>] {
        &self.perms
    }
}

/// Basic code, interleavers and frame length.
#[derive(Clone, Debug)]
pub struct BmstSystem {
    code: CartesianCode,
    interleavers: Arc<InterleaverSet>,
    frame_len: usize,
}

impl BmstSystem {
    pub fn new(code: CartesianCode, interleavers: InterleaverSet, frame_len: usize) -> Result<Self> {
        if interleavers.len() != code.n() {
            return Err(Error::LengthMismatch {
                expected: code.n(),
                actual: interleavers.len(),
            });
        }
        if frame_len == 0 {
            return Err(Error::InvalidParameter("frame length L must be >= 1".into()));
        }
        Ok(BmstSystem {
            code,
            interleavers: Arc::new(interleavers),
            frame_len,
        })
    }

    /// Convenience constructor generating the interleavers from `seed`.
    pub fn with_seed(code: CartesianCode, memory: usize, frame_len: usize, seed: u64) -> Result<Self> {
        let il = InterleaverSet::generate(code.n(), memory, seed)?;
        Self::new(code, il, frame_len)
    }

    pub fn code(&self) -> &CartesianCode {
        &self.code
    }

    pub fn interleavers(&self) -> &InterleaverSet {
        &self.interleavers
    }

    pub fn memory(&self) -> usize {
        self.interleavers.memory()
    }

    /// Number of data blocks `L`.
    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    /// Transmitted blocks per frame, `L + m`.
    pub fn num_blocks(&self) -> usize {
        self.frame_len + self.memory()
    }

    pub fn n(&self) -> usize {
        self.code.n()
    }

    pub fn k(&self) -> usize {
        self.code.k()
    }

    /// Frame rate `kL / (n (L + m))`.
    pub fn rate(&self) -> f64 {
        (self.k() * self.frame_len) as f64 / (self.n() * self.num_blocks()) as f64
    }

    /// `w = v Pi_i`.
    pub fn branch_word(&self, v: &BitBlock, branch: usize) -> BitBlock {
        v.permute(self.interleavers.perm(branch))
    }
}

/// Encoder memory: the last `m` intermediate codewords, newest first.
#[derive(Clone, Debug)]
pub struct EncoderState {
    history: VecDeque<BitBlock>,
    t: usize,
}

impl EncoderState {
    pub fn new(sys: &BmstSystem) -> Self {
        EncoderState {
            history: (0..sys.memory()).map(|_| BitBlock::zeros(sys.n())).collect(),
            t: 0,
        }
    }

    /// Index of the next block to encode.
    pub fn time(&self) -> usize {
        self.t
    }

    /// `v(t - 1 - i)` for `i < m`.
    pub fn history(&self) -> impl Iterator<Item = &BitBlock> {
        self.history.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.history.iter().all(BitBlock::is_zero)
    }
}

/// Encodes one message block and advances the state; returns `(c(t), v(t))`.
pub fn encode_block(
    sys: &BmstSystem,
    state: &mut EncoderState,
    message: &BitBlock,
) -> Result<(BitBlock, BitBlock)> {
    let t = state.t;
    if t >= sys.num_blocks() {
        return Err(Error::FrameComplete(sys.num_blocks()));
    }
    if t >= sys.frame_len && !message.is_zero() {
        return Err(Error::NonZeroTermination(t));
    }
    let v = sys.code.encode(message)?;
    let il = sys.interleavers();
    let mut c = BitBlock::zeros(sys.n());
    v.permute_xor_into(il.perm(0), &mut c);
    for (i, past) in state.history.iter().enumerate() {
        past.permute_xor_into(il.perm(i + 1), &mut c);
    }
    if sys.memory() > 0 {
        state.history.pop_back();
        state.history.push_front(v.clone());
    }
    state.t += 1;
    Ok((c, v))
}

/// Intermediate and transmitted blocks of one frame.
#[derive(Clone, Debug)]
pub struct EncodedFrame {
    /// `v(t)` for the `L` data blocks.
    pub intermediate: Vec<BitBlock>,
    /// `c(t)` for all `L + m` blocks.
    pub coded: Vec<BitBlock>,
}

/// Encodes `L` message blocks, appending the `m` termination blocks.
pub fn encode_frame(sys: &BmstSystem, messages: &[BitBlock]) -> Result<EncodedFrame> {
    if messages.len() != sys.frame_len {
        return Err(Error::LengthMismatch {
            expected: sys.frame_len,
            actual: messages.len(),
        });
    }
    let mut state = EncoderState::new(sys);
    let mut intermediate = Vec::with_capacity(sys.frame_len);
    let mut coded = Vec::with_capacity(sys.num_blocks());
    for msg in messages {
        let (c, v) = encode_block(sys, &mut state, msg)?;
        intermediate.push(v);
        coded.push(c);
    }
    let zero = BitBlock::zeros(sys.k());
    for _ in 0..sys.memory() {
        let (c, _) = encode_block(sys, &mut state, &zero)?;
        coded.push(c);
    }
    Ok(EncodedFrame {
        intermediate,
        coded,
    })
}

/// Bit 0 maps to `+1.0`, bit 1 to `-1.0`.
pub fn bpsk_map(c: &BitBlock) -> Vec<f64> {
    c.iter().map(|b| if b { -1.0 } else { 1.0 }).collect()
}
