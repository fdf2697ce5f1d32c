//! Genie-aided and two-phase decoding.
//!
//! Given (possibly wrong) knowledge of every other layer's branch words, the
//! `m + 1` blocks that contain `v(t)` can be stripped of their other
//! contributions, leaving `m + 1` noisy looks at `v(t)` through the
//! interleavers. Decoding then reduces to a per-short-block correlation
//! search. The two-phase decoder takes that knowledge from the sliding-window
//! decoder's extrinsic hard decisions.

use std::collections::BTreeMap;

use rand::Rng;

use crate::bits::BitBlock;
use crate::codes::CodeFamily;
use crate::encoder::BmstSystem;
use crate::error::{Error, Result};
use crate::swd::{decode_frame_swd, SwdConfig, SwdFrameOutput};

/// Where side information came from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SideSource {
    Perfect,
    Flipped(f64),
    PhaseOne,
}

/// Branch words `w~(t', l)` for the layers around one target.
#[derive(Clone, Debug, PartialEq)]
pub struct GenieSideInfo {
    pub target: usize,
    pub source: SideSource,
    words: BTreeMap<(isize, usize), BitBlock>,
}

impl GenieSideInfo {
    pub fn new(target: usize, source: SideSource) -> Self {
        GenieSideInfo {
            target,
            source,
            words: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, layer: isize, branch: usize, w: BitBlock) {
        self.words.insert((layer, branch), w);
    }

    pub fn get(&self, layer: isize, branch: usize) -> Option<&BitBlock> {
        self.words.get(&(layer, branch))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Picks the entries needed for `target` out of per-layer branch words
    /// (`frame_words[t'][l]`). Layers outside the frame are left out; the
    /// canceller treats them as zero. The target's own words are never read.
    pub fn from_frame(
        sys: &BmstSystem,
        frame_words: &[Vec<BitBlock>],
        target: usize,
        source: SideSource,
    ) -> Self {
        let mut side = GenieSideInfo::new(target, source);
        for (layer, branch) in needed_indices(target, sys.memory()) {
            if layer >= 0 && (layer as usize) < frame_words.len() {
                side.insert(layer, branch, frame_words[layer as usize][branch].clone());
            }
        }
        side
    }
}

/// `(t + i - l, l)` for `0 <= i, l <= m`, `l != i`.
pub fn needed_indices(target: usize, m: usize) -> Vec<(isize, usize)> {
    let mut out = Vec::new();
    for i in 0..=m {
        for l in 0..=m {
            if l != i {
                out.push((target as isize + i as isize - l as isize, l));
            }
        }
    }
    out
}

/// Flips each bit of `w` independently with probability `p`.
pub fn flip_bits<R: Rng + ?Sized>(w: &BitBlock, p: f64, rng: &mut R) -> BitBlock {
    let mut out = w.clone();
    if p > 0.0 {
        for j in 0..w.len() {
            if rng.random::<f64>() < p {
                out.flip(j);
            }
        }
    }
    out
}

/// Removes the other layers' contributions from `received[i]` (the soft
/// observations of block `t + i`, either channel outputs or LLRs).
pub fn gad_cancel(sys: &BmstSystem, received: &[&[f64]], side: &GenieSideInfo) -> Result<Vec<Vec<f64>>> {
    let m = sys.memory();
    if received.len() != m + 1 {
        return Err(Error::LengthMismatch {
            expected: m + 1,
            actual: received.len(),
        });
    }
    let t = side.target as isize;
    let frame_len = sys.frame_len() as isize;
    let mut out = Vec::with_capacity(m + 1);
    for (i, y) in received.iter().enumerate() {
        let mut c = BitBlock::zeros(sys.n());
        for l in (0..=m).filter(|&l| l != i) {
            let layer = t + i as isize - l as isize;
            if layer < 0 || layer >= frame_len {
                continue;
            }
            let w = side
                .get(layer, l)
                .ok_or(Error::MissingSideInfo { layer, branch: l })?;
            c.xor_assign(w);
        }
        out.push(
            y.iter()
                .enumerate()
                .map(|(j, &v)| if c.get(j) { -v } else { v })
                .collect(),
        );
    }
    Ok(out)
}

/// Combined correlation of every bit of `v(t)` over its `m + 1` looks.
pub fn combine_looks(sys: &BmstSystem, y_tilde: &[Vec<f64>]) -> Vec<f64> {
    let mut z = vec![0.0; sys.n()];
    for (i, y) in y_tilde.iter().enumerate() {
        let perm = sys.interleavers().perm(i);
        for (p, &v) in y.iter().enumerate() {
            z[perm[p] as usize] += v;
        }
    }
    z
}

fn reverse_low_bits(x: u64, width: usize) -> u64 {
    if width == 0 {
        0
    } else {
        x.reverse_bits() >> (64 - width)
    }
}

/// Maximum-correlation codeword search on cancelled observations; returns
/// `(u(t), v(t))`. Ties go to the lexicographically smallest message
/// (message bit 0 compared first).
pub fn gad_minimize(sys: &BmstSystem, y_tilde: &[Vec<f64>]) -> (BitBlock, BitBlock) {
    let z = combine_looks(sys, y_tilde);
    let short = sys.code().short();
    let (nn, kk) = (short.n(), short.k());
    let mut u = BitBlock::zeros(sys.k());
    for (b, seg) in z.chunks_exact(nn).enumerate() {
        let msg = if short.family() == CodeFamily::Rc {
            u64::from(seg.iter().sum::<f64>() < 0.0)
        } else {
            best_message(short.codebook(), kk, seg)
        };
        u.write_word(b * kk, kk, msg);
    }
    let v = sys.code().encode(&u).expect("message length matches code");
    (u, v)
}

/// Exhaustive search: minimises the sum of `z_j` over the codeword's ones.
fn best_message(codebook: &[u64], k: usize, z: &[f64]) -> u64 {
    let mut best = 0u64;
    let mut best_cost = f64::INFINITY;
    for r in 0..(1u64 << k) {
        let msg = reverse_low_bits(r, k);
        let cw = codebook[msg as usize];
        let cost: f64 = z
            .iter()
            .enumerate()
            .filter(|(j, _)| (cw >> j) & 1 == 1)
            .map(|(_, &v)| v)
            .sum();
        if cost < best_cost {
            best_cost = cost;
            best = msg;
        }
    }
    best
}

/// Genie-aided decoding of `u(t)` from a complete received frame.
pub fn gad_decode(sys: &BmstSystem, received: &[Vec<f64>], side: &GenieSideInfo, t: usize) -> Result<BitBlock> {
    let m = sys.memory();
    if t >= sys.frame_len() {
        return Err(Error::InvalidParameter(format!("target {t} outside the frame")));
    }
    if received.len() != sys.num_blocks() {
        return Err(Error::LengthMismatch {
            expected: sys.num_blocks(),
            actual: received.len(),
        });
    }
    let looks: Vec<&[f64]> = received[t..=t + m].iter().map(Vec::as_slice).collect();
    let y_tilde = gad_cancel(sys, &looks, side)?;
    Ok(gad_minimize(sys, &y_tilde).0)
}

/// Genie-aided decoding of every block of a frame, all targets drawing on
/// the same per-layer side words.
pub fn decode_frame_gad(
    sys: &BmstSystem,
    received: &[Vec<f64>],
    frame_words: &[Vec<BitBlock>],
    source: SideSource,
) -> Result<Vec<BitBlock>> {
    (0..sys.frame_len())
        .map(|t| {
            let side = GenieSideInfo::from_frame(sys, frame_words, t, source);
            gad_decode(sys, received, &side, t)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TpdConfig {
    pub swd: SwdConfig,
}

impl TpdConfig {
    pub fn new(delay: usize, max_iters: usize) -> Self {
        TpdConfig {
            swd: SwdConfig::new(delay, max_iters),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TpdFrameOutput {
    pub phase_one: SwdFrameOutput,
    pub u_hat: Vec<BitBlock>,
}

/// Phase I runs the window decoder and keeps its branch decisions; phase II
/// re-decodes every block with those decisions as side information.
pub fn decode_frame_tpd(sys: &BmstSystem, received: &[Vec<f64>], cfg: TpdConfig) -> Result<TpdFrameOutput> {
    if cfg.swd.delay < sys.memory() {
        return Err(Error::InvalidParameter(format!(
            "two-phase decoding needs d >= m (d = {}, m = {})",
            cfg.swd.delay,
            sys.memory()
        )));
    }
    let phase_one = decode_frame_swd(sys, received, cfg.swd)?;
    let u_hat = decode_frame_gad(sys, received, &phase_one.w_tilde, SideSource::PhaseOne)?;
    Ok(TpdFrameOutput { phase_one, u_hat })
}

/// `(bits, errors)` of branch decisions against the true branch words.
pub fn count_w_errors(sys: &BmstSystem, w_tilde: &[Vec<BitBlock>], intermediate: &[BitBlock]) -> (u64, u64) {
    let mut bits = 0u64;
    let mut errors = 0u64;
    for (w, v) in w_tilde.iter().zip(intermediate) {
        for (i, wi) in w.iter().enumerate() {
            errors += wi.distance(&sys.branch_word(v, i)) as u64;
            bits += wi.len() as u64;
        }
    }
    (bits, errors)
}

/// True branch words of every layer, `[t][i]`.
pub fn true_branch_words(sys: &BmstSystem, intermediate: &[BitBlock]) -> Vec<Vec<BitBlock>> {
    intermediate
        .iter()
        .map(|v| (0..=sys.memory()).map(|i| sys.branch_word(v, i)).collect())
        .collect()
}
