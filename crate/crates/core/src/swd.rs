//! Sliding-window decoding over the normal graph of a BMST frame.
//!
//! Layer `s` carries `v(s)`. Its branch `i` holds `w(s, i) = v(s) Pi_i` and
//! meets the XOR node of block `s + i`. Two messages live on every branch
//! edge, both indexed in the permuted domain:
//!
//! * `up`: XOR node `s + i` to layer `s`, an LLR;
//! * `down`: layer `s` to XOR node `s + i`, kept as `tanh(l / 2)`.
//!
//! One iteration sweeps the window forward and then backward; each step of a
//! sweep updates XOR node `q` and then the equality/code node of layer `q`.
//! Layers before the frame and the termination layers are known zeros. Layers
//! that have left the window keep their last outgoing messages.

use crate::bits::BitBlock;
use crate::encoder::BmstSystem;
use crate::error::{Error, Result};
use crate::llr;

/// Default entropy threshold (bits per message bit) for early stopping.
pub const DEFAULT_STOP_THRESHOLD: f64 = 1e-5;
pub const DEFAULT_STALL_PATIENCE: usize = 0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwdConfig {
    /// Decoding delay `d`.
    pub delay: usize,
    /// Maximum iterations per window position.
    pub max_iters: usize,
    pub early_stop: bool,
    pub stop_threshold: f64,
    /// Also stop after this many consecutive iterations without a drop in
    /// target entropy; 0 disables the rule.
    pub stall_patience: usize,
    /// Keep messages of surviving layers when the window slides.
    pub warm_start: bool,
}

impl SwdConfig {
    pub fn new(delay: usize, max_iters: usize) -> Self {
        SwdConfig {
            delay,
            max_iters,
            early_stop: true,
            stop_threshold: DEFAULT_STOP_THRESHOLD,
            stall_patience: DEFAULT_STALL_PATIENCE,
            warm_start: true,
        }
    }
}

/// XOR-constraint update for one bit position.
///
/// `channel` is the channel LLR of the coded bit and `branch_soft[i]` the
/// soft bit arriving from branch `i`. `out[i]` receives the extrinsic LLR
/// towards branch `i`.
pub fn update_plus_node(channel: f64, branch_soft: &[f64], out: &mut [f64]) {
    let mut soft = Vec::with_capacity(branch_soft.len() + 1);
    soft.push(llr::soft_bit(channel));
    soft.extend_from_slice(branch_soft);
    let mut all = vec![0.0; soft.len()];
    llr::boxplus_exclusive(&soft, &mut all);
    out.copy_from_slice(&all[1..]);
}

/// Equality-constraint update: `out[i]` is the sum of every input but `i`.
pub fn update_eq_node(inputs: &[f64], out: &mut [f64]) {
    let total: f64 = inputs.iter().sum();
    for (o, &l) in out.iter_mut().zip(inputs) {
        *o = llr::clamp(total - l);
    }
}

/// Decisions released for one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerDecision {
    pub layer: usize,
    pub u_hat: BitBlock,
    /// Hard decisions on the outgoing branch messages, `w~(layer, i)`.
    pub w_tilde: Vec<BitBlock>,
    pub iterations: usize,
}

/// Streaming decoder state for one frame.
pub struct DecoderWindow<'a> {
    sys: &'a BmstSystem,
    cfg: SwdConfig,
    n: usize,
    m: usize,
    frame_len: usize,
    slots: usize,
    /// `up[slot][i][p]`
    up: Vec<Vec<Vec<f64>>>,
    /// `down[slot][i][p]`, tanh domain.
    down: Vec<Vec<Vec<f64>>>,
    msg_app: Vec<Vec<f64>>,
    /// Channel soft bits by block, ring of `d + 1`.
    channel: Vec<Vec<f64>>,
    received: usize,
    emitted: usize,
    acc: Vec<f64>,
    ext: Vec<f64>,
    prod: Vec<f64>,
    zeros: Vec<u8>,
}

impl<'a> DecoderWindow<'a> {
    pub fn new(sys: &'a BmstSystem, cfg: SwdConfig) -> Self {
        let n = sys.n();
        let m = sys.memory();
        let slots = cfg.delay + m + 1;
        let zeros = || vec![vec![0.0; n]; m + 1];
        DecoderWindow {
            sys,
            cfg,
            n,
            m,
            frame_len: sys.frame_len(),
            slots,
            up: (0..slots).map(|_| zeros()).collect(),
            down: (0..slots).map(|_| zeros()).collect(),
            msg_app: vec![vec![0.0; sys.k()]; slots],
            channel: vec![vec![0.0; n]; cfg.delay + 1],
            received: 0,
            emitted: 0,
            acc: vec![0.0; n],
            ext: vec![0.0; n],
            prod: vec![0.0; n],
            zeros: vec![0; n],
        }
    }

    /// Number of blocks received so far.
    pub fn received(&self) -> usize {
        self.received
    }

    /// Index of the next layer to be released.
    pub fn next_layer(&self) -> usize {
        self.emitted
    }

    pub fn is_finished(&self) -> bool {
        self.emitted >= self.frame_len
    }

    /// True once the oldest pending layer has its full window, or the frame
    /// has been received completely.
    pub fn ready(&self) -> bool {
        !self.is_finished()
            && (self.received > self.emitted + self.cfg.delay
                || self.received == self.sys.num_blocks())
    }

    /// Feeds the channel LLRs of the next coded block.
    pub fn push(&mut self, channel_llr: &[f64]) -> Result<()> {
        if channel_llr.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: channel_llr.len(),
            });
        }
        if self.received >= self.sys.num_blocks() {
            return Err(Error::FrameComplete(self.sys.num_blocks()));
        }
        if !self.is_finished() && self.received > self.emitted + self.cfg.delay {
            return Err(Error::InvalidParameter(
                "window full: release the oldest layer before pushing".into(),
            ));
        }
        let tau = self.received;
        let slot = &mut self.channel[tau % (self.cfg.delay + 1)];
        for (s, &l) in slot.iter_mut().zip(channel_llr) {
            *s = llr::soft_bit(llr::clamp(l));
        }
        if tau < self.frame_len {
            self.reset_layer(tau);
        }
        self.received += 1;
        Ok(())
    }

    fn reset_layer(&mut self, s: usize) {
        let slot = s % self.slots;
        for v in self.up[slot].iter_mut().chain(self.down[slot].iter_mut()) {
            v.fill(0.0);
        }
        self.msg_app[slot].fill(0.0);
    }

    /// Updates XOR node `tau`, writing to layers in `lo..=hi` only.
    fn plus(&mut self, tau: usize, lo: usize, hi: usize) {
        let m = self.m;
        // Branch indices whose layer is active.
        let i_lo = tau.saturating_sub(hi);
        let i_hi = (tau - lo).min(m);
        if i_lo > i_hi {
            return;
        }
        let ch = &self.channel[tau % (self.cfg.delay + 1)];
        let (prod, zeros) = (&mut self.prod, &mut self.zeros);
        for ((pr, z), &t) in prod.iter_mut().zip(zeros.iter_mut()).zip(ch) {
            *z = u8::from(t == 0.0);
            *pr = if t == 0.0 { 1.0 } else { t };
        }
        for i in 0..=m {
            let s = tau as isize - i as isize;
            if s < 0 || s as usize >= self.frame_len {
                // Known zero: soft bit 1.
                continue;
            }
            let src = &self.down[s as usize % self.slots][i];
            for ((pr, z), &t) in prod.iter_mut().zip(zeros.iter_mut()).zip(src) {
                if t == 0.0 {
                    *z += 1;
                } else {
                    *pr *= t;
                }
            }
        }
        for i in i_lo..=i_hi {
            let slot = (tau - i) % self.slots;
            let src = &self.down[slot][i];
            let dst = &mut self.up[slot][i];
            for (((o, &pr), &z), &t) in dst.iter_mut().zip(prod.iter()).zip(zeros.iter()).zip(src) {
                *o = match z {
                    0 => llr::from_soft_bit(pr / t),
                    1 if t == 0.0 => llr::from_soft_bit(pr),
                    _ => 0.0,
                };
            }
        }
    }

    /// Equality and code node update of layer `s`.
    fn layer(&mut self, s: usize) {
        let slot = s % self.slots;
        let il = self.sys.interleavers();
        self.acc.fill(0.0);
        for i in 0..=self.m {
            let perm = il.perm(i);
            for (p, &l) in self.up[slot][i].iter().enumerate() {
                self.acc[perm[p] as usize] += l;
            }
        }
        self.sys
            .code()
            .siso_llr(&self.acc, &mut self.ext, &mut self.msg_app[slot]);
        for i in 0..=self.m {
            let perm = il.perm(i);
            let up = &self.up[slot][i];
            for (p, d) in self.down[slot][i].iter_mut().enumerate() {
                let j = perm[p] as usize;
                *d = llr::soft_bit(llr::clamp(self.acc[j] + self.ext[j] - up[p]));
            }
        }
    }

    fn target_entropy(&self, s: usize) -> f64 {
        let app = &self.msg_app[s % self.slots];
        app.iter().map(|&l| llr::entropy(l)).sum::<f64>() / app.len() as f64
    }

    /// Runs the window on the oldest pending layer and releases it.
    pub fn decode_oldest(&mut self) -> Result<LayerDecision> {
        if !self.ready() {
            return Err(Error::InvalidParameter(
                "oldest layer does not have its full window yet".into(),
            ));
        }
        let target = self.emitted;
        let plus_hi = self.received - 1;
        let layer_hi = plus_hi.min(self.frame_len - 1);
        if !self.cfg.warm_start {
            for s in target..=layer_hi {
                self.reset_layer(s);
            }
        }
        let mut iterations = 0;
        let mut prev = f64::INFINITY;
        let mut stalled = 0;
        for it in 1..=self.cfg.max_iters.max(1) {
            for q in target..=plus_hi {
                self.plus(q, target, layer_hi);
                if q <= layer_hi {
                    self.layer(q);
                }
            }
            for q in (target..=plus_hi).rev() {
                self.plus(q, target, layer_hi);
                if q <= layer_hi {
                    self.layer(q);
                }
            }
            iterations = it;
            if self.cfg.early_stop {
                let h = self.target_entropy(target);
                if h < self.cfg.stop_threshold {
                    break;
                }
                if it >= 2 && h >= prev {
                    stalled += 1;
                    if self.cfg.stall_patience > 0 && stalled >= self.cfg.stall_patience {
                        break;
                    }
                } else {
                    stalled = 0;
                }
                prev = prev.min(h);
            }
        }
        let slot = target % self.slots;
        let u_hat = BitBlock::from_bits(self.msg_app[slot].iter().map(|&l| llr::hard(l)));
        let w_tilde = self.down[slot]
            .iter()
            .map(|d| BitBlock::from_bits(d.iter().map(|&t| t < 0.0)))
            .collect();
        self.emitted += 1;
        Ok(LayerDecision {
            layer: target,
            u_hat,
            w_tilde,
            iterations,
        })
    }
}

/// Decisions for a whole frame.
#[derive(Clone, Debug, PartialEq)]
pub struct SwdFrameOutput {
    pub u_hat: Vec<BitBlock>,
    /// `w_tilde[t][i]`, the extrinsic hard decisions of layer `t`, branch `i`.
    pub w_tilde: Vec<Vec<BitBlock>>,
    pub iterations: Vec<usize>,
}

/// Decodes a complete frame of `L + m` channel LLR blocks.
pub fn decode_frame_swd(sys: &BmstSystem, received: &[Vec<f64>], cfg: SwdConfig) -> Result<SwdFrameOutput> {
    if received.len() != sys.num_blocks() {
        return Err(Error::LengthMismatch {
            expected: sys.num_blocks(),
            actual: received.len(),
        });
    }
    let mut win = DecoderWindow::new(sys, cfg);
    let mut out = SwdFrameOutput {
        u_hat: Vec::with_capacity(sys.frame_len()),
        w_tilde: Vec::with_capacity(sys.frame_len()),
        iterations: Vec::with_capacity(sys.frame_len()),
    };
    let release = |win: &mut DecoderWindow, out: &mut SwdFrameOutput| -> Result<()> {
        while win.ready() {
            let dec = win.decode_oldest()?;
            out.u_hat.push(dec.u_hat);
            out.w_tilde.push(dec.w_tilde);
            out.iterations.push(dec.iterations);
        }
        Ok(())
    };
    for block in received {
        win.push(block)?;
        release(&mut win, &mut out)?;
    }
    release(&mut win, &mut out)?;
    debug_assert!(win.is_finished());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{channel_llr, noiseless_llr, transmit};
    use crate::codes::{CartesianCode, ShortCode};
    use crate::encoder::{bpsk_map, encode_frame};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn system(short: ShortCode, b: usize, m: usize, l: usize, seed: u64) -> BmstSystem {
        BmstSystem::with_seed(CartesianCode::new(short, b).unwrap(), m, l, seed).unwrap()
    }

    fn random_messages(sys: &BmstSystem, rng: &mut ChaCha8Rng) -> Vec<BitBlock> {
        (0..sys.frame_len())
            .map(|_| BitBlock::from_bits((0..sys.k()).map(|_| rng.random::<bool>())))
            .collect()
    }

    fn noisy_frame(sys: &BmstSystem, sigma: f64, seed: u64) -> (Vec<BitBlock>, Vec<BitBlock>, Vec<Vec<f64>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let msgs = random_messages(sys, &mut rng);
        let frame = encode_frame(sys, &msgs).unwrap();
        let rx = frame
            .coded
            .iter()
            .map(|c| channel_llr(&transmit(&bpsk_map(c), sigma, &mut rng), sigma))
            .collect();
        (msgs, frame.intermediate, rx)
    }

    fn xor_oracle(llrs: &[f64]) -> f64 {
        let mut even = 0.0;
        let mut odd = 0.0;
        for mask in 0u32..(1 << llrs.len()) {
            let mut p = 1.0;
            for (i, &l) in llrs.iter().enumerate() {
                let p1 = 1.0 / (1.0 + l.exp());
                p *= if (mask >> i) & 1 == 1 { p1 } else { 1.0 - p1 };
            }
            if mask.count_ones() % 2 == 0 {
                even += p;
            } else {
                odd += p;
            }
        }
        (even / odd).ln()
    }

    #[test]
    fn plus_node_known_neighbours() {
        let mut out = [0.0; 3];
        update_plus_node(1.3, &[0.0, 1.0, 1.0], &mut out);
        assert!((out[0] - 1.3).abs() < 1e-12);
        update_plus_node(-0.7, &[1.0, 0.0, 1.0], &mut out);
        assert!((out[1] + 0.7).abs() < 1e-12);
        assert_eq!(out[0], 0.0);
        update_plus_node(0.0, &[0.3, 0.2, -0.4], &mut out);
        assert_eq!(out, [0.0; 3]);
    }

    #[test]
    fn plus_node_three_inputs() {
        let ch = 0.9;
        let b = [-1.1, 0.4];
        let mut out = [0.0; 2];
        update_plus_node(ch, &[llr::soft_bit(b[0]), llr::soft_bit(b[1])], &mut out);
        assert!((out[0] - xor_oracle(&[ch, b[1]])).abs() < 1e-6);
        assert!((out[1] - xor_oracle(&[ch, b[0]])).abs() < 1e-6);
    }

    #[test]
    fn eq_node() {
        let mut out = [0.0; 3];
        update_eq_node(&[1.0, 2.0, 3.0], &mut out);
        assert_eq!(out, [5.0, 4.0, 3.0]);
        let mut two = [0.0; 2];
        update_eq_node(&[-0.5, 2.5], &mut two);
        assert_eq!(two, [2.5, -0.5]);
        update_eq_node(&[30.0, 30.0, 1.0], &mut out);
        assert_eq!(out[2], llr::LLR_MAX);
    }

    #[test]
    fn code_node_rc_swaps() {
        let code = CartesianCode::new(ShortCode::repetition(2).unwrap(), 2).unwrap();
        let mut ext = [0.0; 4];
        let mut app = [0.0; 2];
        code.siso_llr(&[0.5, -2.0, 0.0, 0.0], &mut ext, &mut app);
        assert_eq!(ext, [-2.0, 0.5, 0.0, 0.0]);
        assert_eq!(app, [-1.5, 0.0]);
    }

    #[test]
    fn noiseless_frame_single_iteration() {
        for (short, m) in [
            (ShortCode::repetition(2).unwrap(), 2),
            (ShortCode::single_parity(4).unwrap(), 3),
            (ShortCode::repetition(2).unwrap(), 0),
        ] {
            let sys = system(short, 16, m, 12, 7);
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let msgs = random_messages(&sys, &mut rng);
            let frame = encode_frame(&sys, &msgs).unwrap();
            let rx: Vec<Vec<f64>> = frame.coded.iter().map(|c| noiseless_llr(&bpsk_map(c))).collect();
            let out = decode_frame_swd(&sys, &rx, SwdConfig::new(3 * m.max(1), 18)).unwrap();
            assert_eq!(out.u_hat, msgs);
            assert!(out.iterations.iter().all(|&i| i == 1), "{:?}", out.iterations);
            for (t, w) in out.w_tilde.iter().enumerate() {
                for (i, wi) in w.iter().enumerate() {
                    assert_eq!(*wi, sys.branch_word(&frame.intermediate[t], i));
                }
            }
        }
    }

    #[test]
    fn all_zero_frame() {
        let sys = system(ShortCode::repetition(2).unwrap(), 8, 2, 5, 1);
        let rx = vec![vec![llr::LLR_MAX; sys.n()]; sys.num_blocks()];
        let out = decode_frame_swd(&sys, &rx, SwdConfig::new(6, 18)).unwrap();
        assert!(out.u_hat.iter().all(BitBlock::is_zero));
        assert_eq!(out.u_hat.len(), 5);
    }

    #[test]
    fn single_block_frame() {
        let sys = system(ShortCode::repetition(2).unwrap(), 8, 2, 1, 3);
        let (msgs, _, rx) = noisy_frame(&sys, 0.3, 5);
        let out = decode_frame_swd(&sys, &rx, SwdConfig::new(6, 18)).unwrap();
        assert_eq!(out.u_hat.len(), 1);
        assert_eq!(out.u_hat, msgs);
    }

    #[test]
    fn uncoupled_is_basic_map() {
        let short = ShortCode::single_parity(4).unwrap();
        let sys = system(short.clone(), 10, 0, 6, 2);
        let (_, _, rx) = noisy_frame(&sys, 0.9, 8);
        let out = decode_frame_swd(&sys, &rx, SwdConfig::new(0, 18)).unwrap();
        let code = sys.code();
        for (t, y) in rx.iter().enumerate() {
            let mut ext = vec![0.0; sys.n()];
            let mut app = vec![0.0; sys.k()];
            code.siso_llr(y, &mut ext, &mut app);
            assert_eq!(out.u_hat[t], BitBlock::from_bits(app.iter().map(|&l| llr::hard(l))));
        }
    }

    #[test]
    fn window_is_causal() {
        let sys = system(ShortCode::repetition(2).unwrap(), 20, 2, 20, 4);
        let d = 4;
        let (_, _, rx) = noisy_frame(&sys, 0.9, 17);
        let base = decode_frame_swd(&sys, &rx, SwdConfig::new(d, 18)).unwrap();
        let tau = 12;
        let mut changed = rx.clone();
        for b in &mut changed[tau..] {
            for l in b.iter_mut() {
                *l = -*l * 0.5 + 0.3;
            }
        }
        let alt = decode_frame_swd(&sys, &changed, SwdConfig::new(d, 18)).unwrap();
        // Layer s is released after block s + d arrives.
        for s in 0..tau - d {
            assert_eq!(base.u_hat[s], alt.u_hat[s], "layer {s}");
            assert_eq!(base.w_tilde[s], alt.w_tilde[s]);
        }
    }

    #[test]
    fn early_stop_noiseless_agrees() {
        let sys = system(ShortCode::repetition(2).unwrap(), 16, 3, 10, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let msgs = random_messages(&sys, &mut rng);
        let frame = encode_frame(&sys, &msgs).unwrap();
        let rx: Vec<Vec<f64>> = frame.coded.iter().map(|c| noiseless_llr(&bpsk_map(c))).collect();
        let fast = decode_frame_swd(&sys, &rx, SwdConfig::new(6, 18)).unwrap();
        let mut cfg = SwdConfig::new(6, 18);
        cfg.early_stop = false;
        let full = decode_frame_swd(&sys, &rx, cfg).unwrap();
        assert_eq!(fast.u_hat, full.u_hat);
        assert_eq!(fast.w_tilde, full.w_tilde);
        assert!(full.iterations.iter().all(|&i| i == 18));
    }

    #[test]
    fn cold_start_still_decodes() {
        let sys = system(ShortCode::repetition(2).unwrap(), 50, 2, 20, 9);
        let (msgs, _, rx) = noisy_frame(&sys, 0.5, 3);
        let mut cfg = SwdConfig::new(6, 18);
        cfg.warm_start = false;
        let out = decode_frame_swd(&sys, &rx, cfg).unwrap();
        assert_eq!(out.u_hat, msgs);
    }

    #[test]
    fn coupling_beats_uncoupled() {
        // At 2 dB RC[2,1] alone sits near 4e-2; with m = 2 the window should
        // do markedly better.
        let sigma = crate::channel::ebn0_to_sigma(3.0, 0.5).unwrap();
        let coupled = system(ShortCode::repetition(2).unwrap(), 500, 2, 40, 11);
        let (msgs, _, rx) = noisy_frame(&coupled, sigma, 21);
        let out = decode_frame_swd(&coupled, &rx, SwdConfig::new(6, 18)).unwrap();
        let errs: usize = out.u_hat.iter().zip(&msgs).map(|(a, b)| a.distance(b)).sum();
        let ber = errs as f64 / (40.0 * 500.0);
        let uncoded = crate::analysis::q_function((2.0 * 10f64.powf(0.3)).sqrt());
        assert!(ber < uncoded / 3.0, "ber {ber}");
    }

    #[test]
    fn push_validation() {
        let sys = system(ShortCode::repetition(2).unwrap(), 4, 1, 3, 0);
        let mut win = DecoderWindow::new(&sys, SwdConfig::new(1, 4));
        assert!(win.push(&[0.0; 3]).is_err());
        win.push(&[1.0; 8]).unwrap();
        assert!(!win.ready());
        assert!(win.decode_oldest().is_err());
        win.push(&[1.0; 8]).unwrap();
        assert!(win.ready());
        assert!(win.push(&[1.0; 8]).is_err());
        assert!(decode_frame_swd(&sys, &[vec![0.0; 8]], SwdConfig::new(1, 4)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn plus_node_matches_enumeration(ch in -5.0f64..5.0, b in proptest::collection::vec(-5.0f64..5.0, 1..=4)) {
            let soft: Vec<f64> = b.iter().map(|&l| llr::soft_bit(l)).collect();
            let mut out = vec![0.0; b.len()];
            update_plus_node(ch, &soft, &mut out);
            for i in 0..b.len() {
                let mut others = vec![ch];
                others.extend(b.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &l)| l));
                prop_assert!((out[i] - xor_oracle(&others)).abs() < 1e-6);
            }
        }

        #[test]
        fn messages_stay_bounded(seed in 0u64..1000) {
            let sys = system(ShortCode::single_parity(3).unwrap(), 6, 2, 4, seed);
            let (_, _, rx) = noisy_frame(&sys, 0.6, seed);
            let mut win = DecoderWindow::new(&sys, SwdConfig::new(3, 5));
            for y in &rx {
                win.push(y).unwrap();
                while win.ready() {
                    win.decode_oldest().unwrap();
                    for slot in &win.up {
                        for v in slot {
                            prop_assert!(v.iter().all(|l| l.abs() <= llr::LLR_MAX));
                        }
                    }
                }
            }
        }
    }
}
