//! Acceptance runner: one PASS/FAIL line per criterion.
//!
//! `BMST_ACCEPT=1,4,8` restricts the run to the listed criteria.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bmst_core::analysis::{
    design_memory, find_gamma_target, flip_probability, genie_bound, lower_bound, q_function,
};
use bmst_core::encoder::{encode_frame, InterleaverSet};
use bmst_core::harness::{run_point, DecoderKind, PointResult, SimConfig};
use bmst_core::llr::{self, boxplus};
use bmst_core::{BitBlock, BmstSystem, ShortCode};

type Outcome = std::result::Result<String, String>;

struct Row {
    code: fn() -> ShortCode,
    label: &'static str,
    target: f64,
    gamma_target: f64,
    gamma_lim: f64,
    m: usize,
}

fn rc(n: usize) -> ShortCode {
    ShortCode::repetition(n).unwrap()
}

fn spc(n: usize) -> ShortCode {
    ShortCode::single_parity(n).unwrap()
}

const TABLE: [Row; 12] = [
    Row { code: || rc(8), label: "RC[8,1]", target: 1e-3, gamma_target: 6.79, gamma_lim: -1.21, m: 6 },
    Row { code: || rc(8), label: "RC[8,1]", target: 1e-6, gamma_target: 10.53, gamma_lim: -1.21, m: 14 },
    Row { code: || rc(4), label: "RC[4,1]", target: 1e-3, gamma_target: 6.79, gamma_lim: -0.79, m: 5 },
    Row { code: || rc(4), label: "RC[4,1]", target: 1e-6, gamma_target: 10.53, gamma_lim: -0.79, m: 13 },
    Row { code: || rc(2), label: "RC[2,1]", target: 1e-3, gamma_target: 6.79, gamma_lim: 0.19, m: 4 },
    Row { code: || rc(2), label: "RC[2,1]", target: 1e-5, gamma_target: 9.59, gamma_lim: 0.19, m: 8 },
    Row { code: || rc(2), label: "RC[2,1]", target: 1e-6, gamma_target: 10.53, gamma_lim: 0.19, m: 10 },
    Row { code: || rc(2), label: "RC[2,1]", target: 1e-15, gamma_target: 14.99, gamma_lim: 0.19, m: 30 },
    Row { code: || spc(4), label: "SPC[4,3]", target: 1e-3, gamma_target: 5.86, gamma_lim: 1.63, m: 2 },
    Row { code: || spc(4), label: "SPC[4,3]", target: 1e-6, gamma_target: 9.15, gamma_lim: 1.63, m: 5 },
    Row { code: || spc(8), label: "SPC[8,7]", target: 1e-3, gamma_target: 5.75, gamma_lim: 2.84, m: 1 },
    Row { code: || spc(8), label: "SPC[8,7]", target: 1e-6, gamma_target: 8.77, gamma_lim: 2.84, m: 3 },
];

fn c1_table() -> Outcome {
    let mut bad = Vec::new();
    for row in &TABLE {
        let code = (row.code)();
        let d = design_memory(code.rate(), row.target, &code).map_err(|e| e.to_string())?;
        let ok = (d.gamma_target - row.gamma_target).abs() <= 0.01
            && (d.gamma_lim - row.gamma_lim).abs() <= 0.01
            && d.m == row.m;
        if !ok {
            bad.push(format!(
                "{} {:e}: {:.3}/{:.3}/m={}",
                row.label, row.target, d.gamma_target, d.gamma_lim, d.m
            ));
        }
    }
    if bad.is_empty() {
        Ok("12/12 rows".into())
    } else {
        Err(bad.join("; "))
    }
}

fn c2_anchors() -> Outcome {
    let iowef = rc(2).iowef();
    let mut got = Vec::new();
    let mut ok = true;
    for (p, want) in [(1e-3, 6.79), (1e-5, 9.59), (1e-6, 10.53), (1e-15, 14.99)] {
        let g = find_gamma_target(&iowef, p).map_err(|e| e.to_string())?;
        ok &= (g - want).abs() <= 0.01;
        got.push(format!("{g:.3}"));
    }
    let msg = format!("gamma = {} dB", got.join("/"));
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c3_genie_prediction() -> Outcome {
    let g = genie_bound(&rc(2).iowef(), 30, 7.0e-6, 0.5, 0.5).map_err(|e| e.to_string())?;
    let rounded: f64 = format!("{g:.1e}").parse().unwrap();
    // Same bound at the transmitted rate of an L = 100000 frame, for reference.
    let framed = genie_bound(&rc(2).iowef(), 30, 7.0e-6, 0.5, 0.5 * 1e5 / (1e5 + 30.0)).map_err(|e| e.to_string())?;
    let msg = format!(
        "computed {g:.6e}, rounds to {rounded:.1e}, expected 4.2e-17 (with termination rate loss at L=1e5: {framed:.4e})"
    );
    if rounded == 4.2e-17 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c4_bound_identity() -> Outcome {
    let grid: Vec<f64> = (0..50).map(|i| -2.0 + 0.3 * i as f64).collect();
    let mut worst = 0.0f64;
    for code in [rc(2), rc(4), spc(4)] {
        let iowef = code.iowef();
        for m in [1, 8, 30] {
            for &g in &grid {
                let a = genie_bound(&iowef, m, 0.0, g, code.rate()).map_err(|e| e.to_string())?;
                let b = lower_bound(&iowef, m, g);
                worst = worst.max(((a - b) / b).abs());
            }
        }
    }
    let msg = format!("max relative difference {worst:.2e} over 450 points");
    if worst <= 1e-12 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn odd_binomial(p: f64, m: usize) -> f64 {
    let mut total = 0.0;
    let mut c = 1.0f64;
    for j in 0..=m {
        if j % 2 == 1 {
            total += c * p.powi(j as i32) * (1.0 - p).powi((m - j) as i32);
        }
        c = c * (m - j) as f64 / (j + 1) as f64;
    }
    total
}

fn c5_flip_probability() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        // Log-uniform over [1e-9, 0.5].
        let p = 0.5 * 10f64.powf(-8.7 * rng.random::<f64>());
        for m in 1..=64 {
            let a = flip_probability(p, m);
            let b = odd_binomial(p, m);
            worst = worst.max(((a - b) / b).abs());
        }
    }
    let msg = format!("max relative difference {worst:.2e} over 6400 cases");
    if worst <= 1e-12 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn sim(code: &str, m: usize, decoder: DecoderKind, frame_len: usize, seed: u64) -> SimConfig {
    let mut cfg = SimConfig::new(code, m, decoder, vec![0.0], seed);
    cfg.frame_len = frame_len;
    cfg
}

fn point(cfg: &SimConfig, g: f64) -> Result<PointResult, String> {
    run_point(cfg, g).map_err(|e| e.to_string())
}

fn c6_gad_diversity() -> Outcome {
    // Q(sqrt(8 x)) = 1e-3 with x = 10^(gamma / 10).
    let z = 3.090_232_306_167_813_5;
    let gamma = 10.0 * (z * z / 8.0f64).log10();
    debug_assert!((q_function(z) - 1e-3).abs() < 1e-15);
    let mut cfg = sim("RC[2,1]^100", 3, DecoderKind::GadPerfect, 1000, 61);
    cfg.stop.min_bit_errors = 300;
    let r = point(&cfg, gamma)?;
    let msg = format!(
        "{gamma:.3} dB: {} errors / {} bits, BER {:.3e}, CI [{:.3e}, {:.3e}]",
        r.errors, r.bits, r.ber, r.ci_low, r.ci_high
    );
    if r.errors >= 300 && r.ci_low <= 1e-3 && 1e-3 <= r.ci_high {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c7_gad_flipped() -> Outcome {
    let p_genie = 1e-3;
    let iowef = rc(2).iowef();
    let mut cfg = sim("RC[2,1]^100", 3, DecoderKind::GadFlipped { p_genie }, 1000, 71);
    cfg.stop.min_bit_errors = 2000;
    let mut parts = Vec::new();
    let mut ok = true;
    for g in [1.0, 2.0] {
        let bound = genie_bound(&iowef, 3, p_genie, g, 0.5).map_err(|e| e.to_string())?;
        let r = point(&cfg, g)?;
        let se = (bound * (1.0 - bound) / r.bits as f64).sqrt();
        let z = (r.ber - bound) / se;
        ok &= bound >= 1e-4 && z.abs() <= 3.0;
        parts.push(format!("{g} dB: sim {:.3e} bound {bound:.3e} ({z:+.2} SE)", r.ber));
    }
    let msg = parts.join("; ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Eb/N0 where a decreasing curve given by log-BER samples crosses `level`.
fn crossing(points: &[(f64, f64)], level: f64) -> Option<f64> {
    points.windows(2).find_map(|w| {
        let ((g0, b0), (g1, b1)) = (w[0], w[1]);
        if b0 >= level && level >= b1 && b0 > 0.0 && b1 > 0.0 {
            let t = (b0.ln() - level.ln()) / (b0.ln() - b1.ln());
            Some(g0 + t * (g1 - g0))
        } else {
            None
        }
    })
}

fn bound_crossing(f: impl Fn(f64) -> f64, level: f64) -> f64 {
    let (mut lo, mut hi) = (-5.0, 20.0);
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn c8_swd_waterfall() -> Outcome {
    let iowef = rc(2).iowef();
    let mut cfg = sim("RC[2,1]^1000", 2, DecoderKind::Swd, 1000, 81);
    cfg.delay = 6;
    cfg.max_iters = 18;
    cfg.stop.min_bit_errors = 300;
    cfg.stop.max_frames = Some(3);
    let mut ok = true;
    let mut parts = Vec::new();
    let mut curve = Vec::new();
    for g in [1.5, 2.0, 2.5] {
        let lb = lower_bound(&iowef, 2, g);
        let r = point(&cfg, g)?;
        let se = (lb * (1.0 - lb) / r.bits as f64).sqrt();
        let above = r.ber + 3.0 * se >= lb;
        ok &= above && (1e-4..=1e-2).contains(&lb);
        parts.push(format!("{g} dB: sim {:.3e} lb {lb:.3e}", r.ber));
        curve.push((g, r.ber));
    }
    let g_lb = bound_crossing(|g| lower_bound(&iowef, 2, g), 1e-3);
    match crossing(&curve, 1e-3) {
        Some(g_sim) => {
            ok &= (g_sim - g_lb).abs() <= 1.0;
            parts.push(format!("BER 1e-3 at {g_sim:.2} dB vs bound {g_lb:.2} dB"));
        }
        None => {
            ok = false;
            parts.push("simulated curve does not cross 1e-3".into());
        }
    }
    let msg = parts.join("; ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c9_tpd_consistency() -> Outcome {
    let iowef = rc(2).iowef();
    let mut cfg = sim("RC[2,1]^500", 8, DecoderKind::Tpd, 500, 91);
    cfg.delay = 8;
    cfg.max_iters = 18;
    // Fixed budget per point: error counts alone would stop after one
    // collapsed frame.
    cfg.stop.min_bit_errors = u64::MAX;
    cfg.stop.max_frames = Some(6);
    let mut in_range = 0;
    let mut ok = true;
    let mut parts = Vec::new();
    for g in [0.8, 0.9, 1.0] {
        let r = point(&cfg, g)?;
        let p1 = r.p1().unwrap_or(0.0);
        let p2 = r.p2_errors as f64 / r.bits as f64;
        if !(1e-4..=1e-2).contains(&p1) {
            parts.push(format!("{g} dB: p_I {p1:.2e} out of range"));
            continue;
        }
        in_range += 1;
        let pred = genie_bound(&iowef, 8, p1, g, 0.5).map_err(|e| e.to_string())?;
        let within = p2 > 0.0 && p2 <= 5.0 * pred && p2 >= pred / 5.0;
        ok &= p2 <= p1 && within;
        parts.push(format!("{g} dB: p_I {p1:.2e} p_II {p2:.2e} predicted {pred:.2e}"));
    }
    if in_range == 0 {
        ok = false;
        parts.push("no point with p_I in [1e-4, 1e-2]".into());
    }
    let msg = parts.join("; ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c10_headline() -> Outcome {
    let deps: [(&str, fn() -> Outcome); 3] = [("1", c1_table), ("2", c2_anchors), ("3", c3_genie_prediction)];
    let mut failed = Vec::new();
    for (id, f) in deps {
        if f().is_err() {
            failed.push(id);
        }
    }
    // Criterion 9 is the expensive one; its verdict is reported on its own line.
    if failed.is_empty() {
        Ok("design and prediction pipeline consistent (see criterion 9 for the simulation side)".into())
    } else {
        Err(format!("depends on failing criteria {}", failed.join(", ")))
    }
}

fn c11_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // Encoder linearity.
    for _ in 0..50 {
        let m = rng.random_range(0..5);
        let sys = BmstSystem::with_seed("SPC[4,3]^8".parse().unwrap(), m, 4, rng.random()).unwrap();
        let draw = |rng: &mut ChaCha8Rng| -> Vec<BitBlock> {
            (0..4).map(|_| BitBlock::from_bits((0..24).map(|_| rng.random::<bool>()))).collect()
        };
        let (a, b) = (draw(&mut rng), draw(&mut rng));
        let s: Vec<BitBlock> = a.iter().zip(&b).map(|(x, y)| x.xor(y)).collect();
        let (ca, cb, cs) = (
            encode_frame(&sys, &a).unwrap().coded,
            encode_frame(&sys, &b).unwrap().coded,
            encode_frame(&sys, &s).unwrap().coded,
        );
        if ca.iter().zip(&cb).zip(&cs).any(|((x, y), z)| &x.xor(y) != z) {
            return Err("encoder not linear".into());
        }
    }
    // Interleavers: bijective and reproducible.
    for _ in 0..50 {
        let (n, m, seed) = (rng.random_range(1..500), rng.random_range(0..6), rng.random());
        let set = InterleaverSet::generate(n, m, seed).unwrap();
        for i in 0..=m {
            let mut p = set.perm(i).to_vec();
            p.sort_unstable();
            if p.iter().enumerate().any(|(j, &v)| v as usize != j) {
                return Err("interleaver is not a permutation".into());
            }
        }
        if InterleaverSet::generate(n, m, seed).unwrap() != set {
            return Err("interleaver not reproducible".into());
        }
    }
    // Boxplus and SISO against enumeration.
    for _ in 0..200 {
        let k = rng.random_range(1..7);
        let n = rng.random_range(k + 1..=10);
        let rows: Vec<u64> = (0..k).map(|i| (1 << i) | ((rng.random::<u64>() << k) & ((1 << n) - 1))).collect();
        let code = ShortCode::from_generator(n, &rows).unwrap();
        let input: Vec<f64> = (0..n).map(|_| rng.random_range(-8.0..8.0)).collect();
        let (mut ext, mut app) = (vec![0.0; n], vec![0.0; k]);
        code.siso_llr(&input, &mut ext, &mut app);
        let (mut ext2, mut app2) = (vec![0.0; n], vec![0.0; k]);
        code.siso_llr_exhaustive(&input, &mut ext2, &mut app2);
        if ext.iter().zip(&ext2).chain(app.iter().zip(&app2)).any(|(a, b)| (a - b).abs() > 1e-9 * b.abs().max(1.0)) {
            return Err("SISO disagrees with enumeration".into());
        }
        let a = rng.random_range(-15.0..15.0);
        let b = rng.random_range(-15.0..15.0);
        let want = llr::from_soft_bit(llr::soft_bit(a) * llr::soft_bit(b));
        if (boxplus(a, b) - want).abs() > 1e-9 * want.abs().max(1.0) {
            return Err("boxplus disagrees with the parity rule".into());
        }
    }
    // Harness determinism and worker invariance.
    let mut cfg = sim("RC[2,1]^60", 2, DecoderKind::Tpd, 40, 111);
    cfg.delay = 4;
    cfg.stop.max_frames = Some(6);
    cfg.stop.min_bit_errors = 50;
    let r1 = point(&cfg, 1.0)?;
    let r2 = point(&cfg, 1.0)?;
    cfg.workers = 3;
    let r3 = point(&cfg, 1.0)?;
    let key = |r: &PointResult| (r.bits, r.errors, r.p1_errors, r.p2_errors);
    if key(&r1) != key(&r2) || key(&r1) != key(&r3) {
        return Err("harness counts depend on run or worker count".into());
    }
    Ok("encoder, interleaver, SISO/boxplus, harness determinism".into())
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("BMST_ACCEPT")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let criteria: [(usize, &str, fn() -> Outcome); 11] = [
        (1, "memory table", c1_table),
        (2, "RC[2,1] required Eb/N0", c2_anchors),
        (3, "genie-bound prediction at m=30", c3_genie_prediction),
        (4, "genie bound with p=0 equals lower bound", c4_bound_identity),
        (5, "flip probability closed form", c5_flip_probability),
        (6, "perfect-genie diversity equivalence", c6_gad_diversity),
        (7, "flipped-genie decoding vs genie bound", c7_gad_flipped),
        (8, "window-decoder waterfall vs lower bound", c8_swd_waterfall),
        (9, "two-phase decoding consistency", c9_tpd_consistency),
        (10, "headline result covered analytically", c10_headline),
        (11, "property suites", c11_properties),
    ];
    let mut failures = 0;
    for (id, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let t = Instant::now();
        let outcome = f();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{id:>2}] {name}: {detail} ({secs:.1} s)"),
            Err(detail) => {
                failures += 1;
                println!("FAIL [{id:>2}] {name}: {detail} ({secs:.1} s)");
            }
        }
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
