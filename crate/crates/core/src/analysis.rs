//! Closed-form performance machinery.
//!
//! Everything here is a pure function of the short code's weight enumerator
//! and the channel parameters. Tail probabilities are carried in the log
//! domain so that bounds far below `1e-300` keep their relative precision;
//! the `ln_*` variants expose those values directly.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::channel::ebn0_to_sigma;
use crate::codes::{Iowef, ShortCode};
use crate::error::{Error, Result};

/// Width of the final bisection bracket, in dB.
pub const BISECTION_TOL_DB: f64 = 1e-3;
/// Successive Gauss-Hermite capacity estimates must agree to this many bits.
pub const CAPACITY_TOL_BITS: f64 = 1e-6;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Gaussian tail probability `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    if x < 20.0 {
        0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
    } else {
        ln_q(x).exp()
    }
}

/// `ln Q(x)`, accurate far beyond the range where `Q(x)` is representable.
pub fn ln_q(x: f64) -> f64 {
    if x < 0.0 {
        (-q_function(-x)).ln_1p()
    } else if x < 20.0 {
        q_function(x).ln()
    } else {
        -0.5 * x * x - LN_SQRT_2PI + mills_ratio(x).ln()
    }
}

/// `Q(x) / phi(x)` by the Laplace continued fraction, evaluated bottom-up.
/// Converges quickly for the `x >= 20` range it is used on.
fn mills_ratio(x: f64) -> f64 {
    let mut tail = 0.0;
    for k in (1..=60).rev() {
        tail = k as f64 / (x + tail);
    }
    1.0 / (x + tail)
}

/// `ln(sum(exp(terms)))`, `-inf` for an empty input.
fn log_sum_exp<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let terms: Vec<f64> = terms.into_iter().collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `(ln(g/K) + ln(A_{g,h}), h)` for every term with `g >= 1`, `h >= 1`.
fn weighted_terms(iowef: &Iowef) -> impl Iterator<Item = (f64, usize)> + '_ {
    let k = iowef.k() as f64;
    iowef
        .terms()
        .filter(|&(g, h, _)| g >= 1 && h >= 1)
        .map(move |(g, h, a)| ((g as f64 / k).ln() + (a as f64).ln(), h))
}

/// `ln` of [`union_bound`].
pub fn ln_union_bound(iowef: &Iowef, ebn0_db: f64) -> f64 {
    let r = iowef.k() as f64 / iowef.n() as f64;
    let snr = 10f64.powf(ebn0_db / 10.0);
    log_sum_exp(weighted_terms(iowef).map(|(lw, h)| lw + ln_q((2.0 * h as f64 * r * snr).sqrt())))
}

/// Union bound on the bit error rate of the short code (and hence of its
/// Cartesian products) under ML decoding at `ebn0_db`.
pub fn union_bound(iowef: &Iowef, ebn0_db: f64) -> f64 {
    ln_union_bound(iowef, ebn0_db).exp()
}

/// Eb/N0 at which [`union_bound`] equals `p_target`, found by doubling out a
/// bracket and bisecting it to [`BISECTION_TOL_DB`].
pub fn find_gamma_target(iowef: &Iowef, p_target: f64) -> Result<f64> {
    if !(p_target > 0.0 && p_target < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "target BER {p_target} outside (0, 0.5)"
        )));
    }
    let ln_p = p_target.ln();
    let excess = |g: f64| ln_union_bound(iowef, g) - ln_p;
    let limit = 400.0;

    let mut lo = 0.0;
    let mut step = 1.0;
    while excess(lo) <= 0.0 {
        lo -= step;
        step *= 2.0;
        if lo < -limit {
            return Err(Error::Unbracketable(p_target));
        }
    }
    let mut hi = 0.0;
    step = 1.0;
    while excess(hi) >= 0.0 {
        hi += step;
        step *= 2.0;
        if hi > limit {
            return Err(Error::Unbracketable(p_target));
        }
    }
    while hi - lo > BISECTION_TOL_DB {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Nodes and weights of `n`-point Gauss-Hermite quadrature for the weight
/// `exp(-x^2)`, by Newton iteration on the normalised Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5; // pi^(-1/4)
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 3e-14 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `log2(1 + exp(-a))` without overflow.
fn log2_1p_exp_neg(a: f64) -> f64 {
    let nats = if a > 0.0 {
        (-a).exp().ln_1p()
    } else {
        -a + a.exp().ln_1p()
    };
    nats / std::f64::consts::LN_2
}

fn capacity_with_nodes(sigma: f64, nodes: &[f64], weights: &[f64]) -> f64 {
    let s2 = sigma * sigma;
    let mut acc = 0.0;
    for (&x, &w) in nodes.iter().zip(weights) {
        let y = 1.0 + std::f64::consts::SQRT_2 * sigma * x;
        acc += w * log2_1p_exp_neg(2.0 * y / s2);
    }
    1.0 - acc / std::f64::consts::PI.sqrt()
}

/// Capacity in bits per use of the binary-input AWGN channel with unit-energy
/// BPSK and noise deviation `sigma`.
///
/// The node count starts at 64 and grows until two successive estimates
/// agree to [`CAPACITY_TOL_BITS`].
pub fn biawgn_capacity(sigma: f64) -> f64 {
    let mut n = 64;
    let (x, w) = gauss_hermite(n);
    let mut prev = capacity_with_nodes(sigma, &x, &w);
    loop {
        n += 16;
        let (x, w) = gauss_hermite(n);
        let cur = capacity_with_nodes(sigma, &x, &w);
        if (cur - prev).abs() < CAPACITY_TOL_BITS || n >= 256 {
            return cur;
        }
        prev = cur;
    }
}

/// Eb/N0 (dB) at which the binary-input AWGN capacity equals `rate`.
pub fn shannon_limit_biawgn(rate: f64) -> Result<f64> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::InvalidParameter(format!("rate {rate} outside (0, 1)")));
    }
    let excess = |g: f64| -> Result<f64> { Ok(biawgn_capacity(ebn0_to_sigma(g, rate)?) - rate) };
    // Below -1.6 dB no rate is achievable.
    let mut lo = -1.6;
    let mut hi = 1.0;
    let mut step = 1.0;
    while excess(hi)? < 0.0 {
        lo = hi;
        hi += step;
        step *= 2.0;
        if hi > 100.0 {
            return Err(Error::InvalidParameter(format!("rate {rate} too close to 1")));
        }
    }
    while hi - lo > BISECTION_TOL_DB {
        let mid = 0.5 * (lo + hi);
        if excess(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Outcome of the memory design rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub code: String,
    pub rate: f64,
    pub p_target: f64,
    /// Eb/N0 (dB) the basic code needs to reach `p_target`.
    pub gamma_target: f64,
    /// Shannon limit (dB) at `rate`.
    pub gamma_lim: f64,
    pub gap_db: f64,
    pub m: usize,
}

/// Smallest `m` with `10 log10(m + 1) >= gap_db`.
pub fn memory_for_gap(gap_db: f64) -> usize {
    let x = 10f64.powf(gap_db / 10.0) - 1.0;
    if x <= 0.0 {
        0
    } else {
        (x - 1e-12).ceil() as usize
    }
}

/// Encoding memory needed for the basic code to close its gap to the Shannon
/// limit at `p_target`.
pub fn design_memory(rate: f64, p_target: f64, basic: &ShortCode) -> Result<DesignSpec> {
    if (basic.rate() - rate).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "basic code {basic} has rate {}, not the requested {rate}",
            basic.rate()
        )));
    }
    let gamma_target = find_gamma_target(&basic.iowef(), p_target)?;
    let gamma_lim = shannon_limit_biawgn(rate)?;
    let gap_db = gamma_target - gamma_lim;
    Ok(DesignSpec {
        code: basic.to_string(),
        rate,
        p_target,
        gamma_target,
        gamma_lim,
        gap_db,
        m: memory_for_gap(gap_db),
    })
}

/// Genie-aided lower bound on the coupled system: the basic-code bound moved
/// left by `10 log10(m + 1)` dB.
pub fn lower_bound(iowef: &Iowef, m: usize, ebn0_db: f64) -> f64 {
    ln_lower_bound(iowef, m, ebn0_db).exp()
}

pub fn ln_lower_bound(iowef: &Iowef, m: usize, ebn0_db: f64) -> f64 {
    ln_union_bound(iowef, ebn0_db + 10.0 * ((m + 1) as f64).log10())
}

/// Probability that the XOR of `m` independently flipped bits is flipped,
/// `(1 - (1 - 2p)^m) / 2`.
pub fn flip_probability(p_genie: f64, m: usize) -> f64 {
    assert!(
        (0.0..=0.5).contains(&p_genie),
        "p_genie = {p_genie} outside [0, 0.5]"
    );
    if m == 0 || p_genie == 0.0 {
        return 0.0;
    }
    -0.5 * (m as f64 * (-2.0 * p_genie).ln_1p()).exp_m1()
}

/// `ln` of [`pep`].
pub fn ln_pep(h: usize, m: usize, p_flip: f64, sigma: f64) -> f64 {
    let looks = (m + 1) * h;
    let mf = looks as f64;
    let scale = 1.0 / (mf.sqrt() * sigma);
    if p_flip == 0.0 {
        return ln_q(mf * scale);
    }
    let lp = p_flip.ln();
    let lq = (-p_flip).ln_1p();
    log_sum_exp((0..=looks).map(|r| {
        let rf = r as f64;
        ln_binomial(looks as u64, r as u64) + rf * lp + (mf - rf) * lq + ln_q((mf - 2.0 * rf) * scale)
    }))
}

/// Pairwise error probability against a weight-`h` competitor when every
/// one of the `(m + 1) h` observations is independently sign-flipped with
/// probability `p_flip`.
pub fn pep(h: usize, m: usize, p_flip: f64, sigma: f64) -> f64 {
    assert!(h >= 1, "pairwise error needs a non-zero competitor");
    assert!(sigma > 0.0);
    ln_pep(h, m, p_flip, sigma).exp()
}

/// `ln` of [`genie_bound`].
pub fn ln_genie_bound(iowef: &Iowef, m: usize, p_genie: f64, ebn0_db: f64, rate: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&p_genie) {
        return Err(Error::InvalidParameter(format!("p_genie {p_genie} outside [0, 0.5]")));
    }
    let sigma = ebn0_to_sigma(ebn0_db, rate)?;
    let pf = flip_probability(p_genie, m);
    Ok(log_sum_exp(
        weighted_terms(iowef).map(|(lw, h)| lw + ln_pep(h, m, pf, sigma)),
    ))
}

/// Union bound for genie-aided decoding with side information flipped at
/// rate `p_genie`. `rate` is the rate of the basic code.
pub fn genie_bound(iowef: &Iowef, m: usize, p_genie: f64, ebn0_db: f64, rate: f64) -> Result<f64> {
    Ok(ln_genie_bound(iowef, m, p_genie, ebn0_db, rate)?.exp())
}

/// Noise-free limit of [`genie_bound`]: an error needs more than half of the
/// `(m + 1) h` looks flipped, with exact ties counted as one half.
pub fn genie_floor(iowef: &Iowef, m: usize, p_genie: f64) -> f64 {
    let pf = flip_probability(p_genie, m);
    let k = iowef.k() as f64;
    iowef
        .terms()
        .filter(|&(g, h, _)| g >= 1 && h >= 1)
        .map(|(g, h, a)| {
            let looks = ((m + 1) * h) as u64;
            let mut p = 0.0;
            for r in 0..=looks {
                let term = (ln_binomial(looks, r)
                    + r as f64 * pf.ln()
                    + (looks - r) as f64 * (-pf).ln_1p())
                .exp();
                if 2 * r > looks {
                    p += term;
                } else if 2 * r == looks {
                    p += 0.5 * term;
                }
            }
            g as f64 / k * a as f64 * p
        })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BoundKind {
    /// Union bound of the basic code alone.
    Basic,
    /// Basic-code bound shifted by the full coupling gain.
    Lower,
    /// Genie-aided bound with flipped side information.
    Genie { p_genie: f64 },
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundKind::Basic => "basic",
            BoundKind::Lower => "lower",
            BoundKind::Genie { .. } => "genie",
        })
    }
}

/// A bound evaluated on an Eb/N0 grid.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundCurve {
    pub kind: BoundKind,
    pub m: usize,
    pub code: String,
    pub points: Vec<(f64, f64)>,
}

impl BoundCurve {
    pub fn evaluate(code: &ShortCode, kind: BoundKind, m: usize, grid: &[f64]) -> Result<Self> {
        let iowef = code.iowef();
        let points = grid
            .iter()
            .map(|&g| {
                let ber = match kind {
                    BoundKind::Basic => union_bound(&iowef, g),
                    BoundKind::Lower => lower_bound(&iowef, m, g),
                    BoundKind::Genie { p_genie } => genie_bound(&iowef, m, p_genie, g, code.rate())?,
                };
                Ok((g, ber))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BoundCurve {
            kind,
            m,
            code: code.to_string(),
            points,
        })
    }
}

pub const BOUND_CSV_HEADER: [&str; 6] = ["ebn0_db", "ber", "kind", "p_genie", "m", "code"];

/// Writes curves as CSV, one row per grid point. `p_genie` is left empty for
/// curves that do not use it.
pub fn write_bound_csv<W: Write>(out: W, curves: &[BoundCurve]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BOUND_CSV_HEADER)?;
    for c in curves {
        let pg = match c.kind {
            BoundKind::Genie { p_genie } => format!("{p_genie:e}"),
            _ => String::new(),
        };
        for &(g, ber) in &c.points {
            w.write_record([
                format!("{g}"),
                format!("{ber:e}"),
                c.kind.to_string(),
                pg.clone(),
                c.m.to_string(),
                c.code.clone(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Eb/N0 grid `start, start + step, ...` up to `end` inclusive (with a small
/// tolerance for accumulated rounding).
pub fn grid(start: f64, step: f64, end: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || end < start {
        return Err(Error::InvalidParameter(format!(
            "empty grid {start}:{step}:{end}"
        )));
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| {
            let g = start + i as f64 * step;
            // Trim binary noise, e.g. 0.30000000000000004.
            (g * 1e9).round() / 1e9
        })
        .collect())
}
