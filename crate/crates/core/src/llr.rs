//! Log-likelihood ratio arithmetic shared by the decoders.
//!
//! An LLR is `ln(P(bit = 0) / P(bit = 1))`. Every node update saturates its
//! outputs at [`LLR_MAX`].

/// Saturation magnitude for all decoder messages.
pub const LLR_MAX: f64 = 40.0;

#[inline]
pub fn clamp(l: f64) -> f64 {
    l.clamp(-LLR_MAX, LLR_MAX)
}

/// Hard decision on an LLR. Ties go to bit 0.
#[inline]
pub fn hard(l: f64) -> bool {
    l < 0.0
}

/// Exact pairwise boxplus, `2 atanh(tanh(a/2) tanh(b/2))`, in the
/// numerically stable "min plus corrections" form.
pub fn boxplus(a: f64, b: f64) -> f64 {
    let sign = if (a < 0.0) != (b < 0.0) { -1.0 } else { 1.0 };
    let m = a.abs().min(b.abs());
    let corr = (-(a + b).abs()).exp().ln_1p() - (-(a - b).abs()).exp().ln_1p();
    clamp(sign * m + corr)
}

/// `tanh(l / 2)`, the soft bit used by the XOR-constraint updates.
#[inline]
pub fn soft_bit(l: f64) -> f64 {
    // tanh(a/2) = (1 - e^-a) / (1 + e^-a); a single exp is much cheaper
    // than tanh and loses nothing that matters for message passing.
    let e = (-l.abs()).exp();
    let t = (1.0 - e) / (1.0 + e);
    if l < 0.0 {
        -t
    } else {
        t
    }
}

/// Inverse of [`soft_bit`], saturated at [`LLR_MAX`].
#[inline]
pub fn from_soft_bit(t: f64) -> f64 {
    // 2 atanh(t) = ln((1 + |t|) / (1 - |t|)), with the sign restored.
    let a = t.abs().min(1.0);
    let l = ((1.0 + a) / (1.0 - a)).ln().min(LLR_MAX);
    if t < 0.0 {
        -l
    } else {
        l
    }
}

/// Extrinsic XOR-constraint outputs for one check.
///
/// `soft` holds `tanh(l_i / 2)` for every edge; `out[i]` receives the boxplus
/// of all inputs other than `i`. Zero inputs are handled without division by
/// zero.
pub fn boxplus_exclusive(soft: &[f64], out: &mut [f64]) {
    debug_assert_eq!(soft.len(), out.len());
    let mut prod = 1.0;
    let mut zeros = 0usize;
    let mut zero_at = 0usize;
    for (i, &t) in soft.iter().enumerate() {
        if t == 0.0 {
            zeros += 1;
            zero_at = i;
        } else {
            prod *= t;
        }
    }
    match zeros {
        0 => {
            for (o, &t) in out.iter_mut().zip(soft) {
                *o = from_soft_bit(prod / t);
            }
        }
        1 => {
            out.fill(0.0);
            out[zero_at] = from_soft_bit(prod);
        }
        _ => out.fill(0.0),
    }
}

/// Binary entropy in bits of the distribution described by an LLR.
pub fn entropy(l: f64) -> f64 {
    let a = l.abs();
    if a > 700.0 {
        return 0.0;
    }
    // p = P(less likely value) = 1 / (1 + e^a)
    let e = (-a).exp();
    let p = e / (1.0 + e);
    let q = 1.0 / (1.0 + e);
    let mut h = 0.0;
    if p > 0.0 {
        h -= p * p.log2();
    }
    if q > 0.0 {
        h -= q * q.log2();
    }
    h
}

/// LLR from a probability pair `(P(0), P(1))`.
pub fn from_probs(p: [f64; 2]) -> f64 {
    clamp((p[0] / p[1]).ln())
}

/// Probability pair from an LLR.
pub fn to_probs(l: f64) -> [f64; 2] {
    let p1 = 1.0 / (1.0 + l.exp());
    [1.0 - p1, p1]
}
