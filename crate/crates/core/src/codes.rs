//! Short binary block codes and their Cartesian products.
//!
//! A [`ShortCode`] keeps its full codebook, which makes weight enumeration
//! and MAP decoding exact by brute force. Repetition and single-parity-check
//! codes additionally get closed-form SISO rules, which the tests validate
//! against the brute-force path.
//!
//! Messages are packed into integers with message bit `i` at bit `i`, and the
//! same convention is used for codewords.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bits::BitBlock;
use crate::error::{Error, Result};
use crate::llr;

/// Largest supported dimension; the codebook holds `2^K` entries.
pub const MAX_DIMENSION: usize = 24;
/// Largest supported short-code length (one codeword per machine word).
pub const MAX_LENGTH: usize = 64;
/// Probabilities are clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]` before Bayes products.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeFamily {
    /// `[N, 1]` repetition code.
    Rc,
    /// `[N, N-1]` single parity-check code.
    Spc,
    /// Any code given by a generator matrix.
    Generic,
}

impl fmt::Display for CodeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CodeFamily::Rc => "RC",
            CodeFamily::Spc => "SPC",
            CodeFamily::Generic => "GEN",
        })
    }
}

/// A binary `[N, K]` block code with its full codebook.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShortCode {
    n: usize,
    k: usize,
    family: CodeFamily,
    /// Generator rows, bit `j` of row `i` is `G[i][j]`.
    generator: Vec<u64>,
    /// `codebook[msg]` is the codeword for message `msg`.
    codebook: Vec<u64>,
}

impl ShortCode {
    /// Builds a code from its `K x N` generator matrix.
    ///
    /// The rows must be linearly independent so that all `2^K` codewords are
    /// distinct.
    pub fn from_generator(n: usize, rows: &[u64]) -> Result<Self> {
        Self::build(n, rows.to_vec(), CodeFamily::Generic)
    }

    fn build(n: usize, generator: Vec<u64>, family: CodeFamily) -> Result<Self> {
        let k = generator.len();
        if n == 0 || n > MAX_LENGTH {
            return Err(Error::InvalidCode(format!(
                "length N = {n} outside 1..={MAX_LENGTH}"
            )));
        }
        if k == 0 || k > n || k > MAX_DIMENSION {
            return Err(Error::InvalidCode(format!(
                "dimension K = {k} must satisfy 1 <= K <= min(N, {MAX_DIMENSION})"
            )));
        }
        let row_mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        if generator.iter().any(|&r| r & !row_mask != 0) {
            return Err(Error::InvalidCode("generator row wider than N".into()));
        }
        // Gray-code walk: one XOR per codeword.
        let size = 1usize << k;
        let mut codebook = vec![0u64; size];
        for msg in 1..size {
            let low = msg.trailing_zeros() as usize;
            codebook[msg] = codebook[msg & (msg - 1)] ^ generator[low];
        }
        let mut sorted = codebook.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidCode(
                "generator rows are linearly dependent".into(),
            ));
        }
        Ok(ShortCode {
            n,
            k,
            family,
            generator,
            codebook,
        })
    }

    /// The `[N, 1]` repetition code.
    pub fn repetition(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidCode("repetition code needs N >= 1".into()));
        }
        if n > MAX_LENGTH {
            return Err(Error::InvalidCode(format!(
                "length N = {n} outside 1..={MAX_LENGTH}"
            )));
        }
        let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        Self::build(n, vec![all], CodeFamily::Rc)
    }

    /// The systematic `[N, N-1]` single parity-check code; the parity bit is
    /// the last position.
    pub fn single_parity(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidCode("single parity-check code needs N >= 2".into()));
        }
        if n > MAX_LENGTH || n - 1 > MAX_DIMENSION {
            return Err(Error::InvalidCode(format!(
                "SPC length N = {n} exceeds the enumeration limit"
            )));
        }
        let parity = 1u64 << (n - 1);
        let rows = (0..n - 1).map(|i| (1u64 << i) | parity).collect();
        Self::build(n, rows, CodeFamily::Spc)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn family(&self) -> CodeFamily {
        self.family
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    pub fn generator(&self) -> &[u64] {
        &self.generator
    }

    /// Codewords indexed by message value.
    pub fn codebook(&self) -> &[u64] {
        &self.codebook
    }

    /// True when message bit `i` appears verbatim at codeword position `i`.
    pub fn is_systematic(&self) -> bool {
        self.generator
            .iter()
            .enumerate()
            .all(|(i, &row)| (0..self.k).all(|r| ((row >> r) & 1 == 1) == (r == i)))
    }

    #[inline]
    pub fn encode_word(&self, msg: u64) -> u64 {
        self.codebook[msg as usize]
    }

    pub fn iowef(&self) -> Iowef {
        compute_iowef(self)
    }

    /// Extrinsic and a-posteriori LLRs for one codeword.
    ///
    /// `input` holds the `N` prior LLRs on the code bits. On return `ext[j]`
    /// is the extrinsic LLR of code bit `j` (its own prior excluded) and
    /// `msg_app[i]` the a-posteriori LLR of message bit `i`. Results are
    /// saturated at [`llr::LLR_MAX`].
    pub fn siso_llr(&self, input: &[f64], ext: &mut [f64], msg_app: &mut [f64]) {
        match self.family {
            CodeFamily::Rc => {
                let total: f64 = input.iter().sum();
                for (e, &l) in ext.iter_mut().zip(input) {
                    *e = llr::clamp(total - l);
                }
                msg_app[0] = llr::clamp(total);
            }
            CodeFamily::Spc => {
                let mut soft = [0.0f64; MAX_LENGTH];
                for (s, &l) in soft.iter_mut().zip(input) {
                    *s = llr::soft_bit(l);
                }
                llr::boxplus_exclusive(&soft[..self.n], ext);
                for i in 0..self.k {
                    msg_app[i] = llr::clamp(input[i] + ext[i]);
                }
            }
            CodeFamily::Generic => self.siso_llr_exhaustive(input, ext, msg_app),
        }
    }

    /// Brute-force version of [`ShortCode::siso_llr`] over the full codebook,
    /// using log-sum-exp per bit hypothesis.
    pub fn siso_llr_exhaustive(&self, input: &[f64], ext: &mut [f64], msg_app: &mut [f64]) {
        let n = self.n;
        let k = self.k;
        // Log-metric of a codeword: sum of -l_j over its one-positions.
        let metrics: Vec<f64> = self
            .codebook
            .iter()
            .map(|&cw| {
                (0..n)
                    .filter(|j| (cw >> j) & 1 == 1)
                    .map(|j| -input[j])
                    .sum()
            })
            .collect();
        for j in 0..n {
            let mut acc = [LogSum::new(), LogSum::new()];
            for (&cw, &m) in self.codebook.iter().zip(&metrics) {
                let bit = ((cw >> j) & 1) as usize;
                // Remove bit j's own contribution.
                let own = if bit == 1 { -input[j] } else { 0.0 };
                acc[bit].add(m - own);
            }
            ext[j] = llr::clamp(acc[0].value() - acc[1].value());
        }
        for i in 0..k {
            let mut acc = [LogSum::new(), LogSum::new()];
            for (msg, &m) in metrics.iter().enumerate() {
                acc[(msg >> i) & 1].add(m);
            }
            msg_app[i] = llr::clamp(acc[0].value() - acc[1].value());
        }
    }
}

impl fmt::Display for ShortCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{},{}]", self.family, self.n, self.k)
    }
}

/// Running log-sum-exp accumulator.
#[derive(Clone, Copy)]
struct LogSum {
    max: f64,
    sum: f64,
}

impl LogSum {
    fn new() -> Self {
        LogSum {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    fn add(&mut self, x: f64) {
        if x > self.max {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.sum += (x - self.max).exp();
        }
    }

    fn value(&self) -> f64 {
        self.max + self.sum.ln()
    }
}

/// Input-output weight enumerator: `A[g][h]` counts codewords of output
/// weight `h` produced by messages of input weight `g`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Iowef {
    k: usize,
    n: usize,
    coeffs: Vec<Vec<u64>>,
}

impl Iowef {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coefficient(&self, g: usize, h: usize) -> u64 {
        self.coeffs
            .get(g)
            .and_then(|row| row.get(h))
            .copied()
            .unwrap_or(0)
    }

    /// Non-zero coefficients as `(g, h, A_{g,h})`.
    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.coeffs.iter().enumerate().flat_map(|(g, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, &a)| a != 0)
                .map(move |(h, &a)| (g, h, a))
        })
    }

    pub fn total(&self) -> u64 {
        self.coeffs.iter().flatten().sum()
    }

    /// Builds an enumerator from explicit `(g, h, count)` terms.
    pub fn from_terms(k: usize, n: usize, terms: &[(usize, usize, u64)]) -> Result<Self> {
        let mut coeffs = vec![vec![0u64; n + 1]; k + 1];
        for &(g, h, a) in terms {
            if g > k || h > n {
                return Err(Error::InvalidParameter(format!(
                    "IOWEF term ({g}, {h}) outside [0, {k}] x [0, {n}]"
                )));
            }
            coeffs[g][h] += a;
        }
        Ok(Iowef { k, n, coeffs })
    }
}

impl fmt::Display for Iowef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (g, h, a) in self.terms() {
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            let coef = if a == 1 && (g, h) != (0, 0) {
                String::new()
            } else {
                a.to_string()
            };
            let x = match g {
                0 => String::new(),
                1 => "X".into(),
                _ => format!("X^{g}"),
            };
            let y = match h {
                0 => String::new(),
                1 => "Y".into(),
                _ => format!("Y^{h}"),
            };
            write!(f, "{coef}{x}{y}")?;
        }
        Ok(())
    }
}

/// Enumerates the codebook into input-output weight counts.
pub fn compute_iowef(code: &ShortCode) -> Iowef {
    let mut coeffs = vec![vec![0u64; code.n + 1]; code.k + 1];
    for (msg, &cw) in code.codebook.iter().enumerate() {
        coeffs[msg.count_ones() as usize][cw.count_ones() as usize] += 1;
    }
    Iowef {
        k: code.k,
        n: code.n,
        coeffs,
    }
}

/// Posterior (or extrinsic) probability pairs `(P(0), P(1))`.
#[derive(Clone, Debug, PartialEq)]
pub struct SisoOutput {
    pub code_bits: Vec<[f64; 2]>,
    /// Message bits carry no prior of their own, so these are always full
    /// posteriors.
    pub message_bits: Vec<[f64; 2]>,
}

/// Exact symbol-wise MAP decoding by Bayes' rule over the codebook.
///
/// With `extrinsic` set, the prior of code bit `j` is divided out of its
/// output before normalisation.
pub fn siso_map_decode(code: &ShortCode, priors: &[[f64; 2]], extrinsic: bool) -> Result<SisoOutput> {
    if priors.len() != code.n {
        return Err(Error::LengthMismatch {
            expected: code.n,
            actual: priors.len(),
        });
    }
    let mut clamped = Vec::with_capacity(code.n);
    for (j, p) in priors.iter().enumerate() {
        if !(p[0].is_finite() && p[1].is_finite()) || p[0] < 0.0 || p[1] < 0.0 {
            return Err(Error::InvalidProbability(format!(
                "prior {j} = {p:?} is not a probability pair"
            )));
        }
        if ((p[0] + p[1]) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidProbability(format!(
                "prior {j} = {p:?} does not sum to 1"
            )));
        }
        let p0 = p[0].clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
        clamped.push([p0, 1.0 - p0]);
    }

    let weights: Vec<f64> = code
        .codebook
        .iter()
        .map(|&cw| {
            clamped
                .iter()
                .enumerate()
                .map(|(j, p)| p[((cw >> j) & 1) as usize])
                .product()
        })
        .collect();

    let mut code_bits = Vec::with_capacity(code.n);
    for j in 0..code.n {
        let mut acc = [0.0f64; 2];
        for (&cw, &w) in code.codebook.iter().zip(&weights) {
            acc[((cw >> j) & 1) as usize] += w;
        }
        if extrinsic {
            acc[0] /= clamped[j][0];
            acc[1] /= clamped[j][1];
        }
        let z = acc[0] + acc[1];
        code_bits.push([acc[0] / z, acc[1] / z]);
    }

    let mut message_bits = Vec::with_capacity(code.k);
    for i in 0..code.k {
        let mut acc = [0.0f64; 2];
        for (msg, &w) in weights.iter().enumerate() {
            acc[(msg >> i) & 1] += w;
        }
        let z = acc[0] + acc[1];
        message_bits.push([acc[0] / z, acc[1] / z]);
    }
    Ok(SisoOutput {
        code_bits,
        message_bits,
    })
}

/// `B` independent copies of a short code, `C[N,K]^B`.
///
/// Short block `b` occupies message bits `b*K..(b+1)*K` and code bits
/// `b*N..(b+1)*N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CartesianCode {
    short: Arc<ShortCode>,
    copies: usize,
}

impl CartesianCode {
    pub fn new(short: ShortCode, copies: usize) -> Result<Self> {
        if copies == 0 {
            return Err(Error::InvalidCode("replication factor B must be >= 1".into()));
        }
        Ok(CartesianCode {
            short: Arc::new(short),
            copies,
        })
    }

    pub fn short(&self) -> &ShortCode {
        &self.short
    }

    /// Replication factor `B`.
    pub fn copies(&self) -> usize {
        self.copies
    }

    /// Total length `n = N * B`.
    pub fn n(&self) -> usize {
        self.short.n * self.copies
    }

    /// Total dimension `k = K * B`.
    pub fn k(&self) -> usize {
        self.short.k * self.copies
    }

    pub fn rate(&self) -> f64 {
        self.short.rate()
    }

    pub fn encode(&self, message: &BitBlock) -> Result<BitBlock> {
        if message.len() != self.k() {
            return Err(Error::LengthMismatch {
                expected: self.k(),
                actual: message.len(),
            });
        }
        let (n, k) = (self.short.n, self.short.k);
        let mut out = BitBlock::zeros(self.n());
        for b in 0..self.copies {
            let msg = message.read_word(b * k, k);
            out.write_word(b * n, n, self.short.encode_word(msg));
        }
        Ok(out)
    }

    /// Blockwise [`ShortCode::siso_llr`] over all `B` copies.
    pub fn siso_llr(&self, input: &[f64], ext: &mut [f64], msg_app: &mut [f64]) {
        let (n, k) = (self.short.n, self.short.k);
        debug_assert_eq!(input.len(), self.n());
        for ((inp, e), m) in input
            .chunks_exact(n)
            .zip(ext.chunks_exact_mut(n))
            .zip(msg_app.chunks_exact_mut(k))
        {
            self.short.siso_llr(inp, e, m);
        }
    }
}

impl fmt::Display for CartesianCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}^{}", self.short, self.copies)
    }
}

/// Parses `"RC[N,1]^B"` or `"SPC[N,N-1]^B"`, case-insensitively. The `^B`
/// suffix is optional and defaults to `B = 1`.
impl FromStr for CartesianCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::ParseSpec(s.to_string());
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let upper = compact.to_ascii_uppercase();
        let open = upper.find('[').ok_or_else(bad)?;
        let close = upper.find(']').ok_or_else(bad)?;
        if close < open {
            return Err(bad());
        }
        let family = &upper[..open];
        let (n_str, k_str) = upper[open + 1..close].split_once(',').ok_or_else(bad)?;
        let n: usize = n_str.parse().map_err(|_| bad())?;
        let k: usize = k_str.parse().map_err(|_| bad())?;
        let rest = &upper[close + 1..];
        let copies: usize = if rest.is_empty() {
            1
        } else {
            rest.strip_prefix('^')
                .ok_or_else(bad)?
                .parse()
                .map_err(|_| bad())?
        };
        let short = match family {
            "RC" => {
                if k != 1 {
                    return Err(Error::InvalidCode(format!("repetition code must have K = 1, got [{n},{k}]")));
                }
                ShortCode::repetition(n)?
            }
            "SPC" => {
                if n == 0 || k + 1 != n {
                    return Err(Error::InvalidCode(format!("SPC code must have K = N - 1, got [{n},{k}]")));
                }
                ShortCode::single_parity(n)?
            }
            _ => return Err(bad()),
        };
        CartesianCode::new(short, copies)
    }
}
