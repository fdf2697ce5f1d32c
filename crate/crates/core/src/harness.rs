//! Monte Carlo BER experiments.
//!
//! Frame `f` of an Eb/N0 point draws everything (messages, noise, genie
//! flips) from ChaCha8 stream `f` of a key derived from the master seed and
//! the point, so counts do not depend on how frames are scheduled. Frames are
//! simulated in parallel batches and merged strictly in frame order; frames
//! past the one that satisfied a stop rule are discarded.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{genie_bound, lower_bound};
use crate::bits::BitBlock;
use crate::channel::{channel_llr, ebn0_to_sigma, transmit, NOISE_GENERATOR};
use crate::codes::CartesianCode;
use crate::encoder::{bpsk_map, encode_frame, BmstSystem};
use crate::error::{Error, Result};
use crate::swd::{decode_frame_swd, SwdConfig, DEFAULT_STALL_PATIENCE, DEFAULT_STOP_THRESHOLD};
use crate::tpd::{count_w_errors, decode_frame_gad, decode_frame_tpd, flip_bits, true_branch_words, SideSource, TpdConfig};

pub const RESULTS_CSV_HEADER: [&str; 13] = [
    "ebn0_db",
    "decoder",
    "bits",
    "errors",
    "ber",
    "ci_low",
    "ci_high",
    "p1_bits",
    "p1_errors",
    "p2_errors",
    "mean_iters",
    "seed",
    "truncated",
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecoderKind {
    Swd,
    Tpd,
    GadPerfect,
    GadFlipped { p_genie: f64 },
}

impl DecoderKind {
    pub fn label(&self) -> String {
        match self {
            DecoderKind::Swd => "swd".into(),
            DecoderKind::Tpd => "tpd".into(),
            DecoderKind::GadPerfect => "gad_perfect".into(),
            DecoderKind::GadFlipped { p_genie } => format!("gad_flipped({p_genie})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StopRules {
    /// Stop once this many output bit errors are collected.
    pub min_bit_errors: u64,
    /// Stop after this many information bits.
    pub max_bits: u64,
    pub max_frames: Option<u64>,
    /// Wall-clock cap per point; hitting it marks the point truncated.
    pub max_seconds: Option<f64>,
}

impl Default for StopRules {
    fn default() -> Self {
        StopRules {
            min_bit_errors: 100,
            max_bits: 100_000_000,
            max_frames: None,
            max_seconds: None,
        }
    }
}

/// Tuning of the window decoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwdOptions {
    pub stop_threshold: f64,
    pub stall_patience: usize,
    pub warm_start: bool,
}

impl Default for SwdOptions {
    fn default() -> Self {
        SwdOptions {
            stop_threshold: DEFAULT_STOP_THRESHOLD,
            stall_patience: DEFAULT_STALL_PATIENCE,
            warm_start: true,
        }
    }
}

fn default_frame_len() -> usize {
    1000
}

fn default_max_iters() -> usize {
    18
}

fn default_workers() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Basic code, e.g. `RC[2,1]^1000`.
    pub code: String,
    pub m: usize,
    #[serde(default = "default_frame_len")]
    pub frame_len: usize,
    /// Decoding delay; only used by the window decoders.
    #[serde(default)]
    pub delay: usize,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    pub decoder: DecoderKind,
    pub ebn0_db: Vec<f64>,
    #[serde(default)]
    pub stop: StopRules,
    /// Master seed; also seeds the interleavers.
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub swd: SwdOptions,
    /// Replaces the noise level derived from Eb/N0 (testing aid).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_override: Option<f64>,
}

impl SimConfig {
    pub fn new(code: &str, m: usize, decoder: DecoderKind, ebn0_db: Vec<f64>, seed: u64) -> Self {
        SimConfig {
            code: code.to_string(),
            m,
            frame_len: default_frame_len(),
            delay: 3 * m,
            max_iters: default_max_iters(),
            decoder,
            ebn0_db,
            stop: StopRules::default(),
            seed,
            workers: 1,
            swd: SwdOptions::default(),
            sigma_override: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        self.code.parse::<CartesianCode>()?;
        if self.frame_len == 0 {
            return bad("frame_len must be at least 1".into());
        }
        if self.ebn0_db.is_empty() {
            return bad("the Eb/N0 grid is empty".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if matches!(self.decoder, DecoderKind::Tpd) && self.delay < self.m {
            return bad(format!("tpd needs delay >= m (delay {}, m {})", self.delay, self.m));
        }
        if let DecoderKind::GadFlipped { p_genie } = self.decoder {
            if !(0.0..=0.5).contains(&p_genie) {
                return bad(format!("p_genie {p_genie} outside [0, 0.5]"));
            }
        }
        if let Some(s) = self.sigma_override {
            if !(s > 0.0) {
                return bad(format!("sigma_override {s} must be positive"));
            }
        }
        Ok(())
    }

    pub fn system(&self) -> Result<BmstSystem> {
        BmstSystem::with_seed(self.code.parse()?, self.m, self.frame_len, self.seed)
    }

    fn swd_config(&self) -> SwdConfig {
        SwdConfig {
            delay: self.delay,
            max_iters: self.max_iters,
            early_stop: true,
            stop_threshold: self.swd.stop_threshold,
            stall_patience: self.swd.stall_patience,
            warm_start: self.swd.warm_start,
        }
    }

    /// SHA-256 over the canonical JSON of every field that affects counts
    /// (everything but `workers`).
    pub fn hash(&self) -> String {
        let mut view = serde_json::to_value(self).expect("config serialises");
        if let Some(obj) = view.as_object_mut() {
            obj.remove("workers");
        }
        hex::encode(Sha256::digest(view.to_string().as_bytes()))
    }
}

/// One row of a results file plus bookkeeping that is not persisted there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub ebn0_db: f64,
    pub decoder: String,
    pub bits: u64,
    /// Output bit errors: window decisions for `swd`, phase II for `tpd`.
    pub errors: u64,
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p1_bits: u64,
    pub p1_errors: u64,
    pub p2_errors: u64,
    pub mean_iters: f64,
    pub seed: u64,
    pub truncated: bool,
    #[serde(skip)]
    pub frames: u64,
    /// Phase-I message errors of a two-phase run.
    #[serde(skip)]
    pub swd_errors: u64,
    /// Genie-bound prediction for phase II at the measured phase-I rate.
    #[serde(skip)]
    pub predicted_p2: Option<f64>,
    #[serde(skip)]
    pub elapsed_s: f64,
}

impl PointResult {
    pub fn p1(&self) -> Option<f64> {
        (self.p1_bits > 0).then(|| self.p1_errors as f64 / self.p1_bits as f64)
    }

    pub fn throughput(&self) -> f64 {
        if self.elapsed_s > 0.0 {
            self.bits as f64 / self.elapsed_s
        } else {
            0.0
        }
    }
}

/// Everything a sweep produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub config: SimConfig,
    pub config_hash: String,
    pub noise_generator: String,
    pub created_unix: u64,
    pub points: Vec<PointResult>,
}

/// `P(Bin(n, p) <= x)` by summing the pmf in the log domain.
fn binomial_cdf(x: u64, n: u64, p: f64) -> f64 {
    if x >= n || p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    let lq = (-p).ln_1p();
    let ratio = p.ln() - lq;
    let mut term = n as f64 * lq;
    let mut max = term;
    let mut sum = 1.0;
    for r in 0..x {
        term += ((n - r) as f64 / (r + 1) as f64).ln() + ratio;
        if term > max {
            sum = sum * (max - term).exp() + 1.0;
            max = term;
        } else {
            sum += (term - max).exp();
        }
    }
    (max + sum.ln()).exp().min(1.0)
}

/// Root of a decreasing function of `p` on `[0, 1]`.
fn bisect_p(f: impl Fn(f64) -> f64, target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Exact (Clopper-Pearson) two-sided interval for `errors` successes in
/// `bits` trials at confidence `1 - alpha`.
pub fn clopper_pearson(errors: u64, bits: u64, alpha: f64) -> (f64, f64) {
    if bits == 0 {
        return (0.0, 1.0);
    }
    let half = alpha / 2.0;
    let lo = if errors == 0 {
        0.0
    } else {
        // P(X >= errors) = half, i.e. P(X <= errors - 1) = 1 - half.
        bisect_p(|p| binomial_cdf(errors - 1, bits, p), 1.0 - half)
    };
    let hi = if errors >= bits {
        1.0
    } else {
        bisect_p(|p| binomial_cdf(errors, bits, p), half)
    };
    (lo, hi)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// RNG for frame `frame` of the point at `ebn0_db`.
pub fn frame_rng(master_seed: u64, ebn0_db: f64, frame: u64) -> ChaCha8Rng {
    let key = splitmix64(master_seed ^ splitmix64(ebn0_db.to_bits()));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(frame);
    rng
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct FrameCounts {
    bits: u64,
    errors: u64,
    swd_errors: u64,
    p1_bits: u64,
    p1_errors: u64,
    p2_errors: u64,
    iterations: u64,
    layers: u64,
}

fn u_errors(a: &[BitBlock], b: &[BitBlock]) -> u64 {
    a.iter().zip(b).map(|(x, y)| x.distance(y) as u64).sum()
}

fn simulate_frame(cfg: &SimConfig, sys: &BmstSystem, sigma: f64, ebn0_db: f64, frame: u64) -> Result<FrameCounts> {
    let mut rng = frame_rng(cfg.seed, ebn0_db, frame);
    let msgs: Vec<BitBlock> = (0..sys.frame_len())
        .map(|_| BitBlock::from_bits((0..sys.k()).map(|_| rng.random::<bool>())))
        .collect();
    let enc = encode_frame(sys, &msgs)?;
    let y: Vec<Vec<f64>> = enc
        .coded
        .iter()
        .map(|c| transmit(&bpsk_map(c), sigma, &mut rng))
        .collect();
    let bits = (sys.frame_len() * sys.k()) as u64;
    let mut out = FrameCounts {
        bits,
        ..Default::default()
    };
    match cfg.decoder {
        DecoderKind::Swd => {
            let llr: Vec<Vec<f64>> = y.iter().map(|b| channel_llr(b, sigma)).collect();
            let dec = decode_frame_swd(sys, &llr, cfg.swd_config())?;
            out.errors = u_errors(&dec.u_hat, &msgs);
            out.swd_errors = out.errors;
            (out.p1_bits, out.p1_errors) = count_w_errors(sys, &dec.w_tilde, &enc.intermediate);
            out.iterations = dec.iterations.iter().sum::<usize>() as u64;
            out.layers = dec.iterations.len() as u64;
        }
        DecoderKind::Tpd => {
            let llr: Vec<Vec<f64>> = y.iter().map(|b| channel_llr(b, sigma)).collect();
            let dec = decode_frame_tpd(sys, &llr, TpdConfig { swd: cfg.swd_config() })?;
            out.errors = u_errors(&dec.u_hat, &msgs);
            out.p2_errors = out.errors;
            out.swd_errors = u_errors(&dec.phase_one.u_hat, &msgs);
            (out.p1_bits, out.p1_errors) = count_w_errors(sys, &dec.phase_one.w_tilde, &enc.intermediate);
            out.iterations = dec.phase_one.iterations.iter().sum::<usize>() as u64;
            out.layers = dec.phase_one.iterations.len() as u64;
        }
        DecoderKind::GadPerfect => {
            let words = true_branch_words(sys, &enc.intermediate);
            let dec = decode_frame_gad(sys, &y, &words, SideSource::Perfect)?;
            out.errors = u_errors(&dec, &msgs);
        }
        DecoderKind::GadFlipped { p_genie } => {
            let words: Vec<Vec<BitBlock>> = true_branch_words(sys, &enc.intermediate)
                .iter()
                .map(|ws| ws.iter().map(|w| flip_bits(w, p_genie, &mut rng)).collect())
                .collect();
            let dec = decode_frame_gad(sys, &y, &words, SideSource::Flipped(p_genie))?;
            out.errors = u_errors(&dec, &msgs);
        }
    }
    Ok(out)
}

/// Simulates one Eb/N0 point until a stop rule fires.
pub fn run_point(cfg: &SimConfig, ebn0_db: f64) -> Result<PointResult> {
    cfg.validate()?;
    let sys = cfg.system()?;
    let sigma = match cfg.sigma_override {
        Some(s) => s,
        None => ebn0_to_sigma(ebn0_db, sys.code().rate())?,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    let start = Instant::now();
    let mut total = FrameCounts::default();
    let mut frames = 0u64;
    let mut truncated = false;
    let stop = &cfg.stop;
    let done = |t: &FrameCounts, frames: u64| {
        t.errors >= stop.min_bit_errors
            || t.bits >= stop.max_bits
            || stop.max_frames.is_some_and(|f| frames >= f)
    };
    'outer: loop {
        let batch: Vec<u64> = (frames..frames + cfg.workers as u64).collect();
        let counts: Vec<Result<FrameCounts>> = pool.install(|| {
            batch
                .par_iter()
                .map(|&f| simulate_frame(cfg, &sys, sigma, ebn0_db, f))
                .collect()
        });
        for c in counts {
            let c = c?;
            total.bits += c.bits;
            total.errors += c.errors;
            total.swd_errors += c.swd_errors;
            total.p1_bits += c.p1_bits;
            total.p1_errors += c.p1_errors;
            total.p2_errors += c.p2_errors;
            total.iterations += c.iterations;
            total.layers += c.layers;
            frames += 1;
            if done(&total, frames) {
                break 'outer;
            }
        }
        if let Some(cap) = stop.max_seconds {
            if start.elapsed().as_secs_f64() >= cap {
                truncated = true;
                break;
            }
        }
    }
    let (ci_low, ci_high) = clopper_pearson(total.errors, total.bits, 0.05);
    let mut res = PointResult {
        ebn0_db,
        decoder: cfg.decoder.label(),
        bits: total.bits,
        errors: total.errors,
        ber: total.errors as f64 / total.bits as f64,
        ci_low,
        ci_high,
        p1_bits: total.p1_bits,
        p1_errors: total.p1_errors,
        p2_errors: total.p2_errors,
        mean_iters: if total.layers > 0 {
            total.iterations as f64 / total.layers as f64
        } else {
            0.0
        },
        seed: cfg.seed,
        truncated,
        frames,
        swd_errors: total.swd_errors,
        predicted_p2: None,
        elapsed_s: start.elapsed().as_secs_f64(),
    };
    if matches!(cfg.decoder, DecoderKind::Tpd) {
        if let Some(p1) = res.p1().filter(|&p| p < 0.5) {
            res.predicted_p2 = Some(predict_floor(cfg, p1, ebn0_db)?);
        }
    }
    Ok(res)
}

/// Phase-II BER predicted by the genie-aided bound with `p_genie` set to a
/// measured phase-I error rate.
pub fn predict_floor(cfg: &SimConfig, measured_p1: f64, ebn0_db: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&measured_p1) {
        return Err(Error::InvalidProbability(format!("p_I = {measured_p1} outside [0, 0.5)")));
    }
    let code: CartesianCode = cfg.code.parse()?;
    let short = code.short();
    genie_bound(&short.iowef(), cfg.m, measured_p1, ebn0_db, short.rate())
}

/// Lower bound at a point, for summaries.
pub fn point_lower_bound(cfg: &SimConfig, ebn0_db: f64) -> Result<f64> {
    let code: CartesianCode = cfg.code.parse()?;
    Ok(lower_bound(&code.short().iowef(), cfg.m, ebn0_db))
}

/// Sidecar path of a results file: `results.csv` -> `results.json`.
pub fn config_path(results: &Path) -> PathBuf {
    results.with_extension("json")
}

fn fmt_row(r: &PointResult) -> [String; 13] {
    [
        r.ebn0_db.to_string(),
        r.decoder.clone(),
        r.bits.to_string(),
        r.errors.to_string(),
        format!("{:e}", r.ber),
        format!("{:e}", r.ci_low),
        format!("{:e}", r.ci_high),
        r.p1_bits.to_string(),
        r.p1_errors.to_string(),
        r.p2_errors.to_string(),
        format!("{:.4}", r.mean_iters),
        r.seed.to_string(),
        r.truncated.to_string(),
    ]
}

/// Reads the rows of an existing results file.
pub fn read_results(path: &Path) -> Result<Vec<PointResult>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

fn read_sidecar_hash(path: &Path) -> Result<Option<String>> {
    if !path.exists() {
        return Ok(None);
    }
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    Ok(doc.get("config_hash").and_then(|h| h.as_str()).map(str::to_string))
}

/// Runs every grid point, appending rows to `out` as they finish. Points
/// already present in an existing file with the same config hash are
/// skipped; a file written under a different configuration is an error.
pub fn run_sweep(cfg: &SimConfig, out: Option<&Path>) -> Result<SimResult> {
    run_sweep_with(cfg, out, |_| {})
}

/// [`run_sweep`] with a callback after each point (newly simulated or
/// resumed).
pub fn run_sweep_with(cfg: &SimConfig, out: Option<&Path>, mut on_point: impl FnMut(&PointResult)) -> Result<SimResult> {
    cfg.validate()?;
    let hash = cfg.hash();
    let created_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut result = SimResult {
        config: cfg.clone(),
        config_hash: hash.clone(),
        noise_generator: NOISE_GENERATOR.to_string(),
        created_unix,
        points: Vec::new(),
    };
    let mut writer = None;
    if let Some(path) = out {
        let sidecar = config_path(path);
        if path.exists() {
            let found = read_sidecar_hash(&sidecar)?.unwrap_or_else(|| "<missing>".into());
            if found != hash {
                return Err(Error::ConfigMismatch {
                    path: path.display().to_string(),
                    found,
                    expected: hash,
                });
            }
            result.points = read_results(path)?;
            for p in &result.points {
                on_point(p);
            }
            writer = Some(csv::Writer::from_writer(
                fs::OpenOptions::new().append(true).open(path)?,
            ));
        } else {
            let mut w = csv::Writer::from_path(path)?;
            w.write_record(RESULTS_CSV_HEADER)?;
            w.flush()?;
            writer = Some(w);
        }
        let mut f = fs::File::create(&sidecar)?;
        f.write_all(serde_json::to_string_pretty(&result_header(&result))?.as_bytes())?;
        f.write_all(b"\n")?;
    }
    for &g in &cfg.ebn0_db {
        if result.points.iter().any(|p| p.ebn0_db == g) {
            continue;
        }
        let row = run_point(cfg, g)?;
        if let Some(w) = writer.as_mut() {
            w.write_record(fmt_row(&row))?;
            w.flush()?;
        }
        on_point(&row);
        result.points.push(row);
    }
    Ok(result)
}

/// The sidecar document: everything but the rows.
fn result_header(r: &SimResult) -> serde_json::Value {
    serde_json::json!({
        "config": r.config,
        "config_hash": r.config_hash,
        "noise_generator": r.noise_generator,
        "created_unix": r.created_unix,
    })
}
