//! `bmst`: design, bound, simulate and predict.

mod config;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bmst_core::analysis::{design_memory, genie_bound, grid, lower_bound, write_bound_csv, BoundCurve};
use bmst_core::harness::{predict_floor, run_sweep_with, DecoderKind, PointResult, SimConfig};
use bmst_core::{CartesianCode, CodeFamily, Error, ShortCode};
use clap::{Parser, Subcommand, ValueEnum};

use config::{code_for_rate, parse_rate, BoundRequest, ExperimentConfig, KindName, CONFIG_HELP};

#[derive(Parser, Debug)]
#[command(name = "bmst", version, about = "Block Markov superposition transmission toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Encoding memory needed to reach a target BER near the Shannon limit.
    Design(DesignArgs),
    /// Analytic BER bounds as CSV.
    Bound(BoundArgs),
    /// Monte Carlo BER sweep from a config file.
    #[command(after_help = CONFIG_HELP)]
    Simulate(SimulateArgs),
    /// Phase-II BER predicted from a measured phase-I error rate.
    Predict(PredictArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Family {
    Rc,
    Spc,
}

impl From<Family> for CodeFamily {
    fn from(f: Family) -> Self {
        match f {
            Family::Rc => CodeFamily::Rc,
            Family::Spc => CodeFamily::Spc,
        }
    }
}

#[derive(clap::Args, Debug)]
struct DesignArgs {
    /// Code rate as a/b.
    #[arg(long)]
    rate: String,
    /// Target BER.
    #[arg(long)]
    target: f64,
    #[arg(long, value_enum)]
    family: Family,
    /// Write the design as JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct BoundArgs {
    /// Basic code, e.g. "RC[2,1]^5000".
    #[arg(long)]
    spec: Option<String>,
    #[arg(long, value_enum)]
    kind: Option<KindName>,
    #[arg(long)]
    m: Option<usize>,
    /// Eb/N0 grid in dB as start:step:end.
    #[arg(long)]
    grid: Option<String>,
    /// Side-information error rates for kind=genie, comma separated.
    #[arg(long, value_delimiter = ',')]
    p_genie: Vec<f64>,
    /// Take the curve requests from the `bounds` list of a config file.
    #[arg(long, conflicts_with_all = ["spec", "kind", "m", "grid", "p_genie"])]
    config: Option<PathBuf>,
    /// CSV output path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct SimulateArgs {
    /// Experiment config (JSON).
    config: PathBuf,
    /// Results CSV; the config is echoed next to it as .json.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Replaces the config's Eb/N0 list (start:step:end).
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    spec: Option<String>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    imax: Option<usize>,
}

#[derive(clap::Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    spec: String,
    #[arg(long)]
    m: usize,
    /// Measured phase-I error rate.
    #[arg(long = "p1", alias = "p-i")]
    p1: f64,
    /// Eb/N0 in dB.
    #[arg(long)]
    ebn0: f64,
    /// Frame length L; when given, Eb/N0 is taken at the terminated rate
    /// R L / (L + m) instead of the basic-code rate.
    #[arg(long)]
    frame_len: Option<usize>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::Csv(_) | Error::NonZeroTermination(_) | Error::FrameComplete(_) => {
                Failure::Runtime(e.to_string())
            }
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn parse_grid(s: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| Failure::Usage(format!("invalid grid `{s}`")));
    match parts.as_slice() {
        [v] => Ok(vec![num(v)?]),
        [a, b, c] => Ok(grid(num(a)?, num(b)?, num(c)?)?),
        _ => Err(Failure::Usage(format!("invalid grid `{s}`, expected start:step:end"))),
    }
}

fn short_code(spec: &str) -> Result<ShortCode, Failure> {
    Ok(spec.parse::<CartesianCode>()?.short().clone())
}

fn write_text(out: Option<&Path>, text: &str) -> CmdResult {
    match out {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn read_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    ExperimentConfig::parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn cmd_design(a: DesignArgs) -> CmdResult {
    let rate = parse_rate(&a.rate).map_err(Failure::Usage)?;
    let name = code_for_rate(a.family.into(), rate).map_err(Failure::Usage)?;
    let code = short_code(&name)?;
    let spec = design_memory(code.rate(), a.target, &code)?;
    println!("basic code    {}", spec.code);
    println!("rate          {}/{}", rate.0, rate.1);
    println!("p_target      {:e}", spec.p_target);
    println!("gamma_target  {:.2} dB", spec.gamma_target);
    println!("gamma_lim     {:.2} dB", spec.gamma_lim);
    println!("gap           {:.2} dB", spec.gap_db);
    println!("m             {}", spec.m);
    let json = serde_json::to_string_pretty(&spec).expect("design serialises") + "\n";
    write_text(a.out.as_deref(), &json)
}

fn curves(req: &BoundRequest) -> Result<Vec<BoundCurve>, Failure> {
    let code = short_code(&req.code)?;
    let points = parse_grid(&req.grid)?;
    let kinds = req.kinds().map_err(Failure::Usage)?;
    kinds
        .into_iter()
        .map(|k| BoundCurve::evaluate(&code, k, req.m, &points).map_err(Failure::from))
        .collect()
}

fn cmd_bound(a: BoundArgs) -> CmdResult {
    let requests = match a.config {
        Some(path) => {
            let cfg = read_config(&path)?;
            if cfg.bounds.is_empty() {
                return Err(Failure::Usage(format!("{}: no `bounds` requests", path.display())));
            }
            cfg.bounds
        }
        None => {
            let missing = |f: &str| Failure::Usage(format!("--{f} is required without --config"));
            vec![BoundRequest {
                code: a.spec.ok_or_else(|| missing("spec"))?,
                kind: a.kind.ok_or_else(|| missing("kind"))?,
                m: a.m.ok_or_else(|| missing("m"))?,
                grid: a.grid.ok_or_else(|| missing("grid"))?,
                p_genie: a.p_genie,
            }]
        }
    };
    let mut all = Vec::new();
    for r in &requests {
        all.extend(curves(r)?);
    }
    let mut buf = Vec::new();
    write_bound_csv(&mut buf, &all)?;
    write_text(a.out.as_deref(), &String::from_utf8(buf).expect("csv is utf-8"))
}

fn summary_header(cfg: &SimConfig) {
    match cfg.decoder {
        DecoderKind::Tpd => println!(
            "{:>8} {:>12} {:>8} {:>11} {:>11} {:>11} {:>11} {:>11}",
            "ebn0_db", "bits", "errors", "ber", "lower", "p_I", "p_II", "predicted"
        ),
        _ => println!(
            "{:>8} {:>12} {:>8} {:>11} {:>11} {:>11}",
            "ebn0_db", "bits", "errors", "ber", "lower", "genie"
        ),
    }
}

fn summary_row(cfg: &SimConfig, short: &ShortCode, r: &PointResult) {
    let iowef = short.iowef();
    let lb = lower_bound(&iowef, cfg.m, r.ebn0_db);
    let flag = if r.truncated { " (truncated)" } else { "" };
    match cfg.decoder {
        DecoderKind::Tpd => {
            let p1 = r.p1().unwrap_or(0.0);
            let p2 = r.p2_errors as f64 / r.bits.max(1) as f64;
            let pred = predict_floor(cfg, p1, r.ebn0_db)
                .map(|p| format!("{p:.3e}"))
                .unwrap_or_else(|_| "-".into());
            println!(
                "{:>8} {:>12} {:>8} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e} {:>11}{flag}",
                r.ebn0_db, r.bits, r.errors, r.ber, lb, p1, p2, pred
            );
        }
        _ => {
            let genie = match cfg.decoder {
                DecoderKind::GadFlipped { p_genie } => genie_bound(&iowef, cfg.m, p_genie, r.ebn0_db, short.rate())
                    .map(|p| format!("{p:.3e}"))
                    .unwrap_or_else(|_| "-".into()),
                _ => "-".into(),
            };
            println!(
                "{:>8} {:>12} {:>8} {:>11.3e} {:>11.3e} {:>11}{flag}",
                r.ebn0_db, r.bits, r.errors, r.ber, lb, genie
            );
        }
    }
}

fn cmd_simulate(a: SimulateArgs) -> CmdResult {
    let exp = read_config(&a.config)?;
    let mut cfg = exp
        .simulation
        .ok_or_else(|| Failure::Usage(format!("{}: no `simulation` section", a.config.display())))?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    if let Some(g) = &a.grid {
        cfg.ebn0_db = parse_grid(g)?;
    }
    if let Some(s) = a.spec {
        cfg.code = s;
    }
    if let Some(m) = a.m {
        cfg.m = m;
    }
    if let Some(d) = a.d {
        cfg.delay = d;
    }
    if let Some(i) = a.imax {
        cfg.max_iters = i;
    }
    cfg.validate()?;
    let out = a.out.unwrap_or_else(|| a.config.with_extension("results.csv"));
    let short = short_code(&cfg.code)?;
    println!("{} m={} L={} d={} decoder={} -> {}", cfg.code, cfg.m, cfg.frame_len, cfg.delay, cfg.decoder.label(), out.display());
    summary_header(&cfg);
    run_sweep_with(&cfg, Some(&out), |r| summary_row(&cfg, &short, r))?;
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> CmdResult {
    let code: CartesianCode = a.spec.parse()?;
    let short = code.short();
    let p2 = match a.frame_len {
        None => {
            let mut cfg = SimConfig::new(&a.spec, a.m, DecoderKind::Tpd, vec![a.ebn0], 0);
            cfg.delay = a.m;
            predict_floor(&cfg, a.p1, a.ebn0)?
        }
        Some(0) => return Err(Failure::Usage("--frame-len must be at least 1".into())),
        Some(l) => {
            if !(0.0..0.5).contains(&a.p1) {
                return Err(Failure::Usage(format!("p_I = {} outside [0, 0.5)", a.p1)));
            }
            let rate = short.rate() * l as f64 / (l + a.m) as f64;
            genie_bound(&short.iowef(), a.m, a.p1, a.ebn0, rate)?
        }
    };
    let lb = lower_bound(&short.iowef(), a.m, a.ebn0);
    println!("predicted p_II  {p2:.4e}");
    println!("lower bound     {lb:.4e}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let res = match cli.cmd {
        Cmd::Design(a) => cmd_design(a),
        Cmd::Bound(a) => cmd_bound(a),
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Predict(a) => cmd_predict(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
