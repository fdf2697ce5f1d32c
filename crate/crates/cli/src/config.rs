//! Experiment files.

use bmst_core::analysis::BoundKind;
use bmst_core::harness::SimConfig;
use bmst_core::CodeFamily;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// Field reference printed by `bmst simulate --help`.
pub const CONFIG_HELP: &str = "\
CONFIG FILE (JSON, unknown fields are rejected):
  schema_version          must be 1
  design                  optional {rate: \"a/b\", p_target, family: \"rc\"|\"spc\"}
  bounds                  optional list of {code, kind: \"basic\"|\"lower\"|\"genie\",
                          m, grid: \"start:step:end\", p_genie: [..]}
  simulation              optional; required by `simulate`:
    code                  basic code, e.g. \"RC[2,1]^1000\"
    m                     encoding memory
    frame_len             blocks per frame L (default 1000)
    delay                 decoding delay d (default 0; tpd needs d >= m)
    max_iters             iterations per window position (default 18)
    decoder               {\"kind\": \"swd\"|\"tpd\"|\"gad_perfect\"} or
                          {\"kind\": \"gad_flipped\", \"p_genie\": p}
    ebn0_db               list of Eb/N0 points in dB
    stop                  {min_bit_errors (100), max_bits (1e8),
                          max_frames (none), max_seconds (none)}
    seed                  master seed (u64); also seeds the interleavers
    workers               worker threads (default 1)
    swd                   {stop_threshold (1e-5), stall_patience (0),
                          warm_start (true)}
    sigma_override        fixed noise deviation instead of Eb/N0 (testing)
";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignRequest {
    pub rate: String,
    pub p_target: f64,
    pub family: CodeFamily,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum KindName {
    Basic,
    Lower,
    Genie,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundRequest {
    pub code: String,
    pub kind: KindName,
    pub m: usize,
    pub grid: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub p_genie: Vec<f64>,
}

impl BoundRequest {
    /// One bound kind per curve; genie requests expand to one per `p_genie`.
    pub fn kinds(&self) -> Result<Vec<BoundKind>, String> {
        match self.kind {
            KindName::Basic => Ok(vec![BoundKind::Basic]),
            KindName::Lower => Ok(vec![BoundKind::Lower]),
            KindName::Genie if self.p_genie.is_empty() => Err("kind=genie needs at least one p_genie".into()),
            KindName::Genie => Ok(self.p_genie.iter().map(|&p_genie| BoundKind::Genie { p_genie }).collect()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignRequest>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bounds: Vec<BoundRequest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimConfig>,
}

impl ExperimentConfig {
    /// Parses a config, reporting the path of the offending field.
    pub fn parse(text: &str) -> Result<Self, String> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            format!("config error at `{path}`: {}", e.inner())
        })?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(format!(
                "config error at `schema_version`: unsupported version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            ));
        }
        Ok(cfg)
    }

    #[cfg(test)]
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}

/// Parses `a/b` into a reduced fraction in (0, 1].
pub fn parse_rate(s: &str) -> Result<(u64, u64), String> {
    let bad = || format!("invalid rate `{s}`, expected a/b");
    let (a, b) = s.split_once('/').ok_or_else(bad)?;
    let a: u64 = a.trim().parse().map_err(|_| bad())?;
    let b: u64 = b.trim().parse().map_err(|_| bad())?;
    if a == 0 || b == 0 || a > b {
        return Err(format!("rate {s} outside (0, 1]"));
    }
    let g = gcd(a, b);
    Ok((a / g, b / g))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Short code of `family` with rate `a/b`, if one exists.
pub fn code_for_rate(family: CodeFamily, (a, b): (u64, u64)) -> Result<String, String> {
    match family {
        CodeFamily::Rc if a == 1 && b >= 2 => Ok(format!("RC[{b},1]")),
        CodeFamily::Spc if a + 1 == b && b >= 2 => Ok(format!("SPC[{b},{a}]")),
        CodeFamily::Rc => Err(format!("no repetition code has rate {a}/{b} (need 1/N)")),
        CodeFamily::Spc => Err(format!("no single-parity-check code has rate {a}/{b} (need (N-1)/N)")),
        CodeFamily::Generic => Err("only rc and spc families are supported".into()),
    }
}
