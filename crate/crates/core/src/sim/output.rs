//! CSV records and the JSON metadata sidecar.
//!
//! Floating-point fields are written with 10 significant digits; counts are
//! written as integers. Rows are sorted by precoder, bits, η and SNR, so
//! equal record sets always produce byte-identical files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::PrecoderId;
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 8] = ["precoder", "bits", "eta", "snr_db", "trials", "symbols", "bit_errors", "ber"];

/// One point of a BER curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub precoder: PrecoderId,
    pub bits: u32,
    pub eta: f64,
    pub snr_db: f64,
    pub trials: u64,
    /// Symbols sent over all trials (one per user per trial).
    pub symbols: u64,
    pub bit_errors: u64,
    pub ber: f64,
}

pub fn sort_records(records: &mut [BerRecord]) {
    records.sort_by(|a, b| {
        a.precoder
            .as_str()
            .cmp(b.precoder.as_str())
            .then(a.bits.cmp(&b.bits))
            .then(a.eta.total_cmp(&b.eta))
            .then(a.snr_db.total_cmp(&b.snr_db))
    });
}

/// `x` with 10 significant digits in positional notation.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    // Rounding can carry into the next decade (9.9999999999 → 10.00000000).
    let decimals = |e: i32| (9 - e).max(0) as usize;
    let s = format!("{:.*}", decimals(exp), x);
    let digits = s.trim_start_matches('-').replace('.', "").trim_start_matches('0').len();
    if digits > 10 {
        format!("{:.*}", decimals(exp + 1), x)
    } else {
        s
    }
}

fn row(r: &BerRecord) -> [String; 8] {
    [
        r.precoder.to_string(),
        r.bits.to_string(),
        format_sig(r.eta),
        format_sig(r.snr_db),
        r.trials.to_string(),
        r.symbols.to_string(),
        r.bit_errors.to_string(),
        format_sig(r.ber),
    ]
}

pub fn to_csv_string(records: &[BerRecord]) -> Result<String> {
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let err = |e: csv::Error| Error::Io { path: "<memory>".into(), msg: e.to_string() };
    w.write_record(CSV_HEADER).map_err(err)?;
    for r in &sorted {
        w.write_record(row(r)).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io { path: "<memory>".into(), msg: e.to_string() })?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

pub fn emit_csv(records: &[BerRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Config("no records to write".into()));
    }
    let text = to_csv_string(records)?;
    std::fs::write(path, text).map_err(|e| Error::Io { path: path.display().to_string(), msg: e.to_string() })
}

pub fn parse_csv(text: &str) -> Result<Vec<BerRecord>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rd.headers().map_err(|e| Error::Parse(e.to_string()))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Parse(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut out = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let field = |i: usize| rec.get(i).ok_or_else(|| Error::Parse(format!("row {} is short", line + 1)));
        let bad = |i: usize| Error::Parse(format!("row {}: bad `{}` value", line + 1, CSV_HEADER[i]));
        out.push(BerRecord {
            precoder: field(0)?.parse()?,
            bits: field(1)?.parse().map_err(|_| bad(1))?,
            eta: field(2)?.parse().map_err(|_| bad(2))?,
            snr_db: field(3)?.parse().map_err(|_| bad(3))?,
            trials: field(4)?.parse().map_err(|_| bad(4))?,
            symbols: field(5)?.parse().map_err(|_| bad(5))?,
            bit_errors: field(6)?.parse().map_err(|_| bad(6))?,
            ber: field(7)?.parse().map_err(|_| bad(7))?,
        });
    }
    Ok(out)
}

/// Metadata written next to a CSV.
#[derive(Debug, Clone, Serialize)]
pub struct Sidecar<'a, C: Serialize> {
    pub config: &'a C,
    pub git_describe: String,
    pub wall_time_s: f64,
    pub snr_definition: &'static str,
    pub fallbacks: &'a [super::FallbackCount],
}

pub const SNR_DEFINITION: &str =
    "snr_linear = P / sigma^2 with P the total transmit power and sigma^2 the per-user noise variance";

fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}

pub fn write_sidecar<C: Serialize>(path: &Path, config: &C, wall_time_s: f64, fallbacks: &[super::FallbackCount]) -> Result<()> {
    let meta = Sidecar { config, git_describe: git_describe(), wall_time_s, snr_definition: SNR_DEFINITION, fallbacks };
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::Io { path: path.display().to_string(), msg: e.to_string() })
}
