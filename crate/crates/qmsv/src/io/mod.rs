//! On-disk formats.
//!
//! Binary containers carry a fixed magic, little-endian integers, and
//! float64 little-endian payloads; model containers put training metadata
//! in a text header before the payload. Scores, keys, qualities, i-vectors,
//! and trial lists are line-oriented text. Floating-point values in text
//! files print in Rust's shortest round-trip form, so read-back is exact.

mod features;
mod models;
mod text;

pub use features::{
    read_features, read_stats, write_features, write_features_text, write_stats,
};
pub use models::{
    read_fusion_model, read_gmm, read_lda, read_plda, read_tv, write_fusion_model, write_gmm,
    write_lda, write_plda, write_tv,
};
pub use text::{
    format_metrics_line, read_ivectors, read_key, read_quality, read_scores, read_trials,
    write_det_points, write_ivectors, write_key, write_metrics_lines, write_quality,
    write_scores, write_trials, KeyEntry, ScoreEntry,
};

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

pub(crate) fn write_f64s<W: Write>(w: &mut W, values: impl Iterator<Item = f64>) -> Result<()> {
    for v in values {
        w.write_f64::<LittleEndian>(v)?;
    }
    Ok(())
}

pub(crate) fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n];
    r.read_f64_into::<LittleEndian>(&mut out)?;
    Ok(out)
}

pub(crate) fn check_magic<R: Read>(r: &mut R, expected: &[u8; 8]) -> Result<()> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != expected {
        return Err(Error::Format(format!(
            "bad magic: expected {:?}, found {:?}",
            String::from_utf8_lossy(expected),
            String::from_utf8_lossy(&magic)
        )));
    }
    Ok(())
}

/// Writes a model header: a magic line, `key value` lines, `end-header`.
pub(crate) fn write_header<W: Write>(
    w: &mut W,
    magic: &str,
    fields: &[(&str, String)],
) -> Result<()> {
    writeln!(w, "{magic} 1")?;
    for (key, value) in fields {
        writeln!(w, "{key} {value}")?;
    }
    writeln!(w, "end-header")?;
    Ok(())
}

/// Reads a model header written by [`write_header`]. The reader is left
/// positioned at the first payload byte.
pub(crate) fn read_header<R: BufRead>(
    r: &mut R,
    magic: &str,
) -> Result<BTreeMap<String, String>> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let head = line.trim_end();
    if head != format!("{magic} 1") {
        return Err(Error::Format(format!(
            "expected `{magic} 1` header, found `{head}`"
        )));
    }
    let mut fields = BTreeMap::new();
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::Format("truncated header".into()));
        }
        let trimmed = line.trim_end();
        if trimmed == "end-header" {
            break;
        }
        match trimmed.split_once(' ') {
            Some((key, value)) => {
                fields.insert(key.to_string(), value.to_string());
            }
            None => {
                fields.insert(trimmed.to_string(), String::new());
            }
        }
    }
    Ok(fields)
}

pub(crate) fn header_field<'a>(
    fields: &'a BTreeMap<String, String>,
    key: &str,
    what: &str,
) -> Result<&'a str> {
    fields
        .get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::Format(format!("{what}: missing header field `{key}`")))
}

pub(crate) fn parse_field<T: std::str::FromStr>(raw: &str, key: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::Format(format!("cannot parse header field `{key}` = {raw}")))
}

/// Space-separated float list used for log-likelihood histories.
pub(crate) fn parse_float_list(raw: &str) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Ok(Vec::new());
    }
    raw.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| Error::Format(format!("bad float in list: {tok}")))
        })
        .collect()
}

pub(crate) fn format_float_list(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}
