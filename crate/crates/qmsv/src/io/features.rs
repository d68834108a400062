//! Feature and statistics containers.
//!
//! Feature file layout: magic `QMSVFEAT`, `u32` frame count, `u32`
//! dimension, two `u8` flags (VAD applied, CMVN applied), then the frames
//! as row-major float64 little-endian. Statistics files use magic
//! `QMSVSTAT` with `u32` component count, `u32` dimension, `u64` total
//! frames, then the counts and mean rows.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};

use super::{check_magic, read_f64s, write_f64s};
use crate::error::{Error, Result};
use crate::frontend::FeatureMatrix;
use crate::stats::BwStats;

const FEATURE_MAGIC: &[u8; 8] = b"QMSVFEAT";
const STATS_MAGIC: &[u8; 8] = b"QMSVSTAT";

pub fn write_features(path: &Path, features: &FeatureMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(FEATURE_MAGIC)?;
    w.write_u32::<LittleEndian>(features.num_frames() as u32)?;
    w.write_u32::<LittleEndian>(features.dim() as u32)?;
    w.write_u8(features.vad_applied as u8)?;
    w.write_u8(features.cmvn_applied as u8)?;
    write_f64s(&mut w, features.frames.iter().cloned())?;
    w.flush()?;
    Ok(())
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, FEATURE_MAGIC)?;
    let t = r.read_u32::<LittleEndian>()? as usize;
    let d = r.read_u32::<LittleEndian>()? as usize;
    let vad = r.read_u8()? != 0;
    let cmvn = r.read_u8()? != 0;
    let data = read_f64s(&mut r, t * d)?;
    let frames = Array2::from_shape_vec((t, d), data)
        .map_err(|e| Error::Format(format!("feature payload: {e}")))?;
    Ok(FeatureMatrix {
        frames,
        vad_applied: vad,
        cmvn_applied: cmvn,
        frame_shift_s: 0.010,
    })
}

/// Debug export: one frame per line, space-separated values.
pub fn write_features_text(path: &Path, features: &FeatureMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in features.frames.rows() {
        let line = row
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_stats(path: &Path, stats: &BwStats) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(STATS_MAGIC)?;
    w.write_u32::<LittleEndian>(stats.num_components() as u32)?;
    w.write_u32::<LittleEndian>(stats.dim() as u32)?;
    w.write_u64::<LittleEndian>(stats.t as u64)?;
    write_f64s(&mut w, stats.n.iter().cloned())?;
    write_f64s(&mut w, stats.e.iter().cloned())?;
    w.flush()?;
    Ok(())
}

pub fn read_stats(path: &Path) -> Result<BwStats> {
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, STATS_MAGIC)?;
    let c = r.read_u32::<LittleEndian>()? as usize;
    let d = r.read_u32::<LittleEndian>()? as usize;
    let t = r.read_u64::<LittleEndian>()? as usize;
    let n = Array1::from_vec(read_f64s(&mut r, c)?);
    let e = Array2::from_shape_vec((c, d), read_f64s(&mut r, c * d)?)
        .map_err(|e| Error::Format(format!("stats payload: {e}")))?;
    Ok(BwStats { n, e, t })
}
