//! Model containers: a text header with the training metadata followed by
//! a float64 little-endian payload. Round-trips are bit-exact; header
//! floats print in shortest round-trip form.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{
    format_float_list, header_field, parse_field, parse_float_list, read_f64s, read_header,
    write_f64s, write_header,
};
use crate::error::{Error, Result};
use crate::fusion::{FusionMode, FusionModel};
use crate::gmm::{GmmModel, TrainInfo};
use crate::plda::PldaModel;
use crate::quality::QualityKind;
use crate::subspace::{LdaProjection, TvModel};

pub fn write_gmm(path: &Path, model: &GmmModel) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let mut fields = vec![
        ("components", model.num_components().to_string()),
        ("dim", model.dim().to_string()),
    ];
    if let Some(info) = &model.train_info {
        fields.push(("variance_floor", info.variance_floor.to_string()));
        fields.push(("seed", info.seed.to_string()));
        fields.push(("train_ll", format_float_list(&info.log_likelihoods)));
    }
    write_header(&mut w, "QMSVGMM", &fields)?;
    write_f64s(&mut w, model.weights.iter().cloned())?;
    write_f64s(&mut w, model.means.iter().cloned())?;
    write_f64s(&mut w, model.variances.iter().cloned())?;
    w.flush()?;
    Ok(())
}

pub fn read_gmm(path: &Path) -> Result<GmmModel> {
    let mut r = BufReader::new(File::open(path)?);
    let fields = read_header(&mut r, "QMSVGMM")?;
    let c: usize = parse_field(header_field(&fields, "components", "gmm")?, "components")?;
    let d: usize = parse_field(header_field(&fields, "dim", "gmm")?, "dim")?;
    let train_info = match (fields.get("variance_floor"), fields.get("seed")) {
        (Some(floor), Some(seed)) => Some(TrainInfo {
            variance_floor: parse_field(floor, "variance_floor")?,
            seed: parse_field(seed, "seed")?,
            log_likelihoods: parse_float_list(fields.get("train_ll").map_or("", |s| s))?,
        }),
        _ => None,
    };
    let weights = Array1::from_vec(read_f64s(&mut r, c)?);
    let means = to_matrix(read_f64s(&mut r, c * d)?, c, d, "gmm means")?;
    let variances = to_matrix(read_f64s(&mut r, c * d)?, c, d, "gmm variances")?;
    Ok(GmmModel {
        weights,
        means,
        variances,
        train_info,
    })
}

pub fn write_tv(path: &Path, model: &TvModel) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(
        &mut w,
        "QMSVTVM",
        &[
            ("components", model.num_components().to_string()),
            ("dim", model.dim().to_string()),
            ("rank", model.rank.to_string()),
            ("train_obj", format_float_list(&model.train_log)),
        ],
    )?;
    write_f64s(&mut w, model.phi.iter().cloned())?;
    write_f64s(&mut w, model.sigma.iter().cloned())?;
    write_f64s(&mut w, model.m_bar.iter().cloned())?;
    w.flush()?;
    Ok(())
}

pub fn read_tv(path: &Path) -> Result<TvModel> {
    let mut r = BufReader::new(File::open(path)?);
    let fields = read_header(&mut r, "QMSVTVM")?;
    let c: usize = parse_field(header_field(&fields, "components", "tv")?, "components")?;
    let d: usize = parse_field(header_field(&fields, "dim", "tv")?, "dim")?;
    let rank: usize = parse_field(header_field(&fields, "rank", "tv")?, "rank")?;
    let train_log = parse_float_list(fields.get("train_obj").map_or("", |s| s))?;
    let phi = to_matrix(read_f64s(&mut r, c * d * rank)?, c * d, rank, "tv phi")?;
    let sigma = to_matrix(read_f64s(&mut r, c * d)?, c, d, "tv sigma")?;
    let m_bar = to_matrix(read_f64s(&mut r, c * d)?, c, d, "tv means")?;
    Ok(TvModel {
        phi,
        sigma,
        m_bar,
        rank,
        train_log,
    })
}

pub fn write_lda(path: &Path, proj: &LdaProjection) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(
        &mut w,
        "QMSVLDA",
        &[
            ("in_dim", proj.in_dim().to_string()),
            ("out_dim", proj.out_dim().to_string()),
        ],
    )?;
    write_f64s(&mut w, proj.basis.iter().cloned())?;
    write_f64s(&mut w, proj.mean.iter().cloned())?;
    w.flush()?;
    Ok(())
}

pub fn read_lda(path: &Path) -> Result<LdaProjection> {
    let mut r = BufReader::new(File::open(path)?);
    let fields = read_header(&mut r, "QMSVLDA")?;
    let r_dim: usize = parse_field(header_field(&fields, "in_dim", "lda")?, "in_dim")?;
    let p_dim: usize = parse_field(header_field(&fields, "out_dim", "lda")?, "out_dim")?;
    let basis = to_matrix(read_f64s(&mut r, r_dim * p_dim)?, r_dim, p_dim, "lda basis")?;
    let mean = Array1::from_vec(read_f64s(&mut r, r_dim)?);
    Ok(LdaProjection { basis, mean })
}

pub fn write_plda(path: &Path, model: &PldaModel) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(
        &mut w,
        "QMSVPLDA",
        &[
            ("dim", model.dim().to_string()),
            ("q_dim", model.q_dim().to_string()),
            ("train_ll", format_float_list(&model.train_log)),
        ],
    )?;
    write_f64s(&mut w, model.eta.iter().cloned())?;
    write_f64s(&mut w, model.psi.iter().cloned())?;
    write_f64s(&mut w, model.residual_cov.iter().cloned())?;
    w.flush()?;
    Ok(())
}

pub fn read_plda(path: &Path) -> Result<PldaModel> {
    let mut r = BufReader::new(File::open(path)?);
    let fields = read_header(&mut r, "QMSVPLDA")?;
    let p: usize = parse_field(header_field(&fields, "dim", "plda")?, "dim")?;
    let q: usize = parse_field(header_field(&fields, "q_dim", "plda")?, "q_dim")?;
    let train_log = parse_float_list(fields.get("train_ll").map_or("", |s| s))?;
    let eta = Array1::from_vec(read_f64s(&mut r, p)?);
    let psi = to_matrix(read_f64s(&mut r, p * q)?, p, q, "plda psi")?;
    let residual_cov = to_matrix(read_f64s(&mut r, p * p)?, p, p, "plda residual")?;
    Ok(PldaModel {
        eta,
        psi,
        residual_cov,
        train_log,
    })
}

/// Fusion models are small enough to live entirely in the text header.
pub fn write_fusion_model(path: &Path, model: &FusionModel) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let mut fields = vec![
        ("mode", model.mode.as_str().to_string()),
        ("alpha", format_float_list(&model.alpha)),
        ("theta", model.theta.to_string()),
        ("beta", model.beta.to_string()),
        ("q_mean", model.q_mean.to_string()),
        ("q_scale", model.q_scale.to_string()),
        ("dev_set_id", model.dev_set_id.clone()),
    ];
    if let Some(kind) = model.quality_kind {
        fields.push(("quality_kind", kind.short_name().to_string()));
    }
    write_header(&mut w, "QMSVFUSE", &fields)?;
    w.flush()?;
    Ok(())
}

pub fn read_fusion_model(path: &Path) -> Result<FusionModel> {
    let mut r = BufReader::new(File::open(path)?);
    let fields = read_header(&mut r, "QMSVFUSE")?;
    let mode = FusionMode::parse(header_field(&fields, "mode", "fusion")?)?;
    let quality_kind = match fields.get("quality_kind") {
        Some(name) => Some(
            QualityKind::from_short_name(name)
                .ok_or_else(|| Error::Format(format!("unknown quality kind: {name}")))?,
        ),
        None => None,
    };
    Ok(FusionModel {
        mode,
        quality_kind,
        alpha: parse_float_list(header_field(&fields, "alpha", "fusion")?)?,
        theta: parse_field(header_field(&fields, "theta", "fusion")?, "theta")?,
        beta: parse_field(header_field(&fields, "beta", "fusion")?, "beta")?,
        q_mean: parse_field(header_field(&fields, "q_mean", "fusion")?, "q_mean")?,
        q_scale: parse_field(header_field(&fields, "q_scale", "fusion")?, "q_scale")?,
        dev_set_id: header_field(&fields, "dev_set_id", "fusion")?.to_string(),
    })
}

fn to_matrix(data: Vec<f64>, rows: usize, cols: usize, what: &str) -> Result<Array2<f64>> {
    Array2::from_shape_vec((rows, cols), data)
        .map_err(|e| Error::Format(format!("{what}: {e}")))
}
