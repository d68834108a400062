//! Score fusion and calibration by prior-weighted logistic regression.
//!
//! Three model shapes share one trainer:
//!
//! - `linear`: `alpha^T scores + theta` over the two subsystem scores,
//! - `quality`: linear plus `beta` times the trial quality product,
//! - `calibration`: a single subsystem score plus the quality term.
//!
//! Training minimizes the standard prior-weighted binary cross-entropy at
//! the effective prior implied by the decision-cost parameters, with a
//! Newton/backtracking optimizer started from zero. Trial quality products
//! are z-normalized over the development set (an affine reparameterization
//! absorbed by `beta` and `theta`); the normalization constants travel with
//! the model.

use crate::error::{Error, Result};
use crate::eval::DcfParams;
use crate::quality::{trial_quality, QualityKind};

/// Target/nontarget trial label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialLabel {
    Target,
    Nontarget,
}

impl TrialLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrialLabel::Target => "target",
            TrialLabel::Nontarget => "nontarget",
        }
    }

    pub fn parse(s: &str) -> Result<TrialLabel> {
        match s {
            "target" => Ok(TrialLabel::Target),
            "nontarget" => Ok(TrialLabel::Nontarget),
            other => Err(Error::Format(format!("unknown trial label: {other}"))),
        }
    }
}

/// One enrollment-test pair with whatever sides have been computed.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub enroll_id: String,
    pub test_id: String,
    /// GMM-UBM average log-likelihood-ratio score.
    pub score_ubm: Option<f64>,
    /// i-vector GPLDA log-likelihood-ratio score.
    pub score_gplda: Option<f64>,
    pub q_enroll: Option<f64>,
    pub q_test: Option<f64>,
    pub label: Option<TrialLabel>,
}

impl TrialRecord {
    pub fn new(enroll_id: impl Into<String>, test_id: impl Into<String>) -> TrialRecord {
        TrialRecord {
            enroll_id: enroll_id.into(),
            test_id: test_id.into(),
            score_ubm: None,
            score_gplda: None,
            q_enroll: None,
            q_test: None,
            label: None,
        }
    }
}

/// Which fusion shape a model implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionMode {
    Linear,
    Quality,
    Calibration,
}

impl FusionMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            FusionMode::Linear => "linear",
            FusionMode::Quality => "quality",
            FusionMode::Calibration => "calibration",
        }
    }

    pub fn parse(s: &str) -> Result<FusionMode> {
        match s {
            "linear" => Ok(FusionMode::Linear),
            "quality" => Ok(FusionMode::Quality),
            "calibration" => Ok(FusionMode::Calibration),
            other => Err(Error::Config(format!("unknown fusion mode: {other}"))),
        }
    }

    fn n_score_weights(&self) -> usize {
        match self {
            FusionMode::Linear | FusionMode::Quality => 2,
            FusionMode::Calibration => 1,
        }
    }

    fn uses_quality(&self) -> bool {
        !matches!(self, FusionMode::Linear)
    }
}

/// Trained fusion/calibration parameters.
#[derive(Debug, Clone)]
pub struct FusionModel {
    pub mode: FusionMode,
    pub quality_kind: Option<QualityKind>,
    /// Per-system score weights: `[w_ubm, w_gplda]` for fusion modes,
    /// `[w_gplda]` for calibration.
    pub alpha: Vec<f64>,
    pub theta: f64,
    /// Weight on the normalized trial quality product; zero in linear mode.
    pub beta: f64,
    /// Dev-set mean of the quality product.
    pub q_mean: f64,
    /// Dev-set standard deviation of the quality product (1 if degenerate).
    pub q_scale: f64,
    /// Identifier of the development set the parameters came from.
    pub dev_set_id: String,
}

impl FusionModel {
    /// Identity-normalized model for hand-built parameter sets.
    pub fn manual(mode: FusionMode, alpha: Vec<f64>, theta: f64, beta: f64) -> FusionModel {
        FusionModel {
            mode,
            quality_kind: None,
            alpha,
            theta,
            beta,
            q_mean: 0.0,
            q_scale: 1.0,
            dev_set_id: String::new(),
        }
    }

    fn normalized_quality(&self, trial: &TrialRecord) -> Result<f64> {
        let qe = trial
            .q_enroll
            .ok_or_else(|| Error::MissingInput(missing(trial, "enrollment quality")))?;
        let qt = trial
            .q_test
            .ok_or_else(|| Error::MissingInput(missing(trial, "test quality")))?;
        Ok((trial_quality(qe, qt) - self.q_mean) / self.q_scale)
    }

    /// Feature vector in parameter order: scores, bias, quality term.
    fn features(&self, trial: &TrialRecord) -> Result<Vec<f64>> {
        let mut x = Vec::with_capacity(4);
        match self.mode {
            FusionMode::Linear | FusionMode::Quality => {
                x.push(
                    trial
                        .score_ubm
                        .ok_or_else(|| Error::MissingInput(missing(trial, "GMM-UBM score")))?,
                );
                x.push(
                    trial
                        .score_gplda
                        .ok_or_else(|| Error::MissingInput(missing(trial, "GPLDA score")))?,
                );
            }
            FusionMode::Calibration => {
                x.push(
                    trial
                        .score_gplda
                        .ok_or_else(|| Error::MissingInput(missing(trial, "GPLDA score")))?,
                );
            }
        }
        x.push(1.0);
        if self.mode.uses_quality() {
            x.push(self.normalized_quality(trial)?);
        }
        Ok(x)
    }

    fn params(&self) -> Vec<f64> {
        let mut w = self.alpha.clone();
        w.push(self.theta);
        if self.mode.uses_quality() {
            w.push(self.beta);
        }
        w
    }

    fn set_params(&mut self, w: &[f64]) {
        let k = self.mode.n_score_weights();
        self.alpha = w[0..k].to_vec();
        self.theta = w[k];
        self.beta = if self.mode.uses_quality() { w[k + 1] } else { 0.0 };
    }
}

fn missing(trial: &TrialRecord, what: &str) -> String {
    format!("{what} missing for trial {} / {}", trial.enroll_id, trial.test_id)
}

/// Fused score for one trial under a trained model.
pub fn apply_fusion(model: &FusionModel, trial: &TrialRecord) -> Result<f64> {
    let x = model.features(trial)?;
    let w = model.params();
    Ok(w.iter().zip(x.iter()).map(|(a, b)| a * b).sum())
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Prior-weighted logistic objective of a parameter vector over prepared
/// `(features, is_target)` rows.
fn objective(
    w: &[f64],
    rows: &[(Vec<f64>, bool)],
    weight_tar: f64,
    weight_non: f64,
    offset: f64,
) -> f64 {
    rows.iter()
        .map(|(x, is_target)| {
            let f: f64 = w.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>() + offset;
            if *is_target {
                weight_tar * softplus(-f)
            } else {
                weight_non * softplus(f)
            }
        })
        .sum()
}

/// Trains fusion parameters on a labeled development set.
///
/// The returned parameters minimize the prior-weighted cross-entropy at
/// the effective prior of `costs`; optimization is Newton's method with
/// Armijo backtracking from a zero start, run until the gradient norm
/// drops below 1e-8 (or the objective stalls, as happens on separable
/// data where the minimum is approached only in the limit).
pub fn train_fusion(
    dev: &[TrialRecord],
    mode: FusionMode,
    quality_kind: Option<QualityKind>,
    costs: &DcfParams,
    dev_set_id: &str,
) -> Result<FusionModel> {
    costs.validate()?;
    let n_tar = dev
        .iter()
        .filter(|t| t.label == Some(TrialLabel::Target))
        .count();
    let n_non = dev
        .iter()
        .filter(|t| t.label == Some(TrialLabel::Nontarget))
        .count();
    if n_tar + n_non < dev.len() {
        return Err(Error::MissingInput(
            "every development trial needs a label".into(),
        ));
    }
    if n_tar == 0 || n_non == 0 {
        return Err(Error::SingleClass(format!(
            "development set has {n_tar} targets and {n_non} nontargets"
        )));
    }
    if mode.uses_quality() && quality_kind.is_none() {
        return Err(Error::Config(
            "quality-aware fusion requires a quality kind".into(),
        ));
    }

    let mut model = FusionModel {
        mode,
        quality_kind: if mode.uses_quality() { quality_kind } else { None },
        alpha: vec![0.0; mode.n_score_weights()],
        theta: 0.0,
        beta: 0.0,
        q_mean: 0.0,
        q_scale: 1.0,
        dev_set_id: dev_set_id.to_string(),
    };

    // z-normalization constants for the quality product
    if mode.uses_quality() {
        let mut products = Vec::with_capacity(dev.len());
        for t in dev {
            let qe = t
                .q_enroll
                .ok_or_else(|| Error::MissingInput(missing(t, "enrollment quality")))?;
            let qt = t
                .q_test
                .ok_or_else(|| Error::MissingInput(missing(t, "test quality")))?;
            products.push(trial_quality(qe, qt));
        }
        let mean = products.iter().sum::<f64>() / products.len() as f64;
        let var =
            products.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / products.len() as f64;
        model.q_mean = mean;
        model.q_scale = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
    }

    let rows: Vec<(Vec<f64>, bool)> = dev
        .iter()
        .map(|t| {
            let x = model.features(t)?;
            Ok((x, t.label == Some(TrialLabel::Target)))
        })
        .collect::<Result<_>>()?;

    let pi = costs.effective_prior();
    let offset = (pi / (1.0 - pi)).ln();
    let weight_tar = pi / n_tar as f64;
    let weight_non = (1.0 - pi) / n_non as f64;

    let dim = rows[0].0.len();
    let mut w = vec![0.0; dim];
    let mut obj = objective(&w, &rows, weight_tar, weight_non, offset);
    for _ in 0..200 {
        // gradient and Hessian of the weighted logistic loss
        let mut grad = vec![0.0; dim];
        let mut hess = ndarray::Array2::<f64>::zeros((dim, dim));
        for (x, is_target) in &rows {
            let f: f64 = w.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>() + offset;
            let s = sigmoid(f);
            let (weight, residual) = if *is_target {
                (weight_tar, s - 1.0)
            } else {
                (weight_non, s)
            };
            for i in 0..dim {
                grad[i] += weight * residual * x[i];
                let si = weight * s * (1.0 - s) * x[i];
                for j in 0..dim {
                    hess[[i, j]] += si * x[j];
                }
            }
        }
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < 1e-8 {
            break;
        }
        for i in 0..dim {
            hess[[i, i]] += 1e-12;
        }
        let step = crate::linalg::solve_spd(
            hess.view(),
            ndarray::Array1::from_vec(grad.clone()).view(),
        )?;

        // Armijo backtracking along the Newton direction
        let slope: f64 = grad.iter().zip(step.iter()).map(|(g, s)| g * s).sum();
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-12 {
            let trial_w: Vec<f64> = w
                .iter()
                .zip(step.iter())
                .map(|(wi, si)| wi - t * si)
                .collect();
            let trial_obj = objective(&trial_w, &rows, weight_tar, weight_non, offset);
            if trial_obj <= obj - 0.25 * t * slope {
                let stalled = (obj - trial_obj).abs() <= 1e-15 * obj.abs().max(1.0);
                w = trial_w;
                obj = trial_obj;
                improved = true;
                if stalled {
                    improved = false; // converged to numerical resolution
                }
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    model.set_params(&w);
    Ok(model)
}

/// The trained objective value of a model on a labeled set; used to verify
/// that richer model families never do worse on their own development data.
pub fn dev_objective(model: &FusionModel, dev: &[TrialRecord], costs: &DcfParams) -> Result<f64> {
    let rows: Vec<(Vec<f64>, bool)> = dev
        .iter()
        .map(|t| {
            let label = t
                .label
                .ok_or_else(|| Error::MissingInput(missing(t, "label")))?;
            let x = model.features(t)?;
            Ok((x, label == TrialLabel::Target))
        })
        .collect::<Result<_>>()?;
    let n_tar = rows.iter().filter(|r| r.1).count();
    let n_non = rows.len() - n_tar;
    if n_tar == 0 || n_non == 0 {
        return Err(Error::SingleClass("objective needs both classes".into()));
    }
    let pi = costs.effective_prior();
    let offset = (pi / (1.0 - pi)).ln();
    Ok(objective(
        &model.params(),
        &rows,
        pi / n_tar as f64,
        (1.0 - pi) / n_non as f64,
        offset,
    ))
}
