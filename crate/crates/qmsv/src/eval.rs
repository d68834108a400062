//! Detection metrics: equal error rate, minimum decision cost, DET curve
//! points, and the relative-improvement statistic.
//!
//! All metrics sweep the decision rule "accept iff score > threshold" over
//! every distinct score value plus both infinite endpoints, which makes
//! them invariant under any strictly increasing score transform and
//! independent of trial ordering.

use crate::error::{Error, Result};

/// Decision cost parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcfParams {
    pub c_miss: f64,
    pub c_fa: f64,
    pub p_target: f64,
}

impl Default for DcfParams {
    fn default() -> Self {
        DcfParams {
            c_miss: 10.0,
            c_fa: 1.0,
            p_target: 0.01,
        }
    }
}

impl DcfParams {
    pub fn validate(&self) -> Result<()> {
        if self.c_miss <= 0.0 || self.c_fa <= 0.0 {
            return Err(Error::Config("detection costs must be positive".into()));
        }
        if !(self.p_target > 0.0 && self.p_target < 1.0) {
            return Err(Error::Config("p_target must be in (0,1)".into()));
        }
        Ok(())
    }

    /// Effective prior of the cost function,
    /// `c_miss p_t / (c_miss p_t + c_fa (1 - p_t))`.
    pub fn effective_prior(&self) -> f64 {
        let weighted = self.c_miss * self.p_target;
        weighted / (weighted + self.c_fa * (1.0 - self.p_target))
    }
}

/// Metrics for one scored condition.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    /// Equal error rate in percent.
    pub eer: f64,
    /// Minimum decision cost, unscaled (tables print it times 100).
    pub min_dcf: f64,
    /// `(p_fa, p_miss)` per threshold, `p_fa` increasing.
    pub det_points: Vec<(f64, f64)>,
    pub n_target: usize,
    pub n_nontarget: usize,
}

fn check_classes(targets: &[f64], nontargets: &[f64]) -> Result<()> {
    if targets.is_empty() || nontargets.is_empty() {
        return Err(Error::SingleClass(format!(
            "{} target and {} nontarget trials",
            targets.len(),
            nontargets.len()
        )));
    }
    Ok(())
}

/// Error rates along the threshold sweep, from low to high thresholds.
///
/// The first vertex is the accept-everything endpoint `(p_fa=1, p_miss=0)`;
/// each subsequent vertex places the threshold at a distinct score value,
/// flipping all trials tied at that value together. The final vertex is
/// always `(p_fa=0, p_miss=1)`.
fn roc_vertices(targets: &[f64], nontargets: &[f64]) -> Vec<(f64, f64)> {
    let mut thresholds: Vec<f64> = targets.iter().chain(nontargets.iter()).cloned().collect();
    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    thresholds.dedup();

    let mut sorted_targets = targets.to_vec();
    sorted_targets.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut sorted_nontargets = nontargets.to_vec();
    sorted_nontargets.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let n_t = targets.len() as f64;
    let n_n = nontargets.len() as f64;
    let mut points = Vec::with_capacity(thresholds.len() + 1);
    points.push((1.0, 0.0));
    let count_le = |sorted: &[f64], v: f64| sorted.partition_point(|&s| s <= v) as f64;
    for &thr in &thresholds {
        let p_miss = count_le(&sorted_targets, thr) / n_t;
        let p_fa = 1.0 - count_le(&sorted_nontargets, thr) / n_n;
        points.push((p_fa, p_miss));
    }
    points
}

/// Equal error rate in percent, linearly interpolated at the crossing of
/// the miss and false-alarm curves.
pub fn compute_eer(targets: &[f64], nontargets: &[f64]) -> Result<f64> {
    check_classes(targets, nontargets)?;
    let points = roc_vertices(targets, nontargets);
    for w in points.windows(2) {
        let (fa0, miss0) = w[0];
        let (fa1, miss1) = w[1];
        let d0 = miss0 - fa0;
        let d1 = miss1 - fa1;
        if d0 <= 0.0 && d1 >= 0.0 {
            let denom = d1 - d0;
            let t = if denom.abs() < f64::EPSILON {
                0.0
            } else {
                -d0 / denom
            };
            let eer = fa0 + t * (fa1 - fa0);
            return Ok(eer * 100.0);
        }
    }
    // miss - fa is monotone non-decreasing along the sweep from -1 to +1,
    // so a crossing always exists; reaching here means numerical trouble.
    Err(Error::Numerical("no EER crossing found".into()))
}

/// Minimum of the decision cost over all thresholds including both
/// accept-everything and reject-everything endpoints.
pub fn compute_min_dcf(targets: &[f64], nontargets: &[f64], params: &DcfParams) -> Result<f64> {
    check_classes(targets, nontargets)?;
    params.validate()?;
    let points = roc_vertices(targets, nontargets);
    let cost = |p_fa: f64, p_miss: f64| {
        params.c_miss * p_miss * params.p_target + params.c_fa * p_fa * (1.0 - params.p_target)
    };
    Ok(points
        .iter()
        .map(|&(p_fa, p_miss)| cost(p_fa, p_miss))
        .fold(f64::INFINITY, f64::min))
}

/// DET curve vertices ordered by increasing false-alarm probability.
///
/// Both endpoints `(0, 1)` and `(1, 0)` are always present; the points are
/// raw probabilities, ready for normal-deviate warping by a plotting tool.
pub fn det_points(targets: &[f64], nontargets: &[f64]) -> Result<Vec<(f64, f64)>> {
    check_classes(targets, nontargets)?;
    let mut points = roc_vertices(targets, nontargets);
    points.reverse();
    Ok(points)
}

/// `(p_new - p_ref) / p_ref * 100`: negative when the new system improves
/// on the reference.
pub fn relative_improvement(p_new: f64, p_ref: f64) -> Result<f64> {
    if p_ref == 0.0 {
        return Err(Error::Config(
            "relative improvement undefined for zero reference".into(),
        ));
    }
    Ok((p_new - p_ref) / p_ref * 100.0)
}

/// Computes the full metrics bundle for one condition.
pub fn evaluate(targets: &[f64], nontargets: &[f64], params: &DcfParams) -> Result<MetricsReport> {
    Ok(MetricsReport {
        eer: compute_eer(targets, nontargets)?,
        min_dcf: compute_min_dcf(targets, nontargets, params)?,
        det_points: det_points(targets, nontargets)?,
        n_target: targets.len(),
        n_nontarget: nontargets.len(),
    })
}
