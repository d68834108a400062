//! Per-utterance quality measures.
//!
//! The main family compares the normalized zeroth-order Baum-Welch
//! statistics of an utterance with the UBM weights: two directed KL
//! divergences and their average, the `l1` and `l2` norms of the
//! difference, and an overlap measure `bh = sqrt(sum_i nbs_i * w_i)`.
//! Short utterances concentrate their posterior mass on few components, so
//! every divergence-style measure shrinks as duration grows.
//!
//! Duration-based baselines (`dur1`..`dur3`) and the i-vector uncertainty
//! measure `tv = 1/trace(posterior covariance)` are provided for
//! comparison. A trial's quality is the product of its two sides' values.

use ndarray::ArrayView1;

use crate::error::{Error, Result};
use crate::stats::NbsVector;
use crate::subspace::{posterior_trace, IVector};

/// Mass floor applied to both simplex vectors before the divergence-style
/// measures; keeps empty components from producing infinities.
pub const MASS_FLOOR: f64 = 1e-10;

/// The supported quality measure kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QualityKind {
    /// `sum_i nbs_i log(nbs_i / w_i)`
    Kl1,
    /// `sum_i w_i log(w_i / nbs_i)`
    Kl2,
    /// `(kl1 + kl2) / 2`
    KlAvg,
    /// `sum_i |nbs_i - w_i|`
    L1,
    /// `sqrt(sum_i |nbs_i - w_i|^2)`
    L2,
    /// `sqrt(sum_i nbs_i w_i)`
    Bh,
    /// `k |log(d_m / d_t)|`
    Dur1,
    /// `k log^2(d_m / d_t)`
    Dur2,
    /// `k log(d_m / d_c) log(d_c / d_t)`
    Dur3,
    /// `1 / trace(posterior covariance)`
    Tv,
}

impl QualityKind {
    pub const ALL: [QualityKind; 10] = [
        QualityKind::Kl1,
        QualityKind::Kl2,
        QualityKind::KlAvg,
        QualityKind::L1,
        QualityKind::L2,
        QualityKind::Bh,
        QualityKind::Dur1,
        QualityKind::Dur2,
        QualityKind::Dur3,
        QualityKind::Tv,
    ];

    /// The six measures computed from Baum-Welch statistics.
    pub const BW_KINDS: [QualityKind; 6] = [
        QualityKind::Kl1,
        QualityKind::Kl2,
        QualityKind::KlAvg,
        QualityKind::L1,
        QualityKind::L2,
        QualityKind::Bh,
    ];

    /// Short name used in quality files and CLI flags.
    pub fn short_name(&self) -> &'static str {
        match self {
            QualityKind::Kl1 => "kl-1",
            QualityKind::Kl2 => "kl-2",
            QualityKind::KlAvg => "kl-avg",
            QualityKind::L1 => "l1",
            QualityKind::L2 => "l2",
            QualityKind::Bh => "bh",
            QualityKind::Dur1 => "dur1",
            QualityKind::Dur2 => "dur2",
            QualityKind::Dur3 => "dur3",
            QualityKind::Tv => "tv",
        }
    }

    pub fn from_short_name(name: &str) -> Option<QualityKind> {
        QualityKind::ALL
            .iter()
            .find(|k| k.short_name() == name)
            .copied()
    }

    pub fn is_bw(&self) -> bool {
        QualityKind::BW_KINDS.contains(self)
    }

    pub fn is_duration(&self) -> bool {
        matches!(
            self,
            QualityKind::Dur1 | QualityKind::Dur2 | QualityKind::Dur3
        )
    }
}

impl std::fmt::Display for QualityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.short_name())
    }
}

impl std::str::FromStr for QualityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<QualityKind> {
        QualityKind::from_short_name(s)
            .ok_or_else(|| Error::Config(format!("unknown quality kind: {s}")))
    }
}

/// One computed quality value attached to an utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityRecord {
    pub utterance_id: String,
    pub kind: QualityKind,
    pub value: f64,
    /// Set for the duration kinds, where the value derives from it.
    pub duration_s: Option<f64>,
}

fn check_simplex(v: ArrayView1<'_, f64>, what: &str) -> Result<()> {
    if v.iter().any(|&x| x < -1e-12) {
        return Err(Error::Config(format!("{what} has negative entries")));
    }
    let sum = v.sum();
    if (sum - 1.0).abs() > 1e-8 {
        return Err(Error::Config(format!(
            "{what} sums to {sum}, not a probability simplex"
        )));
    }
    Ok(())
}

/// Floors entries at [`MASS_FLOOR`] and renormalizes.
fn floor_simplex(v: ArrayView1<'_, f64>) -> Vec<f64> {
    let mut out: Vec<f64> = v.iter().map(|&x| x.max(MASS_FLOOR)).collect();
    let sum: f64 = out.iter().sum();
    for x in &mut out {
        *x /= sum;
    }
    out
}

/// Computes one of the Baum-Welch quality measures.
///
/// The divergence-style kinds (`kl-1`, `kl-2`, `kl-avg`, `bh`) floor both
/// vectors first; the norm kinds (`l1`, `l2`) use the raw values.
pub fn quality_bw(kind: QualityKind, nbs: &NbsVector, weights: ArrayView1<'_, f64>) -> Result<f64> {
    if !kind.is_bw() {
        return Err(Error::Config(format!(
            "{kind} is not a Baum-Welch statistics quality kind"
        )));
    }
    if nbs.len() != weights.len() {
        return Err(Error::DimMismatch(format!(
            "nbs length {} vs weights length {}",
            nbs.len(),
            weights.len()
        )));
    }
    check_simplex(nbs.values.view(), "normalized statistics")?;
    check_simplex(weights, "UBM weights")?;

    let value = match kind {
        QualityKind::L1 => nbs
            .values
            .iter()
            .zip(weights.iter())
            .map(|(&a, &b)| (a - b).abs())
            .sum(),
        QualityKind::L2 => nbs
            .values
            .iter()
            .zip(weights.iter())
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt(),
        _ => {
            let p = floor_simplex(nbs.values.view());
            let q = floor_simplex(weights);
            match kind {
                QualityKind::Kl1 => kl(&p, &q),
                QualityKind::Kl2 => kl(&q, &p),
                QualityKind::KlAvg => (kl(&p, &q) + kl(&q, &p)) / 2.0,
                QualityKind::Bh => p
                    .iter()
                    .zip(q.iter())
                    .map(|(&a, &b)| a * b)
                    .sum::<f64>()
                    .sqrt(),
                _ => unreachable!(),
            }
        }
    };
    Ok(value)
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q.iter())
        .map(|(&a, &b)| a * (a / b).ln())
        .sum()
}

/// Duration-based quality baselines.
///
/// `d_m` and `d_t` are the enrollment and test durations in seconds; `k`
/// is a scale absorbed by the fusion weight (default 1); `d_c` is the
/// crossover duration for `dur3` (20 s in the randomized protocol).
pub fn quality_duration(kind: QualityKind, d_m: f64, d_t: f64, k: f64, d_c: f64) -> Result<f64> {
    if !kind.is_duration() {
        return Err(Error::Config(format!(
            "{kind} is not a duration quality kind"
        )));
    }
    if d_m <= 0.0 || d_t <= 0.0 || d_c <= 0.0 {
        return Err(Error::Config(
            "durations must be positive for duration-based quality".into(),
        ));
    }
    Ok(match kind {
        QualityKind::Dur1 => k * (d_m / d_t).ln().abs(),
        QualityKind::Dur2 => k * (d_m / d_t).ln().powi(2),
        QualityKind::Dur3 => k * (d_m / d_c).ln() * (d_c / d_t).ln(),
        _ => unreachable!(),
    })
}

/// Inverse trace of the i-vector posterior covariance: large counts shrink
/// the covariance, so the value grows with the amount of speech.
pub fn quality_uncertainty(iv: &IVector) -> Result<f64> {
    Ok(1.0 / posterior_trace(iv)?)
}

/// Trial-level quality: product of the two sides' values.
pub fn trial_quality(q_enroll: f64, q_test: f64) -> f64 {
    q_enroll * q_test
}
