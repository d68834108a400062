//! Baum-Welch sufficient statistics against a UBM: zeroth-order soft counts
//! `N_i` and first-order mean vectors `E_i`, plus the normalized zeroth-order
//! vector that the quality measures consume.
//!
//! Statistics are additive, so partial accumulators from any utterance split
//! merge back to the whole-utterance value; that property is what makes
//! parallel accumulation safe.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::frontend::FeatureMatrix;
use crate::gmm::{Density, GmmModel};

/// Soft counts below this are treated as empty components.
pub const ZERO_COUNT: f64 = 1e-10;

/// Zeroth- and first-order statistics for one utterance.
///
/// `e` holds the *mean* form `E_i = (1/N_i) sum_t gamma_ti x_t`. For a
/// component with `N_i < ZERO_COUNT` the mean is undefined; the row is set
/// to the UBM mean so that downstream `(E_i - m_i)` terms vanish exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct BwStats {
    /// Per-component soft frame counts `N_i`, length `C`.
    pub n: Array1<f64>,
    /// Per-component weighted frame means `E_i`, `C x D`.
    pub e: Array2<f64>,
    /// Total frame count `T`.
    pub t: usize,
}

impl BwStats {
    pub fn num_components(&self) -> usize {
        self.n.len()
    }

    pub fn dim(&self) -> usize {
        self.e.ncols()
    }

    /// Empty accumulator whose mean rows already follow the zero-count rule.
    pub fn zero(ubm: &GmmModel) -> BwStats {
        BwStats {
            n: Array1::zeros(ubm.num_components()),
            e: ubm.means.clone(),
            t: 0,
        }
    }

    /// Utterance duration implied by the frame count at a 10 ms shift.
    pub fn duration_s(&self) -> f64 {
        self.t as f64 * 0.010
    }
}

/// Normalized zeroth-order statistics: a point on the probability simplex
/// comparable to the UBM weights.
#[derive(Debug, Clone, PartialEq)]
pub struct NbsVector {
    pub values: Array1<f64>,
}

impl NbsVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Accumulates Baum-Welch statistics for one utterance.
///
/// `N_i = sum_t Pr(i|x_t)` and `E_i = (1/N_i) sum_t Pr(i|x_t) x_t`, with the
/// zero-count rule applied to empty components. `sum_i N_i = T` up to
/// accumulation rounding.
pub fn accumulate_bw(ubm: &GmmModel, features: &FeatureMatrix) -> Result<BwStats> {
    if features.num_frames() == 0 {
        return Err(Error::InsufficientData("empty feature matrix".into()));
    }
    if features.dim() != ubm.dim() {
        return Err(Error::DimMismatch(format!(
            "features dim {} vs UBM dim {}",
            features.dim(),
            ubm.dim()
        )));
    }
    let c = ubm.num_components();
    let d = ubm.dim();
    let density = Density::new(ubm);
    let mut n = Array1::<f64>::zeros(c);
    let mut weighted_sum = Array2::<f64>::zeros((c, d));
    let mut buf = vec![0.0; c];
    for frame in features.frames.axis_iter(Axis(0)) {
        density.posteriors_with_ll(frame, &mut buf);
        for i in 0..c {
            let g = buf[i];
            if g == 0.0 {
                continue;
            }
            n[i] += g;
            for j in 0..d {
                weighted_sum[[i, j]] += g * frame[j];
            }
        }
    }
    let mut e = Array2::zeros((c, d));
    for i in 0..c {
        if n[i] >= ZERO_COUNT {
            e.row_mut(i).assign(&(&weighted_sum.row(i) / n[i]));
        } else {
            e.row_mut(i).assign(&ubm.means.row(i));
        }
    }
    Ok(BwStats {
        n,
        e,
        t: features.num_frames(),
    })
}

/// Merges two partial accumulators.
///
/// Counts add; mean rows combine count-weighted. When both sides of a row
/// are empty the row is carried over unchanged (both hold the UBM mean by
/// construction).
pub fn merge_bw(a: &BwStats, b: &BwStats) -> Result<BwStats> {
    if a.num_components() != b.num_components() || a.dim() != b.dim() {
        return Err(Error::DimMismatch(format!(
            "{}x{} vs {}x{}",
            a.num_components(),
            a.dim(),
            b.num_components(),
            b.dim()
        )));
    }
    let c = a.num_components();
    let d = a.dim();
    let mut n = Array1::zeros(c);
    let mut e = Array2::zeros((c, d));
    for i in 0..c {
        let total = a.n[i] + b.n[i];
        n[i] = total;
        if total >= ZERO_COUNT {
            for j in 0..d {
                e[[i, j]] = (a.n[i] * a.e[[i, j]] + b.n[i] * b.e[[i, j]]) / total;
            }
        } else {
            e.row_mut(i).assign(&a.e.row(i));
        }
    }
    Ok(BwStats { n, e, t: a.t + b.t })
}

/// Normalizes the zeroth-order counts onto the probability simplex.
///
/// Division is by the accumulated count sum (equal to `T` up to rounding),
/// which pins the simplex invariant to machine precision.
pub fn normalize_zeroth(stats: &BwStats) -> Result<NbsVector> {
    if stats.t == 0 {
        return Err(Error::InsufficientData(
            "cannot normalize statistics of zero frames".into(),
        ));
    }
    let total = stats.n.sum();
    if total <= 0.0 {
        return Err(Error::Numerical("zeroth-order counts sum to zero".into()));
    }
    Ok(NbsVector {
        values: &stats.n / total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmm::{features_from_frames, sample_frames};
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_ubm() -> GmmModel {
        GmmModel {
            weights: array![0.25, 0.45, 0.30],
            means: array![[-2.0, 0.0], [0.5, 1.0], [3.0, -1.0]],
            variances: array![[1.0, 0.5], [0.8, 1.2], [1.5, 0.9]],
            train_info: None,
        }
    }

    #[test]
    fn counts_sum_to_frame_count() {
        let ubm = toy_ubm();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for t in [1usize, 7, 200] {
            let feats = features_from_frames(sample_frames(&ubm, t, &mut rng));
            let stats = accumulate_bw(&ubm, &feats).unwrap();
            let sum = stats.n.sum();
            assert!(
                (sum - t as f64).abs() <= 1e-8 * t as f64,
                "sum {} vs T {}",
                sum,
                t
            );
        }
    }

    #[test]
    fn single_frame_single_component() {
        let ubm = GmmModel {
            weights: array![1.0],
            means: array![[0.0, 0.0]],
            variances: array![[1.0, 1.0]],
            train_info: None,
        };
        let feats = features_from_frames(array![[0.7, -0.3]]);
        let stats = accumulate_bw(&ubm, &feats).unwrap();
        assert!((stats.n[0] - 1.0).abs() < 1e-15);
        assert_eq!(stats.e[[0, 0]], 0.7);
        assert_eq!(stats.e[[0, 1]], -0.3);
    }

    #[test]
    fn matches_naive_double_loop() {
        let ubm = toy_ubm();
        let frames = array![
            [0.3, 0.4],
            [-1.9, 0.1],
            [2.8, -1.2],
            [0.0, 0.0],
            [1.5, 0.5]
        ];
        let feats = features_from_frames(frames.clone());
        let stats = accumulate_bw(&ubm, &feats).unwrap();

        // naive oracle: explicit per-frame posterior from densities
        let c = 3;
        let mut n = vec![0.0; c];
        let mut sums = vec![vec![0.0; 2]; c];
        for t in 0..frames.nrows() {
            let mut unnorm = vec![0.0; c];
            for i in 0..c {
                let mut dens = ubm.weights[i];
                for j in 0..2 {
                    let var = ubm.variances[[i, j]];
                    let diff = frames[[t, j]] - ubm.means[[i, j]];
                    dens *= (-0.5 * diff * diff / var).exp()
                        / (2.0 * std::f64::consts::PI * var).sqrt();
                }
                unnorm[i] = dens;
            }
            let z: f64 = unnorm.iter().sum();
            for i in 0..c {
                let g = unnorm[i] / z;
                n[i] += g;
                for j in 0..2 {
                    sums[i][j] += g * frames[[t, j]];
                }
            }
        }
        for i in 0..c {
            assert!((stats.n[i] - n[i]).abs() < 1e-12, "component {i}");
            for j in 0..2 {
                assert!((stats.e[[i, j]] - sums[i][j] / n[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn merge_equals_concatenation() {
        let ubm = toy_ubm();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let all = sample_frames(&ubm, 120, &mut rng);
        let first = features_from_frames(all.slice(ndarray::s![0..50, ..]).to_owned());
        let second = features_from_frames(all.slice(ndarray::s![50.., ..]).to_owned());
        let whole = accumulate_bw(&ubm, &features_from_frames(all.clone())).unwrap();
        let merged = merge_bw(
            &accumulate_bw(&ubm, &first).unwrap(),
            &accumulate_bw(&ubm, &second).unwrap(),
        )
        .unwrap();
        assert_eq!(merged.t, whole.t);
        for i in 0..3 {
            assert!((merged.n[i] - whole.n[i]).abs() < 1e-9);
            for j in 0..2 {
                assert!((merged.e[[i, j]] - whole.e[[i, j]]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn merge_with_zero_accumulator_is_identity() {
        let ubm = toy_ubm();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let stats =
            accumulate_bw(&ubm, &features_from_frames(sample_frames(&ubm, 40, &mut rng))).unwrap();
        let zero = BwStats::zero(&ubm);
        let merged = merge_bw(&zero, &stats).unwrap();
        assert_eq!(merged.t, stats.t);
        for i in 0..3 {
            assert!((merged.n[i] - stats.n[i]).abs() < 1e-15);
            for j in 0..2 {
                assert!((merged.e[[i, j]] - stats.e[[i, j]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn three_way_merge_associative() {
        let ubm = toy_ubm();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let parts: Vec<BwStats> = (0..3)
            .map(|_| {
                accumulate_bw(&ubm, &features_from_frames(sample_frames(&ubm, 30, &mut rng)))
                    .unwrap()
            })
            .collect();
        let left = merge_bw(&merge_bw(&parts[0], &parts[1]).unwrap(), &parts[2]).unwrap();
        let right = merge_bw(&parts[0], &merge_bw(&parts[1], &parts[2]).unwrap()).unwrap();
        for i in 0..3 {
            assert!((left.n[i] - right.n[i]).abs() < 1e-9);
            for j in 0..2 {
                assert!((left.e[[i, j]] - right.e[[i, j]]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn normalized_counts_form_simplex() {
        let ubm = toy_ubm();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let stats =
            accumulate_bw(&ubm, &features_from_frames(sample_frames(&ubm, 77, &mut rng))).unwrap();
        let nbs = normalize_zeroth(&stats).unwrap();
        assert!((nbs.values.sum() - 1.0).abs() < 1e-10);
        assert!(nbs.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn uniform_posteriors_give_uniform_nbs() {
        let c = 5;
        let ubm = GmmModel {
            weights: Array1::from_elem(c, 1.0 / c as f64),
            means: Array2::zeros((c, 2)),
            variances: Array2::ones((c, 2)),
            train_info: None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let stats =
            accumulate_bw(&ubm, &features_from_frames(sample_frames(&ubm, 10, &mut rng))).unwrap();
        let nbs = normalize_zeroth(&stats).unwrap();
        for &v in nbs.values.iter() {
            assert!((v - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn nbs_converges_to_ubm_weights_with_duration() {
        // law of large numbers: the max deviation from the UBM weights
        // shrinks as the sample grows
        let ubm = toy_ubm();
        let mut dev = [0.0; 2];
        for (k, t) in [200usize, 20000].iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            let stats = accumulate_bw(
                &ubm,
                &features_from_frames(sample_frames(&ubm, *t, &mut rng)),
            )
            .unwrap();
            let nbs = normalize_zeroth(&stats).unwrap();
            dev[k] = nbs
                .values
                .iter()
                .zip(ubm.weights.iter())
                .map(|(&a, &b)| (a - b).abs())
                .fold(0.0, f64::max);
        }
        assert!(
            dev[1] < dev[0],
            "deviation did not shrink: {} -> {}",
            dev[0],
            dev[1]
        );
    }

    #[test]
    fn zero_frames_cannot_normalize() {
        let ubm = toy_ubm();
        let zero = BwStats::zero(&ubm);
        assert!(normalize_zeroth(&zero).is_err());
    }
}
