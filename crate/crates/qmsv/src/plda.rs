//! Gaussian PLDA over projected i-vectors: a generative model
//! `y = eta + Psi z + eps` with a low-rank eigen-voice term shared within a
//! speaker and a full-covariance residual, scored as the two-hypothesis
//! log-likelihood ratio (same speaker versus different speakers).

use ndarray::{s, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;

const LN_2PI: f64 = 1.8378770664093453;

/// Trained GPLDA model.
#[derive(Debug, Clone)]
pub struct PldaModel {
    /// Global mean of the training vectors, length `P`.
    pub eta: Array1<f64>,
    /// Eigen-voice matrix, `P x Q`.
    pub psi: Array2<f64>,
    /// Full residual covariance, `P x P`, symmetric positive-definite.
    pub residual_cov: Array2<f64>,
    /// Marginal log-likelihood per EM iteration.
    pub train_log: Vec<f64>,
}

/// PLDA training parameters. Desk-scale defaults; full-scale `q_dim` is 150.
#[derive(Debug, Clone)]
pub struct PldaTrainConfig {
    pub q_dim: usize,
    pub n_iters: usize,
    pub seed: u64,
}

impl Default for PldaTrainConfig {
    fn default() -> Self {
        PldaTrainConfig {
            q_dim: 8,
            n_iters: 20,
            seed: 42,
        }
    }
}

impl PldaModel {
    pub fn dim(&self) -> usize {
        self.eta.len()
    }

    pub fn q_dim(&self) -> usize {
        self.psi.ncols()
    }

    /// Between-speaker covariance `Psi Psi^T`.
    pub fn between_cov(&self) -> Array2<f64> {
        self.psi.dot(&self.psi.t())
    }

    /// Builds the precomputed scorer for repeated trials.
    pub fn scorer(&self) -> Result<PldaScorer> {
        PldaScorer::new(self)
    }
}

/// Precomputed factorizations for the closed-form likelihood ratio.
///
/// Under the same-speaker hypothesis the stacked pair `[u; v]` of centered
/// vectors is zero-mean Gaussian with covariance
/// `[[B + W, B], [B, B + W]]`; under the different-speaker hypothesis each
/// side is independent `N(0, B + W)`. `B = Psi Psi^T`, `W` the residual.
pub struct PldaScorer {
    eta: Array1<f64>,
    chol_same: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    chol_total: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    logdet_same: f64,
    logdet_total: f64,
    dim: usize,
}

impl PldaScorer {
    fn new(model: &PldaModel) -> Result<PldaScorer> {
        let p = model.dim();
        let between = model.between_cov();
        let total = &between + &model.residual_cov;
        let mut same = Array2::zeros((2 * p, 2 * p));
        same.slice_mut(s![0..p, 0..p]).assign(&total);
        same.slice_mut(s![p.., p..]).assign(&total);
        same.slice_mut(s![0..p, p..]).assign(&between);
        same.slice_mut(s![p.., 0..p]).assign(&between);

        let chol_total = linalg::cholesky(total.view())?;
        let chol_same = linalg::cholesky(same.view())?;
        let logdet = |ch: &nalgebra::Cholesky<f64, nalgebra::Dyn>| {
            2.0 * ch.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
        };
        Ok(PldaScorer {
            eta: model.eta.clone(),
            logdet_same: logdet(&chol_same),
            logdet_total: logdet(&chol_total),
            chol_same,
            chol_total,
            dim: p,
        })
    }

    fn quad(chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>, x: &nalgebra::DVector<f64>) -> f64 {
        x.dot(&chol.solve(x))
    }

    /// `log p(u, v | same) - log p(u | diff) - log p(v | diff)`, symmetric
    /// in its arguments.
    pub fn score(&self, enroll: &Array1<f64>, test: &Array1<f64>) -> Result<f64> {
        if enroll.len() != self.dim || test.len() != self.dim {
            return Err(Error::DimMismatch(format!(
                "trial vectors ({}, {}) vs model dim {}",
                enroll.len(),
                test.len(),
                self.dim
            )));
        }
        let u = nalgebra::DVector::from_iterator(
            self.dim,
            enroll.iter().zip(self.eta.iter()).map(|(a, b)| a - b),
        );
        let v = nalgebra::DVector::from_iterator(
            self.dim,
            test.iter().zip(self.eta.iter()).map(|(a, b)| a - b),
        );
        let mut stacked = nalgebra::DVector::zeros(2 * self.dim);
        stacked.rows_mut(0, self.dim).copy_from(&u);
        stacked.rows_mut(self.dim, self.dim).copy_from(&v);

        let q_same = Self::quad(&self.chol_same, &stacked);
        let q_u = Self::quad(&self.chol_total, &u);
        let q_v = Self::quad(&self.chol_total, &v);
        // The 2 pi constants cancel between numerator and denominator.
        Ok(-0.5 * (self.logdet_same - 2.0 * self.logdet_total + q_same - q_u - q_v))
    }
}

/// Convenience one-off scoring; builds the scorer internally.
pub fn score_plda(model: &PldaModel, enroll: &Array1<f64>, test: &Array1<f64>) -> Result<f64> {
    model.scorer()?.score(enroll, test)
}

/// Per-speaker index lists in first-appearance order.
fn group_by_speaker(labels: &[usize]) -> Vec<Vec<usize>> {
    let mut map: std::collections::HashMap<usize, usize> = Default::default();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, &lab) in labels.iter().enumerate() {
        let slot = *map.entry(lab).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[slot].push(i);
    }
    groups
}

/// Trains the GPLDA model by EM with exact per-speaker posteriors.
///
/// `eta` is fixed at the sample mean. `Psi` starts from seeded noise scaled
/// by the data spread; the residual starts at the within-speaker covariance
/// plus a small ridge. The recorded objective is the marginal
/// log-likelihood of the centered data and is non-decreasing.
pub fn train_plda(
    vectors: &[Array1<f64>],
    labels: &[usize],
    cfg: &PldaTrainConfig,
) -> Result<PldaModel> {
    if cfg.q_dim < 1 {
        return Err(Error::Config("q_dim must be >= 1".into()));
    }
    if cfg.n_iters < 1 {
        return Err(Error::Config("n_iters must be >= 1".into()));
    }
    if vectors.len() != labels.len() {
        return Err(Error::DimMismatch("vectors vs labels length".into()));
    }
    if vectors.is_empty() {
        return Err(Error::InsufficientData("no training vectors".into()));
    }
    let p = vectors[0].len();
    if vectors.iter().any(|v| v.len() != p) {
        return Err(Error::DimMismatch("vectors disagree on length".into()));
    }
    if cfg.q_dim > p {
        return Err(Error::Config(format!(
            "q_dim {} exceeds vector dimension {}",
            cfg.q_dim, p
        )));
    }
    let groups = group_by_speaker(labels);
    if groups.len() < 2 {
        return Err(Error::InsufficientData(
            "PLDA needs at least two speakers".into(),
        ));
    }
    if groups.iter().all(|g| g.len() < 2) {
        return Err(Error::InsufficientData(
            "every speaker is a singleton; between/within decomposition is degenerate".into(),
        ));
    }

    let n_total = vectors.len();
    let mut eta = Array1::<f64>::zeros(p);
    for v in vectors {
        eta += v;
    }
    eta /= n_total as f64;
    let centered: Vec<Array1<f64>> = vectors.iter().map(|v| v - &eta).collect();

    // Initialization: residual from within-speaker spread, Psi from noise.
    let mut within = Array2::<f64>::zeros((p, p));
    let mut within_count = 0usize;
    for g in &groups {
        if g.len() < 2 {
            continue;
        }
        let mut centroid = Array1::<f64>::zeros(p);
        for &i in g {
            centroid += &centered[i];
        }
        centroid /= g.len() as f64;
        for &i in g {
            let diff = &centered[i] - &centroid;
            for a in 0..p {
                for b in 0..p {
                    within[[a, b]] += diff[a] * diff[b];
                }
            }
        }
        within_count += g.len() - 1;
    }
    within /= within_count.max(1) as f64;
    let data_var = centered.iter().map(|v| v.dot(v)).sum::<f64>() / (n_total * p) as f64;
    for i in 0..p {
        within[[i, i]] += 1e-6 * data_var.max(1e-12);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init_scale = 0.1 * data_var.sqrt();
    let mut psi = Array2::from_shape_fn((p, cfg.q_dim), |_| {
        (rng.random::<f64>() - 0.5) * 2.0 * init_scale
    });
    let mut residual = within;

    // Per-speaker sums of centered vectors and the pooled second moment.
    let speaker_sums: Vec<Array1<f64>> = groups
        .iter()
        .map(|g| {
            let mut s = Array1::<f64>::zeros(p);
            for &i in g {
                s += &centered[i];
            }
            s
        })
        .collect();
    let total_second_moment = {
        let mut s = Array2::<f64>::zeros((p, p));
        for v in &centered {
            for a in 0..p {
                for b in 0..p {
                    s[[a, b]] += v[a] * v[b];
                }
            }
        }
        s
    };

    let q = cfg.q_dim;
    let mut train_log = Vec::with_capacity(cfg.n_iters);
    for _ in 0..cfg.n_iters {
        let res_inv = linalg::invert_spd(residual.view())?;
        let logdet_res = linalg::logdet_spd(residual.view())?;
        let gram = psi.t().dot(&res_inv).dot(&psi); // Q x Q
        let proj = psi.t().dot(&res_inv); // Q x P

        let mut ll = 0.0;
        let mut sum_zy = Array2::<f64>::zeros((q, p)); // sum_s zhat (sum_j y)^T
        let mut sum_zz = Array2::<f64>::zeros((q, q)); // sum_s n_s E[z z^T]
        for (g, ysum) in groups.iter().zip(speaker_sums.iter()) {
            let n_s = g.len() as f64;
            let mut precision = Array2::<f64>::eye(q);
            precision.scaled_add(n_s, &gram);
            let chol = linalg::cholesky(precision.view())?;
            let rhs = proj.dot(ysum);
            let zhat = linalg::from_na_vec(&chol.solve(&linalg::to_na_vec(rhs.view())));
            let mut cov = linalg::from_na(&chol.inverse());
            linalg::symmetrize(&mut cov);

            // marginal log-likelihood of this speaker's sessions
            let logdet_prec = 2.0
                * chol
                    .l_dirty()
                    .diagonal()
                    .iter()
                    .map(|v| v.ln())
                    .sum::<f64>();
            let mut quad = 0.0;
            for &i in g {
                quad += centered[i].dot(&res_inv.dot(&centered[i]));
            }
            quad -= rhs.dot(&zhat);
            ll += -0.5 * (n_s * (p as f64 * LN_2PI + logdet_res) + logdet_prec + quad);

            for a in 0..q {
                for b in 0..p {
                    sum_zy[[a, b]] += zhat[a] * ysum[b];
                }
            }
            let mut second = cov;
            for a in 0..q {
                for b in 0..q {
                    second[[a, b]] += zhat[a] * zhat[b];
                }
            }
            sum_zz.scaled_add(n_s, &second);
        }
        train_log.push(ll);

        // M-step: Psi = B A^{-1} with B = sum_zy^T, A = sum_zz; the residual
        // update collapses to (S_yy - B A^{-1} B^T) / N.
        let a_inv = linalg::invert_spd(sum_zz.view())?;
        let b = sum_zy.t().to_owned(); // P x Q
        psi = b.dot(&a_inv);
        let mut res_new = &total_second_moment - &psi.dot(&b.t());
        res_new /= n_total as f64;
        linalg::symmetrize(&mut res_new);
        // keep the residual safely positive-definite
        for i in 0..p {
            res_new[[i, i]] += 1e-10 * data_var.max(1e-12);
        }
        residual = res_new;
    }

    Ok(PldaModel {
        eta,
        psi,
        residual_cov: residual,
        train_log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand_distr::{Distribution, StandardNormal};

    /// Draws speakers/sessions from a known generative model.
    fn synth(
        eta: &Array1<f64>,
        psi: &Array2<f64>,
        res_chol: &Array2<f64>,
        n_speakers: usize,
        sessions: usize,
        seed: u64,
    ) -> (Vec<Array1<f64>>, Vec<usize>) {
        let p = eta.len();
        let q = psi.ncols();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vectors = Vec::new();
        let mut labels = Vec::new();
        for s in 0..n_speakers {
            let z = Array1::from_shape_fn(q, |_| {
                let v: f64 = StandardNormal.sample(&mut rng);
                v
            });
            let speaker_part = psi.dot(&z);
            for _ in 0..sessions {
                let noise = Array1::from_shape_fn(p, |_| {
                    let v: f64 = StandardNormal.sample(&mut rng);
                    v
                });
                let eps = res_chol.dot(&noise);
                vectors.push(eta + &speaker_part + &eps);
                labels.push(s);
            }
        }
        (vectors, labels)
    }

    fn default_gen() -> (Array1<f64>, Array2<f64>, Array2<f64>) {
        let eta = array![0.5, -1.0, 0.2, 0.0];
        let psi = array![[1.2, 0.0], [0.4, 0.8], [-0.6, 0.5], [0.1, -0.9]];
        // residual covariance = L L^T with a well-conditioned L
        let res_chol = array![
            [0.6, 0.0, 0.0, 0.0],
            [0.1, 0.5, 0.0, 0.0],
            [-0.1, 0.2, 0.7, 0.0],
            [0.0, 0.1, -0.2, 0.4]
        ];
        (eta, psi, res_chol)
    }

    #[test]
    fn eta_equals_sample_mean() {
        let (eta, psi, res_chol) = default_gen();
        let (vectors, labels) = synth(&eta, &psi, &res_chol, 30, 4, 1);
        let cfg = PldaTrainConfig {
            q_dim: 2,
            n_iters: 3,
            seed: 0,
        };
        let model = train_plda(&vectors, &labels, &cfg).unwrap();
        let mut mean = Array1::<f64>::zeros(4);
        for v in &vectors {
            mean += v;
        }
        mean /= vectors.len() as f64;
        for j in 0..4 {
            assert!((model.eta[j] - mean[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn training_objective_non_decreasing() {
        let (eta, psi, res_chol) = default_gen();
        let (vectors, labels) = synth(&eta, &psi, &res_chol, 40, 5, 3);
        let cfg = PldaTrainConfig {
            q_dim: 2,
            n_iters: 20,
            seed: 7,
        };
        let model = train_plda(&vectors, &labels, &cfg).unwrap();
        assert_eq!(model.train_log.len(), 20);
        for w in model.train_log.windows(2) {
            assert!(
                w[1] >= w[0] - 1e-6 * w[0].abs(),
                "objective dropped: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn recovers_between_speaker_covariance() {
        let (eta, psi, res_chol) = default_gen();
        let (vectors, labels) = synth(&eta, &psi, &res_chol, 100, 5, 11);
        let cfg = PldaTrainConfig {
            q_dim: 2,
            n_iters: 50,
            seed: 5,
        };
        let model = train_plda(&vectors, &labels, &cfg).unwrap();
        let truth = psi.dot(&psi.t());
        let est = model.between_cov();
        let num: f64 = (&est - &truth).iter().map(|v| v * v).sum::<f64>().sqrt();
        let den: f64 = truth.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(num / den < 0.15, "relative Frobenius error {}", num / den);
    }

    #[test]
    fn single_speaker_rejected() {
        let vectors = vec![array![0.0, 1.0], array![1.0, 0.0]];
        let labels = vec![0, 0];
        let cfg = PldaTrainConfig {
            q_dim: 1,
            n_iters: 1,
            seed: 0,
        };
        assert!(matches!(
            train_plda(&vectors, &labels, &cfg),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn all_singletons_rejected() {
        let vectors = vec![array![0.0, 1.0], array![1.0, 0.0], array![2.0, 1.0]];
        let labels = vec![0, 1, 2];
        let cfg = PldaTrainConfig {
            q_dim: 1,
            n_iters: 1,
            seed: 0,
        };
        assert!(matches!(
            train_plda(&vectors, &labels, &cfg),
            Err(Error::InsufficientData(_))
        ));
    }

    fn hand_model_1d() -> PldaModel {
        PldaModel {
            eta: array![0.0],
            psi: array![[1.0]],
            residual_cov: array![[1.0]],
            train_log: vec![],
        }
    }

    #[test]
    fn score_is_symmetric() {
        let (eta, psi, res_chol) = default_gen();
        let model = PldaModel {
            eta: eta.clone(),
            psi,
            residual_cov: res_chol.dot(&res_chol.t()),
            train_log: vec![],
        };
        let scorer = model.scorer().unwrap();
        let a = array![1.0, -0.3, 0.2, 0.9];
        let b = array![-0.2, 0.8, 0.1, -0.5];
        let sab = scorer.score(&a, &b).unwrap();
        let sba = scorer.score(&b, &a).unwrap();
        assert!((sab - sba).abs() < 1e-9);
    }

    #[test]
    fn zero_eigenvoice_scores_zero() {
        let model = PldaModel {
            eta: array![0.0, 0.0],
            psi: Array2::zeros((2, 1)),
            residual_cov: array![[1.0, 0.2], [0.2, 0.8]],
            train_log: vec![],
        };
        let scorer = model.scorer().unwrap();
        for (a, b) in [
            (array![1.0, 2.0], array![-1.0, 0.5]),
            (array![0.0, 0.0], array![3.0, 3.0]),
        ] {
            assert!(scorer.score(&a, &b).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn hand_computed_1d_ratio() {
        // 1-D model, eta=0, Psi Psi^T = 1, residual = 1:
        // same-speaker covariance [[2,1],[1,2]], different: diag(2, 2).
        let model = hand_model_1d();
        let scorer = model.scorer().unwrap();
        let by_hand = |u: f64, v: f64| -> f64 {
            let det_same: f64 = 3.0; // det [[2,1],[1,2]]
            let det_diff: f64 = 4.0;
            let q_same = (2.0 * u * u - 2.0 * u * v + 2.0 * v * v) / 3.0;
            let q_diff = (u * u + v * v) / 2.0;
            -0.5 * ((det_same.ln() - det_diff.ln()) + q_same - q_diff)
        };
        for (u, v) in [(1.0, 1.0), (1.0, -1.0), (0.3, 2.0)] {
            let got = scorer.score(&array![u], &array![v]).unwrap();
            let expect = by_hand(u, v);
            assert!((got - expect).abs() < 1e-9, "({u},{v}): {got} vs {expect}");
        }
        // identical pair scores strictly higher than antipodal pair
        let same = scorer.score(&array![1.0], &array![1.0]).unwrap();
        let anti = scorer.score(&array![1.0], &array![-1.0]).unwrap();
        assert!(same > anti);
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let model = hand_model_1d();
        let scorer = model.scorer().unwrap();
        assert!(scorer.score(&array![1.0, 2.0], &array![0.0]).is_err());
    }

    #[test]
    fn training_is_deterministic_given_seed() {
        let (eta, psi, res_chol) = default_gen();
        let (vectors, labels) = synth(&eta, &psi, &res_chol, 20, 3, 2);
        let cfg = PldaTrainConfig {
            q_dim: 2,
            n_iters: 5,
            seed: 99,
        };
        let m1 = train_plda(&vectors, &labels, &cfg).unwrap();
        let m2 = train_plda(&vectors, &labels, &cfg).unwrap();
        assert_eq!(m1.psi, m2.psi);
        assert_eq!(m1.residual_cov, m2.residual_cov);
    }
}
