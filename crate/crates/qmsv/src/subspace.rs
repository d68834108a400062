//! Total-variability subspace: EM training of the low-rank matrix, MAP
//! i-vector extraction with posterior covariance, and LDA projection for
//! speaker discriminability.
//!
//! The generative model treats an utterance's first-order statistics as
//! `E ~ N(m + Phi y, N^{-1} Sigma)` with prior `y ~ N(0, I)`. The extractor
//! returns the posterior mean
//! `y = (I + Phi^T Sigma^{-1} N Phi)^{-1} Phi^T Sigma^{-1} N (E - m)`
//! together with the posterior covariance, whose trace feeds the
//! uncertainty quality measure.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gmm::GmmModel;
use crate::linalg;
use crate::stats::{BwStats, ZERO_COUNT};

/// Trained total-variability model.
#[derive(Debug, Clone)]
pub struct TvModel {
    /// Total-variability matrix, `(C * D) x R`, block row per component.
    pub phi: Array2<f64>,
    /// Diagonal covariances adopted from the UBM, `C x D`.
    pub sigma: Array2<f64>,
    /// UBM means, `C x D`; the concatenation is the supervector offset.
    pub m_bar: Array2<f64>,
    /// Subspace rank `R`.
    pub rank: usize,
    /// EM objective (marginal log-likelihood up to a constant) per iteration.
    pub train_log: Vec<f64>,
}

/// TV training parameters. Desk-scale defaults; full-scale rank is 400.
#[derive(Debug, Clone)]
pub struct TvTrainConfig {
    pub rank: usize,
    pub n_iters: usize,
    pub seed: u64,
}

impl Default for TvTrainConfig {
    fn default() -> Self {
        TvTrainConfig {
            rank: 32,
            n_iters: 10,
            seed: 42,
        }
    }
}

/// An extracted i-vector with its optional posterior covariance.
#[derive(Debug, Clone)]
pub struct IVector {
    pub y: Array1<f64>,
    /// `(I + Phi^T Sigma^{-1} N Phi)^{-1}`, symmetric positive-definite.
    pub posterior_cov: Option<Array2<f64>>,
}

impl TvModel {
    pub fn num_components(&self) -> usize {
        self.m_bar.nrows()
    }

    pub fn dim(&self) -> usize {
        self.m_bar.ncols()
    }

    fn phi_block(&self, c: usize) -> ArrayView2<'_, f64> {
        let d = self.dim();
        self.phi.slice(s![c * d..(c + 1) * d, ..])
    }

    /// Builds the cached per-component gram matrices used by extraction.
    pub fn extractor(&self) -> IvectorExtractor<'_> {
        let r = self.rank;
        let grams: Vec<Array2<f64>> = (0..self.num_components())
            .map(|c| {
                let block = self.phi_block(c);
                let mut g = Array2::zeros((r, r));
                for d in 0..self.dim() {
                    let inv_sigma = 1.0 / self.sigma[[c, d]];
                    let row = block.row(d);
                    for a in 0..r {
                        let ra = row[a] * inv_sigma;
                        for b in a..r {
                            g[[a, b]] += ra * row[b];
                        }
                    }
                }
                for a in 0..r {
                    for b in 0..a {
                        g[[a, b]] = g[[b, a]];
                    }
                }
                g
            })
            .collect();
        IvectorExtractor { tv: self, grams }
    }
}

/// Extraction context holding `Phi_c^T Sigma_c^{-1} Phi_c` per component so
/// that each utterance costs `O(C R^2)` instead of `O(C D R^2)`.
pub struct IvectorExtractor<'a> {
    tv: &'a TvModel,
    grams: Vec<Array2<f64>>,
}

impl IvectorExtractor<'_> {
    /// Posterior precision `I + sum_c N_c G_c` and the projected residual
    /// `sum_c Phi_c^T Sigma_c^{-1} N_c (E_c - m_c)`.
    fn precision_and_rhs(&self, stats: &BwStats) -> (Array2<f64>, Array1<f64>) {
        let r = self.tv.rank;
        let d = self.tv.dim();
        let mut precision = Array2::eye(r);
        let mut rhs = Array1::zeros(r);
        for c in 0..self.tv.num_components() {
            let n_c = stats.n[c];
            if n_c < ZERO_COUNT {
                continue;
            }
            precision.scaled_add(n_c, &self.grams[c]);
            let block = self.tv.phi_block(c);
            for j in 0..d {
                let w = n_c * (stats.e[[c, j]] - self.tv.m_bar[[c, j]]) / self.tv.sigma[[c, j]];
                if w != 0.0 {
                    rhs.scaled_add(w, &block.row(j));
                }
            }
        }
        (precision, rhs)
    }

    /// Closed-form MAP i-vector with posterior covariance attached.
    pub fn extract(&self, stats: &BwStats) -> Result<IVector> {
        if stats.num_components() != self.tv.num_components() || stats.dim() != self.tv.dim() {
            return Err(Error::DimMismatch(
                "statistics shape does not match the subspace model".into(),
            ));
        }
        let (precision, rhs) = self.precision_and_rhs(stats);
        let chol = linalg::cholesky(precision.view())?;
        let y = linalg::from_na_vec(&chol.solve(&linalg::to_na_vec(rhs.view())));
        let mut cov = linalg::from_na(&chol.inverse());
        linalg::symmetrize(&mut cov);
        Ok(IVector {
            y,
            posterior_cov: Some(cov),
        })
    }
}

/// One-shot extraction; builds the cached extractor internally.
pub fn extract_ivector(tv: &TvModel, stats: &BwStats) -> Result<IVector> {
    tv.extractor().extract(stats)
}

/// Trace of the i-vector posterior covariance.
pub fn posterior_trace(iv: &IVector) -> Result<f64> {
    let cov = iv
        .posterior_cov
        .as_ref()
        .ok_or_else(|| Error::MissingInput("i-vector has no posterior covariance".into()))?;
    Ok(cov.diag().sum())
}

/// Trains the total-variability matrix by EM over per-utterance statistics.
///
/// The E-step computes each utterance's posterior mean and covariance; the
/// M-step solves a per-component least-squares system. `Sigma` stays fixed
/// at the UBM covariances. The recorded objective is the data
/// log-likelihood up to terms that do not depend on `Phi`, and is
/// non-decreasing across iterations.
pub fn train_tv(stats: &[BwStats], ubm: &GmmModel, cfg: &TvTrainConfig) -> Result<TvModel> {
    if cfg.rank < 1 {
        return Err(Error::Config("rank must be >= 1".into()));
    }
    if cfg.n_iters < 1 {
        return Err(Error::Config("n_iters must be >= 1".into()));
    }
    if stats.len() < cfg.rank {
        return Err(Error::InsufficientData(format!(
            "{} utterances for rank {}; need at least rank many",
            stats.len(),
            cfg.rank
        )));
    }
    let c = ubm.num_components();
    let d = ubm.dim();
    if stats
        .iter()
        .any(|s| s.num_components() != c || s.dim() != d)
    {
        return Err(Error::DimMismatch(
            "statistics shape does not match the UBM".into(),
        ));
    }
    let r = cfg.rank;
    if r > c * d {
        return Err(Error::Config(format!(
            "rank {} exceeds supervector size {}",
            r,
            c * d
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let scale = 1.0 / (r as f64).sqrt();
    let phi = Array2::from_shape_fn((c * d, r), |_| (rng.random::<f64>() - 0.5) * scale);
    let mut model = TvModel {
        phi,
        sigma: ubm.variances.clone(),
        m_bar: ubm.means.clone(),
        rank: r,
        train_log: Vec::with_capacity(cfg.n_iters),
    };

    for _ in 0..cfg.n_iters {
        let extractor = model.extractor();
        // E-step: posterior mean/covariance per utterance plus the
        // Phi-dependent part of the log-likelihood.
        let posteriors: Vec<(Array1<f64>, Array2<f64>, f64)> = stats
            .par_iter()
            .map(|st| {
                let (precision, rhs) = extractor.precision_and_rhs(st);
                let chol = linalg::cholesky(precision.view()).expect("I + PSD is SPD");
                let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
                let y = linalg::from_na_vec(&chol.solve(&linalg::to_na_vec(rhs.view())));
                let mut cov = linalg::from_na(&chol.inverse());
                linalg::symmetrize(&mut cov);
                let objective = 0.5 * (rhs.dot(&y) - logdet);
                (y, cov, objective)
            })
            .collect();
        model
            .train_log
            .push(posteriors.iter().map(|p| p.2).sum::<f64>());

        // M-step accumulators: A_c = sum_u N_uc E[y y^T], B_c = sum_u
        // N_uc (E_uc - m_c) yhat^T, folded in input order for determinism.
        let mut a = vec![Array2::<f64>::zeros((r, r)); c];
        let mut b = vec![Array2::<f64>::zeros((d, r)); c];
        for (st, (y, cov, _)) in stats.iter().zip(posteriors.iter()) {
            let mut second_moment = cov.clone();
            for i in 0..r {
                for j in 0..r {
                    second_moment[[i, j]] += y[i] * y[j];
                }
            }
            for comp in 0..c {
                let n_uc = st.n[comp];
                if n_uc < ZERO_COUNT {
                    continue;
                }
                a[comp].scaled_add(n_uc, &second_moment);
                for j in 0..d {
                    let resid = n_uc * (st.e[[comp, j]] - model.m_bar[[comp, j]]);
                    if resid != 0.0 {
                        b[comp].row_mut(j).scaled_add(resid, y);
                    }
                }
            }
        }
        for comp in 0..c {
            let trace = a[comp].diag().sum();
            if trace < 1e-10 {
                continue; // component saw no data; keep its block
            }
            let chol = match linalg::cholesky(a[comp].view()) {
                Ok(ch) => ch,
                Err(_) => {
                    let mut ridged = a[comp].clone();
                    for i in 0..r {
                        ridged[[i, i]] += 1e-9 * trace / r as f64;
                    }
                    linalg::cholesky(ridged.view())?
                }
            };
            for j in 0..d {
                let row = linalg::from_na_vec(&chol.solve(&linalg::to_na_vec(b[comp].row(j))));
                model.phi.row_mut(comp * d + j).assign(&row);
            }
        }
    }
    Ok(model)
}

/// Linear discriminant projection for i-vectors.
#[derive(Debug, Clone)]
pub struct LdaProjection {
    /// `R x P` basis, columns ordered by descending discriminability.
    pub basis: Array2<f64>,
    /// Centering vector, length `R`.
    pub mean: Array1<f64>,
}

impl LdaProjection {
    pub fn in_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.basis.ncols()
    }
}

/// Solves the between/within generalized eigenproblem on labeled vectors.
///
/// The output dimension is clamped to `min(R, n_speakers - 1)` with a
/// warning. Column signs are fixed so the largest-magnitude entry of each
/// basis vector is positive.
pub fn train_lda(
    vectors: &[Array1<f64>],
    labels: &[usize],
    out_dim: usize,
) -> Result<LdaProjection> {
    if vectors.len() != labels.len() {
        return Err(Error::DimMismatch("vectors vs labels length".into()));
    }
    if vectors.is_empty() {
        return Err(Error::InsufficientData("no vectors for LDA".into()));
    }
    let r = vectors[0].len();
    if vectors.iter().any(|v| v.len() != r) {
        return Err(Error::DimMismatch("vectors disagree on length".into()));
    }
    let mut by_speaker: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (i, &lab) in labels.iter().enumerate() {
        by_speaker.entry(lab).or_default().push(i);
    }
    let n_speakers = by_speaker.len();
    if n_speakers < 2 {
        return Err(Error::InsufficientData(
            "LDA needs at least two speakers".into(),
        ));
    }
    if !by_speaker.values().any(|idx| idx.len() >= 2) {
        return Err(Error::InsufficientData(
            "LDA needs some speaker with at least two sessions".into(),
        ));
    }
    let mut p = out_dim.min(r).min(n_speakers - 1);
    if p == 0 {
        p = 1;
    }
    if p < out_dim {
        log::warn!("LDA output dimension clamped from {out_dim} to {p}");
    }

    let n = vectors.len() as f64;
    let mut mean = Array1::<f64>::zeros(r);
    for v in vectors {
        mean += v;
    }
    mean /= n;

    let mut within = Array2::<f64>::zeros((r, r));
    let mut between = Array2::<f64>::zeros((r, r));
    for idx in by_speaker.values() {
        let mut centroid = Array1::<f64>::zeros(r);
        for &i in idx {
            centroid += &vectors[i];
        }
        centroid /= idx.len() as f64;
        for &i in idx {
            let diff = &vectors[i] - &centroid;
            rank_one_update(&mut within, diff.view());
        }
        let offset = &centroid - &mean;
        let mut contrib = Array2::<f64>::zeros((r, r));
        rank_one_update(&mut contrib, offset.view());
        between.scaled_add(idx.len() as f64, &contrib);
    }

    // Whiten by the within-class scatter, regularizing if it is singular.
    let chol = match linalg::cholesky(within.view()) {
        Ok(ch) => ch,
        Err(_) => {
            let ridge = 1e-6 * within.diag().sum() / r as f64;
            for i in 0..r {
                within[[i, i]] += ridge.max(1e-12);
            }
            linalg::cholesky(within.view())?
        }
    };
    let l = chol.l();
    let between_na = linalg::to_na(between.view());
    let x = l
        .solve_lower_triangular(&between_na)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let m = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let mut whitened = linalg::from_na(&m);
    linalg::symmetrize(&mut whitened);
    let (_, eigvecs) = linalg::sym_eigen_desc(whitened.view());

    // Map eigenvectors back: basis = L^{-T} U, then fix signs.
    let u = linalg::to_na(eigvecs.slice(s![.., 0..p]));
    let basis_na = l
        .transpose()
        .solve_upper_triangular(&u)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let mut basis = linalg::from_na(&basis_na);
    for mut col in basis.axis_iter_mut(Axis(1)) {
        let dominant = col
            .iter()
            .cloned()
            .max_by(|x, y| x.abs().partial_cmp(&y.abs()).unwrap())
            .unwrap_or(1.0);
        if dominant < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
    Ok(LdaProjection { basis, mean })
}

fn rank_one_update(acc: &mut Array2<f64>, v: ArrayView1<'_, f64>) {
    let r = v.len();
    for i in 0..r {
        for j in 0..r {
            acc[[i, j]] += v[i] * v[j];
        }
    }
}

/// Projects an i-vector: `basis^T (y - mean)`.
///
/// The posterior covariance does not propagate; uncertainty-based quality is
/// computed before projection.
pub fn project_lda(proj: &LdaProjection, iv: &IVector) -> Result<Array1<f64>> {
    project_vector(proj, iv.y.view())
}

/// Projects a bare vector through the LDA basis.
pub fn project_vector(proj: &LdaProjection, y: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    if y.len() != proj.in_dim() {
        return Err(Error::DimMismatch(format!(
            "vector length {} vs LDA input {}",
            y.len(),
            proj.in_dim()
        )));
    }
    let centered = &y.to_owned() - &proj.mean;
    Ok(proj.basis.t().dot(&centered))
}
