//! Diagonal-covariance Gaussian mixture modeling: EM training of the
//! universal background model, means-only MAP adaptation of speaker models,
//! and the average log-likelihood-ratio verification score.
//!
//! All likelihood work happens in the log domain with log-sum-exp
//! stabilization, so floored models stay finite on any finite input.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frontend::FeatureMatrix;

const LN_2PI: f64 = 1.8378770664093453;

/// Weight/mean/variance triplet for `C` diagonal Gaussians.
///
/// The same type serves as the UBM and as a MAP-adapted speaker model.
#[derive(Debug, Clone)]
pub struct GmmModel {
    /// Mixture weights, a simplex vector of length `C`.
    pub weights: Array1<f64>,
    /// Component means, `C x D`.
    pub means: Array2<f64>,
    /// Diagonal covariances, `C x D`, floored positive.
    pub variances: Array2<f64>,
    /// Present on EM-trained models; copied through MAP adaptation.
    pub train_info: Option<TrainInfo>,
}

/// Training provenance kept with a model for serialization and diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainInfo {
    pub variance_floor: f64,
    pub seed: u64,
    /// Total data log-likelihood at the start of each EM iteration.
    pub log_likelihoods: Vec<f64>,
}

/// EM training parameters. Defaults are desk-scale.
#[derive(Debug, Clone)]
pub struct GmmTrainConfig {
    pub n_components: usize,
    pub n_iters: usize,
    /// Variance floor as a fraction of the global per-dimension variance.
    pub variance_floor: f64,
    pub seed: u64,
}

impl Default for GmmTrainConfig {
    fn default() -> Self {
        GmmTrainConfig {
            n_components: 64,
            n_iters: 10,
            variance_floor: 0.01,
            seed: 42,
        }
    }
}

impl GmmModel {
    pub fn num_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    /// Checks the simplex and floor invariants.
    pub fn validate(&self) -> Result<()> {
        let c = self.num_components();
        let d = self.dim();
        if self.means.nrows() != c || self.variances.dim() != (c, d) {
            return Err(Error::DimMismatch("inconsistent GMM shapes".into()));
        }
        if (self.weights.sum() - 1.0).abs() > 1e-10 {
            return Err(Error::Numerical(format!(
                "weights sum to {}, not 1",
                self.weights.sum()
            )));
        }
        if self.weights.iter().any(|&w| w < 0.0) {
            return Err(Error::Numerical("negative mixture weight".into()));
        }
        if self.variances.iter().any(|&v| v <= 0.0) {
            return Err(Error::Numerical("non-positive variance".into()));
        }
        Ok(())
    }

    /// Posterior component probabilities for one frame.
    pub fn frame_posteriors(&self, frame: ArrayView1<'_, f64>) -> Array1<f64> {
        Density::new(self).posteriors(frame)
    }

    /// `(1/T) sum_t log sum_i w_i N(x_t; mu_i, Sigma_i)`.
    pub fn avg_log_likelihood(&self, features: &FeatureMatrix) -> f64 {
        let density = Density::new(self);
        let t = features.num_frames();
        let total: f64 = features
            .frames
            .axis_iter(Axis(0))
            .map(|frame| density.log_likelihood(frame))
            .sum();
        total / t as f64
    }
}

/// Precomputed per-component log-density terms for repeated evaluation.
pub(crate) struct Density {
    /// `log w_i`; `-inf` for zero-weight components.
    log_weights: Array1<f64>,
    /// `-0.5 (D ln 2pi + sum_d ln var_id)` per component.
    constants: Array1<f64>,
    inv_var: Array2<f64>,
    means: Array2<f64>,
}

impl Density {
    pub fn new(model: &GmmModel) -> Density {
        let log_weights = model.weights.mapv(|w| if w > 0.0 { w.ln() } else { f64::NEG_INFINITY });
        let constants = Array1::from_shape_fn(model.num_components(), |i| {
            -0.5 * (model.dim() as f64 * LN_2PI
                + model.variances.row(i).iter().map(|v| v.ln()).sum::<f64>())
        });
        Density {
            log_weights,
            constants,
            inv_var: model.variances.mapv(|v| 1.0 / v),
            means: model.means.clone(),
        }
    }

    /// `log w_i + log N(x; mu_i, Sigma_i)` for every component.
    fn component_log_liks(&self, frame: ArrayView1<'_, f64>, out: &mut [f64]) {
        for i in 0..self.means.nrows() {
            if self.log_weights[i] == f64::NEG_INFINITY {
                out[i] = f64::NEG_INFINITY;
                continue;
            }
            let mut quad = 0.0;
            let mean = self.means.row(i);
            let iv = self.inv_var.row(i);
            for d in 0..frame.len() {
                let diff = frame[d] - mean[d];
                quad += diff * diff * iv[d];
            }
            out[i] = self.log_weights[i] + self.constants[i] - 0.5 * quad;
        }
    }

    /// Log-sum-exp over components: the frame log-likelihood.
    pub fn log_likelihood(&self, frame: ArrayView1<'_, f64>) -> f64 {
        let mut buf = vec![0.0; self.means.nrows()];
        self.component_log_liks(frame, &mut buf);
        log_sum_exp(&buf)
    }

    /// Normalized posteriors; entries sum to 1 within 1e-12.
    pub fn posteriors(&self, frame: ArrayView1<'_, f64>) -> Array1<f64> {
        let mut buf = vec![0.0; self.means.nrows()];
        self.component_log_liks(frame, &mut buf);
        let lse = log_sum_exp(&buf);
        Array1::from_iter(buf.iter().map(|&l| {
            if l == f64::NEG_INFINITY {
                0.0
            } else {
                (l - lse).exp()
            }
        }))
    }

    /// Posteriors plus the frame log-likelihood in one pass.
    pub fn posteriors_with_ll(&self, frame: ArrayView1<'_, f64>, buf: &mut [f64]) -> f64 {
        self.component_log_liks(frame, buf);
        let lse = log_sum_exp(buf);
        for v in buf.iter_mut() {
            *v = if *v == f64::NEG_INFINITY {
                0.0
            } else {
                (*v - lse).exp()
            };
        }
        lse
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values
        .iter()
        .filter(|&&v| v != f64::NEG_INFINITY)
        .map(|&v| (v - max).exp())
        .sum();
    max + sum.ln()
}

/// Per-dimension mean and variance pooled over a feature collection.
fn global_moments(features: &[FeatureMatrix], d: usize) -> (Array1<f64>, Array1<f64>, usize) {
    let mut sum = Array1::<f64>::zeros(d);
    let mut sum_sq = Array1::<f64>::zeros(d);
    let mut n = 0usize;
    for f in features {
        for row in f.frames.axis_iter(Axis(0)) {
            for (j, &v) in row.iter().enumerate() {
                sum[j] += v;
                sum_sq[j] += v * v;
            }
        }
        n += f.num_frames();
    }
    let mean = &sum / n as f64;
    let var = &sum_sq / n as f64 - &mean * &mean;
    (mean, var, n)
}

/// Evenly strided subsample of at most `cap` pooled frames.
fn subsample_frames(features: &[FeatureMatrix], cap: usize, d: usize) -> Array2<f64> {
    let total: usize = features.iter().map(|f| f.num_frames()).sum();
    let stride = (total / cap.min(total)).max(1);
    let mut rows = Vec::new();
    let mut idx = 0usize;
    for f in features {
        for row in f.frames.axis_iter(Axis(0)) {
            if idx % stride == 0 {
                rows.push(row.to_owned());
            }
            idx += 1;
        }
    }
    let mut out = Array2::zeros((rows.len(), d));
    for (i, r) in rows.iter().enumerate() {
        out.row_mut(i).assign(r);
    }
    out
}

/// Farthest-point seeding followed by two hard-assignment refinements.
///
/// Deterministic for a given seed: the first center comes from the RNG, the
/// rest maximize the minimum squared distance to the chosen set.
fn init_model(
    sample: &Array2<f64>,
    c: usize,
    global_var: &Array1<f64>,
    floor: &Array1<f64>,
    seed: u64,
) -> GmmModel {
    let n = sample.nrows();
    let d = sample.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.random_range(0..n);

    let mut centers = vec![first];
    let mut min_dist: Vec<f64> = (0..n)
        .map(|i| sq_dist(sample.row(i), sample.row(first)))
        .collect();
    while centers.len() < c {
        let far = min_dist
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        centers.push(far);
        for i in 0..n {
            let dd = sq_dist(sample.row(i), sample.row(far));
            if dd < min_dist[i] {
                min_dist[i] = dd;
            }
        }
    }

    let mut means = Array2::zeros((c, d));
    for (k, &i) in centers.iter().enumerate() {
        means.row_mut(k).assign(&sample.row(i));
    }

    // Two Lloyd passes to pull the seeds toward cluster centroids.
    let mut assign = vec![0usize; n];
    for _ in 0..2 {
        for i in 0..n {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for k in 0..c {
                let dd = sq_dist(sample.row(i), means.row(k));
                if dd < best_d {
                    best_d = dd;
                    best = k;
                }
            }
            assign[i] = best;
        }
        let mut counts = vec![0usize; c];
        let mut sums = Array2::<f64>::zeros((c, d));
        for i in 0..n {
            counts[assign[i]] += 1;
            let mut row = sums.row_mut(assign[i]);
            row += &sample.row(i);
        }
        for k in 0..c {
            if counts[k] > 0 {
                means
                    .row_mut(k)
                    .assign(&(&sums.row(k) / counts[k] as f64));
            }
        }
    }

    let mut counts = vec![0usize; c];
    let mut var_acc = Array2::<f64>::zeros((c, d));
    for i in 0..n {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for k in 0..c {
            let dd = sq_dist(sample.row(i), means.row(k));
            if dd < best_d {
                best_d = dd;
                best = k;
            }
        }
        counts[best] += 1;
        for j in 0..d {
            let diff = sample[[i, j]] - means[[best, j]];
            var_acc[[best, j]] += diff * diff;
        }
    }
    let mut weights = Array1::zeros(c);
    let mut variances = Array2::zeros((c, d));
    for k in 0..c {
        weights[k] = counts[k].max(1) as f64;
        for j in 0..d {
            let v = if counts[k] > 0 {
                var_acc[[k, j]] / counts[k] as f64
            } else {
                global_var[j]
            };
            variances[[k, j]] = v.max(floor[j]);
        }
    }
    let wsum = weights.sum();
    weights /= wsum;

    GmmModel {
        weights,
        means,
        variances,
        train_info: None,
    }
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

struct EmAccumulator {
    n: Array1<f64>,
    sum_x: Array2<f64>,
    sum_x2: Array2<f64>,
    ll: f64,
}

impl EmAccumulator {
    fn zeros(c: usize, d: usize) -> EmAccumulator {
        EmAccumulator {
            n: Array1::zeros(c),
            sum_x: Array2::zeros((c, d)),
            sum_x2: Array2::zeros((c, d)),
            ll: 0.0,
        }
    }

    fn absorb(&mut self, other: EmAccumulator) {
        self.n += &other.n;
        self.sum_x += &other.sum_x;
        self.sum_x2 += &other.sum_x2;
        self.ll += other.ll;
    }
}

/// Trains a diagonal-covariance UBM with EM.
///
/// Initialization is a seeded farthest-point pick over a strided frame
/// subsample, refined by two hard-assignment passes. The per-iteration total
/// log-likelihood is recorded in [`TrainInfo`] and is non-decreasing.
pub fn train_ubm(features: &[FeatureMatrix], cfg: &GmmTrainConfig) -> Result<GmmModel> {
    if cfg.n_components < 1 {
        return Err(Error::Config("n_components must be >= 1".into()));
    }
    if cfg.n_iters < 1 {
        return Err(Error::Config("n_iters must be >= 1".into()));
    }
    if features.is_empty() {
        return Err(Error::InsufficientData("no training features".into()));
    }
    let d = features[0].dim();
    if features.iter().any(|f| f.dim() != d) {
        return Err(Error::DimMismatch(
            "training features disagree on dimensionality".into(),
        ));
    }
    let (_, global_var, total_frames) = global_moments(features, d);
    if total_frames < 10 * cfg.n_components {
        return Err(Error::InsufficientData(format!(
            "{total_frames} frames for {} components; need at least {}",
            cfg.n_components,
            10 * cfg.n_components
        )));
    }
    let floor = global_var.mapv(|v| (cfg.variance_floor * v).max(1e-12));

    let sample = subsample_frames(features, 20_000, d);
    let mut model = init_model(&sample, cfg.n_components, &global_var, &floor, cfg.seed);

    let c = cfg.n_components;
    let mut log_likelihoods = Vec::with_capacity(cfg.n_iters);
    for _ in 0..cfg.n_iters {
        let density = Density::new(&model);
        // Parallel partial accumulation per utterance, merged in input order
        // so results do not depend on scheduling.
        let partials: Vec<EmAccumulator> = features
            .par_iter()
            .map(|f| {
                let mut acc = EmAccumulator::zeros(c, d);
                let mut buf = vec![0.0; c];
                for frame in f.frames.axis_iter(Axis(0)) {
                    acc.ll += density.posteriors_with_ll(frame, &mut buf);
                    for i in 0..c {
                        let g = buf[i];
                        if g == 0.0 {
                            continue;
                        }
                        acc.n[i] += g;
                        for j in 0..d {
                            let x = frame[j];
                            acc.sum_x[[i, j]] += g * x;
                            acc.sum_x2[[i, j]] += g * x * x;
                        }
                    }
                }
                acc
            })
            .collect();
        let mut acc = EmAccumulator::zeros(c, d);
        for p in partials {
            acc.absorb(p);
        }
        log_likelihoods.push(acc.ll);

        for i in 0..c {
            let ni = acc.n[i];
            if ni > 1e-10 {
                for j in 0..d {
                    let mean = acc.sum_x[[i, j]] / ni;
                    model.means[[i, j]] = mean;
                    let var = acc.sum_x2[[i, j]] / ni - mean * mean;
                    model.variances[[i, j]] = var.max(floor[j]);
                }
            }
            model.weights[i] = ni / total_frames as f64;
        }
        let wsum = model.weights.sum();
        model.weights /= wsum;
    }

    model.train_info = Some(TrainInfo {
        variance_floor: cfg.variance_floor,
        seed: cfg.seed,
        log_likelihoods,
    });
    model.validate()?;
    Ok(model)
}

/// Means-only MAP adaptation with the classic relevance-factor rule
/// `alpha_i = N_i / (N_i + relevance)`. Weights and variances are copied
/// from the UBM; components with no posterior mass keep the UBM mean.
pub fn map_adapt(ubm: &GmmModel, features: &FeatureMatrix, relevance: f64) -> Result<GmmModel> {
    if relevance <= 0.0 {
        return Err(Error::Config("relevance factor must be positive".into()));
    }
    let stats = crate::stats::accumulate_bw(ubm, features)?;
    Ok(map_adapt_from_stats(ubm, &stats, relevance))
}

/// MAP adaptation directly from precomputed Baum-Welch statistics.
pub fn map_adapt_from_stats(
    ubm: &GmmModel,
    stats: &crate::stats::BwStats,
    relevance: f64,
) -> GmmModel {
    let mut means = ubm.means.clone();
    for i in 0..ubm.num_components() {
        let n_i = stats.n[i];
        let alpha = n_i / (n_i + relevance);
        for j in 0..ubm.dim() {
            means[[i, j]] = alpha * stats.e[[i, j]] + (1.0 - alpha) * ubm.means[[i, j]];
        }
    }
    GmmModel {
        weights: ubm.weights.clone(),
        means,
        variances: ubm.variances.clone(),
        train_info: ubm.train_info.clone(),
    }
}

/// GMM-UBM verification score: the difference of average log-likelihoods
/// of the test features under the target model and under the UBM.
pub fn score_gmm_ubm(target: &GmmModel, ubm: &GmmModel, test: &FeatureMatrix) -> Result<f64> {
    if target.num_components() != ubm.num_components() || target.dim() != ubm.dim() {
        return Err(Error::DimMismatch(
            "target and UBM disagree on shape".into(),
        ));
    }
    if test.dim() != ubm.dim() {
        return Err(Error::DimMismatch("test features vs model dim".into()));
    }
    if test.num_frames() == 0 {
        return Err(Error::InsufficientData("empty test features".into()));
    }
    Ok(target.avg_log_likelihood(test) - ubm.avg_log_likelihood(test))
}

/// Draws frames from a GMM; shared by tests and the synthetic corpus.
pub fn sample_frames(model: &GmmModel, t: usize, rng: &mut impl Rng) -> Array2<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let d = model.dim();
    let mut cumulative = Vec::with_capacity(model.num_components());
    let mut acc = 0.0;
    for &w in model.weights.iter() {
        acc += w;
        cumulative.push(acc);
    }
    let mut out = Array2::zeros((t, d));
    for mut row in out.axis_iter_mut(Axis(0)) {
        let u: f64 = rng.random();
        let comp = cumulative
            .iter()
            .position(|&cw| u <= cw)
            .unwrap_or(model.num_components() - 1);
        for j in 0..d {
            let z: f64 = StandardNormal.sample(rng);
            row[j] = model.means[[comp, j]] + z * model.variances[[comp, j]].sqrt();
        }
    }
    out
}

/// Convenience for tests and the harness: wraps raw frames as active,
/// un-normalized features.
pub fn features_from_frames(frames: Array2<f64>) -> FeatureMatrix {
    FeatureMatrix {
        frames,
        vad_applied: true,
        cmvn_applied: false,
        frame_shift_s: 0.010,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn two_component_1d() -> GmmModel {
        GmmModel {
            weights: array![0.3, 0.7],
            means: array![[-2.0], [2.0]],
            variances: array![[1.0], [1.0]],
            train_info: None,
        }
    }

    #[test]
    fn posteriors_sum_to_one() {
        let model = two_component_1d();
        for x in [-5.0, -0.1, 0.0, 3.7] {
            let post = model.frame_posteriors(array![x].view());
            assert!((post.sum() - 1.0).abs() < 1e-12);
            assert!(post.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn posterior_dominated_by_nearby_component() {
        let model = GmmModel {
            weights: array![0.5, 0.5],
            means: array![[-10.0], [10.0]],
            variances: array![[1.0], [1.0]],
            train_info: None,
        };
        let post = model.frame_posteriors(array![-10.0].view());
        assert!(post[0] > 0.99);
    }

    #[test]
    fn identical_components_give_uniform_posteriors() {
        let c = 4;
        let model = GmmModel {
            weights: Array1::from_elem(c, 1.0 / c as f64),
            means: Array2::zeros((c, 2)),
            variances: Array2::ones((c, 2)),
            train_info: None,
        };
        let post = model.frame_posteriors(array![0.3, -0.4].view());
        for &p in post.iter() {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn avg_ll_at_mode_of_unit_gaussian() {
        let model = GmmModel {
            weights: array![1.0],
            means: array![[0.0]],
            variances: array![[1.0]],
            train_info: None,
        };
        let feats = features_from_frames(array![[0.0]]);
        let ll = model.avg_log_likelihood(&feats);
        assert!((ll - (-0.5 * LN_2PI)).abs() < 1e-12);
    }

    #[test]
    fn avg_ll_invariant_to_frame_duplication() {
        let model = two_component_1d();
        let feats = features_from_frames(array![[0.5], [-1.0], [2.2]]);
        let doubled = features_from_frames(array![[0.5], [-1.0], [2.2], [0.5], [-1.0], [2.2]]);
        assert!((model.avg_log_likelihood(&feats) - model.avg_log_likelihood(&doubled)).abs() < 1e-12);
    }

    #[test]
    fn avg_ll_matches_direct_density_sum() {
        // brute-force density oracle on a 3-component model
        let model = GmmModel {
            weights: array![0.2, 0.5, 0.3],
            means: array![[0.0, 1.0], [2.0, -1.0], [-3.0, 0.5]],
            variances: array![[1.0, 2.0], [0.5, 1.5], [2.0, 0.7]],
            train_info: None,
        };
        let frames = array![[0.1, 0.2], [1.9, -0.8], [-2.5, 0.0], [4.0, 4.0]];
        let feats = features_from_frames(frames.clone());
        let mut expect = 0.0;
        for t in 0..frames.nrows() {
            let mut p = 0.0;
            for i in 0..3 {
                let mut dens = 1.0;
                for j in 0..2 {
                    let var = model.variances[[i, j]];
                    let diff = frames[[t, j]] - model.means[[i, j]];
                    dens *= (-0.5 * diff * diff / var).exp() / (2.0 * PI_F * var).sqrt();
                }
                p += model.weights[i] * dens;
            }
            expect += p.ln();
        }
        expect /= frames.nrows() as f64;
        assert!((model.avg_log_likelihood(&feats) - expect).abs() < 1e-10);
    }

    const PI_F: f64 = std::f64::consts::PI;

    #[test]
    fn em_recovers_two_component_mixture() {
        let gen = two_component_1d();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let frames = sample_frames(&gen, 4000, &mut rng);
        let feats = vec![features_from_frames(frames)];
        let cfg = GmmTrainConfig {
            n_components: 2,
            n_iters: 30,
            variance_floor: 0.001,
            seed: 1,
        };
        let model = train_ubm(&feats, &cfg).unwrap();
        // components may come out in either order
        let mut pairs: Vec<(f64, f64)> = model
            .weights
            .iter()
            .zip(model.means.column(0).iter())
            .map(|(&w, &m)| (m, w))
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        assert!((pairs[0].0 - (-2.0)).abs() < 0.1, "mean {}", pairs[0].0);
        assert!((pairs[1].0 - 2.0).abs() < 0.1, "mean {}", pairs[1].0);
        assert!((pairs[0].1 - 0.3).abs() < 0.05);
        assert!((pairs[1].1 - 0.7).abs() < 0.05);
    }

    #[test]
    fn em_log_likelihood_non_decreasing() {
        let gen = two_component_1d();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let feats = vec![features_from_frames(sample_frames(&gen, 1500, &mut rng))];
        let cfg = GmmTrainConfig {
            n_components: 4,
            n_iters: 15,
            variance_floor: 0.01,
            seed: 9,
        };
        let model = train_ubm(&feats, &cfg).unwrap();
        let lls = &model.train_info.as_ref().unwrap().log_likelihoods;
        assert_eq!(lls.len(), 15);
        for w in lls.windows(2) {
            assert!(
                w[1] >= w[0] - 1e-8 * w[0].abs(),
                "log-likelihood dropped: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn single_component_matches_sample_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let frames = Array2::from_shape_fn((500, 2), |_| rng.random::<f64>() * 4.0 - 2.0);
        let mean = frames.mean_axis(Axis(0)).unwrap();
        let var = frames.var_axis(Axis(0), 0.0);
        let feats = vec![features_from_frames(frames)];
        let cfg = GmmTrainConfig {
            n_components: 1,
            n_iters: 2,
            variance_floor: 0.0001,
            seed: 5,
        };
        let model = train_ubm(&feats, &cfg).unwrap();
        assert!((model.weights[0] - 1.0).abs() < 1e-12);
        for j in 0..2 {
            assert!((model.means[[0, j]] - mean[j]).abs() < 1e-8);
            assert!((model.variances[[0, j]] - var[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_iterations_rejected() {
        let feats = vec![features_from_frames(Array2::zeros((100, 2)))];
        let cfg = GmmTrainConfig {
            n_iters: 0,
            ..GmmTrainConfig::default()
        };
        assert!(matches!(train_ubm(&feats, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn insufficient_data_rejected() {
        let feats = vec![features_from_frames(Array2::zeros((50, 2)))];
        let cfg = GmmTrainConfig {
            n_components: 64,
            ..GmmTrainConfig::default()
        };
        assert!(matches!(
            train_ubm(&feats, &cfg),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn map_adaptation_interpolates_means() {
        let ubm = two_component_1d();
        // All mass on component 1 (frames near +2)
        let feats = features_from_frames(Array2::from_shape_fn((16, 1), |_| 2.0));
        let adapted = map_adapt(&ubm, &feats, 16.0).unwrap();
        // N_1 ~= 16 so alpha ~= 0.5: midpoint of E_1 = 2.0 and mu_1 = 2.0
        assert!((adapted.means[[1, 0]] - 2.0).abs() < 1e-6);
        assert_eq!(adapted.weights, ubm.weights);
        assert_eq!(adapted.variances, ubm.variances);
    }

    #[test]
    fn map_zero_mass_component_keeps_ubm_mean_exactly() {
        // component 0 is so remote its posterior underflows to zero
        let ubm = GmmModel {
            weights: array![0.5, 0.5],
            means: array![[-100.0], [2.0]],
            variances: array![[1.0], [1.0]],
            train_info: None,
        };
        let feats = features_from_frames(Array2::from_elem((16, 1), 2.0));
        let adapted = map_adapt(&ubm, &feats, 16.0).unwrap();
        assert_eq!(adapted.means[[0, 0]], ubm.means[[0, 0]]);
    }

    #[test]
    fn map_alpha_limits() {
        let ubm = GmmModel {
            weights: array![1.0],
            means: array![[0.0]],
            variances: array![[1.0]],
            train_info: None,
        };
        let feats = features_from_frames(Array2::from_elem((4, 1), 1.0));
        // N = 4 = relevance -> exact midpoint of E = 1.0 and mu = 0.0
        let adapted = map_adapt(&ubm, &feats, 4.0).unwrap();
        assert!((adapted.means[[0, 0]] - 0.5).abs() < 1e-12);
        // tiny relevance -> mean moves to E
        let adapted = map_adapt(&ubm, &feats, 1e-9).unwrap();
        assert!((adapted.means[[0, 0]] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn score_of_ubm_against_itself_is_zero() {
        let ubm = two_component_1d();
        let feats = features_from_frames(array![[0.3], [1.0], [-2.5]]);
        let score = score_gmm_ubm(&ubm, &ubm, &feats).unwrap();
        assert_eq!(score, 0.0);
    }

    #[test]
    fn score_invariant_to_frame_order() {
        let ubm = two_component_1d();
        let target = map_adapt(
            &ubm,
            &features_from_frames(Array2::from_elem((50, 1), 1.5)),
            16.0,
        )
        .unwrap();
        let a = features_from_frames(array![[0.3], [1.0], [-2.5]]);
        let b = features_from_frames(array![[-2.5], [0.3], [1.0]]);
        let sa = score_gmm_ubm(&target, &ubm, &a).unwrap();
        let sb = score_gmm_ubm(&target, &ubm, &b).unwrap();
        assert!((sa - sb).abs() < 1e-12);
    }

    #[test]
    fn adapted_model_scores_own_speaker_positive() {
        // test data drawn from the adapted model should score > 0 nearly always
        let gen = two_component_1d();
        let mut hits = 0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let speaker_frames =
                sample_frames(&gen, 300, &mut rng).mapv(|v| v + 0.8); // speaker offset
            let enroll = features_from_frames(speaker_frames.slice(ndarray::s![0..150, ..]).to_owned());
            let test = features_from_frames(speaker_frames.slice(ndarray::s![150.., ..]).to_owned());
            let target = map_adapt(&gen, &enroll, 16.0).unwrap();
            if score_gmm_ubm(&target, &gen, &test).unwrap() > 0.0 {
                hits += 1;
            }
        }
        assert!(hits >= 95, "positive in only {hits}/100 trials");
    }
}
