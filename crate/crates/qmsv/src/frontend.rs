//! Acoustic front-end: audio loading, MFCC extraction, energy-based voice
//! activity detection, cepstral mean/variance normalization, and the
//! active-frame truncation protocol used to build duration conditions.
//!
//! Features are 19 static cepstra plus delta and double-delta appended by
//! two-sided linear regression, 57 dimensions total. All operations are pure
//! functions of their inputs.

use ndarray::{Array1, Array2, Axis};
use rustfft::{num_complex::Complex, FftPlanner};
use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};

/// Static cepstra per frame before delta appending.
pub const N_CEPSTRA: usize = 19;
/// Full feature dimensionality: static + delta + double-delta.
pub const FEATURE_DIM: usize = 3 * N_CEPSTRA;

/// Energy below this floor counts as silence everywhere in the front-end.
const ENERGY_FLOOR: f64 = 1e-10;

/// Mono audio at a known sample rate, samples in `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct AudioSignal {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

/// Front-end parameters. Defaults follow the 8 kHz telephone setup.
#[derive(Debug, Clone)]
pub struct FrontendConfig {
    /// Analysis frame length in seconds.
    pub frame_len_s: f64,
    /// Frame shift in seconds.
    pub frame_shift_s: f64,
    /// Static cepstra kept per frame (c1..c19; c0 is dropped).
    pub n_cepstra: usize,
    /// Number of triangular mel filters.
    pub n_filters: usize,
    /// Quantile of the per-utterance frame-energy distribution used as the
    /// speech/non-speech threshold. Ties count as active.
    pub vad_energy_quantile: f64,
    /// Half-width of the delta regression window, in frames.
    pub delta_window: usize,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        FrontendConfig {
            frame_len_s: 0.020,
            frame_shift_s: 0.010,
            n_cepstra: N_CEPSTRA,
            n_filters: 27,
            vad_energy_quantile: 0.4,
            delta_window: 2,
        }
    }
}

impl FrontendConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_len_s > self.frame_shift_s && self.frame_shift_s > 0.0) {
            return Err(Error::Config(
                "require frame_len_s > frame_shift_s > 0".into(),
            ));
        }
        if self.n_cepstra < 1 {
            return Err(Error::Config("n_cepstra must be >= 1".into()));
        }
        if self.n_filters <= self.n_cepstra {
            return Err(Error::Config(
                "n_filters must exceed n_cepstra for a usable DCT".into(),
            ));
        }
        if !(self.vad_energy_quantile > 0.0 && self.vad_energy_quantile < 1.0) {
            return Err(Error::Config("vad_energy_quantile must be in (0,1)".into()));
        }
        if self.delta_window < 1 {
            return Err(Error::Config("delta_window must be >= 1".into()));
        }
        Ok(())
    }

    fn frame_len(&self, sample_rate: u32) -> usize {
        (self.frame_len_s * sample_rate as f64).round() as usize
    }

    fn frame_shift(&self, sample_rate: u32) -> usize {
        (self.frame_shift_s * sample_rate as f64).round() as usize
    }
}

/// A T x D matrix of feature frames plus processing-state flags.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub frames: Array2<f64>,
    pub vad_applied: bool,
    pub cmvn_applied: bool,
    /// Frame shift in seconds; frame count times this is the duration.
    pub frame_shift_s: f64,
}

impl FeatureMatrix {
    pub fn num_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn dim(&self) -> usize {
        self.frames.ncols()
    }

    /// Duration represented by the retained frames, in seconds.
    pub fn duration_s(&self) -> f64 {
        self.num_frames() as f64 * self.frame_shift_s
    }
}

/// Reads a single-channel 16-bit linear PCM file and scales to `[-1, 1]`.
pub fn read_audio(path: &Path) -> Result<AudioSignal> {
    let reader = hound::WavReader::open(path)
        .map_err(|e| Error::Audio(format!("{}: {e}", path.display())))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::Audio(format!(
            "unsupported channel count: {}",
            spec.channels
        )));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::Audio(format!(
            "unsupported encoding: {:?} {} bit (need 16-bit integer PCM)",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    let samples: Vec<f64> = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Audio(format!("{}: {e}", path.display())))?;
    if samples.is_empty() {
        return Err(Error::Audio("zero-length audio".into()));
    }
    Ok(AudioSignal {
        samples,
        sample_rate: spec.sample_rate,
    })
}

/// Writes a mono 16-bit PCM file; values are clamped to `[-1, 1]`.
pub fn write_audio(path: &Path, signal: &AudioSignal) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)
        .map_err(|e| Error::Audio(format!("{}: {e}", path.display())))?;
    for &s in &signal.samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer
            .write_sample(v)
            .map_err(|e| Error::Audio(e.to_string()))?;
    }
    writer.finalize().map_err(|e| Error::Audio(e.to_string()))?;
    Ok(())
}

/// Number of frames produced by the standard framing of `len` samples.
fn num_frames(len: usize, frame_len: usize, shift: usize) -> usize {
    if len < frame_len {
        0
    } else {
        1 + (len - frame_len) / shift
    }
}

fn hamming(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Mel scale used by the filterbank.
fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10.0_f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filterbank over the one-sided power spectrum.
///
/// Returns `n_filters` rows of `n_fft/2 + 1` weights covering 0..Nyquist.
fn mel_filterbank(n_filters: usize, n_fft: usize, sample_rate: u32) -> Array2<f64> {
    let n_bins = n_fft / 2 + 1;
    let nyquist = sample_rate as f64 / 2.0;
    let mel_max = hz_to_mel(nyquist);
    let centers: Vec<f64> = (0..n_filters + 2)
        .map(|i| mel_to_hz(mel_max * i as f64 / (n_filters + 1) as f64))
        .collect();
    let bin_hz = sample_rate as f64 / n_fft as f64;
    let mut bank = Array2::zeros((n_filters, n_bins));
    for f in 0..n_filters {
        let (lo, mid, hi) = (centers[f], centers[f + 1], centers[f + 2]);
        for b in 0..n_bins {
            let freq = b as f64 * bin_hz;
            let w = if freq >= lo && freq <= mid {
                (freq - lo) / (mid - lo)
            } else if freq > mid && freq <= hi {
                (hi - freq) / (hi - mid)
            } else {
                0.0
            };
            bank[[f, b]] = w;
        }
    }
    bank
}

/// DCT-II of the log filterbank energies, coefficients `1..=n_cepstra`.
///
/// The zeroth coefficient (overall log energy) is dropped; CMVN removes any
/// residual scale differences downstream.
fn dct_rows(log_mel: &Array2<f64>, n_cepstra: usize) -> Array2<f64> {
    let n_filters = log_mel.ncols();
    let t = log_mel.nrows();
    let scale = (2.0 / n_filters as f64).sqrt();
    let mut table = Array2::zeros((n_cepstra, n_filters));
    for k in 1..=n_cepstra {
        for m in 0..n_filters {
            table[[k - 1, m]] =
                scale * (PI * k as f64 * (m as f64 + 0.5) / n_filters as f64).cos();
        }
    }
    let mut out = Array2::zeros((t, n_cepstra));
    for (i, row) in log_mel.axis_iter(Axis(0)).enumerate() {
        for k in 0..n_cepstra {
            out[[i, k]] = table.row(k).dot(&row);
        }
    }
    out
}

/// Two-sided linear-regression deltas with edge replication.
fn deltas(m: &Array2<f64>, window: usize) -> Array2<f64> {
    let t = m.nrows() as isize;
    let denom: f64 = 2.0 * (1..=window).map(|n| (n * n) as f64).sum::<f64>();
    let mut out = Array2::zeros(m.raw_dim());
    for i in 0..m.nrows() {
        for n in 1..=window as isize {
            let fwd = (i as isize + n).clamp(0, t - 1) as usize;
            let bwd = (i as isize - n).clamp(0, t - 1) as usize;
            for d in 0..m.ncols() {
                out[[i, d]] += n as f64 * (m[[fwd, d]] - m[[bwd, d]]);
            }
        }
    }
    out / denom
}

/// Extracts static MFCCs with appended deltas and double-deltas.
///
/// Output has `1 + (len - frame_len)/shift` frames of `3 * n_cepstra`
/// dimensions, with `vad_applied` and `cmvn_applied` both false.
pub fn extract_mfcc(signal: &AudioSignal, cfg: &FrontendConfig) -> Result<FeatureMatrix> {
    cfg.validate()?;
    let frame_len = cfg.frame_len(signal.sample_rate);
    let shift = cfg.frame_shift(signal.sample_rate);
    let t = num_frames(signal.samples.len(), frame_len, shift);
    if t == 0 {
        return Err(Error::InsufficientData(format!(
            "signal of {} samples is shorter than one {frame_len}-sample frame",
            signal.samples.len()
        )));
    }

    let n_fft = frame_len.next_power_of_two();
    let n_bins = n_fft / 2 + 1;
    let window = hamming(frame_len);
    let bank = mel_filterbank(cfg.n_filters, n_fft, signal.sample_rate);

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n_fft);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];

    let mut log_mel = Array2::zeros((t, cfg.n_filters));
    let mut power = Array1::zeros(n_bins);
    for i in 0..t {
        let start = i * shift;
        for (j, slot) in buf.iter_mut().enumerate() {
            let v = if j < frame_len {
                signal.samples[start + j] * window[j]
            } else {
                0.0
            };
            *slot = Complex::new(v, 0.0);
        }
        fft.process(&mut buf);
        for (b, p) in power.iter_mut().enumerate() {
            *p = buf[b].norm_sqr();
        }
        for f in 0..cfg.n_filters {
            let e = bank.row(f).dot(&power);
            log_mel[[i, f]] = e.max(ENERGY_FLOOR).ln();
        }
    }

    let statics = dct_rows(&log_mel, cfg.n_cepstra);
    let d1 = deltas(&statics, cfg.delta_window);
    let d2 = deltas(&d1, cfg.delta_window);
    let mut frames = Array2::zeros((t, 3 * cfg.n_cepstra));
    frames
        .slice_mut(ndarray::s![.., 0..cfg.n_cepstra])
        .assign(&statics);
    frames
        .slice_mut(ndarray::s![.., cfg.n_cepstra..2 * cfg.n_cepstra])
        .assign(&d1);
    frames
        .slice_mut(ndarray::s![.., 2 * cfg.n_cepstra..])
        .assign(&d2);

    Ok(FeatureMatrix {
        frames,
        vad_applied: false,
        cmvn_applied: false,
        frame_shift_s: cfg.frame_shift_s,
    })
}

/// Per-frame raw energies under the same framing as [`extract_mfcc`].
fn frame_energies(signal: &AudioSignal, cfg: &FrontendConfig) -> Vec<f64> {
    let frame_len = cfg.frame_len(signal.sample_rate);
    let shift = cfg.frame_shift(signal.sample_rate);
    let t = num_frames(signal.samples.len(), frame_len, shift);
    (0..t)
        .map(|i| {
            signal.samples[i * shift..i * shift + frame_len]
                .iter()
                .map(|s| s * s)
                .sum()
        })
        .collect()
}

/// Linearly interpolated quantile of an unsorted sample.
fn quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Marks a frame active when its energy reaches the utterance's energy
/// quantile. Ties at the threshold count as active; frames at or below the
/// absolute silence floor never do, so an all-silent utterance yields an
/// all-false mask.
pub fn energy_vad(signal: &AudioSignal, cfg: &FrontendConfig) -> Vec<bool> {
    let energies = frame_energies(signal, cfg);
    if energies.is_empty() {
        return Vec::new();
    }
    let threshold = quantile(&energies, cfg.vad_energy_quantile);
    energies
        .iter()
        .map(|&e| e > ENERGY_FLOOR && e >= threshold)
        .collect()
}

/// Retains the rows of `features` whose mask entry is true and sets
/// `vad_applied`.
pub fn apply_vad(features: &FeatureMatrix, mask: &[bool]) -> Result<FeatureMatrix> {
    if mask.len() != features.num_frames() {
        return Err(Error::DimMismatch(format!(
            "mask length {} vs {} frames",
            mask.len(),
            features.num_frames()
        )));
    }
    let kept: Vec<usize> = mask
        .iter()
        .enumerate()
        .filter_map(|(i, &m)| m.then_some(i))
        .collect();
    if kept.is_empty() {
        return Err(Error::InsufficientData(
            "no active frames after voice activity detection".into(),
        ));
    }
    Ok(FeatureMatrix {
        frames: features.frames.select(Axis(0), &kept),
        vad_applied: true,
        cmvn_applied: features.cmvn_applied,
        frame_shift_s: features.frame_shift_s,
    })
}

/// Cepstral mean and variance normalization over the retained frames.
///
/// Each dimension is shifted to zero mean and scaled to unit variance.
/// Columns that are exactly constant are zeroed without any division.
pub fn cmvn(features: &FeatureMatrix) -> Result<FeatureMatrix> {
    let t = features.num_frames();
    if t < 2 {
        return Err(Error::InsufficientData(
            "cmvn requires at least 2 frames".into(),
        ));
    }
    if !features.vad_applied {
        return Err(Error::Config(
            "cmvn expects voice activity detection to have been applied".into(),
        ));
    }
    let mut frames = features.frames.clone();
    for mut col in frames.axis_iter_mut(Axis(1)) {
        let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = col.iter().cloned().fold(f64::INFINITY, f64::min);
        if max == min {
            col.fill(0.0);
            continue;
        }
        let mean = col.sum() / t as f64;
        col.mapv_inplace(|v| v - mean);
        let var = col.iter().map(|v| v * v).sum::<f64>() / t as f64;
        if var > 0.0 {
            let inv_std = 1.0 / var.sqrt();
            col.mapv_inplace(|v| v * inv_std);
        }
    }
    Ok(FeatureMatrix {
        frames,
        vad_applied: true,
        cmvn_applied: true,
        frame_shift_s: features.frame_shift_s,
    })
}

/// How many active frames to retain after the skip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keep {
    Frames(usize),
    Full,
}

/// Drops the first `skip` active frames and keeps the next `keep`.
///
/// With 10 ms shift the retained count maps directly to a duration label:
/// 200 frames = 2 s, 500 = 5 s, 1000 = 10 s, 2000 = 20 s.
pub fn truncate_active(features: &FeatureMatrix, skip: usize, keep: Keep) -> Result<FeatureMatrix> {
    if !features.vad_applied {
        return Err(Error::Config(
            "truncation operates on voice-active frames only".into(),
        ));
    }
    let t = features.num_frames();
    let available = t.saturating_sub(skip);
    let count = match keep {
        Keep::Frames(k) => {
            if available < k || k == 0 {
                return Err(Error::InsufficientActiveSpeech {
                    available,
                    required: skip + k,
                });
            }
            k
        }
        Keep::Full => {
            if available == 0 {
                return Err(Error::InsufficientActiveSpeech {
                    available,
                    required: skip + 1,
                });
            }
            available
        }
    };
    Ok(FeatureMatrix {
        frames: features
            .frames
            .slice(ndarray::s![skip..skip + count, ..])
            .to_owned(),
        vad_applied: true,
        cmvn_applied: features.cmvn_applied,
        frame_shift_s: features.frame_shift_s,
    })
}
