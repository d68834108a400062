//! Speaker verification toolkit built around Baum-Welch statistics.
//!
//! The crate implements two classical recognizers and the glue to combine
//! them:
//!
//! - a GMM-UBM system (MAP-adapted speaker models, average log-likelihood
//!   ratio scoring), and
//! - an i-vector system (total-variability subspace, LDA projection,
//!   Gaussian PLDA scoring).
//!
//! On top of the recognizers it provides per-utterance quality measures
//! derived from the normalized zeroth-order Baum-Welch statistics (KL
//! divergences, `l1`/`l2` norms, an overlap measure), duration-based and
//! i-vector-uncertainty baselines, and logistic-regression score fusion
//! that can take the quality values as side information.
//!
//! The [`harness`] module generates synthetic feature corpora and runs the
//! full pipeline across enrollment/test duration conditions, producing
//! EER/minDCF tables through the [`eval`] module.
//!
//! Pipeline outline:
//!
//! ```text
//! audio -> frontend (MFCC, VAD, CMVN, truncation)
//!       -> gmm (UBM training, MAP adaptation, GMM-UBM score)
//!       -> stats (Baum-Welch accumulation, normalized zeroth order)
//!       -> subspace (i-vector extraction, LDA)
//!       -> plda (GPLDA scoring)
//!       -> quality (per-utterance quality measures)
//!       -> fusion (linear / quality-augmented logistic fusion)
//!       -> eval (EER, minDCF, DET points)
//! ```

pub mod config;
pub mod error;
pub mod eval;
pub mod frontend;
pub mod fusion;
pub mod gmm;
pub mod harness;
pub mod io;
pub(crate) mod linalg;
pub mod plda;
pub mod quality;
pub mod stats;
pub mod subspace;

pub use error::{Error, Result};
