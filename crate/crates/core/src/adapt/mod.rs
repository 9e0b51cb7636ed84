//! Training engines: per-domain / multi-domain supervised training and the
//! alternating transport-based adaptation loop.

use ndarray::Array2;
use thiserror::Error;

use crate::scalar::Scalar;
use crate::sim::{Dataset, DomainIndex, SimError, NUM_DOMAINS};
use crate::tracker::{sequence_batch, TrackerConfig, TrackerError, WindowBatch};

mod deepjdot;
mod optimizer;
mod supervised;
mod sweep;

pub use deepjdot::{train_deepjdot, transported_loss, transported_loss_grad};
pub use optimizer::Adam;
pub use supervised::train_supervised;
pub use sweep::{adaptation_sweep, SweepMethod, SweepOutcome};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged {
        epoch: usize,
        loss: f64,
        history: TrainLog,
    },

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Tracker(#[from] TrackerError),

    #[error(transparent)]
    Ot(#[from] crate::ot::OtError),

    #[error(transparent)]
    Eval(#[from] crate::eval::EvalError),

    #[error(transparent)]
    Sim(#[from] SimError),
}

pub type Result<T> = std::result::Result<T, TrainError>;

/// Optimization and transport hyper-parameters for one training run.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_opt: f64,
    pub epochs: usize,
    /// Sequences per minibatch.
    pub batch_sequences: usize,
    /// Windows subsampled per side for the transport problems.
    pub n_ot: usize,
    /// Feature-term scale in the joint cost.
    pub alpha: f64,
    /// Entropic regularization, relative to the mean cost.
    pub epsilon: f64,
    /// Weight of the alignment term.
    pub align_weight: f64,
    /// Global-norm gradient clip.
    pub grad_clip: Option<f64>,
    pub sinkhorn_iters: usize,
    /// When true, the alignment divergence uses the label-mixed cost on all
    /// three terms (source labels / target surrogates); when false it is the
    /// feature-only divergence on latents.
    pub align_label_cost: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps_opt: 1e-8,
            epochs: 30,
            batch_sequences: 8,
            n_ot: 128,
            alpha: 0.001,
            epsilon: 0.1,
            align_weight: 1.0,
            grad_clip: Some(10.0),
            sinkhorn_iters: 300,
            align_label_cost: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(TrainError::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.epochs == 0 || self.batch_sequences == 0 {
            return Err(TrainError::InvalidConfig("epochs and batch size must be positive".into()));
        }
        if self.epsilon <= 0.0 {
            return Err(TrainError::InvalidConfig("epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Consecutive-from-zero source set and its complement.
#[derive(Debug, Clone)]
pub struct DomainSplit {
    pub source: Vec<DomainIndex>,
    pub targets: Vec<DomainIndex>,
}

impl DomainSplit {
    /// `m` source domains `{0..m-1}`, targets `{m..7}`.
    pub fn consecutive(m: usize) -> Result<Self> {
        if m == 0 || m > NUM_DOMAINS {
            return Err(TrainError::InvalidConfig(format!(
                "source count {m} outside 1..={NUM_DOMAINS}"
            )));
        }
        Ok(Self {
            source: (0..m).map(|k| DomainIndex::new(k).expect("k < 8")).collect(),
            targets: (m..NUM_DOMAINS)
                .map(|k| DomainIndex::new(k).expect("k < 8"))
                .collect(),
        })
    }
}

/// Which split of each session to draw sequences from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitSide {
    Train,
    Test,
}

/// Assemble one batch from the given domains' split sequences.
pub fn domain_batch<T: Scalar>(
    dataset: &Dataset<T>,
    domains: &[DomainIndex],
    side: SplitSide,
    tracker_cfg: &TrackerConfig,
) -> Result<WindowBatch<T>> {
    let mut parts = Vec::new();
    for &d in domains {
        let split = dataset.split(d);
        let seqs = match side {
            SplitSide::Train => &split.train,
            SplitSide::Test => &split.test,
        };
        if seqs.is_empty() {
            continue;
        }
        parts.push(sequence_batch(dataset.session(d), seqs, tracker_cfg, dataset.gravity)?);
    }
    if parts.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    Ok(WindowBatch::concat(&parts)?)
}

/// Per-epoch mean losses.
#[derive(Debug, Clone, Copy)]
pub struct EpochLoss {
    pub epoch: usize,
    pub regression: f64,
    pub alignment: f64,
}

/// Loss history plus transport-solver diagnostics.
#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    pub history: Vec<EpochLoss>,
    /// Batches whose transport solves stayed unconverged after the retry and
    /// were applied as plain supervised steps.
    pub skipped_ot_batches: usize,
    /// Solves that needed the relaxed-epsilon retry.
    pub sinkhorn_retries: usize,
}

/// Latent rows of the flattened `(B*S, latent)` view for chosen windows.
pub(crate) fn gather_rows<T: Scalar>(flat: &Array2<T>, idx: &[usize]) -> Array2<T> {
    flat.select(ndarray::Axis(0), idx)
}
