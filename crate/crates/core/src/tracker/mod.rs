//! The deep inertial tracker.
//!
//! A strictly causal encoder (two strided 1-D convolutions over each raw
//! window, two stacked LSTM layers across windows, a linear projection to
//! the latent space) followed by a feedback regressor (two FC layers that
//! also see the previous window's estimate). Gradients are hand-rolled
//! reverse mode in [`backward`]; there is no autodiff dependency.

use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array3, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;
use crate::scalar::{wrap_angle, Scalar};
use crate::sim::Pose2D;

mod backward;
mod batch;
mod forward;

pub use backward::{backward, mse_gradient, mse_loss_and_grad};
pub use batch::{sequence_batch, WindowBatch};
pub use forward::{encode, forward, regress, ForwardPass, LatentBatch};

#[derive(Debug, Error)]
pub enum TrackerError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TrackerError>;

/// Output coordinate representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    /// Per-window world-frame displacement `(dx, dy)`.
    Cartesian,
    /// Per-window `(distance, heading change)`; the heading component goes
    /// through `tanh` scaled by pi, so it always lies in `[-pi, pi]`.
    Polar,
}

impl fmt::Display for Head {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Head::Cartesian => write!(f, "cartesian"),
            Head::Polar => write!(f, "polar"),
        }
    }
}

impl FromStr for Head {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cartesian" => Ok(Head::Cartesian),
            "polar" => Ok(Head::Polar),
            other => Err(format!("unknown head '{other}' (cartesian|polar)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub input_channels: usize,
    /// Samples per window.
    pub window_len: usize,
    /// Windows per sequence.
    pub windows: usize,
    pub conv1_out: usize,
    pub conv2_out: usize,
    pub kernel: usize,
    pub stride: usize,
    /// LSTM hidden width (both stacked layers).
    pub hidden: usize,
    /// Latent width after the projection.
    pub latent: usize,
    /// Regressor hidden width.
    pub reg_hidden: usize,
    pub head: Head,
    /// When false, the magnetometer channels are zeroed at batch build time.
    pub use_magnetometer: bool,
}

impl TrackerConfig {
    /// Desk-scale default: 0.5 s windows over 20 s sequences at 70 Hz.
    pub fn default_with_head(head: Head) -> Self {
        Self {
            input_channels: 9,
            window_len: 35,
            windows: 40,
            conv1_out: 16,
            conv2_out: 32,
            kernel: 5,
            stride: 2,
            hidden: 64,
            latent: 32,
            reg_hidden: 32,
            head,
            use_magnetometer: true,
        }
    }

    /// Small net for gradient checks and fast unit tests.
    pub fn tiny(head: Head) -> Self {
        Self {
            input_channels: 9,
            window_len: 11,
            windows: 3,
            conv1_out: 3,
            conv2_out: 4,
            kernel: 3,
            stride: 2,
            hidden: 4,
            latent: 3,
            reg_hidden: 4,
            head,
            use_magnetometer: true,
        }
    }

    pub fn conv1_len(&self) -> usize {
        (self.window_len - self.kernel) / self.stride + 1
    }

    pub fn conv2_len(&self) -> usize {
        (self.conv1_len() - self.kernel) / self.stride + 1
    }

    /// Flattened conv output width fed to the first LSTM layer.
    pub fn flat_dim(&self) -> usize {
        self.conv2_out * self.conv2_len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len < self.kernel || self.conv1_len() < self.kernel {
            return Err(TrackerError::InvalidConfig(format!(
                "window {} too short for kernel {} at stride {}",
                self.window_len, self.kernel, self.stride
            )));
        }
        if self.windows == 0
            || self.input_channels == 0
            || self.hidden == 0
            || self.latent == 0
            || self.reg_hidden == 0
            || self.stride == 0
        {
            return Err(TrackerError::InvalidConfig("zero-sized dimension".into()));
        }
        Ok(())
    }
}

/// Flat offsets of each weight tensor inside the parameter vector.
#[derive(Debug, Clone)]
pub struct Layout {
    pub conv1_w: Range<usize>,
    pub conv1_b: Range<usize>,
    pub conv2_w: Range<usize>,
    pub conv2_b: Range<usize>,
    /// Per stacked layer: input weights, recurrent weights, bias. Gate order
    /// within the `4H` dimension is `input, forget, cell, output`.
    pub lstm_wx: [Range<usize>; 2],
    pub lstm_wh: [Range<usize>; 2],
    pub lstm_b: [Range<usize>; 2],
    pub fc_w: Range<usize>,
    pub fc_b: Range<usize>,
    pub reg1_w: Range<usize>,
    pub reg1_b: Range<usize>,
    pub reg2_w: Range<usize>,
    pub reg2_b: Range<usize>,
    pub total: usize,
}

impl Layout {
    pub fn of(cfg: &TrackerConfig) -> Layout {
        let mut at = 0usize;
        let mut take = |len: usize| {
            let r = at..at + len;
            at += len;
            r
        };
        let (ic, k) = (cfg.input_channels, cfg.kernel);
        let h4 = 4 * cfg.hidden;
        let conv1_w = take(cfg.conv1_out * ic * k);
        let conv1_b = take(cfg.conv1_out);
        let conv2_w = take(cfg.conv2_out * cfg.conv1_out * k);
        let conv2_b = take(cfg.conv2_out);
        let lstm1_wx = take(h4 * cfg.flat_dim());
        let lstm1_wh = take(h4 * cfg.hidden);
        let lstm1_b = take(h4);
        let lstm2_wx = take(h4 * cfg.hidden);
        let lstm2_wh = take(h4 * cfg.hidden);
        let lstm2_b = take(h4);
        let fc_w = take(cfg.latent * cfg.hidden);
        let fc_b = take(cfg.latent);
        let reg1_w = take(cfg.reg_hidden * (cfg.latent + 2));
        let reg1_b = take(cfg.reg_hidden);
        let reg2_w = take(2 * cfg.reg_hidden);
        let reg2_b = take(2);
        Layout {
            conv1_w,
            conv1_b,
            conv2_w,
            conv2_b,
            lstm_wx: [lstm1_wx, lstm2_wx],
            lstm_wh: [lstm1_wh, lstm2_wh],
            lstm_b: [lstm1_b, lstm2_b],
            fc_w,
            fc_b,
            reg1_w,
            reg1_b,
            reg2_w,
            reg2_b,
            total: at,
        }
    }
}

/// All tracker weights in one flat vector, plus the shape configuration.
#[derive(Debug, Clone)]
pub struct TrackerParams<T> {
    pub cfg: TrackerConfig,
    theta: Vec<T>,
}

impl<T: Scalar> TrackerParams<T> {
    pub fn zeros(cfg: TrackerConfig) -> Result<Self> {
        cfg.validate()?;
        let n = Layout::of(&cfg).total;
        Ok(Self { cfg, theta: vec![T::zero(); n] })
    }

    /// Uniform fan-scaled initialization; LSTM forget-gate biases start at 1.
    pub fn init(cfg: TrackerConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let lay = Layout::of(&cfg);
        let mut theta = vec![T::zero(); lay.total];
        let mut r = rng::stream(seed, "init", 0);
        let mut fill = |range: &Range<usize>, theta: &mut Vec<T>, fan_in: usize, fan_out: usize| {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in &mut theta[range.clone()] {
                *v = T::c(r.gen_range(-a..a));
            }
        };
        let (ic, k, h) = (cfg.input_channels, cfg.kernel, cfg.hidden);
        fill(&lay.conv1_w, &mut theta, ic * k, cfg.conv1_out * k);
        fill(&lay.conv2_w, &mut theta, cfg.conv1_out * k, cfg.conv2_out * k);
        fill(&lay.lstm_wx[0], &mut theta, cfg.flat_dim(), h);
        fill(&lay.lstm_wh[0], &mut theta, h, h);
        fill(&lay.lstm_wx[1], &mut theta, h, h);
        fill(&lay.lstm_wh[1], &mut theta, h, h);
        fill(&lay.fc_w, &mut theta, h, cfg.latent);
        fill(&lay.reg1_w, &mut theta, cfg.latent + 2, cfg.reg_hidden);
        fill(&lay.reg2_w, &mut theta, cfg.reg_hidden, 2);
        for layer in 0..2 {
            let b = lay.lstm_b[layer].clone();
            for v in &mut theta[b.start + h..b.start + 2 * h] {
                *v = T::one();
            }
        }
        Ok(Self { cfg, theta })
    }

    pub fn from_theta(cfg: TrackerConfig, theta: Vec<T>) -> Result<Self> {
        cfg.validate()?;
        let expect = Layout::of(&cfg).total;
        if theta.len() != expect {
            return Err(TrackerError::ShapeMismatch(format!(
                "{} parameters, layout wants {expect}",
                theta.len()
            )));
        }
        Ok(Self { cfg, theta })
    }

    pub fn layout(&self) -> Layout {
        Layout::of(&self.cfg)
    }

    pub fn theta(&self) -> &[T] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [T] {
        &mut self.theta
    }

    pub fn num_params(&self) -> usize {
        self.theta.len()
    }

    /// Versioned JSON checkpoint; values round-trip bitwise.
    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let ckpt = Checkpoint {
            format_version: CHECKPOINT_VERSION,
            config: self.cfg,
            theta: self.theta.iter().map(|v| v.to_f64_c()).collect(),
        };
        let text = serde_json::to_string(&ckpt).map_err(|e| TrackerError::Checkpoint(e.to_string()))?;
        if let Some(parent) = path.as_ref().parent() {
            std::fs::create_dir_all(parent)?;
        }
        let tmp = path.as_ref().with_extension("json.tmp");
        std::fs::write(&tmp, text)?;
        std::fs::rename(tmp, path.as_ref())?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let ckpt: Checkpoint =
            serde_json::from_str(&text).map_err(|e| TrackerError::Checkpoint(e.to_string()))?;
        if ckpt.format_version != CHECKPOINT_VERSION {
            return Err(TrackerError::Checkpoint(format!(
                "unsupported checkpoint version {}",
                ckpt.format_version
            )));
        }
        Self::from_theta(ckpt.config, ckpt.theta.into_iter().map(T::c).collect())
    }
}

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format_version: u32,
    config: TrackerConfig,
    theta: Vec<f64>,
}

/// Mean squared error over all windows: `(1/N) sum ||y_n - yhat_n||^2`.
pub fn loss_mse<T: Scalar>(y: &Array3<T>, yhat: &Array3<T>) -> Result<T> {
    if y.shape() != yhat.shape() {
        return Err(TrackerError::ShapeMismatch(format!(
            "{:?} vs {:?}",
            y.shape(),
            yhat.shape()
        )));
    }
    let n = y.shape()[0] * y.shape()[1];
    if n == 0 {
        return Err(TrackerError::EmptyBatch);
    }
    let sum = y
        .iter()
        .zip(yhat.iter())
        .map(|(a, b)| {
            let d = *a - *b;
            d * d
        })
        .sum::<T>();
    Ok(sum / T::c(n as f64))
}

/// Integrated trajectory of per-window estimates; poses at window
/// boundaries, starting with the initial pose.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub poses: Vec<Pose2D<T>>,
    /// False for the Cartesian head, which produces no heading.
    pub has_heading: bool,
}

impl<T: Scalar> Trajectory<T> {
    pub fn end(&self) -> &Pose2D<T> {
        self.poses.last().expect("trajectory has the initial pose")
    }
}

/// Chain per-window estimates into a trajectory.
///
/// Cartesian: positions accumulate `(dx, dy)`; heading stays at the initial
/// value and is marked absent. Polar: heading accumulates first, then the
/// position advances `dd` along the new heading.
pub fn integrate_estimates<T: Scalar>(
    estimates: ArrayView2<T>,
    head: Head,
    initial: Pose2D<T>,
) -> Trajectory<T> {
    let mut poses = Vec::with_capacity(estimates.nrows() + 1);
    poses.push(initial);
    let (mut x, mut y, mut phi) = (initial.x, initial.y, initial.phi);
    for row in estimates.rows() {
        match head {
            Head::Cartesian => {
                x += row[0];
                y += row[1];
            }
            Head::Polar => {
                phi = wrap_angle(phi + row[1]);
                x += row[0] * phi.cos();
                y += row[0] * phi.sin();
            }
        }
        poses.push(Pose2D::new(x, y, phi));
    }
    Trajectory {
        poses,
        has_heading: head == Head::Polar,
    }
}
