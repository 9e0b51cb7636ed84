//! Forward evaluation with cached activations for the backward pass.

use ndarray::{s, Array2, Array3, Array4, ArrayView2, Zip};

use crate::scalar::Scalar;

use super::{Head, Result, TrackerError, TrackerParams, WindowBatch};

pub(super) const LEAKY_SLOPE: f64 = 0.01;

#[inline]
fn leaky<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::c(LEAKY_SLOPE) * x
    }
}

#[inline]
fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Latent vectors of every window in a batch, row `b * S + s`.
#[derive(Debug, Clone)]
pub struct LatentBatch<T> {
    pub values: Array2<T>,
    pub origin: Vec<(usize, usize)>,
}

/// Cached forward activations of one batch.
#[derive(Debug)]
pub struct ForwardPass<T> {
    pub(super) pre1: Array4<T>,
    pub(super) act1: Array4<T>,
    pub(super) pre2: Array4<T>,
    /// Post-activation conv output, flattened per window: `(B, S, F)`.
    pub(super) flat: Array3<T>,
    /// Post-activation gate values `(i, f, g, o)` per layer: `(B, S, 4H)`.
    pub(super) gates: [Array3<T>; 2],
    pub(super) cells: [Array3<T>; 2],
    pub(super) tanh_c: [Array3<T>; 2],
    pub(super) hidden: [Array3<T>; 2],
    pub(super) latents: Array3<T>,
    /// Regressor input: latent concatenated with the previous estimate.
    pub(super) reg_in: Array3<T>,
    pub(super) reg_h: Array3<T>,
    estimates: Array3<T>,
}

impl<T: Scalar> ForwardPass<T> {
    /// Per-window estimates, `(B, S, 2)`.
    pub fn estimates(&self) -> &Array3<T> {
        &self.estimates
    }

    /// Per-window latents, `(B, S, latent)`.
    pub fn latents(&self) -> &Array3<T> {
        &self.latents
    }

    pub fn latent_batch(&self) -> LatentBatch<T> {
        let (b, s, l) = self.latents.dim();
        let values = self
            .latents
            .to_shape((b * s, l))
            .expect("latents are contiguous")
            .to_owned();
        let origin = (0..b).flat_map(|bi| (0..s).map(move |si| (bi, si))).collect();
        LatentBatch { values, origin }
    }
}

fn view2<'a, T: Scalar>(theta: &'a [T], range: &std::ops::Range<usize>, rows: usize, cols: usize) -> ArrayView2<'a, T> {
    ArrayView2::from_shape((rows, cols), &theta[range.clone()]).expect("layout range matches shape")
}

/// Run the tracker on a batch: conv stack per window, stacked LSTM across
/// windows (state reset per sequence), latent projection, then the feedback
/// regressor. Window `s` outputs depend only on windows `<= s`.
pub fn forward<T: Scalar>(params: &TrackerParams<T>, batch: &WindowBatch<T>) -> Result<ForwardPass<T>> {
    let cfg = &params.cfg;
    let lay = params.layout();
    let theta = params.theta();
    let (b, s, w, c) = batch.inputs.dim();
    if s != cfg.windows || w != cfg.window_len || c != cfg.input_channels {
        return Err(TrackerError::ShapeMismatch(format!(
            "batch ({b},{s},{w},{c}) vs config ({}, {}, {})",
            cfg.windows, cfg.window_len, cfg.input_channels
        )));
    }
    if b == 0 {
        return Err(TrackerError::EmptyBatch);
    }

    let (c1, c2, k, stride) = (cfg.conv1_out, cfg.conv2_out, cfg.kernel, cfg.stride);
    let (l1, l2, flat_dim, h) = (cfg.conv1_len(), cfg.conv2_len(), cfg.flat_dim(), cfg.hidden);

    // Convolution front-end.
    let mut pre1 = Array4::zeros((b, s, c1, l1));
    let mut act1 = Array4::zeros((b, s, c1, l1));
    let mut pre2 = Array4::zeros((b, s, c2, l2));
    let mut flat = Array3::zeros((b, s, flat_dim));
    let w1 = &theta[lay.conv1_w.clone()];
    let b1 = &theta[lay.conv1_b.clone()];
    let w2 = &theta[lay.conv2_w.clone()];
    let b2 = &theta[lay.conv2_b.clone()];
    for bi in 0..b {
        for si in 0..s {
            for oc in 0..c1 {
                for t in 0..l1 {
                    let mut acc = b1[oc];
                    for ic in 0..c {
                        let wbase = (oc * c + ic) * k;
                        for kk in 0..k {
                            acc += w1[wbase + kk] * batch.inputs[[bi, si, t * stride + kk, ic]];
                        }
                    }
                    pre1[[bi, si, oc, t]] = acc;
                    act1[[bi, si, oc, t]] = leaky(acc);
                }
            }
            for oc in 0..c2 {
                for t in 0..l2 {
                    let mut acc = b2[oc];
                    for ic in 0..c1 {
                        let wbase = (oc * c1 + ic) * k;
                        for kk in 0..k {
                            acc += w2[wbase + kk] * act1[[bi, si, ic, t * stride + kk]];
                        }
                    }
                    pre2[[bi, si, oc, t]] = acc;
                    flat[[bi, si, oc * l2 + t]] = leaky(acc);
                }
            }
        }
    }

    // Stacked LSTM across windows.
    let mut gates = [Array3::zeros((b, s, 4 * h)), Array3::zeros((b, s, 4 * h))];
    let mut cells = [Array3::zeros((b, s, h)), Array3::zeros((b, s, h))];
    let mut tanh_c = [Array3::zeros((b, s, h)), Array3::zeros((b, s, h))];
    let mut hidden = [Array3::zeros((b, s, h)), Array3::zeros((b, s, h))];
    for layer in 0..2 {
        let in_dim = if layer == 0 { flat_dim } else { h };
        let wx = view2(theta, &lay.lstm_wx[layer], 4 * h, in_dim);
        let wh = view2(theta, &lay.lstm_wh[layer], 4 * h, h);
        let bias = &theta[lay.lstm_b[layer].clone()];

        let mut h_prev: Array2<T> = Array2::zeros((b, h));
        let mut c_prev: Array2<T> = Array2::zeros((b, h));
        for si in 0..s {
            let x_s: Array2<T> = if layer == 0 {
                flat.slice(s![.., si, ..]).to_owned()
            } else {
                hidden[0].slice(s![.., si, ..]).to_owned()
            };
            let mut z = x_s.dot(&wx.t()) + h_prev.dot(&wh.t());
            for mut row in z.rows_mut() {
                for (v, bb) in row.iter_mut().zip(bias.iter()) {
                    *v += *bb;
                }
            }

            let mut gate = Array2::zeros((b, 4 * h));
            let mut c_new = Array2::zeros((b, h));
            let mut tc_new = Array2::zeros((b, h));
            let mut h_new = Array2::zeros((b, h));
            for bi in 0..b {
                for j in 0..h {
                    let i_g = sigmoid(z[[bi, j]]);
                    let f_g = sigmoid(z[[bi, h + j]]);
                    let g_g = z[[bi, 2 * h + j]].tanh();
                    let o_g = sigmoid(z[[bi, 3 * h + j]]);
                    let c_v = f_g * c_prev[[bi, j]] + i_g * g_g;
                    let tc = c_v.tanh();
                    gate[[bi, j]] = i_g;
                    gate[[bi, h + j]] = f_g;
                    gate[[bi, 2 * h + j]] = g_g;
                    gate[[bi, 3 * h + j]] = o_g;
                    c_new[[bi, j]] = c_v;
                    tc_new[[bi, j]] = tc;
                    h_new[[bi, j]] = o_g * tc;
                }
            }
            gates[layer].slice_mut(s![.., si, ..]).assign(&gate);
            cells[layer].slice_mut(s![.., si, ..]).assign(&c_new);
            tanh_c[layer].slice_mut(s![.., si, ..]).assign(&tc_new);
            hidden[layer].slice_mut(s![.., si, ..]).assign(&h_new);
            h_prev = h_new;
            c_prev = c_new;
        }
    }

    // Latent projection.
    let fc_w = view2(theta, &lay.fc_w, cfg.latent, h);
    let fc_b = &theta[lay.fc_b.clone()];
    let mut latents = Array3::zeros((b, s, cfg.latent));
    for si in 0..s {
        let h2 = hidden[1].slice(s![.., si, ..]);
        let mut lat = h2.dot(&fc_w.t());
        for mut row in lat.rows_mut() {
            for (v, bb) in row.iter_mut().zip(fc_b.iter()) {
                *v += *bb;
            }
        }
        latents.slice_mut(s![.., si, ..]).assign(&lat);
    }

    // Feedback regressor, autoregressive over windows.
    let (reg_in, reg_h, estimates) =
        run_regressor(params, &latents, None)?;

    Ok(ForwardPass {
        pre1,
        act1,
        pre2,
        flat,
        gates,
        cells,
        tanh_c,
        hidden,
        latents,
        reg_in,
        reg_h,
        estimates,
    })
}

/// Shared regressor body. With `prev_estimates` given, runs teacher-forced
/// on those; otherwise feeds back its own previous output (zeros at window 0).
fn run_regressor<T: Scalar>(
    params: &TrackerParams<T>,
    latents: &Array3<T>,
    prev_estimates: Option<&Array3<T>>,
) -> Result<(Array3<T>, Array3<T>, Array3<T>)> {
    let cfg = &params.cfg;
    let lay = params.layout();
    let theta = params.theta();
    let (b, s, l) = latents.dim();
    if l != cfg.latent {
        return Err(TrackerError::ShapeMismatch(format!(
            "latent dim {l} vs config {}",
            cfg.latent
        )));
    }
    let rh = cfg.reg_hidden;
    let r1 = view2(theta, &lay.reg1_w, rh, l + 2);
    let r1b = &theta[lay.reg1_b.clone()];
    let r2 = view2(theta, &lay.reg2_w, 2, rh);
    let r2b = &theta[lay.reg2_b.clone()];
    let pi = T::c(std::f64::consts::PI);

    let mut reg_in = Array3::zeros((b, s, l + 2));
    let mut reg_h = Array3::zeros((b, s, rh));
    let mut estimates = Array3::zeros((b, s, 2));
    let mut prev: Array2<T> = Array2::zeros((b, 2));
    for si in 0..s {
        if let Some(teacher) = prev_estimates {
            prev.assign(&teacher.slice(s![.., si, ..]));
        }
        let mut input = Array2::zeros((b, l + 2));
        input.slice_mut(s![.., ..l]).assign(&latents.slice(s![.., si, ..]));
        input.slice_mut(s![.., l..]).assign(&prev);

        let mut hpre = input.dot(&r1.t());
        for mut row in hpre.rows_mut() {
            for (v, bb) in row.iter_mut().zip(r1b.iter()) {
                *v += *bb;
            }
        }
        let hact = hpre.mapv(|x| x.tanh());
        let mut out = hact.dot(&r2.t());
        for mut row in out.rows_mut() {
            row[0] += r2b[0];
            row[1] += r2b[1];
        }
        let est = match cfg.head {
            Head::Cartesian => out,
            Head::Polar => {
                let mut e = out;
                Zip::from(e.column_mut(1)).for_each(|v| *v = pi * v.tanh());
                e
            }
        };

        reg_in.slice_mut(s![.., si, ..]).assign(&input);
        reg_h.slice_mut(s![.., si, ..]).assign(&hact);
        estimates.slice_mut(s![.., si, ..]).assign(&est);
        if prev_estimates.is_none() {
            prev = est;
        }
    }
    Ok((reg_in, reg_h, estimates))
}

/// Encoder output only: conv stack, stacked LSTM, latent projection.
pub fn encode<T: Scalar>(params: &TrackerParams<T>, batch: &WindowBatch<T>) -> Result<LatentBatch<T>> {
    Ok(forward(params, batch)?.latent_batch())
}

/// Teacher-forced regressor: estimates from given latents and aligned
/// previous estimates (callers pass zeros at window 0).
pub fn regress<T: Scalar>(
    params: &TrackerParams<T>,
    latents: &Array3<T>,
    prev_estimates: &Array3<T>,
) -> Result<Array3<T>> {
    if latents.dim().0 != prev_estimates.dim().0 || latents.dim().1 != prev_estimates.dim().1 {
        return Err(TrackerError::ShapeMismatch(
            "latents vs prev_estimates".into(),
        ));
    }
    let (_, _, est) = run_regressor(params, latents, Some(prev_estimates))?;
    Ok(est)
}
