//! Reverse-mode gradients for the tracker.
//!
//! Exact reverse sweep of [`super::forward`]: back through the feedback
//! regressor (including the estimate fed to the next window), the latent
//! projection, both LSTM layers across windows, and the conv stack.
//! Couplings or any other loss-side quantities are the caller's business;
//! this function only consumes output-side gradients.

use ndarray::{s, Array2, Array3, Axis};

use crate::scalar::Scalar;

use super::forward::LEAKY_SLOPE;
use super::{ForwardPass, Head, Result, TrackerError, TrackerParams, WindowBatch};

/// Gradient of the loss w.r.t. every parameter, flat, aligned with
/// [`TrackerParams::theta`].
///
/// `d_estimates` is the loss gradient w.r.t. the per-window estimates
/// `(B, S, 2)`; `d_latents`, when present, adds a loss gradient w.r.t. the
/// per-window latents `(B, S, latent)` (alignment terms use this).
pub fn backward<T: Scalar>(
    params: &TrackerParams<T>,
    batch: &WindowBatch<T>,
    pass: &ForwardPass<T>,
    d_estimates: &Array3<T>,
    d_latents: Option<&Array3<T>>,
) -> Result<Vec<T>> {
    let cfg = &params.cfg;
    let lay = params.layout();
    let theta = params.theta();
    let (b, s, _, c) = batch.inputs.dim();
    if d_estimates.dim() != (b, s, 2) {
        return Err(TrackerError::ShapeMismatch(format!(
            "d_estimates {:?} vs batch ({b}, {s}, 2)",
            d_estimates.dim()
        )));
    }
    if let Some(dl) = d_latents {
        if dl.dim() != (b, s, cfg.latent) {
            return Err(TrackerError::ShapeMismatch(format!(
                "d_latents {:?} vs ({b}, {s}, {})",
                dl.dim(),
                cfg.latent
            )));
        }
    }

    let (c1, c2, k, stride) = (cfg.conv1_out, cfg.conv2_out, cfg.kernel, cfg.stride);
    let (l1, l2, flat_dim, h, l) = (
        cfg.conv1_len(),
        cfg.conv2_len(),
        cfg.flat_dim(),
        cfg.hidden,
        cfg.latent,
    );
    let rh = cfg.reg_hidden;
    let pi = T::c(std::f64::consts::PI);
    let one = T::one();

    let r1 = ndarray::ArrayView2::from_shape((rh, l + 2), &theta[lay.reg1_w.clone()]).unwrap();
    let r2 = ndarray::ArrayView2::from_shape((2, rh), &theta[lay.reg2_w.clone()]).unwrap();
    let fc_w = ndarray::ArrayView2::from_shape((l, h), &theta[lay.fc_w.clone()]).unwrap();

    // --- Regressor, windows in reverse (feedback estimate chains them). ---
    let mut d_r1_w = Array2::<T>::zeros((rh, l + 2));
    let mut d_r1_b = vec![T::zero(); rh];
    let mut d_r2_w = Array2::<T>::zeros((2, rh));
    let mut d_r2_b = vec![T::zero(); 2];
    let mut d_lat = Array3::<T>::zeros((b, s, l));
    let mut feedback = Array2::<T>::zeros((b, 2));
    for si in (0..s).rev() {
        let mut d_est = d_estimates.slice(s![.., si, ..]).to_owned();
        d_est += &feedback;

        // Head backward: Polar squashes the second component by pi*tanh.
        let mut d_out = d_est;
        if cfg.head == Head::Polar {
            let est = pass.estimates().slice(s![.., si, ..]);
            for bi in 0..b {
                let t = est[[bi, 1]] / pi; // tanh(out_pre)
                d_out[[bi, 1]] = d_out[[bi, 1]] * pi * (one - t * t);
            }
        }

        let reg_h_s = pass.reg_h.slice(s![.., si, ..]);
        let reg_in_s = pass.reg_in.slice(s![.., si, ..]);
        d_r2_w += &d_out.t().dot(&reg_h_s);
        for (acc, v) in d_r2_b.iter_mut().zip(d_out.sum_axis(Axis(0)).iter()) {
            *acc += *v;
        }

        let mut d_hpre = d_out.dot(&r2);
        for bi in 0..b {
            for j in 0..rh {
                let hv = reg_h_s[[bi, j]];
                d_hpre[[bi, j]] = d_hpre[[bi, j]] * (one - hv * hv);
            }
        }
        d_r1_w += &d_hpre.t().dot(&reg_in_s);
        for (acc, v) in d_r1_b.iter_mut().zip(d_hpre.sum_axis(Axis(0)).iter()) {
            *acc += *v;
        }

        let d_in = d_hpre.dot(&r1);
        let mut d_lat_s = d_in.slice(s![.., ..l]).to_owned();
        if let Some(dl) = d_latents {
            d_lat_s += &dl.slice(s![.., si, ..]);
        }
        d_lat.slice_mut(s![.., si, ..]).assign(&d_lat_s);
        // Gradient w.r.t. the previous window's estimate; window 0 fed zeros.
        feedback.assign(&d_in.slice(s![.., l..]));
    }

    // --- Latent projection. ---
    let d_lat_flat = d_lat.to_shape((b * s, l)).expect("contiguous");
    let h2_flat = pass.hidden[1].to_shape((b * s, h)).expect("contiguous");
    let d_fc_w = d_lat_flat.t().dot(&h2_flat);
    let d_fc_b = d_lat_flat.sum_axis(Axis(0));
    let d_h2 = d_lat_flat
        .dot(&fc_w)
        .into_shape_with_order((b, s, h))
        .expect("contiguous");

    // --- Stacked LSTM, top layer first. ---
    let mut d_wx = [
        Array2::<T>::zeros((4 * h, flat_dim)),
        Array2::<T>::zeros((4 * h, h)),
    ];
    let mut d_wh = [Array2::<T>::zeros((4 * h, h)), Array2::<T>::zeros((4 * h, h))];
    let mut d_b = [vec![T::zero(); 4 * h], vec![T::zero(); 4 * h]];
    let mut d_h1 = Array3::<T>::zeros((b, s, h));
    let mut d_flat = Array3::<T>::zeros((b, s, flat_dim));

    for layer in (0..2).rev() {
        let in_dim = if layer == 0 { flat_dim } else { h };
        let wx =
            ndarray::ArrayView2::from_shape((4 * h, in_dim), &theta[lay.lstm_wx[layer].clone()])
                .unwrap();
        let wh = ndarray::ArrayView2::from_shape((4 * h, h), &theta[lay.lstm_wh[layer].clone()])
            .unwrap();

        let mut dh_rec = Array2::<T>::zeros((b, h));
        let mut dc_rec = Array2::<T>::zeros((b, h));
        for si in (0..s).rev() {
            let gates = pass.gates[layer].slice(s![.., si, ..]);
            let tc = pass.tanh_c[layer].slice(s![.., si, ..]);

            let mut dh = if layer == 1 {
                d_h2.slice(s![.., si, ..]).to_owned()
            } else {
                d_h1.slice(s![.., si, ..]).to_owned()
            };
            dh += &dh_rec;

            let mut dz = Array2::<T>::zeros((b, 4 * h));
            let mut dc_prev = Array2::<T>::zeros((b, h));
            for bi in 0..b {
                for j in 0..h {
                    let i_g = gates[[bi, j]];
                    let f_g = gates[[bi, h + j]];
                    let g_g = gates[[bi, 2 * h + j]];
                    let o_g = gates[[bi, 3 * h + j]];
                    let tc_v = tc[[bi, j]];
                    let c_prev = if si > 0 {
                        pass.cells[layer][[bi, si - 1, j]]
                    } else {
                        T::zero()
                    };

                    let dc = dc_rec[[bi, j]] + dh[[bi, j]] * o_g * (one - tc_v * tc_v);
                    let d_o = dh[[bi, j]] * tc_v;
                    let d_i = dc * g_g;
                    let d_g = dc * i_g;
                    let d_f = dc * c_prev;

                    dz[[bi, j]] = d_i * i_g * (one - i_g);
                    dz[[bi, h + j]] = d_f * f_g * (one - f_g);
                    dz[[bi, 2 * h + j]] = d_g * (one - g_g * g_g);
                    dz[[bi, 3 * h + j]] = d_o * o_g * (one - o_g);
                    dc_prev[[bi, j]] = dc * f_g;
                }
            }

            let x_s: Array2<T> = if layer == 0 {
                pass.flat.slice(s![.., si, ..]).to_owned()
            } else {
                pass.hidden[0].slice(s![.., si, ..]).to_owned()
            };
            d_wx[layer] += &dz.t().dot(&x_s);
            if si > 0 {
                let h_prev = pass.hidden[layer].slice(s![.., si - 1, ..]);
                d_wh[layer] += &dz.t().dot(&h_prev);
            }
            for (acc, v) in d_b[layer].iter_mut().zip(dz.sum_axis(Axis(0)).iter()) {
                *acc += *v;
            }

            let dx = dz.dot(&wx);
            if layer == 0 {
                d_flat.slice_mut(s![.., si, ..]).assign(&dx);
            } else {
                let mut slot = d_h1.slice_mut(s![.., si, ..]);
                slot += &dx;
            }
            dh_rec = dz.dot(&wh);
            dc_rec = dc_prev;
        }
    }

    // --- Conv stack. ---

    let w2 = &theta[lay.conv2_w.clone()];
    let mut d_w1 = vec![T::zero(); lay.conv1_w.len()];
    let mut d_b1 = vec![T::zero(); c1];
    let mut d_w2 = vec![T::zero(); lay.conv2_w.len()];
    let mut d_b2 = vec![T::zero(); c2];
    let slope = T::c(LEAKY_SLOPE);
    for bi in 0..b {
        for si in 0..s {
            let mut d_act1 = Array2::<T>::zeros((c1, l1));
            for oc in 0..c2 {
                for t in 0..l2 {
                    let g = d_flat[[bi, si, oc * l2 + t]];
                    let d_pre = if pass.pre2[[bi, si, oc, t]] > T::zero() {
                        g
                    } else {
                        g * slope
                    };
                    if d_pre == T::zero() {
                        continue;
                    }
                    d_b2[oc] += d_pre;
                    for ic in 0..c1 {
                        let wbase = (oc * c1 + ic) * k;
                        for kk in 0..k {
                            d_w2[wbase + kk] += d_pre * pass.act1[[bi, si, ic, t * stride + kk]];
                            d_act1[[ic, t * stride + kk]] += d_pre * w2[wbase + kk];
                        }
                    }
                }
            }
            for oc in 0..c1 {
                for t in 0..l1 {
                    let g = d_act1[[oc, t]];
                    let d_pre = if pass.pre1[[bi, si, oc, t]] > T::zero() {
                        g
                    } else {
                        g * slope
                    };
                    if d_pre == T::zero() {
                        continue;
                    }
                    d_b1[oc] += d_pre;
                    for ic in 0..c {
                        let wbase = (oc * c + ic) * k;
                        for kk in 0..k {
                            d_w1[wbase + kk] += d_pre * batch.inputs[[bi, si, t * stride + kk, ic]];
                        }
                    }
                }
            }
        }
    }

    // --- Assemble the flat gradient. ---
    let mut grad = vec![T::zero(); lay.total];
    grad[lay.conv1_w.clone()].copy_from_slice(&d_w1);
    grad[lay.conv1_b.clone()].copy_from_slice(&d_b1);
    grad[lay.conv2_w.clone()].copy_from_slice(&d_w2);
    grad[lay.conv2_b.clone()].copy_from_slice(&d_b2);
    for layer in 0..2 {
        grad[lay.lstm_wx[layer].clone()]
            .copy_from_slice(d_wx[layer].as_slice().expect("standard layout"));
        grad[lay.lstm_wh[layer].clone()]
            .copy_from_slice(d_wh[layer].as_slice().expect("standard layout"));
        grad[lay.lstm_b[layer].clone()].copy_from_slice(&d_b[layer]);
    }
    grad[lay.fc_w.clone()].copy_from_slice(d_fc_w.as_slice().expect("standard layout"));
    grad[lay.fc_b.clone()].copy_from_slice(d_fc_b.as_slice().expect("standard layout"));
    grad[lay.reg1_w.clone()].copy_from_slice(d_r1_w.as_slice().expect("standard layout"));
    grad[lay.reg1_b.clone()].copy_from_slice(&d_r1_b);
    grad[lay.reg2_w.clone()].copy_from_slice(d_r2_w.as_slice().expect("standard layout"));
    grad[lay.reg2_b.clone()].copy_from_slice(&d_r2_b);
    Ok(grad)
}

/// Convenience: forward + MSE loss + backward in one call.
///
/// Returns `(loss, gradient)` for the plain supervised objective.
pub fn mse_loss_and_grad<T: Scalar>(
    params: &TrackerParams<T>,
    batch: &WindowBatch<T>,
) -> Result<(T, Vec<T>)> {
    let pass = super::forward(params, batch)?;
    let (loss, d_est) = mse_gradient(&batch.labels, pass.estimates())?;
    let grad = backward(params, batch, &pass, &d_est, None)?;
    Ok((loss, grad))
}

/// MSE value and its gradient w.r.t. the estimates.
pub fn mse_gradient<T: Scalar>(
    labels: &Array3<T>,
    estimates: &Array3<T>,
) -> Result<(T, Array3<T>)> {
    let loss = super::loss_mse(labels, estimates)?;
    let n = T::c((labels.dim().0 * labels.dim().1) as f64);
    let two = T::c(2.0);
    let mut d_est = estimates - labels;
    d_est.mapv_inplace(|v| two * v / n);
    Ok((loss, d_est))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracker::{forward, Head, TrackerConfig};
    use ndarray::Array4;
    use rand::Rng;

    fn random_batch(cfg: &TrackerConfig, b: usize, seed: u64) -> WindowBatch<f64> {
        let mut r = crate::rng::stream(seed, "bw-test", 0);
        WindowBatch {
            inputs: Array4::from_shape_fn(
                (b, cfg.windows, cfg.window_len, cfg.input_channels),
                |_| r.gen_range(-1.0..1.0),
            ),
            labels: Array3::from_shape_fn((b, cfg.windows, 2), |_| r.gen_range(-0.3..0.3)),
            domains: vec![0; b],
        }
    }

    /// Central finite differences of the supervised MSE loss.
    fn fd_grad(params: &TrackerParams<f64>, batch: &WindowBatch<f64>, step: f64) -> Vec<f64> {
        let mut p = params.clone();
        let n = p.num_params();
        let mut g = vec![0.0; n];
        for idx in 0..n {
            let orig = p.theta()[idx];
            p.theta_mut()[idx] = orig + step;
            let up = {
                let pass = forward(&p, batch).unwrap();
                crate::tracker::loss_mse(&batch.labels, pass.estimates()).unwrap()
            };
            p.theta_mut()[idx] = orig - step;
            let down = {
                let pass = forward(&p, batch).unwrap();
                crate::tracker::loss_mse(&batch.labels, pass.estimates()).unwrap()
            };
            p.theta_mut()[idx] = orig;
            g[idx] = (up - down) / (2.0 * step);
        }
        g
    }

    fn assert_grad_close(analytic: &[f64], numeric: &[f64], rel: f64, abs_floor: f64) {
        let mut worst = (0usize, 0.0f64);
        for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
            let denom = a.abs().max(n.abs());
            let err = (a - n).abs();
            let rel_err = if denom > 0.0 { err / denom } else { 0.0 };
            if err > abs_floor && rel_err > worst.1 {
                worst = (i, rel_err);
            }
        }
        assert!(
            worst.1 <= rel,
            "worst relative gradient error {} at parameter {}",
            worst.1,
            worst.0
        );
    }

    #[test]
    fn gradients_match_finite_differences_cartesian() {
        let cfg = TrackerConfig::tiny(Head::Cartesian);
        let params = TrackerParams::<f64>::init(cfg, 31).unwrap();
        let batch = random_batch(&cfg, 2, 32);
        let (_, grad) = mse_loss_and_grad(&params, &batch).unwrap();
        let fd = fd_grad(&params, &batch, 1e-5);
        assert_grad_close(&grad, &fd, 1e-4, 1e-9);
    }

    #[test]
    fn gradients_match_finite_differences_polar() {
        let cfg = TrackerConfig::tiny(Head::Polar);
        let params = TrackerParams::<f64>::init(cfg, 33).unwrap();
        let batch = random_batch(&cfg, 2, 34);
        let (_, grad) = mse_loss_and_grad(&params, &batch).unwrap();
        let fd = fd_grad(&params, &batch, 1e-5);
        assert_grad_close(&grad, &fd, 1e-4, 1e-9);
    }

    #[test]
    fn latent_gradients_also_match_finite_differences() {
        // Loss = MSE + sum of latents * fixed random weights, exercising the
        // d_latents input path.
        let cfg = TrackerConfig::tiny(Head::Cartesian);
        let params = TrackerParams::<f64>::init(cfg, 35).unwrap();
        let batch = random_batch(&cfg, 2, 36);
        let mut r = crate::rng::stream(37, "latent-weights", 0);
        let lat_w = Array3::from_shape_fn((2, cfg.windows, cfg.latent), |_| r.gen_range(-1.0..1.0));

        let loss_fn = |p: &TrackerParams<f64>| {
            let pass = forward(p, &batch).unwrap();
            let mse = crate::tracker::loss_mse(&batch.labels, pass.estimates()).unwrap();
            let lat: f64 = pass
                .latents()
                .iter()
                .zip(lat_w.iter())
                .map(|(a, w)| a * w)
                .sum();
            mse + lat
        };

        let pass = forward(&params, &batch).unwrap();
        let (_, d_est) = mse_gradient(&batch.labels, pass.estimates()).unwrap();
        let grad = backward(&params, &batch, &pass, &d_est, Some(&lat_w)).unwrap();

        let step = 1e-5;
        let mut p = params.clone();
        let mut fd = vec![0.0; p.num_params()];
        for idx in 0..p.num_params() {
            let orig = p.theta()[idx];
            p.theta_mut()[idx] = orig + step;
            let up = loss_fn(&p);
            p.theta_mut()[idx] = orig - step;
            let down = loss_fn(&p);
            p.theta_mut()[idx] = orig;
            fd[idx] = (up - down) / (2.0 * step);
        }
        assert_grad_close(&grad, &fd, 1e-4, 1e-9);
    }

    #[test]
    fn zero_residual_means_zero_output_layer_gradient() {
        let cfg = TrackerConfig::tiny(Head::Cartesian);
        let params = TrackerParams::<f64>::init(cfg, 41).unwrap();
        let mut batch = random_batch(&cfg, 2, 42);
        let pass = forward(&params, &batch).unwrap();
        batch.labels.assign(pass.estimates());
        let (loss, grad) = mse_loss_and_grad(&params, &batch).unwrap();
        assert_eq!(loss, 0.0);
        let lay = params.layout();
        assert!(grad[lay.reg2_w.clone()].iter().all(|v| *v == 0.0));
        assert!(grad[lay.reg2_b].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gradient_is_linear_in_the_loss_scale() {
        let cfg = TrackerConfig::tiny(Head::Polar);
        let params = TrackerParams::<f64>::init(cfg, 43).unwrap();
        let batch = random_batch(&cfg, 2, 44);
        let pass = forward(&params, &batch).unwrap();
        let (_, d_est) = mse_gradient(&batch.labels, pass.estimates()).unwrap();
        let g1 = backward(&params, &batch, &pass, &d_est, None).unwrap();
        let doubled = d_est.mapv(|v| 2.0 * v);
        let g2 = backward(&params, &batch, &pass, &doubled, None).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            approx::assert_abs_diff_eq!(2.0 * a, b, epsilon = 1e-12 * (1.0 + b.abs()));
        }
    }
}
