//! Adam with bias correction and optional global-norm gradient clipping.

use crate::scalar::Scalar;

use super::TrainConfig;

#[derive(Debug, Clone)]
pub struct Adam<T> {
    lr: T,
    beta1: T,
    beta2: T,
    eps: T,
    clip: Option<T>,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(num_params: usize, cfg: &TrainConfig) -> Self {
        Self {
            lr: T::c(cfg.learning_rate),
            beta1: T::c(cfg.beta1),
            beta2: T::c(cfg.beta2),
            eps: T::c(cfg.eps_opt),
            clip: cfg.grad_clip.map(T::c),
            m: vec![T::zero(); num_params],
            v: vec![T::zero(); num_params],
            t: 0,
        }
    }

    pub fn step(&mut self, theta: &mut [T], grad: &[T]) {
        assert_eq!(theta.len(), grad.len());
        assert_eq!(theta.len(), self.m.len());
        let one = T::one();

        let scale = match self.clip {
            Some(clip) => {
                let norm = grad.iter().map(|g| *g * *g).sum::<T>().sqrt();
                if norm > clip {
                    clip / norm
                } else {
                    one
                }
            }
            None => one,
        };

        self.t += 1;
        let bc1 = one - self.beta1.powi(self.t);
        let bc2 = one - self.beta2.powi(self.t);
        for i in 0..theta.len() {
            let g = grad[i] * scale;
            self.m[i] = self.beta1 * self.m[i] + (one - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (one - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            theta[i] = theta[i] - self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}
