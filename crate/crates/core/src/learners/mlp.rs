//! One-hidden-layer ReLU network with a sigmoid output, trained by minibatch
//! SGD with momentum and an inverse-scaling learning rate.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::params::ParamReader;
use crate::util::{rng, sigmoid};

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub hidden: usize,
    pub alpha: f64,
    pub learning_rate_init: f64,
    pub power_t: f64,
    pub max_iter: usize,
    pub momentum: f64,
    pub n_iter_no_change: usize,
    pub batch_size: usize,
    pub tol: f64,
    pub validation_fraction: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: 100,
            alpha: 1e-4,
            learning_rate_init: 1e-3,
            power_t: 0.5,
            max_iter: 200,
            momentum: 0.9,
            n_iter_no_change: 10,
            batch_size: 200,
            tol: 1e-4,
            validation_fraction: 0.1,
        }
    }
}

impl MlpParams {
    pub(crate) fn from_reader(p: &ParamReader<'_>) -> Result<Self> {
        let d = MlpParams::default();
        Ok(MlpParams {
            alpha: p.f64("alpha", d.alpha)?,
            learning_rate_init: p.f64("learning_rate_init", d.learning_rate_init)?,
            power_t: p.f64("power_t", d.power_t)?,
            max_iter: p.usize("max_iter", d.max_iter)?,
            momentum: p.f64("momentum", d.momentum)?,
            n_iter_no_change: p.usize("n_iter_no_change", d.n_iter_no_change)?.max(1),
            ..d
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array1<f64>,
    pub b2: f64,
}

/// Softplus, i.e. `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl Mlp {
    pub fn init<R: Rng>(n_features: usize, hidden: usize, rng: &mut R) -> Self {
        let b_in = (6.0 / (n_features + hidden) as f64).sqrt();
        let b_out = (12.0 / (hidden + 1) as f64).sqrt();
        let mut draw = |b: f64| rng.random_range(-b..b);
        let w1 = Array2::from_shape_simple_fn((n_features, hidden), || draw(b_in));
        let b1 = Array1::from_shape_simple_fn(hidden, || draw(b_in));
        let w2 = Array1::from_shape_simple_fn(hidden, || draw(b_out));
        let b2 = draw(b_out);
        Mlp { w1, b1, w2, b2 }
    }

    pub fn n_features(&self) -> usize {
        self.w1.nrows()
    }

    fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, Array1<f64>) {
        let z1 = x.dot(&self.w1) + &self.b1;
        let a1 = z1.mapv(|v| v.max(0.0));
        let z2 = a1.dot(&self.w2) + self.b2;
        (a1, z2)
    }

    pub fn score(&self, x: &Array2<f64>) -> Vec<f64> {
        self.forward(x).1.mapv(sigmoid).to_vec()
    }

    /// Mean log-loss of `x`, `y` (no penalty).
    pub fn log_loss(&self, x: &Array2<f64>, y: &Array1<f64>) -> f64 {
        let z = self.forward(x).1;
        z.iter().zip(y).map(|(&z, &t)| softplus(z) - t * z).sum::<f64>() / x.nrows().max(1) as f64
    }

    /// Mean log-loss plus `alpha / (2n) * |W|^2`, and its gradient.
    pub fn loss_and_gradient(&self, x: &Array2<f64>, y: &Array1<f64>, alpha: f64) -> (f64, Mlp) {
        let n = x.nrows() as f64;
        let (a1, z2) = self.forward(x);
        let penalty = alpha / (2.0 * n) * (self.w1.mapv(|v| v * v).sum() + self.w2.dot(&self.w2));
        let loss = z2.iter().zip(y).map(|(&z, &t)| softplus(z) - t * z).sum::<f64>() / n + penalty;

        let dz2 = (z2.mapv(sigmoid) - y) / n;
        let gw2 = a1.t().dot(&dz2) + &self.w2 * (alpha / n);
        let gb2 = dz2.sum();
        let mut dz1 = dz2.view().insert_axis(Axis(1)).dot(&self.w2.view().insert_axis(Axis(0)));
        dz1.zip_mut_with(&a1, |g, &a| {
            if a <= 0.0 {
                *g = 0.0
            }
        });
        let gw1 = x.t().dot(&dz1) + &self.w1 * (alpha / n);
        let gb1 = dz1.sum_axis(Axis(0));
        (
            loss,
            Mlp {
                w1: gw1,
                b1: gb1,
                w2: gw2,
                b2: gb2,
            },
        )
    }

    /// `self = self * a + other * b`, parameter-wise.
    fn blend(&mut self, a: f64, other: &Mlp, b: f64) {
        self.w1.zip_mut_with(&other.w1, |s, &o| *s = a * *s + b * o);
        self.b1.zip_mut_with(&other.b1, |s, &o| *s = a * *s + b * o);
        self.w2.zip_mut_with(&other.w2, |s, &o| *s = a * *s + b * o);
        self.b2 = a * self.b2 + b * other.b2;
    }

    fn zeros_like(&self) -> Mlp {
        Mlp {
            w1: Array2::zeros(self.w1.raw_dim()),
            b1: Array1::zeros(self.b1.len()),
            w2: Array1::zeros(self.w2.len()),
            b2: 0.0,
        }
    }

    pub fn train(p: &MlpParams, x: &Array2<f64>, y: &Array1<f64>, seed: u64) -> Result<Self> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::Training("empty training set".into()));
        }
        let mut r = rng(seed);
        let mut net = Mlp::init(x.ncols(), p.hidden, &mut r);

        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut r);
        let n_val = (p.validation_fraction * n as f64).floor() as usize;
        let (val_idx, fit_idx) = if n_val >= 1 && n - n_val >= 1 {
            order.split_at(n_val)
        } else {
            (&order[..0], &order[..])
        };
        let mut fit_idx = fit_idx.to_vec();
        // monitor the training loss when there is no room for a validation split
        let monitor_idx = if val_idx.is_empty() { fit_idx.clone() } else { val_idx.to_vec() };
        let xm = x.select(Axis(0), &monitor_idx);
        let ym = y.select(Axis(0), &monitor_idx);

        let mut velocity = net.zeros_like();
        let mut best = net.clone();
        let mut best_loss = f64::INFINITY;
        let mut stale = 0;
        let batch = p.batch_size.min(fit_idx.len()).max(1);
        for epoch in 0..p.max_iter {
            let lr = p.learning_rate_init / ((epoch + 1) as f64).powf(p.power_t);
            fit_idx.shuffle(&mut r);
            for chunk in fit_idx.chunks(batch) {
                let xb = x.select(Axis(0), chunk);
                let yb = y.select(Axis(0), chunk);
                let (_, grad) = net.loss_and_gradient(&xb, &yb, p.alpha);
                velocity.blend(p.momentum, &grad, -lr);
                net.blend(1.0, &velocity, 1.0);
            }
            let loss = net.log_loss(&xm, &ym);
            if !loss.is_finite() {
                log::debug!("MLP diverged at epoch {epoch}");
                break;
            }
            if loss < best_loss - p.tol {
                best_loss = loss;
                best = net.clone();
                stale = 0;
            } else {
                stale += 1;
                if stale >= p.n_iter_no_change {
                    break;
                }
            }
        }
        Ok(if best_loss.is_finite() { best } else { net })
    }
}
