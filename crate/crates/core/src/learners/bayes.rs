//! Gaussian naive Bayes.

use ndarray::{Array1, Array2, Axis};

use crate::util::sigmoid;

/// Variance used when every feature is constant and smoothing is zero.
const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNb {
    /// Per class (0, 1): log prior, feature means, feature variances.
    pub log_prior: [f64; 2],
    pub means: [Array1<f64>; 2],
    pub variances: [Array1<f64>; 2],
}

fn mean_var(x: &Array2<f64>) -> (Array1<f64>, Array1<f64>) {
    let n = x.nrows() as f64;
    let mean = x.sum_axis(Axis(0)) / n;
    let var = Array1::from_iter(
        x.axis_iter(Axis(1))
            .zip(mean.iter())
            .map(|(c, m)| c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n),
    );
    (mean, var)
}

impl GaussianNb {
    pub fn train(x: &Array2<f64>, y: &Array1<f64>, var_smoothing: f64) -> Self {
        let (_, overall) = mean_var(x);
        let mut eps = var_smoothing * overall.iter().copied().fold(0.0, f64::max);
        let n = x.nrows() as f64;
        let mut log_prior = [0.0; 2];
        let mut means = [Array1::zeros(0), Array1::zeros(0)];
        let mut variances = [Array1::zeros(0), Array1::zeros(0)];
        let fits: Vec<(f64, Array1<f64>, Array1<f64>)> = (0..2)
            .map(|c| {
                let idx: Vec<usize> = (0..x.nrows()).filter(|&i| (y[i] > 0.5) == (c == 1)).collect();
                let (m, v) = mean_var(&x.select(Axis(0), &idx));
                (idx.len() as f64 / n, m, v)
            })
            .collect();
        if eps == 0.0 && fits.iter().any(|f| f.2.iter().any(|&v| v == 0.0)) {
            eps = VARIANCE_FLOOR;
        }
        for (c, (prior, m, v)) in fits.into_iter().enumerate() {
            log_prior[c] = prior.ln();
            means[c] = m;
            variances[c] = v + eps;
        }
        GaussianNb {
            log_prior,
            means,
            variances,
        }
    }

    pub fn n_features(&self) -> usize {
        self.means[0].len()
    }

    fn joint_log_likelihood(&self, c: usize, row: ndarray::ArrayView1<'_, f64>) -> f64 {
        let two_pi = 2.0 * std::f64::consts::PI;
        self.log_prior[c]
            + row
                .iter()
                .zip(self.means[c].iter().zip(self.variances[c].iter()))
                .map(|(&x, (&m, &v))| -0.5 * (two_pi * v).ln() - (x - m) * (x - m) / (2.0 * v))
                .sum::<f64>()
    }

    /// Posterior probability of the positive class.
    pub fn score(&self, x: &Array2<f64>) -> Vec<f64> {
        x.rows()
            .into_iter()
            .map(|row| sigmoid(self.joint_log_likelihood(1, row) - self.joint_log_likelihood(0, row)))
            .collect()
    }
}
