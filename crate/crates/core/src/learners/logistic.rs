//! L2-regularised logistic regression fitted by batch gradient descent.

use ndarray::{Array1, Array2};

use crate::util::sigmoid;

#[derive(Debug, Clone, PartialEq)]
pub struct Logistic {
    pub weights: Array1<f64>,
    pub intercept: f64,
}

impl Logistic {
    /// Minimises `sum(log-loss) + |w|^2 / (2C)` with step `0.1 / n` for
    /// `max_iter` full passes. The intercept is not penalised.
    pub fn train(x: &Array2<f64>, y: &Array1<f64>, c: f64, max_iter: usize) -> Self {
        let n = x.nrows().max(1) as f64;
        let step = 0.1 / n;
        let mut w = Array1::zeros(x.ncols());
        let mut b = 0.0;
        for _ in 0..max_iter {
            let residual = (x.dot(&w) + b).mapv(sigmoid) - y;
            let grad = x.t().dot(&residual) + &w / c;
            w.scaled_add(-step, &grad);
            b -= step * residual.sum();
        }
        Logistic {
            weights: w,
            intercept: b,
        }
    }

    pub fn score(&self, x: &Array2<f64>) -> Vec<f64> {
        (x.dot(&self.weights) + self.intercept).mapv(sigmoid).to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_weights_score_half() {
        let m = Logistic {
            weights: Array1::zeros(3),
            intercept: 0.0,
        };
        assert_eq!(m.score(&array![[1.0, -4.0, 9.0], [0.0, 0.0, 0.0]]), vec![0.5, 0.5]);
    }

    #[test]
    fn loss_decreases_with_iterations() {
        let x = array![[0.0, 1.0], [1.0, 0.0], [2.0, 1.0], [3.0, 0.0]];
        let y = array![0.0, 0.0, 1.0, 1.0];
        let loss = |m: &Logistic| -> f64 {
            m.score(&x)
                .iter()
                .zip(&y)
                .map(|(p, t)| -(t * p.ln() + (1.0 - t) * (1.0 - p).ln()))
                .sum()
        };
        let short = Logistic::train(&x, &y, 10.0, 5);
        let long = Logistic::train(&x, &y, 10.0, 200);
        assert!(loss(&long) < loss(&short));
    }
}
