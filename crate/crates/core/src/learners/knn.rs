//! Brute-force k-nearest neighbours under Euclidean distance.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::util::squared_euclidean;

#[derive(Debug, Clone, PartialEq)]
pub struct Knn {
    x: Array2<f64>,
    y: Array1<f64>,
    k: usize,
}

impl Knn {
    pub fn train(x: &Array2<f64>, y: &Array1<f64>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Param("KNN.n_neighbors must be at least 1".into()));
        }
        let k = if k > x.nrows() {
            log::warn!("n_neighbors={k} exceeds {} training records, clamping", x.nrows());
            x.nrows()
        } else {
            k
        };
        Ok(Knn {
            x: x.clone(),
            y: y.clone(),
            k,
        })
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Indices of the `k` nearest training rows, nearer first, ties by index.
    pub fn neighbors(&self, query: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = self
            .x
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, row)| (squared_euclidean(row.as_slice().unwrap_or(&row.to_vec()), query), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
            d.truncate(self.k);
        }
        d.sort_by(cmp);
        d.into_iter().map(|(_, i)| i).collect()
    }

    /// Positive fraction among the `k` nearest neighbours.
    pub fn score(&self, x: &Array2<f64>) -> Vec<f64> {
        x.rows()
            .into_iter()
            .map(|row| {
                let q = row.to_vec();
                let nb = self.neighbors(&q);
                nb.iter().map(|&i| self.y[i]).sum::<f64>() / nb.len() as f64
            })
            .collect()
    }
}
