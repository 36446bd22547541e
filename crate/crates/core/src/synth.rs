//! Synthetic bug-report term-frequency data.
//!
//! Every term has a base rate, scaled per report by a log-normal length
//! factor. Security reports scale each term's rate by a term-specific
//! multiplier, some above 1 and some below.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, LogNormal, Poisson};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, NSBR, SBR};
use crate::error::{Error, Result};
use crate::util::{derive_seed, rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_records: usize,
    pub n_features: usize,
    pub positive_rate: f64,
    /// Standard deviation of the log length factor.
    pub length_spread: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_records: 1000,
            n_features: 20,
            positive_rate: 0.05,
            length_spread: 0.6,
            seed: 20,
        }
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<Dataset> {
    if cfg.n_records == 0 || cfg.n_features == 0 || !(0.0..=1.0).contains(&cfg.positive_rate) {
        return Err(Error::Argument(format!("bad synthetic config {cfg:?}")));
    }
    let mut term_rng = rng(derive_seed(cfg.seed, &[0]));
    let base: Vec<f64> = (0..cfg.n_features).map(|_| term_rng.random_range(0.3..2.5)).collect();
    let lift: Vec<f64> = (0..cfg.n_features)
        .map(|j| {
            if j % 3 == 2 {
                term_rng.random_range(0.4..0.8)
            } else {
                term_rng.random_range(1.2..2.2)
            }
        })
        .collect();

    let n_pos = (cfg.positive_rate * cfg.n_records as f64).round() as usize;
    let mut r = rng(derive_seed(cfg.seed, &[1]));
    let mut labels = vec![NSBR; cfg.n_records];
    for i in sample(&mut r, cfg.n_records, n_pos) {
        labels[i] = SBR;
    }
    let length = LogNormal::new(0.0, cfg.length_spread).map_err(|e| Error::Argument(e.to_string()))?;
    let mut features = ndarray::Array2::zeros((cfg.n_records, cfg.n_features));
    for (i, &label) in labels.iter().enumerate() {
        let scale = length.sample(&mut r);
        for j in 0..cfg.n_features {
            let rate = base[j] * scale * if label == SBR { lift[j] } else { 1.0 };
            let poisson = Poisson::new(rate).map_err(|e| Error::Argument(e.to_string()))?;
            features[[i, j]] = poisson.sample(&mut r);
        }
    }
    Dataset::new(
        (0..cfg.n_records).map(|i| format!("br{i}")).collect(),
        features,
        labels,
        (0..cfg.n_features).map(|j| format!("term{j}")).collect(),
    )
}

/// First `n_train` records for training, the rest for testing.
pub fn chronological_split(ds: &Dataset, n_train: usize) -> Result<(Dataset, Dataset)> {
    if n_train == 0 || n_train >= ds.len() {
        return Err(Error::Argument(format!(
            "cannot split {} records at {}",
            ds.len(),
            n_train
        )));
    }
    let train: Vec<usize> = (0..n_train).collect();
    let test: Vec<usize> = (n_train..ds.len()).collect();
    Ok((ds.subset(&train), ds.subset(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_rate() {
        let ds = generate(&SynthConfig::default()).unwrap();
        assert_eq!(ds.len(), 1000);
        assert_eq!(ds.n_features(), 20);
        assert_eq!(ds.sbr_count(), 50);
        assert!(ds.features().iter().all(|&v| v >= 0.0 && v.fract() == 0.0));
    }

    #[test]
    fn deterministic() {
        let cfg = SynthConfig::default();
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
    }

    #[test]
    fn split_preserves_order() {
        let ds = generate(&SynthConfig::default()).unwrap();
        let (a, b) = chronological_split(&ds, 500).unwrap();
        assert_eq!(a.len(), 500);
        assert_eq!(b.ids()[0], ds.ids()[500]);
    }
}
