//! The five classifiers: random forest, logistic regression, a one-hidden-layer
//! perceptron, k-nearest neighbours and Gaussian naive Bayes.
//!
//! Every model scores a record in `[0, 1]` and labels it positive iff the
//! score is strictly above 0.5, so ties go to the negative class.

pub mod bayes;
pub mod forest;
pub mod knn;
pub mod logistic;
pub mod mlp;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SBR};
use crate::error::{Error, Result};
use crate::params::{ParamReader, ParamSpace, Params};

pub use bayes::GaussianNb;
pub use forest::{Forest, ForestParams, MaxFeatures, Tree};
pub use knn::Knn;
pub use logistic::Logistic;
pub use mlp::{Mlp, MlpParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LearnerKind {
    RF,
    LR,
    MLP,
    KNN,
    NB,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 5] = [
        LearnerKind::RF,
        LearnerKind::LR,
        LearnerKind::MLP,
        LearnerKind::KNN,
        LearnerKind::NB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::RF => "RF",
            LearnerKind::LR => "LR",
            LearnerKind::MLP => "MLP",
            LearnerKind::KNN => "KNN",
            LearnerKind::NB => "NB",
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LearnerKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown learner `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    #[serde(default)]
    pub params: Params,
}

impl LearnerSpec {
    pub fn new(kind: LearnerKind, params: Params) -> Self {
        LearnerSpec { kind, params }
    }

    pub fn with_defaults(kind: LearnerKind) -> Self {
        let params = ParamSpace::learner_items()
            .into_iter()
            .find(|i| i.id == kind.name())
            .map(|i| i.defaults())
            .unwrap_or_default();
        LearnerSpec::new(kind, params)
    }

    pub fn validate(&self) -> Result<()> {
        let items = ParamSpace::learner_items();
        let item = items
            .iter()
            .find(|i| i.id == self.kind.name())
            .ok_or_else(|| Error::Param(format!("no menu entry for {}", self.kind)))?;
        item.validate(&self.params)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Forest(Forest),
    Logistic(Logistic),
    Mlp(Mlp),
    Knn(Knn),
    Bayes(GaussianNb),
}

/// Labels as 0/1 floats, rejecting single-class training sets.
pub(crate) fn targets(ds: &Dataset) -> Result<Array1<f64>> {
    let pos = ds.sbr_count();
    if ds.is_empty() || pos == 0 || pos == ds.len() {
        return Err(Error::Training(format!(
            "training set needs both classes, got {} positive of {}",
            pos,
            ds.len()
        )));
    }
    Ok(ds
        .labels()
        .iter()
        .map(|&l| if l == SBR { 1.0 } else { 0.0 })
        .collect())
}

pub fn train(spec: &LearnerSpec, ds: &Dataset, seed: u64) -> Result<Model> {
    spec.validate()?;
    let y = targets(ds)?;
    let x = ds.features();
    let p = ParamReader::new(spec.kind.name(), &spec.params);
    Ok(match spec.kind {
        LearnerKind::RF => Model::Forest(Forest::train(&ForestParams::from_reader(&p)?, x, &y, seed)?),
        LearnerKind::LR => Model::Logistic(Logistic::train(x, &y, p.f64("C", 1.0)?, p.usize("max_iter", 100)?)),
        LearnerKind::MLP => Model::Mlp(Mlp::train(&MlpParams::from_reader(&p)?, x, &y, seed)?),
        LearnerKind::KNN => {
            let _index_only = p.usize("leaf_size", 30)?;
            Model::Knn(Knn::train(x, &y, p.usize("n_neighbors", 5)?)?)
        }
        LearnerKind::NB => Model::Bayes(GaussianNb::train(x, &y, p.f64("var_smoothing", 1e-9)?)),
    })
}

impl Model {
    pub fn kind(&self) -> LearnerKind {
        match self {
            Model::Forest(_) => LearnerKind::RF,
            Model::Logistic(_) => LearnerKind::LR,
            Model::Mlp(_) => LearnerKind::MLP,
            Model::Knn(_) => LearnerKind::KNN,
            Model::Bayes(_) => LearnerKind::NB,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Model::Forest(m) => m.n_features(),
            Model::Logistic(m) => m.weights.len(),
            Model::Mlp(m) => m.n_features(),
            Model::Knn(m) => m.n_features(),
            Model::Bayes(m) => m.n_features(),
        }
    }

    /// Probability-like score of the positive class for each row.
    pub fn predict_score(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features() {
            return Err(Error::Shape {
                expected: self.n_features(),
                actual: x.ncols(),
            });
        }
        if x.nrows() == 0 {
            return Ok(Vec::new());
        }
        Ok(match self {
            Model::Forest(m) => m.score(x),
            Model::Logistic(m) => m.score(x),
            Model::Mlp(m) => m.score(x),
            Model::Knn(m) => m.score(x),
            Model::Bayes(m) => m.score(x),
        })
    }

    pub fn predict(&self, x: &Array2<f64>) -> Result<Vec<u8>> {
        Ok(self.predict_score(x)?.into_iter().map(label_of).collect())
    }
}

pub fn label_of(score: f64) -> u8 {
    u8::from(score > 0.5)
}
