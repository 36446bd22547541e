use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::trace::PipelineSpec;
use crate::data::{Dataset, FoldAssignment};
use crate::error::{Error, Result};
use crate::learners::train;
use crate::metrics::{EvalResult, RankedList};
use crate::preprocess::fit;
use crate::util::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Goal {
    #[default]
    G,
    Pd,
    Pf,
    F,
    Prec,
}

impl Goal {
    pub fn name(self) -> &'static str {
        match self {
            Goal::G => "g",
            Goal::Pd => "pd",
            Goal::Pf => "pf",
            Goal::F => "f",
            Goal::Prec => "prec",
        }
    }

    pub fn higher_is_better(self) -> bool {
        self != Goal::Pf
    }

    /// The value a maximising tuner should see.
    pub fn oriented(self, v: f64) -> f64 {
        if self.higher_is_better() {
            v
        } else {
            -v
        }
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Goal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "g" => Goal::G,
            "pd" | "recall" => Goal::Pd,
            "pf" => Goal::Pf,
            "f" | "f1" => Goal::F,
            "prec" | "precision" => Goal::Prec,
            _ => return Err(Error::Config(format!("unknown goal `{s}`"))),
        })
    }
}

/// Fits `p` on `train` and scores `test`. SMOTE touches training rows only.
pub fn fit_and_score(p: &PipelineSpec, train_ds: &Dataset, test: &Dataset, seed: u64) -> Result<Vec<f64>> {
    if train_ds.n_features() != test.n_features() {
        return Err(Error::Shape {
            expected: train_ds.n_features(),
            actual: test.n_features(),
        });
    }
    let pre = p.preprocessor_spec()?;
    let learner = p.learner_spec()?;
    let (fit_ds, test_x) = if pre.is_oversampler() {
        (pre.oversample(train_ds, derive_seed(seed, &[1]))?, test.features().clone())
    } else {
        let t = fit(&pre, train_ds.features())?;
        (train_ds.with_features(t.transform(train_ds.features())?)?, t.transform(test.features())?)
    };
    let model = train(&learner, &fit_ds, derive_seed(seed, &[2]))?;
    model.predict_score(&test_x)
}

/// Outcome of a cross-validated evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub value: f64,
    pub per_fold: Vec<f64>,
    /// Folds where the goal metric was undefined and counted as 0.
    pub undefined_folds: Vec<usize>,
}

/// Mean goal value over the folds, each fold validating a model fitted on the rest.
pub fn evaluate_pipeline(
    p: &PipelineSpec,
    train_ds: &Dataset,
    folds: &FoldAssignment,
    goal: Goal,
    seed: u64,
) -> Result<CvOutcome> {
    if folds.as_slice().len() != train_ds.len() {
        return Err(Error::Argument("fold assignment does not match the training set".into()));
    }
    let mut per_fold = Vec::with_capacity(folds.n_folds());
    let mut undefined_folds = Vec::new();
    for k in 0..folds.n_folds() {
        let fit_part = train_ds.subset(&folds.training_indices(k));
        let val = train_ds.subset(&folds.validation_indices(k));
        let scores = fit_and_score(p, &fit_part, &val, derive_seed(seed, &[k as u64]))?;
        let r = EvalResult::from_scores(&scores, val.labels())?;
        let v = match goal {
            Goal::G => r.g,
            Goal::Pd => r.pd,
            Goal::Pf => r.pf,
            Goal::F => r.f,
            Goal::Prec => r.prec,
        };
        if v.is_none() {
            undefined_folds.push(k);
        }
        per_fold.push(v.unwrap_or(0.0));
    }
    Ok(CvOutcome {
        value: per_fold.iter().sum::<f64>() / per_fold.len() as f64,
        per_fold,
        undefined_folds,
    })
}

/// Fits on the whole training set and evaluates once on `test`.
pub fn final_fit_and_test(
    p: &PipelineSpec,
    train_ds: &Dataset,
    test: &Dataset,
    seed: u64,
) -> Result<(EvalResult, RankedList)> {
    if test.is_empty() {
        return Err(Error::Validation("test set is empty".into()));
    }
    let scores = fit_and_score(p, train_ds, test, seed)?;
    Ok((
        EvalResult::from_scores(&scores, test.labels())?,
        RankedList::build(&scores, test.labels())?,
    ))
}
