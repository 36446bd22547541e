use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{LearnerKind, LearnerSpec};
use crate::params::Params;
use crate::preprocess::{PreprocessorKind, PreprocessorSpec};

/// One menu item with concrete hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemChoice {
    pub id: String,
    #[serde(default)]
    pub params: Params,
}

impl ItemChoice {
    pub fn new(id: impl Into<String>, params: Params) -> Self {
        ItemChoice { id: id.into(), params }
    }
}

/// A pre-processor followed by a learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub preprocessor: ItemChoice,
    pub learner: ItemChoice,
}

impl PipelineSpec {
    pub fn new(preprocessor: PreprocessorSpec, learner: LearnerSpec) -> Self {
        PipelineSpec {
            preprocessor: ItemChoice::new(preprocessor.kind.name(), preprocessor.params),
            learner: ItemChoice::new(learner.kind.name(), learner.params),
        }
    }

    /// Stable text form, used as the cache key and in reports.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("pipeline specs always serialize")
    }

    pub fn learner_spec(&self) -> Result<LearnerSpec> {
        let kind: LearnerKind = self.learner.id.parse()?;
        Ok(LearnerSpec::new(kind, self.learner.params.clone()))
    }

    pub fn preprocessor_spec(&self) -> Result<PreprocessorSpec> {
        let kind: PreprocessorKind = self.preprocessor.id.parse()?;
        Ok(PreprocessorSpec::new(kind, self.preprocessor.params.clone()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub spec: PipelineSpec,
    pub value: f64,
    /// The objective raised an error and the value was recorded as 0.
    pub failed: bool,
    pub cached: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptimizerTrace {
    pub evaluations: Vec<Evaluation>,
    /// Index into `evaluations` of the incumbent.
    pub incumbent: Option<usize>,
    /// Final item weights (SWIFT), in menu order.
    pub weights: Vec<(String, i64)>,
    /// Final population (DE).
    pub population: Vec<PipelineSpec>,
    /// Numeric search intervals after each refinement round (SWIFT), as `item.param, lo, hi`.
    pub refinement: Vec<Vec<(String, f64, f64)>>,
}

impl OptimizerTrace {
    pub fn best(&self) -> Option<&Evaluation> {
        self.incumbent.map(|i| &self.evaluations[i])
    }

    pub fn best_value(&self) -> f64 {
        self.best().map_or(f64::NEG_INFINITY, |e| e.value)
    }

    /// Running maximum of the objective after each evaluation.
    pub fn incumbent_curve(&self) -> Vec<f64> {
        let mut best = f64::NEG_INFINITY;
        self.evaluations
            .iter()
            .map(|e| {
                best = best.max(e.value);
                best
            })
            .collect()
    }

    pub fn weight(&self, id: &str) -> Option<i64> {
        self.weights.iter().find(|(i, _)| i == id).map(|(_, w)| *w)
    }
}

/// Wraps an objective with caching, failure capture and trace logging.
pub(crate) struct Evaluator<'a> {
    objective: &'a mut dyn FnMut(&PipelineSpec) -> Result<f64>,
    cache: HashMap<String, (f64, bool)>,
    pub trace: OptimizerTrace,
}

impl<'a> Evaluator<'a> {
    pub fn new(objective: &'a mut dyn FnMut(&PipelineSpec) -> Result<f64>) -> Self {
        Evaluator {
            objective,
            cache: HashMap::new(),
            trace: OptimizerTrace::default(),
        }
    }

    pub fn evaluate(&mut self, spec: &PipelineSpec) -> f64 {
        let key = spec.canonical();
        let (value, failed, cached) = match self.cache.get(&key) {
            Some(&(v, f)) => (v, f, true),
            None => {
                let (v, f) = match (self.objective)(spec) {
                    Ok(v) if v.is_finite() => (v, false),
                    Ok(v) => {
                        log::debug!("objective returned {v} for {key}");
                        (0.0, true)
                    }
                    Err(e) => {
                        log::debug!("evaluation failed for {key}: {e}");
                        (0.0, true)
                    }
                };
                self.cache.insert(key, (v, f));
                (v, f, false)
            }
        };
        let idx = self.trace.evaluations.len();
        if self.trace.best().is_none_or(|b| value > b.value) {
            self.trace.incumbent = Some(idx);
        }
        self.trace.evaluations.push(Evaluation {
            spec: spec.clone(),
            value,
            failed,
            cached,
        });
        value
    }
}

pub(crate) fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}
