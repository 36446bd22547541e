//! Differential evolution over the hyperparameters of one menu item.
//!
//! Every parameter is embedded as one real coordinate: integers and reals by
//! value, categoricals by choice index, booleans as 0/1. Mutants are clipped
//! to the bounds and then snapped back to legal values.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::trace::{require, Evaluator, ItemChoice, OptimizerTrace, PipelineSpec};
use crate::error::Result;
use crate::params::{sample_real, ItemKind, ItemSpace, ParamDomain, ParamRange, ParamValue, Params};
use crate::util::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeConfig {
    pub np: usize,
    pub f: f64,
    pub cr: f64,
    pub iters: usize,
    pub seed: u64,
}

impl DeConfig {
    pub fn new(np: usize, iters: usize, seed: u64) -> Self {
        DeConfig {
            np,
            f: 0.8,
            cr: 0.9,
            iters,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require(self.np >= 4, || format!("DE needs np >= 4, got {}", self.np))?;
        require(self.f > 0.0 && self.f <= 2.0, || format!("DE needs 0 < f <= 2, got {}", self.f))?;
        require((0.0..=1.0).contains(&self.cr), || format!("DE needs 0 <= cr <= 1, got {}", self.cr))
    }
}

/// Population size used when tuning `item_id` alone.
pub fn default_np(item_id: &str) -> usize {
    match item_id {
        "RF" | "MLP" => 60,
        "LR" | "SMOTE" => 30,
        "KNN" => 20,
        _ => 10,
    }
}

fn coord_bounds(p: &ParamRange) -> (f64, f64) {
    match &p.domain {
        ParamDomain::Int { lo, hi } => (*lo as f64, *hi as f64),
        ParamDomain::Real { lo, hi } => (*lo, *hi),
        ParamDomain::Categorical(c) => (0.0, (c.len() - 1) as f64),
        ParamDomain::Boolean => (0.0, 1.0),
    }
}

fn snap(p: &ParamRange, x: f64) -> f64 {
    let (lo, hi) = coord_bounds(p);
    let x = x.clamp(lo, hi);
    match p.domain {
        ParamDomain::Real { .. } => x,
        _ => x.round(),
    }
}

fn decode_value(p: &ParamRange, x: f64) -> ParamValue {
    match &p.domain {
        ParamDomain::Int { .. } => ParamValue::Int(x as i64),
        ParamDomain::Real { .. } => ParamValue::Real(x),
        ParamDomain::Categorical(c) => ParamValue::Text(c[x as usize].clone()),
        ParamDomain::Boolean => ParamValue::Bool(x >= 0.5),
    }
}

pub(crate) fn decode(item: &ItemSpace, v: &[f64]) -> Params {
    item.params
        .iter()
        .zip(v)
        .map(|(p, &x)| (p.name.clone(), decode_value(p, x)))
        .collect()
}

/// `a + f * (b - c)`, one coordinate.
pub fn mutate(a: f64, b: f64, c: f64, f: f64) -> f64 {
    a + f * (b - c)
}

fn with_item(base: &PipelineSpec, item: &ItemSpace, params: Params) -> PipelineSpec {
    let mut spec = base.clone();
    let choice = ItemChoice::new(item.id.clone(), params);
    match item.kind {
        ItemKind::Learner => spec.learner = choice,
        ItemKind::Preprocessor => spec.preprocessor = choice,
    }
    spec
}

/// Tunes `item` inside `base`, maximising `objective`.
pub fn de_optimize(
    item: &ItemSpace,
    base: &PipelineSpec,
    cfg: &DeConfig,
    objective: &mut dyn FnMut(&PipelineSpec) -> Result<f64>,
) -> Result<OptimizerTrace> {
    cfg.validate()?;
    item.check_invariants()?;
    let mut r = rng(cfg.seed);
    let dims = item.params.len();
    let mut eval = Evaluator::new(objective);

    let mut pop: Vec<Vec<f64>> = (0..cfg.np)
        .map(|_| {
            item.params
                .iter()
                .map(|p| {
                    let (lo, hi) = coord_bounds(p);
                    snap(p, sample_real(&mut r, lo, hi))
                })
                .collect()
        })
        .collect();
    let mut values: Vec<f64> = pop
        .iter()
        .map(|v| eval.evaluate(&with_item(base, item, decode(item, v))))
        .collect();

    for _ in 0..cfg.iters {
        let mutants: Vec<Vec<f64>> = (0..cfg.np)
            .map(|i| {
                let picks = sample(&mut r, cfg.np - 1, 3).into_vec();
                let [a, b, c] = [0, 1, 2].map(|k| if picks[k] >= i { picks[k] + 1 } else { picks[k] });
                let forced = if dims > 0 { r.random_range(0..dims) } else { 0 };
                (0..dims)
                    .map(|j| {
                        if j == forced || r.random::<f64>() < cfg.cr {
                            snap(&item.params[j], mutate(pop[a][j], pop[b][j], pop[c][j], cfg.f))
                        } else {
                            pop[i][j]
                        }
                    })
                    .collect()
            })
            .collect();
        let mutant_values: Vec<f64> = mutants
            .iter()
            .map(|v| eval.evaluate(&with_item(base, item, decode(item, v))))
            .collect();
        for (i, (m, v)) in mutants.into_iter().zip(mutant_values).enumerate() {
            if v >= values[i] {
                pop[i] = m;
                values[i] = v;
            }
        }
    }

    let mut trace = eval.trace;
    trace.population = pop.iter().map(|v| with_item(base, item, decode(item, v))).collect();
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{ItemKind, ParamRange};

    fn space(ranges: Vec<ParamRange>) -> ItemSpace {
        ItemSpace {
            id: "X".into(),
            kind: ItemKind::Learner,
            params: ranges,
        }
    }

    fn base() -> PipelineSpec {
        PipelineSpec {
            preprocessor: ItemChoice::new("None", Params::new()),
            learner: ItemChoice::new("X", Params::new()),
        }
    }

    fn x_of(spec: &PipelineSpec) -> f64 {
        spec.learner.params["x"].as_f64().unwrap()
    }

    #[test]
    fn mutation_arithmetic() {
        assert!((mutate(1.0, 3.0, 1.0, 0.8) - 2.6).abs() < 1e-15);
    }

    #[test]
    fn degenerate_range_is_constant() {
        let item = space(vec![ParamRange::int("x", ParamValue::Int(2), 2, 2)]);
        let trace = de_optimize(&item, &base(), &DeConfig::new(6, 3, 1), &mut |s| Ok(x_of(s))).unwrap();
        assert!(trace.evaluations.iter().all(|e| x_of(&e.spec) == 2.0));
        assert_eq!(x_of(&trace.best().unwrap().spec), 2.0);
    }

    #[test]
    fn parabola_converges() {
        let item = space(vec![ParamRange::real("x", ParamValue::Real(0.0), -5.0, 5.0)]);
        let trace = de_optimize(&item, &base(), &DeConfig::new(20, 10, 7), &mut |s| Ok(-x_of(s).powi(2))).unwrap();
        assert!(x_of(&trace.best().unwrap().spec).abs() < 0.1);
        assert_eq!(trace.evaluations.len(), 20 * 11);
    }

    #[test]
    fn small_population_rejected() {
        let item = space(vec![ParamRange::real("x", ParamValue::Real(0.0), -5.0, 5.0)]);
        assert!(de_optimize(&item, &base(), &DeConfig::new(3, 1, 0), &mut |_| Ok(0.0))
            .unwrap_err()
            .is_config());
    }

    #[test]
    fn mixed_types_stay_legal() {
        let item = space(vec![
            ParamRange::int("k", ParamValue::Int(3), 1, 7),
            ParamRange::categorical("c", "a", &["a", "b", "c"]),
            ParamRange::boolean("b", true),
        ]);
        let mut obj = |s: &PipelineSpec| Ok(s.learner.params["k"].as_f64().unwrap());
        let trace = de_optimize(&item, &base(), &DeConfig::new(8, 4, 3), &mut obj).unwrap();
        for e in &trace.evaluations {
            item.validate(&e.spec.learner.params).unwrap();
        }
    }
}
