//! Dual optimisation of pre-processor and learner choices.
//!
//! Stage 1 zeroes a weight per menu item. Stage 2 samples `n1` random
//! (pre-processor, learner) pairs, favouring heavier items, and scores each
//! result against all earlier ones: a result more than `epsilon` above some
//! earlier result earns +1, one within `epsilon` of some earlier result costs
//! 1, and both chosen items receive the sum. Stage 3 freezes the weights and
//! spends `n2` evaluations on the heaviest learner and pre-processor, halving
//! numeric ranges towards every new incumbent.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::trace::{require, Evaluator, ItemChoice, OptimizerTrace, PipelineSpec};
use crate::error::Result;
use crate::params::{sample_real, ItemSpace, ParamDomain, ParamSpace, ParamValue, Params};
use crate::util::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwiftConfig {
    pub epsilon: f64,
    pub n1: usize,
    pub n2: usize,
    pub seed: u64,
}

impl Default for SwiftConfig {
    fn default() -> Self {
        SwiftConfig {
            epsilon: 0.2,
            n1: 12,
            n2: 30,
            seed: 0,
        }
    }
}

impl SwiftConfig {
    pub fn validate(&self) -> Result<()> {
        require(self.epsilon > 0.0, || format!("epsilon must be positive, got {}", self.epsilon))?;
        require(self.n1 >= 1 && self.n2 >= 1, || "n1 and n2 must be at least 1".into())
    }
}

/// Weight change for a result `value` given all earlier results.
pub fn weight_delta(value: f64, priors: &[f64], epsilon: f64) -> i64 {
    let better = priors.iter().any(|&p| value - p > epsilon);
    let close = priors.iter().any(|&p| (value - p).abs() < epsilon);
    i64::from(better) - i64::from(close)
}

/// Recomputes item weights from the first `n1` evaluations of a trace.
pub fn replay_weights(trace: &OptimizerTrace, space: &ParamSpace, epsilon: f64, n1: usize) -> Vec<(String, i64)> {
    let mut weights: BTreeMap<&str, i64> = space.items.iter().map(|i| (i.id.as_str(), 0)).collect();
    let evals = &trace.evaluations[..n1.min(trace.evaluations.len())];
    let values: Vec<f64> = evals.iter().map(|e| e.value).collect();
    for (t, e) in evals.iter().enumerate() {
        let d = weight_delta(e.value, &values[..t], epsilon);
        for id in [&e.spec.learner.id, &e.spec.preprocessor.id] {
            if let Some(w) = weights.get_mut(id.as_str()) {
                *w += d;
            }
        }
    }
    space
        .items
        .iter()
        .map(|i| (i.id.clone(), weights[i.id.as_str()]))
        .collect()
}

fn sampling_mass(w: i64) -> f64 {
    w.max(0) as f64 + 1.0
}

/// Numeric search interval per parameter of the refined items.
type Intervals = BTreeMap<String, (f64, f64)>;

fn initial_intervals(item: &ItemSpace) -> Intervals {
    item.params
        .iter()
        .filter_map(|p| p.bounds().map(|b| (p.name.clone(), b)))
        .collect()
}

fn sample_refined<R: Rng>(item: &ItemSpace, intervals: &Intervals, r: &mut R) -> Params {
    item.params
        .iter()
        .map(|p| {
            let v = match (&p.domain, intervals.get(&p.name)) {
                (ParamDomain::Int { .. }, Some(&(lo, hi))) => {
                    let (a, b) = (lo.ceil() as i64, hi.floor() as i64);
                    ParamValue::Int(if a <= b {
                        r.random_range(a..=b)
                    } else {
                        ((lo + hi) / 2.0).round() as i64
                    })
                }
                (ParamDomain::Real { .. }, Some(&(lo, hi))) => ParamValue::Real(sample_real(r, lo, hi)),
                _ => p.sample(r),
            };
            (p.name.clone(), v)
        })
        .collect()
}

/// Moves the endpoint farther from each sampled value halfway towards it.
fn refine(intervals: &mut Intervals, params: &Params) {
    for (name, (lo, hi)) in intervals.iter_mut() {
        let Some(b) = params.get(name).and_then(ParamValue::as_f64) else {
            continue;
        };
        if *hi - b >= b - *lo {
            *hi = (b + *hi) / 2.0;
        } else {
            *lo = (b + *lo) / 2.0;
        }
    }
}

fn pick<'a, R: Rng>(items: &[&'a ItemSpace], weights: &BTreeMap<String, i64>, r: &mut R) -> &'a ItemSpace {
    let masses: Vec<f64> = items.iter().map(|i| sampling_mass(weights[&i.id])).collect();
    let dist = WeightedIndex::new(&masses).expect("masses are positive");
    items[dist.sample(r)]
}

/// Heaviest item; ties go to the best value it produced, then menu order.
fn top<'a>(items: &[&'a ItemSpace], weights: &BTreeMap<String, i64>, best_seen: &BTreeMap<String, f64>) -> &'a ItemSpace {
    let mut best = items[0];
    for &item in &items[1..] {
        let key = |i: &ItemSpace| (weights[&i.id], best_seen.get(&i.id).copied().unwrap_or(f64::NEG_INFINITY));
        let (w, v) = key(item);
        let (bw, bv) = key(best);
        if w > bw || (w == bw && v > bv) {
            best = item;
        }
    }
    best
}

pub fn swift_optimize(
    space: &ParamSpace,
    cfg: &SwiftConfig,
    objective: &mut dyn FnMut(&PipelineSpec) -> Result<f64>,
) -> Result<OptimizerTrace> {
    cfg.validate()?;
    space.check_invariants()?;
    let learners: Vec<&ItemSpace> = space.learners().collect();
    let preprocessors: Vec<&ItemSpace> = space.preprocessors().collect();
    require(!learners.is_empty(), || "the menu has no learner".into())?;
    require(!preprocessors.is_empty(), || "the menu has no pre-processor".into())?;
    if cfg.n1 < learners.len().max(preprocessors.len()) {
        log::warn!(
            "n1={} is smaller than the menu ({} learners, {} pre-processors); some items will not be tried",
            cfg.n1,
            learners.len(),
            preprocessors.len()
        );
    }

    let mut r = rng(cfg.seed);
    let mut eval = Evaluator::new(objective);
    let mut weights: BTreeMap<String, i64> = space.items.iter().map(|i| (i.id.clone(), 0)).collect();
    let mut best_seen: BTreeMap<String, f64> = BTreeMap::new();
    let mut values = Vec::with_capacity(cfg.n1);

    for _ in 0..cfg.n1 {
        let learner = pick(&learners, &weights, &mut r);
        let pre = pick(&preprocessors, &weights, &mut r);
        let spec = PipelineSpec {
            preprocessor: ItemChoice::new(pre.id.clone(), pre.sample(&mut r)),
            learner: ItemChoice::new(learner.id.clone(), learner.sample(&mut r)),
        };
        let v = eval.evaluate(&spec);
        let d = weight_delta(v, &values, cfg.epsilon);
        values.push(v);
        for id in [&learner.id, &pre.id] {
            *weights.get_mut(id).expect("menu item") += d;
            let b = best_seen.entry(id.clone()).or_insert(v);
            *b = b.max(v);
        }
    }

    let learner = top(&learners, &weights, &best_seen);
    let pre = top(&preprocessors, &weights, &best_seen);
    log::debug!("refining {} + {}", pre.id, learner.id);
    let mut l_int = initial_intervals(learner);
    let mut p_int = initial_intervals(pre);
    let mut refinement = Vec::with_capacity(cfg.n2);
    for _ in 0..cfg.n2 {
        let spec = PipelineSpec {
            preprocessor: ItemChoice::new(pre.id.clone(), sample_refined(pre, &p_int, &mut r)),
            learner: ItemChoice::new(learner.id.clone(), sample_refined(learner, &l_int, &mut r)),
        };
        let before = eval.trace.best_value();
        if eval.evaluate(&spec) > before {
            refine(&mut l_int, &spec.learner.params);
            refine(&mut p_int, &spec.preprocessor.params);
        }
        let mut snapshot: Vec<(String, f64, f64)> = Vec::new();
        for (prefix, ints) in [(&pre.id, &p_int), (&learner.id, &l_int)] {
            snapshot.extend(ints.iter().map(|(n, &(lo, hi))| (format!("{prefix}.{n}"), lo, hi)));
        }
        refinement.push(snapshot);
    }

    let mut trace = eval.trace;
    trace.weights = space.items.iter().map(|i| (i.id.clone(), weights[&i.id])).collect();
    trace.refinement = refinement;
    Ok(trace)
}
