//! Scott-Knott ranking of treatments with a bootstrap test and the A12 effect size.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::util::{derive_seed, mean, quantile_sorted, rng};

pub const DEFAULT_BOOTSTRAPS: usize = 1000;
pub const DEFAULT_CONFIDENCE: f64 = 0.95;
/// Effect sizes below this are "small" and never justify a split.
pub const A12_SMALL: f64 = 0.6;

#[derive(Debug, Clone, PartialEq)]
pub struct TreatmentSamples {
    pub name: String,
    pub values: Vec<f64>,
}

impl TreatmentSamples {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        TreatmentSamples {
            name: name.into(),
            values,
        }
    }
}

/// Probability that a value drawn from `m` beats one drawn from `n`, ties counting half.
pub fn a12(m: &[f64], n: &[f64]) -> Result<f64> {
    if m.is_empty() || n.is_empty() {
        return Err(Error::Argument("a12 needs two non-empty samples".into()));
    }
    let mut wins = 0.0;
    for x in m {
        for y in n {
            if x > y {
                wins += 1.0;
            } else if x == y {
                wins += 0.5;
            }
        }
    }
    Ok(wins / (m.len() * n.len()) as f64)
}

/// Two-sided bootstrap test of a difference in means. Both samples are
/// shifted onto the pooled mean to form the null.
pub fn bootstrap_significant(m: &[f64], n: &[f64], n_boot: usize, conf: f64, seed: u64) -> Result<bool> {
    if m.is_empty() || n.is_empty() {
        return Err(Error::Argument("bootstrap needs two non-empty samples".into()));
    }
    if n_boot < 100 {
        return Err(Error::Argument(format!("n_boot must be at least 100, got {n_boot}")));
    }
    let (mm, mn) = (mean(m), mean(n));
    let observed = (mm - mn).abs();
    if observed == 0.0 {
        return Ok(false);
    }
    let pooled = (m.iter().sum::<f64>() + n.iter().sum::<f64>()) / (m.len() + n.len()) as f64;
    let m0: Vec<f64> = m.iter().map(|v| v - mm + pooled).collect();
    let n0: Vec<f64> = n.iter().map(|v| v - mn + pooled).collect();
    let mut r = rng(seed);
    let mut resample_mean = |xs: &[f64]| (0..xs.len()).map(|_| xs[r.random_range(0..xs.len())]).sum::<f64>() / xs.len() as f64;
    let mut null: Vec<f64> = (0..n_boot)
        .map(|_| (resample_mean(&m0) - resample_mean(&n0)).abs())
        .collect();
    null.sort_by(f64::total_cmp);
    Ok(observed > quantile_sorted(&null, conf))
}

/// Expected squared shift of the two halves' means from the whole mean.
pub fn expected_delta(m: &[f64], n: &[f64]) -> f64 {
    let ls = (m.len() + n.len()) as f64;
    let l_mu = (m.iter().sum::<f64>() + n.iter().sum::<f64>()) / ls;
    let term = |xs: &[f64]| xs.len() as f64 / ls * (mean(xs) - l_mu).powi(2);
    term(m) + term(n)
}

/// One considered split of a contiguous run of sorted groups.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitTrace {
    pub groups: Vec<String>,
    pub cut: usize,
    pub e_delta: f64,
    pub a12: f64,
    pub significant: bool,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankAssignment {
    pub ranks: BTreeMap<String, usize>,
}

impl RankAssignment {
    pub fn rank_of(&self, name: &str) -> Option<usize> {
        self.ranks.get(name).copied()
    }
}

struct Ranker<'a> {
    groups: Vec<&'a TreatmentSamples>,
    n_boot: usize,
    conf: f64,
    seed: u64,
    trace: Vec<SplitTrace>,
    ranks: BTreeMap<String, usize>,
    next_rank: usize,
}

impl Ranker<'_> {
    fn pooled(&self, lo: usize, hi: usize) -> Vec<f64> {
        self.groups[lo..hi].iter().flat_map(|g| g.values.iter().copied()).collect()
    }

    fn recurse(&mut self, lo: usize, hi: usize) -> Result<()> {
        if hi - lo > 1 {
            let mut best: Option<(usize, f64)> = None;
            for cut in lo + 1..hi {
                let e = expected_delta(&self.pooled(lo, cut), &self.pooled(cut, hi));
                if best.is_none_or(|(_, b)| e > b) {
                    best = Some((cut, e));
                }
            }
            let (cut, e_delta) = best.expect("at least two groups");
            let (better, worse) = (self.pooled(lo, cut), self.pooled(cut, hi));
            let significant = bootstrap_significant(
                &better,
                &worse,
                self.n_boot,
                self.conf,
                derive_seed(self.seed, &[lo as u64, cut as u64, hi as u64]),
            )?;
            let effect = a12(&better, &worse)?;
            let accepted = significant && effect >= A12_SMALL;
            self.trace.push(SplitTrace {
                groups: self.groups[lo..hi].iter().map(|g| g.name.clone()).collect(),
                cut: cut - lo,
                e_delta,
                a12: effect,
                significant,
                accepted,
            });
            if accepted {
                self.recurse(lo, cut)?;
                return self.recurse(cut, hi);
            }
        }
        for g in &self.groups[lo..hi] {
            self.ranks.insert(g.name.clone(), self.next_rank);
        }
        self.next_rank += 1;
        Ok(())
    }
}

/// Scott-Knott with the default bootstrap settings, higher values ranking better.
pub fn scott_knott(groups: &[TreatmentSamples], seed: u64) -> Result<RankAssignment> {
    Ok(scott_knott_traced(groups, DEFAULT_BOOTSTRAPS, DEFAULT_CONFIDENCE, seed)?.0)
}

pub fn scott_knott_traced(
    groups: &[TreatmentSamples],
    n_boot: usize,
    conf: f64,
    seed: u64,
) -> Result<(RankAssignment, Vec<SplitTrace>)> {
    if groups.is_empty() {
        return Err(Error::Argument("scott-knott needs at least one group".into()));
    }
    for g in groups {
        if g.values.is_empty() || g.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("group `{}` needs finite values", g.name)));
        }
    }
    let mut sorted: Vec<&TreatmentSamples> = groups.iter().collect();
    sorted.sort_by(|a, b| mean(&b.values).total_cmp(&mean(&a.values)).then(a.name.cmp(&b.name)));
    let mut ranker = Ranker {
        groups: sorted,
        n_boot,
        conf,
        seed,
        trace: Vec::new(),
        ranks: BTreeMap::new(),
        next_rank: 1,
    };
    ranker.recurse(0, groups.len())?;
    Ok((RankAssignment { ranks: ranker.ranks }, ranker.trace))
}
