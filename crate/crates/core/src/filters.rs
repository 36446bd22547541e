//! Irrelevancy pruning of training data.
//!
//! The keyword filters (`farsec`, `farsecsq`, `farsectwo`) score every token
//! with a Graham-style spam probability, keep the top-K tokens as security
//! keywords, and drop non-security reports whose combined keyword score
//! reaches a cutoff. CLNI drops non-security reports whose nearest neighbours
//! mostly carry the other label. Security reports are never removed.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, NSBR, SBR};
use crate::error::{Error, Result};
use crate::util::squared_euclidean;

const SCORE_FLOOR: f64 = 0.01;
const SCORE_CEIL: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SupportKind {
    Plain,
    /// Square the SBR document frequency in the numerator.
    Squared,
    /// Double the NSBR document frequency.
    TimesTwo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeywordScores {
    feature_names: Vec<String>,
    /// `None` for tokens that occur in no report.
    scores: Vec<Option<f64>>,
    keywords: Vec<usize>,
}

impl KeywordScores {
    pub fn score_of(&self, token: &str) -> Option<f64> {
        let j = self.feature_names.iter().position(|n| n == token)?;
        self.scores[j]
    }

    pub fn score_at(&self, feature: usize) -> Option<f64> {
        self.scores.get(feature).copied().flatten()
    }

    /// Keyword feature indices, best first.
    pub fn keyword_indices(&self) -> &[usize] {
        &self.keywords
    }

    pub fn keyword_set(&self) -> Vec<&str> {
        self.keywords
            .iter()
            .map(|&j| self.feature_names[j].as_str())
            .collect()
    }
}

/// Per-token security probability from document frequencies.
///
/// `p_s = min(1, num_s / |SBR|)` with `num_s` the SBR document frequency
/// (squared for [`SupportKind::Squared`]); `p_ns = min(1, g * df_ns / |NSBR|)`
/// with `g = 2` for [`SupportKind::TimesTwo`]. The score `p_s / (p_s + p_ns)` is
/// clipped to `[0.01, 0.99]`. Keywords are the top `k` tokens by score, ties
/// going to the earlier column.
pub fn score_keywords(train: &Dataset, kind: SupportKind, k: usize) -> Result<KeywordScores> {
    let n_s = train.sbr_count();
    let n_ns = train.nsbr_count();
    if n_s == 0 {
        return Err(Error::Filter("cannot score keywords without positives".into()));
    }
    if n_ns == 0 {
        return Err(Error::Filter("cannot score keywords without negatives".into()));
    }
    let x = train.features();
    let labels = train.labels();
    let mut scores = Vec::with_capacity(train.n_features());
    for j in 0..train.n_features() {
        let (mut df_s, mut df_ns) = (0usize, 0usize);
        for (i, &label) in labels.iter().enumerate() {
            if x[[i, j]] > 0.0 {
                if label == SBR {
                    df_s += 1;
                } else {
                    df_ns += 1;
                }
            }
        }
        if df_s == 0 && df_ns == 0 {
            scores.push(None);
            continue;
        }
        let num_s = match kind {
            SupportKind::Squared => (df_s * df_s) as f64,
            _ => df_s as f64,
        };
        let g = if kind == SupportKind::TimesTwo { 2.0 } else { 1.0 };
        let p_s = (num_s / n_s as f64).min(1.0);
        let p_ns = (g * df_ns as f64 / n_ns as f64).min(1.0);
        scores.push(Some((p_s / (p_s + p_ns)).clamp(SCORE_FLOOR, SCORE_CEIL)));
    }
    let mut ranked: Vec<usize> = (0..scores.len()).filter(|&j| scores[j].is_some()).collect();
    // stable sort keeps column order among equal scores
    ranked.sort_by(|&a, &b| scores[b].unwrap().total_cmp(&scores[a].unwrap()));
    ranked.truncate(k);
    Ok(KeywordScores {
        feature_names: train.feature_names().to_vec(),
        scores,
        keywords: ranked,
    })
}

/// Combined probability over the keywords present in a report:
/// `prod(s) / (prod(s) + prod(1 - s))`, or 0 when no keyword occurs.
pub fn score_report(features: &[f64], scores: &KeywordScores) -> f64 {
    // log space: hundreds of keywords underflow a direct product
    let mut log_s = 0.0;
    let mut log_not = 0.0;
    let mut any = false;
    for &j in &scores.keywords {
        if features.get(j).is_some_and(|&v| v > 0.0) {
            let s = scores.scores[j].unwrap_or(0.5);
            log_s += s.ln();
            log_not += (1.0 - s).ln();
            any = true;
        }
    }
    if !any {
        return 0.0;
    }
    1.0 / (1.0 + (log_not - log_s).exp())
}

/// Drops NSBRs whose keyword score is at least `cutoff`.
pub fn apply_farsec_filter(train: &Dataset, scores: &KeywordScores, cutoff: f64) -> Result<Dataset> {
    if !(cutoff > 0.0 && cutoff < 1.0) {
        return Err(Error::Argument(format!("cutoff {cutoff} must be in (0, 1)")));
    }
    let keep: Vec<usize> = (0..train.len())
        .filter(|&i| {
            if train.labels()[i] == SBR {
                return true;
            }
            score_report(&train.row(i).to_vec(), scores) < cutoff
        })
        .collect();
    Ok(train.subset(&keep))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClniParams {
    /// Neighbours consulted per instance.
    pub neighbors: usize,
    /// Fraction of disagreeing neighbours that marks an instance as noise.
    pub noise_threshold: f64,
    /// Jaccard similarity between successive noise sets that stops iteration.
    pub stop_similarity: f64,
    /// Report-score threshold carried for configuration parity; see [`FilterConfig`].
    pub removal_limit: f64,
    pub max_iterations: usize,
}

impl Default for ClniParams {
    fn default() -> Self {
        ClniParams {
            neighbors: 5,
            noise_threshold: 0.75,
            stop_similarity: 0.99,
            removal_limit: 0.75,
            max_iterations: 20,
        }
    }
}

impl ClniParams {
    fn validate(&self) -> Result<()> {
        let frac = |v: f64| v > 0.0 && v <= 1.0;
        if self.neighbors == 0
            || !frac(self.noise_threshold)
            || !frac(self.stop_similarity)
            || !frac(self.removal_limit)
            || self.max_iterations == 0
        {
            return Err(Error::Argument(format!("invalid CLNI parameters {self:?}")));
        }
        Ok(())
    }
}

/// Noise flags for one CLNI pass; neighbours are drawn from instances not in `excluded`.
fn clni_pass(train: &Dataset, excluded: &[bool], p: &ClniParams) -> Vec<bool> {
    let x = train.features();
    let labels = train.labels();
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    (0..train.len())
        .into_par_iter()
        .map(|i| {
            // (distance, index) of the closest candidates, ascending
            let mut best: Vec<(f64, usize)> = Vec::with_capacity(p.neighbors + 1);
            for j in 0..rows.len() {
                if j == i || excluded[j] {
                    continue;
                }
                let d = squared_euclidean(&rows[i], &rows[j]);
                if best.len() == p.neighbors && d >= best[best.len() - 1].0 {
                    continue;
                }
                let at = best.partition_point(|&(bd, _)| bd <= d);
                best.insert(at, (d, j));
                best.truncate(p.neighbors);
            }
            if best.is_empty() {
                return false;
            }
            let differing = best.iter().filter(|&&(_, j)| labels[j] != labels[i]).count();
            differing as f64 / best.len() as f64 >= p.noise_threshold
        })
        .collect()
}

fn jaccard(a: &[bool], b: &[bool]) -> f64 {
    let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let union = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Closest-list noise identification. Iterates noise detection (each pass
/// ignoring the previous pass's noise as neighbours) until successive noise
/// sets reach `stop_similarity` Jaccard similarity or `max_iterations`, then
/// removes the NSBR members of the final noise set. A dataset whose feature
/// vectors are all identical is returned unchanged.
pub fn apply_clni(train: &Dataset, p: &ClniParams) -> Result<Dataset> {
    p.validate()?;
    if train.len() <= p.neighbors {
        log::warn!(
            "CLNI on {} records: voting with {} neighbours instead of {}",
            train.len(),
            train.len().saturating_sub(1),
            p.neighbors
        );
    }
    let x = train.features();
    if train.is_empty() || x.rows().into_iter().all(|r| r == x.row(0)) {
        return Ok(train.clone());
    }
    let mut previous = vec![false; train.len()];
    for iteration in 0..p.max_iterations {
        let current = clni_pass(train, &previous, p);
        let similarity = jaccard(&current, &previous);
        let stop = similarity >= p.stop_similarity;
        log::debug!(
            "clni iteration {}: {} noisy, similarity {:.4}",
            iteration,
            current.iter().filter(|&&b| b).count(),
            similarity
        );
        previous = current;
        if stop {
            break;
        }
    }
    let keep: Vec<usize> = (0..train.len())
        .filter(|&i| !(previous[i] && train.labels()[i] == NSBR))
        .collect();
    Ok(train.subset(&keep))
}

/// The eight training-data variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FilterKind {
    Train,
    Farsec,
    FarsecSq,
    FarsecTwo,
    Clni,
    ClniFarsec,
    ClniFarsecSq,
    ClniFarsecTwo,
}

impl FilterKind {
    pub const ALL: [FilterKind; 8] = [
        FilterKind::Train,
        FilterKind::FarsecSq,
        FilterKind::FarsecTwo,
        FilterKind::Farsec,
        FilterKind::Clni,
        FilterKind::ClniFarsecSq,
        FilterKind::ClniFarsecTwo,
        FilterKind::ClniFarsec,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Train => "train",
            FilterKind::Farsec => "farsec",
            FilterKind::FarsecSq => "farsecsq",
            FilterKind::FarsecTwo => "farsectwo",
            FilterKind::Clni => "clni",
            FilterKind::ClniFarsec => "clnifarsec",
            FilterKind::ClniFarsecSq => "clnifarsecsq",
            FilterKind::ClniFarsecTwo => "clnifarsectwo",
        }
    }

    fn support(self) -> Option<SupportKind> {
        match self {
            FilterKind::Farsec | FilterKind::ClniFarsec => Some(SupportKind::Plain),
            FilterKind::FarsecSq | FilterKind::ClniFarsecSq => Some(SupportKind::Squared),
            FilterKind::FarsecTwo | FilterKind::ClniFarsecTwo => Some(SupportKind::TimesTwo),
            FilterKind::Train | FilterKind::Clni => None,
        }
    }

    fn uses_clni(self) -> bool {
        matches!(
            self,
            FilterKind::Clni | FilterKind::ClniFarsec | FilterKind::ClniFarsecSq | FilterKind::ClniFarsecTwo
        )
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FilterKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown filter `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub keywords: usize,
    pub cutoff: f64,
    pub clni: ClniParams,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            keywords: 100,
            cutoff: 0.75,
            clni: ClniParams::default(),
        }
    }
}

/// Applies a named filter; `clni*` variants run CLNI over the keyword filter's output.
pub fn apply_filter(kind: FilterKind, train: &Dataset, cfg: &FilterConfig) -> Result<Dataset> {
    let mut out = match kind.support() {
        Some(support) => {
            let scores = score_keywords(train, support, cfg.keywords)?;
            apply_farsec_filter(train, &scores, cfg.cutoff)?
        }
        None => train.clone(),
    };
    if kind.uses_clni() {
        out = apply_clni(&out, &cfg.clni)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn ds(x: Array2<f64>, labels: &[u8]) -> Dataset {
        Dataset::from_matrix(x, labels.to_vec()).unwrap()
    }

    #[test]
    fn token_only_in_positives_clips_high() {
        // one SBR, two NSBRs; token f0 only in the SBR
        let d = ds(array![[1.0, 1.0], [0.0, 1.0], [0.0, 0.0]], &[1, 0, 0]);
        let s = score_keywords(&d, SupportKind::Plain, 10).unwrap();
        assert_eq!(s.score_at(0), Some(0.99));
    }

    #[test]
    fn balanced_token_scores_half() {
        let d = ds(array![[1.0], [1.0]], &[1, 0]);
        let s = score_keywords(&d, SupportKind::Plain, 10).unwrap();
        assert_eq!(s.score_at(0), Some(0.5));
    }

    #[test]
    fn times_two_lowers_score() {
        // |SBR| = 2, |NSBR| = 4, token in one of each
        let x = array![[1.0], [0.0], [1.0], [0.0], [0.0], [0.0]];
        let d = ds(x, &[1, 1, 0, 0, 0, 0]);
        let two = score_keywords(&d, SupportKind::TimesTwo, 1).unwrap();
        assert!((two.score_at(0).unwrap() - 0.5).abs() < 1e-12);
        let plain = score_keywords(&d, SupportKind::Plain, 1).unwrap();
        assert!((plain.score_at(0).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn no_positives_is_an_error() {
        let d = ds(array![[1.0], [0.0]], &[0, 0]);
        let err = score_keywords(&d, SupportKind::Plain, 5).unwrap_err();
        assert!(err.to_string().contains("without positives"));
    }

    #[test]
    fn unseen_tokens_are_unscored() {
        let d = ds(array![[1.0, 0.0], [0.0, 0.0]], &[1, 0]);
        let s = score_keywords(&d, SupportKind::Plain, 5).unwrap();
        assert_eq!(s.score_at(1), None);
        assert_eq!(s.keyword_indices(), &[0]);
    }

    #[test]
    fn keyword_ties_follow_column_order() {
        let d = ds(array![[1.0, 1.0, 1.0], [0.0, 0.0, 1.0]], &[1, 0]);
        let s = score_keywords(&d, SupportKind::Plain, 2).unwrap();
        assert_eq!(s.keyword_set(), vec!["f0", "f1"]);
    }

    fn hand_scores(values: &[f64]) -> KeywordScores {
        KeywordScores {
            feature_names: (0..values.len()).map(|j| format!("f{j}")).collect(),
            scores: values.iter().map(|&v| Some(v)).collect(),
            keywords: (0..values.len()).collect(),
        }
    }

    #[test]
    fn report_score_combination() {
        let s = hand_scores(&[0.5]);
        assert_eq!(score_report(&[3.0], &s), 0.5);
        assert_eq!(score_report(&[0.0], &s), 0.0);
        let s = hand_scores(&[0.9, 0.9]);
        let p = score_report(&[1.0, 2.0], &s);
        assert!((p - 0.81 / 0.82).abs() < 1e-12);
        assert!((p - 0.988).abs() < 5e-4);
    }

    #[test]
    fn farsec_filter_removes_only_high_scoring_negatives() {
        // hand scores: f0 = 0.9, f1 = 0.6, f2 = 0.2
        let s = hand_scores(&[0.9, 0.6, 0.2]);
        // NSBR scores: {f0} 0.9, {f0,f1} 0.931, {f1} 0.6, {f2} 0.2, {} 0
        let x = array![
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, 0.0],
            [1.0, 1.0, 1.0],
            [0.0, 0.0, 0.0],
        ];
        let d = ds(x, &[0, 0, 0, 0, 0, 1, 1]);
        let out = apply_farsec_filter(&d, &s, 0.75).unwrap();
        assert_eq!(out.nsbr_count(), 3);
        assert_eq!(out.sbr_count(), 2);
        assert_eq!(out.ids(), &["r2", "r3", "r4", "r5", "r6"]);
    }

    #[test]
    fn farsec_filter_noop_and_all_removed() {
        let d = ds(array![[0.0], [1.0], [1.0]], &[0, 1, 0]);
        let low = hand_scores(&[0.3]);
        assert_eq!(apply_farsec_filter(&d, &low, 0.75).unwrap(), d);
        let high = hand_scores(&[0.99]);
        let out = apply_farsec_filter(&ds(array![[1.0], [1.0], [1.0]], &[0, 1, 0]), &high, 0.75).unwrap();
        assert_eq!(out.labels(), &[1]);
    }

    #[test]
    fn clni_without_noise_is_identity() {
        let x = array![[0.0], [0.1], [0.2], [0.3], [10.0], [10.1], [10.2], [10.3]];
        let d = ds(x, &[0, 0, 0, 0, 1, 1, 1, 1]);
        let p = ClniParams {
            neighbors: 3,
            ..ClniParams::default()
        };
        assert_eq!(apply_clni(&d, &p).unwrap(), d);
    }

    #[test]
    fn clni_removes_isolated_negative() {
        let x = array![[1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [0.0, 0.0]];
        let d = ds(x, &[1, 1, 1, 1, 1, 0]);
        let p = ClniParams {
            neighbors: 3,
            noise_threshold: 0.75,
            ..ClniParams::default()
        };
        let out = apply_clni(&d, &p).unwrap();
        assert_eq!(out.len(), 5);
        assert_eq!(out.nsbr_count(), 0);
    }

    #[test]
    fn clni_keeps_positive_among_negatives() {
        let x = array![[0.0], [0.0], [0.0], [0.0], [0.0], [0.5]];
        let d = ds(x, &[0, 0, 0, 0, 0, 1]);
        let p = ClniParams {
            neighbors: 3,
            ..ClniParams::default()
        };
        let out = apply_clni(&d, &p).unwrap();
        assert_eq!(out.sbr_count(), 1);
    }

    #[test]
    fn clni_identical_vectors_unchanged() {
        let d = ds(Array2::ones((6, 2)), &[0, 1, 0, 1, 0, 1]);
        assert_eq!(apply_clni(&d, &ClniParams::default()).unwrap(), d);
    }

    #[test]
    fn filter_names_roundtrip() {
        for k in FilterKind::ALL {
            assert_eq!(k.name().parse::<FilterKind>().unwrap(), k);
        }
        assert!("farsecthree".parse::<FilterKind>().is_err());
    }
}
