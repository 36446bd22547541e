//! Confusion counts, the g-measure, initial false alarms and decile MAP.
//!
//! Quantities whose denominator is zero are `None`; report writers print
//! them as 0 and record a flag.

use serde::{Deserialize, Serialize};

use crate::data::SBR;
use crate::error::{Error, Result};
use crate::learners::label_of;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
    pub tn: usize,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fn_ + self.fp + self.tn
    }

    /// Recall of the positive class.
    pub fn pd(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// False alarm rate.
    pub fn pf(&self) -> Option<f64> {
        ratio(self.fp, self.fp + self.tn)
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }
}

pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<Confusion> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Argument(format!(
            "confusion needs equal lengths, got {} and {}",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut c = Confusion::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t == SBR, p == SBR) {
            (true, true) => c.tp += 1,
            (true, false) => c.fn_ += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// Harmonic mean of recall and `1 - pf`; 0 when both are 0.
pub fn g_measure(pd: f64, pf: f64) -> f64 {
    let spec = 1.0 - pf;
    let den = pd + spec;
    if den == 0.0 {
        0.0
    } else {
        2.0 * pd * spec / den
    }
}

/// `(precision, f-score)`.
pub fn precision_f(c: &Confusion) -> (Option<f64>, Option<f64>) {
    let prec = c.precision();
    let f = match (c.pd(), prec) {
        (Some(pd), Some(p)) if pd + p > 0.0 => Some(2.0 * pd * p / (pd + p)),
        _ => None,
    };
    (prec, f)
}

/// Record indices in rank order with their scores and true labels.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub order: Vec<usize>,
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
}

impl RankedList {
    pub fn build(scores: &[f64], labels: &[u8]) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Argument("scores and labels differ in length".into()));
        }
        let chrono: Vec<usize> = (0..scores.len()).collect();
        let order = rank_reports(scores, &chrono)?;
        Ok(RankedList {
            scores: order.iter().map(|&i| scores[i]).collect(),
            labels: order.iter().map(|&i| labels[i]).collect(),
            order,
        })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// The prefix predicted positive.
    pub fn predicted_positive(&self) -> RankedList {
        let keep = self.scores.iter().take_while(|&&s| label_of(s) == SBR).count();
        RankedList {
            order: self.order[..keep].to_vec(),
            scores: self.scores[..keep].to_vec(),
            labels: self.labels[..keep].to_vec(),
        }
    }
}

/// Indices sorted by descending score, ties by earlier chronological position.
pub fn rank_reports(scores: &[f64], order: &[usize]) -> Result<Vec<usize>> {
    if scores.len() != order.len() {
        return Err(Error::Argument("scores and order differ in length".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(order[a].cmp(&order[b])));
    Ok(idx)
}

/// Initial false alarms: negatives ranked before the first positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ifa {
    pub count: usize,
    pub hit: bool,
}

pub fn ifa(ranked: &RankedList) -> Ifa {
    match ranked.labels.iter().position(|&l| l == SBR) {
        Some(count) => Ifa { count, hit: true },
        None => Ifa {
            count: ranked.len(),
            hit: false,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ApMode {
    /// Precision at each relevant rank, averaged over relevant items.
    #[default]
    Standard,
    /// Precision at every rank up to the cut, averaged over the cut.
    Literal,
}

fn average_precision(labels: &[u8], mode: ApMode) -> f64 {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, &l) in labels.iter().enumerate() {
        let relevant = l == SBR;
        hits += usize::from(relevant);
        if relevant || mode == ApMode::Literal {
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    let n = match mode {
        ApMode::Standard => hits,
        ApMode::Literal => labels.len(),
    };
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Average precision over the top `ceil(d * n / 10)` entries for `d = 1..=10`.
pub fn map_deciles(ranked: &RankedList, mode: ApMode) -> Result<[f64; 10]> {
    let n = ranked.len();
    if n < 10 {
        return Err(Error::Argument(format!("decile MAP needs at least 10 entries, got {n}")));
    }
    let mut out = [0.0; 10];
    for (d, v) in out.iter_mut().enumerate() {
        let cut = ((d + 1) * n).div_ceil(10);
        *v = average_precision(&ranked.labels[..cut], mode);
    }
    Ok(out)
}

/// Metrics of one test evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub confusion: Confusion,
    pub pd: Option<f64>,
    pub pf: Option<f64>,
    pub prec: Option<f64>,
    pub f: Option<f64>,
    pub g: Option<f64>,
    pub ifa: Ifa,
}

impl EvalResult {
    pub fn from_scores(scores: &[f64], labels: &[u8]) -> Result<Self> {
        let pred: Vec<u8> = scores.iter().map(|&s| label_of(s)).collect();
        let c = confusion(labels, &pred)?;
        let (prec, f) = precision_f(&c);
        let (pd, pf) = (c.pd(), c.pf());
        let g = match (pd, pf) {
            (None, None) => None,
            _ => {
                let (a, b) = (pd.unwrap_or(0.0), pf.unwrap_or(0.0));
                (a + (1.0 - b) > 0.0).then(|| g_measure(a, b))
            }
        };
        let ranked = RankedList::build(scores, labels)?;
        Ok(EvalResult {
            confusion: c,
            pd,
            pf,
            prec,
            f,
            g,
            ifa: ifa(&ranked.predicted_positive()),
        })
    }

    /// Value of a named goal metric with undefined values as 0.
    pub fn metric(&self, name: &str) -> Option<f64> {
        let v = match name {
            "pd" | "recall" => self.pd,
            "pf" => self.pf,
            "prec" | "precision" => self.prec,
            "f" | "f1" => self.f,
            "g" => self.g,
            "ifa" => Some(self.ifa.count as f64),
            _ => return None,
        };
        Some(v.unwrap_or(0.0))
    }

    /// Names of metrics that were undefined.
    pub fn undefined(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        for (name, v) in [("pd", self.pd), ("pf", self.pf), ("prec", self.prec), ("f", self.f), ("g", self.g)] {
            if v.is_none() {
                out.push(name);
            }
        }
        if !self.ifa.hit {
            out.push("ifa");
        }
        out
    }
}
