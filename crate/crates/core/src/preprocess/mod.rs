//! Feature pre-processors: scalers, transformers and SMOTE.
//!
//! Statistics are learned column-wise by [`fit`] on training rows only and
//! frozen in a [`FittedTransform`]. Percentiles use linear interpolation
//! between order statistics (position `q * (n - 1)` in the sorted column).
//! `copy` and `order` parameters are accepted but have no effect: transforms
//! never modify their input.

mod power;
mod smote;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

pub use power::PowerMethod;
pub use smote::smote;

use crate::error::{Error, Result};
use crate::params::{ParamReader, ParamSpace, Params};
use crate::util::quantile_sorted;

/// Widest matrix PolynomialFeatures may produce.
pub const MAX_POLYNOMIAL_WIDTH: usize = 1024;

const QUANTILE_BOUND: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PreprocessorKind {
    Normalizer,
    StandardScaler,
    MinMaxScaler,
    MaxAbsScaler,
    RobustScaler,
    QuantileTransformer,
    PowerTransformer,
    Binarizer,
    PolynomialFeatures,
    Smote,
    None,
}

impl PreprocessorKind {
    pub const ALL: [PreprocessorKind; 11] = [
        PreprocessorKind::Smote,
        PreprocessorKind::Normalizer,
        PreprocessorKind::StandardScaler,
        PreprocessorKind::MinMaxScaler,
        PreprocessorKind::MaxAbsScaler,
        PreprocessorKind::RobustScaler,
        PreprocessorKind::QuantileTransformer,
        PreprocessorKind::PowerTransformer,
        PreprocessorKind::Binarizer,
        PreprocessorKind::PolynomialFeatures,
        PreprocessorKind::None,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PreprocessorKind::Normalizer => "Normalizer",
            PreprocessorKind::StandardScaler => "StandardScaler",
            PreprocessorKind::MinMaxScaler => "MinMaxScaler",
            PreprocessorKind::MaxAbsScaler => "MaxAbsScaler",
            PreprocessorKind::RobustScaler => "RobustScaler",
            PreprocessorKind::QuantileTransformer => "QuantileTransformer",
            PreprocessorKind::PowerTransformer => "PowerTransformer",
            PreprocessorKind::Binarizer => "Binarizer",
            PreprocessorKind::PolynomialFeatures => "PolynomialFeatures",
            PreprocessorKind::Smote => "SMOTE",
            PreprocessorKind::None => "None",
        }
    }
}

impl fmt::Display for PreprocessorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PreprocessorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Binarization" => return Ok(PreprocessorKind::Binarizer),
            "none" => return Ok(PreprocessorKind::None),
            _ => {}
        }
        PreprocessorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown pre-processor `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessorSpec {
    pub kind: PreprocessorKind,
    #[serde(default)]
    pub params: Params,
}

impl PreprocessorSpec {
    pub fn new(kind: PreprocessorKind, params: Params) -> Self {
        PreprocessorSpec { kind, params }
    }

    pub fn none() -> Self {
        PreprocessorSpec::new(PreprocessorKind::None, Params::new())
    }

    pub fn with_defaults(kind: PreprocessorKind) -> Self {
        let params = ParamSpace::preprocessor_items()
            .into_iter()
            .find(|i| i.id == kind.name())
            .map(|i| i.defaults())
            .unwrap_or_default();
        PreprocessorSpec::new(kind, params)
    }

    pub fn validate(&self) -> Result<()> {
        let items = ParamSpace::preprocessor_items();
        let item = items
            .iter()
            .find(|i| i.id == self.kind.name())
            .ok_or_else(|| Error::Param(format!("no menu entry for {}", self.kind)))?;
        item.validate(&self.params)
    }

    /// SMOTE rewrites the training set instead of transforming features.
    pub fn is_oversampler(&self) -> bool {
        self.kind == PreprocessorKind::Smote
    }

    fn reader(&self) -> ParamReader<'_> {
        ParamReader::new(self.kind.name(), &self.params)
    }

    /// Oversamples a training set when this spec is SMOTE; identity otherwise.
    pub fn oversample(&self, ds: &crate::data::Dataset, seed: u64) -> Result<crate::data::Dataset> {
        if !self.is_oversampler() {
            return Ok(ds.clone());
        }
        let p = self.reader();
        smote(
            ds,
            p.usize("k", 5)?,
            p.f64("m", 50.0)?,
            p.f64("r", 2.0)?,
            seed,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Norm {
    L1,
    L2,
    Max,
}

#[derive(Debug, Clone, PartialEq)]
enum State {
    Identity,
    Normalizer(Norm),
    /// `(x - offset) * scale + shift`, per column.
    Affine {
        offset: Vec<f64>,
        scale: Vec<f64>,
        shift: Vec<f64>,
    },
    Quantile {
        quantiles: Vec<Vec<f64>>,
        references: Vec<f64>,
        normal: bool,
    },
    Power {
        method: PowerMethod,
        lambdas: Vec<f64>,
        standardize: Option<(Vec<f64>, Vec<f64>)>,
    },
    Binarizer(f64),
    Polynomial(Vec<Vec<usize>>),
}

/// Frozen statistics of a fitted pre-processor.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedTransform {
    kind: PreprocessorKind,
    n_features: usize,
    state: State,
}

fn columns(x: &Array2<f64>) -> Vec<Vec<f64>> {
    x.axis_iter(Axis(1)).map(|c| c.to_vec()).collect()
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn mean_std(col: &[f64]) -> (f64, f64) {
    let n = col.len() as f64;
    let m = col.iter().sum::<f64>() / n;
    let var = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

fn nonzero_or_one(s: f64) -> f64 {
    if s == 0.0 || !s.is_finite() {
        1.0
    } else {
        s
    }
}

/// numpy-style `interp` for ascending `xp` (duplicates allowed).
fn interp(x: f64, xp: &[f64], fp: &[f64]) -> f64 {
    let n = xp.len();
    if x <= xp[0] {
        return fp[0];
    }
    if x >= xp[n - 1] {
        return fp[n - 1];
    }
    let j = xp.partition_point(|&v| v <= x) - 1;
    let (x0, x1) = (xp[j], xp[j + 1]);
    if x1 == x0 {
        return fp[j];
    }
    fp[j] + (fp[j + 1] - fp[j]) * (x - x0) / (x1 - x0)
}

fn polynomial_terms(n: usize, degree: usize, interaction_only: bool, include_bias: bool) -> Vec<Vec<usize>> {
    fn extend(start: usize, n: usize, left: usize, distinct: bool, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for j in start..n {
            cur.push(j);
            extend(if distinct { j + 1 } else { j }, n, left - 1, distinct, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for d in (if include_bias { 0 } else { 1 })..=degree {
        extend(0, n, d, interaction_only, &mut Vec::new(), &mut out);
    }
    out
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Output width of PolynomialFeatures for `n` inputs.
pub fn polynomial_width(n: usize, degree: usize, interaction_only: bool, include_bias: bool) -> usize {
    (if include_bias { 0 } else { 1 }..=degree)
        .map(|d| {
            if interaction_only {
                binomial(n, d)
            } else {
                binomial(n + d - 1, d)
            }
        })
        .fold(0usize, usize::saturating_add)
}

/// Learns column statistics of `spec` from `x`.
pub fn fit(spec: &PreprocessorSpec, x: &Array2<f64>) -> Result<FittedTransform> {
    spec.validate()?;
    if x.nrows() == 0 {
        return Err(Error::Validation("cannot fit a pre-processor on zero rows".into()));
    }
    let p = spec.reader();
    let n = x.ncols();
    let state = match spec.kind {
        PreprocessorKind::None | PreprocessorKind::Smote => State::Identity,
        PreprocessorKind::Normalizer => State::Normalizer(match p.text("norm", "l2")? {
            "l1" => Norm::L1,
            "l2" => Norm::L2,
            "max" => Norm::Max,
            other => return Err(Error::Param(format!("unknown norm `{other}`"))),
        }),
        PreprocessorKind::StandardScaler => {
            let (with_mean, with_std) = (p.bool("with_mean", true)?, p.bool("with_std", true)?);
            let stats: Vec<(f64, f64)> = columns(x).iter().map(|c| mean_std(c)).collect();
            State::Affine {
                offset: stats.iter().map(|s| if with_mean { s.0 } else { 0.0 }).collect(),
                scale: stats
                    .iter()
                    .map(|s| if with_std { 1.0 / nonzero_or_one(s.1) } else { 1.0 })
                    .collect(),
                shift: vec![0.0; n],
            }
        }
        PreprocessorKind::MinMaxScaler => {
            let (lo, hi) = (p.f64("min", 0.0)?, p.f64("max", 1.0)?);
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                return Err(Error::Param(format!("MinMaxScaler needs min < max, got {lo} >= {hi}")));
            }
            let cols = columns(x);
            let mins: Vec<f64> = cols.iter().map(|c| c.iter().copied().fold(f64::INFINITY, f64::min)).collect();
            let maxs: Vec<f64> = cols
                .iter()
                .map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
                .collect();
            State::Affine {
                scale: mins
                    .iter()
                    .zip(&maxs)
                    .map(|(a, b)| (hi - lo) / nonzero_or_one(b - a))
                    .collect(),
                offset: mins,
                shift: vec![lo; n],
            }
        }
        PreprocessorKind::MaxAbsScaler => State::Affine {
            offset: vec![0.0; n],
            scale: columns(x)
                .iter()
                .map(|c| 1.0 / nonzero_or_one(c.iter().fold(0.0f64, |m, v| m.max(v.abs()))))
                .collect(),
            shift: vec![0.0; n],
        },
        PreprocessorKind::RobustScaler => {
            let (q_min, q_max) = (p.f64("q_min", 25.0)?, p.f64("q_max", 75.0)?);
            if !(0.0 <= q_min && q_min < q_max && q_max <= 100.0) {
                return Err(Error::Param(format!("RobustScaler needs q_min < q_max, got {q_min}, {q_max}")));
            }
            let (centering, scaling) = (p.bool("with_centering", true)?, p.bool("with_scaling", true)?);
            let mut offset = Vec::with_capacity(n);
            let mut scale = Vec::with_capacity(n);
            for c in columns(x) {
                let s = sorted(c);
                offset.push(if centering { quantile_sorted(&s, 0.5) } else { 0.0 });
                let iqr = quantile_sorted(&s, q_max / 100.0) - quantile_sorted(&s, q_min / 100.0);
                scale.push(if scaling { 1.0 / nonzero_or_one(iqr) } else { 1.0 });
            }
            State::Affine {
                offset,
                scale,
                shift: vec![0.0; n],
            }
        }
        PreprocessorKind::QuantileTransformer => {
            let requested = p.usize("n_quantiles", 1000)?;
            let subsample = p.usize("subsample", 100_000)?.max(1);
            let ignore_zeros = p.bool("ignore_implicit_zeros", false)?;
            let normal = match p.text("output_distribution", "uniform")? {
                "uniform" => false,
                "normal" => true,
                other => return Err(Error::Param(format!("unknown output_distribution `{other}`"))),
            };
            let rows = x.nrows().min(subsample);
            let n_quantiles = if requested > rows {
                log::warn!("n_quantiles={requested} exceeds {rows} samples, clamping");
                rows
            } else {
                requested
            }
            .max(1);
            let references: Vec<f64> = if n_quantiles == 1 {
                vec![0.0]
            } else {
                (0..n_quantiles).map(|i| i as f64 / (n_quantiles - 1) as f64).collect()
            };
            // deterministic stride subsample
            let picked: Vec<usize> = if x.nrows() > subsample {
                (0..subsample).map(|i| i * x.nrows() / subsample).collect()
            } else {
                (0..x.nrows()).collect()
            };
            let quantiles = columns(x)
                .into_iter()
                .map(|c| {
                    let mut vals: Vec<f64> = picked.iter().map(|&i| c[i]).collect();
                    if ignore_zeros && vals.iter().any(|&v| v != 0.0) {
                        vals.retain(|&v| v != 0.0);
                    }
                    let s = sorted(vals);
                    let mut q: Vec<f64> = references.iter().map(|&r| quantile_sorted(&s, r)).collect();
                    for i in 1..q.len() {
                        q[i] = q[i].max(q[i - 1]);
                    }
                    q
                })
                .collect();
            State::Quantile {
                quantiles,
                references,
                normal,
            }
        }
        PreprocessorKind::PowerTransformer => {
            let method = match p.text("method", "yeo-johnson")? {
                "yeo-johnson" => PowerMethod::YeoJohnson,
                "box-cox" => PowerMethod::BoxCox,
                other => return Err(Error::Param(format!("unknown method `{other}`"))),
            };
            let cols = columns(x);
            let lambdas = cols
                .iter()
                .enumerate()
                .map(|(j, c)| power::fit_lambda(method, c, j))
                .collect::<Result<Vec<_>>>()?;
            let standardize = if p.bool("standardize", true)? {
                let stats: Vec<(f64, f64)> = cols
                    .iter()
                    .zip(&lambdas)
                    .map(|(c, &l)| {
                        let t: Vec<f64> = c.iter().map(|&v| power::apply(method, v, l)).collect();
                        mean_std(&t)
                    })
                    .collect();
                Some((
                    stats.iter().map(|s| s.0).collect(),
                    stats.iter().map(|s| nonzero_or_one(s.1)).collect(),
                ))
            } else {
                None
            };
            State::Power {
                method,
                lambdas,
                standardize,
            }
        }
        PreprocessorKind::Binarizer => State::Binarizer(p.f64("threshold", 0.0)?),
        PreprocessorKind::PolynomialFeatures => {
            let degree = p.usize("degree", 2)?;
            let interaction_only = p.bool("interaction_only", false)?;
            let include_bias = p.bool("include_bias", true)?;
            let width = polynomial_width(n, degree, interaction_only, include_bias);
            if width > MAX_POLYNOMIAL_WIDTH {
                return Err(Error::Argument(format!(
                    "PolynomialFeatures(degree={degree}) on {n} columns yields {width} columns, limit {MAX_POLYNOMIAL_WIDTH}"
                )));
            }
            State::Polynomial(polynomial_terms(n, degree, interaction_only, include_bias))
        }
    };
    Ok(FittedTransform {
        kind: spec.kind,
        n_features: n,
        state,
    })
}

impl FittedTransform {
    pub fn kind(&self) -> PreprocessorKind {
        self.kind
    }

    pub fn n_features_in(&self) -> usize {
        self.n_features
    }

    /// Applies the frozen statistics to `x`.
    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::Shape {
                expected: self.n_features,
                actual: x.ncols(),
            });
        }
        let mut out = x.clone();
        match &self.state {
            State::Identity => {}
            State::Normalizer(norm) => {
                for mut row in out.rows_mut() {
                    let size = match norm {
                        Norm::L1 => row.iter().map(|v| v.abs()).sum::<f64>(),
                        Norm::L2 => row.iter().map(|v| v * v).sum::<f64>().sqrt(),
                        Norm::Max => row.iter().fold(0.0f64, |m, v| m.max(v.abs())),
                    };
                    if size > 0.0 {
                        row.mapv_inplace(|v| v / size);
                    }
                }
            }
            State::Affine { offset, scale, shift } => {
                for mut row in out.rows_mut() {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = (*v - offset[j]) * scale[j] + shift[j];
                    }
                }
            }
            State::Quantile {
                quantiles,
                references,
                normal,
            } => {
                let neg_q: Vec<Vec<f64>> = quantiles
                    .iter()
                    .map(|q| q.iter().rev().map(|v| -v).collect())
                    .collect();
                let neg_r: Vec<f64> = references.iter().rev().map(|v| -v).collect();
                let std_normal = Normal::standard();
                for mut row in out.rows_mut() {
                    for (j, v) in row.iter_mut().enumerate() {
                        let q = &quantiles[j];
                        let (lo, hi) = (q[0], q[q.len() - 1]);
                        let mut u = if *v - QUANTILE_BOUND < lo {
                            0.0
                        } else if *v + QUANTILE_BOUND > hi {
                            1.0
                        } else {
                            0.5 * (interp(*v, q, references) - interp(-*v, &neg_q[j], &neg_r))
                        };
                        if *normal {
                            u = std_normal.inverse_cdf(u.clamp(QUANTILE_BOUND, 1.0 - QUANTILE_BOUND));
                        }
                        *v = u;
                    }
                }
            }
            State::Power {
                method,
                lambdas,
                standardize,
            } => {
                for (i, mut row) in out.rows_mut().into_iter().enumerate() {
                    for (j, v) in row.iter_mut().enumerate() {
                        if *method == PowerMethod::BoxCox && *v <= 0.0 {
                            return Err(Error::Domain {
                                column: j,
                                message: format!("box-cox requires positive data, row {i} has {v}"),
                            });
                        }
                        let mut t = power::apply(*method, *v, lambdas[j]);
                        if let Some((mean, std)) = standardize {
                            t = (t - mean[j]) / std[j];
                        }
                        *v = t;
                    }
                }
            }
            State::Binarizer(threshold) => out.mapv_inplace(|v| if v > *threshold { 1.0 } else { 0.0 }),
            State::Polynomial(terms) => {
                let mut poly = Array2::zeros((x.nrows(), terms.len()));
                for (i, row) in x.rows().into_iter().enumerate() {
                    for (t, term) in terms.iter().enumerate() {
                        poly[[i, t]] = term.iter().map(|&j| row[j]).product();
                    }
                }
                out = poly;
            }
        }
        Ok(out)
    }
}
