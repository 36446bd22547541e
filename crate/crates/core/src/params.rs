//! Hyperparameter values and the tuning menu.
//!
//! [`ParamSpace::default_menu`] is the learner and pre-processor menu with the
//! default value and tuning range of every hyperparameter. Some defaults are
//! toolkit sentinels that lie outside the tuning range (`None` for
//! `max_depth`/`max_leaf_nodes`, `"auto"` for `max_features`); they are valid
//! parameter values but are never sampled.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Real(f64),
    Text(String),
    Null,
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Real(r) => write!(f, "{r}"),
            ParamValue::Text(s) => f.write_str(s),
            ParamValue::Null => f.write_str("None"),
        }
    }
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(i) => Some(*i as f64),
            ParamValue::Real(r) => Some(*r),
            _ => None,
        }
    }
}

/// Named hyperparameter assignment. Ordered, so specs have one canonical form.
pub type Params = BTreeMap<String, ParamValue>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ParamDomain {
    Int { lo: i64, hi: i64 },
    Real { lo: f64, hi: f64 },
    Categorical(Vec<String>),
    Boolean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub name: String,
    pub domain: ParamDomain,
    pub default: ParamValue,
}

impl ParamRange {
    pub fn int(name: &str, default: ParamValue, lo: i64, hi: i64) -> Self {
        ParamRange {
            name: name.into(),
            domain: ParamDomain::Int { lo, hi },
            default,
        }
    }

    pub fn real(name: &str, default: ParamValue, lo: f64, hi: f64) -> Self {
        ParamRange {
            name: name.into(),
            domain: ParamDomain::Real { lo, hi },
            default,
        }
    }

    pub fn categorical(name: &str, default: &str, choices: &[&str]) -> Self {
        ParamRange {
            name: name.into(),
            domain: ParamDomain::Categorical(choices.iter().map(|s| s.to_string()).collect()),
            default: ParamValue::Text(default.into()),
        }
    }

    pub fn boolean(name: &str, default: bool) -> Self {
        ParamRange {
            name: name.into(),
            domain: ParamDomain::Boolean,
            default: ParamValue::Bool(default),
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.domain, ParamDomain::Int { .. } | ParamDomain::Real { .. })
    }

    /// Numeric bounds, if any.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self.domain {
            ParamDomain::Int { lo, hi } => Some((lo as f64, hi as f64)),
            ParamDomain::Real { lo, hi } => Some((lo, hi)),
            _ => None,
        }
    }

    /// Whether `value` lies inside the tuning range.
    pub fn contains(&self, value: &ParamValue) -> bool {
        match (&self.domain, value) {
            (ParamDomain::Int { lo, hi }, ParamValue::Int(v)) => lo <= v && v <= hi,
            (ParamDomain::Int { lo, hi }, ParamValue::Real(v)) => {
                v.fract() == 0.0 && *lo as f64 <= *v && *v <= *hi as f64
            }
            (ParamDomain::Real { lo, hi }, v) => v.as_f64().is_some_and(|v| *lo <= v && v <= *hi),
            (ParamDomain::Categorical(choices), ParamValue::Text(s)) => choices.contains(s),
            (ParamDomain::Boolean, ParamValue::Bool(_)) => true,
            _ => false,
        }
    }

    /// Accepts values in range and the declared default.
    pub fn admits(&self, value: &ParamValue) -> bool {
        self.contains(value) || *value == self.default
    }

    /// Uniform draw from the full tuning range.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamValue {
        match &self.domain {
            ParamDomain::Int { lo, hi } => ParamValue::Int(rng.random_range(*lo..=*hi)),
            ParamDomain::Real { lo, hi } => ParamValue::Real(sample_real(rng, *lo, *hi)),
            ParamDomain::Categorical(choices) => {
                ParamValue::Text(choices[rng.random_range(0..choices.len())].clone())
            }
            ParamDomain::Boolean => ParamValue::Bool(rng.random_bool(0.5)),
        }
    }
}

pub(crate) fn sample_real<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        lo + (hi - lo) * rng.random::<f64>()
    } else {
        lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ItemKind {
    Learner,
    Preprocessor,
}

/// One menu item (a learner or a pre-processor) and its tunable parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemSpace {
    pub id: String,
    pub kind: ItemKind,
    pub params: Vec<ParamRange>,
}

impl ItemSpace {
    pub fn param(&self, name: &str) -> Option<&ParamRange> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn defaults(&self) -> Params {
        self.params
            .iter()
            .map(|p| (p.name.clone(), p.default.clone()))
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Params {
        self.params
            .iter()
            .map(|p| (p.name.clone(), p.sample(rng)))
            .collect()
    }

    /// Every key must be declared and every value in range or equal to the default.
    pub fn validate(&self, params: &Params) -> Result<()> {
        for (name, value) in params {
            let range = self
                .param(name)
                .ok_or_else(|| Error::Param(format!("{} has no parameter `{}`", self.id, name)))?;
            if !range.admits(value) {
                return Err(Error::Param(format!(
                    "{}.{} = {} is outside its tuning range",
                    self.id, name, value
                )));
            }
        }
        Ok(())
    }

    pub fn check_invariants(&self) -> Result<()> {
        for p in &self.params {
            let ok = match &p.domain {
                ParamDomain::Int { lo, hi } => lo <= hi,
                ParamDomain::Real { lo, hi } => lo <= hi,
                ParamDomain::Categorical(c) => !c.is_empty(),
                ParamDomain::Boolean => true,
            };
            if !ok {
                return Err(Error::Config(format!("{}.{}: empty range", self.id, p.name)));
            }
            let sentinel = matches!(p.default, ParamValue::Null)
                || p.default == ParamValue::Text("auto".into());
            if !sentinel && !p.contains(&p.default) {
                return Err(Error::Config(format!(
                    "{}.{}: default {} outside range",
                    self.id, p.name, p.default
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    pub items: Vec<ItemSpace>,
}

fn int(v: i64) -> ParamValue {
    ParamValue::Int(v)
}

fn real(v: f64) -> ParamValue {
    ParamValue::Real(v)
}

fn learner(id: &str, params: Vec<ParamRange>) -> ItemSpace {
    ItemSpace {
        id: id.into(),
        kind: ItemKind::Learner,
        params,
    }
}

fn preprocessor(id: &str, params: Vec<ParamRange>) -> ItemSpace {
    ItemSpace {
        id: id.into(),
        kind: ItemKind::Preprocessor,
        params,
    }
}

fn copy_flag() -> ParamRange {
    ParamRange::boolean("copy", true)
}

impl ParamSpace {
    /// Learner menu in canonical order: RF, LR, MLP, KNN, NB.
    pub fn learner_items() -> Vec<ItemSpace> {
        vec![
            learner(
                "RF",
                vec![
                    ParamRange::int("n_estimators", int(10), 10, 150),
                    ParamRange::int("min_samples_leaf", int(1), 1, 20),
                    ParamRange::int("min_samples_split", int(2), 2, 20),
                    ParamRange::int("max_leaf_nodes", ParamValue::Null, 2, 50),
                    ParamRange::real("max_features", ParamValue::Text("auto".into()), 0.01, 1.0),
                    ParamRange::int("max_depth", ParamValue::Null, 1, 10),
                ],
            ),
            learner(
                "LR",
                vec![
                    ParamRange::real("C", real(1.0), 1.0, 10.0),
                    ParamRange::int("max_iter", int(100), 50, 200),
                ],
            ),
            learner(
                "MLP",
                vec![
                    ParamRange::real("alpha", real(0.0001), 0.0001, 0.001),
                    ParamRange::real("learning_rate_init", real(0.001), 0.001, 0.01),
                    ParamRange::real("power_t", real(0.5), 0.1, 1.0),
                    ParamRange::int("max_iter", int(200), 50, 300),
                    ParamRange::real("momentum", real(0.9), 0.1, 1.0),
                    ParamRange::int("n_iter_no_change", int(10), 1, 100),
                ],
            ),
            learner(
                "KNN",
                vec![
                    ParamRange::int("leaf_size", int(30), 10, 100),
                    ParamRange::int("n_neighbors", int(5), 1, 10),
                ],
            ),
            learner(
                "NB",
                vec![ParamRange::real("var_smoothing", real(1e-9), 0.0, 1.0)],
            ),
        ]
    }

    /// Pre-processor menu: the ten transforms plus `None`.
    pub fn preprocessor_items() -> Vec<ItemSpace> {
        vec![
            preprocessor(
                "SMOTE",
                vec![
                    ParamRange::int("k", int(5), 1, 20),
                    ParamRange::int("m", int(50), 50, 400),
                    ParamRange::int("r", int(2), 1, 6),
                ],
            ),
            preprocessor(
                "Normalizer",
                vec![
                    ParamRange::categorical("norm", "l2", &["l1", "l2", "max"]),
                    copy_flag(),
                ],
            ),
            preprocessor(
                "StandardScaler",
                vec![
                    copy_flag(),
                    ParamRange::boolean("with_mean", true),
                    ParamRange::boolean("with_std", true),
                ],
            ),
            preprocessor(
                "MinMaxScaler",
                vec![
                    copy_flag(),
                    ParamRange::real("min", real(0.0), -5.0, 0.0),
                    ParamRange::real("max", real(1.0), 1.0, 5.0),
                ],
            ),
            preprocessor("MaxAbsScaler", vec![copy_flag()]),
            preprocessor(
                "RobustScaler",
                vec![
                    ParamRange::boolean("with_centering", true),
                    ParamRange::boolean("with_scaling", true),
                    ParamRange::real("q_min", real(25.0), 10.0, 40.0),
                    ParamRange::real("q_max", real(75.0), 60.0, 90.0),
                    copy_flag(),
                ],
            ),
            preprocessor(
                "QuantileTransformer",
                vec![
                    ParamRange::int("n_quantiles", int(1000), 10, 2000),
                    ParamRange::categorical("output_distribution", "uniform", &["uniform", "normal"]),
                    ParamRange::boolean("ignore_implicit_zeros", false),
                    ParamRange::int("subsample", int(100_000), 100, 150_000),
                    copy_flag(),
                ],
            ),
            preprocessor(
                "PowerTransformer",
                vec![
                    ParamRange::categorical("method", "yeo-johnson", &["yeo-johnson", "box-cox"]),
                    ParamRange::boolean("standardize", true),
                    copy_flag(),
                ],
            ),
            preprocessor(
                "Binarizer",
                vec![ParamRange::real("threshold", real(0.0), 0.0, 10.0), copy_flag()],
            ),
            preprocessor(
                "PolynomialFeatures",
                vec![
                    ParamRange::int("degree", int(2), 2, 4),
                    ParamRange::boolean("interaction_only", false),
                    ParamRange::boolean("include_bias", true),
                    ParamRange::categorical("order", "C", &["C", "F"]),
                ],
            ),
            preprocessor("None", vec![]),
        ]
    }

    /// The full learner x pre-processor menu.
    pub fn default_menu() -> Self {
        let mut items = Self::learner_items();
        items.extend(Self::preprocessor_items());
        ParamSpace { items }
    }

    pub fn single(item: ItemSpace) -> Self {
        ParamSpace { items: vec![item] }
    }

    pub fn item(&self, id: &str) -> Option<&ItemSpace> {
        self.items.iter().find(|i| i.id == id)
    }

    pub fn learners(&self) -> impl Iterator<Item = &ItemSpace> {
        self.items.iter().filter(|i| i.kind == ItemKind::Learner)
    }

    pub fn preprocessors(&self) -> impl Iterator<Item = &ItemSpace> {
        self.items.iter().filter(|i| i.kind == ItemKind::Preprocessor)
    }

    /// Restricts the menu to the named items, keeping menu order.
    pub fn restrict(&self, ids: &[&str]) -> Result<Self> {
        for id in ids {
            if self.item(id).is_none() {
                return Err(Error::Config(format!("unknown menu item `{id}`")));
            }
        }
        Ok(ParamSpace {
            items: self
                .items
                .iter()
                .filter(|i| ids.contains(&i.id.as_str()))
                .cloned()
                .collect(),
        })
    }

    pub fn check_invariants(&self) -> Result<()> {
        self.items.iter().try_for_each(ItemSpace::check_invariants)
    }
}

/// Typed, defaulted access to a [`Params`] map.
pub(crate) struct ParamReader<'a> {
    item: &'a str,
    params: &'a Params,
}

impl<'a> ParamReader<'a> {
    pub fn new(item: &'a str, params: &'a Params) -> Self {
        ParamReader { item, params }
    }

    fn bad(&self, name: &str, want: &str) -> Error {
        Error::Param(format!("{}.{}: expected {}", self.item, name, want))
    }

    pub fn f64(&self, name: &str, default: f64) -> Result<f64> {
        match self.params.get(name) {
            None => Ok(default),
            Some(v) => v.as_f64().ok_or_else(|| self.bad(name, "a number")),
        }
    }

    pub fn usize(&self, name: &str, default: usize) -> Result<usize> {
        Ok(self.opt_usize(name)?.unwrap_or(default))
    }

    /// `None`/missing map to `None`.
    pub fn opt_usize(&self, name: &str) -> Result<Option<usize>> {
        match self.params.get(name) {
            None | Some(ParamValue::Null) => Ok(None),
            Some(v) => match v.as_f64() {
                Some(x) if x >= 0.0 && x.fract() == 0.0 => Ok(Some(x as usize)),
                _ => Err(self.bad(name, "a non-negative integer")),
            },
        }
    }

    pub fn bool(&self, name: &str, default: bool) -> Result<bool> {
        match self.params.get(name) {
            None => Ok(default),
            Some(ParamValue::Bool(b)) => Ok(*b),
            Some(_) => Err(self.bad(name, "a boolean")),
        }
    }

    pub fn text(&self, name: &str, default: &'a str) -> Result<&'a str> {
        match self.params.get(name) {
            None => Ok(default),
            Some(ParamValue::Text(s)) => Ok(s.as_str()),
            Some(_) => Err(self.bad(name, "a string")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_menu_is_well_formed() {
        let menu = ParamSpace::default_menu();
        menu.check_invariants().unwrap();
        assert_eq!(menu.learners().count(), 5);
        assert_eq!(menu.preprocessors().count(), 11);
        for item in &menu.items {
            item.validate(&item.defaults()).unwrap();
        }
    }

    #[test]
    fn sampled_values_stay_in_range() {
        let mut rng = crate::util::rng(5);
        for item in ParamSpace::default_menu().items {
            for _ in 0..50 {
                let p = item.sample(&mut rng);
                for range in &item.params {
                    assert!(range.contains(&p[&range.name]), "{} {:?}", item.id, p);
                }
            }
        }
    }

    #[test]
    fn validate_rejects_unknown_and_out_of_range() {
        let menu = ParamSpace::default_menu();
        let knn = menu.item("KNN").unwrap();
        let mut p = Params::new();
        p.insert("n_neighbors".into(), ParamValue::Int(11));
        assert!(knn.validate(&p).is_err());
        let mut p = Params::new();
        p.insert("gamma".into(), ParamValue::Real(1.0));
        assert!(knn.validate(&p).is_err());
    }

    #[test]
    fn untagged_serde_roundtrip() {
        let mut p = Params::new();
        p.insert("a".into(), ParamValue::Int(3));
        p.insert("b".into(), ParamValue::Real(0.25));
        p.insert("c".into(), ParamValue::Text("l1".into()));
        p.insert("d".into(), ParamValue::Null);
        p.insert("e".into(), ParamValue::Bool(false));
        let s = serde_json::to_string(&p).unwrap();
        let back: Params = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
