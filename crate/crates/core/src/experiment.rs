//! The experiment rig: filter the training data, tune with one of five
//! treatments, test once on the held-out split, and summarise over seeds.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{load_dataset, split_folds, ColumnSchema, Dataset};
use crate::error::{Error, Result};
use crate::filters::{apply_filter, FilterConfig, FilterKind};
use crate::learners::{LearnerKind, LearnerSpec};
use crate::metrics::{map_deciles, ApMode};
use crate::optimize::{
    de_optimize, default_np, evaluate_pipeline, final_fit_and_test, swift_optimize, DeConfig, Goal, OptimizerTrace,
    PipelineSpec, SwiftConfig,
};
use crate::params::{ItemKind, ParamSpace};
use crate::preprocess::{PreprocessorKind, PreprocessorSpec};
use crate::stats::{scott_knott, TreatmentSamples};
use crate::util::{derive_seed, median};

/// Seed of the Scott-Knott bootstrap; ranking must not depend on run seeds.
const RANKING_SEED: u64 = 0x5c077;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Treatment {
    FarsecBaseline,
    PreprocOnly,
    DePreproc,
    DeLearner,
    Swift,
}

impl Treatment {
    pub const ALL: [Treatment; 5] = [
        Treatment::FarsecBaseline,
        Treatment::PreprocOnly,
        Treatment::DePreproc,
        Treatment::DeLearner,
        Treatment::Swift,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Treatment::FarsecBaseline => "farsec-baseline",
            Treatment::PreprocOnly => "preproc-only",
            Treatment::DePreproc => "de-preproc",
            Treatment::DeLearner => "de-learner",
            Treatment::Swift => "swift",
        }
    }
}

impl fmt::Display for Treatment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Treatment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Treatment::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown treatment `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub project: String,
    pub train_path: PathBuf,
    pub test_path: PathBuf,
    pub filter: FilterKind,
    pub filter_config: FilterConfig,
    pub treatments: Vec<Treatment>,
    pub seeds: Vec<u64>,
    pub goal: Goal,
    pub folds: usize,
    /// `seed` is ignored; each run derives its own.
    pub swift: SwiftConfig,
    /// Overrides the per-item DE population sizes.
    pub np: Option<usize>,
    pub iters: usize,
    pub baseline_learner: LearnerKind,
    pub ap_mode: ApMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            project: "project".into(),
            train_path: PathBuf::new(),
            test_path: PathBuf::new(),
            filter: FilterKind::Train,
            filter_config: FilterConfig::default(),
            treatments: Treatment::ALL.to_vec(),
            seeds: (1..=10).collect(),
            goal: Goal::G,
            folds: 10,
            swift: SwiftConfig::default(),
            np: None,
            iters: 3,
            baseline_learner: LearnerKind::NB,
            ap_mode: ApMode::Standard,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("no seeds given".into()));
        }
        if self.treatments.is_empty() {
            return Err(Error::Config("no treatments given".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!("need at least 2 folds, got {}", self.folds)));
        }
        if self.iters == 0 {
            return Err(Error::Config("iters must be at least 1".into()));
        }
        if let Some(np) = self.np {
            DeConfig::new(np, self.iters, 0).validate()?;
        }
        self.swift.validate()
    }
}

/// What a treatment settled on for one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Tuned {
    pub spec: PipelineSpec,
    /// Cross-validated goal value of `spec`; absent for untuned treatments.
    pub cv_value: Option<f64>,
    pub evaluations: usize,
    pub failed_evaluations: usize,
}

fn learner_defaults(kind: LearnerKind) -> LearnerSpec {
    LearnerSpec::with_defaults(kind)
}

/// Runs the tuning part of `treatment` on an already filtered training set.
pub fn tune(treatment: Treatment, train: &Dataset, cfg: &ExperimentConfig, seed: u64) -> Result<Tuned> {
    let baseline = PipelineSpec::new(PreprocessorSpec::none(), learner_defaults(cfg.baseline_learner));
    if treatment == Treatment::FarsecBaseline {
        return Ok(Tuned {
            spec: baseline,
            cv_value: None,
            evaluations: 0,
            failed_evaluations: 0,
        });
    }
    let folds = split_folds(train, cfg.folds, derive_seed(seed, &[1]))?;
    let eval_seed = derive_seed(seed, &[2]);
    let goal = cfg.goal;
    let mut objective =
        |spec: &PipelineSpec| Ok(goal.oriented(evaluate_pipeline(spec, train, &folds, goal, eval_seed)?.value));
    let menu = ParamSpace::default_menu();

    let traces: Vec<OptimizerTrace> = match treatment {
        Treatment::FarsecBaseline => unreachable!(),
        Treatment::PreprocOnly => {
            let mut trace = OptimizerTrace::default();
            for kind in PreprocessorKind::ALL {
                let spec = PipelineSpec::new(PreprocessorSpec::with_defaults(kind), learner_defaults(cfg.baseline_learner));
                let (value, failed) = match objective(&spec) {
                    Ok(v) => (v, false),
                    Err(e) => {
                        log::debug!("{} failed: {e}", kind);
                        (0.0, true)
                    }
                };
                if trace.best().is_none_or(|b| value > b.value) {
                    trace.incumbent = Some(trace.evaluations.len());
                }
                trace.evaluations.push(crate::optimize::Evaluation {
                    spec,
                    value,
                    failed,
                    cached: false,
                });
            }
            vec![trace]
        }
        Treatment::DePreproc => {
            let item = menu.item("SMOTE").expect("SMOTE is on the menu");
            let np = cfg.np.unwrap_or_else(|| default_np(&item.id));
            vec![de_optimize(item, &baseline, &DeConfig::new(np, cfg.iters, derive_seed(seed, &[3])), &mut objective)?]
        }
        Treatment::DeLearner => menu
            .items
            .iter()
            .filter(|i| i.kind == ItemKind::Learner)
            .enumerate()
            .map(|(k, item)| {
                let np = cfg.np.unwrap_or_else(|| default_np(&item.id));
                let de = DeConfig::new(np, cfg.iters, derive_seed(seed, &[4, k as u64]));
                de_optimize(item, &baseline, &de, &mut objective)
            })
            .collect::<Result<_>>()?,
        Treatment::Swift => {
            let sc = SwiftConfig {
                seed: derive_seed(seed, &[5]),
                ..cfg.swift.clone()
            };
            vec![swift_optimize(&menu, &sc, &mut objective)?]
        }
    };

    let mut best: Option<&crate::optimize::Evaluation> = None;
    for t in &traces {
        if let Some(b) = t.best() {
            if best.is_none_or(|cur| b.value > cur.value) {
                best = Some(b);
            }
        }
    }
    let best = best.ok_or_else(|| Error::Training("tuner made no evaluations".into()))?;
    Ok(Tuned {
        spec: best.spec.clone(),
        cv_value: Some(goal.oriented(best.value)),
        evaluations: traces.iter().map(|t| t.evaluations.len()).sum(),
        failed_evaluations: traces.iter().flat_map(|t| &t.evaluations).filter(|e| e.failed).count(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub project: String,
    pub filter: String,
    pub treatment: String,
    pub seed: u64,
    pub pd: f64,
    pub pf: f64,
    pub prec: f64,
    pub f: f64,
    pub g: f64,
    pub ifa: usize,
}

impl ResultRow {
    pub fn metric(&self, name: &str) -> Option<f64> {
        Some(match name {
            "pd" => self.pd,
            "pf" => self.pf,
            "prec" => self.prec,
            "f" => self.f,
            "g" => self.g,
            "ifa" => self.ifa as f64,
            _ => return None,
        })
    }
}

/// Reported metrics, and whether smaller values are better.
pub const METRICS: [(&str, bool); 6] = [
    ("pd", false),
    ("pf", true),
    ("prec", false),
    ("f", false),
    ("g", false),
    ("ifa", true),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianRow {
    pub project: String,
    pub filter: String,
    pub treatment: String,
    pub pd: f64,
    pub pf: f64,
    pub prec: f64,
    pub f: f64,
    pub g: f64,
    pub ifa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub metric: String,
    pub project: String,
    pub filter: String,
    pub treatment: String,
    pub median: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecileRow {
    pub project: String,
    pub filter: String,
    pub treatment: String,
    pub seed: u64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
    pub d5: f64,
    pub d6: f64,
    pub d7: f64,
    pub d8: f64,
    pub d9: f64,
    pub d10: f64,
}

impl DecileRow {
    pub fn values(&self) -> [f64; 10] {
        [
            self.d1, self.d2, self.d3, self.d4, self.d5, self.d6, self.d7, self.d8, self.d9, self.d10,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagRow {
    pub project: String,
    pub filter: String,
    pub treatment: String,
    pub seed: u64,
    /// Metric reported as 0 because it was undefined, or `cv-failures:<n>`.
    pub flag: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRow {
    pub project: String,
    pub filter: String,
    pub treatment: String,
    pub seed: u64,
    pub cv_value: Option<f64>,
    pub evaluations: usize,
    pub pipeline: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeRow {
    pub treatment: String,
    pub minutes: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub rows: Vec<ResultRow>,
    pub deciles: Vec<DecileRow>,
    pub medians: Vec<MedianRow>,
    pub ranks: Vec<RankRow>,
    pub flags: Vec<FlagRow>,
    pub pipelines: Vec<PipelineRow>,
    pub runtime: Vec<RuntimeRow>,
}

impl Report {
    /// Rows of one treatment, in seed order.
    pub fn rows_of(&self, treatment: &str) -> Vec<&ResultRow> {
        self.rows.iter().filter(|r| r.treatment == treatment).collect()
    }

    pub fn median_of(&self, treatment: &str, metric: &str) -> Option<f64> {
        let v: Vec<f64> = self.rows_of(treatment).iter().filter_map(|r| r.metric(metric)).collect();
        (!v.is_empty()).then(|| median(&v))
    }
}

/// Medians per (project, filter, treatment) and Scott-Knott ranks per metric.
pub fn summarize(rows: &[ResultRow]) -> Result<(Vec<MedianRow>, Vec<RankRow>)> {
    let mut keys: Vec<(String, String)> = Vec::new();
    let mut treatments: Vec<String> = Vec::new();
    for r in rows {
        let k = (r.project.clone(), r.filter.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
        if !treatments.contains(&r.treatment) {
            treatments.push(r.treatment.clone());
        }
    }
    let mut medians = Vec::new();
    let mut ranks = Vec::new();
    for (project, filter) in &keys {
        let group = |t: &str| -> Vec<&ResultRow> {
            rows.iter()
                .filter(|r| &r.project == project && &r.filter == filter && r.treatment == t)
                .collect()
        };
        let present: Vec<&String> = treatments.iter().filter(|t| !group(t).is_empty()).collect();
        let med = |t: &str, m: &str| median(&group(t).iter().filter_map(|r| r.metric(m)).collect::<Vec<_>>());
        for t in &present {
            medians.push(MedianRow {
                project: project.clone(),
                filter: filter.clone(),
                treatment: t.to_string(),
                pd: med(t, "pd"),
                pf: med(t, "pf"),
                prec: med(t, "prec"),
                f: med(t, "f"),
                g: med(t, "g"),
                ifa: med(t, "ifa"),
            });
        }
        for (metric, lower_better) in METRICS {
            let samples: Vec<TreatmentSamples> = present
                .iter()
                .map(|t| {
                    let sign = if lower_better { -1.0 } else { 1.0 };
                    TreatmentSamples::new(
                        t.as_str(),
                        group(t).iter().filter_map(|r| r.metric(metric)).map(|v| sign * v).collect(),
                    )
                })
                .collect();
            let assignment = scott_knott(&samples, RANKING_SEED)?;
            for t in &present {
                ranks.push(RankRow {
                    metric: metric.into(),
                    project: project.clone(),
                    filter: filter.clone(),
                    treatment: t.to_string(),
                    median: med(t, metric),
                    rank: assignment.rank_of(t).expect("every treatment is ranked"),
                });
            }
        }
    }
    Ok((medians, ranks))
}

struct SeedOutcome {
    row: ResultRow,
    deciles: Option<DecileRow>,
    flags: Vec<FlagRow>,
    pipeline: PipelineRow,
    seconds: f64,
}

fn run_one(cfg: &ExperimentConfig, treatment: Treatment, seed: u64, train: &Dataset, test: &Dataset) -> Result<SeedOutcome> {
    let start = Instant::now();
    let tuned = tune(treatment, train, cfg, seed)?;
    let (result, ranked) = final_fit_and_test(&tuned.spec, train, test, derive_seed(seed, &[6]))?;
    let seconds = start.elapsed().as_secs_f64();
    let label = |flag: String| FlagRow {
        project: cfg.project.clone(),
        filter: cfg.filter.name().into(),
        treatment: treatment.name().into(),
        seed,
        flag,
    };
    let mut flags: Vec<FlagRow> = result.undefined().into_iter().map(|m| label(m.into())).collect();
    if tuned.failed_evaluations > 0 {
        flags.push(label(format!("cv-failures:{}", tuned.failed_evaluations)));
    }
    let deciles = if ranked.len() >= 10 {
        let d = map_deciles(&ranked, cfg.ap_mode)?;
        Some(DecileRow {
            project: cfg.project.clone(),
            filter: cfg.filter.name().into(),
            treatment: treatment.name().into(),
            seed,
            d1: d[0],
            d2: d[1],
            d3: d[2],
            d4: d[3],
            d5: d[4],
            d6: d[5],
            d7: d[6],
            d8: d[7],
            d9: d[8],
            d10: d[9],
        })
    } else {
        flags.push(label("map".into()));
        None
    };
    let zero = |v: Option<f64>| v.unwrap_or(0.0);
    Ok(SeedOutcome {
        row: ResultRow {
            project: cfg.project.clone(),
            filter: cfg.filter.name().into(),
            treatment: treatment.name().into(),
            seed,
            pd: zero(result.pd),
            pf: zero(result.pf),
            prec: zero(result.prec),
            f: zero(result.f),
            g: zero(result.g),
            ifa: result.ifa.count,
        },
        deciles,
        flags,
        pipeline: PipelineRow {
            project: cfg.project.clone(),
            filter: cfg.filter.name().into(),
            treatment: treatment.name().into(),
            seed,
            cv_value: tuned.cv_value,
            evaluations: tuned.evaluations,
            pipeline: tuned.spec.canonical(),
        },
        seconds,
    })
}

/// Runs every (treatment, seed) pair on in-memory data.
pub fn run_on(cfg: &ExperimentConfig, train: &Dataset, test: &Dataset) -> Result<Report> {
    cfg.validate()?;
    if train.n_features() != test.n_features() {
        return Err(Error::Shape {
            expected: train.n_features(),
            actual: test.n_features(),
        });
    }
    let filtered = apply_filter(cfg.filter, train, &cfg.filter_config)?;
    log::info!(
        "{} filter kept {} of {} training records",
        cfg.filter,
        filtered.len(),
        train.len()
    );
    let jobs: Vec<(Treatment, u64)> = cfg
        .treatments
        .iter()
        .flat_map(|&t| cfg.seeds.iter().map(move |&s| (t, s)))
        .collect();
    let outcomes: Vec<SeedOutcome> = jobs
        .par_iter()
        .map(|&(t, s)| {
            log::info!("running {t} seed {s}");
            run_one(cfg, t, s, &filtered, test).map_err(|e| e.context(format!("treatment {t}, seed {s}")))
        })
        .collect::<Result<_>>()?;

    let mut report = Report::default();
    for t in &cfg.treatments {
        let secs: f64 = outcomes
            .iter()
            .filter(|o| o.row.treatment == t.name())
            .map(|o| o.seconds)
            .sum();
        report.runtime.push(RuntimeRow {
            treatment: t.name().into(),
            minutes: secs / 60.0,
        });
    }
    for o in outcomes {
        report.rows.push(o.row);
        report.deciles.extend(o.deciles);
        report.flags.extend(o.flags);
        report.pipelines.push(o.pipeline);
    }
    let (medians, ranks) = summarize(&report.rows)?;
    report.medians = medians;
    report.ranks = ranks;
    Ok(report)
}

/// Loads the configured files and runs the experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let schema = ColumnSchema::default();
    let train = load_dataset(&cfg.train_path, &schema)?;
    let test = load_dataset(&cfg.test_path, &schema)?;
    run_on(cfg, &train, &test)
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(std::io::BufWriter::new(file));
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub const RESULTS_HEADER: [&str; 10] = ["project", "filter", "treatment", "seed", "pd", "pf", "prec", "f", "g", "ifa"];

/// Writes the report tables into `dir`, creating it if needed.
pub fn emit_report(report: &Report, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_rows(&dir.join("results.csv"), &report.rows, &RESULTS_HEADER)?;
    write_rows(
        &dir.join("medians.csv"),
        &report.medians,
        &["project", "filter", "treatment", "pd", "pf", "prec", "f", "g", "ifa"],
    )?;
    write_rows(
        &dir.join("ranks.csv"),
        &report.ranks,
        &["metric", "project", "filter", "treatment", "median", "rank"],
    )?;
    write_rows(
        &dir.join("map_deciles.csv"),
        &report.deciles,
        &[
            "project", "filter", "treatment", "seed", "d1", "d2", "d3", "d4", "d5", "d6", "d7", "d8", "d9", "d10",
        ],
    )?;
    write_rows(
        &dir.join("flags.csv"),
        &report.flags,
        &["project", "filter", "treatment", "seed", "flag"],
    )?;
    write_rows(
        &dir.join("pipelines.csv"),
        &report.pipelines,
        &["project", "filter", "treatment", "seed", "cv_value", "evaluations", "pipeline"],
    )?;
    write_rows(&dir.join("runtime.csv"), &report.runtime, &["treatment", "minutes"])
}

/// Reads a `results.csv` written by [`emit_report`].
pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != RESULTS_HEADER {
        return Err(Error::Schema(format!("{} is not a results table", path.display())));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
