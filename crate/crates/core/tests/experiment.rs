use std::collections::BTreeMap;
use std::path::Path;

use dualtune::data::Dataset;
use dualtune::experiment::*;
use dualtune::metrics::g_measure;
use dualtune::optimize::SwiftConfig;
use dualtune::synth::{chronological_split, generate, SynthConfig};
use ndarray::Array2;

fn separable(n: usize, offset: usize) -> Dataset {
    let x = Array2::from_shape_fn((n, 3), |(i, j)| {
        let base = if (i + offset).is_multiple_of(5) { 8.0 } else { 0.0 };
        base + (((i + offset) * 7 + j * 3) % 10) as f64 * 0.1
    });
    let labels = (0..n).map(|i| u8::from((i + offset).is_multiple_of(5))).collect();
    Dataset::from_matrix(x, labels).unwrap()
}

fn small_cfg(treatments: Vec<Treatment>) -> ExperimentConfig {
    ExperimentConfig {
        treatments,
        seeds: vec![1, 2, 3],
        folds: 3,
        swift: SwiftConfig {
            n1: 4,
            n2: 4,
            ..Default::default()
        },
        np: Some(4),
        iters: 1,
        ..Default::default()
    }
}

fn synthetic_split(n: usize) -> (Dataset, Dataset) {
    let ds = generate(&SynthConfig {
        n_records: n,
        n_features: 8,
        positive_rate: 0.1,
        ..Default::default()
    })
    .unwrap();
    chronological_split(&ds, n / 2).unwrap()
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect()
}

#[test]
fn baseline_is_perfect_on_separable_data() {
    let report = run_on(&small_cfg(vec![Treatment::FarsecBaseline]), &separable(60, 0), &separable(40, 3)).unwrap();
    assert_eq!(report.rows.len(), 3);
    for r in &report.rows {
        assert_eq!((r.pd, r.pf), (1.0, 0.0), "seed {}", r.seed);
    }
}

#[test]
fn duplicated_treatment_shares_one_rank() {
    let (train, test) = synthetic_split(200);
    let report = run_on(&small_cfg(vec![Treatment::FarsecBaseline]), &train, &test).unwrap();
    let mut rows = report.rows.clone();
    let copy: Vec<ResultRow> = rows
        .iter()
        .map(|r| ResultRow {
            treatment: "copy".into(),
            ..r.clone()
        })
        .collect();
    rows.extend(copy);
    let (_, ranks) = summarize(&rows).unwrap();
    assert!(ranks.iter().all(|r| r.rank == 1));
}

#[test]
fn output_directory_is_reproducible() {
    let (train, test) = synthetic_split(160);
    let cfg = small_cfg(Treatment::ALL.to_vec());
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    emit_report(&run_on(&cfg, &train, &test).unwrap(), a.path()).unwrap();
    emit_report(&run_on(&cfg, &train, &test).unwrap(), b.path()).unwrap();
    let (mut fa, mut fb) = (read_dir(a.path()), read_dir(b.path()));
    // wall-clock minutes are the only intended difference
    assert!(fa.remove("runtime.csv").is_some() && fb.remove("runtime.csv").is_some());
    assert_eq!(fa.keys().collect::<Vec<_>>(), ["flags.csv", "map_deciles.csv", "medians.csv", "pipelines.csv", "ranks.csv", "results.csv"]);
    assert_eq!(fa, fb);
}

#[test]
fn rows_are_consistent_and_medians_reaggregate() {
    let (train, test) = synthetic_split(200);
    let cfg = small_cfg(vec![Treatment::FarsecBaseline, Treatment::Swift, Treatment::PreprocOnly]);
    let report = run_on(&cfg, &train, &test).unwrap();
    for r in &report.rows {
        assert!((r.g - g_measure(r.pd, r.pf)).abs() <= 1e-12);
    }

    let dir = tempfile::tempdir().unwrap();
    emit_report(&report, dir.path()).unwrap();
    assert_eq!(read_results(dir.path().join("results.csv")).unwrap(), report.rows);

    // medians from the written row file, with a separately written median
    let mut by_treatment: BTreeMap<String, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    let mut rdr = csv::Reader::from_path(dir.path().join("results.csv")).unwrap();
    let header = rdr.headers().unwrap().clone();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        for (name, field) in header.iter().zip(rec.iter()).skip(4) {
            by_treatment
                .entry(rec[2].to_string())
                .or_default()
                .entry(name.to_string())
                .or_default()
                .push(field.parse().unwrap());
        }
    }
    let median = |mut v: Vec<f64>| {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = v.len();
        if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 }
    };
    let mut rdr = csv::Reader::from_path(dir.path().join("medians.csv")).unwrap();
    let header = rdr.headers().unwrap().clone();
    let mut seen = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        for (name, field) in header.iter().zip(rec.iter()).skip(3) {
            let want = median(by_treatment[&rec[2]][name].clone());
            let got: f64 = field.parse().unwrap();
            assert!((got - want).abs() < 1e-12, "{} {name}: {got} vs {want}", &rec[2]);
        }
        seen += 1;
    }
    assert_eq!(seen, 3);

    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for r in &report.ranks {
        groups.entry(r.metric.as_str()).or_default().push(r.rank);
    }
    for (metric, mut ranks) in groups {
        ranks.sort_unstable();
        ranks.dedup();
        assert_eq!(ranks, (1..=ranks.len()).collect::<Vec<_>>(), "{metric}");
    }
}

#[test]
fn empty_seed_list_is_a_config_error() {
    let cfg = ExperimentConfig {
        seeds: vec![],
        ..Default::default()
    };
    let err = run_on(&cfg, &separable(20, 0), &separable(20, 1)).unwrap_err();
    assert!(err.is_config(), "{err}");
    assert!(run_experiment(&cfg).unwrap_err().is_config());
}

#[test]
fn missing_input_file_names_the_path() {
    let cfg = ExperimentConfig {
        train_path: "/nonexistent/train.csv".into(),
        test_path: "/nonexistent/test.csv".into(),
        ..Default::default()
    };
    let err = run_experiment(&cfg).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/train.csv"), "{err}");
}

fn fixture_report() -> Report {
    let row = |t: &str, seed: u64, pd: f64, pf: f64, ifa: usize| ResultRow {
        project: "demo".into(),
        filter: "train".into(),
        treatment: t.into(),
        seed,
        pd,
        pf,
        prec: 0.5,
        f: 2.0 * pd * 0.5 / (pd + 0.5),
        g: g_measure(pd, pf),
        ifa,
    };
    let rows = vec![
        row("farsec-baseline", 1, 0.25, 0.1, 3),
        row("farsec-baseline", 2, 0.5, 0.2, 1),
        row("farsec-baseline", 3, 0.25, 0.15, 2),
        row("swift", 1, 0.75, 0.1, 0),
        row("swift", 2, 1.0, 0.3, 0),
        row("swift", 3, 0.75, 0.2, 1),
    ];
    let (medians, ranks) = summarize(&rows).unwrap();
    let deciles = rows
        .iter()
        .map(|r| DecileRow {
            project: r.project.clone(),
            filter: r.filter.clone(),
            treatment: r.treatment.clone(),
            seed: r.seed,
            d1: 1.0,
            d2: 1.0,
            d3: 0.75,
            d4: 0.75,
            d5: 0.5,
            d6: 0.5,
            d7: 0.5,
            d8: 0.25,
            d9: 0.25,
            d10: r.pd,
        })
        .collect();
    Report {
        flags: vec![FlagRow {
            project: "demo".into(),
            filter: "train".into(),
            treatment: "swift".into(),
            seed: 2,
            flag: "cv-failures:1".into(),
        }],
        pipelines: rows
            .iter()
            .map(|r| PipelineRow {
                project: r.project.clone(),
                filter: r.filter.clone(),
                treatment: r.treatment.clone(),
                seed: r.seed,
                cv_value: (r.treatment == "swift").then_some(0.5),
                evaluations: if r.treatment == "swift" { 42 } else { 0 },
                pipeline: "{}".into(),
            })
            .collect(),
        runtime: vec![
            RuntimeRow {
                treatment: "farsec-baseline".into(),
                minutes: 0.0,
            },
            RuntimeRow {
                treatment: "swift".into(),
                minutes: 1.5,
            },
        ],
        rows,
        deciles,
        medians,
        ranks,
    }
}

#[test]
fn fixture_report_matches_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    emit_report(&fixture_report(), dir.path()).unwrap();
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    if std::env::var_os("DUALTUNE_BLESS").is_some() {
        emit_report(&fixture_report(), &golden).unwrap();
    }
    let written = read_dir(dir.path());
    assert_eq!(written.len(), 7);
    for (name, bytes) in written {
        let want = std::fs::read(golden.join(&name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(String::from_utf8(bytes).unwrap(), String::from_utf8(want).unwrap(), "{name}");
    }
}

#[test]
fn single_row_report_has_one_data_line() {
    let mut report = fixture_report();
    report.rows.truncate(1);
    let dir = tempfile::tempdir().unwrap();
    emit_report(&report, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
}
