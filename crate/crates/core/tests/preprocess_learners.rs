mod common;

use dualtune::data::Dataset;
use dualtune::learners::{train, Forest, ForestParams, LearnerKind, LearnerSpec, MaxFeatures};
use dualtune::params::{ParamValue, Params};
use dualtune::preprocess::{fit, smote, PreprocessorKind, PreprocessorSpec};
use ndarray::{Array1, Array2, Axis};
use proptest::prelude::*;

fn spec(kind: PreprocessorKind, params: &[(&str, ParamValue)]) -> PreprocessorSpec {
    let mut s = PreprocessorSpec::with_defaults(kind);
    for (k, v) in params {
        s.params.insert(k.to_string(), v.clone());
    }
    s
}

fn column_stats(c: ndarray::ArrayView1<'_, f64>) -> (f64, f64) {
    let n = c.len() as f64;
    let m = c.sum() / n;
    (m, (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt())
}

fn is_constant(c: ndarray::ArrayView1<'_, f64>) -> bool {
    c.iter().all(|&v| v == c[0])
}

fn segment_residual(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let len2: f64 = ab.iter().map(|v| v * v).sum();
    let t = if len2 == 0.0 {
        0.0
    } else {
        (p.iter().zip(a).zip(&ab).map(|((p, a), d)| (p - a) * d).sum::<f64>() / len2).clamp(0.0, 1.0)
    };
    p.iter()
        .zip(a)
        .zip(&ab)
        .map(|((p, a), d)| (p - a - t * d).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Posterior of the positive class straight from the Gaussian density formula.
fn naive_bayes_oracle(x: &Array2<f64>, y: &[u8], var_smoothing: f64, q: &[f64]) -> f64 {
    let n = x.nrows();
    let max_var = x.axis_iter(Axis(1)).map(|c| column_stats(c).1.powi(2)).fold(0.0, f64::max);
    let eps = var_smoothing * max_var;
    let mut joint = [0.0; 2];
    for (c, slot) in joint.iter_mut().enumerate() {
        let rows: Vec<usize> = (0..n).filter(|&i| y[i] as usize == c).collect();
        let mut p = rows.len() as f64 / n as f64;
        for (j, &qj) in q.iter().enumerate() {
            let vals: Vec<f64> = rows.iter().map(|&i| x[[i, j]]).collect();
            let mu = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / vals.len() as f64 + eps;
            p *= (-(qj - mu).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
        }
        *slot = p;
    }
    joint[1] / (joint[0] + joint[1])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn standard_scaler_centres_and_scales(x in common::matrix(30, 4)) {
        let out = fit(&PreprocessorSpec::with_defaults(PreprocessorKind::StandardScaler), &x).unwrap().transform(&x).unwrap();
        for (j, c) in out.axis_iter(Axis(1)).enumerate() {
            if is_constant(x.column(j)) {
                continue;
            }
            let (m, s) = column_stats(c);
            prop_assert!(m.abs() < 1e-9 && (s - 1.0).abs() < 1e-9, "col {j}: mean {m} std {s}");
        }
    }

    #[test]
    fn min_max_stays_in_target(x in common::matrix(30, 4), lo in -5.0f64..0.0, hi in 1.0f64..5.0) {
        let s = spec(PreprocessorKind::MinMaxScaler, &[("min", ParamValue::Real(lo)), ("max", ParamValue::Real(hi))]);
        let out = fit(&s, &x).unwrap().transform(&x).unwrap();
        prop_assert!(out.iter().all(|&v| v >= lo - 1e-9 && v <= hi + 1e-9));
    }

    #[test]
    fn max_abs_bounded(x in common::matrix(30, 4)) {
        let out = fit(&PreprocessorSpec::with_defaults(PreprocessorKind::MaxAbsScaler), &x).unwrap().transform(&x).unwrap();
        prop_assert!(out.iter().all(|v| v.abs() <= 1.0 + 1e-12));
    }

    #[test]
    fn normalizer_unit_norm(x in common::matrix(30, 4), which in 0usize..3) {
        let norm = ["l1", "l2", "max"][which];
        let s = spec(PreprocessorKind::Normalizer, &[("norm", ParamValue::Text(norm.into()))]);
        let out = fit(&s, &x).unwrap().transform(&x).unwrap();
        for row in out.rows() {
            let size = match norm {
                "l1" => row.iter().map(|v| v.abs()).sum::<f64>(),
                "l2" => row.iter().map(|v| v * v).sum::<f64>().sqrt(),
                _ => row.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            };
            prop_assert!(size == 0.0 || (size - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn quantile_uniform_is_bounded_and_monotone(x in common::matrix(40, 3), nq in 10i64..200) {
        let s = spec(PreprocessorKind::QuantileTransformer, &[("n_quantiles", ParamValue::Int(nq))]);
        let out = fit(&s, &x).unwrap().transform(&x).unwrap();
        prop_assert!(out.iter().all(|&v| (0.0..=1.0).contains(&v)));
        for j in 0..x.ncols() {
            for a in 0..x.nrows() {
                for b in 0..x.nrows() {
                    if x[[a, j]] <= x[[b, j]] {
                        prop_assert!(out[[a, j]] <= out[[b, j]] + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn power_transform_standardizes(x in common::matrix(30, 3), box_cox in any::<bool>()) {
        let (x, method) = if box_cox {
            (x.mapv(|v| v.abs() + 0.5), "box-cox")
        } else {
            (x, "yeo-johnson")
        };
        let s = spec(PreprocessorKind::PowerTransformer, &[("method", ParamValue::Text(method.into()))]);
        let out = fit(&s, &x).unwrap().transform(&x).unwrap();
        for (j, c) in out.axis_iter(Axis(1)).enumerate() {
            if is_constant(x.column(j)) {
                continue;
            }
            let (m, sd) = column_stats(c);
            prop_assert!(m.abs() < 1e-6 && (sd - 1.0).abs() < 1e-6, "col {j}: mean {m} std {sd}");
        }
    }

    #[test]
    fn smote_points_lie_on_minority_segments(ds in common::dataset(30, 3), m in 50.0f64..400.0, k in 1usize..6, seed in any::<u64>()) {
        let minority_label = if ds.sbr_count() <= ds.nsbr_count() { 1 } else { 0 };
        let minority: Vec<Vec<f64>> = (0..ds.len())
            .filter(|&i| ds.labels()[i] == minority_label)
            .map(|i| ds.row(i).to_vec())
            .collect();
        prop_assume!(minority.len() >= 2);
        let out = smote(&ds, k, m, 2.0, seed).unwrap();
        prop_assert_eq!(&out.ids()[..ds.len()], ds.ids());
        prop_assert_eq!(out.subset(&(0..ds.len()).collect::<Vec<_>>()), ds.clone());
        for i in ds.len()..out.len() {
            prop_assert_eq!(out.labels()[i], minority_label);
            let p = out.row(i).to_vec();
            let best = minority
                .iter()
                .flat_map(|a| minority.iter().map(move |b| (a, b)))
                .map(|(a, b)| segment_residual(&p, a, b))
                .fold(f64::INFINITY, f64::min);
            prop_assert!(best < 1e-9, "residual {best}");
        }
    }

    #[test]
    fn naive_bayes_matches_density_formula(ds in common::dataset(20, 3), vs in 0.01f64..1.0, q in proptest::collection::vec(0.0f64..6.0, 3)) {
        let mut s = LearnerSpec::with_defaults(LearnerKind::NB);
        s.params.insert("var_smoothing".into(), ParamValue::Real(vs));
        let model = train(&s, &ds, 0).unwrap();
        let q = &q[..ds.n_features()];
        let probe = Array2::from_shape_vec((1, q.len()), q.to_vec()).unwrap();
        let got = model.predict_score(&probe).unwrap()[0];
        let want = naive_bayes_oracle(ds.features(), ds.labels(), vs, q);
        prop_assert!((got - want).abs() <= 1e-9, "{got} vs {want}");
    }

    #[test]
    fn labels_follow_scores(ds in common::dataset(30, 3), which in 0usize..5, seed in any::<u64>(), probe in common::matrix(10, 3)) {
        let kind = LearnerKind::ALL[which];
        let model = train(&LearnerSpec::with_defaults(kind), &ds, seed).unwrap();
        let d = ds.n_features();
        let probe = probe.slice(ndarray::s![.., ..d.min(probe.ncols())]).to_owned();
        prop_assume!(probe.ncols() == d);
        let scores = model.predict_score(&probe).unwrap();
        let labels = model.predict(&probe).unwrap();
        for (s, l) in scores.iter().zip(&labels) {
            prop_assert!((0.0..=1.0).contains(s));
            prop_assert_eq!(*l, u8::from(*s > 0.5));
        }
    }
}

fn probe_matrix(d: usize) -> Array2<f64> {
    Array2::from_shape_fn((25, d), |(i, j)| ((i * 7 + j * 3) % 6) as f64)
}

#[test]
fn training_is_deterministic_per_seed() {
    let ds = dualtune::synth::generate(&dualtune::synth::SynthConfig {
        n_records: 200,
        n_features: 6,
        positive_rate: 0.2,
        ..Default::default()
    })
    .unwrap();
    for kind in LearnerKind::ALL {
        let s = LearnerSpec::with_defaults(kind);
        let a = train(&s, &ds, 17).unwrap().predict_score(&probe_matrix(6)).unwrap();
        let b = train(&s, &ds, 17).unwrap().predict_score(&probe_matrix(6)).unwrap();
        assert_eq!(a, b, "{kind}");
    }
}

#[test]
fn forest_learns_xor() {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..10 {
        for j in 0..20 {
            // 200 grid points, kept 0.1 away from the class boundaries
            let x = 0.1 + 0.8 * i as f64 / 9.0 + if i >= 5 { 1.0 } else { 0.0 };
            let y = 0.1 + 1.8 * j as f64 / 19.0 + if j >= 10 { 0.1 } else { -0.1 };
            rows.extend([x, y]);
            labels.push(u8::from((x > 1.0) != (y > 1.0)));
        }
    }
    let ds = Dataset::from_matrix(Array2::from_shape_vec((200, 2), rows).unwrap(), labels).unwrap();
    let mut s = LearnerSpec::with_defaults(LearnerKind::RF);
    s.params.insert("n_estimators".into(), ParamValue::Int(10));
    s.params.insert("max_depth".into(), ParamValue::Int(10));
    let model = train(&s, &ds, 5).unwrap();
    let pred = model.predict(ds.features()).unwrap();
    let acc = pred.iter().zip(ds.labels()).filter(|(a, b)| a == b).count() as f64 / 200.0;
    assert!(acc >= 0.95, "training accuracy {acc}");
}

fn entropy(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    [p, 1.0 - p].iter().filter(|&&q| q > 0.0).map(|q| -q * q.log2()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stump_maximizes_information_gain(ds in common::dataset(50, 4)) {
        let p = ForestParams {
            n_estimators: 1,
            max_depth: Some(1),
            max_features: MaxFeatures::Fraction(1.0),
            bootstrap: false,
            ..Default::default()
        };
        let y: Array1<f64> = ds.labels().iter().map(|&l| f64::from(l)).collect();
        let forest = Forest::train(&p, ds.features(), &y, 1).unwrap();
        let x = ds.features();
        let n = ds.len();
        let pos = ds.sbr_count();
        let gain_of = |f: usize, t: f64| {
            let left: Vec<usize> = (0..n).filter(|&i| x[[i, f]] <= t).collect();
            let lp = left.iter().filter(|&&i| ds.labels()[i] == 1).count();
            let nl = left.len();
            entropy(pos, n) - (nl as f64 * entropy(lp, nl) + (n - nl) as f64 * entropy(pos - lp, n - nl)) / n as f64
        };
        let mut best = 0.0f64;
        for f in 0..x.ncols() {
            let mut vals: Vec<f64> = x.column(f).to_vec();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                best = best.max(gain_of(f, (w[0] + w[1]) / 2.0));
            }
        }
        match forest.trees()[0].root_split() {
            Some((f, t)) => prop_assert!((gain_of(f, t) - best).abs() < 1e-9, "chosen {} best {best}", gain_of(f, t)),
            None => prop_assert!(best <= 1e-12),
        }
    }
}

#[test]
fn one_nearest_neighbour_memorises() {
    let x = Array2::from_shape_fn((30, 2), |(i, j)| (i * (j + 2)) as f64);
    let labels: Vec<u8> = (0..30).map(|i| u8::from(i % 3 == 0)).collect();
    let ds = Dataset::from_matrix(x, labels.clone()).unwrap();
    let mut s = LearnerSpec::with_defaults(LearnerKind::KNN);
    s.params = Params::from([("n_neighbors".to_string(), ParamValue::Int(1))]);
    let model = train(&s, &ds, 0).unwrap();
    assert_eq!(model.predict(ds.features()).unwrap(), labels);
}
