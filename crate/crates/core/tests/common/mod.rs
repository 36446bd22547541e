#![allow(dead_code)]

use dualtune::data::Dataset;
use ndarray::Array2;
use proptest::prelude::*;

/// Term-count datasets with both classes present.
pub fn dataset(max_rows: usize, max_features: usize) -> impl Strategy<Value = Dataset> {
    (4..=max_rows, 1..=max_features).prop_flat_map(|(n, d)| {
        (
            proptest::collection::vec(0u8..6, n * d),
            proptest::collection::vec(0u8..=1, n),
        )
            .prop_map(move |(cells, mut labels)| {
                labels[0] = 1;
                labels[1] = 0;
                let x = Array2::from_shape_vec((n, d), cells.into_iter().map(f64::from).collect()).unwrap();
                Dataset::from_matrix(x, labels).unwrap()
            })
    })
}

/// Real-valued matrices.
pub fn matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = Array2<f64>> {
    (2..=max_rows, 1..=max_cols).prop_flat_map(|(n, d)| {
        proptest::collection::vec(-50.0f64..50.0, n * d)
            .prop_map(move |v| Array2::from_shape_vec((n, d), v).unwrap())
    })
}
