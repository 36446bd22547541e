//! Synthetic Minority Over-sampling.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::{Dataset, Record, NSBR, SBR};
use crate::error::{Error, Result};
use crate::util::{self, minkowski};

/// Appends `floor(m / 100 * minority_count)` synthetic minority records.
///
/// Each synthetic record is `x + u * (x_nn - x)` with `x` a minority record,
/// `x_nn` drawn from its `k` nearest minority neighbours under the Minkowski
/// distance of power `r`, and `u ~ U[0, 1)`. Seeds cycle through a shuffled
/// minority order. Original records come first and are unchanged.
pub fn smote(ds: &Dataset, k: usize, m: f64, r: f64, seed: u64) -> Result<Dataset> {
    if m.is_nan() || m < 0.0 || r.is_nan() || r < 1.0 || k == 0 {
        return Err(Error::Oversampling(format!("invalid parameters k={k}, m={m}, r={r}")));
    }
    let minority_label = if ds.sbr_count() <= ds.nsbr_count() { SBR } else { NSBR };
    let minority: Vec<usize> = (0..ds.len())
        .filter(|&i| ds.labels()[i] == minority_label)
        .collect();
    if minority.len() < 2 {
        return Err(Error::Oversampling(format!(
            "need at least 2 minority records, found {}",
            minority.len()
        )));
    }
    let k = if k > minority.len() - 1 {
        log::warn!(
            "smote: k={} exceeds minority_count-1={}, clamping",
            k,
            minority.len() - 1
        );
        minority.len() - 1
    } else {
        k
    };
    let count = (m * minority.len() as f64 / 100.0).floor() as usize;
    if count == 0 {
        return Ok(ds.clone());
    }

    let rows: Vec<Vec<f64>> = minority.iter().map(|&i| ds.row(i).to_vec()).collect();
    let neighbours = |a: usize| -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = (0..rows.len())
            .filter(|&b| b != a)
            .map(|b| (minkowski(&rows[a], &rows[b], r), b))
            .collect();
        d.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        d.truncate(k);
        d.into_iter().map(|(_, b)| b).collect()
    };

    let mut rng = util::rng(seed);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(&mut rng);
    let mut cache: Vec<Option<Vec<usize>>> = vec![None; rows.len()];
    let mut synthetic = Vec::with_capacity(count);
    for s in 0..count {
        let a = order[s % order.len()];
        let nn = cache[a].get_or_insert_with(|| neighbours(a));
        let b = nn[rng.random_range(0..nn.len())];
        let u: f64 = rng.random();
        let features = rows[a]
            .iter()
            .zip(&rows[b])
            .map(|(x, y)| x + u * (y - x))
            .collect();
        synthetic.push(Record {
            id: format!("smote-{s}"),
            features,
            label: minority_label,
        });
    }
    ds.append(&synthetic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn doubles_minority_at_m_100() {
        let mut x = Array2::zeros((30, 2));
        for i in 0..30 {
            x[[i, 0]] = i as f64;
            x[[i, 1]] = (i * i) as f64;
        }
        let labels = (0..30).map(|i| u8::from(i < 10)).collect();
        let d = Dataset::from_matrix(x, labels).unwrap();
        let out = smote(&d, 5, 100.0, 2.0, 1).unwrap();
        assert_eq!(out.sbr_count(), 20);
        assert_eq!(out.nsbr_count(), 20);
        assert_eq!(out.subset(&(0..30).collect::<Vec<_>>()), d);
    }

    #[test]
    fn two_points_give_diagonal_segment() {
        let d = Dataset::from_matrix(
            array![[0.0, 0.0], [1.0, 1.0], [5.0, 0.0], [5.0, 1.0], [6.0, 0.0]],
            vec![1, 1, 0, 0, 0],
        )
        .unwrap();
        let out = smote(&d, 1, 400.0, 2.0, 3).unwrap();
        assert_eq!(out.len(), 5 + 8);
        for i in 5..out.len() {
            let r = out.row(i);
            assert_eq!(r[0], r[1]);
            assert!((0.0..=1.0).contains(&r[0]));
            assert_eq!(out.labels()[i], 1);
        }
    }

    #[test]
    fn floor_of_percent() {
        // 22 positives as in the Ambari training split; 50% of 22 -> 11
        let n = 66;
        let mut x = Array2::zeros((n, 1));
        for i in 0..n {
            x[[i, 0]] = i as f64;
        }
        let labels = (0..n).map(|i| u8::from(i % 3 == 0)).collect::<Vec<_>>();
        let d = Dataset::from_matrix(x, labels).unwrap();
        assert_eq!(d.sbr_count(), 22);
        let out = smote(&d, 5, 50.0, 2.0, 0).unwrap();
        assert_eq!(out.len() - n, 11);
    }

    #[test]
    fn single_minority_is_an_error() {
        let d = Dataset::from_matrix(array![[0.0], [1.0], [2.0]], vec![1, 0, 0]).unwrap();
        assert!(matches!(smote(&d, 1, 100.0, 2.0, 0), Err(Error::Oversampling(_))));
    }

    #[test]
    fn deterministic_for_seed() {
        let d = Dataset::from_matrix(
            array![[0.0, 1.0], [2.0, 2.0], [3.0, 1.0], [9.0, 9.0], [8.0, 8.0], [7.0, 9.0], [9.0, 7.0]],
            vec![1, 1, 1, 0, 0, 0, 0],
        )
        .unwrap();
        assert_eq!(smote(&d, 2, 200.0, 3.0, 11).unwrap(), smote(&d, 2, 200.0, 3.0, 11).unwrap());
    }
}
