use std::collections::BTreeMap;

use super::correlation::CorrelationTensor;
use crate::grid::{index_cell, Cell};
use crate::scalar::Scalar;

/// Index of the first maximum of `values`, or `None` when no entry is positive.
pub fn argmax_positive<T: Scalar>(values: &[T]) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (i, &v) in values.iter().enumerate() {
        if v > T::zero() && best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// For every target location, the source location with the highest score.
///
/// Ties go to the first source in row-major order; all-zero slices produce no entry.
pub fn best_matches<T: Scalar>(s: &CorrelationTensor<T>) -> BTreeMap<Cell, Cell> {
    let w = s.width();
    (0..s.cells())
        .filter_map(|t| {
            let target = index_cell(w, t);
            argmax_positive(s.slice(target)).map(|src| (target, index_cell(w, src)))
        })
        .collect()
}

/// Copies the part label of each matched source location onto its target.
pub fn transfer_labels(matches: &BTreeMap<Cell, Cell>, source_labels: &BTreeMap<Cell, u32>) -> BTreeMap<Cell, u32> {
    matches
        .iter()
        .filter_map(|(target, source)| source_labels.get(source).map(|&label| (*target, label)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correspondence::{correlate, FeatureMap};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity_map(h: usize, w: usize) -> FeatureMap<f64> {
        let n = h * w;
        let data = (0..n).flat_map(|k| (0..n).map(move |i| if i == k { 1.0 } else { 0.0 })).collect();
        FeatureMap::new(h, w, n, data).unwrap()
    }

    #[test]
    fn identity_correlation_matches_itself() {
        let f = identity_map(3, 4);
        let m = best_matches(&correlate(&f, &f).unwrap());
        assert_eq!(m.len(), 12);
        assert!(m.iter().all(|(t, s)| t == s));
    }

    #[test]
    fn zero_tensor_has_no_matches() {
        let s = CorrelationTensor::from_raw(2, 2, vec![0.0; 16]);
        assert!(best_matches(&s).is_empty());
    }

    #[test]
    fn ties_go_to_first_source() {
        let mut data = vec![0.0; 16];
        // target (0,0): sources 1 and 3 tie
        data[1] = 0.5;
        data[3] = 0.5;
        let m = best_matches(&CorrelationTensor::from_raw(2, 2, data));
        assert_eq!(m.get(&(0, 0)), Some(&(0, 1)));
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn agrees_with_brute_force_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let data: Vec<f64> = (0..81).map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..1.0) }).collect();
            let s = CorrelationTensor::from_raw(3, 3, data.clone());
            let m = best_matches(&s);
            for t in 0..9 {
                let slice = &data[t * 9..(t + 1) * 9];
                let mut best = None;
                let mut best_v = 0.0;
                for (i, &v) in slice.iter().enumerate() {
                    if v > best_v {
                        best_v = v;
                        best = Some(i);
                    }
                }
                assert_eq!(m.get(&index_cell(3, t)).copied(), best.map(|i| index_cell(3, i)));
            }
        }
    }

    #[test]
    fn labels_copy_through_identity_and_skip_unmatched() {
        let f = identity_map(2, 2);
        let m = best_matches(&correlate(&f, &f).unwrap());
        let labels: BTreeMap<Cell, u32> = [((0, 0), 3), ((0, 1), 1), ((1, 1), 2)].into_iter().collect();
        assert_eq!(transfer_labels(&m, &labels), labels);

        let mut partial = m.clone();
        partial.remove(&(0, 1));
        let out = transfer_labels(&partial, &labels);
        assert!(!out.contains_key(&(0, 1)));
        assert!(!out.contains_key(&(1, 0)));
    }
}
