use serde::{Deserialize, Serialize};
use std::ops::Range;

/// Distinct eigenvalues with their multiplicities and index ranges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniqueSpectrum {
    uniques: Vec<f64>,
    multiplicities: Vec<usize>,
    ranges: Vec<Range<usize>>,
}

impl UniqueSpectrum {
    pub fn uniques(&self) -> &[f64] {
        &self.uniques
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn len(&self) -> usize {
        self.uniques.len()
    }

    pub fn is_empty(&self) -> bool {
        self.uniques.is_empty()
    }

    pub fn total(&self) -> usize {
        self.multiplicities.iter().sum()
    }

    /// Group index for each eigenvalue position.
    pub fn group_of_each(&self) -> Vec<usize> {
        let mut out = vec![0; self.total()];
        for (g, r) in self.ranges.iter().enumerate() {
            for k in r.clone() {
                out[k] = g;
            }
        }
        out
    }

    /// Group whose representative is within `tol * max(1, λ)` of `lambda`.
    pub fn find(&self, lambda: f64, tol: f64) -> Option<usize> {
        let slack = tol.max(1e-12) * lambda.abs().max(1.0);
        let mut best: Option<(usize, f64)> = None;
        for (g, &u) in self.uniques.iter().enumerate() {
            let d = (u - lambda).abs();
            if d <= slack && best.is_none_or(|b| d < b.1) {
                best = Some((g, d));
            }
        }
        best.map(|b| b.0)
    }
}

/// Greedy clustering of an ascending list: a value joins the current group
/// when its gap to the previous value is at most `cluster_tol * max(1, λ)`.
/// Each group is represented by its mean.
pub fn group_spectrum(eigenvalues: &[f64], cluster_tol: f64) -> UniqueSpectrum {
    let mut uniques = Vec::new();
    let mut multiplicities = Vec::new();
    let mut ranges = Vec::new();
    let mut start = 0;
    for k in 1..=eigenvalues.len() {
        let split = k == eigenvalues.len() || {
            let (prev, cur) = (eigenvalues[k - 1], eigenvalues[k]);
            cur - prev > cluster_tol * cur.abs().max(1.0)
        };
        if split && k > start {
            let group = &eigenvalues[start..k];
            uniques.push(group.iter().sum::<f64>() / group.len() as f64);
            multiplicities.push(k - start);
            ranges.push(start..k);
            start = k;
        }
    }
    UniqueSpectrum { uniques, multiplicities, ranges }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn integer_spectrum() {
        let s = group_spectrum(&[0.0, 1.0, 1.0, 4.0, 4.0, 9.0, 9.0], 1e-9);
        assert_eq!(s.uniques(), &[0.0, 1.0, 4.0, 9.0]);
        assert_eq!(s.multiplicities(), &[1, 2, 2, 2]);
    }

    #[test]
    fn near_degenerate_pair_merges() {
        let s = group_spectrum(&[0.0, 0.9999999, 1.0000001], 1e-3);
        assert_eq!(s.multiplicities(), &[1, 2]);
        assert!((s.uniques()[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_input() {
        assert!(group_spectrum(&[], 1e-9).is_empty());
    }

    proptest! {
        #[test]
        fn grouping_partitions_indices(mut v in prop::collection::vec(0.0f64..50.0, 1..60), tol in 1e-9f64..1e-1) {
            v.sort_by(f64::total_cmp);
            let s = group_spectrum(&v, tol);
            prop_assert_eq!(s.total(), v.len());
            let mut next = 0;
            for (g, r) in s.ranges().iter().enumerate() {
                prop_assert_eq!(r.start, next);
                prop_assert!(r.end > r.start);
                prop_assert_eq!(r.len(), s.multiplicities()[g]);
                next = r.end;
                if g + 1 < s.len() {
                    let gap = v[r.end] - v[r.end - 1];
                    prop_assert!(gap > tol * v[r.end].max(1.0));
                }
            }
            prop_assert_eq!(next, v.len());
            for w in s.uniques().windows(2) {
                prop_assert!(w[0] < w[1]);
            }
        }
    }
}
