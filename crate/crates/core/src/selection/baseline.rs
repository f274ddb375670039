use std::cmp::Ordering;

use super::{SelectionResult, StepKind, TraceAction, TraceStep};
use crate::model::DecisionVector;
use crate::scalar::{from_usize, Real};

fn ascending<T: Real>(values: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

fn threshold_result<T: Real>(values: &[T], order: &[usize], cutoff: Option<T>, capacity: Option<T>) -> SelectionResult<T> {
    let mut sel = vec![false; values.len()];
    let mut trace = Vec::new();
    if let Some(c) = cutoff {
        for &i in order.iter().take_while(|&&i| values[i] <= c) {
            sel[i] = true;
            trace.push(TraceStep {
                kind: StepKind::Threshold,
                action: TraceAction::Add,
                unit: Some(i),
                etp_star: None,
                capacity: None,
            });
        }
    }
    SelectionResult { decisions: DecisionVector::new(sel), etp_star: None, capacity, trace }
}

/// Largest `j` with `sum of the j smallest values <= j * level`.
pub fn stepup_count<T: Real>(sorted: &[T], level: T) -> usize {
    let mut sum = T::zero();
    let mut k = 0;
    for (j, &v) in sorted.iter().enumerate() {
        sum += v;
        if sum <= from_usize::<T>(j + 1) * level {
            k = j + 1;
        }
    }
    k
}

/// Select the `k` smallest Clfdr values, `k` being the largest count whose
/// running mean stays within `alpha`; ties with the `k`-th value come along.
pub fn select_clfdr_stepup<T: Real>(clfdrs: &[T], alpha: T) -> SelectionResult<T> {
    let order = ascending(clfdrs);
    let sorted: Vec<T> = order.iter().map(|&i| clfdrs[i]).collect();
    let k = stepup_count(&sorted, alpha);
    let cutoff = (k > 0).then(|| sorted[k - 1]);
    let mut r = threshold_result(clfdrs, &order, cutoff, None);
    let spent: T = clfdrs
        .iter()
        .zip(r.decisions.as_slice())
        .filter(|(_, &d)| d)
        .map(|(&c, _)| c - alpha)
        .sum();
    r.capacity = Some(-spent);
    r
}

/// Benjamini-Hochberg step-up at level `alpha`.
pub fn select_bh<T: Real>(pvalues: &[T], alpha: T) -> SelectionResult<T> {
    let m = from_usize::<T>(pvalues.len());
    let order = ascending(pvalues);
    let j = order
        .iter()
        .enumerate()
        .filter(|(i, &idx)| pvalues[idx] * m <= from_usize::<T>(i + 1) * alpha)
        .map(|(i, _)| i + 1)
        .last()
        .unwrap_or(0);
    let cutoff = (j > 0).then(|| pvalues[order[j - 1]]);
    threshold_result(pvalues, &order, cutoff, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn stepup_examples() {
        assert_eq!(select_clfdr_stepup(&[0.01, 0.05, 0.2, 0.5], 0.1).n_selected(), 3);
        assert_eq!(select_clfdr_stepup(&[0.2, 0.3], 0.1).n_selected(), 0);
        assert_eq!(select_clfdr_stepup(&[0.0; 5], 0.1).n_selected(), 5);
        // order of the input does not matter
        let r = select_clfdr_stepup(&[0.5, 0.2, 0.01, 0.05], 0.1);
        assert_eq!(r.decisions.as_slice(), &[false, true, true, true]);
    }

    #[test]
    fn stepup_includes_ties_at_cutoff() {
        let r = select_clfdr_stepup(&[0.0, 0.2, 0.2], 0.1);
        assert_eq!(r.n_selected(), 3);
    }

    #[test]
    fn bh_examples() {
        assert_eq!(select_bh(&[0.001, 0.2, 0.9], 0.1).decisions.as_slice(), &[true, false, false]);
        assert_eq!(select_bh(&[1.0, 1.0], 0.1).n_selected(), 0);
        assert_eq!(select_bh(&[0.04, 0.06], 0.1).n_selected(), 2);
        assert_eq!(select_bh::<f64>(&[], 0.1).n_selected(), 0);
    }

    proptest! {
        #[test]
        fn permutation_equivariant(v in prop::collection::vec(0.0..1.0f64, 1..30), rot in 0usize..30) {
            let r = rot % v.len();
            let mut w = v.clone();
            w.rotate_left(r);
            for (a, b) in [
                (select_bh(&v, 0.1), select_bh(&w, 0.1)),
                (select_clfdr_stepup(&v, 0.1), select_clfdr_stepup(&w, 0.1)),
            ] {
                let mut back = b.decisions.into_inner();
                back.rotate_right(r);
                prop_assert_eq!(a.decisions.into_inner(), back);
            }
        }

        #[test]
        fn raising_alpha_never_shrinks(v in prop::collection::vec(0.0..1.0f64, 1..30), a in 0.01..0.5f64, d in 0.0..0.4f64) {
            for (lo, hi) in [
                (select_bh(&v, a), select_bh(&v, a + d)),
                (select_clfdr_stepup(&v, a), select_clfdr_stepup(&v, a + d)),
            ] {
                for (x, y) in lo.decisions.as_slice().iter().zip(hi.decisions.as_slice()) {
                    prop_assert!(!x || *y);
                }
            }
        }
    }
}
