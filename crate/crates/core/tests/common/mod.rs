//! Independent enumeration oracles shared by the integration tests.

#![allow(dead_code)]

use std::cmp::Ordering;

pub fn ratio(x: f64, c: f64, mu0: f64, alpha: f64) -> f64 {
    let num = x - mu0;
    let den = c - alpha;
    if den == 0.0 {
        if num > 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    } else {
        num / den
    }
}

/// Group label 0 to 3 from the signs of `x - mu0` and `clfdr - alpha`.
pub fn group_of(x: f64, c: f64, mu0: f64, alpha: f64) -> u8 {
    match (x > mu0, c <= alpha) {
        (true, true) => 0,
        (true, false) => 1,
        (false, true) => 2,
        (false, false) => 3,
    }
}

/// Units of group `g` in priority order: ratio descending in group 1,
/// ascending in group 2, then larger `x`, then position.
pub fn priority_order(xs: &[f64], cs: &[f64], mu0: f64, alpha: f64, g: u8) -> Vec<usize> {
    let mut v: Vec<usize> = (0..xs.len()).filter(|&i| group_of(xs[i], cs[i], mu0, alpha) == g).collect();
    v.sort_by(|&a, &b| {
        let (ta, tb) = (ratio(xs[a], cs[a], mu0, alpha), ratio(xs[b], cs[b], mu0, alpha));
        let by_t = if g == 1 { tb.partial_cmp(&ta) } else { ta.partial_cmp(&tb) };
        by_t.unwrap_or(Ordering::Equal).then(xs[b].partial_cmp(&xs[a]).unwrap()).then(a.cmp(&b))
    });
    v
}

/// Largest realized `sum (x - mu0)` over subsets with every group 0 unit, no
/// group 3 unit, prefix structure inside groups 1 and 2 and nonpositive
/// `sum (clfdr - alpha)`, found by enumerating all subsets.
pub fn exhaustive_best(xs: &[f64], cs: &[f64], mu0: f64, alpha: f64) -> f64 {
    let m = xs.len();
    let group = |i: usize| group_of(xs[i], cs[i], mu0, alpha);
    let rank = |g: u8| priority_order(xs, cs, mu0, alpha, g);
    let (g1, g2) = (rank(1), rank(2));
    let is_prefix = |order: &[usize], mask: u32| {
        let mut seen_gap = false;
        for &i in order {
            let on = mask >> i & 1 == 1;
            if on && seen_gap {
                return false;
            }
            seen_gap |= !on;
        }
        true
    };
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << m) {
        let ok_groups = (0..m).all(|i| match group(i) {
            0 => mask >> i & 1 == 1,
            3 => mask >> i & 1 == 0,
            _ => true,
        });
        if !ok_groups || !is_prefix(&g1, mask) || !is_prefix(&g2, mask) {
            continue;
        }
        let sel: Vec<usize> = (0..m).filter(|&i| mask >> i & 1 == 1).collect();
        if sel.iter().map(|&i| cs[i] - alpha).sum::<f64>() > 0.0 {
            continue;
        }
        best = best.max(sel.iter().map(|&i| xs[i] - mu0).sum::<f64>());
    }
    best
}
