//! Small descriptive statistics used by the grid and bandwidth rules.

use crate::error::{invalid, Result};
use crate::scalar::{from_usize, Real};

/// Empirical quantile of already sorted data.
///
/// Probability `p` maps to the 1-based order-statistic position `p (m - 1) + 1`
/// with linear interpolation between neighbours.
pub fn quantile_sorted<T: Real>(sorted: &[T], p: T) -> T {
    debug_assert!(!sorted.is_empty());
    let m = sorted.len();
    if m == 1 {
        return sorted[0];
    }
    let h = p * from_usize::<T>(m - 1);
    let lo = h.floor().to_usize().unwrap_or(0).min(m - 1);
    let hi = (lo + 1).min(m - 1);
    let frac = h - from_usize::<T>(lo);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Empirical quantile of unsorted data. NaNs are rejected.
pub fn quantile<T: Real>(values: &[T], p: T) -> Result<T> {
    Ok(quantile_sorted(&sorted_copy(values)?, p))
}

pub(crate) fn sorted_copy<T: Real>(values: &[T]) -> Result<Vec<T>> {
    if values.is_empty() {
        return Err(invalid("empty sample"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid("sample contains non-finite values"));
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    Ok(v)
}

pub fn mean<T: Real>(values: &[T]) -> T {
    values.iter().copied().sum::<T>() / from_usize(values.len())
}

/// Sample standard deviation with the `m - 1` denominator.
pub fn sample_sd<T: Real>(values: &[T]) -> T {
    let m = values.len();
    if m < 2 {
        return T::zero();
    }
    let mu = mean(values);
    let ss: T = values.iter().map(|&v| (v - mu) * (v - mu)).sum();
    (ss / from_usize(m - 1)).sqrt()
}

/// Interquartile range under the [`quantile_sorted`] convention.
pub fn iqr<T: Real>(values: &[T]) -> Result<T> {
    let s = sorted_copy(values)?;
    Ok(quantile_sorted(&s, crate::scalar::lit(0.75)) - quantile_sorted(&s, crate::scalar::lit(0.25)))
}
