use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::{from_usize, lit, Real};
use crate::stats::{quantile_sorted, sorted_copy};

/// Evenly spaced support points `left, left + eta, ..., left + (k - 1) eta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorGrid<T> {
    nodes: Vec<T>,
    left: T,
    eta: T,
}

impl<T: Real> PriorGrid<T> {
    pub fn new(left: T, right: T, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(invalid(format!("grid needs at least 2 nodes, got {k}")));
        }
        if !left.is_finite() || !right.is_finite() || !(right > left) {
            return Err(invalid(format!("grid support [{left}, {right}] is degenerate")));
        }
        let eta = (right - left) / from_usize(k - 1);
        let mut nodes: Vec<T> = (0..k).map(|j| left + from_usize::<T>(j) * eta).collect();
        // pin the right end exactly
        nodes[k - 1] = right;
        Ok(Self { nodes, left, eta })
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn left(&self) -> T {
        self.left
    }

    pub fn right(&self) -> T {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn eta(&self) -> T {
        self.eta
    }

    pub fn k(&self) -> usize {
        self.nodes.len()
    }
}

/// Grid of `k` nodes spanning the empirical 1% and 99% quantiles of `xs`.
pub fn build_grid<T: Real>(xs: &[T], k: usize) -> Result<PriorGrid<T>> {
    if k < 2 {
        return Err(invalid(format!("grid needs at least 2 nodes, got {k}")));
    }
    let sorted = sorted_copy(xs)?;
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(invalid("grid support needs at least two distinct observations"));
    }
    let lo = quantile_sorted(&sorted, lit(0.01));
    let hi = quantile_sorted(&sorted, lit(0.99));
    if !(hi > lo) {
        return Err(invalid(
            "empirical 1% and 99% quantiles coincide; grid support is degenerate",
        ));
    }
    PriorGrid::new(lo, hi, k)
}
