//! r-values: the most lenient setting (smallest level, or largest cutoff) at
//! which a unit enters the selection, evaluated over a finite grid, and the
//! standardized ranks they induce.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};
use crate::model::{DecisionVector, Observation};
use crate::scalar::{from_usize, lit, Real};

pub const DEFAULT_GRID_POINTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Definition {
    /// Smallest level at which a unit is selected.
    VaryAlpha,
    /// Largest indifference cutoff at which a unit is selected, at fixed level.
    VaryMu0,
}

impl Definition {
    pub fn as_str(self) -> &'static str {
        match self {
            Definition::VaryAlpha => "alpha",
            Definition::VaryMu0 => "mu0",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RValueEntry<T> {
    pub id: String,
    pub x: T,
    pub sigma: T,
    /// `None` when the unit is selected nowhere on the grid.
    pub r: Option<T>,
    /// Rank among selected units divided by the number of units.
    pub r_prime: Option<T>,
    /// Another unit has exactly the same `r`.
    pub tied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RValueTable<T> {
    pub definition: Definition,
    /// Widest gap between neighbouring grid points.
    pub grid_resolution: T,
    pub grid_points: usize,
    pub entries: Vec<RValueEntry<T>>,
}

impl<T: Real> RValueTable<T> {
    pub fn r(&self) -> Vec<Option<T>> {
        self.entries.iter().map(|e| e.r).collect()
    }

    pub fn r_prime(&self) -> Vec<Option<T>> {
        self.entries.iter().map(|e| e.r_prime).collect()
    }
}

/// `n` points log-spaced on `[lo, hi]`, ascending.
pub fn log_grid<T: Real>(lo: T, hi: T, n: usize) -> Result<Vec<T>> {
    if n < 2 || !(lo > T::zero()) || !(hi > lo) {
        return Err(invalid(format!("cannot build a log grid of {n} points on [{lo}, {hi}]")));
    }
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / from_usize(n - 1);
    let mut g: Vec<T> = (0..n).map(|i| (a + from_usize::<T>(i) * step).exp()).collect();
    g[0] = lo;
    g[n - 1] = hi;
    Ok(g)
}

/// Default level grid: 200 log-spaced points on `[1e-4, 0.5]`.
pub fn default_alpha_grid<T: Real>(n: usize) -> Result<Vec<T>> {
    log_grid(lit(1e-4), lit(0.5), n)
}

/// Default cutoff grid: `n` points from just above `max x` down to just below
/// `min x`.
pub fn default_mu0_grid<T: Real>(xs: &[T], n: usize) -> Result<Vec<T>> {
    if xs.is_empty() || n < 2 {
        return Err(invalid("cutoff grid needs observations and at least two points"));
    }
    let lo = xs.iter().copied().fold(T::infinity(), T::min);
    let hi = xs.iter().copied().fold(T::neg_infinity(), T::max);
    let eps = (hi - lo) * lit(1e-6) + lit::<T>(1e-9) * (T::one() + hi.abs().max(lo.abs()));
    let (top, bottom) = (hi + eps, lo - eps);
    let step = (top - bottom) / from_usize(n - 1);
    let mut g: Vec<T> = (0..n).map(|i| top - from_usize::<T>(i) * step).collect();
    g[n - 1] = bottom;
    Ok(g)
}

fn resolution<T: Real>(grid: &[T]) -> T {
    grid.windows(2).map(|w| (w[1] - w[0]).abs()).fold(T::zero(), T::max)
}

/// Position of the first grid point at which each unit is selected.
fn first_selected<T, F>(m: usize, grid: &[T], procedure: F) -> Result<Vec<Option<usize>>>
where
    T: Real,
    F: Fn(T) -> DecisionVector + Sync,
{
    let runs: Vec<DecisionVector> = grid.par_iter().map(|&g| procedure(g)).collect();
    let mut first = vec![None; m];
    for (gi, d) in runs.iter().enumerate() {
        check_len("decisions", m, d.len())?;
        for (i, &on) in d.as_slice().iter().enumerate() {
            if on && first[i].is_none() {
                first[i] = Some(gi);
            }
        }
    }
    Ok(first)
}

/// Rank units with an `r`: better `r` first, ties by larger `x` then position.
fn build_table<T: Real>(
    observations: &[Observation<T>],
    r: Vec<Option<T>>,
    better: impl Fn(T, T) -> Ordering,
    definition: Definition,
    grid: &[T],
) -> RValueTable<T> {
    let m = observations.len();
    let mut order: Vec<usize> = (0..m).filter(|&i| r[i].is_some()).collect();
    order.sort_by(|&a, &b| {
        better(r[a].unwrap(), r[b].unwrap())
            .then(observations[b].x.partial_cmp(&observations[a].x).unwrap_or(Ordering::Equal))
            .then(a.cmp(&b))
    });
    let mut r_prime = vec![None; m];
    for (rank, &i) in order.iter().enumerate() {
        r_prime[i] = Some(from_usize::<T>(rank + 1) / from_usize(m));
    }
    let mut tied = vec![false; m];
    for w in order.windows(2) {
        if r[w[0]] == r[w[1]] {
            tied[w[0]] = true;
            tied[w[1]] = true;
        }
    }
    let entries = observations
        .iter()
        .enumerate()
        .map(|(i, o)| RValueEntry {
            id: o.id.clone(),
            x: o.x,
            sigma: o.sigma,
            r: r[i],
            r_prime: r_prime[i],
            tied: tied[i],
        })
        .collect();
    RValueTable { definition, grid_resolution: resolution(grid), grid_points: grid.len(), entries }
}

/// r-values over a level grid: each unit's smallest grid level at which
/// `procedure` selects it. Every grid point is evaluated, since the selection
/// need not grow with the level.
pub fn rvalue_vary_alpha<T, F>(observations: &[Observation<T>], procedure: F, alpha_grid: &[T]) -> Result<RValueTable<T>>
where
    T: Real,
    F: Fn(T) -> DecisionVector + Sync,
{
    if alpha_grid.is_empty() {
        return Err(invalid("level grid is empty"));
    }
    if alpha_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("level grid must be strictly ascending"));
    }
    if !(alpha_grid[0] > T::zero()) || !(alpha_grid[alpha_grid.len() - 1] < T::one()) {
        return Err(invalid("level grid must lie in (0, 1)"));
    }
    let first = first_selected(observations.len(), alpha_grid, procedure)?;
    let r = first.iter().map(|f| f.map(|g| alpha_grid[g])).collect();
    let ascending = |a: T, b: T| a.partial_cmp(&b).unwrap_or(Ordering::Equal);
    Ok(build_table(observations, r, ascending, Definition::VaryAlpha, alpha_grid))
}

/// r-values over a descending cutoff grid: each unit's largest grid cutoff at
/// which `procedure` selects it.
pub fn rvalue_vary_mu0<T, F>(observations: &[Observation<T>], procedure: F, mu0_grid: &[T]) -> Result<RValueTable<T>>
where
    T: Real,
    F: Fn(T) -> DecisionVector + Sync,
{
    if mu0_grid.is_empty() {
        return Err(invalid("cutoff grid is empty"));
    }
    if mu0_grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(invalid("cutoff grid must be strictly descending"));
    }
    let first = first_selected(observations.len(), mu0_grid, procedure)?;
    let r = first.iter().map(|f| f.map(|g| mu0_grid[g])).collect();
    let descending = |a: T, b: T| b.partial_cmp(&a).unwrap_or(Ordering::Equal);
    Ok(build_table(observations, r, descending, Definition::VaryMu0, mu0_grid))
}
