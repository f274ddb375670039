//! Nonparametric estimation of the effect-size prior by density matching, and
//! the conditional local fdr it implies.

mod grid;
mod kernel;
mod prior;
mod solver;

pub use grid::{build_grid, PriorGrid};
pub use kernel::{
    kernel_marginal, kernel_marginals, pipeline_bandwidths, silverman_bandwidth,
    silverman_bandwidths, BandwidthPair,
};
pub use prior::{
    oracle_clfdr, Component, OracleModel, SigmaLaw, SigmaStratum, TruePrior, WeightedComponent,
};
pub use solver::{clfdr_from_fit, fit_weights, project_simplex, FittedPrior, GridWeights, SolverOptions};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::Observation;
use crate::scalar::Real;

pub const DEFAULT_GRID_SIZE: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeconvConfig {
    pub grid_size: usize,
    pub solver: SolverOptions,
}

impl Default for DeconvConfig {
    fn default() -> Self {
        Self { grid_size: DEFAULT_GRID_SIZE, solver: SolverOptions::default() }
    }
}

/// Grid, bandwidths, kernel marginals and weights for one batch of observations.
pub fn fit_prior<T: Real>(observations: &[Observation<T>], config: &DeconvConfig) -> Result<FittedPrior<T>> {
    if observations.len() < 2 {
        return Err(invalid("need at least two observations to fit a prior"));
    }
    let xs: Vec<T> = observations.iter().map(|o| o.x).collect();
    let sigmas: Vec<T> = observations.iter().map(|o| o.sigma).collect();
    let grid = build_grid(&xs, config.grid_size)?;
    let h = pipeline_bandwidths(&xs, &sigmas)?;
    let marginals = kernel_marginals(observations, &h);
    let mut fit = fit_weights(&grid, observations, &marginals, &config.solver)?;
    fit.bandwidths = Some(h);
    Ok(fit)
}

/// How units are partitioned before fitting, so that effects and noise levels
/// may be treated as independent within each part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SigmaGrouping<T> {
    Pooled,
    /// One part per distinct sigma value.
    DistinctValues,
    /// `sigma <= at` versus `sigma > at`.
    Split { at: T },
}

/// Per-group fits and each unit's group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedFit<T> {
    pub labels: Vec<usize>,
    pub fits: Vec<FittedPrior<T>>,
}

impl<T: Real> GroupedFit<T> {
    /// Clfdr of every unit under its own group's fit.
    pub fn clfdr(&self, observations: &[Observation<T>], mu0: T) -> Vec<T> {
        observations
            .par_iter()
            .zip(self.labels.par_iter())
            .map(|(o, &g)| clfdr_from_fit(&self.fits[g], o, mu0))
            .collect()
    }
}

pub fn group_labels<T: Real>(observations: &[Observation<T>], grouping: &SigmaGrouping<T>) -> Vec<usize> {
    match *grouping {
        SigmaGrouping::Pooled => vec![0; observations.len()],
        SigmaGrouping::Split { at } => {
            let raw: Vec<usize> = observations.iter().map(|o| usize::from(o.sigma > at)).collect();
            compact(&raw)
        }
        SigmaGrouping::DistinctValues => {
            let mut values: Vec<T> = observations.iter().map(|o| o.sigma).collect();
            values.sort_by(|a, b| a.partial_cmp(b).expect("finite sigma"));
            values.dedup();
            observations
                .iter()
                .map(|o| values.partition_point(|&v| v < o.sigma))
                .collect()
        }
    }
}

fn compact(raw: &[usize]) -> Vec<usize> {
    let mut seen: Vec<usize> = raw.to_vec();
    seen.sort_unstable();
    seen.dedup();
    raw.iter().map(|r| seen.binary_search(r).expect("present")).collect()
}

pub fn fit_grouped<T: Real>(
    observations: &[Observation<T>],
    grouping: &SigmaGrouping<T>,
    config: &DeconvConfig,
) -> Result<GroupedFit<T>> {
    let labels = group_labels(observations, grouping);
    let n_groups = labels.iter().copied().max().map_or(0, |g| g + 1);
    let mut fits = Vec::with_capacity(n_groups);
    for g in 0..n_groups {
        let members: Vec<Observation<T>> = observations
            .iter()
            .zip(&labels)
            .filter(|(_, &l)| l == g)
            .map(|(o, _)| o.clone())
            .collect();
        let fit = fit_prior(&members, config)
            .map_err(|e| invalid(format!("sigma group {g} ({} units): {e}", members.len())))?;
        fits.push(fit);
    }
    Ok(GroupedFit { labels, fits })
}

pub const PRIOR_SCHEMA_VERSION: u32 = 1;

/// Portable form of a [`FittedPrior`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorDocument {
    pub schema_version: u32,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub bandwidths: Option<BandwidthPair<f64>>,
}

impl FittedPrior<f64> {
    pub fn to_document(&self) -> PriorDocument {
        PriorDocument {
            schema_version: PRIOR_SCHEMA_VERSION,
            nodes: self.grid.nodes().to_vec(),
            weights: self.weights.as_slice().to_vec(),
            objective: self.objective,
            iterations: self.iterations,
            kkt_residual: self.kkt_residual,
            bandwidths: self.bandwidths,
        }
    }

    pub fn from_document(doc: &PriorDocument) -> Result<Self> {
        if doc.schema_version != PRIOR_SCHEMA_VERSION {
            return Err(invalid(format!("unsupported prior schema version {}", doc.schema_version)));
        }
        let k = doc.nodes.len();
        if k < 2 {
            return Err(invalid("prior document needs at least two nodes"));
        }
        crate::error::check_len("weights", k, doc.weights.len())?;
        let grid = PriorGrid::new(doc.nodes[0], doc.nodes[k - 1], k)?;
        for (a, b) in grid.nodes().iter().zip(&doc.nodes) {
            if (a - b).abs() > 1e-9 * (1.0 + b.abs()) {
                return Err(invalid("prior document nodes are not evenly spaced"));
            }
        }
        Ok(Self {
            grid,
            weights: GridWeights::new(doc.weights.clone())?,
            objective: doc.objective,
            iterations: doc.iterations,
            kkt_residual: doc.kkt_residual,
            bandwidths: doc.bandwidths,
            history: Vec::new(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("plain data serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: PriorDocument =
            serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("prior document: {e}")))?;
        Self::from_document(&doc)
    }
}
