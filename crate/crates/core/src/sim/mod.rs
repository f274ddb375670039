//! Seeded simulation designs and the replication runner comparing the
//! data-driven, oracle, Clfdr step-up and Benjamini-Hochberg procedures.

mod design;

pub use design::{generate, Dataset, DesignKind, SimDesign};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deconv::{fit_grouped, DeconvConfig};
use crate::error::{Error, Result};
use crate::model::{evaluate, pvalues, MetricsRecord};
use crate::selection::{
    calibrate_oracle, score_units, select_bh, select_clfdr_stepup, select_dd, select_oracle, Calibration,
    CalibrationConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Data-driven prioritized selection on the fitted prior.
    #[serde(rename = "DD")]
    Dd,
    /// Prioritized selection with the true prior and calibrated cutoffs.
    #[serde(rename = "OR")]
    Or,
    /// Clfdr step-up with the true prior.
    #[serde(rename = "Clfdr")]
    Clfdr,
    #[serde(rename = "BH")]
    Bh,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Dd, Method::Or, Method::Clfdr, Method::Bh];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Dd => "DD",
            Method::Or => "OR",
            Method::Clfdr => "Clfdr",
            Method::Bh => "BH",
        }
    }
}

/// Metrics of every method on one replication, in [`Method::ALL`] order.
pub fn run_rep(design: &SimDesign, rep: usize, calibration: &Calibration) -> Result<[MetricsRecord<f64>; 4]> {
    let (mu0, alpha) = (design.mu0, design.alpha);
    let data = generate(design, rep)?;
    let obs = &data.observations;

    let config = DeconvConfig { grid_size: design.grid_size, ..Default::default() };
    let fit = fit_grouped(obs, &design.grouping(), &config)?;
    let dd_units = score_units(obs, &fit.clfdr(obs, mu0), mu0, alpha, &design.transform)?;
    let dd = select_dd(&dd_units, alpha, mu0);

    let exact = data.oracle_clfdr(mu0);
    let or_units = score_units(obs, &exact, mu0, alpha, &design.transform)?;
    let or = select_oracle(&or_units, &calibration.thresholds, alpha, mu0);
    let clfdr = select_clfdr_stepup(&exact, alpha);
    let bh = select_bh(&pvalues(obs, mu0)?, alpha);

    let eval = |d: &crate::model::DecisionVector| evaluate(d, &data.truths, obs, mu0);
    Ok([eval(&dd.decisions)?, eval(&or.decisions)?, eval(&clfdr.decisions)?, eval(&bh.decisions)?])
}

/// Mean squared difference between fitted and exact Clfdr on one replication.
pub fn clfdr_mse(design: &SimDesign, rep: usize) -> Result<f64> {
    let data = generate(design, rep)?;
    let obs = &data.observations;
    let config = DeconvConfig { grid_size: design.grid_size, ..Default::default() };
    let fit = fit_grouped(obs, &design.grouping(), &config)?;
    let est = fit.clfdr(obs, design.mu0);
    let exact = data.oracle_clfdr(design.mu0);
    Ok(est.iter().zip(&exact).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / obs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricMeans {
    pub fdp: f64,
    pub etp: f64,
    pub etp_star: f64,
    pub n_selected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub mean: MetricMeans,
    /// Monte Carlo standard errors of the means.
    pub se: MetricMeans,
    /// Pooled false selections over pooled selections.
    pub mfdr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: usize,
    pub seed: u64,
    pub method: Method,
    pub metrics: MetricsRecord<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub design: SimDesign,
    pub calibration: Calibration,
    pub summaries: Vec<MethodSummary>,
    pub records: Vec<RepRecord>,
    /// Seed of each replication, in rep order.
    pub seeds: Vec<u64>,
}

/// One row of the long-format export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TidyRow {
    pub design: String,
    pub method: String,
    pub metric: String,
    pub rep: usize,
    pub value: f64,
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn summarize(method: Method, records: &[&MetricsRecord<f64>]) -> MethodSummary {
    let col = |f: &dyn Fn(&MetricsRecord<f64>) -> f64| mean_se(&records.iter().map(|r| f(r)).collect::<Vec<_>>());
    let fdp = col(&|r| r.fdp);
    let etp = col(&|r| r.etp as f64);
    let etp_star = col(&|r| r.etp_star);
    let n_sel = col(&|r| r.n_selected as f64);
    let pooled_false: usize = records.iter().map(|r| r.n_false).sum();
    let pooled_sel: usize = records.iter().map(|r| r.n_selected).sum();
    MethodSummary {
        method,
        mean: MetricMeans { fdp: fdp.0, etp: etp.0, etp_star: etp_star.0, n_selected: n_sel.0 },
        se: MetricMeans { fdp: fdp.1, etp: etp.1, etp_star: etp_star.1, n_selected: n_sel.1 },
        mfdr: pooled_false as f64 / pooled_sel.max(1) as f64,
    }
}

/// Calibrate the oracle once, then run every replication in parallel.
pub fn run_replications(design: &SimDesign) -> Result<ReplicationReport> {
    design.validate()?;
    let calibration = calibrate_oracle(
        &design.oracle_model()?,
        design.alpha,
        design.mu0,
        &CalibrationConfig { n_mc: design.n_mc, seed: design.calibration_seed(), transform: design.transform },
    )?;
    let per_rep: Vec<[MetricsRecord<f64>; 4]> = (0..design.reps)
        .into_par_iter()
        .map(|rep| run_rep(design, rep, &calibration).map_err(|e| Error::Replication { rep, source: Box::new(e) }))
        .collect::<Result<_>>()?;

    let mut records = Vec::with_capacity(design.reps * 4);
    for (rep, row) in per_rep.iter().enumerate() {
        for (method, metrics) in Method::ALL.iter().zip(row) {
            records.push(RepRecord { rep, seed: design.rep_seed(rep), method: *method, metrics: *metrics });
        }
    }
    let summaries = Method::ALL
        .iter()
        .enumerate()
        .map(|(k, &method)| summarize(method, &per_rep.iter().map(|row| &row[k]).collect::<Vec<_>>()))
        .collect();
    Ok(ReplicationReport {
        design: *design,
        calibration,
        summaries,
        records,
        seeds: (0..design.reps).map(|r| design.rep_seed(r)).collect(),
    })
}

impl ReplicationReport {
    pub fn summary(&self, method: Method) -> &MethodSummary {
        self.summaries.iter().find(|s| s.method == method).expect("every method is summarized")
    }

    pub fn tidy_rows(&self) -> Vec<TidyRow> {
        let name = self.design.name();
        self.records
            .iter()
            .flat_map(|r| {
                let m = &r.metrics;
                [
                    ("fdp", m.fdp),
                    ("etp", m.etp as f64),
                    ("etp_star", m.etp_star),
                    ("n_selected", m.n_selected as f64),
                    ("n_false", m.n_false as f64),
                ]
                .into_iter()
                .map(move |(metric, value)| TidyRow {
                    design: name.to_string(),
                    method: r.method.as_str().to_string(),
                    metric: metric.to_string(),
                    rep: r.rep,
                    value,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimDesign {
        SimDesign::uniform(3.0, 400).n_mc(50_000).seed(7)
    }

    #[test]
    fn single_rep_report_equals_record() {
        let r = run_replications(&small().reps(1)).unwrap();
        for s in &r.summaries {
            let rec = r.records.iter().find(|x| x.method == s.method).unwrap();
            assert_eq!(s.mean.fdp, rec.metrics.fdp);
            assert_eq!(s.mean.etp_star, rec.metrics.etp_star);
            assert_eq!(s.se.fdp, 0.0);
        }
    }

    #[test]
    fn deterministic_and_rep_isolated() {
        let d = small().reps(3);
        let a = run_replications(&d).unwrap();
        let b = run_replications(&d).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let alone = run_rep(&d, 2, &a.calibration).unwrap();
        let from_run: Vec<_> = a.records.iter().filter(|r| r.rep == 2).map(|r| r.metrics).collect();
        assert_eq!(alone.to_vec(), from_run);
        let mut seeds = a.seeds.clone();
        seeds.dedup();
        assert_eq!(seeds.len(), 3);
    }

    #[test]
    fn averages_match_records() {
        let r = run_replications(&small().reps(3)).unwrap();
        for s in &r.summaries {
            let vals: Vec<f64> = r.records.iter().filter(|x| x.method == s.method).map(|x| x.metrics.etp_star).collect();
            let mean = vals.iter().sum::<f64>() / 3.0;
            assert!((s.mean.etp_star - mean).abs() < 1e-9);
        }
        assert_eq!(r.tidy_rows().len(), 3 * 4 * 5);
    }

    #[test]
    fn failure_carries_rep_index() {
        // a one-node grid is rejected inside the replication
        let mut d = SimDesign::uniform(3.0, 50).n_mc(1000).reps(2);
        d.grid_size = 1;
        match run_replications(&d) {
            Err(Error::Replication { rep, .. }) => assert!(rep < 2),
            other => panic!("expected replication error, got {other:?}"),
        }
    }
}
