//! CSV ingestion: direct `id,x,sigma` records or two-sample rate records
//! `id,Y,Yprime,n,nprime` turned into a difference and its standard error.

use std::path::Path;

use prisel::stats::quantile;
use prisel::Observation;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum IngestRecord {
    Direct { id: String, x: f64, sigma: f64 },
    Rates { id: String, y: f64, y_prime: f64, n: u64, n_prime: u64 },
}

impl IngestRecord {
    pub fn id(&self) -> &str {
        match self {
            IngestRecord::Direct { id, .. } | IngestRecord::Rates { id, .. } => id,
        }
    }

    /// `(x, sigma)`; rate records give `x = Y - Y'`.
    pub fn effect(&self) -> prisel::Result<(f64, f64)> {
        match *self {
            IngestRecord::Direct { x, sigma, .. } => Ok((x, sigma)),
            IngestRecord::Rates { y, y_prime, n, n_prime, .. } => {
                Ok((y - y_prime, ayp_standard_error(y, y_prime, n, n_prime)?))
            }
        }
    }

    pub fn into_observation(self) -> prisel::Result<Observation> {
        let (x, sigma) = self.effect()?;
        Observation::new(self.id().to_string(), x, sigma)
    }
}

/// Standard error of a difference of two independent proportions.
pub fn ayp_standard_error(y: f64, y_prime: f64, n: u64, n_prime: u64) -> prisel::Result<f64> {
    let bad = |m: String| prisel::Error::InvalidInput(m);
    if !(0.0..=1.0).contains(&y) || !(0.0..=1.0).contains(&y_prime) {
        return Err(bad(format!("rates ({y}, {y_prime}) must lie in [0, 1]")));
    }
    if n == 0 || n_prime == 0 {
        return Err(bad("sample sizes must be at least 1".into()));
    }
    let var = y * (1.0 - y) / n as f64 + y_prime * (1.0 - y_prime) / n_prime as f64;
    if var <= 0.0 {
        return Err(bad(format!("rates ({y}, {y_prime}) give zero variance on both sides")));
    }
    Ok(var.sqrt())
}

/// Drop records whose sigma lies strictly outside the `[lower, upper]`
/// empirical percentiles of all sigmas.
pub fn trim_by_se_percentile(records: Vec<Observation>, lower: f64, upper: f64) -> prisel::Result<Vec<Observation>> {
    if !(0.0 <= lower && lower < upper && upper <= 1.0) {
        return Err(prisel::Error::InvalidInput(format!("trim bounds ({lower}, {upper}) need 0 <= lower < upper <= 1")));
    }
    if records.is_empty() {
        return Err(prisel::Error::InvalidInput("no records to trim".into()));
    }
    let sigmas: Vec<f64> = records.iter().map(|o| o.sigma).collect();
    let (lo, hi) = (quantile(&sigmas, lower)?, quantile(&sigmas, upper)?);
    let kept: Vec<Observation> = records.into_iter().filter(|o| o.sigma >= lo && o.sigma <= hi).collect();
    if kept.is_empty() {
        return Err(prisel::Error::InvalidInput("every record was trimmed".into()));
    }
    Ok(kept)
}

enum Layout {
    Direct { id: usize, x: usize, sigma: usize },
    Rates { id: usize, y: usize, y_prime: usize, n: usize, n_prime: usize },
}

fn layout(headers: &csv::StringRecord) -> Option<Layout> {
    let find = |name: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
    let id = find("id")?;
    if let (Some(x), Some(sigma)) = (find("x"), find("sigma")) {
        return Some(Layout::Direct { id, x, sigma });
    }
    Some(Layout::Rates { id, y: find("y")?, y_prime: find("yprime")?, n: find("n")?, n_prime: find("nprime")? })
}

/// Read every record of a headed, comma-separated file. Extra columns are ignored.
pub fn read_records(path: &Path) -> CliResult<Vec<IngestRecord>> {
    let io = |source| CliError::Io { path: path.to_path_buf(), source };
    let file = std::fs::File::open(path).map_err(io)?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let parse_err = |line: u64, message: String| CliError::Parse { path: path.to_path_buf(), line, message };

    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let layout = layout(&headers)
        .ok_or_else(|| parse_err(1, "header must name id,x,sigma or id,Y,Yprime,n,nprime".to_string()))?;

    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |k: usize| row.get(k).map(str::trim).unwrap_or("");
        let real = |k: usize, name: &str| -> CliResult<f64> {
            field(k).parse::<f64>().map_err(|_| parse_err(line, format!("{name} = {:?} is not a number", field(k))))
        };
        let count = |k: usize, name: &str| -> CliResult<u64> {
            field(k).parse::<u64>().map_err(|_| parse_err(line, format!("{name} = {:?} is not a count", field(k))))
        };
        let record = match layout {
            Layout::Direct { id, x, sigma } => {
                IngestRecord::Direct { id: field(id).to_string(), x: real(x, "x")?, sigma: real(sigma, "sigma")? }
            }
            Layout::Rates { id, y, y_prime, n, n_prime } => IngestRecord::Rates {
                id: field(id).to_string(),
                y: real(y, "Y")?,
                y_prime: real(y_prime, "Yprime")?,
                n: count(n, "n")?,
                n_prime: count(n_prime, "nprime")?,
            },
        };
        // validate here so the error keeps its line number
        record.effect().and_then(|(x, s)| Observation::new(record.id(), x, s)).map_err(|e| parse_err(line, e.to_string()))?;
        out.push(record);
    }
    if out.is_empty() {
        return Err(parse_err(1, "no data rows".to_string()));
    }
    Ok(out)
}

pub fn read_observations(path: &Path) -> CliResult<Vec<Observation>> {
    read_records(path)?
        .into_iter()
        .map(|r| r.into_observation().map_err(CliError::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn standard_error_examples() {
        assert_abs_diff_eq!(ayp_standard_error(0.5, 0.5, 100, 100).unwrap(), 0.070711, epsilon = 1e-6);
        assert_abs_diff_eq!(ayp_standard_error(0.8, 0.6, 400, 100).unwrap(), 0.052915, epsilon = 1e-6);
        assert!(ayp_standard_error(1.0, 0.0, 10, 10).is_err());
        assert!(ayp_standard_error(1.2, 0.5, 10, 10).is_err());
        assert!(ayp_standard_error(0.5, 0.5, 0, 10).is_err());
    }

    fn obs(sigmas: &[f64]) -> Vec<Observation> {
        sigmas.iter().enumerate().map(|(i, &s)| Observation::new(i.to_string(), 0.0, s).unwrap()).collect()
    }

    #[test]
    fn trim_examples() {
        let distinct: Vec<f64> = (1..=100).map(|i| i as f64 * 0.01).collect();
        assert_eq!(trim_by_se_percentile(obs(&distinct), 0.0, 1.0).unwrap().len(), 100);
        let kept = trim_by_se_percentile(obs(&distinct), 0.01, 0.99).unwrap();
        assert_eq!(kept.len(), 98);
        assert!(kept.iter().all(|o| o.sigma > 0.01 && o.sigma < 1.0));
        assert_eq!(trim_by_se_percentile(obs(&[0.3; 10]), 0.01, 0.99).unwrap().len(), 10);
        assert!(trim_by_se_percentile(obs(&[0.3; 10]), 0.5, 0.5).is_err());
    }
}
