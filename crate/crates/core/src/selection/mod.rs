//! Selection rules: the prioritized data-driven procedure, its oracle
//! counterpart, and the Clfdr step-up and Benjamini-Hochberg baselines.

mod baseline;
mod dd;
mod oracle;
mod score;

pub use baseline::{select_bh, select_clfdr_stepup, stepup_count};
pub use dd::select_dd;
pub use oracle::{
    calibrate_oracle, oracle_thresholds, select_oracle, Calibration, CalibrationConfig, ThresholdPair,
};
pub use score::{classify_group, score, score_units, score_with, Group, ScoreTransform, ScoredUnit};

use serde::{Deserialize, Serialize};

use crate::model::{DecisionVector, Observation};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    /// Group 0 unit placed in the initial set.
    Seed,
    /// Group 1 unit bought with available capacity.
    Fill,
    /// Group 2 unit traded for capacity.
    Invest,
    /// Running total recorded after a fill pass.
    Checkpoint,
    /// Unit dropped when the last trade lowered the total.
    Rollback,
    /// Unit admitted by a fixed threshold.
    Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceAction {
    Add,
    Remove,
    Mark,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep<T> {
    pub kind: StepKind,
    pub action: TraceAction,
    /// Position of the unit in the input, absent for checkpoints.
    pub unit: Option<usize>,
    /// Running `sum (x - mu0)` over the current set, when effects are known.
    pub etp_star: Option<T>,
    /// Running `-sum (clfdr - alpha)` over the current set, when known.
    pub capacity: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult<T> {
    pub decisions: DecisionVector,
    pub etp_star: Option<T>,
    pub capacity: Option<T>,
    pub trace: Vec<TraceStep<T>>,
}

impl<T: Real> SelectionResult<T> {
    pub fn n_selected(&self) -> usize {
        self.decisions.n_selected()
    }

    /// Rebuild the decisions from the add/remove events alone.
    pub fn replay(&self) -> DecisionVector {
        let mut sel = vec![false; self.decisions.len()];
        for step in &self.trace {
            if let Some(u) = step.unit {
                match step.action {
                    TraceAction::Add => sel[u] = true,
                    TraceAction::Remove => sel[u] = false,
                    TraceAction::Mark => {}
                }
            }
        }
        DecisionVector::new(sel)
    }

    /// Fill in the realized `sum (x - mu0)` over the selection.
    pub fn with_effects(mut self, observations: &[Observation<T>], mu0: T) -> crate::Result<Self> {
        self.etp_star = Some(crate::model::etp_star(&self.decisions, observations, mu0)?);
        Ok(self)
    }

    pub fn selected_ids<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Vec<String> {
        ids.into_iter()
            .zip(self.decisions.as_slice())
            .filter(|(_, &d)| d)
            .map(|(id, _)| id.to_string())
            .collect()
    }
}
