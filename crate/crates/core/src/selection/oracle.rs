use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baseline::stepup_count;
use super::score::{ordered_groups, Group, ScoreTransform, ScoredUnit};
use super::{SelectionResult, StepKind, TraceAction, TraceStep};
use crate::deconv::OracleModel;
use crate::error::{invalid, Result};
use crate::model::{check_alpha, DecisionVector};
use crate::scalar::Real;

/// Score cutoffs: group 1 units with score above `c1` and group 2 units with
/// score below `c2` are selected.
///
/// `t1` / `t2` are the matching ratio-statistic cutoffs; when present they
/// break ties between a unit's score and the cutoff once the transform has
/// saturated in finite precision. At the endpoints `c = 1` and `c = -1` they
/// are infinite, so that `-1` admits a whole group and `1` none of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPair<T> {
    pub c1: T,
    pub c2: T,
    pub t1: Option<T>,
    pub t2: Option<T>,
}

impl<T: Real> ThresholdPair<T> {
    pub fn new(c1: T, c2: T) -> Result<Self> {
        let one = T::one();
        if !(c1 >= -one && c1 <= one && c2 >= -one && c2 <= one) {
            return Err(invalid(format!("thresholds ({c1}, {c2}) outside [-1, 1]")));
        }
        let edge = |c: T| {
            if c == one {
                Some(T::infinity())
            } else if c == -one {
                Some(T::neg_infinity())
            } else {
                None
            }
        };
        Ok(Self { c1, c2, t1: edge(c1), t2: edge(c2) })
    }

    /// Only group 0.
    pub fn group_zero_only() -> Self {
        Self { c1: T::one(), c2: -T::one(), t1: Some(T::infinity()), t2: Some(T::neg_infinity()) }
    }

    fn takes_g1(&self, u: &ScoredUnit<T>) -> bool {
        u.s > self.c1 || (u.s == self.c1 && self.t1.is_some_and(|t| u.t > t))
    }

    fn takes_g2(&self, u: &ScoredUnit<T>) -> bool {
        u.s < self.c2 || (u.s == self.c2 && self.t2.is_some_and(|t| u.t < t))
    }
}

/// Oracle rule with fixed cutoffs. Realized totals use `alpha` and `mu0`.
pub fn select_oracle<T: Real>(units: &[ScoredUnit<T>], th: &ThresholdPair<T>, alpha: T, mu0: T) -> SelectionResult<T> {
    let mut sel = vec![false; units.len()];
    let mut trace = Vec::new();
    let mut gain = T::zero();
    let mut cap = T::zero();
    for (p, u) in units.iter().enumerate() {
        let take = match u.group {
            Group::G0 => true,
            Group::G1 => th.takes_g1(u),
            Group::G2 => th.takes_g2(u),
            Group::G3 => false,
        };
        if take {
            sel[p] = true;
            gain += u.gain(mu0);
            cap -= u.cost(alpha);
            trace.push(TraceStep {
                kind: StepKind::Threshold,
                action: TraceAction::Add,
                unit: Some(p),
                etp_star: Some(gain),
                capacity: Some(cap),
            });
        }
    }
    SelectionResult { decisions: DecisionVector::new(sel), etp_star: Some(gain), capacity: Some(cap), trace }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub n_mc: usize,
    pub seed: u64,
    pub transform: ScoreTransform,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self { n_mc: 1_000_000, seed: 0, transform: ScoreTransform::Tanh }
    }
}

/// Outcome of a Monte Carlo calibration of the oracle rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub thresholds: ThresholdPair<f64>,
    /// Largest Clfdr admitted by the step-up rule on the same draws.
    pub clfdr_cutoff: f64,
    /// Realized `sum (x - mu0)` per draw at the chosen cutoffs.
    pub etp_star_per_unit: f64,
    pub n_g0: usize,
    pub n_g1_selected: usize,
    pub n_g2_selected: usize,
    /// Points visited along the curve before the total declined.
    pub curve_steps: usize,
    pub n_mc: usize,
    pub seed: u64,
}

const CHUNK: usize = 1 << 14;

fn draw(model: &OracleModel<f64>, mu0: f64, n: usize, seed: u64) -> Vec<(f64, f64, f64)> {
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = CHUNK.min(n - c * CHUNK);
            (0..len)
                .map(|_| {
                    let (g, mu, sigma) = model.sample(&mut rng);
                    let eps: f64 = StandardNormal.sample(&mut rng);
                    let x = mu + sigma * eps;
                    (x, sigma, model.prior(g).clfdr(x, sigma, mu0))
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Estimate the oracle cutoffs from `n_mc` draws of the generative model.
///
/// The expected-value constraint is replaced by its sample analogue
/// `sum (clfdr - alpha) <= 0` over the selection. For each number of group 2
/// units traded in, the longest affordable run of group 1 is taken; the walk
/// stops at the first decline of the realized `sum (x - mu0)`.
pub fn calibrate_oracle(model: &OracleModel<f64>, alpha: f64, mu0: f64, config: &CalibrationConfig) -> Result<Calibration> {
    check_alpha(alpha)?;
    config.transform.validate()?;
    if config.n_mc == 0 {
        return Err(invalid("n_mc must be positive"));
    }
    let draws = draw(model, mu0, config.n_mc, config.seed);

    let mut clfdrs: Vec<f64> = draws.iter().map(|d| d.2).collect();
    clfdrs.sort_by(f64::total_cmp);
    let k = stepup_count(&clfdrs, alpha);
    let clfdr_cutoff = if k > 0 { clfdrs[k - 1] } else { 0.0 };

    let units: Vec<ScoredUnit<f64>> = draws
        .iter()
        .enumerate()
        .map(|(index, &(x, sigma, clfdr))| {
            let (t, s) = super::score_with(x, clfdr, mu0, alpha, &config.transform);
            ScoredUnit {
                index,
                id: String::new(),
                x,
                sigma,
                clfdr,
                t,
                s,
                group: super::classify_group(x, clfdr, mu0, alpha),
            }
        })
        .collect();
    let (g1, g2) = ordered_groups(&units);
    let g0: Vec<&ScoredUnit<f64>> = units.iter().filter(|u| u.group == Group::G0).collect();
    let base0: f64 = -g0.iter().map(|u| u.cost(alpha)).sum::<f64>();
    let gain0: f64 = g0.iter().map(|u| u.gain(mu0)).sum();

    // prefix sums along the group 1 queue
    let mut g1_cost = Vec::with_capacity(g1.len() + 1);
    let mut g1_gain = Vec::with_capacity(g1.len() + 1);
    g1_cost.push(0.0);
    g1_gain.push(0.0);
    for &p in &g1 {
        g1_cost.push(g1_cost.last().unwrap() + units[p].cost(alpha));
        g1_gain.push(g1_gain.last().unwrap() + units[p].gain(mu0));
    }

    let mut capacity = base0;
    let mut gain2 = 0.0;
    let mut i = 0;
    let mut best = (f64::NEG_INFINITY, 0usize, 0usize);
    let mut steps = 0;
    for j in 0..=g2.len() {
        if j > 0 {
            let u = &units[g2[j - 1]];
            capacity -= u.cost(alpha);
            gain2 += u.gain(mu0);
        }
        while i < g1.len() && g1_cost[i + 1] <= capacity {
            i += 1;
        }
        let total = gain0 + gain2 + g1_gain[i];
        steps += 1;
        if total < best.0 {
            break;
        }
        best = (total, i, j);
        if i == g1.len() {
            break;
        }
    }
    let (total, n1, n2) = best;

    let (c1, t1) = match g1.get(n1) {
        Some(&p) => (units[p].s, units[p].t),
        None if g1.is_empty() => (1.0, f64::INFINITY),
        None => (-1.0, f64::NEG_INFINITY),
    };
    let (c2, t2) = match g2.get(n2) {
        Some(&p) => (units[p].s, units[p].t),
        None if g2.is_empty() => (-1.0, f64::NEG_INFINITY),
        None => (1.0, f64::INFINITY),
    };
    Ok(Calibration {
        thresholds: ThresholdPair { c1, c2, t1: Some(t1), t2: Some(t2) },
        clfdr_cutoff,
        etp_star_per_unit: total / config.n_mc as f64,
        n_g0: g0.len(),
        n_g1_selected: n1,
        n_g2_selected: n2,
        curve_steps: steps,
        n_mc: config.n_mc,
        seed: config.seed,
    })
}

/// Cutoffs only; see [`calibrate_oracle`].
pub fn oracle_thresholds(model: &OracleModel<f64>, alpha: f64, mu0: f64, n_mc: usize, seed: u64) -> Result<ThresholdPair<f64>> {
    let config = CalibrationConfig { n_mc, seed, ..Default::default() };
    calibrate_oracle(model, alpha, mu0, &config).map(|c| c.thresholds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deconv::{Component, SigmaLaw, TruePrior};
    use crate::selection::score::{classify_group, score};

    fn unit(index: usize, x: f64, clfdr: f64) -> ScoredUnit<f64> {
        let (t, s) = score(x, clfdr, 0.0, 0.1);
        ScoredUnit { index, id: String::new(), x, sigma: 1.0, clfdr, t, s, group: classify_group(x, clfdr, 0.0, 0.1) }
    }

    #[test]
    fn strict_inequality_at_cutoff() {
        let u = vec![unit(0, 1.0, 0.6)];
        let th = ThresholdPair::new(u[0].s, -1.0).unwrap();
        assert_eq!(select_oracle(&u, &th, 0.1, 0.0).n_selected(), 0);
        let th = ThresholdPair { t1: Some(2.0), ..th };
        assert_eq!(select_oracle(&u, &th, 0.1, 0.0).n_selected(), 0);
        let th = ThresholdPair { t1: Some(1.9), ..th };
        assert_eq!(select_oracle(&u, &th, 0.1, 0.0).n_selected(), 1);
    }

    #[test]
    fn extreme_thresholds() {
        let u = vec![unit(0, 1.0, 0.05), unit(1, 1.0, 0.6), unit(2, -1.0, 0.05), unit(3, -1.0, 0.6)];
        let r = select_oracle(&u, &ThresholdPair::group_zero_only(), 0.1, 0.0);
        assert_eq!(r.decisions.as_slice(), &[true, false, false, false]);
        let r = select_oracle(&u, &ThresholdPair::new(-1.0, 1.0).unwrap(), 0.1, 0.0);
        assert_eq!(r.decisions.as_slice(), &[true, true, true, false]);
    }

    #[test]
    fn all_non_null_selects_everything() {
        let prior = TruePrior::mixture([(1.0, Component::Uniform { lo: 2.0, hi: 3.0 })]).unwrap();
        let model = OracleModel::independent(prior, SigmaLaw::Fixed { sigma: 0.05 }).unwrap();
        let cal = calibrate_oracle(&model, 0.1, 0.0, &CalibrationConfig { n_mc: 100_000, seed: 1, ..Default::default() }).unwrap();
        assert_eq!(cal.n_g0, 100_000);
        assert_eq!(cal.thresholds.c1, 1.0);
        assert_eq!(cal.thresholds.c2, -1.0);
    }

    #[test]
    fn calibration_is_seeded() {
        let prior = TruePrior::mixture([
            (0.8, Component::Uniform { lo: -3.0, hi: -1.0 }),
            (0.2, Component::Uniform { lo: 1.0, hi: 2.0 }),
        ])
        .unwrap();
        let model = OracleModel::independent(prior, SigmaLaw::Uniform { lo: 0.5, hi: 3.0 }).unwrap();
        let cfg = CalibrationConfig { n_mc: 100_000, seed: 5, ..Default::default() };
        let a = calibrate_oracle(&model, 0.1, 0.0, &cfg).unwrap();
        let b = calibrate_oracle(&model, 0.1, 0.0, &cfg).unwrap();
        assert_eq!(a, b);
        let t = a.thresholds.t1.unwrap();
        assert!(t > 8.0 && t < 16.0, "t1 = {t}");
        assert!((a.clfdr_cutoff - 0.32).abs() < 0.03);
    }
}
