use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::deconv::{Component, OracleModel, SigmaGrouping, SigmaLaw, SigmaStratum, TruePrior};
use crate::error::{invalid, Result};
use crate::model::{check_alpha, Observation, TruthLabels};
use crate::selection::ScoreTransform;

/// Generative family of a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "design", rename_all = "snake_case")]
pub enum DesignKind {
    /// First half `sigma = 1`, `mu ~ N(5, 0.5^2)`; second half `sigma = sigma2`,
    /// `mu ~ N(7, 0.5^2)`.
    TwoComponent { sigma2: f64, m: usize },
    /// `mu ~ (1 - pi1) U(-3, -1) + pi1 U(1, 2)` independent of
    /// `sigma ~ U(0.5, sigma_max)`.
    UniformIndep { sigma_max: f64, m: usize, pi1: f64 },
    /// `sigma` is `0.25 sigma` or `1.25 sigma` with equal odds; the effect
    /// prior is `0.9 N(-0.5, 0.25^2) + 0.1 N(c, 0.25^2)` with `c = 1.5` or `3`.
    CorrelatedTwoGroup { sigma: f64, m: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimDesign {
    pub kind: DesignKind,
    pub master_seed: u64,
    pub mu0: f64,
    pub alpha: f64,
    pub reps: usize,
    /// Monte Carlo draws used to calibrate the oracle cutoffs.
    pub n_mc: usize,
    pub grid_size: usize,
    pub transform: ScoreTransform,
}

impl SimDesign {
    fn with_kind(kind: DesignKind, mu0: f64) -> Self {
        Self {
            kind,
            master_seed: 0,
            mu0,
            alpha: 0.1,
            reps: 1,
            n_mc: 1_000_000,
            grid_size: crate::deconv::DEFAULT_GRID_SIZE,
            transform: ScoreTransform::Tanh,
        }
    }

    /// Defaults: `mu0 = 6`, `alpha = 0.1`.
    pub fn two_component(sigma2: f64, m: usize) -> Self {
        Self::with_kind(DesignKind::TwoComponent { sigma2, m }, 6.0)
    }

    /// Defaults: `pi1 = 0.2`, `mu0 = 0`, `alpha = 0.1`.
    pub fn uniform(sigma_max: f64, m: usize) -> Self {
        Self::with_kind(DesignKind::UniformIndep { sigma_max, m, pi1: 0.2 }, 0.0)
    }

    /// Defaults: `mu0 = 1`, `alpha = 0.1`.
    pub fn correlated(sigma: f64, m: usize) -> Self {
        Self::with_kind(DesignKind::CorrelatedTwoGroup { sigma, m }, 1.0)
    }

    pub fn seed(mut self, master_seed: u64) -> Self {
        self.master_seed = master_seed;
        self
    }

    pub fn reps(mut self, reps: usize) -> Self {
        self.reps = reps;
        self
    }

    pub fn n_mc(mut self, n_mc: usize) -> Self {
        self.n_mc = n_mc;
        self
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            DesignKind::TwoComponent { .. } => "two-component",
            DesignKind::UniformIndep { .. } => "uniform",
            DesignKind::CorrelatedTwoGroup { .. } => "correlated",
        }
    }

    pub fn m(&self) -> usize {
        match self.kind {
            DesignKind::TwoComponent { m, .. }
            | DesignKind::UniformIndep { m, .. }
            | DesignKind::CorrelatedTwoGroup { m, .. } => m,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.reps == 0 {
            return Err(invalid("reps must be at least 1"));
        }
        if !self.mu0.is_finite() {
            return Err(invalid("mu0 must be finite"));
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        match self.kind {
            DesignKind::TwoComponent { sigma2, m } => {
                if !positive(sigma2) || m < 4 || m % 2 != 0 {
                    return Err(invalid("two-component design needs sigma2 > 0 and an even m >= 4"));
                }
            }
            DesignKind::UniformIndep { sigma_max, m, pi1 } => {
                if !(sigma_max > 0.5 && sigma_max.is_finite()) || m < 2 || !(0.0..=1.0).contains(&pi1) {
                    return Err(invalid("uniform design needs sigma_max > 0.5, m >= 2 and pi1 in [0, 1]"));
                }
            }
            DesignKind::CorrelatedTwoGroup { sigma, m } => {
                if !positive(sigma) || m < 4 {
                    return Err(invalid("correlated design needs sigma > 0 and m >= 4"));
                }
            }
        }
        Ok(())
    }

    /// Joint law of `(mu, sigma)`, with one stratum per noise group.
    pub fn oracle_model(&self) -> Result<OracleModel<f64>> {
        let normal = |mean: f64, sd: f64| Component::Normal { mean, sd };
        match self.kind {
            DesignKind::TwoComponent { sigma2, .. } => OracleModel::new(vec![
                SigmaStratum {
                    weight: 0.5,
                    sigma: SigmaLaw::Fixed { sigma: 1.0 },
                    prior: TruePrior::mixture([(1.0, normal(5.0, 0.5))])?,
                },
                SigmaStratum {
                    weight: 0.5,
                    sigma: SigmaLaw::Fixed { sigma: sigma2 },
                    prior: TruePrior::mixture([(1.0, normal(7.0, 0.5))])?,
                },
            ]),
            DesignKind::UniformIndep { sigma_max, pi1, .. } => OracleModel::independent(
                TruePrior::mixture([
                    (1.0 - pi1, Component::Uniform { lo: -3.0, hi: -1.0 }),
                    (pi1, Component::Uniform { lo: 1.0, hi: 2.0 }),
                ])?,
                SigmaLaw::Uniform { lo: 0.5, hi: sigma_max },
            ),
            DesignKind::CorrelatedTwoGroup { sigma, .. } => {
                let stratum = |s: f64, bump: f64| -> Result<SigmaStratum<f64>> {
                    Ok(SigmaStratum {
                        weight: 0.5,
                        sigma: SigmaLaw::Fixed { sigma: s },
                        prior: TruePrior::mixture([(0.9, normal(-0.5, 0.25)), (0.1, normal(bump, 0.25))])?,
                    })
                };
                OracleModel::new(vec![stratum(0.25 * sigma, 1.5)?, stratum(1.25 * sigma, 3.0)?])
            }
        }
    }

    /// Partition used when fitting the prior from data.
    pub fn grouping(&self) -> SigmaGrouping<f64> {
        match self.kind {
            DesignKind::UniformIndep { .. } => SigmaGrouping::Pooled,
            _ => SigmaGrouping::DistinctValues,
        }
    }

    /// Seed of one replication.
    pub fn rep_seed(&self, rep: usize) -> u64 {
        self.master_seed ^ rep as u64
    }

    /// Seed of the oracle calibration draws, shared by all replications.
    pub fn calibration_seed(&self) -> u64 {
        self.master_seed ^ (1 << 63)
    }
}

/// One simulated data set.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub observations: Vec<Observation<f64>>,
    pub truths: TruthLabels<f64>,
    /// Stratum of each unit in [`Dataset::model`].
    pub strata: Vec<usize>,
    pub model: OracleModel<f64>,
}

impl Dataset {
    /// Exact Clfdr of every unit under its stratum's prior.
    pub fn oracle_clfdr(&self, mu0: f64) -> Vec<f64> {
        self.observations
            .iter()
            .zip(&self.strata)
            .map(|(o, &g)| self.model.prior(g).clfdr(o.x, o.sigma, mu0))
            .collect()
    }
}

/// Draw replication `rep`. Unit `i` uses stream `i` of a ChaCha8 generator
/// keyed by [`SimDesign::rep_seed`].
pub fn generate(design: &SimDesign, rep: usize) -> Result<Dataset> {
    design.validate()?;
    if rep >= design.reps {
        return Err(invalid(format!("rep {rep} out of range for {} reps", design.reps)));
    }
    let model = design.oracle_model()?;
    let m = design.m();
    let seed = design.rep_seed(rep);
    let mut observations = Vec::with_capacity(m);
    let mut mus = Vec::with_capacity(m);
    let mut strata = Vec::with_capacity(m);
    for i in 0..m {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let (g, mu, sigma) = match design.kind {
            DesignKind::TwoComponent { .. } => {
                // halves are fixed, not drawn
                let g = usize::from(i >= m / 2);
                let s = &model.strata()[g];
                let sigma = match s.sigma {
                    SigmaLaw::Fixed { sigma } => sigma,
                    SigmaLaw::Uniform { .. } => unreachable!("fixed by construction"),
                };
                (g, s.prior.sample(&mut rng), sigma)
            }
            _ => model.sample(&mut rng),
        };
        let eps: f64 = StandardNormal.sample(&mut rng);
        observations.push(Observation::new(format!("u{i}"), mu + sigma * eps, sigma)?);
        mus.push(mu);
        strata.push(g);
    }
    Ok(Dataset { observations, truths: TruthLabels::from_effects(mus, design.mu0), strata, model })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_component_halves() {
        let d = SimDesign::two_component(2.0, 10_000);
        let data = generate(&d, 0).unwrap();
        assert!(data.observations[..5000].iter().all(|o| o.sigma == 1.0));
        assert!(data.observations[5000..].iter().all(|o| o.sigma == 2.0));
    }

    #[test]
    fn uniform_supports() {
        let d = SimDesign::uniform(3.0, 2000);
        let data = generate(&d, 0).unwrap();
        let mu = data.truths.mu_true.as_ref().unwrap();
        for (&th, &m) in data.truths.theta.iter().zip(mu) {
            if th {
                assert!(m > 1.0 && m < 2.0);
            } else {
                assert!(m > -3.0 && m < -1.0);
            }
        }
        assert!(data.observations.iter().all(|o| o.sigma >= 0.5 && o.sigma < 3.0));
    }

    #[test]
    fn correlated_low_group_prior() {
        let d = SimDesign::correlated(2.0, 4000);
        let data = generate(&d, 0).unwrap();
        let low: Vec<usize> = (0..4000).filter(|&i| data.observations[i].sigma == 0.5).collect();
        assert!(low.len() > 1800 && low.len() < 2200);
        assert!(low.iter().all(|&i| data.strata[i] == 0));
        let mu = data.truths.mu_true.as_ref().unwrap();
        let bump = low.iter().filter(|&&i| mu[i] > 0.5).count() as f64 / low.len() as f64;
        assert!((bump - 0.1).abs() < 0.03);
        let high_mean: f64 = low.iter().filter(|&&i| mu[i] > 0.5).map(|&i| mu[i]).sum::<f64>()
            / low.iter().filter(|&&i| mu[i] > 0.5).count() as f64;
        assert!((high_mean - 1.5).abs() < 0.1);
    }

    #[test]
    fn theta_matches_effects_in_every_design() {
        for d in [SimDesign::two_component(2.0, 400), SimDesign::uniform(4.0, 400), SimDesign::correlated(2.0, 400)] {
            let data = generate(&d, 0).unwrap();
            let mu = data.truths.mu_true.as_ref().unwrap();
            for (&th, &m) in data.truths.theta.iter().zip(mu) {
                assert_eq!(th, m > d.mu0);
            }
        }
    }

    #[test]
    fn rep_out_of_range() {
        assert!(generate(&SimDesign::uniform(3.0, 10).reps(2), 2).is_err());
        assert!(generate(&SimDesign::uniform(3.0, 10).reps(0), 0).is_err());
    }

    #[test]
    fn replication_is_reproducible_alone() {
        let d = SimDesign::uniform(3.0, 50).reps(5).seed(11);
        let a = generate(&d, 3).unwrap();
        let b = generate(&d, 3).unwrap();
        assert_eq!(a.observations, b.observations);
        let c = generate(&d, 2).unwrap();
        assert_ne!(a.observations, c.observations);
    }
}
