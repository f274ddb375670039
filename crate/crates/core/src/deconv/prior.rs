//! Known effect-size priors and the exact null / marginal densities they imply.

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::Observation;
use crate::scalar::{lit, std_normal_cdf, std_normal_interval, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Component<T> {
    PointMass { at: T },
    Uniform { lo: T, hi: T },
    Normal { mean: T, sd: T },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedComponent<T> {
    pub weight: T,
    pub component: Component<T>,
}

/// Finite mixture of point masses, uniform intervals and normals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruePrior<T> {
    components: Vec<WeightedComponent<T>>,
}

fn ln_normal_pdf<T: Real>(d: T, sd: T) -> T {
    let z = d / sd;
    -lit::<T>(0.5) * z * z - sd.ln() - lit::<T>(0.5) * lit::<T>(std::f64::consts::TAU).ln()
}

impl<T: Real> Component<T> {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Component::PointMass { at } => at.is_finite(),
            Component::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && hi > lo,
            Component::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && sd > T::zero(),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("invalid prior component {self:?}")))
        }
    }

    /// `(ln f0, ln f)` for this component at `(x, sigma)`; `-inf` encodes zero.
    fn ln_densities(&self, x: T, sigma: T, mu0: T) -> (T, T) {
        let ninf = T::neg_infinity();
        match *self {
            Component::PointMass { at } => {
                let lf = ln_normal_pdf(x - at, sigma);
                (if at <= mu0 { lf } else { ninf }, lf)
            }
            Component::Uniform { lo, hi } => {
                let width = hi - lo;
                let f = std_normal_interval((x - hi) / sigma, (x - lo) / sigma) / width;
                let f0 = if mu0 <= lo {
                    T::zero()
                } else {
                    let u = hi.min(mu0);
                    std_normal_interval((x - u) / sigma, (x - lo) / sigma) / width
                };
                (f0.ln(), f.ln())
            }
            Component::Normal { mean, sd } => {
                let v = sigma * sigma + sd * sd;
                let lf = ln_normal_pdf(x - mean, v.sqrt());
                let post_mean = (mean * sigma * sigma + x * sd * sd) / v;
                let post_sd = sigma * sd / v.sqrt();
                let below = std_normal_cdf((mu0 - post_mean) / post_sd);
                (lf + below.ln(), lf)
            }
        }
    }
}

impl Component<f64> {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Component::PointMass { at } => at,
            Component::Uniform { lo, hi } => Uniform::new(lo, hi).expect("validated").sample(rng),
            Component::Normal { mean, sd } => Normal::new(mean, sd).expect("validated").sample(rng),
        }
    }
}

fn log_sum_exp<T: Real>(terms: impl Iterator<Item = T>) -> T {
    let v: Vec<T> = terms.collect();
    let top = v.iter().copied().fold(T::neg_infinity(), T::max);
    if !top.is_finite() {
        return top;
    }
    top + v.iter().map(|&t| (t - top).exp()).sum::<T>().ln()
}

impl<T: Real> TruePrior<T> {
    pub fn new(components: Vec<WeightedComponent<T>>) -> Result<Self> {
        if components.is_empty() {
            return Err(invalid("prior has no components"));
        }
        for c in &components {
            if !(c.weight >= T::zero()) || !c.weight.is_finite() {
                return Err(invalid(format!("component weight {} is not a probability", c.weight)));
            }
            c.component.validate()?;
        }
        let total: T = components.iter().map(|c| c.weight).sum();
        if (total - T::one()).abs() > lit(1e-9) {
            return Err(invalid(format!("component weights sum to {total}, not 1")));
        }
        Ok(Self { components })
    }

    /// Convenience constructor from `(weight, component)` pairs.
    pub fn mixture(parts: impl IntoIterator<Item = (T, Component<T>)>) -> Result<Self> {
        Self::new(
            parts
                .into_iter()
                .map(|(weight, component)| WeightedComponent { weight, component })
                .collect(),
        )
    }

    pub fn point_masses(at: &[T], weights: &[T]) -> Result<Self> {
        crate::error::check_len("weights", at.len(), weights.len())?;
        Self::mixture(
            weights.iter().zip(at).map(|(&w, &a)| (w, Component::PointMass { at: a })),
        )
    }

    pub fn components(&self) -> &[WeightedComponent<T>] {
        &self.components
    }

    /// Marginal density of `x` given `sigma`, and its part coming from `mu <= mu0`.
    pub fn densities(&self, x: T, sigma: T, mu0: T) -> (T, T) {
        let (l0, l) = self.ln_densities(x, sigma, mu0);
        (l0.exp(), l.exp())
    }

    fn ln_densities(&self, x: T, sigma: T, mu0: T) -> (T, T) {
        let parts: Vec<(T, T, T)> = self
            .components
            .iter()
            .filter(|c| c.weight > T::zero())
            .map(|c| {
                let (l0, l) = c.component.ln_densities(x, sigma, mu0);
                (c.weight.ln(), l0, l)
            })
            .collect();
        (
            log_sum_exp(parts.iter().map(|&(lw, l0, _)| lw + l0)),
            log_sum_exp(parts.iter().map(|&(lw, _, l)| lw + l)),
        )
    }

    /// Exact conditional local fdr, `f0(x) / f(x)`.
    pub fn clfdr(&self, x: T, sigma: T, mu0: T) -> T {
        let (l0, l) = self.ln_densities(x, sigma, mu0);
        let ratio = if l.is_finite() {
            (l0 - l).exp()
        } else {
            // both densities below any representable floor
            T::zero()
        };
        ratio.max(T::zero()).min(T::one())
    }

    /// Probability mass above `mu0`.
    pub fn prob_above(&self, mu0: T) -> T {
        self.components
            .iter()
            .map(|c| {
                c.weight
                    * match c.component {
                        Component::PointMass { at } => {
                            if at > mu0 {
                                T::one()
                            } else {
                                T::zero()
                            }
                        }
                        Component::Uniform { lo, hi } => {
                            ((hi - mu0.max(lo)) / (hi - lo)).max(T::zero()).min(T::one())
                        }
                        Component::Normal { mean, sd } => std_normal_cdf((mean - mu0) / sd),
                    }
            })
            .sum()
    }
}

impl TruePrior<f64> {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let last = self.components.len() - 1;
        for (i, c) in self.components.iter().enumerate() {
            acc += c.weight;
            if (u < acc && c.weight > 0.0) || i == last {
                return c.component.sample(rng);
            }
        }
        unreachable!()
    }
}

/// Exact Clfdr of `obs` under a known prior.
pub fn oracle_clfdr<T: Real>(prior: &TruePrior<T>, obs: &Observation<T>, mu0: T) -> T {
    prior.clfdr(obs.x, obs.sigma, mu0)
}

/// Distribution of the noise levels in a generative model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SigmaLaw<T> {
    Fixed { sigma: T },
    Uniform { lo: T, hi: T },
}

/// One noise level (or law) together with the prior of the effects at it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaStratum<T> {
    pub weight: T,
    pub sigma: SigmaLaw<T>,
    pub prior: TruePrior<T>,
}

/// Joint law of `(mu, sigma)` as a mixture of strata, each with its own
/// sigma law and effect prior. A single stratum means `mu` and `sigma` are
/// independent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleModel<T> {
    strata: Vec<SigmaStratum<T>>,
}

impl<T: Real> OracleModel<T> {
    pub fn new(strata: Vec<SigmaStratum<T>>) -> Result<Self> {
        if strata.is_empty() {
            return Err(invalid("model has no strata"));
        }
        for s in &strata {
            if !(s.weight >= T::zero()) {
                return Err(invalid("stratum weight must be nonnegative"));
            }
            let ok = match s.sigma {
                SigmaLaw::Fixed { sigma } => sigma > T::zero() && sigma.is_finite(),
                SigmaLaw::Uniform { lo, hi } => lo > T::zero() && hi > lo && hi.is_finite(),
            };
            if !ok {
                return Err(invalid(format!("invalid sigma law {:?}", s.sigma)));
            }
        }
        let total: T = strata.iter().map(|s| s.weight).sum();
        if (total - T::one()).abs() > lit(1e-9) {
            return Err(invalid(format!("stratum weights sum to {total}, not 1")));
        }
        Ok(Self { strata })
    }

    pub fn independent(prior: TruePrior<T>, sigma: SigmaLaw<T>) -> Result<Self> {
        Self::new(vec![SigmaStratum { weight: T::one(), sigma, prior }])
    }

    pub fn strata(&self) -> &[SigmaStratum<T>] {
        &self.strata
    }

    pub fn prior(&self, stratum: usize) -> &TruePrior<T> {
        &self.strata[stratum].prior
    }
}

impl OracleModel<f64> {
    /// Draw `(stratum, mu, sigma)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, f64, f64) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = self.strata.len() - 1;
        for (i, s) in self.strata.iter().enumerate() {
            acc += s.weight;
            if u < acc && s.weight > 0.0 {
                pick = i;
                break;
            }
        }
        let s = &self.strata[pick];
        let sigma = match s.sigma {
            SigmaLaw::Fixed { sigma } => sigma,
            SigmaLaw::Uniform { lo, hi } => Uniform::new(lo, hi).expect("validated").sample(rng),
        };
        (pick, s.prior.sample(rng), sigma)
    }
}
