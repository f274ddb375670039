//! Weighted bivariate kernel estimate of the marginal density at each
//! observation, and the rule-of-thumb bandwidths that feed it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::Observation;
use crate::scalar::{from_usize, lit, normal_pdf, Real};
use crate::stats::{iqr, sample_sd};

/// Bandwidths `(h_x, h_sigma)`. The x-bandwidth is scaled per unit by `sigma_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthPair<T> {
    pub h_x: T,
    pub h_sigma: T,
}

impl<T: Real> BandwidthPair<T> {
    pub fn new(h_x: T, h_sigma: T) -> Result<Self> {
        for (name, h) in [("h_x", h_x), ("h_sigma", h_sigma)] {
            if !(h > T::zero()) || !h.is_finite() {
                return Err(invalid(format!("{name} must be positive and finite, got {h}")));
            }
        }
        Ok(Self { h_x, h_sigma })
    }
}

/// `0.9 min(sd, IQR) / (1.34 m^(1/5))` for one sample.
pub fn silverman_bandwidth<T: Real>(values: &[T]) -> Result<T> {
    let m = values.len();
    if m < 2 {
        return Err(invalid("bandwidth rule needs at least two values"));
    }
    let spread = sample_sd(values).min(iqr(values)?);
    if !(spread > T::zero()) {
        return Err(invalid("sample has zero spread; bandwidth would vanish"));
    }
    Ok(rule_of_thumb(spread, m))
}

fn rule_of_thumb<T: Real>(spread: T, m: usize) -> T {
    lit::<T>(0.9) * spread / (lit::<T>(1.34) * from_usize::<T>(m).powf(lit(0.2)))
}

/// Rule-of-thumb bandwidths applied to the observed effects and the noise
/// levels respectively.
pub fn silverman_bandwidths<T: Real>(xs: &[T], sigmas: &[T]) -> Result<BandwidthPair<T>> {
    if xs.len() != sigmas.len() {
        return Err(crate::Error::LengthMismatch {
            what: "sigmas",
            expected: xs.len(),
            got: sigmas.len(),
        });
    }
    BandwidthPair::new(silverman_bandwidth(xs)?, silverman_bandwidth(sigmas)?)
}

/// Bandwidths used by the fitting pipeline.
///
/// Identical to [`silverman_bandwidths`] except on the sigma side: when the
/// IQR of the noise levels is zero the sd alone is used, and when every sigma
/// is equal the sigma weights are uniform for any bandwidth, so `h_sigma = 1`.
pub fn pipeline_bandwidths<T: Real>(xs: &[T], sigmas: &[T]) -> Result<BandwidthPair<T>> {
    let h_x = silverman_bandwidth(xs)?;
    let sd = sample_sd(sigmas);
    let spread = sd.min(iqr(sigmas)?);
    let h_sigma = if spread > T::zero() {
        rule_of_thumb(spread, sigmas.len())
    } else if sd > T::zero() {
        rule_of_thumb(sd, sigmas.len())
    } else {
        T::one()
    };
    BandwidthPair::new(h_x, h_sigma)
}

/// Kernel estimate of the marginal density of unit `i` at its own observation:
///
/// `sum_j w_ij phi_{h_x sigma_j}(x_i - x_j)` with
/// `w_ij = phi_{h_sigma}(sigma_i - sigma_j) / sum_k phi_{h_sigma}(sigma_i - sigma_k)`.
pub fn kernel_marginal<T: Real>(
    i: usize,
    observations: &[Observation<T>],
    h: &BandwidthPair<T>,
) -> T {
    let oi = &observations[i];
    let two = lit::<T>(2.0);
    let inv_2hs2 = T::one() / (two * h.h_sigma * h.h_sigma);
    let mut num = T::zero();
    let mut den = T::zero();
    for oj in observations {
        let ds = oi.sigma - oj.sigma;
        // the normalising constant of the sigma kernel cancels in the ratio
        let ws = (-(ds * ds) * inv_2hs2).exp();
        num += ws * normal_pdf(oi.x - oj.x, h.h_x * oj.sigma);
        den += ws;
    }
    num / den
}

/// [`kernel_marginal`] for every unit, evaluated in parallel.
pub fn kernel_marginals<T: Real>(observations: &[Observation<T>], h: &BandwidthPair<T>) -> Vec<T> {
    (0..observations.len())
        .into_par_iter()
        .map(|i| kernel_marginal(i, observations, h))
        .collect()
}
