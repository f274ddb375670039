use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};
use crate::model::{check_alpha, Observation};
use crate::scalar::{lit, Real};

/// Four-way partition by the signs of `x - mu0` and `clfdr - alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    /// Gains power and frees capacity: always selected.
    G0,
    /// Gains power, costs capacity.
    G1,
    /// Loses power, frees capacity.
    G2,
    /// Loses power and costs capacity: never selected.
    G3,
}

impl Group {
    pub fn label(self) -> u8 {
        match self {
            Group::G0 => 0,
            Group::G1 => 1,
            Group::G2 => 2,
            Group::G3 => 3,
        }
    }
}

pub fn classify_group<T: Real>(x: T, clfdr: T, mu0: T, alpha: T) -> Group {
    let up = x - mu0 >= T::zero();
    let cheap = clfdr - alpha <= T::zero();
    match (up, cheap) {
        (true, true) => Group::G0,
        (true, false) => Group::G1,
        (false, true) => Group::G2,
        (false, false) => Group::G3,
    }
}

/// Bounded, continuous, strictly increasing map applied to the ratio statistic.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoreTransform {
    #[default]
    Tanh,
    /// `(2 / pi) atan(t / scale)`.
    Atan { scale: f64 },
}

impl ScoreTransform {
    pub fn apply<T: Real>(&self, t: T) -> T {
        match *self {
            ScoreTransform::Tanh => t.tanh(),
            ScoreTransform::Atan { scale } => {
                lit::<T>(std::f64::consts::FRAC_2_PI) * (t / lit(scale)).atan()
            }
        }
    }

    pub fn invert<T: Real>(&self, s: T) -> T {
        if s >= T::one() {
            return T::infinity();
        }
        if s <= -T::one() {
            return T::neg_infinity();
        }
        match *self {
            ScoreTransform::Tanh => s.atanh(),
            ScoreTransform::Atan { scale } => {
                lit::<T>(scale) * (s / lit(std::f64::consts::FRAC_2_PI)).tan()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ScoreTransform::Tanh => Ok(()),
            ScoreTransform::Atan { scale } if scale > 0.0 && scale.is_finite() => Ok(()),
            ScoreTransform::Atan { scale } => Err(invalid(format!("atan scale {scale} must be positive"))),
        }
    }
}

/// Value-to-cost ratio `(x - mu0) / (clfdr - alpha)` and its transform.
///
/// Division by a zero cost gives `+inf`, `-inf` or (for `x = mu0`) `0`.
pub fn score<T: Real>(x: T, clfdr: T, mu0: T, alpha: T) -> (T, T) {
    score_with(x, clfdr, mu0, alpha, &ScoreTransform::Tanh)
}

pub fn score_with<T: Real>(x: T, clfdr: T, mu0: T, alpha: T, xi: &ScoreTransform) -> (T, T) {
    let num = x - mu0;
    let den = clfdr - alpha;
    let t = if den == T::zero() {
        if num > T::zero() {
            T::infinity()
        } else if num < T::zero() {
            T::neg_infinity()
        } else {
            T::zero()
        }
    } else {
        num / den
    };
    (t, xi.apply(t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredUnit<T> {
    /// Position in the input sequence.
    pub index: usize,
    pub id: String,
    pub x: T,
    pub sigma: T,
    pub clfdr: T,
    pub t: T,
    pub s: T,
    pub group: Group,
}

impl<T: Real> ScoredUnit<T> {
    /// Capacity consumed by selecting this unit (negative when it frees capacity).
    pub fn cost(&self, alpha: T) -> T {
        self.clfdr - alpha
    }

    pub fn gain(&self, mu0: T) -> T {
        self.x - mu0
    }
}

pub fn score_units<T: Real>(
    observations: &[Observation<T>],
    clfdrs: &[T],
    mu0: T,
    alpha: T,
    xi: &ScoreTransform,
) -> Result<Vec<ScoredUnit<T>>> {
    check_len("clfdrs", observations.len(), clfdrs.len())?;
    check_alpha(alpha)?;
    xi.validate()?;
    observations
        .iter()
        .zip(clfdrs)
        .enumerate()
        .map(|(index, (o, &c))| {
            if !(c >= T::zero() && c <= T::one()) {
                return Err(invalid(format!("clfdr {c} of unit {} is outside [0, 1]", o.id)));
            }
            let (t, s) = score_with(o.x, c, mu0, alpha, xi);
            Ok(ScoredUnit {
                index,
                id: o.id.clone(),
                x: o.x,
                sigma: o.sigma,
                clfdr: c,
                t,
                s,
                group: classify_group(o.x, c, mu0, alpha),
            })
        })
        .collect()
}

fn cmp<T: Real>(a: T, b: T) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

/// Priority order inside group 1: score descending. Saturated scores fall back
/// to the raw ratio, then larger `x`, then input position.
pub(crate) fn g1_order<T: Real>(a: &ScoredUnit<T>, b: &ScoredUnit<T>) -> Ordering {
    cmp(b.s, a.s)
        .then(cmp(b.t, a.t))
        .then(cmp(b.x, a.x))
        .then(a.index.cmp(&b.index))
}

/// Priority order inside group 2: score ascending, then larger `x`, then position.
pub(crate) fn g2_order<T: Real>(a: &ScoredUnit<T>, b: &ScoredUnit<T>) -> Ordering {
    cmp(a.s, b.s)
        .then(cmp(a.t, b.t))
        .then(cmp(b.x, a.x))
        .then(a.index.cmp(&b.index))
}

/// Positions of group 1 and group 2 units, each in priority order.
pub(crate) fn ordered_groups<T: Real>(units: &[ScoredUnit<T>]) -> (Vec<usize>, Vec<usize>) {
    let of = |g: Group| (0..units.len()).filter(move |&p| units[p].group == g);
    let mut g1: Vec<usize> = of(Group::G1).collect();
    let mut g2: Vec<usize> = of(Group::G2).collect();
    g1.sort_by(|&a, &b| g1_order(&units[a], &units[b]));
    g2.sort_by(|&a, &b| g2_order(&units[a], &units[b]));
    (g1, g2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn group_examples() {
        assert_eq!(classify_group(1.0, 0.05, 0.0, 0.1), Group::G0);
        assert_eq!(classify_group(-1.0, 0.3, 0.0, 0.1), Group::G3);
        assert_eq!(classify_group(0.0, 0.1, 0.0, 0.1), Group::G0);
        assert_eq!(classify_group(2.0, 0.5, 0.0, 0.1), Group::G1);
        assert_eq!(classify_group(-2.0, 0.0, 0.0, 0.1), Group::G2);
    }

    #[test]
    fn score_examples() {
        let (t, s) = score(1.0f64, 0.6, 0.0, 0.1);
        assert!((t - 2.0).abs() < 1e-15);
        assert!((s - 0.964_027_580_075_817).abs() < 1e-14);
        assert_eq!(score(0.0, 0.3, 0.0, 0.1), (0.0, 0.0));
        assert_eq!(score(0.0, 0.1, 0.0, 0.1), (0.0, 0.0));
        assert_eq!(score(2.0, 0.1, 0.0, 0.1), (f64::INFINITY, 1.0));
        assert_eq!(score(-2.0, 0.1, 0.0, 0.1), (f64::NEG_INFINITY, -1.0));
    }

    #[test]
    fn atan_transform_round_trips() {
        let xi = ScoreTransform::Atan { scale: 3.0 };
        for t in [-50.0, -1.0, 0.0, 0.5, 7.0] {
            let s: f64 = xi.apply(t);
            assert!(s.abs() < 1.0);
            assert!((xi.invert(s) - t).abs() < 1e-9 * (1.0 + t.abs()));
        }
        assert_eq!(xi.apply(f64::INFINITY), 1.0);
        assert!(ScoreTransform::Atan { scale: 0.0 }.validate().is_err());
    }

    #[test]
    fn out_of_range_clfdr_rejected() {
        let o = vec![Observation::new("a", 1.0, 1.0).unwrap()];
        assert!(score_units(&o, &[1.5], 0.0, 0.1, &ScoreTransform::Tanh).is_err());
        assert!(score_units(&o, &[0.5], 0.0, 1.0, &ScoreTransform::Tanh).is_err());
    }

    proptest! {
        #[test]
        fn group_matches_sign_pattern(x in -5.0..5.0f64, c in 0.0..=1.0f64, alpha in 0.01..0.5f64) {
            let g = classify_group(x, c, 0.0, alpha);
            let (t, s) = score(x, c, 0.0, alpha);
            prop_assert!((-1.0..=1.0).contains(&s));
            prop_assert_eq!(s, t.tanh());
            match g {
                Group::G0 => prop_assert!(x >= 0.0 && c <= alpha),
                Group::G1 => prop_assert!(x >= 0.0 && c > alpha && t >= 0.0),
                Group::G2 => prop_assert!(x < 0.0 && c <= alpha && (t >= 0.0 || t == f64::NEG_INFINITY)),
                Group::G3 => prop_assert!(x < 0.0 && c > alpha && t < 0.0),
            }
        }
    }
}
