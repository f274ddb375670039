//! Domain types for the one-sided testing problem `H0: mu <= mu0` and the
//! evaluation metrics used throughout the simulations.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};
use crate::scalar::{from_usize, std_normal_sf, Real};

/// One unit: observed effect `x` with known noise standard deviation `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation<T> {
    pub id: String,
    pub x: T,
    pub sigma: T,
}

impl<T: Real> Observation<T> {
    pub fn new(id: impl Into<String>, x: T, sigma: T) -> Result<Self> {
        let id = id.into();
        if !x.is_finite() {
            return Err(invalid(format!("unit {id}: x must be finite")));
        }
        if !(sigma > T::zero()) || !sigma.is_finite() {
            return Err(invalid(format!("unit {id}: sigma must be positive and finite")));
        }
        Ok(Self { id, x, sigma })
    }
}

/// Indifference cutoff `mu0` and nominal FDR level `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestingProblem<T> {
    pub mu0: T,
    pub alpha: T,
}

impl<T: Real> TestingProblem<T> {
    pub fn new(mu0: T, alpha: T) -> Result<Self> {
        if !mu0.is_finite() {
            return Err(invalid("mu0 must be finite"));
        }
        check_alpha(alpha)?;
        Ok(Self { mu0, alpha })
    }
}

pub(crate) fn check_alpha<T: Real>(alpha: T) -> Result<()> {
    if alpha > T::zero() && alpha < T::one() {
        Ok(())
    } else {
        Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Binary selection indicators aligned with the observations.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DecisionVector(Vec<bool>);

impl DecisionVector {
    pub fn new(decisions: Vec<bool>) -> Self {
        Self(decisions)
    }

    pub fn none(m: usize) -> Self {
        Self(vec![false; m])
    }

    pub fn from_indices(m: usize, selected: impl IntoIterator<Item = usize>) -> Self {
        let mut d = vec![false; m];
        for i in selected {
            d[i] = true;
        }
        Self(d)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn n_selected(&self) -> usize {
        self.0.iter().filter(|&&d| d).count()
    }

    /// Indices of selected units in increasing order.
    pub fn selected(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter_map(|(i, &d)| d.then_some(i))
            .collect()
    }

    pub fn into_inner(self) -> Vec<bool> {
        self.0
    }
}

impl From<Vec<bool>> for DecisionVector {
    fn from(v: Vec<bool>) -> Self {
        Self(v)
    }
}

/// True states `theta_i = 1{mu_i > mu0}`, optionally with the effects that
/// produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthLabels<T> {
    pub theta: Vec<bool>,
    pub mu_true: Option<Vec<T>>,
}

impl<T: Real> TruthLabels<T> {
    pub fn from_labels(theta: Vec<bool>) -> Self {
        Self { theta, mu_true: None }
    }

    pub fn from_effects(mu: Vec<T>, mu0: T) -> Self {
        let theta = mu.iter().map(|&m| m > mu0).collect();
        Self { theta, mu_true: Some(mu) }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

/// Per-run error and power summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord<T> {
    pub fdp: T,
    pub etp: usize,
    pub etp_star: T,
    pub n_selected: usize,
    /// Number of selected nulls; kept so that mFDR can be pooled across runs.
    pub n_false: usize,
}

/// False discovery proportion `sum (1 - theta) delta / max(sum delta, 1)`.
pub fn fdp<T: Real>(decisions: &DecisionVector, truths: &TruthLabels<T>) -> Result<T> {
    check_len("truth labels", decisions.len(), truths.len())?;
    let (n_false, n_sel) = false_and_selected(decisions, truths);
    Ok(from_usize::<T>(n_false) / from_usize(n_sel.max(1)))
}

fn false_and_selected<T>(decisions: &DecisionVector, truths: &TruthLabels<T>) -> (usize, usize) {
    decisions
        .as_slice()
        .iter()
        .zip(&truths.theta)
        .fold((0, 0), |(f, s), (&d, &th)| {
            (f + usize::from(d && !th), s + usize::from(d))
        })
}

/// Number of selected non-nulls.
pub fn etp<T: Real>(decisions: &DecisionVector, truths: &TruthLabels<T>) -> Result<usize> {
    check_len("truth labels", decisions.len(), truths.len())?;
    Ok(decisions
        .as_slice()
        .iter()
        .zip(&truths.theta)
        .filter(|(&d, &th)| d && th)
        .count())
}

/// Realized modified power `sum delta_i (x_i - mu0)`. Can be negative.
pub fn etp_star<T: Real>(
    decisions: &DecisionVector,
    observations: &[Observation<T>],
    mu0: T,
) -> Result<T> {
    check_len("observations", decisions.len(), observations.len())?;
    Ok(decisions
        .as_slice()
        .iter()
        .zip(observations)
        .filter(|(&d, _)| d)
        .map(|(_, o)| o.x - mu0)
        .sum())
}

/// z-value `(x - mu0) / sigma` and one-sided p-value `1 - Phi(z)`.
pub fn zvalue_pvalue<T: Real>(obs: &Observation<T>, mu0: T) -> Result<(T, T)> {
    if !(obs.sigma > T::zero()) {
        return Err(invalid(format!("unit {}: sigma must be positive", obs.id)));
    }
    let z = (obs.x - mu0) / obs.sigma;
    Ok((z, std_normal_sf(z)))
}

pub fn pvalues<T: Real>(observations: &[Observation<T>], mu0: T) -> Result<Vec<T>> {
    observations
        .iter()
        .map(|o| zvalue_pvalue(o, mu0).map(|(_, p)| p))
        .collect()
}

/// All metrics of one decision vector.
pub fn evaluate<T: Real>(
    decisions: &DecisionVector,
    truths: &TruthLabels<T>,
    observations: &[Observation<T>],
    mu0: T,
) -> Result<MetricsRecord<T>> {
    check_len("truth labels", decisions.len(), truths.len())?;
    let (n_false, n_selected) = false_and_selected(decisions, truths);
    Ok(MetricsRecord {
        fdp: from_usize::<T>(n_false) / from_usize(n_selected.max(1)),
        etp: n_selected - n_false,
        etp_star: etp_star(decisions, observations, mu0)?,
        n_selected,
        n_false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn obs(xs: &[f64]) -> Vec<Observation<f64>> {
        xs.iter()
            .enumerate()
            .map(|(i, &x)| Observation::new(i.to_string(), x, 1.0).unwrap())
            .collect()
    }

    fn dv(v: &[u8]) -> DecisionVector {
        DecisionVector::new(v.iter().map(|&b| b == 1).collect())
    }

    fn tl(v: &[u8]) -> TruthLabels<f64> {
        TruthLabels::from_labels(v.iter().map(|&b| b == 1).collect())
    }

    #[test]
    fn fdp_examples() {
        assert_eq!(fdp(&dv(&[1, 1, 0]), &tl(&[1, 0, 0])).unwrap(), 0.5);
        assert_eq!(fdp(&dv(&[0, 0, 0]), &tl(&[0, 1, 0])).unwrap(), 0.0);
        assert_eq!(fdp(&dv(&[1, 1, 1, 1]), &tl(&[1, 1, 0, 1])).unwrap(), 0.25);
    }

    #[test]
    fn fdp_length_mismatch() {
        assert!(matches!(
            fdp(&dv(&[1, 0]), &tl(&[1])),
            Err(crate::Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn etp_star_examples() {
        let o = obs(&[3.0, 5.0]);
        assert_eq!(etp_star(&dv(&[1, 0]), &o, 1.0).unwrap(), 2.0);
        assert_eq!(etp_star(&dv(&[1, 1]), &o, 1.0).unwrap(), 6.0);
        assert_eq!(etp_star(&dv(&[1]), &obs(&[0.0]), 1.0).unwrap(), -1.0);
        assert!(etp_star(&dv(&[1]), &o, 1.0).is_err());
    }

    #[test]
    fn pvalue_examples() {
        let (z, p) = zvalue_pvalue(&Observation::new("a", 0.0, 1.0).unwrap(), 0.0).unwrap();
        assert_eq!((z, p), (0.0, 0.5));
        let (_, p) = zvalue_pvalue(&Observation::new("b", 1.6449f64, 1.0).unwrap(), 0.0).unwrap();
        assert!((p - 0.05).abs() < 1e-5);
        let (z, p) = zvalue_pvalue(&Observation::new("c", 2.0f64, 2.0).unwrap(), 0.0).unwrap();
        assert_eq!(z, 1.0);
        assert!((p - 0.158_655_253_931_457_05).abs() < 1e-12);
    }

    #[test]
    fn zero_sigma_rejected() {
        assert!(Observation::new("a", 0.0, 0.0_f64).is_err());
        let bad = Observation { id: "a".into(), x: 0.0, sigma: -1.0 };
        assert!(zvalue_pvalue(&bad, 0.0).is_err());
    }

    #[test]
    fn metrics_record_is_consistent() {
        let o = obs(&[3.0, -1.0, 2.0]);
        let truths = TruthLabels::from_effects(vec![2.5, -1.0, 0.5], 1.0);
        let r = evaluate(&dv(&[1, 1, 1]), &truths, &o, 1.0).unwrap();
        assert_eq!(r.n_selected, 3);
        assert_eq!(r.etp, 1);
        assert_eq!(r.n_false, 2);
        assert!((r.fdp - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.etp_star, 2.0 - 2.0 + 1.0);
    }

    proptest! {
        #[test]
        fn fdp_is_permutation_invariant(
            pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..40),
            seed in any::<u64>(),
        ) {
            let (d, t): (Vec<bool>, Vec<bool>) = pairs.iter().copied().unzip();
            let base = fdp(&DecisionVector::new(d.clone()), &TruthLabels::<f64>::from_labels(t.clone())).unwrap();
            // deterministic shuffle
            let mut idx: Vec<usize> = (0..d.len()).collect();
            let mut s = seed;
            for i in (1..idx.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                idx.swap(i, (s >> 33) as usize % (i + 1));
            }
            let dp: Vec<bool> = idx.iter().map(|&i| d[i]).collect();
            let tp: Vec<bool> = idx.iter().map(|&i| t[i]).collect();
            let shuffled = fdp(&DecisionVector::new(dp), &TruthLabels::<f64>::from_labels(tp)).unwrap();
            prop_assert_eq!(base, shuffled);
        }

        #[test]
        fn etp_star_is_additive_over_disjoint_selections(
            xs in prop::collection::vec(-10.0..10.0f64, 1..30),
            labels in prop::collection::vec(0u8..3, 30),
            mu0 in -2.0..2.0f64,
        ) {
            let o = obs(&xs);
            let m = xs.len();
            let a = DecisionVector::new((0..m).map(|i| labels[i] == 1).collect());
            let b = DecisionVector::new((0..m).map(|i| labels[i] == 2).collect());
            let ab = DecisionVector::new((0..m).map(|i| labels[i] != 0).collect());
            let lhs = etp_star(&ab, &o, mu0).unwrap();
            let rhs = etp_star(&a, &o, mu0).unwrap() + etp_star(&b, &o, mu0).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }

        #[test]
        fn pvalue_strictly_decreasing_in_x(
            x in -6.0..6.0f64,
            dx in 1e-3..3.0f64,
            sigma in 0.5..5.0f64,
            mu0 in -1.0..1.0f64,
        ) {
            let lo = zvalue_pvalue(&Observation::new("a", x, sigma).unwrap(), mu0).unwrap().1;
            let hi = zvalue_pvalue(&Observation::new("b", x + dx, sigma).unwrap(), mu0).unwrap().1;
            prop_assert!(hi < lo);
            prop_assert!(lo > 0.0 && lo < 1.0);
        }
    }
}
