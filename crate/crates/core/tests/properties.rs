//! Property checks of the selection rules, r-values and simulation designs.

mod common;

use proptest::prelude::*;

use common::{group_of, priority_order};
use prisel::deconv::{fit_prior, DeconvConfig};
use prisel::model::pvalues;
use prisel::rvalue::{log_grid, rvalue_vary_alpha, rvalue_vary_mu0};
use prisel::selection::{score_units, select_bh, select_dd, ScoreTransform, StepKind};
use prisel::sim::{generate, SimDesign};
use prisel::{DecisionVector, Observation, ObservationF32};

fn observations(xs: &[f64]) -> Vec<Observation> {
    xs.iter().enumerate().map(|(i, &x)| Observation::new(i.to_string(), x, 1.0).unwrap()).collect()
}

fn instance(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max).prop_flat_map(|m| (prop::collection::vec(-4.0..4.0f64, m), prop::collection::vec(0.0..1.0f64, m)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn prioritized_rule_invariants((xs, cs) in instance(40), alpha in 0.02..0.3f64, mu0 in -1.0..1.0f64) {
        let units = score_units(&observations(&xs), &cs, mu0, alpha, &ScoreTransform::Tanh).unwrap();
        let r = select_dd(&units, alpha, mu0);
        let d = r.decisions.as_slice();

        for (i, &on) in d.iter().enumerate() {
            match group_of(xs[i], cs[i], mu0, alpha) {
                0 => prop_assert!(on),
                3 => prop_assert!(!on),
                _ => {}
            }
        }
        // capacity never negative once the first fill pass is done
        let first_fill = r.trace.iter().position(|s| s.kind == StepKind::Checkpoint).unwrap();
        for s in &r.trace[first_fill..] {
            prop_assert!(s.capacity.unwrap() >= -1e-9);
        }
        let spent: f64 = (0..xs.len()).filter(|&i| d[i]).map(|i| cs[i] - alpha).sum();
        prop_assert!(spent <= 1e-9);

        for g in [1, 2] {
            let order = priority_order(&xs, &cs, mu0, alpha, g);
            let taken = order.iter().take_while(|&&i| d[i]).count();
            prop_assert!(order[taken..].iter().all(|&i| !d[i]), "group {} is not a prefix", g);
        }
        prop_assert_eq!(r.replay(), r.decisions.clone());
    }

    #[test]
    fn refining_the_level_grid_never_raises_r(xs in prop::collection::vec(-2.0..5.0f64, 1..30)) {
        let obs = observations(&xs);
        let p = pvalues(&obs, 0.0).unwrap();
        let rule = |a: f64| select_bh(&p, a).decisions;
        let coarse = log_grid(1e-3, 0.5, 15).unwrap();
        let mut fine = coarse.clone();
        fine.extend(log_grid(1.3e-3, 0.45, 40).unwrap());
        fine.sort_by(f64::total_cmp);
        fine.dedup();
        let a = rvalue_vary_alpha(&obs, rule, &coarse).unwrap();
        let b = rvalue_vary_alpha(&obs, rule, &fine).unwrap();
        for (c, f) in a.entries.iter().zip(&b.entries) {
            if let Some(rc) = c.r {
                prop_assert!(f.r.unwrap() <= rc);
            }
        }
    }

    #[test]
    fn refining_the_cutoff_grid_never_lowers_r(xs in prop::collection::vec(-2.0..5.0f64, 1..30)) {
        let obs = observations(&xs);
        let rule = |mu0: f64| select_bh(&pvalues(&obs, mu0).unwrap(), 0.1).decisions;
        let coarse: Vec<f64> = (0..10).map(|k| 4.0 - 0.7 * k as f64).collect();
        let mut fine = coarse.clone();
        fine.extend((0..37).map(|k| 3.9 - 0.19 * k as f64));
        fine.sort_by(|a, b| b.total_cmp(a));
        fine.dedup();
        let a = rvalue_vary_mu0(&obs, rule, &coarse).unwrap();
        let b = rvalue_vary_mu0(&obs, rule, &fine).unwrap();
        for (c, f) in a.entries.iter().zip(&b.entries) {
            if let Some(rc) = c.r {
                prop_assert!(f.r.unwrap() >= rc);
            }
        }
    }
}

#[test]
fn designs_label_truth_from_effects() {
    for d in [SimDesign::two_component(2.0, 400), SimDesign::uniform(4.0, 400), SimDesign::correlated(2.0, 400)] {
        let d = d.reps(3).seed(5);
        let mut seeds: Vec<u64> = (0..3).map(|r| d.rep_seed(r)).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 3);
        for rep in 0..3 {
            let data = generate(&d, rep).unwrap();
            let mu = data.truths.mu_true.as_ref().unwrap();
            for (&th, &m) in data.truths.theta.iter().zip(mu) {
                assert_eq!(th, m > d.mu0);
            }
        }
    }
}

#[test]
fn single_precision_pipeline_agrees_with_double() {
    let data = generate(&SimDesign::uniform(2.0, 600).seed(13), 0).unwrap();
    let obs64 = &data.observations;
    let obs32: Vec<ObservationF32> =
        obs64.iter().map(|o| ObservationF32::new(o.id.clone(), o.x as f32, o.sigma as f32).unwrap()).collect();
    let config = DeconvConfig::default();
    let fit64 = fit_prior(obs64, &config).unwrap();
    let fit32 = fit_prior(&obs32, &config).unwrap();

    let c64: Vec<f64> = obs64.iter().map(|o| prisel::deconv::clfdr_from_fit(&fit64, o, 0.0)).collect();
    let c32: Vec<f32> = obs32.iter().map(|o| prisel::deconv::clfdr_from_fit(&fit32, o, 0.0)).collect();
    let worst = c64.iter().zip(&c32).map(|(a, &b)| (a - b as f64).abs()).fold(0.0, f64::max);
    assert!(worst < 0.02, "largest Clfdr gap {worst}");

    let d64 = select_dd(&score_units(obs64, &c64, 0.0, 0.1, &ScoreTransform::Tanh).unwrap(), 0.1, 0.0);
    let d32 = select_dd(&score_units(&obs32, &c32, 0.0f32, 0.1f32, &ScoreTransform::Tanh).unwrap(), 0.1f32, 0.0f32);
    let differ = d64.decisions.as_slice().iter().zip(d32.decisions.as_slice()).filter(|(a, b)| a != b).count();
    assert!(differ * 50 <= obs64.len(), "{differ} decisions differ");
}

#[test]
fn decisions_are_plain_indicator_vectors() {
    let d = DecisionVector::from_indices(4, [1, 3]);
    assert_eq!(d.as_slice(), &[false, true, false, true]);
}
