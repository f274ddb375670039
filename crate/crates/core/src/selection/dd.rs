use super::score::{ordered_groups, Group, ScoredUnit};
use super::{SelectionResult, StepKind, TraceAction, TraceStep};
use crate::model::DecisionVector;
use crate::scalar::Real;

struct Run<'a, T> {
    units: &'a [ScoredUnit<T>],
    alpha: T,
    mu0: T,
    sel: Vec<bool>,
    /// `-sum (clfdr - alpha)` over selected group 0 and group 2 units.
    base: T,
    /// `sum (clfdr - alpha)` over selected group 1 units.
    spent: T,
    gain: T,
    trace: Vec<TraceStep<T>>,
}

impl<T: Real> Run<'_, T> {
    fn capacity(&self) -> T {
        self.base - self.spent
    }

    fn log(&mut self, kind: StepKind, action: TraceAction, unit: Option<usize>) {
        self.trace.push(TraceStep {
            kind,
            action,
            unit,
            etp_star: Some(self.gain),
            capacity: Some(self.capacity()),
        });
    }

    fn add(&mut self, p: usize, kind: StepKind) {
        let u = &self.units[p];
        let cost = u.cost(self.alpha);
        if u.group == Group::G1 {
            self.spent += cost;
        } else {
            self.base -= cost;
        }
        self.gain += u.gain(self.mu0);
        self.sel[p] = true;
        self.log(kind, TraceAction::Add, Some(p));
    }

    /// Take the longest run of the remaining group 1 queue that fits.
    fn fill(&mut self, g1: &[usize], next: &mut usize) {
        while *next < g1.len() {
            let p = g1[*next];
            if self.spent + self.units[p].cost(self.alpha) <= self.base {
                self.add(p, StepKind::Fill);
                *next += 1;
            } else {
                break;
            }
        }
        self.log(StepKind::Checkpoint, TraceAction::Mark, None);
    }
}

/// Data-driven prioritized selection.
///
/// Every group 0 unit is taken. Group 1 units are bought in descending score
/// order while capacity lasts; group 2 units are traded in one at a time in
/// ascending score order to free more capacity. The procedure stops when the
/// realized `sum (x - mu0)` drops (undoing that last trade) or when either
/// queue runs out.
pub fn select_dd<T: Real>(units: &[ScoredUnit<T>], alpha: T, mu0: T) -> SelectionResult<T> {
    let m = units.len();
    let (g1, g2) = ordered_groups(units);

    let mut run = Run {
        units,
        alpha,
        mu0,
        sel: vec![false; m],
        base: T::zero(),
        spent: T::zero(),
        gain: T::zero(),
        trace: Vec::new(),
    };
    for p in (0..m).filter(|&p| units[p].group == Group::G0) {
        run.add(p, StepKind::Seed);
    }

    let mut g1_next = 0;
    let mut g2_next = 0;
    run.fill(&g1, &mut g1_next);
    let mut last = run.gain;

    while g1_next < g1.len() && g2_next < g2.len() {
        let saved = (run.base, run.spent, run.gain, g1_next);
        let first_added = run.trace.len();
        run.add(g2[g2_next], StepKind::Invest);
        g2_next += 1;
        run.fill(&g1, &mut g1_next);
        if run.gain < last {
            let added: Vec<usize> = run.trace[first_added..]
                .iter()
                .filter(|s| s.action == TraceAction::Add)
                .filter_map(|s| s.unit)
                .collect();
            (run.base, run.spent, run.gain, g1_next) = saved;
            for p in added {
                run.sel[p] = false;
                run.log(StepKind::Rollback, TraceAction::Remove, Some(p));
            }
            // rebuilt set is group 0 plus the earlier trades; refill group 1
            run.fill(&g1, &mut g1_next);
            break;
        }
        last = run.gain;
    }

    let capacity = run.capacity();
    SelectionResult {
        decisions: DecisionVector::new(run.sel),
        etp_star: Some(run.gain),
        capacity: Some(capacity),
        trace: run.trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::score::{classify_group, score};

    pub(crate) fn unit(index: usize, x: f64, clfdr: f64) -> ScoredUnit<f64> {
        let (t, s) = score(x, clfdr, 0.0, 0.1);
        ScoredUnit {
            index,
            id: format!("u{index}"),
            x,
            sigma: 1.0,
            clfdr,
            t,
            s,
            group: classify_group(x, clfdr, 0.0, 0.1),
        }
    }

    #[test]
    fn hand_traced_instance() {
        let units = vec![unit(0, 2.0, 0.05), unit(1, 3.0, 0.2), unit(2, 0.5, 0.12), unit(3, -1.0, 0.02)];
        let groups: Vec<Group> = units.iter().map(|u| u.group).collect();
        assert_eq!(groups, vec![Group::G0, Group::G1, Group::G1, Group::G2]);
        let r = select_dd(&units, 0.1, 0.0);
        assert_eq!(r.decisions.as_slice(), &[true, true, true, true]);
        assert!((r.etp_star.unwrap() - 4.5).abs() < 1e-12);
        assert!((r.capacity.unwrap() - 0.01).abs() < 1e-12);
        assert_eq!(r.replay(), r.decisions);
        let checkpoints: Vec<f64> = r
            .trace
            .iter()
            .filter(|s| s.kind == StepKind::Checkpoint)
            .map(|s| s.etp_star.unwrap())
            .collect();
        assert_eq!(checkpoints.len(), 2);
        assert!((checkpoints[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn group_three_only_is_empty() {
        let units = vec![unit(0, -1.0, 0.5), unit(1, -0.2, 0.9)];
        let r = select_dd(&units, 0.1, 0.0);
        assert_eq!(r.n_selected(), 0);
        assert_eq!(r.etp_star, Some(0.0));
    }

    #[test]
    fn group_zero_only_all_selected() {
        let units = vec![unit(0, 1.0, 0.01), unit(1, 0.2, 0.0), unit(2, 3.0, 0.09)];
        let r = select_dd(&units, 0.1, 0.0);
        assert_eq!(r.n_selected(), 3);
    }

    #[test]
    fn empty_input() {
        let r = select_dd::<f64>(&[], 0.1, 0.0);
        assert!(r.decisions.is_empty());
    }

    #[test]
    fn declining_trade_is_undone() {
        // trading in the group 2 unit costs 5 and only buys a unit worth 0.5
        let units = vec![unit(0, 1.0, 0.05), unit(1, 0.5, 0.2), unit(2, -5.0, 0.0)];
        let r = select_dd(&units, 0.1, 0.0);
        assert_eq!(r.decisions.as_slice(), &[true, false, false]);
        assert_eq!(r.etp_star, Some(1.0));
        assert!(r.trace.iter().any(|s| s.kind == StepKind::Rollback));
        assert_eq!(r.replay(), r.decisions);
    }

    #[test]
    fn early_stop_can_miss_a_better_set() {
        // With only the first trade the total drops, so the procedure stops,
        // although taking both trades would buy the valuable group 1 unit.
        let units = vec![
            unit(0, 4.647, 0.182),
            unit(1, -2.017, 0.552),
            unit(2, -0.044, 0.097),
            unit(3, -3.236, 0.013),
            unit(4, -2.59, 0.573),
        ];
        let r = select_dd(&units, 0.1, 0.0);
        assert_eq!(r.n_selected(), 0);
        // units 2 and 3 free 0.003 + 0.087 = 0.09 >= 0.082, worth 4.647 - 3.28
        let both = 4.647 - 0.044 - 3.236;
        assert!(both > 1.36);
    }
}
