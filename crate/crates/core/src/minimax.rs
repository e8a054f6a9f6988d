//! Min over controls, max over disturbances: the Bellman operator, guaranteed
//! minimum-time reachability and target tubes.

use crate::error::Result;
use crate::ext::ExtCost;
use crate::model::{Policy, Problem, ValueFunction};
use crate::vi::{bellman_operator, run_vi, ViConfig, ViResult};

/// `(TJ)(x) = min_u max_w [g(x,u,w) + J(f(x,u,w))]` with a greedy policy.
pub fn minimax_bellman(p: &Problem, j: &ValueFunction) -> Result<(ValueFunction, Policy)> {
    p.require_minimax()?;
    j.check_domain(p)?;
    Ok(bellman_operator(p, j))
}

/// Copy of `p` with unit cost outside the terminal set and zero inside.
pub fn min_time_problem(p: &Problem) -> Problem {
    p.with_costs(|x, _, _| if p.is_terminal(x) { ExtCost::ZERO } else { ExtCost::ONE })
}

/// Minimax VI on the unit-cost version of `p` from 0 on the terminal set
/// and `∞` elsewhere. The limit is the number of steps in which the
/// terminal set can be reached against every disturbance sequence.
pub fn min_time_reachability(p: &Problem) -> Result<ViResult> {
    p.require_minimax()?;
    let q = min_time_problem(p).validated()?;
    let cfg = ViConfig::default()
        .snapshots()
        .max_iters(q.num_states() + 2);
    run_vi(&q, &ValueFunction::inf_outside(&q), &cfg)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TubeResult {
    /// `X̂_0 ⊇ X̂_1 ⊇ …`, ending with the first repeated set.
    pub set_sequence: Vec<Vec<bool>>,
    pub fixed_set: Vec<bool>,
    pub iterations_to_fix: usize,
}

/// States with a control keeping every disturbance outcome inside `set`.
fn guaranteed_pre(p: &Problem, set: &[bool]) -> Vec<bool> {
    (0..p.num_states())
        .map(|x| {
            set[x]
                && p.actions(x).iter().any(|a| {
                    a.outcomes
                        .iter()
                        .all(|o| o.next.support().iter().all(|&y| set[y]))
                })
        })
        .collect()
}

/// Iterates `X̂_{k+1} = {x ∈ X̂_k : ∃u ∀w f(x,u,w) ∈ X̂_k}` from `hat` until
/// the set repeats.
pub fn target_tube(p: &Problem, hat: &[bool]) -> Result<TubeResult> {
    p.require_minimax()?;
    if hat.len() != p.num_states() {
        return Err(crate::error::Error::DomainMismatch {
            expected: p.num_states(),
            got: hat.len(),
        });
    }
    let mut seq = vec![hat.to_vec()];
    loop {
        let cur = seq.last().unwrap();
        let next = guaranteed_pre(p, cur);
        if &next == cur {
            break;
        }
        seq.push(next);
    }
    Ok(TubeResult {
        fixed_set: seq.last().unwrap().clone(),
        iterations_to_fix: seq.len(),
        set_sequence: seq,
    })
}

/// Zero set of the tube-cost value after `|X| + 1` minimax sweeps. The cost
/// is 0 inside `hat` and 1 outside; the seed is 0 on `hat` and `∞`
/// elsewhere. The zero set after `k` sweeps is exactly `X̂_k`.
pub fn tube_cost_zero_set(p: &Problem, hat: &[bool]) -> Result<Vec<bool>> {
    p.require_minimax()?;
    let q = p.with_costs(|x, _, _| if hat[x] { ExtCost::ZERO } else { ExtCost::ONE });
    let mut j = ValueFunction::new(
        hat.iter()
            .map(|h| if *h { ExtCost::ZERO } else { ExtCost::INF })
            .collect(),
    );
    for _ in 0..=p.num_states() {
        j = bellman_operator(&q, &j).0;
    }
    Ok(j.values().iter().map(|v| v.is_zero()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::fixtures::{adversarial_line, gridworld, tube_fixture};
    use crate::model::ProblemBuilder;
    use crate::vi::bellman_operator;

    fn game_value(p: &Problem, x: usize, horizon: usize) -> ExtCost {
        if p.is_terminal(x) {
            return ExtCost::ZERO;
        }
        if horizon == 0 {
            return ExtCost::INF;
        }
        p.actions(x)
            .iter()
            .map(|a| {
                a.outcomes
                    .iter()
                    .map(|o| ExtCost::ONE + game_value(p, o.next.as_state().unwrap(), horizon - 1))
                    .max()
                    .unwrap()
            })
            .min()
            .unwrap()
    }

    #[test]
    fn single_disturbance_matches_deterministic_operator() {
        let p = gridworld(4, 3, &[(1, 1)], (3, 2));
        let n = p.num_states();
        let mut b = ProblemBuilder::new().with_disturbances(["w0"]);
        for x in 0..n {
            b.add_state(p.state_id(x));
        }
        for x in p.terminal_states() {
            b.set_terminal(x);
        }
        for x in 0..n {
            if p.is_terminal(x) {
                continue;
            }
            for a in p.actions(x) {
                let (y, c) = a.deterministic().unwrap();
                b.add_minimax_action(x, a.label.clone(), &[(y, c.to_f64())]);
            }
        }
        let mm = b.build().unwrap();
        assert_eq!(p.with_single_disturbance("w0").unwrap(), mm);
        let j = ValueFunction::new((0..n).map(|x| ExtCost::of((x * 7 % 5) as f64)).collect());
        assert_eq!(minimax_bellman(&mm, &j).unwrap(), bellman_operator(&p, &j));
        assert!(matches!(minimax_bellman(&p, &j), Err(Error::MissingDisturbances)));
    }

    #[test]
    fn adversarial_line_operator_matches_brute_force() {
        let p = adversarial_line();
        let j = ValueFunction::from_f64(&[0.0, 2.5, 1.0, 4.0]).unwrap();
        let (tj, _) = minimax_bellman(&p, &j).unwrap();
        for x in 0..4 {
            let mut best = ExtCost::INF;
            for a in p.actions(x) {
                let mut worst = ExtCost::ZERO;
                for o in &a.outcomes {
                    worst = worst.max(o.cost + j.get(o.next.as_state().unwrap()));
                }
                best = best.min(worst);
            }
            assert_eq!(tj.get(x), best);
        }
    }

    #[test]
    fn one_sweep_from_inf_outside_is_one_step_guarantee() {
        let p = adversarial_line();
        let (tj, _) = minimax_bellman(&p, &ValueFunction::inf_outside(&p)).unwrap();
        let finite: Vec<bool> = tj.values().iter().map(|v| v.is_finite()).collect();
        assert_eq!(finite, vec![true, true, false, false]);
    }

    #[test]
    fn min_time_on_adversarial_line() {
        let p = adversarial_line();
        let r = min_time_reachability(&p).unwrap();
        assert!(r.converged);
        for x in 0..4 {
            assert_eq!(r.final_value.get(x), game_value(&p, x, 4));
            assert_eq!(r.final_value.get(x), ExtCost::of(x as f64));
        }
    }

    #[test]
    fn adversary_can_force_avoidance() {
        let mut b = ProblemBuilder::new().with_disturbances(["calm", "gust"]);
        let s = b.add_states(["goal", "near", "far"]);
        b.set_terminal(s[0]);
        b.add_minimax_action(s[1], "go", &[(s[0], 1.0), (s[2], 1.0)]);
        b.add_minimax_action(s[2], "go", &[(s[1], 1.0), (s[2], 1.0)]);
        let p = b.build().unwrap();
        let r = min_time_reachability(&p).unwrap();
        assert_eq!(r.final_value.get(1), ExtCost::INF);
        assert_eq!(r.final_value.get(2), ExtCost::INF);
    }

    #[test]
    fn min_time_without_disturbance_is_bfs() {
        let g = gridworld(4, 4, &[(1, 1), (2, 2)], (0, 3));
        let n = g.num_states();
        let mut b = ProblemBuilder::new().with_disturbances(["none"]);
        for x in 0..n {
            b.add_state(g.state_id(x));
        }
        for x in g.terminal_states() {
            b.set_terminal(x);
        }
        for x in (0..n).filter(|x| !g.is_terminal(*x)) {
            for a in g.actions(x) {
                b.add_minimax_action(x, a.label.clone(), &[(a.deterministic().unwrap().0, 5.0)]);
            }
        }
        let mm = b.build().unwrap();
        let r = min_time_reachability(&mm).unwrap();
        assert_eq!(r.final_value, crate::finite::oracle_dijkstra(&g).unwrap());
    }

    #[test]
    fn min_time_iterates_are_backward_guarantee_sets() {
        let p = adversarial_line();
        let r = min_time_reachability(&p).unwrap();
        let mut reach = p.terminal_mask().to_vec();
        for snap in r.trace.snapshots() {
            reach = (0..4)
                .map(|x| {
                    reach[x]
                        || p.actions(x)
                            .iter()
                            .any(|a| a.outcomes.iter().all(|o| reach[o.next.as_state().unwrap()]))
                })
                .collect();
            let finite: Vec<bool> = snap.values().iter().map(|v| v.is_finite()).collect();
            assert_eq!(finite, reach);
            assert!(snap.values().iter().all(|v| v.finite().map_or(true, |f| f.fract() == 0.0)));
        }
    }

    fn survives(p: &Problem, hat: &[bool], x: usize, h: usize) -> bool {
        hat[x]
            && (h == 0
                || p.actions(x).iter().any(|a| {
                    a.outcomes
                        .iter()
                        .all(|o| survives(p, hat, o.next.as_state().unwrap(), h - 1))
                }))
    }

    #[test]
    fn tube_fixture_sequence_and_oracle() {
        let (p, hat) = tube_fixture();
        let r = target_tube(&p, &hat).unwrap();
        assert_eq!(
            r.set_sequence,
            vec![
                vec![true, true, true, true, false],
                vec![true, true, true, false, false],
                vec![true, true, false, false, false],
            ]
        );
        assert_eq!(r.iterations_to_fix, 3);
        let n = p.num_states();
        let oracle: Vec<bool> = (0..n).map(|x| survives(&p, &hat, x, n)).collect();
        assert_eq!(r.fixed_set, oracle);
        assert_eq!(tube_cost_zero_set(&p, &hat).unwrap(), r.fixed_set);
        assert_eq!(guaranteed_pre(&p, &r.fixed_set), r.fixed_set);
    }

    #[test]
    fn invariant_set_is_kept() {
        let (p, _) = tube_fixture();
        let hat = vec![true, true, false, false, false];
        let r = target_tube(&p, &hat).unwrap();
        assert_eq!(r.fixed_set, hat);
        assert_eq!(r.set_sequence.len(), 1);
    }
}
