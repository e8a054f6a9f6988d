//! Seeded random graph problems for property tests and the acceptance suite.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Problem, ProblemBuilder};

#[derive(Clone, Debug)]
pub struct GraphParams {
    pub states: usize,
    /// Each non-terminal state gets between 1 and this many controls.
    pub actions: usize,
    /// Probability that an arc outside the terminal set costs 0.
    pub zero_cost_prob: f64,
    /// Guarantee a path into the terminal set from every state.
    pub ensure_reachable: bool,
    /// Add one zero-cost cycle through 1 to 3 non-terminal states.
    pub inject_zero_cycle: bool,
}

impl Default for GraphParams {
    fn default() -> Self {
        GraphParams {
            states: 10,
            actions: 3,
            zero_cost_prob: 0.0,
            ensure_reachable: true,
            inject_zero_cycle: false,
        }
    }
}

/// Positive costs are multiples of 1/16 in `[1/16, 10]`, so path sums are
/// exact in floating point.
fn arc_cost(rng: &mut ChaCha8Rng, zero_prob: f64) -> f64 {
    if zero_prob > 0.0 && rng.gen_bool(zero_prob) {
        0.0
    } else {
        rng.gen_range(1..=160) as f64 / 16.0
    }
}

/// A deterministic problem with one terminal state. State and control
/// orderings are shuffled so no structure leaks into indices.
pub fn random_graph(seed: u64, params: &GraphParams) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.states.max(2);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut b = ProblemBuilder::new();
    for i in 0..n {
        b.add_state(format!("s{i}"));
    }
    b.set_terminal(order[0]);
    let mut extra: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    if params.inject_zero_cycle && n > 2 {
        let len = rng.gen_range(1..=3.min(n - 1));
        let mut pool: Vec<usize> = order[1..].to_vec();
        pool.shuffle(&mut rng);
        let cyc = &pool[..len];
        for i in 0..len {
            extra[cyc[i]].push((cyc[(i + 1) % len], 0.0));
        }
    }
    for rank in 1..n {
        let x = order[rank];
        let k = rng.gen_range(1..=params.actions.max(1));
        let mut arcs: Vec<(usize, f64)> = Vec::with_capacity(k + 1);
        if params.ensure_reachable {
            let target = order[rng.gen_range(0..rank)];
            arcs.push((target, arc_cost(&mut rng, params.zero_cost_prob)));
        }
        while arcs.len() < k {
            let target = rng.gen_range(0..n);
            arcs.push((target, arc_cost(&mut rng, params.zero_cost_prob)));
        }
        arcs.extend(extra[x].iter().copied());
        arcs.shuffle(&mut rng);
        for (a, (target, cost)) in arcs.into_iter().enumerate() {
            b.add_action(x, format!("a{a}"), target, cost);
        }
    }
    b.build().expect("random graphs are valid by construction")
}

/// Instance for the monotone-convergence suites: between 2 and `max_states`
/// states, up to `max_actions` controls, positive costs, terminal set
/// reachable from everywhere.
pub fn random_positive_instance(seed: u64, max_states: usize, max_actions: usize) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_5eed);
    let states = rng.gen_range(2..=max_states);
    random_graph(
        seed,
        &GraphParams {
            states,
            actions: max_actions,
            ..Default::default()
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite::{positive_cycle_check, terminating_reachability};

    #[test]
    fn reproducible() {
        let p = GraphParams::default();
        assert_eq!(random_graph(7, &p), random_graph(7, &p));
        assert_ne!(random_graph(7, &p), random_graph(8, &p));
    }

    #[test]
    fn positive_instances_meet_their_contract() {
        for seed in 0..50 {
            let p = random_positive_instance(seed, 12, 3);
            assert!(p.num_states() <= 12);
            assert!((0..p.num_states()).all(|x| p.actions(x).len() <= 3));
            assert!(terminating_reachability(&p).all());
            assert!(positive_cycle_check(&p).has_positive_cycles_only);
        }
    }

    #[test]
    fn injected_cycle_is_found() {
        for seed in 0..20 {
            let p = random_graph(
                seed,
                &GraphParams {
                    states: 6,
                    inject_zero_cycle: true,
                    ..Default::default()
                },
            );
            assert!(!positive_cycle_check(&p).has_positive_cycles_only);
        }
    }
}
