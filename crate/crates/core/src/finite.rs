//! Exact computations on finite transition graphs: policy evaluation by
//! trajectory following, zero-cost cycle detection, reachability of the
//! terminal set, and two optimal-cost oracles.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::error::{Error, Result};
use crate::ext::{ext_add, ExtCost};
use crate::model::{Policy, Problem, ValueFunction};

/// Default cap on the number of stationary policies [`oracle_policy_enum`]
/// is willing to enumerate.
pub const DEFAULT_ENUM_BUDGET: u64 = 1_000_000;

/// Cost of a stationary policy on a deterministic finite problem.
///
/// Each trajectory is followed until it hits the terminal set, an already
/// evaluated state, or closes a cycle. Cycles with positive total cost make
/// every state on or feeding into them infinite; zero-cost cycles contribute
/// nothing, so feeders get the cost accumulated up to cycle entry.
pub fn evaluate_policy(p: &Problem, mu: &Policy) -> Result<ValueFunction> {
    p.clone().validated()?;
    p.require_deterministic()?;
    mu.check_admissible(p)?;
    Ok(evaluate_unchecked(p, mu))
}

#[derive(Clone, Copy)]
enum Mark {
    New,
    OnPath(usize),
    Done,
}

pub(crate) fn evaluate_unchecked(p: &Problem, mu: &Policy) -> ValueFunction {
    let n = p.num_states();
    let step = |x: usize| -> (usize, ExtCost) {
        p.actions(x)[mu.get(x)]
            .deterministic()
            .expect("deterministic problem")
    };
    let mut value = vec![ExtCost::ZERO; n];
    let mut mark = vec![Mark::New; n];
    for x in p.terminal_states() {
        mark[x] = Mark::Done;
    }
    let mut path: Vec<usize> = Vec::new();
    for start in 0..n {
        if matches!(mark[start], Mark::Done) {
            continue;
        }
        path.clear();
        let mut cur = start;
        loop {
            match mark[cur] {
                Mark::Done => break,
                Mark::OnPath(pos) => {
                    let cycle_cost: ExtCost = path[pos..].iter().map(|&s| step(s).1).sum();
                    let v = if cycle_cost.is_zero() {
                        ExtCost::ZERO
                    } else {
                        ExtCost::INF
                    };
                    for &s in &path[pos..] {
                        value[s] = v;
                        mark[s] = Mark::Done;
                    }
                    path.truncate(pos);
                    break;
                }
                Mark::New => {
                    mark[cur] = Mark::OnPath(path.len());
                    path.push(cur);
                    cur = step(cur).0;
                }
            }
        }
        for &s in path.iter().rev() {
            let (next, cost) = step(s);
            value[s] = ext_add(cost, value[next]);
            mark[s] = Mark::Done;
        }
    }
    ValueFunction::new(value)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CycleReport {
    /// One witness cycle per strongly connected component of the zero-cost
    /// subgraph on non-terminal states that contains a cycle.
    pub zero_cost_cycles: Vec<Vec<usize>>,
    /// States lying on some zero-cost cycle.
    pub on_zero_cycle: Vec<bool>,
    pub has_positive_cycles_only: bool,
}

/// Finds zero-cost cycles outside the terminal set. With nonnegative arcs a
/// cycle is positive iff it has a positive arc, so an empty result means
/// every cycle of the transition graph has positive length.
pub fn positive_cycle_check(p: &Problem) -> CycleReport {
    let n = p.num_states();
    let mut g = DiGraph::<usize, ()>::with_capacity(n, 0);
    let nodes: Vec<_> = (0..n).map(|x| g.add_node(x)).collect();
    let mut self_loop = vec![false; n];
    for (x, _, y, c) in p.arcs() {
        if c.is_zero() && !p.is_terminal(x) && !p.is_terminal(y) {
            if x == y {
                self_loop[x] = true;
            }
            g.update_edge(nodes[x], nodes[y], ());
        }
    }
    let mut cycles = Vec::new();
    let mut on_cycle = vec![false; n];
    for comp in tarjan_scc(&g) {
        let members: Vec<usize> = comp.iter().map(|ix| g[*ix]).collect();
        let cyclic = members.len() > 1 || self_loop[members[0]];
        if !cyclic {
            continue;
        }
        for &m in &members {
            on_cycle[m] = true;
        }
        let mut in_comp = vec![false; n];
        for &m in &members {
            in_comp[m] = true;
        }
        let root = *members.iter().min().unwrap();
        cycles.push(witness_cycle(&g, &nodes, root, &in_comp));
    }
    cycles.sort();
    CycleReport {
        has_positive_cycles_only: cycles.is_empty(),
        zero_cost_cycles: cycles,
        on_zero_cycle: on_cycle,
    }
}

// Shortest cycle through `root` inside its component, by BFS.
fn witness_cycle(
    g: &DiGraph<usize, ()>,
    nodes: &[petgraph::graph::NodeIndex],
    root: usize,
    in_comp: &[bool],
) -> Vec<usize> {
    let n = in_comp.len();
    let mut parent = vec![usize::MAX; n];
    let mut queue = VecDeque::from([root]);
    let mut seen = vec![false; n];
    seen[root] = true;
    while let Some(x) = queue.pop_front() {
        for nb in g.neighbors(nodes[x]) {
            let y = g[nb];
            if !in_comp[y] {
                continue;
            }
            if y == root {
                let mut cyc = vec![x];
                let mut cur = x;
                while cur != root {
                    cur = parent[cur];
                    cyc.push(cur);
                }
                cyc.reverse();
                return cyc;
            }
            if !seen[y] {
                seen[y] = true;
                parent[y] = x;
                queue.push_back(y);
            }
        }
    }
    unreachable!("strongly connected component without a cycle through its root")
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReachabilityReport {
    pub can_terminate: Vec<bool>,
}

impl ReachabilityReport {
    pub fn all(&self) -> bool {
        self.can_terminate.iter().all(|c| *c)
    }

    pub fn cannot_terminate(&self) -> Vec<usize> {
        self.can_terminate
            .iter()
            .enumerate()
            .filter(|(_, c)| !**c)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Backward closure of the terminal set over the action graph.
pub fn terminating_reachability(p: &Problem) -> ReachabilityReport {
    let n = p.num_states();
    let mut preds = vec![Vec::new(); n];
    for (x, _, y, _) in p.arcs() {
        preds[y].push(x);
    }
    let mut can = vec![false; n];
    let mut queue: VecDeque<usize> = p.terminal_states().collect();
    for &t in &queue {
        can[t] = true;
    }
    while let Some(y) = queue.pop_front() {
        for &x in &preds[y] {
            if !can[x] {
                can[x] = true;
                queue.push_back(x);
            }
        }
    }
    ReachabilityReport { can_terminate: can }
}

/// Cheapest cost of a finite path into the terminal set (zero arcs allowed);
/// `∞` where no path exists. This is the optimal cost over terminating
/// policies.
pub fn shortest_terminating_cost(p: &Problem) -> Result<ValueFunction> {
    p.require_deterministic()?;
    let n = p.num_states();
    let mut preds: Vec<Vec<(usize, ExtCost)>> = vec![Vec::new(); n];
    for (x, _, y, c) in p.arcs() {
        if c.is_finite() && x != y {
            preds[y].push((x, c));
        }
    }
    let mut dist = vec![ExtCost::INF; n];
    let mut heap = BinaryHeap::new();
    for t in p.terminal_states() {
        dist[t] = ExtCost::ZERO;
        heap.push(Reverse((ExtCost::ZERO, t)));
    }
    while let Some(Reverse((d, y))) = heap.pop() {
        if d > dist[y] {
            continue;
        }
        for &(x, c) in &preds[y] {
            let cand = ext_add(c, d);
            if cand < dist[x] {
                dist[x] = cand;
                heap.push(Reverse((cand, x)));
            }
        }
    }
    Ok(ValueFunction::new(dist))
}

/// Optimal cost via shortest paths to the terminal set. Only valid when
/// there are no zero-cost cycles outside the terminal set.
pub fn oracle_dijkstra(p: &Problem) -> Result<ValueFunction> {
    p.clone().validated()?;
    p.require_deterministic()?;
    let cycles = positive_cycle_check(p);
    if !cycles.has_positive_cycles_only {
        let ids: Vec<&str> = cycles.zero_cost_cycles[0].iter().map(|&s| p.state_id(s)).collect();
        return Err(Error::OraclePrecondition(format!(
            "zero-cost cycle {ids:?}; shortest distance need not equal the optimal cost"
        )));
    }
    shortest_terminating_cost(p)
}

fn policy_count(p: &Problem) -> f64 {
    (0..p.num_states()).map(|x| p.actions(x).len() as f64).product()
}

/// Calls `f` on every stationary policy and its cost.
pub fn for_each_policy(
    p: &Problem,
    budget: u64,
    mut f: impl FnMut(&Policy, &ValueFunction),
) -> Result<()> {
    p.clone().validated()?;
    p.require_deterministic()?;
    let needed = policy_count(p);
    if needed > budget as f64 {
        return Err(Error::EnumerationBudget { needed, budget });
    }
    let n = p.num_states();
    let mut mu = Policy::first_action(p);
    loop {
        let j = evaluate_unchecked(p, &mu);
        f(&mu, &j);
        // odometer increment
        let mut x = 0;
        loop {
            if x == n {
                return Ok(());
            }
            let next = mu.get(x) + 1;
            if next < p.actions(x).len() {
                mu.set(x, next);
                break;
            }
            mu.set(x, 0);
            x += 1;
        }
    }
}

/// Optimal cost as the pointwise minimum of `J_μ` over all stationary
/// policies, which suffices for finite control sets.
pub fn oracle_policy_enum(p: &Problem, budget: u64) -> Result<ValueFunction> {
    let mut best = ValueFunction::new(vec![ExtCost::INF; p.num_states()]);
    for_each_policy(p, budget, |_, j| {
        for x in 0..j.len() {
            if j.get(x) < best.get(x) {
                best.set(x, j.get(x));
            }
        }
    })?;
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{example1, unit_chain};
    use crate::model::ProblemBuilder;
    use crate::random::{random_graph, GraphParams};

    #[test]
    fn example3_policy_cost() {
        let p = example1();
        let mu = Policy::by_label(&p, "move");
        let j = evaluate_policy(&p, &mu).unwrap();
        assert_eq!(j.values(), &[ExtCost::ZERO, ExtCost::ONE]);
    }

    #[test]
    fn zero_cycle_policy_is_free() {
        let p = example1();
        let j = evaluate_policy(&p, &Policy::by_label(&p, "stay")).unwrap();
        assert_eq!(j.get(1), ExtCost::ZERO);
    }

    // 0 <- 1 <- 2, 2 can also step to 3 which loops on itself at cost 2.
    fn trap_line() -> Problem {
        let mut b = ProblemBuilder::new();
        let s = b.add_states(["0", "1", "2", "3"]);
        b.set_terminal(s[0]);
        b.add_action(s[1], "left", s[0], 1.0);
        b.add_action(s[2], "left", s[1], 1.0);
        b.add_action(s[2], "right", s[3], 1.0);
        b.add_action(s[3], "loop", s[3], 2.0);
        b.build().unwrap()
    }

    #[test]
    fn positive_trap_is_infinite() {
        let p = trap_line();
        let mu = Policy::new(vec![0, 0, 1, 0]);
        let j = evaluate_policy(&p, &mu).unwrap();
        // truncated sums of stage costs along each trajectory
        let partial = |x0: usize, k: usize| -> f64 {
            let mut x = x0;
            let mut total = 0.0;
            for _ in 0..k {
                let (nx, c) = p.actions(x)[mu.get(x)].deterministic().unwrap();
                total += c.to_f64();
                x = nx;
            }
            total
        };
        assert!(partial(2, 10_000) > 10_000.0);
        assert!(partial(3, 10_000) > 10_000.0);
        assert_eq!(partial(1, 10_000), 1.0);
        assert_eq!(j.values(), &[ExtCost::ZERO, ExtCost::ONE, ExtCost::INF, ExtCost::INF]);
    }

    #[test]
    fn evaluation_satisfies_policy_equation_exactly() {
        for seed in 0..30 {
            let p = random_graph(seed, &GraphParams { zero_cost_prob: 0.3, ..Default::default() });
            let mut rng_mu = seed as usize;
            let choice: Vec<usize> = (0..p.num_states())
                .map(|x| {
                    rng_mu = rng_mu.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    (rng_mu >> 33) % p.actions(x).len()
                })
                .collect();
            let mu = Policy::new(choice);
            let j = evaluate_policy(&p, &mu).unwrap();
            for x in 0..p.num_states() {
                let (nx, c) = p.actions(x)[mu.get(x)].deterministic().unwrap();
                assert_eq!(j.get(x), ext_add(c, j.get(nx)), "seed {seed} state {x}");
            }
        }
    }

    #[test]
    fn rejects_inadmissible_policy() {
        let p = example1();
        assert!(matches!(
            evaluate_policy(&p, &Policy::new(vec![0, 5])),
            Err(Error::InadmissiblePolicy { .. })
        ));
    }

    #[test]
    fn example1_zero_cycle() {
        let r = positive_cycle_check(&example1());
        assert_eq!(r.zero_cost_cycles, vec![vec![1]]);
        assert!(!r.has_positive_cycles_only);
    }

    #[test]
    fn chain_has_no_zero_cycles() {
        let r = positive_cycle_check(&unit_chain(5));
        assert!(r.has_positive_cycles_only);
    }

    // Independent check: x lies on a zero cycle iff a DFS over zero arcs
    // from x returns to x.
    fn on_zero_cycle_dfs(p: &Problem, x: usize) -> bool {
        let n = p.num_states();
        let zero_next = |s: usize| -> Vec<usize> {
            p.arcs()
                .into_iter()
                .filter(|(a, _, b, c)| *a == s && c.is_zero() && !p.is_terminal(*a) && !p.is_terminal(*b))
                .map(|(_, _, b, _)| b)
                .collect()
        };
        let mut stack = zero_next(x);
        let mut seen = vec![false; n];
        while let Some(s) = stack.pop() {
            if s == x {
                return true;
            }
            if seen[s] {
                continue;
            }
            seen[s] = true;
            stack.extend(zero_next(s));
        }
        false
    }

    #[test]
    fn cycle_check_matches_dfs_on_random_graphs() {
        for seed in 0..40 {
            let p = random_graph(
                seed,
                &GraphParams {
                    states: 20,
                    zero_cost_prob: 0.35,
                    ..Default::default()
                },
            );
            let r = positive_cycle_check(&p);
            for x in 0..p.num_states() {
                assert_eq!(r.on_zero_cycle[x], on_zero_cycle_dfs(&p, x), "seed {seed} state {x}");
            }
            for cyc in &r.zero_cost_cycles {
                for (i, &s) in cyc.iter().enumerate() {
                    let t = cyc[(i + 1) % cyc.len()];
                    assert!(p
                        .arcs()
                        .iter()
                        .any(|(a, _, b, c)| *a == s && *b == t && c.is_zero()));
                }
            }
        }
    }

    #[test]
    fn reachability_examples() {
        let r = terminating_reachability(&example1());
        assert!(r.all());
        let mut b = ProblemBuilder::new();
        let s = b.add_states(["t", "a", "island"]);
        b.set_terminal(s[0]);
        b.add_action(s[1], "go", s[0], 1.0);
        b.add_action(s[2], "loop", s[2], 1.0);
        let r = terminating_reachability(&b.build().unwrap());
        assert_eq!(r.cannot_terminate(), vec![2]);
    }

    // Forward enumeration of all action paths up to |X| steps.
    fn reaches_by_enumeration(p: &Problem, x: usize, depth: usize) -> bool {
        if p.is_terminal(x) {
            return true;
        }
        if depth == 0 {
            return false;
        }
        p.actions(x)
            .iter()
            .any(|a| reaches_by_enumeration(p, a.deterministic().unwrap().0, depth - 1))
    }

    #[test]
    fn reachability_matches_path_enumeration() {
        for seed in 0..25 {
            let p = random_graph(
                seed,
                &GraphParams {
                    states: 8,
                    actions: 2,
                    ensure_reachable: false,
                    ..Default::default()
                },
            );
            let r = terminating_reachability(&p);
            for x in 0..p.num_states() {
                assert_eq!(r.can_terminate[x], reaches_by_enumeration(&p, x, p.num_states()));
            }
        }
    }

    #[test]
    fn dijkstra_chain_and_island() {
        let j = oracle_dijkstra(&unit_chain(3)).unwrap();
        assert_eq!(j.values(), &[ExtCost::ZERO, ExtCost::ONE, ExtCost::of(2.0)]);
        let mut b = ProblemBuilder::new();
        let s = b.add_states(["t", "island"]);
        b.set_terminal(s[0]);
        b.add_action(s[1], "loop", s[1], 1.0);
        let j = oracle_dijkstra(&b.build().unwrap()).unwrap();
        assert_eq!(j.get(1), ExtCost::INF);
    }

    #[test]
    fn dijkstra_refuses_zero_cycles() {
        assert!(matches!(oracle_dijkstra(&example1()), Err(Error::OraclePrecondition(_))));
    }

    #[test]
    fn dijkstra_agrees_with_enumeration() {
        for seed in 0..30 {
            let p = random_graph(seed, &GraphParams { states: 7, actions: 3, ..Default::default() });
            let a = oracle_dijkstra(&p).unwrap();
            let b = oracle_policy_enum(&p, DEFAULT_ENUM_BUDGET).unwrap();
            assert!(a.sup_distance(&b) <= 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn enumeration_example1() {
        let j = oracle_policy_enum(&example1(), DEFAULT_ENUM_BUDGET).unwrap();
        assert_eq!(j.values(), &[ExtCost::ZERO, ExtCost::ZERO]);
    }

    #[test]
    fn enumeration_single_policy() {
        let p = unit_chain(4);
        let j = oracle_policy_enum(&p, DEFAULT_ENUM_BUDGET).unwrap();
        assert_eq!(j, evaluate_policy(&p, &Policy::first_action(&p)).unwrap());
    }

    #[test]
    fn enumeration_is_a_lower_bound() {
        for seed in 0..10 {
            let p = random_graph(seed, &GraphParams { states: 6, actions: 2, zero_cost_prob: 0.3, ..Default::default() });
            let best = oracle_policy_enum(&p, DEFAULT_ENUM_BUDGET).unwrap();
            for_each_policy(&p, DEFAULT_ENUM_BUDGET, |_, j| assert!(best.le(j))).unwrap();
        }
    }

    #[test]
    fn enumeration_budget() {
        let p = random_graph(1, &GraphParams { states: 12, actions: 3, ..Default::default() });
        assert!(matches!(
            oracle_policy_enum(&p, 100),
            Err(Error::EnumerationBudget { .. })
        ));
    }
}
