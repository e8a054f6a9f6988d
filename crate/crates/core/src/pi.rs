//! Exact policy iteration and optimistic (truncated-evaluation) policy
//! iteration.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ext::ExtCost;
use crate::finite::evaluate_unchecked;
use crate::model::{Policy, Problem, ValueFunction};
use crate::vi::{bellman_operator, SolveTrace, TraceRow};

/// Relative slack for the monotone-descent assertions. Costs that are exact
/// in floating point never need it.
pub const MONOTONE_SLACK: f64 = 1e-12;

/// How to pick among controls that tie in the policy-improvement minimum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TieBreak {
    /// Retain the current control whenever it attains the minimum.
    #[default]
    KeepCurrent,
    /// Smallest control index attaining the minimum.
    LeastIndex,
}

impl FromStr for TieBreak {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "keep" | "keep_current" => Ok(TieBreak::KeepCurrent),
            "least" | "least_index" => Ok(TieBreak::LeastIndex),
            _ => Err(Error::Unknown {
                kind: "tie-break",
                name: s.into(),
                known: "keep, least".into(),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    PolicyRepeat,
    ValueConverged,
    MaxIters,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::PolicyRepeat => "policy_repeat",
            StopReason::ValueConverged => "value_converged",
            StopReason::MaxIters => "max_iters",
        })
    }
}

#[derive(Clone, Debug)]
pub struct PiResult {
    pub policy_sequence: Vec<Policy>,
    /// `J_{μ^k}` for exact PI, the iterates `J_k` for optimistic PI.
    pub value_sequence: Vec<ValueFunction>,
    pub stopped_reason: StopReason,
    pub final_policy: Policy,
    pub final_value: ValueFunction,
    pub trace: SolveTrace,
}

impl PiResult {
    pub fn iterations(&self) -> usize {
        self.value_sequence.len() - 1
    }
}

/// Greedy policy with respect to `j`, resolving ties per `tie`.
pub fn improve_policy(p: &Problem, j: &ValueFunction, current: &Policy, tie: TieBreak) -> Policy {
    let mut next = current.clone();
    for x in 0..p.num_states() {
        let mut best = ExtCost::INF;
        let mut arg = 0;
        for a in 0..p.actions(x).len() {
            let v = p.action_value(x, a, j);
            if v < best {
                best = v;
                arg = a;
            }
        }
        let keep = tie == TieBreak::KeepCurrent && p.action_value(x, current.get(x), j) == best;
        next.set(x, if keep { current.get(x) } else { arg });
    }
    next
}

fn first_breach(
    upper: &ValueFunction,
    lower: &ValueFunction,
    iteration: usize,
    p: &Problem,
    what: &str,
) -> Result<()> {
    if let Some(x) = lower.le_within(upper, MONOTONE_SLACK) {
        return Err(Error::MonotonicityBreach {
            iteration,
            state: p.state_id(x).to_string(),
            detail: format!("{what}: {} > {}", lower.get(x), upper.get(x)),
        });
    }
    Ok(())
}

fn row(iter: usize, prev: &ValueFunction, cur: &ValueFunction, residual: f64) -> TraceRow {
    TraceRow {
        iter,
        sup_change: prev.finite_change(cur).0,
        residual,
        num_infinite: cur.num_infinite(),
        snapshot: Some(cur.clone()),
    }
}

/// Alternates exact policy evaluation and improvement until the policy
/// repeats.
///
/// Every round checks `J_{μ^k} ≥ T J_{μ^k} ≥ J_{μ^{k+1}}` pointwise; a breach
/// is returned as an error since it can only come from a defect.
pub fn run_pi(p: &Problem, mu0: &Policy, tie: TieBreak, max_iters: usize) -> Result<PiResult> {
    p.clone().validated()?;
    p.require_deterministic()?;
    mu0.check_admissible(p)?;
    let mut mu = mu0.clone();
    let mut j = evaluate_unchecked(p, &mu);
    let mut policies = vec![mu.clone()];
    let mut values = vec![j.clone()];
    let mut trace = SolveTrace::new(p);
    let mut reason = StopReason::MaxIters;
    for k in 0..max_iters {
        let (tj, _) = bellman_operator(p, &j);
        let next = improve_policy(p, &j, &mu, tie);
        let jn = evaluate_unchecked(p, &next);
        first_breach(&j, &tj, k, p, "J_mu < T J_mu")?;
        first_breach(&tj, &jn, k, p, "T J_mu < J_next")?;
        let res = j.sup_distance(&tj);
        if let Some(last) = trace.rows.last_mut() {
            last.residual = res;
        }
        if next == mu {
            reason = StopReason::PolicyRepeat;
            break;
        }
        trace.rows.push(row(k + 1, &j, &jn, f64::NAN));
        mu = next;
        j = jn;
        policies.push(mu.clone());
        values.push(j.clone());
    }
    if let Some(last) = trace.rows.last_mut() {
        if last.residual.is_nan() {
            let (tj, _) = bellman_operator(p, &j);
            last.residual = j.sup_distance(&tj);
        }
    }
    Ok(PiResult {
        policy_sequence: policies,
        value_sequence: values,
        stopped_reason: reason,
        final_policy: mu,
        final_value: j,
        trace,
    })
}

/// Whether `j0` is admissible as an optimistic PI start: zero on the
/// terminal set and `j0 ≥ T j0` everywhere.
pub fn check_opi_seed(p: &Problem, j0: &ValueFunction) -> bool {
    opi_seed_violation(p, j0).is_none()
}

fn opi_seed_violation(p: &Problem, j0: &ValueFunction) -> Option<usize> {
    if let Some(x) = p.terminal_states().find(|&x| !j0.get(x).is_zero()) {
        return Some(x);
    }
    let (tj, _) = bellman_operator(p, j0);
    tj.le_within(j0, 0.0)
}

/// Number of policy-restricted sweeps per round. The last entry repeats.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MSchedule {
    entries: Vec<usize>,
}

impl MSchedule {
    pub fn new(entries: Vec<usize>) -> Result<Self> {
        if entries.is_empty() || entries.contains(&0) {
            return Err(Error::InvalidArgument(
                "sweep schedule must be a nonempty list of positive counts".into(),
            ));
        }
        Ok(MSchedule { entries })
    }

    pub fn constant(m: usize) -> Result<Self> {
        Self::new(vec![m])
    }

    pub fn get(&self, round: usize) -> usize {
        self.entries[round.min(self.entries.len() - 1)]
    }
}

impl FromStr for MSchedule {
    type Err = Error;

    /// `"3"` or a comma-separated list such as `"1,2,5"`.
    fn from_str(s: &str) -> Result<Self> {
        let entries = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidArgument(format!("bad sweep count {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        MSchedule::new(entries)
    }
}

fn sweep(p: &Problem, mu: &Policy, j: &ValueFunction) -> ValueFunction {
    ValueFunction::new((0..p.num_states()).map(|x| p.action_value(x, mu.get(x), j)).collect())
}

/// Optimistic PI: each round takes the greedy policy for `J_k` and applies
/// `m_k` sweeps of that policy's value update.
///
/// With `m_k ≡ 1` the iterates coincide with value iteration. The iterates
/// are asserted to be pointwise nonincreasing.
pub fn run_opi(
    p: &Problem,
    j0: &ValueFunction,
    schedule: &MSchedule,
    tol: f64,
    max_iters: usize,
) -> Result<PiResult> {
    j0.check_domain(p)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if let Some(x) = opi_seed_violation(p, j0) {
        return Err(Error::OpiSeed {
            state: p.state_id(x).to_string(),
        });
    }
    let mut j = j0.clone();
    let mut policies = Vec::new();
    let mut values = vec![j.clone()];
    let mut trace = SolveTrace::new(p);
    let mut reason = StopReason::MaxIters;
    let mut mu = bellman_operator(p, &j).1;
    for k in 0..max_iters {
        let mut jn = sweep(p, &mu, &j);
        for _ in 1..schedule.get(k) {
            jn = sweep(p, &mu, &jn);
        }
        first_breach(&j, &jn, k, p, "J_{k+1} > J_k")?;
        let (change, pattern_changed) = j.finite_change(&jn);
        policies.push(mu.clone());
        let (tjn, mun) = bellman_operator(p, &jn);
        trace.rows.push(row(k + 1, &j, &jn, jn.sup_distance(&tjn)));
        j = jn;
        values.push(j.clone());
        mu = mun;
        if change <= tol && !pattern_changed {
            reason = StopReason::ValueConverged;
            break;
        }
    }
    Ok(PiResult {
        policy_sequence: policies,
        final_policy: mu,
        value_sequence: values,
        stopped_reason: reason,
        final_value: j,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite::{evaluate_policy, oracle_dijkstra};
    use crate::fixtures::{example1, gridworld, unit_chain};
    use crate::random::{random_graph, GraphParams};
    use crate::vi::{run_vi, ViConfig};

    #[test]
    fn example3_improvement_keeps_suboptimal_move() {
        let p = example1();
        let mu = Policy::by_label(&p, "move");
        let j = evaluate_policy(&p, &mu).unwrap();
        assert_eq!(improve_policy(&p, &j, &mu, TieBreak::KeepCurrent), mu);
        let least = improve_policy(&p, &j, &mu, TieBreak::LeastIndex);
        assert_eq!(least.label(&p, 1), "stay");
    }

    #[test]
    fn single_action_problem_has_one_policy() {
        let p = unit_chain(4);
        let mu = Policy::first_action(&p);
        let j = evaluate_policy(&p, &mu).unwrap();
        assert_eq!(improve_policy(&p, &j, &mu, TieBreak::LeastIndex), mu);
    }

    #[test]
    fn example3_pi_stalls_with_keep_current() {
        let p = example1();
        let r = run_pi(&p, &Policy::by_label(&p, "move"), TieBreak::KeepCurrent, 100).unwrap();
        assert_eq!(r.stopped_reason, StopReason::PolicyRepeat);
        assert_eq!(r.final_value.get(1), ExtCost::ONE);
        let r = run_pi(&p, &Policy::by_label(&p, "move"), TieBreak::LeastIndex, 100).unwrap();
        assert_eq!(r.final_value.get(1), ExtCost::ZERO);
    }

    #[test]
    fn optimal_start_repeats_immediately() {
        let p = example1();
        let mu = Policy::by_label(&p, "stay");
        let r = run_pi(&p, &mu, TieBreak::KeepCurrent, 10).unwrap();
        assert_eq!(r.iterations(), 0);
        assert_eq!(r.final_policy, mu);
    }

    #[test]
    fn pi_reaches_oracle_within_state_count_improvements() {
        for seed in 0..30 {
            let p = random_graph(seed, &GraphParams::default());
            let mu0 = Policy::new((0..p.num_states()).map(|x| p.actions(x).len() - 1).collect());
            let r = run_pi(&p, &mu0, TieBreak::KeepCurrent, 1000).unwrap();
            assert!(r.iterations() <= p.num_states(), "seed {seed}");
            assert_eq!(r.final_value, oracle_dijkstra(&p).unwrap());
            for w in r.value_sequence.windows(2) {
                assert!(w[1].le(&w[0]));
            }
        }
    }

    #[test]
    fn opi_seed_conditions() {
        let p = random_graph(2, &GraphParams::default());
        assert!(check_opi_seed(&p, &ValueFunction::inf_outside(&p)));
        let j = evaluate_policy(&p, &Policy::first_action(&p)).unwrap();
        assert!(check_opi_seed(&p, &j));
        assert!(!check_opi_seed(&p, &ValueFunction::zero(p.num_states())));
        assert!(matches!(
            run_opi(&p, &ValueFunction::zero(p.num_states()), &MSchedule::constant(1).unwrap(), 1e-9, 10),
            Err(Error::OpiSeed { .. })
        ));
    }

    #[test]
    fn opi_m1_is_value_iteration() {
        for seed in 0..20 {
            let p = random_graph(seed, &GraphParams::default());
            let j0 = ValueFunction::inf_outside(&p);
            let opi = run_opi(&p, &j0, &MSchedule::constant(1).unwrap(), 1e-9, 1000).unwrap();
            let vi = run_vi(&p, &j0, &ViConfig::default().snapshots()).unwrap();
            for (a, b) in opi.value_sequence[1..].iter().zip(vi.trace.snapshots()) {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn opi_on_gridworld_with_three_sweeps() {
        let p = gridworld(6, 5, &[(2, 0), (2, 1), (2, 2), (4, 3)], (5, 4));
        let r = run_opi(&p, &ValueFunction::inf_outside(&p), &MSchedule::constant(3).unwrap(), 1e-9, 1000).unwrap();
        assert_eq!(r.stopped_reason, StopReason::ValueConverged);
        assert!(r.final_value.sup_distance(&oracle_dijkstra(&p).unwrap()) <= 1e-9);
    }

    #[test]
    fn opi_large_m_matches_pi() {
        for seed in 0..10 {
            let p = random_graph(seed, &GraphParams::default());
            let pi = run_pi(&p, &Policy::first_action(&p), TieBreak::KeepCurrent, 1000).unwrap();
            let opi = run_opi(&p, &ValueFunction::inf_outside(&p), &MSchedule::constant(1000).unwrap(), 1e-9, 1000)
                .unwrap();
            assert!(opi.final_value.sup_distance(&pi.final_value) <= 1e-9);
        }
    }

    #[test]
    fn schedule_parsing() {
        let s: MSchedule = "1,2,5".parse().unwrap();
        assert_eq!((s.get(0), s.get(1), s.get(2), s.get(9)), (1, 2, 5, 5));
        assert!("0".parse::<MSchedule>().is_err());
        assert!("".parse::<MSchedule>().is_err());
    }
}
