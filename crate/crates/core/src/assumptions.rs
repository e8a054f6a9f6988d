//! Checks that near-optimal terminating policies exist from every state of
//! finite optimal cost, on graphs exactly and on grids by sampling.

use std::fmt;

use crate::ext::ExtCost;
use crate::finite::{
    oracle_policy_enum, positive_cycle_check, shortest_terminating_cost, terminating_reachability,
    DEFAULT_ENUM_BUDGET,
};
use crate::grid::GridInfo;
use crate::minimax::min_time_reachability;
use crate::model::{Problem, Successor, ValueFunction};
use crate::vi::{run_vi, ViConfig, DEFAULT_GRAPH_TOL, DEFAULT_GRID_TOL};

#[derive(Clone, Debug, PartialEq)]
pub enum StrictPositivity {
    /// `(δ, ε)` pairs: every sampled non-terminal node at distance `≥ δ`
    /// from the terminal set has `min_u g ≥ ε > 0`.
    VerifiedOnSamples(Vec<(f64, f64)>),
    /// Node ids where the minimal stage cost vanishes.
    ViolatedAt(Vec<String>),
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Controllability {
    UserAsserted,
    SpotCheckedOk { checked: usize, worst_cost: f64, epsilon: f64 },
    SpotCheckFailed(String),
    NotApplicable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Established,
    ViolatedWithWitness,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Established => "established",
            Verdict::ViolatedWithWitness => "violated",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Debug)]
pub struct AssumptionReport {
    pub terminal_valid: bool,
    pub positive_cycles_only: Option<bool>,
    pub all_states_can_terminate: Option<bool>,
    pub strict_positivity: StrictPositivity,
    pub local_controllability: Controllability,
    pub compactness_note: String,
    pub verdict: Verdict,
    pub witness: Option<String>,
    pub reasons: Vec<String>,
}

const COMPACTNESS: &str = "control sets are finite, so the level sets of the minimization are compact";

impl AssumptionReport {
    fn blank() -> Self {
        AssumptionReport {
            terminal_valid: true,
            positive_cycles_only: None,
            all_states_can_terminate: None,
            strict_positivity: StrictPositivity::NotApplicable,
            local_controllability: Controllability::NotApplicable,
            compactness_note: COMPACTNESS.into(),
            verdict: Verdict::Inconclusive,
            witness: None,
            reasons: Vec::new(),
        }
    }
}

fn yes_no(b: Option<bool>) -> &'static str {
    match b {
        Some(true) => "yes",
        Some(false) => "no",
        None => "n/a",
    }
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "assumption report")?;
        writeln!(f, "  terminal set valid: {}", yes_no(Some(self.terminal_valid)))?;
        writeln!(f, "  positive cycles only: {}", yes_no(self.positive_cycles_only))?;
        writeln!(f, "  all states can terminate: {}", yes_no(self.all_states_can_terminate))?;
        match &self.strict_positivity {
            StrictPositivity::VerifiedOnSamples(pairs) => {
                writeln!(f, "  strict positivity: verified on samples")?;
                for (d, e) in pairs {
                    writeln!(f, "    delta {d:.4} epsilon {e:.6e}")?;
                }
            }
            StrictPositivity::ViolatedAt(ids) => {
                writeln!(f, "  strict positivity: violated at {} node(s), e.g. {}", ids.len(), ids[0])?
            }
            StrictPositivity::NotApplicable => writeln!(f, "  strict positivity: n/a")?,
        }
        match &self.local_controllability {
            Controllability::UserAsserted => writeln!(f, "  local controllability: asserted by user")?,
            Controllability::SpotCheckedOk {
                checked,
                worst_cost,
                epsilon,
            } => writeln!(
                f,
                "  local controllability: spot check ok ({checked} node(s), worst cost {worst_cost:.3e} <= {epsilon:.3e})"
            )?,
            Controllability::SpotCheckFailed(why) => writeln!(f, "  local controllability: spot check failed: {why}")?,
            Controllability::NotApplicable => writeln!(f, "  local controllability: n/a")?,
        }
        writeln!(f, "  compactness: {}", self.compactness_note)?;
        writeln!(f, "  verdict: {}", self.verdict)?;
        if let Some(w) = &self.witness {
            writeln!(f, "  witness: {w}")?;
        }
        for r in &self.reasons {
            writeln!(f, "  note: {r}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct CheckConfig {
    pub enum_budget: u64,
    /// Fractions of the grid radius used as `δ`.
    pub delta_fracs: Vec<f64>,
    /// Radius of the controllability spot check; defaults to one grid
    /// spacing.
    pub delta_eps: Option<f64>,
    pub step_budget: usize,
    pub user_asserts_controllability: bool,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            enum_budget: DEFAULT_ENUM_BUDGET,
            delta_fracs: vec![0.5, 0.25, 0.1],
            delta_eps: None,
            step_budget: 50,
            user_asserts_controllability: false,
        }
    }
}

pub fn check_termination(p: &Problem, cfg: &CheckConfig) -> AssumptionReport {
    let mut rep = AssumptionReport::blank();
    let validation = p.validate();
    if !validation.is_valid() {
        rep.terminal_valid = false;
        rep.reasons.push(format!("problem is invalid: {validation}"));
        return rep;
    }
    match p.grid() {
        Some(g) => check_grid(p, g, cfg, rep),
        None if p.is_minimax() => check_minimax(p, rep),
        None => check_graph(p, cfg, rep),
    }
}

fn ids(p: &Problem, xs: impl IntoIterator<Item = usize>) -> String {
    xs.into_iter().map(|x| p.state_id(x)).collect::<Vec<_>>().join(" -> ")
}

fn check_graph(p: &Problem, cfg: &CheckConfig, mut rep: AssumptionReport) -> AssumptionReport {
    let cycles = positive_cycle_check(p);
    let reach = terminating_reachability(p);
    rep.positive_cycles_only = Some(cycles.has_positive_cycles_only);
    rep.all_states_can_terminate = Some(reach.all());
    if cycles.has_positive_cycles_only && reach.all() {
        rep.verdict = Verdict::Established;
        return rep;
    }
    if !reach.all() {
        rep.reasons.push(format!(
            "states that cannot reach the terminal set: {}",
            ids(p, reach.cannot_terminate()).replace(" -> ", ", ")
        ));
    }
    let jstar = match optimal_cost(p, cfg) {
        Some(j) => j,
        None => {
            rep.reasons.push("optimal cost unavailable: enumeration budget exceeded and VI did not converge".into());
            return rep;
        }
    };
    let term = shortest_terminating_cost(p).expect("deterministic");
    for x in 0..p.num_states() {
        let (js, t) = (jstar.get(x), term.get(x));
        if js.is_finite() && t > js && t.distance(js) > DEFAULT_GRAPH_TOL {
            let cycle = cycles
                .zero_cost_cycles
                .iter()
                .find(|c| c.contains(&x))
                .or_else(|| cycles.zero_cost_cycles.first());
            let mut w = format!(
                "state {}: optimal cost {} but cheapest terminating cost {}",
                p.state_id(x),
                js,
                t
            );
            if let Some(c) = cycle {
                w.push_str(&format!("; zero-cost cycle {} -> {}", ids(p, c.iter().copied()), p.state_id(c[0])));
            }
            rep.verdict = Verdict::ViolatedWithWitness;
            rep.witness = Some(w);
            return rep;
        }
    }
    rep.reasons
        .push("terminating policies match the optimal cost wherever it is finite, but zero-cost cycles or dead ends remain".into());
    rep
}

fn optimal_cost(p: &Problem, cfg: &CheckConfig) -> Option<ValueFunction> {
    if let Ok(j) = oracle_policy_enum(p, cfg.enum_budget) {
        return Some(j);
    }
    let r = run_vi(p, &ValueFunction::zero(p.num_states()), &ViConfig::default()).ok()?;
    r.converged.then_some(r.final_value)
}

fn check_minimax(p: &Problem, mut rep: AssumptionReport) -> AssumptionReport {
    let cycles = positive_cycle_check(p);
    rep.positive_cycles_only = Some(cycles.has_positive_cycles_only);
    let guaranteed = min_time_reachability(p).map(|r| r.final_value);
    let all = guaranteed
        .as_ref()
        .map(|j| j.values().iter().all(|v| v.is_finite()))
        .unwrap_or(false);
    rep.all_states_can_terminate = Some(all);
    if cycles.has_positive_cycles_only && all {
        rep.verdict = Verdict::Established;
    } else {
        rep.reasons.push(
            "guaranteed reachability or cycle positivity fails; the adversarial case has no exact witness search".into(),
        );
    }
    rep
}

fn dist_to_origin(g: &GridInfo, x: usize) -> f64 {
    let o = &g.nodes[g.origin];
    g.nodes[x].iter().zip(o).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn successor_point(g: &GridInfo, s: &Successor) -> Vec<f64> {
    match s {
        Successor::State(y) => g.nodes[*y].clone(),
        Successor::Blend(ws) => {
            let mut out = vec![0.0; g.nodes[0].len()];
            for (y, w) in ws {
                for (o, c) in out.iter_mut().zip(&g.nodes[*y]) {
                    *o += w * c;
                }
            }
            out
        }
    }
}

/// Greedy descent toward the origin: at each step take the control whose
/// successor is closest to the origin, cheaper first on ties.
fn greedy_termination_cost(p: &Problem, g: &GridInfo, x0: usize, budget: usize) -> Option<f64> {
    let mut x = x0;
    let mut cost = 0.0;
    for _ in 0..budget {
        if p.is_terminal(x) {
            return Some(cost);
        }
        let origin = &g.nodes[g.origin];
        let best = p.actions(x).iter().min_by(|a, b| {
            let key = |act: &crate::model::Action| {
                let pt = successor_point(g, &act.outcomes[0].next);
                let d: f64 = pt.iter().zip(origin).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
                (d, act.outcomes[0].cost)
            };
            let (da, ca) = key(a);
            let (db, cb) = key(b);
            da.total_cmp(&db).then(ca.cmp(&cb))
        })?;
        let o = &best.outcomes[0];
        cost += o.cost.finite()?;
        x = o.next.as_state()?;
    }
    p.is_terminal(x).then_some(cost)
}

fn check_grid(p: &Problem, g: &GridInfo, cfg: &CheckConfig, mut rep: AssumptionReport) -> AssumptionReport {
    let n = p.num_states();
    let radius = (0..n).map(|x| dist_to_origin(g, x)).fold(0.0, f64::max);
    let min_stage: Vec<ExtCost> = (0..n)
        .map(|x| {
            p.actions(x)
                .iter()
                .map(|a| a.outcomes.iter().map(|o| o.cost).max().unwrap())
                .min()
                .unwrap()
        })
        .collect();
    let mut pairs = Vec::new();
    let mut violated = Vec::new();
    for frac in &cfg.delta_fracs {
        let delta = frac * radius;
        let mut eps = ExtCost::INF;
        for x in (0..n).filter(|&x| !p.is_terminal(x) && dist_to_origin(g, x) >= delta - 1e-12) {
            if min_stage[x].is_zero() {
                violated.push(p.state_id(x).to_string());
            }
            eps = eps.min(min_stage[x]);
        }
        pairs.push((delta, eps.to_f64()));
    }
    violated.sort();
    violated.dedup();
    let positive = violated.is_empty();
    rep.strict_positivity = if positive {
        StrictPositivity::VerifiedOnSamples(pairs.clone())
    } else {
        StrictPositivity::ViolatedAt(violated)
    };

    let spacing = g.spec.state.spacing().into_iter().fold(0.0, f64::max);
    let delta_eps = cfg.delta_eps.unwrap_or(spacing);
    let epsilon = pairs.iter().map(|(_, e)| *e).fold(f64::INFINITY, f64::min);
    rep.local_controllability = if cfg.user_asserts_controllability {
        Controllability::UserAsserted
    } else {
        let near: Vec<usize> = (0..n).filter(|&x| dist_to_origin(g, x) <= delta_eps + 1e-12).collect();
        let mut worst = 0.0f64;
        let mut failure = None;
        for &x in &near {
            match greedy_termination_cost(p, g, x, cfg.step_budget) {
                Some(c) if c <= epsilon => worst = worst.max(c),
                Some(c) => {
                    failure = Some(format!("node {} terminates at cost {c:.3e} > {epsilon:.3e}", p.state_id(x)));
                    break;
                }
                None => {
                    failure = Some(format!(
                        "no terminating sequence from node {} within {} steps",
                        p.state_id(x),
                        cfg.step_budget
                    ));
                    break;
                }
            }
        }
        match failure {
            Some(why) => Controllability::SpotCheckFailed(why),
            None => Controllability::SpotCheckedOk {
                checked: near.len(),
                worst_cost: worst,
                epsilon,
            },
        }
    };
    let controllable = matches!(
        rep.local_controllability,
        Controllability::UserAsserted | Controllability::SpotCheckedOk { .. }
    );
    if positive && controllable {
        rep.verdict = Verdict::Established;
        return rep;
    }
    // A non-terminal node with zero optimal cost and no free exit cannot be
    // matched by any terminating sequence.
    if !positive {
        let r = run_vi(p, &ValueFunction::zero(n), &ViConfig::with_tol(DEFAULT_GRID_TOL));
        if let Ok(r) = r {
            if r.converged {
                if let Some(x) = (0..n).find(|&x| {
                    !p.is_terminal(x) && r.final_value.get(x).is_zero() && exit_costs_positive(p, x)
                }) {
                    rep.verdict = Verdict::ViolatedWithWitness;
                    rep.witness = Some(format!(
                        "node {}: optimal cost 0 off the terminal set, while every sampled terminating sequence costs more",
                        p.state_id(x)
                    ));
                    return rep;
                }
            }
        }
    }
    rep.reasons.push("sampled conditions were not all met".into());
    rep
}

/// True when no control moves `x` into the terminal set for free, so every
/// terminating sequence from `x` has positive cost.
fn exit_costs_positive(p: &Problem, x: usize) -> bool {
    !p.actions(x).iter().any(|a| {
        a.outcomes
            .iter()
            .all(|o| o.cost.is_zero() && o.next.support().iter().all(|&y| p.is_terminal(y)))
    })
}

/// The continuous-control counterexample for VI is handled analytically:
/// stopping immediately terminates at unit cost, which is optimal everywhere.
pub fn analytic_example2_report() -> AssumptionReport {
    let mut rep = AssumptionReport::blank();
    rep.positive_cycles_only = None;
    rep.all_states_can_terminate = Some(true);
    rep.strict_positivity = StrictPositivity::NotApplicable;
    rep.local_controllability = Controllability::NotApplicable;
    rep.compactness_note = "control set is open; compactness of the minimization fails".into();
    rep.verdict = Verdict::Established;
    rep.reasons.push(
        "analytic: the stopping control terminates from every state at cost 1, which equals the optimal cost".into(),
    );
    rep
}
