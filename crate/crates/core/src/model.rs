//! Problem description, value functions, policies and terminal-set validation.

use std::fmt;

use crate::error::{Error, Result};
use crate::ext::{ext_add, ExtCost};
use crate::grid::GridInfo;

/// Where an (state, control, disturbance) triple leads.
///
/// Graph problems always use `State`. Discretized problems use `Blend` when
/// the successor falls between grid nodes; the weights are the multilinear
/// interpolation weights and sum to one.
#[derive(Clone, Debug, PartialEq)]
pub enum Successor {
    State(usize),
    Blend(Vec<(usize, f64)>),
}

impl Successor {
    pub fn as_state(&self) -> Option<usize> {
        match self {
            Successor::State(s) => Some(*s),
            Successor::Blend(_) => None,
        }
    }

    /// Nodes that carry positive weight.
    pub fn support(&self) -> Vec<usize> {
        match self {
            Successor::State(s) => vec![*s],
            Successor::Blend(w) => w.iter().filter(|(_, w)| *w > 0.0).map(|(s, _)| *s).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub next: Successor,
    pub cost: ExtCost,
    /// Set when a discretized successor left the grid and was clamped.
    pub clamped: bool,
}

impl Outcome {
    pub fn to(next: usize, cost: ExtCost) -> Self {
        Outcome {
            next: Successor::State(next),
            cost,
            clamped: false,
        }
    }
}

/// One admissible control. `outcomes` has one entry per disturbance, or a
/// single entry for deterministic problems.
#[derive(Clone, Debug, PartialEq)]
pub struct Action {
    pub label: String,
    pub outcomes: Vec<Outcome>,
}

impl Action {
    pub fn deterministic(&self) -> Option<(usize, ExtCost)> {
        match self.outcomes.as_slice() {
            [o] => o.next.as_state().map(|s| (s, o.cost)),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    states: Vec<String>,
    terminal: Vec<bool>,
    actions: Vec<Vec<Action>>,
    disturbances: Option<Vec<String>>,
    grid: Option<GridInfo>,
}

impl Problem {
    /// Assembles a problem without validating it; see [`Problem::validate`].
    pub fn from_parts(
        states: Vec<String>,
        terminal: Vec<bool>,
        actions: Vec<Vec<Action>>,
        disturbances: Option<Vec<String>>,
    ) -> Self {
        Problem {
            states,
            terminal,
            actions,
            disturbances,
            grid: None,
        }
    }

    pub(crate) fn with_grid(mut self, grid: GridInfo) -> Self {
        self.grid = Some(grid);
        self
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_ids(&self) -> &[String] {
        &self.states
    }

    pub fn state_id(&self, x: usize) -> &str {
        &self.states[x]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.states.iter().position(|s| s == id)
    }

    pub fn is_terminal(&self, x: usize) -> bool {
        self.terminal[x]
    }

    pub fn terminal_mask(&self) -> &[bool] {
        &self.terminal
    }

    pub fn terminal_states(&self) -> impl Iterator<Item = usize> + '_ {
        self.terminal.iter().enumerate().filter(|(_, t)| **t).map(|(i, _)| i)
    }

    pub fn actions(&self, x: usize) -> &[Action] {
        &self.actions[x]
    }

    pub fn disturbances(&self) -> Option<&[String]> {
        self.disturbances.as_deref()
    }

    pub fn is_minimax(&self) -> bool {
        self.disturbances.is_some()
    }

    pub fn grid(&self) -> Option<&GridInfo> {
        self.grid.as_ref()
    }

    /// Number of outcomes every action must carry.
    pub fn outcome_arity(&self) -> usize {
        self.disturbances.as_ref().map_or(1, |w| w.len())
    }

    /// `max_w { g(x,u,w) + J(f(x,u,w)) }`, which is just `g + J∘f` when
    /// there is no disturbance.
    pub fn action_value(&self, x: usize, a: usize, j: &ValueFunction) -> ExtCost {
        self.actions[x][a]
            .outcomes
            .iter()
            .map(|o| ext_add(o.cost, j.at(&o.next)))
            .max()
            .unwrap_or(ExtCost::INF)
    }

    /// Errors unless every action has exactly one outcome pointing at a state.
    pub fn require_deterministic(&self) -> Result<()> {
        for (x, acts) in self.actions.iter().enumerate() {
            for a in acts {
                if a.deterministic().is_none() {
                    return Err(Error::NotDeterministic(format!(
                        "action `{}` at state `{}` has {} outcome(s) or an interpolated successor",
                        a.label,
                        self.states[x],
                        a.outcomes.len()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn require_minimax(&self) -> Result<()> {
        if self.disturbances.is_none() {
            return Err(Error::MissingDisturbances);
        }
        Ok(())
    }

    /// Deterministic arcs `(from, control, to, cost)` of a graph problem.
    /// For minimax problems every disturbance outcome is listed.
    pub fn arcs(&self) -> Vec<(usize, usize, usize, ExtCost)> {
        let mut out = Vec::new();
        for (x, acts) in self.actions.iter().enumerate() {
            for (a, act) in acts.iter().enumerate() {
                for o in &act.outcomes {
                    for y in o.next.support() {
                        out.push((x, a, y, o.cost));
                    }
                }
            }
        }
        out
    }

    /// Copy with every stage cost replaced by `cost(x, a, w)`.
    pub fn with_costs(&self, mut cost: impl FnMut(usize, usize, usize) -> ExtCost) -> Problem {
        let mut p = self.clone();
        for (x, acts) in p.actions.iter_mut().enumerate() {
            for (a, act) in acts.iter_mut().enumerate() {
                for (w, o) in act.outcomes.iter_mut().enumerate() {
                    o.cost = cost(x, a, w);
                }
            }
        }
        p
    }

    pub fn with_terminal(&self, terminal: Vec<bool>) -> Problem {
        assert_eq!(terminal.len(), self.num_states());
        let mut p = self.clone();
        p.terminal = terminal;
        p
    }

    /// The deterministic problem obtained by fixing the disturbance to `w`.
    pub fn collapse_disturbance(&self, w: usize) -> Result<Problem> {
        let ws = self.disturbances.as_ref().ok_or(Error::MissingDisturbances)?;
        if w >= ws.len() {
            return Err(Error::InvalidArgument(format!("disturbance index {w} out of range")));
        }
        let actions = self
            .actions
            .iter()
            .map(|acts| {
                acts.iter()
                    .map(|a| Action {
                        label: a.label.clone(),
                        outcomes: vec![a.outcomes[w].clone()],
                    })
                    .collect()
            })
            .collect();
        Ok(Problem {
            states: self.states.clone(),
            terminal: self.terminal.clone(),
            actions,
            disturbances: None,
            grid: self.grid.clone(),
        })
    }

    /// The same deterministic problem viewed as a minimax problem with a
    /// single disturbance.
    pub fn with_single_disturbance(&self, id: impl Into<String>) -> Result<Problem> {
        if self.disturbances.is_some() {
            return Err(Error::InvalidArgument("problem already has disturbances".into()));
        }
        if self.actions.iter().flatten().any(|a| a.outcomes.len() != 1) {
            return Err(Error::InvalidArgument("every action needs exactly one outcome".into()));
        }
        let mut p = self.clone();
        p.disturbances = Some(vec![id.into()]);
        Ok(p)
    }

    /// Checks the absorbing, cost-free terminal condition, control-set
    /// nonemptiness and successor well-formedness. Returns every violation.
    pub fn validate(&self) -> ValidationReport {
        let mut v = Vec::new();
        let n = self.num_states();
        if self.terminal.len() != n || self.actions.len() != n {
            v.push(Violation::Shape(format!(
                "{} states, {} terminal flags, {} action lists",
                n,
                self.terminal.len(),
                self.actions.len()
            )));
            return ValidationReport { violations: v };
        }
        if !self.terminal.iter().any(|t| *t) {
            v.push(Violation::NoTerminalStates);
        }
        let arity = self.outcome_arity();
        for x in 0..n {
            let sid = &self.states[x];
            if self.actions[x].is_empty() {
                v.push(Violation::EmptyControlSet { state: sid.clone() });
            }
            for act in &self.actions[x] {
                if act.outcomes.len() != arity {
                    v.push(Violation::OutcomeArity {
                        state: sid.clone(),
                        action: act.label.clone(),
                        expected: arity,
                        got: act.outcomes.len(),
                    });
                }
                for (w, o) in act.outcomes.iter().enumerate() {
                    let targets: Vec<(usize, f64)> = match &o.next {
                        Successor::State(s) => vec![(*s, 1.0)],
                        Successor::Blend(ws) => ws.clone(),
                    };
                    let mut total = 0.0;
                    for &(s, wt) in &targets {
                        if s >= n {
                            v.push(Violation::SuccessorOutOfRange {
                                state: sid.clone(),
                                action: act.label.clone(),
                                index: s,
                            });
                        }
                        if !(wt >= 0.0) {
                            v.push(Violation::BadWeights {
                                state: sid.clone(),
                                action: act.label.clone(),
                            });
                        }
                        total += wt;
                    }
                    if (total - 1.0).abs() > 1e-9 {
                        v.push(Violation::BadWeights {
                            state: sid.clone(),
                            action: act.label.clone(),
                        });
                    }
                    if self.terminal[x] {
                        if o.cost != ExtCost::ZERO {
                            v.push(Violation::TerminalNotCostFree {
                                state: sid.clone(),
                                action: act.label.clone(),
                                disturbance: w,
                                cost: o.cost,
                            });
                        }
                        if o.next != Successor::State(x) {
                            v.push(Violation::TerminalNotAbsorbing {
                                state: sid.clone(),
                                action: act.label.clone(),
                                disturbance: w,
                            });
                        }
                    }
                }
            }
        }
        ValidationReport { violations: v }
    }

    /// Validates and returns the problem, or the full report as an error.
    pub fn validated(self) -> Result<Self> {
        let report = self.validate();
        if report.is_valid() {
            Ok(self)
        } else {
            Err(Error::Validation(report))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    Shape(String),
    NoTerminalStates,
    EmptyControlSet {
        state: String,
    },
    NegativeCost {
        state: String,
        action: String,
        value: f64,
    },
    OutcomeArity {
        state: String,
        action: String,
        expected: usize,
        got: usize,
    },
    SuccessorOutOfRange {
        state: String,
        action: String,
        index: usize,
    },
    BadWeights {
        state: String,
        action: String,
    },
    TerminalNotCostFree {
        state: String,
        action: String,
        disturbance: usize,
        cost: ExtCost,
    },
    TerminalNotAbsorbing {
        state: String,
        action: String,
        disturbance: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape(s) => write!(f, "inconsistent problem shape: {s}"),
            Violation::NoTerminalStates => f.write_str("terminal set is empty"),
            Violation::EmptyControlSet { state } => {
                write!(f, "admissibility: state `{state}` has no controls")
            }
            Violation::NegativeCost { state, action, value } => write!(
                f,
                "nonnegativity: action `{action}` at state `{state}` has cost {value}"
            ),
            Violation::OutcomeArity {
                state,
                action,
                expected,
                got,
            } => write!(
                f,
                "action `{action}` at state `{state}` has {got} outcomes, expected {expected}"
            ),
            Violation::SuccessorOutOfRange { state, action, index } => write!(
                f,
                "action `{action}` at state `{state}` points at unknown state index {index}"
            ),
            Violation::BadWeights { state, action } => write!(
                f,
                "action `{action}` at state `{state}` has interpolation weights that are negative or do not sum to 1"
            ),
            Violation::TerminalNotCostFree {
                state,
                action,
                disturbance,
                cost,
            } => write!(
                f,
                "terminal state `{state}` not cost-free: action `{action}` (disturbance {disturbance}) costs {cost}"
            ),
            Violation::TerminalNotAbsorbing {
                state,
                action,
                disturbance,
            } => write!(
                f,
                "terminal state `{state}` not absorbing: action `{action}` (disturbance {disturbance}) leaves it"
            ),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("valid");
        }
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// A map from states to `[0, ∞]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueFunction {
    values: Vec<ExtCost>,
}

impl ValueFunction {
    pub fn new(values: Vec<ExtCost>) -> Self {
        ValueFunction { values }
    }

    pub fn from_f64(values: &[f64]) -> Result<Self> {
        values.iter().map(|v| ExtCost::new(*v)).collect::<Result<Vec<_>>>().map(Self::new)
    }

    pub fn zero(n: usize) -> Self {
        ValueFunction {
            values: vec![ExtCost::ZERO; n],
        }
    }

    /// 0 on the terminal set, `∞` elsewhere.
    pub fn inf_outside(p: &Problem) -> Self {
        ValueFunction {
            values: p
                .terminal_mask()
                .iter()
                .map(|t| if *t { ExtCost::ZERO } else { ExtCost::INF })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[ExtCost] {
        &self.values
    }

    pub fn get(&self, x: usize) -> ExtCost {
        self.values[x]
    }

    pub fn set(&mut self, x: usize, v: ExtCost) {
        self.values[x] = v;
    }

    /// Value at a successor; interpolated successors are weighted sums and
    /// become `∞` as soon as one positively weighted corner is `∞`.
    pub fn at(&self, next: &Successor) -> ExtCost {
        match next {
            Successor::State(s) => self.values[*s],
            Successor::Blend(ws) => ws
                .iter()
                .map(|(s, w)| self.values[*s].scale(*w))
                .fold(ExtCost::ZERO, ext_add),
        }
    }

    pub fn check_domain(&self, p: &Problem) -> Result<()> {
        if self.values.len() != p.num_states() {
            return Err(Error::DomainMismatch {
                expected: p.num_states(),
                got: self.values.len(),
            });
        }
        Ok(())
    }

    /// Whether the function vanishes on the terminal set.
    pub fn in_j_class(&self, p: &Problem) -> bool {
        p.terminal_states().all(|x| self.values[x].is_zero())
    }

    pub fn num_infinite(&self) -> usize {
        self.values.iter().filter(|v| v.is_infinite()).count()
    }

    /// Pointwise `self <= other`.
    pub fn le(&self, other: &ValueFunction) -> bool {
        self.values.iter().zip(&other.values).all(|(a, b)| a <= b)
    }

    /// Pointwise `self <= other + slack`, with `∞ <= ∞`.
    pub fn le_within(&self, other: &ValueFunction, slack: f64) -> Option<usize> {
        self.values
            .iter()
            .zip(&other.values)
            .position(|(a, b)| !le_within(*a, *b, slack))
    }

    /// Sup over states of [`ExtCost::distance`].
    pub fn sup_distance(&self, other: &ValueFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.distance(*b))
            .fold(0.0, f64::max)
    }

    /// Sup-change over states finite in both, plus whether the set of
    /// infinite states differs.
    pub fn finite_change(&self, other: &ValueFunction) -> (f64, bool) {
        let mut sup = 0.0f64;
        let mut pattern_changed = false;
        for (a, b) in self.values.iter().zip(&other.values) {
            match (a, b) {
                (ExtCost::Finite(x), ExtCost::Finite(y)) => sup = sup.max((x - y).abs()),
                (ExtCost::Infinite, ExtCost::Infinite) => {}
                _ => pattern_changed = true,
            }
        }
        (sup, pattern_changed)
    }

    pub fn restrict_distance(&self, other: &ValueFunction, mask: &[bool]) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .zip(mask)
            .filter(|(_, m)| **m)
            .map(|((a, b), _)| a.distance(*b))
            .fold(0.0, f64::max)
    }
}

/// `a <= b + slack·max(1, |b|)`; infinite `b` admits anything.
pub fn le_within(a: ExtCost, b: ExtCost, slack: f64) -> bool {
    match (a, b) {
        (_, ExtCost::Infinite) => true,
        (ExtCost::Infinite, ExtCost::Finite(_)) => false,
        (ExtCost::Finite(x), ExtCost::Finite(y)) => x <= y + slack * y.abs().max(1.0),
    }
}

/// True iff `j` vanishes on the terminal set of `p`.
pub fn membership_in_j(j: &ValueFunction, p: &Problem) -> Result<bool> {
    j.check_domain(p)?;
    Ok(j.in_j_class(p))
}

/// A stationary policy, stored as a control index per state.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Policy {
    choice: Vec<usize>,
}

impl Policy {
    pub fn new(choice: Vec<usize>) -> Self {
        Policy { choice }
    }

    /// Picks the first listed control everywhere.
    pub fn first_action(p: &Problem) -> Self {
        Policy {
            choice: vec![0; p.num_states()],
        }
    }

    /// Picks controls by label, falling back to index 0 where `label` is absent.
    pub fn by_label(p: &Problem, label: &str) -> Self {
        Policy {
            choice: (0..p.num_states())
                .map(|x| p.actions(x).iter().position(|a| a.label == label).unwrap_or(0))
                .collect(),
        }
    }

    pub fn get(&self, x: usize) -> usize {
        self.choice[x]
    }

    pub fn set(&mut self, x: usize, a: usize) {
        self.choice[x] = a;
    }

    pub fn choices(&self) -> &[usize] {
        &self.choice
    }

    pub fn len(&self) -> usize {
        self.choice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choice.is_empty()
    }

    pub fn check_admissible(&self, p: &Problem) -> Result<()> {
        if self.choice.len() != p.num_states() {
            return Err(Error::DomainMismatch {
                expected: p.num_states(),
                got: self.choice.len(),
            });
        }
        for (x, &a) in self.choice.iter().enumerate() {
            if a >= p.actions(x).len() {
                return Err(Error::InadmissiblePolicy {
                    state: p.state_id(x).to_string(),
                    control: a,
                    available: p.actions(x).len(),
                });
            }
        }
        Ok(())
    }

    pub fn label<'p>(&self, p: &'p Problem, x: usize) -> &'p str {
        &p.actions(x)[self.choice[x]].label
    }
}

/// Incremental constructor for graph and minimax problems.
///
/// Terminal states that end up with no controls get a single cost-free
/// `stay` self-loop.
#[derive(Debug, Default)]
pub struct ProblemBuilder {
    states: Vec<String>,
    terminal: Vec<bool>,
    actions: Vec<Vec<Action>>,
    disturbances: Option<Vec<String>>,
    bad_costs: Vec<Violation>,
}

impl ProblemBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_disturbances<S: Into<String>>(mut self, ids: impl IntoIterator<Item = S>) -> Self {
        self.disturbances = Some(ids.into_iter().map(Into::into).collect());
        self
    }

    pub fn add_state(&mut self, id: impl Into<String>) -> usize {
        self.states.push(id.into());
        self.terminal.push(false);
        self.actions.push(Vec::new());
        self.states.len() - 1
    }

    pub fn add_states<S: Into<String>>(&mut self, ids: impl IntoIterator<Item = S>) -> Vec<usize> {
        ids.into_iter().map(|s| self.add_state(s)).collect()
    }

    pub fn set_terminal(&mut self, x: usize) -> &mut Self {
        self.terminal[x] = true;
        self
    }

    fn cost(&mut self, x: usize, label: &str, cost: f64) -> ExtCost {
        match ExtCost::new(cost) {
            Ok(c) => c,
            Err(_) => {
                self.bad_costs.push(Violation::NegativeCost {
                    state: self.states[x].clone(),
                    action: label.to_string(),
                    value: cost,
                });
                ExtCost::ZERO
            }
        }
    }

    pub fn add_action(&mut self, x: usize, label: impl Into<String>, next: usize, cost: f64) -> &mut Self {
        let label = label.into();
        let c = self.cost(x, &label, cost);
        self.actions[x].push(Action {
            label,
            outcomes: vec![Outcome::to(next, c)],
        });
        self
    }

    /// Action with one `(next, cost)` pair per disturbance.
    pub fn add_minimax_action(
        &mut self,
        x: usize,
        label: impl Into<String>,
        outcomes: &[(usize, f64)],
    ) -> &mut Self {
        let label = label.into();
        let outs = outcomes
            .iter()
            .map(|&(next, cost)| {
                let c = self.cost(x, &label, cost);
                Outcome::to(next, c)
            })
            .collect();
        self.actions[x].push(Action { label, outcomes: outs });
        self
    }

    /// Builds without semantic validation. Only unrepresentable costs fail.
    pub fn build_unvalidated(mut self) -> Result<Problem> {
        if !self.bad_costs.is_empty() {
            return Err(Error::Validation(ValidationReport {
                violations: std::mem::take(&mut self.bad_costs),
            }));
        }
        let arity = self.disturbances.as_ref().map_or(1, |w| w.len());
        for x in 0..self.states.len() {
            if self.terminal[x] && self.actions[x].is_empty() {
                self.actions[x].push(Action {
                    label: "stay".into(),
                    outcomes: vec![Outcome::to(x, ExtCost::ZERO); arity],
                });
            }
        }
        Ok(Problem::from_parts(self.states, self.terminal, self.actions, self.disturbances))
    }

    /// Builds and validates, reporting all violations at once.
    pub fn build(self) -> Result<Problem> {
        self.build_unvalidated()?.validated()
    }
}
