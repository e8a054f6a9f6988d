//! Algorithms behind a common trait, looked up by name.

use crate::error::{Error, Result};
use crate::finite::evaluate_policy;
use crate::model::{Policy, Problem, ValueFunction};
use crate::pi::{improve_policy, run_opi, run_pi, MSchedule, TieBreak};
use crate::vi::{bellman_operator, run_vi, SolveTrace, ViConfig, DEFAULT_GRAPH_TOL, DEFAULT_GRID_TOL};

/// Starting point of a run.
#[derive(Clone, Debug, PartialEq)]
pub enum Init {
    Zero,
    InfOutside,
    Policy(Policy),
    Value(ValueFunction),
}

impl Init {
    /// The starting value function; a policy start is evaluated first.
    pub fn value(&self, p: &Problem) -> Result<ValueFunction> {
        let j = match self {
            Init::Zero => ValueFunction::zero(p.num_states()),
            Init::InfOutside => ValueFunction::inf_outside(p),
            Init::Policy(mu) => evaluate_policy(p, mu)?,
            Init::Value(j) => j.clone(),
        };
        j.check_domain(p)?;
        Ok(j)
    }

    /// The starting policy; a value start is turned greedy.
    pub fn policy(&self, p: &Problem) -> Result<Policy> {
        match self {
            Init::Policy(mu) => Ok(mu.clone()),
            Init::Value(j) => {
                j.check_domain(p)?;
                Ok(bellman_operator(p, j).1)
            }
            Init::Zero | Init::InfOutside => Ok(Policy::first_action(p)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveRequest {
    pub init: Init,
    /// Defaults to 1e-9 for graphs and 1e-6 for grids.
    pub tol: Option<f64>,
    pub max_iters: usize,
    pub tie: TieBreak,
    pub m: MSchedule,
    pub record_snapshots: bool,
}

impl Default for SolveRequest {
    fn default() -> Self {
        SolveRequest {
            init: Init::Zero,
            tol: None,
            max_iters: 10_000,
            tie: TieBreak::KeepCurrent,
            m: MSchedule::constant(1).expect("positive"),
            record_snapshots: false,
        }
    }
}

impl SolveRequest {
    pub fn tol_for(&self, p: &Problem) -> f64 {
        self.tol.unwrap_or(if p.grid().is_some() {
            DEFAULT_GRID_TOL
        } else {
            DEFAULT_GRAPH_TOL
        })
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub algo: &'static str,
    pub value: ValueFunction,
    pub policy: Policy,
    pub iterations: usize,
    pub converged: bool,
    pub stop: String,
    pub trace: SolveTrace,
}

pub trait Solver: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    fn solve(&self, p: &Problem, req: &SolveRequest) -> Result<SolveOutcome>;
}

struct Vi;
struct Pi;
struct Opi;
struct MinimaxVi;

fn vi_outcome(algo: &'static str, p: &Problem, req: &SolveRequest) -> Result<SolveOutcome> {
    let cfg = ViConfig {
        tol: req.tol_for(p),
        max_iters: req.max_iters,
        record_snapshots: req.record_snapshots,
    };
    let r = run_vi(p, &req.init.value(p)?, &cfg)?;
    Ok(SolveOutcome {
        algo,
        stop: if r.converged { "converged" } else { "max_iters" }.into(),
        value: r.final_value,
        policy: r.policy,
        iterations: r.iterations,
        converged: r.converged,
        trace: r.trace,
    })
}

impl Solver for Vi {
    fn name(&self) -> &'static str {
        "vi"
    }
    fn summary(&self) -> &'static str {
        "value iteration"
    }
    fn solve(&self, p: &Problem, req: &SolveRequest) -> Result<SolveOutcome> {
        vi_outcome(self.name(), p, req)
    }
}

impl Solver for Pi {
    fn name(&self) -> &'static str {
        "pi"
    }
    fn summary(&self) -> &'static str {
        "policy iteration with exact evaluation"
    }
    fn solve(&self, p: &Problem, req: &SolveRequest) -> Result<SolveOutcome> {
        let mu0 = req.init.policy(p)?;
        let r = run_pi(p, &mu0, req.tie, req.max_iters)?;
        let converged = r.stopped_reason == crate::pi::StopReason::PolicyRepeat;
        let mut trace = r.trace.clone();
        if !req.record_snapshots {
            trace.rows.iter_mut().for_each(|row| row.snapshot = None);
        }
        Ok(SolveOutcome {
            algo: self.name(),
            stop: r.stopped_reason.to_string(),
            iterations: r.iterations(),
            value: r.final_value,
            policy: r.final_policy,
            converged,
            trace,
        })
    }
}

impl Solver for Opi {
    fn name(&self) -> &'static str {
        "opi"
    }
    fn summary(&self) -> &'static str {
        "optimistic policy iteration with m sweeps per round"
    }
    fn solve(&self, p: &Problem, req: &SolveRequest) -> Result<SolveOutcome> {
        let j0 = req.init.value(p)?;
        let r = run_opi(p, &j0, &req.m, req.tol_for(p), req.max_iters)?;
        let converged = r.stopped_reason == crate::pi::StopReason::ValueConverged;
        let mut trace = r.trace.clone();
        if !req.record_snapshots {
            trace.rows.iter_mut().for_each(|row| row.snapshot = None);
        }
        Ok(SolveOutcome {
            algo: self.name(),
            stop: r.stopped_reason.to_string(),
            iterations: r.iterations(),
            policy: improve_policy(p, &r.final_value, &r.final_policy, TieBreak::LeastIndex),
            value: r.final_value,
            converged,
            trace,
        })
    }
}

impl Solver for MinimaxVi {
    fn name(&self) -> &'static str {
        "mm-vi"
    }
    fn summary(&self) -> &'static str {
        "value iteration with the worst case over disturbances"
    }
    fn solve(&self, p: &Problem, req: &SolveRequest) -> Result<SolveOutcome> {
        p.require_minimax()?;
        vi_outcome(self.name(), p, req)
    }
}

pub struct SolverRegistry {
    solvers: Vec<Box<dyn Solver>>,
}

impl SolverRegistry {
    pub fn empty() -> Self {
        SolverRegistry { solvers: Vec::new() }
    }

    /// `vi`, `pi`, `opi` and `mm-vi`.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Vi));
        r.register(Box::new(Pi));
        r.register(Box::new(Opi));
        r.register(Box::new(MinimaxVi));
        r
    }

    /// Adds a solver, replacing any with the same name.
    pub fn register(&mut self, s: Box<dyn Solver>) {
        self.solvers.retain(|old| old.name() != s.name());
        self.solvers.push(s);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.solvers.iter().map(|s| s.name()).collect()
    }

    pub fn get(&self, name: &str) -> Result<&dyn Solver> {
        self.solvers
            .iter()
            .find(|s| s.name() == name)
            .map(|s| s.as_ref())
            .ok_or_else(|| Error::Unknown {
                kind: "algorithm",
                name: name.into(),
                known: self.names().join(", "),
            })
    }
}

impl Default for SolverRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ext::ExtCost;
    use crate::fixtures::{adversarial_line, example1, unit_chain};
    use crate::finite::oracle_dijkstra;

    #[test]
    fn registry_lookup() {
        let r = SolverRegistry::builtin();
        assert_eq!(r.names(), ["vi", "pi", "opi", "mm-vi"]);
        assert!(matches!(r.get("sarsa"), Err(Error::Unknown { .. })));
    }

    #[test]
    fn all_graph_solvers_agree_on_chain() {
        let p = unit_chain(6);
        let oracle = oracle_dijkstra(&p).unwrap();
        let reg = SolverRegistry::builtin();
        for name in ["vi", "pi", "opi"] {
            let req = SolveRequest {
                init: Init::InfOutside,
                ..Default::default()
            };
            let out = reg.get(name).unwrap().solve(&p, &req).unwrap();
            assert!(out.converged, "{name}");
            assert_eq!(out.value, oracle, "{name}");
        }
    }

    #[test]
    fn minimax_solver_needs_disturbances() {
        let reg = SolverRegistry::builtin();
        let mm = reg.get("mm-vi").unwrap();
        assert!(matches!(mm.solve(&example1(), &SolveRequest::default()), Err(Error::MissingDisturbances)));
        let out = mm
            .solve(&adversarial_line(), &SolveRequest { init: Init::InfOutside, ..Default::default() })
            .unwrap();
        assert!(out.converged);
    }

    #[test]
    fn pi_from_move_policy_stalls() {
        let p = example1();
        let req = SolveRequest {
            init: Init::Policy(Policy::by_label(&p, "move")),
            ..Default::default()
        };
        let out = SolverRegistry::builtin().get("pi").unwrap().solve(&p, &req).unwrap();
        assert_eq!(out.value.get(1), ExtCost::ONE);
        assert_eq!(out.stop, "policy_repeat");
    }

    #[test]
    fn opi_refuses_zero_seed() {
        let p = unit_chain(3);
        let r = SolverRegistry::builtin().get("opi").unwrap().solve(&p, &SolveRequest::default());
        assert!(matches!(r, Err(Error::OpiSeed { .. })));
    }
}
