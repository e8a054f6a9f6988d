//! Bellman operator, value iteration, residual certification and
//! fixed-point multiplicity scanning.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ext::ExtCost;
use crate::finite::evaluate_unchecked;
use crate::model::{Policy, Problem, ValueFunction};

pub const DEFAULT_GRAPH_TOL: f64 = 1e-9;
pub const DEFAULT_GRID_TOL: f64 = 1e-6;

/// One application of the Bellman operator, with a greedy policy attaining
/// the minimum (least control index among ties).
///
/// For minimax problems each control is scored by its worst disturbance.
pub fn bellman_operator(p: &Problem, j: &ValueFunction) -> (ValueFunction, Policy) {
    let n = p.num_states();
    let mut values = Vec::with_capacity(n);
    let mut choice = Vec::with_capacity(n);
    for x in 0..n {
        let mut best = ExtCost::INF;
        let mut arg = 0;
        for a in 0..p.actions(x).len() {
            let v = p.action_value(x, a, j);
            if v < best {
                best = v;
                arg = a;
            }
        }
        values.push(best);
        choice.push(arg);
    }
    (ValueFunction::new(values), Policy::new(choice))
}

/// `sup_x |J(x) - (TJ)(x)|` with `∞ - ∞ = 0` and `|∞ - finite| = ∞`.
pub fn residual(p: &Problem, j: &ValueFunction) -> f64 {
    let (tj, _) = bellman_operator(p, j);
    j.sup_distance(&tj)
}

/// Residual restricted to the states where `mask` is set.
pub fn residual_on(p: &Problem, j: &ValueFunction, mask: &[bool]) -> f64 {
    let (tj, _) = bellman_operator(p, j);
    j.restrict_distance(&tj, mask)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    /// Sup-norm change from the previous iterate over states finite in both.
    pub sup_change: f64,
    /// Bellman residual of this iterate.
    pub residual: f64,
    pub num_infinite: usize,
    pub snapshot: Option<ValueFunction>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveTrace {
    pub state_ids: Vec<String>,
    pub rows: Vec<TraceRow>,
}

impl SolveTrace {
    pub fn new(p: &Problem) -> Self {
        SolveTrace {
            state_ids: p.state_ids().to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn snapshots(&self) -> impl Iterator<Item = &ValueFunction> {
        self.rows.iter().filter_map(|r| r.snapshot.as_ref())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Monotonicity {
    Constant,
    Nondecreasing,
    Nonincreasing,
    Mixed,
}

impl Monotonicity {
    fn observe(self, up: bool, down: bool) -> Self {
        use Monotonicity::*;
        match (self, up, down) {
            (Mixed, _, _) | (_, true, true) => Mixed,
            (s, false, false) => s,
            (Constant | Nondecreasing, true, false) => Nondecreasing,
            (Constant | Nonincreasing, false, true) => Nonincreasing,
            _ => Mixed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ViConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub record_snapshots: bool,
}

impl Default for ViConfig {
    fn default() -> Self {
        ViConfig {
            tol: DEFAULT_GRAPH_TOL,
            max_iters: 10_000,
            record_snapshots: false,
        }
    }
}

impl ViConfig {
    pub fn with_tol(tol: f64) -> Self {
        ViConfig { tol, ..Default::default() }
    }

    pub fn snapshots(mut self) -> Self {
        self.record_snapshots = true;
        self
    }

    pub fn max_iters(mut self, n: usize) -> Self {
        self.max_iters = n;
        self
    }
}

#[derive(Clone, Debug)]
pub struct ViResult {
    pub final_value: ValueFunction,
    /// Greedy policy with respect to `final_value`.
    pub policy: Policy,
    pub iterations: usize,
    pub final_sup_change: f64,
    pub final_residual: f64,
    pub converged: bool,
    pub monotonicity: Monotonicity,
    pub trace: SolveTrace,
}

/// Iterates `J_{k+1} = T J_k` from `j0`.
///
/// Stops once the change over finite-valued states is at most `tol`, the set
/// of infinite states is unchanged, and the residual of the current iterate
/// is at most `tol`. Hitting `max_iters` returns with `converged = false`.
pub fn run_vi(p: &Problem, j0: &ValueFunction, cfg: &ViConfig) -> Result<ViResult> {
    j0.check_domain(p)?;
    if !(cfg.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", cfg.tol)));
    }
    let mut trace = SolveTrace::new(p);
    let mut cur = j0.clone();
    let (mut next, mut policy) = bellman_operator(p, &cur);
    let mut mono = Monotonicity::Constant;
    let mut change = 0.0;
    let mut res = cur.sup_distance(&next);
    let mut converged = false;
    let mut iterations = 0;
    for k in 1..=cfg.max_iters {
        let (c, pattern_changed) = cur.finite_change(&next);
        let up = cur.values().iter().zip(next.values()).any(|(a, b)| b > a);
        let down = cur.values().iter().zip(next.values()).any(|(a, b)| b < a);
        mono = mono.observe(up, down);
        cur = next;
        let (after, greedy) = bellman_operator(p, &cur);
        res = cur.sup_distance(&after);
        policy = greedy;
        change = c;
        iterations = k;
        trace.rows.push(TraceRow {
            iter: k,
            sup_change: c,
            residual: res,
            num_infinite: cur.num_infinite(),
            snapshot: cfg.record_snapshots.then(|| cur.clone()),
        });
        if c <= cfg.tol && !pattern_changed && res <= cfg.tol {
            converged = true;
            break;
        }
        next = after;
    }
    Ok(ViResult {
        final_value: cur,
        policy,
        iterations,
        final_sup_change: change,
        final_residual: res,
        converged,
        monotonicity: mono,
        trace,
    })
}

#[derive(Clone, Debug)]
pub struct Seed {
    pub label: String,
    pub value: ValueFunction,
}

impl Seed {
    pub fn new(label: impl Into<String>, value: ValueFunction) -> Self {
        Seed {
            label: label.into(),
            value,
        }
    }
}

/// Zero, 0-on-terminal/∞-elsewhere, and (for graph problems) the costs of a
/// deterministic sample of stationary policies.
pub fn default_seeds(p: &Problem) -> Vec<Seed> {
    let mut seeds = vec![
        Seed::new("zero", ValueFunction::zero(p.num_states())),
        Seed::new("inf-outside", ValueFunction::inf_outside(p)),
    ];
    if p.require_deterministic().is_err() || !p.validate().is_valid() {
        return seeds;
    }
    let n = p.num_states();
    let mut policies = vec![
        Policy::first_action(p),
        Policy::new((0..n).map(|x| p.actions(x).len() - 1).collect()),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..6 {
        policies.push(Policy::new((0..n).map(|x| rng.gen_range(0..p.actions(x).len())).collect()));
    }
    let mut seen = Vec::new();
    for (i, mu) in policies.into_iter().enumerate() {
        if seen.contains(&mu) {
            continue;
        }
        seeds.push(Seed::new(format!("policy-{i}"), evaluate_unchecked(p, &mu)));
        seen.push(mu);
    }
    seeds
}

#[derive(Clone, Debug)]
pub struct CertifiedFixedPoint {
    pub value: ValueFunction,
    pub in_j_class: bool,
    pub residual: f64,
    pub seeds: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct SkippedSeed {
    pub label: String,
    pub iterations: usize,
    pub last_change: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, Default)]
pub struct MultiplicityReport {
    pub fixed_points: Vec<CertifiedFixedPoint>,
    pub skipped: Vec<SkippedSeed>,
}

impl MultiplicityReport {
    pub fn in_j_count(&self) -> usize {
        self.fixed_points.iter().filter(|f| f.in_j_class).count()
    }
}

/// Runs VI from every seed and keeps the distinct limits whose residual is
/// within `cfg.tol`. Limits closer than `10 · tol` are merged.
pub fn multiplicity_scan(p: &Problem, seeds: &[Seed], cfg: &ViConfig) -> Result<MultiplicityReport> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("multiplicity scan needs at least one seed".into()));
    }
    let mut report = MultiplicityReport::default();
    for seed in seeds {
        let r = run_vi(p, &seed.value, cfg)?;
        if !r.converged || r.final_residual > cfg.tol {
            report.skipped.push(SkippedSeed {
                label: seed.label.clone(),
                iterations: r.iterations,
                last_change: r.final_sup_change,
                residual: r.final_residual,
            });
            continue;
        }
        match report
            .fixed_points
            .iter_mut()
            .find(|f| f.value.sup_distance(&r.final_value) <= 10.0 * cfg.tol)
        {
            Some(f) => f.seeds.push(seed.label.clone()),
            None => report.fixed_points.push(CertifiedFixedPoint {
                in_j_class: r.final_value.in_j_class(p),
                value: r.final_value,
                residual: r.final_residual,
                seeds: vec![seed.label.clone()],
            }),
        }
    }
    Ok(report)
}
