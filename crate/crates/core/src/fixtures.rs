//! Canonical small problems, the analytic VI counterexample, and a
//! name-addressable registry of runnable fixtures.

use std::fmt;

use crate::error::{Error, Result};
use crate::ext::{ext_add, ExtCost};
use crate::finite::{oracle_policy_enum, positive_cycle_check, DEFAULT_ENUM_BUDGET};
use crate::grid::{build_linear_problem, riccati_oracle, GridSpec, LinearSystemSpec};
use crate::minimax::{min_time_reachability, target_tube, tube_cost_zero_set};
use crate::model::{Policy, Problem, ProblemBuilder, ValueFunction};
use crate::pi::{run_pi, PiResult, TieBreak};
use crate::vi::{default_seeds, multiplicity_scan, residual, residual_on, run_vi, Seed, ViConfig, DEFAULT_GRID_TOL};

/// Two states, `0` terminal. State `1` can stay for free or move to `0` at
/// cost 1; `stay` is control 0.
pub fn example1() -> Problem {
    let mut b = ProblemBuilder::new();
    let s = b.add_states(["0", "1"]);
    b.set_terminal(s[0]);
    b.add_action(s[1], "stay", s[1], 0.0);
    b.add_action(s[1], "move", s[0], 1.0);
    b.build().expect("valid")
}

/// States `0..n`, `0` terminal, each other state steps left at unit cost.
pub fn unit_chain(n: usize) -> Problem {
    let mut b = ProblemBuilder::new();
    let s = b.add_states((0..n.max(1)).map(|i| i.to_string()));
    b.set_terminal(s[0]);
    for i in 1..s.len() {
        b.add_action(s[i], "left", s[i - 1], 1.0);
    }
    b.build().expect("valid")
}

/// `w × h` grid of cells `(col,row)` minus `walls`, unit-cost compass moves,
/// blocked moves stay in place. `target` is the single terminal cell.
pub fn gridworld(w: usize, h: usize, walls: &[(usize, usize)], target: (usize, usize)) -> Problem {
    let open = |c: usize, r: usize| c < w && r < h && !walls.contains(&(c, r));
    let mut b = ProblemBuilder::new();
    let mut index = vec![vec![None; h]; w];
    for r in 0..h {
        for c in 0..w {
            if open(c, r) {
                index[c][r] = Some(b.add_state(format!("({c},{r})")));
            }
        }
    }
    let t = index[target.0][target.1].expect("target must be an open cell");
    b.set_terminal(t);
    for r in 0..h {
        for c in 0..w {
            let Some(x) = index[c][r] else { continue };
            if x == t {
                continue;
            }
            let moves = [("N", 0isize, 1isize), ("S", 0, -1), ("E", 1, 0), ("W", -1, 0)];
            for (label, dc, dr) in moves {
                let (nc, nr) = (c as isize + dc, r as isize + dr);
                let y = if nc >= 0 && nr >= 0 && open(nc as usize, nr as usize) {
                    index[nc as usize][nr as usize].unwrap()
                } else {
                    x
                };
                b.add_action(x, label, y, 1.0);
            }
        }
    }
    b.build().expect("valid")
}

/// Four states on a line, target `{0}`. Control `s ∈ {1, 2}` steps left,
/// the disturbance pushes right by 0 or 1; positions clamp to `[0, 3]`.
pub fn adversarial_line() -> Problem {
    let mut b = ProblemBuilder::new().with_disturbances(["calm", "push"]);
    let s = b.add_states(["0", "1", "2", "3"]);
    b.set_terminal(s[0]);
    for x in 1..4isize {
        for step in [1isize, 2] {
            let outs: Vec<(usize, f64)> = [0isize, 1]
                .iter()
                .map(|w| ((x - step + w).clamp(0, 3) as usize, 1.0))
                .collect();
            b.add_minimax_action(s[x as usize], format!("left{step}"), &outs);
        }
    }
    b.build().expect("valid")
}

/// Five states with two disturbances and the tube `{0, 1, 2, 3}`. State 3
/// can always be pushed to 4, so it leaves the tube first; state 2 relies on
/// 3 and leaves next.
pub fn tube_fixture() -> (Problem, Vec<bool>) {
    let mut b = ProblemBuilder::new().with_disturbances(["calm", "push"]);
    let s = b.add_states(["0", "1", "2", "3", "4"]);
    b.set_terminal(s[0]);
    b.add_minimax_action(s[1], "hold", &[(s[1], 1.0), (s[0], 1.0)]);
    b.add_minimax_action(s[1], "left", &[(s[0], 1.0), (s[0], 1.0)]);
    b.add_minimax_action(s[2], "hold", &[(s[2], 1.0), (s[3], 1.0)]);
    b.add_minimax_action(s[2], "left", &[(s[1], 1.0), (s[3], 1.0)]);
    b.add_minimax_action(s[3], "hold", &[(s[3], 1.0), (s[4], 1.0)]);
    b.add_minimax_action(s[3], "left", &[(s[2], 1.0), (s[4], 1.0)]);
    b.add_minimax_action(s[4], "stay", &[(s[4], 1.0), (s[4], 1.0)]);
    (b.build().expect("valid"), vec![true, true, true, true, false])
}

/// `x' = 2x + u`, `g = u²` on `[-1, 1]` (201 nodes) with 41 controls in
/// `[-4, 4]`.
pub fn example4_problem() -> Problem {
    build_linear_problem(
        &LinearSystemSpec::scalar(2.0, 1.0, 0.0, 1.0),
        &GridSpec::scalar((-1.0, 1.0), 201, (-4.0, 4.0), 41),
    )
    .expect("valid grid")
}

/// `x' = 2x + u`, `g = x² + u²` on `[-1, 1]` (201 nodes) with 801 controls
/// in `[-4, 4]`. Control spacing equals state spacing, so every successor
/// is a node.
pub fn lq_problem() -> Problem {
    build_linear_problem(
        &LinearSystemSpec::scalar(2.0, 1.0, 1.0, 1.0),
        &GridSpec::scalar((-1.0, 1.0), 201, (-4.0, 4.0), 801),
    )
    .expect("valid grid")
}

/// Closed-form VI iterate for the continuous-control counterexample at
/// `x ≥ 0`.
pub fn example2_iterate(k: u64, x: f64) -> f64 {
    (k as f64 * x).min(1.0)
}

#[derive(Clone, Debug)]
pub struct Example2Report {
    pub samples: usize,
    pub ks_checked: Vec<u64>,
    pub max_recursion_error: f64,
    pub max_right_limit_error: f64,
    pub k_max: u64,
    pub iterate_at_zero_stays_zero: bool,
    pub optimal_at_zero: f64,
    pub cheapest_sampled_policy_at_zero: f64,
}

impl Example2Report {
    pub fn passed(&self) -> bool {
        self.max_recursion_error <= 1e-12
            && self.max_right_limit_error <= 1e-12
            && self.iterate_at_zero_stays_zero
            && self.optimal_at_zero == 1.0
            && self.cheapest_sampled_policy_at_zero >= 1.0
    }
}

fn example2_ks(k_max: u64) -> Vec<u64> {
    let mut ks: Vec<u64> = (0..=100.min(k_max)).collect();
    let mut k = 100u64;
    while k < k_max {
        for m in [2, 5, 10] {
            let v = k * m;
            if v <= k_max {
                ks.push(v);
            }
        }
        k *= 10;
    }
    ks.push(k_max);
    ks.sort_unstable();
    ks.dedup();
    ks
}

/// Checks the closed form `J_k(x) = min{1, kx}` against the reduced
/// recursion `J_{k+1}(x) = min{1, x + J_k(x)}` at every sample, the
/// right-limit step `inf_{u>0} J_k(x+u) = J_k(x)`, and `J_k(0) = 0` for all
/// `k ≤ k_max` while the optimal cost at 0 is 1.
pub fn verify_example2(k_max: u64, sample_xs: &[f64]) -> Result<Example2Report> {
    if sample_xs.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidArgument("samples must be finite and nonnegative".into()));
    }
    let ks = example2_ks(k_max);
    let mut rec_err = 0.0f64;
    let mut lim_err = 0.0f64;
    for &x in sample_xs {
        for &k in &ks {
            let lhs = example2_iterate(k + 1, x);
            let rhs = (x + example2_iterate(k, x)).min(1.0);
            rec_err = rec_err.max((lhs - rhs).abs() / lhs.max(1.0));
            // J_k is nondecreasing and continuous, so J_k(x+u) ↓ J_k(x) as u ↓ 0.
            for u in [1e-3, 1e-6, 1e-9, 1e-12] {
                let v = example2_iterate(k, x + u);
                let base = example2_iterate(k, x);
                if v < base {
                    lim_err = f64::INFINITY;
                }
                lim_err = lim_err.max((v - base - k as f64 * u).max(0.0));
            }
        }
    }
    let mut j0 = 0.0f64;
    let mut zero_ok = true;
    for k in 0..k_max {
        j0 = (0.0 + j0).min(1.0);
        zero_ok &= j0 == 0.0 && example2_iterate(k + 1, 0.0) == 0.0;
    }
    // Move-then-stop policies from 0 pay every visited position plus the
    // stopping cost; policies that never stop pay at least u per step.
    let mut cheapest = 1.0f64;
    for first in [1e-9, 1e-6, 1e-3, 0.1, 1.0] {
        for moves in 1..=20u32 {
            let mut x = 0.0;
            let mut cost = 0.0;
            for i in 0..moves {
                cost += x;
                x += first / f64::from(i + 1);
            }
            cheapest = cheapest.min(cost + 1.0);
        }
    }
    Ok(Example2Report {
        samples: sample_xs.len(),
        ks_checked: ks,
        max_recursion_error: rec_err,
        max_right_limit_error: lim_err,
        k_max,
        iterate_at_zero_stays_zero: zero_ok,
        optimal_at_zero: 1.0,
        cheapest_sampled_policy_at_zero: cheapest,
    })
}

/// Samples in `[0, 2]` from a fixed seed.
pub fn example2_samples(n: usize, seed: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut xs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=2.0)).collect();
    if let Some(first) = xs.first_mut() {
        *first = 0.0;
    }
    xs
}

#[derive(Clone, Debug)]
pub struct Example3Report {
    pub keep_current: PiResult,
    pub least_index: PiResult,
    pub from_stay: PiResult,
    pub optimal: ValueFunction,
}

/// PI on [`example1`] from "move": it stalls at `J(1) = 1` when the current
/// control is kept on ties and escapes to `J(1) = 0` under least-index ties.
pub fn build_example3_run() -> Result<Example3Report> {
    let p = example1();
    let mv = Policy::by_label(&p, "move");
    let keep = run_pi(&p, &mv, TieBreak::KeepCurrent, 100)?;
    let least = run_pi(&p, &mv, TieBreak::LeastIndex, 100)?;
    let from_stay = run_pi(&p, &Policy::by_label(&p, "stay"), TieBreak::KeepCurrent, 100)?;
    let optimal = oracle_policy_enum(&p, DEFAULT_ENUM_BUDGET)?;
    let check = |ok: bool, what: &str| {
        if ok {
            Ok(())
        } else {
            Err(Error::FixtureCheck(what.to_string()))
        }
    };
    check(keep.final_value.get(1) == ExtCost::ONE, "keep-current run should stall at J(1)=1")?;
    check(keep.final_policy == mv, "keep-current run should keep the move policy")?;
    check(least.final_value.get(1) == ExtCost::ZERO, "least-index run should reach J(1)=0")?;
    check(from_stay.iterations() == 0, "stay start should already be optimal")?;
    check(optimal.get(1) == ExtCost::ZERO, "optimal J(1) should be 0")?;
    Ok(Example3Report {
        keep_current: keep,
        least_index: least,
        from_stay,
        optimal,
    })
}

#[derive(Clone, Debug)]
pub struct DescentReport {
    pub trajectory: Vec<usize>,
    pub values: Vec<ExtCost>,
    pub reached_terminal: bool,
    /// Largest `|J*(x_0) − (Σ_{i<k} g_i + J*(x_k))|` along the trajectory.
    pub telescoping_error: f64,
}

/// Follows `mu` from `x0` for up to `horizon` steps and checks that `jstar`
/// never increases along the way.
pub fn trajectory_descent_check(
    p: &Problem,
    mu: &Policy,
    x0: usize,
    horizon: usize,
    jstar: &ValueFunction,
) -> Result<DescentReport> {
    p.require_deterministic()?;
    mu.check_admissible(p)?;
    jstar.check_domain(p)?;
    let start = jstar.get(x0);
    if start.is_infinite() {
        return Err(Error::InvalidArgument(format!("J*({}) is infinite", p.state_id(x0))));
    }
    let mut x = x0;
    let mut traj = vec![x];
    let mut vals = vec![start];
    let mut acc = ExtCost::ZERO;
    let mut err = 0.0f64;
    for k in 0..horizon {
        if p.is_terminal(x) {
            break;
        }
        let (y, g) = p.actions(x)[mu.get(x)].deterministic().expect("checked");
        acc = ext_add(acc, g);
        let jy = jstar.get(y);
        if jy > jstar.get(x) {
            return Err(Error::MonotonicityBreach {
                iteration: k,
                state: p.state_id(y).to_string(),
                detail: format!("J* rose from {} to {}", jstar.get(x), jy),
            });
        }
        err = err.max(start.distance(ext_add(acc, jy)));
        x = y;
        traj.push(x);
        vals.push(jy);
    }
    Ok(DescentReport {
        reached_terminal: p.is_terminal(x),
        trajectory: traj,
        values: vals,
        telescoping_error: err,
    })
}

/// Sup-norm relative error of `j` against `K x²` on `mask`.
pub fn quadratic_relative_error(p: &Problem, j: &ValueFunction, k: f64, mask: &[bool]) -> f64 {
    let nodes = &p.grid().expect("grid problem").nodes;
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for (x, node) in nodes.iter().enumerate() {
        if !mask[x] {
            continue;
        }
        let exact = k * node[0] * node[0];
        num = num.max(j.get(x).distance(ExtCost::of(exact)));
        den = den.max(exact);
    }
    num / den
}

/// One line of a fixture run.
#[derive(Clone, Debug)]
pub struct Check {
    pub label: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct FixtureReport {
    pub name: &'static str,
    pub checks: Vec<Check>,
}

impl FixtureReport {
    fn new(name: &'static str) -> Self {
        FixtureReport { name, checks: Vec::new() }
    }

    fn check(&mut self, label: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            label: label.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for FixtureReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "fixture {}", self.name)?;
        for c in &self.checks {
            let tag = if c.passed { "ok  " } else { "FAIL" };
            writeln!(f, "  {tag} {}: {}", c.label, c.detail)?;
        }
        Ok(())
    }
}

pub trait Fixture: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    /// The underlying problem, when there is a finite one.
    fn problem(&self) -> Option<Problem>;
    fn run(&self) -> Result<FixtureReport>;
}

struct Example1Fixture;
struct Example2Fixture;
struct Example3Fixture;
struct Example4Fixture;
struct LqFixture;
struct MinTimeFixture;
struct TubeFixture;

impl Fixture for Example1Fixture {
    fn name(&self) -> &'static str {
        "example1"
    }
    fn summary(&self) -> &'static str {
        "two-state problem with a free self-loop: a continuum of Bellman solutions"
    }
    fn problem(&self) -> Option<Problem> {
        Some(example1())
    }
    fn run(&self) -> Result<FixtureReport> {
        let p = example1();
        let mut r = FixtureReport::new(self.name());
        let jstar = oracle_policy_enum(&p, DEFAULT_ENUM_BUDGET)?;
        r.check("optimal cost", jstar == ValueFunction::zero(2), format!("J* = ({}, {})", jstar.get(0), jstar.get(1)));
        for c in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let res = residual(&p, &ValueFunction::from_f64(&[0.0, c])?);
            r.check("residual", res == 0.0, format!("J = (0, {c}) has residual {res}"));
        }
        let scan = multiplicity_scan(&p, &default_seeds(&p), &ViConfig::default())?;
        let mut found: Vec<String> = scan.fixed_points.iter().map(|f| f.value.get(1).to_string()).collect();
        found.sort();
        r.check("fixed points", found == ["0", "1"], format!("J(1) in {{{}}}", found.join(", ")));
        let cycles = positive_cycle_check(&p);
        r.check("zero-cost cycle", !cycles.has_positive_cycles_only, format!("{:?}", cycles.zero_cost_cycles));
        Ok(r)
    }
}

impl Fixture for Example2Fixture {
    fn name(&self) -> &'static str {
        "example2"
    }
    fn summary(&self) -> &'static str {
        "continuous-control problem where VI from zero misses the optimal cost at 0"
    }
    fn problem(&self) -> Option<Problem> {
        None
    }
    fn run(&self) -> Result<FixtureReport> {
        let rep = verify_example2(1_000_000, &example2_samples(10_000, 2))?;
        let mut r = FixtureReport::new(self.name());
        r.check(
            "closed form",
            rep.max_recursion_error <= 1e-12 && rep.max_right_limit_error <= 1e-12,
            format!(
                "{} samples, {} iteration counts, max error {:e}",
                rep.samples,
                rep.ks_checked.len(),
                rep.max_recursion_error
            ),
        );
        r.check(
            "iterate at 0",
            rep.iterate_at_zero_stays_zero,
            format!("J_k(0) = 0 for k <= {}", rep.k_max),
        );
        r.check(
            "optimal at 0",
            rep.optimal_at_zero == 1.0 && rep.cheapest_sampled_policy_at_zero >= 1.0,
            format!("J*(0) = 1, cheapest sampled policy {}", rep.cheapest_sampled_policy_at_zero),
        );
        Ok(r)
    }
}

impl Fixture for Example3Fixture {
    fn name(&self) -> &'static str {
        "example3"
    }
    fn summary(&self) -> &'static str {
        "policy iteration stalls at a suboptimal policy under keep-current ties"
    }
    fn problem(&self) -> Option<Problem> {
        Some(example1())
    }
    fn run(&self) -> Result<FixtureReport> {
        let mut r = FixtureReport::new(self.name());
        match build_example3_run() {
            Ok(rep) => {
                r.check(
                    "keep current",
                    true,
                    format!(
                        "stops ({}) with J(1) = {}",
                        rep.keep_current.stopped_reason,
                        rep.keep_current.final_value.get(1)
                    ),
                );
                r.check(
                    "least index",
                    true,
                    format!("reaches J(1) = {}", rep.least_index.final_value.get(1)),
                );
                r.check("optimal", true, format!("J*(1) = {}", rep.optimal.get(1)));
            }
            Err(Error::FixtureCheck(msg)) => r.check("stall", false, msg),
            Err(e) => return Err(e),
        }
        Ok(r)
    }
}

impl Fixture for Example4Fixture {
    fn name(&self) -> &'static str {
        "example4"
    }
    fn summary(&self) -> &'static str {
        "unstable scalar system with control cost only: J = 0 and J = 3x² both solve Bellman's equation"
    }
    fn problem(&self) -> Option<Problem> {
        Some(example4_problem())
    }
    fn run(&self) -> Result<FixtureReport> {
        let p = example4_problem();
        let g = p.grid().expect("grid");
        let mask = g.interior_mask(0.5);
        let zero = ValueFunction::zero(p.num_states());
        let quad = g.sample(|x| 3.0 * x[0] * x[0])?;
        let mut r = FixtureReport::new(self.name());
        for (label, j) in [("J = 0", &zero), ("J = 3x^2", &quad)] {
            let res = residual_on(&p, j, &mask);
            r.check(
                "residual",
                res <= g.tolerance,
                format!("{label}: {res:.3e} on |x| <= 0.5 (tolerance {:.3e})", g.tolerance),
            );
        }
        let seeds = [Seed::new("zero", zero), Seed::new("3x^2", quad)];
        let scan = multiplicity_scan(&p, &seeds, &ViConfig::with_tol(DEFAULT_GRID_TOL))?;
        r.check(
            "multiplicity",
            scan.in_j_count() == 2,
            format!("{} distinct fixed points in the class", scan.in_j_count()),
        );
        Ok(r)
    }
}

impl Fixture for LqFixture {
    fn name(&self) -> &'static str {
        "lq"
    }
    fn summary(&self) -> &'static str {
        "scalar linear-quadratic problem compared against the Riccati solution"
    }
    fn problem(&self) -> Option<Problem> {
        Some(lq_problem())
    }
    fn run(&self) -> Result<FixtureReport> {
        let p = lq_problem();
        let g = p.grid().expect("grid").clone();
        let cfg = ViConfig::with_tol(DEFAULT_GRID_TOL);
        let from_zero = run_vi(&p, &ValueFunction::zero(p.num_states()), &cfg)?;
        let from_inf = run_vi(&p, &ValueFunction::inf_outside(&p), &cfg)?;
        let k = riccati_oracle(&g.system)?[(0, 0)];
        let gap = from_zero.final_value.sup_distance(&from_inf.final_value);
        let rel = quadratic_relative_error(&p, &from_zero.final_value, k, &g.interior_mask(0.5));
        let mut r = FixtureReport::new(self.name());
        r.check(
            "convergence",
            from_zero.converged && from_inf.converged,
            format!("{} and {} iterations", from_zero.iterations, from_inf.iterations),
        );
        r.check(
            "uniqueness",
            gap <= 2.0 * g.tolerance,
            format!("seeds differ by {gap:.3e} (bound {:.3e})", 2.0 * g.tolerance),
        );
        r.check("riccati", rel <= 0.05, format!("K = {k:.6}, relative error {rel:.3e} on |x| <= 0.5"));
        Ok(r)
    }
}

impl Fixture for MinTimeFixture {
    fn name(&self) -> &'static str {
        "min-time"
    }
    fn summary(&self) -> &'static str {
        "guaranteed minimum-time reachability on a four-state line with a pushing adversary"
    }
    fn problem(&self) -> Option<Problem> {
        Some(adversarial_line())
    }
    fn run(&self) -> Result<FixtureReport> {
        let p = adversarial_line();
        let res = min_time_reachability(&p)?;
        let expected = ValueFunction::from_f64(&[0.0, 1.0, 2.0, 3.0])?;
        let mut r = FixtureReport::new(self.name());
        let shown: Vec<String> = res.final_value.values().iter().map(|v| v.to_string()).collect();
        r.check(
            "steps",
            res.converged && res.final_value == expected,
            format!("({})", shown.join(", ")),
        );
        Ok(r)
    }
}

impl Fixture for TubeFixture {
    fn name(&self) -> &'static str {
        "tube"
    }
    fn summary(&self) -> &'static str {
        "target tube on a five-state problem, cross-checked against the tube cost"
    }
    fn problem(&self) -> Option<Problem> {
        Some(tube_fixture().0)
    }
    fn run(&self) -> Result<FixtureReport> {
        let (p, hat) = tube_fixture();
        let t = target_tube(&p, &hat)?;
        let zero = tube_cost_zero_set(&p, &hat)?;
        let members = |s: &[bool]| -> String {
            let ids: Vec<&str> = (0..s.len()).filter(|&x| s[x]).map(|x| p.state_id(x)).collect();
            format!("{{{}}}", ids.join(", "))
        };
        let mut r = FixtureReport::new(self.name());
        r.check(
            "fixed set",
            t.fixed_set == [true, true, false, false, false],
            format!("{} after {} iterations", members(&t.fixed_set), t.iterations_to_fix),
        );
        r.check("tube cost", zero == t.fixed_set, format!("zero set {}", members(&zero)));
        Ok(r)
    }
}

/// Every built-in fixture, in a stable order.
pub fn registry() -> Vec<Box<dyn Fixture>> {
    vec![
        Box::new(Example1Fixture),
        Box::new(Example2Fixture),
        Box::new(Example3Fixture),
        Box::new(Example4Fixture),
        Box::new(LqFixture),
        Box::new(MinTimeFixture),
        Box::new(TubeFixture),
    ]
}

pub fn find_fixture(name: &str) -> Result<Box<dyn Fixture>> {
    let all = registry();
    let known = all.iter().map(|f| f.name()).collect::<Vec<_>>().join(", ");
    all.into_iter().find(|f| f.name() == name).ok_or(Error::Unknown {
        kind: "fixture",
        name: name.into(),
        known,
    })
}
