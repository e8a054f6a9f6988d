//! Discretized linear systems `x' = Ax + Bu` on a rectangular grid, with
//! multilinear interpolation of successor values and a Riccati oracle.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::ExtCost;
use crate::model::{Action, Outcome, Problem, Successor, ValueFunction};

/// Fractional offsets below this (in units of grid spacing) snap to a node.
const SNAP: f64 = 1e-9;

/// A tensor grid: per-dimension `[lo, hi]` bounds and point counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axes {
    pub bounds: Vec<(f64, f64)>,
    pub points: Vec<usize>,
}

impl Axes {
    pub fn uniform_1d(lo: f64, hi: f64, points: usize) -> Self {
        Axes {
            bounds: vec![(lo, hi)],
            points: vec![points],
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self, what: &str) -> Result<()> {
        if self.bounds.is_empty() || self.bounds.len() != self.points.len() {
            return Err(Error::InvalidArgument(format!(
                "{what}: {} bounds for {} point counts",
                self.bounds.len(),
                self.points.len()
            )));
        }
        for (d, (&(lo, hi), &n)) in self.bounds.iter().zip(&self.points).enumerate() {
            if n < 2 {
                return Err(Error::InvalidArgument(format!("{what}: dimension {d} needs at least 2 points")));
            }
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidArgument(format!("{what}: bounds [{lo}, {hi}] not ordered")));
            }
        }
        Ok(())
    }

    pub fn spacing(&self) -> Vec<f64> {
        self.bounds
            .iter()
            .zip(&self.points)
            .map(|(&(lo, hi), &n)| (hi - lo) / (n - 1) as f64)
            .collect()
    }

    fn coord(&self, d: usize, i: usize) -> f64 {
        let (lo, hi) = self.bounds[d];
        let n = self.points[d];
        if i == n - 1 {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    }

    /// All points, last dimension varying fastest.
    pub fn nodes(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    fn multi_index(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for d in (0..self.dim()).rev() {
            idx[d] = k % self.points[d];
            k /= self.points[d];
        }
        idx
    }

    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.points).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn point(&self, k: usize) -> Vec<f64> {
        self.multi_index(k)
            .iter()
            .enumerate()
            .map(|(d, &i)| self.coord(d, i))
            .collect()
    }

    /// Clamps `x` into the box and returns the interpolation corners with
    /// positive weight, plus whether clamping happened.
    pub fn locate(&self, x: &[f64]) -> (Successor, bool) {
        let mut clamped = false;
        let mut per_dim: Vec<Vec<(usize, f64)>> = Vec::with_capacity(self.dim());
        for (d, &xd) in x.iter().enumerate() {
            let (lo, hi) = self.bounds[d];
            let n = self.points[d];
            let h = (hi - lo) / (n - 1) as f64;
            let mut v = xd;
            if v < lo - SNAP * h || v > hi + SNAP * h {
                clamped = true;
            }
            v = v.clamp(lo, hi);
            let t = (v - lo) / h;
            let mut i = t.floor() as usize;
            let mut frac = t - i as f64;
            if i >= n - 1 {
                i = n - 1;
                frac = 0.0;
            }
            if frac < SNAP {
                per_dim.push(vec![(i, 1.0)]);
            } else if 1.0 - frac < SNAP {
                per_dim.push(vec![(i + 1, 1.0)]);
            } else {
                per_dim.push(vec![(i, 1.0 - frac), (i + 1, frac)]);
            }
        }
        let mut corners: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 1.0)];
        for opts in &per_dim {
            corners = corners
                .into_iter()
                .flat_map(|(idx, w)| {
                    opts.iter().map(move |&(i, wi)| {
                        let mut idx = idx.clone();
                        idx.push(i);
                        (idx, w * wi)
                    })
                })
                .collect();
        }
        let succ = if corners.len() == 1 {
            Successor::State(self.flat(&corners[0].0))
        } else {
            Successor::Blend(corners.iter().map(|(idx, w)| (self.flat(idx), *w)).collect())
        };
        (succ, clamped)
    }

    /// Index of the node at the origin, if the grid has one.
    fn origin(&self) -> Option<usize> {
        let mut idx = Vec::with_capacity(self.dim());
        for d in 0..self.dim() {
            let (lo, _) = self.bounds[d];
            let h = self.spacing()[d];
            let t = -lo / h;
            let i = t.round();
            if (t - i).abs() > SNAP || i < 0.0 || i as usize >= self.points[d] {
                return None;
            }
            idx.push(i as usize);
        }
        Some(self.flat(&idx))
    }

    /// Largest Euclidean norm over the box.
    fn radius(&self) -> f64 {
        self.bounds
            .iter()
            .map(|&(lo, hi)| lo.abs().max(hi.abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// State grid plus the finite control grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub state: Axes,
    pub controls: Axes,
}

impl GridSpec {
    pub fn scalar(x_bounds: (f64, f64), x_points: usize, u_bounds: (f64, f64), u_points: usize) -> Self {
        GridSpec {
            state: Axes::uniform_1d(x_bounds.0, x_bounds.1, x_points),
            controls: Axes::uniform_1d(u_bounds.0, u_bounds.1, u_points),
        }
    }
}

/// `g(x, u) = q‖x‖^p + r‖u‖^p` with Euclidean norms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub q: f64,
    pub r: f64,
    #[serde(default = "two")]
    pub p: f64,
}

fn two() -> f64 {
    2.0
}

impl CostSpec {
    pub fn quadratic(q: f64, r: f64) -> Self {
        CostSpec { q, r, p: 2.0 }
    }

    pub fn eval(&self, x: &[f64], u: &[f64]) -> f64 {
        self.q * norm(x).powf(self.p) + self.r * norm(u).powf(self.p)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSystemSpec {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    pub cost: CostSpec,
}

impl LinearSystemSpec {
    pub fn scalar(a: f64, b: f64, q: f64, r: f64) -> Self {
        LinearSystemSpec {
            a: vec![vec![a]],
            b: vec![vec![b]],
            cost: CostSpec::quadratic(q, r),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.a.len()
    }

    pub fn control_dim(&self) -> usize {
        self.b.first().map_or(0, Vec::len)
    }

    fn check(&self) -> Result<()> {
        let n = self.state_dim();
        let m = self.control_dim();
        if n == 0 || self.a.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidArgument("A must be a nonempty square matrix".into()));
        }
        if self.b.len() != n || m == 0 || self.b.iter().any(|row| row.len() != m) {
            return Err(Error::InvalidArgument(format!("B must be {n} x m with m >= 1")));
        }
        let c = self.cost;
        if !(c.q >= 0.0) || !(c.r >= 0.0) || !(c.p > 0.0) || !c.q.is_finite() || !c.r.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "cost needs q >= 0, r >= 0, p > 0 (got q={}, r={}, p={})",
                c.q, c.r, c.p
            )));
        }
        Ok(())
    }

    pub fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        (0..self.state_dim())
            .map(|i| {
                let ax: f64 = self.a[i].iter().zip(x).map(|(a, v)| a * v).sum();
                let bu: f64 = self.b[i].iter().zip(u).map(|(b, v)| b * v).sum();
                ax + bu
            })
            .collect()
    }
}

/// Geometry carried by a discretized problem.
#[derive(Clone, Debug, PartialEq)]
pub struct GridInfo {
    pub system: LinearSystemSpec,
    pub spec: GridSpec,
    pub nodes: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    pub origin: usize,
    /// Number of (node, control) pairs whose successor left the grid.
    pub clamped: usize,
    /// Residual tolerance `10 · L · h`, with `L` a Lipschitz bound of the
    /// stage cost over the grid box and `h` the largest state spacing.
    pub tolerance: f64,
}

impl GridInfo {
    /// Value at an arbitrary point, interpolated from the nodes.
    pub fn interpolate(&self, j: &ValueFunction, x: &[f64]) -> ExtCost {
        interpolate_value(&self.spec.state, j, x)
    }

    /// Samples `f` at every node.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Result<ValueFunction> {
        ValueFunction::from_f64(&self.nodes.iter().map(|x| f(x)).collect::<Vec<_>>())
    }

    /// Nodes with every coordinate within `frac` of the per-dimension
    /// half-width around the origin.
    pub fn interior_mask(&self, frac: f64) -> Vec<bool> {
        let half: Vec<f64> = self
            .spec
            .state
            .bounds
            .iter()
            .map(|&(lo, hi)| lo.abs().min(hi.abs()))
            .collect();
        self.nodes
            .iter()
            .map(|x| x.iter().zip(&half).all(|(v, r)| v.abs() <= frac * r + 1e-12))
            .collect()
    }
}

fn stage_lipschitz(cost: &CostSpec, rx: f64, ru: f64) -> f64 {
    let p = cost.p;
    let gx = if cost.q == 0.0 { 0.0 } else { p * cost.q * rx.powf(p - 1.0) };
    let gu = if cost.r == 0.0 { 0.0 } else { p * cost.r * ru.powf(p - 1.0) };
    gx.hypot(gu)
}

/// Residual tolerance for a grid: `10 × (stage-cost Lipschitz bound) ×
/// (largest state spacing)`.
pub fn grid_tolerance(sys: &LinearSystemSpec, grid: &GridSpec) -> f64 {
    let h = grid.state.spacing().into_iter().fold(0.0, f64::max);
    10.0 * stage_lipschitz(&sys.cost, grid.state.radius(), grid.controls.radius()) * h
}

fn fmt_point(prefix: &str, v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|c| format!("{}", (c * 1e9).round() / 1e9 + 0.0)).collect();
    format!("{prefix}={}", parts.join(","))
}

/// Finite problem on the grid nodes. The origin node is the terminal state
/// with a single cost-free `stop` control. Successors between nodes are
/// blends of the surrounding corners; successors outside the box are clamped
/// and flagged.
pub fn build_linear_problem(sys: &LinearSystemSpec, grid: &GridSpec) -> Result<Problem> {
    sys.check()?;
    grid.state.check("state grid")?;
    grid.controls.check("control grid")?;
    if grid.state.dim() != sys.state_dim() {
        return Err(Error::InvalidArgument(format!(
            "state grid has {} dimensions, A has {}",
            grid.state.dim(),
            sys.state_dim()
        )));
    }
    if grid.controls.dim() != sys.control_dim() {
        return Err(Error::InvalidArgument(format!(
            "control grid has {} dimensions, B has {} columns",
            grid.controls.dim(),
            sys.control_dim()
        )));
    }
    let origin = grid.state.origin().ok_or_else(|| {
        Error::GridTooCoarse(format!("bounds {:?} with {:?} points", grid.state.bounds, grid.state.points))
    })?;
    let nodes = grid.state.nodes();
    let controls = grid.controls.nodes();
    let labels: Vec<String> = controls.iter().map(|u| fmt_point("u", u)).collect();
    let mut clamped = 0;
    let mut actions = Vec::with_capacity(nodes.len());
    for (k, x) in nodes.iter().enumerate() {
        if k == origin {
            actions.push(vec![Action {
                label: "stop".into(),
                outcomes: vec![Outcome::to(k, ExtCost::ZERO)],
            }]);
            continue;
        }
        let mut acts = Vec::with_capacity(controls.len());
        for (u, label) in controls.iter().zip(&labels) {
            let (next, was_clamped) = grid.state.locate(&sys.step(x, u));
            clamped += was_clamped as usize;
            acts.push(Action {
                label: label.clone(),
                outcomes: vec![Outcome {
                    next,
                    cost: ExtCost::new(sys.cost.eval(x, u))?,
                    clamped: was_clamped,
                }],
            });
        }
        actions.push(acts);
    }
    let mut terminal = vec![false; nodes.len()];
    terminal[origin] = true;
    let states = nodes.iter().map(|x| fmt_point("x", x)).collect();
    let info = GridInfo {
        system: sys.clone(),
        spec: grid.clone(),
        tolerance: grid_tolerance(sys, grid),
        nodes,
        controls,
        origin,
        clamped,
    };
    Problem::from_parts(states, terminal, actions, None)
        .with_grid(info)
        .validated()
}

/// Multilinear interpolation of node values at `x` (clamped into the box).
/// Any positively weighted infinite corner makes the result infinite.
pub fn interpolate_value(axes: &Axes, j: &ValueFunction, x: &[f64]) -> ExtCost {
    j.at(&axes.locate(x).0)
}

/// Fixed point of the discrete Riccati map
/// `K ↦ Q + AᵀKA − AᵀKB(R + BᵀKB)⁻¹BᵀKA` from `K₀ = Q`, with `Q = qI`,
/// `R = rI`. Needs `q > 0`, `r > 0` and a quadratic cost.
pub fn riccati_oracle(sys: &LinearSystemSpec) -> Result<DMatrix<f64>> {
    sys.check()?;
    let c = sys.cost;
    if c.p != 2.0 {
        return Err(Error::OraclePrecondition(format!("cost exponent must be 2, got {}", c.p)));
    }
    if !(c.q > 0.0 && c.r > 0.0) {
        return Err(Error::OraclePrecondition(format!(
            "need q > 0 and r > 0 (got q={}, r={}); with q = 0 the Riccati equation can have several nonnegative solutions",
            c.q, c.r
        )));
    }
    let n = sys.state_dim();
    let m = sys.control_dim();
    let a = DMatrix::from_fn(n, n, |i, j| sys.a[i][j]);
    let b = DMatrix::from_fn(n, m, |i, j| sys.b[i][j]);
    let q = DMatrix::<f64>::identity(n, n) * c.q;
    let r = DMatrix::<f64>::identity(m, m) * c.r;
    let mut k = q.clone();
    let mut change = f64::INFINITY;
    for _ in 0..100_000 {
        let btk = b.transpose() * &k;
        let inner = (&r + &btk * &b)
            .try_inverse()
            .ok_or_else(|| Error::OraclePrecondition("R + BᵀKB is singular".into()))?;
        let next = &q + a.transpose() * &k * &a - a.transpose() * &k * &b * inner * &btk * &a;
        change = (&next - &k).amax();
        k = next;
        if change <= 1e-12 {
            return Ok(k);
        }
    }
    Err(Error::NonConvergence {
        iterations: 100_000,
        last_change: change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vi::{residual, residual_on};

    fn ex4_grid() -> GridSpec {
        GridSpec::scalar((-1.0, 1.0), 201, (-4.0, 4.0), 41)
    }

    #[test]
    fn scalar_riccati_values() {
        let k = riccati_oracle(&LinearSystemSpec::scalar(2.0, 1.0, 1.0, 1.0)).unwrap()[(0, 0)];
        // Positive root of K² − 4K − 1 = 0.
        let root = (4.0 + (16.0f64 + 4.0).sqrt()) / 2.0;
        assert!((k - root).abs() < 1e-10);
        assert!((k - (2.0 + 5f64.sqrt())).abs() < 1e-10);
        let k0 = riccati_oracle(&LinearSystemSpec::scalar(0.0, 1.0, 1.0, 1.0)).unwrap()[(0, 0)];
        assert!((k0 - 1.0).abs() < 1e-12);
        assert!(matches!(
            riccati_oracle(&LinearSystemSpec::scalar(2.0, 1.0, 0.0, 1.0)),
            Err(Error::OraclePrecondition(_))
        ));
    }

    #[test]
    fn riccati_two_dimensional_satisfies_equation() {
        let sys = LinearSystemSpec {
            a: vec![vec![1.0, 1.0], vec![0.0, 1.0]],
            b: vec![vec![0.0], vec![1.0]],
            cost: CostSpec::quadratic(1.0, 1.0),
        };
        let k = riccati_oracle(&sys).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let btk = b.transpose() * &k;
        let inv = (DMatrix::identity(1, 1) + &btk * &b).try_inverse().unwrap();
        let rhs = DMatrix::<f64>::identity(2, 2) + a.transpose() * &k * &a - a.transpose() * &k * &b * inv * &btk * &a;
        assert!((rhs - &k).amax() < 1e-9);
    }

    #[test]
    fn example4_grid_zero_and_quadratic_residuals() {
        let p = build_linear_problem(&LinearSystemSpec::scalar(2.0, 1.0, 0.0, 1.0), &ex4_grid()).unwrap();
        let g = p.grid().unwrap();
        assert!((g.tolerance - 0.8).abs() < 1e-12);
        assert_eq!(p.num_states(), 201);
        assert!(p.is_terminal(100));
        assert_eq!(residual(&p, &ValueFunction::zero(201)), 0.0);
        let quad = g.sample(|x| 3.0 * x[0] * x[0]).unwrap();
        let mask = g.interior_mask(0.5);
        assert_eq!(mask.iter().filter(|m| **m).count(), 101);
        assert!(residual_on(&p, &quad, &mask) <= g.tolerance);
    }

    #[test]
    fn identity_dynamics_zero_cost() {
        let sys = LinearSystemSpec::scalar(1.0, 0.0, 0.0, 0.0);
        let p = build_linear_problem(&sys, &GridSpec::scalar((-1.0, 1.0), 11, (-1.0, 1.0), 3)).unwrap();
        let all = p.with_terminal(vec![true; 11]);
        // Every state is its own successor at zero cost.
        let all = all.with_costs(|_, _, _| ExtCost::ZERO);
        assert!(residual(&all, &ValueFunction::zero(11)) == 0.0);
        assert_eq!(p.grid().unwrap().clamped, 0);
    }

    #[test]
    fn origin_must_be_a_node() {
        let r = build_linear_problem(
            &LinearSystemSpec::scalar(2.0, 1.0, 1.0, 1.0),
            &GridSpec::scalar((-1.0, 1.0), 200, (-1.0, 1.0), 3),
        );
        assert!(matches!(r, Err(Error::GridTooCoarse(_))));
    }

    #[test]
    fn bad_specs_rejected() {
        let g = ex4_grid();
        assert!(build_linear_problem(&LinearSystemSpec::scalar(2.0, 1.0, -1.0, 1.0), &g).is_err());
        let mut bad = g.clone();
        bad.state.points = vec![1];
        assert!(build_linear_problem(&LinearSystemSpec::scalar(2.0, 1.0, 1.0, 1.0), &bad).is_err());
    }

    #[test]
    fn unstable_dynamics_clamp_at_boundary() {
        let p = build_linear_problem(&LinearSystemSpec::scalar(2.0, 1.0, 1.0, 1.0), &ex4_grid()).unwrap();
        assert!(p.grid().unwrap().clamped > 0);
        let x = p.index_of("x=1").unwrap();
        assert!(p.actions(x).iter().any(|a| a.outcomes[0].clamped));
    }

    #[test]
    fn interpolation_rules() {
        let axes = Axes::uniform_1d(0.0, 2.0, 3);
        let j = ValueFunction::from_f64(&[1.0, 3.0, 7.0]).unwrap();
        assert_eq!(interpolate_value(&axes, &j, &[1.0]), ExtCost::of(3.0));
        assert_eq!(interpolate_value(&axes, &j, &[0.5]), ExtCost::of(2.0));
        assert_eq!(interpolate_value(&axes, &j, &[5.0]), ExtCost::of(7.0));
        let j = ValueFunction::new(vec![ExtCost::of(1.0), ExtCost::INF, ExtCost::of(7.0)]);
        assert_eq!(interpolate_value(&axes, &j, &[0.25]), ExtCost::INF);
        assert_eq!(interpolate_value(&axes, &j, &[0.0]), ExtCost::of(1.0));
    }

    #[test]
    fn bilinear_on_two_dimensions() {
        let axes = Axes {
            bounds: vec![(0.0, 1.0), (0.0, 1.0)],
            points: vec![2, 2],
        };
        // Nodes in order (0,0) (0,1) (1,0) (1,1); f = x + 2y is reproduced exactly.
        let j = ValueFunction::from_f64(&[0.0, 2.0, 1.0, 3.0]).unwrap();
        assert_eq!(interpolate_value(&axes, &j, &[0.5, 0.5]), ExtCost::of(1.5));
        assert_eq!(interpolate_value(&axes, &j, &[0.25, 0.75]), ExtCost::of(1.75));
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn interpolation_monotone_for_monotone_data(
            mut vals in proptest::collection::vec(0.0f64..100.0, 2..12),
            a in 0.0f64..1.0,
            b in 0.0f64..1.0,
        ) {
            vals.sort_by(f64::total_cmp);
            let n = vals.len();
            let axes = Axes::uniform_1d(0.0, 1.0, n);
            let j = ValueFunction::from_f64(&vals).unwrap();
            for (k, v) in vals.iter().enumerate() {
                prop_assert_eq!(interpolate_value(&axes, &j, &axes.point(k)), ExtCost::of(*v));
            }
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let vlo = interpolate_value(&axes, &j, &[lo]).to_f64();
            let vhi = interpolate_value(&axes, &j, &[hi]).to_f64();
            prop_assert!(vlo <= vhi + 1e-9);
        }
    }
}
