//! Reference integrator for rank-one forces `F_{jk} = c_j c_k g(x)`.
//!
//! Substituting `p_j = c_j X'(s)` reduces the two-time system to the single
//! ODE `X'' = g(X)` along `s = c1 t1 + c2 t2`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numeric::{Grid2T, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub initial_step: f64,
    pub max_halvings: u32,
    /// `|X|` above this truncates the integration.
    pub blowup_bound: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { initial_step: 0.05, max_halvings: 12, blowup_bound: 1e8 }
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    x: f64,
    v: f64,
    a: f64,
}

/// One direction of the RK4 mesh, starting at `s = 0`.
#[derive(Debug, Clone)]
struct Branch {
    step: f64,
    /// +1 forward, -1 backward; derivatives in `|s|` pick up this sign.
    dir: f64,
    nodes: Vec<Node>,
}

impl Branch {
    /// Cubic Hermite interpolation of `(X, X')` at `|s|` along the branch.
    fn state(&self, s_abs: f64) -> (f64, f64) {
        if self.nodes.len() == 1 {
            return (self.nodes[0].x, self.nodes[0].v);
        }
        let h = self.step;
        let last = self.nodes.len() - 2;
        let idx = ((s_abs / h).floor() as usize).min(last);
        let th = (s_abs - idx as f64 * h) / h;
        let (n0, n1) = (self.nodes[idx], self.nodes[idx + 1]);
        let th2 = th * th;
        let th3 = th2 * th;
        let h00 = 2.0 * th3 - 3.0 * th2 + 1.0;
        let h10 = th3 - 2.0 * th2 + th;
        let h01 = -2.0 * th3 + 3.0 * th2;
        let h11 = th3 - th2;
        let hd = h * self.dir;
        let x = h00 * n0.x + h10 * hd * n0.v + h01 * n1.x + h11 * hd * n1.v;
        let v = h00 * n0.v + h10 * hd * n0.a + h01 * n1.v + h11 * hd * n1.a;
        (x, v)
    }
}

/// Continuous solution `X(s)` with `s = c1 t1 + c2 t2`.
#[derive(Clone)]
pub struct RankOneTrajectory {
    c: [f64; 2],
    forward: Branch,
    backward: Branch,
}

impl std::fmt::Debug for RankOneTrajectory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RankOneTrajectory")
            .field("c", &self.c)
            .field("forward_step", &self.forward.step)
            .field("backward_step", &self.backward.step)
            .finish()
    }
}

impl RankOneTrajectory {
    pub fn c(&self) -> [f64; 2] {
        self.c
    }

    /// `(X(s), X'(s))`; `s` outside the integrated range is clamped.
    pub fn state_at_s(&self, s: f64) -> (f64, f64) {
        if s >= 0.0 {
            let max = self.forward.step * (self.forward.nodes.len() - 1) as f64;
            self.forward.state(s.min(max))
        } else {
            let max = self.backward.step * (self.backward.nodes.len() - 1) as f64;
            self.backward.state((-s).min(max))
        }
    }

    pub fn position(&self, t1: f64, t2: f64) -> f64 {
        self.state_at_s(self.c[0] * t1 + self.c[1] * t2).0
    }

    /// `(p_1, p_2) = (c1 X', c2 X')`.
    pub fn velocities(&self, t1: f64, t2: f64) -> [f64; 2] {
        let v = self.state_at_s(self.c[0] * t1 + self.c[1] * t2).1;
        [self.c[0] * v, self.c[1] * v]
    }
}

/// Surface `x(t1, t2)` with velocities, sampled on `grid` (`t2` fastest).
#[derive(Debug, Clone)]
pub struct RankOneSurface {
    pub grid: Grid2T,
    pub x: Vec<f64>,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub trajectory: RankOneTrajectory,
    /// Step actually used (forward branch), after halving.
    pub step: f64,
    pub halvings: u32,
    /// Max change between the last two step sizes.
    pub last_change: f64,
}

type ScalarMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

fn rk4_branch(g: &ScalarMap, x0: f64, v0: f64, s_end: f64, step: f64, bound: f64) -> Result<Branch> {
    let dir = if s_end < 0.0 { -1.0 } else { 1.0 };
    let eval = |x: f64, s: f64| -> Result<f64> {
        let a = g(x);
        if !a.is_finite() {
            return Err(Error::NonFinite { at: format!("g(X) at X = {x}, s = {s}"), value: a });
        }
        Ok(a)
    };
    let mut nodes = Vec::new();
    nodes.push(Node { x: x0, v: v0, a: eval(x0, 0.0)? });
    if s_end == 0.0 {
        return Ok(Branch { step: 1.0, dir, nodes });
    }
    let n = (s_end.abs() / step).ceil() as usize;
    let h = s_end.abs() / n as f64;
    let hs = dir * h;
    let (mut x, mut v) = (x0, v0);
    for i in 0..n {
        let s = i as f64 * hs;
        let k1x = v;
        let k1v = eval(x, s)?;
        let k2x = v + 0.5 * hs * k1v;
        let k2v = eval(x + 0.5 * hs * k1x, s)?;
        let k3x = v + 0.5 * hs * k2v;
        let k3v = eval(x + 0.5 * hs * k2x, s)?;
        let k4x = v + hs * k3v;
        let k4v = eval(x + hs * k3x, s)?;
        x += hs / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        v += hs / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        if !(x.abs() <= bound && v.is_finite()) {
            return Err(Error::Truncated { last_valid_s: s, bound });
        }
        nodes.push(Node { x, v, a: eval(x, s + hs)? });
    }
    Ok(Branch { step: h, dir, nodes })
}

fn build(g: &ScalarMap, c: [f64; 2], x0: f64, v0: f64, s_range: (f64, f64), step: f64, bound: f64) -> Result<RankOneTrajectory> {
    Ok(RankOneTrajectory {
        c,
        forward: rk4_branch(g, x0, v0, s_range.1.max(0.0), step, bound)?,
        backward: rk4_branch(g, x0, v0, s_range.0.min(0.0), step, bound)?,
    })
}

fn sample(traj: &RankOneTrajectory, grid: &Grid2T) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(grid.len());
    let mut p1 = Vec::with_capacity(grid.len());
    let mut p2 = Vec::with_capacity(grid.len());
    for (_, _, t) in grid.iter() {
        x.push(traj.position(t.t1, t.t2));
        let p = traj.velocities(t.t1, t.t2);
        p1.push(p[0]);
        p2.push(p[1]);
    }
    (x, p1, p2)
}

/// Integrates `X'' = g(X)`, `X(0) = x0`, `X'(0) = v0` with RK4 and samples
/// `x(t1, t2) = X(c1 t1 + c2 t2)` on `grid`, halving the step until the
/// sampled surface changes by less than `rel_tol * max(1, max |x|)`.
pub fn integrate_rank_one_1d<G>(g: G, c: [f64; 2], x0: f64, v0: f64, grid: &Grid2T, tol: &Tolerances) -> Result<RankOneSurface>
where
    G: Fn(f64) -> f64 + Send + Sync + 'static,
{
    integrate_rank_one_1d_with(g, c, x0, v0, grid, tol, &IntegratorOptions::default())
}

pub fn integrate_rank_one_1d_with<G>(
    g: G,
    c: [f64; 2],
    x0: f64,
    v0: f64,
    grid: &Grid2T,
    tol: &Tolerances,
    opts: &IntegratorOptions,
) -> Result<RankOneSurface>
where
    G: Fn(f64) -> f64 + Send + Sync + 'static,
{
    grid.validate()?;
    tol.validate()?;
    if c == [0.0, 0.0] || !c.iter().all(|v| v.is_finite()) {
        return Err(Error::contract("direction c must be finite and non-zero"));
    }
    if !(x0.is_finite() && v0.is_finite()) {
        return Err(Error::contract("initial data must be finite"));
    }
    if !(opts.initial_step > 0.0 && opts.blowup_bound > 0.0) {
        return Err(Error::contract("integrator step and bound must be positive"));
    }
    let g: ScalarMap = Arc::new(g);
    let corners = [
        (grid.t1.min, grid.t2.min),
        (grid.t1.min, grid.t2.max),
        (grid.t1.max, grid.t2.min),
        (grid.t1.max, grid.t2.max),
    ];
    let s_values = corners.map(|(a, b)| c[0] * a + c[1] * b);
    let s_range = (
        s_values.iter().copied().fold(f64::INFINITY, f64::min),
        s_values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );

    let mut step = opts.initial_step;
    let mut traj = build(&g, c, x0, v0, s_range, step, opts.blowup_bound)?;
    let mut samples = sample(&traj, grid);
    let mut last_change = f64::INFINITY;
    for halvings in 1..=opts.max_halvings {
        step *= 0.5;
        let finer = build(&g, c, x0, v0, s_range, step, opts.blowup_bound)?;
        let next = sample(&finer, grid);
        let scale = next.0.iter().chain(&next.1).chain(&next.2).fold(1.0_f64, |a, v| a.max(v.abs()));
        last_change = [(&samples.0, &next.0), (&samples.1, &next.1), (&samples.2, &next.2)]
            .iter()
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(u, w)| (u - w).abs()))
            .fold(0.0, f64::max);
        traj = finer;
        samples = next;
        if last_change <= tol.rel_tol * scale {
            let (x, p1, p2) = samples;
            return Ok(RankOneSurface {
                grid: grid.clone(),
                x,
                p1,
                p2,
                step: traj.forward.step,
                trajectory: traj,
                halvings,
                last_change,
            });
        }
    }
    Err(Error::NoConvergence { halvings: opts.max_halvings, last_change })
}
