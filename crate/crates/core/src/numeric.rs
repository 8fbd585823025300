//! Shared numeric primitives: time-plane points, sampling grids, tolerances,
//! central differences and trapezoid quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point `(t1, t2)` in the plane of the two evolution parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimePlanePoint {
    pub t1: f64,
    pub t2: f64,
}

impl TimePlanePoint {
    pub fn new(t1: f64, t2: f64) -> Self {
        Self { t1, t2 }
    }

    /// Euclidean length `sqrt(t1^2 + t2^2)`.
    pub fn norm(&self) -> f64 {
        self.t1.hypot(self.t2)
    }

    pub fn is_finite(&self) -> bool {
        self.t1.is_finite() && self.t2.is_finite()
    }
}

/// Uniform axis `[min, max]` sampled at `n` points (endpoints included).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, n: usize) -> Result<Self> {
        let axis = Self { min, max, n };
        axis.validate("axis")?;
        Ok(axis)
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(Error::contract(format!("{name}: bounds must be finite")));
        }
        if self.max <= self.min {
            return Err(Error::contract(format!(
                "{name}: max ({}) must exceed min ({})",
                self.max, self.min
            )));
        }
        if self.n < 3 {
            return Err(Error::contract(format!(
                "{name}: count {} is below 3 (central differences need interior points)",
                self.n
            )));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.n - 1) as f64
    }

    pub fn at(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.max
        } else {
            self.min + i as f64 * self.step()
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.at(i))
    }

    /// Composite trapezoid weights for this axis.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.step();
        let mut w = vec![h; self.n];
        w[0] = 0.5 * h;
        w[self.n - 1] = 0.5 * h;
        w
    }
}

/// Sampling grid over the time plane, optionally with one space axis.
///
/// Samples are stored with `t2` fastest: index `(i, j)` maps to `i * n2 + j`.
/// With a space axis the layout is `(k, i, j) -> (k * n1 + i) * n2 + j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2T {
    pub t1: Axis,
    pub t2: Axis,
    pub space: Option<Axis>,
}

impl Grid2T {
    pub fn new(t1: (f64, f64, usize), t2: (f64, f64, usize)) -> Result<Self> {
        let grid = Self {
            t1: Axis { min: t1.0, max: t1.1, n: t1.2 },
            t2: Axis { min: t2.0, max: t2.1, n: t2.2 },
            space: None,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn with_space(mut self, x_min: f64, x_max: f64, nx: usize) -> Result<Self> {
        self.space = Some(Axis { min: x_min, max: x_max, n: nx });
        self.validate()?;
        Ok(self)
    }

    /// Square grid `[min, max]^2` with `n` points per axis.
    pub fn square(min: f64, max: f64, n: usize) -> Result<Self> {
        Self::new((min, max, n), (min, max, n))
    }

    pub fn validate(&self) -> Result<()> {
        self.t1.validate("t1")?;
        self.t2.validate("t2")?;
        if let Some(space) = &self.space {
            space.validate("x")?;
        }
        Ok(())
    }

    pub fn n1(&self) -> usize {
        self.t1.n
    }

    pub fn n2(&self) -> usize {
        self.t2.n
    }

    pub fn nx(&self) -> usize {
        self.space.map_or(1, |a| a.n)
    }

    pub fn space_axis(&self) -> Result<&Axis> {
        self.space
            .as_ref()
            .ok_or_else(|| Error::contract("grid has no space axis"))
    }

    pub fn point(&self, i: usize, j: usize) -> TimePlanePoint {
        TimePlanePoint::new(self.t1.at(i), self.t2.at(j))
    }

    pub fn len(&self) -> usize {
        self.n1() * self.n2()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major iteration `(i, j, point)` over the time plane.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, TimePlanePoint)> + '_ {
        (0..self.n1()).flat_map(move |i| (0..self.n2()).map(move |j| (i, j, self.point(i, j))))
    }

    /// Interior points only (both indices away from the boundary).
    pub fn interior(&self) -> impl Iterator<Item = (usize, usize, TimePlanePoint)> + '_ {
        (1..self.n1() - 1)
            .flat_map(move |i| (1..self.n2() - 1).map(move |j| (i, j, self.point(i, j))))
    }

    /// The same extents with every axis refined to `2n - 1` points (spacing halved).
    pub fn refined(&self) -> Self {
        let refine = |a: Axis| Axis { n: 2 * a.n - 1, ..a };
        Self {
            t1: refine(self.t1),
            t2: refine(self.t2),
            space: self.space.map(refine),
        }
    }
}

/// Numerical tolerances shared by every check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative central-difference step; the absolute step is
    /// `fd_step * max(1, |argument|)`.
    pub fd_step: f64,
    /// Rank threshold relative to the largest singular value, and the
    /// absolute floor for "vanishing" scalars.
    pub abs_tol: f64,
    /// Relative tolerance for convergence, parallelism and curl checks.
    pub rel_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { fd_step: 1e-5, abs_tol: 1e-10, rel_tol: 1e-6 }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("fd_step", self.fd_step), ("abs_tol", self.abs_tol), ("rel_tol", self.rel_tol)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::contract(format!("tolerance {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Absolute finite-difference step for an argument of size `at`.
    pub fn step_at(&self, at: f64) -> f64 {
        self.fd_step * at.abs().max(1.0)
    }
}

/// Second-order central difference `(f(at + step) - f(at - step)) / (2 step)`.
pub fn central_difference<F>(f: F, at: f64, step: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::contract(format!("central difference step must be positive, got {step}")));
    }
    let hi = at + step;
    let lo = at - step;
    let fh = f(hi);
    if !fh.is_finite() {
        return Err(Error::NonFinite { at: format!("x = {hi}"), value: fh });
    }
    let fl = f(lo);
    if !fl.is_finite() {
        return Err(Error::NonFinite { at: format!("x = {lo}"), value: fl });
    }
    Ok((fh - fl) / (2.0 * step))
}

/// Composite trapezoid rule over uniformly spaced samples.
pub fn trapezoid(samples: &[f64], h: f64) -> f64 {
    match samples.len() {
        0 | 1 => 0.0,
        n => h * (0.5 * (samples[0] + samples[n - 1]) + samples[1..n - 1].iter().sum::<f64>()),
    }
}
