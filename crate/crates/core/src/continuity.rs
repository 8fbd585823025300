//! Conserved charges and separability for a current `(j1, j2, jx)` over
//! `(x, t1, t2)` obeying `d1 j1 + d2 j2 - dx jx = 0`.
//!
//! Integrating out `(t2, x)` or `(t1, x)` gives two charges `Q1(t1)` and
//! `Q2(t2)`. A density normalized in both times must then be additive,
//! `rho = a rho1(x, t1) + b rho2(x, t2)`, and so is every average built from
//! it.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{Axis, Grid2T, Tolerances};

const MAX_SWEEPS: usize = 100;

fn check_samples(name: &str, samples: &[f64], expected: usize) -> Result<()> {
    if samples.len() != expected {
        return Err(Error::contract(format!(
            "{name} has {} samples, grid needs {expected}",
            samples.len()
        )));
    }
    if let Some((k, v)) = samples.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { at: format!("{name}[{k}]"), value: *v });
    }
    Ok(())
}

/// Samples on a grid with a space axis, layout `(k, i, j)` over `(x, t1, t2)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurrentField {
    pub grid: Grid2T,
    pub j1: Vec<f64>,
    pub j2: Vec<f64>,
    pub jx: Vec<f64>,
}

impl CurrentField {
    pub fn new(grid: Grid2T, j1: Vec<f64>, j2: Vec<f64>, jx: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        grid.space_axis()?;
        let n = grid.nx() * grid.len();
        check_samples("j1", &j1, n)?;
        check_samples("j2", &j2, n)?;
        check_samples("jx", &jx, n)?;
        Ok(Self { grid, j1, j2, jx })
    }

    /// Samples `(j1, j2, jx)` from a closure of `(x, t1, t2)`.
    pub fn from_fn<F>(grid: Grid2T, f: F) -> Result<Self>
    where
        F: Fn(f64, f64, f64) -> [f64; 3],
    {
        let space = *grid.space_axis()?;
        let n = grid.nx() * grid.len();
        let (mut j1, mut j2, mut jx) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for x in space.points() {
            for (_, _, t) in grid.iter() {
                let [a, b, c] = f(x, t.t1, t.t2);
                j1.push(a);
                j2.push(b);
                jx.push(c);
            }
        }
        Self::new(grid, j1, j2, jx)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let s = |v: &Vec<f64>| v.iter().map(|a| a * factor).collect();
        Self { grid: self.grid.clone(), j1: s(&self.j1), j2: s(&self.j2), jx: s(&self.jx) }
    }

    fn idx(&self, k: usize, i: usize, j: usize) -> usize {
        (k * self.grid.n1() + i) * self.grid.n2() + j
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChargeReport {
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
    /// Central-difference `dQ1/dt1` at interior `t1` points.
    pub dq1: Vec<f64>,
    pub dq2: Vec<f64>,
    pub dq1_residual: f64,
    pub dq2_residual: f64,
    pub alpha: f64,
    pub beta: f64,
    /// `alpha Q1(t1) + beta Q2(t2)`, `t2` fastest.
    pub q_total: Vec<f64>,
    /// Boundary surfaces where the current does not vanish.
    pub warnings: Vec<String>,
}

fn central_series(q: &[f64], h: f64) -> Vec<f64> {
    (1..q.len() - 1).map(|i| (q[i + 1] - q[i - 1]) / (2.0 * h)).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Both charges by composite trapezoid, with `alpha, beta` rescaled so the
/// total charge is 1 at the first grid point (unless it vanishes there,
/// relative to `abs_tol` times the integrated current magnitudes).
pub fn charges(j: &CurrentField, alpha: f64, beta: f64, tol: &Tolerances) -> Result<ChargeReport> {
    let g = &j.grid;
    let space = *g.space_axis()?;
    let (nx, n1, n2) = (g.nx(), g.n1(), g.n2());
    let (wx, w1, w2) = (space.trapezoid_weights(), g.t1.trapezoid_weights(), g.t2.trapezoid_weights());

    let mut q1 = vec![0.0; n1];
    let mut q2 = vec![0.0; n2];
    for k in 0..nx {
        for i in 0..n1 {
            for jj in 0..n2 {
                let at = j.idx(k, i, jj);
                q1[i] += wx[k] * w2[jj] * j.j1[at];
                q2[jj] += wx[k] * w1[i] * j.j2[at];
            }
        }
    }
    let dq1 = central_series(&q1, g.t1.step());
    let dq2 = central_series(&q2, g.t2.step());

    let scale = max_abs(&j.j1).max(max_abs(&j.j2)).max(max_abs(&j.jx));
    let floor = tol.abs_tol * scale.max(1.0);
    let mut warnings = Vec::new();
    let mut leak = |name: &str, surface: &str, worst: f64| {
        if worst > floor {
            warnings.push(format!("{name} does not vanish on the {surface} boundary (max {worst:e})"));
        }
    };
    let mut worst = 0.0_f64;
    for i in 0..n1 {
        for jj in 0..n2 {
            worst = worst.max(j.jx[j.idx(0, i, jj)].abs()).max(j.jx[j.idx(nx - 1, i, jj)].abs());
        }
    }
    leak("jx", "x", worst);
    let mut worst = 0.0_f64;
    for k in 0..nx {
        for i in 0..n1 {
            worst = worst.max(j.j2[j.idx(k, i, 0)].abs()).max(j.j2[j.idx(k, i, n2 - 1)].abs());
        }
    }
    leak("j2", "t2", worst);
    let mut worst = 0.0_f64;
    for k in 0..nx {
        for jj in 0..n2 {
            worst = worst.max(j.j1[j.idx(k, 0, jj)].abs()).max(j.j1[j.idx(k, n1 - 1, jj)].abs());
        }
    }
    leak("j1", "t1", worst);

    // a total charge at rounding level of the integrated magnitudes counts as zero
    let volume1 = (space.max - space.min) * (g.t2.max - g.t2.min);
    let volume2 = (space.max - space.min) * (g.t1.max - g.t1.min);
    let q_scale = alpha.abs() * max_abs(&j.j1) * volume1 + beta.abs() * max_abs(&j.j2) * volume2;
    let q0 = alpha * q1[0] + beta * q2[0];
    let (alpha, beta) =
        if q0.abs() > tol.abs_tol * q_scale && q0.is_finite() { (alpha / q0, beta / q0) } else { (alpha, beta) };
    let q_total = q1.iter().flat_map(|a| q2.iter().map(move |b| alpha * a + beta * b)).collect();

    Ok(ChargeReport {
        dq1_residual: max_abs(&dq1),
        dq2_residual: max_abs(&dq2),
        q1,
        q2,
        dq1,
        dq2,
        alpha,
        beta,
        q_total,
        warnings,
    })
}

/// Least-squares additive fit `rho(x, t1, t2) ~ r1(x, t1) + r2(x, t2)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparabilityReport {
    /// Root-mean-square misfit.
    pub rms_residual: f64,
    /// Misfit norm over sample norm (0 for the zero field).
    pub relative_residual: f64,
    pub sweeps: usize,
    pub passes: bool,
    /// Layout `(k, i)`.
    pub r1: Vec<f64>,
    /// Layout `(k, j)`.
    pub r2: Vec<f64>,
}

/// Alternating projections on one `n1 x n2` slice; returns `(a, b, sweeps)`.
fn additive_fit(f: &[f64], n1: usize, n2: usize) -> (Vec<f64>, Vec<f64>, usize) {
    let mut a = vec![0.0; n1];
    let mut b = vec![0.0; n2];
    let scale = max_abs(f).max(f64::MIN_POSITIVE);
    for sweep in 1..=MAX_SWEEPS {
        let mut change = 0.0_f64;
        for i in 0..n1 {
            let v = (0..n2).map(|j| f[i * n2 + j] - b[j]).sum::<f64>() / n2 as f64;
            change = change.max((v - a[i]).abs());
            a[i] = v;
        }
        for j in 0..n2 {
            let v = (0..n1).map(|i| f[i * n2 + j] - a[i]).sum::<f64>() / n1 as f64;
            change = change.max((v - b[j]).abs());
            b[j] = v;
        }
        if change <= 1e-15 * scale {
            return (a, b, sweep);
        }
    }
    (a, b, MAX_SWEEPS)
}

fn separability_of(samples: &[f64], nx: usize, n1: usize, n2: usize, tol: f64) -> SeparabilityReport {
    let mut r1 = Vec::with_capacity(nx * n1);
    let mut r2 = Vec::with_capacity(nx * n2);
    let (mut miss, mut norm) = (0.0, 0.0);
    let mut sweeps = 0;
    for k in 0..nx {
        let slice = &samples[k * n1 * n2..(k + 1) * n1 * n2];
        let (a, b, s) = additive_fit(slice, n1, n2);
        sweeps = sweeps.max(s);
        for i in 0..n1 {
            for j in 0..n2 {
                let v = slice[i * n2 + j];
                let e = v - a[i] - b[j];
                miss += e * e;
                norm += v * v;
            }
        }
        r1.extend(a);
        r2.extend(b);
    }
    let relative_residual = if norm == 0.0 { 0.0 } else { (miss / norm).sqrt() };
    SeparabilityReport {
        rms_residual: (miss / samples.len() as f64).sqrt(),
        relative_residual,
        sweeps,
        passes: relative_residual < tol,
        r1,
        r2,
    }
}

/// Additive-fit check of density samples over `(x, t1, t2)`; passes iff the
/// relative residual is below `tol`.
pub fn separability_check(rho: &[f64], grid: &Grid2T, tol: f64) -> Result<SeparabilityReport> {
    grid.validate()?;
    check_samples("rho", rho, grid.nx() * grid.len())?;
    Ok(separability_of(rho, grid.nx(), grid.n1(), grid.n2(), tol))
}

/// `<A>(t1, t2)` and its additive-fit report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparableAverage {
    pub average: Vec<f64>,
    pub separability: SeparabilityReport,
}

/// `<A>(t1, t2) = int dx A(x) rho`, after checking `int dx rho = 1` within
/// `tol` on every time slice.
pub fn separable_average<A>(rho: &[f64], grid: &Grid2T, a: A, tol: f64) -> Result<SeparableAverage>
where
    A: Fn(f64) -> f64,
{
    let space: Axis = *grid.space_axis()?;
    check_samples("rho", rho, grid.nx() * grid.len())?;
    let (nx, n1, n2) = (grid.nx(), grid.n1(), grid.n2());
    let wx = space.trapezoid_weights();
    let ax: Vec<f64> = space.points().map(&a).collect();
    if let Some((k, v)) = ax.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { at: format!("A(x = {})", space.at(k)), value: *v });
    }

    let mut worst: Option<(usize, usize, f64)> = None;
    let mut average = vec![0.0; n1 * n2];
    for i in 0..n1 {
        for j in 0..n2 {
            let (mut mass, mut acc) = (0.0, 0.0);
            for k in 0..nx {
                let r = rho[(k * n1 + i) * n2 + j];
                mass += wx[k] * r;
                acc += wx[k] * ax[k] * r;
            }
            average[i * n2 + j] = acc;
            let dev = (mass - 1.0).abs();
            if worst.is_none_or(|(_, _, m)| dev > (m - 1.0).abs()) {
                worst = Some((i, j, mass));
            }
        }
    }
    if let Some((i, j, integral)) = worst {
        if (integral - 1.0).abs() > tol {
            return Err(Error::Normalization { i, j, integral });
        }
    }
    let separability = separability_of(&average, 1, n1, n2, tol);
    Ok(SeparableAverage { average, separability })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EhrenfestReport {
    pub separability_residual: f64,
    /// `max |d1 d2 <x>|` over interior points.
    pub mixed_partial_residual: f64,
    /// Per time index `j`: max over `t_j` of the variance over the other time
    /// of `d_j^2 <x> - F_jj(<x>)`. `None` when no force was supplied.
    pub cross_defect: [Option<f64>; 2],
    /// Whether `f1` (index 0) and `f2` (index 1) are constant within `tol`.
    pub constant: [bool; 2],
}

impl EhrenfestReport {
    pub fn max_cross_defect(&self) -> f64 {
        self.cross_defect.iter().flatten().copied().fold(0.0, f64::max)
    }
}

/// Residuals of the decoupled second-order equations for a separable mean
/// position `<x> = f1(t1) + f2(t2)` sampled on the time grid.
pub fn ehrenfest_limit_residual(
    mean_x: &[f64],
    grid: &Grid2T,
    forces: [Option<&dyn Fn(f64) -> f64>; 2],
    tol: f64,
) -> Result<EhrenfestReport> {
    grid.validate()?;
    let (n1, n2) = (grid.n1(), grid.n2());
    check_samples("mean position", mean_x, n1 * n2)?;
    let sep = separability_of(mean_x, 1, n1, n2, tol);
    if !sep.passes {
        return Err(Error::NotSeparable { residual: sep.relative_residual });
    }
    let f = |i: usize, j: usize| mean_x[i * n2 + j];
    let (h1, h2) = (grid.t1.step(), grid.t2.step());

    let mut mixed = 0.0_f64;
    for i in 1..n1 - 1 {
        for j in 1..n2 - 1 {
            let v = (f(i + 1, j + 1) - f(i + 1, j - 1) - f(i - 1, j + 1) + f(i - 1, j - 1)) / (4.0 * h1 * h2);
            mixed = mixed.max(v.abs());
        }
    }

    let variance = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
    };
    let mut cross_defect = [None, None];
    if let Some(force) = forces[0] {
        let mut worst = 0.0_f64;
        for i in 1..n1 - 1 {
            let d: Vec<f64> = (0..n2)
                .map(|j| (f(i + 1, j) - 2.0 * f(i, j) + f(i - 1, j)) / (h1 * h1) - force(f(i, j)))
                .collect();
            worst = worst.max(variance(&d));
        }
        cross_defect[0] = Some(worst);
    }
    if let Some(force) = forces[1] {
        let mut worst = 0.0_f64;
        for j in 1..n2 - 1 {
            let d: Vec<f64> = (0..n1)
                .map(|i| (f(i, j + 1) - 2.0 * f(i, j) + f(i, j - 1)) / (h2 * h2) - force(f(i, j)))
                .collect();
            worst = worst.max(variance(&d));
        }
        cross_defect[1] = Some(worst);
    }
    if let Some(v) = cross_defect.iter().flatten().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite { at: "force along the mean position".into(), value: *v });
    }

    let scale = max_abs(mean_x).max(1.0);
    let along_t1 = (0..n1).flat_map(|i| (0..n2).map(move |j| (i, j))).fold(0.0_f64, |a, (i, j)| a.max((f(i, j) - f(0, j)).abs()));
    let along_t2 = (0..n1).flat_map(|i| (0..n2).map(move |j| (i, j))).fold(0.0_f64, |a, (i, j)| a.max((f(i, j) - f(i, 0)).abs()));

    Ok(EhrenfestReport {
        separability_residual: sep.relative_residual,
        mixed_partial_residual: mixed,
        cross_defect,
        constant: [along_t1 <= tol * scale, along_t2 <= tol * scale],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn space_grid(n: usize) -> Grid2T {
        Grid2T::new((0.0, 1.0, n), (0.0, 2.0, n)).unwrap().with_space(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn zero_current_has_zero_charges() {
        let j = CurrentField::from_fn(space_grid(9), |_, _, _| [0.0; 3]).unwrap();
        let r = charges(&j, 1.0, 1.0, &Tolerances::default()).unwrap();
        assert!(r.q1.iter().chain(&r.q2).all(|&q| q == 0.0));
        assert_eq!(r.dq1_residual, 0.0);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn stationary_current_conserves_q1() {
        let j = CurrentField::from_fn(space_grid(21), |x, _, t2| [(PI * x).sin() * (PI * t2 / 2.0).sin(), 0.0, 0.0]).unwrap();
        let r = charges(&j, 1.0, 1.0, &Tolerances::default()).unwrap();
        assert!(r.dq1_residual < 1e-12);
        assert!((r.q_total[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn source_term_drives_charge() {
        let kappa = 0.7;
        let j = CurrentField::from_fn(space_grid(21), |x, t1, t2| {
            [x * (1.0 - x) * (1.0 + t2) * (1.0 + kappa * t1), 0.0, 0.0]
        })
        .unwrap();
        let r = charges(&j, 1.0, 0.0, &Tolerances::default()).unwrap();
        let b = crate::numeric::trapezoid(&Axis::new(0.0, 1.0, 21).unwrap().points().map(|x| x * (1.0 - x)).collect::<Vec<_>>(), 0.05);
        let expected = kappa * b * 4.0;
        assert!(r.dq1.iter().all(|d| (d - expected).abs() < 1e-10));
        assert!(r.warnings.iter().any(|w| w.contains("j1")));
    }

    #[test]
    fn separability_examples() {
        let g = space_grid(7);
        let mut sep = Vec::new();
        let mut prod = Vec::new();
        for x in g.space.unwrap().points() {
            for (_, _, t) in g.iter() {
                sep.push(0.3 * (x + t.t1).sin() + 0.7 * x * t.t2 * t.t2);
                prod.push(x * t.t1 * t.t2);
            }
        }
        assert!(separability_check(&sep, &g, 1e-10).unwrap().relative_residual < 1e-12);
        assert!(separability_check(&prod, &g, 1e-10).unwrap().relative_residual > 1e-3);
        assert_eq!(separability_check(&vec![2.5; sep.len()], &g, 1e-10).unwrap().relative_residual, 0.0);
    }

    #[test]
    fn average_of_one_is_one() {
        let g = space_grid(11);
        let rho: Vec<f64> = (0..g.nx() * g.len()).map(|_| 1.0).collect();
        let avg = separable_average(&rho, &g, |_| 1.0, 1e-10).unwrap();
        assert!(avg.average.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let bad: Vec<f64> = rho.iter().map(|v| 2.0 * v).collect();
        assert!(matches!(separable_average(&bad, &g, |_| 1.0, 1e-10), Err(Error::Normalization { .. })));
    }

    #[test]
    fn ehrenfest_cases() {
        let g = Grid2T::new((0.0, 2.0 * PI, 81), (0.0, 2.0 * PI, 81)).unwrap();
        let force = |x: f64| -(x - 0.5);
        let allowed: Vec<f64> = g.iter().map(|(_, _, t)| t.t1.cos() + 0.5).collect();
        let r = ehrenfest_limit_residual(&allowed, &g, [Some(&force), None], 1e-8).unwrap();
        assert!(r.mixed_partial_residual < 1e-10);
        assert!(r.cross_defect[0].unwrap() < 1e-20);
        assert_eq!(r.constant, [false, true]);

        let excluded: Vec<f64> = g.iter().map(|(_, _, t)| t.t1.cos() + t.t2.cos()).collect();
        let r = ehrenfest_limit_residual(&excluded, &g, [Some(&force), None], 1e-8).unwrap();
        assert!(r.cross_defect[0].unwrap() > 1e-2);
        assert_eq!(r.constant, [false, false]);

        let flat = vec![0.25; g.len()];
        let r = ehrenfest_limit_residual(&flat, &g, [Some(&|_| 0.0), Some(&|_| 0.0)], 1e-8).unwrap();
        assert_eq!(r.max_cross_defect(), 0.0);
        assert_eq!(r.mixed_partial_residual, 0.0);

        let product: Vec<f64> = g.iter().map(|(_, _, t)| t.t1 * t.t2).collect();
        assert!(matches!(
            ehrenfest_limit_residual(&product, &g, [None, None], 1e-8),
            Err(Error::NotSeparable { .. })
        ));
    }
}
