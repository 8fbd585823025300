//! Quantum evolution under two commuting, time-independent generators.
//!
//! Both generators are diagonal in a shared eigenbasis `H_i |n> = E_i^n |n>`,
//! so every matrix element of an observable evolves by a pure phase:
//! `x^{nm}(t1, t2) = x^{nm}(0) exp(i (D1 t1 + D2 t2) / hbar)` with
//! `D_i = E_i^n - E_i^m`. Each element therefore depends on a single rotated
//! time `tau_1^{nm}`; superpositions of many elements are what can carry
//! genuine two-time structure.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{Grid2T, TimePlanePoint};

pub type ComplexMatrix = DMatrix<Complex64>;

const HERMITIAN_TOL: f64 = 1e-12;

fn hermiticity_defect(m: &ComplexMatrix) -> f64 {
    (m - m.adjoint()).iter().fold(0.0, |a, v| a.max(v.norm()))
}

fn check_hbar(hbar: f64) -> Result<()> {
    if hbar.is_finite() && hbar > 0.0 {
        Ok(())
    } else {
        Err(Error::contract(format!("hbar must be positive and finite, got {hbar}")))
    }
}

/// Spectra of both generators and an observable, all in the shared basis.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoTimeQuantumSystem {
    e1: Vec<f64>,
    e2: Vec<f64>,
    x0: ComplexMatrix,
}

impl TwoTimeQuantumSystem {
    /// `x0[(n, m)]` is `x^{nm}(0)`; it must be Hermitian within 1e-12.
    pub fn new(e1: Vec<f64>, e2: Vec<f64>, x0: ComplexMatrix) -> Result<Self> {
        let n = e1.len();
        if n < 2 {
            return Err(Error::contract(format!("need at least 2 levels, got {n}")));
        }
        if e2.len() != n || x0.nrows() != n || x0.ncols() != n {
            return Err(Error::contract(format!(
                "shape mismatch: E1 has {n} levels, E2 has {}, X0 is {}x{}",
                e2.len(),
                x0.nrows(),
                x0.ncols()
            )));
        }
        if let Some(v) = e1.iter().chain(&e2).find(|v| !v.is_finite()) {
            return Err(Error::NonFinite { at: "spectrum".into(), value: *v });
        }
        let defect = hermiticity_defect(&x0);
        if !(defect <= HERMITIAN_TOL) {
            return Err(Error::contract(format!("observable is not Hermitian (defect {defect:e})")));
        }
        Ok(Self { e1, e2, x0 })
    }

    pub fn n_levels(&self) -> usize {
        self.e1.len()
    }

    pub fn e1(&self) -> &[f64] {
        &self.e1
    }

    pub fn e2(&self) -> &[f64] {
        &self.e2
    }

    pub fn x0(&self) -> &ComplexMatrix {
        &self.x0
    }

    fn check_index(&self, n: usize, m: usize) -> Result<()> {
        let len = self.n_levels();
        if n >= len || m >= len {
            return Err(Error::contract(format!("level pair ({n}, {m}) out of range for {len} levels")));
        }
        Ok(())
    }

    pub fn spacing(&self, n: usize, m: usize) -> Result<SpacingPair> {
        self.check_index(n, m)?;
        Ok(SpacingPair { n, m, d1: self.e1[n] - self.e1[m], d2: self.e2[n] - self.e2[m] })
    }

    /// Both generators as dense diagonal matrices.
    pub fn generators(&self) -> (ComplexMatrix, ComplexMatrix) {
        let diag = |e: &[f64]| ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            e.len(),
            e.iter().map(|&v| Complex64::new(v, 0.0)),
        ));
        (diag(&self.e1), diag(&self.e2))
    }

    /// Heisenberg-picture observable `x(t1, t2)`.
    pub fn evolved_observable(&self, at: TimePlanePoint, hbar: f64) -> Result<ComplexMatrix> {
        check_hbar(hbar)?;
        let n = self.n_levels();
        Ok(ComplexMatrix::from_fn(n, n, |r, c| {
            let phase = ((self.e1[r] - self.e1[c]) * at.t1 + (self.e2[r] - self.e2[c]) * at.t2) / hbar;
            self.x0[(r, c)] * Complex64::from_polar(1.0, phase)
        }))
    }

    /// `F_ij(t) = -(1/hbar^2) [[x(t), H_j], H_i]`, whose expectation equals
    /// `d_i d_j <x>`.
    pub fn force_operator(&self, i: usize, j: usize, at: TimePlanePoint, hbar: f64) -> Result<ComplexMatrix> {
        if !(1..=2).contains(&i) || !(1..=2).contains(&j) {
            return Err(Error::contract(format!("time indices must be 1 or 2, got ({i}, {j})")));
        }
        let x = self.evolved_observable(at, hbar)?;
        let (h1, h2) = self.generators();
        let pick = |k: usize| if k == 1 { &h1 } else { &h2 };
        let inner = &x * pick(j) - pick(j) * &x;
        let outer = &inner * pick(i) - pick(i) * &inner;
        Ok(outer * Complex64::new(-1.0 / (hbar * hbar), 0.0))
    }
}

/// `D_i = E_i^n - E_i^m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpacingPair {
    pub n: usize,
    pub m: usize,
    pub d1: f64,
    pub d2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CommutatorReport {
    /// `max |[H1, H2]_{ab}|`.
    pub residual: f64,
    pub hermiticity_defect: f64,
}

/// Size of `[H1, H2]`; time-independent two-time evolution needs it to
/// vanish.
pub fn check_generator_consistency(h1: &ComplexMatrix, h2: &ComplexMatrix, tol: f64) -> Result<CommutatorReport> {
    if !h1.is_square() || h1.shape() != h2.shape() {
        return Err(Error::contract(format!(
            "generators must be square with equal shapes, got {:?} and {:?}",
            h1.shape(),
            h2.shape()
        )));
    }
    let defect = hermiticity_defect(h1).max(hermiticity_defect(h2));
    if defect > tol {
        return Err(Error::contract(format!("generator is not Hermitian (defect {defect:e})")));
    }
    let c = h1 * h2 - h2 * h1;
    Ok(CommutatorReport { residual: c.iter().fold(0.0, |a, v| a.max(v.norm())), hermiticity_defect: defect })
}

pub fn evolve_element(sys: &TwoTimeQuantumSystem, n: usize, m: usize, at: TimePlanePoint, hbar: f64) -> Result<Complex64> {
    check_hbar(hbar)?;
    let s = sys.spacing(n, m)?;
    Ok(sys.x0[(n, m)] * Complex64::from_polar(1.0, (s.d1 * at.t1 + s.d2 * at.t2) / hbar))
}

/// Exact `d_i d_j x^{nm} = -x^{nm} D_i D_j / hbar^2` (indices 1 or 2).
pub fn element_second_derivative(
    sys: &TwoTimeQuantumSystem,
    n: usize,
    m: usize,
    (i, j): (usize, usize),
    at: TimePlanePoint,
    hbar: f64,
) -> Result<Complex64> {
    let s = sys.spacing(n, m)?;
    let d = |k: usize| match k {
        1 => Ok(s.d1),
        2 => Ok(s.d2),
        _ => Err(Error::contract(format!("time index must be 1 or 2, got {k}"))),
    };
    Ok(-evolve_element(sys, n, m, at, hbar)? * d(i)? * d(j)? / (hbar * hbar))
}

/// `|D1 d_2 x^{nm} - D2 d_1 x^{nm}|` by central differences with `step`.
pub fn characteristic_residual(
    sys: &TwoTimeQuantumSystem,
    n: usize,
    m: usize,
    at: TimePlanePoint,
    hbar: f64,
    step: f64,
) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::contract("difference step must be positive"));
    }
    let s = sys.spacing(n, m)?;
    let x = |t1: f64, t2: f64| evolve_element(sys, n, m, TimePlanePoint::new(t1, t2), hbar);
    let d1 = (x(at.t1 + step, at.t2)? - x(at.t1 - step, at.t2)?) / (2.0 * step);
    let d2 = (x(at.t1, at.t2 + step)? - x(at.t1, at.t2 - step)?) / (2.0 * step);
    Ok((d2 * s.d1 - d1 * s.d2).norm())
}

/// Field `(D2, -D1)` of one matrix element and its rotation angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ElementCharacteristic {
    pub n: usize,
    pub m: usize,
    pub field: [f64; 2],
    pub norm: f64,
    /// `atan2(D2, D1)`; 0 when degenerate.
    pub theta: f64,
    pub degenerate: bool,
}

pub fn element_characteristic(sys: &TwoTimeQuantumSystem, n: usize, m: usize) -> Result<ElementCharacteristic> {
    let s = sys.spacing(n, m)?;
    let norm = s.d1.hypot(s.d2);
    let degenerate = norm == 0.0;
    Ok(ElementCharacteristic {
        n,
        m,
        field: [s.d2, -s.d1],
        norm,
        theta: if degenerate { 0.0 } else { s.d2.atan2(s.d1) },
        degenerate,
    })
}

/// `(tau_1, tau_2)`: the times rotated so that the element depends on
/// `tau_1` only.
pub fn rotate_times(ec: &ElementCharacteristic, at: TimePlanePoint) -> Result<(f64, f64)> {
    if ec.degenerate {
        return Err(Error::Degenerate(format!(
            "pair ({}, {}) is degenerate in both spectra; no time direction",
            ec.n, ec.m
        )));
    }
    let (s, c) = ec.theta.sin_cos();
    Ok((c * at.t1 + s * at.t2, -s * at.t1 + c * at.t2))
}

/// Inverse of [`rotate_times`].
pub fn unrotate_times(ec: &ElementCharacteristic, tau: (f64, f64)) -> Result<TimePlanePoint> {
    if ec.degenerate {
        return Err(Error::Degenerate(format!("pair ({}, {}) is degenerate", ec.n, ec.m)));
    }
    let (s, c) = ec.theta.sin_cos();
    Ok(TimePlanePoint::new(c * tau.0 - s * tau.1, s * tau.0 + c * tau.1))
}

/// Amplitudes `psi_n = <n|psi>`, unit norm within 1e-12.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    psi: Vec<Complex64>,
}

impl StateVector {
    pub fn new(psi: Vec<Complex64>) -> Result<Self> {
        let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !((norm - 1.0).abs() <= 1e-12) {
            return Err(Error::contract(format!("state norm is {norm}, expected 1")));
        }
        Ok(Self { psi })
    }

    /// Normalizes `psi` first; rejects the zero vector.
    pub fn normalized(psi: Vec<Complex64>) -> Result<Self> {
        let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::contract("cannot normalize a zero or non-finite state"));
        }
        Ok(Self { psi: psi.into_iter().map(|c| c / norm).collect() })
    }

    pub fn basis(n_levels: usize, k: usize) -> Result<Self> {
        if k >= n_levels {
            return Err(Error::contract(format!("basis index {k} out of range")));
        }
        let mut psi = vec![Complex64::new(0.0, 0.0); n_levels];
        psi[k] = Complex64::new(1.0, 0.0);
        Ok(Self { psi })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.psi
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }
}

fn expectation(op: &ComplexMatrix, psi: &[Complex64]) -> Complex64 {
    let n = psi.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for r in 0..n {
        let mut row = Complex64::new(0.0, 0.0);
        for c in 0..n {
            row += op[(r, c)] * psi[c];
        }
        acc += psi[r].conj() * row;
    }
    acc
}

fn check_state(sys: &TwoTimeQuantumSystem, psi: &StateVector) -> Result<()> {
    if psi.len() != sys.n_levels() {
        return Err(Error::contract(format!(
            "state has {} amplitudes, system has {} levels",
            psi.len(),
            sys.n_levels()
        )));
    }
    Ok(())
}

pub fn mean_position(sys: &TwoTimeQuantumSystem, psi: &StateVector, at: TimePlanePoint, hbar: f64) -> Result<Complex64> {
    check_state(sys, psi)?;
    Ok(expectation(&sys.evolved_observable(at, hbar)?, &psi.psi))
}

/// `<psi| F_ij(t) |psi>`, see [`TwoTimeQuantumSystem::force_operator`].
pub fn force_expectation(
    sys: &TwoTimeQuantumSystem,
    psi: &StateVector,
    (i, j): (usize, usize),
    at: TimePlanePoint,
    hbar: f64,
) -> Result<Complex64> {
    check_state(sys, psi)?;
    Ok(expectation(&sys.force_operator(i, j, at, hbar)?, &psi.psi))
}

/// Moments of the observable over a grid (`t2` fastest).
///
/// `variance` is `<x^2> - |<x>|^2`, the non-negative convention.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluctuationTrace {
    pub grid: Grid2T,
    pub mean: Vec<Complex64>,
    pub second_moment: Vec<f64>,
    pub variance: Vec<f64>,
}

impl FluctuationTrace {
    pub fn max_imaginary_mean(&self) -> f64 {
        self.mean.iter().fold(0.0, |a, v| a.max(v.im.abs()))
    }

    pub fn min_variance(&self) -> f64 {
        self.variance.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn variance_trace(sys: &TwoTimeQuantumSystem, psi: &StateVector, grid: &Grid2T, hbar: f64) -> Result<FluctuationTrace> {
    check_hbar(hbar)?;
    check_state(sys, psi)?;
    grid.validate()?;
    let mut mean = Vec::with_capacity(grid.len());
    let mut second_moment = Vec::with_capacity(grid.len());
    let mut variance = Vec::with_capacity(grid.len());
    for (_, _, t) in grid.iter() {
        let x = sys.evolved_observable(t, hbar)?;
        let m = expectation(&x, &psi.psi);
        let s = expectation(&(&x * &x), &psi.psi).re;
        mean.push(m);
        second_moment.push(s);
        variance.push(s - m.norm_sqr());
    }
    Ok(FluctuationTrace { grid: grid.clone(), mean, second_moment, variance })
}

/// Spacing pair, its fluctuations, the time point and `hbar`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UncertaintyBudget {
    pub d_e: [f64; 2],
    pub dd_e: [f64; 2],
    pub t: TimePlanePoint,
    pub hbar: f64,
}

impl UncertaintyBudget {
    fn validate(&self) -> Result<()> {
        check_hbar(self.hbar)?;
        if !(self.d_e.iter().chain(&self.dd_e).all(|v| v.is_finite()) && self.t.is_finite()) {
            return Err(Error::contract("budget entries must be finite"));
        }
        Ok(())
    }

    /// `|dE1 t1 + dE2 t2| / hbar`, the phase swept along the ray to `t`.
    pub fn phase(&self) -> f64 {
        (self.d_e[0] * self.t.t1 + self.d_e[1] * self.t.t2).abs() / self.hbar
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Visibility {
    Frozen,
    Threshold,
    Oscillating,
}

/// Phase thresholds in units of `2 pi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VisibilityMargins {
    pub frozen_below: f64,
    pub oscillating_at: f64,
}

impl Default for VisibilityMargins {
    fn default() -> Self {
        Self { frozen_below: 0.1, oscillating_at: 1.0 }
    }
}

pub fn uncertainty_visibility(budget: &UncertaintyBudget) -> Result<Visibility> {
    uncertainty_visibility_with(budget, &VisibilityMargins::default())
}

pub fn uncertainty_visibility_with(budget: &UncertaintyBudget, margins: &VisibilityMargins) -> Result<Visibility> {
    budget.validate()?;
    if !(margins.frozen_below >= 0.0 && margins.oscillating_at >= margins.frozen_below) {
        return Err(Error::contract("visibility margins must satisfy 0 <= frozen_below <= oscillating_at"));
    }
    let s = budget.phase();
    Ok(if s >= 2.0 * PI * margins.oscillating_at {
        Visibility::Oscillating
    } else if s < 2.0 * PI * margins.frozen_below {
        Visibility::Frozen
    } else {
        Visibility::Threshold
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AngleWidth {
    pub phi: f64,
    pub cos_phi: f64,
    /// Full differential of `cos phi = hbar / (t |dE|)`.
    pub dphi_exact: f64,
    /// Same, keeping `hbar` to lowest order.
    pub dphi_lowest_order: f64,
    /// `hbar`-free bound `|dE . ddE| / |dE|^2`.
    pub bound: f64,
}

/// Angle between `t` and the spacing vector implied by `t |dE| cos phi = hbar`,
/// and its width induced by spacing fluctuations.
pub fn angle_and_width(budget: &UncertaintyBudget) -> Result<AngleWidth> {
    budget.validate()?;
    if budget.dd_e.iter().any(|&v| v < 0.0) {
        return Err(Error::contract("spacing fluctuations must be non-negative"));
    }
    let e2 = budget.d_e[0] * budget.d_e[0] + budget.d_e[1] * budget.d_e[1];
    if e2 == 0.0 {
        return Err(Error::OutOfDomain("both level spacings vanish; the angle is undefined".into()));
    }
    let e = e2.sqrt();
    let t = budget.t.norm();
    let h = budget.hbar;
    let reach = t * e;
    if (reach - h).abs() <= 4.0 * f64::EPSILON * h {
        return Err(Error::Singular(format!(
            "t |dE| = hbar = {h}: phi = 0 and the exact width diverges"
        )));
    }
    if reach < h {
        return Err(Error::OutOfDomain(format!(
            "t |dE| = {reach} is below hbar = {h}, so cos phi = hbar / (t |dE|) exceeds 1"
        )));
    }
    let cos_phi = h / reach;
    let num = (budget.d_e[0] * budget.dd_e[0] + budget.d_e[1] * budget.dd_e[1]).abs();
    Ok(AngleWidth {
        phi: cos_phi.acos(),
        cos_phi,
        dphi_exact: h * num / (e2 * (t * t * e2 - h * h).sqrt()),
        dphi_lowest_order: h * num / (t * e2 * e),
        bound: num / e2,
    })
}

/// Population-weighted mean and standard deviation of the spacings over
/// pairs `n > m` populated by `psi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpacingStatistics {
    pub mean: [f64; 2],
    pub std: [f64; 2],
    pub pairs: usize,
}

pub fn spacing_statistics(sys: &TwoTimeQuantumSystem, psi: &StateVector) -> Result<SpacingStatistics> {
    check_state(sys, psi)?;
    let p: Vec<f64> = psi.psi.iter().map(|c| c.norm_sqr()).collect();
    let mut w_sum = 0.0;
    let mut acc = [0.0; 2];
    let mut acc2 = [0.0; 2];
    let mut pairs = 0;
    for n in 0..sys.n_levels() {
        for m in 0..n {
            let w = p[n] * p[m];
            if w <= 1e-12 {
                continue;
            }
            let s = sys.spacing(n, m)?;
            pairs += 1;
            w_sum += w;
            for (k, d) in [s.d1, s.d2].into_iter().enumerate() {
                acc[k] += w * d;
                acc2[k] += w * d * d;
            }
        }
    }
    if pairs == 0 {
        return Err(Error::Degenerate("state populates fewer than two levels".into()));
    }
    let mean = acc.map(|a| a / w_sum);
    let std = [0, 1].map(|k| (acc2[k] / w_sum - mean[k] * mean[k]).max(0.0).sqrt());
    Ok(SpacingStatistics { mean, std, pairs })
}
