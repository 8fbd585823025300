//! Dirac plane waves with two time-like axes and one space axis, metric
//! `diag(+, +, -)`, in the 2x2 representation `g1 = s1`, `g2 = s2`,
//! `g3 = i s3`. Units are natural (`hbar = c = 1`) except in
//! [`effective_mode_mass`].
//!
//! Wavevectors are covariant, `k_mu = (k1, k2, k3)`; the phase of a plane
//! wave is `k_mu x^mu = k1 t1 + k2 t2 + k3 x`.

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::Serialize;

use crate::continuity::{charges, separability_check, ChargeReport, CurrentField, SeparabilityReport};
use crate::error::{Error, Result};
use crate::numeric::{trapezoid, Grid2T, Tolerances};

pub type Spinor = [Complex64; 2];
type M2 = Matrix2<Complex64>;

const METRIC: [f64; 3] = [1.0, 1.0, -1.0];

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaSet {
    pub g: [M2; 3],
}

impl GammaSet {
    /// `{g_mu, g_nu} - 2 g_{mu nu} 1` for every pair; exactly zero for this
    /// representation.
    pub fn clifford_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for mu in 0..3 {
            for nu in 0..3 {
                let anti = self.g[mu] * self.g[nu] + self.g[nu] * self.g[mu];
                let metric = if mu == nu { 2.0 * METRIC[mu] } else { 0.0 };
                let d = anti - M2::identity() * c(metric, 0.0);
                worst = d.iter().fold(worst, |a, v| a.max(v.norm()));
            }
        }
        worst
    }

    pub fn anticommutator(&self, mu: usize, nu: usize) -> M2 {
        self.g[mu] * self.g[nu] + self.g[nu] * self.g[mu]
    }

    /// `g_mu k^mu` with `k^mu = (k1, k2, -k3)`.
    pub fn slash(&self, k: [f64; 3]) -> M2 {
        (0..3).fold(M2::zeros(), |acc, mu| acc + self.g[mu] * c(METRIC[mu] * k[mu], 0.0))
    }
}

pub fn gamma_set() -> GammaSet {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    GammaSet {
        g: [
            M2::new(z, one, one, z),
            M2::new(z, -i, i, z),
            M2::new(i, z, z, -i),
        ],
    }
}

/// `k1^2 + k2^2 - k3^2 - m^2`.
pub fn shell_residual(k: [f64; 3], m: f64) -> f64 {
    k[0] * k[0] + k[1] * k[1] - k[2] * k[2] - m * m
}

/// `-g.k - m` (`sign = +1`, positive branch) or `g.k - m` (`sign = -1`).
pub fn branch_operator(k: [f64; 3], m: f64, sign: f64) -> M2 {
    gamma_set().slash(k) * c(-sign, 0.0) - M2::identity() * c(m, 0.0)
}

/// Unit spinor spanning the kernel of a rank-one 2x2 matrix, built from its
/// dominant row; first non-zero component real positive.
fn kernel_spinor(op: &M2) -> Result<Spinor> {
    let r0 = op[(0, 0)].norm_sqr() + op[(0, 1)].norm_sqr();
    let r1 = op[(1, 0)].norm_sqr() + op[(1, 1)].norm_sqr();
    let (p, q) = if r0 >= r1 { (op[(0, 0)], op[(0, 1)]) } else { (op[(1, 0)], op[(1, 1)]) };
    if r0.max(r1) == 0.0 {
        return Err(Error::Degenerate("plane-wave operator vanishes; the kernel is two-dimensional".into()));
    }
    let v = [-q, p];
    let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    let lead = if v[0].norm() > 0.0 { v[0] } else { v[1] };
    let phase = lead.conj() / lead.norm();
    Ok([v[0] * phase / n, v[1] * phase / n])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlaneWaveSolution {
    pub k: [f64; 3],
    pub m: f64,
    pub psi_plus: Spinor,
    pub psi_minus: Spinor,
}

impl PlaneWaveSolution {
    /// The same solution with `psi_plus * plus` and `psi_minus * minus`.
    pub fn with_amplitudes(&self, plus: Complex64, minus: Complex64) -> Self {
        Self {
            psi_plus: self.psi_plus.map(|v| v * plus),
            psi_minus: self.psi_minus.map(|v| v * minus),
            ..*self
        }
    }

    pub fn phase(&self, x: [f64; 3]) -> f64 {
        self.k[0] * x[0] + self.k[1] * x[1] + self.k[2] * x[2]
    }

    /// `Psi(x) = e^{i k.x} psi_plus + e^{-i k.x} psi_minus`.
    pub fn psi_at(&self, x: [f64; 3]) -> Spinor {
        let e = Complex64::from_polar(1.0, self.phase(x));
        let ec = e.conj();
        [0, 1].map(|a| e * self.psi_plus[a] + ec * self.psi_minus[a])
    }

    /// `max(|O+ psi_plus|, |O- psi_minus|)`.
    pub fn kernel_residual(&self) -> f64 {
        let apply = |op: M2, v: &Spinor| {
            let r = op * nalgebra::Vector2::new(v[0], v[1]);
            (r[0].norm_sqr() + r[1].norm_sqr()).sqrt()
        };
        apply(branch_operator(self.k, self.m, 1.0), &self.psi_plus)
            .max(apply(branch_operator(self.k, self.m, -1.0), &self.psi_minus))
    }
}

/// Kernel spinors of both branch operators for an on-shell wavevector.
///
/// `shell_tol` bounds `|k1^2 + k2^2 - k3^2 - m^2| / max(1, m^2)`.
pub fn solve_plane_wave(k: [f64; 3], m: f64, shell_tol: f64) -> Result<PlaneWaveSolution> {
    if !(k.iter().all(|v| v.is_finite()) && m.is_finite() && m >= 0.0) {
        return Err(Error::contract("wavevector must be finite and mass non-negative"));
    }
    let residual = shell_residual(k, m);
    if residual.abs() >= shell_tol * (m * m).max(1.0) {
        return Err(Error::OffShell { residual });
    }
    Ok(PlaneWaveSolution {
        k,
        m,
        psi_plus: kernel_spinor(&branch_operator(k, m, 1.0))?,
        psi_minus: kernel_spinor(&branch_operator(k, m, -1.0))?,
    })
}

/// How `S = Psi^+(-x) g3 g_mu Psi(x)` is turned into a real current.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CurrentVariant {
    /// `Im[i S] = Re S`: a constant cross term plus a `cos(2 k.x)` term.
    #[default]
    Imaginary,
    /// `Re[i S] = (i S + h.c.) / 2`: a single `sin(2 k.x)` term that changes
    /// sign across the plane.
    Real,
}

fn bilinear(l: &Spinor, mat: &M2, r: &Spinor) -> Complex64 {
    let v = mat * nalgebra::Vector2::new(r[0], r[1]);
    l[0].conj() * v[0] + l[1].conj() * v[1]
}

/// `j_mu` at `x = (t1, t2, x)`, evaluated from the defining bilinear.
pub fn dirac_current(sol: &PlaneWaveSolution, x: [f64; 3], variant: CurrentVariant) -> [f64; 3] {
    let g = gamma_set();
    let left = sol.psi_at([-x[0], -x[1], -x[2]]);
    let right = sol.psi_at(x);
    [0, 1, 2].map(|mu| {
        let s = bilinear(&left, &(g.g[2] * g.g[mu]), &right);
        match variant {
            CurrentVariant::Imaginary => s.re,
            CurrentVariant::Real => -s.im,
        }
    })
}

/// Coefficients of `j_mu = cos(2 k.x) diag_mu + cross_mu` for the default
/// variant, in terms of the spinor components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurrentExpansion {
    pub diag: [f64; 3],
    pub cross: [f64; 3],
}

impl CurrentExpansion {
    pub fn evaluate(&self, phase: f64) -> [f64; 3] {
        let c2 = (2.0 * phase).cos();
        [0, 1, 2].map(|mu| c2 * self.diag[mu] + self.cross[mu])
    }
}

/// `j1`: `2 Im[C+2* C+1 + C-2* C-1]` and `2 Im[C-2* C+1 + C+2* C-1]`;
/// `j2`: the same with `Re`; `j3`: `-(|C+|^2 + |C-|^2)` and `-2 Re[C+^+ C-]`.
pub fn current_expansion(sol: &PlaneWaveSolution) -> CurrentExpansion {
    let [p1, p2] = sol.psi_plus;
    let [m1, m2] = sol.psi_minus;
    let diag_pair = p2.conj() * p1 + m2.conj() * m1;
    let cross_pair = m2.conj() * p1 + p2.conj() * m1;
    let norm = p1.norm_sqr() + p2.norm_sqr() + m1.norm_sqr() + m2.norm_sqr();
    let overlap = p1.conj() * m1 + p2.conj() * m2;
    CurrentExpansion {
        diag: [2.0 * diag_pair.im, 2.0 * diag_pair.re, -norm],
        cross: [2.0 * cross_pair.im, 2.0 * cross_pair.re, -2.0 * overlap.re],
    }
}

/// `max |d1 j1 + d2 j2 - dx j3|` over the grid points (space axis required),
/// by central differences with spacing `step` in every direction.
pub fn conservation_residual(
    sol: &PlaneWaveSolution,
    grid: &Grid2T,
    step: f64,
    variant: CurrentVariant,
) -> Result<f64> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::contract(format!("difference step must be positive, got {step}")));
    }
    let space = *grid.space_axis()?;
    let j = |y: [f64; 3]| dirac_current(sol, y, variant);
    let mut worst = 0.0_f64;
    for x in space.points() {
        for (_, _, t) in grid.iter() {
            let at = [t.t1, t.t2, x];
            let d = |mu: usize| {
                let (mut p, mut m) = (at, at);
                p[mu] += step;
                m[mu] -= step;
                (j(p)[mu] - j(m)[mu]) / (2.0 * step)
            };
            worst = worst.max((d(0) + d(1) - d(2)).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PositivityReport {
    /// `|Im[C+2* C+1 + C-2* C-1]|`
    pub lhs_im: f64,
    /// `|Im[C-2* C+1 + C+2* C-1]|`
    pub rhs_im: f64,
    pub lhs_re: f64,
    pub rhs_re: f64,
    /// `[lhs_im <= rhs_im, lhs_re <= rhs_re]`.
    pub holds: [bool; 2],
    /// Grid minima of `j1` and `j2`, each oriented by the sign of its
    /// constant term.
    pub min_density_sampled: [f64; 2],
}

/// Sign-preservation conditions for `j1` and `j2` plus a grid sample. The
/// space axis of `grid` is used when present, else `x = 0`.
pub fn positivity_check(sol: &PlaneWaveSolution, grid: &Grid2T) -> Result<PositivityReport> {
    grid.validate()?;
    let [p1, p2] = sol.psi_plus;
    let [m1, m2] = sol.psi_minus;
    let diag = p2.conj() * p1 + m2.conj() * m1;
    let cross = m2.conj() * p1 + p2.conj() * m1;
    let orient = |v: f64| if v < 0.0 { -1.0 } else { 1.0 };
    let (o1, o2) = (orient(cross.im), orient(cross.re));
    let xs: Vec<f64> = grid.space.map_or_else(|| vec![0.0], |a| a.points().collect());
    let mut min = [f64::INFINITY; 2];
    for &x in &xs {
        for (_, _, t) in grid.iter() {
            let j = dirac_current(sol, [t.t1, t.t2, x], CurrentVariant::Imaginary);
            min[0] = min[0].min(o1 * j[0]);
            min[1] = min[1].min(o2 * j[1]);
        }
    }
    let (lhs_im, rhs_im, lhs_re, rhs_re) = (diag.im.abs(), cross.im.abs(), diag.re.abs(), cross.re.abs());
    Ok(PositivityReport {
        lhs_im,
        rhs_im,
        lhs_re,
        rhs_re,
        holds: [lhs_im <= rhs_im, lhs_re <= rhs_re],
        min_density_sampled: min,
    })
}

/// `k2 g1 g2 - k3 g1 g3 + m g1`: the generator of `t1` translations for a
/// plane wave in `(t2, x)`.
pub fn effective_hamiltonian(k2: f64, k3: f64, m: f64) -> M2 {
    let g = gamma_set();
    g.g[0] * g.g[1] * c(k2, 0.0) - g.g[0] * g.g[2] * c(k3, 0.0) + g.g[0] * c(m, 0.0)
}

/// `max |H - H^+|` (entrywise) over the sampled `(k2, k3)`.
pub fn hermiticity_defect(samples: &[(f64, f64)], m: f64) -> f64 {
    samples
        .iter()
        .map(|&(k2, k3)| {
            let h = effective_hamiltonian(k2, k3, m);
            (h - h.adjoint()).iter().fold(0.0_f64, |a, v| a.max(v.norm()))
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeMass {
    pub m: f64,
    pub omega: f64,
    /// `m^2 - (hbar omega / c^2)^2`.
    pub m_eff_sq: f64,
    /// `sqrt(max(m_eff_sq, 0))`.
    pub m_eff: f64,
    pub tachyonic: bool,
    /// `2 pi / omega`, infinite for `omega = 0`.
    pub tau: f64,
    /// `hbar / (m c)`, infinite for `m = 0`.
    pub r: f64,
    pub ctau_gt_r: bool,
    /// `(c tau > R) == (m_eff_sq > 0)`.
    pub consistent: bool,
    /// `c tau / (2 pi) > R`, the comparison that coincides with a real,
    /// non-zero effective mass.
    pub reduced_ctau_gt_r: bool,
    pub reduced_consistent: bool,
}

/// Effective mass of the mode `exp(-i omega t2)` of a massive scalar.
pub fn effective_mode_mass(m: f64, omega: f64, hbar: f64, c_light: f64) -> Result<ModeMass> {
    if !(m >= 0.0 && omega >= 0.0 && hbar > 0.0 && c_light > 0.0)
        || ![m, omega, hbar, c_light].iter().all(|v| v.is_finite())
    {
        return Err(Error::contract(format!(
            "need m >= 0, omega >= 0, hbar > 0, c > 0 (got m = {m}, omega = {omega}, hbar = {hbar}, c = {c_light})"
        )));
    }
    let shift = hbar * omega / (c_light * c_light);
    let m_eff_sq = m * m - shift * shift;
    let tau = if omega == 0.0 { f64::INFINITY } else { 2.0 * std::f64::consts::PI / omega };
    let r = if m == 0.0 { f64::INFINITY } else { hbar / (m * c_light) };
    let ctau_gt_r = c_light * tau > r;
    let reduced_ctau_gt_r = c_light * tau / (2.0 * std::f64::consts::PI) > r;
    let massive = m_eff_sq > 0.0;
    Ok(ModeMass {
        m,
        omega,
        m_eff_sq,
        m_eff: m_eff_sq.max(0.0).sqrt(),
        tachyonic: m_eff_sq < 0.0,
        tau,
        r,
        ctau_gt_r,
        consistent: ctau_gt_r == massive,
        reduced_ctau_gt_r,
        reduced_consistent: reduced_ctau_gt_r == massive,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityReport {
    /// `alpha int dt2 j1 + beta int dt1 j2`, layout `(k, i, j)`.
    pub rho: Vec<f64>,
    pub density: SeparabilityReport,
    /// `P(t1, t2) = int dx rho`, layout `(i, j)`.
    pub total: Vec<f64>,
    pub total_fit: SeparabilityReport,
    pub charges: ChargeReport,
}

/// Density built from the current on `grid` (space axis required) and its
/// additive-fit residuals.
pub fn dirac_density_separability(
    sol: &PlaneWaveSolution,
    grid: &Grid2T,
    alpha: f64,
    beta: f64,
    tol: f64,
) -> Result<DensityReport> {
    let space = *grid.space_axis()?;
    let current = CurrentField::from_fn(grid.clone(), |x, t1, t2| dirac_current(sol, [t1, t2, x], CurrentVariant::Imaginary))?;
    let (nx, n1, n2) = (grid.nx(), grid.n1(), grid.n2());
    let at = |k: usize, i: usize, j: usize| (k * n1 + i) * n2 + j;
    let mut rho = vec![0.0; nx * n1 * n2];
    for k in 0..nx {
        let rho1: Vec<f64> = (0..n1)
            .map(|i| trapezoid(&(0..n2).map(|j| current.j1[at(k, i, j)]).collect::<Vec<_>>(), grid.t2.step()))
            .collect();
        let rho2: Vec<f64> = (0..n2)
            .map(|j| trapezoid(&(0..n1).map(|i| current.j2[at(k, i, j)]).collect::<Vec<_>>(), grid.t1.step()))
            .collect();
        for i in 0..n1 {
            for j in 0..n2 {
                rho[at(k, i, j)] = alpha * rho1[i] + beta * rho2[j];
            }
        }
    }
    let wx = space.trapezoid_weights();
    let total: Vec<f64> = (0..n1 * n2)
        .map(|ij| (0..nx).map(|k| wx[k] * rho[k * n1 * n2 + ij]).sum())
        .collect();
    let time_grid = Grid2T { space: None, ..grid.clone() };
    Ok(DensityReport {
        density: separability_check(&rho, grid, tol)?,
        total_fit: separability_check(&total, &time_grid, tol)?,
        charges: charges(&current, alpha, beta, &Tolerances::default())?,
        rho,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clifford_identities_are_exact() {
        let g = gamma_set();
        assert_eq!(g.clifford_defect(), 0.0);
        assert_eq!(g.anticommutator(0, 0), M2::identity() * c(2.0, 0.0));
        assert_eq!(g.anticommutator(2, 2), M2::identity() * c(-2.0, 0.0));
        assert_eq!(g.anticommutator(0, 1), M2::zeros());
    }

    #[test]
    fn on_shell_wave_has_kernel_spinors() {
        let sol = solve_plane_wave([1.0, 1.0, 1.0], 1.0, 1e-12).unwrap();
        assert!(sol.kernel_residual() < 1e-12);
        for s in [sol.psi_plus, sol.psi_minus] {
            assert!(((s[0].norm_sqr() + s[1].norm_sqr()) - 1.0).abs() < 1e-12);
            assert!(s[0].im == 0.0 && s[0].re > 0.0);
        }
        assert!(matches!(solve_plane_wave([1.0, 1.0, 0.0], 1.0, 1e-12), Err(Error::OffShell { .. })));
    }

    #[test]
    fn definition_matches_expansion() {
        let k3 = (1.3f64.powi(2) + 0.4f64.powi(2) - 0.49).sqrt();
        let sol = solve_plane_wave([1.3, -0.4, k3], 0.7, 1e-12)
            .unwrap()
            .with_amplitudes(c(0.8, 0.3), c(-0.2, 1.1));
        let e = current_expansion(&sol);
        for x in [[0.0, 0.0, 0.0], [0.3, -1.2, 2.0], [5.0, 1.0, -0.7]] {
            let j = dirac_current(&sol, x, CurrentVariant::Imaginary);
            let p = e.evaluate(sol.phase(x));
            for mu in 0..3 {
                assert!((j[mu] - p[mu]).abs() < 1e-12, "mu = {mu} at {x:?}");
            }
        }
    }

    #[test]
    fn conservation_residual_is_second_order_in_step() {
        let k3 = (1.3f64.powi(2) + 0.4f64.powi(2) - 0.49).sqrt();
        let sol = solve_plane_wave([1.3, -0.4, k3], 0.7, 1e-12).unwrap().with_amplitudes(c(1.0, 0.0), c(0.5, 0.2));
        let grid = Grid2T::square(-1.0, 1.0, 5).unwrap().with_space(-1.0, 1.0, 5).unwrap();
        let coarse = conservation_residual(&sol, &grid, 1e-2, CurrentVariant::Imaginary).unwrap();
        let fine = conservation_residual(&sol, &grid, 5e-3, CurrentVariant::Imaginary).unwrap();
        assert!((coarse / fine - 4.0).abs() < 0.1, "{coarse:e} {fine:e}");
        assert!(conservation_residual(&sol, &grid, 0.0, CurrentVariant::Imaginary).is_err());
    }

    #[test]
    fn real_variant_carries_sine_factor() {
        let sol = solve_plane_wave([2.0, 0.0, 3f64.sqrt()], 1.0, 1e-12).unwrap();
        let j = dirac_current(&sol, [0.0, 0.0, 0.0], CurrentVariant::Real);
        assert!(j.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn hermiticity_depends_on_k2() {
        assert_eq!(hermiticity_defect(&[(0.0, 0.0)], 1.3), 0.0);
        assert!((hermiticity_defect(&[(0.5, 0.0)], 0.0) - 1.0).abs() < 1e-15);
        assert_eq!(hermiticity_defect(&[(0.0, 1.0)], 0.0), 0.0);
    }

    #[test]
    fn mode_mass_examples() {
        assert_eq!(effective_mode_mass(1.0, 0.0, 1.0, 1.0).unwrap().m_eff, 1.0);
        let edge = effective_mode_mass(1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(edge.m_eff, 0.0);
        assert!(!edge.tachyonic);
        assert!((effective_mode_mass(1.0, 0.6, 1.0, 1.0).unwrap().m_eff - 0.8).abs() < 1e-15);
        assert!(effective_mode_mass(1.0, 1.5, 1.0, 1.0).unwrap().tachyonic);
        assert!(effective_mode_mass(0.0, 0.5, 1.0, 1.0).unwrap().tachyonic);
    }

    #[test]
    fn zero_spinors_give_zero_density() {
        let sol = solve_plane_wave([1.0, 1.0, 1.0], 1.0, 1e-12).unwrap().with_amplitudes(c(0.0, 0.0), c(0.0, 0.0));
        let grid = Grid2T::square(0.0, 1.0, 5).unwrap().with_space(0.0, 1.0, 5).unwrap();
        let r = dirac_density_separability(&sol, &grid, 1.0, 1.0, 1e-8).unwrap();
        assert!(r.rho.iter().all(|&v| v == 0.0));
    }
}
