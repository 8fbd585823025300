//! Single space dimension: consistency condition, orbit relation and the
//! characteristic field along which `x(t1, t2)` is constant.

use serde::Serialize;

use super::force::{ForceTensorField, GaugeConnection, VelocityPair};
use super::integrate::RankOneSurface;
use super::CharacteristicField;
use crate::error::{Error, Result};
use crate::numeric::{central_difference, Tolerances};

/// `F'_{jk}` at `x`, indexed `[j][k]` from 0.
pub fn force_derivatives_1d(f: &ForceTensorField, x: f64, tol: &Tolerances) -> Result<[[f64; 2]; 2]> {
    if f.dim() != 1 {
        return Err(Error::UnsupportedDimension(f.dim()));
    }
    let g = f.gradient(&[x], tol)?;
    Ok([[g.get(0, 0, 0, 0), g.get(0, 0, 1, 0)], [g.get(0, 1, 0, 0), g.get(0, 1, 1, 0)]])
}

fn scale_of(d: &[[f64; 2]; 2]) -> f64 {
    d.iter().flatten().fold(0.0, |a, v| a.max(v.abs()))
}

/// `|F'_11 F'_22 - F'_12 F'_21|`; vanishing is necessary for two-time motion.
///
/// The connection does not enter the condition, but is evaluated so that a
/// non-finite `A` is still reported.
pub fn consistency_residual_1d(
    f: &ForceTensorField,
    a: &GaugeConnection,
    x: f64,
    tol: &Tolerances,
) -> Result<f64> {
    a.evaluate(x)?;
    let d = force_derivatives_1d(f, x, tol)?;
    Ok((d[0][0] * d[1][1] - d[0][1] * d[1][0]).abs())
}

/// The consistency residual divided by `max |F'_jk|^2` (0 when all vanish).
pub fn normalized_consistency_residual_1d(
    f: &ForceTensorField,
    a: &GaugeConnection,
    x: f64,
    tol: &Tolerances,
) -> Result<f64> {
    let r = consistency_residual_1d(f, a, x, tol)?;
    let s = scale_of(&force_derivatives_1d(f, x, tol)?);
    Ok(if s == 0.0 { 0.0 } else { r / (s * s) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitRelation {
    pub phi: f64,
    pub ratio_squared: f64,
    pub residual: f64,
}

/// `Phi(x) = F'_11 F'_12 / (F'_21 F'_22)` against `((p1 - A1) / (p2 - A2))^2`.
pub fn orbit_relation_1d(
    f: &ForceTensorField,
    a: &GaugeConnection,
    x: f64,
    p: &VelocityPair,
    tol: &Tolerances,
) -> Result<OrbitRelation> {
    let [p1, p2] = *p
        .p
        .first()
        .filter(|_| p.p.len() == 1)
        .ok_or_else(|| Error::contract("orbit relation needs exactly one velocity pair"))?;
    let d = force_derivatives_1d(f, x, tol)?;
    let scale = scale_of(&d);
    let vanishes = |v: f64| scale == 0.0 || v.abs() <= tol.abs_tol * scale;
    if vanishes(d[1][0]) {
        return Err(Error::Degenerate(format!("F'_21 vanishes at x = {x}")));
    }
    if vanishes(d[1][1]) {
        return Err(Error::Degenerate(format!("F'_22 vanishes at x = {x}")));
    }
    let [a1, a2] = a.evaluate(x)?;
    let den = p2 - a2;
    if den.abs() <= tol.abs_tol * (p1 - a1).abs().max(den.abs()) || den == 0.0 {
        return Err(Error::Degenerate(format!("p2 - A2 vanishes at x = {x}")));
    }
    let phi = d[0][0] * d[0][1] / (d[1][0] * d[1][1]);
    let ratio = (p1 - a1) / den;
    let ratio_squared = ratio * ratio;
    Ok(OrbitRelation { phi, ratio_squared, residual: (ratio_squared - phi).abs() })
}

/// `(sqrt(F'_22 F'_21), -sqrt(F'_11 F'_12))`.
///
/// Radicands within `abs_tol * scale^2` of zero are clamped; anything more
/// negative is a complex characteristic.
pub fn characteristic_field_1d(f: &ForceTensorField, x: f64, tol: &Tolerances) -> Result<CharacteristicField> {
    let d = force_derivatives_1d(f, x, tol)?;
    let scale = scale_of(&d);
    let floor = tol.abs_tol * scale * scale;
    let root = |r: f64, component: &'static str| {
        if r < -floor {
            Err(Error::ComplexCharacteristic { component, radicand: r })
        } else {
            Ok(r.max(0.0).sqrt())
        }
    };
    let v = [root(d[1][1] * d[1][0], "F'_22 F'_21")?, -root(d[0][0] * d[0][1], "F'_11 F'_12")?];
    Ok(CharacteristicField::from_vectors(vec![v], tol.abs_tol * scale))
}

/// Max over interior grid points of `|F_hat . grad x|`, with `F_hat` the unit
/// characteristic field and the gradient taken on the continuous trajectory.
pub fn surface_orthogonality_residual(
    surface: &RankOneSurface,
    f: &ForceTensorField,
    tol: &Tolerances,
) -> Result<f64> {
    let grid = &surface.grid;
    let mut worst = 0.0_f64;
    for (i, j, t) in grid.interior() {
        let x = surface.x[i * grid.n2() + j];
        let field = characteristic_field_1d(f, x, tol)?;
        let Some(u) = field.unit(0) else {
            return Err(Error::Degenerate(format!(
                "characteristic field vanishes at x = {x} (t1 = {}, t2 = {})",
                t.t1, t.t2
            )));
        };
        let traj = &surface.trajectory;
        let d1 = central_difference(|s| traj.position(s, t.t2), t.t1, tol.step_at(t.t1))?;
        let d2 = central_difference(|s| traj.position(t.t1, s), t.t2, tol.step_at(t.t2))?;
        worst = worst.max((u[0] * d1 + u[1] * d2).abs());
    }
    Ok(worst)
}

/// Max orbit-relation residual over interior grid points where `p2` does
/// not vanish.
pub fn surface_orbit_residual(surface: &RankOneSurface, f: &ForceTensorField, tol: &Tolerances) -> Result<f64> {
    let grid = &surface.grid;
    let a = GaugeConnection::zero();
    let mut worst = 0.0_f64;
    for (i, j, _) in grid.interior() {
        let k = i * grid.n2() + j;
        if surface.p2[k].abs() < 1e-12 {
            continue;
        }
        let rel = orbit_relation_1d(f, &a, surface.x[k], &VelocityPair::one_dim(surface.p1[k], surface.p2[k]), tol)?;
        worst = worst.max(rel.residual);
    }
    Ok(worst)
}
