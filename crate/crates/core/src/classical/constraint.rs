use nalgebra::Matrix2;
use serde::Serialize;

use super::closed_form::{formula_fields_2d, formula_fields_3d, AChainVariant, FormulaDiscrepancy, ParallelFields};
use super::force::{ForceGradient, ForceTensorField};
use super::one_dim::{characteristic_field_1d, force_derivatives_1d};
use super::CharacteristicField;
use crate::error::{Error, Result};
use crate::matrix::{determinant, null_space, SmallMatrix};
use crate::numeric::{Grid2T, TimePlanePoint, Tolerances};

/// Closed-form fields within this normalized residual of the kernel are
/// accepted.
const FORMULA_AGREEMENT: f64 = 1e-8;

/// Relative singular-value threshold for rank decisions on matrices built
/// from central differences. Below `abs_tol` the cancellation noise of the
/// difference quotient (`eps / fd_step`) would decide the rank.
pub fn rank_tolerance(tol: &Tolerances) -> f64 {
    tol.abs_tol.max(100.0 * f64::EPSILON / tol.fd_step)
}

fn rank_tol(tol: &Tolerances) -> Tolerances {
    Tolerances { abs_tol: rank_tolerance(tol), ..*tol }
}

fn matrix_from_gradient(g: &ForceGradient) -> Result<SmallMatrix<f64>> {
    let d = g.dim();
    // Row (i, k): sum_m F^i_{2k,m} p^m_1 - F^i_{1k,m} p^m_2 = 0.
    let row = |i: usize, k: usize| -> Vec<f64> {
        (0..d).flat_map(|m| [g.get(i, 1, k, m), -g.get(i, 0, k, m)]).collect()
    };
    let rows: Vec<Vec<f64>> = match d {
        1 => vec![row(0, 0), row(0, 1)],
        2 => vec![row(0, 0), row(0, 1), row(1, 0), row(1, 1)],
        3 => (0..2).flat_map(|k| (0..3).map(move |i| (i, k))).map(|(i, k)| row(i, k)).collect(),
        _ => return Err(Error::UnsupportedDimension(d)),
    };
    SmallMatrix::from_rows(&rows)
}

/// The homogeneous system in the velocities `(p^1_1, p^1_2, p^2_1, ...)`.
///
/// Rows for `d = 2` alternate `k = 1, 2` within each space index; rows for
/// `d = 3` list `k = 1` for all space indices first.
pub fn build_constraint_matrix(f: &ForceTensorField, x: &[f64], tol: &Tolerances) -> Result<SmallMatrix<f64>> {
    if f.dim() == 1 {
        return Err(Error::UnsupportedDimension(1));
    }
    matrix_from_gradient(&f.gradient(x, tol)?)
}

pub fn admissibility_determinant(f: &ForceTensorField, x: &[f64], tol: &Tolerances) -> Result<f64> {
    determinant(&build_constraint_matrix(f, x, tol)?)
}

/// `det(M) / |M|_F^n`, or 0 for the zero matrix.
pub fn normalized_determinant(m: &SmallMatrix<f64>) -> Result<f64> {
    let det = determinant(m)?;
    let norm = m.frobenius_norm();
    Ok(if norm == 0.0 { 0.0 } else { det / norm.powi(m.rows() as i32) })
}

/// Unit field orthogonal to the kernel velocities of each coordinate.
///
/// Degenerate when the coordinate's kernel projection vanishes (frozen
/// coordinate) or spans both directions (no restriction).
fn oracle_fields(kernel: &[Vec<f64>], d: usize, tol: &Tolerances) -> CharacteristicField {
    let vectors = (0..d)
        .map(|i| {
            let mut gram = Matrix2::<f64>::zeros();
            for v in kernel {
                let (a, b) = (v[2 * i], v[2 * i + 1]);
                gram[(0, 0)] += a * a;
                gram[(0, 1)] += a * b;
                gram[(1, 0)] += a * b;
                gram[(1, 1)] += b * b;
            }
            let eig = gram.symmetric_eigen();
            let (hi, lo) = if eig.eigenvalues[0] >= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
            let s_hi = eig.eigenvalues[hi].max(0.0).sqrt();
            let s_lo = eig.eigenvalues[lo].max(0.0).sqrt();
            if s_hi <= 1e-12 || s_lo > tol.rel_tol * s_hi {
                return [0.0, 0.0];
            }
            let u = eig.eigenvectors.column(hi);
            let field = [u[1], -u[0]];
            let n = field[0].hypot(field[1]);
            let sign = if field[0] < 0.0 || (field[0] == 0.0 && field[1] < 0.0) { -1.0 } else { 1.0 };
            [sign * field[0] / n, sign * field[1] / n]
        })
        .collect();
    CharacteristicField::from_vectors(vectors, 0.5)
}

fn cross_validate(
    formula: &CharacteristicField,
    oracle: &CharacteristicField,
    kernel: &[Vec<f64>],
) -> (f64, Vec<FormulaDiscrepancy>) {
    let mut worst = 0.0_f64;
    let mut found = Vec::new();
    if kernel.is_empty() {
        return (worst, found);
    }
    for i in 0..formula.len() {
        let oracle_field = oracle.unit(i);
        match formula.unit(i) {
            None => {
                if oracle_field.is_some() {
                    found.push(FormulaDiscrepancy {
                        coordinate: i,
                        formula_field: formula.vectors[i],
                        oracle_field,
                        residual: f64::NAN,
                        reason: "closed-form field vanishes where the kernel fixes a direction".into(),
                    });
                }
            }
            Some(u) => {
                let r = kernel
                    .iter()
                    .map(|v| (u[0] * v[2 * i] + u[1] * v[2 * i + 1]).abs())
                    .fold(0.0, f64::max);
                worst = worst.max(r);
                if r > FORMULA_AGREEMENT {
                    found.push(FormulaDiscrepancy {
                        coordinate: i,
                        formula_field: formula.vectors[i],
                        oracle_field,
                        residual: r,
                        reason: "closed-form field is not orthogonal to the kernel velocities".into(),
                    });
                }
            }
        }
    }
    (worst, found)
}

fn formula_floor(g: &ForceGradient, degree: i32, tol: &Tolerances) -> f64 {
    rank_tolerance(tol) * g.max_abs().powi(degree)
}

fn assemble(
    formula: Vec<[f64; 2]>,
    floor: f64,
    m: &SmallMatrix<f64>,
    d: usize,
    tol: &Tolerances,
) -> ParallelFields {
    let formula = CharacteristicField::from_vectors(formula, floor);
    let kernel = null_space(m, &rank_tol(tol));
    let oracle = oracle_fields(&kernel, d, tol);
    let (orthogonality_residual, discrepancies) = cross_validate(&formula, &oracle, &kernel);
    ParallelFields { formula, oracle, kernel, orthogonality_residual, discrepancies }
}

/// Closed-form `(C, D)` for `d = 2`, checked against the kernel.
pub fn parallel_fields_2d(f: &ForceTensorField, x: &[f64], tol: &Tolerances) -> Result<ParallelFields> {
    if f.dim() != 2 {
        return Err(Error::UnsupportedDimension(f.dim()));
    }
    let g = f.gradient(x, tol)?;
    let m = matrix_from_gradient(&g)?;
    let [c, d] = formula_fields_2d(&g);
    Ok(assemble(vec![c, d], formula_floor(&g, 4, tol), &m, 2, tol))
}

/// Closed-form `(C1, C2, C3)` for `d = 3` with the consistent pivot choice.
pub fn parallel_fields_3d(f: &ForceTensorField, x: &[f64], tol: &Tolerances) -> Result<ParallelFields> {
    parallel_fields_3d_with(f, x, tol, AChainVariant::default())
}

pub fn parallel_fields_3d_with(
    f: &ForceTensorField,
    x: &[f64],
    tol: &Tolerances,
    variant: AChainVariant,
) -> Result<ParallelFields> {
    if f.dim() != 3 {
        return Err(Error::UnsupportedDimension(f.dim()));
    }
    let g = f.gradient(x, tol)?;
    let m = matrix_from_gradient(&g)?;
    let fields = formula_fields_3d(&m, variant);
    Ok(assemble(fields.to_vec(), formula_floor(&g, 16, tol), &m, 3, tol))
}

/// Max over interior grid points of `|d field_2 / d t1 - d field_1 / d t2|`,
/// using central differences at the grid spacing.
pub fn curl_residual<F>(field: F, grid: &Grid2T) -> Result<f64>
where
    F: Fn(TimePlanePoint) -> [f64; 2],
{
    grid.validate()?;
    let (h1, h2) = (grid.t1.step(), grid.t2.step());
    let mut worst = 0.0_f64;
    for (i, j, t) in grid.interior() {
        let f1p = field(grid.point(i + 1, j));
        let f1m = field(grid.point(i - 1, j));
        let f2p = field(grid.point(i, j + 1));
        let f2m = field(grid.point(i, j - 1));
        let curl = (f1p[1] - f1m[1]) / (2.0 * h1) - (f2p[0] - f2m[0]) / (2.0 * h2);
        if !curl.is_finite() {
            return Err(Error::NonFinite { at: format!("curl at t1 = {}, t2 = {}", t.t1, t.t2), value: curl });
        }
        worst = worst.max(curl.abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NoTwoTimeMotion,
    EffectiveOneTime,
    TwoTimeAdmissible,
    /// Admissible and non-parallel, but some field has a curl: its level
    /// curves close in the time plane.
    ClosedCurves,
    Degenerate,
}

/// A solution surface `t -> x(t)` to evaluate fields along.
pub struct SurfaceMap<'a> {
    pub grid: &'a Grid2T,
    pub position: &'a dyn Fn(TimePlanePoint) -> Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintReport {
    pub dimension: usize,
    pub determinant_value: f64,
    pub normalized_determinant: f64,
    pub kernel_dim: usize,
    /// Kernel-derived unit fields; these decide the verdict.
    pub fields: CharacteristicField,
    /// Closed-form fields, absent when they cannot be evaluated (complex
    /// characteristic for `d = 1`).
    pub formula_fields: Option<CharacteristicField>,
    pub orthogonality_residual: f64,
    pub discrepancies: Vec<FormulaDiscrepancy>,
    /// One per field when a surface was supplied, else empty.
    pub curl_residuals: Vec<f64>,
    pub parallelism_defect: f64,
    pub verdict: Verdict,
}

struct PointAnalysis {
    matrix: SmallMatrix<f64>,
    kernel_dim: usize,
    oracle: CharacteristicField,
    formula: Option<CharacteristicField>,
    orthogonality_residual: f64,
    discrepancies: Vec<FormulaDiscrepancy>,
}

fn analyse(f: &ForceTensorField, x: &[f64], tol: &Tolerances) -> Result<PointAnalysis> {
    match f.dim() {
        1 => {
            let d = force_derivatives_1d(f, x[0], tol)?;
            let matrix = SmallMatrix::from_rows(&[[d[1][0], -d[0][0]], [d[1][1], -d[0][1]]])?;
            let kernel = null_space(&matrix, &rank_tol(tol));
            let oracle = oracle_fields(&kernel, 1, tol);
            let (formula, residual, discrepancies) = match characteristic_field_1d(f, x[0], tol) {
                Ok(field) => {
                    let (r, found) = cross_validate(&field, &oracle, &kernel);
                    (Some(field), r, found)
                }
                Err(Error::ComplexCharacteristic { component, radicand }) => {
                    let found = if kernel.is_empty() {
                        Vec::new()
                    } else {
                        vec![FormulaDiscrepancy {
                            coordinate: 0,
                            formula_field: [f64::NAN, f64::NAN],
                            oracle_field: oracle.unit(0),
                            residual: f64::NAN,
                            reason: format!("closed-form field is complex: {component} = {radicand:e}"),
                        }]
                    };
                    (None, 0.0, found)
                }
                Err(e) => return Err(e),
            };
            Ok(PointAnalysis {
                kernel_dim: kernel.len(),
                matrix,
                oracle,
                formula,
                orthogonality_residual: residual,
                discrepancies,
            })
        }
        2 | 3 => {
            let pf = if f.dim() == 2 { parallel_fields_2d(f, x, tol)? } else { parallel_fields_3d(f, x, tol)? };
            Ok(PointAnalysis {
                matrix: build_constraint_matrix(f, x, tol)?,
                kernel_dim: pf.kernel.len(),
                oracle: pf.oracle,
                formula: Some(pf.formula),
                orthogonality_residual: pf.orthogonality_residual,
                discrepancies: pf.discrepancies,
            })
        }
        d => Err(Error::UnsupportedDimension(d)),
    }
}

fn parallelism_defect(fields: &CharacteristicField) -> f64 {
    let units: Vec<[f64; 2]> = (0..fields.len()).filter_map(|i| fields.unit(i)).collect();
    let mut worst = 0.0_f64;
    for a in 0..units.len() {
        for b in a + 1..units.len() {
            worst = worst.max((units[a][0] * units[b][1] - units[a][1] * units[b][0]).abs());
        }
    }
    worst
}

/// Full admissibility analysis of `F` at `x`.
///
/// Verdicts, in order: empty kernel, any degenerate kernel field, mutually
/// parallel fields, curl-free (or unchecked) fields, closed curves.
pub fn classify(
    f: &ForceTensorField,
    x: &[f64],
    surface: Option<&SurfaceMap<'_>>,
    tol: &Tolerances,
) -> Result<ConstraintReport> {
    tol.validate()?;
    let a = analyse(f, x, tol)?;
    let determinant_value = determinant(&a.matrix)?;
    let normalized = normalized_determinant(&a.matrix)?;
    let defect = parallelism_defect(&a.oracle);

    let mut curl_residuals = Vec::new();
    if let Some(s) = surface {
        if a.kernel_dim > 0 && !a.oracle.is_degenerate() {
            for i in 0..a.oracle.len() {
                let reference = a.oracle.unit(i).unwrap_or([0.0, 0.0]);
                let field_at = |t: TimePlanePoint| -> [f64; 2] {
                    let pos = (s.position)(t);
                    let Ok(pa) = analyse(f, &pos, tol) else { return [f64::NAN, f64::NAN] };
                    match pa.oracle.unit(i) {
                        Some(u) if u[0] * reference[0] + u[1] * reference[1] < 0.0 => [-u[0], -u[1]],
                        Some(u) => u,
                        None => [0.0, 0.0],
                    }
                };
                curl_residuals.push(curl_residual(field_at, s.grid)?);
            }
        }
    }

    let verdict = if a.kernel_dim == 0 {
        Verdict::NoTwoTimeMotion
    } else if a.oracle.is_degenerate() {
        Verdict::Degenerate
    } else if defect < tol.rel_tol {
        Verdict::EffectiveOneTime
    } else if curl_residuals.iter().all(|&c| c < tol.rel_tol) {
        Verdict::TwoTimeAdmissible
    } else {
        Verdict::ClosedCurves
    };

    Ok(ConstraintReport {
        dimension: f.dim(),
        determinant_value,
        normalized_determinant: normalized,
        kernel_dim: a.kernel_dim,
        fields: a.oracle,
        formula_fields: a.formula,
        orthogonality_residual: a.orthogonality_residual,
        discrepancies: a.discrepancies,
        curl_residuals,
        parallelism_defect: defect,
        verdict,
    })
}
