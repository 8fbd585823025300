//! Closed-form characteristic fields built from nested 2x2 determinants of
//! force derivatives, checked against kernel directions of the constraint
//! matrix.

use serde::Serialize;

use super::force::ForceGradient;
use super::CharacteristicField;
use crate::matrix::SmallMatrix;

fn det2(a: f64, b: f64, c: f64, d: f64) -> f64 {
    a * d - b * c
}

/// `(C, D)` for `d = 2`, each as `[component 1, component 2]`.
///
/// `F^i_{jk,m}` is read with 1-based `i, j, k, m` (`x = 1`, `y = 2`).
pub(crate) fn formula_fields_2d(g: &ForceGradient) -> [[f64; 2]; 2] {
    let d = |i: usize, j: usize, k: usize, m: usize| g.get(i - 1, j - 1, k - 1, m - 1);

    let alpha = det2(d(1, 2, 1, 1), d(1, 2, 1, 2), d(2, 2, 1, 1), d(2, 2, 1, 2));
    let beta = det2(d(1, 1, 1, 1), d(1, 1, 2, 1), d(2, 1, 1, 1), d(2, 2, 1, 1));
    let gamma = det2(d(1, 2, 1, 2), d(1, 2, 2, 2), d(1, 2, 1, 1), d(1, 2, 2, 1));
    let delta = det2(d(1, 2, 1, 1), d(1, 1, 2, 1), d(1, 2, 1, 1), d(1, 2, 2, 1));

    let alpha_t = -alpha;
    let beta_t = det2(d(1, 1, 1, 2), d(1, 2, 1, 2), d(2, 1, 1, 2), d(2, 2, 1, 2));
    let gamma_t = -gamma;
    let delta_t = det2(d(1, 1, 1, 2), d(1, 1, 2, 2), d(1, 2, 1, 2), d(1, 2, 2, 2));

    let alpha_p = det2(d(1, 2, 1, 1), d(1, 1, 1, 2), d(2, 2, 1, 1), d(2, 1, 1, 2));
    let beta_p = beta;
    let gamma_p = det2(d(1, 1, 1, 2), d(1, 1, 2, 2), d(1, 2, 1, 1), d(1, 2, 2, 1));
    let delta_p = delta;

    let alpha_tp = det2(d(2, 2, 1, 2), d(2, 1, 1, 1), d(1, 2, 1, 2), d(1, 1, 1, 1));
    let beta_tp = beta_t;
    let gamma_tp = det2(d(1, 2, 2, 2), d(1, 1, 2, 1), d(1, 2, 1, 2), d(1, 1, 1, 1));
    let delta_tp = delta_t;

    let c = [det2(alpha_t, beta_t, gamma_t, delta_t), det2(alpha_tp, beta_tp, gamma_tp, delta_tp)];
    let dd = [det2(alpha, beta, gamma, delta), det2(alpha_p, beta_p, gamma_p, delta_p)];
    [c, dd]
}

/// Which column the first elimination step pivots on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AChainVariant {
    /// `A1_m(n) = c_mn c_61 - c_m1 c_6n`: eliminates column 1 instead of
    /// column 6, so `C_{1,1}` vanishes identically.
    EliminateFirstColumn,
    /// `A1_m(n) = c_mn c_66 - c_m6 c_6n`, consistent with the later steps
    /// pivoting on columns 5 and 4.
    #[default]
    PivotLastColumn,
}

fn chain_first_field(c: &dyn Fn(usize, usize) -> f64, variant: AChainVariant) -> [f64; 2] {
    let mut a1 = [[0.0; 7]; 7];
    for m in 1..=6 {
        for n in 1..=6 {
            a1[m][n] = match variant {
                AChainVariant::EliminateFirstColumn => det2(c(m, n), c(m, 1), c(6, n), c(6, 1)),
                AChainVariant::PivotLastColumn => det2(c(m, n), c(m, 6), c(6, n), c(6, 6)),
            };
        }
    }
    let mut a2 = [[0.0; 5]; 5];
    for m in 1..=4 {
        for n in 1..=4 {
            a2[m][n] = det2(a1[m][n], a1[m][5], a1[5][n], a1[5][5]);
        }
    }
    let mut a3 = [[0.0; 4]; 4];
    for m in 1..=3 {
        for n in 1..=3 {
            a3[m][n] = det2(a2[m][n], a2[m][4], a2[4][n], a2[4][4]);
        }
    }
    [1, 2].map(|j| det2(a3[2][j], a3[2][3], a3[3][j], a3[3][3]))
}

/// `(C1, C2, C3)` for `d = 3`. `C2` and `C3` reuse the chain after swapping
/// the column pair of coordinate 1 with that of coordinate 2 or 3.
pub(crate) fn formula_fields_3d(m: &SmallMatrix<f64>, variant: AChainVariant) -> [[f64; 2]; 3] {
    [0usize, 1, 2].map(|target| {
        let perm = |n: usize| -> usize {
            let pair = (n - 1) / 2;
            let within = (n - 1) % 2;
            let mapped = if pair == 0 {
                target
            } else if pair == target {
                0
            } else {
                pair
            };
            mapped * 2 + within
        };
        let c = |r: usize, col: usize| m[(r - 1, perm(col))];
        chain_first_field(&c, variant)
    })
}

/// A closed-form field that is not orthogonal to the kernel velocities of
/// its coordinate, or that vanishes where the kernel still fixes a
/// direction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormulaDiscrepancy {
    /// 0-based coordinate index.
    pub coordinate: usize,
    pub formula_field: [f64; 2],
    /// Unit kernel-derived field, when the kernel fixes one.
    pub oracle_field: Option<[f64; 2]>,
    /// `max |f_hat . (p^i_1, p^i_2)|` over unit kernel basis vectors.
    pub residual: f64,
    pub reason: String,
}

/// Closed-form fields alongside the kernel oracle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParallelFields {
    pub formula: CharacteristicField,
    pub oracle: CharacteristicField,
    pub kernel: Vec<Vec<f64>>,
    /// Max normalized orthogonality residual over non-degenerate formula
    /// fields.
    pub orthogonality_residual: f64,
    pub discrepancies: Vec<FormulaDiscrepancy>,
}

impl ParallelFields {
    pub fn agrees(&self) -> bool {
        self.discrepancies.is_empty()
    }
}
