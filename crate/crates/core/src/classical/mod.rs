//! Classical two-time mechanics: a position `x^i(t1, t2)` driven by
//! `d p^i_j / d t_k = F^i_{kj}(x)` with `p^i_j = d x^i / d t_j + A^i_j`.
//!
//! Two-time motion requires the force derivatives to admit a non-trivial
//! kernel of the linear system obtained from commuting time derivatives. The
//! kernel fixes, per coordinate, a characteristic direction in the time plane
//! along which that coordinate is constant.

mod closed_form;
mod constraint;
mod force;
mod integrate;
mod one_dim;

use serde::Serialize;

pub use closed_form::{AChainVariant, FormulaDiscrepancy, ParallelFields};
pub use constraint::{
    admissibility_determinant, build_constraint_matrix, classify, curl_residual, normalized_determinant,
    parallel_fields_2d, parallel_fields_3d, parallel_fields_3d_with, rank_tolerance, ConstraintReport, SurfaceMap,
    Verdict,
};
pub use force::{ForceGradient, ForceTensor, ForceTensorField, GaugeConnection, VelocityPair};
pub use integrate::{
    integrate_rank_one_1d, integrate_rank_one_1d_with, IntegratorOptions, RankOneSurface, RankOneTrajectory,
};
pub use one_dim::{
    characteristic_field_1d, consistency_residual_1d, force_derivatives_1d, normalized_consistency_residual_1d,
    orbit_relation_1d, surface_orbit_residual, surface_orthogonality_residual, OrbitRelation,
};

/// Characteristic 2-vectors in the time plane, one per coordinate.
///
/// A vector whose norm does not exceed the floor it was built with is
/// flagged degenerate; its raw value is kept.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharacteristicField {
    pub vectors: Vec<[f64; 2]>,
    pub degenerate: Vec<bool>,
}

impl CharacteristicField {
    pub fn from_vectors(vectors: Vec<[f64; 2]>, floor: f64) -> Self {
        let degenerate = vectors
            .iter()
            .map(|v| {
                let n = v[0].hypot(v[1]);
                n == 0.0 || n <= floor || !n.is_finite()
            })
            .collect();
        Self { vectors, degenerate }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate.iter().any(|&d| d)
    }

    /// Unit vector for field `i`, `None` when degenerate.
    pub fn unit(&self, i: usize) -> Option<[f64; 2]> {
        if self.degenerate[i] {
            return None;
        }
        let v = self.vectors[i];
        let n = v[0].hypot(v[1]);
        Some([v[0] / n, v[1] / n])
    }
}
