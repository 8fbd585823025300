use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numeric::Tolerances;

/// `F^i_{jk}` at one position: outer index is the space index `i`, inner
/// `[j][k]` are the time indices (0 for time 1, 1 for time 2).
pub type ForceTensor = Vec<[[f64; 2]; 2]>;

type ForceMap = dyn Fn(&[f64]) -> ForceTensor + Send + Sync;

/// Autonomous force tensor field `x -> F^i_{jk}(x)` in `d = 1, 2, 3`.
///
/// The map never receives the times: an explicit time dependence would make
/// the second time trivially relevant.
#[derive(Clone)]
pub struct ForceTensorField {
    dim: usize,
    symmetric: bool,
    eval: Arc<ForceMap>,
}

impl fmt::Debug for ForceTensorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ForceTensorField")
            .field("dim", &self.dim)
            .field("symmetric", &self.symmetric)
            .finish_non_exhaustive()
    }
}

impl ForceTensorField {
    pub fn new<F>(dim: usize, symmetric: bool, eval: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> ForceTensor + Send + Sync + 'static,
    {
        if !(1..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        Ok(Self { dim, symmetric, eval: Arc::new(eval) })
    }

    /// `F^i_{jk}(x) = c_j c_k G^i(x)`: the family that admits two-time motion
    /// along `s = c1 t1 + c2 t2`.
    pub fn rank_one<G>(dim: usize, c: [f64; 2], potential: G) -> Result<Self>
    where
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self::new(dim, true, move |x| {
            potential(x)
                .into_iter()
                .map(|g| {
                    let mut t = [[0.0; 2]; 2];
                    for (j, row) in t.iter_mut().enumerate() {
                        for (k, v) in row.iter_mut().enumerate() {
                            *v = c[j] * c[k] * g;
                        }
                    }
                    t
                })
                .collect()
        })
    }

    pub fn zero(dim: usize) -> Result<Self> {
        Self::new(dim, true, move |_| vec![[[0.0; 2]; 2]; dim])
    }

    /// The same field multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let inner = Arc::clone(&self.eval);
        Self {
            dim: self.dim,
            symmetric: self.symmetric,
            eval: Arc::new(move |x| {
                inner(x)
                    .into_iter()
                    .map(|t| t.map(|row| row.map(|v| v * factor)))
                    .collect()
            }),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<ForceTensor> {
        if x.len() != self.dim {
            return Err(Error::contract(format!(
                "position has {} components, field has d = {}",
                x.len(),
                self.dim
            )));
        }
        let t = (self.eval)(x);
        if t.len() != self.dim {
            return Err(Error::contract(format!(
                "force map returned {} space components, expected {}",
                t.len(),
                self.dim
            )));
        }
        for (i, comp) in t.iter().enumerate() {
            for (j, row) in comp.iter().enumerate() {
                for (k, &v) in row.iter().enumerate() {
                    if !v.is_finite() {
                        return Err(Error::NonFinite {
                            at: format!("F^{}_{}{} at x = {:?}", i + 1, j + 1, k + 1, x),
                            value: v,
                        });
                    }
                }
            }
        }
        Ok(t)
    }

    /// All first derivatives `F^i_{jk,x^m}` by central differences.
    pub fn gradient(&self, x: &[f64], tol: &Tolerances) -> Result<ForceGradient> {
        let d = self.dim;
        let mut grad = ForceGradient { dim: d, data: vec![0.0; d * 4 * d] };
        let mut probe = x.to_vec();
        for m in 0..d {
            let h = tol.step_at(x[m]);
            probe[m] = x[m] + h;
            let hi = self.evaluate(&probe)?;
            probe[m] = x[m] - h;
            let lo = self.evaluate(&probe)?;
            probe[m] = x[m];
            for i in 0..d {
                for j in 0..2 {
                    for k in 0..2 {
                        let v = (hi[i][j][k] - lo[i][j][k]) / (2.0 * h);
                        if !v.is_finite() {
                            return Err(Error::NonFinite {
                                at: format!("dF^{}_{}{}/dx^{} at x = {:?}", i + 1, j + 1, k + 1, m + 1, x),
                                value: v,
                            });
                        }
                        grad.set(i, j, k, m, v);
                    }
                }
            }
        }
        Ok(grad)
    }

    /// `max_i |F^i_{12} - F^i_{21}|` at `x`.
    pub fn symmetry_defect(&self, x: &[f64]) -> Result<f64> {
        Ok(self
            .evaluate(x)?
            .iter()
            .map(|t| (t[0][1] - t[1][0]).abs())
            .fold(0.0, f64::max))
    }
}

/// Derivatives `F^i_{jk,x^m}`, all indices 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceGradient {
    dim: usize,
    data: Vec<f64>,
}

impl ForceGradient {
    fn offset(&self, i: usize, j: usize, k: usize, m: usize) -> usize {
        ((i * 2 + j) * 2 + k) * self.dim + m
    }

    pub fn get(&self, i: usize, j: usize, k: usize, m: usize) -> f64 {
        self.data[self.offset(i, j, k, m)]
    }

    fn set(&mut self, i: usize, j: usize, k: usize, m: usize, v: f64) {
        let o = self.offset(i, j, k, m);
        self.data[o] = v;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Gauge connection `x -> (A_1, A_2)`; only meaningful for `d = 1`.
#[derive(Clone)]
pub struct GaugeConnection {
    eval: Arc<dyn Fn(f64) -> [f64; 2] + Send + Sync>,
}

impl fmt::Debug for GaugeConnection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GaugeConnection").finish_non_exhaustive()
    }
}

impl GaugeConnection {
    pub fn new<F>(eval: F) -> Self
    where
        F: Fn(f64) -> [f64; 2] + Send + Sync + 'static,
    {
        Self { eval: Arc::new(eval) }
    }

    pub fn zero() -> Self {
        Self::new(|_| [0.0, 0.0])
    }

    pub fn evaluate(&self, x: f64) -> Result<[f64; 2]> {
        let a = (self.eval)(x);
        if let Some(&v) = a.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite { at: format!("A at x = {x}"), value: v });
        }
        Ok(a)
    }
}

/// Velocities `p^i_j`, one pair per space index.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityPair {
    pub p: Vec<[f64; 2]>,
}

impl VelocityPair {
    pub fn one_dim(p1: f64, p2: f64) -> Self {
        Self { p: vec![[p1, p2]] }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { p: self.p.iter().map(|q| [q[0] * factor, q[1] * factor]).collect() }
    }
}
