//! Named parametric force builders.
//!
//! * `rank_one`: `F^i_{jk} = c_j c_k G^i(x)` with
//!   `G^i = constant_i + sum_m linear_{im} x_m + cubic_i x_i^3 + sine_i sin x_i`.
//! * `polynomial`: each of `F^i_11, F^i_12 = F^i_21, F^i_22` is
//!   `constant + sum_m linear_m x_m + quadratic_m x_m^2`; tables are indexed
//!   `[i][jk]` and `[i][m][jk]` with `jk` in `(11, 12, 22)`.
//! * `zero`: identically vanishing.

use bitempo_core::classical::ForceTensorField;
use serde::{Deserialize, Serialize};

use crate::config::{suggest, Diagnostics};
use crate::CliError;

pub const FAMILIES: [&str; 3] = ["rank_one", "polynomial", "zero"];

fn one() -> i64 {
    1
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ForceSpec {
    pub family: String,
    #[serde(default = "one")]
    pub dim: i64,
    #[serde(default)]
    pub c: Option<[f64; 2]>,
    #[serde(default)]
    pub g_constant: Vec<f64>,
    #[serde(default)]
    pub g_linear: Vec<Vec<f64>>,
    #[serde(default)]
    pub g_cubic: Vec<f64>,
    #[serde(default)]
    pub g_sine: Vec<f64>,
    #[serde(default)]
    pub constant: Vec<[f64; 3]>,
    #[serde(default)]
    pub linear: Vec<Vec<[f64; 3]>>,
    #[serde(default)]
    pub quadratic: Vec<Vec<[f64; 3]>>,
}

fn padded(v: &[f64], d: usize) -> Vec<f64> {
    let mut out = v.to_vec();
    out.resize(d, 0.0);
    out
}

fn padded_rows<T: Copy + Default>(v: &[Vec<T>], d: usize) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = v.iter().map(|r| {
        let mut r = r.clone();
        r.resize(d, T::default());
        r
    }).collect();
    out.resize(d, vec![T::default(); d]);
    out
}

impl ForceSpec {
    pub fn check(&self, d: &mut Diagnostics) {
        if !FAMILIES.contains(&self.family.as_str()) {
            d.push(format!("force.family: unknown force family `{}`; {}", self.family, suggest(&self.family, &FAMILIES)));
            return;
        }
        if !(1..=3).contains(&self.dim) {
            d.push(format!("force.dim = {}: supported dimensions are 1, 2 and 3", self.dim));
            return;
        }
        let dim = self.dim as usize;
        let vector = |key: &str, v: &[f64], d: &mut Diagnostics| {
            if !v.is_empty() && v.len() != dim {
                d.push(format!("force.{key}: has {} entries, force.dim = {dim}", v.len()));
            }
            d.finite(&format!("force.{key}"), v);
        };
        match self.family.as_str() {
            "rank_one" => {
                match self.c {
                    None => d.push("force.c: rank_one needs the time couplings `c = [c1, c2]`"),
                    Some(c) => d.finite("force.c", &c),
                }
                vector("g_constant", &self.g_constant, d);
                vector("g_cubic", &self.g_cubic, d);
                vector("g_sine", &self.g_sine, d);
                if !self.g_linear.is_empty() && (self.g_linear.len() != dim || self.g_linear.iter().any(|r| r.len() != dim)) {
                    d.push(format!("force.g_linear: must be a {dim}x{dim} matrix"));
                }
                for r in &self.g_linear {
                    d.finite("force.g_linear", r);
                }
            }
            "polynomial" => {
                if !self.constant.is_empty() && self.constant.len() != dim {
                    d.push(format!("force.constant: needs {dim} rows of [F11, F12, F22]"));
                }
                for (key, table) in [("linear", &self.linear), ("quadratic", &self.quadratic)] {
                    if !table.is_empty() && (table.len() != dim || table.iter().any(|r| r.len() != dim)) {
                        d.push(format!("force.{key}: needs {dim}x{dim} entries of [F11, F12, F22]"));
                    }
                    for r in table.iter().flatten() {
                        d.finite(&format!("force.{key}"), r);
                    }
                }
                for r in &self.constant {
                    d.finite("force.constant", r);
                }
            }
            _ => {}
        }
    }

    fn checked(&self) -> Result<usize, CliError> {
        let mut d = Diagnostics::default();
        self.check(&mut d);
        if d.0.is_empty() {
            Ok(self.dim as usize)
        } else {
            Err(CliError::Config(d.0.join("; ")))
        }
    }

    /// `G(x)` of a `rank_one` spec.
    pub fn potential(&self) -> Result<impl Fn(&[f64]) -> Vec<f64> + Send + Sync + Clone + 'static, CliError> {
        let dim = self.checked()?;
        if self.family != "rank_one" {
            return Err(CliError::Config(format!("force.family `{}` has no scalar potential", self.family)));
        }
        let constant = padded(&self.g_constant, dim);
        let linear = padded_rows(&self.g_linear, dim);
        let cubic = padded(&self.g_cubic, dim);
        let sine = padded(&self.g_sine, dim);
        Ok(move |x: &[f64]| {
            (0..dim)
                .map(|i| {
                    constant[i]
                        + (0..dim).map(|m| linear[i][m] * x[m]).sum::<f64>()
                        + cubic[i] * x[i].powi(3)
                        + sine[i] * x[i].sin()
                })
                .collect()
        })
    }

    pub fn build(&self) -> Result<ForceTensorField, CliError> {
        let dim = self.checked()?;
        Ok(match self.family.as_str() {
            "rank_one" => ForceTensorField::rank_one(dim, self.c.unwrap_or_default(), self.potential()?)?,
            "polynomial" => {
                let mut constant = self.constant.clone();
                constant.resize(dim, [0.0; 3]);
                let linear = padded_rows(&self.linear, dim);
                let quadratic = padded_rows(&self.quadratic, dim);
                ForceTensorField::new(dim, true, move |x| {
                    (0..dim)
                        .map(|i| {
                            let e = |jk: usize| {
                                constant[i][jk]
                                    + (0..dim)
                                        .map(|m| linear[i][m][jk] * x[m] + quadratic[i][m][jk] * x[m] * x[m])
                                        .sum::<f64>()
                            };
                            [[e(0), e(1)], [e(1), e(2)]]
                        })
                        .collect()
                })?
            }
            _ => ForceTensorField::zero(dim)?,
        })
    }
}
