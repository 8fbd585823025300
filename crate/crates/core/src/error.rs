use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A user supplied map returned NaN or infinity.
    #[error("non-finite value {value} while evaluating at {at}")]
    NonFinite { at: String, value: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("unsupported spatial dimension d = {0} for this operation")]
    UnsupportedDimension(usize),

    #[error("degenerate point: {0}")]
    Degenerate(String),

    /// The radicand of a characteristic component is negative.
    #[error("complex characteristic: {component} radicand {radicand:e} is negative")]
    ComplexCharacteristic { component: &'static str, radicand: f64 },

    #[error("integration truncated: |X| exceeded {bound:e}, last valid s = {last_valid_s}")]
    Truncated { last_valid_s: f64, bound: f64 },

    #[error("no convergence after {halvings} step halvings (last change {last_change:e})")]
    NoConvergence { halvings: u32, last_change: f64 },

    #[error("off-shell wavevector: k1^2 + k2^2 - k3^2 - m^2 = {residual:e}")]
    OffShell { residual: f64 },

    #[error("out of domain: {0}")]
    OutOfDomain(String),

    #[error("singular: {0}")]
    Singular(String),

    #[error("input is not separable: relative fit residual {residual:e}")]
    NotSeparable { residual: f64 },

    #[error("normalization violated on slice (t1[{i}], t2[{j}]): integral = {integral}")]
    Normalization { i: usize, j: usize, integral: f64 },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
