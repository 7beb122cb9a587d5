//! Numeric substrate: log-space arithmetic, precision control, and noise.

mod noise;
mod scalar;

pub use noise::{sample_laplace, sample_neg_exp1, LaplaceMechanism};
pub use scalar::{log_add, Extended, LogScalar};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericError {
    #[error("precision must be at least 53 bits, got {0}")]
    Precision(u32),

    #[error("{what} must be positive and finite, got {value}")]
    NotPositive { what: &'static str, value: f64 },
}

/// Significand precision for extended-precision reals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PrecisionContext {
    bits: u32,
}

impl PrecisionContext {
    pub const DEFAULT_BITS: u32 = 300;

    pub fn new(bits: u32) -> Result<Self, NumericError> {
        if bits < 53 {
            return Err(NumericError::Precision(bits));
        }
        Ok(Self { bits })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }
}

impl Default for PrecisionContext {
    fn default() -> Self {
        Self {
            bits: Self::DEFAULT_BITS,
        }
    }
}

pub(crate) fn check_positive(what: &'static str, value: f64) -> Result<f64, NumericError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(NumericError::NotPositive { what, value })
    }
}

/// Privacy budget and sensitivity bounds for one protocol run.
///
/// `delta0` bounds the forward quality function and is 1 for the symmetric-difference
/// quality. `delta1 = 2|R|` and `delta2 = |N_a ∩ V_Y| - 1` depend on the forward
/// release and are bound with [`PrivacyParams::with_backward`]; the backward mechanism
/// always recomputes them from its actual inputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub delta0: f64,
    pub delta1: f64,
    pub delta2: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64) -> Result<Self, NumericError> {
        Ok(Self {
            epsilon: check_positive("epsilon", epsilon)?,
            delta0: 1.0,
            delta1: 0.0,
            delta2: 0.0,
        })
    }

    /// Overrides the quality sensitivity. Only the oracle and sampler studies use
    /// values other than 1.
    pub fn with_quality_sensitivity(mut self, delta0: f64) -> Result<Self, NumericError> {
        self.delta0 = check_positive("delta0", delta0)?;
        Ok(self)
    }

    pub fn with_backward(mut self, released: usize, y_ego: usize) -> Self {
        self.delta1 = count_sensitivity(released);
        self.delta2 = partial_sum_sensitivity(y_ego);
        self
    }

    /// Exponent scale `ε / (2Δ)` of the exponential mechanism.
    pub fn exponent_scale(&self) -> f64 {
        self.epsilon / (2.0 * self.delta0)
    }
}

/// L1 sensitivity of the spanning 2-path count vector indexed by `released` X nodes.
pub fn count_sensitivity(released: usize) -> f64 {
    2.0 * released as f64
}

/// Sensitivity of Y's partial EBC sum over `y_ego` Y-side ego neighbours.
pub fn partial_sum_sensitivity(y_ego: usize) -> f64 {
    y_ego.saturating_sub(1) as f64
}
