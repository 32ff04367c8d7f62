use super::{EllipticalParams, TensorNormalParams};
use crate::error::Result;
use crate::tensor::DenseTensor;

/// Largest log-density disagreement between two parameterizations over a
/// batch of probe points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceReport {
    pub probes: usize,
    pub max_deviation: f64,
}

impl EquivalenceReport {
    pub fn within(&self, tolerance: f64) -> bool {
        self.max_deviation <= tolerance
    }
}

fn compare(
    probes: &[DenseTensor],
    mut lhs: impl FnMut(&DenseTensor) -> Result<f64>,
    mut rhs: impl FnMut(&DenseTensor) -> Result<f64>,
) -> Result<EquivalenceReport> {
    let mut max_deviation: f64 = 0.0;
    for x in probes {
        max_deviation = max_deviation.max((lhs(x)? - rhs(x)?).abs());
    }
    Ok(EquivalenceReport {
        probes: probes.len(),
        max_deviation,
    })
}

/// Compares a dense `TN(M, S)` against a factored `TN(M, Σ_1, …, Σ_D)`
/// (or any two tensor normal parameterizations) on the given probes.
pub fn kronecker_equivalence_check(
    dense: &TensorNormalParams,
    structured: &TensorNormalParams,
    probes: &[DenseTensor],
) -> Result<EquivalenceReport> {
    dense.location().shape().ensure_eq(structured.location().shape())?;
    compare(probes, |x| dense.log_density(x), |x| structured.log_density(x))
}

/// Elliptical counterpart of [`kronecker_equivalence_check`].
pub fn elliptical_kronecker_equivalence_check(
    dense: &EllipticalParams,
    structured: &EllipticalParams,
    probes: &[DenseTensor],
) -> Result<EquivalenceReport> {
    dense.location().shape().ensure_eq(structured.location().shape())?;
    compare(probes, |x| dense.log_density(x), |x| structured.log_density(x))
}
