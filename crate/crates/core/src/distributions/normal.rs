use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};

use super::sampling::{draw_blocks, RngSeed};
use super::{check_location, ScaleFactor, ScaleSpec, LN_SQRT_2PI};
use crate::error::{Error, Result};
use crate::linalg;
use crate::stats::{covariance, mean_tensor, Normalization, SampleSet};
use crate::tensor::DenseTensor;

/// Parameters of the tensor normal `TN_n(M, S)`: `vec(X) ~ N(vec(M), mat(S))`.
#[derive(Debug, Clone)]
pub struct TensorNormalParams {
    location: DenseTensor,
    scale: ScaleSpec,
    factor: ScaleFactor,
    log_det: f64,
}

impl TensorNormalParams {
    /// Factors the scale once; fails unless the effective matricization is
    /// symmetric positive definite.
    pub fn new(location: DenseTensor, scale: impl Into<ScaleSpec>) -> Result<Self> {
        let scale = scale.into();
        check_location(&location, &scale)?;
        let factor = ScaleFactor::new(&scale)?;
        let log_det = factor.log_det();
        Ok(TensorNormalParams {
            location,
            scale,
            factor,
            log_det,
        })
    }

    pub fn location(&self) -> &DenseTensor {
        &self.location
    }

    pub fn scale(&self) -> &ScaleSpec {
        &self.scale
    }

    /// `ln det(mat(S))`.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `(x - M) : S⁻¹ : (x - M)`.
    pub fn quadratic_form(&self, x: &DenseTensor) -> Result<f64> {
        self.location.shape().ensure_eq(x.shape())?;
        let dev: Vec<f64> = x
            .as_slice()
            .iter()
            .zip(self.location.as_slice())
            .map(|(a, m)| a - m)
            .collect();
        Ok(self.factor.mahalanobis(&dev))
    }

    pub fn log_density(&self, x: &DenseTensor) -> Result<f64> {
        let q = self.quadratic_form(x)?;
        let n = self.location.shape().nstar() as f64;
        Ok(-n * LN_SQRT_2PI - 0.5 * self.log_det - 0.5 * q)
    }
}

/// `ln f(x) = -(n*/2) ln 2π - ½ ln det(S) - ½ (x-M):S⁻¹:(x-M)`.
pub fn normal_log_density(p: &TensorNormalParams, x: &DenseTensor) -> Result<f64> {
    p.log_density(x)
}

pub fn normal_density(p: &TensorNormalParams, x: &DenseTensor) -> Result<f64> {
    Ok(p.log_density(x)?.exp())
}

/// Classical multivariate normal log-density of `vec(x)` with covariance
/// `mat(S)`, computed with an explicit LU inverse and determinant. Kept
/// independent of the Cholesky path so the two can be compared.
pub fn normal_log_density_vec_oracle(p: &TensorNormalParams, x: &DenseTensor) -> Result<f64> {
    p.location.shape().ensure_eq(x.shape())?;
    let sigma = p.scale.matricized();
    let precision = linalg::inverse_matrix(&sigma)?;
    let det = linalg::det_matrix(&sigma);
    let dev = DVector::from_iterator(
        x.as_slice().len(),
        x.as_slice()
            .iter()
            .zip(p.location.as_slice())
            .map(|(a, m)| a - m),
    );
    let q = dev.dot(&(&precision * &dev));
    let n = dev.len() as f64;
    Ok(-0.5 * n * (2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln() - 0.5 * q)
}

/// `count` draws of `M + unvec(L z)`, `z` standard normal, `L Lᵀ = mat(S)`.
pub fn normal_sample(p: &TensorNormalParams, seed: RngSeed, count: usize) -> SampleSet {
    let shape = p.location.shape().clone();
    let n = shape.nstar();
    let observations = draw_blocks(seed, count, |rng| {
        let mut z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        p.factor.mul_lower_in_place(&mut z);
        for (v, m) in z.iter_mut().zip(p.location.as_slice()) {
            *v += m;
        }
        DenseTensor::new_unchecked(shape.clone(), z)
    });
    SampleSet::new(shape, observations).expect("draws share the location shape")
}

/// Moment fit: location is the sample mean, scale the dense sample
/// covariance tensor. No regularization is applied.
pub fn fit_normal(s: &SampleSet, normalization: Normalization) -> Result<TensorNormalParams> {
    if s.len() < 2 {
        return Err(Error::Argument(format!(
            "fitting needs at least 2 observations, got {}",
            s.len()
        )));
    }
    let location = mean_tensor(s)?;
    let cov = covariance(s, normalization)?.into_value();
    TensorNormalParams::new(location, cov).map_err(|e| match e {
        Error::NotPositiveDefinite { pivot, value, .. } => Error::NotPositiveDefinite {
            pivot,
            value,
            hint: "; sample covariance is rank deficient, consider adding a ridge ε·I",
        },
        other => other,
    })
}
