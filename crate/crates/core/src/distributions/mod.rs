//! Tensor normal and tensor elliptical distributions.
//!
//! A scale is either a dense order-2D tensor or a list of per-mode factors
//! whose Kronecker assembly is the matricized scale. Both forms are factored
//! once at construction; the structured form never materializes the
//! `n* × n*` matrix on the density and sampling paths.

mod elliptical;
mod equivalence;
mod normal;
mod sampling;

pub use elliptical::{
    elliptical_log_density, elliptical_sample, EllipticalParams, Kernel, RadialKernel,
};
pub use equivalence::{
    elliptical_kronecker_equivalence_check, kronecker_equivalence_check, EquivalenceReport,
};
pub use normal::{
    fit_normal, normal_density, normal_log_density, normal_log_density_vec_oracle, normal_sample,
    TensorNormalParams,
};
pub use sampling::RngSeed;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, CholeskyFactor, KroneckerFactors, SYMMETRY_TOL};
use crate::tensor::{matricize, unmatricize, Shape, SquareTensor};

/// `ln √(2π)`, correctly rounded.
pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Dense scale tensor or its Kronecker factors `Σ_1 … Σ_D`.
#[derive(Debug, Clone, PartialEq)]
pub enum ScaleSpec {
    Dense(SquareTensor),
    Kronecker(KroneckerFactors),
}

impl ScaleSpec {
    pub fn row_shape(&self) -> &Shape {
        match self {
            ScaleSpec::Dense(s) => s.row_shape(),
            ScaleSpec::Kronecker(f) => f.shape(),
        }
    }

    /// The effective `n* × n*` matricized scale.
    pub fn matricized(&self) -> DMatrix<f64> {
        match self {
            ScaleSpec::Dense(s) => matricize(s),
            ScaleSpec::Kronecker(f) => linalg::kronecker_assemble(f),
        }
    }

    pub fn to_dense(&self) -> SquareTensor {
        match self {
            ScaleSpec::Dense(s) => s.clone(),
            ScaleSpec::Kronecker(f) => unmatricize(&linalg::kronecker_assemble(f), f.shape().clone())
                .expect("assembled Kronecker matrix matches its shape"),
        }
    }

    /// Multiplies the scale by `lambda > 0`. For the factored form only the
    /// first factor is scaled.
    pub fn scaled(&self, lambda: f64) -> Result<ScaleSpec> {
        match self {
            ScaleSpec::Dense(s) => Ok(ScaleSpec::Dense(s.scale(lambda))),
            ScaleSpec::Kronecker(f) => {
                let mut factors = f.factors().to_vec();
                factors[0] *= lambda;
                Ok(ScaleSpec::Kronecker(KroneckerFactors::with_shape(
                    f.shape().clone(),
                    factors,
                )?))
            }
        }
    }
}

impl From<SquareTensor> for ScaleSpec {
    fn from(s: SquareTensor) -> Self {
        ScaleSpec::Dense(s)
    }
}

impl From<KroneckerFactors> for ScaleSpec {
    fn from(f: KroneckerFactors) -> Self {
        ScaleSpec::Kronecker(f)
    }
}

/// Cholesky factor of the effective matricized scale.
#[derive(Debug, Clone)]
pub(crate) enum ScaleFactor {
    Dense(CholeskyFactor),
    /// `L = L_D ⊗ … ⊗ L_1`, applied mode by mode.
    Kronecker { shape: Shape, lowers: Vec<DMatrix<f64>> },
}

/// Calls `f` on every mode-`mode` fiber of a column-major buffer.
fn for_each_fiber(shape: &Shape, mode: usize, data: &mut [f64], mut f: impl FnMut(&mut [f64])) {
    let n = shape.dims()[mode];
    let stride = shape.stride(mode);
    let outer = shape.nstar() / (stride * n);
    let mut fiber = vec![0.0; n];
    for o in 0..outer {
        for inner in 0..stride {
            let base = inner + o * stride * n;
            for (t, v) in fiber.iter_mut().enumerate() {
                *v = data[base + t * stride];
            }
            f(&mut fiber);
            for (t, v) in fiber.iter().enumerate() {
                data[base + t * stride] = *v;
            }
        }
    }
}

fn solve_lower(l: &DMatrix<f64>, b: &mut [f64]) {
    for i in 0..b.len() {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

fn mul_lower(l: &DMatrix<f64>, z: &mut [f64]) {
    for i in (0..z.len()).rev() {
        let mut s = 0.0;
        for k in 0..=i {
            s += l[(i, k)] * z[k];
        }
        z[i] = s;
    }
}

impl ScaleFactor {
    pub(crate) fn new(spec: &ScaleSpec) -> Result<Self> {
        match spec {
            ScaleSpec::Dense(s) => Ok(ScaleFactor::Dense(linalg::cholesky(s)?)),
            ScaleSpec::Kronecker(f) => {
                let lowers = f
                    .factors()
                    .iter()
                    .map(|m| linalg::cholesky_matrix(m, SYMMETRY_TOL))
                    .collect::<Result<Vec<_>>>()?;
                Ok(ScaleFactor::Kronecker {
                    shape: f.shape().clone(),
                    lowers,
                })
            }
        }
    }

    /// `ln det(mat(S))`; for factors `Σ_k (n*/n_k) ln det(Σ_k)`.
    pub(crate) fn log_det(&self) -> f64 {
        match self {
            ScaleFactor::Dense(c) => c.log_det(),
            ScaleFactor::Kronecker { shape, lowers } => lowers
                .iter()
                .zip(shape.dims())
                .map(|(l, &n)| {
                    let ld: f64 = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
                    (shape.nstar() / n) as f64 * ld
                })
                .sum(),
        }
    }

    /// `vᵀ mat(S)⁻¹ v` via triangular solves.
    pub(crate) fn mahalanobis(&self, v: &[f64]) -> f64 {
        match self {
            ScaleFactor::Dense(c) => c.mahalanobis(v),
            ScaleFactor::Kronecker { shape, lowers } => {
                let mut y = v.to_vec();
                for (mode, l) in lowers.iter().enumerate() {
                    for_each_fiber(shape, mode, &mut y, |fiber| solve_lower(l, fiber));
                }
                y.iter().map(|t| t * t).sum()
            }
        }
    }

    /// Overwrites `z` with `L z`.
    pub(crate) fn mul_lower_in_place(&self, z: &mut [f64]) {
        match self {
            ScaleFactor::Dense(c) => c.mul_lower_in_place(z),
            ScaleFactor::Kronecker { shape, lowers } => {
                for (mode, l) in lowers.iter().enumerate() {
                    for_each_fiber(shape, mode, z, |fiber| mul_lower(l, fiber));
                }
            }
        }
    }
}

pub(crate) fn check_location(location: &crate::tensor::DenseTensor, scale: &ScaleSpec) -> Result<()> {
    if location.shape() != scale.row_shape() {
        return Err(Error::ShapeMismatch {
            expected: scale.row_shape().dims().to_vec(),
            found: location.shape().dims().to_vec(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize, seed: f64) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |r, c| ((r * 7 + c * 3) as f64 * seed).sin());
        &a * a.transpose() + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn structured_factor_matches_dense_cholesky() {
        let f = KroneckerFactors::new(vec![spd(2, 0.3), spd(3, 1.1), spd(2, 0.7)]).unwrap();
        let structured = ScaleFactor::new(&ScaleSpec::Kronecker(f.clone())).unwrap();
        let dense = ScaleFactor::new(&ScaleSpec::Dense(ScaleSpec::Kronecker(f.clone()).to_dense()))
            .unwrap();
        assert!((structured.log_det() - dense.log_det()).abs() <= 1e-12);

        let v: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).cos()).collect();
        let (qs, qd) = (structured.mahalanobis(&v), dense.mahalanobis(&v));
        assert!((qs - qd).abs() <= 1e-10 * qd.abs().max(1.0));

        let (mut a, mut b) = (v.clone(), v.clone());
        structured.mul_lower_in_place(&mut a);
        dense.mul_lower_in_place(&mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn scaled_spec_multiplies_matricization() {
        let f = KroneckerFactors::new(vec![spd(2, 0.3), spd(2, 0.9)]).unwrap();
        let spec = ScaleSpec::Kronecker(f);
        let doubled = spec.scaled(2.0).unwrap();
        let diff = doubled.matricized() - spec.matricized() * 2.0;
        assert!(diff.abs().max() <= 1e-12);
    }
}
