use std::fmt;
use std::sync::Arc;

use rand::RngCore;
use rand_distr::{ChiSquared, Distribution, FisherF, StandardNormal};
use statrs::function::gamma::ln_gamma;

use super::sampling::{draw_blocks, RngSeed};
use super::{check_location, ScaleFactor, ScaleSpec, LN_SQRT_2PI};
use crate::error::{Error, Result};
use crate::stats::SampleSet;
use crate::tensor::DenseTensor;

/// Radial kernel `g` of an elliptical density `c · g(q)`.
///
/// `log_normalizer` excludes the `det(mat(S))^{-1/2}` factor, which
/// [`EllipticalParams`] adds itself.
pub trait RadialKernel: fmt::Debug + Send + Sync {
    /// Identifier such as `normal` or `student:5`.
    fn name(&self) -> String;

    /// `ln g(q)` for `q ≥ 0` in `nstar` dimensions.
    fn log_g(&self, q: f64, nstar: usize) -> f64;

    /// `ln c` for an identity scale in `nstar` dimensions.
    fn log_normalizer(&self, nstar: usize) -> f64;

    /// One draw of `R²` for the radial-spherical representation, or `None`
    /// when the kernel has no sampler.
    fn sample_radius_sq(&self, _nstar: usize, _rng: &mut dyn RngCore) -> Option<f64> {
        None
    }

    fn has_sampler(&self) -> bool {
        false
    }

    /// Ratio between the covariance tensor and the scale tensor, when finite.
    fn covariance_scale(&self, _nstar: usize) -> Option<f64> {
        None
    }
}

/// Built-in kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// `g(q) = exp(-q/2)`.
    Normal,
    /// Tensor-t: `g(q) = (1 + q/ν)^{-(ν+n*)/2}`.
    Student { dof: f64 },
}

impl Kernel {
    pub fn student(dof: f64) -> Result<Kernel> {
        if !(dof > 0.0 && dof.is_finite()) {
            return Err(Error::Argument(format!(
                "degrees of freedom must be positive and finite, got {dof}"
            )));
        }
        Ok(Kernel::Student { dof })
    }
}

impl std::str::FromStr for Kernel {
    type Err = Error;

    /// Parses `normal` or `student:ν`.
    fn from_str(s: &str) -> Result<Kernel> {
        match s.split_once(':') {
            None if s == "normal" => Ok(Kernel::Normal),
            Some(("student", dof)) => {
                let dof: f64 = dof.parse().map_err(|_| Error::UnknownKernel(s.to_string()))?;
                Kernel::student(dof)
            }
            _ => Err(Error::UnknownKernel(s.to_string())),
        }
    }
}

impl RadialKernel for Kernel {
    fn name(&self) -> String {
        match self {
            Kernel::Normal => "normal".into(),
            Kernel::Student { dof } => format!("student:{dof}"),
        }
    }

    fn log_g(&self, q: f64, nstar: usize) -> f64 {
        match *self {
            Kernel::Normal => -0.5 * q,
            Kernel::Student { dof } => -0.5 * (dof + nstar as f64) * (q / dof).ln_1p(),
        }
    }

    fn log_normalizer(&self, nstar: usize) -> f64 {
        let n = nstar as f64;
        match *self {
            Kernel::Normal => -n * LN_SQRT_2PI,
            Kernel::Student { dof } => {
                ln_gamma(0.5 * (dof + n))
                    - ln_gamma(0.5 * dof)
                    - 0.5 * n * (dof * std::f64::consts::PI).ln()
            }
        }
    }

    fn sample_radius_sq(&self, nstar: usize, rng: &mut dyn RngCore) -> Option<f64> {
        let n = nstar as f64;
        match *self {
            Kernel::Normal => Some(ChiSquared::new(n).ok()?.sample(rng)),
            Kernel::Student { dof } => Some(n * FisherF::new(n, dof).ok()?.sample(rng)),
        }
    }

    fn has_sampler(&self) -> bool {
        true
    }

    fn covariance_scale(&self, _nstar: usize) -> Option<f64> {
        match *self {
            Kernel::Normal => Some(1.0),
            Kernel::Student { dof } if dof > 2.0 => Some(dof / (dof - 2.0)),
            Kernel::Student { .. } => None,
        }
    }
}

/// Parameters of a tensor elliptical distribution `f(X) = c g((X-M):S⁻¹:(X-M))`.
#[derive(Debug, Clone)]
pub struct EllipticalParams {
    location: DenseTensor,
    scale: ScaleSpec,
    factor: ScaleFactor,
    kernel: Arc<dyn RadialKernel>,
    log_normalizer: f64,
}

impl EllipticalParams {
    pub fn new(
        location: DenseTensor,
        scale: impl Into<ScaleSpec>,
        kernel: impl RadialKernel + 'static,
    ) -> Result<Self> {
        Self::with_kernel(location, scale, Arc::new(kernel))
    }

    pub fn with_kernel(
        location: DenseTensor,
        scale: impl Into<ScaleSpec>,
        kernel: Arc<dyn RadialKernel>,
    ) -> Result<Self> {
        let scale = scale.into();
        check_location(&location, &scale)?;
        let factor = ScaleFactor::new(&scale)?;
        let nstar = location.shape().nstar();
        let log_normalizer = kernel.log_normalizer(nstar) - 0.5 * factor.log_det();
        if !log_normalizer.is_finite() {
            return Err(Error::Argument(format!(
                "kernel `{}` has a non-finite normalizer",
                kernel.name()
            )));
        }
        Ok(EllipticalParams {
            location,
            scale,
            factor,
            kernel,
            log_normalizer,
        })
    }

    pub fn location(&self) -> &DenseTensor {
        &self.location
    }

    pub fn scale(&self) -> &ScaleSpec {
        &self.scale
    }

    pub fn kernel(&self) -> &dyn RadialKernel {
        self.kernel.as_ref()
    }

    /// `ln c`, including `-½ ln det(mat(S))`.
    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

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
        Ok(self.log_normalizer + self.kernel.log_g(q, self.location.shape().nstar()))
    }
}

/// `ln c + ln g(q)`.
pub fn elliptical_log_density(p: &EllipticalParams, x: &DenseTensor) -> Result<f64> {
    p.log_density(x)
}

/// Radial-spherical draws `M + R · unvec(L u)`, `u` uniform on the unit
/// sphere in `n*` dimensions.
pub fn elliptical_sample(p: &EllipticalParams, seed: RngSeed, count: usize) -> Result<SampleSet> {
    if !p.kernel.has_sampler() {
        return Err(Error::UnsupportedKernel(p.kernel.name()));
    }
    let shape = p.location.shape().clone();
    let n = shape.nstar();
    let draws = draw_blocks(seed, count, |rng| {
        let mut u: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        let r = p.kernel.sample_radius_sq(n, rng)?.sqrt();
        p.factor.mul_lower_in_place(&mut u);
        for (v, m) in u.iter_mut().zip(p.location.as_slice()) {
            *v = m + r * (*v / norm);
        }
        Some(DenseTensor::new_unchecked(shape.clone(), u))
    });
    let observations = draws
        .into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::UnsupportedKernel(p.kernel.name()))?;
    SampleSet::new(shape, observations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{normal_log_density, TensorNormalParams};
    use crate::stats::{covariance, Normalization};
    use crate::tensor::{Shape, SquareTensor};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn shape(d: &[usize]) -> Shape {
        Shape::new(d.to_vec()).unwrap()
    }

    fn scale() -> SquareTensor {
        let a = DMatrix::from_fn(4, 4, |r, c| 0.4 * ((3 * r + c) as f64).cos());
        let m = &a * a.transpose() + DMatrix::identity(4, 4) * 0.7;
        crate::tensor::unmatricize(&m, shape(&[2, 2])).unwrap()
    }

    #[derive(Debug)]
    struct Laplacian;

    impl RadialKernel for Laplacian {
        fn name(&self) -> String {
            "laplacian".into()
        }
        fn log_g(&self, q: f64, _nstar: usize) -> f64 {
            -q.sqrt()
        }
        fn log_normalizer(&self, _nstar: usize) -> f64 {
            0.0
        }
    }

    #[test]
    fn kernel_parsing() {
        assert_eq!("normal".parse::<Kernel>().unwrap(), Kernel::Normal);
        assert_eq!("student:5".parse::<Kernel>().unwrap(), Kernel::Student { dof: 5.0 });
        assert!(matches!("cauchy".parse::<Kernel>(), Err(Error::UnknownKernel(_))));
        assert!(matches!("student:x".parse::<Kernel>(), Err(Error::UnknownKernel(_))));
        assert!(matches!("student:-1".parse::<Kernel>(), Err(Error::Argument(_))));
        assert_eq!(Kernel::Student { dof: 5.0 }.name(), "student:5");
    }

    #[test]
    fn normal_kernel_matches_tensor_normal() {
        let loc = DenseTensor::new(shape(&[2, 2]), vec![0.1, 0.2, -0.3, 0.0]).unwrap();
        let e = EllipticalParams::new(loc.clone(), scale(), Kernel::Normal).unwrap();
        let n = TensorNormalParams::new(loc.clone(), scale()).unwrap();
        for k in 0..10 {
            let x = DenseTensor::from_fn(shape(&[2, 2]), |i| {
                ((k * 4 + i[0] + 2 * i[1]) as f64 * 0.77).sin() * 2.0
            })
            .unwrap();
            let diff = elliptical_log_density(&e, &x).unwrap() - normal_log_density(&n, &x).unwrap();
            assert!(diff.abs() <= 1e-12);
        }
        assert_eq!(
            e.log_density(&loc).unwrap(),
            e.log_normalizer() + Kernel::Normal.log_g(0.0, 4)
        );
    }

    #[test]
    fn student_with_large_dof_approaches_normal() {
        let loc = DenseTensor::zeros(shape(&[2, 2]));
        let t = EllipticalParams::new(loc.clone(), scale(), Kernel::student(1e6).unwrap()).unwrap();
        let n = TensorNormalParams::new(loc, scale()).unwrap();
        let x = DenseTensor::new(shape(&[2, 2]), vec![0.5, -1.0, 1.5, 0.3]).unwrap();
        let diff = t.log_density(&x).unwrap() - n.log_density(&x).unwrap();
        assert!(diff.abs() <= 1e-3, "diff {diff}");
    }

    #[test]
    fn student_one_dimensional_density() {
        // Student t with ν = 3 at x = 1: Γ(2)/(Γ(1.5)√(3π)) (1 + 1/3)^{-2}
        let p = EllipticalParams::new(
            DenseTensor::zeros(shape(&[1])),
            SquareTensor::identity(shape(&[1])),
            Kernel::student(3.0).unwrap(),
        )
        .unwrap();
        let x = DenseTensor::new(shape(&[1]), vec![1.0]).unwrap();
        let gamma_1_5 = 0.5 * std::f64::consts::PI.sqrt();
        let expected = 1.0 / (gamma_1_5 * (3.0 * std::f64::consts::PI).sqrt()) * (4.0f64 / 3.0).powi(-2);
        assert_relative_eq!(p.log_density(&x).unwrap(), expected.ln(), epsilon = 1e-12);
    }

    #[test]
    fn custom_kernel_evaluates_but_cannot_sample() {
        let p = EllipticalParams::new(
            DenseTensor::zeros(shape(&[2])),
            SquareTensor::identity(shape(&[2])),
            Laplacian,
        )
        .unwrap();
        let x = DenseTensor::new(shape(&[2]), vec![3.0, 4.0]).unwrap();
        assert_relative_eq!(p.log_density(&x).unwrap(), -5.0, epsilon = 1e-14);
        assert!(matches!(
            elliptical_sample(&p, RngSeed::new(1), 10),
            Err(Error::UnsupportedKernel(_))
        ));
    }

    #[test]
    fn sampling_contracts() {
        let p = EllipticalParams::new(DenseTensor::zeros(shape(&[2, 2])), scale(), Kernel::Normal)
            .unwrap();
        assert!(elliptical_sample(&p, RngSeed::new(5), 0).unwrap().is_empty());
        let a = elliptical_sample(&p, RngSeed::new(5), 100).unwrap();
        assert_eq!(a, elliptical_sample(&p, RngSeed::new(5), 100).unwrap());
    }

    #[test]
    fn student_covariance_is_scaled() {
        let s = shape(&[2]);
        let p = EllipticalParams::new(
            DenseTensor::zeros(s.clone()),
            SquareTensor::identity(s.clone()),
            Kernel::student(5.0).unwrap(),
        )
        .unwrap();
        assert_eq!(p.kernel().covariance_scale(2), Some(5.0 / 3.0));
        assert_eq!(Kernel::Student { dof: 2.0 }.covariance_scale(2), None);
        let draws = elliptical_sample(&p, RngSeed::new(17), 100_000).unwrap();
        let k = covariance(&draws, Normalization::Unbiased).unwrap();
        let m = crate::tensor::matricize(k.value());
        assert!((m[(0, 0)] - 5.0 / 3.0).abs() < 0.1);
        assert!(m[(0, 1)].abs() < 0.05);
    }
}
