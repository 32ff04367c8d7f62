//! Seeded invariant and Monte-Carlo checks run by `tensorstat verify`.
//!
//! Exact identities are checked on random instances drawn from one stream;
//! each Monte-Carlo check gets its own stream so adding a check does not
//! shift the draws of another. Monte-Carlo tolerances are calibrated at
//! `N = 10⁵` and widened by `sqrt(10⁵ / N)` for smaller runs.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use tensorstat::distributions::{
    elliptical_sample, kronecker_equivalence_check, normal_log_density,
    normal_log_density_vec_oracle, normal_sample, EllipticalParams, Kernel, RngSeed, ScaleSpec,
    TensorNormalParams,
};
use tensorstat::linalg::{self, KroneckerFactors};
use tensorstat::stats::{
    correlation, covariance, covariance_of_vec, cross_covariance, mean_tensor, Normalization,
    SampleSet,
};
use tensorstat::tensor::{contract_product, matricize, unmatricize, vectorize};
use tensorstat::{DenseTensor, Error, Shape, SquareTensor};

use crate::format::g17;
use crate::CliError;

pub const DEFAULT_SEED: u64 = 20_240_601;
pub const DEFAULT_N: usize = 100_000;
const REFERENCE_N: f64 = 1e5;
const STUDENT_DOF: f64 = 5.0;

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub seed: u64,
    pub n: usize,
    pub shape: Shape,
    /// Random instances per exact identity.
    pub trials: usize,
    /// Test hook: perturbs the determinant of a product.
    pub corrupt_det: bool,
}

impl VerifyConfig {
    pub fn new(seed: u64, n: usize, shape: Shape) -> Self {
        VerifyConfig {
            seed,
            n,
            shape,
            trials: 64,
            corrupt_det: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub deviation: f64,
    pub tolerance: f64,
    pub sample_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub seed: u64,
    pub n: usize,
    pub shape: Shape,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect()
    }

    pub fn render(&self) -> String {
        let mut out = format!("seed={} n={} shape={}\n", self.seed, self.n, self.shape);
        for c in &self.checks {
            out += &format!(
                "{} {} deviation={} tolerance={} samples={}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                g17(c.deviation),
                g17(c.tolerance),
                c.sample_size
            );
        }
        let failed = self.failures().len();
        out += &format!("{} checks, {} failed\n", self.checks.len(), failed);
        out
    }
}

/// Parses `2x2`, `3x2x2`, ….
pub fn parse_shape(spec: &str) -> Result<Shape, CliError> {
    let dims = spec
        .split('x')
        .map(|d| d.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::Input(format!("invalid shape spec `{spec}`, expected e.g. 2x2")))?;
    Ok(Shape::new(dims)?)
}

struct Checks {
    results: Vec<CheckResult>,
}

impl Checks {
    fn push(&mut self, name: &'static str, deviation: f64, tolerance: f64, sample_size: usize) {
        self.results.push(CheckResult {
            name,
            passed: deviation <= tolerance,
            deviation,
            tolerance,
            sample_size,
        });
    }
}

fn uniform_square(rng: &mut impl Rng, shape: &Shape) -> SquareTensor {
    let n = shape.nstar();
    SquareTensor::new(shape.clone(), (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .expect("finite entries")
}

fn uniform_dense(rng: &mut impl Rng, shape: &Shape) -> DenseTensor {
    DenseTensor::new(shape.clone(), (0..shape.nstar()).map(|_| rng.random_range(-1.0..1.0)).collect())
        .expect("finite entries")
}

fn spd_matrix(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n)
}

fn spd(rng: &mut impl Rng, shape: &Shape) -> SquareTensor {
    unmatricize(&spd_matrix(rng, shape.nstar()), shape.clone()).expect("square")
}

/// SPD with unit diagonal.
fn unit_scale_spd(rng: &mut impl Rng, shape: &Shape) -> SquareTensor {
    let m = spd_matrix(rng, shape.nstar());
    let d = m.diagonal().map(|v| 1.0 / v.sqrt());
    let c = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        if i == j {
            1.0
        } else {
            m[(i, j)] * d[i] * d[j]
        }
    });
    unmatricize(&c, shape.clone()).expect("square")
}

fn uniform_samples(rng: &mut impl Rng, shape: &Shape, count: usize) -> SampleSet {
    SampleSet::new(shape.clone(), (0..count).map(|_| uniform_dense(rng, shape)).collect())
        .expect("conforming")
}

fn rel(observed: f64, expected: f64) -> f64 {
    (observed - expected).abs() / expected.abs().max(f64::MIN_POSITIVE)
}

fn frob_rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

pub fn run(cfg: &VerifyConfig) -> Result<VerifyReport, CliError> {
    if cfg.n < 2 {
        return Err(CliError::Input(format!("--n must be at least 2, got {}", cfg.n)));
    }
    let shape = &cfg.shape;
    let t = cfg.trials;
    let root = RngSeed::new(cfg.seed);
    let mut rng = root.block_rng(0);
    let mut c = Checks { results: Vec::new() };
    let mc_scale = (REFERENCE_N / cfg.n as f64).sqrt().max(1.0);

    // matricization algebra
    let zero = SquareTensor::zeros(shape.clone());
    c.push("mat-zero", max_abs(&matricize(&zero)), 0.0, 1);
    let id = SquareTensor::identity(shape.clone());
    let n = shape.nstar();
    c.push("mat-identity", max_abs(&(matricize(&id) - DMatrix::identity(n, n))), 0.0, 1);

    let (mut lin, mut tr, mut prod, mut inv) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..t {
        let x = uniform_square(&mut rng, shape);
        let y = uniform_square(&mut rng, shape);
        let alpha = rng.random_range(-3.0..3.0);
        let combo = matricize(&x.scale(alpha).add(&y)?);
        lin = lin.max(frob_rel(&combo, &(matricize(&x) * alpha + matricize(&y))));
        tr = tr.max(max_abs(&(matricize(&x.transpose2d()) - matricize(&x).transpose())));
        let p = matricize(&contract_product(&x, &y)?);
        prod = prod.max(frob_rel(&p, &(matricize(&x) * matricize(&y))));
        let s = spd(&mut rng, shape);
        let si = linalg::inverse(&s)?;
        inv = inv.max(contract_product(&s, &si)?.max_abs_diff(&id));
    }
    c.push("mat-linearity", lin, 1e-12, t);
    c.push("mat-transpose", tr, 0.0, t);
    c.push("mat-product", prod, 1e-12, t);
    c.push("mat-inverse", inv, 1e-10, t);

    // determinants
    c.push("det-zero", linalg::det(&zero).abs(), 0.0, 1);
    c.push("det-identity", (linalg::det(&id) - 1.0).abs(), 0.0, 1);
    let (mut scale, mut trans, mut product, mut inverse) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..t {
        let x = spd(&mut rng, shape);
        let y = spd(&mut rng, shape);
        let lambda = rng.random_range(0.5..2.0);
        let (dx, dy) = (linalg::det(&x), linalg::det(&y));
        scale = scale.max(rel(linalg::det(&x.scale(lambda)), lambda.powi(n as i32) * dx));
        trans = trans.max(rel(linalg::det(&x.transpose2d()), dx));
        let mut dxy = linalg::det(&contract_product(&x, &y)?);
        if cfg.corrupt_det {
            dxy *= 1.0 + 1e-6;
        }
        product = product.max(rel(dxy, dx * dy));
        inverse = inverse.max(rel(linalg::det(&linalg::inverse(&x)?), 1.0 / dx));
    }
    c.push("det-scale", scale, 1e-9, t);
    c.push("det-transpose", trans, 1e-9, t);
    c.push("det-product", product, 1e-9, t);
    c.push("det-inverse", inverse, 1e-9, t);

    // covariance identities
    let (mut swap, mut additivity, mut symmetry, mut moment, mut expansion, mut mat_cov) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let obs = 20;
    for _ in 0..t {
        let x = uniform_samples(&mut rng, shape, obs);
        let y = uniform_samples(&mut rng, shape, obs);
        let z = uniform_samples(&mut rng, shape, obs);
        let u = Normalization::Unbiased;
        let kxy = cross_covariance(&x, &y, u)?;
        let kyx = cross_covariance(&y, &x, u)?;
        swap = swap.max(kxy.value().transpose().max_abs_diff(kyx.value()));

        let kxz = cross_covariance(&x, &z, u)?;
        let kyz = cross_covariance(&y, &z, u)?;
        let ksz = cross_covariance(&x.paired_sum(&y)?, &z, u)?;
        additivity = additivity.max(ksz.value().max_abs_diff(&kxz.value().add(kyz.value())?));

        let kx = covariance(&x, u)?;
        symmetry = symmetry.max(kx.value().transpose2d().max_abs_diff(kx.value()));

        let mle = covariance(&x, Normalization::Mle)?;
        moment = moment.max(max_abs(&(matricize(mle.value()) - moment_oracle(&x))));

        let ky = covariance(&y, u)?;
        let expanded = kx.value().as_block().add(kxy.value())?.add(kyx.value())?.add(&ky.value().as_block())?;
        let ksum = covariance(&x.paired_sum(&y)?, u)?;
        expansion = expansion.max(ksum.value().as_block().max_abs_diff(&expanded));

        mat_cov = mat_cov.max(max_abs(&(matricize(kx.value()) - covariance_of_vec(&x, u)?)));
    }
    c.push("cov-index-swap", swap, 0.0, t);
    c.push("cov-additivity", additivity, 1e-12, t);
    c.push("cov-symmetry", symmetry, 0.0, t);
    c.push("cov-moment", moment, 1e-12, t);
    c.push("cov-sum-expansion", expansion, 1e-12, t);
    c.push("mat-of-cov", mat_cov, 1e-12, t);

    // correlation
    let (mut diag, mut bounds) = (0.0f64, 0.0f64);
    for _ in 0..t {
        let r = correlation(&uniform_samples(&mut rng, shape, obs))?;
        let m = matricize(r.value());
        diag = diag.max(max_abs(&(DMatrix::from_diagonal(&m.diagonal()) - DMatrix::identity(n, n))));
        bounds = bounds.max(m.iter().fold(0.0f64, |acc, v| acc.max(v.abs() - 1.0)));
    }
    c.push("corr-unit-diagonal", diag, 0.0, t);
    c.push("corr-bounds", bounds, 1e-12, t);
    let mut constant = uniform_samples(&mut rng, shape, obs).observations().to_vec();
    for o in &mut constant {
        let mut d = o.as_slice().to_vec();
        d[0] = 0.5;
        *o = DenseTensor::new(shape.clone(), d)?;
    }
    let degenerate = matches!(
        correlation(&SampleSet::new(shape.clone(), constant)?),
        Err(Error::DegenerateVariance { .. })
    );
    c.push("corr-degenerate", if degenerate { 0.0 } else { 1.0 }, 0.0, 1);

    // densities
    let (mut dens, mut ell) = (0.0f64, 0.0f64);
    for _ in 0..t {
        let p = TensorNormalParams::new(uniform_dense(&mut rng, shape), spd(&mut rng, shape))?;
        let x = uniform_dense(&mut rng, shape);
        let lhs = normal_log_density(&p, &x)?;
        dens = dens.max((lhs - normal_log_density_vec_oracle(&p, &x)?).abs());
        let e = EllipticalParams::new(p.location().clone(), p.scale().clone(), Kernel::Normal)?;
        ell = ell.max((e.log_density(&x)? - lhs).abs());
    }
    c.push("normal-density-equivalence", dens, 1e-10, t);
    c.push("elliptical-normal-kernel", ell, 1e-12, t);

    // Kronecker form
    let factors: Vec<_> = shape.dims().iter().map(|&k| spd_matrix(&mut rng, k)).collect();
    let f = KroneckerFactors::with_shape(shape.clone(), factors)?;
    let loc = uniform_dense(&mut rng, shape);
    let structured = TensorNormalParams::new(loc.clone(), f.clone())?;
    let dense = TensorNormalParams::new(loc, ScaleSpec::Kronecker(f).to_dense())?;
    let probes: Vec<_> = (0..t).map(|_| uniform_dense(&mut rng, shape)).collect();
    let eq = kronecker_equivalence_check(&dense, &structured, &probes)?;
    c.push("kronecker-equivalence", eq.max_deviation, 1e-10, t);
    c.push("kronecker-ordering", ordering_deviation(shape)?, 1e-12, 1);

    // Monte-Carlo
    let m = uniform_dense(&mut rng, shape);
    let s = unit_scale_spd(&mut rng, shape);
    let p = TensorNormalParams::new(m.clone(), s.clone())?;
    let draws = normal_sample(&p, root.with_stream(1), cfg.n);
    let mean = mean_tensor(&draws)?;
    c.push("normal-mean", mean.max_abs_diff(&m), 0.02 * mc_scale, cfg.n);
    let k = covariance(&draws, Normalization::Unbiased)?;
    c.push("normal-covariance", k.value().max_abs_diff(&s), 0.05 * mc_scale, cfg.n);

    let std = TensorNormalParams::new(DenseTensor::zeros(shape.clone()), id.clone())?;
    let a = normal_sample(&std, root.with_stream(2), cfg.n);
    let b = normal_sample(&std, root.with_stream(3), cfg.n);
    let kab = cross_covariance(&a, &b, Normalization::Unbiased)?;
    c.push("cov-independence", max_abs(&kab.value().as_matrix()), 0.02 * mc_scale, cfg.n);

    let tp = EllipticalParams::new(m, s.clone(), Kernel::student(STUDENT_DOF)?)?;
    let tdraws = elliptical_sample(&tp, root.with_stream(4), cfg.n)?;
    let kt = covariance(&tdraws, Normalization::Unbiased)?;
    let target = s.scale(STUDENT_DOF / (STUDENT_DOF - 2.0));
    c.push("student-covariance", kt.value().max_abs_diff(&target), 0.1 * mc_scale, cfg.n);

    Ok(VerifyReport {
        seed: cfg.seed,
        n: cfg.n,
        shape: shape.clone(),
        checks: c.results,
    })
}

/// `(1/N) Σ vec(x) vec(x)ᵀ − vec(m) vec(m)ᵀ`, accumulated directly.
fn moment_oracle(s: &SampleSet) -> DMatrix<f64> {
    let n = s.shape().nstar();
    let count = s.len() as f64;
    let mut raw = DMatrix::zeros(n, n);
    let mut mean = DVector::zeros(n);
    for x in s {
        let v = DVector::from_vec(vectorize(x));
        raw += &v * v.transpose();
        mean += v;
    }
    raw /= count;
    mean /= count;
    raw - &mean * mean.transpose()
}

/// With `Σ_1 = diag(1, …, n_1)` and every other factor the identity, a unit
/// tensor at first-mode index `n_1 - 1` (others 0) has quadratic form `1/n_1`.
/// Applying the first factor to the wrong mode gives 1 instead.
fn ordering_deviation(shape: &Shape) -> Result<f64, CliError> {
    let dims = shape.dims();
    let factors = dims
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            if k == 0 {
                DMatrix::from_diagonal(&DVector::from_fn(d, |i, _| (i + 1) as f64))
            } else {
                DMatrix::identity(d, d)
            }
        })
        .collect();
    let f = KroneckerFactors::with_shape(shape.clone(), factors)?;
    let p = TensorNormalParams::new(DenseTensor::zeros(shape.clone()), f)?;
    let mut idx = vec![0; dims.len()];
    idx[0] = dims[0] - 1;
    let mut data = vec![0.0; shape.nstar()];
    data[shape.linear_index(&idx)] = 1.0;
    let q = p.quadratic_form(&DenseTensor::new(shape.clone(), data)?)?;
    Ok((q - 1.0 / dims[0] as f64).abs())
}
