//! Determinant, inverse and Cholesky factorization of order-2D tensors through
//! their matricization, plus Kronecker assembly of per-mode scale factors.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tensor::{matricize, unmatricize, Shape, SquareTensor};

/// Default absolute symmetry tolerance for unit-scale entries.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Inversion is refused below this reciprocal 1-norm condition number.
pub const RCOND_THRESHOLD: f64 = 1e-12;

const FACTOR_SYMMETRY_TOL: f64 = 1e-12;

/// Row-pivoted LU of a square matrix, stored in place column-major.
struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

impl Lu {
    fn new(m: &DMatrix<f64>) -> Lu {
        let n = m.nrows();
        let mut lu = m.as_slice().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut singular = false;
        for k in 0..n {
            let (p, pivot_abs) = (k..n)
                .map(|r| (r, lu[r + n * k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot_abs == 0.0 {
                singular = true;
                continue;
            }
            if p != k {
                for c in 0..n {
                    lu.swap(k + n * c, p + n * c);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[k + n * k];
            for r in k + 1..n {
                lu[r + n * k] /= pivot;
            }
            for c in k + 1..n {
                let ukc = lu[k + n * c];
                if ukc == 0.0 {
                    continue;
                }
                for r in k + 1..n {
                    lu[r + n * c] -= lu[r + n * k] * ukc;
                }
            }
        }
        Lu {
            n,
            lu,
            perm,
            sign,
            singular,
        }
    }

    fn det(&self) -> f64 {
        if self.singular {
            return 0.0;
        }
        (0..self.n).fold(self.sign, |acc, i| acc * self.lu[i + self.n * i])
    }

    /// Solves `A x = b`. Requires a nonsingular factorization.
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for c in 0..n {
            let xc = x[c];
            let col = &self.lu[n * c..n * (c + 1)];
            for (xr, l) in x[c + 1..].iter_mut().zip(&col[c + 1..]) {
                *xr -= l * xc;
            }
        }
        for c in (0..n).rev() {
            let col = &self.lu[n * c..n * (c + 1)];
            x[c] /= col[c];
            let xc = x[c];
            for (xr, u) in x[..c].iter_mut().zip(&col[..c]) {
                *xr -= u * xc;
            }
        }
        x
    }
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Determinant of a square matrix by partial-pivot LU.
pub fn det_matrix(m: &DMatrix<f64>) -> f64 {
    Lu::new(m).det()
}

/// Inverse of a square matrix, refusing ill-conditioned input.
pub fn inverse_matrix(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let lu = Lu::new(m);
    if lu.singular {
        return Err(Error::Singular { rcond: 0.0 });
    }
    let mut inv = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for c in 0..n {
        e[c] = 1.0;
        let col = lu.solve(&e);
        inv.column_mut(c).copy_from_slice(&col);
        e[c] = 0.0;
    }
    let rcond = 1.0 / (norm1(m) * norm1(&inv));
    if rcond.is_nan() || rcond < RCOND_THRESHOLD {
        return Err(Error::Singular {
            rcond: if rcond.is_finite() { rcond } else { 0.0 },
        });
    }
    Ok(inv)
}

/// `det(x) = det(mat(x))`.
pub fn det(x: &SquareTensor) -> f64 {
    det_matrix(&matricize(x))
}

/// Inverse tensor: `mat(inverse(x)) = mat(x)⁻¹`.
pub fn inverse(x: &SquareTensor) -> Result<SquareTensor> {
    let inv = inverse_matrix(&matricize(x))?;
    unmatricize(&inv, x.row_shape().clone())
}

fn max_asymmetry(m: &DMatrix<f64>) -> (f64, f64) {
    let n = m.nrows();
    let mut asym: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for c in 0..n {
        for r in 0..n {
            asym = asym.max((m[(r, c)] - m[(c, r)]).abs());
            scale = scale.max(m[(r, c)].abs());
        }
    }
    (asym, scale)
}

fn check_symmetric(m: &DMatrix<f64>, tol: f64) -> Result<()> {
    let (asym, scale) = max_asymmetry(m);
    let tolerance = tol * scale.max(1.0);
    if asym > tolerance {
        return Err(Error::NotSymmetric {
            max_asymmetry: asym,
            tolerance,
        });
    }
    Ok(())
}

/// Lower Cholesky factor of a symmetric matrix; reads the lower triangle only.
fn cholesky_lower(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d.is_nan() || d <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                pivot: j,
                value: d,
                hint: "",
            });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

fn forward_substitute(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = l.nrows();
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

fn lower_times(l: &DMatrix<f64>, z: &mut [f64]) {
    let n = l.nrows();
    for i in (0..n).rev() {
        let mut s = 0.0;
        for k in 0..=i {
            s += l[(i, k)] * z[k];
        }
        z[i] = s;
    }
}

/// Lower-triangular `L` with `L Lᵀ = mat(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    row_shape: Shape,
    lower: DMatrix<f64>,
}

impl CholeskyFactor {
    pub fn row_shape(&self) -> &Shape {
        &self.row_shape
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    /// `ln det(L Lᵀ) = 2 Σ ln L_ii`.
    pub fn log_det(&self) -> f64 {
        2.0 * self.lower.diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    /// Solves `L y = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        forward_substitute(&self.lower, b);
    }

    /// `vᵀ (L Lᵀ)⁻¹ v` through one triangular solve.
    pub fn mahalanobis(&self, v: &[f64]) -> f64 {
        let mut y = v.to_vec();
        forward_substitute(&self.lower, &mut y);
        y.iter().map(|t| t * t).sum()
    }

    /// Overwrites `z` with `L z`.
    pub fn mul_lower_in_place(&self, z: &mut [f64]) {
        lower_times(&self.lower, z);
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.lower * self.lower.transpose()
    }
}

/// Cholesky factorization of `mat(s)` with the default symmetry tolerance.
pub fn cholesky(s: &SquareTensor) -> Result<CholeskyFactor> {
    cholesky_with_tol(s, SYMMETRY_TOL)
}

pub fn cholesky_with_tol(s: &SquareTensor, tol: f64) -> Result<CholeskyFactor> {
    let m = matricize(s);
    check_symmetric(&m, tol)?;
    Ok(CholeskyFactor {
        row_shape: s.row_shape().clone(),
        lower: cholesky_lower(&m)?,
    })
}

/// Cholesky of a plain symmetric matrix, used for per-mode factors.
pub(crate) fn cholesky_matrix(m: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    check_symmetric(m, tol)?;
    cholesky_lower(m)
}

pub fn is_symmetric(x: &SquareTensor, tol: f64) -> bool {
    check_symmetric(&matricize(x), tol).is_ok()
}

pub fn is_positive_definite(x: &SquareTensor, tol: f64) -> bool {
    cholesky_with_tol(x, tol).is_ok()
}

/// Per-mode symmetric factors `Σ_1 … Σ_D`, `Σ_i` of size `n_i × n_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct KroneckerFactors {
    shape: Shape,
    factors: Vec<DMatrix<f64>>,
}

impl KroneckerFactors {
    /// Infers the shape from the factor sizes.
    pub fn new(factors: Vec<DMatrix<f64>>) -> Result<Self> {
        let dims: Vec<usize> = factors.iter().map(|f| f.nrows()).collect();
        Self::with_shape(Shape::new(dims)?, factors)
    }

    /// Checks factor count and sizes against `shape`.
    pub fn with_shape(shape: Shape, factors: Vec<DMatrix<f64>>) -> Result<Self> {
        let found: Vec<usize> = factors.iter().map(|f| f.nrows()).collect();
        if found.as_slice() != shape.dims() || factors.iter().any(|f| !f.is_square()) {
            return Err(Error::ShapeMismatch {
                expected: shape.dims().to_vec(),
                found,
            });
        }
        for f in &factors {
            if let Some(index) = f.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { index });
            }
            check_symmetric(f, FACTOR_SYMMETRY_TOL)?;
        }
        Ok(KroneckerFactors { shape, factors })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn factors(&self) -> &[DMatrix<f64>] {
        &self.factors
    }
}

/// Assembles the `n* × n*` matrix whose entry at `(multi(r), multi(c))` is
/// `Π_k Σ_k[i_k, j_k]`, so that `Σ_k` acts along mode `k` of the column-major
/// `vec`. In textbook Kronecker notation this is `Σ_D ⊗ … ⊗ Σ_1`.
pub fn kronecker_assemble(f: &KroneckerFactors) -> DMatrix<f64> {
    let n = f.shape.nstar();
    let index: Vec<Vec<usize>> = (0..n).map(|lin| f.shape.multi_index(lin)).collect();
    DMatrix::from_fn(n, n, |r, c| {
        f.factors
            .iter()
            .enumerate()
            .map(|(k, s)| s[(index[r][k], index[c][k])])
            .product()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{double_dot_quadratic, DenseTensor};
    use approx::assert_relative_eq;

    fn shape(d: &[usize]) -> Shape {
        Shape::new(d.to_vec()).unwrap()
    }

    fn diag_tensor(s: Shape, d: &[f64]) -> SquareTensor {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d.to_vec()));
        unmatricize(&m, s).unwrap()
    }

    #[test]
    fn det_examples() {
        let s = shape(&[2, 2]);
        assert_eq!(det(&SquareTensor::identity(s.clone())), 1.0);
        assert_eq!(det(&SquareTensor::zeros(s.clone())), 0.0);
        assert_eq!(det(&SquareTensor::identity(s.clone()).scale(3.0)), 81.0);
        assert_eq!(det(&diag_tensor(s, &[1.0, 2.0, 3.0, 4.0])), 24.0);
    }

    #[test]
    fn det_sign_and_oracle() {
        let m = DMatrix::from_row_slice(3, 3, &[0.0, 2.0, 1.0, 1.0, 0.0, 3.0, 4.0, 1.0, 0.0]);
        // cofactor expansion along the first row
        let expected = 0.0 * (0.0 * 0.0 - 3.0 * 1.0) - 2.0 * (1.0 * 0.0 - 3.0 * 4.0)
            + 1.0 * (1.0 * 1.0 - 0.0 * 4.0);
        assert_relative_eq!(det_matrix(&m), expected, epsilon = 1e-14);
        let swapped = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(det_matrix(&swapped), -1.0);
    }

    #[test]
    fn inverse_examples() {
        let s = shape(&[2, 2]);
        let id = SquareTensor::identity(s.clone());
        assert_eq!(inverse(&id).unwrap(), id);

        let two = SquareTensor::identity(shape(&[2])).scale(2.0);
        assert_eq!(inverse(&two).unwrap(), SquareTensor::identity(shape(&[2])).scale(0.5));

        let inv = inverse(&diag_tensor(s.clone(), &[1.0, 2.0, 3.0, 4.0])).unwrap();
        let expected = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            1.0,
            0.5,
            1.0 / 3.0,
            0.25,
        ]));
        assert!((matricize(&inv) - expected).abs().max() <= 1e-15);
    }

    #[test]
    fn inverse_refuses_singular_and_ill_conditioned() {
        let s = shape(&[2]);
        assert!(matches!(
            inverse(&SquareTensor::zeros(s.clone())),
            Err(Error::Singular { rcond }) if rcond == 0.0
        ));
        let nearly = SquareTensor::new(s, vec![1.0, 1.0, 1.0, 1.0 + 1e-14]).unwrap();
        match inverse(&nearly) {
            Err(Error::Singular { rcond }) => assert!(rcond < RCOND_THRESHOLD),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn cholesky_examples() {
        let id = SquareTensor::identity(shape(&[2, 2]));
        assert_eq!(cholesky(&id).unwrap().lower(), &DMatrix::identity(4, 4));

        let s = SquareTensor::new(shape(&[2]), vec![4.0, 2.0, 2.0, 3.0]).unwrap();
        let l = cholesky(&s).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 2f64.sqrt()]);
        assert!((l.lower() - expected).abs().max() <= 1e-15);
        assert_relative_eq!(l.log_det(), 8f64.ln(), epsilon = 1e-14);
        assert!((l.reconstruct() - matricize(&s)).abs().max() <= 1e-14);
    }

    #[test]
    fn cholesky_errors() {
        // eigenvalues 3 and -1
        let indefinite = SquareTensor::new(shape(&[2]), vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(matches!(
            cholesky(&indefinite),
            Err(Error::NotPositiveDefinite { pivot: 1, .. })
        ));
        let asym = SquareTensor::new(shape(&[2]), vec![2.0, 0.5, 0.0, 2.0]).unwrap();
        assert!(matches!(cholesky(&asym), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn cholesky_solves() {
        let s = SquareTensor::new(shape(&[2]), vec![4.0, 2.0, 2.0, 3.0]).unwrap();
        let l = cholesky(&s).unwrap();
        let v = [1.0, -2.0];
        let inv = inverse_matrix(&matricize(&s)).unwrap();
        let vv = nalgebra::DVector::from_column_slice(&v);
        assert_relative_eq!(l.mahalanobis(&v), (vv.transpose() * inv * &vv)[0], epsilon = 1e-14);
        let mut z = v.to_vec();
        l.mul_lower_in_place(&mut z);
        let expected = l.lower() * &vv;
        assert_relative_eq!(z[0], expected[0]);
        assert_relative_eq!(z[1], expected[1]);
    }

    #[test]
    fn symmetry_and_definiteness_predicates() {
        let id = SquareTensor::identity(shape(&[2, 2]));
        assert!(is_symmetric(&id, SYMMETRY_TOL));
        assert!(is_positive_definite(&id, SYMMETRY_TOL));

        let a = DenseTensor::new(shape(&[2, 2]), vec![0.3, -1.2, 0.7, 2.0]).unwrap();
        let rank_one = SquareTensor::try_from(crate::tensor::outer(&a, &a)).unwrap();
        let near = rank_one.add(&id.scale(1e-6)).unwrap();
        let eig = nalgebra::SymmetricEigen::new(matricize(&near)).eigenvalues;
        assert!(eig.min() > 0.0);
        assert!(is_symmetric(&near, SYMMETRY_TOL));
        assert!(is_positive_definite(&near, SYMMETRY_TOL));

        let asym = SquareTensor::from_fn(shape(&[2, 2]), |i, j| {
            (i[0] + 2 * i[1]) as f64 - 0.3 * (j[0] * j[1]) as f64
        })
        .unwrap();
        assert!(!is_symmetric(&asym, SYMMETRY_TOL));
    }

    #[test]
    fn kronecker_examples() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let f = KroneckerFactors::new(vec![i2.clone(), i2.clone()]).unwrap();
        assert_eq!(kronecker_assemble(&f), DMatrix::identity(4, 4));

        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0]));
        let b = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 4.0]));
        let f = KroneckerFactors::new(vec![a.clone(), b.clone()]).unwrap();
        let assembled = kronecker_assemble(&f);
        assert_eq!(assembled, b.kronecker(&a));
        // mode 1 fastest: (0,0)=1·3, (1,0)=2·3, (0,1)=1·4, (1,1)=2·4
        assert_eq!(assembled.diagonal().as_slice(), &[3.0, 6.0, 4.0, 8.0]);

        let single = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let f = KroneckerFactors::new(vec![single.clone()]).unwrap();
        assert_eq!(kronecker_assemble(&f), single);
    }

    #[test]
    fn kronecker_factor_ordering_scales_mode_one() {
        let s1 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0]));
        let f = KroneckerFactors::new(vec![s1, DMatrix::identity(2, 2)]).unwrap();
        let k = unmatricize(&kronecker_assemble(&f), f.shape().clone()).unwrap();
        let s = f.shape().clone();
        let unit = |idx: &[usize]| {
            DenseTensor::from_fn(s.clone(), |i| if i == idx { 1.0 } else { 0.0 }).unwrap()
        };
        let mode1_second = unit(&[1, 0]);
        let mode2_second = unit(&[0, 1]);
        assert_eq!(double_dot_quadratic(&mode1_second, &k, &mode1_second).unwrap(), 2.0);
        assert_eq!(double_dot_quadratic(&mode2_second, &k, &mode2_second).unwrap(), 1.0);
    }

    #[test]
    fn kronecker_rejects_bad_factors() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(
            KroneckerFactors::new(vec![bad]),
            Err(Error::NotSymmetric { .. })
        ));
        assert!(matches!(
            KroneckerFactors::with_shape(shape(&[2, 3]), vec![DMatrix::identity(2, 2)]),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(matches!(
            KroneckerFactors::with_shape(shape(&[2]), vec![DMatrix::identity(3, 3)]),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(KroneckerFactors::new(vec![]).is_err());
    }
}
