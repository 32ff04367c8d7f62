//! Dense real tensors, vectorization and matricization.
//!
//! Every tensor is stored column-major over its multi-index: the first index
//! varies fastest. The same convention defines `vec`, the matricization of
//! order-2D tensors and the on-disk formats, so that
//! `matricize(x)[(r, c)] == x[(multi(r), multi(c))]` where `multi` decodes a
//! linear position column-major.
//!
//! Indices in this API are zero-based.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Ordered list of dimension lengths `n_1 … n_D` of an order-D tensor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape {
    dims: Vec<usize>,
    nstar: usize,
}

impl Shape {
    /// Builds a shape; rejects order 0 and zero-length dimensions.
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() {
            return Err(Error::InvalidShape {
                dims,
                reason: "order must be at least 1",
            });
        }
        if dims.contains(&0) {
            return Err(Error::InvalidShape {
                dims,
                reason: "every dimension must be positive",
            });
        }
        let nstar = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or(Error::InvalidShape {
                dims: dims.clone(),
                reason: "number of cells overflows",
            })?;
        Ok(Shape { dims, nstar })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Tensor order `D`.
    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// Number of cells, the product of all dimensions.
    pub fn nstar(&self) -> usize {
        self.nstar
    }

    /// Column-major linear position of a multi-index.
    ///
    /// # Panics
    /// If the index has the wrong length or is out of bounds.
    pub fn linear_index(&self, index: &[usize]) -> usize {
        assert_eq!(index.len(), self.dims.len(), "index order mismatch");
        let mut lin = 0;
        let mut stride = 1;
        for (&i, &n) in index.iter().zip(&self.dims) {
            assert!(i < n, "index {i} out of bounds for dimension {n}");
            lin += i * stride;
            stride *= n;
        }
        lin
    }

    /// Inverse of [`Shape::linear_index`].
    pub fn multi_index(&self, mut linear: usize) -> Vec<usize> {
        assert!(linear < self.nstar, "linear index out of bounds");
        self.dims
            .iter()
            .map(|&n| {
                let i = linear % n;
                linear /= n;
                i
            })
            .collect()
    }

    /// Shape `self × other`, the index blocks laid out one after the other.
    pub fn concat(&self, other: &Shape) -> Shape {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Shape {
            dims,
            nstar: self.nstar * other.nstar,
        }
    }

    /// Stride of mode `k` in the column-major layout.
    pub fn stride(&self, mode: usize) -> usize {
        self.dims[..mode].iter().product()
    }

    pub(crate) fn ensure_eq(&self, other: &Shape) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: self.dims.clone(),
                found: other.dims.clone(),
            })
        }
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "{}", parts.join("x"))
    }
}

fn check_data(expected: usize, data: &[f64]) -> Result<()> {
    if data.len() != expected {
        return Err(Error::DataLength {
            expected,
            found: data.len(),
        });
    }
    if let Some(index) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(())
}

fn scaled(data: &[f64], lambda: f64) -> Vec<f64> {
    assert!(lambda.is_finite(), "scale factor must be finite");
    let out: Vec<f64> = data.iter().map(|v| lambda * v).collect();
    assert!(out.iter().all(|v| v.is_finite()), "scaling overflowed");
    out
}

fn summed(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let out: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
    if let Some(index) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(out)
}

/// Immutable order-D real tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl DenseTensor {
    /// Wraps column-major data; rejects wrong lengths and non-finite entries.
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        check_data(shape.nstar(), &data)?;
        Ok(DenseTensor { shape, data })
    }

    /// Skips the finiteness check. Length is still asserted.
    #[doc(hidden)]
    pub fn new_unchecked(shape: Shape, data: Vec<f64>) -> Self {
        assert_eq!(shape.nstar(), data.len());
        DenseTensor { shape, data }
    }

    pub fn zeros(shape: Shape) -> Self {
        let data = vec![0.0; shape.nstar()];
        DenseTensor { shape, data }
    }

    /// Builds a tensor from a function of the multi-index.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let data = (0..shape.nstar())
            .map(|lin| f(&shape.multi_index(lin)))
            .collect();
        Self::new(shape, data)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Column-major entries; this is `vec(self)`.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.shape.linear_index(index)]
    }

    pub fn add(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.shape.ensure_eq(&other.shape)?;
        Ok(DenseTensor {
            shape: self.shape.clone(),
            data: summed(&self.data, &other.data)?,
        })
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.add(&other.scale(-1.0))
    }

    /// # Panics
    /// If `lambda` is not finite or the product overflows.
    pub fn scale(&self, lambda: f64) -> DenseTensor {
        DenseTensor {
            shape: self.shape.clone(),
            data: scaled(&self.data, lambda),
        }
    }

    pub fn max_abs_diff(&self, other: &DenseTensor) -> f64 {
        max_abs_diff(&self.data, &other.data)
    }
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Column-major entries of `t` (first index fastest).
pub fn vectorize(t: &DenseTensor) -> Vec<f64> {
    t.data.clone()
}

/// Order-(D+E) tensor with dimensional lengths `n × m`: rows indexed by the
/// first block, columns by the second.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTensor {
    row_shape: Shape,
    col_shape: Shape,
    data: Vec<f64>,
}

impl BlockTensor {
    pub fn new(row_shape: Shape, col_shape: Shape, data: Vec<f64>) -> Result<Self> {
        check_data(row_shape.nstar() * col_shape.nstar(), &data)?;
        Ok(BlockTensor {
            row_shape,
            col_shape,
            data,
        })
    }

    pub fn row_shape(&self) -> &Shape {
        &self.row_shape
    }

    pub fn col_shape(&self) -> &Shape {
        &self.col_shape
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: &[usize], col: &[usize]) -> f64 {
        let r = self.row_shape.linear_index(row);
        let c = self.col_shape.linear_index(col);
        self.data[r + self.row_shape.nstar() * c]
    }

    /// The `n* × m*` matrix with rows from the first index block.
    pub fn as_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.row_shape.nstar(), self.col_shape.nstar(), &self.data)
    }

    /// Swaps the two index blocks.
    pub fn transpose(&self) -> BlockTensor {
        let (nr, nc) = (self.row_shape.nstar(), self.col_shape.nstar());
        let mut data = vec![0.0; self.data.len()];
        for c in 0..nc {
            for r in 0..nr {
                data[c + nc * r] = self.data[r + nr * c];
            }
        }
        BlockTensor {
            row_shape: self.col_shape.clone(),
            col_shape: self.row_shape.clone(),
            data,
        }
    }

    /// The same entries viewed as a plain tensor of shape `n ++ m`.
    pub fn to_dense(&self) -> DenseTensor {
        DenseTensor {
            shape: self.row_shape.concat(&self.col_shape),
            data: self.data.clone(),
        }
    }

    pub fn add(&self, other: &BlockTensor) -> Result<BlockTensor> {
        self.row_shape.ensure_eq(&other.row_shape)?;
        self.col_shape.ensure_eq(&other.col_shape)?;
        Ok(BlockTensor {
            row_shape: self.row_shape.clone(),
            col_shape: self.col_shape.clone(),
            data: summed(&self.data, &other.data)?,
        })
    }

    pub fn scale(&self, lambda: f64) -> BlockTensor {
        BlockTensor {
            row_shape: self.row_shape.clone(),
            col_shape: self.col_shape.clone(),
            data: scaled(&self.data, lambda),
        }
    }

    pub fn max_abs_diff(&self, other: &BlockTensor) -> f64 {
        max_abs_diff(&self.data, &other.data)
    }
}

/// Order-2D tensor with dimensional lengths `n × n`.
///
/// The first D indices form the row block and the last D the column block.
/// Column-major storage over the 2D-tuple makes the data buffer coincide with
/// the column-major buffer of the `n* × n*` matricization.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareTensor {
    row_shape: Shape,
    data: Vec<f64>,
}

impl SquareTensor {
    pub fn new(row_shape: Shape, data: Vec<f64>) -> Result<Self> {
        let n = row_shape.nstar();
        check_data(n * n, &data)?;
        Ok(SquareTensor { row_shape, data })
    }

    pub fn zeros(row_shape: Shape) -> Self {
        let n = row_shape.nstar();
        SquareTensor {
            row_shape,
            data: vec![0.0; n * n],
        }
    }

    /// The identity tensor: 1 where both index blocks agree, else 0.
    pub fn identity(row_shape: Shape) -> Self {
        let n = row_shape.nstar();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i + n * i] = 1.0;
        }
        SquareTensor { row_shape, data }
    }

    /// Builds a tensor from a function of (row multi-index, column multi-index).
    pub fn from_fn(row_shape: Shape, mut f: impl FnMut(&[usize], &[usize]) -> f64) -> Result<Self> {
        let n = row_shape.nstar();
        let mut data = Vec::with_capacity(n * n);
        for c in 0..n {
            let col = row_shape.multi_index(c);
            for r in 0..n {
                data.push(f(&row_shape.multi_index(r), &col));
            }
        }
        Self::new(row_shape, data)
    }

    pub fn row_shape(&self) -> &Shape {
        &self.row_shape
    }

    /// `n*`, the side length of the matricization.
    pub fn side(&self) -> usize {
        self.row_shape.nstar()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: &[usize], col: &[usize]) -> f64 {
        let r = self.row_shape.linear_index(row);
        let c = self.row_shape.linear_index(col);
        self.data[r + self.side() * c]
    }

    /// Swaps the index blocks: `result(i, j) = self(j, i)`.
    pub fn transpose2d(&self) -> SquareTensor {
        let n = self.side();
        let mut data = vec![0.0; n * n];
        for c in 0..n {
            for r in 0..n {
                data[c + n * r] = self.data[r + n * c];
            }
        }
        SquareTensor {
            row_shape: self.row_shape.clone(),
            data,
        }
    }

    pub fn add(&self, other: &SquareTensor) -> Result<SquareTensor> {
        self.row_shape.ensure_eq(&other.row_shape)?;
        Ok(SquareTensor {
            row_shape: self.row_shape.clone(),
            data: summed(&self.data, &other.data)?,
        })
    }

    /// # Panics
    /// If `lambda` is not finite or the product overflows.
    pub fn scale(&self, lambda: f64) -> SquareTensor {
        SquareTensor {
            row_shape: self.row_shape.clone(),
            data: scaled(&self.data, lambda),
        }
    }

    pub fn max_abs_diff(&self, other: &SquareTensor) -> f64 {
        max_abs_diff(&self.data, &other.data)
    }

    /// `(self + selfᵀ) / 2`, an exact fixed point of [`SquareTensor::transpose2d`].
    pub fn symmetrized(&self) -> SquareTensor {
        let n = self.side();
        let mut data = self.data.clone();
        for c in 0..n {
            for r in 0..c {
                let v = 0.5 * (self.data[r + n * c] + self.data[c + n * r]);
                data[r + n * c] = v;
                data[c + n * r] = v;
            }
        }
        SquareTensor {
            row_shape: self.row_shape.clone(),
            data,
        }
    }

    pub fn as_block(&self) -> BlockTensor {
        BlockTensor {
            row_shape: self.row_shape.clone(),
            col_shape: self.row_shape.clone(),
            data: self.data.clone(),
        }
    }
}

impl TryFrom<BlockTensor> for SquareTensor {
    type Error = Error;

    fn try_from(b: BlockTensor) -> Result<Self> {
        b.row_shape.ensure_eq(&b.col_shape)?;
        Ok(SquareTensor {
            row_shape: b.row_shape,
            data: b.data,
        })
    }
}

/// The `n* × n*` matrix whose entry `(r, c)` is `x(multi(r), multi(c))`.
pub fn matricize(x: &SquareTensor) -> DMatrix<f64> {
    let n = x.side();
    DMatrix::from_fn(n, n, |r, c| x.data[r + n * c])
}

/// Inverse of [`matricize`].
pub fn unmatricize(m: &DMatrix<f64>, row_shape: Shape) -> Result<SquareTensor> {
    let n = row_shape.nstar();
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::ShapeMismatch {
            expected: vec![n, n],
            found: vec![m.nrows(), m.ncols()],
        });
    }
    SquareTensor::new(row_shape, m.as_slice().to_vec())
}

/// Outer product: entry `(i, j)` is `a(i) · b(j)`.
pub fn outer(a: &DenseTensor, b: &DenseTensor) -> BlockTensor {
    let mut data = Vec::with_capacity(a.data.len() * b.data.len());
    for &bj in &b.data {
        data.extend(a.data.iter().map(|&ai| ai * bj));
    }
    BlockTensor {
        row_shape: a.shape.clone(),
        col_shape: b.shape.clone(),
        data,
    }
}

/// Contraction over the shared index block:
/// `result(i, k) = Σ_j x(i, j) · y(j, k)`.
pub fn contract_product(x: &SquareTensor, y: &SquareTensor) -> Result<SquareTensor> {
    x.row_shape.ensure_eq(&y.row_shape)?;
    let n = x.side();
    let mut data = vec![0.0; n * n];
    for k in 0..n {
        let out = &mut data[n * k..n * (k + 1)];
        for j in 0..n {
            let yjk = y.data[j + n * k];
            if yjk == 0.0 {
                continue;
            }
            let xcol = &x.data[n * j..n * (j + 1)];
            for (o, &xij) in out.iter_mut().zip(xcol) {
                *o += xij * yjk;
            }
        }
    }
    SquareTensor::new(x.row_shape.clone(), data)
}

/// Double-dot quadratic form `a : s : b = Σ_{i,j} a(i) s(i, j) b(j)`.
pub fn double_dot_quadratic(a: &DenseTensor, s: &SquareTensor, b: &DenseTensor) -> Result<f64> {
    s.row_shape.ensure_eq(&a.shape)?;
    s.row_shape.ensure_eq(&b.shape)?;
    let n = s.side();
    let mut total = 0.0;
    for (j, &bj) in b.data.iter().enumerate() {
        let col = &s.data[n * j..n * (j + 1)];
        let inner: f64 = a.data.iter().zip(col).map(|(ai, sij)| ai * sij).sum();
        total += inner * bj;
    }
    Ok(total)
}
