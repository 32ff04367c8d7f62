//! Sample estimators for mean, covariance and correlation tensors.
//!
//! All accumulation runs over observations in their stored order, so results
//! are bit-stable for a given [`SampleSet`].

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tensor::{BlockTensor, DenseTensor, Shape, SquareTensor};

/// Observations of one random tensor, all sharing a shape.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    shape: Shape,
    observations: Vec<DenseTensor>,
}

impl SampleSet {
    /// An empty set is allowed; estimators reject it.
    pub fn new(shape: Shape, observations: Vec<DenseTensor>) -> Result<Self> {
        for obs in &observations {
            shape.ensure_eq(obs.shape())?;
        }
        Ok(SampleSet {
            shape,
            observations,
        })
    }

    /// Infers the shape from the first observation.
    pub fn from_observations(observations: Vec<DenseTensor>) -> Result<Self> {
        let shape = observations
            .first()
            .ok_or_else(|| Error::Argument("cannot infer shape of an empty sample set".into()))?
            .shape()
            .clone();
        Self::new(shape, observations)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[DenseTensor] {
        &self.observations
    }

    pub fn iter(&self) -> std::slice::Iter<'_, DenseTensor> {
        self.observations.iter()
    }

    /// Entrywise sum of two paired sample sets.
    pub fn paired_sum(&self, other: &SampleSet) -> Result<SampleSet> {
        ensure_paired(self, other)?;
        let observations = self
            .iter()
            .zip(other.iter())
            .map(|(x, y)| x.add(y))
            .collect::<Result<Vec<_>>>()?;
        SampleSet::new(self.shape.clone(), observations)
    }

    /// Applies `f` to every observation.
    pub fn map(&self, f: impl FnMut(&DenseTensor) -> DenseTensor) -> Result<SampleSet> {
        let observations: Vec<DenseTensor> = self.iter().map(f).collect();
        match observations.first() {
            Some(first) => Self::new(first.shape().clone(), observations),
            None => Ok(SampleSet {
                shape: self.shape.clone(),
                observations,
            }),
        }
    }
}

impl<'a> IntoIterator for &'a SampleSet {
    type Item = &'a DenseTensor;
    type IntoIter = std::slice::Iter<'a, DenseTensor>;

    fn into_iter(self) -> Self::IntoIter {
        self.observations.iter()
    }
}

/// Divisor used by second-moment estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// `1 / (N - 1)`.
    #[default]
    Unbiased,
    /// `1 / N`, the maximum-likelihood estimator.
    Mle,
}

impl Normalization {
    fn divisor(self, n: usize) -> Result<f64> {
        match self {
            Normalization::Unbiased if n < 2 => Err(Error::Argument(format!(
                "unbiased estimation needs at least 2 observations, got {n}"
            ))),
            Normalization::Mle if n < 1 => {
                Err(Error::Argument("estimation needs at least 1 observation".into()))
            }
            Normalization::Unbiased => Ok((n - 1) as f64),
            Normalization::Mle => Ok(n as f64),
        }
    }
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unbiased" => Ok(Normalization::Unbiased),
            "mle" => Ok(Normalization::Mle),
            other => Err(Error::Argument(format!("unknown normalization `{other}`"))),
        }
    }
}

/// Covariance tensor `K_XX`, symmetric under index-block swap.
#[derive(Debug, Clone, PartialEq)]
pub struct CovTensor {
    value: SquareTensor,
    normalization: Normalization,
}

impl CovTensor {
    pub fn value(&self) -> &SquareTensor {
        &self.value
    }

    pub fn into_value(self) -> SquareTensor {
        self.value
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }
}

/// Cross-covariance tensor `K_XY` with lengths `n × m`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCovTensor {
    value: BlockTensor,
    normalization: Normalization,
}

impl CrossCovTensor {
    pub fn value(&self) -> &BlockTensor {
        &self.value
    }

    pub fn into_value(self) -> BlockTensor {
        self.value
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }
}

/// Correlation tensor `R_XX` and the per-cell standard deviations it was
/// normalized by.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrTensor {
    value: SquareTensor,
    std_devs: DenseTensor,
}

impl CorrTensor {
    pub fn value(&self) -> &SquareTensor {
        &self.value
    }

    pub fn std_devs(&self) -> &DenseTensor {
        &self.std_devs
    }
}

/// Cross-correlation tensor `R_XY`; no diagonal constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCorrTensor {
    value: BlockTensor,
    std_devs_x: DenseTensor,
    std_devs_y: DenseTensor,
}

impl CrossCorrTensor {
    pub fn value(&self) -> &BlockTensor {
        &self.value
    }

    pub fn std_devs_x(&self) -> &DenseTensor {
        &self.std_devs_x
    }

    pub fn std_devs_y(&self) -> &DenseTensor {
        &self.std_devs_y
    }
}

/// What to do with a cell whose sample variance is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DegeneratePolicy {
    #[default]
    Error,
    /// Correlations involving the cell become 0, its self-correlation 1.
    Substitute,
}

fn ensure_paired(sx: &SampleSet, sy: &SampleSet) -> Result<()> {
    if sx.len() != sy.len() {
        return Err(Error::Argument(format!(
            "paired sample sets differ in size ({} vs {})",
            sx.len(),
            sy.len()
        )));
    }
    Ok(())
}

/// Entrywise arithmetic mean.
pub fn mean_tensor(s: &SampleSet) -> Result<DenseTensor> {
    if s.is_empty() {
        return Err(Error::Argument("mean of an empty sample set".into()));
    }
    let mut acc = vec![0.0; s.shape.nstar()];
    for obs in s {
        for (a, v) in acc.iter_mut().zip(obs.as_slice()) {
            *a += v;
        }
    }
    let n = s.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    DenseTensor::new(s.shape.clone(), acc)
}

fn deviations(s: &SampleSet) -> Result<Vec<Vec<f64>>> {
    let mean = mean_tensor(s)?;
    Ok(s.iter()
        .map(|obs| {
            obs.as_slice()
                .iter()
                .zip(mean.as_slice())
                .map(|(x, m)| x - m)
                .collect()
        })
        .collect())
}

fn cross_moment(sx: &SampleSet, sy: &SampleSet, normalization: Normalization) -> Result<BlockTensor> {
    ensure_paired(sx, sy)?;
    let divisor = normalization.divisor(sx.len())?;
    let dx = deviations(sx)?;
    let dy = deviations(sy)?;
    let (nx, ny) = (sx.shape.nstar(), sy.shape.nstar());
    let mut acc = vec![0.0; nx * ny];
    for (u, v) in dx.iter().zip(&dy) {
        for (c, &vc) in v.iter().enumerate() {
            let col = &mut acc[nx * c..nx * (c + 1)];
            for (a, &ur) in col.iter_mut().zip(u) {
                *a += ur * vc;
            }
        }
    }
    acc.iter_mut().for_each(|a| *a /= divisor);
    BlockTensor::new(sx.shape.clone(), sy.shape.clone(), acc)
}

/// `1/(N-1)` or `1/N` times `Σ_k (x_k - x̄) ⊗ (x_k - x̄)`, exactly symmetrized.
pub fn covariance(s: &SampleSet, normalization: Normalization) -> Result<CovTensor> {
    let raw = SquareTensor::try_from(cross_moment(s, s, normalization)?)?;
    Ok(CovTensor {
        value: raw.symmetrized(),
        normalization,
    })
}

/// `1/(N-1)` or `1/N` times `Σ_k (x_k - x̄) ⊗ (y_k - ȳ)`, observations paired
/// by position.
pub fn cross_covariance(
    sx: &SampleSet,
    sy: &SampleSet,
    normalization: Normalization,
) -> Result<CrossCovTensor> {
    Ok(CrossCovTensor {
        value: cross_moment(sx, sy, normalization)?,
        normalization,
    })
}

/// Covariance matrix of `vec(x)` computed in vector space.
pub fn covariance_of_vec(s: &SampleSet, normalization: Normalization) -> Result<DMatrix<f64>> {
    let divisor = normalization.divisor(s.len())?;
    let n = s.shape.nstar();
    let rows = DMatrix::from_fn(s.len(), n, |k, j| s.observations[k].as_slice()[j]);
    let means = rows.row_mean();
    let centered = DMatrix::from_fn(s.len(), n, |k, j| rows[(k, j)] - means[j]);
    Ok(centered.transpose() * &centered / divisor)
}

/// Per-cell variances, with degenerate cells reported as 0.
fn variances(
    s: &SampleSet,
    cov_diag: impl Iterator<Item = f64>,
    policy: DegeneratePolicy,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(s.shape.nstar());
    for (cell, var) in cov_diag.enumerate() {
        let first = s.observations[0].as_slice()[cell];
        let constant = s.iter().all(|o| o.as_slice()[cell] == first);
        if constant || var.is_nan() || var <= 0.0 {
            if policy == DegeneratePolicy::Error {
                return Err(Error::DegenerateVariance {
                    index: s.shape.multi_index(cell),
                });
            }
            out.push(0.0);
        } else {
            out.push(var);
        }
    }
    Ok(out)
}

fn normalize(cov: f64, var_i: f64, var_j: f64) -> f64 {
    if var_i == 0.0 || var_j == 0.0 {
        0.0
    } else {
        (cov / (var_i * var_j).sqrt()).clamp(-1.0, 1.0)
    }
}

fn sqrt_all(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(f64::sqrt).collect()
}

/// Correlation tensor; errors on any zero-variance cell.
pub fn correlation(s: &SampleSet) -> Result<CorrTensor> {
    correlation_with(s, DegeneratePolicy::Error)
}

pub fn correlation_with(s: &SampleSet, policy: DegeneratePolicy) -> Result<CorrTensor> {
    let cov = covariance(s, Normalization::Unbiased)?.into_value();
    let n = cov.side();
    let diag = (0..n).map(|i| cov.as_slice()[i + n * i]);
    let var = variances(s, diag, policy)?;
    let mut data = vec![0.0; n * n];
    for c in 0..n {
        for r in 0..n {
            data[r + n * c] = if r == c {
                1.0
            } else {
                normalize(cov.as_slice()[r + n * c], var[r], var[c])
            };
        }
    }
    Ok(CorrTensor {
        value: SquareTensor::new(s.shape.clone(), data)?,
        std_devs: DenseTensor::new(s.shape.clone(), sqrt_all(var))?,
    })
}

pub fn cross_correlation(sx: &SampleSet, sy: &SampleSet) -> Result<CrossCorrTensor> {
    cross_correlation_with(sx, sy, DegeneratePolicy::Error)
}

pub fn cross_correlation_with(
    sx: &SampleSet,
    sy: &SampleSet,
    policy: DegeneratePolicy,
) -> Result<CrossCorrTensor> {
    let cross = cross_moment(sx, sy, Normalization::Unbiased)?;
    let var = |s: &SampleSet| -> Result<Vec<f64>> {
        let cov = covariance(s, Normalization::Unbiased)?.into_value();
        let n = cov.side();
        variances(s, (0..n).map(|i| cov.as_slice()[i + n * i]), policy)
    };
    let (vx, vy) = (var(sx)?, var(sy)?);
    let nx = vx.len();
    let data: Vec<f64> = cross
        .as_slice()
        .iter()
        .enumerate()
        .map(|(lin, &v)| normalize(v, vx[lin % nx], vy[lin / nx]))
        .collect();
    Ok(CrossCorrTensor {
        value: BlockTensor::new(sx.shape.clone(), sy.shape.clone(), data)?,
        std_devs_x: DenseTensor::new(sx.shape.clone(), sqrt_all(vx))?,
        std_devs_y: DenseTensor::new(sy.shape.clone(), sqrt_all(vy))?,
    })
}
