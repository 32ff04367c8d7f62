//! Distribution parameter files.
//!
//! `{"location": <tensor>, "scale": <square2d>}` for a dense scale, or
//! `{"location": <tensor>, "factors": [<n_k × n_k>, …]}` for per-mode
//! Kronecker factors, first mode first.

use nalgebra::DMatrix;
use serde::Deserialize;
use tensorstat::distributions::ScaleSpec;
use tensorstat::linalg::KroneckerFactors;
use tensorstat::DenseTensor;

use crate::io::{read_bytes, TensorFile, TensorJson};
use crate::CliError;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsJson {
    location: TensorJson,
    #[serde(default)]
    scale: Option<TensorJson>,
    #[serde(default)]
    factors: Option<Vec<TensorJson>>,
}

#[derive(Debug, Clone)]
pub struct ParamsFile {
    pub location: DenseTensor,
    pub scale: ScaleSpec,
}

impl ParamsFile {
    pub fn decode(bytes: &[u8]) -> Result<ParamsFile, CliError> {
        let j: ParamsJson = serde_json::from_slice(bytes)
            .map_err(|e| CliError::Input(format!("malformed parameter file: {e}")))?;
        let location = TensorFile::from_json(j.location)?.into_tensor();
        let scale = match (j.scale, j.factors) {
            (Some(s), None) => ScaleSpec::Dense(TensorFile::from_json(s)?.into_square()?),
            (None, Some(fs)) => {
                let factors = fs
                    .into_iter()
                    .map(factor_matrix)
                    .collect::<Result<Vec<_>, _>>()?;
                ScaleSpec::Kronecker(KroneckerFactors::with_shape(
                    location.shape().clone(),
                    factors,
                )?)
            }
            _ => {
                return Err(CliError::Input(
                    "parameter file needs exactly one of `scale` or `factors`".into(),
                ))
            }
        };
        Ok(ParamsFile { location, scale })
    }

    pub fn read(path: &str) -> Result<ParamsFile, CliError> {
        ParamsFile::decode(&read_bytes(path)?)
    }
}

fn factor_matrix(j: TensorJson) -> Result<DMatrix<f64>, CliError> {
    let s = TensorFile::from_json(j)?.into_square()?;
    if s.row_shape().order() != 1 {
        return Err(CliError::Input(format!(
            "Kronecker factor must be a matrix, found row shape {}",
            s.row_shape()
        )));
    }
    let n = s.side();
    Ok(DMatrix::from_column_slice(n, n, s.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_and_factored() {
        let dense = br#"{"location":{"shape":[2],"data":[0,0]},
            "scale":{"shape":[2,2],"rowShape":[2],"kind":"square2d","data":[1,0,0,1]}}"#;
        let p = ParamsFile::decode(dense).unwrap();
        assert!(matches!(p.scale, ScaleSpec::Dense(_)));

        let factored = br#"{"location":{"shape":[2,1],"data":[0,0]},
            "factors":[{"shape":[2,2],"data":[2,0,0,1]},{"shape":[1,1],"data":[3]}]}"#;
        let p = ParamsFile::decode(factored).unwrap();
        let m = p.scale.matricized();
        assert_eq!(m, DMatrix::from_diagonal(&nalgebra::dvector![6.0, 3.0]));
    }

    #[test]
    fn needs_exactly_one_scale_form() {
        let both = br#"{"location":{"shape":[1],"data":[0]},
            "scale":{"shape":[1,1],"data":[1]},"factors":[{"shape":[1,1],"data":[1]}]}"#;
        assert!(ParamsFile::decode(both).is_err());
        let neither = br#"{"location":{"shape":[1],"data":[0]}}"#;
        assert!(ParamsFile::decode(neither).is_err());
    }
}
