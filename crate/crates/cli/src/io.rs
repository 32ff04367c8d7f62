//! Tensor file formats.
//!
//! JSON: `{"shape":[…],"kind":"tensor"|"square2d","data":[…]}`, data
//! column-major, numbers in shortest round-trip form. Square tensors also
//! carry `"rowShape"`, and `shape` is `rowShape` repeated twice.
//!
//! Binary (little-endian): magic `TST1`, `u8` order, `u32` dims, then the
//! `f64` payload column-major. Sample files insert a `u64` count after the
//! magic and repeat the payload once per observation.
//!
//! The path `-` means stdin or stdout.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use tensorstat::stats::SampleSet;
use tensorstat::{DenseTensor, Shape, SquareTensor};

use crate::CliError;

pub const MAGIC: &[u8; 4] = b"TST1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    #[default]
    Tensor,
    Square2d,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorJson {
    pub shape: Vec<usize>,
    #[serde(rename = "rowShape", default, skip_serializing_if = "Option::is_none")]
    pub row_shape: Option<Vec<usize>>,
    #[serde(default)]
    pub kind: Kind,
    pub data: Vec<f64>,
}

/// Contents of a single-tensor file.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorFile {
    Tensor(DenseTensor),
    Square(SquareTensor),
}

/// On-disk encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Binary,
}

impl Format {
    /// Binary for `.tst` or `.bin` paths, JSON otherwise.
    pub fn for_path(path: &str) -> Format {
        match Path::new(path).extension().and_then(|e| e.to_str()) {
            Some("tst") | Some("bin") => Format::Binary,
            _ => Format::Json,
        }
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

impl TensorFile {
    pub fn shape_dims(&self) -> Vec<usize> {
        match self {
            TensorFile::Tensor(t) => t.shape().dims().to_vec(),
            TensorFile::Square(s) => {
                let mut d = s.row_shape().dims().to_vec();
                d.extend_from_slice(s.row_shape().dims());
                d
            }
        }
    }

    /// Views the content as an order-2D tensor. A plain tensor qualifies when
    /// its dimensions are two equal halves.
    pub fn into_square(self) -> Result<SquareTensor, CliError> {
        match self {
            TensorFile::Square(s) => Ok(s),
            TensorFile::Tensor(t) => {
                let dims = t.shape().dims();
                let d = dims.len() / 2;
                if dims.len() % 2 != 0 || dims[..d] != dims[d..] {
                    return Err(bad(format!(
                        "expected a square2d tensor, found shape {:?}",
                        dims
                    )));
                }
                let row = Shape::new(dims[..d].to_vec())?;
                Ok(SquareTensor::new(row, t.into_vec())?)
            }
        }
    }

    pub fn into_tensor(self) -> DenseTensor {
        match self {
            TensorFile::Tensor(t) => t,
            TensorFile::Square(s) => {
                let shape = s.row_shape().concat(s.row_shape());
                DenseTensor::new(shape, s.as_slice().to_vec()).expect("validated data")
            }
        }
    }

    fn data(&self) -> &[f64] {
        match self {
            TensorFile::Tensor(t) => t.as_slice(),
            TensorFile::Square(s) => s.as_slice(),
        }
    }

    pub fn to_json(&self) -> TensorJson {
        match self {
            TensorFile::Tensor(t) => TensorJson {
                shape: t.shape().dims().to_vec(),
                row_shape: None,
                kind: Kind::Tensor,
                data: t.as_slice().to_vec(),
            },
            TensorFile::Square(s) => TensorJson {
                shape: self.shape_dims(),
                row_shape: Some(s.row_shape().dims().to_vec()),
                kind: Kind::Square2d,
                data: s.as_slice().to_vec(),
            },
        }
    }

    pub fn from_json(j: TensorJson) -> Result<TensorFile, CliError> {
        match j.kind {
            Kind::Tensor => {
                if j.row_shape.is_some() {
                    return Err(bad("rowShape is only valid for kind square2d"));
                }
                Ok(TensorFile::Tensor(DenseTensor::new(Shape::new(j.shape)?, j.data)?))
            }
            Kind::Square2d => {
                let row = j
                    .row_shape
                    .ok_or_else(|| bad("square2d tensor requires a rowShape field"))?;
                let mut full = row.clone();
                full.extend_from_slice(&row);
                if full != j.shape {
                    return Err(bad(format!(
                        "shape {:?} is not rowShape {:?} repeated twice",
                        j.shape, row
                    )));
                }
                Ok(TensorFile::Square(SquareTensor::new(Shape::new(row)?, j.data)?))
            }
        }
    }

    pub fn encode(&self, format: Format) -> Vec<u8> {
        match format {
            Format::Json => {
                let mut out = serde_json::to_vec(&self.to_json()).expect("serializable");
                out.push(b'\n');
                out
            }
            Format::Binary => {
                let mut out = MAGIC.to_vec();
                write_header(&mut out, &self.shape_dims());
                write_payload(&mut out, self.data());
                out
            }
        }
    }

    /// Detects the format from the leading bytes.
    pub fn decode(bytes: &[u8]) -> Result<TensorFile, CliError> {
        if bytes.starts_with(MAGIC) {
            let mut cur = Cursor::new(&bytes[4..]);
            let shape = read_header(&mut cur)?;
            let data = cur.f64s(shape.nstar())?;
            cur.finish()?;
            Ok(TensorFile::Tensor(DenseTensor::new(shape, data)?))
        } else {
            let j: TensorJson =
                serde_json::from_slice(bytes).map_err(|e| bad(format!("malformed tensor file: {e}")))?;
            TensorFile::from_json(j)
        }
    }
}

fn write_header(out: &mut Vec<u8>, dims: &[usize]) {
    out.push(dims.len() as u8);
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
}

fn write_payload(out: &mut Vec<u8>, data: &[f64]) {
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Cursor { bytes }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CliError> {
        if self.bytes.len() < n {
            return Err(bad("truncated binary tensor file"));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, CliError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CliError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CliError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, CliError> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| bad("payload too large"))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn finish(&self) -> Result<(), CliError> {
        if self.bytes.is_empty() {
            Ok(())
        } else {
            Err(bad("trailing bytes after binary tensor payload"))
        }
    }
}

fn read_header(cur: &mut Cursor<'_>) -> Result<Shape, CliError> {
    let order = cur.u8()? as usize;
    let dims = (0..order)
        .map(|_| cur.u32().map(|d| d as usize))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Shape::new(dims)?)
}

/// Multi-tensor sample file contents.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFile {
    pub samples: SampleSet,
    pub seed: Option<u64>,
    pub stream: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stream: Option<u64>,
    shape: Vec<usize>,
    count: usize,
    samples: Vec<TensorJson>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SampleJsonAny {
    Object(SampleJson),
    Array(Vec<TensorJson>),
}

impl SampleFile {
    pub fn new(samples: SampleSet) -> Self {
        SampleFile {
            samples,
            seed: None,
            stream: None,
        }
    }

    pub fn encode(&self, format: Format) -> Vec<u8> {
        match format {
            Format::Json => {
                let j = SampleJson {
                    seed: self.seed,
                    stream: self.stream,
                    shape: self.samples.shape().dims().to_vec(),
                    count: self.samples.len(),
                    samples: self
                        .samples
                        .iter()
                        .map(|t| TensorFile::Tensor(t.clone()).to_json())
                        .collect(),
                };
                let mut out = serde_json::to_vec(&j).expect("serializable");
                out.push(b'\n');
                out
            }
            Format::Binary => {
                let mut out = MAGIC.to_vec();
                out.extend_from_slice(&(self.samples.len() as u64).to_le_bytes());
                write_header(&mut out, self.samples.shape().dims());
                for t in &self.samples {
                    write_payload(&mut out, t.as_slice());
                }
                out
            }
        }
    }

    /// Accepts the binary form, a JSON object with header fields, or a bare
    /// JSON array of tensor objects.
    pub fn decode(bytes: &[u8]) -> Result<SampleFile, CliError> {
        if bytes.starts_with(MAGIC) {
            let mut cur = Cursor::new(&bytes[4..]);
            let count = cur.u64()? as usize;
            let shape = read_header(&mut cur)?;
            let mut obs = Vec::with_capacity(count.min(1 << 20));
            for _ in 0..count {
                obs.push(DenseTensor::new(shape.clone(), cur.f64s(shape.nstar())?)?);
            }
            cur.finish()?;
            return Ok(SampleFile::new(SampleSet::new(shape, obs)?));
        }
        let parsed: SampleJsonAny =
            serde_json::from_slice(bytes).map_err(|e| bad(format!("malformed sample file: {e}")))?;
        let tensors = |items: Vec<TensorJson>| -> Result<Vec<DenseTensor>, CliError> {
            items
                .into_iter()
                .map(|j| TensorFile::from_json(j).map(TensorFile::into_tensor))
                .collect()
        };
        match parsed {
            SampleJsonAny::Array(items) => {
                let obs = tensors(items)?;
                Ok(SampleFile::new(SampleSet::from_observations(obs)?))
            }
            SampleJsonAny::Object(j) => {
                let obs = tensors(j.samples)?;
                if obs.len() != j.count {
                    return Err(bad(format!(
                        "sample count {} does not match header count {}",
                        obs.len(),
                        j.count
                    )));
                }
                Ok(SampleFile {
                    samples: SampleSet::new(Shape::new(j.shape)?, obs)?,
                    seed: j.seed,
                    stream: j.stream,
                })
            }
        }
    }
}

pub fn read_bytes(path: &str) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    if path == "-" {
        std::io::stdin()
            .read_to_end(&mut buf)
            .map_err(|e| bad(format!("reading stdin: {e}")))?;
    } else {
        buf = fs::read(path).map_err(|e| bad(format!("reading {path}: {e}")))?;
    }
    Ok(buf)
}

pub fn write_bytes(path: &str, bytes: &[u8]) -> Result<(), CliError> {
    if path == "-" {
        let mut out = std::io::stdout().lock();
        out.write_all(bytes)
            .and_then(|_| out.flush())
            .map_err(|e| bad(format!("writing stdout: {e}")))
    } else {
        fs::write(path, bytes).map_err(|e| bad(format!("writing {path}: {e}")))
    }
}

pub fn read_tensor_file(path: &str) -> Result<TensorFile, CliError> {
    TensorFile::decode(&read_bytes(path)?)
}

pub fn write_tensor_file(path: &str, t: &TensorFile) -> Result<(), CliError> {
    write_bytes(path, &t.encode(Format::for_path(path)))
}

/// Reads a sample file, or every file of a directory (sorted by name) as one
/// observation each.
pub fn read_samples(path: &str) -> Result<SampleFile, CliError> {
    let p = Path::new(path);
    if path != "-" && p.is_dir() {
        let mut entries: Vec<_> = fs::read_dir(p)
            .map_err(|e| bad(format!("reading {path}: {e}")))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        entries.sort();
        let obs = entries
            .iter()
            .map(|e| read_tensor_file(&e.to_string_lossy()).map(TensorFile::into_tensor))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(SampleFile::new(SampleSet::from_observations(obs)?));
    }
    SampleFile::decode(&read_bytes(path)?)
}

pub fn write_samples(path: &str, s: &SampleFile) -> Result<(), CliError> {
    write_bytes(path, &s.encode(Format::for_path(path)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(d: &[usize]) -> Shape {
        Shape::new(d.to_vec()).unwrap()
    }

    #[test]
    fn json_layout() {
        let t = DenseTensor::new(shape(&[2]), vec![0.1, -2.0]).unwrap();
        let bytes = TensorFile::Tensor(t).encode(Format::Json);
        assert_eq!(
            std::str::from_utf8(&bytes).unwrap(),
            "{\"shape\":[2],\"kind\":\"tensor\",\"data\":[0.1,-2.0]}\n"
        );
        let s = SquareTensor::identity(shape(&[1]));
        let bytes = TensorFile::Square(s).encode(Format::Json);
        assert_eq!(
            std::str::from_utf8(&bytes).unwrap(),
            "{\"shape\":[1,1],\"rowShape\":[1],\"kind\":\"square2d\",\"data\":[1.0]}\n"
        );
    }

    #[test]
    fn binary_layout() {
        let t = DenseTensor::new(shape(&[2, 1]), vec![1.0, 2.0]).unwrap();
        let bytes = TensorFile::Tensor(t.clone()).encode(Format::Binary);
        let mut expected = b"TST1".to_vec();
        expected.push(2);
        expected.extend_from_slice(&2u32.to_le_bytes());
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&1f64.to_le_bytes());
        expected.extend_from_slice(&2f64.to_le_bytes());
        assert_eq!(bytes, expected);
        assert_eq!(TensorFile::decode(&bytes).unwrap(), TensorFile::Tensor(t));
    }

    #[test]
    fn kind_defaults_to_tensor() {
        let f = TensorFile::decode(br#"{"shape":[2],"data":[1,2]}"#).unwrap();
        assert!(matches!(f, TensorFile::Tensor(_)));
    }

    #[test]
    fn malformed_inputs() {
        for bad in [
            &br#"{"shape":[2],"data":[1]}"#[..],
            br#"{"shape":[2],"kind":"square2d","data":[1,2,3,4]}"#,
            br#"{"shape":[2,3],"rowShape":[2],"kind":"square2d","data":[1,2,3,4]}"#,
            br#"{"shape":[0],"data":[]}"#,
            br#"{"shape":[2],"data":[1,2],"extra":1}"#,
            br#"not json"#,
            b"TST1\x01\x02\x00\x00\x00",
            b"TST1\x01\x01\x00\x00\x00\x00\x00\x00\x00\x00\x00\xf0\x3f\x00",
        ] {
            assert!(matches!(TensorFile::decode(bad), Err(CliError::Input(_))), "{bad:?}");
        }
    }

    #[test]
    fn square_coercion() {
        let t = DenseTensor::new(shape(&[2, 2]), vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let s = TensorFile::Tensor(t).into_square().unwrap();
        assert_eq!(s, SquareTensor::identity(shape(&[2])));
        let t = DenseTensor::zeros(shape(&[2, 3]));
        assert!(TensorFile::Tensor(t).into_square().is_err());
    }

    #[test]
    fn sample_files() {
        let s = shape(&[2]);
        let obs: Vec<_> = (0..3)
            .map(|k| DenseTensor::new(s.clone(), vec![k as f64, 0.5]).unwrap())
            .collect();
        let mut file = SampleFile::new(SampleSet::new(s.clone(), obs).unwrap());
        file.seed = Some(9);
        for format in [Format::Json, Format::Binary] {
            let back = SampleFile::decode(&file.encode(format)).unwrap();
            assert_eq!(back.samples, file.samples);
        }
        assert_eq!(SampleFile::decode(&file.encode(Format::Json)).unwrap().seed, Some(9));

        let empty = SampleFile::new(SampleSet::new(s, vec![]).unwrap());
        for format in [Format::Json, Format::Binary] {
            let back = SampleFile::decode(&empty.encode(format)).unwrap();
            assert!(back.samples.is_empty());
        }

        let array = br#"[{"shape":[2],"data":[1,2]},{"shape":[2],"data":[3,4]}]"#;
        assert_eq!(SampleFile::decode(array).unwrap().samples.len(), 2);
        let mixed = br#"[{"shape":[2],"data":[1,2]},{"shape":[3],"data":[3,4,5]}]"#;
        assert!(SampleFile::decode(mixed).is_err());
    }
}
