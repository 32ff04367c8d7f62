use std::fmt::Write as _;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::SymmetricEigen;
use tensorstat::distributions::{
    elliptical_sample, normal_sample, EllipticalParams, Kernel, RngSeed, TensorNormalParams,
};
use tensorstat::linalg;
use tensorstat::stats::{
    correlation, covariance, cross_correlation, cross_covariance, Normalization,
};
use tensorstat::tensor::matricize;
use tensorstat::{BlockTensor, DenseTensor, SquareTensor};

use crate::format::g17;
use crate::io::{self, SampleFile, TensorFile};
use crate::params::ParamsFile;
use crate::verify::{self, VerifyConfig, DEFAULT_N, DEFAULT_SEED};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "tensorstat", version, about = "Random-tensor statistics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the determinant of a square2d tensor.
    Det { input: String },
    /// Write the inverse of a square2d tensor.
    Invert {
        input: String,
        #[arg(default_value = "-")]
        output: String,
    },
    /// Write the n* × n* matricization of a square2d tensor.
    Matricize {
        input: String,
        #[arg(default_value = "-")]
        output: String,
    },
    /// Estimate a covariance or correlation tensor from samples.
    Estimate(EstimateArgs),
    /// Print the (log-)density of a point.
    Density(DensityArgs),
    /// Draw samples from a tensor normal or elliptical distribution.
    Sample(SampleArgs),
    /// Run the invariant and Monte-Carlo check suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimateKind {
    Cov,
    Corr,
    Crosscov,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Multi-tensor sample file, or a directory with one tensor file per sample.
    pub samples: String,
    #[arg(long, value_enum, default_value = "cov")]
    pub kind: EstimateKind,
    /// Second sample set for cross estimates. Defaults to the first.
    #[arg(long = "with")]
    pub with: Option<String>,
    #[arg(long, default_value = "unbiased", value_parser = Normalization::from_str)]
    pub normalization: Normalization,
    #[arg(short, long, default_value = "-")]
    pub output: String,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    pub params: String,
    pub point: String,
    /// `normal` or `student:ν`.
    #[arg(long, default_value = "normal", value_parser = Kernel::from_str)]
    pub family: Kernel,
    #[arg(long)]
    pub log: bool,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    pub params: String,
    #[arg(long)]
    pub count: usize,
    #[arg(long, env = "TENSORSTAT_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub stream: u64,
    #[arg(long, default_value = "normal", value_parser = Kernel::from_str)]
    pub family: Kernel,
    #[arg(short, long, default_value = "-")]
    pub output: String,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, env = "TENSORSTAT_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_N)]
    pub n: usize,
    #[arg(long, default_value = "2x2")]
    pub shape: String,
    #[arg(long, hide = true)]
    pub corrupt_det: bool,
}

/// Runs a command, returning the text for stdout.
pub fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Det { input } => {
            let x = io::read_tensor_file(&input)?.into_square()?;
            Ok(format!("{}\n", g17(linalg::det(&x))))
        }
        Command::Invert { input, output } => {
            let x = io::read_tensor_file(&input)?.into_square()?;
            let inv = linalg::inverse(&x)?;
            io::write_tensor_file(&output, &TensorFile::Square(inv))?;
            Ok(String::new())
        }
        Command::Matricize { input, output } => {
            let x = io::read_tensor_file(&input)?.into_square()?;
            let m = matricize(&x);
            let shape = tensorstat::Shape::new(vec![m.nrows(), m.ncols()])?;
            let t = DenseTensor::new(shape, m.as_slice().to_vec())?;
            io::write_tensor_file(&output, &TensorFile::Tensor(t))?;
            Ok(String::new())
        }
        Command::Estimate(args) => estimate(args),
        Command::Density(args) => density(args),
        Command::Sample(args) => sample(args),
        Command::Verify(args) => {
            let mut cfg = VerifyConfig::new(args.seed, args.n, verify::parse_shape(&args.shape)?);
            cfg.corrupt_det = args.corrupt_det;
            let report = verify::run(&cfg)?;
            let text = report.render();
            if report.passed() {
                Ok(text)
            } else {
                print!("{text}");
                Err(CliError::Verify(report.failures().join(", ")))
            }
        }
    }
}

fn block_file(b: BlockTensor) -> Result<TensorFile, CliError> {
    if b.row_shape() == b.col_shape() {
        return Ok(TensorFile::Square(SquareTensor::try_from(b)?));
    }
    let shape = b.row_shape().concat(b.col_shape());
    Ok(TensorFile::Tensor(DenseTensor::new(shape, b.as_slice().to_vec())?))
}

fn estimate(args: EstimateArgs) -> Result<String, CliError> {
    let x = io::read_samples(&args.samples)?.samples;
    let y = match &args.with {
        Some(path) => Some(io::read_samples(path)?.samples),
        None => None,
    };
    let norm = args.normalization;
    let file = match (args.kind, &y) {
        (EstimateKind::Cov, None) => TensorFile::Square(covariance(&x, norm)?.into_value()),
        (EstimateKind::Cov, Some(_)) => {
            return Err(CliError::Input("--with requires --kind crosscov or corr".into()))
        }
        (EstimateKind::Crosscov, y) => {
            block_file(cross_covariance(&x, y.as_ref().unwrap_or(&x), norm)?.into_value())?
        }
        (EstimateKind::Corr, None) => TensorFile::Square(correlation(&x)?.value().clone()),
        (EstimateKind::Corr, Some(y)) => block_file(cross_correlation(&x, y)?.value().clone())?,
    };
    io::write_tensor_file(&args.output, &file)?;

    let mut summary = String::new();
    let dims = file.shape_dims();
    let dims: Vec<String> = dims.iter().map(|d| d.to_string()).collect();
    writeln!(summary, "shape: {}", dims.join("x")).unwrap();
    writeln!(summary, "samples: {}", x.len()).unwrap();
    if let TensorFile::Square(s) = &file {
        let m = matricize(s);
        let residual = (&m - m.transpose()).abs().max();
        let sym = (&m + m.transpose()) * 0.5;
        let min_eig = SymmetricEigen::new(sym).eigenvalues.min();
        writeln!(summary, "symmetry residual: {}", g17(residual)).unwrap();
        writeln!(summary, "min eigenvalue: {}", g17(min_eig)).unwrap();
    }
    if args.output == "-" {
        eprint!("{summary}");
        Ok(String::new())
    } else {
        Ok(summary)
    }
}

fn density(args: DensityArgs) -> Result<String, CliError> {
    let p = ParamsFile::read(&args.params)?;
    let x = io::read_tensor_file(&args.point)?.into_tensor();
    let log_density = match args.family {
        Kernel::Normal => TensorNormalParams::new(p.location, p.scale)?.log_density(&x)?,
        kernel => EllipticalParams::new(p.location, p.scale, kernel)?.log_density(&x)?,
    };
    let value = if args.log { log_density } else { log_density.exp() };
    Ok(format!("{}\n", g17(value)))
}

fn sample(args: SampleArgs) -> Result<String, CliError> {
    let p = ParamsFile::read(&args.params)?;
    let seed = RngSeed::new(args.seed).with_stream(args.stream);
    let samples = match args.family {
        Kernel::Normal => normal_sample(&TensorNormalParams::new(p.location, p.scale)?, seed, args.count),
        kernel => elliptical_sample(&EllipticalParams::new(p.location, p.scale, kernel)?, seed, args.count)?,
    };
    let file = SampleFile {
        samples,
        seed: Some(args.seed),
        stream: Some(args.stream),
    };
    io::write_samples(&args.output, &file)?;
    Ok(String::new())
}
