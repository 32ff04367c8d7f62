use proptest::prelude::*;

use tensorstat::stats::SampleSet;
use tensorstat::{DenseTensor, Shape, SquareTensor};
use tensorstat_cli::io::{Format, SampleFile, TensorFile};

fn finite() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO
}

fn dims() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..4, 1..4)
}

fn tensor_file() -> impl Strategy<Value = TensorFile> {
    prop_oneof![
        dims().prop_flat_map(|d| {
            let n: usize = d.iter().product();
            prop::collection::vec(finite(), n).prop_map(move |data| {
                TensorFile::Tensor(DenseTensor::new(Shape::new(d.clone()).unwrap(), data).unwrap())
            })
        }),
        dims().prop_flat_map(|d| {
            let n: usize = d.iter().product();
            prop::collection::vec(finite(), n * n).prop_map(move |data| {
                TensorFile::Square(SquareTensor::new(Shape::new(d.clone()).unwrap(), data).unwrap())
            })
        }),
    ]
}

fn bits(t: &TensorFile) -> Vec<u64> {
    t.clone().into_tensor().as_slice().iter().map(|v| v.to_bits()).collect()
}

proptest! {
    #[test]
    fn tensor_files_round_trip_bit_exact(t in tensor_file()) {
        for format in [Format::Json, Format::Binary] {
            let back = TensorFile::decode(&t.encode(format)).unwrap();
            prop_assert_eq!(back.shape_dims(), t.shape_dims());
            prop_assert_eq!(bits(&back), bits(&t));
        }
        let back = TensorFile::decode(&t.encode(Format::Json)).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn sample_files_round_trip(
        (d, obs) in dims().prop_flat_map(|d| {
            let n: usize = d.iter().product();
            (Just(d), prop::collection::vec(prop::collection::vec(finite(), n), 0..5))
        })
    ) {
        let shape = Shape::new(d).unwrap();
        let obs = obs.into_iter().map(|v| DenseTensor::new(shape.clone(), v).unwrap()).collect();
        let file = SampleFile::new(SampleSet::new(shape, obs).unwrap());
        for format in [Format::Json, Format::Binary] {
            let back = SampleFile::decode(&file.encode(format)).unwrap();
            prop_assert_eq!(back.samples.shape(), file.samples.shape());
            let flat = |s: &SampleSet| -> Vec<u64> {
                s.iter().flat_map(|t| t.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>()).collect()
            };
            prop_assert_eq!(flat(&back.samples), flat(&file.samples));
        }
    }
}
