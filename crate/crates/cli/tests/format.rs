use std::collections::BTreeMap;
use std::fs;

use ndarray::{ArrayD, IxDyn};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sklar_cli::format::{self, Document};
use sklar_core::{CheckerboardCopula, ExtReal, Grid, Marginal, TensorMeasure};

fn round_trip(doc: &Document) -> Document {
    let text = doc.to_json();
    let back = Document::parse(&text).unwrap();
    assert_eq!(back.to_json(), text);
    back
}

#[test]
fn corpus_round_trips() {
    let dir = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    let mut parsed = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let Ok(doc) = Document::parse(&fs::read_to_string(&path).unwrap()) else { continue };
        assert_eq!(round_trip(&doc), doc, "{}", path.display());
        parsed += 1;
    }
    assert!(parsed >= 15);
}

fn ext(bits: u64, tag: u8) -> ExtReal {
    match tag % 8 {
        0 => ExtReal::NEG_INF,
        1 => ExtReal::POS_INF,
        _ => {
            let v = f64::from_bits(bits);
            ExtReal::new(if v.is_finite() { v } else { 1.0 }).unwrap()
        }
    }
}

proptest! {
    #[test]
    fn marginal_values_round_trip(seed in any::<u64>(), k in 1usize..8, continuous in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = if continuous {
            let mut x = rng.random_range(-1e6..1e6);
            let mut knots = vec![(x, 0.0)];
            for i in 1..=k {
                x += rng.random::<f64>() + 1e-3;
                knots.push((x, if i == k { 1.0 } else { i as f64 / k as f64 + rng.random::<f64>() * 1e-3 / k as f64 }));
            }
            Marginal::continuous(knots).unwrap()
        } else {
            let mut xs: Vec<ExtReal> = (0..k).map(|_| ext(rng.random(), rng.random())).collect();
            xs.sort();
            xs.dedup();
            let w: Vec<f64> = xs.iter().map(|_| rng.random::<f64>() + 1e-3).collect();
            let total: f64 = w.iter().sum();
            Marginal::atomic(xs.into_iter().zip(w.into_iter().map(|v| v / total)).collect()).unwrap()
        };
        let Document::Marginal(d) = round_trip(&format::marginal_doc(&m)) else { panic!() };
        prop_assert_eq!(format::marginal_from(&d.body()).unwrap(), m.clone());
        let set: BTreeMap<u32, Marginal> = [(3, m.clone()), (9, m)].into_iter().collect();
        let Document::MarginalSet(d) = round_trip(&format::marginal_set_doc(&set)) else { panic!() };
        for (l, b) in &d.marginals {
            prop_assert_eq!(&format::marginal_from(b).unwrap(), &set[l]);
        }
    }

    #[test]
    fn tensor_values_round_trip(seed in any::<u64>(), sizes in prop::collection::vec(1usize..4, 1..4)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let axes: Vec<Vec<ExtReal>> = sizes
            .iter()
            .map(|&s| {
                let mut a: Vec<ExtReal> = (0..s).map(|_| ext(rng.random(), rng.random())).collect();
                a.sort();
                a.dedup();
                a
            })
            .collect();
        let shape: Vec<usize> = axes.iter().map(Vec::len).collect();
        let raw = ArrayD::from_shape_simple_fn(IxDyn(&shape), || rng.random::<f64>());
        let total = raw.sum();
        let labels: Vec<u32> = (0..shape.len() as u32).map(|l| 2 * l + 1).collect();
        let t = TensorMeasure::new(labels, Grid::new(axes).unwrap(), raw / total).unwrap();
        let Document::Tensor(d) = round_trip(&format::tensor_doc(&t)) else { panic!() };
        prop_assert_eq!(format::tensor_from(&d.body()).unwrap(), t);
    }

    #[test]
    fn copula_values_round_trip(seed in any::<u64>(), d in 1usize..4, n in 1usize..6) {
        let labels: Vec<u32> = (0..d as u32).collect();
        let c = CheckerboardCopula::random(&labels, n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let Document::Copula(doc) = round_trip(&format::copula_doc(&c)) else { panic!() };
        prop_assert_eq!(format::valid_copula_from(&doc.body()).unwrap(), c);
    }
}
