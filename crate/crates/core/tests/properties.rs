//! Randomized invariants across the public API.

use std::collections::HashSet;

use proptest::prelude::*;
use qcomm::agents::{load_checkpoint, save_checkpoint};
use qcomm::channel::{
    capacity, normalize, ste_quantize, Architecture, ChannelSpec, Mode, QuantizeRegime, Quantizer, QuantizerScheme,
};
use qcomm::experiment::report::{read_csv, write_csv};
use qcomm::experiment::{Game, LongRow, Stat};
use qcomm::world::build_candidates;
use qcomm::{Graph, ParamSet, Rng, Tensor};

fn alphabet() -> impl Strategy<Value = usize> {
    prop_oneof![Just(2usize), Just(3), Just(10), Just(100), 2usize..300]
}

proptest! {
    #[test]
    fn quantizer_round_trip(v in alphabet(), word in prop::collection::vec(0.0f64..=1.0, 1..64)) {
        let q = Quantizer::new(QuantizerScheme::Levels, v).unwrap();
        let (deq, sym) = q.quantize(&word).unwrap();
        for ((&x, &d), &s) in word.iter().zip(&deq).zip(&sym) {
            prop_assert!((x - d).abs() <= q.scale / 2.0 + 1e-15);
            prop_assert!((s as usize) < v);
            prop_assert_eq!(d, q.dequantize(s));
        }
    }

    #[test]
    fn dequantize_is_injective(v in alphabet()) {
        let q = Quantizer::new(QuantizerScheme::Levels, v).unwrap();
        let values: Vec<u64> = (0..v as u32).map(|s| q.dequantize(s).to_bits()).collect();
        let distinct: HashSet<_> = values.iter().collect();
        prop_assert_eq!(distinct.len(), v);
    }

    #[test]
    fn normalize_lands_in_unit_interval(
        raw in prop::collection::vec(-1e6f64..1e6, 1..40),
        width in 1usize..8,
    ) {
        let len = raw.len() / width * width;
        prop_assume!(len > 0);
        let out = normalize(&raw[..len], width);
        for word in out.chunks(width) {
            prop_assert!(word.iter().all(|&x| (0.0..=1.0).contains(&x)));
            let nonconstant = word.iter().any(|&x| x != word[0]);
            if nonconstant {
                prop_assert!(word.contains(&0.0) && word.contains(&1.0));
            }
        }
    }

    #[test]
    fn ste_gradient_is_upstream(rows in 1usize..6, cols in 1usize..9, seed in any::<u64>()) {
        let mut rng = Rng::new(seed, "ste");
        let x = rng.uniform_tensor(&[rows, cols]);
        let upstream = Tensor::new(
            vec![rows, cols],
            rng.uniform_tensor(&[rows, cols]).data().iter().map(|u| 4.0 * u - 2.0).collect(),
        ).unwrap();
        let mut ps = ParamSet::new();
        let w = ps.add("w", x);
        let mut g = Graph::new(&ps);
        let xn = g.param(w);
        let (q, _) = ste_quantize(&mut g, xn, &Quantizer::new(QuantizerScheme::Levels, 4).unwrap()).unwrap();
        let up = g.constant(upstream.clone()).unwrap();
        let prod = g.mul(q, up).unwrap();
        let loss = g.sum(prod).unwrap();
        let grads = g.backward(loss).unwrap();
        prop_assert_eq!(grads.get(w).unwrap().data(), upstream.data());
    }

    #[test]
    fn softmax_rows_sum_to_one(rows in 1usize..6, cols in 1usize..12, seed in any::<u64>(), spread in 0.1f64..200.0) {
        let mut rng = Rng::new(seed, "softmax");
        let data = rng.uniform_tensor(&[rows, cols]).data().iter().map(|u| spread * (u - 0.5)).collect();
        let ps = ParamSet::new();
        let mut g = Graph::new(&ps);
        let x = g.constant(Tensor::new(vec![rows, cols], data).unwrap()).unwrap();
        let s = g.softmax(x).unwrap();
        for i in 0..rows {
            let row = g.value(s).row(i);
            prop_assert!(row.iter().all(|&p| p >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn capacity_grows_with_word_length(v in 2u64..20, w in 1u64..40) {
        prop_assert!(capacity(v, w + 1).log10() > capacity(v, w).log10());
        if let (Some(a), Some(b)) = (capacity(v, w).exact(), capacity(v, w + 1).exact()) {
            prop_assert_eq!(b, a * v);
        }
    }

    #[test]
    fn candidates_are_distinct_and_hold_the_target(pool in 2usize..200, seed in any::<u64>(), frac in 0.0f64..1.0) {
        let items: Vec<usize> = (0..pool).collect();
        let mut rng = Rng::new(seed, "candidates");
        let target = rng.below(pool);
        let n = 1 + ((pool - 1) as f64 * frac) as usize;
        let (cands, pos) = build_candidates(target, &items, n, &mut rng).unwrap();
        prop_assert_eq!(cands.len(), n);
        prop_assert_eq!(cands[pos], target);
        prop_assert_eq!(cands.iter().filter(|&&c| c == target).count(), 1);
        prop_assert_eq!(cands.iter().collect::<HashSet<_>>().len(), n);
    }

    #[test]
    fn stat_ignores_order(mut xs in prop::collection::vec(0.0f64..1.0, 1..8), seed in any::<u64>()) {
        let a = Stat::of(&xs).unwrap();
        Rng::new(seed, "perm").shuffle(&mut xs);
        let b = Stat::of(&xs).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a.std >= 0.0);
    }

    #[test]
    fn long_rows_survive_csv(
        acc in prop::option::of(0.0f64..=1.0),
        noum in prop::option::of(0usize..1001),
        seed in any::<u64>(),
        n in 1usize..10001,
        v in prop::option::of(2usize..101),
    ) {
        let row = LongRow {
            game: Game::ObjectReferential,
            mode: if v.is_some() { Mode::Quantized } else { Mode::Continuous },
            architecture: Architecture::Recurrent,
            alphabet: v,
            word_length: 100,
            message_length: 6,
            regime: v.map(|_| QuantizeRegime::TrainAndInfer),
            seed,
            n,
            accuracy: acc,
            noum,
            best_epoch: 3,
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rows.csv");
        write_csv(&p, std::slice::from_ref(&row)).unwrap();
        let back: Vec<LongRow> = read_csv(&p).unwrap();
        prop_assert_eq!(back, vec![row]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn checkpoints_round_trip(shapes in prop::collection::vec((1usize..6, 1usize..6), 1..5), seed in any::<u64>()) {
        let mut rng = Rng::new(seed, "ckpt");
        let mut ps = ParamSet::new();
        for (i, (r, c)) in shapes.iter().enumerate() {
            let mut t = rng.uniform_tensor(&[*r, *c]);
            t.data_mut()[0] = f64::MIN_POSITIVE * (i as f64 + 1.0);
            ps.add(format!("t{i}"), t);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        save_checkpoint(&ps, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        prop_assert_eq!(back.len(), ps.len());
        for id in ps.ids() {
            prop_assert_eq!(back.name(id), ps.name(id));
            prop_assert_eq!(back.get(id), ps.get(id));
        }
    }
}

#[test]
fn instant_spec_rejects_multiword_messages() {
    let spec = ChannelSpec::quantized(Architecture::Instant, 10, 4, 2, QuantizeRegime::InferOnly);
    assert!(spec.validate().is_err());
}
