//! Central finite-difference checks for every differentiable tape op.

use proptest::prelude::*;
use qcomm::channel::{
    receive, send, Architecture, ChannelSpec, ReceiverChannel, SenderChannel,
};
use qcomm::layers::{GruParams, Linear};
use qcomm::gradcheck::{self, random_param};
use qcomm::{Graph, NodeId, ParamId, ParamSet, Result, Rng};

#[test]
fn matmul_all_transposes() {
    let mut rng = Rng::new(1, "gc");
    for (ta, tb) in [(false, false), (true, false), (false, true), (true, true)] {
        let mut ps = ParamSet::new();
        let a_shape = if ta { [7, 5] } else { [5, 7] };
        let b_shape = if tb { [3, 7] } else { [7, 3] };
        let a = random_param(&mut ps, "a", &a_shape, &mut rng);
        let b = random_param(&mut ps, "b", &b_shape, &mut rng);
        let err = max_relative_error(&mut ps, |g| {
            let (a, b) = (g.param(a), g.param(b));
            g.matmul_t(a, b, ta, tb)
        });
        assert!(err <= 1e-6, "matmul ta={ta} tb={tb}: {err:e}");
    }
}

#[test]
fn softmax_cross_entropy_3x5() {
    let mut rng = Rng::new(2, "gc");
    let mut ps = ParamSet::new();
    let x = random_param(&mut ps, "x", &[3, 5], &mut rng);
    let err = max_relative_error(&mut ps, |g| {
        let x = g.param(x);
        g.softmax_cross_entropy(x, &[0, 4, 2])
    });
    assert!(err <= 1e-6, "{err:e}");
}

#[test]
fn gru_single_step() {
    let mut rng = Rng::new(3, "gc");
    let mut ps = ParamSet::new();
    let gru = GruParams::new(&mut ps, "gru", 4, 5, &mut rng);
    let h = random_param(&mut ps, "h", &[3, 5], &mut rng);
    let x = random_param(&mut ps, "x", &[3, 4], &mut rng);
    // nonzero biases so their gradients are exercised on a generic point
    for id in [gru.b_ih, gru.b_hh] {
        let t = rng.uniform_tensor(ps.get(id).shape());
        ps.get_mut(id).data_mut().copy_from_slice(t.data());
    }
    let err = max_relative_error(&mut ps, |g| {
        let (h, x) = (g.param(h), g.param(x));
        gru.step(g, h, x)
    });
    assert!(err <= 1e-5, "{err:e}");
}

#[test]
fn gru_six_step_bptt() {
    let mut rng = Rng::new(4, "gc");
    let mut ps = ParamSet::new();
    let gru = GruParams::new(&mut ps, "gru", 3, 4, &mut rng);
    let h0 = random_param(&mut ps, "h0", &[2, 4], &mut rng);
    let xs: Vec<ParamId> = (0..6)
        .map(|i| random_param(&mut ps, &format!("x{i}"), &[2, 3], &mut rng))
        .collect();
    let err = max_relative_error(&mut ps, |g| {
        let mut h = g.param(h0);
        for &x in &xs {
            let x = g.param(x);
            h = gru.step(g, h, x)?;
        }
        Ok(h)
    });
    assert!(err <= 1e-5, "{err:e}");
}

#[test]
fn elementwise_and_structural_ops() {
    let mut rng = Rng::new(5, "gc");
    let mut ps = ParamSet::new();
    let a = random_param(&mut ps, "a", &[4, 6], &mut rng);
    let b = random_param(&mut ps, "b", &[4, 6], &mut rng);
    let bias = random_param(&mut ps, "bias", &[6], &mut rng);
    let col = random_param(&mut ps, "col", &[4, 1], &mut rng);
    let err = max_relative_error(&mut ps, |g| {
        let (a, b, bias, col) = (g.param(a), g.param(b), g.param(bias), g.param(col));
        let x = g.add(a, b)?;
        let x = g.mul(x, b)?;
        let x = g.add_row_bias(x, bias)?;
        let x = g.add_column(x, col)?;
        let x = g.scale(x, 0.7)?;
        let s = g.sigmoid(x)?;
        let t = g.tanh(a)?;
        let left = g.slice_cols(s, 1, 3)?;
        let right = g.slice_cols(t, 0, 2)?;
        let c = g.concat_cols(&[left, right, s])?;
        g.reshape(c, &[4 * 11])
    });
    assert!(err <= 1e-5, "{err:e}");
}

#[test]
fn softmax_rows() {
    let mut rng = Rng::new(6, "gc");
    let mut ps = ParamSet::new();
    let x = random_param(&mut ps, "x", &[5, 7], &mut rng);
    let err = max_relative_error(&mut ps, |g| {
        let x = g.param(x);
        g.softmax(x)
    });
    assert!(err <= 1e-5, "{err:e}");
}

#[test]
fn normalize_words() {
    let mut rng = Rng::new(7, "gc");
    let mut ps = ParamSet::new();
    let x = random_param(&mut ps, "x", &[3, 8], &mut rng);
    let err = max_relative_error(&mut ps, |g| {
        let x = g.param(x);
        g.normalize(x, 4)
    });
    assert!(err <= 1e-5, "{err:e}");
}

#[test]
fn row_dot_scores() {
    let mut rng = Rng::new(8, "gc");
    let mut ps = ParamSet::new();
    let z = random_param(&mut ps, "z", &[3, 4], &mut rng);
    let u = random_param(&mut ps, "u", &[3 * 5, 4], &mut rng);
    let err = max_relative_error(&mut ps, |g| {
        let (z, u) = (g.param(z), g.param(u));
        g.row_dot(z, u)
    });
    assert!(err <= 1e-5, "{err:e}");
}

#[test]
fn linear_layer() {
    let mut rng = Rng::new(9, "gc");
    let mut ps = ParamSet::new();
    let lin = Linear::new(&mut ps, "lin", 5, 3, &mut rng);
    let x = random_param(&mut ps, "x", &[4, 5], &mut rng);
    let err = max_relative_error(&mut ps, |g| {
        let x = g.param(x);
        lin.forward(g, x)
    });
    assert!(err <= 1e-5, "{err:e}");
}

#[test]
fn receive_to_message() {
    for arch in [Architecture::Instant, Architecture::Recurrent] {
        let ml = if arch == Architecture::Instant { 1 } else { 3 };
        let spec = ChannelSpec::continuous(arch, 4, ml);
        let mut rng = Rng::new(10, "gc");
        let mut ps = ParamSet::new();
        let chan = ReceiverChannel::new(&mut ps, &spec, 5, 3, &mut rng);
        let m = random_param(&mut ps, "m", &[2, 4 * ml], &mut rng);
        let err = max_relative_error(&mut ps, |g| {
            let m = g.param(m);
            receive(g, m, &chan, &spec)
        });
        assert!(err <= 1e-5, "{arch:?}: {err:e}");
    }
}

#[test]
fn recurrent_sender_end_to_end() {
    let spec = ChannelSpec::continuous(Architecture::Recurrent, 4, 3);
    let mut rng = Rng::new(11, "gc");
    let mut ps = ParamSet::new();
    let chan = SenderChannel::new(&mut ps, &spec, 5, 3, &mut rng);
    let u = random_param(&mut ps, "u", &[2, 5], &mut rng);
    let err = max_relative_error(&mut ps, |g| {
        let u = g.param(u);
        let mut noise = Rng::new(0, "gumbel-noise");
        Ok(send(g, u, &chan, &spec, &mut noise, true)?.node)
    });
    assert!(err <= 1e-5, "{err:e}");
}

#[test]
fn gumbel_softmax_training_path() {
    // Fixed noise seed per evaluation makes the relaxed sample a smooth
    // function of the logits.
    let spec = ChannelSpec::gumbel(Architecture::Instant, 5, 1);
    let mut rng = Rng::new(12, "gc");
    let mut ps = ParamSet::new();
    let chan = SenderChannel::new(&mut ps, &spec, 4, 4, &mut rng);
    let u = random_param(&mut ps, "u", &[3, 4], &mut rng);
    let err = max_relative_error(&mut ps, |g| {
        let u = g.param(u);
        let mut noise = Rng::new(0, "gumbel-noise");
        Ok(send(g, u, &chan, &spec, &mut noise, true)?.node)
    });
    assert!(err <= 1e-5, "{err:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_shapes_matmul_softmax_normalize(
        m in 1usize..=8, k in 1usize..=8, n in 2usize..=8, seed in 0u64..1000,
    ) {
        let mut rng = Rng::new(seed, "gc");
        let mut ps = ParamSet::new();
        let a = random_param(&mut ps, "a", &[m, k], &mut rng);
        let b = random_param(&mut ps, "b", &[k, n], &mut rng);
        let err = max_relative_error(&mut ps, |g| {
            let (a, b) = (g.param(a), g.param(b));
            let y = g.matmul(a, b)?;
            let s = g.softmax(y)?;
            let t = g.tanh(y)?;
            let c = g.concat_cols(&[s, t])?;
            g.normalize(c, n)
        });
        prop_assert!(err <= 1e-5, "m={} k={} n={}: {:e}", m, k, n, err);
    }
}

fn max_relative_error<F>(params: &mut ParamSet, f: F) -> f64
where
    F: Fn(&mut Graph) -> Result<NodeId>,
{
    gradcheck::max_relative_error(params, f).unwrap()
}
