//! Analytic vs. central finite-difference gradients for every layer kind,
//! run on f64 shadow networks over many random seeds and shapes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thinnav_nn::gradcheck::{check_indices, check_network, probe_loss as loss};
use thinnav_nn::init::uniform;
use thinnav_nn::{Activation, Gru, LayerSpec, Network, Tensor};

const SEEDS: u64 = 20;

fn run_seeds(name: &str, mut build: impl FnMut(&mut ChaCha8Rng) -> (Network<f64>, Tensor<f64>)) {
    let mut passed = 0;
    let mut worst = 0.0f64;
    let mut attempt = 0u64;
    while passed < SEEDS {
        attempt += 1;
        assert!(attempt < 100 * SEEDS, "{name}: too many kink-adjacent draws");
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + attempt);
        let (net, x) = build(&mut rng);
        if let Some(rep) = check_network(net, x, &mut rng) {
            assert!(rep.passed(), "{name} seed {attempt}: {rep:?}");
            worst = worst.max(rep.max_rel_error);
            passed += 1;
        }
    }
    eprintln!("{name}: {passed} seeds, max relative error {worst:.3e}");
}

fn rand_input(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    uniform(shape, 1.0, rng)
}

#[test]
fn conv_layers() {
    run_seeds("conv", |rng| {
        let cin = rng.gen_range(1..4);
        let cout = rng.gen_range(1..4);
        let k = [1, 3, 5][rng.gen_range(0..3)];
        let s = rng.gen_range(1..4);
        let h = rng.gen_range(k.max(3)..9);
        let w = rng.gen_range(k.max(3)..9);
        let net = Network::new(&[cin, h, w], &[LayerSpec::conv(cin, cout, k, s)], rng).unwrap();
        (net, rand_input(&[2, cin, h, w], rng))
    });
}

#[test]
fn deconv_layers() {
    run_seeds("deconv", |rng| {
        let cin = rng.gen_range(1..4);
        let cout = rng.gen_range(1..4);
        let s = rng.gen_range(1..4);
        let h = rng.gen_range(2..6);
        let w = rng.gen_range(2..6);
        let k = 3;
        // Output sizes reachable from (h, w): base..=base + s - 1.
        let oh = (h - 1) * s + k - 2 + rng.gen_range(0..s);
        let ow = (w - 1) * s + k - 2 + rng.gen_range(0..s);
        let net = Network::new(&[cin, h, w], &[LayerSpec::deconv(cin, cout, k, s, [oh, ow])], rng).unwrap();
        (net, rand_input(&[2, cin, h, w], rng))
    });
}

#[test]
fn dense_layers() {
    run_seeds("dense", |rng| {
        let i = rng.gen_range(1..12);
        let o = rng.gen_range(1..12);
        let net = Network::new(&[i], &[LayerSpec::dense(i, o)], rng).unwrap();
        (net, rand_input(&[3, i], rng))
    });
}

#[test]
fn activations() {
    for act in [
        Activation::Identity,
        Activation::Relu,
        Activation::LeakyRelu,
        Activation::Sigmoid,
        Activation::Tanh,
    ] {
        run_seeds(act.name(), |rng| {
            let n = rng.gen_range(1..20);
            let net = Network::new(&[n], &[LayerSpec::Activation(act)], rng).unwrap();
            let mut x = rand_input(&[2, n], rng);
            for v in x.data_mut() {
                *v *= 3.0;
            }
            (net, x)
        });
    }
}

#[test]
fn flatten_and_reshape() {
    run_seeds("flatten/reshape", |rng| {
        let c = rng.gen_range(1..3);
        let h = rng.gen_range(1..5);
        let w = rng.gen_range(1..5);
        let specs = [
            LayerSpec::Flatten,
            LayerSpec::dense(c * h * w, 6),
            LayerSpec::Reshape { shape: vec![1, 2, 3] },
            LayerSpec::conv(1, 2, 3, 1),
            LayerSpec::Activation(Activation::Tanh),
        ];
        let net = Network::new(&[c, h, w], &specs, rng).unwrap();
        (net, rand_input(&[2, c, h, w], rng))
    });
}

#[test]
fn mirrored_encoder_decoder_stack() {
    run_seeds("conv+deconv stack", |rng| {
        let specs = [
            LayerSpec::conv(1, 3, 3, 2),
            LayerSpec::Activation(Activation::LeakyRelu),
            LayerSpec::conv(3, 4, 3, 2),
            LayerSpec::Activation(Activation::LeakyRelu),
            LayerSpec::Flatten,
            LayerSpec::dense(4 * 2 * 3, 5),
            LayerSpec::dense(5, 4 * 2 * 3),
            LayerSpec::Reshape { shape: vec![4, 2, 3] },
            LayerSpec::deconv(4, 3, 3, 2, [4, 5]),
            LayerSpec::Activation(Activation::LeakyRelu),
            LayerSpec::deconv(3, 1, 3, 2, [7, 9]),
            LayerSpec::Activation(Activation::Sigmoid),
        ];
        let net = Network::new(&[1, 7, 9], &specs, rng).unwrap();
        assert_eq!(net.output_shape(), &[1, 7, 9]);
        (net, rand_input(&[1, 1, 7, 9], rng))
    });
}

#[test]
fn gru_unrolled() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(77 + seed);
        let input = rng.gen_range(1..5);
        let hidden = rng.gen_range(1..6);
        let steps = rng.gen_range(1..6);
        let n = rng.gen_range(1..3);
        let mut gru = Gru::<f64>::new(input, hidden, &mut rng).unwrap();
        let h0 = uniform(&[n, hidden], 0.8, &mut rng);
        let xs: Vec<Tensor<f64>> = (0..steps).map(|_| uniform(&[n, input], 1.0, &mut rng)).collect();
        let rs: Vec<Vec<f64>> = (0..steps)
            .map(|_| (0..n * hidden).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let eval = |g: &Gru<f64>, h0: &Tensor<f64>, xs: &[Tensor<f64>]| -> f64 {
            let hs = g.infer_seq(h0, xs).unwrap();
            hs.iter().zip(&rs).map(|(h, r)| loss(h, r).0).sum()
        };
        let (hs, trace) = gru.forward_seq(&h0, &xs).unwrap();
        let dhs: Vec<Tensor<f64>> = hs.iter().zip(&rs).map(|(h, r)| loss(h, r).1).collect();
        gru.zero_grad();
        let (dh0, dxs) = gru.backward_seq(&trace, &dhs).unwrap();

        // Parameters, initial state and inputs flattened into one probe space.
        let analytic: Vec<f64> = gru
            .grads()
            .iter()
            .flat_map(|g| g.data().to_vec())
            .chain(dh0.data().iter().copied())
            .chain(dxs.iter().flat_map(|d| d.data().to_vec()))
            .collect();
        let mut state = (gru, h0, xs);
        let idx: Vec<usize> = (0..analytic.len()).collect();
        let rep = check_indices(
            &mut state,
            &idx,
            &analytic,
            |s, mut i| {
                for p in s.0.params_mut() {
                    if i < p.len() {
                        return &mut p.data_mut()[i];
                    }
                    i -= p.len();
                }
                if i < s.1.len() {
                    return &mut s.1.data_mut()[i];
                }
                i -= s.1.len();
                for x in s.2.iter_mut() {
                    if i < x.len() {
                        return &mut x.data_mut()[i];
                    }
                    i -= x.len();
                }
                panic!("index out of range")
            },
            |s| eval(&s.0, &s.1, &s.2),
        );
        assert!(rep.passed(), "gru seed {seed}: {rep:?}");
    }
}

#[test]
fn quadratic_loss_at_minimum_has_zero_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut net = Network::<f64>::new(&[4], &[LayerSpec::dense(4, 3)], &mut rng).unwrap();
    let x = rand_input(&[2, 4], &mut rng);
    let y = net.forward(&x).unwrap();
    // L = 0.5 * |y - y*|^2 with y* = y: gradient wrt y is exactly zero.
    let g = Tensor::zeros(y.shape());
    net.zero_grad();
    let gx = net.backward(&g).unwrap();
    assert!(gx.data().iter().all(|v| *v == 0.0));
    assert!(net.grads().iter().all(|t| t.data().iter().all(|v| *v == 0.0)));
}
