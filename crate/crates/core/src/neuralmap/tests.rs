use super::*;
use crate::autodiff::{forward_with_jacobian, Dual2, Tape, Var};

fn small_arch(activation: Activation, residual: bool, input_skip: bool) -> Architecture {
    Architecture {
        in_dim: 2,
        out_dim: 3,
        depth: 4,
        width: 6,
        residual,
        activation,
        input_skip,
        output_scale: 1.0,
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

#[test]
fn default_surface_parameter_count() {
    let arch = Architecture::surface_default();
    // lift 2*256+256, eight 256x256 hidden blocks with bias, projection 256*3+3
    let by_hand = (2 * 256 + 256) + 8 * (256 * 256 + 256) + (256 * 3 + 3);
    assert_eq!(by_hand, 527_875);
    assert_eq!(arch.param_count(), by_hand);
    assert_eq!(build(&arch, 1).unwrap().params().len(), by_hand);
}

#[test]
fn warp_default_shape() {
    let arch = Architecture::warp_default();
    assert_eq!((arch.depth, arch.width, arch.out_dim), (4, 128, 2));
    assert_eq!(arch.activation, Activation::Softplus);
    assert_eq!(
        arch.layer_dims(),
        vec![(2, 128), (128, 128), (128, 128), (128, 2)]
    );
}

#[test]
fn invalid_dimensions_rejected() {
    let mut a = Architecture::warp_default();
    a.depth = 0;
    assert!(matches!(build(&a, 0), Err(NeuralMapError::InvalidArchitecture(_))));
    let mut a = Architecture::warp_default();
    a.width = 0;
    assert!(build(&a, 0).is_err());
    let mut a = Architecture::warp_default();
    a.out_dim = 4;
    assert!(build(&a, 0).is_err());
}

#[test]
fn seeded_build_is_reproducible() {
    let arch = small_arch(Activation::Softplus, true, false);
    assert_eq!(build(&arch, 42).unwrap().params(), build(&arch, 42).unwrap().params());
    assert_ne!(build(&arch, 42).unwrap().params(), build(&arch, 43).unwrap().params());
    // biases start at zero, weights inside the Glorot bound
    let m = build(&arch, 42).unwrap();
    let bound = (6.0f64 / 8.0).sqrt();
    assert!(m.layers[0].weights(m.params()).iter().all(|w| w.abs() <= bound));
    assert!(m.layers[0].bias(m.params()).iter().all(|b| *b == 0.0));
}

#[test]
fn identity_map_out_dim_two() {
    let arch = Architecture {
        depth: 1,
        out_dim: 2,
        ..small_arch(Activation::Softplus, false, false)
    };
    let mut m = NeuralMap::zeros(&arch).unwrap();
    m.layer_mut(0).0.copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
    assert_eq!(m.evaluate_point([0.2, 0.9]), vec![0.2, 0.9]);
}

#[test]
fn zero_network_evaluates_by_hand() {
    // every hidden unit is softplus(0) = ln 2 but the zero projection discards
    // it; only the input skip survives
    let mut arch = small_arch(Activation::Softplus, true, false);
    let m = NeuralMap::zeros(&arch).unwrap();
    assert_eq!(m.evaluate_point([0.3, -0.4]), vec![0.0, 0.0, 0.0]);
    arch.input_skip = true;
    let m = NeuralMap::zeros(&arch).unwrap();
    assert_eq!(m.evaluate_point([0.3, -0.4]), vec![0.3, -0.4, 0.0]);
}

#[test]
fn residual_trunk_with_zero_hidden_weights() {
    let arch = Architecture {
        depth: 5,
        ..small_arch(Activation::Softplus, true, false)
    };
    let mut m = build(&arch, 7).unwrap();
    for l in 1..4 {
        let (w, b) = m.layer_mut(l);
        w.fill(0.0);
        b.fill(0.0);
    }
    let lift_b: Vec<f64> = (0..6).map(|i| 0.1 * i as f64).collect();
    m.layer_mut(0).1.copy_from_slice(&lift_b);
    let p = [0.25, 0.6];
    let (w0, _) = {
        let l = m.layers[0];
        (l.weights(m.params()).to_vec(), ())
    };
    let skip: Vec<f64> = (0..6)
        .map(|j| softplus(w0[2 * j] * p[0] + w0[2 * j + 1] * p[1] + lift_b[j]) + 3.0 * 2f64.ln())
        .collect();
    let last = m.layers[4];
    let wp = last.weights(m.params());
    let bp = last.bias(m.params());
    let expect: Vec<f64> = (0..3)
        .map(|o| (0..6).map(|j| wp[o * 6 + j] * skip[j]).sum::<f64>() + bp[o])
        .collect();
    let got = m.evaluate_point(p);
    for (g, e) in got.iter().zip(&expect) {
        assert!((g - e).abs() < 1e-12, "{g} vs {e}");
    }
}

#[test]
fn batch_matches_single_evaluations_bitwise() {
    let m = build(&small_arch(Activation::Softplus, true, true), 3).unwrap();
    let pts = [[0.1, 0.2], [0.5, 0.9], [0.33, 0.71]];
    let batch = m.evaluate(&pts);
    for (p, b) in pts.iter().zip(&batch) {
        assert_eq!(&m.evaluate_point(*p), b);
    }
    let (dual, _) = m.forward_dual(&DualBatch::seed_identity(&pts), false).unwrap();
    for (i, b) in batch.iter().enumerate() {
        assert_eq!(dual.value(i), b.as_slice());
    }
}

#[test]
fn activation_swap_changes_values_not_shapes() {
    let a = build(&small_arch(Activation::Softplus, true, false), 5).unwrap();
    let mut b = a.clone();
    b.arch.activation = Activation::Relu;
    let (ya, yb) = (a.evaluate_point([0.4, 0.4]), b.evaluate_point([0.4, 0.4]));
    assert_eq!(ya.len(), yb.len());
    assert_ne!(ya, yb);
}

#[test]
fn jacobian_of_linear_maps() {
    let arch = Architecture {
        depth: 1,
        ..small_arch(Activation::Softplus, false, false)
    };
    let mut m = NeuralMap::zeros(&arch).unwrap();
    m.layer_mut(0).0.copy_from_slice(&[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    let (y, j) = forward_with_jacobian(&m, [0.3, 0.7]).unwrap();
    assert_eq!(y, vec![0.3, 0.7, 0.0]);
    assert_eq!(j, vec![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]);

    let arch = Architecture { out_dim: 2, ..arch };
    let mut m = NeuralMap::zeros(&arch).unwrap();
    m.layer_mut(0).0.copy_from_slice(&[2.0, 0.0, 0.0, 3.0]);
    let (y, j) = forward_with_jacobian(&m, [0.5, 0.5]).unwrap();
    assert_eq!(y, vec![1.0, 1.5]);
    assert_eq!(j, vec![[2.0, 0.0], [0.0, 3.0]]);
}

#[test]
fn jacobian_matches_finite_differences() {
    let arch = Architecture {
        depth: 2,
        width: 8,
        ..small_arch(Activation::Softplus, true, false)
    };
    let m = build(&arch, 11).unwrap();
    for p in [[0.13, 0.77], [0.5, 0.5], [0.9, 0.05]] {
        let (_, j) = forward_with_jacobian(&m, p).unwrap();
        let h = 1e-5;
        for axis in 0..2 {
            let mut a = p;
            let mut b = p;
            a[axis] += h;
            b[axis] -= h;
            let (ya, yb) = (m.evaluate_point(a), m.evaluate_point(b));
            for r in 0..3 {
                let fd = (ya[r] - yb[r]) / (2.0 * h);
                assert!(rel_err(j[r][axis], fd) < 1e-4, "{} vs {}", j[r][axis], fd);
            }
        }
    }
}

#[test]
fn non_finite_layer_is_reported() {
    let arch = small_arch(Activation::Softplus, true, false);
    let mut m = build(&arch, 1).unwrap();
    m.layer_mut(1).0.fill(f64::MAX);
    let err = forward_with_jacobian(&m, [0.5, 0.5]).unwrap_err();
    assert_eq!(err, AutodiffError::NonFiniteLayer { layer: 1 });
}

/// A loss touching values and both tangent blocks nonlinearly.
fn probe_loss<T: Real>(y: &[Dual2<T>]) -> T {
    let mut acc = y[0].re * y[0].re * 0.5;
    for (k, d) in y.iter().enumerate() {
        let w = 0.3 + 0.2 * k as f64;
        acc = acc + (d.du * d.dv) * w + d.du.square() + (d.dv * 1.5).sigmoid() + d.re * (w - 1.0);
    }
    acc
}

fn tape_reference(m: &NeuralMap, p: [f64; 2]) -> (f64, Vec<f64>, [f64; 2]) {
    let tape = Tape::new();
    let params: Vec<Var> = m.params().iter().map(|&w| tape.var(w)).collect();
    let pu = tape.var(p[0]);
    let pv = tape.var(p[1]);
    let dparams: Vec<Dual2<Var>> = params.iter().map(|&w| Dual2::constant(w)).collect();
    let y = m.forward_generic(&dparams, Dual2::seed(pu, pv));
    let loss = probe_loss(&y);
    let g = loss.backward();
    (
        loss.value(),
        params.iter().map(|w| g.wrt(w)).collect(),
        [g.wrt(&pu), g.wrt(&pv)],
    )
}

fn fast_sweep(m: &NeuralMap, p: [f64; 2]) -> (f64, Vec<f64>, [f64; 2]) {
    let (out, trace) = m.forward_dual(&DualBatch::seed_identity(&[p]), true).unwrap();
    // adjoints of probe_loss through the tape on the output duals only
    let tape = Tape::new();
    let leaves: Vec<Dual2<Var>> = (0..out.dim())
        .map(|r| {
            Dual2::new(
                tape.var(out.value(0)[r]),
                tape.var(out.tangent(0, 0)[r]),
                tape.var(out.tangent(1, 0)[r]),
            )
        })
        .collect();
    let loss = probe_loss(&leaves);
    let g = loss.backward();
    let mut adj = DualBatch::zeros(1, out.dim());
    for (r, l) in leaves.iter().enumerate() {
        adj.value_mut(0)[r] = g.wrt(&l.re);
        adj.tangent_mut(0, 0)[r] = g.wrt(&l.du);
        adj.tangent_mut(1, 0)[r] = g.wrt(&l.dv);
    }
    let mut grad = vec![0.0; m.params().len()];
    let in_adj = m.backward_dual(&trace.unwrap(), &adj, Some(&mut grad));
    (loss.value(), grad, [in_adj.value(0)[0], in_adj.value(0)[1]])
}

#[test]
fn batched_sweep_agrees_with_generic_tape() {
    for (act, residual, skip) in [
        (Activation::Softplus, true, false),
        (Activation::Softplus, false, true),
        (Activation::Relu, true, true),
        (Activation::LeakyRelu, false, false),
    ] {
        let arch = Architecture {
            out_dim: if skip { 2 } else { 3 },
            ..small_arch(act, residual, skip)
        };
        let m = build(&arch, 19).unwrap();
        let p = [0.31, 0.62];
        let (l1, g1, x1) = tape_reference(&m, p);
        let (l2, g2, x2) = fast_sweep(&m, p);
        assert!((l1 - l2).abs() < 1e-12);
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "{act:?}: {a} vs {b}");
        }
        for k in 0..2 {
            assert!((x1[k] - x2[k]).abs() <= 1e-10 * (1.0 + x1[k].abs()));
        }
    }
}

#[test]
fn parameter_gradient_matches_finite_differences() {
    let arch = small_arch(Activation::Softplus, true, true);
    let m = build(&arch, 23).unwrap();
    let p = [0.44, 0.18];
    let (_, g, _) = fast_sweep(&m, p);
    let loss_at = |params: &[f64]| {
        let mm = NeuralMap::from_params(&arch, params.to_vec()).unwrap();
        let dp: Vec<Dual2<f64>> = params.iter().map(|&w| Dual2::constant(w)).collect();
        probe_loss(&mm.forward_generic(&dp, Dual2::seed(p[0], p[1])))
    };
    let h = 1e-5;
    for i in 0..m.params().len() {
        let mut a = m.params().to_vec();
        let mut b = a.clone();
        a[i] += h;
        b[i] -= h;
        let fd = (loss_at(&a) - loss_at(&b)) / (2.0 * h);
        assert!(
            (g[i] - fd).abs() < 1e-4 * g[i].abs().max(fd.abs()).max(1e-3),
            "param {i}: {} vs {}",
            g[i],
            fd
        );
    }
}

#[test]
fn nested_derivative_of_one_dimensional_net() {
    // f_θ(x) = W₂ softplus(W₁ x + b₁) + b₂ with x on the first axis only;
    // d/dθ (∂f/∂x)² checked against finite differences over θ.
    let arch = Architecture {
        in_dim: 2,
        out_dim: 2,
        depth: 2,
        width: 5,
        residual: false,
        activation: Activation::Softplus,
        input_skip: false,
        output_scale: 1.0,
    };
    let m = build(&arch, 31).unwrap();
    let x = 0.37;
    let slope_sq = |params: &[f64]| {
        let mm = NeuralMap::from_params(&arch, params.to_vec()).unwrap();
        let (_, j) = forward_with_jacobian(&mm, [x, 0.0]).unwrap();
        j[0][0] * j[0][0]
    };
    let tape = Tape::new();
    let vars: Vec<Var> = m.params().iter().map(|&w| tape.var(w)).collect();
    let dp: Vec<Dual2<Var>> = vars.iter().map(|&w| Dual2::constant(w)).collect();
    let y = m.forward_generic(&dp, Dual2::seed(tape.var(x), tape.var(0.0)));
    let loss = y[0].du * y[0].du;
    let g = loss.backward();
    let h = 1e-5;
    for (i, v) in vars.iter().enumerate() {
        let mut a = m.params().to_vec();
        let mut b = a.clone();
        a[i] += h;
        b[i] -= h;
        let fd = (slope_sq(&a) - slope_sq(&b)) / (2.0 * h);
        let got = g.wrt(v);
        assert!((got - fd).abs() < 1e-4 * got.abs().max(fd.abs()).max(1e-3), "{got} vs {fd}");
    }
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.nsm");
    let m = build(&small_arch(Activation::Softplus, true, false), 99).unwrap();
    let mut meta = CheckpointMetadata::named("probe");
    meta.training_loss = Some(0.125);
    save(&m, &meta, &path).unwrap();
    let ck = load(&path).unwrap();
    assert_eq!(ck.metadata, meta);
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let p = [rng.random::<f64>(), rng.random::<f64>()];
        let (a, b) = (m.evaluate_point(p), ck.map.evaluate_point(p));
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max((x - y).abs());
        }
    }
    assert_eq!(worst, 0.0);
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], b"NSM1");
}

#[test]
fn checkpoint_errors_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.nsm");
    let m = build(&small_arch(Activation::Softplus, true, false), 1).unwrap();
    save(&m, &CheckpointMetadata::named("x"), &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();

    std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
    assert!(matches!(load(&path), Err(NeuralMapError::Corrupt(_))));

    std::fs::write(&path, &bytes[..6]).unwrap();
    assert!(matches!(load(&path), Err(NeuralMapError::Corrupt(_))));

    let mut v2 = bytes.clone();
    v2[3] = b'2';
    std::fs::write(&path, &v2).unwrap();
    assert!(matches!(load(&path), Err(NeuralMapError::VersionMismatch { .. })));

    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(
        load_expecting(&path, 2),
        Err(NeuralMapError::ShapeMismatch { expected: 2, found: 3 })
    ));
    assert!(matches!(
        load(dir.path().join("missing.nsm")),
        Err(NeuralMapError::Io(_))
    ));
}
