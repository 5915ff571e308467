use nalgebra::{DMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, PI};

use super::*;
use crate::analytic::tessellate;
use crate::energies::dirichlet_density;
use crate::neuralmap::{self, Activation, Architecture};

fn small_surface(seed: u64) -> NeuralMap {
    let arch = Architecture {
        depth: 3,
        width: 12,
        out_dim: 3,
        ..Architecture::surface_default()
    };
    neuralmap::build(&arch, seed).unwrap()
}

fn identity_warp() -> NeuralMap {
    NeuralMap::zeros(&Architecture::warp_default()).unwrap()
}

fn random_full_rank(rng: &mut impl Rng) -> Mat3x2<f64> {
    loop {
        let j: Mat3x2<f64> = std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(-2.0..2.0)));
        if linalg::singular_values(&j)[1] > 0.05 {
            return j;
        }
    }
}

/// Singular values of `Jg Jφ⁺` restricted to the source tangent plane, from
/// an SVD pseudoinverse and a frame built around the normal.
fn pushforward_oracle(jphi: &Mat3x2<f64>, jg: &Mat3x2<f64>) -> [f64; 2] {
    let phi = DMatrix::from_fn(3, 2, |r, c| jphi[r][c]);
    let g = DMatrix::from_fn(3, 2, |r, c| jg[r][c]);
    let pinv = phi.clone().pseudo_inverse(1e-14).unwrap();
    let n = Vector3::new(phi[(0, 0)], phi[(1, 0)], phi[(2, 0)]).cross(&Vector3::new(phi[(0, 1)], phi[(1, 1)], phi[(2, 1)]));
    let n = n.normalize();
    let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let e1 = n.cross(&helper).normalize();
    let e2 = n.cross(&e1);
    let frame = DMatrix::from_fn(3, 2, |r, c| if c == 0 { e1[r] } else { e2[r] });
    let df = g * pinv * frame;
    let sv = df.singular_values();
    let (a, b) = (sv[0], sv[1]);
    [a.max(b), a.min(b)]
}

#[test]
fn planar_composition_examples() {
    let jphi = [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]];
    let jg = [[2.0, 0.0], [0.0, 3.0], [0.0, 0.0]];
    let (j, m) = jacobian_of_f(&jphi, &jg).unwrap();
    assert_eq!(linalg::singular_values(&j), [3.0, 2.0]);
    assert_eq!(m, [[4.0, 0.0], [0.0, 9.0]]);

    let jphi = [[2.0, 0.0], [0.0, 1.0], [0.0, 0.0]];
    let (j, m) = jacobian_of_f(&jphi, &jphi).unwrap();
    let sv = linalg::singular_values(&j);
    assert!((sv[0] - 1.0).abs() < 1e-15 && (sv[1] - 1.0).abs() < 1e-15);
    assert!((dirichlet_density(&m, 0.01) - (2.0 + 2.0 / 1.01)).abs() < 1e-12);
}

#[test]
fn composition_matches_pushforward_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10_000 {
        let jphi = random_full_rank(&mut rng);
        let jg = random_full_rank(&mut rng);
        let (j, _) = jacobian_of_f(&jphi, &jg).unwrap();
        let sv = linalg::singular_values(&j);
        let oracle = pushforward_oracle(&jphi, &jg);
        for k in 0..2 {
            assert!((sv[k] - oracle[k]).abs() < 1e-9 * oracle[0].max(1.0), "{sv:?} vs {oracle:?}");
        }
    }
}

#[test]
fn singular_source_is_rejected() {
    let jphi = [[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]];
    let err = jacobian_of_f(&jphi, &jphi).unwrap_err().at([0.25, 0.5]);
    assert!(matches!(err, CompositionError::SingularSource { point: Some([0.25, 0.5]), .. }));
    assert!(err.to_string().contains("(0.250000, 0.500000)"));
}

#[test]
fn parameterization_metric_examples() {
    let eye = [[1.0, 0.0], [0.0, 1.0]];
    let m = jacobian_of_param(&[[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]], &eye).unwrap();
    assert_eq!(m, eye);
    assert!((dirichlet_density(&m, 0.01) - 3.980198).abs() < 1e-6);
    let m = jacobian_of_param(&[[2.0, 0.0], [0.0, 2.0], [0.0, 0.0]], &eye).unwrap();
    assert_eq!(m, [[0.25, 0.0], [0.0, 0.25]]);
}

#[test]
fn hemisphere_parameterization_matches_mesh_estimate() {
    // f maps the surface back to the domain; on a fine tessellation its
    // per-face linear pieces approximate the exact differential
    let spec = AnalyticSurface::Hemisphere { radius: 1.0 };
    let pl = tessellate(&spec, 200).unwrap();
    let v = pl.mesh().vertices();
    let uv = pl.uv();
    let eye = [[1.0, 0.0], [0.0, 1.0]];
    for f in (0..pl.mesh().faces().len()).step_by(997) {
        let t = pl.mesh().faces()[f];
        // 3D edge frame of the face and the uv differences along it
        let e1 = sub(v[t[1]], v[t[0]]);
        let e2 = sub(v[t[2]], v[t[0]]);
        let jface: Mat3x2<f64> = std::array::from_fn(|r| [e1[r], e2[r]]);
        let duv: Mat2<f64> = [
            [uv[t[1]][0] - uv[t[0]][0], uv[t[2]][0] - uv[t[0]][0]],
            [uv[t[1]][1] - uv[t[0]][1], uv[t[2]][1] - uv[t[0]][1]],
        ];
        // per face, f maps the edge vectors e_k to the uv edges
        let (_, m_fd) = jacobian_of_f(&jface, &duv).unwrap();
        let c = [
            (uv[t[0]][0] + uv[t[1]][0] + uv[t[2]][0]) / 3.0,
            (uv[t[0]][1] + uv[t[1]][1] + uv[t[2]][1]) / 3.0,
        ];
        let (_, jphi) = SurfaceMap::Analytic(spec).jacobian(c).unwrap();
        let m = jacobian_of_param(&jphi, &eye).unwrap();
        let (a, b) = (dirichlet_density(&m, 0.01), dirichlet_density(&m_fd, 0.01));
        assert!((a - b).abs() < 1e-2 * a, "{a} vs {b}");
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[test]
fn normals() {
    assert_eq!(estimate_normal(&[[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]).unwrap(), [0.0, 0.0, 1.0]);
    assert_eq!(estimate_normal(&[[0.0, 1.0], [1.0, 0.0], [0.0, 0.0]]).unwrap(), [0.0, 0.0, -1.0]);
    assert_eq!(
        estimate_normal(&[[1.0, 2.0], [0.0, 0.0], [0.0, 0.0]]),
        Err(CompositionError::DegenerateNormal)
    );
    let (_, j) = SurfaceMap::Analytic(AnalyticSurface::Hemisphere { radius: 1.0 })
        .jacobian([0.5, 0.5])
        .unwrap();
    let n = estimate_normal(&j).unwrap();
    assert!((n[2] - 1.0).abs() < 1e-9);
}

fn rotate(p: [f64; 2], angle: f64) -> [f64; 2] {
    rotate_about(&rotation_matrix(angle), [0.5, 0.5], p)
}

#[test]
fn landmark_rotation_examples() {
    let p = [[0.1, 0.2], [0.8, 0.3], [0.4, 0.9]];
    let fit = landmark_rotation(&p, &p).unwrap();
    assert_eq!(fit.matrix, [[1.0, -0.0], [0.0, 1.0]]);
    let q: Vec<_> = p.iter().map(|x| rotate(*x, FRAC_PI_2)).collect();
    let fit = landmark_rotation(&p, &q).unwrap();
    let r = rotation_matrix(FRAC_PI_2);
    for a in 0..2 {
        for b in 0..2 {
            assert!((fit.matrix[a][b] - r[a][b]).abs() < 1e-9);
        }
    }
    let single = landmark_rotation(&p[..1], &q[..1]).unwrap();
    assert_eq!(single.angle, 0.0);
    assert!(single.warning.is_some());
}

#[test]
fn landmark_rotation_matches_angle_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..5 {
        let truth = rng.random_range(-PI..PI);
        let p: Vec<[f64; 2]> = (0..6).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
        let q: Vec<[f64; 2]> = p
            .iter()
            .map(|x| {
                let y = rotate(*x, truth);
                [y[0] + rng.random_range(-0.05..0.05), y[1] + rng.random_range(-0.05..0.05)]
            })
            .collect();
        let fit = landmark_rotation(&p, &q).unwrap();
        let n = p.len() as f64;
        let pm = p.iter().fold([0.0, 0.0], |a, b| [a[0] + b[0] / n, a[1] + b[1] / n]);
        let qm = q.iter().fold([0.0, 0.0], |a, b| [a[0] + b[0] / n, a[1] + b[1] / n]);
        let cost = |t: f64| {
            let r = rotation_matrix(t);
            p.iter()
                .zip(&q)
                .map(|(a, b)| {
                    let d = [a[0] - pm[0], a[1] - pm[1]];
                    let x = [r[0][0] * d[0] + r[0][1] * d[1], r[1][0] * d[0] + r[1][1] * d[1]];
                    (x[0] - b[0] + qm[0]).powi(2) + (x[1] - b[1] + qm[1]).powi(2)
                })
                .sum::<f64>()
        };
        let steps = (2.0 * PI / 1e-4) as usize;
        let best = (0..steps)
            .map(|i| -PI + i as f64 * 1e-4)
            .min_by(|a, b| cost(*a).total_cmp(&cost(*b)))
            .unwrap();
        let diff = (fit.angle - best + PI).rem_euclid(2.0 * PI) - PI;
        assert!(diff.abs() <= 1e-4, "{} vs {}", fit.angle, best);
        assert!(cost(fit.angle) <= cost(best) + 1e-12);
    }
}

/// Checks `backward` against finite differences of `⟨w, forward(x)⟩`.
fn check_backward(map: &SurfaceMap) {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let len = 5;
    let data: Vec<f64> = (0..3 * len * 2).map(|_| rng.random_range(0.2..0.8)).collect();
    let input = DualBatch::from_data(len, 2, data);
    let w: Vec<f64> = (0..3 * len * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
    let objective = |x: &DualBatch| -> f64 {
        let (y, _) = map.forward(x, false).unwrap();
        y.data().iter().zip(&w).map(|(a, b)| a * b).sum()
    };
    let (_, trace) = map.forward(&input, true).unwrap();
    let adj = map.backward(&trace.unwrap(), &DualBatch::from_data(len, 3, w.clone()));
    for k in 0..input.data().len() {
        let h = 1e-6;
        let mut a = input.clone();
        a.data_mut()[k] += h;
        let mut b = input.clone();
        b.data_mut()[k] -= h;
        let fd = (objective(&a) - objective(&b)) / (2.0 * h);
        let an = adj.data()[k];
        assert!((an - fd).abs() < 1e-6 * fd.abs().max(1.0), "entry {k}: {an} vs {fd}");
    }
}

#[test]
fn surface_backward_matches_finite_differences() {
    check_backward(&SurfaceMap::neural(small_surface(1)).unwrap());
    for spec in [
        AnalyticSurface::Hemisphere { radius: 1.0 },
        AnalyticSurface::Saddle { a: 2.0 },
        AnalyticSurface::TorusPatch {
            major: 2.0,
            minor: 0.7,
            theta_extent: 2.0,
            phi_extent: 3.0,
        },
        AnalyticSurface::CylinderPatch { radius: 0.5, arc: 2.0 },
    ] {
        check_backward(&SurfaceMap::Analytic(spec));
    }
}

#[test]
fn surface_jacobian_agrees_with_batch_forward() {
    let s = SurfaceMap::neural(small_surface(2)).unwrap();
    let pts = [[0.3, 0.4], [0.9, 0.1]];
    let (out, _) = s.forward(&DualBatch::seed_identity(&pts), false).unwrap();
    for (i, p) in pts.iter().enumerate() {
        let (y, j) = s.jacobian(*p).unwrap();
        assert_eq!(out.value(i), &y[..]);
        assert_eq!(out.jacobian::<3>(i), j);
    }
    let wrong = neuralmap::build(&Architecture::warp_default(), 0).unwrap();
    assert_eq!(SurfaceMap::neural(wrong), Err(CompositionError::SurfaceDim(2)));
}

#[test]
fn self_map_push_returns_source_positions() {
    let phi = SurfaceMap::neural(small_surface(3)).unwrap();
    let p = vec![[0.2, 0.3], [0.7, 0.1], [0.5, 0.9]];
    let (handle, warning) = SurfaceMapHandle::new(
        phi.clone(),
        phi.clone(),
        identity_warp(),
        p.clone(),
        p.clone(),
        Domain::UnitSquare,
        true,
    )
    .unwrap();
    assert!(warning.is_none());
    let pushed = handle.push_mesh_through(&p);
    assert!(pushed.out_of_domain.is_empty());
    for (x, q) in pushed.positions.iter().zip(&p) {
        assert_eq!(*x, phi.evaluate_point(*q));
    }
    // corners pinned: h(0,0) = (0,0) for the identity warp
    let (inputs, targets) = handle.pins();
    assert_eq!(inputs.len(), 7);
    assert_eq!(inputs[3], [0.0, 0.0]);
    assert_eq!(targets[3], [0.0, 0.0]);
    assert_eq!(handle.map_point([0.0, 0.0]), phi.evaluate_point([0.0, 0.0]));
}

#[test]
fn out_of_domain_warps_are_reported() {
    let phi = SurfaceMap::Analytic(AnalyticSurface::Plane);
    let mut warp = identity_warp();
    // shift the output by +0.5 in u through the last bias
    let last = warp.num_layers() - 1;
    warp.layer_mut(last).1[0] = 0.5;
    let (handle, _) =
        SurfaceMapHandle::new(phi.clone(), phi, warp, vec![], vec![], Domain::UnitSquare, false).unwrap();
    let pushed = handle.push_mesh_through(&[[0.1, 0.5], [0.9, 0.5]]);
    assert_eq!(pushed.out_of_domain, vec![1]);
    assert_eq!(pushed.positions[1], [1.4, 0.5, 0.0]);
}

#[test]
fn collection_cycles_are_exact() {
    let surfaces = vec![
        SurfaceMap::Analytic(AnalyticSurface::Plane),
        SurfaceMap::Analytic(AnalyticSurface::Hemisphere { radius: 1.0 }),
        SurfaceMap::neural(small_surface(4)).unwrap(),
    ];
    let warp_arch = Architecture {
        activation: Activation::Softplus,
        output_scale: 0.05,
        ..Architecture::warp_default()
    };
    let warps: Vec<NeuralMap> = (0..3).map(|s| neuralmap::build(&warp_arch, 40 + s).unwrap()).collect();
    let kp = vec![vec![[0.5, 0.5]], vec![[0.4, 0.6]], vec![[0.6, 0.5]]];
    let c = CollectionHandle::new(surfaces, warps, kp, Domain::UnitSquare, true).unwrap();
    assert_eq!(c.anchors, vec![[0.5, 0.5 + 0.1 / 3.0]]);
    assert_eq!(c.ordered_pairs().len(), 6);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..1000 {
        let q = [rng.random::<f64>(), rng.random::<f64>()];
        let route = c.route(q, &[0, 1, 2, 0]);
        assert_eq!(route[0], route[3]);
        // i→k directly equals i→j→k
        assert_eq!(c.route(q, &[0, 2])[1], route[2]);
    }
    let (inputs, targets) = c.pins(1);
    assert_eq!(inputs.len(), 5);
    assert_eq!(targets[0], [0.4, 0.6]);
    assert!(matches!(
        CollectionHandle::new(vec![SurfaceMap::Analytic(AnalyticSurface::Plane)], vec![identity_warp()], vec![vec![]], Domain::UnitSquare, false),
        Err(CompositionError::TooFewSurfaces(1))
    ));
}
