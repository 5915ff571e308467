use super::primitives::{self, to_obj_string};
use super::*;
use crate::domain::Domain;

fn raw_to_mesh(raw: primitives::RawMesh) -> TriMesh {
    TriMesh::new(raw.0, raw.1, None).unwrap().normalized()
}

#[test]
fn quad_patch_from_obj() {
    let m = parse_obj(&to_obj_string(&primitives::quad())).unwrap();
    assert_eq!(m.vertices().len(), 4);
    assert_eq!(m.faces().len(), 2);
    assert_eq!(m.boundary_loop().len(), 4);
    assert_eq!(m.boundary_loop()[0], 0);
}

#[test]
fn obj_polygons_are_fan_triangulated_and_normals_read() {
    let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 4//1\n";
    let m = parse_obj(text).unwrap();
    assert_eq!(m.faces().len(), 2);
    assert!(m.normals().iter().all(|n| *n == [0.0, 0.0, 1.0]));
}

#[test]
fn load_rescales_to_unit_diagonal() {
    let m = parse_obj(&to_obj_string(&primitives::hemisphere(4))).unwrap();
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for v in m.vertices() {
        for k in 0..3 {
            lo[k] = lo[k].min(v[k]);
            hi[k] = hi[k].max(v[k]);
        }
    }
    let diag: f64 = (0..3).map(|k| (hi[k] - lo[k]).powi(2)).sum::<f64>().sqrt();
    assert!((diag - 1.0).abs() < 1e-12);
    for k in 0..3 {
        assert!((lo[k] + hi[k]).abs() < 1e-12);
    }
}

#[test]
fn closed_tetrahedron_has_no_boundary() {
    let err = parse_obj(&to_obj_string(&primitives::tetrahedron())).unwrap_err();
    assert!(matches!(err, MeshError::Topology(TopologyError::NoBoundary)));
    assert!(err.to_string().contains("no boundary loop"));
}

#[test]
fn cut_icosphere_is_a_disk() {
    let raw = primitives::cut_icosphere(1);
    let m = TriMesh::new(raw.0, raw.1, None).unwrap();
    // V - E + F = 1 for a disk
    assert_eq!(m.euler_characteristic(), 1);
    assert_eq!(m.boundary_loop().len(), 3);
    // outward orientation: normals agree with radial direction
    for (v, n) in m.vertices().iter().zip(m.normals()) {
        assert!(v[0] * n[0] + v[1] * n[1] + v[2] * n[2] > 0.9);
    }
}

#[test]
fn topology_violations_are_named() {
    // two disjoint triangles
    let v = vec![
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [5.0, 0.0, 0.0],
        [6.0, 0.0, 0.0],
        [5.0, 1.0, 0.0],
    ];
    let err = TriMesh::new(v.clone(), vec![[0, 1, 2], [3, 4, 5]], None).unwrap_err();
    assert!(matches!(err, MeshError::Topology(TopologyError::MultipleComponents(2))));

    // three faces on one edge
    let v3 = vec![
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.5, 1.0, 0.0],
        [0.5, -1.0, 0.0],
        [0.5, 0.0, 1.0],
    ];
    let err = TriMesh::new(v3, vec![[0, 1, 2], [1, 0, 3], [1, 0, 4]], None).unwrap_err();
    assert!(matches!(err, MeshError::Topology(TopologyError::NonManifoldEdge(0, 1))));

    // annulus: two boundary loops
    let (mut av, mut af) = (Vec::new(), Vec::new());
    for i in 0..8 {
        let a = 2.0 * std::f64::consts::PI * i as f64 / 8.0;
        av.push([a.cos(), a.sin(), 0.0]);
        av.push([2.0 * a.cos(), 2.0 * a.sin(), 0.0]);
    }
    for i in 0..8 {
        let (a, b) = (2 * i, 2 * ((i + 1) % 8));
        af.push([a, a + 1, b + 1]);
        af.push([a, b + 1, b]);
    }
    let err = TriMesh::new(av, af, None).unwrap_err();
    assert!(matches!(err, MeshError::Topology(TopologyError::MultipleBoundaryLoops(2))));

    let err = TriMesh::new(v, vec![[0, 1, 1]], None).unwrap_err();
    assert!(matches!(err, MeshError::Topology(TopologyError::RepeatedVertex(0))));
}

#[test]
fn degenerate_face_rejected() {
    let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
    assert!(matches!(
        TriMesh::new(v, vec![[0, 1, 2]], None),
        Err(MeshError::DegenerateFace { face: 0, .. })
    ));
}

#[test]
fn parse_failure_is_format_error() {
    assert!(matches!(parse_obj("v 0 0 0\nf 1 2 x\n"), Err(MeshError::Format(_))));
    assert!(matches!(load_obj("/nonexistent/mesh.obj"), Err(MeshError::Io(_))));
}

fn assert_tutte_invariants(map: &PLMap) {
    for f in 0..map.mesh().faces().len() {
        assert!(map.uv_signed_area(f) > 0.0, "face {f} flipped");
    }
    for &b in map.mesh().boundary_loop() {
        let d = map.domain().signed_distance(map.uv()[b]);
        assert!(d.abs() < 1e-9, "boundary vertex {b} off boundary by {d}");
    }
}

#[test]
fn tutte_on_hemisphere_has_no_flips() {
    let mesh = raw_to_mesh(primitives::hemisphere(9));
    assert!(mesh.faces().len() > 450);
    for domain in [Domain::UnitSquare, Domain::UnitDisk] {
        let map = tutte_embed(mesh.clone(), domain).unwrap();
        assert_tutte_invariants(&map);
    }
}

#[test]
fn tutte_on_planar_patch_reproduces_grid() {
    let mesh = raw_to_mesh(primitives::plane_patch(6));
    let map = tutte_embed(mesh, Domain::UnitSquare).unwrap();
    assert_tutte_invariants(&map);
    // uniform weights on a regular grid with equal boundary spacing recover it
    for (v, uv) in map.mesh().vertices().iter().zip(map.uv()) {
        let s = 2f64.sqrt();
        assert!((uv[0] - (v[0] * s + 0.5)).abs() < 1e-9);
        assert!((uv[1] - (v[1] * s + 0.5)).abs() < 1e-9);
    }
}

#[test]
fn single_triangle_lands_on_arc_length_fractions() {
    let v = vec![[0.0, 0.0, 0.0], [3.0, 0.0, 0.0], [0.0, 4.0, 0.0]];
    let mesh = TriMesh::new(v, vec![[0, 1, 2]], None).unwrap();
    let map = tutte_embed(mesh, Domain::UnitSquare).unwrap();
    // perimeter 3 + 5 + 4: fractions 0, 3/12, 8/12
    assert_eq!(map.uv()[0], Domain::UnitSquare.boundary_point(0.0));
    assert_eq!(map.uv()[1], Domain::UnitSquare.boundary_point(0.25));
    let p2 = Domain::UnitSquare.boundary_point(8.0 / 12.0);
    assert!((map.uv()[2][0] - p2[0]).abs() < 1e-12 && (map.uv()[2][1] - p2[1]).abs() < 1e-12);
}

fn unit_triangle_map() -> PLMap {
    let v = vec![[1.0, 2.0, 3.0], [4.0, -1.0, 0.5], [-2.0, 0.0, 1.0]];
    let mesh = TriMesh::new(v, vec![[0, 1, 2]], None).unwrap();
    PLMap::new(mesh, vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], Domain::UnitSquare).unwrap()
}

#[test]
fn barycentric_evaluation() {
    let map = unit_triangle_map();
    let (pos, _) = map.evaluate_pl([0.25, 0.25]).unwrap();
    let v = map.mesh().vertices();
    for k in 0..3 {
        let e = 0.5 * v[0][k] + 0.25 * v[1][k] + 0.25 * v[2][k];
        assert!((pos[k] - e).abs() < 1e-12);
    }
    assert!(matches!(
        map.evaluate_pl([0.9, 0.9]),
        Err(MeshError::OutOfDomain { nearest_face: 0, .. })
    ));
    assert!(matches!(map.evaluate_pl([-3.0, 0.2]), Err(MeshError::OutOfDomain { .. })));
}

#[test]
fn shared_edge_is_continuous() {
    let mesh = raw_to_mesh(primitives::quad());
    let map = tutte_embed(mesh, Domain::UnitSquare).unwrap();
    let p = [0.3, 0.3]; // on the diagonal shared by both faces
    let (pos, _) = map.evaluate_pl(p).unwrap();
    for f in 0..2 {
        let t = map.mesh().faces()[f];
        let uv = map.uv();
        let area = signed_area_2d(uv[t[0]], uv[t[1]], uv[t[2]]);
        let l = [
            signed_area_2d(p, uv[t[1]], uv[t[2]]) / area,
            signed_area_2d(uv[t[0]], p, uv[t[2]]) / area,
            signed_area_2d(uv[t[0]], uv[t[1]], p) / area,
        ];
        let (q, _) = map.interpolate(f, l);
        for k in 0..3 {
            assert!((q[k] - pos[k]).abs() < 1e-12);
        }
    }
    // straddling points within 1e-9 give outputs within 1e-6
    let (a, _) = map.evaluate_pl([0.5 + 1e-9, 0.5 - 1e-9]).unwrap();
    let (b, _) = map.evaluate_pl([0.5 - 1e-9, 0.5 + 1e-9]).unwrap();
    assert!(norm3(sub3(a, b)) < 1e-6);
}

#[test]
fn sampling_statistics_and_reproducibility() {
    let map = unit_triangle_map();
    let s = sample_domain(&map, 10_000, 7);
    let mut mean = [0.0; 3];
    for x in &s {
        let sum: f64 = x.bary.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9 && x.bary.iter().all(|b| *b >= 0.0));
        for k in 0..3 {
            mean[k] += x.bary[k] / s.len() as f64;
        }
    }
    for m in mean {
        assert!((m - 1.0 / 3.0).abs() < 0.01, "{mean:?}");
    }
    assert_eq!(s, sample_domain(&map, 10_000, 7));
    assert_ne!(s[0], sample_domain(&map, 1, 8)[0]);
}

#[test]
fn sample_at_vertex_returns_vertex_data() {
    let mesh = raw_to_mesh(primitives::hemisphere(3));
    let map = tutte_embed(mesh, Domain::UnitSquare).unwrap();
    let s = sampling::sample_at(&map, 5, [1.0, 0.0, 0.0], map.uv());
    let v = map.mesh().faces()[5][0];
    assert_eq!(s.position, map.mesh().vertices()[v]);
    let n = map.mesh().normals()[v];
    for k in 0..3 {
        assert!((s.normal[k] - n[k]).abs() < 1e-12);
    }
    assert_eq!(s.p, map.uv()[v]);
}

#[test]
fn keypoint_preimages() {
    let map = unit_triangle_map();
    assert_eq!(map.keypoint_preimage(Keypoint::Vertex(1)).unwrap(), [1.0, 0.0]);
    assert!(matches!(
        map.keypoint_preimage(Keypoint::Vertex(9)),
        Err(MeshError::InvalidVertex(9))
    ));
    let v = map.mesh().vertices();
    let c: [f64; 3] = std::array::from_fn(|k| (v[0][k] + v[1][k] + v[2][k]) / 3.0);
    let uv = map.keypoint_preimage(Keypoint::Point(c)).unwrap();
    assert!((uv[0] - 1.0 / 3.0).abs() < 1e-12 && (uv[1] - 1.0 / 3.0).abs() < 1e-12);
    let n = map.face_normal(0);
    let off = [c[0] + n[0], c[1] + n[1], c[2] + n[2]];
    assert!(matches!(
        map.keypoint_preimage(Keypoint::Point(off)),
        Err(MeshError::Projection { .. })
    ));
}

#[test]
fn uv_export_round_trips() {
    let mesh = raw_to_mesh(primitives::hemisphere(3));
    let map = tutte_embed(mesh, Domain::UnitSquare).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("uv.obj");
    write_obj_with_uv(&path, map.mesh(), map.uv()).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("vt ")).count(), map.uv().len());
    let back = load_obj(&path).unwrap();
    assert_eq!(back.faces(), map.mesh().faces());
}
