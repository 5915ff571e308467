use std::path::PathBuf;

use neuralmaps_core::domain::Domain;
use neuralmaps_core::mesh::{count_flips, load_obj, tutte_embed, MeshError};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

#[test]
fn disk_meshes_load_and_embed_without_flips() {
    for (name, vertices, faces) in [
        ("hemisphere.obj", 547, 1014),
        ("saddle.obj", 289, 512),
        ("cut_icosphere.obj", 162, 319),
        ("quad.obj", 4, 2),
        ("plane.obj", 81, 128),
    ] {
        let mesh = load_obj(data(name)).unwrap();
        assert_eq!((mesh.vertices().len(), mesh.faces().len()), (vertices, faces), "{name}");
        assert_eq!(mesh.euler_characteristic(), 1, "{name}");
        for domain in [Domain::UnitSquare, Domain::UnitDisk] {
            let plmap = tutte_embed(mesh.clone(), domain).unwrap();
            assert_eq!(count_flips(plmap.mesh().faces(), plmap.uv()), 0, "{name}");
            for &v in plmap.mesh().boundary_loop() {
                assert!(domain.signed_distance(plmap.uv()[v]).abs() < 1e-9, "{name}");
            }
        }
    }
}

#[test]
fn loaded_meshes_are_normalized() {
    let mesh = load_obj(data("saddle.obj")).unwrap();
    let (mut lo, mut hi) = ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]);
    for v in mesh.vertices() {
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
fn closed_mesh_is_rejected() {
    let err = load_obj(data("tetrahedron.obj")).unwrap_err();
    assert!(matches!(err, MeshError::Topology(_)), "{err}");
    assert!(err.to_string().contains("no boundary loop"));
}
