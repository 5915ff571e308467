use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::PLMap;

/// Size of the training pool drawn from a mesh.
pub const DEFAULT_SAMPLE_COUNT: usize = 500_000;

/// A domain point with the ground-truth surface data at it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DomainSample {
    pub p: [f64; 2],
    pub position: [f64; 3],
    pub normal: [f64; 3],
    pub face: usize,
    pub bary: [f64; 3],
}

/// Draws `count` samples uniformly by surface area and carries them to the
/// domain through the embedding.
pub fn sample_domain(plmap: &PLMap, count: usize, seed: u64) -> Vec<DomainSample> {
    let mesh = plmap.mesh();
    let areas: Vec<f64> = (0..mesh.faces().len()).map(|f| mesh.face_area(f)).collect();
    let pick = WeightedIndex::new(&areas).expect("validated meshes have positive face areas");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uv = plmap.uv();
    (0..count)
        .map(|_| {
            let face = pick.sample(&mut rng);
            let r1 = rng.random::<f64>().sqrt();
            let r2 = rng.random::<f64>();
            let bary = [1.0 - r1, r1 * (1.0 - r2), r1 * r2];
            sample_at(plmap, face, bary, uv)
        })
        .collect()
}

pub(crate) fn sample_at(plmap: &PLMap, face: usize, bary: [f64; 3], uv: &[[f64; 2]]) -> DomainSample {
    let t = plmap.mesh().faces()[face];
    let p = std::array::from_fn(|k| bary[0] * uv[t[0]][k] + bary[1] * uv[t[1]][k] + bary[2] * uv[t[2]][k]);
    let (position, normal) = plmap.interpolate(face, bary);
    DomainSample {
        p,
        position,
        normal,
        face,
        bary,
    }
}
