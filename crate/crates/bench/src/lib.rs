//! Fixtures shared by the criterion benchmarks in `benches/`.

use rand::Rng;
use upacrl::rng;
use upacrl::Vector;

/// `n` deterministic vectors of norm at most one in `d` dimensions.
pub fn ball_vectors(d: usize, n: usize, seed: u64) -> Vec<Vector> {
    let mut rng = rng::stream(seed, 0, 0);
    (0..n)
        .map(|_| {
            let v = Vector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
            let norm = v.norm().max(1e-12);
            v * (rng.random_range(0.0..1.0) / norm)
        })
        .collect()
}
