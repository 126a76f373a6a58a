//! Deterministic sample sets on the models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::geometry::{from_angles, from_unit_vector, ChartPoint, ManifoldModel, Vec3};

/// Regular grid of n×2n (sphere, poles excluded) or n×n (torus) points.
pub fn uniform_grid(m: &ManifoldModel, n: usize) -> Vec<ChartPoint> {
    let mut out = Vec::new();
    if m.is_sphere() {
        for i in 0..n {
            let theta = PI * (i as f64 + 0.5) / n as f64;
            for j in 0..2 * n {
                out.push(from_angles(theta, PI * j as f64 / n as f64));
            }
        }
    } else {
        let [l1, l2] = m.periods;
        for i in 0..n {
            for j in 0..n {
                out.push(m.torus_point(l1 * i as f64 / n as f64, l2 * j as f64 / n as f64));
            }
        }
    }
    out
}

/// Low-discrepancy points: a Fibonacci lattice under a seeded rotation
/// (sphere) or a seeded Kronecker sequence (torus).
pub fn low_discrepancy(m: &ManifoldModel, count: usize, seed: u64) -> Vec<ChartPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    if m.is_sphere() {
        let rot = random_rotation(&mut rng);
        (0..count)
            .map(|i| {
                let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
                let r = (1.0 - z * z).sqrt();
                let phi = 2.0 * PI * i as f64 / golden;
                let p = [r * phi.cos(), r * phi.sin(), z];
                from_unit_vector(apply(&rot, p))
            })
            .collect()
    } else {
        let [l1, l2] = m.periods;
        let (a1, a2) = (1.0 / 1.324_717_957_244_746, 1.0 / (1.324_717_957_244_746 * 1.324_717_957_244_746));
        let (o1, o2): (f64, f64) = (rng.gen(), rng.gen());
        (0..count)
            .map(|i| m.torus_point(l1 * (o1 + a1 * i as f64).fract(), l2 * (o2 + a2 * i as f64).fract()))
            .collect()
    }
}

/// Uniformly distributed random point (uniform in the round / flat area).
pub fn random_point<R: Rng>(m: &ManifoldModel, rng: &mut R) -> ChartPoint {
    if m.is_sphere() {
        let z: f64 = rng.gen_range(-1.0..1.0);
        let phi: f64 = rng.gen_range(0.0..2.0 * PI);
        from_angles(z.acos(), phi)
    } else {
        m.torus_point(rng.gen_range(0.0..m.periods[0]), rng.gen_range(0.0..m.periods[1]))
    }
}

fn random_rotation<R: Rng>(rng: &mut R) -> [[f64; 3]; 3] {
    // Uniform unit quaternion.
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (w, x, y, z) = (a * (2.0 * PI * u2).sin(), a * (2.0 * PI * u2).cos(), b * (2.0 * PI * u3).sin(), b * (2.0 * PI * u3).cos());
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

fn apply(r: &[[f64; 3]; 3], p: Vec3) -> Vec3 {
    std::array::from_fn(|i| r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2])
}
