use num_complex::Complex64 as C64;
use proptest::prelude::*;
use quantlab::bundle::build_bundle;
use quantlab::geometry::*;
use quantlab::hyperplane::*;
use quantlab::sampling::low_discrepancy;
use quantlab::spectral::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn band(m: &ManifoldModel, k: u32) -> SpectralBand {
    exact_band(&build_bundle(m, k as i64).unwrap()).unwrap()
}

fn perturbed() -> ManifoldModel {
    ManifoldModel::perturbed_sphere(vec![(Harmonic::Z2, 0.15), (Harmonic::Xy, 0.03), (Harmonic::X, 0.03)]).unwrap()
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re, im)
        })
        .collect()
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn unit(v: &[C64]) -> Vec<C64> {
    let n = dot(v, v).re.sqrt();
    v.iter().map(|x| x / n).collect()
}

/// Orthonormal (state, plane) pair with state = e₀ and plane = e₁ after a unitary mix.
fn frame(n: usize, seed: u64) -> (Vec<C64>, Vec<C64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = unit(&gaussian(&mut rng, n));
    let mut p = gaussian(&mut rng, n);
    let c = dot(&s, &p);
    p.iter_mut().zip(&s).for_each(|(x, y)| *x -= y * c);
    (s, unit(&p))
}

#[test]
fn vartheta_extremes() {
    let (s, p) = frame(6, 1);
    assert!((vartheta(std::slice::from_ref(&p), &p).unwrap() - 1.0).abs() < 1e-14);
    assert!(vartheta(std::slice::from_ref(&p), &s).unwrap() < 1e-28);
    let mix: Vec<C64> = p.iter().zip(&s).map(|(a, b)| a * 0.6 + b * C64::new(0.0, 0.8)).collect();
    assert!((vartheta(std::slice::from_ref(&p), &mix).unwrap() - 0.36).abs() < 1e-14);
    assert!(vartheta(&[vec![C64::new(0.0, 0.0); 6]], &p).is_err());
    assert!(Hyperplane::new(3, vec![C64::new(0.0, 0.0); 4]).is_err());
}

#[test]
fn conditional_law_matches_rejection_sampling() {
    let n = 5;
    let (s, p) = frame(n, 2);
    let floor = 0.3;
    let draws = 20000;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let direct: f64 =
        (0..draws).map(|_| vartheta(std::slice::from_ref(&p), &conditioned_normal(&s, &p, floor, &mut rng).unwrap()).unwrap()).sum::<f64>() / draws as f64;
    // Rejection: uniform unit vectors orthogonal to the state, kept when ϑ ≥ floor.
    let mut kept = Vec::new();
    while kept.len() < draws {
        let mut w = gaussian(&mut rng, n);
        let c = dot(&s, &w);
        w.iter_mut().zip(&s).for_each(|(x, y)| *x -= y * c);
        let th = vartheta(std::slice::from_ref(&p), &w).unwrap();
        if th >= floor {
            kept.push(th);
        }
    }
    let reject = kept.iter().sum::<f64>() / draws as f64;
    let closed = 1.0 - (1.0 - floor) * (n - 2) as f64 / (n - 1) as f64;
    assert!((direct - closed).abs() < 0.01, "{direct} vs {closed}");
    assert!((reject - closed).abs() < 0.01, "{reject} vs {closed}");
}

#[test]
fn kahler_sections_have_no_antilinear_part() {
    for m in [ManifoldModel::round_sphere(), perturbed()] {
        let b = band(&m, 10);
        let pts = low_discrepancy(&m, 4, 4);
        let r = sample_sections(&b, &pts, 25, 0.1, 7).unwrap();
        assert_eq!(r.rows.len(), 100);
        assert_eq!(r.fraction_ok, 1.0);
        assert!(r.det_agrees);
        for row in &r.rows {
            assert!(row.vartheta >= 0.1 - 1e-12 && row.vartheta <= 1.0 + 1e-12);
            assert!(row.a_minus_sq <= 1e-12 * row.a_plus_sq);
            // det A = |A⁺|² − |A⁻|² for the real 2×2 map in a unitary frame.
            assert!((row.det - (row.a_plus_sq - row.a_minus_sq)).abs() <= 1e-8 * row.a_plus_sq);
        }
    }
}

#[test]
fn sampling_is_deterministic_and_validates_floor() {
    let m = ManifoldModel::round_sphere();
    let b = band(&m, 6);
    let pts = low_discrepancy(&m, 2, 5);
    let a = sample_sections(&b, &pts, 5, 0.2, 99).unwrap();
    let c = sample_sections(&b, &pts, 5, 0.2, 99).unwrap();
    assert_eq!(a.rows, c.rows);
    let d = sample_sections(&b, &pts, 5, 0.2, 100).unwrap();
    assert_ne!(a.rows, d.rows);
    assert!(sample_sections(&b, &pts, 5, 1.0, 1).is_err());
    assert!(sample_sections(&b, &pts, 5, -0.1, 1).is_err());
    assert!(a.to_csv().starts_with("x_id,trial,vartheta,a_plus_sq,a_minus_sq,symplectic_ok\n"));
    assert_eq!(a.to_csv().lines().count(), 11);
}

#[test]
fn tiny_band_has_no_complement() {
    let (s, p) = frame(2, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(conditioned_normal(&s, &p, 0.1, &mut rng).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conditioned_normal_contract(seed in 0u64..10_000, floor in 0.0f64..0.99, n in 3usize..12) {
        let (s, p) = frame(n, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let w = conditioned_normal(&s, &p, floor, &mut rng).unwrap();
        prop_assert!((dot(&w, &w).re - 1.0).abs() < 1e-12);
        prop_assert!(dot(&s, &w).norm() < 1e-12);
        let th = vartheta(std::slice::from_ref(&p), &w).unwrap();
        prop_assert!(th >= floor - 1e-12 && th <= 1.0 + 1e-12);
    }
}
