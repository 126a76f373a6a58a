use quantlab::geometry::*;
use quantlab::quadrature::*;
use std::f64::consts::PI;

/// ∫_0^π cos^m θ sin θ dθ.
fn moment(m: i32) -> f64 {
    if m % 2 == 1 { 0.0 } else { 2.0 / (m as f64 + 1.0) }
}

#[test]
fn gauss_legendre_is_exact_to_degree_2n_minus_1() {
    for n in [1usize, 2, 5, 12, 40] {
        let (x, w) = gauss_legendre(n);
        for d in 0..2 * n as i32 {
            let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(d)).sum();
            assert!((q - moment(d)).abs() < 1e-13, "n = {n}, degree {d}");
        }
    }
    let r = gauss_legendre_on(6, 1.0, 3.0);
    let q: f64 = r.iter().map(|(x, w)| w * x.powi(5)).sum();
    assert!((q - (3f64.powi(6) - 1.0) / 6.0).abs() < 1e-11);
}

#[test]
fn fejer_integrates_polynomials_in_cos() {
    for n in [4usize, 9, 32] {
        let w = fejer_weights(n);
        for d in 0..n as i32 {
            let q: f64 = w.iter().enumerate().map(|(j, wj)| wj * (PI * (j as f64 + 0.5) / n as f64).cos().powi(d)).sum();
            assert!((q - moment(d)).abs() < 1e-13, "n = {n}, degree {d}");
        }
    }
}

#[test]
fn clenshaw_curtis_integrates_polynomials_in_cos() {
    for n in [4usize, 10, 32] {
        let w = clenshaw_curtis_weights(n);
        assert_eq!(w.len(), n + 1);
        for d in 0..=n as i32 {
            let q: f64 = w.iter().enumerate().map(|(t, wt)| wt * (PI * t as f64 / n as f64).cos().powi(d)).sum();
            assert!((q - moment(d)).abs() < 1e-13, "n = {n}, degree {d}");
        }
    }
}

#[test]
fn area_quadrature_totals() {
    let models = [
        ManifoldModel::round_sphere(),
        ManifoldModel::perturbed_sphere(vec![(Harmonic::Z2, 0.15), (Harmonic::X, 0.03)]).unwrap(),
        ManifoldModel::flat_torus(1.0, 2.5).unwrap(),
    ];
    for m in models {
        let q = AreaQuadrature::new(&m, 24, 48);
        assert_eq!(q.len(), 24 * 48);
        assert!(!q.is_empty());
        assert!((q.weights.iter().sum::<f64>() - 2.0 * PI).abs() < 1e-12);
    }
}

#[test]
fn sphere_quadrature_integrates_harmonics_to_zero() {
    let m = ManifoldModel::round_sphere();
    let q = AreaQuadrature::new(&m, 10, 20);
    for h in Harmonic::ALL {
        let s: f64 = q.points.iter().zip(&q.weights).map(|(x, w)| w * h.eval(unit_vector(x))).sum();
        assert!(s.abs() < 1e-13, "{h:?}");
    }
    // ∫ Z² dA = 2π/3.
    let z2: f64 = q.points.iter().zip(&q.weights).map(|(x, w)| w * unit_vector(x)[2].powi(2)).sum();
    assert!((z2 - 2.0 * PI / 3.0).abs() < 1e-13);
}
