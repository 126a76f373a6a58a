use num_complex::Complex64 as C64;
use quantlab::bundle::*;
use quantlab::geometry::*;
use quantlab::grid::{SectionGrid, DEFAULT_RESOLUTION};
use quantlab::linalg::{identity_defect, subspace_angles, CMat};
use quantlab::quadrature::AreaQuadrature;
use quantlab::spectral::*;
use quantlab::Error;
use std::f64::consts::PI;

fn perturbed() -> ManifoldModel {
    ManifoldModel::perturbed_sphere(vec![(Harmonic::Z2, 0.15), (Harmonic::Xy, 0.03), (Harmonic::X, 0.03)]).unwrap()
}

fn torus() -> ManifoldModel {
    ManifoldModel::flat_torus(2.0, 3.0).unwrap()
}

fn opts(count: usize) -> EigenOptions {
    EigenOptions { count, tight: count, tight_tol: TIGHT_TOL, loose_tol: LOOSE_TOL, shift: -1.0 }
}

/// Gram matrix of band values under an independent quadrature.
fn gram(band: &SpectralBand, q: &AreaQuadrature) -> CMat {
    let vals: Vec<Vec<C64>> = q.points.iter().map(|x| band.values(x).unwrap()).collect();
    let n = band.dim();
    CMat::from_fn(n, n, |i, j| q.weights.iter().zip(&vals).map(|(w, v)| v[i].conj() * v[j] * *w).sum())
}

/// Worst relative error of the lowest nine k = 0 eigenvalues against l(l+1)/r².
fn k0_spectrum_error(n: usize) -> f64 {
    let b = build_bundle(&ManifoldModel::round_sphere(), 0).unwrap();
    let lap = assemble_laplacian(&b, &SectionGrid::lat_lon(n).unwrap()).unwrap();
    assert!(lap.asymmetry() <= 1e-10);
    let p = lowest_eigenpairs(&lap, &opts(9)).unwrap();
    let expect = [0.0, 4.0, 4.0, 4.0, 12.0, 12.0, 12.0, 12.0, 12.0];
    p.values.iter().zip(expect).map(|(v, e)| (v - e).abs() / e.max(1.0)).fold(0.0, f64::max)
}

#[test]
fn round_sphere_k0_spectrum_is_l_l_plus_1_over_r2() {
    // Second-order scheme: halving h quarters the error.
    let (e1, e2) = (k0_spectrum_error(32), k0_spectrum_error(64));
    assert!(e2 < e1 / 3.5 && e2 > e1 / 4.5, "{e1} → {e2}");
    assert!(e2 < 2e-3, "{e2}");
}

#[test]
fn torus_k0_spectrum_is_fourier() {
    let m = torus();
    let b = build_bundle(&m, 0).unwrap();
    let lap = assemble_laplacian(&b, &SectionGrid::torus(24, 36).unwrap()).unwrap();
    let p = lowest_eigenpairs(&lap, &opts(7)).unwrap();
    // |2π(m/L1, n/L2)|² in coordinates, divided by the density c.
    let c = m.flux_density();
    let mut expect: Vec<f64> = Vec::new();
    for a in -2i32..=2 {
        for n in -2i32..=2 {
            expect.push(((2.0 * PI * a as f64 / 2.0).powi(2) + (2.0 * PI * n as f64 / 3.0).powi(2)) / c);
        }
    }
    expect.sort_by(f64::total_cmp);
    for (v, e) in p.values.iter().zip(&expect) {
        assert!((v - e).abs() < 1e-4 * e.max(1.0), "{v} vs {e}");
    }
}

/// Relative defects of ⟨Δs, s⟩ against k‖s‖² and against ‖∇s‖² for a
/// holomorphic section (Δ_k s = k s), where
/// ‖∇s‖² = ∫ |∇_θ s|²/r² + |∇_φ s|²/(r² sin²θ).
fn dirichlet_defects(n: usize) -> (f64, f64) {
    let k = 4;
    let b = build_bundle(&ManifoldModel::round_sphere(), k).unwrap();
    let g = SectionGrid::lat_lon(n).unwrap();
    let lap = assemble_laplacian(&b, &g).unwrap();
    let s = DiscreteSection::from_fn(&b, &g, |x| monopole_section(&b, 1, x));
    let e = lap.dirichlet_energy(&s).unwrap();
    let norm = l2_inner_product(&b, &s, &s).unwrap().re;
    let dt = axis_derivative(&b, &s, 0).unwrap();
    let dp = axis_derivative(&b, &s, 1).unwrap();
    let mass = g.mass(&b.model);
    let mut grad = 0.0;
    for i in 0..g.len() {
        let th = spherical_angles(&g.node_point(&b.model, i)).0;
        grad += mass[i] * (dt.values[i].norm_sqr() + dp.values[i].norm_sqr() / th.sin().powi(2)) / 0.5;
    }
    ((e - k as f64 * norm).abs() / e, (grad - e).abs() / e)
}

#[test]
fn dirichlet_form_matches_gradient_norm() {
    let ((a1, g1), (a2, g2)) = (dirichlet_defects(48), dirichlet_defects(96));
    assert!(a2 < a1 / 3.5 && a2 < 1e-3, "{a1} → {a2}");
    assert!(g2 < g1 / 3.5 && g2 < 1e-3, "{g1} → {g2}");
}

#[test]
fn exact_band_dimensions_and_orthonormality() {
    for k in [2u32, 5, 16, 64] {
        let band = exact_sphere_band(k).unwrap();
        assert_eq!(band.dim(), k as usize + 1);
        assert_eq!(band.dim(), riemann_roch(&band.bundle.model, k));
        assert!(band.eigenvalues.iter().all(|&v| v == 0.0));
        assert_eq!(band.gap.next, Some(2.0 * k as f64 + 4.0));
        let q = AreaQuadrature::new(&band.bundle.model, k as usize + 40, 2 * k as usize + 60);
        assert!(identity_defect(&gram(&band, &q)) < 1e-10);
    }
    let b = build_bundle(&perturbed(), 12).unwrap();
    let band = exact_band(&b).unwrap();
    let q = AreaQuadrature::new(&b.model, 90, 180);
    assert!(identity_defect(&gram(&band, &q)) < 1e-8);
}

#[test]
fn round_log_norms_are_beta_integrals() {
    let k = 7u32;
    let f = |n: u32| (1..=n).map(|i| i as f64).product::<f64>();
    for (a, l) in round_log_norms(k).iter().enumerate() {
        let a = a as u32;
        let expect = (2.0 * PI * f(a) * f(k - a) / f(k + 1)).sqrt().ln();
        assert!((l - expect).abs() < 1e-13);
    }
}

#[test]
fn exact_band_is_holomorphic_and_in_the_kernel_of_b() {
    // Sampled onto a fine grid, each exact section has ⟨ℬs, s⟩ ≈ 0.
    let m = perturbed();
    let b = build_bundle(&m, 6).unwrap();
    let band = exact_band(&b).unwrap();
    // The Rayleigh quotient defect converges at the scheme order.
    let defect = |n: usize| {
        let g = SectionGrid::lat_lon(n).unwrap();
        let lap = assemble_laplacian(&b, &g).unwrap();
        band.sections_on(&g)
            .unwrap()
            .iter()
            .map(|s| {
                let e = lap.dirichlet_energy(s).unwrap();
                let n = l2_inner_product(&b, s, s).unwrap().re;
                (e / n - 6.0 * HALF_DIM as f64).abs()
            })
            .fold(0.0, f64::max)
    };
    let (d1, d2) = (defect(48), defect(96));
    assert!(d2 < d1 / 3.5 && d2 < 3e-3, "{d1} → {d2}");
    for x in quantlab::sampling::low_discrepancy(&m, 10, 2) {
        let j = band.jet(&x).unwrap();
        for (dx, dy) in j.dx.iter().zip(&j.dy) {
            assert!((dy - C64::new(0.0, 1.0) * dx).norm() <= 1e-12 * dx.norm().max(1e-300));
        }
    }
}

#[test]
fn exact_band_gauge_invariant() {
    let m = perturbed();
    let chi = ObservableField::sphere("chi", 0.0, vec![(Harmonic::Xz, 0.7), (Harmonic::Y, -0.4)]);
    let b0 = build_bundle(&m, 9).unwrap();
    let b1 = b0.clone().with_twist(chi);
    let (a, c) = (exact_band(&b0).unwrap(), exact_band(&b1).unwrap());
    let q = AreaQuadrature::new(&m, 60, 120);
    // Untwisted sections carried to the twisted gauge, against the twisted band.
    let n = a.dim();
    let rows = q.points.len();
    let va = CMat::from_fn(rows, n, |r, j| a.values(&q.points[r]).unwrap()[j] * b1.twist_factor(&q.points[r]));
    let vc = CMat::from_fn(rows, n, |r, j| c.values(&q.points[r]).unwrap()[j]);
    let ang = subspace_angles(&vc, &va, &q.weights).unwrap();
    assert!(ang.iter().all(|&t| t <= 1e-8), "{ang:?}");
}

#[test]
fn fd_band_gauge_invariant() {
    let m = ManifoldModel::round_sphere();
    let chi = ObservableField::sphere("chi", 0.0, vec![(Harmonic::Xz, 0.5)]);
    let b0 = build_bundle(&m, 4).unwrap();
    let b1 = b0.clone().with_twist(chi);
    let g = SectionGrid::for_resolution(&m, 4, 0.25);
    let e0 = lowest_band(&assemble_laplacian(&b0, &g).unwrap()).unwrap();
    let e1 = lowest_band(&assemble_laplacian(&b1, &g).unwrap()).unwrap();
    assert_eq!(e0.dim(), e1.dim());
    for (u, v) in e0.eigenvalues.iter().zip(&e1.eigenvalues) {
        assert!((u - v).abs() < 1e-6, "{u} vs {v}");
    }
}

#[test]
fn fd_sphere_band_matches_exact() {
    for k in [2u32, 8] {
        let b = build_bundle(&ManifoldModel::round_sphere(), k as i64).unwrap();
        let fd = compute_band(&b, Backend::Fd, DEFAULT_RESOLUTION).unwrap();
        assert_eq!(fd.dim(), k as usize + 1);
        assert!(fd.eigenvalues.iter().all(|v| v.abs() < 0.05));
        let next = fd.gap.next.unwrap();
        assert!((next - (2.0 * k as f64 + 4.0)).abs() < 0.05 * next);
        let ang = band_angles(&fd, &exact_band(&b).unwrap()).unwrap();
        assert!(ang.iter().all(|&t| t <= 1e-3), "{ang:?}");
        if let BandBasis::Grid { grid, vectors } = &fd.basis {
            let mass = grid.mass(&b.model);
            let n = vectors.len();
            let g = CMat::from_fn(n, n, |i, j| vectors[i].iter().zip(&vectors[j]).zip(&mass).map(|((a, c), w)| a.conj() * c * *w).sum());
            assert!(identity_defect(&g) < 1e-8);
        } else {
            panic!("fd backend must return grid vectors");
        }
    }
}

#[test]
fn torus_k8_band_has_dimension_8() {
    let b = build_bundle(&torus(), 8).unwrap();
    let band = compute_band(&b, Backend::Fd, 0.25).unwrap();
    assert_eq!(band.dim(), 8);
    // Landau levels of ℬ_k sit at 2k·level.
    assert!((band.gap.next.unwrap() - 16.0).abs() < 0.05);
}

#[test]
fn coarse_grid_reports_no_gap() {
    let b = build_bundle(&ManifoldModel::round_sphere(), 160).unwrap();
    let lap = assemble_laplacian(&b, &SectionGrid::lat_lon(16).unwrap()).unwrap();
    match lowest_band(&lap) {
        Err(Error::NoGapFound { .. }) => {}
        Ok(band) => panic!("coarse grid produced a band of dimension {}", band.dim()),
        Err(e) => panic!("unexpected error {e}"),
    }
}

#[test]
fn largest_gap_and_gap_report() {
    assert_eq!(largest_gap(&[0.0, 0.1, 0.2, 9.0, 9.5]), Some((2, 9.0)));
    assert_eq!(largest_gap(&[1.0]), None);
    let bands: Vec<_> = [4u32, 8, 16].iter().map(|&k| exact_sphere_band(k).unwrap()).collect();
    let r = gap_report(&bands).unwrap();
    assert_eq!(r.c1, 0.0);
    assert_eq!(r.dims, vec![(4, 5), (8, 9), (16, 17)]);
    assert!((r.c2 - 2.0).abs() < 0.5);
    assert!(gap_report(&bands[..2]).is_err());
}

#[test]
fn eigensolver_argument_checks() {
    let b = build_bundle(&ManifoldModel::round_sphere(), 1).unwrap();
    let lap = assemble_laplacian(&b, &SectionGrid::lat_lon(16).unwrap()).unwrap();
    assert!(lowest_eigenpairs(&lap, &opts(0)).is_err());
    assert!(lowest_eigenpairs(&lap, &opts(lap.len())).is_err());
    let p = lowest_eigenpairs(&lap, &opts(4)).unwrap();
    for (r, v) in p.residuals.iter().zip(&p.values) {
        assert!(*r <= TIGHT_TOL * v.abs().max(1.0));
    }
    assert!(p.values.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn weyl_estimate_brackets_dimension() {
    for m in [ManifoldModel::round_sphere(), torus()] {
        for k in [3u32, 10, 40] {
            let rr = riemann_roch(&m, k);
            let est = dimension_estimate(&m, k);
            assert!(est >= rr && est <= rr + 1);
        }
    }
}
