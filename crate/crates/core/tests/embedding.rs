use num_complex::Complex64 as C64;
use proptest::prelude::*;
use quantlab::bundle::build_bundle;
use quantlab::embedding::*;
use quantlab::geometry::*;
use quantlab::kernel::coherent_jet;
use quantlab::sampling::low_discrepancy;
use quantlab::spectral::*;

fn perturbed() -> ManifoldModel {
    ManifoldModel::perturbed_sphere(vec![(Harmonic::Z2, 0.15), (Harmonic::Xy, 0.03), (Harmonic::X, 0.03)]).unwrap()
}

fn band(m: &ManifoldModel, k: u32) -> SpectralBand {
    exact_band(&build_bundle(m, k as i64).unwrap()).unwrap()
}

#[test]
fn round_pullback_is_k_times_g_plus_i_omega() {
    let m = ManifoldModel::round_sphere();
    for k in [1u32, 8, 50] {
        let b = band(&m, k);
        for p in low_discrepancy(&m, 20, 1) {
            let r = pullback_h(&b, &p).unwrap();
            // Frame is g-orthonormal with ω(e₁, e₂) = 1.
            let expect = [[C64::new(1.0, 0.0), C64::new(0.0, 1.0)], [C64::new(0.0, -1.0), C64::new(1.0, 0.0)]];
            for i in 0..2 {
                for j in 0..2 {
                    assert!((r.h[i][j] / k as f64 - expect[i][j]).norm() < 1e-10, "{:?}", r.h);
                }
            }
            assert!(symplectic_error(&r, k) < 1e-10 && metric_error(&r, k) < 1e-10);
        }
    }
}

#[test]
fn pullback_structure() {
    let m = perturbed();
    let b = band(&m, 12);
    for p in low_discrepancy(&m, 20, 2) {
        let r = pullback_h(&b, &p).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((r.h[i][j] - r.h[j][i].conj()).norm() < 1e-10 * r.h[0][0].norm());
                assert_eq!(r.g_pull[i][j], r.h[i][j].re);
                assert_eq!(r.omega_pull[i][j], r.h[i][j].im);
            }
        }
        assert!(r.h[0][0].re >= 0.0 && r.h[1][1].re >= 0.0);
    }
}

#[test]
fn pullback_invariant_under_fiber_rotation_and_gauge() {
    let m = perturbed();
    let b0 = build_bundle(&m, 10).unwrap();
    let b1 = b0.clone().with_twist(ObservableField::sphere("chi", 0.0, vec![(Harmonic::Xz, 0.8)]));
    let (e0, e1) = (exact_band(&b0).unwrap(), exact_band(&b1).unwrap());
    for p in low_discrepancy(&m, 10, 3) {
        let mut jet = coherent_jet(&e0, &p).unwrap();
        let r0 = pullback_from_jet(&jet);
        let ph = C64::from_polar(1.0, 0.83);
        jet.psi.iter_mut().for_each(|v| *v *= ph);
        jet.dpsi.iter_mut().for_each(|d| d.iter_mut().for_each(|v| *v *= ph));
        let r1 = pullback_from_jet(&jet);
        let r2 = pullback_h(&e1, &p).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((r0.h[i][j] - r1.h[i][j]).norm() < 1e-10);
                assert!((r0.h[i][j] - r2.h[i][j]).norm() < 1e-8);
            }
        }
    }
}

#[test]
fn perturbed_sup_errors_decay() {
    let m = perturbed();
    let pts = low_discrepancy(&m, 30, 4);
    let bands: Vec<_> = [8u32, 16, 32, 64].iter().map(|&k| band(&m, k)).collect();
    let (s, g) = sup_error(&bands, &pts).unwrap();
    assert!(s.slope <= -0.8 && g.slope <= -0.8, "{} {}", s.slope, g.slope);
    assert!(s.max_error() > 1e-3, "perturbation must be visible");
    assert!(s.scaled_max(1.0).is_finite());
}

#[test]
fn df_norm_is_k_plus_bounded() {
    let m = perturbed();
    let pts = low_discrepancy(&m, 20, 5);
    let mut worst = Vec::new();
    for k in [8u32, 32, 128] {
        let b = band(&m, k);
        let w = pts.iter().map(|p| {
            let r = pullback_h(&b, p).unwrap();
            (r.g_pull[0][0] - k as f64).abs().max((r.g_pull[1][1] - k as f64).abs())
        });
        worst.push(w.fold(0.0, f64::max));
    }
    assert!(worst.iter().all(|&w| w < 2.0), "{worst:?}");
}

#[test]
fn kahler_split_has_vanishing_antiholomorphic_part() {
    for m in [ManifoldModel::round_sphere(), perturbed()] {
        let b = band(&m, 16);
        for p in low_discrepancy(&m, 20, 6) {
            let s = dbar_split(&b, &p).unwrap();
            assert!(s.norm_delbar <= 1e-6 * s.norm_del);
            assert!(s.intertwining <= 1e-12 * s.norm_del.powi(2));
            assert!(s.norm_del.powi(2) / 16.0 > 0.5);
        }
    }
}

#[test]
fn fd_split_antiholomorphic_part_decays() {
    let m = ManifoldModel::round_sphere();
    let pts = low_discrepancy(&m, 10, 7);
    let ratio = |k: u32, c: f64| {
        let b = compute_band(&build_bundle(&m, k as i64).unwrap(), Backend::Fd, c).unwrap();
        pts.iter().map(|p| {
            let s = dbar_split(&b, p).unwrap();
            (s.norm_delbar / s.norm_del).powi(2)
        }).fold(0.0, f64::max)
    };
    let (a, c) = (ratio(4, 0.25), ratio(8, 0.25 * 0.5f64.sqrt()));
    assert!(c < a / 2.0, "{a} → {c}");
}

#[test]
fn fs_distance_closed_form() {
    let m = ManifoldModel::round_sphere();
    let pts = low_discrepancy(&m, 15, 8);
    let k = 12u32;
    let b = band(&m, k);
    for p in &pts {
        assert!(fs_distance(&b, p, p).unwrap() < 1e-7);
        for q in &pts {
            let c = 0.5 * (1.0 + dot3(unit_vector(p), unit_vector(q)));
            let expect = c.powf(0.5 * k as f64).min(1.0).acos();
            assert!((fs_distance(&b, p, q).unwrap() - expect).abs() < 1e-7);
        }
    }
}

#[test]
fn near_diagonal_fs_distance_bounded_below() {
    // At d = k^{−1/2} the profile gives |cos FS| ≈ e^{−1/4}.
    let m = ManifoldModel::round_sphere();
    let p = from_angles(1.2, 0.3);
    let u = Tangent { base: p, components: [1.0, 0.2] };
    for k in [16u32, 64, 128] {
        let q = m.geodesic_point(&p, &u, 1.0 / (k as f64).sqrt()).unwrap();
        let d = fs_distance(&band(&m, k), &p, &q).unwrap();
        assert!(d > 0.6 && d < 0.75, "k = {k}: {d}");
    }
}

#[test]
fn injectivity_scan_round_sphere() {
    let m = ManifoldModel::round_sphere();
    let pairs = separated_pairs(&m, 500, 0.3, 9).unwrap();
    for (p, q) in &pairs {
        assert!(m.geodesic_distance(p, q).unwrap() >= 0.3);
    }
    let r = injectivity_scan(&band(&m, 32), &pairs, 0.3).unwrap();
    assert!(r.collisions.is_empty());
    assert!(r.min_fs > 0.0);
    assert_eq!(r.pairs_checked, 500);
}

#[test]
fn injectivity_rejects_degenerate_separation() {
    let m = ManifoldModel::round_sphere();
    assert!(separated_pairs(&m, 5, 0.0, 1).is_err());
    let pairs = separated_pairs(&m, 5, 0.2, 1).unwrap();
    assert!(injectivity_scan(&band(&m, 4), &pairs, 0.0).is_err());
    assert!(injectivity_scan(&band(&m, 4), &pairs, 3.0).is_err());
}

#[test]
fn acceleration_grows_at_most_linearly() {
    let m = perturbed();
    let p = from_angles(1.0, 0.5);
    let u = Tangent { base: p, components: [0.6, 0.8] };
    let acc: Vec<f64> = [8u32, 16, 32, 64]
        .iter()
        .map(|&k| fs_acceleration(&band(&m, k), &p, &u, 1e-3).unwrap() / k as f64)
        .collect();
    println!("acc/k {acc:?}");
    assert!(acc.iter().all(|a| a.is_finite() && *a >= 0.0));
    assert!(acc[3] <= 1.5 * acc[0], "{acc:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn h_is_positive_on_every_direction(seed in 0u64..500, a in -1.0f64..1.0, c in -1.0f64..1.0) {
        let m = perturbed();
        let p = low_discrepancy(&m, 1, seed)[0];
        let r = pullback_h(&band(&m, 6), &p).unwrap();
        let v = [C64::new(a, 0.0), C64::new(c, 0.0)];
        let q: C64 = (0..2).map(|i| (0..2).map(|j| v[i].conj() * r.h[i][j] * v[j]).sum::<C64>()).sum();
        prop_assert!(q.re >= -1e-12 && q.im.abs() < 1e-10);
    }

    #[test]
    fn fs_is_a_metric(seed in 0u64..500) {
        let m = perturbed();
        let b = band(&m, 5);
        let pts = low_discrepancy(&m, 3, seed);
        let d = |i: usize, j: usize| fs_distance(&b, &pts[i], &pts[j]).unwrap();
        prop_assert!((d(0, 1) - d(1, 0)).abs() < 1e-12);
        prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-12);
    }
}
