use quantlab::bundle::build_bundle;
use quantlab::cache::*;
use quantlab::geometry::*;
use quantlab::grid::SectionGrid;
use quantlab::spectral::*;
use std::fs;

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn assert_identical(a: &SpectralBand, b: &SpectralBand) {
    assert_eq!(a, b);
    assert_eq!(bits(&a.eigenvalues), bits(&b.eigenvalues));
    assert_eq!(a.gap.top.to_bits(), b.gap.top.to_bits());
}

#[test]
fn exact_bands_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cache = BandCache::new(dir.path().join("bands")).unwrap();
    let m = ManifoldModel::perturbed_sphere(vec![(Harmonic::Z2, 0.15)]).unwrap();
    for b in [build_bundle(&ManifoldModel::round_sphere(), 7).unwrap(), build_bundle(&m, 7).unwrap()] {
        let band = exact_band(&b).unwrap();
        let key = cache_key(&b, Backend::Exact, None);
        cache.store(&key, &band).unwrap();
        assert_identical(&band, &cache.load(&key).unwrap().unwrap());
    }
}

#[test]
fn fd_band_round_trip_and_hit_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cache = BandCache::new(dir.path()).unwrap();
    let b = build_bundle(&ManifoldModel::flat_torus(1.0, 1.0).unwrap(), 3).unwrap();
    let grid = SectionGrid::for_resolution(&b.model, 3, 0.25);
    let key = cache_key(&b, Backend::Fd, Some(&grid));
    let mut calls = 0;
    let (first, hit) = cache
        .get_or_compute(&key, || {
            calls += 1;
            compute_band(&b, Backend::Fd, 0.25)
        })
        .unwrap();
    assert!(!hit);
    let (second, hit) = cache.get_or_compute(&key, || panic!("must not recompute")).unwrap();
    assert!(hit);
    assert_eq!(calls, 1);
    assert_identical(&first, &second);
    assert_eq!(first.dim(), 3);
}

#[test]
fn keys_separate_every_input() {
    let m = ManifoldModel::round_sphere();
    let b = build_bundle(&m, 4).unwrap();
    let k0 = cache_key(&b, Backend::Exact, None);
    assert_eq!(k0, cache_key(&b, Backend::Exact, None));
    assert_eq!(k0.len(), 64);
    let others = [
        cache_key(&build_bundle(&m, 5).unwrap(), Backend::Exact, None),
        cache_key(&b, Backend::Fd, None),
        cache_key(&b, Backend::Fd, Some(&SectionGrid::lat_lon(16).unwrap())),
        cache_key(&b, Backend::Fd, Some(&SectionGrid::lat_lon(18).unwrap())),
        cache_key(&build_bundle(&ManifoldModel::perturbed_sphere(vec![(Harmonic::Z2, 0.1)]).unwrap(), 4).unwrap(), Backend::Exact, None),
        cache_key(&b.clone().with_twist(ObservableField::sphere("chi", 0.0, vec![(Harmonic::X, 1.0)])), Backend::Exact, None),
    ];
    for (i, a) in others.iter().enumerate() {
        assert_ne!(a, &k0);
        for c in &others[i + 1..] {
            assert_ne!(a, c);
        }
    }
}

#[test]
fn missing_and_corrupted_entries() {
    let dir = tempfile::tempdir().unwrap();
    let cache = BandCache::new(dir.path()).unwrap();
    assert!(cache.load("absent").unwrap().is_none());
    let b = build_bundle(&ManifoldModel::round_sphere(), 3).unwrap();
    let key = cache_key(&b, Backend::Exact, None);
    cache.store(&key, &exact_band(&b).unwrap()).unwrap();

    let bin = dir.path().join(format!("{key}.bin"));
    let data = fs::read(&bin).unwrap();
    fs::write(&bin, &data[..data.len() - 8]).unwrap();
    assert!(cache.load(&key).is_err());

    fs::write(&bin, &data).unwrap();
    assert!(cache.load(&key).unwrap().is_some());
    fs::write(dir.path().join(format!("{key}.json")), "{not json").unwrap();
    assert!(cache.load(&key).is_err());

    // A sidecar copied under another key is refused.
    let other = build_bundle(&ManifoldModel::round_sphere(), 4).unwrap();
    let k2 = cache_key(&other, Backend::Exact, None);
    cache.store(&k2, &exact_band(&other).unwrap()).unwrap();
    fs::copy(dir.path().join(format!("{k2}.json")), dir.path().join("renamed.json")).unwrap();
    fs::copy(dir.path().join(format!("{k2}.bin")), dir.path().join("renamed.bin")).unwrap();
    assert!(cache.load("renamed").is_err());
}

#[test]
fn sphere_fd_band_round_trips_bit_for_bit() {
    // Grid spacings such as π/n must survive the JSON sidecar exactly.
    let dir = tempfile::tempdir().unwrap();
    let cache = BandCache::new(dir.path()).unwrap();
    let m = ManifoldModel::round_sphere();
    for (k, c) in [(2u32, 0.1), (8, 0.15)] {
        let b = build_bundle(&m, k as i64).unwrap();
        let grid = SectionGrid::for_resolution(&m, k, c);
        let key = cache_key(&b, Backend::Fd, Some(&grid));
        let band = compute_band(&b, Backend::Fd, c).unwrap();
        cache.store(&key, &band).unwrap();
        let back = cache.load(&key).unwrap().unwrap();
        assert_eq!(serde_json::to_vec(&band).unwrap(), serde_json::to_vec(&back).unwrap());
    }
}
