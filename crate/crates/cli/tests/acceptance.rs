//! End-to-end acceptance run over configs/acceptance.toml. Prints one verdict
//! line per criterion and fails if any criterion fails.

use std::fs;
use std::io::Write;

use quantlab::spectral::Backend;
use quantlab_cli::config::{self, ExperimentConfig, ModelKindSpec};
use quantlab_cli::output::CRITERIA;
use quantlab_cli::{dynamics, embed, hyperplane, report, spectrum, Context};

const CONFIG: &str = include_str!("../../../configs/acceptance.toml");

/// Tolerances and sweep sizes the criteria are stated with.
fn pin_tolerances(cfg: &ExperimentConfig) {
    let t = &cfg.tolerances;
    assert_eq!(t.rate_slope, -0.8);
    assert_eq!(t.soft_slope, -0.3);
    assert_eq!(t.gap_stability, 0.2);
    assert_eq!(t.nu_ratio, 0.05);
    assert_eq!(t.nu_ratio_k, 64);
    assert_eq!(t.nu_constancy, 1e-6);
    assert_eq!(t.trace, 1e-4);
    assert_eq!(t.kahler_residual, 1e-6);
    assert_eq!(t.reproducing_exact, 1e-8);
    assert_eq!(t.reproducing_fd, 1e-6);
    assert_eq!(t.oracle_kernel, 1e-3);
    assert_eq!(t.oracle_angle, 1e-3);
    assert_eq!(t.cos_theta, 1e-6);
    assert!(t.band_window > 0.0 && t.gap_constant > 0.0);

    let e = &cfg.embed;
    assert_eq!((e.pairs, e.delta), (500, 0.3));
    assert_eq!(e.injectivity_ks, [32, 64]);
    assert_eq!(e.profile_ks, [16, 32, 64, 128]);
    assert_eq!((e.oracle_ks.as_slice(), e.oracle_points), ([4, 8, 16].as_slice(), 100));
    assert_eq!(cfg.dynamics.ks, [8, 16, 32, 64]);
    let h = &cfg.hyperplane;
    assert_eq!(h.points * h.trials, 200);
    assert_eq!(h.ks, [16, 32, 64]);
    assert_eq!((h.floor, h.strict_floor, h.strict_min_k), (0.5, 0.9, 32));
}

fn pin_sweeps(cfg: &ExperimentConfig) {
    let find = |kind: ModelKindSpec, backend: Backend, id: u8| {
        cfg.models.iter().filter(move |m| m.kind == kind && m.backend == backend && m.runs(id)).flat_map(|m| m.ks.clone()).collect::<Vec<u32>>()
    };
    let sphere = [ModelKindSpec::RoundSphere, ModelKindSpec::PerturbedSphere];
    assert_eq!(find(ModelKindSpec::FlatTorus, Backend::Fd, 1), [4, 6, 8, 10, 12]);
    assert!((2..=64).all(|k| find(ModelKindSpec::RoundSphere, Backend::Exact, 2).contains(&k)));
    assert!((2..=16).all(|k| find(ModelKindSpec::RoundSphere, Backend::Fd, 2).contains(&k)));
    for kind in sphere {
        assert_eq!(find(kind, Backend::Exact, 3), [8, 16, 32, 64, 128]);
        assert_eq!(find(kind, Backend::Fd, 3), [8, 16, 32]);
        assert_eq!(find(kind, Backend::Exact, 4), [8, 16, 32, 64, 128]);
    }
    // Every FD grid satisfies h ≤ c/√k with c recorded per k.
    cfg.validate().unwrap();
}

#[test]
fn acceptance() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config::parse(CONFIG).unwrap();
    pin_tolerances(&cfg);
    pin_sweeps(&cfg);
    cfg.run.out = tmp.path().join("run");
    cfg.run.workers = std::thread::available_parallelism().map_or(2, |n| n.get());
    let ctx = Context::new(cfg).unwrap();

    let outputs = [
        spectrum::cmd_spectrum(&ctx).unwrap(),
        embed::cmd_embed(&ctx).unwrap(),
        dynamics::cmd_dynamics(&ctx).unwrap(),
        hyperplane::cmd_hyperplane(&ctx).unwrap(),
    ];
    let root = ctx.dir.root.clone();
    let r = report::cmd_report(&root).unwrap();

    // Written to the stdout handle directly so the verdicts show without --nocapture.
    let mut lines = String::from("\n");
    for c in &r.criteria {
        lines += &format!("criterion {:>2} {:<32} {}\n", c.id, c.title, if c.pass { "PASS" } else { "FAIL" });
        for e in &c.entries {
            lines += &format!("    {} [{}]: {}\n", e.model, spectrum::backend_name(e.backend), e.summary);
        }
    }
    for a in &r.audit {
        lines += &format!("audit {} [{}]: {}\n", a.name, a.model, a.summary);
    }
    std::io::stdout().lock().write_all(lines.as_bytes()).unwrap();

    // Every criterion appears exactly once, with at least one entry.
    assert_eq!(r.criteria.len(), CRITERIA.len());
    for (c, (id, _, _)) in r.criteria.iter().zip(CRITERIA) {
        assert_eq!(c.id, id);
        assert!(!c.missing, "criterion {id} produced no entries");
    }

    // Report reruns and command reruns on the warm cache are byte-identical.
    let first = fs::read(root.join("report.json")).unwrap();
    let csv = fs::read(root.join("report.csv")).unwrap();
    report::cmd_report(&root).unwrap();
    assert_eq!(first, fs::read(root.join("report.json")).unwrap());
    assert_eq!(csv, fs::read(root.join("report.csv")).unwrap());
    let dyn_json = fs::read(root.join("dynamics.json")).unwrap();
    let hyp_json = fs::read(root.join("hyperplane.json")).unwrap();
    assert_eq!(dynamics::cmd_dynamics(&ctx).unwrap(), outputs[2]);
    assert_eq!(hyperplane::cmd_hyperplane(&ctx).unwrap(), outputs[3]);
    assert_eq!(dyn_json, fs::read(root.join("dynamics.json")).unwrap());
    assert_eq!(hyp_json, fs::read(root.join("hyperplane.json")).unwrap());

    let failed: Vec<u8> = r.criteria.iter().filter(|c| !c.pass).map(|c| c.id).collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
