//! `embed`: pullback rates, approximate holomorphy, the density function,
//! off-diagonal decay, the reproducing property, injectivity, and the fd
//! against exact oracle.

use std::f64::consts::PI;

use quantlab::bundle::build_bundle;
use quantlab::embedding::{band_sup_errors, dbar_split, injectivity_scan, separated_pairs, InjectivityReport};
use quantlab::geometry::{ManifoldModel, ModelKind, Tangent};
use quantlab::kernel::{horizontal_frame, kernel_agreement, nu, offdiag_profile, profile_csv, reproducing_defect, trace_integral, ProfileRow};
use quantlab::sampling::low_discrepancy;
use quantlab::series::ConvergenceSeries;
use quantlab::spectral::{band_angles, exact_band, gram_quadrature_size, Backend};

use crate::config::ModelSpec;
use crate::output::{slope_text, num, AuditEntry, CommandOutput, CriterionEntry, Values};
use crate::{CliResult, Context};

const SAMPLE_SEED: u64 = 1;
const PROFILE_SEED: u64 = 2;
const PAIR_SEED: u64 = 3;
const ORACLE_SEED: u64 = 4;

#[derive(Clone, Debug)]
struct PerK {
    model: usize,
    k: u32,
    dim: usize,
    symplectic: f64,
    metric: f64,
    dbar_sq: f64,
    dbar: f64,
    nus: Vec<f64>,
    trace: Option<f64>,
    reproducing: f64,
    profile: Option<Vec<ProfileRow>>,
    injectivity: Option<InjectivityReport>,
    oracle: Option<(f64, f64)>,
}

fn is_sphere(m: &ManifoldModel) -> bool {
    m.is_sphere()
}

pub fn cmd_embed(ctx: &Context) -> CliResult<CommandOutput> {
    let cfg = &ctx.cfg;
    let flags = &cfg.experiments;
    let e = &cfg.embed;
    let mut out = ctx.output("embed");
    // Criterion switches combine the global flags with each model's selection.
    let on = |spec: &ModelSpec, id: u8| {
        let flag = match id {
            3 => flags.rates,
            4 => flags.holomorphy,
            5 => flags.nu,
            6 => flags.profile,
            7 => flags.reproducing,
            8 => flags.injectivity,
            _ => flags.oracle,
        };
        flag && spec.runs(id)
    };
    let jobs = ctx.jobs(|s, _| [3, 4, 5, 6, 7, 8, 13].iter().any(|&c| on(s, c)), None);

    let pairs: Vec<Option<Vec<_>>> = ctx
        .models
        .iter()
        .map(|(spec, m)| {
            if on(spec, 8) && is_sphere(m) {
                separated_pairs(m, e.pairs, e.delta, ctx.seed(PAIR_SEED)).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<_, _>>()?;

    let rows = ctx.run_jobs(&jobs, |&(i, k)| {
        let (spec, m) = &ctx.models[i];
        let band = ctx.band(spec, m, k)?;
        let samples = low_discrepancy(m, e.samples, ctx.seed(SAMPLE_SEED));
        let sphere = is_sphere(m);
        let exact = spec.backend == Backend::Exact;
        let mut r = PerK {
            model: i,
            k,
            dim: band.dim(),
            symplectic: f64::NAN,
            metric: f64::NAN,
            dbar_sq: f64::NAN,
            dbar: f64::NAN,
            nus: Vec::new(),
            trace: None,
            reproducing: f64::NAN,
            profile: None,
            injectivity: None,
            oracle: None,
        };
        if sphere && on(spec, 3) {
            (r.symplectic, r.metric) = band_sup_errors(&band, &samples)?;
        }
        if sphere && on(spec, 4) {
            let mut worst: f64 = 0.0;
            for p in &samples {
                let s = dbar_split(&band, p)?;
                worst = worst.max(s.norm_delbar / s.norm_del);
            }
            r.dbar = worst;
            r.dbar_sq = worst * worst;
        }
        if sphere && exact && on(spec, 5) {
            r.nus = samples.iter().map(|p| nu(&band, p)).collect::<Result<_, _>>()?;
            let (nt, np) = gram_quadrature_size(k);
            r.trace = Some(trace_integral(&band, nt, np)?);
        }
        if on(spec, 7) {
            r.reproducing = reproducing_defect(&band, &samples)?;
        }
        if sphere && exact && on(spec, 6) && e.profile_ks.contains(&k) {
            r.profile = Some(profile_rows(ctx, m, &band, k)?);
        }
        if let (Some(p), true) = (&pairs[i], e.injectivity_ks.contains(&k)) {
            r.injectivity = Some(injectivity_scan(&band, p, e.delta)?);
        }
        let oracle_model = m.kind == ModelKind::RoundSphere && spec.backend == Backend::Fd;
        if on(spec, 13) && oracle_model && e.oracle_ks.contains(&k) {
            let ex = exact_band(&build_bundle(m, k as i64)?)?;
            let pts = low_discrepancy(m, e.oracle_points, ctx.seed(ORACLE_SEED));
            let kern = kernel_agreement(&band, &ex, &pts)?;
            let ang = band_angles(&band, &ex)?.into_iter().fold(0.0_f64, f64::max);
            r.oracle = Some((kern, ang));
        }
        Ok(r)
    })?;

    write_tables(ctx, &rows)?;
    for (i, (spec, m)) in ctx.models.iter().enumerate() {
        let mine: Vec<&PerK> = rows.iter().filter(|r| r.model == i).collect();
        if mine.is_empty() {
            continue;
        }
        if is_sphere(m) {
            if on(spec, 3) {
                out.criteria.push(rates(ctx, spec, &mine));
            }
            if on(spec, 4) {
                out.criteria.push(holomorphy(ctx, spec, &mine));
            }
            if on(spec, 5) && spec.backend == Backend::Exact {
                let (entry, audit) = density(ctx, spec, m, &mine);
                out.criteria.push(entry);
                out.audit.push(audit);
            }
            if on(spec, 6) && spec.backend == Backend::Exact && mine.iter().any(|r| r.profile.is_some()) {
                let (entry, audit) = profile(ctx, spec, &mine);
                out.criteria.push(entry);
                out.audit.push(audit);
            }
            if on(spec, 8) && mine.iter().any(|r| r.injectivity.is_some()) {
                out.criteria.push(injectivity(spec, &mine));
            }
            if mine.iter().any(|r| r.oracle.is_some()) {
                out.criteria.push(oracle(ctx, spec, &mine));
            }
        }
        if on(spec, 7) {
            out.criteria.push(reproducing(ctx, spec, &mine));
        }
    }
    ctx.dir.write_summary(&out)?;
    Ok(out)
}

/// Profile rows along several geodesics, radii evenly spaced on [0, k^{−1/4}].
fn profile_rows(ctx: &Context, m: &ManifoldModel, band: &quantlab::spectral::SpectralBand, k: u32) -> CliResult<Vec<ProfileRow>> {
    let e = &ctx.cfg.embed;
    let reach = (k as f64).powf(-0.25);
    let radii: Vec<f64> = (0..e.profile_radii).map(|j| reach * j as f64 / (e.profile_radii - 1) as f64).collect();
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let mut rows = Vec::new();
    for (j, p) in low_discrepancy(m, e.profile_points, ctx.seed(PROFILE_SEED)).iter().enumerate() {
        let f = horizontal_frame(m, p)?;
        let a = 2.0 * PI * (j as f64 * golden).fract();
        let u = Tangent {
            base: *p,
            components: [
                a.cos() * f[0].components[0] + a.sin() * f[1].components[0],
                a.cos() * f[0].components[1] + a.sin() * f[1].components[1],
            ],
        };
        rows.extend(offdiag_profile(band, p, &u, &radii)?);
    }
    Ok(rows)
}

fn series(name: &str, rows: &[&PerK], f: impl Fn(&PerK) -> Option<f64>) -> ConvergenceSeries {
    ConvergenceSeries::new(name, rows.iter().filter_map(|r| f(r).map(|v| (r.k as f64, v))).collect())
}


fn rates(ctx: &Context, spec: &ModelSpec, rows: &[&PerK]) -> CriterionEntry {
    let thr = ctx.cfg.tolerances.rate_slope;
    let s = series("symplectic sup error", rows, |r| Some(r.symplectic));
    let g = series("metric sup error", rows, |r| Some(r.metric));
    let pass = rows.len() >= 2 && s.decays(thr, f64::INFINITY) && g.decays(thr, f64::INFINITY);
    let (c1, c2) = (s.scaled_max(1.0), g.scaled_max(1.0));
    CriterionEntry {
        id: 3,
        model: spec.name.clone(),
        backend: spec.backend,
        pass,
        summary: format!("{}, {} (≤ {thr}); C1 = {c1:.4}, C2 = {c2:.4}", slope_text(&s), slope_text(&g)),
        values: Values::default()
            .with("slope_symplectic", s.slope)
            .with("slope_metric", g.slope)
            .with("c1", c1)
            .with("c2", c2)
            .into_map(),
        series: vec![s, g],
    }
}

fn holomorphy(ctx: &Context, spec: &ModelSpec, rows: &[&PerK]) -> CriterionEntry {
    let t = &ctx.cfg.tolerances;
    let s = series("dbar/d squared norm ratio", rows, |r| Some(r.dbar_sq));
    let worst = rows.iter().fold(0.0_f64, |a, r| a.max(r.dbar));
    let exact = spec.backend == Backend::Exact;
    let residual_ok = !exact || worst <= t.kahler_residual;
    let pass = rows.len() >= 2 && s.decays(t.rate_slope, f64::INFINITY) && residual_ok;
    let extra = if exact { format!("; Kähler residual |dbar|/|d| {worst:.2e} (≤ {:e})", t.kahler_residual) } else { String::new() };
    CriterionEntry {
        id: 4,
        model: spec.name.clone(),
        backend: spec.backend,
        pass,
        summary: format!("{} (≤ {}){extra}", slope_text(&s), t.rate_slope),
        values: Values::default().with("slope", s.slope).with("max_dbar_ratio", worst).into_map(),
        series: vec![s],
    }
}

fn density(ctx: &Context, spec: &ModelSpec, m: &ManifoldModel, rows: &[&PerK]) -> (CriterionEntry, AuditEntry) {
    let t = &ctx.cfg.tolerances;
    let variation = |r: &PerK| {
        let (lo, hi) = r.nus.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), &v| (a.min(v), b.max(v)));
        (hi - lo) / hi
    };
    // ν_{2k}·k/(ν_k·2k) at every sample point, for each k whose double is in the sweep.
    let mut ratios: Vec<(u32, f64)> = Vec::new();
    for r in rows {
        if let Some(r2) = rows.iter().find(|q| q.k == 2 * r.k) {
            let worst = r.nus.iter().zip(&r2.nus).map(|(a, b)| (b * r.k as f64 / (a * 2.0 * r.k as f64) - 1.0).abs()).fold(0.0, f64::max);
            ratios.push((r.k, worst));
        }
    }
    let ratio_at = ratios.iter().find(|(k, _)| *k == t.nu_ratio_k).map(|x| x.1);
    let ratio_ok = ratio_at.is_some_and(|v| v <= t.nu_ratio);
    let trace_err = rows.iter().filter_map(|r| r.trace.map(|tr| (tr / r.dim as f64 - 1.0).abs())).fold(0.0, f64::max);
    let trace_ok = trace_err <= t.trace;
    let var = series("density relative variation", rows, |r| Some(variation(r)));
    let round = m.kind == ModelKind::RoundSphere;
    let (shape_ok, shape) = if round {
        let worst = var.max_error();
        (worst <= t.nu_constancy, format!("round constancy {worst:.2e} (≤ {:e})", t.nu_constancy))
    } else {
        (var.decays(t.rate_slope, f64::INFINITY), format!("variation slope {:.3} (≤ {})", var.slope, t.rate_slope))
    };
    let ratio_text = match ratio_at {
        Some(v) => format!("ratio test at k={} off by {v:.3e} (≤ {})", t.nu_ratio_k, t.nu_ratio),
        None => format!("ratio test needs k = {} and {} in the sweep", t.nu_ratio_k, 2 * t.nu_ratio_k),
    };
    let ratio_series = ConvergenceSeries::new("density ratio test defect", ratios.iter().map(|(k, v)| (*k as f64, *v)).collect());
    let entry = CriterionEntry {
        id: 5,
        model: spec.name.clone(),
        backend: spec.backend,
        pass: ratio_ok && trace_ok && shape_ok,
        summary: format!("{ratio_text}; {shape}; trace identity {trace_err:.2e} (≤ {:e})", t.trace),
        values: Values::default()
            .with("ratio_defect", ratio_at)
            .with("trace_defect", trace_err)
            .with("variation_slope", var.slope)
            .with("max_variation", var.max_error())
            .into_map(),
        series: vec![var, ratio_series],
    };
    // Convention audit: ν_k/k against 1/(4π²) for total area 2π.
    let last = rows.last().unwrap();
    let mean = last.nus.iter().sum::<f64>() / last.nus.len().max(1) as f64;
    let per_k = mean / last.k as f64;
    let audit = AuditEntry {
        name: "density constant".into(),
        model: spec.name.clone(),
        summary: format!(
            "mean ν_k/k = {per_k:.6} at k={} against (k+1)/(4π²k) = {:.6}; ratio to k/(2π) is {:.4}, the factor 1/(2π) of total area 2π",
            last.k,
            (last.k as f64 + 1.0) / (4.0 * PI * PI * last.k as f64),
            per_k * 2.0 * PI
        ),
        series: Vec::new(),
    };
    (entry, audit)
}

fn profile(ctx: &Context, spec: &ModelSpec, rows: &[&PerK]) -> (CriterionEntry, AuditEntry) {
    let thr = ctx.cfg.tolerances.soft_slope;
    let worst = |r: &PerK, lit: bool| {
        r.profile.as_ref().map(|p| p.iter().map(|x| if lit { x.deviation_literal } else { x.deviation }).fold(0.0, f64::max))
    };
    let s = series("profile deviation", rows, |r| worst(r, false));
    let l = series("profile deviation, literal rate", rows, |r| worst(r, true));
    let entry = CriterionEntry {
        id: 6,
        model: spec.name.clone(),
        backend: spec.backend,
        pass: s.len() >= 2 && s.decays(thr, f64::INFINITY),
        summary: format!("max deviation from exp(-k d²/4) on d ≤ k^(-1/4): {} (≤ {thr})", slope_text(&s)),
        values: Values::default().with("slope", s.slope).with("max_deviation", s.max_error()).into_map(),
        series: vec![s],
    };
    let audit = AuditEntry {
        name: "literal Gaussian rate".into(),
        model: spec.name.clone(),
        summary: format!(
            "deviation from exp(-k d²/2): slope {:.3}, from {:.3e} to {:.3e}",
            l.slope,
            l.errors.first().copied().unwrap_or(f64::NAN),
            l.errors.last().copied().unwrap_or(f64::NAN)
        ),
        series: vec![l],
    };
    (entry, audit)
}

fn reproducing(ctx: &Context, spec: &ModelSpec, rows: &[&PerK]) -> CriterionEntry {
    let t = &ctx.cfg.tolerances;
    let tol = if spec.backend == Backend::Exact { t.reproducing_exact } else { t.reproducing_fd };
    let s = series("reproducing defect", rows, |r| Some(r.reproducing));
    let worst = s.max_error();
    CriterionEntry {
        id: 7,
        model: spec.name.clone(),
        backend: spec.backend,
        pass: worst <= tol,
        summary: format!("max |f(p) − ⟨Ψ(p), f⟩| = {worst:.2e} (≤ {tol:e})"),
        values: Values::default().with("max_defect", worst).into_map(),
        series: vec![s],
    }
}

fn injectivity(spec: &ModelSpec, rows: &[&PerK]) -> CriterionEntry {
    let reps: Vec<&InjectivityReport> = rows.iter().filter_map(|r| r.injectivity.as_ref()).collect();
    let collisions: usize = reps.iter().map(|r| r.collisions.len()).sum();
    let mins: Vec<(u32, f64)> = reps.iter().map(|r| (r.k, r.min_fs)).collect();
    let monotone = mins.windows(2).all(|w| w[1].1 >= w[0].1);
    let positive = mins.iter().all(|m| m.1 > 0.0);
    let text: Vec<String> = mins.iter().map(|(k, v)| format!("k={k}: {v:.4}")).collect();
    CriterionEntry {
        id: 8,
        model: spec.name.clone(),
        backend: spec.backend,
        pass: collisions == 0 && monotone && positive,
        summary: format!("{} pairs per k, {collisions} collisions; min FS distance {}", reps.first().map_or(0, |r| r.pairs_checked), text.join(", ")),
        values: Values::default().with("collisions", collisions).with("min_fs", mins).into_map(),
        series: Vec::new(),
    }
}

fn oracle(ctx: &Context, spec: &ModelSpec, rows: &[&PerK]) -> CriterionEntry {
    let t = &ctx.cfg.tolerances;
    let kern = series("kernel modulus error", rows, |r| r.oracle.map(|o| o.0));
    let ang = series("max principal angle", rows, |r| r.oracle.map(|o| o.1));
    let (wk, wa) = (kern.max_error(), ang.max_error());
    let ks: Vec<u32> = rows.iter().filter(|r| r.oracle.is_some()).map(|r| r.k).collect();
    CriterionEntry {
        id: 13,
        model: spec.name.clone(),
        backend: spec.backend,
        pass: wk <= t.oracle_kernel && wa <= t.oracle_angle,
        summary: format!("k ∈ {ks:?}: kernel error {wk:.2e} (≤ {:e}), principal angle {wa:.2e} (≤ {:e})", t.oracle_kernel, t.oracle_angle),
        values: Values::default().with("max_kernel_error", wk).with("max_angle", wa).with("ks", ks).into_map(),
        series: vec![kern, ang],
    }
}

fn write_tables(ctx: &Context, rows: &[PerK]) -> CliResult<()> {
    let mut csv = String::from("model,k,dim,symplectic,metric,dbar_sq,reproducing,trace\n");
    for r in rows {
        let name = &ctx.models[r.model].0.name;
        let tr = r.trace.map_or(String::new(), num);
        csv.push_str(&format!("{name},{},{},{},{},{},{},{tr}\n", r.k, r.dim, num(r.symplectic), num(r.metric), num(r.dbar_sq), num(r.reproducing)));
    }
    ctx.dir.write("embed.csv", &csv)?;
    for (i, (spec, _)) in ctx.models.iter().enumerate() {
        let prof: Vec<ProfileRow> = rows.iter().filter(|r| r.model == i).filter_map(|r| r.profile.clone()).flatten().collect();
        if !prof.is_empty() {
            ctx.dir.write(&format!("profile_{}.csv", spec.name), &profile_csv(&prof))?;
        }
        let inj: Vec<&InjectivityReport> = rows.iter().filter(|r| r.model == i).filter_map(|r| r.injectivity.as_ref()).collect();
        if !inj.is_empty() {
            let mut s = String::from("k,pairs,collisions,min_fs\n");
            for r in inj {
                s.push_str(&format!("{},{},{},{}\n", r.k, r.pairs_checked, r.collisions.len(), num(r.min_fs)));
            }
            ctx.dir.write(&format!("injectivity_{}.csv", spec.name), &s)?;
        }
    }
    Ok(())
}
