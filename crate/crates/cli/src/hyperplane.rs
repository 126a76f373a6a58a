//! `hyperplane`: random hyperplane sections through the coherent state, the
//! A^± rates and the symplectic-orientation fraction.

use quantlab::geometry::ManifoldModel;
use quantlab::hyperplane::{sample_sections, SectionReport};
use quantlab::sampling::low_discrepancy;
use quantlab::series::ConvergenceSeries;
use quantlab::spectral::Backend;

use crate::config::ModelSpec;
use crate::output::{slope_text, CommandOutput, CriterionEntry, Values};
use crate::{CliResult, Context};

const POINT_SEED: u64 = 21;
const PLANE_SEED: u64 = 22;
const STRICT_SEED: u64 = 23;

struct PerK {
    model: usize,
    k: u32,
    main: SectionReport,
    strict: Option<SectionReport>,
}

fn hyperplane_model(spec: &ModelSpec, m: &ManifoldModel) -> bool {
    m.is_sphere() && spec.backend == Backend::Exact
}

/// Mean of |A⁺²/(kϑ) − 1| over all trials.
fn mean_plus_defect(r: &SectionReport) -> f64 {
    let k = r.k as f64;
    r.rows.iter().map(|t| (t.a_plus_sq / (k * t.vartheta) - 1.0).abs()).sum::<f64>() / r.rows.len().max(1) as f64
}

fn max_minus(r: &SectionReport) -> f64 {
    r.rows.iter().map(|t| t.a_minus_sq).fold(0.0, f64::max)
}

pub fn cmd_hyperplane(ctx: &Context) -> CliResult<CommandOutput> {
    let cfg = &ctx.cfg;
    let h = &cfg.hyperplane;
    let mut out = ctx.output("hyperplane");
    let jobs = if cfg.experiments.hyperplane { ctx.jobs(|s, m| hyperplane_model(s, m) && s.runs(12), Some(&h.ks)) } else { Vec::new() };

    let rows = ctx.run_jobs(&jobs, |&(i, k)| {
        let (spec, m) = &ctx.models[i];
        let band = ctx.band(spec, m, k)?;
        let pts = low_discrepancy(m, h.points, ctx.seed(POINT_SEED));
        let main = sample_sections(&band, &pts, h.trials, h.floor, ctx.seed(PLANE_SEED))?;
        let strict = if k >= h.strict_min_k {
            Some(sample_sections(&band, &pts, h.trials, h.strict_floor, ctx.seed(STRICT_SEED))?)
        } else {
            None
        };
        Ok(PerK { model: i, k, main, strict })
    })?;

    for r in &rows {
        let name = &ctx.models[r.model].0.name;
        ctx.dir.write(&format!("hyperplane/{name}_k{}.csv", r.k), &r.main.to_csv())?;
        if let Some(s) = &r.strict {
            ctx.dir.write(&format!("hyperplane/{name}_k{}_strict.csv", r.k), &s.to_csv())?;
        }
    }

    let t = &cfg.tolerances;
    for (i, (spec, _)) in ctx.models.iter().enumerate() {
        let mine: Vec<&PerK> = rows.iter().filter(|r| r.model == i).collect();
        if mine.len() < 2 {
            continue;
        }
        let plus = ConvergenceSeries::new("mean |A+²/(kϑ) − 1|", mine.iter().map(|r| (r.k as f64, mean_plus_defect(&r.main))).collect());
        let minus = ConvergenceSeries::new("max A−²", mine.iter().map(|r| (r.k as f64, max_minus(&r.main))).collect());
        let bounded = minus.at_noise_floor() || minus.slope <= t.a_minus_growth;
        let strict: Vec<(u32, f64)> = mine.iter().filter_map(|r| r.strict.as_ref().map(|s| (r.k, s.fraction_ok))).collect();
        let strict_ok = !strict.is_empty() && strict.iter().all(|s| s.1 == 1.0);
        let det_ok = mine.iter().all(|r| r.main.det_agrees && r.strict.as_ref().is_none_or(|s| s.det_agrees));
        let fractions: Vec<(u32, f64)> = mine.iter().map(|r| (r.k, r.main.fraction_ok)).collect();
        let pass = plus.decays(t.rate_slope, f64::INFINITY) && bounded && strict_ok && det_ok;
        out.criteria.push(CriterionEntry {
            id: 12,
            model: spec.name.clone(),
            backend: spec.backend,
            pass,
            summary: format!(
                "{} (≤ {}); {} (growth ≤ {}); fraction at ϑ ≥ {} for k ≥ {}: {:?}; determinant sign agrees {det_ok}",
                slope_text(&plus), t.rate_slope, slope_text(&minus), t.a_minus_growth, h.strict_floor, h.strict_min_k, strict
            ),
            values: Values::default()
                .with("plus_slope", plus.slope)
                .with("minus_slope", minus.slope)
                .with("strict_fraction", strict)
                .with("fraction", fractions)
                .with("det_agrees", det_ok)
                .into_map(),
            series: vec![plus, minus],
        });
    }
    ctx.dir.write_summary(&out)?;
    Ok(out)
}

