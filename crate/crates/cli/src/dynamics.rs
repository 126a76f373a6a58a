//! `dynamics`: Toeplitz quantization on exact sphere models. Wick symbols,
//! the tangential decomposition of the quantum velocity, the variance law,
//! and the equivariance gap of the quantum flow.

use quantlab::geometry::{Harmonic, ManifoldModel, ObservableField};
use quantlab::sampling::low_discrepancy;
use quantlab::series::ConvergenceSeries;
use quantlab::spectral::Backend;
use quantlab::toeplitz::{build_toeplitz, equivariance_gap, hamiltonian_speed_sq, tangential_decomposition, variance, wick_symbol};

use crate::config::ModelSpec;
use crate::output::{slope_text, num, AuditEntry, CommandOutput, CriterionEntry, Values};
use crate::{CliResult, Context};

const SAMPLE_SEED: u64 = 11;

/// Observables run on every model: the height function and a generic mix.
pub fn observables() -> Vec<ObservableField> {
    vec![
        ObservableField::height(),
        ObservableField::sphere("generic", 0.0, vec![(Harmonic::X, 1.0), (Harmonic::Xz, 0.7), (Harmonic::Z2, 0.3)]),
    ]
}

#[derive(Clone, Debug)]
struct PerK {
    model: usize,
    k: u32,
    /// Per observable: (wick, |cos θ|, residual/√k, |Ξ⊥|, variance law, literal variance law).
    obs: Vec<[f64; 6]>,
    /// Skipped sample points where Ξ vanishes.
    degenerate: usize,
    runs: Vec<String>,
    /// Largest equivariance gap over the run times, per observable.
    gap: Vec<f64>,
}

fn dynamics_model(spec: &ModelSpec, m: &ManifoldModel) -> bool {
    m.is_sphere() && spec.backend == Backend::Exact
}

pub fn cmd_dynamics(ctx: &Context) -> CliResult<CommandOutput> {
    let cfg = &ctx.cfg;
    let flags = &cfg.experiments;
    let d = &cfg.dynamics;
    let mut out = ctx.output("dynamics");
    let on = |spec: &ModelSpec, id: u8| spec.runs(id) && [flags.wick, flags.tangential, flags.variance][id as usize - 9];
    let jobs = ctx.jobs(|s, m| dynamics_model(s, m) && (9..=11).any(|c| on(s, c)), Some(&d.ks));
    let hs = observables();

    let rows = ctx.run_jobs(&jobs, |&(i, k)| {
        let (spec, m) = &ctx.models[i];
        let band = ctx.band(spec, m, k)?;
        let samples = low_discrepancy(m, d.samples, ctx.seed(SAMPLE_SEED));
        let kf = k as f64;
        let mut obs = Vec::new();
        let mut degenerate = 0;
        let mut runs = Vec::new();
        let mut gap = Vec::new();
        for h in &hs {
            let t = build_toeplitz(&band, h)?;
            let mut v = [0.0_f64; 6];
            for x in &samples {
                v[0] = v[0].max((wick_symbol(&band, &t, x)? - h.value(m, x)?).abs());
                let speed = hamiltonian_speed_sq(&band, h, x)?;
                let var = variance(&band, &t, x)?;
                v[4] = v[4].max((2.0 * kf * var - speed).abs());
                v[5] = v[5].max((kf * var - speed).abs());
                match tangential_decomposition(&band, &t, x) {
                    Ok(td) => {
                        v[1] = v[1].max(td.cos_theta.abs());
                        v[2] = v[2].max(td.residual / kf.sqrt());
                        v[3] = v[3].max(td.xi_perp.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt());
                    }
                    Err(quantlab::Error::Degenerate(_)) => degenerate += 1,
                    Err(e) => return Err(e.into()),
                }
            }
            obs.push(v);
            let run = equivariance_gap(&band, &t, &samples[0], &d.times)?;
            gap.push(run.gaps.iter().fold(0.0_f64, |a, &g| a.max(g)));
            runs.push(run.to_csv());
        }
        Ok(PerK { model: i, k, obs, degenerate, runs, gap })
    })?;

    let mut csv = String::from("model,k,observable,wick,cos_theta,residual_over_sqrt_k,xi_perp,variance_law,variance_literal\n");
    for r in &rows {
        let name = &ctx.models[r.model].0.name;
        for (h, v) in hs.iter().zip(&r.obs) {
            let cells: Vec<String> = v.iter().map(|&x| num(x)).collect();
            csv.push_str(&format!("{name},{},{},{}\n", r.k, h.name, cells.join(",")));
        }
        for (h, run) in hs.iter().zip(&r.runs) {
            ctx.dir.write(&format!("dynamics/{name}_{}_k{}.csv", h.name, r.k), run)?;
        }
    }
    ctx.dir.write("dynamics.csv", &csv)?;

    let rate = cfg.tolerances.rate_slope;
    let soft = cfg.tolerances.soft_slope;
    for (i, (spec, _)) in ctx.models.iter().enumerate() {
        let mine: Vec<&PerK> = rows.iter().filter(|r| r.model == i).collect();
        if mine.len() < 2 {
            continue;
        }
        let ser = |j: usize, col: usize, label: &str| {
            ConvergenceSeries::new(&format!("{label} ({})", hs[j].name), mine.iter().map(|r| (r.k as f64, r.obs[j][col])).collect())
        };
        let per_obs = |col: usize, label: &str| -> Vec<ConvergenceSeries> { (0..hs.len()).map(|j| ser(j, col, label)).collect() };

        if on(spec, 9) {
            let s = per_obs(0, "Wick sup error");
            out.criteria.push(slope_entry(9, spec, s, rate, "sup |σ_T − H|"));
        }
        if on(spec, 10) {
            let cos = mine.iter().flat_map(|r| r.obs.iter().map(|v| v[1])).fold(0.0, f64::max);
            let res = per_obs(2, "tangential residual / √k");
            let tol = cfg.tolerances.cos_theta;
            let slopes_ok = res.iter().all(|s| s.decays(soft, f64::INFINITY));
            let skipped: usize = mine.iter().map(|r| r.degenerate).sum();
            let text: Vec<String> = res.iter().map(slope_text).collect();
            out.criteria.push(CriterionEntry {
                id: 10,
                model: spec.name.clone(),
                backend: spec.backend,
                pass: cos <= tol && slopes_ok,
                summary: format!("max |cos θ| {cos:.2e} (≤ {tol:e}); {} (≤ {soft}); {skipped} degenerate points skipped", text.join(", ")),
                values: Values::default().with("max_cos_theta", cos).with("slopes", res.iter().map(|s| s.slope).collect::<Vec<_>>()).into_map(),
                series: res,
            });
            let perp = per_obs(3, "|Ξ⊥|");
            let text: Vec<String> = perp.iter().map(|s| format!("{} from {:.3e} to {:.3e}", s.name, s.errors[0], s.errors[s.len() - 1])).collect();
            out.audit.push(AuditEntry { name: "normal component".into(), model: spec.name.clone(), summary: text.join(", "), series: perp });
        }
        if on(spec, 11) {
            let s = per_obs(4, "variance law defect");
            out.criteria.push(slope_entry(11, spec, s, rate, "sup |2k·Var − |ξ_H|²|"));
            let lit = per_obs(5, "literal variance law defect");
            let text: Vec<String> = lit.iter().map(|s| format!("{} from {:.3e} to {:.3e}", s.name, s.errors[0], s.errors[s.len() - 1])).collect();
            out.audit.push(AuditEntry { name: "literal variance law".into(), model: spec.name.clone(), summary: text.join(", "), series: lit });
        }
        let gaps: Vec<ConvergenceSeries> = (0..hs.len())
            .map(|j| ConvergenceSeries::new(&format!("equivariance gap ({})", hs[j].name), mine.iter().map(|r| (r.k as f64, r.gap[j])).collect()))
            .collect();
        let text: Vec<String> = gaps.iter().map(|s| format!("{} from {:.3e} to {:.3e}", s.name, s.errors[0], s.errors[s.len() - 1])).collect();
        out.audit.push(AuditEntry { name: "equivariance gap".into(), model: spec.name.clone(), summary: text.join(", "), series: gaps });
    }
    ctx.dir.write_summary(&out)?;
    Ok(out)
}


fn slope_entry(id: u8, spec: &ModelSpec, series: Vec<ConvergenceSeries>, thr: f64, what: &str) -> CriterionEntry {
    let pass = series.iter().all(|s| s.decays(thr, f64::INFINITY));
    let text: Vec<String> = series.iter().map(slope_text).collect();
    CriterionEntry {
        id,
        model: spec.name.clone(),
        backend: spec.backend,
        pass,
        summary: format!("{what}: {} (≤ {thr})", text.join(", ")),
        values: Values::default().with("slopes", series.iter().map(|s| s.slope).collect::<Vec<_>>()).into_map(),
        series,
    }
}
