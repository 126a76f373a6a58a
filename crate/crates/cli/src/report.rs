//! `report`: merge the command summaries of a run directory into one
//! verdict per criterion, with CSV and plot-data companions.

use serde::{Deserialize, Serialize};
use std::path::Path;

use quantlab::series::ConvergenceSeries;

use crate::output::{AuditEntry, CommandOutput, CriterionEntry, Environment, RunDir, COMMANDS, CRITERIA};
use crate::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionVerdict {
    pub id: u8,
    pub title: String,
    pub command: String,
    pub pass: bool,
    /// Set when the producing command ran with this criterion disabled.
    pub missing: bool,
    pub entries: Vec<CriterionEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub seed: u64,
    pub environment: Environment,
    pub criteria: Vec<CriterionVerdict>,
    pub audit: Vec<AuditEntry>,
    pub all_pass: bool,
}

fn read_summary(dir: &RunDir, command: &str) -> CliResult<Option<CommandOutput>> {
    let p = dir.summary_path(command);
    if !p.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&p).map_err(|e| CliError::Io(format!("cannot read {}: {e}", p.display())))?;
    serde_json::from_str(&text).map(Some).map_err(|e| CliError::Usage(format!("{} is not a {command} summary: {e}", p.display())))
}

/// Build the report from the summaries under `root` without writing anything.
pub fn collect(root: &Path) -> CliResult<Report> {
    if !root.is_dir() {
        return Err(CliError::Usage(format!("run directory {} does not exist", root.display())));
    }
    let dir = RunDir { root: root.to_path_buf() };
    let mut outputs = Vec::new();
    let mut missing = Vec::new();
    for c in COMMANDS {
        match read_summary(&dir, c)? {
            Some(o) => outputs.push(o),
            None => missing.push(c),
        }
    }
    if !missing.is_empty() {
        return Err(CliError::Usage(format!("missing runs in {}: {}", root.display(), missing.join(", "))));
    }
    let seed = outputs[0].seed;
    if let Some(o) = outputs.iter().find(|o| o.seed != seed) {
        return Err(CliError::Usage(format!("{} ran with seed {} but {} with seed {seed}", o.command, o.seed, outputs[0].command)));
    }
    let criteria: Vec<CriterionVerdict> = CRITERIA
        .iter()
        .map(|&(id, title, command)| {
            let src = outputs.iter().find(|o| o.command == command).expect("every command was read");
            let entries: Vec<CriterionEntry> = src.criteria.iter().filter(|e| e.id == id).cloned().collect();
            let missing = entries.is_empty();
            CriterionVerdict {
                id,
                title: title.into(),
                command: command.into(),
                pass: !missing && entries.iter().all(|e| e.pass),
                missing,
                entries,
            }
        })
        .collect();
    let audit = outputs.iter().flat_map(|o| o.audit.iter().cloned()).collect();
    let all_pass = criteria.iter().all(|c| c.pass);
    Ok(Report { seed, environment: outputs[0].environment.clone(), criteria, audit, all_pass })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn report_csv(r: &Report) -> String {
    let mut s = String::from("criterion,title,model,backend,pass,summary\n");
    for c in &r.criteria {
        if c.missing {
            s.push_str(&format!("{},{},,,false,not run\n", c.id, csv_field(&c.title)));
        }
        for e in &c.entries {
            let backend = crate::spectrum::backend_name(e.backend);
            s.push_str(&format!("{},{},{},{backend},{},{}\n", c.id, csv_field(&c.title), e.model, e.pass, csv_field(&e.summary)));
        }
    }
    s
}

fn slug(s: &str) -> String {
    let mut out = String::new();
    for ch in s.chars() {
        if ch.is_ascii_alphanumeric() {
            out.push(ch.to_ascii_lowercase());
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_matches('_').to_string()
}

/// "x y" lines of one series.
pub fn plot_data(s: &ConvergenceSeries) -> String {
    s.ks.iter().zip(&s.errors).map(|(x, y)| format!("{x:e} {y:e}\n")).collect()
}

/// Write report.json, report.csv and plots/ under `root`. Reruns on the same
/// summaries give byte-identical files.
pub fn cmd_report(root: &Path) -> CliResult<Report> {
    let r = collect(root)?;
    let dir = RunDir { root: root.to_path_buf() };
    dir.write_json("report.json", &r)?;
    dir.write("report.csv", &report_csv(&r))?;
    let plots = root.join("plots");
    if plots.exists() {
        std::fs::remove_dir_all(&plots).map_err(|e| CliError::Io(format!("cannot clear {}: {e}", plots.display())))?;
    }
    for c in &r.criteria {
        for e in &c.entries {
            for (j, s) in e.series.iter().enumerate() {
                dir.write(&format!("plots/c{:02}_{}_{j}_{}.dat", c.id, e.model, slug(&s.name)), &plot_data(s))?;
            }
        }
    }
    for (i, a) in r.audit.iter().enumerate() {
        for (j, s) in a.series.iter().enumerate() {
            dir.write(&format!("plots/audit{i:02}_{}_{j}_{}.dat", a.model, slug(&s.name)), &plot_data(s))?;
        }
    }
    Ok(r)
}
