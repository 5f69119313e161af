use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use beliefcal::calibrate::calibrate_run_with;
use beliefcal::metrics::{CellModel, RowOutcome};
use beliefcal::posterior::fit_posterior;
use beliefcal::{Belief, ContextKind, Decision, Execution};

use crate::config::{Resolved, RunConfig};
use crate::error::CliError;
use crate::report;

/// Rows to explain, by original row index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RowSelection {
    All,
    AllDenied,
    /// Explicit indices, e.g. `3,10-12`.
    Indices(Vec<usize>),
}

impl FromStr for RowSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "all" => return Ok(RowSelection::All),
            "all-denied" => return Ok(RowSelection::AllDenied),
            _ => {}
        }
        let bad = |part: &str| {
            format!("bad row selector `{part}`: use all, all-denied or a list like 0,4-7")
        };
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim) {
            match part.split_once('-') {
                Some((a, b)) => {
                    let a: usize = a.trim().parse().map_err(|_| bad(part))?;
                    let b: usize = b.trim().parse().map_err(|_| bad(part))?;
                    if a > b {
                        return Err(bad(part));
                    }
                    out.extend(a..=b);
                }
                None => out.push(part.parse().map_err(|_| bad(part))?),
            }
        }
        Ok(RowSelection::Indices(out))
    }
}

/// Sequential for one worker, rayon otherwise.
pub fn execution_for(threads: usize) -> Execution {
    if threads == 1 {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::io(&format!("cannot create {}", dir.display()), e))
}

fn create_file(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
    let path = dir.join(name);
    let f = File::create(&path)
        .map_err(|e| CliError::io(&format!("cannot write {}", path.display()), e))?;
    Ok((path, BufWriter::new(f)))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    fs::write(&path, text)
        .map_err(|e| CliError::io(&format!("cannot write {}", path.display()), e))?;
    Ok(path)
}

pub struct CalibrateSummary {
    pub cells: usize,
    pub retained: usize,
    pub frontier: usize,
    pub output_dir: PathBuf,
}

/// Sweep, frontier and all four report files.
pub fn calibrate(resolved: &Resolved, exec: Execution) -> Result<CalibrateSummary, CliError> {
    let cfg = &resolved.config;
    let prepared = resolved.prepare()?;
    let ds = &prepared.dataset;
    let ctx = cfg.context_spec(ds)?;
    let filters = cfg.filters();
    let run = calibrate_run_with(ds, &cfg.grid, &ctx, &resolved.objectives, &filters, exec)?;
    if run.empty_after_filter {
        eprintln!("warning: no cell passed the filters; the frontier is empty");
    }

    let dir = &resolved.output_dir;
    create_dir(dir)?;
    let csv_err =
        |p: &Path, e: csv::Error| CliError::io(&format!("cannot write {}", p.display()), e);
    let (path, out) = create_file(dir, "cells.csv")?;
    report::write_cells(out, &run.cells).map_err(|e| csv_err(&path, e))?;
    let (path, out) = create_file(dir, "pareto.csv")?;
    report::write_pareto(out, &run).map_err(|e| csv_err(&path, e))?;
    let show_beta = cfg.grid.betas != [0.0];
    write_text(
        dir,
        "pareto.md",
        &report::pareto_markdown(&run, ctx.kind, show_beta),
    )?;
    write_text(
        dir,
        "scatter.svg",
        &report::scatter_svg(&run, &filters, ctx.kind),
    )?;

    Ok(CalibrateSummary {
        cells: run.cells.len(),
        retained: run.retained,
        frontier: run.frontier.len(),
        output_dir: dir.clone(),
    })
}

/// Belief chosen on the command line for `recourse`.
#[derive(Clone, Copy, Debug)]
pub struct BeliefChoice {
    pub sigma: f64,
    pub lambda: f64,
    pub beta: f64,
}

/// Per-row decisions and recourse actions at one belief; writes `flipset.csv`.
pub fn recourse(
    resolved: &Resolved,
    choice: BeliefChoice,
    rows: &RowSelection,
    exec: Execution,
) -> Result<(PathBuf, usize), CliError> {
    let cfg = &resolved.config;
    let prepared = resolved.prepare()?;
    let ds = &prepared.dataset;
    let ctx = cfg.context_spec(ds)?;
    if choice.beta != 0.0 && ctx.kind != ContextKind::Policy {
        return Err(CliError::Config(format!(
            "beta = {} requires the policy context",
            choice.beta
        )));
    }
    let belief = Belief::new(
        choice.sigma,
        choice.lambda,
        ctx.prior_profile(ds),
        choice.beta,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    let posterior = fit_posterior(ds, &belief).map_err(|e| CliError::Solver(e.to_string()))?;
    let model = CellModel::new(&posterior, choice.beta, ctx.weights.as_ref(), ds.intercept)?;

    let positions: Vec<usize> = match rows {
        RowSelection::All | RowSelection::AllDenied => (0..ds.n()).collect(),
        RowSelection::Indices(ids) => ids
            .iter()
            .map(|id| {
                prepared
                    .row_ids
                    .binary_search(id)
                    .map_err(|_| CliError::Config(format!("row {id} is not in the data")))
            })
            .collect::<Result<_, _>>()?,
    };
    let outcomes: Vec<(usize, RowOutcome)> = exec.try_map_indexed(positions.len(), |k| {
        let i = positions[k];
        let id = prepared.row_ids[i];
        model
            .explain(&ds.row(i), ds.y[i])
            .map(|o| (id, o))
            .map_err(|e| CliError::Solver(format!("row {id}: {e}")))
    })?;
    let outcomes: Vec<(usize, RowOutcome)> = match rows {
        RowSelection::AllDenied => outcomes
            .into_iter()
            .filter(|(_, o)| o.decision == Decision::Deny)
            .collect(),
        _ => outcomes,
    };

    let dir = &resolved.output_dir;
    create_dir(dir)?;
    let (path, out) = create_file(dir, "flipset.csv")?;
    report::write_flipset(out, &ds.feature_names, &outcomes)
        .map_err(|e| CliError::io(&format!("cannot write {}", path.display()), e))?;
    Ok((path, outcomes.len()))
}

pub struct ValidateSummary {
    pub n: usize,
    pub d: usize,
    pub actionable: usize,
    pub cells: usize,
}

/// Parse the config and the data; no sweep.
pub fn validate(config_path: &Path) -> Result<ValidateSummary, CliError> {
    let resolved = RunConfig::load(config_path)?;
    let prepared = resolved.prepare()?;
    let ds = &prepared.dataset;
    resolved.config.context_spec(ds)?;
    Ok(ValidateSummary {
        n: prepared.full_rows,
        d: prepared.raw_features,
        actionable: ds.actionable.iter().filter(|&&a| a).count(),
        cells: resolved.config.grid.len(),
    })
}
