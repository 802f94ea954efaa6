//! Monte-Carlo robustness runs and CSV output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fosmodel::{assemble_closed_loop, sample_uncertainty, Controller, Plant};
use crate::fsim::{simulate_closed_loop, Trajectory};
use crate::synthesis::check_arg_condition;

/// Relative final-norm threshold for calling a run convergent.
pub const SETTLE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub t_end: f64,
    pub h: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { t_end: 20.0, h: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub index: usize,
    /// Frobenius norm of the sampled `Δ`.
    pub delta_norm: f64,
    pub min_arg: f64,
    pub arg_stable: bool,
    /// `‖x(T)‖₂`, `+∞` after divergence, NaN when the sample failed.
    pub final_norm: f64,
    pub diverged: bool,
    pub stable: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessReport {
    pub seed: u64,
    pub scale: f64,
    pub samples: Vec<SampleRecord>,
}

impl RobustnessReport {
    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn stable_count(&self) -> usize {
        self.samples.iter().filter(|s| s.stable).count()
    }

    /// Zero for an empty report.
    pub fn stable_fraction(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.stable_count() as f64 / self.samples.len() as f64
        }
    }

    /// Largest final norm; failed samples count as `+∞`.
    pub fn worst_final_norm(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| if s.final_norm.is_nan() { f64::INFINITY } else { s.final_norm })
            .fold(0.0, f64::max)
    }

    pub fn diverged_count(&self) -> usize {
        self.samples.iter().filter(|s| s.diverged).count()
    }

    pub fn errors(&self) -> impl Iterator<Item = &SampleRecord> {
        self.samples.iter().filter(|s| s.error.is_some())
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Final norm below `SETTLE_FRACTION·max(1, ‖x0‖)` without divergence.
pub fn settled(traj: &Trajectory, x0: &[f64]) -> bool {
    !traj.diverged && traj.final_norm() < SETTLE_FRACTION * norm(x0).max(1.0)
}

/// Final norm above the initial one, or divergence.
pub fn nonconvergent(traj: &Trajectory) -> bool {
    traj.diverged || traj.x.first().is_some_and(|x0| traj.final_norm() > norm(x0))
}

fn blank_record(index: usize) -> SampleRecord {
    SampleRecord {
        index,
        delta_norm: f64::NAN,
        min_arg: f64::NAN,
        arg_stable: false,
        final_norm: f64::NAN,
        diverged: false,
        stable: false,
        error: None,
    }
}

#[allow(clippy::too_many_arguments)]
fn one_sample(
    plant: &Plant,
    ctrl: &Controller,
    seed: u64,
    index: usize,
    scale: f64,
    x0: &[f64],
    xc0: &[f64],
    sim: &SimOptions,
    rec: &mut SampleRecord,
) -> Result<Trajectory> {
    let unc = plant.unc.as_ref().expect("checked by caller");
    let delta = sample_uncertainty(unc, seed, index as u64, scale)?;
    rec.delta_norm = delta.norm();
    let cl = assemble_closed_loop(plant, ctrl)?;
    let v = check_arg_condition(&cl.perturbed(&delta)?, plant.q)?;
    rec.min_arg = v.min_arg;
    rec.arg_stable = v.stable;
    let traj = simulate_closed_loop(plant, Some(&delta), ctrl, x0, xc0, sim.t_end, sim.h)?;
    rec.diverged = traj.diverged;
    rec.final_norm = traj.final_norm_or_inf();
    rec.stable = rec.arg_stable && settled(&traj, x0);
    Ok(traj)
}

/// Like [`run_monte_carlo`], handing each finished trajectory to `sink`.
///
/// Sink failures abort the run; numerical failures of a sample are recorded
/// in that sample's `error` field.
#[allow(clippy::too_many_arguments)]
pub fn run_monte_carlo_with<S>(
    plant: &Plant,
    ctrl: &Controller,
    n_samples: usize,
    seed: u64,
    scale: f64,
    x0: &[f64],
    xc0: &[f64],
    sim: &SimOptions,
    sink: S,
) -> Result<RobustnessReport>
where
    S: Fn(usize, &Trajectory) -> Result<()> + Sync,
{
    if plant.unc.is_none() {
        return Err(Error::InvalidArgument(
            "robustness runs need an uncertainty model".into(),
        ));
    }
    ctrl.check_against(plant)?;
    let results: Vec<Result<SampleRecord>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rec = blank_record(i);
            match one_sample(plant, ctrl, seed, i, scale, x0, xc0, sim, &mut rec) {
                Ok(traj) => sink(i, &traj)?,
                Err(e) => {
                    log::warn!("sample {i}: {e}");
                    rec.stable = false;
                    rec.error = Some(e.to_string());
                }
            }
            Ok(rec)
        })
        .collect();
    let samples = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(RobustnessReport {
        seed,
        scale,
        samples,
    })
}

/// Samples `Δᵢ` from `(seed, i)`, checks the perturbed closed loop spectrally
/// and by simulation.
#[allow(clippy::too_many_arguments)]
pub fn run_monte_carlo(
    plant: &Plant,
    ctrl: &Controller,
    n_samples: usize,
    seed: u64,
    scale: f64,
    x0: &[f64],
    xc0: &[f64],
    sim: &SimOptions,
) -> Result<RobustnessReport> {
    run_monte_carlo_with(plant, ctrl, n_samples, seed, scale, x0, xc0, sim, |_, _| Ok(()))
}

/// Unforced runs of `n_systems` sampled plants (scale 1).
pub fn open_loop_showcase(
    plant: &Plant,
    n_systems: usize,
    seed: u64,
    x0: &[f64],
    sim: &SimOptions,
) -> Result<Vec<Trajectory>> {
    let unc = plant
        .unc
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("showcase needs an uncertainty model".into()))?;
    let ctrl = Controller::zero(0, plant.m(), plant.p());
    (0..n_systems)
        .into_par_iter()
        .map(|i| {
            let delta = sample_uncertainty(unc, seed, i as u64, 1.0)?;
            simulate_closed_loop(plant, Some(&delta), &ctrl, x0, &[], sim.t_end, sim.h)
        })
        .collect()
}

pub fn trajectory_path(dir: &Path, run: &str, i: usize) -> std::path::PathBuf {
    dir.join(format!("{run}_traj_{i}.csv"))
}

pub fn report_path(dir: &Path, run: &str) -> std::path::PathBuf {
    dir.join(format!("{run}_report.csv"))
}

fn header_for(prefix: &str, k: usize, out: &mut Vec<String>) {
    out.extend((1..=k).map(|i| format!("{prefix}{i}")));
}

pub fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let dim = |v: &Vec<Vec<f64>>| v.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    header_for("x", dim(&traj.x), &mut header);
    header_for("xc", dim(&traj.xc), &mut header);
    header_for("u", dim(&traj.u), &mut header);
    header_for("y", dim(&traj.y), &mut header);
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for k in 0..traj.t.len() {
        row.clear();
        row.push(format!("{:.9}", traj.t[k]));
        for part in [&traj.x[k], &traj.xc[k], &traj.u[k], &traj.y[k]] {
            row.extend(part.iter().map(|v| format!("{v:.9}")));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_trajectory_csv`]. The divergence flag is
/// not stored and comes back `false`.
pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.first().map(String::as_str) != Some("t") {
        return Err(Error::Io(format!("{}: first column must be `t`", path.display())));
    }
    // 0 = x, 1 = xc, 2 = u, 3 = y
    let mut group = Vec::with_capacity(header.len());
    for h in &header[1..] {
        let g = if h.starts_with("xc") {
            1
        } else if h.starts_with('x') {
            0
        } else if h.starts_with('u') {
            2
        } else if h.starts_with('y') {
            3
        } else {
            return Err(Error::Io(format!("{}: unexpected column `{h}`", path.display())));
        };
        group.push(g);
    }
    let mut traj = Trajectory {
        t: vec![],
        x: vec![],
        xc: vec![],
        u: vec![],
        y: vec![],
        diverged: false,
    };
    for rec in r.records() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut parts: [Vec<f64>; 4] = Default::default();
        for (g, v) in group.iter().zip(&vals[1..]) {
            parts[*g].push(*v);
        }
        let [x, xc, u, y] = parts;
        traj.t.push(vals[0]);
        traj.x.push(x);
        traj.xc.push(xc);
        traj.u.push(u);
        traj.y.push(y);
    }
    Ok(traj)
}

fn fmt_f(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:e}")
    }
}

/// One row per sample, then an `aggregate` row carrying the arg-stable count,
/// worst final norm, diverged count and stable fraction in the matching columns.
pub fn write_report_csv(report: &RobustnessReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record([
        "sample",
        "delta_norm",
        "min_arg",
        "arg_stable",
        "final_norm",
        "diverged",
        "stable",
        "error",
    ])?;
    for s in &report.samples {
        w.write_record([
            s.index.to_string(),
            fmt_f(s.delta_norm),
            fmt_f(s.min_arg),
            s.arg_stable.to_string(),
            fmt_f(s.final_norm),
            s.diverged.to_string(),
            s.stable.to_string(),
            s.error.clone().unwrap_or_default(),
        ])?;
    }
    let arg_count = report.samples.iter().filter(|s| s.arg_stable).count();
    w.write_record([
        "aggregate".to_string(),
        String::new(),
        String::new(),
        arg_count.to_string(),
        fmt_f(report.worst_final_norm()),
        report.diverged_count().to_string(),
        fmt_f(report.stable_fraction()),
        String::new(),
    ])?;
    let mut inner = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    inner.flush()?;
    Ok(())
}
