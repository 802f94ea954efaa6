//! Command-line front end: JSON configs, controller files and subcommands.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{
    self, nonconvergent, report_path, settled, trajectory_path, write_report_csv,
    write_trajectory_csv, SimOptions,
};
use crate::fosmodel::{self, assemble_closed_loop, Controller, Plant, UncertaintyModel};
use crate::fsim::simulate_closed_loop;
use crate::lmisolve::{SolveOptions, Verdict};
use crate::matnum::Mat;
use crate::phiexpr::PhiFunction;
use crate::synthesis::{self, check_arg_condition, verify_theorem1, Mode, Structure, SynthConfig, XiConvention};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// A matrix given either as a scalar (1×1) or as row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixValue {
    Scalar(f64),
    Rows(Vec<Vec<f64>>),
}

impl MatrixValue {
    /// Converts to a matrix; an empty value takes the shape `(rows_hint, cols_hint)`
    /// when one side of it is zero.
    fn to_mat(&self, rows_hint: usize, cols_hint: usize) -> std::result::Result<Mat, String> {
        match self {
            MatrixValue::Scalar(v) => Ok(Mat::from_element(1, 1, *v)),
            MatrixValue::Rows(rows) => {
                let cols = rows.first().map_or(0, Vec::len);
                if let Some(r) = rows.iter().find(|r| r.len() != cols) {
                    return Err(format!("ragged rows ({} vs {cols} entries)", r.len()));
                }
                if rows.is_empty() || cols == 0 {
                    if rows_hint == 0 || cols_hint == 0 {
                        return Ok(Mat::zeros(rows_hint, cols_hint));
                    }
                    return Err("matrix is empty".into());
                }
                Ok(Mat::from_fn(rows.len(), cols, |i, j| rows[i][j]))
            }
        }
    }

    pub fn from_mat(m: &Mat) -> Self {
        MatrixValue::Rows((0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Theorem2,
    Certain,
    Corollary1,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Theorem2 => Mode::Robust,
            ModeArg::Certain => Mode::Certain,
            ModeArg::Corollary1 => Mode::Hermitian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum XiArg {
    Squared,
    Plain,
}

impl From<XiArg> for XiConvention {
    fn from(x: XiArg) -> XiConvention {
        match x {
            XiArg::Squared => XiConvention::Squared,
            XiArg::Plain => XiConvention::Plain,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum StructureArg {
    Compatible,
    Free,
}

impl From<StructureArg> for Structure {
    fn from(s: StructureArg) -> Structure {
        match s {
            StructureArg::Compatible => Structure::Compatible,
            StructureArg::Free => Structure::Free,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub p: Option<usize>,
    pub q: f64,
    pub a: MatrixValue,
    pub b: MatrixValue,
    pub c: MatrixValue,
    #[serde(default)]
    pub phi: Option<String>,
    #[serde(default)]
    pub xi: f64,
    pub x0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintySection {
    pub m: MatrixValue,
    pub n1: MatrixValue,
    pub n2: MatrixValue,
    pub j: MatrixValue,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub mode: ModeArg,
    pub nc: usize,
    pub margin: f64,
    pub xi_convention: XiArg,
    pub structure: StructureArg,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            mode: ModeArg::Theorem2,
            nc: 0,
            margin: 1e-6,
            xi_convention: XiArg::Squared,
            structure: StructureArg::Compatible,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub t: f64,
    pub h: f64,
    pub xc0: Option<Vec<f64>>,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            t: 20.0,
            h: 1e-3,
            xc0: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobustnessSection {
    pub samples: usize,
    pub seed: Option<u64>,
    pub showcase_systems: usize,
}

impl Default for RobustnessSection {
    fn default() -> Self {
        RobustnessSection {
            samples: 50,
            seed: None,
            showcase_systems: 5,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub run: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    plant: PlantSection,
    uncertainty: Option<UncertaintySection>,
    #[serde(default)]
    synth: SynthSection,
    #[serde(default)]
    sim: SimSection,
    #[serde(default)]
    robustness: RobustnessSection,
    #[serde(default)]
    output: OutputSection,
}

/// A parsed and dimension-checked configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub plant: Plant,
    pub x0: Vec<f64>,
    pub scale: f64,
    pub synth: SynthSection,
    pub sim: SimSection,
    pub robustness: RobustnessSection,
    pub out_dir: PathBuf,
    pub run_name: String,
}

impl RunConfig {
    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            xi_convention: self.synth.xi_convention.into(),
            structure: self.synth.structure.into(),
            margin: self.synth.margin,
        }
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            t_end: self.sim.t,
            h: self.sim.h,
        }
    }
}

/// 1-based line and column of `key` inside the object introduced by `section`.
fn locate(text: &str, section: &str, key: &str) -> Option<(usize, usize)> {
    let find_key = |from: usize, k: &str| -> Option<usize> {
        let pat = format!("\"{k}\"");
        let mut start = from;
        while let Some(off) = text[start..].find(&pat) {
            let at = start + off;
            let rest = text[at + pat.len()..].trim_start();
            if rest.starts_with(':') {
                return Some(at);
            }
            start = at + pat.len();
        }
        None
    };
    let sec = find_key(0, section)?;
    let at = find_key(sec, key)?;
    let line = text[..at].matches('\n').count() + 1;
    let col = at - text[..at].rfind('\n').map_or(0, |i| i + 1) + 1;
    Some((line, col))
}

fn config_error(path: &Path, text: &str, section: &str, key: &str, msg: impl std::fmt::Display) -> Error {
    match locate(text, section, key) {
        Some((l, c)) => Error::Config(format!("{}:{l}:{c}: {section}.{key}: {msg}", path.display())),
        None => Error::Config(format!("{}: {section}.{key}: {msg}", path.display())),
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text, path)
}

/// Parses config text; `path` is used for diagnostics and the default run name.
pub fn parse_config(text: &str, path: &Path) -> Result<RunConfig> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| {
        Error::Config(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))
    })?;
    let err = |section: &str, key: &str, msg: String| config_error(path, text, section, key, msg);
    let ps = &raw.plant;
    let a = ps.a.to_mat(0, 0).map_err(|m| err("plant", "a", m))?;
    let n = a.nrows();
    if a.ncols() != n {
        return Err(err("plant", "a", format!("A must be square, got {}x{}", n, a.ncols())));
    }
    let b = ps.b.to_mat(n, 0).map_err(|m| err("plant", "b", m))?;
    if b.nrows() != n {
        return Err(err("plant", "b", format!("B has {} rows, A is {n}x{n}", b.nrows())));
    }
    let c = ps.c.to_mat(0, n).map_err(|m| err("plant", "c", m))?;
    if c.ncols() != n {
        return Err(err("plant", "c", format!("C has {} columns, A is {n}x{n}", c.ncols())));
    }
    let (m, p) = (b.ncols(), c.nrows());
    for (key, decl, actual) in [("n", ps.n, n), ("m", ps.m, m), ("p", ps.p, p)] {
        if let Some(d) = decl {
            if d != actual {
                return Err(err("plant", key, format!("declared {d}, matrices imply {actual}")));
            }
        }
    }
    if !(ps.q > 0.0 && ps.q < 1.0) {
        return Err(err("plant", "q", format!("order must lie in (0,1), got {}", ps.q)));
    }
    let phi = match &ps.phi {
        Some(src) => PhiFunction::parse(src, n, m).map_err(|e| err("plant", "phi", e.to_string()))?,
        None => PhiFunction::zero(n, m),
    };
    let x0 = ps.x0.clone().unwrap_or_else(|| vec![0.0; n]);
    if x0.len() != n {
        return Err(err("plant", "x0", format!("length {}, expected {n}", x0.len())));
    }

    let (unc, scale) = match &raw.uncertainty {
        Some(us) => {
            let mm = us.m.to_mat(n, 0).map_err(|e| err("uncertainty", "m", e))?;
            let n1 = us.n1.to_mat(0, n).map_err(|e| err("uncertainty", "n1", e))?;
            let n2 = us.n2.to_mat(n1.nrows(), m).map_err(|e| err("uncertainty", "n2", e))?;
            let j = us.j.to_mat(mm.ncols(), mm.ncols()).map_err(|e| err("uncertainty", "j", e))?;
            if mm.nrows() != n {
                return Err(err("uncertainty", "m", format!("M has {} rows, expected {n}", mm.nrows())));
            }
            let m0 = mm.ncols();
            if n1.shape() != (m0, n) {
                return Err(err("uncertainty", "n1", format!("N1 is {}x{}, expected {m0}x{n}", n1.nrows(), n1.ncols())));
            }
            if n2.shape() != (m0, m) {
                return Err(err("uncertainty", "n2", format!("N2 is {}x{}, expected {m0}x{m}", n2.nrows(), n2.ncols())));
            }
            if j.shape() != (m0, m0) {
                return Err(err("uncertainty", "j", format!("J is {}x{}, expected {m0}x{m0}", j.nrows(), j.ncols())));
            }
            if !(us.scale >= 0.0) || !us.scale.is_finite() {
                return Err(err("uncertainty", "scale", format!("must be nonnegative, got {}", us.scale)));
            }
            let model = UncertaintyModel::new(mm, n1, n2, j).map_err(|e| err("uncertainty", "m", e.to_string()))?;
            (Some(model), us.scale)
        }
        None => (None, 1.0),
    };
    let plant = Plant::new(a, b, c, ps.q, phi, ps.xi, unc).map_err(|e| err("plant", "a", e.to_string()))?;

    if !(raw.synth.margin > 0.0) {
        return Err(err("synth", "margin", format!("must be positive, got {}", raw.synth.margin)));
    }
    if !(raw.sim.h > 0.0) || !(raw.sim.t >= raw.sim.h) {
        return Err(err("sim", "h", format!("need h > 0 and t >= h, got h={}, t={}", raw.sim.h, raw.sim.t)));
    }
    let run_name = raw.output.run.clone().unwrap_or_else(|| {
        path.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned())
    });
    Ok(RunConfig {
        plant,
        x0,
        scale,
        synth: raw.synth,
        sim: raw.sim,
        robustness: raw.robustness,
        out_dir: raw.output.dir.unwrap_or_else(|| PathBuf::from("out")),
        run_name,
    })
}

/// On-disk controller: `{"ac": .., "bc": .., "cc": .., "dc": ..}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerFile {
    #[serde(default)]
    pub nc: Option<usize>,
    pub ac: MatrixValue,
    pub bc: MatrixValue,
    pub cc: MatrixValue,
    pub dc: MatrixValue,
}

impl ControllerFile {
    pub fn from_controller(c: &Controller) -> Self {
        ControllerFile {
            nc: Some(c.nc()),
            ac: MatrixValue::from_mat(&c.ac),
            bc: MatrixValue::from_mat(&c.bc),
            cc: MatrixValue::from_mat(&c.cc),
            dc: MatrixValue::from_mat(&c.dc),
        }
    }

    /// Builds the controller for a plant with `m` inputs and `p` outputs.
    pub fn to_controller(&self, m: usize, p: usize) -> std::result::Result<Controller, String> {
        let nc_rows = match &self.ac {
            MatrixValue::Scalar(_) => 1,
            MatrixValue::Rows(r) => r.len(),
        };
        let nc = self.nc.unwrap_or(nc_rows);
        let ac = self.ac.to_mat(nc, nc).map_err(|e| format!("ac: {e}"))?;
        let bc = self.bc.to_mat(nc, p).map_err(|e| format!("bc: {e}"))?;
        let cc = self.cc.to_mat(m, nc).map_err(|e| format!("cc: {e}"))?;
        let dc = self.dc.to_mat(m, p).map_err(|e| format!("dc: {e}"))?;
        let ctrl = Controller::new(ac, bc, cc, dc).map_err(|e| e.to_string())?;
        if ctrl.nc() != nc || ctrl.dc.shape() != (m, p) {
            return Err(format!(
                "controller has order {} and D_c {}x{}, expected order {nc} and D_c {m}x{p}",
                ctrl.nc(),
                ctrl.dc.nrows(),
                ctrl.dc.ncols()
            ));
        }
        Ok(ctrl)
    }
}

pub fn load_controller(path: &Path, plant: &Plant) -> Result<Controller> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let file: ControllerFile = serde_json::from_str(&text).map_err(|e| {
        Error::Config(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))
    })?;
    file.to_controller(plant.m(), plant.p())
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn save_controller(path: &Path, ctrl: &Controller) -> Result<()> {
    let text = serde_json::to_string_pretty(&ControllerFile::from_controller(ctrl))
        .map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

#[derive(Debug, Parser)]
#[command(name = "folmi", version, about = "Output-feedback LMI synthesis for fractional-order systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// JSON run configuration
    pub config: PathBuf,
    /// Output directory (overrides `output.dir`)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the plant assumptions
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Synthesize a controller and verify it
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        nc: Option<usize>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long, value_enum)]
        xi_convention: Option<XiArg>,
        #[arg(long, value_enum)]
        structure: Option<StructureArg>,
        /// Write the assembled LMI problem in text form
        #[arg(long)]
        dump_lmi: Option<PathBuf>,
    },
    /// Check a given controller with the analysis LMI and the spectrum
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        controller: String,
        #[arg(long, value_enum)]
        xi_convention: Option<XiArg>,
    },
    /// Simulate the nominal closed loop (`--controller none` for u = 0)
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        controller: String,
    },
    /// Monte-Carlo runs over sampled uncertainties
    Robustness {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        controller: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Unforced runs of sampled plants
    Showcase {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NumericalFailure(_) => EXIT_NUMERIC,
        _ => EXIT_CONFIG,
    }
}

fn prepare(common: &Common) -> Result<RunConfig> {
    let mut cfg = load_config(&common.config)?;
    if let Some(o) = &common.out {
        cfg.out_dir = o.clone();
    }
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.out_dir)?;
    Ok(&cfg.out_dir)
}

fn controller_arg(arg: &str, plant: &Plant) -> Result<Controller> {
    if arg == "none" {
        Ok(Controller::zero(0, plant.m(), plant.p()))
    } else {
        load_controller(Path::new(arg), plant)
    }
}

fn xc0_for(cfg: &RunConfig, nc: usize) -> Result<Vec<f64>> {
    match &cfg.sim.xc0 {
        Some(v) if v.len() == nc => Ok(v.clone()),
        Some(v) => Err(Error::Config(format!(
            "sim.xc0 has length {}, controller order is {nc}",
            v.len()
        ))),
        None => Ok(vec![0.0; nc]),
    }
}

fn seed_for(cfg: &RunConfig, flag: Option<u64>) -> Result<u64> {
    flag.or(cfg.robustness.seed)
        .ok_or_else(|| Error::Config("a seed is required (robustness.seed or --seed)".into()))
}

fn fmt_mat(name: &str, m: &Mat, out: &mut String) {
    let _ = writeln!(out, "{name} ({}x{}):", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:>12.6}")).collect();
        let _ = writeln!(out, "  [{}]", row.join(" "));
    }
}

fn verdict_code(v: Verdict) -> i32 {
    match v {
        Verdict::Feasible => EXIT_OK,
        Verdict::Infeasible => EXIT_NEGATIVE,
        Verdict::Indeterminate => EXIT_NUMERIC,
    }
}

fn solve_options(cfg: &RunConfig) -> SolveOptions {
    SolveOptions {
        margin: cfg.synth.margin,
        ..SolveOptions::default()
    }
}

fn cmd_validate(cfg: &RunConfig) -> Result<i32> {
    let rep = fosmodel::validate(&cfg.plant);
    for c in &rep.checks {
        println!("{:<24} {}  {}", c.name, if c.passed { "ok  " } else { "FAIL" }, c.detail);
    }
    Ok(if rep.all_passed() { EXIT_OK } else { EXIT_NEGATIVE })
}

fn cmd_synth(mut cfg: RunConfig, nc: Option<usize>, mode: Option<ModeArg>, xi: Option<XiArg>, structure: Option<StructureArg>, dump: Option<&Path>) -> Result<i32> {
    if let Some(nc) = nc {
        cfg.synth.nc = nc;
    }
    if let Some(m) = mode {
        cfg.synth.mode = m;
    }
    if let Some(x) = xi {
        cfg.synth.xi_convention = x;
    }
    if let Some(s) = structure {
        cfg.synth.structure = s;
    }
    let sc = cfg.synth_config();
    let opts = solve_options(&cfg);
    let mode: Mode = cfg.synth.mode.into();
    if let Some(path) = dump {
        let prob = match mode {
            Mode::Robust => synthesis::build_theorem2(&cfg.plant, cfg.synth.nc, &sc)?,
            Mode::Certain => synthesis::build_certain(&cfg.plant, cfg.synth.nc, &sc)?,
            Mode::Hermitian => synthesis::build_corollary1(&cfg.plant, cfg.synth.nc, &sc)?,
        };
        let mut f = std::io::BufWriter::new(fs::File::create(path)?);
        prob.lmi.write_standard_form(&mut f)?;
    }
    let outcome = synthesis::synthesize(&cfg.plant, cfg.synth.nc, mode, &sc, &opts)?;
    let f = &outcome.feasibility;
    println!(
        "synthesis ({:?}, nc = {}): {} (t* = {:.3e}, iterations = {})",
        cfg.synth.mode, cfg.synth.nc, f.verdict, f.t_star, f.iterations
    );
    let Some(res) = outcome.result else {
        return Ok(verdict_code(f.verdict));
    };
    let mut text = String::new();
    fmt_mat("Ac", &res.controller.ac, &mut text);
    fmt_mat("Bc", &res.controller.bc, &mut text);
    fmt_mat("Cc", &res.controller.cc, &mut text);
    fmt_mat("Dc", &res.controller.dc, &mut text);
    print!("{text}");
    println!("recovery residuals: Bc {:.3e}, Dc {:.3e}", res.residual_b, res.residual_d);
    if let Some(tau) = res.tau {
        println!("tau = {tau:.6e}");
    }
    if let Some(mu) = res.mu {
        println!("mu = {mu:.6e}");
    }
    println!(
        "nominal arg check: {} (min |arg| = {:.6}, threshold = {:.6})",
        if res.nominal.stable { "stable" } else { "unstable" },
        res.nominal.min_arg,
        res.nominal.threshold
    );
    let t1 = match res.theorem1 {
        Some(v) => v,
        None => verify_theorem1(&cfg.plant, &res.controller, &sc, &opts)?.verdict,
    };
    println!("analysis LMI: {t1}");
    let dir = out_dir(&cfg)?;
    let path = dir.join(format!("{}_controller_nc{}.json", cfg.run_name, cfg.synth.nc));
    save_controller(&path, &res.controller)?;
    println!("controller written to {}", path.display());
    Ok(match (res.nominal.stable, t1) {
        (true, Verdict::Feasible) => EXIT_OK,
        (_, Verdict::Indeterminate) => EXIT_NUMERIC,
        _ => EXIT_NEGATIVE,
    })
}

fn cmd_analyze(mut cfg: RunConfig, ctrl_arg: &str, xi: Option<XiArg>) -> Result<i32> {
    if let Some(x) = xi {
        cfg.synth.xi_convention = x;
    }
    let ctrl = controller_arg(ctrl_arg, &cfg.plant)?;
    let cl = assemble_closed_loop(&cfg.plant, &ctrl)?;
    let v = check_arg_condition(&cl.a_psi, cfg.plant.q)?;
    println!(
        "nominal arg check: {} (min |arg| = {:.6}, threshold = {:.6})",
        if v.stable { "stable" } else { "unstable" },
        v.min_arg,
        v.threshold
    );
    let f = verify_theorem1(&cfg.plant, &ctrl, &cfg.synth_config(), &solve_options(&cfg))?;
    println!("analysis LMI: {} (margin {:.3e})", f.verdict, f.achieved_margin);
    Ok(match (v.stable, f.verdict) {
        (true, Verdict::Feasible) => EXIT_OK,
        (_, Verdict::Indeterminate) => EXIT_NUMERIC,
        _ => EXIT_NEGATIVE,
    })
}

fn cmd_simulate(cfg: RunConfig, ctrl_arg: &str) -> Result<i32> {
    let ctrl = controller_arg(ctrl_arg, &cfg.plant)?;
    let xc0 = xc0_for(&cfg, ctrl.nc())?;
    let tr = simulate_closed_loop(&cfg.plant, None, &ctrl, &cfg.x0, &xc0, cfg.sim.t, cfg.sim.h)?;
    let path = trajectory_path(out_dir(&cfg)?, &cfg.run_name, 0);
    write_trajectory_csv(&tr, &path)?;
    println!("trajectory written to {} ({} samples)", path.display(), tr.len());
    if tr.diverged {
        println!("diverged at t = {:.4}", tr.t.last().copied().unwrap_or(0.0));
        return Ok(EXIT_NEGATIVE);
    }
    println!("final |x| = {:.6e}", tr.final_norm());
    if settled(&tr, &cfg.x0) {
        Ok(EXIT_OK)
    } else {
        if nonconvergent(&tr) {
            println!("diverging: final |x| exceeds initial |x|");
        } else {
            println!("did not converge");
        }
        Ok(EXIT_NEGATIVE)
    }
}

fn cmd_robustness(cfg: RunConfig, ctrl_arg: &str, seed: Option<u64>) -> Result<i32> {
    let seed = seed_for(&cfg, seed)?;
    let ctrl = controller_arg(ctrl_arg, &cfg.plant)?;
    let xc0 = xc0_for(&cfg, ctrl.nc())?;
    let dir = out_dir(&cfg)?;
    let rep = experiment::run_monte_carlo_with(
        &cfg.plant,
        &ctrl,
        cfg.robustness.samples,
        seed,
        cfg.scale,
        &cfg.x0,
        &xc0,
        &cfg.sim_options(),
        |i, tr| write_trajectory_csv(tr, &trajectory_path(dir, &cfg.run_name, i)),
    )?;
    let path = report_path(dir, &cfg.run_name);
    write_report_csv(&rep, &path)?;
    println!(
        "{} samples, stable fraction {:.4}, worst final |x| {:.3e}, {} diverged, {} failed",
        rep.n_samples(),
        rep.stable_fraction(),
        rep.worst_final_norm(),
        rep.diverged_count(),
        rep.errors().count()
    );
    println!("report written to {}", path.display());
    Ok(if rep.n_samples() > 0 && rep.stable_count() == rep.n_samples() {
        EXIT_OK
    } else {
        EXIT_NEGATIVE
    })
}

fn cmd_showcase(cfg: RunConfig, seed: Option<u64>) -> Result<i32> {
    let seed = seed_for(&cfg, seed)?;
    let trs = experiment::open_loop_showcase(
        &cfg.plant,
        cfg.robustness.showcase_systems,
        seed,
        &cfg.x0,
        &cfg.sim_options(),
    )?;
    let dir = out_dir(&cfg)?;
    for (i, tr) in trs.iter().enumerate() {
        write_trajectory_csv(tr, &trajectory_path(dir, &cfg.run_name, i))?;
        let state = if tr.diverged {
            "diverged".to_string()
        } else {
            format!("final |x| = {:.3e}", tr.final_norm())
        };
        println!(
            "system {i}: {} ({state})",
            if nonconvergent(tr) { "non-convergent" } else { "convergent" }
        );
    }
    println!(
        "{} of {} non-convergent",
        trs.iter().filter(|t| nonconvergent(t)).count(),
        trs.len()
    );
    Ok(EXIT_OK)
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Validate { common } => prepare(&common).and_then(|c| cmd_validate(&c)),
        Command::Synth {
            common,
            nc,
            mode,
            xi_convention,
            structure,
            dump_lmi,
        } => prepare(&common)
            .and_then(|c| cmd_synth(c, nc, mode, xi_convention, structure, dump_lmi.as_deref())),
        Command::Analyze {
            common,
            controller,
            xi_convention,
        } => prepare(&common).and_then(|c| cmd_analyze(c, &controller, xi_convention)),
        Command::Simulate { common, controller } => {
            prepare(&common).and_then(|c| cmd_simulate(c, &controller))
        }
        Command::Robustness {
            common,
            controller,
            seed,
        } => prepare(&common).and_then(|c| cmd_robustness(c, &controller, seed)),
        Command::Showcase { common, seed } => prepare(&common).and_then(|c| cmd_showcase(c, seed)),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
