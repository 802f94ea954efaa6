//! Controller synthesis and analysis LMIs, controller recovery and the
//! fractional stability tests.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fosmodel::{assemble_closed_loop, Controller, Plant};
use crate::lmisolve::{
    assemble_block, hermitian_to_real, solve_feasibility, AffineMatrixExpr, Cell, Feasibility,
    HermitianExpr, LinExpr, LmiProblem, Sense, SolveOptions, VarKind, VarSpace, Verdict,
};
use crate::matnum::{self, Complex64, Mat};

/// How the configured `ξ` enters the Lipschitz block `τ·ξ_eff·I`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum XiConvention {
    /// `ξ_eff = ξ²`.
    #[default]
    Squared,
    /// `ξ_eff = ξ`.
    Plain,
}

impl XiConvention {
    pub fn effective(self, xi: f64) -> f64 {
        match self {
            XiConvention::Squared => xi * xi,
            XiConvention::Plain => xi,
        }
    }
}

/// Parametrisation of the output-coupled synthesis variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Structure {
    /// `𝔅` is `n_c×p`, `𝔇` is `m×p`, both entering through `·C`, and `P_u`
    /// is restricted by `C·P_u = P̂·C`. Recovery is then exact.
    #[default]
    Compatible,
    /// `𝔅` is `n_c×n`, `𝔇` is `m×n` with no restriction on `P_u`.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Robust synthesis for the uncertain Lipschitz plant.
    Robust,
    /// Uncertainty ignored: only the `Λ₁₁` block.
    Certain,
    /// Linear plant, Hermitian variables (experimental).
    Hermitian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub xi_convention: XiConvention,
    pub structure: Structure,
    /// Lower bound for positive variables (`τ`, `μ`, `P ⪰ margin·I`).
    pub margin: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            xi_convention: XiConvention::Squared,
            structure: Structure::Compatible,
            margin: 1e-6,
        }
    }
}

/// An assembled synthesis problem together with what recovery needs to know.
#[derive(Debug, Clone)]
pub struct SynthesisProblem {
    pub mode: Mode,
    pub nc: usize,
    pub structure: Structure,
    /// Rotation angle `θ = (1−q)π/2`, used by the Hermitian mode.
    pub theta: f64,
    pub lmi: LmiProblem,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityVerdict {
    pub stable: bool,
    pub min_arg: f64,
    pub threshold: f64,
    pub eigenvalues: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub controller: Controller,
    pub p_u: Mat,
    pub p_d: Mat,
    pub tau: Option<f64>,
    pub mu: Option<f64>,
    /// `‖B_c·C·P_u − 𝔅‖_F`.
    pub residual_b: f64,
    /// `‖D_c·C·P_u − 𝔇‖_F`.
    pub residual_d: f64,
    pub nominal: StabilityVerdict,
    /// Analysis LMI on the recovered controller (not run in Hermitian mode).
    pub theorem1: Option<Verdict>,
}

#[derive(Debug, Clone)]
pub struct SynthesisOutcome {
    pub problem: SynthesisProblem,
    pub feasibility: Feasibility,
    pub result: Option<SynthesisResult>,
}

fn eye(n: usize) -> Mat {
    Mat::identity(n, n)
}

fn konst(m: Mat) -> Cell {
    Cell::Expr(LinExpr::constant(m))
}

fn check_order(q: f64) -> Result<()> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "fractional order must lie in (0,1), got {q}"
        )));
    }
    Ok(())
}

/// `θ = (1−q)π/2`.
pub fn rotation_angle(q: f64) -> f64 {
    (1.0 - q) * PI / 2.0
}

fn with_structure(
    plant: &Plant,
    nc: usize,
    structure: Structure,
    mut decl: Vec<(&'static str, VarKind)>,
    dname: &'static str,
    bname: &'static str,
) -> Vec<(&'static str, VarKind)> {
    let (n, m, p) = (plant.n(), plant.m(), plant.p());
    let w = match structure {
        Structure::Compatible => p,
        Structure::Free => n,
    };
    decl.push((dname, VarKind::Full(m, w)));
    if nc > 0 {
        decl.push((bname, VarKind::Full(nc, w)));
    }
    if structure == Structure::Compatible {
        decl.push(("Phat", VarKind::Full(p, p)));
    }
    decl
}

/// `X` or `X·C` depending on the structure.
fn output_coupled(vars: &VarSpace, name: &str, plant: &Plant, s: Structure) -> Result<LinExpr> {
    let e = vars.expr(name)?;
    match s {
        Structure::Compatible => e.rmul(&plant.c),
        Structure::Free => Ok(e),
    }
}

/// Adds `C·Y − P̂·C = 0` in compatible mode.
fn add_compatibility(
    prob: &mut LmiProblem,
    plant: &Plant,
    y: &LinExpr,
    s: Structure,
) -> Result<()> {
    if s == Structure::Compatible {
        let phat = prob.vars.expr("Phat")?;
        let e = y.lmul(&plant.c)?.sub(&phat.rmul(&plant.c)?)?;
        prob.add_equality("C*Pu = Phat*C", e);
    }
    Ok(())
}

/// The `Λ₁₁` grid rows for the `(x, x_c, w)` partition, dropping `x_c` when `n_c = 0`.
struct Lambda11 {
    /// Upper-triangular cells, indexed `[row][col]` in the reduced partition.
    cells: Vec<Vec<Cell>>,
}

fn lambda11(
    plant: &Plant,
    vars: &VarSpace,
    nc: usize,
    xi_eff: f64,
    structure: Structure,
) -> Result<Lambda11> {
    let n = plant.n();
    let (a, b) = (&plant.a, &plant.b);
    let pu = vars.expr("Pu")?;
    let tau = vars.expr("tau")?;
    let dd = output_coupled(vars, "Dcal", plant, structure)?;
    let bd = dd.lmul(b)?;
    let l11 = pu
        .lmul(a)?
        .add(&pu.rmul(&a.transpose())?)?
        .add(&bd)?
        .add(&bd.transpose())?
        .add(&tau.scalar_times(&(eye(n) * xi_eff))?)?;
    let w = tau.scalar_times(&(-eye(n)))?;
    let cells = if nc > 0 {
        let cc = vars.expr("Ccal")?;
        let bb = output_coupled(vars, "Bcal", plant, structure)?;
        let ac = vars.expr("Acal")?;
        let l12 = cc.lmul(b)?.add(&bb.transpose())?;
        let l22 = ac.sym()?.add(&tau.scalar_times(&(eye(nc) * xi_eff))?)?;
        vec![
            vec![Cell::Expr(l11), Cell::Expr(l12), Cell::Expr(pu)],
            vec![Cell::Star, Cell::Expr(l22), Cell::Zero],
            vec![Cell::Star, Cell::Star, Cell::Expr(w)],
        ]
    } else {
        vec![
            vec![Cell::Expr(l11), Cell::Expr(pu)],
            vec![Cell::Star, Cell::Expr(w)],
        ]
    };
    Ok(Lambda11 { cells })
}

/// Robust synthesis LMI, total dimension `2n + n_c + 2m₀`.
pub fn build_theorem2(plant: &Plant, nc: usize, cfg: &SynthConfig) -> Result<SynthesisProblem> {
    check_order(plant.q)?;
    let unc = plant
        .unc
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("robust synthesis needs an uncertainty model".into()))?;
    let (n, m0) = (plant.n(), unc.m0());
    let mut decl = vec![("Pu", VarKind::Symmetric(n))];
    if nc > 0 {
        decl.push(("Pd", VarKind::Symmetric(nc)));
        decl.push(("Acal", VarKind::Full(nc, nc)));
        decl.push(("Ccal", VarKind::Full(plant.m(), nc)));
    }
    let mut decl = with_structure(plant, nc, cfg.structure, decl, "Dcal", "Bcal");
    decl.push(("tau", VarKind::Scalar));
    decl.push(("mu", VarKind::Scalar));
    let vars = VarSpace::declare(&decl)?;

    let xi_eff = cfg.xi_convention.effective(plant.xi);
    let l = lambda11(plant, &vars, nc, xi_eff, cfg.structure)?;
    let pu = vars.expr("Pu")?;
    let mu = vars.expr("mu")?;
    let dd = output_coupled(&vars, "Dcal", plant, cfg.structure)?;
    let q1 = pu.lmul(&unc.n1)?.add(&dd.lmul(&unc.n2)?)?;

    let k = l.cells.len();
    let mut grid: Vec<Vec<Cell>> = Vec::with_capacity(k + 2);
    for (i, mut row) in l.cells.into_iter().enumerate() {
        let (pm, pn) = match i {
            0 => (konst(unc.m.clone()), Cell::Expr(q1.transpose())),
            _ if nc > 0 && i == 1 => (
                konst(Mat::zeros(nc, m0)),
                Cell::Expr(vars.expr("Ccal")?.lmul(&unc.n2)?.transpose()),
            ),
            _ => (konst(Mat::zeros(n, m0)), konst(Mat::zeros(n, m0))),
        };
        row.push(pm);
        row.push(pn);
        grid.push(row);
    }
    let mut r_mu: Vec<Cell> = (0..k).map(|_| Cell::Star).collect();
    r_mu.push(Cell::Expr(mu.scalar_times(&(-eye(m0)))?));
    r_mu.push(Cell::Expr(mu.scalar_times(&eye(m0))?));
    grid.push(r_mu);
    let mut r_j: Vec<Cell> = (0..=k).map(|_| Cell::Star).collect();
    r_j.push(Cell::Expr(
        mu.scalar_times(&(-eye(m0)))?
            .add_const(&(-matnum::sym(&unc.j)?))?,
    ));
    grid.push(r_j);

    let mut prob = LmiProblem::new(vars);
    prob.add_constraint("robust", assemble_block(grid)?, Sense::NegDef);
    prob.add_lower_bound("Pu", cfg.margin)?;
    if nc > 0 {
        prob.add_lower_bound("Pd", cfg.margin)?;
    }
    prob.add_lower_bound("tau", cfg.margin)?;
    prob.add_lower_bound("mu", cfg.margin)?;
    add_compatibility(&mut prob, plant, &pu, cfg.structure)?;
    Ok(SynthesisProblem {
        mode: Mode::Robust,
        nc,
        structure: cfg.structure,
        theta: rotation_angle(plant.q),
        lmi: prob,
    })
}

/// Synthesis for the certain plant: the `Λ₁₁` block only.
pub fn build_certain(plant: &Plant, nc: usize, cfg: &SynthConfig) -> Result<SynthesisProblem> {
    check_order(plant.q)?;
    let n = plant.n();
    let mut decl = vec![("Pu", VarKind::Symmetric(n))];
    if nc > 0 {
        decl.push(("Pd", VarKind::Symmetric(nc)));
        decl.push(("Acal", VarKind::Full(nc, nc)));
        decl.push(("Ccal", VarKind::Full(plant.m(), nc)));
    }
    let mut decl = with_structure(plant, nc, cfg.structure, decl, "Dcal", "Bcal");
    decl.push(("tau", VarKind::Scalar));
    let vars = VarSpace::declare(&decl)?;
    let l = lambda11(plant, &vars, nc, cfg.xi_convention.effective(plant.xi), cfg.structure)?;
    let pu = vars.expr("Pu")?;
    let mut prob = LmiProblem::new(vars);
    prob.add_constraint("certain", assemble_block(l.cells)?, Sense::NegDef);
    prob.add_lower_bound("Pu", cfg.margin)?;
    if nc > 0 {
        prob.add_lower_bound("Pd", cfg.margin)?;
    }
    prob.add_lower_bound("tau", cfg.margin)?;
    add_compatibility(&mut prob, plant, &pu, cfg.structure)?;
    Ok(SynthesisProblem {
        mode: Mode::Certain,
        nc,
        structure: cfg.structure,
        theta: rotation_angle(plant.q),
        lmi: prob,
    })
}

/// `2·Re(r·(Xr + i·Xi)) = 2(cosθ·Xr − sinθ·Xi)`.
fn rotated(vars: &VarSpace, re: &str, im: &str, theta: f64) -> Result<LinExpr> {
    vars.expr(re)?
        .scale(2.0 * theta.cos())
        .sub(&vars.expr(im)?.scale(2.0 * theta.sin()))
}

fn hermitian_var(vars: &VarSpace, re: &str, im: &str) -> Result<AffineMatrixExpr> {
    hermitian_to_real(&HermitianExpr {
        re: vars.expr(re)?,
        im: vars.expr(im)?,
    })
}

/// Linear-plant synthesis with Hermitian `P_u`, `P_d` (experimental).
///
/// The real variables `T₁…T₄` stand for `A_c·Y_d`, `B_c·C·Y_u`, `C_c·Y_d`
/// and `D_c·C·Y_u` with `Y = rP + r̄P̄`.
pub fn build_corollary1(plant: &Plant, nc: usize, cfg: &SynthConfig) -> Result<SynthesisProblem> {
    check_order(plant.q)?;
    if !plant.phi.is_identically_zero() {
        return Err(Error::InvalidArgument(
            "the Hermitian synthesis applies to linear plants only (phi must be 0)".into(),
        ));
    }
    let unc = plant
        .unc
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("Hermitian synthesis needs an uncertainty model".into()))?;
    let (n, m, m0) = (plant.n(), plant.m(), unc.m0());
    let theta = rotation_angle(plant.q);
    let mut decl = vec![("Pur", VarKind::Symmetric(n)), ("Pui", VarKind::Skew(n))];
    if nc > 0 {
        decl.push(("Pdr", VarKind::Symmetric(nc)));
        decl.push(("Pdi", VarKind::Skew(nc)));
        decl.push(("T1", VarKind::Full(nc, nc)));
        decl.push(("T3", VarKind::Full(m, nc)));
    }
    let mut decl = with_structure(plant, nc, cfg.structure, decl, "T4", "T2");
    decl.push(("mu", VarKind::Scalar));
    let vars = VarSpace::declare(&decl)?;

    let (a, b) = (&plant.a, &plant.b);
    let yu = rotated(&vars, "Pur", "Pui", theta)?;
    let t4 = output_coupled(&vars, "T4", plant, cfg.structure)?;
    let bt4 = t4.lmul(b)?;
    let l11 = yu
        .lmul(a)?
        .add(&yu.lmul(a)?.transpose())?
        .add(&bt4)?
        .add(&bt4.transpose())?;
    let l13_top = yu.lmul(&unc.n1)?.add(&t4.lmul(&unc.n2)?)?.transpose();
    let mu = vars.expr("mu")?;

    let mut grid: Vec<Vec<Cell>> = Vec::new();
    if nc > 0 {
        let t1 = vars.expr("T1")?;
        let t2 = output_coupled(&vars, "T2", plant, cfg.structure)?;
        let t3 = vars.expr("T3")?;
        let l12 = t3.lmul(b)?.add(&t2.transpose())?;
        grid.push(vec![
            Cell::Expr(l11),
            Cell::Expr(l12),
            konst(unc.m.clone()),
            Cell::Expr(l13_top),
        ]);
        grid.push(vec![
            Cell::Star,
            Cell::Expr(t1.sym()?),
            konst(Mat::zeros(nc, m0)),
            Cell::Expr(t3.lmul(&unc.n2)?.transpose()),
        ]);
    } else {
        grid.push(vec![
            Cell::Expr(l11),
            konst(unc.m.clone()),
            Cell::Expr(l13_top),
        ]);
    }
    let k = grid.len();
    let mut r_mu: Vec<Cell> = (0..k).map(|_| Cell::Star).collect();
    r_mu.push(Cell::Expr(mu.scalar_times(&(-eye(m0)))?));
    r_mu.push(Cell::Expr(mu.scalar_times(&eye(m0))?));
    grid.push(r_mu);
    let mut r_j: Vec<Cell> = (0..=k).map(|_| Cell::Star).collect();
    r_j.push(Cell::Expr(
        mu.scalar_times(&(-eye(m0)))?
            .add_const(&(-matnum::sym(&unc.j)?))?,
    ));
    grid.push(r_j);

    let pu_h = hermitian_var(&vars, "Pur", "Pui")?;
    let pd_h = if nc > 0 {
        Some(hermitian_var(&vars, "Pdr", "Pdi")?)
    } else {
        None
    };
    let mut prob = LmiProblem::new(vars);
    prob.add_constraint("hermitian", assemble_block(grid)?, Sense::NegDef);
    prob.add_constraint("Pu Hermitian > 0", shift(pu_h, cfg.margin)?, Sense::PosDef);
    if let Some(pd) = pd_h {
        prob.add_constraint("Pd Hermitian > 0", shift(pd, cfg.margin)?, Sense::PosDef);
    }
    prob.add_lower_bound("mu", cfg.margin)?;
    add_compatibility(&mut prob, plant, &yu, cfg.structure)?;
    Ok(SynthesisProblem {
        mode: Mode::Hermitian,
        nc,
        structure: cfg.structure,
        theta,
        lmi: prob,
    })
}

fn shift(e: AffineMatrixExpr, margin: f64) -> Result<AffineMatrixExpr> {
    let n = e.dim;
    Ok(AffineMatrixExpr {
        f0: e.f0 - eye(n) * margin,
        ..e
    })
}

/// Recovers `(A_c, B_c, C_c, D_c)` from a feasible assignment and runs the
/// a-posteriori checks on the nominal closed loop.
pub fn recover_controller(
    sp: &SynthesisProblem,
    plant: &Plant,
    x: &[f64],
    cfg: &SynthConfig,
    opts: &SolveOptions,
) -> Result<SynthesisResult> {
    let vars = &sp.lmi.vars;
    let nc = sp.nc;
    let (m, p) = (plant.m(), plant.p());
    let value = |name: &str| vars.value(name, x);
    let coupled = |name: &str| -> Result<Mat> {
        let v = value(name)?;
        Ok(match sp.structure {
            Structure::Compatible => v * &plant.c,
            Structure::Free => v,
        })
    };

    // Y_u, Y_d: the matrices the controller variables were multiplied by
    let (yu, yd, pu, pd, bname, dname, aname, cname) = match sp.mode {
        Mode::Hermitian => {
            let c2 = 2.0 * sp.theta.cos();
            let s2 = 2.0 * sp.theta.sin();
            let yu = value("Pur")? * c2 - value("Pui")? * s2;
            let (yd, pd) = if nc > 0 {
                (value("Pdr")? * c2 - value("Pdi")? * s2, value("Pdr")?)
            } else {
                (Mat::zeros(0, 0), Mat::zeros(0, 0))
            };
            (yu, yd, value("Pur")?, pd, "T2", "T4", "T1", "T3")
        }
        _ => {
            let pu = value("Pu")?;
            let pd = if nc > 0 { value("Pd")? } else { Mat::zeros(0, 0) };
            (pu.clone(), pd.clone(), pu, pd, "Bcal", "Dcal", "Acal", "Ccal")
        }
    };
    if nc > 0 && !matnum::is_posdef(&((&pd + pd.transpose()) * 0.5), 0.0)? {
        return Err(Error::NumericalFailure(
            "controller-side Lyapunov block is not positive definite".into(),
        ));
    }

    let cy = &plant.c * &yu;
    let cy_pinv = matnum::pinv(&cy);
    let dcal = coupled(dname)?;
    let dc = &dcal * &cy_pinv;
    let residual_d = (&dc * &cy - &dcal).norm();
    let (ac, bc, cc, residual_b) = if nc > 0 {
        let yd_inv = matnum::inverse(&yd)?;
        let bcal = coupled(bname)?;
        let bc = &bcal * &cy_pinv;
        let res = (&bc * &cy - &bcal).norm();
        (value(aname)? * &yd_inv, bc, value(cname)? * &yd_inv, res)
    } else {
        (Mat::zeros(0, 0), Mat::zeros(0, p), Mat::zeros(m, 0), 0.0)
    };
    let controller = Controller::new(ac, bc, cc, dc)?;

    let cl = assemble_closed_loop(plant, &controller)?;
    let nominal = check_arg_condition(&cl.a_psi, plant.q)?;
    let theorem1 = match sp.mode {
        Mode::Hermitian => None,
        Mode::Certain => {
            let mut certain = plant.clone();
            certain.unc = None;
            Some(verify_theorem1(&certain, &controller, cfg, opts)?.verdict)
        }
        Mode::Robust => Some(verify_theorem1(plant, &controller, cfg, opts)?.verdict),
    };
    let scalar = |name: &str| -> Option<f64> {
        vars.contains(name)
            .then(|| value(name).ok().map(|v| v[(0, 0)]))
            .flatten()
    };
    Ok(SynthesisResult {
        controller,
        p_u: pu,
        p_d: pd,
        tau: scalar("tau"),
        mu: scalar("mu"),
        residual_b,
        residual_d,
        nominal,
        theorem1,
    })
}

/// Builds, solves and (when feasible) recovers.
pub fn synthesize(
    plant: &Plant,
    nc: usize,
    mode: Mode,
    cfg: &SynthConfig,
    opts: &SolveOptions,
) -> Result<SynthesisOutcome> {
    let problem = match mode {
        Mode::Robust => build_theorem2(plant, nc, cfg)?,
        Mode::Certain => build_certain(plant, nc, cfg)?,
        Mode::Hermitian => build_corollary1(plant, nc, cfg)?,
    };
    let feasibility = solve_feasibility(&problem.lmi, opts)?;
    let result = match &feasibility.assignment {
        Some(x) => Some(recover_controller(&problem, plant, x, cfg, opts)?),
        None => None,
    };
    Ok(SynthesisOutcome {
        problem,
        feasibility,
        result,
    })
}

/// Analysis LMI for a fixed controller; linear in `P`, `τ`, `μ`.
///
/// Uses `P·A_ψ + A_ψᵀ·P` with `Π_N = [P·Ñᵀ; 0]`. Without an uncertainty
/// model only the `Λ̂₁₁` block is imposed.
pub fn build_theorem1(plant: &Plant, ctrl: &Controller, cfg: &SynthConfig) -> Result<LmiProblem> {
    let cl = assemble_closed_loop(plant, ctrl)?;
    let n = plant.n();
    let big_n = cl.a_psi.nrows();
    let mut decl = vec![("P", VarKind::Symmetric(big_n)), ("tau", VarKind::Scalar)];
    if plant.unc.is_some() {
        decl.push(("mu", VarKind::Scalar));
    }
    let vars = VarSpace::declare(&decl)?;
    let p = vars.expr("P")?;
    let tau = vars.expr("tau")?;
    let xi_eff = cfg.xi_convention.effective(plant.xi);
    let mut e = Mat::zeros(big_n, n);
    e.view_mut((0, 0), (n, n)).copy_from(&eye(n));
    let lyap = p
        .rmul(&cl.a_psi)?
        .add(&p.rmul(&cl.a_psi)?.transpose())?
        .add(&tau.scalar_times(&(eye(big_n) * xi_eff))?)?;
    let mut grid = vec![
        vec![Cell::Expr(lyap), Cell::Expr(p.rmul(&e)?)],
        vec![Cell::Star, Cell::Expr(tau.scalar_times(&(-eye(n)))?)],
    ];
    if let Some(unc) = &plant.unc {
        let m0 = unc.m0();
        let mu = vars.expr("mu")?;
        grid[0].push(konst(cl.m_tilde.clone()));
        grid[0].push(Cell::Expr(p.rmul(&cl.n_tilde.transpose())?));
        grid[1].push(konst(Mat::zeros(n, m0)));
        grid[1].push(konst(Mat::zeros(n, m0)));
        grid.push(vec![
            Cell::Star,
            Cell::Star,
            Cell::Expr(mu.scalar_times(&(-eye(m0)))?),
            Cell::Expr(mu.scalar_times(&eye(m0))?),
        ]);
        grid.push(vec![
            Cell::Star,
            Cell::Star,
            Cell::Star,
            Cell::Expr(
                mu.scalar_times(&(-eye(m0)))?
                    .add_const(&(-matnum::sym(&unc.j)?))?,
            ),
        ]);
    }
    let mut prob = LmiProblem::new(vars);
    prob.add_constraint("analysis", assemble_block(grid)?, Sense::NegDef);
    prob.add_lower_bound("P", cfg.margin)?;
    prob.add_lower_bound("tau", cfg.margin)?;
    if plant.unc.is_some() {
        prob.add_lower_bound("mu", cfg.margin)?;
    }
    Ok(prob)
}

pub fn verify_theorem1(
    plant: &Plant,
    ctrl: &Controller,
    cfg: &SynthConfig,
    opts: &SolveOptions,
) -> Result<Feasibility> {
    solve_feasibility(&build_theorem1(plant, ctrl, cfg)?, opts)
}

/// Spectral stability test: stable iff `min |arg λ| > qπ/2`.
pub fn check_arg_condition(a: &Mat, q: f64) -> Result<StabilityVerdict> {
    check_order(q)?;
    let sp = matnum::eigenvalues(a)?;
    let min_arg = sp.min_abs_arg();
    let threshold = q * PI / 2.0;
    Ok(StabilityVerdict {
        stable: min_arg > threshold,
        min_arg,
        threshold,
        eigenvalues: sp.eigenvalues,
    })
}

/// LMI form of the same test over Hermitian `X ≻ 0`:
/// `A·Y + Yᵀ·Aᵀ ≺ 0` with `Y = rX + r̄X̄`, `r = e^{iθ}`, `θ = (1−q)π/2`.
pub fn check_lemma3_lmi(a: &Mat, q: f64, opts: &SolveOptions) -> Result<bool> {
    check_order(q)?;
    let n = matnum::require_square(a)?;
    let vars = VarSpace::declare(&[("Xr", VarKind::Symmetric(n)), ("Xi", VarKind::Skew(n))])?;
    let y = rotated(&vars, "Xr", "Xi", rotation_angle(q))?;
    let ay = y.lmul(a)?;
    let lmi = AffineMatrixExpr::from_lin(ay.add(&ay.transpose())?)?;
    let x = hermitian_var(&vars, "Xr", "Xi")?;
    let mut prob = LmiProblem::new(vars);
    prob.add_constraint("lemma3", lmi, Sense::NegDef);
    prob.add_constraint("X > 0", x, Sense::PosDef);
    let f = solve_feasibility(&prob, opts)?;
    match f.verdict {
        Verdict::Feasible => Ok(true),
        Verdict::Infeasible => Ok(false),
        Verdict::Indeterminate => Err(Error::NumericalFailure(format!(
            "stability LMI undecided after {} iterations",
            f.iterations
        ))),
    }
}
