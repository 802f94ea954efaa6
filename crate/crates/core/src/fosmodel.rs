//! Plants, norm-bounded-like uncertainty, controllers and the closed loop.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matnum::{self, hstack, vstack, Mat};
use crate::phiexpr::PhiFunction;

/// Relative singular-value tolerance for the Kalman rank tests.
pub const RANK_TOL: f64 = 1e-8;

const SAMPLE_RETRIES: usize = 32;

/// Structured uncertainty `ΔA = MΔN1`, `ΔB = MΔN2`, `Δ = Z(I + JZ)⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyModel {
    pub m: Mat,
    pub n1: Mat,
    pub n2: Mat,
    pub j: Mat,
}

impl UncertaintyModel {
    pub fn new(m: Mat, n1: Mat, n2: Mat, j: Mat) -> Result<Self> {
        let m0 = j.nrows();
        if j.ncols() != m0 {
            return Err(Error::NotSquare {
                rows: j.nrows(),
                cols: j.ncols(),
            });
        }
        if m.ncols() != m0 || n1.nrows() != m0 || n2.nrows() != m0 {
            return Err(Error::Dimension(format!(
                "uncertainty: M is {}x{}, N1 {}x{}, N2 {}x{}, J {}x{}",
                m.nrows(),
                m.ncols(),
                n1.nrows(),
                n1.ncols(),
                n2.nrows(),
                n2.ncols(),
                m0,
                m0
            )));
        }
        Ok(UncertaintyModel { m, n1, n2, j })
    }

    /// Number of uncertainty channels `m₀`.
    pub fn m0(&self) -> usize {
        self.j.nrows()
    }
}

/// Fractional-order plant `D^q x = A x + B u + φ(x, u)`, `y = C x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub q: f64,
    pub phi: PhiFunction,
    pub xi: f64,
    pub unc: Option<UncertaintyModel>,
}

impl Plant {
    pub fn new(
        a: Mat,
        b: Mat,
        c: Mat,
        q: f64,
        phi: PhiFunction,
        xi: f64,
        unc: Option<UncertaintyModel>,
    ) -> Result<Self> {
        let n = matnum::require_square(&a)?;
        if b.nrows() != n || c.ncols() != n {
            return Err(Error::Dimension(format!(
                "A is {n}x{n} but B is {}x{} and C is {}x{}",
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        if phi.n_states != n || phi.n_inputs != b.ncols() {
            return Err(Error::Dimension(format!(
                "phi is declared over x in R^{} and u in R^{}, plant has n={n}, m={}",
                phi.n_states,
                phi.n_inputs,
                b.ncols()
            )));
        }
        if !(xi >= 0.0) || !xi.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "Lipschitz constant must be finite and nonnegative, got {xi}"
            )));
        }
        if !q.is_finite() {
            return Err(Error::InvalidArgument("fractional order is not finite".into()));
        }
        if a.iter().chain(b.iter()).chain(c.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("plant matrix has a non-finite entry".into()));
        }
        if let Some(u) = &unc {
            if u.m.nrows() != n || u.n1.ncols() != n || u.n2.ncols() != b.ncols() {
                return Err(Error::Dimension(format!(
                    "uncertainty blocks do not match n={n}, m={}",
                    b.ncols()
                )));
            }
        }
        Ok(Plant {
            a,
            b,
            c,
            q,
            phi,
            xi,
            unc,
        })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn p(&self) -> usize {
        self.c.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// `[B, AB, …, A^{n−1}B]`.
pub fn controllability_matrix(a: &Mat, b: &Mat) -> Mat {
    let n = a.nrows();
    let mut out = Mat::zeros(n, n * b.ncols());
    let mut blk = b.clone();
    for k in 0..n {
        out.view_mut((0, k * b.ncols()), blk.shape()).copy_from(&blk);
        blk = a * blk;
    }
    out
}

/// `[C; CA; …; CA^{n−1}]`.
pub fn observability_matrix(a: &Mat, c: &Mat) -> Mat {
    controllability_matrix(&a.transpose(), &c.transpose()).transpose()
}

/// Checks the standing assumptions. Never fails; the report carries each verdict.
pub fn validate(plant: &Plant) -> ValidationReport {
    let n = plant.n();
    let mut checks = Vec::new();

    let rc = matnum::rank(&controllability_matrix(&plant.a, &plant.b), RANK_TOL);
    checks.push(Check {
        name: "controllable",
        passed: rc == n,
        detail: format!("rank [B AB ...] = {rc} of {n}"),
    });
    let ro = matnum::rank(&observability_matrix(&plant.a, &plant.c), RANK_TOL);
    checks.push(Check {
        name: "observable",
        passed: ro == n,
        detail: format!("rank [C; CA; ...] = {ro} of {n}"),
    });

    if let Some(u) = &plant.unc {
        let (passed, detail) = match matnum::sym(&u.j).and_then(|s| matnum::min_eigenvalue(&s)) {
            Ok(l) => (l > 0.0, format!("min eig Sym(J) = {l:.6e}")),
            Err(e) => (false, e.to_string()),
        };
        checks.push(Check {
            name: "sym_j_posdef",
            passed,
            detail,
        });
    }

    checks.push(Check {
        name: "order_range",
        passed: plant.q > 0.0 && plant.q < 1.0,
        detail: format!("q = {}", plant.q),
    });

    let zx = vec![0.0; n];
    let zu = vec![0.0; plant.m()];
    let (passed, detail) = match plant.phi.eval(&zx, &zu) {
        Ok(v) => {
            let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            (nrm <= 1e-12, format!("|phi(0,0)| = {nrm:.3e}"))
        }
        Err(e) => (false, e.to_string()),
    };
    checks.push(Check {
        name: "phi_vanishes_at_origin",
        passed,
        detail,
    });

    ValidationReport { checks }
}

/// Dynamic output feedback `D^q x_c = Ac x_c + Bc y`, `u = Cc x_c + Dc y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    pub ac: Mat,
    pub bc: Mat,
    pub cc: Mat,
    pub dc: Mat,
}

impl Controller {
    pub fn new(ac: Mat, bc: Mat, cc: Mat, dc: Mat) -> Result<Self> {
        let nc = matnum::require_square(&ac)?;
        if bc.nrows() != nc || cc.ncols() != nc || cc.nrows() != dc.nrows() || bc.ncols() != dc.ncols()
        {
            return Err(Error::Dimension(format!(
                "controller blocks Ac {}x{}, Bc {}x{}, Cc {}x{}, Dc {}x{} are inconsistent",
                ac.nrows(),
                ac.ncols(),
                bc.nrows(),
                bc.ncols(),
                cc.nrows(),
                cc.ncols(),
                dc.nrows(),
                dc.ncols()
            )));
        }
        if ac
            .iter()
            .chain(bc.iter())
            .chain(cc.iter())
            .chain(dc.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidArgument("controller has a non-finite entry".into()));
        }
        Ok(Controller { ac, bc, cc, dc })
    }

    /// Static output feedback `u = Dc y`.
    pub fn static_gain(dc: Mat) -> Self {
        let (m, p) = dc.shape();
        Controller {
            ac: Mat::zeros(0, 0),
            bc: Mat::zeros(0, p),
            cc: Mat::zeros(m, 0),
            dc,
        }
    }

    /// The zero controller of order `nc` for an `m`-input, `p`-output plant.
    pub fn zero(nc: usize, m: usize, p: usize) -> Self {
        Controller {
            ac: Mat::zeros(nc, nc),
            bc: Mat::zeros(nc, p),
            cc: Mat::zeros(m, nc),
            dc: Mat::zeros(m, p),
        }
    }

    pub fn nc(&self) -> usize {
        self.ac.nrows()
    }

    pub fn check_against(&self, plant: &Plant) -> Result<()> {
        if self.dc.nrows() != plant.m() || self.dc.ncols() != plant.p() {
            return Err(Error::Dimension(format!(
                "controller is {}-input/{}-output, plant has m={}, p={}",
                self.dc.ncols(),
                self.dc.nrows(),
                plant.m(),
                plant.p()
            )));
        }
        Ok(())
    }
}

/// Closed loop on the augmented state `[x; x_c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    pub a_psi: Mat,
    /// `[M; 0]`; zero columns for a plant without uncertainty.
    pub m_tilde: Mat,
    /// `[N1 + N2·Dc·C, N2·Cc]`; zero rows for a plant without uncertainty.
    pub n_tilde: Mat,
}

impl ClosedLoop {
    /// `A_ψ + M̃ Δ Ñ`.
    pub fn perturbed(&self, delta: &Mat) -> Result<Mat> {
        if delta.nrows() != self.m_tilde.ncols() || delta.ncols() != self.n_tilde.nrows() {
            return Err(Error::Dimension(format!(
                "Delta is {}x{}, expected {}x{}",
                delta.nrows(),
                delta.ncols(),
                self.m_tilde.ncols(),
                self.n_tilde.nrows()
            )));
        }
        Ok(&self.a_psi + &self.m_tilde * delta * &self.n_tilde)
    }
}

pub fn assemble_closed_loop(plant: &Plant, ctrl: &Controller) -> Result<ClosedLoop> {
    ctrl.check_against(plant)?;
    let (a, b, c) = (&plant.a, &plant.b, &plant.c);
    let top = hstack(&(a + b * &ctrl.dc * c), &(b * &ctrl.cc))?;
    let bottom = hstack(&(&ctrl.bc * c), &ctrl.ac)?;
    let a_psi = vstack(&top, &bottom)?;
    let nc = ctrl.nc();
    let n = plant.n();
    let (m_tilde, n_tilde) = match &plant.unc {
        Some(u) => (
            vstack(&u.m, &Mat::zeros(nc, u.m0()))?,
            hstack(&(&u.n1 + &u.n2 * &ctrl.dc * c), &(&u.n2 * &ctrl.cc))?,
        ),
        None => (Mat::zeros(n + nc, 0), Mat::zeros(0, n + nc)),
    };
    Ok(ClosedLoop {
        a_psi,
        m_tilde,
        n_tilde,
    })
}

/// `Δ = Z(I + JZ)⁻¹`.
pub fn delta_from_z(z: &Mat, j: &Mat) -> Result<Mat> {
    let m0 = j.nrows();
    if z.shape() != (m0, m0) || j.ncols() != m0 {
        return Err(Error::Dimension("Z and J must be square of equal size".into()));
    }
    let inner = Mat::identity(m0, m0) + j * z;
    // A huge condition number means the retry loop should draw again.
    let sv = inner.clone().singular_values();
    if m0 > 0 && sv.min() <= 1e-12 * sv.max().max(1.0) {
        return Err(Error::NumericalFailure("I + JZ is singular".into()));
    }
    Ok(z * matnum::inverse(&inner)?)
}

/// Both clauses of the admissibility predicate: `det(I − ΔJ) ≠ 0` and
/// `Δ·Sym(J)·Δᵀ ⪯ Sym(Δ)`, the latter checked to absolute tolerance `tol`.
pub fn admissible(delta: &Mat, j: &Mat, tol: f64) -> Result<bool> {
    let m0 = j.nrows();
    let det = (Mat::identity(m0, m0) - delta * j).determinant();
    if det.abs() <= 1e-12 {
        return Ok(false);
    }
    let gap = matnum::sym(delta)? - delta * matnum::sym(j)? * delta.transpose();
    let gap = (&gap + gap.transpose()) * 0.5;
    Ok(matnum::min_eigenvalue(&gap)? >= -tol)
}

/// Draws an admissible `Δ` from the stream `(seed, index)`.
///
/// `Z = scale·(S Sᵀ + K)` with Gaussian `S` and skew `K = G − Gᵀ`, so that
/// `Sym(Z) ⪰ 0`. Independent indices can be sampled concurrently.
pub fn sample_uncertainty(
    unc: &UncertaintyModel,
    seed: u64,
    index: u64,
    scale: f64,
) -> Result<Mat> {
    if !(scale >= 0.0) || !scale.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "uncertainty scale must be nonnegative, got {scale}"
        )));
    }
    let m0 = unc.m0();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let gauss = |r: usize, c: usize, rng: &mut ChaCha8Rng| {
        DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
    };
    for _ in 0..SAMPLE_RETRIES {
        let s: Mat = gauss(m0, m0, &mut rng);
        let g: Mat = gauss(m0, m0, &mut rng);
        let z = (&s * s.transpose() + (&g - g.transpose())) * scale;
        match delta_from_z(&z, &unc.j) {
            Ok(d) => return Ok(d),
            Err(Error::NumericalFailure(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::NumericalFailure(
        "uncertainty sampler exhausted its retries".into(),
    ))
}

/// `Ã = A + MΔN1`, `B̃ = B + MΔN2`; the result carries no uncertainty model.
pub fn realize_plant(plant: &Plant, delta: &Mat) -> Result<Plant> {
    let u = plant
        .unc
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("plant has no uncertainty model".into()))?;
    let m0 = u.m0();
    if delta.shape() != (m0, m0) {
        return Err(Error::Dimension(format!(
            "Delta is {}x{}, expected {m0}x{m0}",
            delta.nrows(),
            delta.ncols()
        )));
    }
    let md = &u.m * delta;
    Ok(Plant {
        a: &plant.a + &md * &u.n1,
        b: &plant.b + &md * &u.n2,
        c: plant.c.clone(),
        q: plant.q,
        phi: plant.phi.clone(),
        xi: plant.xi,
        unc: None,
    })
}
