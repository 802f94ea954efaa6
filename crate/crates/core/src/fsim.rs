//! Caputo fractional-order simulation and a Mittag-Leffler reference.

use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::fosmodel::{realize_plant, Controller, Plant};
use crate::matnum::Mat;

/// States whose Euclidean norm exceeds this are treated as divergent.
pub const DIVERGENCE_NORM: f64 = 1e12;

const ML_MAX_TERMS: usize = 20_000;
/// Largest tolerated ratio between the biggest series term and the result.
const ML_CANCELLATION_CAP: f64 = 1e10;

/// `E_q(z) = Σ z^k / Γ(qk + 1)` by direct summation.
///
/// Returns a numerical failure when cancellation between terms would leave
/// fewer than about six significant digits.
pub fn mittag_leffler(q: f64, z: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "Mittag-Leffler order must lie in (0,1], got {q}"
        )));
    }
    if !z.is_finite() || z.abs() > 50.0 {
        return Err(Error::InvalidArgument(format!(
            "Mittag-Leffler argument {z} outside |z| <= 50"
        )));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    let lz = z.abs().ln();
    let neg = z < 0.0;
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    let mut max_term = 0.0_f64;
    let mut prev = f64::INFINITY;
    for k in 0..ML_MAX_TERMS {
        let kf = k as f64;
        let mag = (kf * lz - ln_gamma(q * kf + 1.0)).exp();
        if !mag.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "Mittag-Leffler series overflow at E_{q}({z})"
            )));
        }
        let term = if neg && k % 2 == 1 { -mag } else { mag };
        // Kahan summation
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        max_term = max_term.max(mag);
        // past the peak and negligible
        if k > 0 && mag <= prev && mag < 1e-16 * sum.abs() {
            if max_term > ML_CANCELLATION_CAP * sum.abs() {
                return Err(Error::NumericalFailure(format!(
                    "Mittag-Leffler series cancellation too severe at E_{q}({z})"
                )));
            }
            return Ok(sum);
        }
        prev = mag;
    }
    Err(Error::NumericalFailure(format!(
        "Mittag-Leffler series did not converge at E_{q}({z})"
    )))
}

/// Samples of a Caputo trajectory on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CaputoSolution {
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    /// Set when the state became non-finite or exceeded [`DIVERGENCE_NORM`];
    /// the samples stop at the last finite state.
    pub diverged: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Adams–Bashforth–Moulton predictor–corrector for `D^q x = f(t, x)` with
/// full memory and one corrector pass.
///
/// `f(t, x, out)` writes the right-hand side into `out`.
pub fn integrate_caputo<F>(mut f: F, q: f64, x0: &[f64], t_end: f64, h: f64) -> Result<CaputoSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "fractional order must lie in (0,1), got {q}"
        )));
    }
    if !(h > 0.0) || !(t_end >= h) || !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "need h > 0 and T >= h, got h={h}, T={t_end}"
        )));
    }
    let steps = (t_end / h).round() as usize;
    let n = x0.len();

    // weights
    let b: Vec<f64> = (0..=steps)
        .map(|i| {
            let i = i as f64;
            (i + 1.0).powf(q) - i.powf(q)
        })
        .collect();
    let qp1 = q + 1.0;
    let a: Vec<f64> = (0..=steps)
        .map(|i| {
            let i = i as f64;
            if i == 0.0 {
                1.0
            } else {
                (i + 1.0).powf(qp1) - 2.0 * i.powf(qp1) + (i - 1.0).powf(qp1)
            }
        })
        .collect();
    let cp = h.powf(q) / gamma(q + 1.0);
    let cc = h.powf(q) / gamma(q + 2.0);

    let mut t = Vec::with_capacity(steps + 1);
    let mut xs: Vec<Vec<f64>> = Vec::with_capacity(steps + 1);
    let mut hist = vec![0.0; (steps + 1) * n];
    t.push(0.0);
    xs.push(x0.to_vec());
    f(0.0, x0, &mut hist[0..n])?;
    if hist[0..n].iter().any(|v| !v.is_finite()) {
        return Ok(CaputoSolution {
            t,
            x: xs,
            diverged: true,
        });
    }

    let mut pred_acc = vec![0.0; n];
    let mut corr_acc = vec![0.0; n];
    let mut xp = vec![0.0; n];
    let mut fp = vec![0.0; n];
    let mut xn = vec![0.0; n];
    let mut diverged = false;
    for k in 0..steps {
        let kf = k as f64;
        let tk1 = (k + 1) as f64 * h;
        pred_acc.iter_mut().for_each(|v| *v = 0.0);
        corr_acc.iter_mut().for_each(|v| *v = 0.0);
        // j = 0 term
        let a0 = kf.powf(qp1) - (kf - q) * (kf + 1.0).powf(q);
        for i in 0..n {
            pred_acc[i] += b[k] * hist[i];
            corr_acc[i] += a0 * hist[i];
        }
        for j in 1..=k {
            let (bw, aw) = (b[k - j], a[k - j + 1]);
            let fj = &hist[j * n..(j + 1) * n];
            for i in 0..n {
                pred_acc[i] += bw * fj[i];
                corr_acc[i] += aw * fj[i];
            }
        }
        for i in 0..n {
            xp[i] = x0[i] + cp * pred_acc[i];
        }
        f(tk1, &xp, &mut fp)?;
        for i in 0..n {
            xn[i] = x0[i] + cc * (fp[i] + corr_acc[i]);
        }
        let nrm = norm(&xn);
        if !nrm.is_finite() || nrm > DIVERGENCE_NORM {
            diverged = true;
            break;
        }
        let slot = &mut hist[(k + 1) * n..(k + 2) * n];
        f(tk1, &xn, slot)?;
        if slot.iter().any(|v| !v.is_finite()) {
            diverged = true;
            break;
        }
        t.push(tk1);
        xs.push(xn.clone());
    }
    Ok(CaputoSolution { t, x: xs, diverged })
}

/// Closed-loop samples; every field shares the time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub xc: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub diverged: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// `‖x‖₂` at the last sample.
    pub fn final_norm(&self) -> f64 {
        self.x.last().map_or(f64::NAN, |v| norm(v))
    }

    /// `‖[x; x_c]‖₂` at the last sample.
    pub fn final_augmented_norm(&self) -> f64 {
        match (self.x.last(), self.xc.last()) {
            (Some(x), Some(xc)) => (norm(x).powi(2) + norm(xc).powi(2)).sqrt(),
            _ => f64::NAN,
        }
    }

    /// Final state norm, or `+∞` when the run diverged.
    pub fn final_norm_or_inf(&self) -> f64 {
        if self.diverged {
            f64::INFINITY
        } else {
            self.final_norm()
        }
    }
}

fn dvec(v: &[f64]) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_column_slice(v)
}

/// Integrates the closed loop under the control law `u = C_c x_c + D_c C x`.
///
/// A nonzero `delta` perturbs `(A, B)` through the plant's uncertainty model.
pub fn simulate_closed_loop(
    plant: &Plant,
    delta: Option<&Mat>,
    ctrl: &Controller,
    x0: &[f64],
    xc0: &[f64],
    t_end: f64,
    h: f64,
) -> Result<Trajectory> {
    ctrl.check_against(plant)?;
    let (n, nc) = (plant.n(), ctrl.nc());
    if x0.len() != n || xc0.len() != nc {
        return Err(Error::Dimension(format!(
            "initial states have lengths {} and {}, expected {n} and {nc}",
            x0.len(),
            xc0.len()
        )));
    }
    let realized;
    let pl = match delta {
        Some(d) if d.iter().any(|v| *v != 0.0) => {
            realized = realize_plant(plant, d)?;
            &realized
        }
        _ => plant,
    };
    let dcc = &ctrl.dc * &pl.c;
    let bcc = &ctrl.bc * &pl.c;
    let control = |x: &[f64], xc: &[f64]| -> nalgebra::DVector<f64> {
        &ctrl.cc * dvec(xc) + &dcc * dvec(x)
    };
    let rhs = |_t: f64, s: &[f64], out: &mut [f64]| -> Result<()> {
        let (x, xc) = s.split_at(n);
        let xv = dvec(x);
        let u = control(x, xc);
        let mut dx = &pl.a * &xv + &pl.b * &u;
        let phi = pl.phi.eval(x, u.as_slice())?;
        for i in 0..n {
            dx[i] += phi[i];
        }
        out[..n].copy_from_slice(dx.as_slice());
        if nc > 0 {
            let dxc = &ctrl.ac * dvec(xc) + &bcc * &xv;
            out[n..].copy_from_slice(dxc.as_slice());
        }
        Ok(())
    };
    let s0: Vec<f64> = x0.iter().chain(xc0).copied().collect();
    let sol = integrate_caputo(rhs, plant.q, &s0, t_end, h)?;

    let mut traj = Trajectory {
        t: sol.t,
        x: Vec::with_capacity(sol.x.len()),
        xc: Vec::with_capacity(sol.x.len()),
        u: Vec::with_capacity(sol.x.len()),
        y: Vec::with_capacity(sol.x.len()),
        diverged: sol.diverged,
    };
    for s in &sol.x {
        let (x, xc) = s.split_at(n);
        traj.u.push(control(x, xc).as_slice().to_vec());
        traj.y.push((&pl.c * dvec(x)).as_slice().to_vec());
        traj.x.push(x.to_vec());
        traj.xc.push(xc.to_vec());
    }
    Ok(traj)
}
