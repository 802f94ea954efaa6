//! Dense matrix numerics for small problems (n up to about 20).
//!
//! Real matrices are `nalgebra::DMatrix<f64>`; complex ones use
//! `DMatrix<Complex64>`. Everything here is a pure function of its inputs.

use nalgebra::{Complex, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Complex64 = Complex<f64>;
pub type CMat = DMatrix<Complex64>;

/// Absolute tolerance used when a routine requires a symmetric or Hermitian input.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Relative singular-value cutoff for the pseudo-inverse.
pub const PINV_RCOND: f64 = 1e-10;

const SCHUR_MAX_ITER: usize = 10_000;

/// Eigenvalues of a square real matrix, in no particular order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn sum(&self) -> Complex64 {
        self.eigenvalues.iter().sum()
    }

    pub fn product(&self) -> Complex64 {
        self.eigenvalues
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, z| acc * z)
    }

    pub fn max_real(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest `|arg(λ)|` over the spectrum, in radians. Empty spectra give `π`.
    pub fn min_abs_arg(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.im.atan2(z.re).abs())
            .fold(std::f64::consts::PI, f64::min)
    }
}

pub fn require_square(m: &Mat) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

pub fn max_asymmetry(m: &Mat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Rejects matrices that are not symmetric within [`SYMMETRY_TOL`].
pub fn require_symmetric(m: &Mat) -> Result<()> {
    require_square(m)?;
    let asym = max_asymmetry(m);
    if asym > SYMMETRY_TOL || asym.is_nan() {
        return Err(Error::Asymmetric { asymmetry: asym });
    }
    Ok(())
}

/// `M + Mᵀ`.
pub fn sym(m: &Mat) -> Result<Mat> {
    require_square(m)?;
    Ok(m + m.transpose())
}

/// `M + M*` for complex input.
pub fn sym_complex(m: &CMat) -> Result<CMat> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m + m.adjoint())
}

/// All eigenvalues of a square real matrix (real Schur form, shifted QR).
pub fn eigenvalues(a: &Mat) -> Result<Spectrum> {
    let n = require_square(a)?;
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure(
            "eigenvalues: non-finite matrix entry".into(),
        ));
    }
    if n == 0 {
        return Ok(Spectrum {
            eigenvalues: Vec::new(),
        });
    }
    let schur = nalgebra::Schur::try_new(a.clone(), f64::EPSILON, SCHUR_MAX_ITER).ok_or_else(
        || Error::NumericalFailure("eigenvalues: QR iteration did not converge".into()),
    )?;
    Ok(Spectrum {
        eigenvalues: schur.complex_eigenvalues().iter().copied().collect(),
    })
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &Mat) -> Result<Vec<f64>> {
    require_symmetric(m)?;
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    Ok(ev)
}

/// Smallest eigenvalue of a symmetric matrix (`+∞` for the empty matrix).
pub fn min_eigenvalue(m: &Mat) -> Result<f64> {
    Ok(symmetric_eigenvalues(m)?
        .first()
        .copied()
        .unwrap_or(f64::INFINITY))
}

/// Largest eigenvalue of a symmetric matrix (`-∞` for the empty matrix).
pub fn max_eigenvalue(m: &Mat) -> Result<f64> {
    Ok(symmetric_eigenvalues(m)?
        .last()
        .copied()
        .unwrap_or(f64::NEG_INFINITY))
}

/// Moore–Penrose pseudo-inverse by truncated SVD (cutoff `1e-10·σ_max`).
pub fn pinv(a: &Mat) -> Mat {
    let (r, c) = a.shape();
    if r == 0 || c == 0 {
        return Mat::zeros(c, r);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return Mat::zeros(c, r);
    }
    let cutoff = PINV_RCOND * smax;
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let mut out = Mat::zeros(c, r);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            out += (vt.row(k).transpose() / s) * u.column(k).transpose();
        }
    }
    out
}

/// Numerical rank with singular values counted above `rel_tol·σ_max`.
pub fn rank(a: &Mat, rel_tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.clone().singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// True iff the smallest eigenvalue of the symmetric matrix `m` exceeds `margin`.
pub fn is_posdef(m: &Mat, margin: f64) -> Result<bool> {
    Ok(min_eigenvalue(m)? > margin)
}

/// Real embedding `[[Re, −Im], [Im, Re]]` of a complex matrix.
pub fn complex_to_real_embedding(h: &CMat) -> Mat {
    let (r, c) = h.shape();
    let mut out = Mat::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let z = h[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + c)] = -z.im;
            out[(i + r, j)] = z.im;
            out[(i + r, j + c)] = z.re;
        }
    }
    out
}

/// Hermitian positive-definiteness test via the real embedding.
pub fn is_posdef_hermitian(h: &CMat, margin: f64) -> Result<bool> {
    if h.nrows() != h.ncols() {
        return Err(Error::NotSquare {
            rows: h.nrows(),
            cols: h.ncols(),
        });
    }
    let asym = (h - h.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if asym > SYMMETRY_TOL {
        return Err(Error::Asymmetric { asymmetry: asym });
    }
    is_posdef(&complex_to_real_embedding(h), margin)
}

/// Inverse of a square matrix, failing on (numerical) singularity.
pub fn inverse(a: &Mat) -> Result<Mat> {
    require_square(a)?;
    if a.nrows() == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let lu = a.clone().lu();
    let inv = lu
        .try_inverse()
        .ok_or_else(|| Error::NumericalFailure("matrix is singular".into()))?;
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("matrix is singular".into()));
    }
    Ok(inv)
}

/// Builds a matrix from row slices. All rows must share a length.
pub fn from_rows(rows: &[&[f64]]) -> Mat {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
    Mat::from_fn(r, c, |i, j| rows[i][j])
}

/// `[top; bottom]`.
pub fn vstack(top: &Mat, bottom: &Mat) -> Result<Mat> {
    if top.ncols() != bottom.ncols() {
        return Err(Error::Dimension(format!(
            "vstack: {} vs {} columns",
            top.ncols(),
            bottom.ncols()
        )));
    }
    let mut out = Mat::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.view_mut((0, 0), top.shape()).copy_from(top);
    out.view_mut((top.nrows(), 0), bottom.shape()).copy_from(bottom);
    Ok(out)
}

/// `[left, right]`.
pub fn hstack(left: &Mat, right: &Mat) -> Result<Mat> {
    if left.nrows() != right.nrows() {
        return Err(Error::Dimension(format!(
            "hstack: {} vs {} rows",
            left.nrows(),
            right.nrows()
        )));
    }
    let mut out = Mat::zeros(left.nrows(), left.ncols() + right.ncols());
    out.view_mut((0, 0), left.shape()).copy_from(left);
    out.view_mut((0, left.ncols()), right.shape()).copy_from(right);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sorted_re(sp: &Spectrum) -> Vec<f64> {
        let mut v: Vec<f64> = sp.eigenvalues.iter().map(|z| z.re).collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }

    #[test]
    fn sym_examples() {
        assert_eq!(sym(&Mat::identity(2, 2)).unwrap(), Mat::identity(2, 2) * 2.0);
        let m = from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert_eq!(sym(&m).unwrap(), from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]));
        assert!(matches!(
            sym(&Mat::zeros(2, 3)),
            Err(Error::NotSquare { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn sym_complex_is_hermitian() {
        let m = CMat::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 2.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(3.0, 0.0),
                Complex64::new(0.5, -1.0),
            ],
        );
        let s = sym_complex(&m).unwrap();
        assert_eq!(s, s.adjoint());
        assert_abs_diff_eq!(s[(0, 0)].im, 0.0);
    }

    #[test]
    fn eigenvalues_quadratic_oracle() {
        // λ² + 6λ − 2 = 0
        let sp = eigenvalues(&from_rows(&[&[0.0, 1.0], &[2.0, -6.0]])).unwrap();
        let ev = sorted_re(&sp);
        let r = 11.0_f64.sqrt();
        assert_abs_diff_eq!(ev[0], -3.0 - r, epsilon = 1e-10);
        assert_abs_diff_eq!(ev[1], -3.0 + r, epsilon = 1e-10);
        assert!(sp.eigenvalues.iter().all(|z| z.im.abs() < 1e-12));

        // trace −8.4, det 11.6
        let sp = eigenvalues(&from_rows(&[&[-1.6, -0.6], &[1.2, -6.8]])).unwrap();
        let ev = sorted_re(&sp);
        let disc = (8.4_f64 * 8.4 - 4.0 * 11.6).sqrt();
        assert_abs_diff_eq!(ev[0], (-8.4 - disc) / 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(ev[1], (-8.4 + disc) / 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(ev[0], -6.6577, epsilon = 1e-4);
        assert_abs_diff_eq!(ev[1], -1.7424, epsilon = 1e-4);

        let sp = eigenvalues(&Mat::identity(3, 3)).unwrap();
        assert_eq!(sorted_re(&sp), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn eigenvalues_rejects_bad_input() {
        assert!(matches!(
            eigenvalues(&Mat::zeros(2, 3)),
            Err(Error::NotSquare { .. })
        ));
        let mut m = Mat::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(eigenvalues(&m), Err(Error::NumericalFailure(_))));
    }

    #[test]
    fn pinv_examples() {
        let a = from_rows(&[&[2.0, 1.0], &[1.0, 3.0]]);
        let inv = a.clone().try_inverse().unwrap();
        assert_abs_diff_eq!(pinv(&a), inv, epsilon = 1e-12);

        // Aᵀ(AAᵀ)⁻¹ for a full-row-rank row vector
        let row = from_rows(&[&[1.0, 1.0]]);
        assert_abs_diff_eq!(pinv(&row), from_rows(&[&[0.5], &[0.5]]), epsilon = 1e-12);

        assert_eq!(pinv(&Mat::zeros(2, 3)), Mat::zeros(3, 2));
        assert_eq!(pinv(&Mat::zeros(0, 3)), Mat::zeros(3, 0));
    }

    #[test]
    fn pinv_of_singular_matrix_truncates() {
        // rank one: the pseudo-inverse is C^T / ||C||_F^2
        let c = from_rows(&[&[1.0, 2.0], &[0.5, 1.0]]);
        let fro2 = c.norm_squared();
        assert_abs_diff_eq!(pinv(&c), c.transpose() / fro2, epsilon = 1e-12);
        assert_eq!(rank(&c, 1e-8), 1);
    }

    #[test]
    fn posdef_examples() {
        assert!(is_posdef(&Mat::identity(2, 2), 0.0).unwrap());
        assert!(!is_posdef(&from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]), 0.0).unwrap());
        let j = Mat::identity(2, 2);
        assert!(is_posdef(&sym(&j).unwrap(), 0.0).unwrap());
        assert!(!is_posdef(&Mat::identity(2, 2), 1.0).unwrap());
        assert!(matches!(
            is_posdef(&from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]), 0.0),
            Err(Error::Asymmetric { .. })
        ));
    }

    #[test]
    fn hermitian_posdef_via_embedding() {
        let i = Complex64::new(0.0, 1.0);
        let two = Complex64::new(2.0, 0.0);
        let h = CMat::from_row_slice(2, 2, &[two, i, -i, two]);
        assert!(is_posdef_hermitian(&h, 0.0).unwrap());
        assert!(is_posdef_hermitian(&h, 0.99).unwrap());
        assert!(!is_posdef_hermitian(&h, 1.01).unwrap());
    }

    fn mat_strategy(max_dim: usize) -> impl Strategy<Value = Mat> {
        (1..=max_dim, 1..=max_dim).prop_flat_map(|(r, c)| {
            prop::collection::vec(-3.0..3.0_f64, r * c)
                .prop_map(move |v| Mat::from_row_slice(r, c, &v))
        })
    }

    fn square_strategy(max_dim: usize) -> impl Strategy<Value = Mat> {
        (1..=max_dim).prop_flat_map(|n| {
            prop::collection::vec(-3.0..3.0_f64, n * n)
                .prop_map(move |v| Mat::from_row_slice(n, n, &v))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn sym_is_symmetric_and_transpose_invariant(m in square_strategy(6)) {
            let s = sym(&m).unwrap();
            prop_assert_eq!(max_asymmetry(&s), 0.0);
            prop_assert_eq!(s, sym(&m.transpose()).unwrap());
        }

        #[test]
        fn pinv_penrose_identities(a in mat_strategy(8)) {
            let p = pinv(&a);
            let scale = 1.0 + a.amax() * p.amax();
            prop_assert!((&a * &p * &a - &a).amax() <= 1e-8 * scale * a.amax().max(1.0));
            prop_assert!((&p * &a * &p - &p).amax() <= 1e-8 * scale * p.amax().max(1.0));
            let ap = &a * &p;
            let pa = &p * &a;
            prop_assert!(max_asymmetry(&ap) <= 1e-8 * scale);
            prop_assert!(max_asymmetry(&pa) <= 1e-8 * scale);
        }

        #[test]
        fn eigen_trace_and_determinant(a in square_strategy(6)) {
            let sp = eigenvalues(&a).unwrap();
            prop_assert_eq!(sp.len(), a.nrows());
            let tr = a.trace();
            let det = a.determinant();
            prop_assert!((sp.sum().re - tr).abs() <= 1e-6 * tr.abs().max(1.0));
            prop_assert!(sp.sum().im.abs() <= 1e-6 * tr.abs().max(1.0));
            let prod = sp.product();
            prop_assert!((prod.re - det).abs() <= 1e-6 * det.abs().max(1.0));
            // conjugate pairs: every non-real eigenvalue has its conjugate present
            for z in &sp.eigenvalues {
                if z.im.abs() > 1e-9 {
                    prop_assert!(sp.eigenvalues.iter().any(|w| (w - z.conj()).norm() < 1e-7));
                }
            }
        }

        #[test]
        fn posdef_matches_eigenvalues(a in square_strategy(6)) {
            let s = sym(&a).unwrap();
            let ev = nalgebra::SymmetricEigen::new(s.clone()).eigenvalues;
            prop_assert_eq!(is_posdef(&s, 0.0).unwrap(), ev.iter().all(|&l| l > 0.0));
        }
    }
}
