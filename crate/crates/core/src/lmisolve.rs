//! Affine LMI modelling and a small dense strict-feasibility solver.
//!
//! Decision variables live in one flat vector. Expressions are affine in that
//! vector: `F0 + Σ xᵢ Fᵢ`. The solver minimises `t` subject to every scaled
//! constraint lying below `t·I` and reports feasibility when `t* < −margin`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::matnum::{self, Mat, SYMMETRY_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Symmetric(usize),
    Skew(usize),
    Full(usize, usize),
    Scalar,
}

impl VarKind {
    pub fn scalar_count(self) -> usize {
        match self {
            VarKind::Symmetric(n) => n * (n + 1) / 2,
            VarKind::Skew(n) => n * n.saturating_sub(1) / 2,
            VarKind::Full(r, c) => r * c,
            VarKind::Scalar => 1,
        }
    }

    pub fn shape(self) -> (usize, usize) {
        match self {
            VarKind::Symmetric(n) | VarKind::Skew(n) => (n, n),
            VarKind::Full(r, c) => (r, c),
            VarKind::Scalar => (1, 1),
        }
    }

    /// Unit coefficient matrices, one per packed scalar.
    fn basis(self) -> Vec<Mat> {
        let (r, c) = self.shape();
        let unit = |i: usize, j: usize| {
            let mut m = Mat::zeros(r, c);
            m[(i, j)] = 1.0;
            m
        };
        match self {
            VarKind::Symmetric(n) => {
                let mut out = Vec::new();
                for i in 0..n {
                    for j in i..n {
                        let mut m = unit(i, j);
                        m[(j, i)] = 1.0;
                        out.push(m);
                    }
                }
                out
            }
            VarKind::Skew(n) => {
                let mut out = Vec::new();
                for i in 0..n {
                    for j in (i + 1)..n {
                        let mut m = unit(i, j);
                        m[(j, i)] = -1.0;
                        out.push(m);
                    }
                }
                out
            }
            VarKind::Full(r, c) => {
                let mut out = Vec::new();
                for i in 0..r {
                    for j in 0..c {
                        out.push(unit(i, j));
                    }
                }
                out
            }
            VarKind::Scalar => vec![unit(0, 0)],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarBlock {
    pub name: String,
    pub kind: VarKind,
    pub offset: usize,
}

/// Named matrix variables packed contiguously into one decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct VarSpace {
    blocks: Vec<VarBlock>,
    total: usize,
}

impl VarSpace {
    pub fn declare(decl: &[(&str, VarKind)]) -> Result<Self> {
        if decl.is_empty() {
            return Err(Error::InvalidArgument("empty variable specification".into()));
        }
        let mut blocks: Vec<VarBlock> = Vec::with_capacity(decl.len());
        let mut offset = 0;
        for (name, kind) in decl {
            if blocks.iter().any(|b| b.name == *name) {
                return Err(Error::DuplicateName(name.to_string()));
            }
            blocks.push(VarBlock {
                name: name.to_string(),
                kind: *kind,
                offset,
            });
            offset += kind.scalar_count();
        }
        Ok(VarSpace {
            blocks,
            total: offset,
        })
    }

    /// Total number of scalar decision variables.
    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn blocks(&self) -> &[VarBlock] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> Result<&VarBlock> {
        self.blocks
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variable `{name}`")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.blocks.iter().any(|b| b.name == name)
    }

    /// Affine expression equal to the named variable.
    pub fn expr(&self, name: &str) -> Result<LinExpr> {
        let b = self.block(name)?;
        let (r, c) = b.kind.shape();
        let mut e = LinExpr::zeros(r, c);
        for (k, m) in b.kind.basis().into_iter().enumerate() {
            e.terms.insert(b.offset + k, m);
        }
        Ok(e)
    }

    /// Value of the named variable at the flat assignment `x`.
    pub fn value(&self, name: &str, x: &[f64]) -> Result<Mat> {
        self.check_len(x)?;
        Ok(self.expr(name)?.eval(x))
    }

    /// Packs named matrix values into a flat vector; unnamed variables are zero.
    pub fn pack(&self, values: &[(&str, &Mat)]) -> Result<Vec<f64>> {
        let mut x = vec![0.0; self.total];
        for (name, v) in values {
            let b = self.block(name)?;
            if v.shape() != b.kind.shape() {
                return Err(Error::Dimension(format!(
                    "variable `{name}` is {:?}, value is {:?}",
                    b.kind.shape(),
                    v.shape()
                )));
            }
            let mut k = b.offset;
            match b.kind {
                VarKind::Symmetric(n) => {
                    matnum::require_symmetric(v)?;
                    for i in 0..n {
                        for j in i..n {
                            x[k] = v[(i, j)];
                            k += 1;
                        }
                    }
                }
                VarKind::Skew(n) => {
                    for i in 0..n {
                        for j in (i + 1)..n {
                            x[k] = v[(i, j)];
                            k += 1;
                        }
                    }
                }
                VarKind::Full(r, c) => {
                    for i in 0..r {
                        for j in 0..c {
                            x[k] = v[(i, j)];
                            k += 1;
                        }
                    }
                }
                VarKind::Scalar => x[k] = v[(0, 0)],
            }
        }
        Ok(x)
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.total {
            return Err(Error::Dimension(format!(
                "assignment has {} entries, variable space has {}",
                x.len(),
                self.total
            )));
        }
        Ok(())
    }
}

/// Rectangular affine matrix expression `C + Σ xᵢ Gᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinExpr {
    pub constant: Mat,
    pub terms: BTreeMap<usize, Mat>,
}

fn shape_err(op: &str, a: (usize, usize), b: (usize, usize)) -> Error {
    Error::Dimension(format!("{op}: {}x{} vs {}x{}", a.0, a.1, b.0, b.1))
}

impl LinExpr {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        LinExpr {
            constant: Mat::zeros(rows, cols),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(m: Mat) -> Self {
        LinExpr {
            constant: m,
            terms: BTreeMap::new(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.constant.shape()
    }

    fn map(&self, f: impl Fn(&Mat) -> Mat) -> Self {
        LinExpr {
            constant: f(&self.constant),
            terms: self.terms.iter().map(|(&k, m)| (k, f(m))).collect(),
        }
    }

    /// `m · self`.
    pub fn lmul(&self, m: &Mat) -> Result<Self> {
        if m.ncols() != self.shape().0 {
            return Err(shape_err("lmul", m.shape(), self.shape()));
        }
        Ok(self.map(|g| m * g))
    }

    /// `self · m`.
    pub fn rmul(&self, m: &Mat) -> Result<Self> {
        if m.nrows() != self.shape().1 {
            return Err(shape_err("rmul", self.shape(), m.shape()));
        }
        Ok(self.map(|g| g * m))
    }

    pub fn transpose(&self) -> Self {
        self.map(|g| g.transpose())
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|g| g * a)
    }

    pub fn add(&self, other: &LinExpr) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(shape_err("add", self.shape(), other.shape()));
        }
        let mut out = self.clone();
        out.constant += &other.constant;
        for (&k, g) in &other.terms {
            out.terms
                .entry(k)
                .and_modify(|m| *m += g)
                .or_insert_with(|| g.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &LinExpr) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    pub fn add_const(&self, m: &Mat) -> Result<Self> {
        self.add(&LinExpr::constant(m.clone()))
    }

    /// For a 1×1 expression `s`, the matrix expression `s · m`.
    pub fn scalar_times(&self, m: &Mat) -> Result<Self> {
        if self.shape() != (1, 1) {
            return Err(shape_err("scalar_times", self.shape(), (1, 1)));
        }
        Ok(self.map(|g| m * g[(0, 0)]))
    }

    /// `X + Xᵀ`.
    pub fn sym(&self) -> Result<Self> {
        let (r, c) = self.shape();
        if r != c {
            return Err(Error::NotSquare { rows: r, cols: c });
        }
        Ok(self.map(|g| g + g.transpose()))
    }

    pub fn eval(&self, x: &[f64]) -> Mat {
        let mut out = self.constant.clone();
        for (&k, g) in &self.terms {
            out += g * x[k];
        }
        out
    }

    /// Drops coefficient matrices that are exactly zero.
    pub fn pruned(mut self) -> Self {
        self.terms.retain(|_, g| g.iter().any(|v| *v != 0.0));
        self
    }
}

/// Symmetric affine matrix expression `F0 + Σ xᵢ Fᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMatrixExpr {
    pub dim: usize,
    pub f0: Mat,
    pub terms: BTreeMap<usize, Mat>,
}

impl AffineMatrixExpr {
    pub fn constant(m: Mat) -> Result<Self> {
        Self::from_lin(LinExpr::constant(m))
    }

    /// Accepts a square expression whose constant and coefficients are symmetric.
    pub fn from_lin(e: LinExpr) -> Result<Self> {
        let (r, c) = e.shape();
        if r != c {
            return Err(Error::NotSquare { rows: r, cols: c });
        }
        for g in std::iter::once(&e.constant).chain(e.terms.values()) {
            matnum::require_symmetric(g)?;
        }
        let e = e.pruned();
        Ok(AffineMatrixExpr {
            dim: r,
            f0: e.constant,
            terms: e.terms,
        })
    }

    pub fn eval(&self, x: &[f64]) -> Mat {
        let mut out = self.f0.clone();
        for (&k, g) in &self.terms {
            out += g * x[k];
        }
        out
    }

    fn max_abs(&self) -> f64 {
        std::iter::once(&self.f0)
            .chain(self.terms.values())
            .map(|m| m.amax())
            .fold(0.0, f64::max)
    }
}

/// One cell of a block grid. `Star` mirrors the transpose of the cell across the diagonal.
#[derive(Debug, Clone)]
pub enum Cell {
    Expr(LinExpr),
    Zero,
    Star,
}

impl From<Mat> for Cell {
    fn from(m: Mat) -> Self {
        Cell::Expr(LinExpr::constant(m))
    }
}

impl From<LinExpr> for Cell {
    fn from(e: LinExpr) -> Self {
        Cell::Expr(e)
    }
}

/// Block sizes of a square grid, inferred from the expression cells.
fn block_sizes(grid: &[Vec<Cell>]) -> Result<Vec<usize>> {
    let k = grid.len();
    if k == 0 || grid.iter().any(|row| row.len() != k) {
        return Err(Error::Dimension("block grid must be square and non-empty".into()));
    }
    let mut sizes: Vec<Option<usize>> = vec![None; k];
    let set = |i: usize, s: usize, sizes: &mut Vec<Option<usize>>| -> Result<()> {
        match sizes[i] {
            Some(t) if t != s => Err(Error::Dimension(format!(
                "block row/column {i} has inconsistent sizes {t} and {s}"
            ))),
            _ => {
                sizes[i] = Some(s);
                Ok(())
            }
        }
    };
    for (i, row) in grid.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            if let Cell::Expr(e) = cell {
                let (r, c) = e.shape();
                set(i, r, &mut sizes)?;
                set(j, c, &mut sizes)?;
            }
        }
    }
    sizes
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            s.ok_or_else(|| Error::Dimension(format!("cannot infer size of block {i}")))
        })
        .collect()
}

fn place(dst: &mut Mat, src: &Mat, r0: usize, c0: usize) {
    dst.view_mut((r0, c0), src.shape()).copy_from(src);
}

/// Assembles a symmetric block expression. `Star` cells take the transpose
/// of their mirror cell, which must not itself be a `Star`.
pub fn assemble_block(grid: Vec<Vec<Cell>>) -> Result<AffineMatrixExpr> {
    let sizes = block_sizes(&grid)?;
    let k = sizes.len();
    let offsets: Vec<usize> = sizes
        .iter()
        .scan(0, |acc, s| {
            let o = *acc;
            *acc += s;
            Some(o)
        })
        .collect();
    let dim: usize = sizes.iter().sum();
    let mut out = LinExpr::zeros(dim, dim);
    for i in 0..k {
        for j in 0..k {
            let cell = match &grid[i][j] {
                Cell::Star => match &grid[j][i] {
                    Cell::Star => {
                        return Err(Error::Dimension(format!(
                            "cells ({i},{j}) and ({j},{i}) are both starred"
                        )))
                    }
                    Cell::Zero => continue,
                    Cell::Expr(e) => e.transpose(),
                },
                Cell::Zero => continue,
                Cell::Expr(e) => e.clone(),
            };
            place(&mut out.constant, &cell.constant, offsets[i], offsets[j]);
            for (&v, g) in &cell.terms {
                let slot = out
                    .terms
                    .entry(v)
                    .or_insert_with(|| Mat::zeros(dim, dim));
                place(slot, g, offsets[i], offsets[j]);
            }
        }
    }
    AffineMatrixExpr::from_lin(out)
}

/// Hermitian affine expression `Re + i·Im` with `Re` symmetric and `Im` skew.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianExpr {
    pub re: LinExpr,
    pub im: LinExpr,
}

/// Real embedding `[[Re, −Im], [Im, Re]]`; `H ≻ 0` iff the embedding is.
pub fn hermitian_to_real(h: &HermitianExpr) -> Result<AffineMatrixExpr> {
    if h.re.shape() != h.im.shape() {
        return Err(shape_err("hermitian_to_real", h.re.shape(), h.im.shape()));
    }
    for g in std::iter::once(&h.re.constant).chain(h.re.terms.values()) {
        matnum::require_symmetric(g)?;
    }
    for g in std::iter::once(&h.im.constant).chain(h.im.terms.values()) {
        matnum::require_square(g)?;
        let skew = (g + g.transpose()).amax();
        if skew > SYMMETRY_TOL {
            return Err(Error::Asymmetric { asymmetry: skew });
        }
    }
    assemble_block(vec![
        vec![Cell::Expr(h.re.clone()), Cell::Expr(h.im.scale(-1.0))],
        vec![Cell::Expr(h.im.clone()), Cell::Expr(h.re.clone())],
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// `expr ≺ 0`
    NegDef,
    /// `expr ≻ 0`
    PosDef,
}

impl Sense {
    fn sign(self) -> f64 {
        match self {
            Sense::NegDef => 1.0,
            Sense::PosDef => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub expr: AffineMatrixExpr,
    pub sense: Sense,
    /// Required strictness: the sign-adjusted minimum eigenvalue must exceed this.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmiProblem {
    pub vars: VarSpace,
    pub constraints: Vec<Constraint>,
    /// Linear equalities `expr = 0`, eliminated before solving.
    pub equalities: Vec<(String, LinExpr)>,
}

impl LmiProblem {
    pub fn new(vars: VarSpace) -> Self {
        LmiProblem {
            vars,
            constraints: Vec::new(),
            equalities: Vec::new(),
        }
    }

    pub fn add_constraint(&mut self, name: &str, expr: AffineMatrixExpr, sense: Sense) {
        self.constraints.push(Constraint {
            name: name.to_string(),
            expr,
            sense,
            margin: 0.0,
        });
    }

    /// `var ⪰ bound·I` for a scalar or symmetric variable.
    pub fn add_lower_bound(&mut self, var: &str, bound: f64) -> Result<()> {
        let e = self.vars.expr(var)?;
        let (n, _) = e.shape();
        let e = e.add_const(&(-Mat::identity(n, n) * bound))?;
        self.add_constraint(
            &format!("{var} >= {bound:e}"),
            AffineMatrixExpr::from_lin(e)?,
            Sense::PosDef,
        );
        Ok(())
    }

    pub fn add_equality(&mut self, name: &str, expr: LinExpr) {
        self.equalities.push((name.to_string(), expr.pruned()));
    }

    /// Total dimension of all matrix constraints.
    pub fn total_dim(&self) -> usize {
        self.constraints.iter().map(|c| c.expr.dim).sum()
    }

    fn validate(&self) -> Result<()> {
        if self.constraints.is_empty() {
            return Err(Error::InvalidArgument("problem has no constraints".into()));
        }
        let n = self.vars.len();
        for c in &self.constraints {
            if !(c.margin >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "constraint `{}` has negative margin",
                    c.name
                )));
            }
            if c.expr.terms.keys().any(|&k| k >= n) {
                return Err(Error::Dimension(format!(
                    "constraint `{}` references a variable outside the space",
                    c.name
                )));
            }
        }
        for (name, e) in &self.equalities {
            if e.terms.keys().any(|&k| k >= n) {
                return Err(Error::Dimension(format!(
                    "equality `{name}` references a variable outside the space"
                )));
            }
        }
        Ok(())
    }

    /// Plain-text standard form for cross-checking with external SDP tools.
    ///
    /// ```text
    /// lmi-standard-form 1
    /// variables <N>
    /// var <name> <kind> <offset> <count>
    /// constraint <name> <negdef|posdef> <margin> <dim>
    /// F0
    /// <dim rows>
    /// F <index>
    /// <dim rows>
    /// end
    /// equality <name> <rows> <cols>
    /// C / G <index> blocks as above
    /// end
    /// ```
    pub fn write_standard_form<W: Write>(&self, w: &mut W) -> io::Result<()> {
        fn rows<W: Write>(w: &mut W, m: &Mat) -> io::Result<()> {
            for i in 0..m.nrows() {
                let line: Vec<String> = m.row(i).iter().map(|v| format!("{v:.17e}")).collect();
                writeln!(w, "{}", line.join(" "))?;
            }
            Ok(())
        }
        writeln!(w, "lmi-standard-form 1")?;
        writeln!(w, "variables {}", self.vars.len())?;
        for b in self.vars.blocks() {
            let kind = match b.kind {
                VarKind::Symmetric(n) => format!("symmetric({n})"),
                VarKind::Skew(n) => format!("skew({n})"),
                VarKind::Full(r, c) => format!("full({r},{c})"),
                VarKind::Scalar => "scalar".to_string(),
            };
            writeln!(w, "var {} {kind} {} {}", b.name, b.offset, b.kind.scalar_count())?;
        }
        for c in &self.constraints {
            let sense = match c.sense {
                Sense::NegDef => "negdef",
                Sense::PosDef => "posdef",
            };
            writeln!(
                w,
                "constraint {} {sense} {:e} {}",
                c.name.replace(' ', "_"),
                c.margin,
                c.expr.dim
            )?;
            writeln!(w, "F0")?;
            rows(w, &c.expr.f0)?;
            for (k, g) in &c.expr.terms {
                writeln!(w, "F {k}")?;
                rows(w, g)?;
            }
            writeln!(w, "end")?;
        }
        for (name, e) in &self.equalities {
            let (r, c) = e.shape();
            writeln!(w, "equality {} {r} {c}", name.replace(' ', "_"))?;
            writeln!(w, "C")?;
            rows(w, &e.constant)?;
            for (k, g) in &e.terms {
                writeln!(w, "G {k}")?;
                rows(w, g)?;
            }
            writeln!(w, "end")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Absolute duality-gap target on the scaled epigraph variable.
    pub tol: f64,
    /// Cap on the total number of Newton steps.
    pub max_iter: usize,
    /// Feasible iff `t* < −margin` (scaled units).
    pub margin: f64,
    /// Radius of the trust ball around the equality-feasible point.
    pub radius: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-8,
            max_iter: 3000,
            margin: 1e-6,
            radius: 1e3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Feasible,
    Infeasible,
    Indeterminate,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Feasible => "feasible",
            Verdict::Infeasible => "infeasible",
            Verdict::Indeterminate => "indeterminate",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    pub verdict: Verdict,
    /// Present when feasible.
    pub assignment: Option<Vec<f64>>,
    /// Final iterate, whatever the verdict.
    pub last_point: Vec<f64>,
    /// Optimal epigraph value (scaled units).
    pub t_star: f64,
    /// Smallest recheck margin at the returned point, minus the required strictness.
    pub achieved_margin: f64,
    /// Sign-adjusted minimum eigenvalue of each constraint at the final iterate.
    pub margins: Vec<f64>,
    pub iterations: usize,
    pub gap: f64,
    pub equality_residual: f64,
}

/// Sign-adjusted smallest eigenvalue of every constraint at `x`:
/// `λmin(−F)` for `F ≺ 0` and `λmin(F)` for `F ≻ 0`.
pub fn recheck(p: &LmiProblem, x: &[f64]) -> Result<Vec<f64>> {
    p.vars.check_len(x)?;
    p.constraints
        .iter()
        .map(|c| {
            let v = c.expr.eval(x) * (-c.sense.sign());
            let v = (&v + v.transpose()) * 0.5;
            matnum::min_eigenvalue(&v)
        })
        .collect()
}

/// Null-space reduction `x = x_p + Z y` of the equality constraints.
struct Reduction {
    xp: DVector<f64>,
    z: Mat,
    residual: f64,
}

fn eliminate_equalities(p: &LmiProblem) -> Reduction {
    let n = p.vars.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for (_, e) in &p.equalities {
        let (r, c) = e.shape();
        for i in 0..r {
            for j in 0..c {
                let mut row = vec![0.0; n];
                for (&k, g) in &e.terms {
                    row[k] = g[(i, j)];
                }
                rows.push(row);
                rhs.push(-e.constant[(i, j)]);
            }
        }
    }
    if rows.is_empty() || n == 0 {
        return Reduction {
            xp: DVector::zeros(n),
            z: Mat::identity(n, n),
            residual: 0.0,
        };
    }
    let k = rows.len().max(n);
    let mut e = Mat::zeros(k, n);
    let mut b = DVector::zeros(k);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            e[(i, j)] = *v;
        }
        b[i] = rhs[i];
    }
    let xp = matnum::pinv(&e) * &b;
    let residual = (&e * &xp - &b).norm();
    let svd = e.svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let smax = svd.singular_values.max();
    let null: Vec<usize> = (0..n)
        .filter(|&i| svd.singular_values[i] <= 1e-10 * smax.max(f64::MIN_POSITIVE))
        .collect();
    let mut z = Mat::zeros(n, null.len());
    for (c, &i) in null.iter().enumerate() {
        z.set_column(c, &vt.row(i).transpose());
    }
    Reduction { xp, z, residual }
}

/// One scaled constraint in reduced coordinates: `H(y) = K0 + Σ yₖ Kₖ ⪯ t I`.
struct Reduced {
    k0: Mat,
    ks: Vec<Mat>,
}

struct Barrier {
    cons: Vec<Reduced>,
    radius2: f64,
    d: usize,
}

impl Barrier {
    fn h(&self, c: &Reduced, y: &[f64]) -> Mat {
        let mut h = c.k0.clone();
        for (k, m) in c.ks.iter().enumerate() {
            if y[k] != 0.0 {
                h += m * y[k];
            }
        }
        h
    }

    fn value(&self, z: &[f64], s: f64) -> Option<f64> {
        let (y, t) = (&z[..self.d], z[self.d]);
        let ball = self.radius2 - y.iter().map(|v| v * v).sum::<f64>();
        if !(ball > 0.0) {
            return None;
        }
        let mut f = s * t - ball.ln();
        for c in &self.cons {
            let n = c.k0.nrows();
            let sm = Mat::identity(n, n) * t - self.h(c, y);
            let ch = sm.cholesky()?;
            let logdet: f64 = ch.l_dirty().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
            if !logdet.is_finite() {
                return None;
            }
            f -= logdet;
        }
        Some(f)
    }

    /// Value, gradient and Hessian in `(y, t)`.
    fn derivatives(&self, z: &[f64], s: f64) -> Option<(f64, DVector<f64>, Mat)> {
        let d = self.d;
        let (y, t) = (&z[..d], z[d]);
        let yy: f64 = y.iter().map(|v| v * v).sum();
        let ball = self.radius2 - yy;
        if !(ball > 0.0) {
            return None;
        }
        let mut f = s * t - ball.ln();
        let mut g = DVector::zeros(d + 1);
        let mut h = Mat::zeros(d + 1, d + 1);
        g[d] = s;
        for i in 0..d {
            g[i] += 2.0 * y[i] / ball;
            h[(i, i)] += 2.0 / ball;
            for j in 0..d {
                h[(i, j)] += 4.0 * y[i] * y[j] / (ball * ball);
            }
        }
        for c in &self.cons {
            let n = c.k0.nrows();
            let sm = Mat::identity(n, n) * t - self.h(c, y);
            let ch = sm.cholesky()?;
            let logdet: f64 = ch.l_dirty().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
            if !logdet.is_finite() {
                return None;
            }
            f -= logdet;
            let w = ch.inverse();
            // dS/dy_k = −K_k, dS/dt = I
            let mut wd: Vec<Mat> = c.ks.iter().map(|k| -(&w * k)).collect();
            wd.push(w.clone());
            for a in 0..=d {
                g[a] -= wd[a].trace();
                for b in a..=d {
                    let v = wd[a].component_mul(&wd[b].transpose()).sum();
                    h[(a, b)] += v;
                    if a != b {
                        h[(b, a)] += v;
                    }
                }
            }
        }
        Some((f, g, h))
    }
}

fn newton_direction(g: &DVector<f64>, h: &Mat) -> Option<DVector<f64>> {
    if let Some(ch) = h.clone().cholesky() {
        let dz = ch.solve(&(-g));
        if dz.iter().all(|v| v.is_finite()) {
            return Some(dz);
        }
    }
    let n = h.nrows();
    let reg = h + Mat::identity(n, n) * (1e-12 * h.diagonal().amax().max(1.0));
    let dz = reg.lu().solve(&(-g))?;
    dz.iter().all(|v| v.is_finite()).then_some(dz)
}

/// Minimises `t` subject to `cⱼ(sⱼFⱼ(x) + ...)⪯ t·I` with a log-det barrier
/// path-following method; see [`SolveOptions`] for the knobs.
pub fn solve_feasibility(p: &LmiProblem, opts: &SolveOptions) -> Result<Feasibility> {
    p.validate()?;
    if !(opts.margin >= 0.0) || !(opts.tol > 0.0) || !(opts.radius > 0.0) {
        return Err(Error::InvalidArgument("invalid solver options".into()));
    }
    let n = p.vars.len();
    let red = eliminate_equalities(p);
    let eq_scale = 1e-9 * (1.0 + red.xp.norm());
    let d = red.z.ncols();

    let cons: Vec<Reduced> = p
        .constraints
        .iter()
        .map(|c| {
            let scale = 1.0 / c.expr.max_abs().max(f64::MIN_POSITIVE);
            let coef = scale * c.sense.sign();
            let dim = c.expr.dim;
            let mut k0 = c.expr.eval(red.xp.as_slice()) * coef;
            k0 += Mat::identity(dim, dim) * (scale * c.margin);
            let ks = (0..d)
                .map(|col| {
                    let mut m = Mat::zeros(dim, dim);
                    for (&k, g) in &c.expr.terms {
                        let w = red.z[(k, col)];
                        if w != 0.0 {
                            m += g * w;
                        }
                    }
                    m * coef
                })
                .collect();
            Reduced { k0, ks }
        })
        .collect();
    let bar = Barrier {
        cons,
        radius2: opts.radius * opts.radius,
        d,
    };
    let nu = (p.total_dim() + 1) as f64;

    let to_x = |y: &[f64]| -> Vec<f64> {
        let yv = DVector::from_column_slice(y);
        (&red.xp + &red.z * yv).iter().copied().collect()
    };

    if red.residual > eq_scale {
        let x = red.xp.iter().copied().collect::<Vec<_>>();
        let margins = recheck(p, &x)?;
        return Ok(Feasibility {
            verdict: Verdict::Infeasible,
            assignment: None,
            last_point: x,
            t_star: f64::INFINITY,
            achieved_margin: f64::NEG_INFINITY,
            margins,
            iterations: 0,
            gap: f64::INFINITY,
            equality_residual: red.residual,
        });
    }

    let y0 = vec![0.0; d];
    let t0 = bar
        .cons
        .iter()
        .map(|c| matnum::max_eigenvalue(&bar.h(c, &y0)).unwrap_or(0.0))
        .fold(f64::NEG_INFINITY, f64::max)
        + 1.0;
    let mut z: Vec<f64> = y0.into_iter().chain(std::iter::once(t0)).collect();

    let mut s = 1.0;
    let mut iterations = 0;
    let mut converged = false;
    let mut lower_bound = f64::NEG_INFINITY;
    let mut early_infeasible = false;
    'outer: loop {
        // centre for the current s
        loop {
            if iterations >= opts.max_iter {
                break 'outer;
            }
            iterations += 1;
            let (f, g, h) = bar.derivatives(&z, s).ok_or_else(|| {
                Error::NumericalFailure("barrier evaluated outside its domain".into())
            })?;
            let dz = newton_direction(&g, &h)
                .ok_or_else(|| Error::NumericalFailure("singular Newton system".into()))?;
            let dec = -g.dot(&dz);
            if dec / 2.0 <= 1e-9 {
                break;
            }
            let mut alpha = 1.0;
            let mut progress = 0.0;
            while alpha > 1e-14 {
                let trial: Vec<f64> = z.iter().zip(dz.iter()).map(|(a, b)| a + alpha * b).collect();
                if let Some(ft) = bar.value(&trial, s) {
                    if ft <= f - 0.25 * alpha * dec {
                        z = trial;
                        progress = f - ft;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            // stalled at rounding level: treat as centred
            if progress <= 1e-13 * (1.0 + f.abs()) {
                break;
            }
        }
        lower_bound = z[d] - nu / s;
        log::trace!("s={s:e} t={:e} lb={lower_bound:e} iters={iterations}", z[d]);
        if lower_bound >= -opts.margin {
            early_infeasible = true;
            break;
        }
        if nu / s < opts.tol {
            converged = true;
            break;
        }
        s *= 10.0;
    }

    let t_star = z[d];
    let x = to_x(&z[..d]);
    debug_assert_eq!(x.len(), n);
    let margins = recheck(p, &x)?;
    let strict_ok = margins
        .iter()
        .zip(&p.constraints)
        .all(|(m, c)| *m > c.margin);
    let achieved = margins
        .iter()
        .zip(&p.constraints)
        .map(|(m, c)| m - c.margin)
        .fold(f64::INFINITY, f64::min);
    let point_feasible = t_star < -opts.margin && strict_ok;
    let verdict = if point_feasible {
        Verdict::Feasible
    } else if early_infeasible || converged {
        Verdict::Infeasible
    } else {
        Verdict::Indeterminate
    };
    log::debug!(
        "lmi solve: verdict={verdict} t*={t_star:.3e} lb={lower_bound:.3e} iters={iterations}"
    );
    Ok(Feasibility {
        verdict,
        assignment: (verdict == Verdict::Feasible).then(|| x.clone()),
        last_point: x,
        t_star,
        achieved_margin: achieved,
        margins,
        iterations,
        gap: nu / s,
        equality_residual: red.residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matnum::{from_rows, Complex64};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn scalar_lyapunov(a: f64) -> LmiProblem {
        let vars = VarSpace::declare(&[("p", VarKind::Scalar)]).unwrap();
        let pe = vars.expr("p").unwrap();
        let mut prob = LmiProblem::new(vars);
        let lhs = AffineMatrixExpr::from_lin(pe.scale(2.0 * a)).unwrap();
        prob.add_constraint("lyap", lhs, Sense::NegDef);
        prob.add_lower_bound("p", 1e-6).unwrap();
        prob
    }

    #[test]
    fn declare_counts() {
        let v = VarSpace::declare(&[("Pu", VarKind::Symmetric(2))]).unwrap();
        assert_eq!(v.len(), 3);
        let v = VarSpace::declare(&[
            ("Pu", VarKind::Symmetric(2)),
            ("Pd", VarKind::Symmetric(1)),
            ("A", VarKind::Full(1, 1)),
            ("B", VarKind::Full(1, 1)),
            ("C", VarKind::Full(1, 1)),
            ("D", VarKind::Full(1, 1)),
            ("tau", VarKind::Scalar),
            ("mu", VarKind::Scalar),
        ])
        .unwrap();
        assert_eq!(v.len(), 10);
        assert_eq!(v.block("tau").unwrap().offset, 8);
        assert!(VarSpace::declare(&[]).is_err());
        assert!(matches!(
            VarSpace::declare(&[("a", VarKind::Scalar), ("a", VarKind::Scalar)]),
            Err(Error::DuplicateName(_))
        ));
        assert_eq!(VarKind::Skew(3).scalar_count(), 3);
    }

    #[test]
    fn pack_and_value_round_trip() {
        let v = VarSpace::declare(&[
            ("P", VarKind::Symmetric(2)),
            ("K", VarKind::Skew(2)),
            ("F", VarKind::Full(1, 2)),
        ])
        .unwrap();
        let p = from_rows(&[&[2.0, 0.5], &[0.5, 3.0]]);
        let k = from_rows(&[&[0.0, 1.5], &[-1.5, 0.0]]);
        let f = from_rows(&[&[4.0, -1.0]]);
        let x = v.pack(&[("P", &p), ("K", &k), ("F", &f)]).unwrap();
        assert_eq!(v.value("P", &x).unwrap(), p);
        assert_eq!(v.value("K", &x).unwrap(), k);
        assert_eq!(v.value("F", &x).unwrap(), f);
    }

    #[test]
    fn assemble_constant_cell() {
        let m = from_rows(&[&[1.0, 2.0], &[2.0, 5.0]]);
        let e = assemble_block(vec![vec![Cell::from(m.clone())]]).unwrap();
        assert_eq!(e.f0, m);
        assert!(e.terms.is_empty());
    }

    #[test]
    fn assemble_mu_block() {
        let vars = VarSpace::declare(&[("mu", VarKind::Scalar)]).unwrap();
        let mu = vars.expr("mu").unwrap();
        let i2 = Mat::identity(2, 2);
        let j = Mat::identity(2, 2);
        let e = assemble_block(vec![
            vec![Cell::Expr(mu.scalar_times(&(-&i2)).unwrap()), Cell::Expr(mu.scalar_times(&i2).unwrap())],
            vec![
                Cell::Star,
                Cell::Expr(
                    mu.scalar_times(&(-&i2))
                        .unwrap()
                        .add_const(&(-matnum::sym(&j).unwrap()))
                        .unwrap(),
                ),
            ],
        ])
        .unwrap();
        assert_eq!(e.dim, 4);
        let mut f0 = Mat::zeros(4, 4);
        f0[(2, 2)] = -2.0;
        f0[(3, 3)] = -2.0;
        assert_eq!(e.f0, f0);
        let f1 = &e.terms[&0];
        assert_eq!(f1[(0, 0)], -1.0);
        assert_eq!(f1[(0, 2)], 1.0);
        assert_eq!(f1[(2, 0)], 1.0);
        assert_eq!(f1[(3, 3)], -1.0);
    }

    #[test]
    fn assemble_rejects_inconsistent_sizes() {
        let r = assemble_block(vec![
            vec![Cell::from(Mat::zeros(2, 2)), Cell::from(Mat::zeros(3, 1))],
            vec![Cell::Star, Cell::from(Mat::zeros(1, 1))],
        ]);
        assert!(matches!(r, Err(Error::Dimension(_))));
        let r = assemble_block(vec![vec![Cell::Zero]]);
        assert!(r.is_err());
    }

    #[test]
    fn hermitian_embedding_examples() {
        let h = HermitianExpr {
            re: LinExpr::constant(Mat::identity(2, 2) * 3.0),
            im: LinExpr::zeros(2, 2),
        };
        let e = hermitian_to_real(&h).unwrap();
        assert_eq!(e.f0, Mat::identity(4, 4) * 3.0);

        let h = HermitianExpr {
            re: LinExpr::constant(Mat::identity(2, 2) * 2.0),
            im: LinExpr::constant(from_rows(&[&[0.0, 1.0], &[-1.0, 0.0]])),
        };
        let ev = matnum::symmetric_eigenvalues(&hermitian_to_real(&h).unwrap().f0).unwrap();
        for (a, b) in ev.iter().zip([1.0, 1.0, 3.0, 3.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }

        let h = HermitianExpr {
            re: LinExpr::constant(Mat::identity(1, 1)),
            im: LinExpr::zeros(1, 1),
        };
        assert_eq!(hermitian_to_real(&h).unwrap().f0, Mat::identity(2, 2));

        let bad = HermitianExpr {
            re: LinExpr::constant(Mat::identity(2, 2)),
            im: LinExpr::constant(Mat::identity(2, 2)),
        };
        assert!(hermitian_to_real(&bad).is_err());
    }

    #[test]
    fn scalar_lyapunov_feasible_and_infeasible() {
        let opts = SolveOptions::default();
        let f = solve_feasibility(&scalar_lyapunov(-1.0), &opts).unwrap();
        assert_eq!(f.verdict, Verdict::Feasible);
        let x = f.assignment.as_ref().unwrap();
        assert!(x[0] > 0.0);
        assert!(recheck(&scalar_lyapunov(-1.0), x).unwrap().iter().all(|m| *m > 0.0));
        assert!(f.margins.iter().all(|m| *m >= 0.5 * f.achieved_margin));

        let f = solve_feasibility(&scalar_lyapunov(1.0), &opts).unwrap();
        assert_eq!(f.verdict, Verdict::Infeasible);
        assert!(f.assignment.is_none());
    }

    #[test]
    fn matrix_lyapunov() {
        // A stable: find P ≻ 0 with AᵀP + PA ≺ 0.
        let a = from_rows(&[&[-1.6, -0.6], &[1.2, -6.8]]);
        let vars = VarSpace::declare(&[("P", VarKind::Symmetric(2))]).unwrap();
        let p = vars.expr("P").unwrap();
        let mut prob = LmiProblem::new(vars);
        let lyap = p.lmul(&a.transpose()).unwrap().add(&p.rmul(&a).unwrap()).unwrap();
        prob.add_constraint("lyap", AffineMatrixExpr::from_lin(lyap).unwrap(), Sense::NegDef);
        prob.add_lower_bound("P", 1e-6).unwrap();
        let f = solve_feasibility(&prob, &SolveOptions::default()).unwrap();
        assert_eq!(f.verdict, Verdict::Feasible);

        // Unstable A: infeasible.
        let a = from_rows(&[&[0.0, 1.0], &[2.0, -6.0]]);
        let vars = VarSpace::declare(&[("P", VarKind::Symmetric(2))]).unwrap();
        let p = vars.expr("P").unwrap();
        let mut prob = LmiProblem::new(vars);
        let lyap = p.lmul(&a.transpose()).unwrap().add(&p.rmul(&a).unwrap()).unwrap();
        prob.add_constraint("lyap", AffineMatrixExpr::from_lin(lyap).unwrap(), Sense::NegDef);
        prob.add_lower_bound("P", 1e-6).unwrap();
        let f = solve_feasibility(&prob, &SolveOptions::default()).unwrap();
        assert_eq!(f.verdict, Verdict::Infeasible);
    }

    #[test]
    fn equalities_are_respected() {
        // p1 + p2 = 3 with both > 1 feasible; with both > 2 infeasible
        for (lb, expect) in [(1.0, Verdict::Feasible), (2.0, Verdict::Infeasible)] {
            let vars = VarSpace::declare(&[("a", VarKind::Scalar), ("b", VarKind::Scalar)]).unwrap();
            let e = vars
                .expr("a")
                .unwrap()
                .add(&vars.expr("b").unwrap())
                .unwrap()
                .add_const(&from_rows(&[&[-3.0]]))
                .unwrap();
            let mut prob = LmiProblem::new(vars);
            prob.add_lower_bound("a", lb).unwrap();
            prob.add_lower_bound("b", lb).unwrap();
            prob.add_equality("sum", e);
            let f = solve_feasibility(&prob, &SolveOptions::default()).unwrap();
            assert_eq!(f.verdict, expect);
            assert_abs_diff_eq!(f.last_point[0] + f.last_point[1], 3.0, epsilon = 1e-9);
        }
        // inconsistent equalities
        let vars = VarSpace::declare(&[("a", VarKind::Scalar)]).unwrap();
        let a = vars.expr("a").unwrap();
        let mut prob = LmiProblem::new(vars);
        prob.add_lower_bound("a", 0.0).unwrap();
        prob.add_equality("one", a.add_const(&from_rows(&[&[-1.0]])).unwrap());
        prob.add_equality("two", a.add_const(&from_rows(&[&[-2.0]])).unwrap());
        let f = solve_feasibility(&prob, &SolveOptions::default()).unwrap();
        assert_eq!(f.verdict, Verdict::Infeasible);
    }

    #[test]
    fn recheck_zero_assignment_and_continuity() {
        let prob = scalar_lyapunov(-1.0);
        assert!(recheck(&prob, &[0.0]).unwrap().iter().any(|m| *m <= 0.0));
        let f = solve_feasibility(&prob, &SolveOptions::default()).unwrap();
        let x = f.assignment.unwrap();
        let m0 = recheck(&prob, &x).unwrap();
        let m1 = recheck(&prob, &[x[0] + 1e-12]).unwrap();
        for (a, b) in m0.iter().zip(&m1) {
            assert!((a - b).abs() <= 1e-9);
        }
        assert!(recheck(&prob, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn empty_problem_is_rejected() {
        let vars = VarSpace::declare(&[("a", VarKind::Scalar)]).unwrap();
        let prob = LmiProblem::new(vars);
        assert!(solve_feasibility(&prob, &SolveOptions::default()).is_err());
    }

    #[test]
    fn standard_form_dump() {
        let prob = scalar_lyapunov(-1.0);
        let mut buf = Vec::new();
        prob.write_standard_form(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("lmi-standard-form 1\nvariables 1\nvar p scalar 0 1\n"));
        assert_eq!(s.matches("constraint ").count(), 2);
    }

    #[test]
    fn cold_starts_agree() {
        let a = from_rows(&[&[-1.0, 2.0], &[0.0, -3.0]]);
        let vars = VarSpace::declare(&[("P", VarKind::Symmetric(2))]).unwrap();
        let p = vars.expr("P").unwrap();
        let mut prob = LmiProblem::new(vars);
        let lyap = p.lmul(&a.transpose()).unwrap().add(&p.rmul(&a).unwrap()).unwrap();
        prob.add_constraint("lyap", AffineMatrixExpr::from_lin(lyap).unwrap(), Sense::NegDef);
        prob.add_constraint(
            "bound",
            AffineMatrixExpr::from_lin(p.add_const(&(-Mat::identity(2, 2))).unwrap().scale(-1.0).add_const(&(Mat::identity(2, 2) * 10.0)).unwrap()).unwrap(),
            Sense::PosDef,
        );
        prob.add_lower_bound("P", 1e-6).unwrap();
        let a1 = solve_feasibility(&prob, &SolveOptions::default()).unwrap();
        let a2 = solve_feasibility(&prob, &SolveOptions::default()).unwrap();
        assert!((a1.t_star - a2.t_star).abs() <= 1e-6);
    }

    fn random_hermitian(n: usize, v: &[f64]) -> (Mat, Mat) {
        let mut re = Mat::zeros(n, n);
        let mut im = Mat::zeros(n, n);
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                re[(i, j)] = v[k];
                re[(j, i)] = v[k];
                k += 1;
                if j > i {
                    im[(i, j)] = v[k];
                    im[(j, i)] = -v[k];
                    k += 1;
                }
            }
        }
        (re, im)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn embedding_preserves_spectrum(n in 1usize..=4, v in prop::collection::vec(-2.0..2.0_f64, 16)) {
            let (re, im) = random_hermitian(n, &v);
            let h = HermitianExpr { re: LinExpr::constant(re.clone()), im: LinExpr::constant(im.clone()) };
            let emb = hermitian_to_real(&h).unwrap().f0;
            let ce = nalgebra::DMatrix::from_fn(n, n, |i, j| Complex64::new(re[(i, j)], im[(i, j)]));
            let hev = nalgebra::SymmetricEigen::new(ce).eigenvalues;
            let mut hev: Vec<f64> = hev.iter().copied().collect();
            hev.sort_by(|a, b| a.total_cmp(b));
            let eev = matnum::symmetric_eigenvalues(&emb).unwrap();
            for (k, l) in hev.iter().enumerate() {
                prop_assert!((eev[2 * k] - l).abs() < 1e-9);
                prop_assert!((eev[2 * k + 1] - l).abs() < 1e-9);
            }
        }

        #[test]
        fn larger_margin_never_creates_feasibility(a in -2.0..2.0_f64, m in 1e-6..1e-1_f64) {
            let prob = scalar_lyapunov(a);
            let small = solve_feasibility(&prob, &SolveOptions { margin: m, ..Default::default() }).unwrap();
            let large = solve_feasibility(&prob, &SolveOptions { margin: 10.0 * m, ..Default::default() }).unwrap();
            if small.verdict == Verdict::Infeasible {
                prop_assert_ne!(large.verdict, Verdict::Feasible);
            }
        }

        #[test]
        fn feasible_verdicts_recheck(entries in prop::collection::vec(-3.0..3.0_f64, 4)) {
            let a = Mat::from_row_slice(2, 2, &entries);
            let vars = VarSpace::declare(&[("P", VarKind::Symmetric(2))]).unwrap();
            let p = vars.expr("P").unwrap();
            let mut prob = LmiProblem::new(vars);
            let lyap = p.lmul(&a.transpose()).unwrap().add(&p.rmul(&a).unwrap()).unwrap();
            prob.add_constraint("lyap", AffineMatrixExpr::from_lin(lyap).unwrap(), Sense::NegDef);
            prob.add_lower_bound("P", 1e-6).unwrap();
            let f = solve_feasibility(&prob, &SolveOptions::default()).unwrap();
            let stable = matnum::eigenvalues(&a).unwrap().max_real() < 0.0;
            if f.verdict == Verdict::Feasible {
                let x = f.assignment.unwrap();
                prop_assert!(recheck(&prob, &x).unwrap().iter().all(|m| *m > 0.0));
                prop_assert!(stable);
            }
            let max_re = matnum::eigenvalues(&a).unwrap().max_real();
            if max_re < -1e-2 {
                prop_assert_eq!(f.verdict, Verdict::Feasible);
            }
            if max_re > 1e-2 {
                prop_assert_eq!(f.verdict, Verdict::Infeasible);
            }
        }
    }
}
