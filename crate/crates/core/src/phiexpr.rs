//! Textual nonlinearity `φ(x, u)`: parser, evaluator and a sampled Lipschitz estimate.
//!
//! Grammar (components separated by `;`):
//!
//! ```text
//! phi     = expr { ";" expr } ;
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = ("+" | "-") unary | primary ;
//! primary = number | var | func "(" expr ")" | "(" expr ")" ;
//! var     = ("x" | "u") digit { digit } ;          (* 1-based *)
//! func    = "sin" | "cos" | "tanh" | "abs" ;
//! number  = digit { digit } [ "." { digit } ] [ ("e" | "E") [ "+" | "-" ] digit { digit } ] ;
//! ```

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    State,
    Input,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Tanh,
    Abs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprNode {
    Const(f64),
    /// Zero-based index.
    Var(VarKind, usize),
    Unary(UnaryOp, Box<ExprNode>),
    Binary(BinaryOp, Box<ExprNode>, Box<ExprNode>),
}

impl ExprNode {
    pub fn eval(&self, x: &[f64], u: &[f64]) -> Result<f64> {
        Ok(match self {
            ExprNode::Const(v) => *v,
            ExprNode::Var(VarKind::State, i) => x[*i],
            ExprNode::Var(VarKind::Input, i) => u[*i],
            ExprNode::Unary(op, c) => {
                let v = c.eval(x, u)?;
                match op {
                    UnaryOp::Neg => -v,
                    UnaryOp::Sin => v.sin(),
                    UnaryOp::Cos => v.cos(),
                    UnaryOp::Tanh => v.tanh(),
                    UnaryOp::Abs => v.abs(),
                }
            }
            ExprNode::Binary(op, l, r) => {
                let a = l.eval(x, u)?;
                let b = r.eval(x, u)?;
                match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Div => {
                        if b == 0.0 {
                            return Err(Error::Domain("division by zero".into()));
                        }
                        a / b
                    }
                }
            }
        })
    }

    fn is_zero_const(&self) -> bool {
        matches!(self, ExprNode::Const(v) if *v == 0.0)
    }
}

impl fmt::Display for ExprNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            // `{:?}` keeps a round-trippable representation of the float
            ExprNode::Const(v) => write!(f, "{v:?}"),
            ExprNode::Var(VarKind::State, i) => write!(f, "x{}", i + 1),
            ExprNode::Var(VarKind::Input, i) => write!(f, "u{}", i + 1),
            ExprNode::Unary(UnaryOp::Neg, c) => write!(f, "(-{c})"),
            ExprNode::Unary(op, c) => {
                let name = match op {
                    UnaryOp::Sin => "sin",
                    UnaryOp::Cos => "cos",
                    UnaryOp::Tanh => "tanh",
                    UnaryOp::Abs => "abs",
                    UnaryOp::Neg => unreachable!(),
                };
                write!(f, "{name}({c})")
            }
            ExprNode::Binary(op, l, r) => {
                let s = match op {
                    BinaryOp::Add => "+",
                    BinaryOp::Sub => "-",
                    BinaryOp::Mul => "*",
                    BinaryOp::Div => "/",
                };
                write!(f, "({l} {s} {r})")
            }
        }
    }
}

/// Parsed vector-valued nonlinearity with one component per state.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiFunction {
    pub components: Vec<ExprNode>,
    pub n_states: usize,
    pub n_inputs: usize,
}

impl PhiFunction {
    /// The identically-zero function.
    pub fn zero(n_states: usize, n_inputs: usize) -> Self {
        PhiFunction {
            components: vec![ExprNode::Const(0.0); n_states],
            n_states,
            n_inputs,
        }
    }

    pub fn parse(src: &str, n_states: usize, n_inputs: usize) -> Result<Self> {
        parse(src, n_states, n_inputs)
    }

    /// True when every component is the literal constant 0.
    pub fn is_identically_zero(&self) -> bool {
        self.components.iter().all(ExprNode::is_zero_const)
    }

    pub fn eval(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n_states];
        self.eval_into(x, u, &mut out)?;
        Ok(out)
    }

    /// Allocation-free evaluation for the integrator hot loop.
    pub fn eval_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.n_states || u.len() != self.n_inputs || out.len() != self.n_states {
            return Err(Error::Dimension(format!(
                "phi expects x in R^{} and u in R^{}, got {} and {}",
                self.n_states,
                self.n_inputs,
                x.len(),
                u.len()
            )));
        }
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.eval(x, u)?;
        }
        Ok(())
    }
}

impl fmt::Display for PhiFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Semi,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, usize)>> {
        let mut lx = Lexer {
            src: src.as_bytes(),
            pos: 0,
        };
        let mut out = Vec::new();
        loop {
            let t = lx.next()?;
            let end = t.0 == Tok::End;
            out.push(t);
            if end {
                return Ok(out);
            }
        }
    }

    fn next(&mut self) -> Result<(Tok, usize)> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = self.src.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        let tok = match c {
            b'+' | b'-' | b'*' | b'/' => {
                self.pos += 1;
                Tok::Op(c as char)
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b';' => {
                self.pos += 1;
                Tok::Semi
            }
            b'0'..=b'9' | b'.' => self.number()?,
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while self
                    .src
                    .get(self.pos)
                    .is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_')
                {
                    self.pos += 1;
                }
                Tok::Ident(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
            }
            _ => {
                return Err(Error::Syntax {
                    pos: start,
                    msg: format!("unexpected character `{}`", c as char),
                })
            }
        };
        Ok((tok, start))
    }

    fn number(&mut self) -> Result<Tok> {
        let start = self.pos;
        let digits = |lx: &mut Self| {
            let s = lx.pos;
            while lx.src.get(lx.pos).is_some_and(u8::is_ascii_digit) {
                lx.pos += 1;
            }
            lx.pos - s
        };
        let mut n = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            return Err(Error::Syntax {
                pos: start,
                msg: "malformed number".into(),
            });
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
                return Err(Error::Syntax {
                    pos: save,
                    msg: "malformed exponent".into(),
                });
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        text.parse::<f64>().map(Tok::Num).map_err(|_| Error::Syntax {
            pos: start,
            msg: format!("malformed number `{text}`"),
        })
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    i: usize,
    n_states: usize,
    n_inputs: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn pos(&self) -> usize {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].0.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<ExprNode> {
        let mut lhs = self.term()?;
        while let Tok::Op(c @ ('+' | '-')) = *self.peek() {
            self.bump();
            let rhs = self.term()?;
            let op = if c == '+' { BinaryOp::Add } else { BinaryOp::Sub };
            lhs = ExprNode::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<ExprNode> {
        let mut lhs = self.unary()?;
        while let Tok::Op(c @ ('*' | '/')) = *self.peek() {
            self.bump();
            let rhs = self.unary()?;
            let op = if c == '*' { BinaryOp::Mul } else { BinaryOp::Div };
            lhs = ExprNode::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<ExprNode> {
        match *self.peek() {
            Tok::Op('-') => {
                self.bump();
                Ok(ExprNode::Unary(UnaryOp::Neg, Box::new(self.unary()?)))
            }
            Tok::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.primary(),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        if *self.peek() != Tok::RParen {
            return Err(Error::Syntax {
                pos: self.pos(),
                msg: "expected `)`".into(),
            });
        }
        self.bump();
        Ok(())
    }

    fn primary(&mut self) -> Result<ExprNode> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(v) => Ok(ExprNode::Const(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let func = match name.as_str() {
                    "sin" => Some(UnaryOp::Sin),
                    "cos" => Some(UnaryOp::Cos),
                    "tanh" => Some(UnaryOp::Tanh),
                    "abs" => Some(UnaryOp::Abs),
                    _ => None,
                };
                if let Some(op) = func {
                    if *self.peek() != Tok::LParen {
                        return Err(Error::Syntax {
                            pos: self.pos(),
                            msg: format!("expected `(` after `{name}`"),
                        });
                    }
                    self.bump();
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(ExprNode::Unary(op, Box::new(arg)));
                }
                self.variable(&name, pos)
            }
            Tok::End | Tok::Semi => Err(Error::Syntax {
                pos,
                msg: "unexpected end of expression".into(),
            }),
            t => Err(Error::Syntax {
                pos,
                msg: format!("unexpected token {t:?}"),
            }),
        }
    }

    fn variable(&self, name: &str, pos: usize) -> Result<ExprNode> {
        let unknown = || Error::UnknownIdentifier {
            name: name.to_string(),
            pos,
        };
        let (kind, limit) = match name.as_bytes().first() {
            Some(b'x') => (VarKind::State, self.n_states),
            Some(b'u') => (VarKind::Input, self.n_inputs),
            _ => return Err(unknown()),
        };
        let digits = &name[1..];
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(unknown());
        }
        let k: usize = digits.parse().map_err(|_| unknown())?;
        if k == 0 || k > limit {
            return Err(unknown());
        }
        Ok(ExprNode::Var(kind, k - 1))
    }
}

/// Parses `;`-separated components; exactly `n_states` are required.
pub fn parse(src: &str, n_states: usize, n_inputs: usize) -> Result<PhiFunction> {
    let mut p = Parser {
        toks: Lexer::tokens(src)?,
        i: 0,
        n_states,
        n_inputs,
    };
    let mut components = Vec::new();
    loop {
        components.push(p.expr()?);
        match p.peek() {
            Tok::Semi => {
                p.bump();
            }
            Tok::End => break,
            t => {
                return Err(Error::Syntax {
                    pos: p.pos(),
                    msg: format!("unexpected token {t:?}"),
                })
            }
        }
    }
    if components.len() != n_states {
        return Err(Error::ComponentCount {
            expected: n_states,
            found: components.len(),
        });
    }
    Ok(PhiFunction {
        components,
        n_states,
        n_inputs,
    })
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }
}

/// Sampling box for the Lipschitz estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBox {
    pub x: Vec<Interval>,
    pub u: Vec<Interval>,
}

/// Sampled lower estimate of the Lipschitz constant in `x`.
///
/// Each of the `samples` pairs draws `x₁, x₂` and one shared `u` uniformly
/// from the box. Pairs are drawn in sequence from one seeded stream, so a
/// longer run extends a shorter one and the estimate never decreases.
pub fn estimate_lipschitz(
    phi: &PhiFunction,
    bx: &SampleBox,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if samples < 2 {
        return Err(Error::InvalidArgument(
            "estimate_lipschitz needs at least 2 samples".into(),
        ));
    }
    if bx.x.len() != phi.n_states || bx.u.len() != phi.n_inputs {
        return Err(Error::Dimension(format!(
            "box has {} x- and {} u-intervals, phi needs {} and {}",
            bx.x.len(),
            bx.u.len(),
            phi.n_states,
            phi.n_inputs
        )));
    }
    let bad = |iv: &Interval| !(iv.lo <= iv.hi) || !iv.lo.is_finite() || !iv.hi.is_finite();
    if bx.x.is_empty() || bx.x.iter().chain(&bx.u).any(bad) {
        return Err(Error::InvalidArgument("empty sampling box".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |iv: &Interval, rng: &mut ChaCha8Rng| {
        if iv.lo == iv.hi {
            iv.lo
        } else {
            rng.random_range(iv.lo..=iv.hi)
        }
    };
    let n = phi.n_states;
    let mut x1 = vec![0.0; n];
    let mut x2 = vec![0.0; n];
    let mut u = vec![0.0; phi.n_inputs];
    let mut f1 = vec![0.0; n];
    let mut f2 = vec![0.0; n];
    let mut best = 0.0_f64;
    for _ in 0..samples {
        for (v, iv) in x1.iter_mut().zip(&bx.x) {
            *v = draw(iv, &mut rng);
        }
        for (v, iv) in x2.iter_mut().zip(&bx.x) {
            *v = draw(iv, &mut rng);
        }
        for (v, iv) in u.iter_mut().zip(&bx.u) {
            *v = draw(iv, &mut rng);
        }
        let dx = x1
            .iter()
            .zip(&x2)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if dx == 0.0 {
            continue;
        }
        phi.eval_into(&x1, &u, &mut f1)?;
        phi.eval_into(&x2, &u, &mut f2)?;
        let df = f1
            .iter()
            .zip(&f2)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        best = best.max(df / dx);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const EX_PHI: &str = "sin(x2); -sin(x1)+0.5*sin(x2*u1)";

    #[test]
    fn parses_example_nonlinearity() {
        let phi = parse(EX_PHI, 2, 1).unwrap();
        assert_eq!(phi.components.len(), 2);
        assert_eq!(phi.eval(&[0.0, 0.0], &[0.0]).unwrap(), vec![0.0, 0.0]);
        let v = phi.eval(&[0.0, PI / 2.0], &[0.0]).unwrap();
        assert_abs_diff_eq!(v[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], 0.0, epsilon = 1e-15);
        let v = phi.eval(&[0.3, -0.7], &[2.0]).unwrap();
        assert_abs_diff_eq!(v[1], -(0.3f64).sin() + 0.5 * (-1.4f64).sin(), epsilon = 1e-15);
    }

    #[test]
    fn zero_function() {
        let phi = parse("0; 0", 2, 1).unwrap();
        assert!(phi.is_identically_zero());
        assert_eq!(phi.eval(&[3.0, -1.0], &[7.0]).unwrap(), vec![0.0, 0.0]);
        assert!(!parse(EX_PHI, 2, 1).unwrap().is_identically_zero());
    }

    #[test]
    fn precedence_and_literals() {
        let phi = parse("1 + 2*3 - -4/2; 2.5e-1*(1+x1)", 2, 0).unwrap();
        let v = phi.eval(&[1.0, 0.0], &[]).unwrap();
        assert_eq!(v, vec![9.0, 0.5]);
        let phi = parse("abs(-x1) - cos(0) + tanh(0)", 1, 0).unwrap();
        assert_eq!(phi.eval(&[-2.0], &[]).unwrap(), vec![1.0]);
    }

    #[test]
    fn error_cases() {
        assert!(matches!(
            parse("sin(x3); 0", 2, 1),
            Err(Error::UnknownIdentifier { ref name, pos: 4 }) if name == "x3"
        ));
        assert!(matches!(
            parse("foo(x1); 0", 2, 1),
            Err(Error::UnknownIdentifier { .. })
        ));
        assert!(matches!(parse("u2", 1, 1), Err(Error::UnknownIdentifier { .. })));
        assert!(matches!(parse("x0", 1, 1), Err(Error::UnknownIdentifier { .. })));
        assert!(matches!(
            parse("sin(x1)", 2, 1),
            Err(Error::ComponentCount { expected: 2, found: 1 })
        ));
        assert!(matches!(parse("1 + ", 1, 0), Err(Error::Syntax { pos: 4, .. })));
        assert!(matches!(parse("(1 + 2", 1, 0), Err(Error::Syntax { .. })));
        assert!(matches!(parse("1 $ 2", 1, 0), Err(Error::Syntax { pos: 2, .. })));
        assert!(matches!(parse("sin x1", 1, 0), Err(Error::Syntax { .. })));
        assert!(matches!(parse("1e", 1, 0), Err(Error::Syntax { .. })));
        assert!(matches!(parse("; 1", 2, 0), Err(Error::Syntax { pos: 0, .. })));
    }

    #[test]
    fn division_by_zero_is_domain_error() {
        let phi = parse("1/x1", 1, 0).unwrap();
        assert!(matches!(phi.eval(&[0.0], &[]), Err(Error::Domain(_))));
        assert_eq!(phi.eval(&[4.0], &[]).unwrap(), vec![0.25]);
    }

    #[test]
    fn eval_checks_lengths() {
        let phi = parse(EX_PHI, 2, 1).unwrap();
        assert!(matches!(phi.eval(&[0.0], &[0.0]), Err(Error::Dimension(_))));
    }

    fn unit_box(n: usize, m: usize, r: f64) -> SampleBox {
        SampleBox {
            x: vec![Interval::new(-r, r); n],
            u: vec![Interval::new(-r, r); m],
        }
    }

    #[test]
    fn lipschitz_examples() {
        let sin = parse("sin(x1)", 1, 0).unwrap();
        let l = estimate_lipschitz(&sin, &unit_box(1, 0, PI), 5000, 1).unwrap();
        assert!(l <= 1.0 + 1e-9 && l > 0.9);

        let zero = PhiFunction::zero(2, 1);
        assert_eq!(estimate_lipschitz(&zero, &unit_box(2, 1, 1.0), 100, 1).unwrap(), 0.0);

        let lin = parse("2*x1", 1, 0).unwrap();
        let l = estimate_lipschitz(&lin, &unit_box(1, 0, 1.0), 10_000, 3).unwrap();
        assert_abs_diff_eq!(l, 2.0, epsilon = 1e-3);
    }

    #[test]
    fn lipschitz_errors() {
        let lin = parse("2*x1", 1, 0).unwrap();
        assert!(estimate_lipschitz(&lin, &unit_box(1, 0, 1.0), 1, 0).is_err());
        let empty = SampleBox {
            x: vec![Interval::new(1.0, -1.0)],
            u: vec![],
        };
        assert!(matches!(
            estimate_lipschitz(&lin, &empty, 10, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn lipschitz_is_deterministic() {
        let phi = parse(EX_PHI, 2, 1).unwrap();
        let b = unit_box(2, 1, 2.0);
        assert_eq!(
            estimate_lipschitz(&phi, &b, 500, 42).unwrap(),
            estimate_lipschitz(&phi, &b, 500, 42).unwrap()
        );
    }

    fn arb_expr(n: usize, m: usize) -> impl Strategy<Value = ExprNode> {
        let leaf = prop_oneof![
            (-5.0..5.0_f64).prop_map(ExprNode::Const),
            (0..n).prop_map(|i| ExprNode::Var(VarKind::State, i)),
            (0..m).prop_map(|i| ExprNode::Var(VarKind::Input, i)),
        ];
        leaf.prop_recursive(4, 32, 2, |inner| {
            prop_oneof![
                (
                    prop_oneof![
                        Just(UnaryOp::Neg),
                        Just(UnaryOp::Sin),
                        Just(UnaryOp::Cos),
                        Just(UnaryOp::Tanh),
                        Just(UnaryOp::Abs)
                    ],
                    inner.clone()
                )
                    .prop_map(|(op, c)| ExprNode::Unary(op, Box::new(c))),
                (
                    prop_oneof![Just(BinaryOp::Add), Just(BinaryOp::Sub), Just(BinaryOp::Mul)],
                    inner.clone(),
                    inner
                )
                    .prop_map(|(op, l, r)| ExprNode::Binary(op, Box::new(l), Box::new(r))),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn print_parse_round_trip(
            a in arb_expr(2, 1),
            b in arb_expr(2, 1),
            x in prop::collection::vec(-3.0..3.0_f64, 2),
            u in prop::collection::vec(-3.0..3.0_f64, 1),
        ) {
            let phi = PhiFunction { components: vec![a, b], n_states: 2, n_inputs: 1 };
            let reparsed = parse(&phi.to_string(), 2, 1).unwrap();
            let v1 = phi.eval(&x, &u).unwrap();
            let v2 = reparsed.eval(&x, &u).unwrap();
            for (p, q) in v1.iter().zip(&v2) {
                prop_assert!((p - q).abs() <= 1e-12 * p.abs().max(1.0));
            }
        }

        #[test]
        fn lipschitz_bounded_and_monotone(seed in any::<u64>(), k in 2usize..300) {
            let sin = parse("sin(x1); 0.5*x2", 2, 0).unwrap();
            let b = unit_box(2, 0, 3.0);
            let small = estimate_lipschitz(&sin, &b, k, seed).unwrap();
            let large = estimate_lipschitz(&sin, &b, 2 * k, seed).unwrap();
            prop_assert!(small <= large);
            prop_assert!(large <= 1.0 + 1e-9);
        }
    }
}
