//! Shared expression grammar for functions and operators.
//!
//! Function expressions: generator or quasiconstant names, derivatives as
//! primes (`L'`, `L''`) or `L^(n)`, rationals `a/b`, operators `+ - * / ^`
//! with standard precedence, parentheses.
//!
//! Operator expressions extend the grammar with `d` (the derivation) and
//! `dinv` (its formal inverse); `*` is composition, a bare function term is
//! the corresponding multiplication operator: `d*L + L*d - 1/2*d^3`.

use crate::diffring::{Algebra, DiffFrac, DiffPoly, RingError};
use crate::psdo::PseudoOp;
use crate::rat::{rat_int, Rat};

/// Parse or evaluation failure, with a byte offset into the source text.
#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at offset {0}: {1}")]
    Syntax(usize, String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("the operator symbol `{0}` is not allowed in a function expression")]
    OperatorInFunction(String),
    #[error("derivative of a quasiconstant `{0}` is zero; primed quasiconstants are not symbols")]
    PrimedQuasiconstant(String),
    #[error("unsupported exponent")]
    BadExponent,
    #[error(transparent)]
    Ring(#[from] RingError),
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(String),
    Primes(usize),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                out.push((i, Tok::Plus));
                i += 1;
            }
            '-' => {
                out.push((i, Tok::Minus));
                i += 1;
            }
            '*' => {
                out.push((i, Tok::Star));
                i += 1;
            }
            '/' => {
                out.push((i, Tok::Slash));
                i += 1;
            }
            '^' => {
                out.push((i, Tok::Caret));
                i += 1;
            }
            '(' => {
                out.push((i, Tok::LParen));
                i += 1;
            }
            ')' => {
                out.push((i, Tok::RParen));
                i += 1;
            }
            '\'' => {
                let start = i;
                let mut n = 0;
                while i < bytes.len() && bytes[i] == b'\'' {
                    n += 1;
                    i += 1;
                }
                out.push((start, Tok::Primes(n)));
            }
            '0'..='9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                out.push((start, Tok::Int(src[start..i].to_string())));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(src[start..i].to_string())));
            }
            other => {
                return Err(ExprError::Syntax(
                    i,
                    format!("unexpected character `{}`", other),
                ))
            }
        }
    }
    Ok(out)
}

/// Abstract expression, shared by function and operator contexts.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(Rat),
    /// Symbol with a derivative order.
    Sym(String, usize),
    D,
    Dinv,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i64),
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|(o, _)| *o)
            .unwrap_or(usize::MAX)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), ExprError> {
        let off = self.offset();
        match self.bump() {
            Some(t) if t == want => Ok(()),
            other => Err(ExprError::Syntax(
                off,
                format!("expected {:?}, found {:?}", want, other),
            )),
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Minus) => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                    let rhs = self.factor()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Slash) => {
                    self.bump();
                    let rhs = self.factor()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.bump();
            let inner = self.factor()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        let mut base = self.primary()?;
        while matches!(self.peek(), Some(Tok::Caret)) {
            self.bump();
            let neg = if matches!(self.peek(), Some(Tok::Minus)) {
                self.bump();
                true
            } else {
                false
            };
            let off = self.offset();
            let Some(Tok::Int(text)) = self.bump() else {
                return Err(ExprError::Syntax(off, "expected integer exponent".into()));
            };
            let k: i64 = text
                .parse()
                .map_err(|_| ExprError::Syntax(off, "exponent too large".into()))?;
            base = Expr::Pow(Box::new(base), if neg { -k } else { k });
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let off = self.offset();
        match self.bump() {
            Some(Tok::Int(text)) => {
                let n: i64 = text
                    .parse()
                    .map_err(|_| ExprError::Syntax(off, "integer too large".into()))?;
                Ok(Expr::Num(rat_int(n)))
            }
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                if name == "d" {
                    return Ok(Expr::D);
                }
                if name == "dinv" {
                    return Ok(Expr::Dinv);
                }
                let mut order = 0usize;
                if let Some(Tok::Primes(n)) = self.peek() {
                    order = *n;
                    self.bump();
                } else if matches!(self.peek(), Some(Tok::Caret))
                    && matches!(
                        self.toks.get(self.pos + 1).map(|(_, t)| t),
                        Some(Tok::LParen)
                    )
                {
                    // name^(n): derivative of order n
                    self.bump();
                    self.bump();
                    let off2 = self.offset();
                    let Some(Tok::Int(text)) = self.bump() else {
                        return Err(ExprError::Syntax(off2, "expected derivative order".into()));
                    };
                    order = text
                        .parse()
                        .map_err(|_| ExprError::Syntax(off2, "order too large".into()))?;
                    self.expect(Tok::RParen)?;
                }
                Ok(Expr::Sym(name, order))
            }
            other => Err(ExprError::Syntax(
                off,
                format!("unexpected token {:?}", other),
            )),
        }
    }
}

/// Parse source text into an expression tree.
pub fn parse_expr(src: &str) -> Result<Expr, ExprError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(ExprError::Syntax(p.offset(), "trailing input".into()));
    }
    Ok(e)
}

/// Evaluate an expression as a function (element of the fraction field).
pub fn eval_function(e: &Expr, alg: &Algebra) -> Result<DiffFrac, ExprError> {
    match e {
        Expr::Num(r) => Ok(DiffFrac::constant(alg, r.clone())),
        Expr::Sym(name, order) => {
            if let Some(i) = alg.gen_index(name) {
                Ok(DiffFrac::from_poly(DiffPoly::jet(alg, i, *order)))
            } else if let Some(q) = alg.quasi_index(name) {
                if *order > 0 {
                    Err(ExprError::PrimedQuasiconstant(name.clone()))
                } else {
                    Ok(DiffFrac::from_poly(DiffPoly::quasi(alg, q)))
                }
            } else {
                Err(ExprError::UnknownSymbol(name.clone()))
            }
        }
        Expr::D => Err(ExprError::OperatorInFunction("d".into())),
        Expr::Dinv => Err(ExprError::OperatorInFunction("dinv".into())),
        Expr::Neg(x) => Ok(eval_function(x, alg)?.neg()),
        Expr::Add(a, b) => Ok(eval_function(a, alg)?.add(&eval_function(b, alg)?)),
        Expr::Sub(a, b) => Ok(eval_function(a, alg)?.sub(&eval_function(b, alg)?)),
        Expr::Mul(a, b) => Ok(eval_function(a, alg)?.mul(&eval_function(b, alg)?)),
        Expr::Div(a, b) => Ok(eval_function(a, alg)?.div(&eval_function(b, alg)?)?),
        Expr::Pow(b, k) => {
            let base = eval_function(b, alg)?;
            let k32: i32 = (*k).try_into().map_err(|_| ExprError::BadExponent)?;
            Ok(base.pow(k32)?)
        }
    }
}

/// Evaluate an expression as a pseudodifferential operator at a depth.
pub fn eval_operator(e: &Expr, alg: &Algebra, depth: i64) -> Result<PseudoOp, ExprError> {
    // pure function subtrees become multiplication operators
    if let Ok(f) = eval_function(e, alg) {
        return Ok(PseudoOp::mult(f, depth));
    }
    match e {
        Expr::D => Ok(PseudoOp::d_pow(alg, 1, depth)),
        Expr::Dinv => Ok(PseudoOp::d_pow(alg, -1, depth)),
        Expr::Neg(x) => Ok(eval_operator(x, alg, depth)?.neg()),
        Expr::Add(a, b) => Ok(eval_operator(a, alg, depth)?.add(&eval_operator(b, alg, depth)?)),
        Expr::Sub(a, b) => Ok(eval_operator(a, alg, depth)?.sub(&eval_operator(b, alg, depth)?)),
        Expr::Mul(a, b) => {
            Ok(eval_operator(a, alg, depth)?.compose(&eval_operator(b, alg, depth)?))
        }
        Expr::Div(a, b) => {
            // division only by functions: compose with multiplication by 1/b
            let rhs = eval_function(b, alg)?;
            let inv = rhs.inv()?;
            Ok(eval_operator(a, alg, depth)?.compose(&PseudoOp::mult(inv, depth)))
        }
        Expr::Pow(b, k) => match b.as_ref() {
            Expr::D => Ok(PseudoOp::d_pow(alg, *k, depth)),
            Expr::Dinv => Ok(PseudoOp::d_pow(alg, -*k, depth)),
            _ => {
                if *k < 0 {
                    return Err(ExprError::BadExponent);
                }
                let base = eval_operator(b, alg, depth)?;
                let mut out = PseudoOp::one(alg, depth);
                for _ in 0..*k {
                    out = out.compose(&base);
                }
                Ok(out)
            }
        },
        _ => unreachable!("function subtrees handled above"),
    }
}

/// Parse and evaluate in one go (function context).
pub fn parse_function(src: &str, alg: &Algebra) -> Result<DiffFrac, ExprError> {
    eval_function(&parse_expr(src)?, alg)
}

/// Parse and evaluate in one go (operator context).
pub fn parse_operator(src: &str, alg: &Algebra, depth: i64) -> Result<PseudoOp, ExprError> {
    eval_operator(&parse_expr(src)?, alg, depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffring::AlgebraDescriptor;
    use crate::rat::rat;

    fn alg() -> Algebra {
        AlgebraDescriptor::with_names(&["L", "psip"], &["c"])
    }

    #[test]
    fn function_parsing() {
        let a = alg();
        let f = parse_function("3/2*L'' - psip*L + c", &a).unwrap();
        let want = DiffFrac::from_poly(
            DiffPoly::jet(&a, 0, 2)
                .scale(&rat(3, 2))
                .sub(&DiffPoly::gen(&a, 1).mul(&DiffPoly::gen(&a, 0)))
                .add(&DiffPoly::quasi(&a, 0)),
        );
        assert_eq!(f, want);
        // high-order derivative syntax and powers
        let g = parse_function("L^(4)^2", &a).unwrap();
        assert_eq!(g, DiffFrac::from_poly(DiffPoly::jet(&a, 0, 4).pow(2)));
        // fractions of polynomials
        let h = parse_function("1/psip^2", &a).unwrap();
        assert_eq!(
            h,
            DiffFrac::from_poly(DiffPoly::one(&a))
                .div(&DiffFrac::from_poly(DiffPoly::gen(&a, 1).pow(2)))
                .unwrap()
        );
    }

    #[test]
    fn operator_parsing() {
        let a = alg();
        // d*L + L*d - 1/2*d^3: composition puts coefficients left
        let p = parse_operator("d*L + L*d - 1/2*d^3", &a, 8).unwrap();
        let ell = DiffFrac::from_poly(DiffPoly::gen(&a, 0));
        let ellp = DiffFrac::from_poly(DiffPoly::jet(&a, 0, 1));
        let mut want = PseudoOp::term(ell.scale(&crate::rat::rat_int(2)), 1, 8);
        want.insert(0, ellp);
        want.insert(3, DiffFrac::constant(&a, rat(-1, 2)));
        assert_eq!(p, want);
        // dinv powers
        let q = parse_operator("psip*dinv^2", &a, 8).unwrap();
        assert_eq!(
            q,
            PseudoOp::term(DiffFrac::from_poly(DiffPoly::gen(&a, 1)), -2, 8)
        );
    }

    #[test]
    fn display_roundtrip() {
        let a = alg();
        for src in [
            "2*L*d + L' - 1/2*d^3",
            "3/2*psip*d + 1/2*psip'",
            "L - d^2 - 3/2*psip*dinv*psip",
            "(L' + 2*L)*dinv^3",
        ] {
            let p = parse_operator(src, &a, 10).unwrap();
            let q = parse_operator(&p.to_string(), &a, 10).unwrap();
            assert!(p.eq_to_depth(&q, 10), "{} -> {}", src, p);
        }
        // function display roundtrip
        let f = parse_function("3/2*L''*psip - 7*c*L^(5)", &a).unwrap();
        let g = parse_function(&f.to_string(), &a).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn errors() {
        let a = alg();
        assert!(matches!(
            parse_function("nope", &a),
            Err(ExprError::UnknownSymbol(_))
        ));
        assert!(matches!(
            parse_function("d*L", &a),
            Err(ExprError::OperatorInFunction(_))
        ));
        assert!(matches!(
            parse_function("c'", &a),
            Err(ExprError::PrimedQuasiconstant(_))
        ));
        assert!(parse_expr("L +").is_err());
        assert!(parse_expr("(L").is_err());
    }
}
