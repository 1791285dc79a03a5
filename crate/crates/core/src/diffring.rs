//! Exact differential algebra of jet polynomials and their fractions.
//!
//! The ambient ring is the algebra of differential polynomials
//! `V = F[u_i^(n) | 1 <= i <= l, n >= 0]`, optionally extended by a set of
//! quasiconstant symbols (elements killed by every partial derivative
//! `d/du_i^(n)` and, in this engine, by the total derivative as well).
//! `DiffFrac` is the field of fractions of `V`.
//!
//! The module provides the total derivative, ordinary and modified partial
//! derivatives, Frechet and variational derivatives, density reconstruction
//! from a variational gradient (homotopy formula), formal antiderivatives,
//! and projection onto the quotient by constraints `theta_a = u_{l-m+a} + p_a`.

use crate::rat::{rat_int, Rat};
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// A variable of the differential polynomial ring: either a jet variable
/// `u_gen^(order)` or a quasiconstant symbol.
///
/// The derived ordering (jet variables by `(gen, order)`, quasiconstants
/// last) is the canonical variable order of the engine.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub enum Var {
    /// Jet variable `u_gen^(order)`, zero-based generator index.
    Jet { gen: u16, order: u16 },
    /// Quasiconstant symbol, zero-based index into the algebra's list.
    Quasi(u16),
}

impl Var {
    pub fn jet(gen: usize, order: usize) -> Self {
        Var::Jet {
            gen: gen as u16,
            order: order as u16,
        }
    }

    /// The variable obtained by applying the total derivative once.
    /// Quasiconstants have no raised image (their derivative is zero).
    fn raise(self) -> Option<Var> {
        match self {
            Var::Jet { gen, order } => Some(Var::Jet {
                gen,
                order: order + 1,
            }),
            Var::Quasi(_) => None,
        }
    }
}

/// Errors raised by differential-ring operations.
#[derive(thiserror::Error, Debug, Clone, PartialEq, Eq)]
pub enum RingError {
    #[error("generator index {0} out of range (algebra has {1} generators)")]
    IndexOutOfRange(usize, usize),
    #[error("division by zero polynomial")]
    DivisionByZero,
    #[error("denominator vanishes under quotient projection")]
    DenominatorVanishes,
    #[error("gradient fails the Helmholtz self-adjointness condition")]
    HelmholtzViolation,
    #[error("operation requires polynomial input, found a genuine fraction")]
    NonPolynomialInput,
    #[error("element is not a total derivative")]
    NotExact,
    #[error("constraint density p_{0} depends on a constrained generator")]
    InvalidConstraint(usize),
    #[error("tilde-mode operation requires a constraint context")]
    MissingContext,
    #[error("algebra mismatch between operands")]
    AlgebraMismatch,
}

/// Descriptor of the ambient algebra: generator names and quasiconstant
/// symbol names. Shared by reference between all values built over it.
#[derive(Debug, PartialEq, Eq)]
pub struct AlgebraDescriptor {
    gens: Vec<String>,
    quasi: Vec<String>,
}

pub type Algebra = Arc<AlgebraDescriptor>;

impl AlgebraDescriptor {
    pub fn new(gens: Vec<String>, quasi: Vec<String>) -> Algebra {
        assert!(!gens.is_empty(), "algebra needs at least one generator");
        let mut names: Vec<&String> = gens.iter().chain(quasi.iter()).collect();
        names.sort();
        names.dedup();
        assert_eq!(
            names.len(),
            gens.len() + quasi.len(),
            "generator/quasiconstant names must be distinct"
        );
        Arc::new(AlgebraDescriptor { gens, quasi })
    }

    /// Convenience constructor from name lists.
    pub fn with_names(gens: &[&str], quasi: &[&str]) -> Algebra {
        Self::new(
            gens.iter().map(|s| s.to_string()).collect(),
            quasi.iter().map(|s| s.to_string()).collect(),
        )
    }

    /// Number of generators `l`.
    pub fn num_gens(&self) -> usize {
        self.gens.len()
    }

    pub fn gen_names(&self) -> &[String] {
        &self.gens
    }

    pub fn quasi_names(&self) -> &[String] {
        &self.quasi
    }

    pub fn gen_index(&self, name: &str) -> Option<usize> {
        self.gens.iter().position(|g| g == name)
    }

    pub fn quasi_index(&self, name: &str) -> Option<usize> {
        self.quasi.iter().position(|g| g == name)
    }

    fn var_name(&self, v: Var) -> String {
        match v {
            Var::Jet { gen, order } => {
                let base = &self.gens[gen as usize];
                match order {
                    0 => base.clone(),
                    1..=3 => format!("{}{}", base, "'".repeat(order as usize)),
                    n => format!("{}^({})", base, n),
                }
            }
            Var::Quasi(q) => self.quasi[q as usize].clone(),
        }
    }
}

/// Constraint context for the special form `theta_a = u_{l-m+a} + p_a`.
///
/// The densities `p_a` must be independent of the constrained generators
/// `u_{l-m+1}, ..., u_l` and of their derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintContext {
    m: usize,
    p: Vec<DiffPoly>,
}

impl ConstraintContext {
    pub fn new(p: Vec<DiffPoly>) -> Result<Self, RingError> {
        let m = p.len();
        assert!(m > 0, "constraint context needs at least one constraint");
        let ell = p[0].algebra().num_gens();
        assert!(m <= ell);
        let first_constrained = ell - m;
        for (a, pa) in p.iter().enumerate() {
            for (mono, _) in pa.terms() {
                for (v, _) in mono.vars() {
                    if let Var::Jet { gen, .. } = v {
                        if *gen as usize >= first_constrained {
                            return Err(RingError::InvalidConstraint(a));
                        }
                    }
                }
            }
        }
        Ok(ConstraintContext { m, p })
    }

    pub fn num_constraints(&self) -> usize {
        self.m
    }

    pub fn densities(&self) -> &[DiffPoly] {
        &self.p
    }

    pub fn algebra(&self) -> &Algebra {
        self.p[0].algebra()
    }

    /// Number of unconstrained generators `l - m`.
    pub fn free_gens(&self) -> usize {
        self.algebra().num_gens() - self.m
    }

    /// The constraints themselves, `theta_a = u_{l-m+a} + p_a`.
    pub fn thetas(&self) -> Vec<DiffPoly> {
        let base = self.free_gens();
        self.p
            .iter()
            .enumerate()
            .map(|(a, pa)| DiffPoly::gen(self.algebra(), base + a).add(pa))
            .collect()
    }

    /// The quotient algebra on the unconstrained generators.
    pub fn quotient_algebra(&self) -> Algebra {
        let amb = self.algebra();
        AlgebraDescriptor::new(
            amb.gen_names()[..self.free_gens()].to_vec(),
            amb.quasi_names().to_vec(),
        )
    }
}

/// A monomial: sorted list of `(variable, exponent)` with positive exponents.
#[derive(Clone, PartialEq, Eq, Debug, Hash)]
pub struct Monomial(Vec<(Var, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(v: Var) -> Self {
        Monomial(vec![(v, 1)])
    }

    pub fn from_pairs(mut pairs: Vec<(Var, u32)>) -> Self {
        pairs.retain(|(_, e)| *e > 0);
        pairs.sort_by_key(|(v, _)| *v);
        let mut out: Vec<(Var, u32)> = Vec::with_capacity(pairs.len());
        for (v, e) in pairs {
            match out.last_mut() {
                Some((lv, le)) if *lv == v => *le += e,
                _ => out.push((v, e)),
            }
        }
        Monomial(out)
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn vars(&self) -> &[(Var, u32)] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    /// Total degree counting only jet variables.
    pub fn jet_degree(&self) -> u32 {
        self.0
            .iter()
            .filter(|(v, _)| matches!(v, Var::Jet { .. }))
            .map(|(_, e)| e)
            .sum()
    }

    pub fn exponent(&self, v: Var) -> u32 {
        self.0
            .iter()
            .find(|(w, _)| *w == v)
            .map(|(_, e)| *e)
            .unwrap_or(0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut pairs = self.0.clone();
        pairs.extend_from_slice(&other.0);
        Monomial::from_pairs(pairs)
    }

    /// Exact division; `None` when some exponent would go negative.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = self.0.clone();
        for (v, e) in &other.0 {
            let slot = out.iter_mut().find(|(w, _)| w == v)?;
            if slot.1 < *e {
                return None;
            }
            slot.1 -= e;
        }
        out.retain(|(_, e)| *e > 0);
        Some(Monomial(out))
    }

    /// Replace `v` by `v` with exponent decreased by one.
    fn lower_exponent(&self, v: Var) -> Monomial {
        self.div(&Monomial::var(v)).expect("variable not present")
    }

    /// Maximum derivative order among jet variables of a given generator.
    pub fn max_order(&self, gen: usize) -> Option<u16> {
        self.0
            .iter()
            .filter_map(|(v, _)| match v {
                Var::Jet { gen: g, order } if *g as usize == gen => Some(*order),
                _ => None,
            })
            .max()
    }

    /// Maximum derivative order over all jet variables.
    pub fn top_order(&self) -> Option<u16> {
        self.0
            .iter()
            .filter_map(|(v, _)| match v {
                Var::Jet { order, .. } => Some(*order),
                _ => None,
            })
            .max()
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Graded order: total degree first, then lexicographic on the sorted
/// variable/exponent vectors. Deterministic and multiplicative, which is
/// all polynomial division and canonical printing need.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| {
                // Lexicographic: a higher power of an earlier variable wins.
                let mut a = self.0.iter();
                let mut b = other.0.iter();
                loop {
                    match (a.next(), b.next()) {
                        (None, None) => return std::cmp::Ordering::Equal,
                        (None, Some(_)) => return std::cmp::Ordering::Less,
                        (Some(_), None) => return std::cmp::Ordering::Greater,
                        (Some((va, ea)), Some((vb, eb))) => {
                            // Earlier variable present means more weight there.
                            match va.cmp(vb) {
                                std::cmp::Ordering::Less => return std::cmp::Ordering::Greater,
                                std::cmp::Ordering::Greater => return std::cmp::Ordering::Less,
                                std::cmp::Ordering::Equal => match ea.cmp(eb) {
                                    std::cmp::Ordering::Equal => continue,
                                    ord => return ord,
                                },
                            }
                        }
                    }
                }
            })
    }
}

/// Sparse differential polynomial with exact rational coefficients.
#[derive(Clone, PartialEq, Debug)]
pub struct DiffPoly {
    alg: Algebra,
    terms: BTreeMap<Monomial, Rat>,
}

impl DiffPoly {
    pub fn zero(alg: &Algebra) -> Self {
        DiffPoly {
            alg: alg.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(alg: &Algebra, c: Rat) -> Self {
        let mut p = Self::zero(alg);
        if !c.is_zero() {
            p.terms.insert(Monomial::one(), c);
        }
        p
    }

    pub fn one(alg: &Algebra) -> Self {
        Self::constant(alg, Rat::one())
    }

    pub fn int(alg: &Algebra, n: i64) -> Self {
        Self::constant(alg, rat_int(n))
    }

    /// The generator `u_i` (zero-based).
    pub fn gen(alg: &Algebra, i: usize) -> Self {
        Self::jet(alg, i, 0)
    }

    /// The jet variable `u_i^(n)` (zero-based generator index).
    pub fn jet(alg: &Algebra, i: usize, n: usize) -> Self {
        assert!(i < alg.num_gens());
        Self::from_term(alg, Monomial::var(Var::jet(i, n)), Rat::one())
    }

    pub fn quasi(alg: &Algebra, q: usize) -> Self {
        assert!(q < alg.quasi_names().len());
        Self::from_term(alg, Monomial::var(Var::Quasi(q as u16)), Rat::one())
    }

    pub fn from_term(alg: &Algebra, m: Monomial, c: Rat) -> Self {
        let mut p = Self::zero(alg);
        if !c.is_zero() {
            p.terms.insert(m, c);
        }
        p
    }

    pub fn algebra(&self) -> &Algebra {
        &self.alg
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .get(&Monomial::one())
                .map(|c| c.is_one())
                .unwrap_or(false)
    }

    /// True if the polynomial is free of jet variables (a quasiconstant).
    pub fn is_quasiconstant(&self) -> bool {
        self.terms.keys().all(|m| m.jet_degree() == 0)
    }

    /// The constant term as a rational, if the polynomial is a constant.
    pub fn as_rat(&self) -> Option<Rat> {
        if self.is_zero() {
            return Some(Rat::zero());
        }
        if self.terms.len() == 1 {
            if let Some(c) = self.terms.get(&Monomial::one()) {
                return Some(c.clone());
            }
        }
        None
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rat)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Leading (maximal) term in the canonical monomial order.
    pub fn leading(&self) -> Option<(&Monomial, &Rat)> {
        self.terms.iter().next_back()
    }

    fn insert_term(&mut self, m: Monomial, c: Rat) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get().clone() + c;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &DiffPoly) -> DiffPoly {
        debug_assert_eq!(self.alg, other.alg);
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &DiffPoly) -> DiffPoly {
        debug_assert_eq!(self.alg, other.alg);
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert_term(m.clone(), -c.clone());
        }
        out
    }

    pub fn neg(&self) -> DiffPoly {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = -c.clone();
        }
        out
    }

    pub fn scale(&self, k: &Rat) -> DiffPoly {
        if k.is_zero() {
            return Self::zero(&self.alg);
        }
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= k;
        }
        out
    }

    pub fn mul(&self, other: &DiffPoly) -> DiffPoly {
        debug_assert_eq!(self.alg, other.alg);
        let mut out = Self::zero(&self.alg);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.insert_term(ma.mul(mb), ca.clone() * cb);
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> DiffPoly {
        let mut out = Self::one(&self.alg);
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// Exact polynomial division; `None` if `divisor` does not divide `self`.
    pub fn div_exact(&self, divisor: &DiffPoly) -> Option<DiffPoly> {
        if divisor.is_zero() {
            return None;
        }
        let (dm, dc) = divisor.leading().unwrap();
        let mut rem = self.clone();
        let mut quo = Self::zero(&self.alg);
        while let Some((rm, rc)) = rem.leading() {
            let qm = rm.div(dm)?;
            let qc = rc.clone() / dc.clone();
            let qt = Self::from_term(&self.alg, qm, qc);
            rem = rem.sub(&qt.mul(divisor));
            quo = quo.add(&qt);
        }
        Some(quo)
    }

    /// Total derivative: the unique derivation with `d(u_i^(n)) = u_i^(n+1)`
    /// killing quasiconstants.
    pub fn total_derivative(&self) -> DiffPoly {
        let mut out = Self::zero(&self.alg);
        for (m, c) in &self.terms {
            for (v, e) in m.vars() {
                if let Some(vr) = v.raise() {
                    let lowered = m.lower_exponent(*v);
                    let raised = lowered.mul(&Monomial::var(vr));
                    out.insert_term(raised, c.clone() * rat_int(*e as i64));
                }
            }
        }
        out
    }

    /// Iterated total derivative.
    pub fn total_derivative_n(&self, n: usize) -> DiffPoly {
        let mut out = self.clone();
        for _ in 0..n {
            out = out.total_derivative();
        }
        out
    }

    /// Partial derivative with respect to an arbitrary variable.
    pub fn partial_var(&self, v: Var) -> DiffPoly {
        let mut out = Self::zero(&self.alg);
        for (m, c) in &self.terms {
            let e = m.exponent(v);
            if e > 0 {
                out.insert_term(m.lower_exponent(v), c.clone() * rat_int(e as i64));
            }
        }
        out
    }

    /// Partial derivative `d/du_i^(n)` (zero-based generator index).
    pub fn partial(&self, i: usize, n: usize) -> Result<DiffPoly, RingError> {
        let ell = self.alg.num_gens();
        if i >= ell {
            return Err(RingError::IndexOutOfRange(i, ell));
        }
        Ok(self.partial_var(Var::jet(i, n)))
    }

    /// Modified partial derivative of the constrained algebra:
    /// `d~/d~u_i^(s) = d/du_i^(s) - sum_{a,n} (d(d^n p_a)/du_i^(s)) d/du_{l-m+a}^(n)`.
    pub fn partial_tilde(
        &self,
        ctx: &ConstraintContext,
        i: usize,
        s: usize,
    ) -> Result<DiffPoly, RingError> {
        let free = ctx.free_gens();
        if i >= free {
            return Err(RingError::IndexOutOfRange(i, free));
        }
        let mut out = self.partial(i, s)?;
        for (a, pa) in ctx.densities().iter().enumerate() {
            // Finiteness comes from f: df/du_(l-m+a)^(n) vanishes above the
            // order of f in the constrained generator.
            let Some(n_max) = self.max_order(free + a) else {
                continue;
            };
            let mut dn_pa = pa.clone();
            for n in 0..=n_max {
                let inner = self.partial(free + a, n)?;
                if !inner.is_zero() {
                    let factor = dn_pa.partial(i, s)?;
                    if !factor.is_zero() {
                        out = out.sub(&factor.mul(&inner));
                    }
                }
                dn_pa = dn_pa.total_derivative();
            }
        }
        Ok(out)
    }

    /// Highest derivative order of generator `i` occurring in the polynomial.
    pub fn max_order(&self, i: usize) -> Option<usize> {
        self.terms
            .keys()
            .filter_map(|m| m.max_order(i))
            .max()
            .map(|o| o as usize)
    }

    /// Highest derivative order over all generators.
    pub fn top_order(&self) -> Option<usize> {
        self.terms
            .keys()
            .filter_map(|m| m.top_order())
            .max()
            .map(|o| o as usize)
    }

    /// Variational derivative `delta f / delta u_i = sum_n (-d)^n df/du_i^(n)`.
    pub fn variational(&self, i: usize) -> Result<DiffPoly, RingError> {
        let top = self.max_order(i).unwrap_or(0);
        let mut out = Self::zero(&self.alg);
        for n in 0..=top {
            let mut term = self.partial(i, n)?;
            term = term.total_derivative_n(n);
            if n % 2 == 1 {
                term = term.neg();
            }
            out = out.add(&term);
        }
        Ok(out)
    }

    /// Full variational gradient `(delta f / delta u_1, ..., delta f / delta u_l)`.
    pub fn variational_gradient(&self) -> Vec<DiffPoly> {
        (0..self.alg.num_gens())
            .map(|i| self.variational(i).expect("index in range"))
            .collect()
    }

    /// Tilde variational gradient on the constrained algebra:
    /// the `(l-m)`-vector `(1, -D_p^*) . (delta f / delta u)`.
    pub fn variational_gradient_tilde(
        &self,
        ctx: &ConstraintContext,
    ) -> Result<Vec<DiffPoly>, RingError> {
        let free = ctx.free_gens();
        let mut out = Vec::with_capacity(free);
        for i in 0..free {
            let mut acc = Self::zero(&self.alg);
            // sum_s (-d)^s of the modified partial, computed directly from
            // the definition of d~/d~u_i^(s).
            let top = self.top_order().unwrap_or(0)
                + ctx
                    .densities()
                    .iter()
                    .filter_map(|p| p.top_order())
                    .max()
                    .unwrap_or(0)
                + 1;
            for s in 0..=top {
                let mut term = self.partial_tilde(ctx, i, s)?;
                if term.is_zero() {
                    continue;
                }
                term = term.total_derivative_n(s);
                if s % 2 == 1 {
                    term = term.neg();
                }
                acc = acc.add(&term);
            }
            out.push(acc);
        }
        Ok(out)
    }

    /// Quotient projection: substitute `u_{l-m+a}^(n) -> -d^n(p_a)` and
    /// re-express over the quotient algebra.
    pub fn project(&self, ctx: &ConstraintContext) -> DiffPoly {
        let free = ctx.free_gens();
        let target = ctx.quotient_algebra();
        let mut out = DiffPoly::zero(&target);
        for (m, c) in &self.terms {
            let mut factor = DiffPoly::constant(&target, c.clone());
            for (v, e) in m.vars() {
                let piece = match v {
                    Var::Jet { gen, order } if (*gen as usize) < free => {
                        DiffPoly::jet(&target, *gen as usize, *order as usize)
                    }
                    Var::Jet { gen, order } => {
                        let a = *gen as usize - free;
                        let image = ctx.densities()[a]
                            .total_derivative_n(*order as usize)
                            .neg();
                        image.rebase(&target)
                    }
                    Var::Quasi(q) => DiffPoly::quasi(&target, *q as usize),
                };
                factor = factor.mul(&piece.pow(*e));
                if factor.is_zero() {
                    break;
                }
            }
            out = out.add(&factor);
        }
        out
    }

    /// Re-express over another algebra with the same leading generator and
    /// quasiconstant layout. Panics if a variable does not exist there.
    fn rebase(&self, target: &Algebra) -> DiffPoly {
        let mut out = DiffPoly::zero(target);
        for (m, c) in &self.terms {
            for (v, _) in m.vars() {
                if let Var::Jet { gen, .. } = v {
                    assert!((*gen as usize) < target.num_gens());
                }
            }
            out.insert_term(m.clone(), c.clone());
        }
        out
    }

    /// Interpret this polynomial over a larger algebra that extends the
    /// current one (same generator prefix and quasiconstants).
    pub fn lift(&self, target: &Algebra) -> DiffPoly {
        assert!(target.num_gens() >= self.alg.num_gens());
        let mut out = DiffPoly::zero(target);
        for (m, c) in &self.terms {
            out.insert_term(m.clone(), c.clone());
        }
        out
    }
}

impl fmt::Display for DiffPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        // Descending canonical order for stable, readable output.
        for (k, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if k == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mut pieces: Vec<String> = Vec::new();
            if !abs.is_one() || m.is_one() {
                pieces.push(abs.to_string());
            }
            for (v, e) in m.vars() {
                let name = self.alg.var_name(*v);
                if *e == 1 {
                    pieces.push(name);
                } else {
                    pieces.push(format!("{}^{}", name, e));
                }
            }
            write!(f, "{}", pieces.join("*"))?;
        }
        Ok(())
    }
}

/// A fraction of differential polynomials.
///
/// Fractions are reduced opportunistically (monomial content, rational
/// content, exact cancellation); equality is decided by cross-multiplication.
/// The denominator's leading coefficient is kept positive.
#[derive(Clone, Debug)]
pub struct DiffFrac {
    num: DiffPoly,
    den: DiffPoly,
}

impl DiffFrac {
    pub fn new(num: DiffPoly, den: DiffPoly) -> Result<Self, RingError> {
        if den.is_zero() {
            return Err(RingError::DivisionByZero);
        }
        let mut f = DiffFrac { num, den };
        f.normalize();
        Ok(f)
    }

    pub fn from_poly(p: DiffPoly) -> Self {
        let den = DiffPoly::one(p.algebra());
        DiffFrac { num: p, den }
    }

    pub fn zero(alg: &Algebra) -> Self {
        Self::from_poly(DiffPoly::zero(alg))
    }

    pub fn one(alg: &Algebra) -> Self {
        Self::from_poly(DiffPoly::one(alg))
    }

    pub fn constant(alg: &Algebra, c: Rat) -> Self {
        Self::from_poly(DiffPoly::constant(alg, c))
    }

    pub fn numer(&self) -> &DiffPoly {
        &self.num
    }

    pub fn denom(&self) -> &DiffPoly {
        &self.den
    }

    pub fn algebra(&self) -> &Algebra {
        self.num.algebra()
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num == self.den
    }

    /// True if the denominator reduced to 1.
    pub fn is_polynomial(&self) -> bool {
        self.den.is_one()
    }

    /// The numerator, provided the fraction is a polynomial.
    pub fn as_poly(&self) -> Result<DiffPoly, RingError> {
        if self.is_polynomial() {
            Ok(self.num.clone())
        } else {
            Err(RingError::NonPolynomialInput)
        }
    }

    pub fn as_rat(&self) -> Option<Rat> {
        let n = self.num.as_rat()?;
        let d = self.den.as_rat()?;
        Some(n / d)
    }

    fn normalize(&mut self) {
        if self.num.is_zero() {
            self.den = DiffPoly::one(self.num.algebra());
            return;
        }
        // Shared monomial content.
        let content = |p: &DiffPoly| -> Option<Monomial> {
            let mut it = p.terms();
            let (first, _) = it.next()?;
            let mut acc: Vec<(Var, u32)> = first.vars().to_vec();
            for (m, _) in it {
                acc.retain(|(v, _)| m.exponent(*v) > 0);
                for slot in acc.iter_mut() {
                    slot.1 = slot.1.min(m.exponent(slot.0));
                }
                if acc.is_empty() {
                    break;
                }
            }
            Some(Monomial::from_pairs(acc))
        };
        if let (Some(cn), Some(cd)) = (content(&self.num), content(&self.den)) {
            let mut shared: Vec<(Var, u32)> = Vec::new();
            for (v, e) in cn.vars() {
                let ed = cd.exponent(*v);
                if ed > 0 {
                    shared.push((*v, (*e).min(ed)));
                }
            }
            let shared = Monomial::from_pairs(shared);
            if !shared.is_one() {
                let divisor = DiffPoly::from_term(self.num.algebra(), shared, Rat::one());
                self.num = self.num.div_exact(&divisor).expect("content divides");
                self.den = self.den.div_exact(&divisor).expect("content divides");
            }
        }
        // Rational content of the denominator, signed so its leading
        // coefficient becomes +1-normalized.
        if let Some((_, lead)) = self.den.leading() {
            let mut scale = Rat::zero();
            for (_, c) in self.den.terms() {
                // gcd of rationalss: gcd of numerators / lcm of denominators
                scale = if scale.is_zero() {
                    c.abs()
                } else {
                    let n = num_integer::Integer::gcd(scale.numer(), c.numer());
                    let d = num_integer::Integer::lcm(scale.denom(), c.denom());
                    Rat::new(n, d)
                };
            }
            if lead.is_negative() {
                scale = -scale;
            }
            if !scale.is_one() {
                let inv = Rat::one() / scale;
                self.num = self.num.scale(&inv);
                self.den = self.den.scale(&inv);
            }
        }
        if self.den.is_one() {
            return;
        }
        if self.num == self.den {
            self.num = DiffPoly::one(self.num.algebra());
            self.den = DiffPoly::one(self.num.algebra());
            return;
        }
        if let Some(q) = self.num.div_exact(&self.den) {
            self.num = q;
            self.den = DiffPoly::one(self.num.algebra());
        }
    }

    pub fn add(&self, other: &DiffFrac) -> DiffFrac {
        let num = self
            .num
            .mul(&other.den)
            .add(&other.num.mul(&self.den));
        let den = self.den.mul(&other.den);
        DiffFrac::new(num, den).expect("nonzero denominator")
    }

    pub fn sub(&self, other: &DiffFrac) -> DiffFrac {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> DiffFrac {
        DiffFrac {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn scale(&self, k: &Rat) -> DiffFrac {
        DiffFrac::new(self.num.scale(k), self.den.clone()).expect("nonzero denominator")
    }

    pub fn mul(&self, other: &DiffFrac) -> DiffFrac {
        if self.is_zero() || other.is_zero() {
            return DiffFrac::zero(self.algebra());
        }
        DiffFrac::new(self.num.mul(&other.num), self.den.mul(&other.den))
            .expect("nonzero denominator")
    }

    pub fn div(&self, other: &DiffFrac) -> Result<DiffFrac, RingError> {
        if other.is_zero() {
            return Err(RingError::DivisionByZero);
        }
        DiffFrac::new(self.num.mul(&other.den), self.den.mul(&other.num))
    }

    pub fn inv(&self) -> Result<DiffFrac, RingError> {
        if self.is_zero() {
            return Err(RingError::DivisionByZero);
        }
        DiffFrac::new(self.den.clone(), self.num.clone())
    }

    pub fn pow(&self, e: i32) -> Result<DiffFrac, RingError> {
        let base = if e < 0 { self.inv()? } else { self.clone() };
        let mut out = DiffFrac::one(self.algebra());
        for _ in 0..e.unsigned_abs() {
            out = out.mul(&base);
        }
        Ok(out)
    }

    /// Quotient-rule total derivative.
    pub fn total_derivative(&self) -> DiffFrac {
        let n = self.num.total_derivative().mul(&self.den);
        let d = self.num.mul(&self.den.total_derivative());
        DiffFrac::new(n.sub(&d), self.den.mul(&self.den)).expect("nonzero denominator")
    }

    /// Quotient-rule partial derivative `d/du_i^(n)`.
    pub fn partial(&self, i: usize, n: usize) -> Result<DiffFrac, RingError> {
        let pn = self.num.partial(i, n)?;
        let pd = self.den.partial(i, n)?;
        let num = pn.mul(&self.den).sub(&self.num.mul(&pd));
        DiffFrac::new(num, self.den.mul(&self.den))
    }

    /// Highest derivative order of generator `i` in numerator or denominator.
    pub fn max_order(&self, i: usize) -> Option<usize> {
        match (self.num.max_order(i), self.den.max_order(i)) {
            (None, None) => None,
            (a, b) => Some(a.unwrap_or(0).max(b.unwrap_or(0))),
        }
    }

    pub fn project(&self, ctx: &ConstraintContext) -> Result<DiffFrac, RingError> {
        let num = self.num.project(ctx);
        let den = self.den.project(ctx);
        if den.is_zero() {
            return Err(RingError::DenominatorVanishes);
        }
        DiffFrac::new(num, den)
    }

    pub fn lift(&self, target: &Algebra) -> DiffFrac {
        DiffFrac {
            num: self.num.lift(target),
            den: self.den.lift(target),
        }
    }
}

/// Equality by cross-multiplication.
impl PartialEq for DiffFrac {
    fn eq(&self, other: &Self) -> bool {
        self.num.mul(&other.den) == other.num.mul(&self.den)
    }
}

impl fmt::Display for DiffFrac {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            return write!(f, "{}", self.num);
        }
        let wrap = |p: &DiffPoly| {
            let s = p.to_string();
            if p.num_terms() > 1 {
                format!("({})", s)
            } else {
                s
            }
        };
        write!(f, "{} / {}", wrap(&self.num), wrap(&self.den))
    }
}

/// Reconstruct a density from a variational gradient by the homotopy formula
/// `g = sum_i sum_terms c/(jetdeg+1) * u_i * M`, after verifying the
/// Helmholtz condition (self-adjointness of the Frechet derivative of `xi`).
///
/// Returns the density `g` with `variational_gradient(g) = xi`.
pub fn homotopy_reconstruct(xi: &[DiffPoly]) -> Result<DiffPoly, RingError> {
    assert!(!xi.is_empty());
    let alg = xi[0].algebra().clone();
    if !helmholtz_ok(xi)? {
        return Err(RingError::HelmholtzViolation);
    }
    let mut g = DiffPoly::zero(&alg);
    for (i, xii) in xi.iter().enumerate() {
        let ui = Monomial::var(Var::jet(i, 0));
        for (m, c) in xii.terms() {
            let jd = m.jet_degree() as i64;
            let coeff = c.clone() / rat_int(jd + 1);
            g = g.add(&DiffPoly::from_term(&alg, ui.mul(m), coeff));
        }
    }
    Ok(g)
}

/// Helmholtz condition: the Frechet derivative of `xi` equals its adjoint.
/// Checked exactly on the scalar entries:
/// `d xi_i / du_j^(n)` against `sum_k (-1)^k C(k,n) d^{k-n} (d xi_j / du_i^(k))`.
pub fn helmholtz_ok(xi: &[DiffPoly]) -> Result<bool, RingError> {
    let ell = xi[0].algebra().num_gens();
    assert_eq!(xi.len(), ell);
    for i in 0..ell {
        for j in 0..ell {
            let top = xi[i].max_order(j).unwrap_or(0).max(xi[j].max_order(i).unwrap_or(0));
            for n in 0..=top {
                let lhs = xi[i].partial(j, n)?;
                // (n, j)-entry of the adjoint of the Frechet matrix:
                // sum_{k>=n} (-1)^k C(k, n) d^{k-n} (d xi_j / du_i^(k)).
                let mut rhs = DiffPoly::zero(xi[0].algebra());
                for k in n..=top {
                    let mut t = xi[j].partial(i, k)?;
                    if t.is_zero() {
                        continue;
                    }
                    t = t.total_derivative_n(k - n);
                    let mut coeff = crate::rat::binomial(k as i64, n as u32);
                    if k % 2 == 1 {
                        coeff = -coeff;
                    }
                    rhs = rhs.add(&t.scale(&coeff));
                }
                if lhs != rhs {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Formal antiderivative: find `g` with `dg = r`, or report that `r` is not
/// a total derivative.
///
/// Works by exact linear algebra over a candidate monomial set obtained by
/// lowering one jet variable in each monomial of `r` (closed once more for
/// robustness). A polynomial with a nonzero quasiconstant part is never a
/// total derivative here since quasiconstants are killed by the derivation.
pub fn antiderivative(r: &DiffPoly) -> Result<DiffPoly, RingError> {
    if r.is_zero() {
        return Ok(DiffPoly::zero(r.algebra()));
    }
    let alg = r.algebra().clone();
    // Candidate monomials: one lowering of every jet variable, then one
    // closure round over the derivative images.
    let mut candidates: std::collections::BTreeSet<Monomial> = std::collections::BTreeSet::new();
    let mut frontier: Vec<Monomial> = r.terms().map(|(m, _)| m.clone()).collect();
    for _round in 0..2 {
        let mut next = Vec::new();
        for m in &frontier {
            for (v, _) in m.vars() {
                if let Var::Jet { gen, order } = v {
                    if *order > 0 {
                        let lowered = m
                            .lower_exponent(*v)
                            .mul(&Monomial::var(Var::jet(*gen as usize, *order as usize - 1)));
                        if lowered.jet_degree() > 0 && candidates.insert(lowered.clone()) {
                            next.push(lowered);
                        }
                    }
                }
            }
        }
        // Close over new monomials appearing in derivatives of candidates.
        frontier = Vec::new();
        for m in &next {
            let dm = DiffPoly::from_term(&alg, m.clone(), Rat::one()).total_derivative();
            for (im, _) in dm.terms() {
                frontier.push(im.clone());
            }
        }
    }
    let candidates: Vec<Monomial> = candidates.into_iter().collect();
    if candidates.is_empty() {
        return Err(RingError::NotExact);
    }
    // Row space: all monomials of r and of the candidate derivatives.
    let images: Vec<DiffPoly> = candidates
        .iter()
        .map(|m| DiffPoly::from_term(&alg, m.clone(), Rat::one()).total_derivative())
        .collect();
    let mut rows: std::collections::BTreeSet<Monomial> =
        r.terms().map(|(m, _)| m.clone()).collect();
    for img in &images {
        for (m, _) in img.terms() {
            rows.insert(m.clone());
        }
    }
    let rows: Vec<Monomial> = rows.into_iter().collect();
    let row_index: BTreeMap<&Monomial, usize> = rows.iter().zip(0..).collect();
    // Dense exact Gaussian elimination; sizes here are tiny.
    let nrows = rows.len();
    let ncols = candidates.len();
    let mut mat = vec![vec![Rat::zero(); ncols + 1]; nrows];
    for (c, img) in images.iter().enumerate() {
        for (m, coeff) in img.terms() {
            mat[row_index[m]][c] = coeff.clone();
        }
    }
    for (m, coeff) in r.terms() {
        mat[row_index[m]][ncols] = coeff.clone();
    }
    let mut pivot_of_col = vec![usize::MAX; ncols];
    let mut row = 0usize;
    for col in 0..ncols {
        if row >= nrows {
            break;
        }
        let Some(p) = (row..nrows).find(|&rr| !mat[rr][col].is_zero()) else {
            continue;
        };
        mat.swap(row, p);
        let inv = Rat::one() / mat[row][col].clone();
        for x in mat[row].iter_mut() {
            *x *= &inv;
        }
        for rr in 0..nrows {
            if rr != row && !mat[rr][col].is_zero() {
                let f = mat[rr][col].clone();
                for cc in 0..=ncols {
                    let sub = mat[row][cc].clone() * &f;
                    mat[rr][cc] -= sub;
                }
            }
        }
        pivot_of_col[col] = row;
        row += 1;
    }
    // Consistency: no row of the form 0 = nonzero.
    for rr in 0..nrows {
        if mat[rr][..ncols].iter().all(|x| x.is_zero()) && !mat[rr][ncols].is_zero() {
            return Err(RingError::NotExact);
        }
    }
    let mut g = DiffPoly::zero(&alg);
    for (col, cand) in candidates.iter().enumerate() {
        if pivot_of_col[col] != usize::MAX {
            let coeff = mat[pivot_of_col[col]][ncols].clone();
            g = g.add(&DiffPoly::from_term(&alg, cand.clone(), coeff));
        }
    }
    if g.total_derivative() != *r {
        return Err(RingError::NotExact);
    }
    Ok(g)
}

/// Antiderivative of a fraction; only implemented for polynomial content.
pub fn antiderivative_frac(r: &DiffFrac) -> Result<DiffFrac, RingError> {
    let p = r.as_poly()?;
    Ok(DiffFrac::from_poly(antiderivative(&p)?))
}

/// Two densities are equal modulo `dV +` quasiconstants iff their
/// variational gradients coincide.
pub fn densities_equal_mod_total(a: &DiffPoly, b: &DiffPoly) -> bool {
    a.variational_gradient() == b.variational_gradient()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat;

    fn alg2() -> Algebra {
        AlgebraDescriptor::with_names(&["u", "v"], &["c"])
    }

    #[test]
    fn total_derivative_defining_action() {
        let a = alg2();
        let u = DiffPoly::gen(&a, 0);
        assert_eq!(u.total_derivative(), DiffPoly::jet(&a, 0, 1));
    }

    #[test]
    fn total_derivative_leibniz() {
        let a = alg2();
        // d(u * u'') = u' u'' + u u'''
        let p = DiffPoly::gen(&a, 0).mul(&DiffPoly::jet(&a, 0, 2));
        let want = DiffPoly::jet(&a, 0, 1)
            .mul(&DiffPoly::jet(&a, 0, 2))
            .add(&DiffPoly::gen(&a, 0).mul(&DiffPoly::jet(&a, 0, 3)));
        assert_eq!(p.total_derivative(), want);
    }

    #[test]
    fn total_derivative_quasiconstant_coefficient() {
        let a = alg2();
        // d(c u^2) = 2 c u u', by brute-force term expansion
        let c = DiffPoly::quasi(&a, 0);
        let p = c.mul(&DiffPoly::gen(&a, 0).pow(2));
        let want = c
            .mul(&DiffPoly::gen(&a, 0))
            .mul(&DiffPoly::jet(&a, 0, 1))
            .scale(&rat_int(2));
        assert_eq!(p.total_derivative(), want);
        // and quasiconstants themselves are killed
        assert!(c.total_derivative().is_zero());
    }

    #[test]
    fn partial_matches_example() {
        let a = alg2();
        // d(u' v)/du^(1) = v
        let p = DiffPoly::jet(&a, 0, 1).mul(&DiffPoly::gen(&a, 1));
        assert_eq!(p.partial(0, 1).unwrap(), DiffPoly::gen(&a, 1));
    }

    #[test]
    fn commutation_with_total_derivative() {
        let a = alg2();
        // [d/du^(1), d](u u') = d(u u')/du^(0) = u'
        let p = DiffPoly::gen(&a, 0).mul(&DiffPoly::jet(&a, 0, 1));
        let lhs = p
            .total_derivative()
            .partial(0, 1)
            .unwrap()
            .sub(&p.partial(0, 1).unwrap().total_derivative());
        assert_eq!(lhs, p.partial(0, 0).unwrap());
        assert_eq!(lhs, DiffPoly::jet(&a, 0, 1));
    }

    #[test]
    fn commutation_randomized() {
        // [d/du_i^(n), d] f = df/du_i^(n-1) over a random suite.
        use rand::SeedableRng;
        let a = alg2();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..120 {
            let f = random_poly(&a, &mut rng, 3, 4);
            for i in 0..2 {
                for n in 0..4 {
                    let lhs = f
                        .total_derivative()
                        .partial(i, n)
                        .unwrap()
                        .sub(&f.partial(i, n).unwrap().total_derivative());
                    let rhs = if n == 0 {
                        DiffPoly::zero(&a)
                    } else {
                        f.partial(i, n - 1).unwrap()
                    };
                    assert_eq!(lhs, rhs);
                }
            }
        }
    }

    use crate::testutil::random_poly;

    #[test]
    fn leibniz_randomized() {
        use rand::SeedableRng;
        let a = alg2();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..120 {
            let f = random_poly(&a, &mut rng, 3, 4);
            let g = random_poly(&a, &mut rng, 3, 4);
            let lhs = f.mul(&g).total_derivative();
            let rhs = f
                .total_derivative()
                .mul(&g)
                .add(&f.mul(&g.total_derivative()));
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn variational_kills_total_derivatives() {
        use rand::SeedableRng;
        let a = alg2();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let f = random_poly(&a, &mut rng, 3, 4).total_derivative();
            for i in 0..2 {
                assert!(f.variational(i).unwrap().is_zero());
            }
        }
    }

    #[test]
    fn variational_example() {
        let a = alg2();
        // delta(u u'')/delta u = 2 u''  (Euler operator term by term:
        // d/du gives u'', (-d)^2 applied to d/du'' = u gives u'')
        let f = DiffPoly::gen(&a, 0).mul(&DiffPoly::jet(&a, 0, 2));
        let want = DiffPoly::jet(&a, 0, 2).scale(&rat_int(2));
        assert_eq!(f.variational(0).unwrap(), want);
    }

    #[test]
    fn homotopy_reconstructs_gradient() {
        let a = alg2();
        // xi = (2u'', 0) -> g with delta g/delta u = 2u''
        let xi = vec![
            DiffPoly::jet(&a, 0, 2).scale(&rat_int(2)),
            DiffPoly::zero(&a),
        ];
        let g = homotopy_reconstruct(&xi).unwrap();
        assert_eq!(g.variational_gradient(), xi);
        // and g is u u'' modulo total derivatives
        let reference = DiffPoly::gen(&a, 0).mul(&DiffPoly::jet(&a, 0, 2));
        assert!(densities_equal_mod_total(&g, &reference));
    }

    #[test]
    fn homotopy_constant_gradient() {
        let a = alg2();
        let xi = vec![DiffPoly::one(&a), DiffPoly::zero(&a)];
        let g = homotopy_reconstruct(&xi).unwrap();
        assert_eq!(g, DiffPoly::gen(&a, 0));
    }

    #[test]
    fn homotopy_rejects_non_gradient() {
        let a = alg2();
        // frechet(u') = d is skew, not self-adjoint
        let xi = vec![DiffPoly::jet(&a, 0, 1), DiffPoly::zero(&a)];
        assert_eq!(
            homotopy_reconstruct(&xi).unwrap_err(),
            RingError::HelmholtzViolation
        );
    }

    #[test]
    fn homotopy_variational_roundtrip_randomized() {
        use rand::SeedableRng;
        let a = alg2();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let g = random_poly(&a, &mut rng, 3, 4);
            let xi = g.variational_gradient();
            let h = homotopy_reconstruct(&xi).expect("gradients satisfy Helmholtz");
            assert_eq!(h.variational_gradient(), xi);
        }
    }

    #[test]
    fn antiderivative_roundtrip() {
        use rand::SeedableRng;
        let a = alg2();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(19);
        for _ in 0..100 {
            let g = random_poly(&a, &mut rng, 3, 4);
            let r = g.total_derivative();
            let back = antiderivative(&r).expect("exact by construction");
            assert_eq!(back.total_derivative(), r);
        }
        // u' u'' is not exact: delta/delta u of it is nonzero
        let bad = DiffPoly::jet(&a, 0, 1).mul(&DiffPoly::jet(&a, 0, 1));
        assert!(antiderivative(&bad).is_err());
    }

    #[test]
    fn fraction_normalization_and_equality() {
        let a = alg2();
        let u = DiffPoly::gen(&a, 0);
        let v = DiffPoly::gen(&a, 1);
        // (u v) / (v) reduces to u
        let f = DiffFrac::new(u.mul(&v), v.clone()).unwrap();
        assert!(f.is_polynomial());
        assert_eq!(f.as_poly().unwrap(), u);
        // sign normalization: u / (-v) has positive-leading denominator
        let g = DiffFrac::new(u.clone(), v.neg()).unwrap();
        assert!(!g.denom().leading().unwrap().1.is_negative());
        // cross-multiplication equality
        let lhs = DiffFrac::new(u.mul(&u), u.mul(&v)).unwrap();
        let rhs = DiffFrac::new(u.clone(), v.clone()).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn quotient_projection_is_morphism() {
        use rand::SeedableRng;
        // theta = v + u^2 on (u, v): project v^(n) -> -d^n(u^2)
        let a = alg2();
        let p = DiffPoly::gen(&a, 0).pow(2);
        let ctx = ConstraintContext::new(vec![p]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..60 {
            let f = random_poly(&a, &mut rng, 3, 4);
            let g = random_poly(&a, &mut rng, 3, 4);
            assert_eq!(
                f.mul(&g).project(&ctx),
                f.project(&ctx).mul(&g.project(&ctx))
            );
            assert_eq!(
                f.total_derivative().project(&ctx),
                f.project(&ctx).total_derivative()
            );
        }
    }

    #[test]
    fn constraint_context_rejects_dependent_density() {
        let a = alg2();
        // p depending on the constrained generator v is invalid
        let p = DiffPoly::gen(&a, 1);
        assert_eq!(
            ConstraintContext::new(vec![p]).unwrap_err(),
            RingError::InvalidConstraint(0)
        );
    }

    #[test]
    fn modified_partial_reduces_to_ordinary_for_p_zero() {
        let a = alg2();
        let ctx = ConstraintContext::new(vec![DiffPoly::zero(&a)]).unwrap();
        let f = DiffPoly::jet(&a, 0, 1).mul(&DiffPoly::gen(&a, 0));
        assert_eq!(
            f.partial_tilde(&ctx, 0, 1).unwrap(),
            f.partial(0, 1).unwrap()
        );
    }

    #[test]
    fn modified_partial_kills_thetas() {
        use rand::SeedableRng;
        let a = alg2();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(29);
        for _ in 0..40 {
            // random p over u only
            let au = AlgebraDescriptor::with_names(&["u", "v"], &["c"]);
            let mut p = DiffPoly::zero(&au);
            let raw = random_poly(&au, &mut rng, 2, 3);
            for (m, c) in raw.terms() {
                if m.vars()
                    .iter()
                    .all(|(v, _)| !matches!(v, Var::Jet { gen: 1, .. }))
                {
                    p = p.add(&DiffPoly::from_term(&au, m.clone(), c.clone()));
                }
            }
            let ctx = match ConstraintContext::new(vec![p]) {
                Ok(c) => c,
                Err(_) => continue,
            };
            for theta in ctx.thetas() {
                for s in 0..4 {
                    assert!(theta.partial_tilde(&ctx, 0, s).unwrap().is_zero());
                }
            }
            let _ = a;
        }
    }

    #[test]
    fn modified_commutation_relation() {
        use rand::SeedableRng;
        // [d~/d~u^(s), d] f = d~f/d~u^(s-1) with p = u^2
        let a = alg2();
        let ctx = ConstraintContext::new(vec![DiffPoly::gen(&a, 0).pow(2)]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..60 {
            let f = random_poly(&a, &mut rng, 3, 4);
            for s in 0..4usize {
                let lhs = f
                    .total_derivative()
                    .partial_tilde(&ctx, 0, s)
                    .unwrap()
                    .sub(&f.partial_tilde(&ctx, 0, s).unwrap().total_derivative());
                let rhs = if s == 0 {
                    DiffPoly::zero(&a)
                } else {
                    f.partial_tilde(&ctx, 0, s - 1).unwrap()
                };
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn display_roundtrip_shape() {
        let a = alg2();
        let p = DiffPoly::jet(&a, 0, 2)
            .scale(&rat(3, 2))
            .add(&DiffPoly::gen(&a, 1).neg());
        assert_eq!(p.to_string(), "3/2*u'' - v");
    }
}
