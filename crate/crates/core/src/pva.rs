//! The lambda-bracket engine.
//!
//! A Poisson structure is a skewadjoint matrix pseudodifferential operator
//! `H`; its lambda-bracket is evaluated by the Master Formula
//!
//! `{f_l g}_H = sum_{i,j,m,n} dg/du_j^(n) (l+d)^n H_ji(l+d) (-l-d)^m df/du_i^(m)`.
//!
//! The module verifies skewsymmetry, the Jacobi identity on generator
//! triples (sufficient by reduction to generators), compatibility of pairs
//! of structures, and the inverse-bracket identity for coefficients of an
//! inverted matrix operator. Every identity that involves non-local tails
//! is a necessary-condition check at an explicit truncation depth, re-run
//! at deeper windows by the test suites.

use crate::diffring::{Algebra, ConstraintContext, DiffFrac, DiffPoly, RingError};
use crate::psdo::{FractionPair, MatrixOp, OpError};
use crate::series::{DoubleSeries, LambdaSeries};
use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;

/// Which family of partial derivatives the Master Formula runs over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PartialMode {
    /// All generators, ordinary partials.
    Ordinary,
    /// Only the unconstrained generators, with the modified partials of a
    /// constraint context.
    Tilde,
}

/// A named non-local Poisson structure: a skewadjoint matrix operator with
/// optional fractional decomposition.
#[derive(Clone, Debug)]
pub struct PVAStructure {
    pub name: String,
    pub h: MatrixOp,
    pub frac: Option<FractionPair>,
}

impl PVAStructure {
    /// Wrap a matrix operator, requiring structural skewadjointness within
    /// the operator's depth window.
    pub fn new(name: impl Into<String>, h: MatrixOp) -> Result<Self, OpError> {
        let depth = h.depth();
        if !h.is_skewadjoint_to_depth(depth) {
            return Err(OpError::NotSkewadjoint);
        }
        Ok(PVAStructure {
            name: name.into(),
            h,
            frac: None,
        })
    }

    pub fn with_frac(mut self, frac: FractionPair) -> Self {
        self.frac = Some(frac);
        self
    }

    pub fn algebra(&self) -> &Algebra {
        self.h.algebra()
    }

    pub fn num_gens(&self) -> usize {
        self.h.rows()
    }

    /// The fractional decomposition, falling back to the trivial pair for a
    /// differential structure.
    pub fn pair(&self) -> Result<FractionPair, OpError> {
        match &self.frac {
            Some(p) => Ok(p.clone()),
            None => FractionPair::trivial(&self.h),
        }
    }

    /// The structure `H0 + H1` (same algebra and size).
    pub fn sum(&self, other: &PVAStructure) -> PVAStructure {
        PVAStructure {
            name: format!("{}+{}", self.name, other.name),
            h: self.h.add(&other.h),
            frac: None,
        }
    }

    /// Evaluate the Master Formula bracket `{f_lambda g}_H` at the given
    /// truncation depth.
    pub fn master_bracket(
        &self,
        f: &DiffFrac,
        g: &DiffFrac,
        depth: i64,
    ) -> Result<LambdaSeries, RingError> {
        self.master_bracket_mode(f, g, depth, PartialMode::Ordinary, None)
    }

    /// Master Formula with an explicit partial-derivative mode. `Tilde`
    /// restricts the generator sums to the unconstrained generators and uses
    /// the modified partial derivatives of `ctx`.
    pub fn master_bracket_mode(
        &self,
        f: &DiffFrac,
        g: &DiffFrac,
        depth: i64,
        mode: PartialMode,
        ctx: Option<&ConstraintContext>,
    ) -> Result<LambdaSeries, RingError> {
        let alg = f.algebra();
        let range = match mode {
            PartialMode::Ordinary => self.h.rows(),
            PartialMode::Tilde => ctx.ok_or(RingError::MissingContext)?.free_gens(),
        };
        let p_extra = match mode {
            PartialMode::Ordinary => 0,
            PartialMode::Tilde => ctx
                .expect("checked above")
                .densities()
                .iter()
                .filter_map(|p| p.top_order())
                .max()
                .unwrap_or(0),
        };
        let partial = |x: &DiffFrac, i: usize, n: usize| -> Result<DiffFrac, RingError> {
            match mode {
                PartialMode::Ordinary => x.partial(i, n),
                PartialMode::Tilde => {
                    let ctx = ctx.expect("checked above");
                    let pn = x.numer().partial_tilde(ctx, i, n)?;
                    let pd = x.denom().partial_tilde(ctx, i, n)?;
                    let num = pn.mul(x.denom()).sub(&x.numer().mul(&pd));
                    DiffFrac::new(num, x.denom().mul(x.denom()))
                }
            }
        };
        let order_bound = |x: &DiffFrac, i: usize| -> Option<usize> {
            match mode {
                PartialMode::Ordinary => x.max_order(i),
                PartialMode::Tilde => {
                    let base = x.numer().top_order().max(x.denom().top_order())?;
                    Some(base + p_extra)
                }
            }
        };
        let mut out = LambdaSeries::zero(alg, depth);
        for i in 0..range {
            // w_i = sum_m (-lambda-d)^m df/du_i^(m): a lambda-polynomial.
            let Some(max_m) = order_bound(f, i) else { continue };
            let mut w = LambdaSeries::zero(alg, depth);
            for m in 0..=max_m {
                let p = partial(f, i, m)?;
                if p.is_zero() {
                    continue;
                }
                let mut piece = LambdaSeries::constant(p, depth).apply_shift_pow(m as i64);
                if m % 2 == 1 {
                    piece = piece.neg();
                }
                w = w.add(&piece);
            }
            if w.is_zero() {
                continue;
            }
            for j in 0..range {
                let h_ji = self.h.entry(j, i);
                if h_ji.is_zero() {
                    continue;
                }
                let t = h_ji.symbol_shift_apply_series(&w);
                if t.is_zero() {
                    continue;
                }
                let Some(max_n) = order_bound(g, j) else { continue };
                for n in 0..=max_n {
                    let q = partial(g, j, n)?;
                    if q.is_zero() {
                        continue;
                    }
                    out = out.add(&t.apply_shift_pow(n as i64).mul_frac(&q));
                }
            }
        }
        Ok(out)
    }

    /// Triple bracket `{a_lambda {b_mu c}}` as a truncated double series.
    pub fn triple_bracket(
        &self,
        a: &DiffFrac,
        b: &DiffFrac,
        c: &DiffFrac,
        depth_l: i64,
        depth_m: i64,
    ) -> Result<DoubleSeries, RingError> {
        let alg = a.algebra();
        let inner = self.master_bracket(b, c, depth_m)?;
        let mut out = DoubleSeries::zero(alg, depth_l, depth_m);
        for (p, coeff) in inner.coeffs() {
            let outer = self.master_bracket(a, coeff, depth_l)?;
            out = out.add(&DoubleSeries::from_lambda_at(&outer, *p, depth_m));
        }
        Ok(out)
    }

    /// The Jacobi combination
    /// `{a_l {b_m c}} - {b_m {a_l c}} - {{a_l b}_{l+m} c}`
    /// pushed into the common `|mu| > |lambda|` expansion domain.
    pub fn jacobi_combination(
        &self,
        a: &DiffFrac,
        b: &DiffFrac,
        c: &DiffFrac,
        depth_l: i64,
        depth_m: i64,
    ) -> Result<DoubleSeries, RingError> {
        let alg = a.algebra();
        // Working depths: the third term's substitution nu -> lambda + mu
        // feeds lambda powers from arbitrarily deep nu coefficients into the
        // window, bounded by the mu depth and the top operator order.
        let pad = self.h.max_order() + 2;
        let wl = depth_l + depth_m + pad;
        let wm = depth_m + pad;

        let t1 = self.triple_bracket(a, b, c, wl, wm)?;

        // {b_mu {a_lambda c}}: inner in lambda, outer in mu.
        let inner_ac = self.master_bracket(a, c, wl)?;
        let mut t2 = DoubleSeries::zero(alg, wl, wm);
        for (q, coeff) in inner_ac.coeffs() {
            let outer = self.master_bracket(b, coeff, wm)?;
            t2 = t2.add(&DoubleSeries::from_mu(&outer, wl).mul_lambda_pow(*q));
        }

        // {{a_lambda b}_{lambda+mu} c}: for each coefficient c_n of the
        // inner bracket, expand {(c_n)_nu c} at nu = lambda + mu, negative
        // powers iota-expanded in |mu| > |lambda|.
        let inner_ab = self.master_bracket(a, b, wl)?;
        let mut t3 = DoubleSeries::zero(alg, wl, wm);
        for (n, cn) in inner_ab.coeffs() {
            let outer = self.master_bracket(cn, c, wm + pad)?;
            let mut piece = DoubleSeries::zero(alg, wl, wm);
            for (m, em) in outer.coeffs() {
                let jmax = if *m >= 0 { *m } else { m + wm };
                for j in 0..=jmax.max(-1) {
                    let coeff = crate::rat::binomial(*m, j as u32);
                    if !coeff.is_zero() {
                        piece.insert(j, m - j, em.scale(&coeff));
                    }
                }
            }
            t3 = t3.add(&piece.mul_lambda_pow(*n));
        }

        Ok(t1.sub(&t2).sub(&t3).truncate(depth_l, depth_m))
    }
}

/// `sum_m e_m (lambda+d)^m s` for a bracket image `sum_m e_m lambda^m`:
/// the `->` operation of the right Leibniz rule and the Dirac formula.
pub fn apply_series_at_shift(bracket: &LambdaSeries, s: &LambdaSeries) -> LambdaSeries {
    let mut out = LambdaSeries::zero(s.algebra(), s.depth());
    for (m, e) in bracket.coeffs() {
        out = out.add(&s.apply_shift_pow(*m).mul_frac(e));
    }
    out
}

/// Outcome of one named check, with diagnostic detail when it fails.
#[derive(Clone, Debug, Serialize)]
pub struct CheckLine {
    pub label: String,
    pub pass: bool,
    pub detail: Option<String>,
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {}",
            self.label,
            if self.pass { "PASS" } else { "FAIL" }
        )?;
        if let Some(d) = &self.detail {
            write!(f, " [{}]", d)?;
        }
        Ok(())
    }
}

/// A list of check lines with an aggregate verdict.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Report {
    pub lines: Vec<CheckLine>,
}

impl Report {
    pub fn push(&mut self, label: impl Into<String>, pass: bool, detail: Option<String>) {
        self.lines.push(CheckLine {
            label: label.into(),
            pass,
            detail,
        });
    }

    pub fn merge(&mut self, other: Report) {
        self.lines.extend(other.lines);
    }

    pub fn all_pass(&self) -> bool {
        self.lines.iter().all(|l| l.pass)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in &self.lines {
            writeln!(f, "{}", line)?;
        }
        Ok(())
    }
}

/// Structural and pointwise skewsymmetry:
/// `H = -H^*` and `{g_l f} = -{f_{-l-d} g}` on each sample pair.
pub fn check_skewsymmetry(
    s: &PVAStructure,
    samples: &[(DiffFrac, DiffFrac)],
    depth: i64,
) -> Result<Report, RingError> {
    let mut report = Report::default();
    let structural = s.h.is_skewadjoint_to_depth(depth.min(s.h.depth()));
    report.push(
        format!("SKEW {} structural H+H*=0", s.name),
        structural,
        None,
    );
    for (k, (f, g)) in samples.iter().enumerate() {
        let lhs = s.master_bracket(g, f, depth)?;
        let rhs = s.master_bracket(f, g, depth)?.subst_neg_shift().neg();
        let pass = lhs.eq_to_depth(&rhs, depth);
        let detail = if pass {
            None
        } else {
            Some(format!("diff = {}", lhs.sub(&rhs)))
        };
        report.push(
            format!("SKEW {} sample {} depth={}", s.name, k, depth),
            pass,
            detail,
        );
    }
    Ok(report)
}

/// Jacobi identity on all generator triples; each triple is an independent
/// task and the results are merged in triple order.
pub fn check_jacobi(s: &PVAStructure, depth_l: i64, depth_m: i64) -> Result<Report, RingError> {
    let alg = s.algebra().clone();
    let ell = s.num_gens();
    let triples: Vec<(usize, usize, usize)> = (0..ell)
        .flat_map(|i| (0..ell).flat_map(move |j| (0..ell).map(move |k| (i, j, k))))
        .collect();
    let results: Vec<Result<(usize, usize, usize, DoubleSeries), RingError>> = triples
        .par_iter()
        .map(|&(i, j, k)| {
            let ui = DiffFrac::from_poly(DiffPoly::gen(&alg, i));
            let uj = DiffFrac::from_poly(DiffPoly::gen(&alg, j));
            let uk = DiffFrac::from_poly(DiffPoly::gen(&alg, k));
            let comb = s.jacobi_combination(&ui, &uj, &uk, depth_l, depth_m)?;
            Ok((i, j, k, comb))
        })
        .collect();
    let mut report = Report::default();
    for r in results {
        let (i, j, k, comb) = r?;
        let pass = comb.is_zero_within(depth_l, depth_m);
        let detail = if pass {
            None
        } else {
            comb.first_nonzero()
                .map(|((l, m), f)| format!("first nonzero at lambda^{} mu^{}: {}", l, m, f))
        };
        report.push(
            format!(
                "JACOBI {} ({},{},{}): depth=({},{})",
                s.name,
                i + 1,
                j + 1,
                k + 1,
                depth_l,
                depth_m
            ),
            pass,
            detail,
        );
    }
    Ok(report)
}

/// Compatibility of two structures: Jacobi for the sum `H0 + H1`
/// (equivalent to the mixed six-term condition once each passes alone).
pub fn check_compatibility(
    s0: &PVAStructure,
    s1: &PVAStructure,
    depth_l: i64,
    depth_m: i64,
) -> Result<Report, RingError> {
    let sum = s0.sum(s1);
    check_jacobi(&sum, depth_l, depth_m)
}

/// The inverse-bracket identity: for an invertible matrix operator `C` with
/// entries `C_ij = sum_n c_{ij;n} d^n`,
///
/// `{a_l (C^-1)_ij(m)} = -sum_{r,t,n} (C^-1)_ir(l+m+d) {a_l c_{rt;n}} (m+d)^n (C^-1)_tj(m)`.
///
/// Both sides are computed by independent code paths and compared within
/// the window.
pub fn verify_inverse_identity(
    s: &PVAStructure,
    c: &MatrixOp,
    samples: &[DiffFrac],
    depth_l: i64,
    depth_m: i64,
) -> Result<Report, OpError> {
    let alg = s.algebra().clone();
    let n = c.rows();
    let pad = c.max_order() + 2;
    let work_m = depth_l + depth_m + 2 * pad;
    let cinv = c.invert(work_m)?;
    let mut report = Report::default();
    for (si, a) in samples.iter().enumerate() {
        for i in 0..n {
            for j in 0..n {
                // Left side: bracket a against every coefficient of (C^-1)_ij.
                let mut lhs = DoubleSeries::zero(&alg, depth_l, depth_m);
                for (k, w) in cinv.entry(i, j).coeffs() {
                    let br = s.master_bracket(a, w, depth_l).map_err(OpError::Ring)?;
                    lhs = lhs.add(&DoubleSeries::from_lambda_at(&br, *k, depth_m));
                }
                // Right side, built right to left.
                let mut rhs = DoubleSeries::zero(&alg, depth_l, depth_m);
                for r in 0..n {
                    for t in 0..n {
                        for (npow, crtn) in c.entry(r, t).coeffs() {
                            let br = s
                                .master_bracket(a, crtn, depth_l + pad)
                                .map_err(OpError::Ring)?;
                            if br.is_zero() {
                                continue;
                            }
                            let x0 = DoubleSeries::from_mu(
                                &cinv.entry(t, j).symbol(work_m),
                                depth_l + pad,
                            );
                            let x1 = x0.apply_mu_shift_pow(*npow);
                            let x2 = x1.mul_lambda_series(&br);
                            let mut x3 = DoubleSeries::zero(&alg, depth_l + pad, depth_m + pad);
                            for (kk, w) in cinv.entry(i, r).coeffs() {
                                x3 = x3.add(&x2.apply_lm_shift_pow(*kk).mul_frac(w));
                            }
                            rhs = rhs.sub(&x3.truncate(depth_l, depth_m));
                        }
                    }
                }
                let diff = lhs.sub(&rhs);
                let pass = diff.is_zero_within(depth_l, depth_m);
                let detail = if pass {
                    None
                } else {
                    diff.first_nonzero()
                        .map(|((l, m), f)| format!("first nonzero at lambda^{} mu^{}: {}", l, m, f))
                };
                report.push(
                    format!(
                        "INVBRACKET {} sample {} entry ({},{}) depth=({},{})",
                        s.name,
                        si,
                        i + 1,
                        j + 1,
                        depth_l,
                        depth_m
                    ),
                    pass,
                    detail,
                );
            }
        }
    }
    Ok(report)
}

/// Deterministic sample polynomials for pointwise checks: all generators
/// plus seeded random degree-<=3 polynomials.
pub fn sample_suite(alg: &Algebra, seed: u64, count: usize) -> Vec<DiffFrac> {
    use crate::diffring::{Monomial, Var};
    use rand::{Rng, SeedableRng};
    let mut out: Vec<DiffFrac> = (0..alg.num_gens())
        .map(|i| DiffFrac::from_poly(DiffPoly::gen(alg, i)))
        .collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..count {
        let mut p = DiffPoly::zero(alg);
        for _ in 0..rng.gen_range(1..=3) {
            let deg = rng.gen_range(0..=3u32);
            let mut mono = Monomial::one();
            for _ in 0..deg {
                mono = mono.mul(&Monomial::var(Var::jet(
                    rng.gen_range(0..alg.num_gens()),
                    rng.gen_range(0..3usize),
                )));
            }
            p = p.add(&DiffPoly::from_term(
                alg,
                mono,
                crate::rat::rat(rng.gen_range(-4..=4), rng.gen_range(1..=2)),
            ));
        }
        out.push(DiffFrac::from_poly(p));
    }
    out
}
