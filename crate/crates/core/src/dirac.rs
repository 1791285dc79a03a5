//! Dirac modification and reduction of Poisson structures by constraints.
//!
//! Given a Poisson structure `H` and constraints `theta_1..theta_m`, the
//! constraint matrix is `C(d) = D_theta . H . D_theta^*` (equivalently, the
//! operator of symbols `C_ab(l) = {theta_b _l theta_a}`). When `C` is
//! invertible, the Dirac modification
//!
//! `H~D = H - H . D_theta^* . C^-1 . D_theta . H`
//!
//! is again a Poisson structure, with every `theta_a` central. For
//! constraints of the special form `theta_a = u_{l-m+a} + p_a` the reduced
//! block `A^D = A + (B + A D_p^*) C^-1 (B^* - D_p A)` passes to the
//! quotient algebra, yielding the Dirac-reduced structure. Constraints
//! already central for `H` admit the simpler central reduction (the
//! projected top-left block).

use crate::diffring::{ConstraintContext, DiffFrac, DiffPoly, RingError};
use crate::psdo::{frechet, MatrixOp, OpError, PseudoOp};
use crate::pva::{apply_series_at_shift, PVAStructure};
use crate::series::LambdaSeries;

/// Errors from the Dirac construction.
#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum DiracError {
    #[error("constraint matrix C is not invertible at the working depth")]
    NotInvertible,
    #[error("constraint {0} is not central for the structure")]
    NotCentral(usize),
    #[error("operation requires constraints in the special form u_(l-m+a) + p_a")]
    NotSpecialForm,
    #[error("postcondition failed: {0}")]
    Postcondition(String),
    #[error(transparent)]
    Op(#[from] OpError),
    #[error(transparent)]
    Ring(#[from] RingError),
}

impl DiracError {
    fn from_invert(e: OpError) -> DiracError {
        match e {
            OpError::Degenerate => DiracError::NotInvertible,
            other => DiracError::Op(other),
        }
    }
}

/// A set of constraints with cached Frechet derivative, optionally carrying
/// the special-form context `theta_a = u_{l-m+a} + p_a`.
#[derive(Clone, Debug)]
pub struct ConstraintSet {
    thetas: Vec<DiffPoly>,
    special: Option<ConstraintContext>,
    d_theta: MatrixOp,
}

impl ConstraintSet {
    /// General constraints (no quotient theory available).
    pub fn general(thetas: Vec<DiffPoly>, depth: i64) -> Result<Self, RingError> {
        assert!(!thetas.is_empty());
        let d_theta = frechet(&thetas, depth)?;
        Ok(ConstraintSet {
            thetas,
            special: None,
            d_theta,
        })
    }

    /// Special-form constraints from a constraint context.
    pub fn special(ctx: ConstraintContext, depth: i64) -> Result<Self, RingError> {
        let thetas = ctx.thetas();
        let d_theta = frechet(&thetas, depth)?;
        Ok(ConstraintSet {
            thetas,
            special: Some(ctx),
            d_theta,
        })
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn thetas(&self) -> &[DiffPoly] {
        &self.thetas
    }

    pub fn context(&self) -> Option<&ConstraintContext> {
        self.special.as_ref()
    }

    pub fn frechet_matrix(&self) -> &MatrixOp {
        &self.d_theta
    }
}

/// The outcome of a Dirac construction.
#[derive(Clone, Debug)]
pub struct DiracResult {
    /// Constraint matrix `C = D_theta . H . D_theta^*`.
    pub c: MatrixOp,
    /// Truncated inverse of `C`.
    pub c_inv: MatrixOp,
    /// Dirac modification `H~D` on the ambient algebra.
    pub h_tilde: MatrixOp,
    /// Pre-quotient reduced block `A^D` (special constraints only).
    pub a_d: Option<MatrixOp>,
    /// Dirac-reduced structure over the quotient algebra.
    pub h_d: Option<MatrixOp>,
}

/// `C(d) = D_theta . H . D_theta^*`, computed at a padded working depth and
/// truncated to `depth`.
pub fn constraint_matrix(
    s: &PVAStructure,
    theta: &ConstraintSet,
    depth: i64,
) -> Result<MatrixOp, DiracError> {
    let work = depth + s.h.max_order() + theta.d_theta.max_order() + 2;
    let d = theta.d_theta.deepen(work);
    let h = s.h.truncate(work);
    let c = d.compose(&h)?.compose(&d.adjoint())?;
    Ok(c.truncate(depth))
}

/// Dirac modification `H~D = H - H D* C^-1 D H`, with the centrality and
/// skewadjointness postconditions verified at the requested depth.
pub fn dirac_modify(
    s: &PVAStructure,
    theta: &ConstraintSet,
    depth: i64,
) -> Result<DiracResult, DiracError> {
    let pad = s.h.max_order() + theta.d_theta.max_order() + 2;
    let work = depth + 2 * pad;
    let d = theta.d_theta.deepen(work);
    let dstar = d.adjoint();
    let h = s.h.truncate(work);
    let c_work = d.compose(&h)?.compose(&dstar)?;
    let c_inv = c_work.invert(work).map_err(DiracError::from_invert)?;
    let correction = h
        .compose(&dstar)?
        .compose(&c_inv)?
        .compose(&d)?
        .compose(&h)?;
    let h_tilde = h.sub(&correction).truncate(depth);

    // Centrality and skewness postconditions of the modification.
    let dh = d.compose(&h_tilde)?;
    if !dh.truncate(depth - pad).is_zero() {
        return Err(DiracError::Postcondition(
            "D_theta . H~D does not vanish at depth".into(),
        ));
    }
    let hd = h_tilde.compose(&dstar)?;
    if !hd.truncate(depth - pad).is_zero() {
        return Err(DiracError::Postcondition(
            "H~D . D_theta^* does not vanish at depth".into(),
        ));
    }
    if !h_tilde.is_skewadjoint_to_depth(depth - pad) {
        return Err(DiracError::Postcondition(
            "H~D is not skewadjoint at depth".into(),
        ));
    }
    Ok(DiracResult {
        c: c_work.truncate(depth),
        c_inv: c_inv.truncate(depth),
        h_tilde,
        a_d: None,
        h_d: None,
    })
}

/// Dirac-modified lambda-bracket, directly from the bracket-level formula
///
/// `{a_l b}^D = {a_l b} - sum {theta_b _{l+d} b}-> (C^-1)_ba(l+d) {a_l theta_a}`.
///
/// Coherence with the Master bracket of `H~D` is a standing test.
pub fn dirac_bracket(
    s: &PVAStructure,
    theta: &ConstraintSet,
    c_inv: &MatrixOp,
    f: &DiffFrac,
    g: &DiffFrac,
    depth: i64,
) -> Result<LambdaSeries, DiracError> {
    let m = theta.len();
    let mut out = s.master_bracket(f, g, depth)?;
    for beta in 0..m {
        let tb = DiffFrac::from_poly(theta.thetas[beta].clone());
        let bracket_tb_g = s.master_bracket(&tb, g, depth)?;
        if bracket_tb_g.is_zero() {
            continue;
        }
        for alpha in 0..m {
            let ta = DiffFrac::from_poly(theta.thetas[alpha].clone());
            let bracket_f_ta = s.master_bracket(f, &ta, depth)?;
            if bracket_f_ta.is_zero() {
                continue;
            }
            let shifted = c_inv
                .entry(beta, alpha)
                .symbol_shift_apply_series(&bracket_f_ta);
            let term = apply_series_at_shift(&bracket_tb_g, &shifted);
            out = out.sub(&term);
        }
    }
    Ok(out)
}

/// Dirac reduction for special-form constraints: computes `A^D` by the
/// block formula, cross-checks the block identity
/// `H~D = (1; -D_p) A^D (1, -D_p^*)`, and projects to the quotient.
pub fn dirac_reduce(
    s: &PVAStructure,
    theta: &ConstraintSet,
    depth: i64,
) -> Result<DiracResult, DiracError> {
    let ctx = theta.context().ok_or(DiracError::NotSpecialForm)?;
    let m = ctx.num_constraints();
    let free = ctx.free_gens();
    let modified = dirac_modify(s, theta, depth + 2)?;

    let pad = s.h.max_order() + theta.d_theta.max_order() + 2;
    let work = depth + 2 * pad;
    let h = s.h.truncate(work);
    // Block split: H = (A B; -B* D).
    let a = h.block(0, 0, free, free);
    let b = h.block(0, free, free, m);
    let dblock = h.block(free, free, m, m);
    let bstar = h.block(free, 0, m, free).neg();
    let dp = frechet_on_free(ctx, work)?;
    let dpstar = dp.adjoint();

    // C = D + D_p B - B* D_p* + D_p A D_p*.
    let c_blocks = dblock
        .add(&dp.compose(&b)?)
        .sub(&bstar.compose(&dpstar)?)
        .add(&dp.compose(&a)?.compose(&dpstar)?);
    let c_inv = c_blocks.invert(work).map_err(DiracError::from_invert)?;
    // A^D = A + (B + A D_p*) C^-1 (B* - D_p A).
    let left = b.add(&a.compose(&dpstar)?);
    let right = bstar.sub(&dp.compose(&a)?);
    let a_d = a.add(&left.compose(&c_inv)?.compose(&right)?);

    // Block identity H~D = (1; -D_p) A^D (1, -D_p*), recomputed as a check.
    let alg = s.algebra();
    let mut tall = MatrixOp::zero(alg, free + m, free, work);
    for i in 0..free {
        *tall.entry_mut(i, i) = PseudoOp::one(alg, work);
    }
    for r in 0..m {
        for c in 0..free {
            *tall.entry_mut(free + r, c) = dp.entry(r, c).neg();
        }
    }
    let wide = tall.adjoint();
    let assembled = tall.compose(&a_d)?.compose(&wide)?;
    if !assembled.eq_to_depth(&modified.h_tilde, depth - pad) {
        return Err(DiracError::Postcondition(
            "block identity for H~D failed".into(),
        ));
    }

    let h_d = a_d.truncate(depth).project(ctx)?;
    Ok(DiracResult {
        c: modified.c.truncate(depth),
        c_inv: modified.c_inv.truncate(depth),
        h_tilde: modified.h_tilde.truncate(depth),
        a_d: Some(a_d.truncate(depth)),
        h_d: Some(h_d),
    })
}

/// Central reduction: for constraints central for `H` (checked), extract
/// the top-left block and project to the quotient algebra.
pub fn central_reduce(
    s: &PVAStructure,
    theta: &ConstraintSet,
    depth: i64,
) -> Result<MatrixOp, DiracError> {
    let ctx = theta.context().ok_or(DiracError::NotSpecialForm)?;
    let free = ctx.free_gens();
    let pad = s.h.max_order() + theta.d_theta.max_order() + 2;
    let work = depth + pad;
    let d = theta.d_theta.deepen(work);
    let h = s.h.truncate(work);
    let dh = d.compose(&h)?;
    if !dh.truncate(depth).is_zero() {
        for r in 0..theta.len() {
            let row_zero = (0..h.cols()).all(|c| dh.entry(r, c).truncate(depth).is_zero());
            if !row_zero {
                return Err(DiracError::NotCentral(r + 1));
            }
        }
        return Err(DiracError::NotCentral(1));
    }
    let a = h.block(0, 0, free, free).truncate(depth);
    Ok(a.project(ctx)?)
}

/// Frechet derivative of the densities `p_a` with respect to the free
/// generators only: the `m x (l-m)` block `D_p`.
fn frechet_on_free(ctx: &ConstraintContext, depth: i64) -> Result<MatrixOp, RingError> {
    let free = ctx.free_gens();
    let m = ctx.num_constraints();
    let alg = ctx.algebra();
    let mut out = MatrixOp::zero(alg, m, free, depth);
    for (r, p) in ctx.densities().iter().enumerate() {
        for c in 0..free {
            let top = p.max_order(c).unwrap_or(0);
            let mut entry = PseudoOp::zero(alg, depth);
            for n in 0..=top {
                let coeff = p.partial(c, n)?;
                if !coeff.is_zero() {
                    entry.insert(n as i64, DiffFrac::from_poly(coeff));
                }
            }
            *out.entry_mut(r, c) = entry;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffring::AlgebraDescriptor;
    use crate::pva::{check_jacobi, sample_suite};
    use crate::rat::{rat, rat_int};

    /// Block-diagonal toy: H = ((-2d, 0), (0, 6d)) with theta = (v);
    /// C = 6d is invertible and the blocks decouple.
    fn toy() -> (PVAStructure, ConstraintSet) {
        let a = AlgebraDescriptor::with_names(&["u", "v"], &[]);
        let mut h = MatrixOp::zero(&a, 2, 2, 12);
        *h.entry_mut(0, 0) = PseudoOp::d_pow(&a, 1, 12).scale(&rat_int(-2));
        *h.entry_mut(1, 1) = PseudoOp::d_pow(&a, 1, 12).scale(&rat_int(6));
        let s = PVAStructure::new("toy", h).unwrap();
        let ctx = ConstraintContext::new(vec![DiffPoly::zero(&a)]).unwrap();
        let theta = ConstraintSet::special(ctx, 12).unwrap();
        (s, theta)
    }

    #[test]
    fn constraint_matrix_diagonal_toy() {
        let (s, theta) = toy();
        let c = constraint_matrix(&s, &theta, 8).unwrap();
        assert_eq!(c.rows(), 1);
        let want = PseudoOp::d_pow(s.algebra(), 1, 8).scale(&rat_int(6));
        assert!(c.entry(0, 0).eq_to_depth(&want, 8));
        // cross-check: C_ba(lambda) = {theta_a _lambda theta_b}
        let tv = DiffFrac::from_poly(theta.thetas()[0].clone());
        let sym = s.master_bracket(&tv, &tv, 8).unwrap();
        assert!(PseudoOp::from_symbol(&sym).eq_to_depth(&want, 8));
    }

    #[test]
    fn constant_theta_gives_zero_matrix() {
        let (s, _) = toy();
        let theta = ConstraintSet::general(vec![DiffPoly::one(s.algebra())], 12).unwrap();
        let c = constraint_matrix(&s, &theta, 8).unwrap();
        assert!(c.is_zero());
        assert!(matches!(
            dirac_modify(&s, &theta, 8),
            Err(DiracError::NotInvertible)
        ));
    }

    #[test]
    fn toy_modification_and_reduction() {
        let (s, theta) = toy();
        let res = dirac_reduce(&s, &theta, 8).unwrap();
        // theta = v decouples: A^D = A, H_D = (-2d) over the quotient
        let a = s.algebra();
        let want = PseudoOp::d_pow(a, 1, 8).scale(&rat_int(-2));
        assert!(res.a_d.as_ref().unwrap().entry(0, 0).eq_to_depth(&want, 8));
        let hd = res.h_d.as_ref().unwrap();
        assert_eq!(hd.rows(), 1);
        assert_eq!(hd.algebra().num_gens(), 1);
        // centrality of the modification
        let d = theta.frechet_matrix().deepen(8);
        assert!(d.compose(&res.h_tilde).unwrap().truncate(6).is_zero());
        assert!(res
            .h_tilde
            .compose(&d.adjoint())
            .unwrap()
            .truncate(6)
            .is_zero());
    }

    #[test]
    fn coupled_modification_vs_hand_expansion() {
        // Constant-coefficient coupled case; all entries commute, so H~D
        // expands by hand: H~D_11 = -2d - 3d (6d)^-1 3d = -7/2 d.
        let a = AlgebraDescriptor::with_names(&["u", "v"], &[]);
        let mut h = MatrixOp::zero(&a, 2, 2, 12);
        *h.entry_mut(0, 0) = PseudoOp::d_pow(&a, 1, 12).scale(&rat_int(-2));
        *h.entry_mut(0, 1) = PseudoOp::d_pow(&a, 1, 12).scale(&rat_int(3));
        *h.entry_mut(1, 0) = PseudoOp::d_pow(&a, 1, 12).scale(&rat_int(3));
        *h.entry_mut(1, 1) = PseudoOp::d_pow(&a, 1, 12).scale(&rat_int(6));
        let s = PVAStructure::new("toy2", h).unwrap();
        let ctx = ConstraintContext::new(vec![DiffPoly::zero(&a)]).unwrap();
        let theta = ConstraintSet::special(ctx, 12).unwrap();
        let res = dirac_modify(&s, &theta, 10).unwrap();
        let want = PseudoOp::d_pow(&a, 1, 10).scale(&rat(-7, 2));
        assert!(res.h_tilde.entry(0, 0).eq_to_depth(&want, 8));
        assert!(res.h_tilde.entry(0, 1).truncate(8).is_zero());
        assert!(res.h_tilde.entry(1, 0).truncate(8).is_zero());
        assert!(res.h_tilde.entry(1, 1).truncate(8).is_zero());
        // Jacobi survives the modification
        let smod = PVAStructure {
            name: "toy2~D".into(),
            h: res.h_tilde.clone(),
            frac: None,
        };
        let rep = check_jacobi(&smod, 4, 4).unwrap();
        assert!(rep.all_pass(), "{}", rep);
    }

    #[test]
    fn bracket_and_operator_paths_agree() {
        let (s, theta) = toy();
        let res = dirac_modify(&s, &theta, 10).unwrap();
        let smod = PVAStructure {
            name: "toy~D".into(),
            h: res.h_tilde.clone(),
            frac: None,
        };
        let samples = sample_suite(s.algebra(), 3, 4);
        for f in &samples {
            for g in &samples {
                let via_formula = dirac_bracket(&s, &theta, &res.c_inv, f, g, 8).unwrap();
                let via_op = smod.master_bracket(f, g, 8).unwrap();
                assert!(via_formula.eq_to_depth(&via_op, 6));
            }
        }
        // constraints become central for the modified bracket
        let tv = DiffFrac::from_poly(theta.thetas()[0].clone());
        for f in &samples {
            let b = dirac_bracket(&s, &theta, &res.c_inv, f, &tv, 8).unwrap();
            assert!(b.truncate(6).is_zero(), "{}", b);
        }
    }

    #[test]
    fn unrelated_pair_keeps_master_bracket() {
        // when {f_l theta} = 0 for all theta, the correction vanishes
        let (s, theta) = toy();
        let res = dirac_modify(&s, &theta, 10).unwrap();
        let a = s.algebra();
        let f = DiffFrac::from_poly(DiffPoly::gen(a, 0));
        let g = DiffFrac::from_poly(DiffPoly::jet(a, 0, 1));
        let lhs = dirac_bracket(&s, &theta, &res.c_inv, &f, &g, 8).unwrap();
        let rhs = s.master_bracket(&f, &g, 8).unwrap();
        assert!(lhs.eq_to_depth(&rhs, 8));
    }

    #[test]
    fn central_reduce_requires_centrality() {
        let (s, theta) = toy();
        // v is not central for toy (C = 6d != 0)
        assert!(matches!(
            central_reduce(&s, &theta, 8),
            Err(DiracError::NotCentral(_))
        ));
        // structure with zero last row/col: reduction keeps the block
        let a = s.algebra();
        let mut h0 = MatrixOp::zero(a, 2, 2, 12);
        *h0.entry_mut(0, 0) = PseudoOp::d_pow(a, 1, 12).scale(&rat_int(-2));
        let s0 = PVAStructure::new("h0", h0).unwrap();
        let hc = central_reduce(&s0, &theta, 8).unwrap();
        assert_eq!(hc.rows(), 1);
        let want = PseudoOp::d_pow(hc.algebra(), 1, 8).scale(&rat_int(-2));
        assert!(hc.entry(0, 0).eq_to_depth(&want, 8));
    }

    #[test]
    fn nonzero_density_reduction() {
        // theta = v + u^2 (p = u^2) against the block-diagonal toy:
        // exercises D_p in the A^D formula and the block identity.
        let a = AlgebraDescriptor::with_names(&["u", "v"], &[]);
        let mut h = MatrixOp::zero(&a, 2, 2, 14);
        *h.entry_mut(0, 0) = PseudoOp::d_pow(&a, 1, 14).scale(&rat_int(-2));
        *h.entry_mut(1, 1) = PseudoOp::d_pow(&a, 1, 14).scale(&rat_int(6));
        let s = PVAStructure::new("toyp", h).unwrap();
        let ctx = ConstraintContext::new(vec![DiffPoly::gen(&a, 0).pow(2)]).unwrap();
        let theta = ConstraintSet::special(ctx, 14).unwrap();
        let res = dirac_reduce(&s, &theta, 8).unwrap();
        let hd = res.h_d.clone().unwrap();
        assert!(hd.is_skewadjoint_to_depth(6));
        let sred = PVAStructure {
            name: "toyp^D".into(),
            h: hd,
            frac: None,
        };
        let rep = check_jacobi(&sred, 4, 4).unwrap();
        assert!(rep.all_pass(), "{}", rep);
    }
}
