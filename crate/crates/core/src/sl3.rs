//! Built-in model: the W-algebra of sl3 at its minimal nilpotent, on the
//! generators `L, psip, psim, phi`, with its compatible pair of Poisson
//! structures, the fractional-decomposition data, and the constraint
//! `theta = phi`. The model text is exactly what the parser accepts, so the
//! golden pipeline exercises the parser.

use crate::diffring::{Algebra, DiffFrac, DiffPoly};
use crate::dirac::{central_reduce, dirac_reduce, ConstraintSet, DiracError, DiracResult};
use crate::model::{parse_model, ModelFile};
use crate::psdo::{FractionPair, MatrixOp, OpError, PseudoOp};
use crate::pva::PVAStructure;
use crate::rat::{rat, rat_int};

/// Name under which the built-in model is reachable from the CLI.
pub const MODEL_NAME: &str = "sl3min";

/// The embedded model source.
pub const MODEL_TEXT: &str = "\
# W-algebra of sl3, minimal nilpotent: generators L, psip, psim, phi.
# H0 and H1 are the compatible Poisson structures; entry H[i][j] is the
# operator of the bracket {u_j _lambda u_i}. Omitted lower-triangle entries
# follow by skewadjointness.

[algebra]
generators = L, psip, psim, phi

[structure H0]
H[1][1] = -2*d
H[2][3] = -1

[structure H1]
H[1][1] = 2*L*d + L' - 1/2*d^3
H[1][2] = 3/2*psip*d + 1/2*psip'
H[1][3] = 3/2*psim*d + 1/2*psim'
H[1][4] = phi*d
H[2][3] = -d^2 - phi*d - 1/2*phi' - 1/3*phi^2 + L
H[2][4] = -3*psip
H[3][4] = 3*psim
H[4][4] = 6*d

# Fractional-decomposition data: B1 (6d)^-1 B1* = M N^-1 on the ambient
# algebra, with N lower triangular.
[fraction MN]
A[1][3] = phi*d*psim^2
A[2][3] = -3*psip*psim^2
A[3][3] = 3*psim^3
B[1][1] = psip^2
B[2][1] = -1/3*(psip*d + 2*psip')*phi
B[2][2] = psim
B[3][2] = psip
B[3][3] = 2*(psim*d + 2*psim')

[constraints phi]
theta = phi
";

/// The loaded model plus the pieces every sl3 computation starts from.
pub struct Sl3 {
    pub model: ModelFile,
    pub h0: PVAStructure,
    pub h1: PVAStructure,
    pub theta: ConstraintSet,
    /// The raw pair `(M, N)` with `B1 (6d)^-1 B1^* = M N^-1`.
    pub mn: FractionPair,
}

impl Sl3 {
    pub fn load() -> Self {
        let model = parse_model(MODEL_TEXT).expect("built-in model parses");
        let h0 = model.structure("H0").expect("H0").clone();
        let h1 = model.structure("H1").expect("H1").clone();
        let theta = model.constraint_set("phi").expect("phi").clone();
        let mn = model.fraction("MN").expect("MN").clone();
        Sl3 {
            model,
            h0,
            h1,
            theta,
            mn,
        }
    }

    pub fn algebra(&self) -> &Algebra {
        self.h0.algebra()
    }

    /// Quotient algebra `R(L, psip, psim)`.
    pub fn quotient_algebra(&self) -> Algebra {
        self.theta.context().expect("special form").quotient_algebra()
    }

    /// Top-left `3x3` block `A1` of `H1`.
    pub fn a1_block(&self) -> MatrixOp {
        self.h1.h.block(0, 0, 3, 3)
    }

    /// Ambient fractional pair `(A1 . N + M, N)` for `A1^D`.
    pub fn pair_ambient(&self) -> Result<FractionPair, OpError> {
        let a1 = self.a1_block();
        let a = a1.compose(self.mn.b())?.add(self.mn.a());
        FractionPair::new(a, self.mn.b().clone())
    }

    /// Projected pair `(A1bar . Nbar + Mbar, Nbar)` for `H1^D`.
    pub fn pair_reduced(&self) -> Result<FractionPair, DiracError> {
        let ctx = self.theta.context().expect("special form");
        let a1_bar = self.a1_block().project(ctx)?;
        let m_bar = self.mn.a().project(ctx)?;
        let n_bar = self.mn.b().project(ctx)?;
        let a = a1_bar.compose(&n_bar)?.add(&m_bar);
        Ok(FractionPair::new(a, n_bar)?)
    }

    /// Dirac reduction of `H1` by `phi` at the requested depth.
    pub fn reduce(&self, depth: i64) -> Result<DiracResult, DiracError> {
        dirac_reduce(&self.h1, &self.theta, depth)
    }

    /// Central reduction of `H0` by `phi`.
    pub fn h0_central(&self, depth: i64) -> Result<MatrixOp, DiracError> {
        central_reduce(&self.h0, &self.theta, depth)
    }

    /// The reduced compatible pair as structures: `H0C` with the trivial
    /// decomposition and `H1D` with the projected pair.
    pub fn reduced_structures(
        &self,
        depth: i64,
    ) -> Result<(PVAStructure, PVAStructure), DiracError> {
        let h0c = self.h0_central(depth)?;
        let s0 = PVAStructure::new("H0C", h0c)?;
        let res = self.reduce(depth)?;
        let h1d = res.h_d.expect("special form produces H_D");
        let s1 = PVAStructure::new("H1D", h1d)?.with_frac(self.pair_reduced()?);
        Ok((s0, s1))
    }

    /// Expected reduced structure `H0^C` from the worked example.
    pub fn expected_h0c(&self, depth: i64) -> MatrixOp {
        let alg = self.quotient_algebra();
        let mut m = MatrixOp::zero(&alg, 3, 3, depth);
        *m.entry_mut(0, 0) = PseudoOp::d_pow(&alg, 1, depth).scale(&rat_int(-2));
        *m.entry_mut(1, 2) = PseudoOp::mult(DiffFrac::constant(&alg, rat_int(-1)), depth);
        *m.entry_mut(2, 1) = PseudoOp::mult(DiffFrac::constant(&alg, rat_int(1)), depth);
        m
    }

    /// Expected reduced structure `H1^D` from the worked example,
    /// with `d^-1` tails expanded to the given depth.
    pub fn expected_h1d(&self, depth: i64) -> MatrixOp {
        let alg = self.quotient_algebra();
        let l = DiffFrac::from_poly(DiffPoly::gen(&alg, 0));
        let lp = DiffFrac::from_poly(DiffPoly::jet(&alg, 0, 1));
        let pp = DiffFrac::from_poly(DiffPoly::gen(&alg, 1));
        let ppp = DiffFrac::from_poly(DiffPoly::jet(&alg, 1, 1));
        let pm = DiffFrac::from_poly(DiffPoly::gen(&alg, 2));
        let pmp = DiffFrac::from_poly(DiffPoly::jet(&alg, 2, 1));
        let d = |k: i64| PseudoOp::d_pow(&alg, k, depth);
        let mult = |f: &DiffFrac| PseudoOp::mult(f.clone(), depth);
        // psi dinv psi tails
        let tail = |a: &DiffFrac, b: &DiffFrac, c: i64, den: i64| {
            mult(a)
                .compose(&d(-1))
                .compose(&mult(b))
                .scale(&rat(c, den))
        };
        let mut m = MatrixOp::zero(&alg, 3, 3, depth);
        // row 1
        let mut e11 = PseudoOp::term(l.scale(&rat_int(2)), 1, depth);
        e11.insert(0, lp.clone());
        e11.insert(3, DiffFrac::constant(&alg, rat(-1, 2)));
        *m.entry_mut(0, 0) = e11;
        let mut e12 = PseudoOp::term(pp.scale(&rat(3, 2)), 1, depth);
        e12.insert(0, ppp.scale(&rat(1, 2)));
        *m.entry_mut(0, 1) = e12;
        let mut e13 = PseudoOp::term(pm.scale(&rat(3, 2)), 1, depth);
        e13.insert(0, pmp.scale(&rat(1, 2)));
        *m.entry_mut(0, 2) = e13;
        // row 2
        let mut e21 = PseudoOp::term(pp.scale(&rat(3, 2)), 1, depth);
        e21.insert(0, ppp.clone());
        *m.entry_mut(1, 0) = e21;
        *m.entry_mut(1, 1) = tail(&pp, &pp, 3, 2);
        let mut e23 = mult(&l).sub(&d(2)).add(&tail(&pp, &pm, -3, 2));
        *m.entry_mut(1, 2) = e23.clone();
        // row 3
        let mut e31 = PseudoOp::term(pm.scale(&rat(3, 2)), 1, depth);
        e31.insert(0, pmp.clone());
        *m.entry_mut(2, 0) = e31;
        e23 = mult(&l).neg().add(&d(2)).add(&tail(&pm, &pp, -3, 2));
        *m.entry_mut(2, 1) = e23;
        *m.entry_mut(2, 2) = tail(&pm, &pm, 3, 2);
        m
    }

    /// First conserved density `g0 = L - phi^2/12`.
    pub fn g0(&self) -> DiffPoly {
        let alg = self.algebra();
        DiffPoly::gen(alg, 0).sub(&DiffPoly::gen(alg, 3).pow(2).scale(&rat(1, 12)))
    }

    /// Second conserved density
    /// `g1 = (psip psim' - psim psip' - phi psip psim)/2 - (L - phi^2/12)^2/4`.
    pub fn g1(&self) -> DiffPoly {
        let alg = self.algebra();
        let pp = DiffPoly::gen(alg, 1);
        let pm = DiffPoly::gen(alg, 2);
        let phi = DiffPoly::gen(alg, 3);
        let lt = self.g0();
        pp.mul(&pm.total_derivative())
            .sub(&pm.mul(&pp.total_derivative()))
            .sub(&phi.mul(&pp).mul(&pm))
            .scale(&rat(1, 2))
            .sub(&lt.pow(2).scale(&rat(1, 4)))
    }

    /// The ambient `t0` flow `(lt', psip' + phi psip/2, psim' - phi psim/2, 0)`.
    pub fn p0_ambient(&self) -> Vec<DiffPoly> {
        let alg = self.algebra();
        let pp = DiffPoly::gen(alg, 1);
        let pm = DiffPoly::gen(alg, 2);
        let phi = DiffPoly::gen(alg, 3);
        vec![
            self.g0().total_derivative(),
            pp.total_derivative().add(&phi.mul(&pp).scale(&rat(1, 2))),
            pm.total_derivative().sub(&phi.mul(&pm).scale(&rat(1, 2))),
            DiffPoly::zero(alg),
        ]
    }

    /// The ambient `t1` flow from the worked example.
    pub fn p1_ambient(&self) -> Vec<DiffPoly> {
        let alg = self.algebra();
        let pp = DiffPoly::gen(alg, 1);
        let pm = DiffPoly::gen(alg, 2);
        let phi = DiffPoly::gen(alg, 3);
        let lt = self.g0();
        let d = |p: &DiffPoly, n: usize| p.total_derivative_n(n);
        let dl = d(&lt, 3)
            .scale(&rat(1, 4))
            .sub(&lt.mul(&d(&lt, 1)).scale(&rat(3, 2)))
            .add(
                &pp.mul(&d(&pm, 2))
                    .sub(&pm.mul(&d(&pp, 2)))
                    .scale(&rat(3, 2)),
            )
            .sub(&d(&phi.mul(&pp).mul(&pm), 1).scale(&rat(3, 2)));
        let dpsi = |psi: &DiffPoly, sign: i64| {
            let s = rat_int(sign);
            d(psi, 3)
                .add(&phi.mul(&d(psi, 2)).scale(&rat(3, 2)).scale(&s))
                .add(&psi.mul(&d(&phi, 2)).scale(&rat(1, 2)).scale(&s))
                .add(&d(&phi, 1).mul(&d(psi, 1)).scale(&rat(3, 2)).scale(&s))
                .sub(&lt.mul(&d(psi, 1)).scale(&rat(3, 2)))
                .sub(&psi.mul(&d(&lt, 1)).scale(&rat(3, 4)))
                .sub(&phi.mul(psi).mul(&lt).scale(&rat(3, 4)).scale(&s))
                .add(&phi.pow(2).mul(&d(psi, 1)).scale(&rat(3, 4)))
                .add(&psi.mul(&phi).mul(&d(&phi, 1)).scale(&rat(3, 4)))
                .add(&psi.mul(&pp).mul(&pm).scale(&rat(3, 2)).scale(&s))
                .add(&phi.pow(3).mul(psi).scale(&rat(1, 8)).scale(&s))
        };
        vec![
            dl,
            dpsi(&pp, 1),
            dpsi(&pm, -1),
            DiffPoly::zero(alg),
        ]
    }

    /// Reduced densities `g0bar = L`, `g1bar = (psip psim' - psim psip')/2 - L^2/4`.
    pub fn g0_reduced(&self) -> DiffPoly {
        DiffPoly::gen(&self.quotient_algebra(), 0)
    }

    pub fn g1_reduced(&self) -> DiffPoly {
        let alg = self.quotient_algebra();
        let pp = DiffPoly::gen(&alg, 1);
        let pm = DiffPoly::gen(&alg, 2);
        pp.mul(&pm.total_derivative())
            .sub(&pm.mul(&pp.total_derivative()))
            .scale(&rat(1, 2))
            .sub(&DiffPoly::gen(&alg, 0).pow(2).scale(&rat(1, 4)))
    }

    /// Reduced `t0` flow `(L', psip', psim')`.
    pub fn p0_reduced(&self) -> Vec<DiffPoly> {
        let alg = self.quotient_algebra();
        (0..3)
            .map(|i| DiffPoly::jet(&alg, i, 1))
            .collect()
    }

    /// Reduced `t1` flow from the worked example.
    pub fn p1_reduced(&self) -> Vec<DiffPoly> {
        let alg = self.quotient_algebra();
        let l = DiffPoly::gen(&alg, 0);
        let pp = DiffPoly::gen(&alg, 1);
        let pm = DiffPoly::gen(&alg, 2);
        let d = |p: &DiffPoly, n: usize| p.total_derivative_n(n);
        let dl = d(&l, 3)
            .scale(&rat(1, 4))
            .sub(&l.mul(&d(&l, 1)).scale(&rat(3, 2)))
            .add(
                &pp.mul(&d(&pm, 2))
                    .sub(&pm.mul(&d(&pp, 2)))
                    .scale(&rat(3, 2)),
            );
        let dpp = d(&pp, 3)
            .sub(&l.mul(&d(&pp, 1)).scale(&rat(3, 2)))
            .sub(&pp.mul(&d(&l, 1)).scale(&rat(3, 4)))
            .add(&pp.pow(2).mul(&pm).scale(&rat(3, 2)));
        let dpm = d(&pm, 3)
            .sub(&l.mul(&d(&pm, 1)).scale(&rat(3, 2)))
            .sub(&pm.mul(&d(&l, 1)).scale(&rat(3, 4)))
            .sub(&pp.mul(&pm.pow(2)).scale(&rat(3, 2)));
        vec![dl, dpp, dpm]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_loads_and_validates() {
        let sl3 = Sl3::load();
        assert_eq!(sl3.algebra().num_gens(), 4);
        assert_eq!(sl3.theta.len(), 1);
        assert!(sl3.theta.context().is_some());
        assert!(sl3.mn.b().is_differential());
    }

    #[test]
    fn h1_matches_bracket_table() {
        // spot-check entries filled by skewadjointness against the
        // skewsymmetry-derived brackets
        let sl3 = Sl3::load();
        let alg = sl3.algebra().clone();
        let l = DiffFrac::from_poly(DiffPoly::gen(&alg, 0));
        let pp = DiffFrac::from_poly(DiffPoly::gen(&alg, 1));
        let phi = DiffFrac::from_poly(DiffPoly::gen(&alg, 3));
        // {L_l psip}_1 = psip' + 3/2 l psip
        let b = sl3.h1.master_bracket(&l, &pp, 8).unwrap();
        assert_eq!(
            b.coeff(0),
            DiffFrac::from_poly(DiffPoly::jet(&alg, 1, 1))
        );
        assert_eq!(b.coeff(1), pp.scale(&rat(3, 2)));
        // {L_l phi}_1 = phi' + l phi
        let b = sl3.h1.master_bracket(&l, &phi, 8).unwrap();
        assert_eq!(
            b.coeff(0),
            DiffFrac::from_poly(DiffPoly::jet(&alg, 3, 1))
        );
        assert_eq!(b.coeff(1), phi);
        // {psip_l phi}_1 = 3 psip
        let b = sl3.h1.master_bracket(&pp, &phi, 8).unwrap();
        assert_eq!(b.coeff(0), pp.scale(&rat_int(3)));
        assert!(b.coeff(1).is_zero());
        // {phi_l phi}_1 = 6 l
        let b = sl3.h1.master_bracket(&phi, &phi, 8).unwrap();
        assert_eq!(b.coeff(1), DiffFrac::constant(&alg, rat_int(6)));
        // {L_l L}_0 = -2 l
        let b = sl3.h0.master_bracket(&l, &l, 8).unwrap();
        assert_eq!(b.coeff(1), DiffFrac::constant(&alg, rat_int(-2)));
        assert!(b.coeff(0).is_zero());
    }

    #[test]
    fn frechet_of_phi_is_unit_row() {
        let sl3 = Sl3::load();
        let d = sl3.theta.frechet_matrix();
        assert_eq!((d.rows(), d.cols()), (1, 4));
        for c in 0..3 {
            assert!(d.entry(0, c).is_zero());
        }
        assert!(d
            .entry(0, 3)
            .eq_to_depth(&PseudoOp::one(sl3.algebra(), 8), 8));
    }
}
