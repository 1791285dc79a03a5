//! Shared helpers for the test suites: seeded random polynomials, fractions
//! and operators over small algebras.

use crate::diffring::{Algebra, DiffFrac, DiffPoly, Monomial, Var};
use crate::psdo::PseudoOp;
use crate::rat::rat;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_poly(a: &Algebra, rng: &mut ChaCha8Rng, max_deg: u32, max_terms: usize) -> DiffPoly {
    let mut p = DiffPoly::zero(a);
    let nterms = rng.gen_range(1..=max_terms);
    for _ in 0..nterms {
        let deg = rng.gen_range(0..=max_deg);
        let mut mono = Monomial::one();
        for _ in 0..deg {
            let v = if rng.gen_bool(0.85) || a.quasi_names().is_empty() {
                Var::jet(rng.gen_range(0..a.num_gens()), rng.gen_range(0..3usize))
            } else {
                Var::Quasi(rng.gen_range(0..a.quasi_names().len()) as u16)
            };
            mono = mono.mul(&Monomial::var(v));
        }
        let c = rat(rng.gen_range(-6..=6), rng.gen_range(1..=3));
        p = p.add(&DiffPoly::from_term(a, mono, c));
    }
    p
}

pub fn random_frac(a: &Algebra, rng: &mut ChaCha8Rng) -> DiffFrac {
    let num = random_poly(a, rng, 2, 3);
    if rng.gen_bool(0.3) {
        let mut den = random_poly(a, rng, 1, 2);
        if den.is_zero() {
            den = DiffPoly::one(a);
        }
        DiffFrac::new(num, den).unwrap()
    } else {
        DiffFrac::from_poly(num)
    }
}

pub fn random_op(a: &Algebra, rng: &mut ChaCha8Rng, depth: i64, local: bool) -> PseudoOp {
    let mut p = PseudoOp::zero(a, depth);
    let lo = if local { 0 } else { -2 };
    for _ in 0..rng.gen_range(1..=3) {
        let k = rng.gen_range(lo..=2);
        let c = random_poly(a, rng, 2, 2);
        p.insert(k, DiffFrac::from_poly(c));
    }
    p
}
