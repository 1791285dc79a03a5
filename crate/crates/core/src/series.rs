//! Truncated Laurent series in `lambda^-1` (and `mu^-1`).
//!
//! `LambdaSeries` is the image of a lambda-bracket: a finite sum of powers
//! `lambda^k` with `DiffFrac` coefficients, truncated below at `-depth`.
//! `DoubleSeries` is the truncated image of `V_{lambda,mu}` under the
//! embedding that expands negative powers of `lambda + mu` by geometric
//! series in the domain `|mu| > |lambda|`.

use crate::diffring::{Algebra, ConstraintContext, DiffFrac, RingError};
use crate::rat::{binomial, Rat};
use num_traits::Zero;
use std::collections::BTreeMap;
use std::fmt;

/// Truncated Laurent series in a single formal parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaSeries {
    alg: Algebra,
    depth: i64,
    coeffs: BTreeMap<i64, DiffFrac>,
}

impl LambdaSeries {
    pub fn zero(alg: &Algebra, depth: i64) -> Self {
        assert!(depth >= 0);
        LambdaSeries {
            alg: alg.clone(),
            depth,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(f: DiffFrac, depth: i64) -> Self {
        Self::monomial(f, 0, depth)
    }

    /// `f * lambda^power`.
    pub fn monomial(f: DiffFrac, power: i64, depth: i64) -> Self {
        let alg = f.algebra().clone();
        let mut s = Self::zero(&alg, depth);
        s.insert(power, f);
        s
    }

    pub fn algebra(&self) -> &Algebra {
        &self.alg
    }

    pub fn depth(&self) -> i64 {
        self.depth
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (&i64, &DiffFrac)> {
        self.coeffs.iter()
    }

    pub fn coeff(&self, power: i64) -> DiffFrac {
        self.coeffs
            .get(&power)
            .cloned()
            .unwrap_or_else(|| DiffFrac::zero(&self.alg))
    }

    pub fn max_power(&self) -> Option<i64> {
        self.coeffs.keys().next_back().copied()
    }

    pub fn insert(&mut self, power: i64, f: DiffFrac) {
        if power < -self.depth || f.is_zero() {
            return;
        }
        match self.coeffs.entry(power) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(f);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get().add(&f);
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &LambdaSeries) -> LambdaSeries {
        let mut out = LambdaSeries::zero(&self.alg, self.depth.min(other.depth));
        for (p, f) in &self.coeffs {
            out.insert(*p, f.clone());
        }
        for (p, f) in &other.coeffs {
            out.insert(*p, f.clone());
        }
        out
    }

    pub fn sub(&self, other: &LambdaSeries) -> LambdaSeries {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> LambdaSeries {
        let mut out = self.clone();
        for f in out.coeffs.values_mut() {
            *f = f.neg();
        }
        out
    }

    pub fn scale(&self, k: &Rat) -> LambdaSeries {
        let mut out = LambdaSeries::zero(&self.alg, self.depth);
        for (p, f) in &self.coeffs {
            out.insert(*p, f.scale(k));
        }
        out
    }

    /// Multiply every coefficient by a function (on the left).
    pub fn mul_frac(&self, g: &DiffFrac) -> LambdaSeries {
        let mut out = LambdaSeries::zero(&self.alg, self.depth);
        for (p, f) in &self.coeffs {
            out.insert(*p, g.mul(f));
        }
        out
    }

    /// Multiply by `lambda^k`.
    pub fn shift(&self, k: i64) -> LambdaSeries {
        let mut out = LambdaSeries::zero(&self.alg, self.depth);
        for (p, f) in &self.coeffs {
            out.insert(p + k, f.clone());
        }
        out
    }

    /// Apply the total derivative to every coefficient.
    pub fn derive(&self) -> LambdaSeries {
        let mut out = LambdaSeries::zero(&self.alg, self.depth);
        for (p, f) in &self.coeffs {
            out.insert(*p, f.total_derivative());
        }
        out
    }

    /// Apply `(lambda + d)^k`; for `k < 0` the expansion is the geometric
    /// series in non-negative powers of `d`, truncated at the series depth.
    pub fn apply_shift_pow(&self, k: i64) -> LambdaSeries {
        let mut out = LambdaSeries::zero(&self.alg, self.depth);
        for (q, f) in &self.coeffs {
            let jmax = if k >= 0 {
                k
            } else {
                // power k - j + q >= -depth
                k + q + self.depth
            };
            if jmax < 0 {
                continue;
            }
            let mut df = f.clone();
            for j in 0..=jmax {
                let c = binomial(k, j as u32);
                if !c.is_zero() {
                    out.insert(k - j + q, df.scale(&c));
                }
                if j < jmax {
                    df = df.total_derivative();
                }
            }
        }
        out
    }

    /// The substitution `lambda -> -lambda - d` acting from the left on the
    /// coefficients: `sum_m f_m lambda^m -> sum_m (-lambda-d)^m f_m`.
    pub fn subst_neg_shift(&self) -> LambdaSeries {
        let mut out = LambdaSeries::zero(&self.alg, self.depth);
        for (m, f) in &self.coeffs {
            let single = LambdaSeries::constant(f.clone(), self.depth);
            let mut piece = single.apply_shift_pow(*m);
            if m.rem_euclid(2) == 1 {
                piece = piece.neg();
            }
            out = out.add(&piece);
        }
        out
    }

    /// Cauchy product, truncated at the common depth.
    pub fn mul_series(&self, other: &LambdaSeries) -> LambdaSeries {
        let mut out = LambdaSeries::zero(&self.alg, self.depth.min(other.depth));
        for (p, f) in &self.coeffs {
            for (q, g) in &other.coeffs {
                out.insert(p + q, f.mul(g));
            }
        }
        out
    }

    pub fn truncate(&self, depth: i64) -> LambdaSeries {
        let mut out = LambdaSeries::zero(&self.alg, depth);
        for (p, f) in &self.coeffs {
            out.insert(*p, f.clone());
        }
        out
    }

    /// Equality of all coefficients at powers `>= -k`.
    pub fn eq_to_depth(&self, other: &LambdaSeries, k: i64) -> bool {
        self.sub(other).truncate(k).is_zero()
    }

    pub fn project(&self, ctx: &ConstraintContext) -> Result<LambdaSeries, RingError> {
        let mut out = LambdaSeries::zero(&ctx.quotient_algebra(), self.depth);
        for (p, f) in &self.coeffs {
            out.insert(*p, f.project(ctx)?);
        }
        Ok(out)
    }

    /// Render with a given parameter name, highest power first.
    pub fn display_with(&self, param: &str) -> String {
        if self.coeffs.is_empty() {
            return "0".to_string();
        }
        let mut parts = Vec::new();
        for (p, f) in self.coeffs.iter().rev() {
            let c = f.to_string();
            let needs_paren = c.contains(' ') || c.contains('/');
            let cs = if needs_paren { format!("({})", c) } else { c };
            let body = match *p {
                0 => cs,
                1 if f.is_one() => param.to_string(),
                1 => format!("{}*{}", cs, param),
                k if f.is_one() => format!("{}^{}", param, k),
                k => format!("{}*{}^{}", cs, param, k),
            };
            parts.push(body);
        }
        parts.join(" + ")
    }
}

impl fmt::Display for LambdaSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display_with("lambda"))
    }
}

/// Truncated element of `V((lambda^-1))((mu^-1))`, the expansion domain of
/// `V_{lambda,mu}` in `|mu| > |lambda|`.
#[derive(Clone, Debug, PartialEq)]
pub struct DoubleSeries {
    alg: Algebra,
    depth_l: i64,
    depth_m: i64,
    coeffs: BTreeMap<(i64, i64), DiffFrac>,
}

impl DoubleSeries {
    pub fn zero(alg: &Algebra, depth_l: i64, depth_m: i64) -> Self {
        assert!(depth_l >= 0 && depth_m >= 0);
        DoubleSeries {
            alg: alg.clone(),
            depth_l,
            depth_m,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn depths(&self) -> (i64, i64) {
        (self.depth_l, self.depth_m)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (&(i64, i64), &DiffFrac)> {
        self.coeffs.iter()
    }

    /// Smallest `(mu, lambda)` power pair holding a nonzero coefficient,
    /// for failure reports.
    pub fn first_nonzero(&self) -> Option<((i64, i64), DiffFrac)> {
        self.coeffs
            .iter()
            .map(|((l, m), f)| ((*m, *l), f.clone()))
            .min_by_key(|(k, _)| *k)
            .map(|((m, l), f)| ((l, m), f))
    }

    pub fn insert(&mut self, lpow: i64, mpow: i64, f: DiffFrac) {
        if lpow < -self.depth_l || mpow < -self.depth_m || f.is_zero() {
            return;
        }
        match self.coeffs.entry((lpow, mpow)) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(f);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get().add(&f);
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    /// A lambda-series placed at a single mu power.
    pub fn from_lambda_at(series: &LambdaSeries, mpow: i64, depth_m: i64) -> Self {
        let mut out = Self::zero(series.algebra(), series.depth(), depth_m);
        for (p, f) in series.coeffs() {
            out.insert(*p, mpow, f.clone());
        }
        out
    }

    /// A mu-series (lambda-power zero per coefficient).
    pub fn from_mu(series: &LambdaSeries, depth_l: i64) -> Self {
        let mut out = Self::zero(series.algebra(), depth_l, series.depth());
        for (p, f) in series.coeffs() {
            out.insert(0, *p, f.clone());
        }
        out
    }

    pub fn add(&self, other: &DoubleSeries) -> DoubleSeries {
        let mut out = DoubleSeries::zero(
            &self.alg,
            self.depth_l.min(other.depth_l),
            self.depth_m.min(other.depth_m),
        );
        for ((l, m), f) in &self.coeffs {
            out.insert(*l, *m, f.clone());
        }
        for ((l, m), f) in &other.coeffs {
            out.insert(*l, *m, f.clone());
        }
        out
    }

    pub fn sub(&self, other: &DoubleSeries) -> DoubleSeries {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> DoubleSeries {
        let mut out = self.clone();
        for f in out.coeffs.values_mut() {
            *f = f.neg();
        }
        out
    }

    pub fn mul_frac(&self, g: &DiffFrac) -> DoubleSeries {
        let mut out = DoubleSeries::zero(&self.alg, self.depth_l, self.depth_m);
        for ((l, m), f) in &self.coeffs {
            out.insert(*l, *m, g.mul(f));
        }
        out
    }

    pub fn mul_lambda_pow(&self, k: i64) -> DoubleSeries {
        let mut out = DoubleSeries::zero(&self.alg, self.depth_l, self.depth_m);
        for ((l, m), f) in &self.coeffs {
            out.insert(l + k, *m, f.clone());
        }
        out
    }

    pub fn mul_mu_pow(&self, k: i64) -> DoubleSeries {
        let mut out = DoubleSeries::zero(&self.alg, self.depth_l, self.depth_m);
        for ((l, m), f) in &self.coeffs {
            out.insert(*l, m + k, f.clone());
        }
        out
    }

    /// Multiply coefficient-wise in the lambda direction by a lambda-series.
    pub fn mul_lambda_series(&self, s: &LambdaSeries) -> DoubleSeries {
        let mut out = DoubleSeries::zero(&self.alg, self.depth_l, self.depth_m);
        for ((l, m), f) in &self.coeffs {
            for (q, g) in s.coeffs() {
                out.insert(l + q, *m, f.mul(g));
            }
        }
        out
    }

    /// Apply `(lambda + d)^k` (the derivative acts on coefficients).
    pub fn apply_lambda_shift_pow(&self, k: i64) -> DoubleSeries {
        let mut out = DoubleSeries::zero(&self.alg, self.depth_l, self.depth_m);
        for ((l, m), f) in &self.coeffs {
            let jmax = if k >= 0 { k } else { k + l + self.depth_l };
            if jmax < 0 {
                continue;
            }
            let mut df = f.clone();
            for j in 0..=jmax {
                let c = binomial(k, j as u32);
                if !c.is_zero() {
                    out.insert(k - j + l, *m, df.scale(&c));
                }
                if j < jmax {
                    df = df.total_derivative();
                }
            }
        }
        out
    }

    /// Apply `(mu + d)^k`.
    pub fn apply_mu_shift_pow(&self, k: i64) -> DoubleSeries {
        let mut out = DoubleSeries::zero(&self.alg, self.depth_l, self.depth_m);
        for ((l, m), f) in &self.coeffs {
            let jmax = if k >= 0 { k } else { k + m + self.depth_m };
            if jmax < 0 {
                continue;
            }
            let mut df = f.clone();
            for j in 0..=jmax {
                let c = binomial(k, j as u32);
                if !c.is_zero() {
                    out.insert(*l, k - j + m, df.scale(&c));
                }
                if j < jmax {
                    df = df.total_derivative();
                }
            }
        }
        out
    }

    /// Apply `(lambda + mu + d)^k`. Non-negative powers expand binomially;
    /// negative powers are expanded in the domain `|mu| > |lambda|`, i.e. as
    /// `sum_{j>=0} C(k,j) (lambda + d)^j mu^(k-j)`.
    pub fn apply_lm_shift_pow(&self, k: i64) -> DoubleSeries {
        if k >= 0 {
            let mut out = DoubleSeries::zero(&self.alg, self.depth_l, self.depth_m);
            for j in 0..=k {
                let c = binomial(k, j as u32);
                let piece = self.apply_lambda_shift_pow(k - j).mul_mu_pow(j);
                out = out.add(&piece.scale(&c));
            }
            out
        } else {
            let mut out = DoubleSeries::zero(&self.alg, self.depth_l, self.depth_m);
            // mu-power of a term (l, m) becomes m + k - j >= -depth_m.
            let mmax = self.coeffs.keys().map(|(_, m)| *m).max().unwrap_or(0);
            let jmax = mmax + k + self.depth_m;
            for j in 0..=jmax.max(-1) {
                let c = binomial(k, j as u32);
                if c.is_zero() {
                    continue;
                }
                let piece = self.apply_lambda_shift_pow(j).mul_mu_pow(k - j);
                out = out.add(&piece.scale(&c));
            }
            out
        }
    }

    pub fn scale(&self, k: &Rat) -> DoubleSeries {
        let mut out = DoubleSeries::zero(&self.alg, self.depth_l, self.depth_m);
        for ((l, m), f) in &self.coeffs {
            out.insert(*l, *m, f.scale(k));
        }
        out
    }

    pub fn truncate(&self, depth_l: i64, depth_m: i64) -> DoubleSeries {
        let mut out = DoubleSeries::zero(&self.alg, depth_l, depth_m);
        for ((l, m), f) in &self.coeffs {
            out.insert(*l, *m, f.clone());
        }
        out
    }

    /// Whether every coefficient with `lambda`-power `>= -kl` and
    /// `mu`-power `>= -km` vanishes.
    pub fn is_zero_within(&self, kl: i64, km: i64) -> bool {
        self.truncate(kl, km).is_zero()
    }
}

impl fmt::Display for DoubleSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .coeffs
            .iter()
            .rev()
            .map(|((l, m), c)| format!("({})*lambda^{}*mu^{}", c, l, m))
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffring::{AlgebraDescriptor, DiffPoly};

    fn setup() -> (Algebra, DiffFrac) {
        let a = AlgebraDescriptor::with_names(&["u"], &[]);
        let u = DiffFrac::from_poly(DiffPoly::gen(&a, 0));
        (a, u)
    }

    #[test]
    fn shift_pow_inverse_roundtrip() {
        // (lambda+d)^(-1) applied to u, then (lambda+d): recover u to depth-1.
        let (a, u) = setup();
        let s = LambdaSeries::constant(u.clone(), 8);
        let inv = s.apply_shift_pow(-1);
        // geometric expansion: lambda^-1 u - lambda^-2 u' + lambda^-3 u'' ...
        assert_eq!(inv.coeff(-1), u);
        assert_eq!(
            inv.coeff(-2),
            DiffFrac::from_poly(DiffPoly::jet(&a, 0, 1)).neg()
        );
        let back = inv.apply_shift_pow(1).truncate(7);
        assert!(back.eq_to_depth(&s, 7));
    }

    #[test]
    fn shift_pows_compose_additively() {
        let (_a, u) = setup();
        let s = LambdaSeries::monomial(u, 2, 10);
        let lhs = s.apply_shift_pow(-3).apply_shift_pow(2);
        let rhs = s.apply_shift_pow(-1);
        assert!(lhs.eq_to_depth(&rhs, 8));
    }

    #[test]
    fn double_series_lm_shift_expansion() {
        // (lambda+mu+d)^(-1) of the constant u has mu-leading expansion.
        let (a, u) = setup();
        let d = DoubleSeries::from_lambda_at(&LambdaSeries::constant(u.clone(), 6), 0, 6);
        let e = d.apply_lm_shift_pow(-1);
        // coefficient at (0, -1) is u; at (1, -2) is -u; at (0, -2) is -u'
        assert_eq!(e.coeffs.get(&(0, -1)), Some(&u));
        assert_eq!(e.coeffs.get(&(1, -2)), Some(&u.neg()));
        assert_eq!(
            e.coeffs.get(&(0, -2)),
            Some(&DiffFrac::from_poly(DiffPoly::jet(&a, 0, 1)).neg())
        );
        // applying (lambda+mu+d) recovers u within the window
        let back = e.apply_lm_shift_pow(1);
        let orig = d.truncate(4, 4);
        assert!(back.sub(&orig).is_zero_within(4, 4));
    }
}
