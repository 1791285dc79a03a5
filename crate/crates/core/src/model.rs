//! Line-oriented model files: an algebra, named structures, named
//! fractional decompositions, and named constraint sets.
//!
//! ```text
//! # comment
//! [algebra]
//! generators = L, psip, psim, phi
//! quasiconstants = c          # optional
//!
//! [structure H1]
//! depth = 12                  # optional truncation window tag
//! H[1][1] = 2*L*d + L' - 1/2*d^3
//! H[1][4] = phi*d
//! fraction = MN               # optional reference to a named pair
//!
//! [fraction MN]
//! A[1][3] = phi*d*psim^2
//! B[1][1] = psip^2
//!
//! [constraints phi]
//! theta = phi
//! ```
//!
//! Unlisted entries are zero. Lower-triangle structure entries may be
//! omitted and are filled by skewadjointness (`H[j][i] = -(H[i][j])^*`).
//! Every structure is validated to be skewadjoint on load. Lines before the
//! first section header belong to `[algebra]`, and `H[i][j]` assignments
//! before any `[structure]` header open an implicit structure named `H`.

use crate::diffring::{Algebra, AlgebraDescriptor, ConstraintContext, DiffPoly};
use crate::dirac::ConstraintSet;
use crate::expr::{parse_function, parse_operator};
use crate::psdo::{FractionPair, MatrixOp, OpError};
use crate::pva::PVAStructure;
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Default truncation window tag for parsed operators.
pub const DEFAULT_MODEL_DEPTH: i64 = 64;

#[derive(thiserror::Error, Debug)]
pub enum ModelError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown symbol in expression: {msg}")]
    UnknownSymbol { line: usize, msg: String },
    #[error("structure `{0}` is not skewadjoint")]
    NotSkewadjoint(String),
    #[error("unresolved reference `{0}`")]
    UnresolvedReference(String),
    #[error("model has no `[algebra]` section with generators")]
    MissingAlgebra,
    #[error(transparent)]
    Op(#[from] OpError),
}

/// A parsed and validated model.
#[derive(Debug)]
pub struct ModelFile {
    pub algebra: Algebra,
    pub structures: Vec<PVAStructure>,
    pub fractions: Vec<(String, FractionPair)>,
    pub constraints: Vec<(String, ConstraintSet)>,
}

impl ModelFile {
    pub fn structure(&self, name: &str) -> Option<&PVAStructure> {
        self.structures.iter().find(|s| s.name == name)
    }

    pub fn fraction(&self, name: &str) -> Option<&FractionPair> {
        self.fractions
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| p)
    }

    pub fn constraint_set(&self, name: &str) -> Option<&ConstraintSet> {
        self.constraints
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum SectionKind {
    Algebra,
    Structure(String),
    Fraction(String),
    Constraints(String),
}

struct RawSection {
    kind: SectionKind,
    // (line number, key, indices, value text)
    assigns: Vec<(usize, String, Vec<usize>, String)>,
}

fn syntax(line: usize, msg: impl Into<String>) -> ModelError {
    ModelError::Syntax {
        line,
        msg: msg.into(),
    }
}

/// Split `H[1][2]` into `("H", [1, 2])`; a bare key has no indices.
fn split_key(line: usize, key: &str) -> Result<(String, Vec<usize>), ModelError> {
    let Some(open) = key.find('[') else {
        return Ok((key.trim().to_string(), Vec::new()));
    };
    let name = key[..open].trim().to_string();
    let mut idx = Vec::new();
    let mut rest = &key[open..];
    while !rest.is_empty() {
        if !rest.starts_with('[') {
            return Err(syntax(line, format!("malformed index in `{}`", key)));
        }
        let Some(close) = rest.find(']') else {
            return Err(syntax(line, format!("missing `]` in `{}`", key)));
        };
        let n: usize = rest[1..close]
            .trim()
            .parse()
            .map_err(|_| syntax(line, format!("bad index in `{}`", key)))?;
        if n == 0 {
            return Err(syntax(line, "indices are 1-based"));
        }
        idx.push(n);
        rest = &rest[close + 1..];
    }
    Ok((name, idx))
}

/// Parse a model from source text.
pub fn parse_model(text: &str) -> Result<ModelFile, ModelError> {
    // Pass 1: split into sections.
    let mut sections: Vec<RawSection> = vec![RawSection {
        kind: SectionKind::Algebra,
        assigns: Vec::new(),
    }];
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if content.is_empty() {
            continue;
        }
        if let Some(header) = content.strip_prefix('[') {
            let Some(header) = header.strip_suffix(']') else {
                return Err(syntax(line, "unterminated section header"));
            };
            let mut words = header.split_whitespace();
            let kind = match (words.next(), words.next(), words.next()) {
                (Some("algebra"), None, _) => SectionKind::Algebra,
                (Some("structure"), Some(name), None) => {
                    SectionKind::Structure(name.to_string())
                }
                (Some("fraction"), Some(name), None) => SectionKind::Fraction(name.to_string()),
                (Some("constraints"), Some(name), None) => {
                    SectionKind::Constraints(name.to_string())
                }
                _ => return Err(syntax(line, format!("bad section header `[{}]`", header))),
            };
            sections.push(RawSection {
                kind,
                assigns: Vec::new(),
            });
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(syntax(line, "expected `key = value`"));
        };
        let (name, idx) = split_key(line, key.trim())?;
        // matrix assignments before any [structure] header open one
        if matches!(
            sections.last().unwrap().kind,
            SectionKind::Algebra
        ) && !idx.is_empty()
        {
            sections.push(RawSection {
                kind: SectionKind::Structure(name.clone()),
                assigns: Vec::new(),
            });
        }
        sections
            .last_mut()
            .unwrap()
            .assigns
            .push((line, name, idx, value.trim().to_string()));
    }

    // Pass 2: the algebra.
    let mut gens: Vec<String> = Vec::new();
    let mut quasi: Vec<String> = Vec::new();
    for sec in sections.iter().filter(|s| s.kind == SectionKind::Algebra) {
        for (line, key, idx, value) in &sec.assigns {
            if !idx.is_empty() {
                return Err(syntax(*line, "indexed assignment outside a section"));
            }
            match key.as_str() {
                "generators" => {
                    gens = value.split(',').map(|s| s.trim().to_string()).collect();
                }
                "quasiconstants" => {
                    quasi = value.split(',').map(|s| s.trim().to_string()).collect();
                }
                other => return Err(syntax(*line, format!("unknown algebra key `{}`", other))),
            }
        }
    }
    if gens.is_empty() || gens.iter().any(|g| g.is_empty()) {
        return Err(ModelError::MissingAlgebra);
    }
    let algebra = AlgebraDescriptor::new(gens, quasi);
    let ell = algebra.num_gens();

    // Pass 3: structures, fractions, constraints.
    let mut structures: Vec<PVAStructure> = Vec::new();
    let mut frac_refs: Vec<(String, String)> = Vec::new();
    let mut fractions: Vec<(String, FractionPair)> = Vec::new();
    let mut constraints: Vec<(String, ConstraintSet)> = Vec::new();

    for sec in &sections {
        match &sec.kind {
            SectionKind::Algebra => {}
            SectionKind::Structure(name) => {
                let mut depth = DEFAULT_MODEL_DEPTH;
                let mut entries: BTreeMap<(usize, usize), (usize, String)> = BTreeMap::new();
                let mut frac_ref = None;
                for (line, key, idx, value) in &sec.assigns {
                    match (key.as_str(), idx.len()) {
                        ("depth", 0) => {
                            depth = value
                                .parse()
                                .map_err(|_| syntax(*line, "bad depth value"))?;
                        }
                        ("fraction", 0) => frac_ref = Some(value.clone()),
                        (_, 2) => {
                            let (i, j) = (idx[0], idx[1]);
                            if i > ell || j > ell {
                                return Err(syntax(
                                    *line,
                                    format!("index ({},{}) exceeds {} generators", i, j, ell),
                                ));
                            }
                            entries.insert((i - 1, j - 1), (*line, value.clone()));
                        }
                        _ => return Err(syntax(*line, format!("unexpected key `{}`", key))),
                    }
                }
                let mut h = MatrixOp::zero(&algebra, ell, ell, depth);
                for ((i, j), (line, text)) in &entries {
                    let op = parse_operator(text, &algebra, depth).map_err(|e| {
                        ModelError::UnknownSymbol {
                            line: *line,
                            msg: e.to_string(),
                        }
                    })?;
                    *h.entry_mut(*i, *j) = op;
                }
                // fill missing lower-triangle entries by skewadjointness
                for i in 0..ell {
                    for j in 0..i {
                        if !entries.contains_key(&(i, j)) && entries.contains_key(&(j, i)) {
                            *h.entry_mut(i, j) = h.entry(j, i).adjoint().neg();
                        }
                    }
                }
                let s = PVAStructure::new(name.clone(), h)
                    .map_err(|_| ModelError::NotSkewadjoint(name.clone()))?;
                if let Some(r) = frac_ref {
                    frac_refs.push((name.clone(), r));
                }
                structures.push(s);
            }
            SectionKind::Fraction(name) => {
                let mut depth = DEFAULT_MODEL_DEPTH;
                let mut a_entries: BTreeMap<(usize, usize), (usize, String)> = BTreeMap::new();
                let mut b_entries: BTreeMap<(usize, usize), (usize, String)> = BTreeMap::new();
                for (line, key, idx, value) in &sec.assigns {
                    match (key.as_str(), idx.len()) {
                        ("depth", 0) => {
                            depth = value
                                .parse()
                                .map_err(|_| syntax(*line, "bad depth value"))?;
                        }
                        ("A", 2) => {
                            a_entries.insert((idx[0] - 1, idx[1] - 1), (*line, value.clone()));
                        }
                        ("B", 2) => {
                            b_entries.insert((idx[0] - 1, idx[1] - 1), (*line, value.clone()));
                        }
                        _ => return Err(syntax(*line, format!("unexpected key `{}`", key))),
                    }
                }
                let build = |entries: &BTreeMap<(usize, usize), (usize, String)>|
                 -> Result<MatrixOp, ModelError> {
                    let rows = entries.keys().map(|(i, _)| i + 1).max().unwrap_or(1);
                    let cols = entries.keys().map(|(_, j)| j + 1).max().unwrap_or(1);
                    let n = rows.max(cols);
                    let mut m = MatrixOp::zero(&algebra, n, n, depth);
                    for ((i, j), (line, text)) in entries {
                        let op = parse_operator(text, &algebra, depth).map_err(|e| {
                            ModelError::UnknownSymbol {
                                line: *line,
                                msg: e.to_string(),
                            }
                        })?;
                        *m.entry_mut(*i, *j) = op;
                    }
                    Ok(m)
                };
                let a = build(&a_entries)?;
                let b = build(&b_entries)?;
                let pair = FractionPair::new(a, b)?;
                fractions.push((name.clone(), pair));
            }
            SectionKind::Constraints(name) => {
                let mut thetas: Vec<DiffPoly> = Vec::new();
                let mut depth = DEFAULT_MODEL_DEPTH;
                for (line, key, idx, value) in &sec.assigns {
                    match (key.as_str(), idx.len()) {
                        ("depth", 0) => {
                            depth = value
                                .parse()
                                .map_err(|_| syntax(*line, "bad depth value"))?;
                        }
                        ("theta", 0) | ("theta", 1) => {
                            let f = parse_function(value, &algebra).map_err(|e| {
                                ModelError::UnknownSymbol {
                                    line: *line,
                                    msg: e.to_string(),
                                }
                            })?;
                            let p = f.as_poly().map_err(|_| {
                                syntax(*line, "constraints must be polynomial")
                            })?;
                            thetas.push(p);
                        }
                        _ => return Err(syntax(*line, format!("unexpected key `{}`", key))),
                    }
                }
                if thetas.is_empty() {
                    return Err(ModelError::Syntax {
                        line: 0,
                        msg: format!("constraint set `{}` is empty", name),
                    });
                }
                let set = build_constraint_set(&algebra, thetas, depth)
                    .map_err(|e| ModelError::Syntax {
                        line: 0,
                        msg: e.to_string(),
                    })?;
                constraints.push((name.clone(), set));
            }
        }
    }

    // Resolve fraction references.
    for (sname, fname) in frac_refs {
        let pair = fractions
            .iter()
            .find(|(n, _)| *n == fname)
            .map(|(_, p)| p.clone())
            .ok_or(ModelError::UnresolvedReference(fname))?;
        let s = structures
            .iter_mut()
            .find(|s| s.name == sname)
            .expect("structure exists");
        s.frac = Some(pair);
    }

    Ok(ModelFile {
        algebra,
        structures,
        fractions,
        constraints,
    })
}

/// Build a constraint set, detecting the special form
/// `theta_a = u_{l-m+a} + p_a` when it applies.
pub fn build_constraint_set(
    algebra: &Algebra,
    thetas: Vec<DiffPoly>,
    depth: i64,
) -> Result<ConstraintSet, crate::diffring::RingError> {
    let m = thetas.len();
    let ell = algebra.num_gens();
    if m <= ell {
        let base = ell - m;
        let ps: Vec<DiffPoly> = thetas
            .iter()
            .enumerate()
            .map(|(a, th)| th.sub(&DiffPoly::gen(algebra, base + a)))
            .collect();
        if let Ok(ctx) = ConstraintContext::new(ps) {
            // confirm the reconstruction matches exactly
            if ctx.thetas() == thetas {
                return ConstraintSet::special(ctx, depth);
            }
        }
    }
    ConstraintSet::general(thetas, depth)
}

/// Emit a structure as a loadable model fragment (all nonzero entries).
pub fn emit_structure(name: &str, h: &MatrixOp) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "[structure {}]", name);
    let _ = writeln!(out, "depth = {}", h.depth());
    out.push_str(&emit_matrix_entries("H", h));
    out
}

/// Emit a fractional decomposition as a loadable model fragment.
pub fn emit_fraction(name: &str, pair: &FractionPair) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "[fraction {}]", name);
    let _ = writeln!(out, "depth = {}", pair.a().depth().min(pair.b().depth()));
    out.push_str(&emit_matrix_entries("A", pair.a()));
    out.push_str(&emit_matrix_entries("B", pair.b()));
    out
}

fn emit_matrix_entries(prefix: &str, m: &MatrixOp) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let e = m.entry(i, j);
            if !e.is_zero() {
                let _ = writeln!(out, "{}[{}][{}] = {}", prefix, i + 1, j + 1, e);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat_int;
    use crate::psdo::PseudoOp;

    #[test]
    fn minimal_two_line_model() {
        // bare assignments before any header: implicit algebra + structure H
        let m = parse_model("generators = u\nH[1][1] = d\n").unwrap();
        assert_eq!(m.algebra.num_gens(), 1);
        let s = m.structure("H").unwrap();
        let want = PseudoOp::d_pow(&m.algebra, 1, DEFAULT_MODEL_DEPTH);
        assert!(s.h.entry(0, 0).eq_to_depth(&want, 8));
    }

    #[test]
    fn non_skewadjoint_rejected() {
        let err = parse_model("generators = u\nH[1][1] = d^2\n").unwrap_err();
        assert!(matches!(err, ModelError::NotSkewadjoint(_)));
    }

    #[test]
    fn skew_fill_and_roundtrip() {
        let text = "\
[algebra]
generators = u, v

[structure H]
H[1][2] = u*d + 3*u'
";
        let m = parse_model(text).unwrap();
        let s = m.structure("H").unwrap();
        // H[2][1] = -(u d + 3u')* = u d - 2 u'
        let a = &m.algebra;
        let u = crate::diffring::DiffFrac::from_poly(DiffPoly::gen(a, 0));
        let up = crate::diffring::DiffFrac::from_poly(DiffPoly::jet(a, 0, 1));
        let mut want = PseudoOp::term(u, 1, 8);
        want.insert(0, up.scale(&rat_int(-2)));
        assert!(s.h.entry(1, 0).eq_to_depth(&want, 8));
        // emission round-trip: equal entrywise at depth
        let frag = format!("generators = u, v\n\n{}", emit_structure("H", &s.h));
        let m2 = parse_model(&frag).unwrap();
        assert!(m2.structure("H").unwrap().h.eq_to_depth(&s.h, 8));
    }

    #[test]
    fn constraints_special_form_detected() {
        let text = "\
[algebra]
generators = u, v

[constraints th]
theta = v + u^2
";
        let m = parse_model(text).unwrap();
        let (_, set) = &m.constraints[0];
        assert!(set.context().is_some());
        assert_eq!(set.thetas().len(), 1);
        // general-form constraints still load
        let text2 = "\
[algebra]
generators = u, v

[constraints th]
theta = v^2
";
        let m2 = parse_model(text2).unwrap();
        assert!(m2.constraints[0].1.context().is_none());
    }

    #[test]
    fn parse_errors_carry_lines() {
        let err = parse_model("generators = u\nH[1][1] == d\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{}", msg);
        let err = parse_model("generators = u\n[structure X]\nH[2][2] = d\n").unwrap_err();
        assert!(err.to_string().contains("exceeds"), "{}", err);
    }
}
