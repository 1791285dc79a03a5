//! Command dispatch and deterministic reports.
//!
//! Exit codes: `0` all checks passed, `1` a mathematical check failed,
//! `2` input error (parse/lookup), `3` degeneracy (a matrix that cannot be
//! inverted at depth, a missing witness, or a vanishing denominator).

use crate::diffring::RingError;
use crate::dirac::{
    constraint_matrix, dirac_bracket, dirac_modify, dirac_reduce, DiracError,
};
use crate::expr::parse_function;
use crate::hierarchy::{check_associated, leading_symbol, run_hierarchy, HierarchyError};
use crate::model::{emit_fraction, emit_structure, parse_model, ModelError, ModelFile};
use crate::psdo::{MatrixOp, PseudoOp};
use crate::pva::{
    check_compatibility, check_jacobi, check_skewsymmetry, sample_suite, Report,
};
use crate::sl3::{Sl3, MODEL_NAME, MODEL_TEXT};
use serde::Serialize;
use std::fmt::Write as _;

/// Runtime configuration shared by all commands.
#[derive(Clone, Debug)]
pub struct RunConfig {
    /// Truncation depth for `d^-1` tails.
    pub depth_d: i64,
    /// Truncation depths for the Jacobi double series.
    pub depth_l: i64,
    pub depth_m: i64,
    /// Seed for the deterministic sample suites.
    pub seed: u64,
    /// Structured (JSON) or plain-text emission.
    pub emit_json: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            depth_d: 8,
            depth_l: 6,
            depth_m: 6,
            seed: 0,
            emit_json: false,
        }
    }
}

impl RunConfig {
    /// Apply the `PVADIRAC_DEPTH` environment override to every depth.
    pub fn from_env() -> Self {
        let mut cfg = RunConfig::default();
        if let Ok(text) = std::env::var("PVADIRAC_DEPTH") {
            if let Ok(k) = text.trim().parse::<i64>() {
                let k = k.max(2);
                cfg.depth_d = k;
                cfg.depth_l = k;
                cfg.depth_m = k;
            }
        }
        cfg
    }
}

/// A command outcome: its report, any emitted model fragments, and the
/// process exit code.
#[derive(Debug, Serialize)]
pub struct CommandOutput {
    pub command: String,
    pub ok: bool,
    pub report: Report,
    pub artifacts: Vec<(String, String)>,
    #[serde(skip)]
    pub code: i32,
}

impl CommandOutput {
    fn new(command: &str, report: Report, artifacts: Vec<(String, String)>) -> Self {
        let ok = report.all_pass();
        CommandOutput {
            command: command.to_string(),
            ok,
            report,
            artifacts,
            code: if ok { 0 } else { 1 },
        }
    }

    /// Render per the configured emission mode.
    pub fn render(&self, cfg: &RunConfig) -> String {
        if cfg.emit_json {
            serde_json::to_string_pretty(self).expect("report serializes")
        } else {
            let mut out = String::new();
            let _ = write!(out, "{}", self.report);
            for (name, text) in &self.artifacts {
                let _ = writeln!(out, "\n# --- {} ---", name);
                let _ = write!(out, "{}", text);
            }
            out
        }
    }
}

/// Errors that terminate a command before a report exists.
#[derive(thiserror::Error, Debug)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Degenerate(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Degenerate(_) => 3,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<crate::expr::ExprError> for CliError {
    fn from(e: crate::expr::ExprError) -> Self {
        CliError::Input(e.to_string())
    }
}

fn dirac_err(e: DiracError) -> CliError {
    match e {
        DiracError::NotInvertible | DiracError::NotCentral(_) => {
            CliError::Degenerate(e.to_string())
        }
        DiracError::Ring(RingError::DenominatorVanishes) => CliError::Degenerate(e.to_string()),
        other => CliError::Input(other.to_string()),
    }
}

fn hier_err(e: HierarchyError) -> CliError {
    match e {
        HierarchyError::NoWitness(_)
        | HierarchyError::HelmholtzViolation
        | HierarchyError::NonPolynomialGradient(_) => CliError::Degenerate(e.to_string()),
        HierarchyError::StepFailed { step, source } => {
            let inner = hier_err(*source);
            match inner {
                CliError::Degenerate(m) => {
                    CliError::Degenerate(format!("step {}: {}", step, m))
                }
                CliError::Input(m) => CliError::Input(format!("step {}: {}", step, m)),
            }
        }
        other => CliError::Input(other.to_string()),
    }
}

/// Load a model from a path, or the built-in when the name matches.
pub fn load_model(file: &str) -> Result<ModelFile, CliError> {
    if file == MODEL_NAME {
        return Ok(parse_model(MODEL_TEXT)?);
    }
    let text = std::fs::read_to_string(file)
        .map_err(|e| CliError::Input(format!("cannot read `{}`: {}", file, e)))?;
    Ok(parse_model(&text)?)
}

fn find_structure<'m>(model: &'m ModelFile, name: &str) -> Result<&'m crate::pva::PVAStructure, CliError> {
    model
        .structure(name)
        .ok_or_else(|| CliError::Input(format!("no structure named `{}`", name)))
}

fn find_constraints<'m>(
    model: &'m ModelFile,
    name: &str,
) -> Result<&'m crate::dirac::ConstraintSet, CliError> {
    model
        .constraint_set(name)
        .ok_or_else(|| CliError::Input(format!("no constraint set named `{}`", name)))
}

/// `check`: skewsymmetry and Jacobi for each (or one) structure, plus
/// pairwise compatibility when several structures are checked.
pub fn cmd_check(
    model: &ModelFile,
    structure: Option<&str>,
    cfg: &RunConfig,
) -> Result<CommandOutput, CliError> {
    let targets: Vec<&crate::pva::PVAStructure> = match structure {
        Some(name) => vec![find_structure(model, name)?],
        None => model.structures.iter().collect(),
    };
    if targets.is_empty() {
        return Err(CliError::Input("model has no structures".into()));
    }
    let mut report = Report::default();
    let samples = sample_suite(&model.algebra, cfg.seed, 6);
    let pairs: Vec<_> = samples
        .iter()
        .zip(samples.iter().rev())
        .map(|(a, b)| (a.clone(), b.clone()))
        .collect();
    for s in &targets {
        report.merge(check_skewsymmetry(s, &pairs, cfg.depth_d).map_err(ring_input)?);
        report.merge(check_jacobi(s, cfg.depth_l, cfg.depth_m).map_err(ring_input)?);
    }
    for i in 0..targets.len() {
        for j in i + 1..targets.len() {
            let rep = check_compatibility(targets[i], targets[j], cfg.depth_l, cfg.depth_m)
                .map_err(ring_input)?;
            let pass = rep.all_pass();
            report.push(
                format!(
                    "COMPAT {}+{} depth=({},{})",
                    targets[i].name, targets[j].name, cfg.depth_l, cfg.depth_m
                ),
                pass,
                if pass {
                    None
                } else {
                    Some("sum structure fails Jacobi".into())
                },
            );
        }
    }
    Ok(CommandOutput::new("check", report, Vec::new()))
}

fn ring_input(e: RingError) -> CliError {
    CliError::Input(e.to_string())
}

/// `bracket`: master (or Dirac-modified) lambda-bracket of two expressions.
pub fn cmd_bracket(
    model: &ModelFile,
    structure: &str,
    left: &str,
    right: &str,
    dirac: Option<&str>,
    cfg: &RunConfig,
) -> Result<CommandOutput, CliError> {
    let s = find_structure(model, structure)?;
    let f = parse_function(left, &model.algebra)?;
    let g = parse_function(right, &model.algebra)?;
    let series = match dirac {
        None => s
            .master_bracket(&f, &g, cfg.depth_d)
            .map_err(ring_input)?,
        Some(cname) => {
            let theta = find_constraints(model, cname)?;
            let work = cfg.depth_d + s.h.max_order() + 2;
            let c = constraint_matrix(s, theta, work).map_err(dirac_err)?;
            let c_inv = c
                .invert(work)
                .map_err(|_| CliError::Degenerate("constraint matrix is not invertible".into()))?;
            dirac_bracket(s, theta, &c_inv, &f, &g, cfg.depth_d).map_err(dirac_err)?
        }
    };
    let mut report = Report::default();
    report.push(
        format!(
            "BRACKET {} [{} , {}] depth={}",
            structure, left, right, cfg.depth_d
        ),
        true,
        Some(series.to_string()),
    );
    Ok(CommandOutput::new("bracket", report, Vec::new()))
}

/// `dirac`: Dirac modification, optionally followed by quotient reduction;
/// reduced structures are emitted as loadable model fragments.
pub fn cmd_dirac(
    model: &ModelFile,
    structure: &str,
    constraints: &str,
    reduce: bool,
    cfg: &RunConfig,
) -> Result<CommandOutput, CliError> {
    let s = find_structure(model, structure)?;
    let theta = find_constraints(model, constraints)?;
    let mut report = Report::default();
    let mut artifacts = Vec::new();
    let result = if reduce {
        dirac_reduce(s, theta, cfg.depth_d).map_err(dirac_err)?
    } else {
        dirac_modify(s, theta, cfg.depth_d).map_err(dirac_err)?
    };
    report.push(
        format!("DIRAC {} constraints={}", structure, constraints),
        true,
        Some(format!("C[1][1] = {}", result.c.entry(0, 0))),
    );
    // centrality of the modification, re-checked at the report depth
    let d = theta.frechet_matrix().deepen(cfg.depth_d);
    let lhs = d
        .compose(&result.h_tilde)
        .map_err(|e| CliError::Input(e.to_string()))?;
    report.push(
        format!("DIRAC {} D_theta.H~D = 0 depth={}", structure, cfg.depth_d - 2),
        lhs.truncate(cfg.depth_d - 2).is_zero(),
        None,
    );
    let rhs = result
        .h_tilde
        .compose(&d.adjoint())
        .map_err(|e| CliError::Input(e.to_string()))?;
    report.push(
        format!("DIRAC {} H~D.D_theta* = 0 depth={}", structure, cfg.depth_d - 2),
        rhs.truncate(cfg.depth_d - 2).is_zero(),
        None,
    );
    artifacts.push((
        format!("{}_tilde", structure),
        full_fragment(&result.h_tilde, &format!("{}_tilde", structure)),
    ));
    if reduce {
        let h_d = result.h_d.as_ref().expect("reduce produces H_D");
        report.push(
            format!("DIRAC {} reduced to {} generators", structure, h_d.rows()),
            true,
            None,
        );
        artifacts.push((
            format!("{}_D", structure),
            full_fragment(h_d, &format!("{}_D", structure)),
        ));
    }
    Ok(CommandOutput::new("dirac", report, artifacts))
}

/// A standalone loadable fragment: algebra header plus one structure.
fn full_fragment(h: &MatrixOp, name: &str) -> String {
    let alg = h.algebra();
    let mut out = String::new();
    let _ = writeln!(out, "[algebra]");
    let _ = writeln!(out, "generators = {}", alg.gen_names().join(", "));
    if !alg.quasi_names().is_empty() {
        let _ = writeln!(out, "quasiconstants = {}", alg.quasi_names().join(", "));
    }
    let _ = writeln!(out);
    out.push_str(&emit_structure(name, h));
    out
}

/// `hierarchy`: run the Lenard-Magri recursion and report every step.
pub fn cmd_hierarchy(
    model: &ModelFile,
    h0: &str,
    h1: &str,
    seed_expr: &str,
    steps: usize,
    _cfg: &RunConfig,
) -> Result<CommandOutput, CliError> {
    let s0 = find_structure(model, h0)?;
    let s1 = find_structure(model, h1)?;
    let seed = parse_function(seed_expr, &model.algebra)?
        .as_poly()
        .map_err(|_| CliError::Input("seed density must be polynomial".into()))?;
    let state = run_hierarchy(s0, s1, &seed, steps).map_err(hier_err)?;
    let mut report = Report::default();
    for n in 0..state.flows.len() {
        report.push(
            format!("HIERARCHY step {} density", n),
            true,
            Some(state.densities[n].to_string()),
        );
        for (i, comp) in state.flows[n].iter().enumerate() {
            report.push(
                format!("HIERARCHY step {} flow[{}]", n, i + 1),
                true,
                Some(comp.to_string()),
            );
        }
        for (i, w) in state.witnesses[n].iter().enumerate() {
            report.push(
                format!("HIERARCHY step {} witness[{}]", n, i + 1),
                true,
                Some(w.to_string()),
            );
        }
        let p: Vec<crate::diffring::DiffFrac> = state.flows[n]
            .iter()
            .cloned()
            .map(crate::diffring::DiffFrac::from_poly)
            .collect();
        let rel1 = check_associated(s1, &state.densities[n], &p).is_ok();
        let rel0 = check_associated(s0, &state.densities[n + 1], &p).is_ok();
        report.push(format!("HIERARCHY step {} relation H1", n), rel1, None);
        report.push(format!("HIERARCHY step {} relation H0", n), rel0, None);
    }
    let invol = state.involution_ok().map_err(ring_input)?;
    report.push("HIERARCHY involution".to_string(), invol, None);
    Ok(CommandOutput::new("hierarchy", report, Vec::new()))
}

/// `sl3`: the full golden reproduction of the worked example.
pub fn cmd_sl3(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let sl3 = Sl3::load();
    let mut report = Report::default();
    let mut artifacts = Vec::new();
    let depth = cfg.depth_d.max(8);

    // constraint matrices
    let c1 = constraint_matrix(&sl3.h1, &sl3.theta, depth).map_err(dirac_err)?;
    let want_c = PseudoOp::d_pow(sl3.algebra(), 1, depth).scale(&crate::rat::rat_int(6));
    report.push(
        "SL3 C(d) from H1 equals 6d",
        c1.entry(0, 0).eq_to_depth(&want_c, depth) && c1.entry(0, 0).is_differential(),
        Some(format!("C = {}", c1.entry(0, 0))),
    );
    let c0 = constraint_matrix(&sl3.h0, &sl3.theta, depth).map_err(dirac_err)?;
    let h0_blocked = matches!(
        dirac_modify(&sl3.h0, &sl3.theta, depth),
        Err(DiracError::NotInvertible)
    );
    report.push(
        "SL3 C(d) from H0 is 0 and H0 modification is NotInvertible",
        c0.is_zero() && h0_blocked,
        None,
    );

    // reduction
    let res = sl3.reduce(depth).map_err(dirac_err)?;
    let d = sl3.theta.frechet_matrix().deepen(depth);
    let central_l = d
        .compose(&res.h_tilde)
        .map_err(|e| CliError::Input(e.to_string()))?
        .truncate(depth - 2)
        .is_zero();
    let central_r = res
        .h_tilde
        .compose(&d.adjoint())
        .map_err(|e| CliError::Input(e.to_string()))?
        .truncate(depth - 2)
        .is_zero();
    report.push(
        format!("SL3 centrality of H1~D at depth {}", depth - 2),
        central_l && central_r,
        None,
    );
    let h0c = sl3.h0_central(depth).map_err(dirac_err)?;
    report.push(
        "SL3 H0^C matches the worked matrix exactly",
        h0c.eq_to_depth(&sl3.expected_h0c(depth), depth),
        None,
    );
    let h_d = res.h_d.clone().expect("special form");
    report.push(
        format!("SL3 H1^D matches the worked matrix to depth {}", depth),
        h_d.eq_to_depth(&sl3.expected_h1d(depth), depth),
        None,
    );

    // fractional decompositions
    let pair_amb = sl3.pair_ambient().map_err(|e| CliError::Input(e.to_string()))?;
    let a_d = res.a_d.clone().expect("special form");
    let ok_amb = pair_amb
        .verify_against(&a_d, depth)
        .map_err(|e| CliError::Degenerate(e.to_string()))?;
    report.push(
        format!("SL3 fractional decomposition of A1^D verified at depth {}", depth),
        ok_amb,
        None,
    );
    let pair_red = sl3.pair_reduced().map_err(dirac_err)?;
    let ok_red = pair_red
        .verify_against(&h_d, depth)
        .map_err(|e| CliError::Degenerate(e.to_string()))?;
    let nbar_invertible = pair_red.b().invert(depth).is_ok();
    report.push(
        format!("SL3 fractional decomposition of H1^D verified at depth {}", depth),
        ok_red && nbar_invertible,
        None,
    );

    // ambient hierarchy
    let g0 = sl3.g0();
    let amb = run_hierarchy(&sl3.h0, &sl3.h1, &g0, 2).map_err(hier_err)?;
    report.push(
        "SL3 ambient P0 matches the t0 flow exactly",
        amb.flows[0] == sl3.p0_ambient(),
        None,
    );
    report.push(
        "SL3 ambient P1 matches the t1 flow exactly",
        amb.flows[1] == sl3.p1_ambient(),
        None,
    );
    report.push(
        "SL3 ambient g1 matches modulo total derivatives",
        crate::hierarchy::densities_match(&amb.densities[1], &sl3.g1()),
        None,
    );
    report.push(
        "SL3 ambient flows conserve phi",
        amb.flows.iter().all(|p| p[3].is_zero()),
        None,
    );

    // reduced hierarchy
    let (s0c, s1d) = sl3.reduced_structures(28).map_err(dirac_err)?;
    let red = run_hierarchy(&s0c, &s1d, &sl3.g0_reduced(), 3).map_err(hier_err)?;
    report.push(
        "SL3 reduced P0 is (L', psip', psim')",
        red.flows[0] == sl3.p0_reduced(),
        None,
    );
    report.push(
        "SL3 reduced P1 matches the reduced t1 flow exactly",
        red.flows[1] == sl3.p1_reduced(),
        None,
    );
    report.push(
        "SL3 reduced g1 matches modulo total derivatives",
        crate::hierarchy::densities_match(&red.densities[1], &sl3.g1_reduced()),
        None,
    );
    for n in 0..3 {
        let mut line = String::new();
        let mut pass = true;
        for comp in 0..3 {
            match leading_symbol(&red.flows[n], comp) {
                Some((ord, coeff)) => {
                    let _ = write!(line, "comp {}: order {} coeff {}; ", comp + 1, ord, coeff);
                    pass &= ord == 2 * n + 1;
                }
                None => pass = false,
            }
        }
        report.push(
            format!("SL3 reduced leading symbols step {} have order {}", n, 2 * n + 1),
            pass,
            Some(line),
        );
    }

    artifacts.push(("H0C".into(), full_fragment(&h0c, "H0C")));
    artifacts.push((
        "H1D".into(),
        full_fragment(&h_d.truncate(depth), "H1D"),
    ));
    artifacts.push(("H1D_pair".into(), emit_fraction("H1D_pair", &pair_red)));

    Ok(CommandOutput::new("sl3", report, artifacts))
}
