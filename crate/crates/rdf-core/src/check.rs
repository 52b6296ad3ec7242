//! Satisfiability and validity checking: pipeline branches discharged to the
//! external solver, with every returned model re-checked by the exact oracle.

use rayon::prelude::*;
use serde::Serialize;

use crate::ast::{rat, Formula};
use crate::elim::{pipeline, Mode, PipelineConfig, Terminal};
use crate::normal::NormalError;
use crate::smt::{complete_model, emit_smtlib_with_header, solve_external, SolverConfig, SolverError, Verdict};
use crate::tarski::{clear_divisions, eval_tarski, eval_tarski_margin, ClearError, TarskiFormula};

#[derive(Clone, Debug)]
pub struct CheckConfig {
    pub pipeline: PipelineConfig,
    pub solver: SolverConfig,
    pub jobs: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            pipeline: PipelineConfig::default(),
            solver: SolverConfig::default(),
            jobs: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CheckError {
    #[error(transparent)]
    Normal(#[from] NormalError),
    #[error(transparent)]
    Clear(#[from] ClearError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("thread pool: {0}")]
    Pool(String),
}

/// Whether a model satisfies its branch formula.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ModelCheck {
    /// Exact model, formula true under exact evaluation.
    Exact,
    /// Rationalized model accepted: non-strict atoms exact, strict ones with margin.
    ApproximateAccepted,
    /// Rationalized model that fails the acceptance test.
    ApproximateRejected,
    /// Exact model that does not satisfy the formula.
    Failed,
}

#[derive(Clone, Debug)]
pub struct BranchResult {
    pub terminal: Terminal,
    pub cleared: TarskiFormula,
    pub verdict: Verdict,
    pub model_check: Option<ModelCheck>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Outcome {
    Valid,
    Invalid,
    Sat,
    Unsat,
    Unknown,
}

impl Outcome {
    pub fn label(self) -> &'static str {
        match self {
            Outcome::Valid => "VALID",
            Outcome::Invalid => "INVALID",
            Outcome::Sat => "SAT",
            Outcome::Unsat => "UNSAT",
            Outcome::Unknown => "UNKNOWN",
        }
    }
}

#[derive(Clone, Debug)]
pub struct CheckReport {
    pub mode: Mode,
    pub outcome: Outcome,
    pub branches: Vec<BranchResult>,
}

impl CheckReport {
    /// First branch with a model, in branch order.
    pub fn first_sat(&self) -> Option<&BranchResult> {
        self.branches.iter().find(|b| matches!(b.verdict, Verdict::Sat(_)))
    }
}

/// Strict atoms of an approximate model must hold with this margin.
pub fn approximate_margin() -> crate::ast::Rat {
    rat(1, 1_000_000_000)
}

/// Division-free form of a terminal's formula.
pub fn cleared(t: &Terminal) -> Result<TarskiFormula, ClearError> {
    clear_divisions(t.phi4(), &t.elimination.known_positive, true)
}

/// Solver script for one terminal, with a provenance header.
pub fn branch_script(t: &Terminal, cleared: &TarskiFormula) -> String {
    let mut header = vec![format!("branch {}", t.index), format!("chain: {}", t.branch.chain.join(" < "))];
    for (k, v) in &t.branch.merged {
        header.push(format!("merged: {k} = {v}"));
    }
    header.extend(t.trace().iter().map(|e| format!("[{}] {}", e.rule, e.literal)));
    emit_smtlib_with_header(cleared, &header)
}

pub fn model_check(f: &TarskiFormula, m: &crate::tarski::NumericModel) -> ModelCheck {
    if m.exact {
        match eval_tarski(f, m) {
            Ok(true) => ModelCheck::Exact,
            _ => ModelCheck::Failed,
        }
    } else {
        match eval_tarski_margin(f, m, &approximate_margin()) {
            Ok(true) => ModelCheck::ApproximateAccepted,
            _ => ModelCheck::ApproximateRejected,
        }
    }
}

fn solve_one(t: Terminal, solver: &SolverConfig) -> Result<BranchResult, CheckError> {
    let cleared = cleared(&t)?;
    let script = branch_script(&t, &cleared);
    let verdict = match solve_external(&script, solver) {
        Ok(v) => v,
        Err(SolverError::SolverTimeout(d)) => Verdict::Unknown(format!("timeout after {d:?}")),
        Err(e) => return Err(e.into()),
    };
    let (verdict, model_check) = match verdict {
        Verdict::Sat(mut m) => {
            complete_model(&mut m, cleared.free_vars());
            let c = model_check(&cleared, &m);
            (Verdict::Sat(m), Some(c))
        }
        v => (v, None),
    };
    Ok(BranchResult { terminal: t, cleared, verdict, model_check })
}

/// Decides satisfiability (or validity, via the negation) of a formula.
pub fn check(formula: &Formula, mode: Mode, cfg: &CheckConfig) -> Result<CheckReport, CheckError> {
    let terminals = pipeline(formula, mode, &cfg.pipeline)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| CheckError::Pool(e.to_string()))?;
    let branches: Vec<BranchResult> = pool.install(|| {
        terminals.into_par_iter().map(|t| solve_one(t, &cfg.solver)).collect::<Result<Vec<_>, _>>()
    })?;
    let any_sat = branches.iter().any(|b| matches!(b.verdict, Verdict::Sat(_)));
    let any_unknown = branches.iter().any(|b| matches!(b.verdict, Verdict::Unknown(_)));
    let outcome = match (mode, any_sat, any_unknown) {
        (Mode::Validity, true, _) => Outcome::Invalid,
        (Mode::Satisfiability, true, _) => Outcome::Sat,
        (_, false, true) => Outcome::Unknown,
        (Mode::Validity, false, false) => Outcome::Valid,
        (Mode::Satisfiability, false, false) => Outcome::Unsat,
    };
    Ok(CheckReport { mode, outcome, branches })
}
