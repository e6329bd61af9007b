//! External LP solvers.
//!
//! A [`ProcessSolver`] runs a command, writes the LP dump to its standard
//! input and reads one of the following from its standard output:
//!
//! ```text
//! optimal
//! x_1 … x_m
//! ```
//!
//! or the single word `infeasible` or `unbounded`. Whitespace, including
//! line breaks, is insignificant.

use std::io::Write;
use std::process::{Command, Stdio};

use crate::error::{Error, Result};

use super::{write_dump, LinearProgram, LpOutcome, FEASIBILITY_TOL};

pub trait ExternalSolver {
    fn name(&self) -> &str;
    fn solve(&self, lp: &LinearProgram) -> Result<LpOutcome>;
}

#[derive(Debug, Clone)]
pub struct ProcessSolver {
    pub program: String,
    pub args: Vec<String>,
}

impl ProcessSolver {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        Self { program: program.into(), args }
    }

    /// Splits a command line on whitespace; the first word is the program.
    pub fn from_command_line(cmd: &str) -> Result<Self> {
        let mut words = cmd.split_whitespace().map(str::to_string);
        let program = words.next().ok_or_else(|| Error::InvalidInput("empty solver command".into()))?;
        Ok(Self::new(program, words.collect()))
    }
}

impl ExternalSolver for ProcessSolver {
    fn name(&self) -> &str {
        &self.program
    }

    fn solve(&self, lp: &LinearProgram) -> Result<LpOutcome> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::SolverUnavailable(format!("{}: {e}", self.program)))?;
        let dump = write_dump(lp);
        let mut stdin = child.stdin.take().expect("piped stdin");
        // write errors surface below as a failed exit status
        let _ = stdin.write_all(dump.as_bytes());
        drop(stdin);
        let out = child.wait_with_output()?;
        if !out.status.success() {
            let stderr = String::from_utf8_lossy(&out.stderr);
            return Err(Error::SolverProtocol(format!(
                "{} exited with {}: {}",
                self.program,
                out.status,
                stderr.lines().last().unwrap_or("").trim()
            )));
        }
        parse_reply(&String::from_utf8_lossy(&out.stdout), lp.num_vars())
    }
}

fn parse_reply(text: &str, m: usize) -> Result<LpOutcome> {
    let mut tokens = text.split_whitespace();
    match tokens.next() {
        Some("infeasible") => Ok(LpOutcome::Infeasible),
        Some("unbounded") => Ok(LpOutcome::Unbounded),
        Some("optimal") => {
            let x: Vec<f64> = tokens
                .map(|t| t.parse().map_err(|_| Error::SolverProtocol(format!("bad number `{t}` in solver reply"))))
                .collect::<Result<_>>()?;
            if x.len() != m {
                return Err(Error::SolverProtocol(format!("solver returned {} values for {m} variables", x.len())));
            }
            Ok(LpOutcome::Optimal { x, objective: f64::NAN })
        }
        Some(t) => Err(Error::SolverProtocol(format!("unknown solver status `{t}`"))),
        None => Err(Error::SolverProtocol("solver produced no output".into())),
    }
}

/// Solves `lp` with `solver` and checks the returned point against the same
/// slack tolerance as the built-in solver. The objective is recomputed.
pub fn solve_external(lp: &LinearProgram, solver: &dyn ExternalSolver) -> Result<LpOutcome> {
    match solver.solve(lp)? {
        LpOutcome::Optimal { x, .. } => {
            if x.len() != lp.num_vars() {
                return Err(Error::SolverProtocol(format!(
                    "{} returned {} values for {} variables",
                    solver.name(),
                    x.len(),
                    lp.num_vars()
                )));
            }
            let violation = lp.max_violation(&x);
            if violation.is_nan() || violation > FEASIBILITY_TOL {
                return Err(Error::SolverProtocol(format!(
                    "{} returned a point violating the constraints by {violation:e}",
                    solver.name()
                )));
            }
            let objective = lp.objective(&x);
            Ok(LpOutcome::Optimal { x, objective })
        }
        other => Ok(other),
    }
}
