//! JSON problem files.
//!
//! ```json
//! {
//!   "n": 2,
//!   "objective": { "H": [[2, 0], [0, 2]], "c": [-21.6, 0], "r": 116.64 },
//!   "constraints": [
//!     { "type": "quadratic", "A": [[2, 0], [0, 2]], "b": [0, 0], "d": -2.7 },
//!     { "type": "affine", "a": [-1, 0], "beta": 0 }
//!   ],
//!   "box": { "lo": [-1, -5], "hi": [11, 5] },
//!   "declared_constants": { "mu": 2, "l_smooth": 2,
//!                           "constraints": [{ "L": 2, "B": 22.4 }, { "L": 0, "B": 1 }] },
//!   "reference": { "x": [1.643, 0], "lambda": [5.572, 0] },
//!   "initial": { "x": [0, 0], "lambda": [0, 0] }
//! }
//! ```
//!
//! `declared_constants`, `reference` and `initial` are optional.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Bounds, ConstraintKind, DeclaredConstants, QuadraticObjective, StructuredProblem};
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    pub objective: ObjectiveEntry,
    pub constraints: Vec<ConstraintEntry>,
    #[serde(rename = "box")]
    pub bounds: Bounds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_constants: Option<DeclaredConstants>,
    /// Known primal-dual solution, used by `certify` and `check`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<PointEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<PointEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveEntry {
    #[serde(rename = "H")]
    pub h: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    #[serde(default)]
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ConstraintEntry {
    Quadratic {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        d: f64,
    },
    Affine {
        a: Vec<f64>,
        beta: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointEntry {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl PointEntry {
    pub fn to_vectors(&self, n: usize, m: usize) -> Result<(DVector<f64>, DVector<f64>)> {
        check_len("point x", n, self.x.len())?;
        check_len("point lambda", m, self.lambda.len())?;
        Ok((
            DVector::from_column_slice(&self.x),
            DVector::from_column_slice(&self.lambda),
        ))
    }
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files serialize")
    }

    pub fn to_structured(&self) -> Result<StructuredProblem> {
        let n = self.n;
        let objective = QuadraticObjective {
            h: square_matrix("objective H", &self.objective.h, n)?,
            c: vector("objective c", &self.objective.c, n)?,
            r: self.objective.r,
        };
        let constraints = self
            .constraints
            .iter()
            .map(|c| match c {
                ConstraintEntry::Quadratic { a, b, d } => Ok(ConstraintKind::Quadratic {
                    a: square_matrix("constraint A", a, n)?,
                    b: vector("constraint b", b, n)?,
                    d: *d,
                }),
                ConstraintEntry::Affine { a, beta } => Ok(ConstraintKind::Affine {
                    a: vector("constraint a", a, n)?,
                    beta: *beta,
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        let problem = StructuredProblem::new(objective, constraints, self.bounds.clone())?;
        match &self.declared_constants {
            Some(d) => problem.with_declared(d.clone()),
            None => Ok(problem),
        }
    }

    pub fn from_structured(p: &StructuredProblem) -> Self {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            m.row_iter().map(|r| r.iter().copied().collect()).collect()
        };
        Self {
            n: p.n(),
            objective: ObjectiveEntry {
                h: rows(&p.objective.h),
                c: p.objective.c.iter().copied().collect(),
                r: p.objective.r,
            },
            constraints: p
                .constraints
                .iter()
                .map(|c| match c {
                    ConstraintKind::Quadratic { a, b, d } => ConstraintEntry::Quadratic {
                        a: rows(a),
                        b: b.iter().copied().collect(),
                        d: *d,
                    },
                    ConstraintKind::Affine { a, beta } => ConstraintEntry::Affine {
                        a: a.iter().copied().collect(),
                        beta: *beta,
                    },
                })
                .collect(),
            bounds: p.bounds.clone(),
            declared_constants: p.declared.clone(),
            reference: None,
            initial: None,
        }
    }
}

fn vector(what: &'static str, v: &[f64], n: usize) -> Result<DVector<f64>> {
    check_len(what, n, v.len())?;
    Ok(DVector::from_column_slice(v))
}

fn square_matrix(what: &'static str, rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>> {
    check_len(what, n, rows.len())?;
    for r in rows {
        check_len(what, n, r.len())?;
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}
