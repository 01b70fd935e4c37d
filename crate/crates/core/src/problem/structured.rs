use nalgebra::{DMatrix, DVector};

use super::{oracle, Bounds, ConstraintConstants, DeclaredConstants, Oracle, ProblemSpec};
use crate::error::{check_len, Error, Result};
use crate::linalg::{spectral_norm, sym_eig_extremes};

/// Eigenvalues above `-PSD_TOL * max(1, |M|)` are accepted as nonnegative.
const PSD_TOL: f64 = 1e-12;

/// Constraints whose Hessian touches at most this many coordinates get an
/// exact gradient bound by vertex enumeration.
const MAX_EXACT_SUPPORT: usize = 16;

/// `f(x) = 1/2 x^T H x + c^T x + r`
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective {
    pub h: DMatrix<f64>,
    pub c: DVector<f64>,
    pub r: f64,
}

impl QuadraticObjective {
    pub fn eval(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let hx = &self.h * x;
        let value = 0.5 * x.dot(&hx) + self.c.dot(x) + self.r;
        (value, hx + &self.c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintKind {
    /// `g(x) = 1/2 x^T A x + b^T x + d`
    Quadratic {
        a: DMatrix<f64>,
        b: DVector<f64>,
        d: f64,
    },
    /// `g(x) = a^T x - beta`
    Affine { a: DVector<f64>, beta: f64 },
}

impl ConstraintKind {
    pub fn eval(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        match self {
            Self::Quadratic { a, b, d } => {
                let ax = a * x;
                (0.5 * x.dot(&ax) + b.dot(x) + d, ax + b)
            }
            Self::Affine { a, beta } => (a.dot(x) - beta, a.clone()),
        }
    }

    fn dim(&self) -> usize {
        match self {
            Self::Quadratic { b, .. } => b.len(),
            Self::Affine { a, .. } => a.len(),
        }
    }
}

/// Quadratic objective with quadratic and affine inequality constraints,
/// together with the box the smoothness constants are computed over.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredProblem {
    pub objective: QuadraticObjective,
    pub constraints: Vec<ConstraintKind>,
    pub bounds: Bounds,
    /// Overrides the constants derived from the data when set.
    pub declared: Option<DeclaredConstants>,
}

impl StructuredProblem {
    /// Validates dimensions and convexity (`H` and every quadratic `A_i` PSD).
    pub fn new(
        objective: QuadraticObjective,
        constraints: Vec<ConstraintKind>,
        bounds: Bounds,
    ) -> Result<Self> {
        let n = objective.c.len();
        if n == 0 {
            return Err(Error::InvalidInput(
                "primal dimension n must be >= 1".into(),
            ));
        }
        if objective.h.shape() != (n, n) {
            return Err(Error::InvalidInput(format!(
                "objective H must be {n}x{n}, got {}x{}",
                objective.h.nrows(),
                objective.h.ncols()
            )));
        }
        if !objective.r.is_finite() {
            return Err(Error::InvalidInput("objective r must be finite".into()));
        }
        check_psd("objective H", &objective.h)?;
        if constraints.is_empty() {
            return Err(Error::InvalidInput("need at least one constraint".into()));
        }
        for (i, c) in constraints.iter().enumerate() {
            check_len("constraint", n, c.dim())?;
            match c {
                ConstraintKind::Quadratic { a, d, .. } => {
                    if a.shape() != (n, n) {
                        return Err(Error::InvalidInput(format!(
                            "constraint {i}: A must be {n}x{n}, got {}x{}",
                            a.nrows(),
                            a.ncols()
                        )));
                    }
                    if !d.is_finite() {
                        return Err(Error::InvalidInput(format!(
                            "constraint {i}: d must be finite"
                        )));
                    }
                    check_psd(&format!("constraint {i} matrix A"), a)?;
                }
                ConstraintKind::Affine { a, beta } => {
                    if a.iter()
                        .chain(std::iter::once(beta))
                        .any(|v| !v.is_finite())
                    {
                        return Err(Error::InvalidInput(format!(
                            "constraint {i}: coefficients must be finite"
                        )));
                    }
                }
            }
        }
        bounds.validate()?;
        check_len("box", n, bounds.dim())?;
        Ok(Self {
            objective,
            constraints,
            bounds,
            declared: None,
        })
    }

    pub fn with_declared(mut self, declared: DeclaredConstants) -> Result<Self> {
        declared.validate(self.m())?;
        self.declared = Some(declared);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.objective.c.len()
    }

    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    /// Constants implied by the data over `bounds`:
    /// `mu = lambda_min(H)`, `l = lambda_max(H)`, `L_gi = lambda_max(A_i)`
    /// and `B_gi = sup_box |A_i x + b_i|` (`|a_i|` and `0` for affine rows).
    ///
    /// `mu` may come out as zero for a singular `H`; [`StructuredProblem::to_spec`]
    /// rejects that unless constants are declared explicitly.
    pub fn derived_constants(&self) -> Result<DeclaredConstants> {
        let (mu, l_smooth) = sym_eig_extremes(&self.objective.h)?;
        let constraints = self
            .constraints
            .iter()
            .map(|c| match c {
                ConstraintKind::Quadratic { a, b, .. } => {
                    let (_, top) = sym_eig_extremes(a)?;
                    Ok(ConstraintConstants {
                        lipschitz: top.max(0.0),
                        bound: affine_map_sup_norm(a, b, &self.bounds)?,
                    })
                }
                ConstraintKind::Affine { a, .. } => Ok(ConstraintConstants {
                    lipschitz: 0.0,
                    bound: a.norm(),
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DeclaredConstants {
            mu: mu.max(0.0),
            l_smooth,
            constraints,
        })
    }

    /// Declared constants if present, otherwise the derived ones.
    pub fn constants(&self) -> Result<DeclaredConstants> {
        match &self.declared {
            Some(d) => Ok(d.clone()),
            None => self.derived_constants(),
        }
    }

    pub fn to_spec(&self) -> Result<ProblemSpec> {
        let constants = self.constants()?;
        if constants.mu <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "objective H is singular (lambda_min = {:e}); declare mu explicitly",
                constants.mu
            )));
        }
        let obj = self.objective.clone();
        let objective: Oracle = oracle(move |x| obj.eval(x));
        let constraints = self
            .constraints
            .iter()
            .cloned()
            .map(|c| oracle(move |x| c.eval(x)))
            .collect();
        ProblemSpec::new(self.n(), objective, constraints, constants)?.with_box(self.bounds.clone())
    }
}

fn check_psd(which: &str, m: &DMatrix<f64>) -> Result<()> {
    let (lo, _) = sym_eig_extremes(m)?;
    if lo < -PSD_TOL * m.amax().max(1.0) {
        return Err(Error::NotPsd {
            which: which.to_string(),
            eigenvalue: lo,
        });
    }
    Ok(())
}

/// `sup_{x in box} |A x + b|`.
///
/// The supremum of a convex function over a box sits at a vertex, and only
/// the coordinates in the column support of `A` matter. Small supports are
/// enumerated exactly; larger ones fall back to the bound
/// `|A c + b| + |A| |w|` with `c` the box center and `w` the half-widths on
/// the support.
fn affine_map_sup_norm(a: &DMatrix<f64>, b: &DVector<f64>, bounds: &Bounds) -> Result<f64> {
    let support: Vec<usize> = (0..a.ncols())
        .filter(|&j| a.column(j).iter().any(|v| *v != 0.0))
        .collect();
    let mut x = bounds.center();
    if support.len() > MAX_EXACT_SUPPORT {
        let half: f64 = support
            .iter()
            .map(|&j| 0.5 * (bounds.hi[j] - bounds.lo[j]))
            .map(|w| w * w)
            .sum::<f64>()
            .sqrt();
        return Ok((a * &x + b).norm() + spectral_norm(a)? * half);
    }
    let mut best = 0.0_f64;
    for mask in 0u32..(1u32 << support.len()) {
        for (bit, &j) in support.iter().enumerate() {
            x[j] = if mask & (1 << bit) == 0 {
                bounds.lo[j]
            } else {
                bounds.hi[j]
            };
        }
        best = best.max((a * &x + b).norm());
    }
    Ok(best)
}
