//! Problem data, solver settings, and solution containers.

use serde::{Deserialize, Serialize};

use crate::cone::ConeSpec;
use crate::error::ConicError;
use crate::sparse::SparseMatrix;

/// A conic program `min c'x  s.t.  Ax + s = b, s in K`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConicProblem {
    pub a: SparseMatrix,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub cones: ConeSpec,
}

impl ConicProblem {
    pub fn new(
        a: SparseMatrix,
        b: Vec<f64>,
        c: Vec<f64>,
        cones: ConeSpec,
    ) -> Result<Self, ConicError> {
        let p = Self { a, b, c, cones };
        p.validate()?;
        Ok(p)
    }

    /// Primal dimension.
    pub fn n(&self) -> usize {
        self.a.cols()
    }

    /// Row (cone) dimension.
    pub fn m(&self) -> usize {
        self.a.rows()
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        self.cones.validate()?;
        if self.cones.total_dim() != self.a.rows() {
            return Err(ConicError::InvalidProblem(format!(
                "cone dimension {} != row count {}",
                self.cones.total_dim(),
                self.a.rows()
            )));
        }
        if self.b.len() != self.a.rows() {
            return Err(ConicError::InvalidProblem(format!(
                "b has length {}, expected {}",
                self.b.len(),
                self.a.rows()
            )));
        }
        if self.c.len() != self.a.cols() {
            return Err(ConicError::InvalidProblem(format!(
                "c has length {}, expected {}",
                self.c.len(),
                self.a.cols()
            )));
        }
        if self.b.iter().any(|v| !v.is_finite()) {
            return Err(ConicError::NonFinite("b"));
        }
        if self.c.iter().any(|v| !v.is_finite()) {
            return Err(ConicError::NonFinite("c"));
        }
        Ok(())
    }

    /// Debug dump used by test oracles and external cross-checks.
    pub fn to_debug_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.n(),
            "m": self.m(),
            "cones": {
                "zero": self.cones.zero_dim,
                "nonneg": self.cones.nonneg_dim,
                "soc": self.cones.soc_dims,
            },
            "A": self.a.iter_triplets().map(|(r, c, v)| {
                serde_json::json!([r, c, v])
            }).collect::<Vec<_>>(),
            "b": self.b,
            "c": self.c,
        })
    }

    pub fn from_debug_json(value: &serde_json::Value) -> Result<Self, ConicError> {
        let bad = |msg: &str| ConicError::InvalidProblem(format!("debug json: {msg}"));
        let n = value["n"].as_u64().ok_or_else(|| bad("missing n"))? as usize;
        let m = value["m"].as_u64().ok_or_else(|| bad("missing m"))? as usize;
        let cones = ConeSpec::new(
            value["cones"]["zero"].as_u64().ok_or_else(|| bad("missing cones.zero"))? as usize,
            value["cones"]["nonneg"].as_u64().ok_or_else(|| bad("missing cones.nonneg"))? as usize,
            value["cones"]["soc"]
                .as_array()
                .ok_or_else(|| bad("missing cones.soc"))?
                .iter()
                .map(|d| d.as_u64().map(|d| d as usize).ok_or_else(|| bad("bad soc dim")))
                .collect::<Result<Vec<_>, _>>()?,
        )?;
        let triplets = value["A"]
            .as_array()
            .ok_or_else(|| bad("missing A"))?
            .iter()
            .map(|t| {
                let arr = t.as_array().filter(|a| a.len() == 3).ok_or_else(|| bad("bad triplet"))?;
                Ok((
                    arr[0].as_u64().ok_or_else(|| bad("bad row"))? as usize,
                    arr[1].as_u64().ok_or_else(|| bad("bad col"))? as usize,
                    arr[2].as_f64().ok_or_else(|| bad("bad value"))?,
                ))
            })
            .collect::<Result<Vec<_>, ConicError>>()?;
        let vec_field = |name: &str| -> Result<Vec<f64>, ConicError> {
            value[name]
                .as_array()
                .ok_or_else(|| bad(&format!("missing {name}")))?
                .iter()
                .map(|v| v.as_f64().ok_or_else(|| bad(&format!("bad entry in {name}"))))
                .collect()
        };
        Self::new(
            SparseMatrix::from_triplets(m, n, &triplets)?,
            vec_field("b")?,
            vec_field("c")?,
            cones,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Absolute infinity-norm threshold on the primal residual, dual
    /// residual, and duality gap.
    pub tolerance: f64,
    pub max_iters: usize,
    /// Over-relaxation factor, in (0, 2).
    pub relaxation: f64,
    /// Ruiz equilibration of the data before solving.
    pub scaling: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-7,
            max_iters: 50_000,
            relaxation: 1.5,
            scaling: true,
        }
    }
}

impl SolverSettings {
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        if !(self.tolerance > 0.0) {
            return Err(ConicError::InvalidProblem("tolerance must be positive".into()));
        }
        if !(self.relaxation > 0.0 && self.relaxation < 2.0) {
            return Err(ConicError::InvalidProblem(
                "relaxation must lie in (0, 2)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Residuals {
    /// ||Ax + s - b||_inf
    pub primal: f64,
    /// ||A'y + c||_inf
    pub dual: f64,
    /// |c'x + b'y|
    pub gap: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

/// Solver output: the primal/dual triple plus the embedding point `(z, omega)`
/// that the derivative machinery differentiates through.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConicSolution {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    /// Embedding point partitioned (u, v, w) with u of length n, v of
    /// length m, and w scalar.
    pub z: Vec<f64>,
    pub omega: f64,
    pub status: SolveStatus,
    pub residuals: Residuals,
    pub iterations: usize,
}

impl ConicSolution {
    pub fn objective(&self, problem: &ConicProblem) -> f64 {
        problem.c.iter().zip(&self.x).map(|(c, x)| c * x).sum()
    }
}
