//! The coefficient pair `(f, h)` defining the resetting process.
//!
//! Admissible coefficients are twice continuously differentiable on `[0, 1]`
//! with
//!
//! ```text
//! f(1) < 0 < f(0),    h(1) = 0,    h'(1) != 0,    h(x) > 0 on [0, 1),
//! ```
//!
//! which forces `h'(1) < 0`. Models are immutable after construction and
//! cheap to share across worker threads.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

type Coeff = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Absolute tolerance on `h(1) = 0`.
pub const H1_TOL: f64 = 1e-12;
/// Central-difference step used when no analytic derivative is supplied.
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown model family `{0}`")]
    UnknownFamily(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Built-in coefficient families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// `f(x) = f0 (1-x) + f1 x`, `h(x) = h0 (1-x)`; params `[f0, f1, h0]`.
    Linear,
    /// `f` linear as above, `h(x) = h0 (1-x^2)`; params `[f0, f1, h0]`.
    QuadraticH,
    /// `params = [nf, f coeffs (ascending, nf of them), h coeffs (rest)]`.
    CustomPoly,
}

impl Family {
    pub fn parse(name: &str) -> Result<Self, ModelError> {
        match name {
            "linear" => Ok(Family::Linear),
            "quadratic-h" => Ok(Family::QuadraticH),
            "custom-poly" => Ok(Family::CustomPoly),
            other => Err(ModelError::UnknownFamily(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Linear => "linear",
            Family::QuadraticH => "quadratic-h",
            Family::CustomPoly => "custom-poly",
        }
    }
}

/// The coefficient pair with cached endpoint values.
#[derive(Clone)]
pub struct Model {
    f: Coeff,
    h: Coeff,
    fp: Option<Coeff>,
    hp: Option<Coeff>,
    pub f0: f64,
    pub f1: f64,
    pub h0: f64,
    pub h1prime: f64,
    pub label: String,
}

impl fmt::Debug for Model {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("Model")
            .field("label", &self.label)
            .field("f0", &self.f0)
            .field("f1", &self.f1)
            .field("h0", &self.h0)
            .field("h1prime", &self.h1prime)
            .finish()
    }
}

fn central_diff(f: &Coeff, x: f64) -> f64 {
    (f(x + FD_STEP) - f(x - FD_STEP)) / (2.0 * FD_STEP)
}

impl Model {
    /// Build a model from closures, checking the endpoint conditions.
    ///
    /// Derivatives are optional; they are only needed at `x = 1` (and at
    /// `x = 0` for removable-singularity limits) and fall back to central
    /// differences with step [`FD_STEP`]. Closures must tolerate evaluation
    /// within `FD_STEP` outside `[0, 1]`.
    pub fn from_closures(
        label: impl Into<String>,
        f: Coeff,
        h: Coeff,
        fp: Option<Coeff>,
        hp: Option<Coeff>,
    ) -> Result<Self, ModelError> {
        let f0 = f(0.0);
        let f1 = f(1.0);
        let h0 = h(0.0);
        let h1 = h(1.0);
        let h1prime = match &hp {
            Some(hp) => hp(1.0),
            None => central_diff(&h, 1.0),
        };
        if !(f1 < 0.0 && 0.0 < f0) {
            return Err(ModelError::InvalidParams(format!(
                "need f(1) < 0 < f(0), got f(0)={f0}, f(1)={f1}"
            )));
        }
        if h1.abs() > H1_TOL {
            return Err(ModelError::InvalidParams(format!("need h(1)=0, got {h1}")));
        }
        if h1prime >= 0.0 {
            return Err(ModelError::InvalidParams(format!(
                "need h'(1) < 0, got {h1prime}"
            )));
        }
        if h0 <= 0.0 {
            return Err(ModelError::InvalidParams(format!(
                "need h(0) > 0, got {h0}"
            )));
        }
        Ok(Model {
            f,
            h,
            fp,
            hp,
            f0,
            f1,
            h0,
            h1prime,
            label: label.into(),
        })
    }

    /// Build one of the built-in families.
    pub fn builtin(family: Family, params: &[f64]) -> Result<Self, ModelError> {
        match family {
            Family::Linear => {
                let [f0, f1, h0] = three(params)?;
                check_linear(f0, f1, h0)?;
                Model::from_closures(
                    format!("linear({f0},{f1},{h0})"),
                    Arc::new(move |x| f0 * (1.0 - x) + f1 * x),
                    Arc::new(move |x| h0 * (1.0 - x)),
                    Some(Arc::new(move |_| f1 - f0)),
                    Some(Arc::new(move |_| -h0)),
                )
            }
            Family::QuadraticH => {
                let [f0, f1, h0] = three(params)?;
                check_linear(f0, f1, h0)?;
                Model::from_closures(
                    format!("quadratic-h({f0},{f1},{h0})"),
                    Arc::new(move |x| f0 * (1.0 - x) + f1 * x),
                    Arc::new(move |x| h0 * (1.0 - x * x)),
                    Some(Arc::new(move |_| f1 - f0)),
                    Some(Arc::new(move |x| -2.0 * h0 * x)),
                )
            }
            Family::CustomPoly => {
                if params.len() < 3 {
                    return Err(ModelError::InvalidParams(
                        "custom-poly needs [nf, f coeffs.., h coeffs..]".into(),
                    ));
                }
                let nf = params[0];
                if nf.fract() != 0.0 || nf < 1.0 || (nf as usize) + 2 > params.len() {
                    return Err(ModelError::InvalidParams(format!(
                        "bad f coefficient count {nf}"
                    )));
                }
                let nf = nf as usize;
                let fc: Vec<f64> = params[1..1 + nf].to_vec();
                let hc: Vec<f64> = params[1 + nf..].to_vec();
                let fc2 = fc.clone();
                let hc2 = hc.clone();
                let m = Model::from_closures(
                    "custom-poly".to_string(),
                    Arc::new(move |x| poly(&fc, x)),
                    Arc::new(move |x| poly(&hc, x)),
                    Some(Arc::new(move |x| poly_deriv(&fc2, x))),
                    Some(Arc::new(move |x| poly_deriv(&hc2, x))),
                )?;
                // the closed-form families are positive by construction;
                // polynomials need a grid check up front
                let rep = m.validate(1024);
                if !rep.ok {
                    let v = &rep.violations[0];
                    return Err(ModelError::InvalidParams(format!(
                        "{} at x={} (value {})",
                        v.condition, v.witness_x, v.value
                    )));
                }
                Ok(m)
            }
        }
    }

    /// Parse-and-build entry point used by the CLI config.
    pub fn builtin_named(family: &str, params: &[f64]) -> Result<Self, ModelError> {
        Model::builtin(Family::parse(family)?, params)
    }

    #[inline]
    pub fn f(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    #[inline]
    pub fn h(&self, x: f64) -> f64 {
        (self.h)(x)
    }

    /// `f'(x)`, analytic when available.
    pub fn f_prime(&self, x: f64) -> f64 {
        match &self.fp {
            Some(fp) => fp(x),
            None => central_diff(&self.f, x),
        }
    }

    /// `h'(x)`, analytic when available.
    pub fn h_prime(&self, x: f64) -> f64 {
        match &self.hp {
            Some(hp) => hp(x),
            None => central_diff(&self.h, x),
        }
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        self.fp.is_some() && self.hp.is_some()
    }

    /// `inf_{[0, x]} h`, estimated on a 4096-point grid plus endpoints.
    pub fn h_inf(&self, x: f64) -> f64 {
        let n = 4096;
        let mut m = self.h(0.0).min(self.h(x));
        for k in 1..n {
            let y = x * (k as f64) / (n as f64);
            m = m.min(self.h(y));
        }
        m
    }

    /// Check the admissibility conditions on a uniform grid of `grid_n`
    /// points plus endpoints; violations are reported, never raised.
    pub fn validate(&self, grid_n: usize) -> ValidationReport {
        let mut violations = Vec::new();
        let grid_n = grid_n.max(2);
        if self.f0 <= 0.0 {
            violations.push(Violation::new("f(0)>0", 0.0, self.f0));
        }
        if self.f1 >= 0.0 {
            violations.push(Violation::new("f(1)<0", 1.0, self.f1));
        }
        let h1 = self.h(1.0);
        if h1.abs() > H1_TOL {
            violations.push(Violation::new("h(1)=0", 1.0, h1));
        }
        let h1p = match &self.hp {
            Some(hp) => hp(1.0),
            None => central_diff(&self.h, 1.0),
        };
        if h1p.abs() <= 1e-9 {
            violations.push(Violation::new("h'(1)!=0", 1.0, h1p));
        } else if h1p > 0.0 {
            violations.push(Violation::new("h'(1)<0", 1.0, h1p));
        }
        for k in 0..grid_n {
            let x = k as f64 / (grid_n - 1) as f64;
            if x < 1.0 {
                let hx = self.h(x);
                if hx <= 0.0 {
                    violations.push(Violation::new("h>0 on [0,1)", x, hx));
                    break;
                }
            }
        }
        ValidationReport {
            ok: violations.is_empty(),
            violations,
        }
    }
}

fn three(params: &[f64]) -> Result<[f64; 3], ModelError> {
    params
        .try_into()
        .map_err(|_| ModelError::InvalidParams(format!("need 3 params, got {}", params.len())))
}

fn check_linear(f0: f64, f1: f64, h0: f64) -> Result<(), ModelError> {
    if f0 <= 0.0 || f1 >= 0.0 || h0 <= 0.0 {
        return Err(ModelError::InvalidParams(format!(
            "need f0 > 0, f1 < 0, h0 > 0; got ({f0}, {f1}, {h0})"
        )));
    }
    Ok(())
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck)
}

fn poly_deriv(c: &[f64], x: f64) -> f64 {
    c.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (k, &ck)| acc * x + (k as f64) * ck)
}

#[derive(Debug, Clone)]
pub struct Violation {
    pub condition: String,
    pub witness_x: f64,
    pub value: f64,
}

impl Violation {
    fn new(condition: &str, witness_x: f64, value: f64) -> Self {
        Violation {
            condition: condition.to_string(),
            witness_x,
            value,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

/// The default experiment model: `f(x) = 1 - 2x`, `h(x) = 1 - x`.
pub fn default_linear() -> Model {
    Model::builtin(Family::Linear, &[1.0, -1.0, 1.0]).expect("default model is valid")
}
