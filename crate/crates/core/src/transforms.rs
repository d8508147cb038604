//! Laplace-domain quantities of the no-jump pre-spike process.
//!
//! All three building blocks are evaluated as x-domain integrals cut at
//! `y_star` (time truncation at `T_star` corresponds to space truncation at
//! `y_star`):
//!
//! ```text
//! D(sigma) = int_a^b   exp(-sigma eps U - V) h/omega dx
//! C(sigma) = int_0^ys  exp(-sigma eps U - V) h/omega dx - D(sigma)
//! E(sigma) = eps int_0^ys exp(-sigma eps U - V) / omega dx
//! ```
//!
//! The generating function of conditional pre-spike counts is then exactly
//! `Z(z, sigma) = E / (1 - C - z D)`, with small-`eps` limit
//! `1 / (sigma + f0 + (1-z) f0 (1/a - 1/b))` on the disc of radius
//! `1 + (sigma + f0)/(f0 (1/a - 1/b))`.

use crate::flow::{FlowContext, FlowError};
use crate::model::Model;
use crate::quad;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("rectangle bounds ({a}, {b}) invalid: need 0 < a <= b <= 1 and b <= y_star unless b = 1")]
    BadRectangle { a: f64, b: f64 },
    #[error("z = {z} outside the convergence region (radius {radius})")]
    OutsideRadius { z: f64, radius: f64 },
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// Evaluated `C`, `D`, `E` at one `(sigma, a, b)`.
#[derive(Debug, Clone, Copy)]
pub struct TransformValues {
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub sigma: f64,
    pub a: f64,
    pub b: f64,
    /// Max absolute quadrature error estimate across the three integrals.
    pub err_est: f64,
}

impl TransformValues {
    /// `Z(z) = E / (1 - C - z D)`.
    pub fn z_at(&self, z: f64) -> Result<f64, TransformError> {
        let denom = 1.0 - self.c - z * self.d;
        if denom <= 0.0 {
            return Err(TransformError::OutsideRadius {
                z,
                radius: (1.0 - self.c) / self.d,
            });
        }
        Ok(self.e / denom)
    }

    /// Laplace-transformed conditional count probabilities
    /// `P_hat(n) = D^n E / (1-C)^(n+1)`.
    pub fn p_nj_hat(&self, n: u32) -> f64 {
        let base = self.d / (1.0 - self.c);
        base.powi(n as i32) * self.e / (1.0 - self.c)
    }
}

fn effective_b(ctx: &FlowContext, a: f64, b: f64) -> Result<f64, TransformError> {
    if !(a > 0.0 && a <= b && b <= 1.0) {
        return Err(TransformError::BadRectangle { a, b });
    }
    if b == 1.0 {
        Ok(ctx.y_star())
    } else if b <= ctx.y_star() {
        Ok(b)
    } else {
        Err(TransformError::BadRectangle { a, b })
    }
}

/// Evaluate `C`, `D`, `E` at `(sigma, a, b)`. `b = 1` is clipped to `y_star`.
pub fn cde(ctx: &FlowContext, sigma: f64, a: f64, b: f64) -> Result<TransformValues, TransformError> {
    let b_eff = effective_b(ctx, a, b)?;
    let eps = ctx.eps();
    let tol = ctx.quad_tol();

    let weight = |x: f64| -> f64 {
        let u = ctx.u(x).unwrap_or(f64::INFINITY);
        let v = ctx.v(x).unwrap_or(f64::INFINITY);
        (-sigma * eps * u - v).exp()
    };
    let dens_h = |x: f64| weight(x) * ctx.model().h(x) / ctx.omega_unchecked(x);
    let dens_1 = |x: f64| weight(x) / ctx.omega_unchecked(x);

    let full = quad::integrate(&dens_h, 0.0, ctx.y_star(), tol, 0.0).map_err(FlowError::from)?;
    let d = quad::integrate(&dens_h, a, b_eff, tol, tol * full.value)
        .map_err(FlowError::from)?;
    let e = quad::integrate(&dens_1, 0.0, ctx.y_star(), tol, 0.0).map_err(FlowError::from)?;

    Ok(TransformValues {
        c: full.value - d.value,
        d: d.value,
        e: eps * e.value,
        sigma,
        a,
        b,
        err_est: full
            .err_est
            .max(d.err_est)
            .max(eps * e.err_est),
    })
}

/// `Z^eps(z, sigma : a, b)` in one call.
pub fn z_eps(
    ctx: &FlowContext,
    z: f64,
    sigma: f64,
    a: f64,
    b: f64,
) -> Result<f64, TransformError> {
    cde(ctx, sigma, a, b)?.z_at(z)
}

/// The limiting generating function's parameters and convergence disc.
#[derive(Debug, Clone, Copy)]
pub struct LimitZ {
    pub sigma: f64,
    pub a: f64,
    pub b: f64,
    pub f0: f64,
    /// Disc radius `1 + (sigma + f0)/(f0 (1/a - 1/b))`, always > 1.
    pub radius: f64,
}

impl LimitZ {
    pub fn new(m: &Model, sigma: f64, a: f64, b: f64) -> Self {
        let mass = 1.0 / a - 1.0 / b;
        let radius = if mass <= 0.0 {
            f64::INFINITY
        } else {
            1.0 + (sigma + m.f0) / (m.f0 * mass)
        };
        LimitZ {
            sigma,
            a,
            b,
            f0: m.f0,
            radius,
        }
    }

    /// `1/(sigma + f0 + (1-z) f0 (1/a - 1/b))` on `|z| < radius`.
    pub fn z_at(&self, z: f64) -> Result<f64, TransformError> {
        if z.abs() >= self.radius {
            return Err(TransformError::OutsideRadius {
                z,
                radius: self.radius,
            });
        }
        Ok(1.0 / (self.sigma + self.f0 + (1.0 - z) * self.f0 * (1.0 / self.a - 1.0 / self.b)))
    }
}

/// Radius of the limiting disc, `1 + (sigma + f0)/(f0 (1/a - 1/b))`.
pub fn radius(m: &Model, sigma: f64, a: f64, b: f64) -> f64 {
    LimitZ::new(m, sigma, a, b).radius
}

/// Limiting generating function `1/(sigma + f0 + (1-z) f0 (1/a - 1/b))`.
pub fn z_limit(m: &Model, z: f64, sigma: f64, a: f64, b: f64) -> Result<f64, TransformError> {
    LimitZ::new(m, sigma, a, b).z_at(z)
}

/// Laplace-domain conditional count coefficient `D^n E / (1-C)^(n+1)`.
pub fn p_nj_hat(
    ctx: &FlowContext,
    n: u32,
    sigma: f64,
    a: f64,
    b: f64,
) -> Result<f64, TransformError> {
    Ok(cde(ctx, sigma, a, b)?.p_nj_hat(n))
}

/// `n`-th Taylor coefficient of the limit `Z` at `z = 0`:
/// `B^n / (A + B)^(n+1)` with `A = sigma + f0`, `B = f0 (1/a - 1/b)`.
pub fn p_nj_limit(m: &Model, n: u32, sigma: f64, a: f64, b: f64) -> f64 {
    let big_a = sigma + m.f0;
    let big_b = m.f0 * (1.0 / a - 1.0 / b);
    big_b.powi(n as i32) / (big_a + big_b).powi(n as i32 + 1)
}

/// Mean-cycle-duration integral of the tightness bound:
/// `I = eps * int_0^ys (h/omega) U exp(-V) dx`, bounded below by `C eps`.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn i_epsilon(ctx: &FlowContext) -> Result<f64, TransformError> {
    let dens = |x: f64| {
        let u = ctx.u(x).unwrap_or(0.0);
        let v = ctx.v(x).unwrap_or(f64::INFINITY);
        ctx.model().h(x) / ctx.omega_unchecked(x) * u * (-v).exp()
    };
    let r = quad::integrate(&dens, 0.0, ctx.y_star(), ctx.quad_tol(), 0.0)
        .map_err(FlowError::from)?;
    Ok(ctx.eps() * r.value)
}
