//! Deterministic flow machinery for a fixed `eps`.
//!
//! With `omega(x) = eps*f(x) + x*h(x)`, the flow started at 0 satisfies
//! `eps * U(x_t) = t` where `U(x) = int_0^x dy / omega(y)`, and the cycle
//! survival function is `exp(-V(x_t))` with `V(x) = int_0^x h/omega`. Both
//! integrals diverge logarithmically at the fixed point `x_star` (the
//! smallest root of `omega`), so direct quadrature is used on
//! `[0, x_star - eta_tail]` and a local linearization of `omega` at `x_star`
//! beyond that:
//!
//! ```text
//! U(x) ~ U(x_ref) + log((x_star - x_ref)/(x_star - x)) / |omega'(x_star)|
//! V(x) ~ V(x_ref) + h(x_star)/|omega'(x_star)| * log(...)
//! ```
//!
//! The context precomputes a panel decomposition of `[0, x_star - eta_tail]`
//! with prefix sums of both integrals (each panel integrated adaptively), so
//! point evaluations cost one partial panel and inversions a few safeguarded
//! Newton steps. A cubic-Hermite table of the cycle-duration map
//! `E -> eps * U(V^{-1}(E))` accelerates the Monte Carlo kernels; the table
//! is built once at construction and the context is immutable afterwards.

use crate::model::Model;
use crate::quad::{self, QuadFailure};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("argument {x} outside {domain}")]
    Domain { x: f64, domain: &'static str },
    #[error("cannot bracket x_star: omega(0) <= 0 or no sign change on [0,1]")]
    Bracket,
    #[error(transparent)]
    Quadrature(#[from] QuadFailure),
    #[error("invalid flow context: {0}")]
    InvalidContext(String),
}

/// Construction knobs. `beta` controls the crossing threshold
/// `y_star = 1 - eps^beta`; admissible range `(0, 1/2)`.
#[derive(Debug, Clone, Copy)]
pub struct FlowParams {
    pub beta: f64,
    pub quad_tol: f64,
    pub root_tol: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            beta: 0.25,
            quad_tol: 1e-10,
            root_tol: 1e-12,
        }
    }
}

impl FlowParams {
    pub fn with_beta(beta: f64) -> Self {
        FlowParams {
            beta,
            ..Default::default()
        }
    }
}

/// Terms of the small-`eps` expansions of `U` and `V` (with remainder
/// envelope `eps^(1/2-alpha)/h_inf(x) + eps^(2 alpha) * (1 or h_inf(x))`).
#[derive(Debug, Clone, Copy)]
pub struct ExpansionTerms {
    pub leading_log: f64,
    pub constant: f64,
    pub integral_correction: f64,
    pub log_x: f64,
    pub remainder_bound: f64,
}

impl ExpansionTerms {
    /// Sum of the explicit terms (everything except the remainder).
    pub fn sum(&self) -> f64 {
        self.leading_log + self.constant + self.integral_correction + self.log_x
    }
}

pub struct FlowContext {
    model: Model,
    eps: f64,
    beta: f64,
    quad_tol: f64,
    root_tol: f64,
    x_star: f64,
    y_star: f64,
    t_star: f64,
    eta_tail: f64,
    x_cut: f64,
    h_star: f64,
    omega_slope: f64, // |omega'(x_star)|
    nodes: Vec<f64>,
    u_prefix: Vec<f64>,
    v_prefix: Vec<f64>,
    u_err: f64,
    v_err: f64,
    v_y_star: f64,
    u_y_star: f64,
    // cubic-Hermite knots of E -> eps * U(V^{-1}(E)) on [0, V(x_cut)]
    dur_e: Vec<f64>,
    dur_w: Vec<f64>,
    dur_s: Vec<f64>,
}

/// Smallest root of `omega` in `(0, 1)`, by first-sign-change bisection and
/// a Newton polish. Exposed separately so invalid `(model, eps)` pairs can be
/// probed without building a context.
pub fn find_x_star(model: &Model, eps: f64, root_tol: f64) -> Result<f64, FlowError> {
    let omega = |x: f64| eps * model.f(x) + x * model.h(x);
    if omega(0.0) <= 0.0 {
        return Err(FlowError::Bracket);
    }
    const N: usize = 4096;
    let mut lo = 0.0;
    let mut hi = f64::NAN;
    for k in 1..=N {
        let x = k as f64 / N as f64;
        if omega(x) <= 0.0 {
            hi = x;
            break;
        }
        lo = x;
    }
    if hi.is_nan() {
        return Err(FlowError::Bracket);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if omega(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // polish; omega is transversal at the smallest root for admissible models
    let mut x = 0.5 * (lo + hi);
    for _ in 0..8 {
        let d = eps * model.f_prime(x) + model.h(x) + x * model.h_prime(x);
        if d == 0.0 {
            break;
        }
        let step = omega(x) / d;
        let xn = (x - step).clamp(lo, hi);
        if (xn - x).abs() <= root_tol * x.abs() {
            x = xn;
            break;
        }
        x = xn;
    }
    Ok(x)
}

impl FlowContext {
    pub fn new(model: Model, eps: f64, params: FlowParams) -> Result<Self, FlowError> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(FlowError::InvalidContext(format!(
                "eps must be in (0,1), got {eps}"
            )));
        }
        if !(params.beta > 0.0 && params.beta < 0.5) {
            return Err(FlowError::InvalidContext(format!(
                "beta must be in (0, 1/2), got {}",
                params.beta
            )));
        }
        let x_star = find_x_star(&model, eps, params.root_tol)?;
        let y_star = 1.0 - eps.powf(params.beta);
        if !(y_star > 0.0 && y_star < x_star) {
            return Err(FlowError::InvalidContext(format!(
                "y_star = {y_star} not inside (0, x_star = {x_star}); eps too large for beta"
            )));
        }
        let eta_tail = (1e-3 * (x_star - y_star)).max(1e-12);
        let x_cut = x_star - eta_tail;
        let h_star = model.h(x_star);
        let omega_slope = {
            let d = if model.has_analytic_derivatives() {
                eps * model.f_prime(x_star) + model.h(x_star) + x_star * model.h_prime(x_star)
            } else {
                let s = 1e-7;
                let om = |x: f64| eps * model.f(x) + x * model.h(x);
                (om(x_star + s) - om(x_star - s)) / (2.0 * s)
            };
            d.abs()
        };
        if omega_slope == 0.0 || h_star <= 0.0 {
            return Err(FlowError::InvalidContext(
                "degenerate fixed point: omega'(x_star) = 0 or h(x_star) <= 0".into(),
            ));
        }

        let nodes = panel_nodes(eps, x_star, y_star, x_cut);
        let omega = |x: f64| eps * model.f(x) + x * model.h(x);
        let mut u_prefix = Vec::with_capacity(nodes.len());
        let mut v_prefix = Vec::with_capacity(nodes.len());
        let mut u_err = 0.0;
        let mut v_err = 0.0;
        u_prefix.push(0.0);
        v_prefix.push(0.0);
        for w in nodes.windows(2) {
            let (a, b) = (w[0], w[1]);
            let ru = quad::integrate(&|y| 1.0 / omega(y), a, b, params.quad_tol, 0.0)?;
            let rv = quad::integrate(&|y| model.h(y) / omega(y), a, b, params.quad_tol, 0.0)?;
            u_prefix.push(u_prefix.last().unwrap() + ru.value);
            v_prefix.push(v_prefix.last().unwrap() + rv.value);
            u_err += ru.err_est;
            v_err += rv.err_est;
        }

        let iy = nodes
            .iter()
            .position(|&n| n == y_star)
            .expect("y_star is a panel node");
        let u_y_star = u_prefix[iy];
        let v_y_star = v_prefix[iy];

        let mut ctx = FlowContext {
            model,
            eps,
            beta: params.beta,
            quad_tol: params.quad_tol,
            root_tol: params.root_tol,
            x_star,
            y_star,
            t_star: eps * u_y_star,
            eta_tail,
            x_cut,
            h_star,
            omega_slope,
            nodes,
            u_prefix,
            v_prefix,
            u_err,
            v_err,
            v_y_star,
            u_y_star,
            dur_e: Vec::new(),
            dur_w: Vec::new(),
            dur_s: Vec::new(),
        };
        ctx.build_dur_table()?;
        Ok(ctx)
    }

    pub fn model(&self) -> &Model {
        &self.model
    }
    pub fn eps(&self) -> f64 {
        self.eps
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn quad_tol(&self) -> f64 {
        self.quad_tol
    }
    pub fn root_tol(&self) -> f64 {
        self.root_tol
    }
    pub fn x_star(&self) -> f64 {
        self.x_star
    }
    pub fn y_star(&self) -> f64 {
        self.y_star
    }
    /// `T_star = eps * U(y_star)`, the deterministic time to reach `y_star`.
    pub fn t_star(&self) -> f64 {
        self.t_star
    }
    /// `V(y_star)`: a cycle crosses `y_star` iff its Exp(1) variate exceeds this.
    pub fn v_y_star(&self) -> f64 {
        self.v_y_star
    }
    pub fn u_y_star(&self) -> f64 {
        self.u_y_star
    }
    /// Largest `eps` (bisected to 1% in log scale) for which
    /// `0 < y_star <= x_star`.
    pub fn eps_threshold(&self) -> f64 {
        let ok = |le: f64| {
            let eps = 10f64.powf(le);
            let ys = 1.0 - eps.powf(self.beta);
            match find_x_star(&self.model, eps, self.root_tol) {
                Ok(xs) => ys > 0.0 && ys <= xs,
                Err(_) => false,
            }
        };
        let (mut lo, mut hi) = (self.eps.log10().min(-14.0), 0.0);
        if ok(hi) {
            return 1.0;
        }
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        10f64.powf(lo)
    }

    #[inline]
    pub(crate) fn omega_unchecked(&self, x: f64) -> f64 {
        self.eps * self.model.f(x) + x * self.model.h(x)
    }

    /// `omega(x) = eps f(x) + x h(x)` on `[0, 1]`.
    pub fn omega(&self, x: f64) -> Result<f64, FlowError> {
        if !(0.0..=1.0).contains(&x) {
            return Err(FlowError::Domain { x, domain: "[0,1]" });
        }
        Ok(self.omega_unchecked(x))
    }

    fn locate_node(&self, x: f64) -> usize {
        let i = self.nodes.partition_point(|&n| n <= x);
        i.saturating_sub(1).min(self.nodes.len() - 2)
    }

    fn partial(&self, base: usize, x: f64, want_v: bool) -> Result<f64, FlowError> {
        let a = self.nodes[base];
        let scale = if want_v {
            *self.v_prefix.last().unwrap()
        } else {
            *self.u_prefix.last().unwrap()
        };
        let r = if want_v {
            quad::integrate(
                &|y| self.model.h(y) / self.omega_unchecked(y),
                a,
                x,
                self.quad_tol,
                self.quad_tol * scale,
            )?
        } else {
            quad::integrate(
                &|y| 1.0 / self.omega_unchecked(y),
                a,
                x,
                self.quad_tol,
                self.quad_tol * scale,
            )?
        };
        Ok(r.value)
    }

    /// `U(x)` on `[0, x_star)`; log-tail model beyond `x_star - eta_tail`.
    pub fn u(&self, x: f64) -> Result<f64, FlowError> {
        if !(0.0..self.x_star).contains(&x) {
            return Err(FlowError::Domain {
                x,
                domain: "[0, x_star)",
            });
        }
        if x > self.x_cut {
            let u_cut = *self.u_prefix.last().unwrap();
            return Ok(u_cut + (self.eta_tail / (self.x_star - x)).ln() / self.omega_slope);
        }
        let i = self.locate_node(x);
        Ok(self.u_prefix[i] + self.partial(i, x, false)?)
    }

    /// `V(x)` on `[0, x_star)`; log-tail model beyond `x_star - eta_tail`.
    pub fn v(&self, x: f64) -> Result<f64, FlowError> {
        if !(0.0..self.x_star).contains(&x) {
            return Err(FlowError::Domain {
                x,
                domain: "[0, x_star)",
            });
        }
        if x > self.x_cut {
            let v_cut = *self.v_prefix.last().unwrap();
            return Ok(v_cut
                + self.h_star / self.omega_slope * (self.eta_tail / (self.x_star - x)).ln());
        }
        let i = self.locate_node(x);
        Ok(self.v_prefix[i] + self.partial(i, x, true)?)
    }

    /// Quadrature error estimates accumulated over the panel tables `(U, V)`.
    pub fn table_err_est(&self) -> (f64, f64) {
        (self.u_err, self.v_err)
    }

    fn invert_prefix(&self, target: f64, want_v: bool) -> f64 {
        let prefix = if want_v { &self.v_prefix } else { &self.u_prefix };
        if target <= 0.0 {
            return 0.0;
        }
        let i = prefix.partition_point(|&p| p <= target) - 1;
        let i = i.min(self.nodes.len() - 2);
        let (mut lo, mut hi) = (self.nodes[i], self.nodes[i + 1]);
        let (plo, phi) = (prefix[i], prefix[i + 1]);
        let rem = target - plo;
        // initial guess by linear interpolation of the prefix table
        let mut x = if phi > plo {
            lo + (hi - lo) * (rem / (phi - plo)).clamp(0.0, 1.0)
        } else {
            0.5 * (lo + hi)
        };
        for _ in 0..80 {
            let g = match self.partial(i, x, want_v) {
                Ok(p) => p - rem,
                Err(_) => break,
            };
            if g > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let om = self.omega_unchecked(x);
            let deriv = if want_v { self.model.h(x) / om } else { 1.0 / om };
            let mut xn = x - g / deriv;
            if !(xn > lo && xn < hi) {
                xn = 0.5 * (lo + hi);
            }
            if (xn - x).abs() <= self.root_tol {
                return xn;
            }
            x = xn;
        }
        x
    }

    /// Position of the deterministic flow at time `t >= 0`; saturates toward
    /// `x_star` for large `t`.
    pub fn flow_at_time(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let target = t / self.eps;
        let u_cut = *self.u_prefix.last().unwrap();
        if target >= u_cut {
            let x = self.x_star - self.eta_tail * (-(target - u_cut) * self.omega_slope).exp();
            return clamp_below(x, self.x_star);
        }
        self.invert_prefix(target, false)
    }

    /// `V^{-1}(E)`: the hazard-inversion position for cumulative hazard `E`.
    pub fn inverse_v(&self, e: f64) -> f64 {
        if e <= 0.0 {
            return 0.0;
        }
        let v_cut = *self.v_prefix.last().unwrap();
        if e >= v_cut {
            let l = (e - v_cut) * self.omega_slope / self.h_star;
            let x = self.x_star - self.eta_tail * (-l).exp();
            return clamp_below(x, self.x_star);
        }
        self.invert_prefix(e, true)
    }

    /// Hitting time of `c`: `T_c = eps * U(c)`.
    pub fn t_c(&self, c: f64) -> Result<f64, FlowError> {
        if !(c > 0.0 && c < self.x_star) {
            return Err(FlowError::Domain {
                x: c,
                domain: "(0, x_star)",
            });
        }
        Ok(self.eps * self.u(c)?)
    }

    /// Cycle survival `P(sigma > t) = exp(-V(x_t))`.
    pub fn survival_mu(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        let target = t / self.eps;
        let u_cut = *self.u_prefix.last().unwrap();
        if target >= u_cut {
            let v_cut = *self.v_prefix.last().unwrap();
            return (-(v_cut + self.h_star * (target - u_cut))).exp();
        }
        let x = self.invert_prefix(target, false);
        match self.v(x) {
            Ok(v) => (-v).exp(),
            Err(_) => 0.0,
        }
    }

    /// Terms of the `U` expansion at `x` with exponent split `alpha`.
    pub fn u_expansion(&self, x: f64, alpha: f64) -> Result<ExpansionTerms, FlowError> {
        check_expansion_args(x, alpha)?;
        let m = &self.model;
        let hf = m.h_inf(x);
        Ok(ExpansionTerms {
            leading_log: -self.eps.ln() / m.h0,
            constant: (m.h0 / m.f0).ln() / m.h0,
            integral_correction: correction_integral(m, x, self.quad_tol)?,
            log_x: x.ln() / m.h0,
            remainder_bound: self.eps.powf(0.5 - alpha) / hf + self.eps.powf(2.0 * alpha),
        })
    }

    /// Terms of the `V` expansion at `x` with exponent split `alpha`.
    pub fn v_expansion(&self, x: f64, alpha: f64) -> Result<ExpansionTerms, FlowError> {
        check_expansion_args(x, alpha)?;
        let m = &self.model;
        let hf = m.h_inf(x);
        Ok(ExpansionTerms {
            leading_log: -self.eps.ln(),
            constant: (m.h0 / m.f0).ln(),
            integral_correction: 0.0,
            log_x: x.ln(),
            remainder_bound: self.eps.powf(0.5 - alpha) / hf + self.eps.powf(2.0 * alpha) * hf,
        })
    }

    /// Fast cycle-duration map `E -> eps * U(V^{-1}(E))`, exact to the table
    /// tolerance (about 1e-12 relative); closed-form linear tail beyond the
    /// quadrature cut.
    #[inline]
    pub fn dur_of_exp(&self, e: f64) -> f64 {
        if e <= 0.0 {
            return 0.0;
        }
        let e_cut = *self.dur_e.last().unwrap();
        if e >= e_cut {
            let t_cut = *self.dur_w.last().unwrap();
            return t_cut + self.eps * (e - e_cut) / self.h_star;
        }
        let i = self.dur_e.partition_point(|&k| k <= e) - 1;
        let (e0, e1) = (self.dur_e[i], self.dur_e[i + 1]);
        let h = e1 - e0;
        let t = (e - e0) / h;
        let (w0, w1) = (self.dur_w[i], self.dur_w[i + 1]);
        let (s0, s1) = (self.dur_s[i], self.dur_s[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * w0
            + (t3 - 2.0 * t2 + t) * h * s0
            + (-2.0 * t3 + 3.0 * t2) * w1
            + (t3 - t2) * h * s1
    }

    fn build_dur_table(&mut self) -> Result<(), FlowError> {
        let mut e = Vec::new();
        let mut w = Vec::new();
        let mut s = Vec::new();
        for (i, &x) in self.nodes.iter().enumerate() {
            e.push(self.v_prefix[i]);
            w.push(self.eps * self.u_prefix[i]);
            s.push(self.eps / self.model.h(x));
        }
        let t_cut = *w.last().unwrap();
        let tol = 1e-12 * t_cut.max(self.eps);

        let hermite = |e0: f64, e1: f64, w0: f64, w1: f64, s0: f64, s1: f64, em: f64| {
            let h = e1 - e0;
            let t = (em - e0) / h;
            let (t2, t3) = (t * t, t * t * t);
            (2.0 * t3 - 3.0 * t2 + 1.0) * w0
                + (t3 - 2.0 * t2 + t) * h * s0
                + (-2.0 * t3 + 3.0 * t2) * w1
                + (t3 - t2) * h * s1
        };

        let mut out_e = vec![e[0]];
        let mut out_w = vec![w[0]];
        let mut out_s = vec![s[0]];
        for i in 0..e.len() - 1 {
            // refine each knot interval until the Hermite interpolant matches
            // the exact map at midpoints
            let mut stack = vec![(e[i], e[i + 1], w[i], w[i + 1], s[i], s[i + 1], 0u32)];
            let mut accepted: Vec<(f64, f64, f64)> = Vec::new();
            while let Some((ea, eb, wa, wb, sa, sb, depth)) = stack.pop() {
                let em = 0.5 * (ea + eb);
                if eb - ea < 1e-13 || depth >= 16 {
                    accepted.push((eb, wb, sb));
                    continue;
                }
                let xm = self.invert_prefix(em, true);
                let base = self.locate_node(xm);
                let wm = self.eps * (self.u_prefix[base] + self.partial(base, xm, false)?);
                let sm = self.eps / self.model.h(xm);
                if (hermite(ea, eb, wa, wb, sa, sb, em) - wm).abs() <= tol {
                    accepted.push((eb, wb, sb));
                } else {
                    // LIFO: push right half first so the left half is
                    // processed (and emitted) first
                    stack.push((em, eb, wm, wb, sm, sb, depth + 1));
                    stack.push((ea, em, wa, wm, sa, sm, depth + 1));
                }
            }
            for (ee, ww, ss) in accepted {
                out_e.push(ee);
                out_w.push(ww);
                out_s.push(ss);
            }
        }
        debug_assert!(out_e.windows(2).all(|p| p[1] > p[0]));
        self.dur_e = out_e;
        self.dur_w = out_w;
        self.dur_s = out_s;
        Ok(())
    }
}

fn clamp_below(x: f64, bound: f64) -> f64 {
    if x < bound {
        x
    } else {
        // next representable value strictly below the fixed point
        f64::from_bits(bound.to_bits() - 1)
    }
}

fn check_expansion_args(x: f64, alpha: f64) -> Result<(), FlowError> {
    if !(x > 0.0 && x < 1.0) {
        return Err(FlowError::Domain { x, domain: "(0,1)" });
    }
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(FlowError::Domain {
            x: alpha,
            domain: "(0,1/2)",
        });
    }
    Ok(())
}

/// Panel breakpoints: geometric refinement at scale `eps` near 0 (the
/// boundary layer) and geometric approach to `x_star` from below, with
/// `y_star` and `x_cut` as explicit nodes.
fn panel_nodes(eps: f64, x_star: f64, y_star: f64, x_cut: f64) -> Vec<f64> {
    let mid = 0.5 * x_star;
    let mut nodes = vec![0.0];
    let mut a = (eps / 8.0).min(mid / 2.0);
    while a < mid {
        nodes.push(a);
        a *= 2.0;
    }
    nodes.push(mid);
    let mut g = (x_star - mid) / 2.0;
    while x_star - g < x_cut {
        nodes.push(x_star - g);
        g /= 2.0;
    }
    nodes.push(y_star);
    nodes.push(x_cut);
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    // drop nodes that collide at floating point resolution (keep explicit
    // y_star / x_cut which were pushed last and survive dedup by exact value)
    let mut out: Vec<f64> = Vec::with_capacity(nodes.len());
    for n in nodes {
        if out.is_empty() || n - out.last().unwrap() > 1e-15 * n.abs().max(1e-300) {
            out.push(n);
        } else if n == y_star || n == x_cut {
            let last = out.len() - 1;
            out[last] = n;
        }
    }
    out
}

/// Removable-singularity integrand of the hitting-time correction:
/// `(h0 - h(y)) / (y h(y) h0)`, extended by `-h'(0)/h0^2` at `y = 0`.
fn correction_integrand(m: &Model, y: f64) -> f64 {
    if y < 1e-7 {
        -m.h_prime(0.0) / (m.h0 * m.h0)
    } else {
        (m.h0 - m.h(y)) / (y * m.h(y) * m.h0)
    }
}

/// `int_0^x [1/(y h(y)) - 1/(h0 y)] dy`.
pub fn correction_integral(m: &Model, x: f64, tol: f64) -> Result<f64, FlowError> {
    let r = quad::integrate(&|y| correction_integrand(m, y), 0.0, x, tol, tol)?;
    Ok(r.value)
}

/// Hitting-time constant `gamma(c)` in
/// `T_c = -(eps/h0) log eps + gamma(c) eps + o(eps)`.
pub fn gamma(m: &Model, c: f64, tol: f64) -> Result<f64, FlowError> {
    if !(c > 0.0 && c < 1.0) {
        return Err(FlowError::Domain {
            x: c,
            domain: "(0,1)",
        });
    }
    Ok((m.h0 / m.f0).ln() / m.h0 + correction_integral(m, c, tol)? + c.ln() / m.h0)
}
