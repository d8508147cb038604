//! Samplers for the limiting objects: the two-state background chain and the
//! decorated Poisson point process whose spatial intensity is proportional
//! to `dx / x^2`.
//!
//! The intensity constant is a run parameter. The generating-function
//! derivation gives conditional rate `f0 * (1/a - 1/b)` (constant `f0`);
//! the alternative `f0^2` printed elsewhere is selectable so the comparison
//! experiment can adjudicate the two empirically.

use crate::model::Model;
use crate::sampler::{ExpSource, RngStream};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LimitError {
    #[error("invalid interval [{a}, {b}]: need 0 < a <= b <= 1")]
    Domain { a: f64, b: f64 },
}

/// Path of the two-state chain started in state 0, holding with rate `f0`
/// in state 0 and `|f1|` in state 1.
#[derive(Debug, Clone)]
pub struct BarChainPath {
    pub jump_times: Vec<f64>,
    pub horizon: f64,
}

impl BarChainPath {
    /// State at time `t` (0-based alternation from state 0).
    pub fn state(&self, t: f64) -> u8 {
        (self.jump_times.partition_point(|&s| s <= t) % 2) as u8
    }

    /// Total time spent in state 0 before the horizon.
    pub fn state0_time(&self) -> f64 {
        let mut acc = 0.0;
        let mut prev = 0.0;
        for (k, &s) in self.jump_times.iter().enumerate() {
            let s = s.min(self.horizon);
            if k % 2 == 0 {
                acc += s - prev;
            }
            prev = s;
        }
        if self.jump_times.len().is_multiple_of(2) {
            acc += self.horizon - prev.min(self.horizon);
        }
        acc
    }
}

/// Alternating exponential holding times with rates `f0` and `|f1|`.
pub fn sample_bar_chain(m: &Model, stream: RngStream, horizon: f64) -> BarChainPath {
    let mut src = stream.exp_source();
    sample_bar_chain_with(m, &mut src, horizon)
}

pub fn sample_bar_chain_with(
    m: &Model,
    src: &mut impl ExpSource,
    horizon: f64,
) -> BarChainPath {
    let rates = [m.f0, m.f1.abs()];
    let mut jump_times = Vec::new();
    let mut t = 0.0;
    let mut state = 0usize;
    loop {
        t += src.next_exp() / rates[state];
        if t >= horizon {
            return BarChainPath {
                jump_times,
                horizon,
            };
        }
        jump_times.push(t);
        state ^= 1;
    }
}

/// Points of the decorated process on `[0, horizon] x [delta, 1]`.
#[derive(Debug, Clone)]
pub struct LimitPattern {
    /// Time-ordered `(t, x)` points kept by the state-0 thinning.
    pub points: Vec<(f64, f64)>,
    pub delta: f64,
    pub intensity_const: f64,
}

/// Mass of the spatial intensity `dx / x^2` on `[a, b]`.
pub fn lambda_star_mass(a: f64, b: f64) -> Result<f64, LimitError> {
    if !(a > 0.0 && a <= b && b <= 1.0) {
        return Err(LimitError::Domain { a, b });
    }
    Ok(1.0 / a - 1.0 / b)
}

/// Exact Poisson sampler (product-of-uniforms, chunked for large means).
fn poisson(src: &mut impl ExpSource, mean: f64) -> u64 {
    let mut remaining = mean;
    let mut total = 0u64;
    while remaining > 0.0 {
        let chunk = remaining.min(500.0);
        remaining -= chunk;
        let limit = (-chunk).exp();
        let mut p = 1.0;
        let mut k = 0u64;
        loop {
            p *= src.next_uniform();
            if p < limit {
                break;
            }
            k += 1;
        }
        total += k;
    }
    total
}

/// Draw the Poisson points on `[0, horizon] x [delta, 1]` (inverse-CDF in
/// space: `x = 1/(1/delta - U (1/delta - 1))`), then thin by the chain
/// being in state 0.
pub fn sample_decorated_ppp(
    m: &Model,
    stream: RngStream,
    horizon: f64,
    delta: f64,
    intensity_const: f64,
) -> Result<LimitPattern, LimitError> {
    let mass = lambda_star_mass(delta, 1.0)?;
    let mut src = stream.exp_source();
    let chain = sample_bar_chain_with(m, &mut src, horizon);
    Ok(decorated_from_chain(
        &chain,
        &mut src,
        horizon,
        delta,
        intensity_const,
        mass,
    ))
}

/// Thinned Poisson points given an already-sampled background chain.
pub fn decorated_from_chain(
    chain: &BarChainPath,
    src: &mut impl ExpSource,
    horizon: f64,
    delta: f64,
    intensity_const: f64,
    mass: f64,
) -> LimitPattern {
    let n = poisson(src, intensity_const * horizon * mass);
    let mut points = Vec::new();
    for _ in 0..n {
        let t = src.next_uniform() * horizon;
        let u = src.next_uniform();
        let x = 1.0 / (1.0 / delta - u * mass);
        if chain.state(t) == 0 {
            points.push((t, x));
        }
    }
    points.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
    LimitPattern {
        points,
        delta,
        intensity_const,
    }
}

/// Decorated pattern conditioned (by rejection) on the chain having no jump
/// before `t`; returns `None` when the replica is rejected.
pub fn sample_decorated_conditional(
    m: &Model,
    stream: RngStream,
    t: f64,
    horizon: f64,
    delta: f64,
    intensity_const: f64,
) -> Result<Option<LimitPattern>, LimitError> {
    let mass = lambda_star_mass(delta, 1.0)?;
    let mut src = stream.exp_source();
    let chain = sample_bar_chain_with(m, &mut src, horizon);
    if chain.jump_times.first().map(|&s| s < t).unwrap_or(false) {
        return Ok(None);
    }
    Ok(Some(decorated_from_chain(
        &chain,
        &mut src,
        horizon,
        delta,
        intensity_const,
        mass,
    )))
}
