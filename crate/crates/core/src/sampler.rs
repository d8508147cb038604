//! Exact stochastic simulation of the resetting process.
//!
//! A renewal cycle is fully determined by one Exp(1) variate `E`: the reset
//! position is `z = V^{-1}(E)` and the cycle duration `eps * U(z)`, so
//! `P(duration > t) = exp(-V(x_t))` holds exactly — there is no time
//! stepping anywhere. A cycle crosses `y_star` iff `E > V(y_star)`, which
//! makes excursion detection exact as well, and membership of `z` in a space
//! interval `[a, b]` reduces to `E in [V(a), V(b)]`.
//!
//! Replicas are independent tasks over an immutable [`FlowContext`]; replica
//! `i` draws from stream `i` of a counter-based generator, so parallel and
//! sequential runs produce identical output.

use crate::exec;
use crate::flow::FlowContext;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error(
        "only {accepted}/{attempted} replicas passed the no-jump rejection (need {required}); \
         t is too large for this eps"
    )]
    TooFewAccepted {
        accepted: u64,
        attempted: u64,
        required: u64,
    },
}

/// Reproducible RNG handle. Identical `(seed, stream_id)` reproduce identical
/// draws bit for bit, on any platform and at any thread count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    pub fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    pub fn exp_source(self) -> ExpDraws {
        ExpDraws { rng: self.rng() }
    }
}

/// Source of Exp(1) variates.
pub trait ExpSource {
    fn next_exp(&mut self) -> f64;
    /// Uniform on (0, 1); used by samplers that need raw uniforms too.
    fn next_uniform(&mut self) -> f64;
}

/// Inverse-CDF exponential draws from a ChaCha stream.
pub struct ExpDraws {
    rng: ChaCha8Rng,
}

impl ExpSource for ExpDraws {
    #[inline]
    fn next_exp(&mut self) -> f64 {
        -self.next_uniform().ln()
    }

    #[inline]
    fn next_uniform(&mut self) -> f64 {
        // 53 random bits, offset to the open interval (0, 1)
        (((self.rng.next_u64() >> 11) as f64) + 0.5) * (1.0 / 9007199254740992.0)
    }
}

/// Scripted variate source (test hook): yields the given values in order.
pub struct ScriptedExp {
    vals: Vec<f64>,
    i: usize,
}

impl ScriptedExp {
    pub fn new(vals: Vec<f64>) -> Self {
        ScriptedExp { vals, i: 0 }
    }
}

impl ExpSource for ScriptedExp {
    fn next_exp(&mut self) -> f64 {
        let v = self.vals[self.i];
        self.i += 1;
        v
    }
    fn next_uniform(&mut self) -> f64 {
        (-self.next_exp()).exp()
    }
}

/// One renewal cycle: pre-spike position and cycle duration.
#[derive(Debug, Clone, Copy)]
pub struct Cycle {
    pub z: f64,
    pub duration: f64,
}

/// Draw one cycle by hazard inversion: `z = V^{-1}(E)`, duration
/// `eps * U(z)`. Positions beyond the quadrature cut use the log-tail model
/// consistently for both members, so durations stay exact even when `z`
/// saturates at floating point resolution below `x_star`.
pub fn sample_cycle(ctx: &FlowContext, src: &mut impl ExpSource) -> Cycle {
    let e = src.next_exp();
    cycle_from_exponential(ctx, e)
}

/// Deterministic cycle map used by [`sample_cycle`]; exposed as the test hook.
pub fn cycle_from_exponential(ctx: &FlowContext, e: f64) -> Cycle {
    let z = ctx.inverse_v(e);
    let duration = ctx.dur_of_exp(e);
    Cycle { z, duration }
}

/// Ordered pre-spikes plus alternating excursion epochs.
#[derive(Debug, Clone)]
pub struct PointPattern {
    /// `(tau_i, z_i)`: reset time and position just before reset.
    pub points: Vec<(f64, f64)>,
    /// Completed `(e_odd, e_even)` pairs: crossing of `y_star`, then reset.
    pub jump_epochs: Vec<(f64, f64)>,
    /// A crossing before the horizon whose reset lies beyond it.
    pub open_excursion: Option<f64>,
    pub horizon: f64,
    pub eps: f64,
    pub seed: u64,
    pub stream_id: u64,
}

impl PointPattern {
    /// Structural invariants; panics with a diagnostic on violation.
    pub fn assert_valid(&self, ctx: &FlowContext) {
        let mut prev = 0.0;
        for &(t, x) in &self.points {
            assert!(t > prev, "pre-spike times not strictly increasing");
            assert!(
                x > 0.0 && x < ctx.x_star(),
                "pre-spike position {x} outside (0, x_star)"
            );
            prev = t;
        }
        let mut prev_even = 0.0;
        for &(odd, even) in &self.jump_epochs {
            assert!(odd >= prev_even && odd < even, "epoch interleaving broken");
            prev_even = even;
        }
        // every pre-spike above y_star is the reset closing an excursion
        for &(t, x) in &self.points {
            if x > ctx.y_star() {
                let covered = self
                    .jump_epochs
                    .iter()
                    .any(|&(_, even)| (even - t).abs() < 1e-12)
                    || self.open_excursion.is_some() && t > self.horizon;
                assert!(covered, "pre-spike above y_star at t={t} has no epoch");
            }
        }
    }
}

/// Simulate on `[0, horizon]`, recording every reset before the horizon and
/// the excursion epochs.
pub fn simulate(ctx: &FlowContext, stream: RngStream, horizon: f64) -> PointPattern {
    let mut src = stream.exp_source();
    simulate_with(ctx, &mut src, stream, horizon)
}

/// Simulation core over an arbitrary variate source (test hook).
pub fn simulate_with(
    ctx: &FlowContext,
    src: &mut impl ExpSource,
    stream: RngStream,
    horizon: f64,
) -> PointPattern {
    let mut pat = PointPattern {
        points: Vec::new(),
        jump_epochs: Vec::new(),
        open_excursion: None,
        horizon,
        eps: ctx.eps(),
        seed: stream.seed,
        stream_id: stream.stream_id,
    };
    let cross = ctx.v_y_star();
    let mut t = 0.0;
    loop {
        let e = src.next_exp();
        let cyc = cycle_from_exponential(ctx, e);
        let tau = t + cyc.duration;
        if tau <= horizon {
            pat.points.push((tau, cyc.z));
        }
        if e > cross {
            let e_odd = t + ctx.t_star();
            if tau <= horizon {
                pat.jump_epochs.push((e_odd, tau));
            } else if e_odd <= horizon {
                pat.open_excursion = Some(e_odd);
            }
        }
        t = tau;
        if t > horizon {
            return pat;
        }
    }
}

/// Sample `X_t` on a uniform time grid (cadlag: a grid point at a reset time
/// takes the new cycle's value). Visualization helper; excluded from all
/// statistical estimators.
pub fn simulate_trajectory(
    ctx: &FlowContext,
    stream: RngStream,
    horizon: f64,
    grid_n: usize,
) -> Vec<(f64, f64)> {
    let grid_n = grid_n.max(2);
    if horizon <= 0.0 {
        return vec![(0.0, 0.0)];
    }
    let mut src = stream.exp_source();
    let mut out = Vec::with_capacity(grid_n);
    let mut cycle_start = 0.0;
    let mut cycle_end = cycle_start + sample_cycle(ctx, &mut src).duration;
    for k in 0..grid_n {
        let t = horizon * k as f64 / (grid_n - 1) as f64;
        while t >= cycle_end {
            cycle_start = cycle_end;
            cycle_end = cycle_start + sample_cycle(ctx, &mut src).duration;
        }
        out.push((t, ctx.flow_at_time(t - cycle_start)));
    }
    out
}

/// First excursion of one replica: `(e_1, e_2)`.
#[inline]
fn first_excursion(ctx: &FlowContext, stream: RngStream) -> (f64, f64) {
    let mut src = stream.exp_source();
    let cross = ctx.v_y_star();
    let mut t = 0.0;
    loop {
        let e = src.next_exp();
        if e > cross {
            return (t + ctx.t_star(), t + ctx.dur_of_exp(e));
        }
        t += ctx.dur_of_exp(e);
    }
}

/// Independent replicas of the first excursion, one RNG stream per replica.
pub fn sample_e1_e2(ctx: &FlowContext, seed: u64, replicas: u64) -> Vec<(f64, f64)> {
    exec::map_replicas(replicas, |i| first_excursion(ctx, RngStream::new(seed, i)))
}

/// Rectangle `(s1, s2] x [a, b]`: half-open in time, closed in space.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct Rect {
    pub s1: f64,
    pub s2: f64,
    pub a: f64,
    pub b: f64,
}

/// Precomputed `E`-thresholds for rectangle membership.
struct RectThresholds {
    s1: Vec<f64>,
    s2: Vec<f64>,
    e_lo: Vec<f64>,
    e_hi: Vec<f64>,
}

impl RectThresholds {
    fn new(ctx: &FlowContext, rects: &[Rect]) -> Self {
        let bound = |x: f64| -> f64 {
            if x <= 0.0 {
                0.0
            } else if x >= ctx.x_star() {
                f64::INFINITY
            } else {
                ctx.v(x).expect("rectangle bound inside [0, x_star)")
            }
        };
        RectThresholds {
            s1: rects.iter().map(|r| r.s1).collect(),
            s2: rects.iter().map(|r| r.s2).collect(),
            e_lo: rects.iter().map(|r| bound(r.a)).collect(),
            e_hi: rects
                .iter()
                .map(|r| if r.b >= 1.0 { f64::INFINITY } else { bound(r.b) })
                .collect(),
        }
    }
}

/// One no-jump window replica: `Some(counts)` if `e_1 >= t`, else `None`.
/// When `times` is given, matched `(rect, time)` pairs are appended.
fn window_replica(
    ctx: &FlowContext,
    stream: RngStream,
    t: f64,
    th: &RectThresholds,
    mut times: Option<&mut Vec<(usize, f64)>>,
) -> Option<Vec<u32>> {
    let mut src = stream.exp_source();
    let cross = ctx.v_y_star();
    let mut counts = vec![0u32; th.s1.len()];
    let mut now = 0.0;
    loop {
        let e = src.next_exp();
        if e > cross {
            // crossing at now + T_star; accepted iff it happens at or after t
            return if now + ctx.t_star() >= t {
                Some(counts)
            } else {
                None
            };
        }
        let tau = now + ctx.dur_of_exp(e);
        if tau > t {
            return Some(counts);
        }
        for (r, c) in counts.iter_mut().enumerate() {
            if tau > th.s1[r] && tau <= th.s2[r] && e >= th.e_lo[r] && e <= th.e_hi[r] {
                *c += 1;
                if let Some(v) = times.as_deref_mut() {
                    v.push((r, tau));
                }
            }
        }
        now = tau;
    }
}

/// Per-replica rectangle counts conditioned on no jump before `t`, by
/// rejection on `e_1 >= t`.
#[derive(Debug, Clone)]
pub struct CountMatrix {
    /// `counts[k][r]`: count of accepted replica `k` in rectangle `r`.
    pub counts: Vec<Vec<u32>>,
    pub attempted: u64,
    pub acceptance_rate: f64,
}

/// Attempt `replicas` replicas; keep those with `e_1 >= t`.
pub fn conditional_counts(
    ctx: &FlowContext,
    seed: u64,
    t: f64,
    rects: &[Rect],
    replicas: u64,
) -> Result<CountMatrix, SamplerError> {
    let th = RectThresholds::new(ctx, rects);
    let rows = exec::map_replicas(replicas, |i| {
        window_replica(ctx, RngStream::new(seed, i), t, &th, None)
    });
    let counts: Vec<Vec<u32>> = rows.into_iter().flatten().collect();
    let accepted = counts.len() as u64;
    if accepted < 100 {
        return Err(SamplerError::TooFewAccepted {
            accepted,
            attempted: replicas,
            required: 100,
        });
    }
    Ok(CountMatrix {
        acceptance_rate: accepted as f64 / replicas as f64,
        counts,
        attempted: replicas,
    })
}

const BATCH: u64 = 4096;

/// Attempt replicas in deterministic batches until `target_accepted` are
/// accepted (or `max_attempts` exhausted); returns exactly the first
/// `target_accepted` accepted replicas in stream order.
pub fn conditional_counts_target(
    ctx: &FlowContext,
    seed: u64,
    t: f64,
    rects: &[Rect],
    target_accepted: u64,
    max_attempts: u64,
) -> Result<CountMatrix, SamplerError> {
    let th = RectThresholds::new(ctx, rects);
    let mut counts: Vec<Vec<u32>> = Vec::with_capacity(target_accepted as usize);
    let mut attempted = 0u64;
    while (counts.len() as u64) < target_accepted && attempted < max_attempts {
        let n = BATCH.min(max_attempts - attempted);
        let rows = exec::map_replicas(n, |i| {
            window_replica(ctx, RngStream::new(seed, attempted + i), t, &th, None)
        });
        counts.extend(rows.into_iter().flatten());
        attempted += n;
    }
    if (counts.len() as u64) < target_accepted {
        return Err(SamplerError::TooFewAccepted {
            accepted: counts.len() as u64,
            attempted,
            required: target_accepted,
        });
    }
    counts.truncate(target_accepted as usize);
    Ok(CountMatrix {
        acceptance_rate: target_accepted as f64 / attempted as f64,
        counts,
        attempted,
    })
}

/// Matched `(rectangle index, time)` pairs per accepted replica.
pub type MatchedTimes = Vec<Vec<(usize, f64)>>;

/// Like [`conditional_counts_target`], also returning the matched
/// `(rect, time)` pairs per accepted replica (for coincidence checks).
pub fn conditional_counts_with_times(
    ctx: &FlowContext,
    seed: u64,
    t: f64,
    rects: &[Rect],
    target_accepted: u64,
    max_attempts: u64,
) -> Result<(CountMatrix, MatchedTimes), SamplerError> {
    let th = RectThresholds::new(ctx, rects);
    let mut counts: Vec<Vec<u32>> = Vec::new();
    let mut times: MatchedTimes = Vec::new();
    let mut attempted = 0u64;
    while (counts.len() as u64) < target_accepted && attempted < max_attempts {
        let n = BATCH.min(max_attempts - attempted);
        let rows = exec::map_replicas(n, |i| {
            let mut tv = Vec::new();
            let c = window_replica(ctx, RngStream::new(seed, attempted + i), t, &th, Some(&mut tv));
            c.map(|c| (c, tv))
        });
        for (c, tv) in rows.into_iter().flatten() {
            counts.push(c);
            times.push(tv);
        }
        attempted += n;
    }
    if (counts.len() as u64) < target_accepted {
        return Err(SamplerError::TooFewAccepted {
            accepted: counts.len() as u64,
            attempted,
            required: target_accepted,
        });
    }
    counts.truncate(target_accepted as usize);
    times.truncate(target_accepted as usize);
    Ok((
        CountMatrix {
            acceptance_rate: target_accepted as f64 / attempted as f64,
            counts,
            attempted,
        },
        times,
    ))
}

/// Unconditioned first-window counts: pre-spikes of `Q_0` (strictly before
/// `e_1`) within `(0, t]`, per replica.
pub fn q0_counts(ctx: &FlowContext, seed: u64, t: f64, rects: &[Rect], replicas: u64) -> Vec<Vec<u32>> {
    let th = RectThresholds::new(ctx, rects);
    let cross = ctx.v_y_star();
    exec::map_replicas(replicas, |i| {
        let mut src = RngStream::new(seed, i).exp_source();
        let mut counts = vec![0u32; th.s1.len()];
        let mut now = 0.0;
        loop {
            let e = src.next_exp();
            if e > cross {
                // reset at/after e_1: outside Q_0
                return counts;
            }
            let tau = now + ctx.dur_of_exp(e);
            if tau > t {
                return counts;
            }
            for (r, c) in counts.iter_mut().enumerate() {
                if tau > th.s1[r] && tau <= th.s2[r] && e >= th.e_lo[r] && e <= th.e_hi[r] {
                    *c += 1;
                }
            }
            now = tau;
        }
    })
}

/// Number of replicas with `e_1 >= r` and exactly `n` pre-spikes in
/// `(0, r] x [a, b]` (the empirical `Phi_n`).
pub fn phi_event_count(
    ctx: &FlowContext,
    seed: u64,
    n: u32,
    r: f64,
    a: f64,
    b: f64,
    replicas: u64,
) -> u64 {
    let rects = [Rect {
        s1: 0.0,
        s2: r,
        a,
        b,
    }];
    let th = RectThresholds::new(ctx, &rects);
    let hits = exec::map_replicas(replicas, |i| {
        window_replica(ctx, RngStream::new(seed, i), r, &th, None)
            .map(|c| c[0] == n)
            .unwrap_or(false)
    });
    hits.into_iter().filter(|&h| h).count() as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{FlowContext, FlowParams};
    use crate::model::default_linear;

    fn ctx(eps: f64) -> FlowContext {
        FlowContext::new(default_linear(), eps, FlowParams::default()).unwrap()
    }

    #[test]
    fn forced_zero_exponential() {
        let c = ctx(1e-2);
        let mut src = ScriptedExp::new(vec![0.0]);
        let cyc = sample_cycle(&c, &mut src);
        assert_eq!(cyc.z, 0.0);
        assert_eq!(cyc.duration, 0.0);
    }

    #[test]
    fn forced_crossing_gives_e1_at_t_star() {
        let c = ctx(1e-2);
        let mut src = ScriptedExp::new(vec![c.v_y_star() + 1.0, 0.1, 0.1, 50.0]);
        let pat = simulate_with(&c, &mut src, RngStream::new(0, 0), 10.0);
        assert!(!pat.jump_epochs.is_empty());
        let (e1, e2) = pat.jump_epochs[0];
        assert!((e1 - c.t_star()).abs() < 1e-15);
        assert!(e2 > e1);
    }

    #[test]
    fn horizon_before_first_reset_gives_empty_pattern() {
        let c = ctx(1e-2);
        // typical first cycle lasts ~eps; a horizon far below that is empty
        let pat = simulate(&c, RngStream::new(7, 0), 1e-12);
        assert!(pat.points.is_empty());
    }

    #[test]
    fn pattern_invariants_hold() {
        let c = ctx(1e-2);
        for s in 0..20 {
            let pat = simulate(&c, RngStream::new(42, s), 5.0);
            pat.assert_valid(&c);
            // simple points
            for w in pat.points.windows(2) {
                assert!(w[1].0 > w[0].0);
            }
        }
    }

    #[test]
    fn reproducible_bit_for_bit() {
        let c = ctx(1e-2);
        let a = simulate(&c, RngStream::new(9, 3), 8.0);
        let b = simulate(&c, RngStream::new(9, 3), 8.0);
        assert_eq!(a.points, b.points);
        assert_eq!(a.jump_epochs, b.jump_epochs);
        let d = simulate(&c, RngStream::new(9, 4), 8.0);
        assert!(a.points != d.points, "different streams should differ");
    }

    #[test]
    fn survival_of_duration_matches_exp_minus_v() {
        // P(duration > T_c(c)) = exp(-V(c)) within 3 binomial sigma
        let c = ctx(1e-3);
        let n = 200_000u64;
        let mut src = RngStream::new(123, 0).exp_source();
        let mut thresholds = Vec::new();
        for k in 1..=9 {
            let x = 0.1 * k as f64;
            thresholds.push((c.t_c(x).unwrap(), (-c.v(x).unwrap()).exp()));
        }
        let mut hits = vec![0u64; thresholds.len()];
        for _ in 0..n {
            let cyc = sample_cycle(&c, &mut src);
            for (j, &(tc, _)) in thresholds.iter().enumerate() {
                if cyc.duration > tc {
                    hits[j] += 1;
                }
            }
        }
        for (j, &(_, p)) in thresholds.iter().enumerate() {
            let emp = hits[j] as f64 / n as f64;
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            assert!(
                (emp - p).abs() <= 3.5 * sigma.max(1e-9),
                "threshold {j}: {emp} vs {p} (sigma {sigma})"
            );
        }
    }

    #[test]
    fn position_cdf_matches_hazard_law() {
        // empirical CDF of z against 1 - exp(-V(x)), asymptotic KS p-value
        let c = ctx(1e-3);
        let n = 200_000;
        let mut src = RngStream::new(31337, 0).exp_source();
        let zs: Vec<f64> = (0..n).map(|_| sample_cycle(&c, &mut src).z).collect();
        let rep = crate::stats::ks_test(
            &zs,
            |x: f64| {
                if x <= 0.0 {
                    0.0
                } else if x >= c.x_star() {
                    1.0
                } else {
                    1.0 - (-c.v(x).unwrap()).exp()
                }
            },
            "z-cdf",
        )
        .unwrap();
        assert!(rep.pass, "KS D = {} p = {}", rep.statistic, rep.threshold_or_pvalue);
    }

    #[test]
    fn e1_e2_basic_statistics() {
        // coarse check at eps = 1e-2: mean e1 near 1/rate with rate ~ f0/y*
        let c = ctx(1e-2);
        let samples = sample_e1_e2(&c, 99, 4000);
        let mean_e1: f64 = samples.iter().map(|s| s.0).sum::<f64>() / 4000.0;
        let rate = (-c.v_y_star()).exp() / {
            // mean cycle duration, truncated at T_star
            let tv = crate::transforms::cde(&c, 0.0, 0.5, 0.5).unwrap();
            tv.e
        };
        assert!(
            (mean_e1 * rate - 1.0).abs() < 0.1,
            "mean {mean_e1}, predicted {}",
            1.0 / rate
        );
        for &(e1, e2) in &samples {
            assert!(e2 > e1, "excursion must end after it starts");
            assert!(e1 >= c.t_star());
        }
    }

    #[test]
    fn conditional_counts_rejects_and_counts() {
        let c = ctx(1e-2);
        let rects = [
            Rect {
                s1: 0.0,
                s2: 1.0,
                a: 0.3,
                b: 0.6,
            },
            Rect {
                s1: 0.0,
                s2: 1.0,
                a: 0.0,
                b: 1.0,
            },
        ];
        let m = conditional_counts(&c, 5, 1.0, &rects, 2000).unwrap();
        assert!(m.acceptance_rate > 0.0 && m.acceptance_rate < 1.0);
        for row in &m.counts {
            assert!(row[0] <= row[1], "sub-rectangle counts must nest");
        }
        // empty rectangle a = b carries zero mass almost surely
        let rects = [Rect {
            s1: 0.0,
            s2: 1.0,
            a: 0.5,
            b: 0.5,
        }];
        let m = conditional_counts(&c, 5, 1.0, &rects, 500).unwrap();
        assert!(m.counts.iter().all(|r| r[0] == 0));
    }

    #[test]
    fn too_few_accepted_error() {
        let c = ctx(1e-2);
        let rects = [Rect {
            s1: 0.0,
            s2: 40.0,
            a: 0.5,
            b: 1.0,
        }];
        // t = 40 with e1 ~ Exp(~1.4): acceptance ~ e^-56, nothing survives
        let err = conditional_counts(&c, 5, 40.0, &rects, 300).unwrap_err();
        assert!(matches!(err, SamplerError::TooFewAccepted { .. }));
    }

    #[test]
    fn target_driver_is_deterministic_and_exact() {
        let c = ctx(1e-2);
        let rects = [Rect {
            s1: 0.0,
            s2: 1.0,
            a: 0.5,
            b: 1.0,
        }];
        let a = conditional_counts_target(&c, 11, 1.0, &rects, 500, 100_000).unwrap();
        let b = conditional_counts_target(&c, 11, 1.0, &rects, 500, 100_000).unwrap();
        assert_eq!(a.counts, b.counts);
        assert_eq!(a.counts.len(), 500);
    }

    #[test]
    fn residual_lifetime_bounded_by_t_star() {
        // conditioned on e1 >= t, the first reset after s <= t - T_star
        // occurs within T_star of s (no-jump cycles are shorter than T_star)
        let c = ctx(1e-2);
        let t = 1.0;
        let s = 0.5;
        let mut checked = 0;
        for id in 0..2000u64 {
            let pat = simulate(&c, RngStream::new(77, id), t);
            let crossed_before_t = pat
                .jump_epochs
                .iter()
                .any(|&(odd, _)| odd < t)
                || pat.open_excursion.map(|o| o < t).unwrap_or(false);
            if crossed_before_t {
                continue;
            }
            checked += 1;
            if let Some(&(tau, _)) = pat.points.iter().find(|&&(tau, _)| tau >= s) {
                assert!(
                    tau - s <= c.t_star(),
                    "residual lifetime {} > T_star {}",
                    tau - s,
                    c.t_star()
                );
            }
        }
        assert!(checked > 100, "rejection left too few replicas");
    }

    #[test]
    fn trajectory_grid_conventions() {
        let c = ctx(1e-2);
        assert_eq!(simulate_trajectory(&c, RngStream::new(1, 0), 0.0, 10), vec![(0.0, 0.0)]);
        let traj = simulate_trajectory(&c, RngStream::new(1, 0), 2.0, 101);
        assert_eq!(traj.len(), 101);
        assert_eq!(traj[0], (0.0, 0.0));
        for &(_, x) in &traj {
            assert!((0.0..c.x_star()).contains(&x));
        }
    }

    #[test]
    fn phi_counts_sane() {
        let c = ctx(1e-2);
        let total = 2000;
        let n0 = phi_event_count(&c, 3, 0, 0.5, 0.5, 1.0, total);
        let n1 = phi_event_count(&c, 3, 1, 0.5, 0.5, 1.0, total);
        assert!(n0 > 0 && n0 + n1 <= total);
    }
}
