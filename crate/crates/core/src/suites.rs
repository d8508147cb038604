//! Named verification suites.
//!
//! Each suite runs a battery of checks against one [`SuiteParams`] bundle
//! and returns deterministic reports plus CSV artifacts. The CLI maps its
//! JSON config onto `SuiteParams`; the acceptance tests call the same
//! functions with pinned parameters.

use crate::flow::{self, FlowContext, FlowParams};
use crate::io::{self, TransformRow};
use crate::limit;
use crate::model::{default_linear, Model};
use crate::sampler::{self, Rect};
use crate::stats::{self, SweepPoint, SweepSpec, TestReport};
use crate::transforms;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
    #[error(transparent)]
    Flow(#[from] flow::FlowError),
    #[error(transparent)]
    Transform(#[from] transforms::TransformError),
    #[error(transparent)]
    Sampler(#[from] sampler::SamplerError),
    #[error(transparent)]
    Stats(#[from] stats::StatsError),
    #[error(transparent)]
    Limit(#[from] limit::LimitError),
}

/// Everything a suite needs. `eps` is a strictly decreasing ladder; suites
/// that work at a single `eps` use the last entry.
#[derive(Debug, Clone)]
pub struct SuiteParams {
    pub model: Model,
    pub eps: Vec<f64>,
    pub beta: f64,
    pub seed: u64,
    /// Replicas per eps for the excursion-law suites.
    pub replicas: u64,
    /// No-jump conditioning window.
    pub t: f64,
    /// First rectangle drives the count battery; later rectangles form
    /// independence pairs `(1,2), (3,4), ...`.
    pub rects: Vec<Rect>,
    pub sigmas: Vec<f64>,
    pub zs: Vec<f64>,
    pub ab_pairs: Vec<(f64, f64)>,
    /// Accepted-replica target of the conditioned batteries.
    pub min_accepted: u64,
    pub max_attempts: u64,
    pub phi_replicas: u64,
    /// Intensity constant of the limit sampler (`None`: use `f0`).
    pub intensity_const: Option<f64>,
    pub quad_tol: f64,
    pub root_tol: f64,
    /// Relative tolerance on transform/asymptotic limits.
    pub rel_tol: f64,
    /// KS tolerance on the excursion laws.
    pub ks_tol: f64,
}

impl Default for SuiteParams {
    fn default() -> Self {
        SuiteParams {
            model: default_linear(),
            eps: vec![1e-2, 1e-3, 1e-4],
            beta: 0.49,
            seed: 42,
            replicas: 20_000,
            t: 2.0,
            rects: default_rects(),
            sigmas: vec![0.0, 0.3, 1.0, 3.0],
            zs: vec![0.0, 0.5, 1.0],
            ab_pairs: vec![(0.5, 1.0), (0.25, 0.5)],
            min_accepted: 2_000,
            max_attempts: 2_000_000,
            phi_replicas: 20_000,
            intensity_const: None,
            quad_tol: 1e-10,
            root_tol: 1e-12,
            rel_tol: 0.02,
            ks_tol: 0.02,
        }
    }
}

/// Count battery rectangle plus the two independence pairs used throughout.
pub fn default_rects() -> Vec<Rect> {
    vec![
        Rect { s1: 0.0, s2: 2.0, a: 0.5, b: 1.0 },
        Rect { s1: 0.0, s2: 1.0, a: 0.5, b: 0.7 },
        Rect { s1: 1.0, s2: 2.0, a: 0.8, b: 1.0 },
        Rect { s1: 0.0, s2: 2.0, a: 0.5, b: 0.7 },
        Rect { s1: 0.0, s2: 2.0, a: 0.8, b: 1.0 },
    ]
}

#[derive(Debug, Default)]
pub struct SuiteOutput {
    pub reports: Vec<TestReport>,
    /// `(file name, contents)` pairs.
    pub artifacts: Vec<(String, String)>,
}

impl SuiteOutput {
    pub fn all_pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }
}

pub const SUITES: [&str; 7] = [
    "e1",
    "e2",
    "counts",
    "transforms",
    "asymptotics",
    "limit-compare",
    "intensity-constant",
];

pub fn run_suite(name: &str, p: &SuiteParams) -> Result<SuiteOutput, SuiteError> {
    match name {
        "e1" => e1_suite(p),
        "e2" => e2_suite(p),
        "counts" => counts_suite(p),
        "transforms" => transforms_suite(p),
        "asymptotics" => asymptotics_suite(p),
        "limit-compare" => limit_compare_suite(p),
        "intensity-constant" => intensity_suite(p),
        other => Err(SuiteError::UnknownSuite(other.to_string())),
    }
}

pub fn context(p: &SuiteParams, eps: f64) -> Result<FlowContext, SuiteError> {
    Ok(FlowContext::new(
        p.model.clone(),
        eps,
        FlowParams {
            beta: p.beta,
            quad_tol: p.quad_tol,
            root_tol: p.root_tol,
        },
    )?)
}

fn final_eps(p: &SuiteParams) -> f64 {
    *p.eps.last().expect("eps ladder must be nonempty")
}

/// Exponential CDF with the given rate.
fn exp_cdf(rate: f64) -> impl Fn(f64) -> f64 {
    move |x: f64| {
        if x <= 0.0 {
            0.0
        } else {
            1.0 - (-rate * x).exp()
        }
    }
}

/// KS distance of the first-crossing time `e_1` against Exp(f0), per eps.
pub fn e1_suite(p: &SuiteParams) -> Result<SuiteOutput, SuiteError> {
    let mut out = SuiteOutput::default();
    let mut csv = String::from("eps,ks_e1,p_value,laplace_sigma1\n");
    let spec = SweepSpec {
        name: "e1-ks".into(),
        eps: p.eps.clone(),
        tol: p.ks_tol,
    };
    let mut rows = Vec::new();
    let mut laplace_rows = Vec::new();
    let sigma_l = 1.0;
    let laplace_lim = 1.0 / (sigma_l + p.model.f0);
    for &eps in &p.eps {
        let ctx = context(p, eps)?;
        let samples: Vec<f64> = sampler::sample_e1_e2(&ctx, p.seed, p.replicas)
            .into_iter()
            .map(|s| s.0)
            .collect();
        let rep = stats::ks_test(&samples, exp_cdf(p.model.f0), "e1-ks-point")?;
        let lap = stats::empirical_laplace(&samples, sigma_l);
        use std::fmt::Write as _;
        let _ = writeln!(
            csv,
            "{eps},{},{},{lap}",
            rep.statistic, rep.threshold_or_pvalue
        );
        rows.push(rep.statistic);
        laplace_rows.push((lap - laplace_lim).abs() / laplace_lim);
    }
    let mut iter = rows.into_iter();
    let reports = stats::convergence_sweep(&spec, |_| SweepPoint {
        discrepancy: iter.next().unwrap(),
        error_bar: 1.0 / (p.replicas as f64).sqrt(),
    })?;
    out.reports.extend(annotate(reports, p, final_eps(p)));
    // transform route to the same limit: E[int e^{-sigma t} 1_{e1 >= t} dt]
    // -> 1/(sigma + f0)
    let lap_spec = SweepSpec {
        name: "e1-laplace".into(),
        eps: p.eps.clone(),
        tol: p.rel_tol,
    };
    let mut iter = laplace_rows.into_iter();
    let reports = stats::convergence_sweep(&lap_spec, |_| SweepPoint {
        discrepancy: iter.next().unwrap(),
        error_bar: 1.0 / (p.replicas as f64).sqrt() / laplace_lim,
    })?;
    out.reports.extend(annotate(reports, p, final_eps(p)));
    out.artifacts.push(("e1_sweep.csv".into(), csv));
    Ok(out)
}

/// KS of the excursion duration `e_2 - e_1` against Exp(|f1|), per eps;
/// the raw `e_2` statistic is reported without asserting on it.
pub fn e2_suite(p: &SuiteParams) -> Result<SuiteOutput, SuiteError> {
    let mut out = SuiteOutput::default();
    let mut csv = String::from("eps,ks_e2_minus_e1,ks_e2_raw\n");
    let rate = p.model.f1.abs();
    let spec = SweepSpec {
        name: "e2-duration-ks".into(),
        eps: p.eps.clone(),
        tol: p.ks_tol,
    };
    let mut rows = Vec::new();
    for &eps in &p.eps {
        let ctx = context(p, eps)?;
        let pairs = sampler::sample_e1_e2(&ctx, p.seed.wrapping_add(1), p.replicas);
        let durations: Vec<f64> = pairs.iter().map(|&(e1, e2)| e2 - e1).collect();
        let raw: Vec<f64> = pairs.iter().map(|&(_, e2)| e2).collect();
        let d = stats::ks_statistic(&durations, exp_cdf(rate))?;
        let d_raw = stats::ks_statistic(&raw, exp_cdf(rate))?;
        use std::fmt::Write as _;
        let _ = writeln!(csv, "{eps},{d},{d_raw}");
        out.reports.push(
            TestReport::new("e2-raw-ks", d_raw, f64::NAN, true)
                .with("eps", eps)
                .with("kind", "observation")
                .with("note", "reported, not asserted: limit statement targets the post-crossing duration"),
        );
        rows.push(d);
    }
    let mut iter = rows.into_iter();
    let reports = stats::convergence_sweep(&spec, |_| SweepPoint {
        discrepancy: iter.next().unwrap(),
        error_bar: 1.0 / (p.replicas as f64).sqrt(),
    })?;
    out.reports.extend(annotate(reports, p, final_eps(p)));
    out.artifacts.push(("e2_sweep.csv".into(), csv));
    Ok(out)
}

/// Conditional count battery at the final eps: Poisson mean/GOF/dispersion
/// against the limit parameter, the `Phi_0` check, and independence across
/// the configured rectangle pairs.
pub fn counts_suite(p: &SuiteParams) -> Result<SuiteOutput, SuiteError> {
    let eps = final_eps(p);
    let ctx = context(p, eps)?;
    let mut out = SuiteOutput::default();

    let rect = p.rects[0];
    let mass = limit::lambda_star_mass(rect.a, rect.b.min(1.0))?;
    let target = p.model.f0 * (rect.s2 - rect.s1) * mass;

    let m = sampler::conditional_counts_target(
        &ctx,
        p.seed,
        p.t,
        &p.rects[..1],
        p.min_accepted,
        p.max_attempts,
    )?;
    let counts: Vec<u64> = m.counts.iter().map(|row| row[0] as u64).collect();
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<u64>() as f64 / n;
    let var = counts
        .iter()
        .map(|&c| (c as f64 - mean) * (c as f64 - mean))
        .sum::<f64>()
        / (n - 1.0);
    let se = (var / n).sqrt();
    out.reports.push(
        TestReport::new("counts/mean-vs-limit", mean, target, (mean - target).abs() <= 3.0 * se)
            .with("eps", eps)
            .with("se", se)
            .with("accepted", counts.len())
            .with("acceptance_rate", m.acceptance_rate),
    );
    let mut gof = stats::poisson_gof(&counts, target);
    gof.name = "counts/poisson-gof".into();
    gof.meta.insert("eps".into(), eps.to_string());
    out.reports.push(gof);
    let disp = var / mean;
    let z_disp = (disp - 1.0) / (2.0 / n).sqrt();
    out.reports.push(
        TestReport::new("counts/dispersion-index", disp, 1.0, z_disp.abs() <= 3.0)
            .with("eps", eps)
            .with("z", z_disp),
    );

    // Phi_0(1): joint no-jump/no-count probability
    let r = 1.0f64.min(p.t);
    let phi_emp = stats::phi_empirical(&ctx, p.seed.wrapping_add(7), 0, r, rect.a, rect.b, p.phi_replicas);
    let phi_tgt = stats::phi_target(
        &stats::PhiTarget {
            n: 0,
            f0: p.model.f0,
            mass: p.model.f0 * mass,
        },
        r,
    );
    let phi_se = (phi_tgt * (1.0 - phi_tgt) / p.phi_replicas as f64).sqrt();
    out.reports.push(
        TestReport::new(
            "counts/phi0",
            phi_emp,
            phi_tgt,
            (phi_emp - phi_tgt).abs() <= 3.0 * phi_se,
        )
        .with("eps", eps)
        .with("r", r)
        .with("se", phi_se)
        .with("replicas", p.phi_replicas),
    );

    // independence across rectangle pairs (2k+1, 2k+2)
    for (k, pair) in p.rects[1..].chunks(2).enumerate() {
        if pair.len() < 2 {
            break;
        }
        let (matrix, times) = sampler::conditional_counts_with_times(
            &ctx,
            p.seed.wrapping_add(100 + k as u64),
            p.t,
            pair,
            p.min_accepted,
            p.max_attempts,
        )?;
        let pairs: Vec<(u64, u64)> = matrix
            .counts
            .iter()
            .map(|row| (row[0] as u64, row[1] as u64))
            .collect();
        let mut coincident = 0usize;
        for row in &times {
            for (i, &(ra, ta)) in row.iter().enumerate() {
                for &(rb, tb) in &row[i + 1..] {
                    if ra != rb && ta == tb {
                        coincident += 1;
                    }
                }
            }
        }
        let mut rep = stats::independence_test(&pairs, coincident);
        rep.name = format!("counts/independence-{k}");
        rep.meta.insert("eps".into(), eps.to_string());
        out.reports.push(rep);
    }

    out.reports.push(
        TestReport::new("counts/acceptance-rate", m.acceptance_rate, (-p.model.f0 * p.t).exp(), true)
            .with("eps", eps)
            .with("kind", "observation"),
    );
    Ok(out)
}

/// Laplace-domain verification over the `(sigma, z, a, b)` grid: convergence
/// of `Z_eps` to the analytic limit, rectangle-independence at `z = 1`, and
/// the geometric-series identity.
pub fn transforms_suite(p: &SuiteParams) -> Result<SuiteOutput, SuiteError> {
    let mut out = SuiteOutput::default();
    let mut rows: Vec<TransformRow> = Vec::new();
    let mut ctxs = Vec::new();
    for &eps in &p.eps {
        ctxs.push((eps, context(p, eps)?));
    }

    for &sigma in &p.sigmas {
        for &(a, b) in &p.ab_pairs {
            let mut tvs = Vec::new();
            for (eps, ctx) in &ctxs {
                let tv = transforms::cde(ctx, sigma, a, b)?;
                tvs.push((*eps, tv));
            }
            for &z in &p.zs {
                let zl = transforms::z_limit(&p.model, z, sigma, a, b)?;
                let spec = SweepSpec {
                    name: format!("transforms/z={z},sigma={sigma},a={a},b={b}"),
                    eps: p.eps.clone(),
                    tol: p.rel_tol,
                };
                let mut pts = Vec::new();
                for &(eps, tv) in &tvs {
                    let ze = tv.z_at(z)?;
                    let rel = (ze - zl).abs() / zl.abs();
                    let denom = 1.0 - tv.c - z * tv.d;
                    let prop = tv.err_est * (1.0 + z.abs()) * (1.0 + ze.abs()) / denom;
                    // floor the bar at half the tolerance: the signed error
                    // changes sign inside the ladder for several
                    // (z, sigma, a, b) combinations (at every beta), so the
                    // absolute error is only monotone at the resolution of
                    // the tolerance itself; a rebound below tol still counts
                    // as decreasing, a genuine divergence fails both this
                    // rule and the final-value gate
                    pts.push(SweepPoint {
                        discrepancy: rel,
                        error_bar: (prop / zl.abs()).max(p.rel_tol / 2.0),
                    });
                    rows.push(TransformRow {
                        eps,
                        sigma,
                        z,
                        a,
                        b,
                        c: tv.c,
                        d: tv.d,
                        e: tv.e,
                        z_eps: ze,
                        z_limit: zl,
                        abs_err: (ze - zl).abs(),
                    });
                }
                let mut iter = pts.into_iter();
                out.reports
                    .extend(stats::convergence_sweep(&spec, |_| iter.next().unwrap())?);
            }
        }
    }

    // a,b-independence of Z(1, sigma)
    let (eps_f, ctx_f) = ctxs.last().unwrap();
    for &sigma in &p.sigmas {
        let mut vals = Vec::new();
        let mut err: f64 = 0.0;
        for &(a, b) in &p.ab_pairs {
            let tv = transforms::cde(ctx_f, sigma, a, b)?;
            vals.push(tv.z_at(1.0)?);
            err = err.max(tv.err_est);
        }
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let denom = (-ctx_f.v_y_star()).exp();
        // |Z(1)| error propagation: err/denom amplification plus slack
        let band = 20.0 * err * (1.0 + hi.abs()) / denom;
        out.reports.push(
            TestReport::new("transforms/ab-independence-z1", hi - lo, band, hi - lo <= band)
                .with("eps", *eps_f)
                .with("sigma", sigma),
        );
    }

    // series identity at the final eps
    let tv = transforms::cde(ctx_f, 0.3, 0.5, 1.0)?;
    let radius_eps = (1.0 - tv.c) / tv.d;
    let z = 0.9 * radius_eps;
    let mut sum = 0.0;
    for n in 0..=60u32 {
        sum += z.powi(n as i32) * tv.p_nj_hat(n);
    }
    let exact = tv.z_at(z)?;
    let ratio = z * tv.d / (1.0 - tv.c);
    let tail = (exact * ratio.powi(61) / (1.0 - ratio)).abs();
    out.reports.push(
        TestReport::new(
            "transforms/series-identity",
            (exact - sum).abs(),
            tail + 1e4 * tv.err_est,
            (exact - sum).abs() <= tail + 1e4 * tv.err_est,
        )
        .with("eps", *eps_f)
        .with("z", z),
    );

    out.artifacts
        .push(("transforms.csv".into(), io::transforms_csv(&rows)));
    Ok(out)
}

/// Small-eps constants of `E`, `D`, `1-C`, the expansion-lemma residual
/// fits, and the fixed-point / hitting-time trends.
pub fn asymptotics_suite(p: &SuiteParams) -> Result<SuiteOutput, SuiteError> {
    let mut out = SuiteOutput::default();
    let eps_f = final_eps(p);
    let ctx_f = context(p, eps_f)?;
    let m = &p.model;

    for &sigma in &p.sigmas {
        for &(a, b) in &p.ab_pairs {
            let mass = 1.0 / a - 1.0 / b;
            let tv = transforms::cde(&ctx_f, sigma, a, b)?;
            let e_lim = 1.0 / m.h0;
            let d_lim = m.f0 / m.h0 * mass;
            let c_lim = (sigma + m.f0 + m.f0 * mass) / m.h0;
            for (name, got, lim) in [
                ("E", tv.e / eps_f, e_lim),
                ("D", tv.d / eps_f, d_lim),
                ("1-C", (1.0 - tv.c) / eps_f, c_lim),
            ] {
                let rel = if lim != 0.0 {
                    (got - lim).abs() / lim.abs()
                } else {
                    (got - lim).abs()
                };
                out.reports.push(
                    TestReport::new(
                        format!("asymptotics/{name}[sigma={sigma},a={a},b={b}]"),
                        got,
                        lim,
                        rel <= p.rel_tol,
                    )
                    .with("eps", eps_f)
                    .with("rel_err", rel),
                );
            }
        }
    }

    // Expansion lemmas: fit the remainder constant per (lemma, x) by least
    // squares over nested eps ladders; stability under refinement and the
    // envelope shape are the acceptance conditions.
    let alpha = 1.0 / 6.0;
    let xs = [0.3, 0.7, 0.95];
    let mut exp_csv = String::from("lemma,x,eps,residual,envelope\n");
    for want_v in [false, true] {
        let lemma = if want_v { "V" } else { "U" };
        for &x in &xs {
            let mut resid = Vec::new();
            let mut env = Vec::new();
            for &eps in &p.eps {
                let ctx = context(p, eps)?;
                if x >= ctx.x_star() {
                    // the expansion point sits beyond the fixed point at
                    // this coarse eps; U/V do not exist there
                    continue;
                }
                let (value, terms) = if want_v {
                    (ctx.v(x)?, ctx.v_expansion(x, alpha)?)
                } else {
                    (ctx.u(x)?, ctx.u_expansion(x, alpha)?)
                };
                let r = (value - terms.sum()).abs();
                resid.push(r);
                env.push(terms.remainder_bound);
                use std::fmt::Write as _;
                let _ = writeln!(exp_csv, "{lemma},{x},{eps},{r},{}", terms.remainder_bound);
            }
            if resid.len() < 2 {
                out.reports.push(
                    TestReport::new(
                        format!("asymptotics/expansion-{lemma}[x={x}]"),
                        f64::NAN,
                        3.0,
                        true,
                    )
                    .with("kind", "observation")
                    .with("note", "x beyond x_star on most of this eps ladder; no fit"),
                );
                continue;
            }
            // least-squares fits over nested prefixes of the ladder
            let fit = |k: usize| -> f64 {
                let num: f64 = resid[..k].iter().zip(&env[..k]).map(|(r, b)| r * b).sum();
                let den: f64 = env[..k].iter().map(|b| b * b).sum();
                num / den
            };
            let fits: Vec<f64> = (2..=resid.len()).map(fit).collect();
            let hi = fits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = fits.iter().cloned().fold(f64::INFINITY, f64::min);
            let spread = hi / lo.max(1e-300);
            let c_full = *fits.last().unwrap();
            let envelope_ok = resid
                .iter()
                .zip(&env)
                .all(|(r, b)| *r <= 3.0 * c_full.max(lo) * b + 1e-13);
            out.reports.push(
                TestReport::new(
                    format!("asymptotics/expansion-{lemma}[x={x}]"),
                    c_full,
                    3.0,
                    spread <= 3.0 && envelope_ok,
                )
                .with("spread", spread)
                .with("alpha", alpha)
                .with("envelope_respected", envelope_ok),
            );
        }
    }
    out.artifacts.push(("expansions.csv".into(), exp_csv));

    // fixed-point location: (1 - x_star)/eps -> |f(1)| / |h'(1)|
    let target = m.f1.abs() / m.h1prime.abs();
    let spec = SweepSpec {
        name: "asymptotics/x-star-constant".into(),
        eps: p.eps.clone(),
        tol: p.rel_tol,
    };
    let mut pts = Vec::new();
    for &eps in &p.eps {
        let xs = flow::find_x_star(m, eps, p.root_tol)?;
        pts.push(SweepPoint {
            discrepancy: ((1.0 - xs) / eps - target).abs() / target,
            error_bar: 1e-7 / eps,
        });
    }
    let mut iter = pts.into_iter();
    out.reports
        .extend(stats::convergence_sweep(&spec, |_| iter.next().unwrap())?);

    // T_star growth: T_star / (-(eps/h0) log eps) -> 1 + beta. The fixed-c
    // hitting-time expansion does not extend to c = y_star(eps); the
    // correction integral contributes the extra beta.
    let spec = SweepSpec {
        name: "asymptotics/t-star-ratio".into(),
        eps: p.eps.clone(),
        tol: 0.05,
    };
    let mut pts = Vec::new();
    for &eps in &p.eps {
        let ctx = context(p, eps)?;
        let ratio = ctx.t_star() / (-(eps / m.h0) * eps.ln());
        pts.push(SweepPoint {
            discrepancy: (ratio - (1.0 + p.beta)).abs(),
            error_bar: 1e-9,
        });
    }
    let mut iter = pts.into_iter();
    out.reports
        .extend(stats::convergence_sweep(&spec, |_| iter.next().unwrap())?);

    // crossing probability normalization (Lemma B.4 flavor):
    // exp(-V(y_star)) * h0 y_star / (f0 eps) -> 1
    let spec = SweepSpec {
        name: "asymptotics/crossing-probability".into(),
        eps: p.eps.clone(),
        tol: 0.05,
    };
    let mut pts = Vec::new();
    for &eps in &p.eps {
        let ctx = context(p, eps)?;
        let v = (-ctx.v_y_star()).exp();
        pts.push(SweepPoint {
            discrepancy: (v * m.h0 * ctx.y_star() / (m.f0 * eps) - 1.0).abs(),
            error_bar: 1e-6,
        });
    }
    let mut iter = pts.into_iter();
    out.reports
        .extend(stats::convergence_sweep(&spec, |_| iter.next().unwrap())?);

    // hitting-time constant gamma(c) at c = 1/2
    let spec = SweepSpec {
        name: "asymptotics/gamma-constant".into(),
        eps: p.eps.clone(),
        tol: 0.05,
    };
    let g = flow::gamma(m, 0.5, p.quad_tol)?;
    let mut pts = Vec::new();
    for &eps in &p.eps {
        let ctx = context(p, eps)?;
        let fitted = (ctx.t_c(0.5)? + eps / m.h0 * eps.ln()) / eps;
        pts.push(SweepPoint {
            discrepancy: (fitted - g).abs(),
            error_bar: 1e-8,
        });
    }
    let mut iter = pts.into_iter();
    out.reports
        .extend(stats::convergence_sweep(&spec, |_| iter.next().unwrap())?);

    Ok(out)
}

/// Split the battery rectangle into a 2x2 grid of cells.
fn grid_cells(r: Rect) -> Vec<Rect> {
    let tm = 0.5 * (r.s1 + r.s2);
    let xm = 0.5 * (r.a + r.b);
    vec![
        Rect { s1: r.s1, s2: tm, a: r.a, b: xm },
        Rect { s1: r.s1, s2: tm, a: xm, b: r.b },
        Rect { s1: tm, s2: r.s2, a: r.a, b: xm },
        Rect { s1: tm, s2: r.s2, a: xm, b: r.b },
    ]
}

/// Two-sample comparison of finite-eps conditioned rectangle counts against
/// the decorated-limit sampler on a 2x2 grid.
pub fn limit_compare_suite(p: &SuiteParams) -> Result<SuiteOutput, SuiteError> {
    let eps = final_eps(p);
    let ctx = context(p, eps)?;
    let mut out = SuiteOutput::default();
    let rect = p.rects[0];
    let cells = grid_cells(rect);
    let intensity = p.intensity_const.unwrap_or(p.model.f0);

    let fin = sampler::conditional_counts_target(
        &ctx,
        p.seed,
        p.t,
        &cells,
        p.min_accepted,
        p.max_attempts,
    )?;

    // limit side: reject chains that jump before t, count thinned points
    let mut lim_counts: Vec<Vec<u32>> = Vec::with_capacity(p.min_accepted as usize);
    let mut sid = 0u64;
    while (lim_counts.len() as u64) < p.min_accepted {
        let pat = limit::sample_decorated_conditional(
            &p.model,
            sampler::RngStream::new(p.seed.wrapping_add(31), sid),
            p.t,
            rect.s2,
            rect.a,
            intensity,
        )?;
        sid += 1;
        if let Some(pat) = pat {
            let row: Vec<u32> = cells
                .iter()
                .map(|c| stats::count_in_rect(&pat.points, c.s1, c.s2, c.a, c.b) as u32)
                .collect();
            lim_counts.push(row);
        }
    }

    let mut chi2 = 0.0;
    let mut dof = 0usize;
    for (k, cell) in cells.iter().enumerate() {
        let xs: Vec<u32> = fin.counts.iter().map(|r| r[k]).collect();
        let ys: Vec<u32> = lim_counts.iter().map(|r| r[k]).collect();
        let mean_fin = xs.iter().map(|&v| v as f64).sum::<f64>() / xs.len() as f64;
        let mean_lim = ys.iter().map(|&v| v as f64).sum::<f64>() / ys.len() as f64;
        out.reports.push(
            TestReport::new(format!("limit-compare/cell-{k}-means"), mean_fin, mean_lim, true)
                .with("kind", "observation")
                .with("cell", format!("({},{}]x[{},{}]", cell.s1, cell.s2, cell.a, cell.b)),
        );
        if let Some((c, d)) = stats::two_sample_chi2_parts(&xs, &ys) {
            chi2 += c;
            dof += d;
        }
    }
    let pv = stats::chi2_sf(chi2, dof as f64);
    out.reports.push(
        TestReport::new("limit-compare/two-sample-chi2", chi2, pv, pv >= 0.01)
            .with("eps", eps)
            .with("dof", dof)
            .with("intensity_const", intensity)
            .with("accepted_each", p.min_accepted),
    );
    Ok(out)
}

/// Estimate the conditional per-time spike intensity on `[a, b]` and decide
/// which of the candidate constants `{f0, f0^2}` the data selects.
pub fn intensity_suite(p: &SuiteParams) -> Result<SuiteOutput, SuiteError> {
    let eps = final_eps(p);
    let ctx = context(p, eps)?;
    let mut out = SuiteOutput::default();
    let rect = Rect {
        s1: 0.0,
        s2: p.t,
        a: p.rects[0].a,
        b: p.rects[0].b,
    };
    let mass = limit::lambda_star_mass(rect.a, rect.b.min(1.0))?;
    let m = sampler::conditional_counts_target(
        &ctx,
        p.seed,
        p.t,
        &[rect],
        p.min_accepted,
        p.max_attempts,
    )?;
    let n = m.counts.len() as f64;
    let total: u64 = m.counts.iter().map(|r| r[0] as u64).sum();
    let lambda = total as f64 / (n * p.t);
    // Poisson CI on the total count, 99% two-sided
    let half = 2.5758 * (total as f64).sqrt() / (n * p.t);
    let (lo, hi) = (lambda - half, lambda + half);
    let c1 = p.model.f0 * mass;
    let c2 = p.model.f0 * p.model.f0 * mass;
    let width_needed = (c2 - c1).abs() / 2.0;
    let selected = if (lo..=hi).contains(&c1) && (lo..=hi).contains(&c2) {
        "both"
    } else if (lo..=hi).contains(&c1) {
        "f0"
    } else if (lo..=hi).contains(&c2) {
        "f0^2"
    } else if (lambda - c1).abs() <= (lambda - c2).abs() {
        "neither (nearest f0)"
    } else {
        "neither (nearest f0^2)"
    };
    let pass = if width_needed > 0.0 {
        2.0 * half < width_needed
    } else {
        true // candidates coincide (f0 = 1); nothing to discriminate
    };
    out.reports.push(
        TestReport::new("intensity-constant/discrimination", lambda, width_needed, pass)
            .with("eps", eps)
            .with("ci_lo", lo)
            .with("ci_hi", hi)
            .with("candidate_f0", c1)
            .with("candidate_f0sq", c2)
            .with("selected", selected)
            .with("accepted", m.counts.len()),
    );
    Ok(out)
}

fn annotate(mut reports: Vec<TestReport>, p: &SuiteParams, eps: f64) -> Vec<TestReport> {
    for r in &mut reports {
        r.meta.entry("seed".into()).or_insert(p.seed.to_string());
        r.meta.entry("eps_final".into()).or_insert(eps.to_string());
    }
    reports
}
