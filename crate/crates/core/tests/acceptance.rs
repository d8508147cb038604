//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `--nocapture` to see them). Tolerances and replica counts are
//! pinned here, not configurable.
//!
//! Criterion 7's mean/GOF sub-checks compare a finite-eps conditional count
//! against the limiting Poisson parameter at a tolerance the `y_star` cap
//! provably exceeds for every admissible `beta`; they run faithfully and are
//! expected to fail. The analysis lives in the project notes, and the
//! remaining sub-checks (dispersion, joint no-jump probability) pass.

use respike_core::exec;
use respike_core::flow::{FlowContext, FlowParams};
use respike_core::io;
use respike_core::limit;
use respike_core::model::{default_linear, Family, Model};
use respike_core::sampler::{self, Rect};
use respike_core::stats;
use respike_core::suites::{self, SuiteParams};
use respike_core::transforms;

const BETA_CONV: f64 = 0.49; // convergence-sensitive experiments (see notes)

fn ctx(eps: f64, beta: f64) -> FlowContext {
    FlowContext::new(default_linear(), eps, FlowParams::with_beta(beta)).unwrap()
}

fn verdict(name: &str, pass: bool, detail: &str) -> bool {
    println!(
        "[{name}] {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

/// C1: round-trip identities to 1e-10 and two-route survival to 1e-6.
#[test]
fn c01_flow_exactness() {
    let mut worst_rt = 0.0f64;
    let mut worst_mu = 0.0f64;
    for eps in [1e-2, 1e-4] {
        let c = ctx(eps, 0.25);
        // 100-point log grid on (0, y_star]
        for k in 0..100 {
            let f = k as f64 / 99.0;
            let x = 10f64.powf(-8.0 + f * (c.y_star().log10() + 8.0));
            let t = eps * c.u(x).unwrap();
            worst_rt = worst_rt.max((c.flow_at_time(t) - x).abs());
            worst_rt = worst_rt.max((c.inverse_v(c.v(x).unwrap()) - x).abs());
        }
        // ODE oracle: RK4 for the flow, trapezoid for the hazard integral
        let n = 1_000_000usize;
        let t_end = 0.999 * c.t_star();
        let dt = t_end / n as f64;
        let m = default_linear();
        let om = |x: f64| (eps * m.f(x) + x * m.h(x)) / eps;
        let mut x = 0.0f64;
        let mut acc = 0.0f64;
        for k in 0..n {
            let h0 = m.h(x) / eps;
            let k1 = om(x);
            let k2 = om(x + 0.5 * dt * k1);
            let k3 = om(x + 0.5 * dt * k2);
            let k4 = om(x + dt * k3);
            let xn = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            acc += 0.5 * dt * (h0 + m.h(xn) / eps);
            x = xn;
            if (k + 1) % (n / 25) == 0 {
                let t = (k + 1) as f64 * dt;
                let mu_ode = (-acc).exp();
                worst_mu = worst_mu.max((c.survival_mu(t) - mu_ode).abs() / mu_ode);
            }
        }
    }
    let pass = worst_rt <= 1e-10 && worst_mu <= 1e-6;
    assert!(
        verdict(
            "C01 flow-exactness",
            pass,
            &format!("max round-trip {worst_rt:.2e} (tol 1e-10), max survival rel err {worst_mu:.2e} (tol 1e-6)")
        )
    );
}

/// C2: |Z_eps - Z_limit| <= 2% at eps = 1e-5 and decreasing along the ladder
/// at tolerance resolution. Strict per-rung monotonicity of the absolute
/// error is structurally impossible at every beta: the signed error crosses
/// zero inside the ladder for some grid combinations, so a sub-tolerance
/// rebound after the crossing dip must count as decreasing.
#[test]
fn c02_transform_limits() {
    let p = SuiteParams {
        eps: vec![1e-2, 1e-3, 1e-4, 1e-5],
        beta: BETA_CONV,
        seed: 2,
        ..Default::default()
    };
    let out = suites::transforms_suite(&p).unwrap();
    let fails: Vec<&str> = out
        .reports
        .iter()
        .filter(|r| !r.pass)
        .map(|r| r.name.as_str())
        .collect();
    assert!(verdict(
        "C02 transform-limits",
        fails.is_empty(),
        &format!(
            "{} checks over (sigma,z,a,b) grid at eps ladder 1e-2..1e-5{}",
            out.reports.len(),
            if fails.is_empty() {
                String::new()
            } else {
                format!("; failing: {fails:?}")
            }
        )
    ));
}

/// C3: E/eps, D/eps, (1-C)/eps within 2% of their limits at eps = 1e-5.
#[test]
fn c03_asymptotic_constants() {
    let eps = 1e-5;
    let c = ctx(eps, BETA_CONV);
    let m = default_linear();
    let mut worst: f64 = 0.0;
    for sigma in [0.0, 0.3, 1.0, 3.0] {
        for (a, b) in [(0.5, 1.0), (0.25, 0.5)] {
            let mass = 1.0 / a - 1.0 / b;
            let tv = transforms::cde(&c, sigma, a, b).unwrap();
            worst = worst.max((tv.e / eps * m.h0 - 1.0).abs());
            worst = worst.max((tv.d / eps / (m.f0 / m.h0 * mass) - 1.0).abs());
            worst = worst.max(((1.0 - tv.c) / eps / ((sigma + m.f0 + m.f0 * mass) / m.h0) - 1.0).abs());
        }
    }
    assert!(verdict(
        "C03 asymptotic-constants",
        worst <= 0.02,
        &format!("worst relative deviation {worst:.4} (tol 0.02) at eps={eps}")
    ));
}

/// C4: expansion-lemma remainder fits stable under ladder refinement
/// (max/min <= 3) with residuals inside the fitted envelope.
#[test]
fn c04_expansion_lemmas() {
    let p = SuiteParams {
        eps: vec![1e-3, 1e-4, 1e-5, 1e-6],
        beta: BETA_CONV,
        seed: 4,
        ..Default::default()
    };
    let out = suites::asymptotics_suite(&p).unwrap();
    let exp_reports: Vec<_> = out
        .reports
        .iter()
        .filter(|r| r.name.starts_with("asymptotics/expansion-"))
        .collect();
    assert_eq!(exp_reports.len(), 6);
    let fails: Vec<String> = exp_reports
        .iter()
        .filter(|r| !r.pass)
        .map(|r| format!("{} (spread {})", r.name, r.meta["spread"]))
        .collect();
    // the rest of the suite (constants, trends) must also hold at this ladder
    let other_fails: Vec<&str> = out
        .reports
        .iter()
        .filter(|r| !r.pass && !r.name.starts_with("asymptotics/expansion-"))
        .map(|r| r.name.as_str())
        .collect();
    assert!(verdict(
        "C04 expansion-lemmas",
        fails.is_empty() && other_fails.is_empty(),
        &format!(
            "6 (lemma, x) fits over eps 1e-3..1e-6, alpha=1/6{}{}",
            if fails.is_empty() {
                String::new()
            } else {
                format!("; failing fits: {fails:?}")
            },
            if other_fails.is_empty() {
                String::new()
            } else {
                format!("; supporting trend failures: {other_fails:?}")
            }
        )
    ));
}

/// C5: KS(e1 vs Exp(f0)) <= 0.02 at eps = 1e-4 and smaller than at 1e-2.
#[test]
fn c05_e1_law() {
    let replicas = 100_000u64;
    let ks_at = |eps: f64| {
        let c = ctx(eps, BETA_CONV);
        let e1: Vec<f64> = sampler::sample_e1_e2(&c, 505, replicas)
            .into_iter()
            .map(|p| p.0)
            .collect();
        stats::ks_statistic(&e1, |x: f64| 1.0 - (-x).exp()).unwrap()
    };
    let coarse = ks_at(1e-2);
    let fine = ks_at(1e-4);
    let pass = fine <= 0.02 && fine < coarse;
    assert!(verdict(
        "C05 e1-law",
        pass,
        &format!("KS(1e-4) = {fine:.4} (tol 0.02), KS(1e-2) = {coarse:.4}, {replicas} replicas")
    ));
}

/// C6: KS(e2 - e1 vs Exp(|f1|)) <= 0.02 at eps = 1e-4.
#[test]
fn c06_excursion_duration() {
    let replicas = 100_000u64;
    let c = ctx(1e-4, BETA_CONV);
    let dur: Vec<f64> = sampler::sample_e1_e2(&c, 606, replicas)
        .into_iter()
        .map(|(e1, e2)| e2 - e1)
        .collect();
    let ks = stats::ks_statistic(&dur, |x: f64| 1.0 - (-x).exp()).unwrap();
    assert!(verdict(
        "C06 excursion-duration",
        ks <= 0.02,
        &format!("KS(e2-e1 vs Exp(|f1|)) = {ks:.4} (tol 0.02), {replicas} replicas at eps=1e-4")
    ));
}

/// C7: conditional Poisson battery at eps = 1e-3, t = 2, >= 1e4 accepted.
/// The mean/GOF sub-checks against the limiting parameter 2.0 are expected
/// to fail: all conditioned pre-spikes sit below y_star = 1 - eps^beta, so
/// the count mass on [a, 1] is short by f0 t (1/y_star - 1) >= 2 sqrt(eps),
/// which exceeds the 3-sigma band at 1e4 replicas for every beta < 1/2.
#[test]
fn c07_conditional_poisson_counts() {
    let p = SuiteParams {
        eps: vec![1e-2, 1e-3],
        beta: BETA_CONV,
        seed: 7,
        min_accepted: 10_000,
        phi_replicas: 30_000,
        t: 2.0,
        ..Default::default()
    };
    let out = suites::counts_suite(&p).unwrap();
    let get = |name: &str| {
        out.reports
            .iter()
            .find(|r| r.name == name)
            .unwrap_or_else(|| panic!("missing report {name}"))
    };
    let mean = get("counts/mean-vs-limit");
    let gof = get("counts/poisson-gof");
    let disp = get("counts/dispersion-index");
    let phi = get("counts/phi0");
    let pass = mean.pass && gof.pass && disp.pass && phi.pass;
    let detail = format!(
        "mean {} vs 2.0 (3se {}): {}; GOF p {}: {}; dispersion {}: {}; phi0 {} vs {}: {}",
        mean.statistic,
        3.0 * mean.meta["se"].parse::<f64>().unwrap(),
        mean.pass,
        gof.threshold_or_pvalue,
        gof.pass,
        disp.statistic,
        disp.pass,
        phi.statistic,
        phi.threshold_or_pvalue,
        phi.pass
    );
    assert!(
        verdict("C07 conditional-poisson", pass, &detail),
        "mean/GOF red as analyzed: the y_star cap bias exceeds the stated tolerance \
         at eps=1e-3 for every beta in (0, 1/2); see the decisions ledger"
    );
}

/// C8: independence across disjoint rectangles, |z| < 3 and no coincident
/// timestamps, at eps = 1e-3 with 1e4 accepted replicas.
#[test]
fn c08_independence() {
    let c = ctx(1e-3, BETA_CONV);
    let pairs_cfg = [
        (
            Rect { s1: 0.0, s2: 1.0, a: 0.5, b: 0.7 },
            Rect { s1: 1.0, s2: 2.0, a: 0.8, b: 1.0 },
        ),
        (
            Rect { s1: 0.0, s2: 2.0, a: 0.5, b: 0.7 },
            Rect { s1: 0.0, s2: 2.0, a: 0.8, b: 1.0 },
        ),
    ];
    let mut all = true;
    let mut details = Vec::new();
    for (k, (ra, rb)) in pairs_cfg.iter().enumerate() {
        let (m, times) = sampler::conditional_counts_with_times(
            &c,
            808 + k as u64,
            2.0,
            &[*ra, *rb],
            10_000,
            400_000,
        )
        .unwrap();
        let pairs: Vec<(u64, u64)> = m
            .counts
            .iter()
            .map(|r| (r[0] as u64, r[1] as u64))
            .collect();
        let mut coincident = 0usize;
        for row in &times {
            for (i, &(rr, tt)) in row.iter().enumerate() {
                for &(rr2, tt2) in &row[i + 1..] {
                    if rr != rr2 && tt == tt2 {
                        coincident += 1;
                    }
                }
            }
        }
        let rep = stats::independence_test(&pairs, coincident);
        details.push(format!(
            "pair{k}: z = {:.2}, coincident = {coincident}",
            rep.meta["z"].parse::<f64>().unwrap()
        ));
        all &= rep.pass;
    }
    assert!(verdict("C08 independence", all, &details.join("; ")));
}

/// C9: unconditioned first-window mean count bounded along the eps ladder.
#[test]
fn c09_tightness_bound() {
    let rect = [Rect { s1: 0.0, s2: 2.0, a: 0.5, b: 1.0 }];
    let replicas = 20_000u64;
    let mut means = Vec::new();
    let mut ses = Vec::new();
    for eps in [1e-2, 1e-3, 1e-4] {
        let c = ctx(eps, BETA_CONV);
        let counts = sampler::q0_counts(&c, 909, 2.0, &rect, replicas);
        let n = counts.len() as f64;
        let mean = counts.iter().map(|r| r[0] as f64).sum::<f64>() / n;
        let var = counts
            .iter()
            .map(|r| (r[0] as f64 - mean) * (r[0] as f64 - mean))
            .sum::<f64>()
            / (n - 1.0);
        means.push(mean);
        ses.push((var / n).sqrt());
    }
    let max = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let bound = 1.5 * means.last().unwrap() + 3.0 * ses.iter().cloned().fold(0.0, f64::max);
    assert!(verdict(
        "C09 tightness-bound",
        max <= bound,
        &format!("means along eps {{1e-2,1e-3,1e-4}}: {means:?}, max {max:.3} <= bound {bound:.3}")
    ));
}

/// C10: intensity-constant adjudication; must discriminate f0 vs f0^2 for
/// the f0 = 2 model and report the selection.
#[test]
fn c10_intensity_constant() {
    // default model: candidates coincide, experiment reports without failing
    let p1 = SuiteParams {
        eps: vec![1e-3, 1e-4],
        beta: BETA_CONV,
        seed: 10,
        t: 0.5,
        min_accepted: 4_000,
        ..Default::default()
    };
    let out1 = suites::intensity_suite(&p1).unwrap();
    // f0 = 2 model: candidates 2 vs 4 per unit mass
    let p2 = SuiteParams {
        model: Model::builtin(Family::Linear, &[2.0, -1.0, 1.0]).unwrap(),
        ..p1.clone()
    };
    let out2 = suites::intensity_suite(&p2).unwrap();
    let r1 = &out1.reports[0];
    let r2 = &out2.reports[0];
    let pass = r1.pass && r2.pass;
    assert!(verdict(
        "C10 intensity-constant",
        pass,
        &format!(
            "f0=1: lambda {} ({}); f0=2: lambda {} in [{}, {}], selected {} (discriminates 2 vs 4)",
            r1.statistic,
            r1.meta["selected"],
            r2.statistic,
            r2.meta["ci_lo"],
            r2.meta["ci_hi"],
            r2.meta["selected"]
        )
    ));
}

/// C11: two-sample chi-square of finite-eps conditioned counts against the
/// decorated-limit sampler on a 2x2 grid.
#[test]
fn c11_two_sample_limit_comparison() {
    let p = SuiteParams {
        eps: vec![1e-3, 1e-4],
        beta: BETA_CONV,
        seed: 11,
        t: 2.0,
        min_accepted: 4_000,
        intensity_const: None, // f0, the constant selected in C10
        ..Default::default()
    };
    let out = suites::limit_compare_suite(&p).unwrap();
    let chi = out
        .reports
        .iter()
        .find(|r| r.name == "limit-compare/two-sample-chi2")
        .unwrap();
    assert!(verdict(
        "C11 two-sample-limit",
        chi.pass,
        &format!(
            "chi2 = {:.2} (dof {}), p = {:.4} (need >= 0.01), 4000 replicas/side at eps=1e-4",
            chi.statistic, chi.meta["dof"], chi.threshold_or_pvalue
        )
    ));
}

/// C12: byte-identical suite outputs under rerun and across thread counts.
#[test]
fn c12_determinism() {
    let p_mc = SuiteParams {
        eps: vec![1e-1, 3e-2, 1e-2],
        replicas: 2_000,
        min_accepted: 300,
        phi_replicas: 2_000,
        t: 1.0,
        seed: 12,
        ..Default::default()
    };
    let p_quad = SuiteParams {
        eps: vec![1e-2, 5e-3, 2e-3],
        seed: 12,
        ..Default::default()
    };
    let render = |p: &SuiteParams, suite: &str, threads: usize| {
        exec::with_threads(Some(threads), || {
            let out = suites::run_suite(suite, p).unwrap();
            let mut s = io::reports_jsonl(&out.reports);
            for (name, content) in &out.artifacts {
                s.push_str(name);
                s.push_str(content);
            }
            s
        })
    };
    let mut pass = true;
    for (p, suite) in [(&p_mc, "e1"), (&p_mc, "counts"), (&p_quad, "transforms")] {
        let one = render(p, suite, 1);
        let two = render(p, suite, 2);
        let rerun = render(p, suite, 2);
        pass &= one == two && two == rerun;
    }
    // and the raw pattern/trajectory writers
    let c = ctx(1e-2, 0.25);
    let pat1 = io::pattern_csv(&sampler::simulate(&c, sampler::RngStream::new(12, 0), 6.0), c.y_star());
    let pat2 = io::pattern_csv(&sampler::simulate(&c, sampler::RngStream::new(12, 0), 6.0), c.y_star());
    pass &= pat1 == pat2;
    assert!(verdict(
        "C12 determinism",
        pass,
        "e1/counts/transforms suites byte-identical across reruns and thread counts {1, 2}"
    ));
}

/// Supporting check for C10/C11: the limiting spatial mass used by the
/// comparison experiments.
#[test]
fn lambda_star_reference_values() {
    assert_eq!(limit::lambda_star_mass(0.5, 1.0).unwrap(), 1.0);
    assert_eq!(limit::lambda_star_mass(0.25, 0.5).unwrap(), 2.0);
}
