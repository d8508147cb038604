//! Deterministic serialization of run artifacts.
//!
//! All writers produce byte-identical output for identical inputs: floats
//! use the shortest round-trip representation, report metadata is ordered,
//! and nothing time- or host-dependent is embedded.

use std::fmt::Write as _;

use crate::sampler::PointPattern;
use crate::stats::TestReport;

/// Leading comment line carrying provenance.
pub fn provenance_comment(config_hash: &str, seed: u64) -> String {
    format!("# config_sha256={config_hash} seed={seed}\n")
}

/// Point pattern rows: `kind ∈ {spike, e_odd, e_even}`. Spike rows carry the
/// pre-spike position; `e_odd` rows carry `y_star`-crossing time with the
/// threshold as position; `e_even` rows the reset time with position 0.
pub fn pattern_csv(pat: &PointPattern, y_star: f64) -> String {
    let mut rows: Vec<(f64, u8, f64)> = Vec::new();
    for &(t, x) in &pat.points {
        rows.push((t, 0, x));
    }
    for &(odd, even) in &pat.jump_epochs {
        rows.push((odd, 1, y_star));
        rows.push((even, 2, 0.0));
    }
    if let Some(odd) = pat.open_excursion {
        rows.push((odd, 1, y_star));
    }
    rows.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
    let mut out = String::from("kind,t,x\n");
    for (t, kind, x) in rows {
        let kind = match kind {
            0 => "spike",
            1 => "e_odd",
            _ => "e_even",
        };
        let _ = writeln!(out, "{kind},{t},{x}");
    }
    out
}

/// Trajectory rows `(t, x)`.
pub fn trajectory_csv(traj: &[(f64, f64)]) -> String {
    let mut out = String::from("t,x\n");
    for &(t, x) in traj {
        let _ = writeln!(out, "{t},{x}");
    }
    out
}

/// One JSON object per report line.
pub fn reports_jsonl(reports: &[TestReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let _ = writeln!(
            out,
            "{}",
            serde_json::to_string(r).expect("report serialization is infallible")
        );
    }
    out
}

/// Transform verification rows.
pub struct TransformRow {
    pub eps: f64,
    pub sigma: f64,
    pub z: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub z_eps: f64,
    pub z_limit: f64,
    pub abs_err: f64,
}

pub fn transforms_csv(rows: &[TransformRow]) -> String {
    let mut out = String::from("eps,sigma,z,a,b,C,D,E,Z_eps,Z_limit,abs_err\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.eps, r.sigma, r.z, r.a, r.b, r.c, r.d, r.e, r.z_eps, r.z_limit, r.abs_err
        );
    }
    out
}

/// Summary table of reports.
pub fn summary_csv(reports: &[TestReport]) -> String {
    let mut out = String::from("name,statistic,threshold_or_pvalue,pass\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.name, r.statistic, r.threshold_or_pvalue, r.pass
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::TestReport;

    #[test]
    fn jsonl_is_deterministic_and_ordered() {
        let r = TestReport::new("demo", 0.5, 0.01, true)
            .with("b_key", 2)
            .with("a_key", 1);
        let one = reports_jsonl(std::slice::from_ref(&r));
        let two = reports_jsonl(&[r]);
        assert_eq!(one, two);
        // BTreeMap metadata serializes in key order
        let a = one.find("a_key").unwrap();
        let b = one.find("b_key").unwrap();
        assert!(a < b);
    }

    #[test]
    fn csv_headers() {
        assert!(trajectory_csv(&[(0.0, 0.0)]).starts_with("t,x\n"));
        assert!(summary_csv(&[]).starts_with("name,"));
    }
}
