//! Command implementations. Every artifact write is deterministic: reruns
//! with identical config and seed produce byte-identical files at any
//! thread count.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use respike_core::flow::{FlowContext, FlowParams};
use respike_core::sampler::{self, RngStream};
use respike_core::stats::TestReport;
use respike_core::suites;
use respike_core::{exec, io};

use crate::config::ExperimentConfig;

pub struct RunContext {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
    pub threads: Option<usize>,
}

impl RunContext {
    fn write(&self, name: &str, contents: &str) -> Result<()> {
        fs::create_dir_all(&self.out)
            .with_context(|| format!("cannot create {}", self.out.display()))?;
        let path = self.out.join(name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    }

    fn manifest(&self) -> String {
        format!(
            "{{\"config_sha256\":\"{}\",\"seed\":{},\"config\":{}}}\n",
            self.cfg.sha256(),
            self.cfg.seed,
            self.cfg.canonical_json()
        )
    }

    fn provenance(&self) -> String {
        io::provenance_comment(&self.cfg.sha256(), self.cfg.seed)
    }
}

/// `validate`: check the model conditions; nonzero exit on violation.
pub fn cmd_validate(rc: &RunContext) -> Result<i32> {
    let model = rc.cfg.build_model()?;
    let rep = model.validate(rc.cfg.validate_grid_n);
    if rep.ok {
        println!("model `{}` satisfies the admissibility conditions", model.label);
        Ok(0)
    } else {
        for v in &rep.violations {
            println!(
                "violation: {} at x = {} (value {})",
                v.condition, v.witness_x, v.value
            );
        }
        Ok(1)
    }
}

/// `simulate`: pre-spike pattern and trajectory CSVs per eps.
pub fn cmd_simulate(rc: &RunContext) -> Result<i32> {
    let model = rc.cfg.build_model()?;
    let params = FlowParams {
        beta: rc.cfg.beta,
        quad_tol: rc.cfg.quad_tol,
        root_tol: rc.cfg.root_tol,
    };
    exec::with_threads(rc.threads, || -> Result<i32> {
        for &eps in &rc.cfg.eps {
            let ctx = FlowContext::new(model.clone(), eps, params)?;
            let pat = sampler::simulate(&ctx, RngStream::new(rc.cfg.seed, 0), rc.cfg.horizon);
            let traj = sampler::simulate_trajectory(
                &ctx,
                RngStream::new(rc.cfg.seed, 1),
                rc.cfg.horizon,
                rc.cfg.grid_n,
            );
            let tag = format!("{eps:e}");
            rc.write(
                &format!("pattern_eps{tag}.csv"),
                &format!("{}{}", rc.provenance(), io::pattern_csv(&pat, ctx.y_star())),
            )?;
            rc.write(
                &format!("trajectory_eps{tag}.csv"),
                &format!("{}{}", rc.provenance(), io::trajectory_csv(&traj)),
            )?;
            println!(
                "eps={eps}: {} pre-spikes, {} completed excursions -> {}",
                pat.points.len(),
                pat.jump_epochs.len(),
                rc.out.display()
            );
        }
        rc.write("manifest.json", &rc.manifest())?;
        Ok(0)
    })
}

/// `verify --suite <name>`: run one named suite, write reports + artifacts,
/// exit 0 iff every report passes.
pub fn cmd_verify(rc: &RunContext, suite: &str) -> Result<i32> {
    let params = rc.cfg.suite_params()?;
    let out = exec::with_threads(rc.threads, || suites::run_suite(suite, &params))?;
    rc.write(
        "reports.jsonl",
        &format!("{}{}", rc.provenance(), io::reports_jsonl(&out.reports)),
    )?;
    rc.write(
        "summary.csv",
        &format!("{}{}", rc.provenance(), io::summary_csv(&out.reports)),
    )?;
    for (name, contents) in &out.artifacts {
        rc.write(name, &format!("{}{}", rc.provenance(), contents))?;
    }
    rc.write("manifest.json", &rc.manifest())?;
    print_table(&out.reports);
    Ok(if out.all_pass() { 0 } else { 1 })
}

/// `report`: summarize a previous run's reports.jsonl.
pub fn cmd_report(out_dir: &Path) -> Result<i32> {
    let path = out_dir.join("reports.jsonl");
    let text = fs::read_to_string(&path)
        .with_context(|| format!("no reports at {}", path.display()))?;
    let mut reports = Vec::new();
    for line in text.lines() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let r: serde_json::Value =
            serde_json::from_str(line).with_context(|| format!("bad report line: {line}"))?;
        reports.push(r);
    }
    let mut pass = true;
    println!("{:<55} {:>14} {:>14} {:>6}", "name", "statistic", "p/threshold", "pass");
    for r in &reports {
        let ok = r["pass"].as_bool().unwrap_or(false);
        pass &= ok;
        println!(
            "{:<55} {:>14.6} {:>14.6} {:>6}",
            r["name"].as_str().unwrap_or("?"),
            r["statistic"].as_f64().unwrap_or(f64::NAN),
            r["threshold_or_pvalue"].as_f64().unwrap_or(f64::NAN),
            ok
        );
    }
    println!(
        "{} reports, {}",
        reports.len(),
        if pass { "all pass" } else { "FAILURES present" }
    );
    Ok(if pass { 0 } else { 1 })
}

fn print_table(reports: &[TestReport]) {
    for r in reports {
        println!(
            "{:<55} stat={:<12.6} thr={:<12.6} {}",
            r.name,
            r.statistic,
            r.threshold_or_pvalue,
            if r.pass { "pass" } else { "FAIL" }
        );
    }
}
