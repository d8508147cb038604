use respike_core::flow::{FlowContext, FlowParams};
use respike_core::model::default_linear;
use respike_core::sampler::{self, Rect};
use std::time::Instant;

fn main() {
    let ctx = FlowContext::new(default_linear(), 1e-4, FlowParams::with_beta(0.49)).unwrap();
    let t0 = Instant::now();
    let s = sampler::sample_e1_e2(&ctx, 1, 2000);
    let dt = t0.elapsed().as_secs_f64();
    let mean_e1 = s.iter().map(|p| p.0).sum::<f64>() / s.len() as f64;
    // cycles per e1 ~ mean_e1 / (eps/h0)
    let cycles = mean_e1 / 1e-4 * 2000.0;
    println!("2000 e1 at eps=1e-4: {dt:.2}s, mean_e1={mean_e1:.4}, ~{:.0} cycles, {:.0} ns/cycle", cycles, dt / cycles * 1e9);

    let rects = [Rect { s1: 0.0, s2: 2.0, a: 0.5, b: 1.0 }];
    let t0 = Instant::now();
    let m = sampler::conditional_counts_target(&ctx, 1, 2.0, &rects, 500, 100_000).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    println!("500 accepted cond. counts t=2 eps=1e-4: {dt:.2}s (attempted {})", m.attempted);

    let t0 = Instant::now();
    let ctx3 = FlowContext::new(default_linear(), 1e-5, FlowParams::with_beta(0.49)).unwrap();
    println!("context build eps=1e-5: {:.3}s (x_star={})", t0.elapsed().as_secs_f64(), ctx3.x_star());
}
