//! Replica fan-out.
//!
//! Every Monte Carlo driver maps a replica index to a result and reduces the
//! collected vector sequentially, so results are independent of scheduling.
//! With the `parallel` feature (default) the map runs on rayon; without it,
//! a plain loop.

/// Map `f` over replica indices `0..n`, preserving index order.
#[cfg(feature = "parallel")]
pub fn map_replicas<T: Send>(n: u64, f: impl Fn(u64) -> T + Sync) -> Vec<T> {
    use rayon::prelude::*;
    (0..n as usize)
        .into_par_iter()
        .with_min_len(16)
        .map(|i| f(i as u64))
        .collect()
}

/// Map `f` over replica indices `0..n`, preserving index order.
#[cfg(not(feature = "parallel"))]
pub fn map_replicas<T: Send>(n: u64, f: impl Fn(u64) -> T + Sync) -> Vec<T> {
    map_replicas_seq(n, f)
}

/// Sequential map over replica indices, always available (benchmark baseline).
pub fn map_replicas_seq<T>(n: u64, f: impl Fn(u64) -> T) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Run `f` on a dedicated pool with `threads` workers (`None` = machine
/// parallelism). Without the `parallel` feature the closure just runs inline.
#[cfg(feature = "parallel")]
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    match builder.build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Run `f` on a dedicated pool with `threads` workers (`None` = machine
/// parallelism). Without the `parallel` feature the closure just runs inline.
#[cfg(not(feature = "parallel"))]
pub fn with_threads<R: Send>(_threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    f()
}
