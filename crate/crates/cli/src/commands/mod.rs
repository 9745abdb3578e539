pub mod align;
pub mod build;
pub mod dp;
pub mod eval;
pub mod gen;
pub mod simulate;

use anyhow::Result;

/// Runs `f` over the items with the requested parallelism, preserving input
/// order in the output (0 = rayon's default thread count).
pub fn map_records<T, U, F>(items: Vec<T>, jobs: usize, f: F) -> Result<Vec<U>>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()?;
    Ok(pool.install(|| items.into_par_iter().map(f).collect()))
}
