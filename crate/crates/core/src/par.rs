use serde::{Deserialize, Serialize};

/// Execution policy for the data-parallel loops.
///
/// `Parallel` silently degrades to sequential execution when the crate is
/// built without the `parallel` feature. Results are identical either way:
/// work is split into index-ordered chunks and reduced in chunk order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exec {
    #[default]
    Parallel,
    Sequential,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Maps `f` over `0..n`, returning results in index order.
pub(crate) fn map_indices<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Splits `0..total` into contiguous chunks and maps each chunk.
pub(crate) fn map_chunks<T, F>(exec: Exec, total: u64, chunk: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, u64) -> T + Sync + Send,
{
    let chunk = chunk.max(1);
    let n_chunks = total.div_ceil(chunk) as usize;
    map_indices(exec, n_chunks, |c| {
        let start = c as u64 * chunk;
        let end = (start + chunk).min(total);
        f(start, end)
    })
}
