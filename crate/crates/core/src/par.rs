//! Index-ordered parallel map. Results come back in index order whatever
//! the worker count, so reductions over them are bit-stable.

#[cfg(feature = "parallel")]
use crate::error::Error;
use crate::error::Result;

/// Run `f(0..n)` and collect in index order.
///
/// `threads == 1` runs inline; `0` uses the global pool; anything else gets
/// a dedicated pool of that size. Without the `parallel` feature everything
/// runs inline.
#[cfg_attr(not(feature = "parallel"), allow(unused_variables))]
pub fn map_indexed<T, F>(n: usize, threads: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if threads != 1 && n > 1 {
            let run = || (0..n).into_par_iter().map(&f).collect::<Result<Vec<T>>>();
            if threads == 0 {
                return run();
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::Resource(format!("cannot start {threads} worker threads: {e}")))?;
            return pool.install(run);
        }
    }
    (0..n).map(f).collect()
}
