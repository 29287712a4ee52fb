//! Data-parallel helpers. Results always come back in input order, so runs
//! are reproducible regardless of the thread count.

#[cfg(feature = "parallel")]
use std::sync::Arc;

#[derive(Clone, Default)]
pub struct Execution {
    #[cfg(feature = "parallel")]
    pool: Option<Arc<rayon::ThreadPool>>,
    sequential: bool,
}

impl std::fmt::Debug for Execution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Execution").field("threads", &self.threads()).finish()
    }
}

impl Execution {
    pub fn sequential() -> Self {
        Self { sequential: true, ..Self::default() }
    }

    /// `None` uses the global pool, `Some(1)` runs serially.
    pub fn with_threads(threads: Option<usize>) -> Self {
        match threads {
            Some(0) | Some(1) => Self::sequential(),
            #[cfg(feature = "parallel")]
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().ok().map(Arc::new);
                Self { pool, sequential: false }
            }
            #[cfg(not(feature = "parallel"))]
            Some(_) => Self::sequential(),
            None => Self { sequential: !cfg!(feature = "parallel"), ..Self::default() },
        }
    }

    pub fn is_parallel(&self) -> bool {
        !self.sequential && cfg!(feature = "parallel")
    }

    pub fn threads(&self) -> usize {
        if !self.is_parallel() {
            return 1;
        }
        #[cfg(feature = "parallel")]
        {
            self.pool.as_ref().map_or_else(rayon::current_num_threads, |p| p.current_num_threads())
        }
        #[cfg(not(feature = "parallel"))]
        1
    }

    /// `f(i)` for `i in 0..n`.
    pub fn map_range<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        if !self.is_parallel() || n <= 1 {
            return (0..n).map(f).collect();
        }
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            let run = || (0..n).into_par_iter().map(&f).collect();
            match &self.pool {
                Some(pool) => pool.install(run),
                None => run(),
            }
        }
        #[cfg(not(feature = "parallel"))]
        unreachable!()
    }

    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        self.map_range(items.len(), |i| f(&items[i]))
    }

    /// Like `map_range` but stops at the first error (in index order).
    pub fn try_map_range<R, E, F>(&self, n: usize, f: F) -> Result<Vec<R>, E>
    where
        R: Send,
        E: Send,
        F: Fn(usize) -> Result<R, E> + Sync + Send,
    {
        self.map_range(n, f).into_iter().collect()
    }
}
