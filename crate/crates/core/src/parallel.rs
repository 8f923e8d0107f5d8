//! Order-preserving map over independent work items.
//!
//! With the `parallel` feature the items are spread over a rayon pool;
//! without it they run one after another. Either way results come back in
//! input order, so any reduction done by the caller is deterministic.

use crate::error::{Error, Result};

enum Backend {
    Inline,
    #[cfg(feature = "parallel")]
    Global,
    #[cfg(feature = "parallel")]
    Pool(rayon::ThreadPool),
}

pub struct Workers {
    backend: Backend,
}

impl Workers {
    /// `None` uses the global pool (machine parallelism); `Some(1)` runs
    /// inline on the calling thread.
    pub fn new(threads: Option<usize>) -> Result<Self> {
        if threads == Some(0) {
            return Err(Error::InvalidParameter(
                "thread count must be positive".into(),
            ));
        }
        #[cfg(feature = "parallel")]
        let backend = match threads {
            Some(1) => Backend::Inline,
            Some(n) => Backend::Pool(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?,
            ),
            None => Backend::Global,
        };
        #[cfg(not(feature = "parallel"))]
        let backend = Backend::Inline;
        Ok(Self { backend })
    }

    /// Number of workers `map` will use.
    pub fn count(&self) -> usize {
        match &self.backend {
            Backend::Inline => 1,
            #[cfg(feature = "parallel")]
            Backend::Global => rayon::current_num_threads(),
            #[cfg(feature = "parallel")]
            Backend::Pool(p) => p.current_num_threads(),
        }
    }

    #[cfg(feature = "parallel")]
    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        use rayon::prelude::*;
        match &self.backend {
            Backend::Inline => items.iter().map(f).collect(),
            Backend::Global => items.par_iter().map(f).collect(),
            Backend::Pool(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        }
    }

    #[cfg(not(feature = "parallel"))]
    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        F: Fn(&T) -> R,
    {
        items.iter().map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order_for_any_thread_count() {
        let items: Vec<u64> = (0..500).collect();
        let expected: Vec<u64> = items.iter().map(|x| x * x + 1).collect();
        for threads in [None, Some(1), Some(2), Some(8)] {
            let workers = Workers::new(threads).unwrap();
            assert!(workers.count() >= 1);
            assert_eq!(workers.map(&items, |x| x * x + 1), expected);
        }
        assert!(Workers::new(Some(0)).is_err());
    }
}
