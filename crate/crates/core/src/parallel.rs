//! Bounded data-parallel execution over independent tasks.
//!
//! With the `parallel` feature, work is spread over a rayon pool of at most
//! `workers` threads; otherwise (or with `workers == 1`) it runs in order on
//! the calling thread. Results are always returned in input order, so the
//! schedule never affects outputs.

use crate::error::Result;

/// Worker budget for one campaign.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Workers(usize);

impl Workers {
    pub fn new(n: usize) -> Self {
        Workers(n.max(1))
    }

    pub fn serial() -> Self {
        Workers(1)
    }

    pub fn get(self) -> usize {
        self.0
    }

    pub fn is_serial(self) -> bool {
        self.0 == 1 || !cfg!(feature = "parallel")
    }
}

/// Executes `f` over `items` (mutably, in place), honouring the worker limit.
pub struct Executor {
    workers: Workers,
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl Executor {
    pub fn new(workers: Workers) -> Self {
        #[cfg(feature = "parallel")]
        {
            let pool = if workers.is_serial() {
                None
            } else {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers.get())
                    .thread_name(|i| format!("gpe-echo-{i}"))
                    .build()
                    .ok()
            };
            Executor { workers, pool }
        }
        #[cfg(not(feature = "parallel"))]
        Executor { workers }
    }

    pub fn workers(&self) -> Workers {
        self.workers
    }

    pub fn for_each_mut<T, F>(&self, items: &mut [T], f: F) -> Result<()>
    where
        T: Send,
        F: Fn(usize, &mut T) -> Result<()> + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| {
                items
                    .par_iter_mut()
                    .enumerate()
                    .map(|(i, item)| f(i, item))
                    .collect::<Result<Vec<()>>>()
                    .map(|_| ())
            });
        }
        items
            .iter_mut()
            .enumerate()
            .try_for_each(|(i, item)| f(i, item))
    }

    pub fn map<T, U, F>(&self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(usize, &T) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect());
        }
        items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serial_and_parallel_agree() {
        let data: Vec<u64> = (0..100).collect();
        let square = |_: usize, x: &u64| x * x;
        let a = Executor::new(Workers::serial()).map(&data, square);
        let b = Executor::new(Workers::new(4)).map(&data, square);
        assert_eq!(a, b);

        let mut xs = vec![1.0f64; 16];
        Executor::new(Workers::new(3))
            .for_each_mut(&mut xs, |i, x| {
                *x *= i as f64;
                Ok(())
            })
            .unwrap();
        assert_eq!(xs[5], 5.0);
    }

    #[test]
    fn zero_workers_clamped() {
        assert_eq!(Workers::new(0).get(), 1);
        assert!(Workers::new(0).is_serial());
    }
}
