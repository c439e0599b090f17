//! Serial or data-parallel execution of independent work items.
//!
//! Results are always collected in index order, so the output of a map does
//! not depend on the strategy or on thread scheduling. Without the `parallel`
//! feature, [`Execution::Parallel`] degrades to the serial path.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

impl Execution {
    /// True when work will actually be spread over a thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Evaluates `f(0), …, f(len - 1)` and returns the results in index order.
    pub fn map<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Execution::Serial => (0..len).map(f).collect(),
            Execution::Parallel => {
                #[cfg(feature = "parallel")]
                {
                    (0..len).into_par_iter().map(f).collect()
                }
                #[cfg(not(feature = "parallel"))]
                {
                    (0..len).map(f).collect()
                }
            }
        }
    }

    /// Applies `f` to each chunk of `data`; `f` receives the chunk's index.
    pub fn for_each_chunk_mut<T, F>(self, data: &mut [T], chunk_len: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        let chunk_len = chunk_len.max(1);
        match self {
            Execution::Serial => data
                .chunks_mut(chunk_len)
                .enumerate()
                .for_each(|(i, c)| f(i, c)),
            Execution::Parallel => {
                #[cfg(feature = "parallel")]
                {
                    data.par_chunks_mut(chunk_len)
                        .enumerate()
                        .for_each(|(i, c)| f(i, c))
                }
                #[cfg(not(feature = "parallel"))]
                {
                    data.chunks_mut(chunk_len)
                        .enumerate()
                        .for_each(|(i, c)| f(i, c))
                }
            }
        }
    }
}
