//! Data-parallel mapping over independent sweep points.
//!
//! With the `parallel` feature (default) [`Exec::Parallel`] fans out over the
//! rayon pool; without it every mode runs sequentially. Output order always
//! matches input order, so results do not depend on the thread count.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// Whether this build can actually run [`Exec::Parallel`] concurrently.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

pub fn map<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Apply `f(row_index, row)` to every `row_len`-sized chunk of `data`.
pub fn for_each_row<T, F>(exec: Exec, data: &mut [T], row_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            data.par_chunks_mut(row_len)
                .enumerate()
                .for_each(|(i, row)| f(i, row));
        }
        _ => data
            .chunks_mut(row_len)
            .enumerate()
            .for_each(|(i, row)| f(i, row)),
    }
}

/// Like [`for_each_row`] over two arrays with the same row layout.
pub fn for_each_row_pair<T, U, F>(exec: Exec, a: &mut [T], b: &mut [U], row_len: usize, f: F)
where
    T: Send,
    U: Send,
    F: Fn(usize, &mut [T], &mut [U]) + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            a.par_chunks_mut(row_len)
                .zip(b.par_chunks_mut(row_len))
                .enumerate()
                .for_each(|(i, (ra, rb))| f(i, ra, rb));
        }
        _ => a
            .chunks_mut(row_len)
            .zip(b.chunks_mut(row_len))
            .enumerate()
            .for_each(|(i, (ra, rb))| f(i, ra, rb)),
    }
}
