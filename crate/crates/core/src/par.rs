//! Data-parallel helpers. With the `parallel` feature, work is spread over a
//! rayon pool; otherwise (or with one worker) everything runs in order on
//! the calling thread.

/// Runs `f` inside a pool of `workers` threads. `workers == 1` runs inline;
/// `workers == 0` uses the global pool.
#[cfg(feature = "parallel")]
pub fn install<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    if workers <= 1 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn install<R: Send>(_workers: usize, f: impl FnOnce() -> R + Send) -> R {
    f()
}

/// `(0..n).map(f).collect()`, in parallel when `parallel` is set.
#[cfg(feature = "parallel")]
pub fn map_range<T, F>(n: usize, parallel: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    if parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<T, F>(n: usize, _parallel: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// `items.iter().map(f).collect()`, in parallel when `parallel` is set.
#[cfg(feature = "parallel")]
pub fn map_slice<S, T, F>(items: &[S], parallel: bool, f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    use rayon::prelude::*;
    if parallel {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_slice<S, T, F>(items: &[S], _parallel: bool, f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Whether this build can actually run work on more than one thread.
pub const fn enabled() -> bool {
    cfg!(feature = "parallel")
}
