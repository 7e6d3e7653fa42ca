//! Data-parallel map with a sequential fallback.
//!
//! Heavy loops (kernel matrix rows, Monte Carlo paths) go through
//! `map_indexed`. With the `parallel` feature enabled the work is spread
//! over the rayon pool when `par` is true; without the feature the flag is
//! ignored and the loop runs sequentially. Each index is computed
//! independently, so results are identical either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, par: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if par {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, _par: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_matches_serial() {
        let f = |i: usize| (i as f64).sqrt().sin();
        let a = map_indexed(1000, true, f);
        let b = map_indexed(1000, false, f);
        assert_eq!(a, b);
    }
}
