//! Per-point work distribution.
//!
//! Results are always collected in input order and reduced sequentially by
//! the caller, so the worker count never changes a single bit of the output.

/// How per-point evaluations are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    Sequential,
    /// Rayon worker pool. Falls back to sequential without the `parallel`
    /// feature.
    #[default]
    Parallel,
}

impl ExecMode {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecMode::Parallel
    }
}

/// Maps `f` over `items`, keeping the order of `items`.
pub fn ordered_map<T, R, F>(mode: ExecMode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = mode;
    items.iter().map(f).collect()
}

/// Like [`ordered_map`] over an index range.
pub fn ordered_map_range<R, F>(mode: ExecMode, len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        return (0..len).into_par_iter().map(f).collect();
    }
    let _ = mode;
    (0..len).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let xs: Vec<u32> = (0..1000).collect();
        let seq = ordered_map(ExecMode::Sequential, &xs, |x| x * 3);
        let par = ordered_map(ExecMode::Parallel, &xs, |x| x * 3);
        assert_eq!(seq, par);
        assert_eq!(
            ordered_map_range(ExecMode::Parallel, 5, |i| i),
            vec![0, 1, 2, 3, 4]
        );
    }
}
