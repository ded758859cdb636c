//! Switch between sequential and rayon-backed data-parallel evaluation.
//!
//! Independent work items (Jacobian columns, multistart seeds, flow-map
//! probe perturbations, benchmark runs) are expressed as index-to-value
//! maps; results are collected in index order, so the outcome is identical
//! in both modes.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How to evaluate a batch of independent work items.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    /// Plain in-order iteration.
    Sequential,
    /// Rayon work-stealing pool.
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for ExecMode {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            ExecMode::Parallel
        }
        #[cfg(not(feature = "parallel"))]
        {
            ExecMode::Sequential
        }
    }
}

/// Evaluate `f(0), f(1), ..., f(len - 1)` and collect the results in index
/// order.
pub fn map_indexed<T, F>(mode: ExecMode, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        ExecMode::Sequential => (0..len).map(f).collect(),
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => (0..len).into_par_iter().map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_indexed_preserves_order() {
        let seq = map_indexed(ExecMode::Sequential, 10, |i| i * i);
        assert_eq!(seq, (0..10).map(|i| i * i).collect::<Vec<_>>());
        #[cfg(feature = "parallel")]
        {
            let par = map_indexed(ExecMode::Parallel, 10, |i| i * i);
            assert_eq!(par, seq);
        }
    }
}
