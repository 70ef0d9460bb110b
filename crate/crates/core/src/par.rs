//! Execution mode selection for data-parallel loops.

/// How set-level operators distribute their work.
///
/// `Parallel` only takes effect when the crate is built with the `parallel`
/// feature; otherwise it silently degrades to `Sequential`. Results are
/// identical under both modes because every operator has set semantics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// Minimum amount of work (pairs examined, items mapped) before a
    /// parallel split is worth the scheduling overhead.
    pub(crate) const PARALLEL_THRESHOLD: usize = 4096;

    pub(crate) fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    pub(crate) fn use_parallel_for(self, work: usize) -> bool {
        self.is_parallel() && work >= Self::PARALLEL_THRESHOLD
    }

    /// Runs two closures, concurrently when parallel execution is active.
    pub(crate) fn join<A, B, RA, RB>(self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return rayon::join(a, b);
        }
        (a(), b())
    }

    /// Maps `f` over `items`, preserving order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order_in_both_modes() {
        let items: Vec<u32> = (0..10_000).collect();
        let seq = Execution::Sequential.map(&items, |x| x * 3);
        let par = Execution::Parallel.map(&items, |x| x * 3);
        assert_eq!(seq, par);
        assert_eq!(seq[9_999], 29_997);
    }

    #[test]
    fn sequential_never_reports_parallel() {
        assert!(!Execution::Sequential.use_parallel_for(usize::MAX));
    }
}
