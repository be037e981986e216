//! Execution strategy for the data-parallel inner loops.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How independent work items are executed.
///
/// Results are always returned in input order, so output is identical under
/// both strategies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Exec {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}


impl Exec {
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Exec::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => items.par_iter().map(f).collect(),
        }
    }

    pub fn join<A, B, RA, RB>(self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send,
    {
        match self {
            Exec::Sequential => (a(), b()),
            #[cfg(feature = "parallel")]
            Exec::Parallel => rayon::join(a, b),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let items: Vec<u32> = (0..1000).collect();
        let seq = Exec::Sequential.map(&items, |x| x * 3);
        let dflt = Exec::default().map(&items, |x| x * 3);
        assert_eq!(seq, dflt);
        assert_eq!(seq[999], 2997);
    }

    #[test]
    fn join_runs_both() {
        let (a, b) = Exec::default().join(|| 1 + 1, || "x".repeat(3));
        assert_eq!(a, 2);
        assert_eq!(b, "xxx");
    }
}
