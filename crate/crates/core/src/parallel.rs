//! Per-pixel execution strategy.
//!
//! Every image-level routine in this crate maps a pure function over pixel
//! indices. With the `parallel` feature the map runs on the rayon pool;
//! without it, or with [`Execution::Sequential`], it runs in index order.
//! Output order is the pixel order either way, so results do not depend on
//! the strategy.

/// How to evaluate independent per-pixel work.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Data-parallel over pixels. Falls back to sequential when the crate is
    /// built without the `parallel` feature.
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

/// Evaluates `f(0..n)` and collects the results in index order.
pub fn map_indexed<T, F>(n: usize, execution: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Pairwise (tree) summation with a fixed split rule.
///
/// The split points depend only on the slice length, so the parallel and
/// sequential variants produce bit-identical sums.
pub fn pairwise_sum(values: &[f64], execution: Execution) -> f64 {
    const LEAF: usize = 64;
    const PAR_CUTOFF: usize = 1 << 14;

    fn seq(values: &[f64]) -> f64 {
        if values.len() <= LEAF {
            return values.iter().sum();
        }
        let (lo, hi) = values.split_at(values.len() / 2);
        seq(lo) + seq(hi)
    }

    #[cfg(feature = "parallel")]
    fn par(values: &[f64]) -> f64 {
        if values.len() <= PAR_CUTOFF {
            return seq(values);
        }
        let (lo, hi) = values.split_at(values.len() / 2);
        let (a, b) = rayon::join(|| par(lo), || par(hi));
        a + b
    }

    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => par(values),
        _ => {
            let _ = PAR_CUTOFF;
            seq(values)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let seq = map_indexed(1000, Execution::Sequential, |i| i * i);
        let par = map_indexed(1000, Execution::Parallel, |i| i * i);
        assert_eq!(seq, par);
        assert_eq!(seq[31], 961);
    }

    #[test]
    fn pairwise_sum_is_strategy_independent() {
        let values: Vec<f64> = (0..100_000).map(|i| (i as f64).sin() * 1e-3 + 0.1).collect();
        let a = pairwise_sum(&values, Execution::Sequential);
        let b = pairwise_sum(&values, Execution::Parallel);
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(pairwise_sum(&[], Execution::Sequential), 0.0);
    }
}
