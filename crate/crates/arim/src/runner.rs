use arim_core::fcn::GradientRunner;
use rayon::prelude::*;

/// Runs per-sample jobs on the rayon pool. Results come back in index
/// order, so reductions over them do not depend on the thread count.
#[derive(Debug, Clone, Copy, Default)]
pub struct RayonRunner;

impl GradientRunner for RayonRunner {
    fn map<R: Send>(&self, n: usize, job: &(dyn Fn(usize) -> R + Sync)) -> Vec<R> {
        (0..n).into_par_iter().map(job).collect()
    }
}

/// Builds the global pool. `None` leaves rayon's default (all cores).
pub fn init_threads(threads: Option<usize>) -> Result<(), rayon::ThreadPoolBuildError> {
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build_global(),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_index_order() {
        let out = RayonRunner.map(100, &|i| i * i);
        assert_eq!(out, (0..100).map(|i| i * i).collect::<Vec<_>>());
    }
}
