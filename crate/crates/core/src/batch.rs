//! Batch execution of independent simulations.
//!
//! A single run is strictly sequential (determinism contract), but sweeps
//! and Monte Carlo repetitions are embarrassingly parallel. With the
//! `parallel` feature (default) batches fan out over a rayon pool; without
//! it they run sequentially with identical results. `run_batch_seq` is
//! always available so benchmarks can compare both paths in one build.

use crate::engine::{run, EngineError, RunInput, SimResult};

/// Run every input sequentially, in order.
pub fn run_batch_seq(inputs: &[RunInput]) -> Result<Vec<SimResult>, EngineError> {
    inputs.iter().map(run).collect()
}

/// Run a batch of independent simulations, in parallel when the `parallel`
/// feature is enabled. Results come back in input order regardless of
/// execution order, so the output is identical either way.
#[cfg(feature = "parallel")]
pub fn run_batch(inputs: &[RunInput]) -> Result<Vec<SimResult>, EngineError> {
    use rayon::prelude::*;
    inputs.par_iter().map(run).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn run_batch(inputs: &[RunInput]) -> Result<Vec<SimResult>, EngineError> {
    run_batch_seq(inputs)
}

/// Run a batch on a bounded pool (`--jobs`). `jobs = None` uses the default
/// pool; without the `parallel` feature the bound is moot.
#[cfg(feature = "parallel")]
pub fn run_batch_with_jobs(
    inputs: &[RunInput],
    jobs: Option<usize>,
) -> Result<Vec<SimResult>, EngineError> {
    match jobs {
        None => run_batch(inputs),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| EngineError::Scenario(format!("thread pool: {e}")))?;
            pool.install(|| run_batch(inputs))
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub fn run_batch_with_jobs(
    inputs: &[RunInput],
    _jobs: Option<usize>,
) -> Result<Vec<SimResult>, EngineError> {
    run_batch_seq(inputs)
}

/// Map any data-parallel computation, honoring the feature flag. Used for
/// Monte Carlo loops that are not full simulations.
#[cfg(feature = "parallel")]
pub fn par_map<T: Sync, U: Send, F: Fn(&T) -> U + Send + Sync>(items: &[T], f: F) -> Vec<U> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map<T: Sync, U: Send, F: Fn(&T) -> U + Send + Sync>(items: &[T], f: F) -> Vec<U> {
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::TrafficSource;
    use crate::models;
    use crate::traffic::AppClass;

    fn inputs() -> Vec<RunInput> {
        [0.0, 0.25, 0.5]
            .iter()
            .map(|&load| {
                RunInput::new(
                    models::shipped_model(models::MX960_LIKE).unwrap(),
                    TrafficSource::Constant {
                        load,
                        packet_size_bytes: 1500,
                        app_class: AppClass::BestEffort,
                    },
                    10_000_000,
                    7,
                )
            })
            .collect()
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let inputs = inputs();
        let seq = run_batch_seq(&inputs).unwrap();
        let par = run_batch(&inputs).unwrap();
        assert_eq!(seq.len(), par.len());
        for (a, b) in seq.iter().zip(&par) {
            assert_eq!(a.event_log_digest, b.event_log_digest);
            assert_eq!(a.total_energy_j, b.total_energy_j);
            assert_eq!(a.delivered_packets, b.delivered_packets);
        }
    }

    #[test]
    fn jobs_bound_does_not_change_results() {
        let inputs = inputs();
        let bounded = run_batch_with_jobs(&inputs, Some(2)).unwrap();
        let seq = run_batch_seq(&inputs).unwrap();
        for (a, b) in bounded.iter().zip(&seq) {
            assert_eq!(a.event_log_digest, b.event_log_digest);
        }
    }

    #[test]
    fn par_map_preserves_order() {
        let xs: Vec<u64> = (0..100).collect();
        let ys = par_map(&xs, |x| x * 2);
        assert_eq!(ys, xs.iter().map(|x| x * 2).collect::<Vec<_>>());
    }
}
