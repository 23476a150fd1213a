//! Parallel driver for the simulation harness.
//!
//! Replications run on the rayon pool and are reduced in replication order,
//! so a report does not depend on the number of worker threads.

use jointmct_core::simulate::{plan, run_replication, summarize, Scenario, SimReport};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Run every replication of `s`; `threads = None` uses rayon's default pool.
pub fn run_parallel(s: &Scenario, threads: Option<usize>) -> Result<SimReport> {
    let p = plan(s)?;
    let work = || -> Result<SimReport> {
        let outcomes = (0..p.replications() as u64)
            .into_par_iter()
            .map(|rep| run_replication(&p, rep))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(summarize(&p, &outcomes))
    };
    match threads {
        None => work(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(work),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use jointmct_core::simulate::run_scenario;

    #[test]
    fn matches_sequential_for_any_thread_count() {
        let s = Scenario::global_null(2, 2, 5, 40, 17);
        let seq = run_scenario(&s).unwrap();
        assert_eq!(run_parallel(&s, Some(1)).unwrap(), seq);
        assert_eq!(run_parallel(&s, Some(3)).unwrap(), seq);
    }
}
