//! Monte Carlo estimation of rejection rates.
//!
//! Replicates are evaluated in parallel on the current rayon pool. Each
//! replicate draws from its own random stream (see
//! [`replicate_rng`](crate::scenarios::replicate_rng)) and the reduction only
//! sums integer counts, so results do not depend on the number of workers.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logrank::{run_all, TestName};
use crate::scenarios::{check_unique_names, sample_trial, Prognostic, ScenarioSpec, SimConfig};

const N_TESTS: usize = TestName::ALL.len();

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestTally {
    pub test: TestName,
    pub rejections: u64,
    /// Replicates in which the statistic could not be formed. These count as
    /// non-rejections.
    pub failures: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub scenario: String,
    pub prognostic: Option<Prognostic>,
    pub effect: Option<u8>,
    pub n_reps: u64,
    pub tallies: Vec<TestTally>,
}

impl SimResult {
    pub fn tally(&self, test: TestName) -> &TestTally {
        self.tallies
            .iter()
            .find(|t| t.test == test)
            .expect("every test is tallied")
    }

    pub fn proportion(&self, test: TestName) -> f64 {
        self.tally(test).rejections as f64 / self.n_reps as f64
    }

    /// Monte Carlo standard error `sqrt(p (1 - p) / n_reps)`.
    pub fn standard_error(&self, test: TestName) -> f64 {
        mc_standard_error(self.proportion(test), self.n_reps)
    }

    pub fn total_failures(&self) -> u64 {
        self.tallies.iter().map(|t| t.failures).sum()
    }
}

pub fn mc_standard_error(p: f64, n_reps: u64) -> f64 {
    (p * (1.0 - p) / n_reps as f64).sqrt()
}

/// Per-replicate outcome: rejections then failures, indexed like
/// [`TestName::ALL`].
type Counts = [u64; 2 * N_TESTS];

fn add(mut a: Counts, b: Counts) -> Counts {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

fn replicate(spec: &ScenarioSpec, config: &SimConfig, rep: u64) -> Counts {
    let mut counts = [0; 2 * N_TESTS];
    let records = sample_trial(spec, config, rep);
    match run_all(&records, spec.n_strata(), config.weight_spec(), config.pooling) {
        Ok(analysis) => {
            for (k, (_, res)) in analysis.results.iter().enumerate() {
                match res {
                    Ok(r) if r.p_one_sided < config.alpha_one_sided => counts[k] += 1,
                    Ok(_) => {}
                    Err(_) => counts[N_TESTS + k] += 1,
                }
            }
        }
        Err(e) => {
            log::debug!("{} replicate {rep}: {e}", spec.name);
            for c in &mut counts[N_TESTS..] {
                *c += 1;
            }
        }
    }
    counts
}

/// Rejection counts of all seven tests at one-sided level
/// `config.alpha_one_sided` (lower tail) over `config.n_reps` replicates.
pub fn estimate_power(spec: &ScenarioSpec, config: &SimConfig) -> Result<SimResult> {
    spec.validate()?;
    config.validate()?;
    let counts = (0..config.n_reps)
        .into_par_iter()
        .map(|rep| replicate(spec, config, rep))
        .reduce(|| [0; 2 * N_TESTS], add);

    let tallies: Vec<TestTally> = TestName::ALL
        .into_iter()
        .enumerate()
        .map(|(k, test)| TestTally {
            test,
            rejections: counts[k],
            failures: counts[N_TESTS + k],
        })
        .collect();
    let result = SimResult {
        scenario: spec.name.clone(),
        prognostic: spec.prognostic,
        effect: spec.effect,
        n_reps: config.n_reps,
        tallies,
    };
    for t in &result.tallies {
        if t.failures * 100 > config.n_reps {
            log::warn!(
                "{}: {} failed in {} of {} replicates (counted as non-rejections)",
                spec.name,
                t.test,
                t.failures,
                config.n_reps
            );
        }
    }
    Ok(result)
}

/// Runs every scenario with the same configuration. Names must be unique;
/// this is checked before any simulation starts.
pub fn run_grid(scenarios: &[ScenarioSpec], config: &SimConfig) -> Result<Vec<SimResult>> {
    check_unique_names(scenarios)?;
    for s in scenarios {
        s.validate()?;
    }
    if !scenarios.is_empty() {
        config.validate()?;
    }
    scenarios.iter().map(|s| estimate_power(s, config)).collect()
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::validation(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

pub const CSV_HEADER: [&str; 9] = [
    "scenario",
    "prognostic",
    "effect",
    "test",
    "rejections",
    "reps",
    "proportion",
    "se",
    "failures",
];

/// Long-format results table, one row per scenario and test. Numbers use
/// the shortest representation that round-trips.
pub fn write_csv<W: Write>(results: &[SimResult], out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Format(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in results {
        for t in &r.tallies {
            let p = r.proportion(t.test);
            w.write_record([
                r.scenario.clone(),
                r.prognostic.map(|p| p.to_string()).unwrap_or_default(),
                r.effect.map(|e| e.to_string()).unwrap_or_default(),
                t.test.to_string(),
                t.rejections.to_string(),
                r.n_reps.to_string(),
                p.to_string(),
                mc_standard_error(p, r.n_reps).to_string(),
                t.failures.to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}
