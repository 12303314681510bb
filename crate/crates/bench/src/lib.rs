//! Fixtures shared by the criterion benchmarks.

use swlrt::scenarios::{builtin_scenario, sample_trial, Prognostic};
use swlrt::{SimConfig, SubjectRecord};

/// One trial of `n` subjects from the strong-prognostic delayed-effect scenario.
pub fn trial(n: usize, seed: u64) -> Vec<SubjectRecord> {
    let spec = builtin_scenario(Prognostic::Strong, 4).expect("built-in scenario");
    let cfg = SimConfig {
        n_total: n,
        seed,
        ..Default::default()
    };
    sample_trial(&spec, &cfg, 0)
}
