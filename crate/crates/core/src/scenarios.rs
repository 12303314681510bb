//! Piecewise-exponential trial models, the built-in scenario grid, and the
//! trial sampler.
//!
//! Built-in scenarios are loaded from `data/scenarios.json`, which is also
//! the schema accepted for user scenario files:
//!
//! ```json
//! { "version": 1,
//!   "scenarios": [
//!     { "name": "strong-4", "prognostic": "strong", "effect": 4,
//!       "strata": [
//!         { "label": "poor", "prevalence": 0.5,
//!           "control":      { "breakpoints": [],    "rates": [0.231] },
//!           "experimental": { "breakpoints": [6.0], "rates": [0.231, 0.116] } } ] } ] }
//! ```
//!
//! Rates are hazards per month; `rates` has one more entry than
//! `breakpoints`. `prognostic` and `effect` are optional for user scenarios.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survival::{Arm, SubjectRecord};
use crate::weights::{Pooling, WeightSpec};

pub mod asymptotic;

const BUILTIN_JSON: &str = include_str!("../data/scenarios.json");
pub const SCENARIO_FILE_VERSION: u32 = 1;

/// Hazard that is constant between breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseExp {
    breakpoints: Vec<f64>,
    rates: Vec<f64>,
}

impl PiecewiseExp {
    pub fn new(breakpoints: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        let d = Self { breakpoints, rates };
        d.validate()?;
        Ok(d)
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(Vec::new(), vec![rate])
    }

    pub fn from_median(median: f64) -> Result<Self> {
        if !(median > 0.0 && median.is_finite()) {
            return Err(Error::validation(format!("median must be positive, got {median}")));
        }
        Self::exponential(std::f64::consts::LN_2 / median)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rates.len() != self.breakpoints.len() + 1 {
            return Err(Error::validation(format!(
                "{} rates for {} breakpoints (need one more rate than breakpoints)",
                self.rates.len(),
                self.breakpoints.len()
            )));
        }
        if let Some(r) = self.rates.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(Error::validation(format!("hazard rates must be positive, got {r}")));
        }
        let mut prev = 0.0;
        for &b in &self.breakpoints {
            if !(b.is_finite() && b > prev) {
                return Err(Error::validation(
                    "breakpoints must be positive and strictly increasing",
                ));
            }
            prev = b;
        }
        Ok(())
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn hazard(&self, t: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b <= t);
        self.rates[k]
    }

    pub fn cumulative_hazard(&self, t: f64) -> f64 {
        let mut h = 0.0;
        let mut start = 0.0;
        for (k, &rate) in self.rates.iter().enumerate() {
            let end = self.breakpoints.get(k).copied().unwrap_or(f64::INFINITY);
            if t <= end {
                return h + rate * (t - start);
            }
            h += rate * (end - start);
            start = end;
        }
        h
    }

    pub fn survival(&self, t: f64) -> f64 {
        (-self.cumulative_hazard(t)).exp()
    }

    pub fn density(&self, t: f64) -> f64 {
        self.hazard(t) * self.survival(t)
    }

    /// Time `t` with `S(t) = 1 - u`.
    pub fn inverse_cdf(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::validation(format!("u must lie in (0, 1), got {u}")));
        }
        Ok(self.time_at_cumulative_hazard(-(-u).ln_1p()))
    }

    fn time_at_cumulative_hazard(&self, mut target: f64) -> f64 {
        let mut start = 0.0;
        for (k, &rate) in self.rates.iter().enumerate() {
            let end = self.breakpoints.get(k).copied().unwrap_or(f64::INFINITY);
            let segment = rate * (end - start);
            if target <= segment {
                return start + target / rate;
            }
            target -= segment;
            start = end;
        }
        unreachable!("last segment is unbounded")
    }

    /// Same breakpoints with every rate multiplied by `hr` from `delay`
    /// onwards.
    pub fn with_hazard_ratio(&self, hr: f64, delay: f64) -> Result<Self> {
        let mut breakpoints = Vec::new();
        let mut rates = Vec::new();
        let mut start = 0.0;
        for (k, &rate) in self.rates.iter().enumerate() {
            let end = self.breakpoints.get(k).copied().unwrap_or(f64::INFINITY);
            if delay > start && delay < end {
                rates.push(rate);
                breakpoints.push(delay);
                rates.push(rate * hr);
            } else {
                rates.push(if start >= delay { rate * hr } else { rate });
            }
            if end.is_finite() {
                breakpoints.push(end);
            }
            start = end;
        }
        Self::new(breakpoints, rates)
    }
}

/// Prognostic strength of the stratifying covariate in the built-in grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Prognostic {
    None,
    Moderate,
    Strong,
}

impl Prognostic {
    pub const ALL: [Prognostic; 3] = [Prognostic::None, Prognostic::Moderate, Prognostic::Strong];

    pub fn as_str(self) -> &'static str {
        match self {
            Prognostic::None => "none",
            Prognostic::Moderate => "moderate",
            Prognostic::Strong => "strong",
        }
    }

    /// Control-arm medians (poor, good) in months.
    pub fn control_medians(self) -> (f64, f64) {
        match self {
            Prognostic::None => (8.0, 8.0),
            Prognostic::Moderate => (6.0, 10.0),
            Prognostic::Strong => (3.0, 15.0),
        }
    }
}

impl fmt::Display for Prognostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Prognostic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Prognostic::None),
            "moderate" => Ok(Prognostic::Moderate),
            "strong" => Ok(Prognostic::Strong),
            other => Err(Error::validation(format!(
                "unknown prognostic strength '{other}' (expected none, moderate or strong)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumModel {
    pub label: String,
    pub prevalence: f64,
    pub control: PiecewiseExp,
    pub experimental: PiecewiseExp,
}

impl StratumModel {
    pub fn arm(&self, arm: Arm) -> &PiecewiseExp {
        match arm {
            Arm::Control => &self.control,
            Arm::Experimental => &self.experimental,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prognostic: Option<Prognostic>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effect: Option<u8>,
    pub strata: Vec<StratumModel>,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::validation("scenario name must not be empty"));
        }
        if self.strata.is_empty() {
            return Err(Error::validation(format!("scenario {}: no strata", self.name)));
        }
        let mut total = 0.0;
        for s in &self.strata {
            if !(0.0..=1.0).contains(&s.prevalence) {
                return Err(Error::validation(format!(
                    "scenario {}: prevalence {} outside [0, 1]",
                    self.name, s.prevalence
                )));
            }
            total += s.prevalence;
            s.control.validate()?;
            s.experimental.validate()?;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!(
                "scenario {}: prevalences sum to {total}, not 1",
                self.name
            )));
        }
        if let Some(e) = self.effect {
            if !(1..=9).contains(&e) {
                return Err(Error::validation(format!("effect pattern {e} outside 1..=9")));
            }
        }
        Ok(())
    }

    pub fn n_strata(&self) -> usize {
        self.strata.len()
    }
}

/// On-disk collection of scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub version: u32,
    pub scenarios: Vec<ScenarioSpec>,
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScenarioFile =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if file.version != SCENARIO_FILE_VERSION {
            return Err(Error::Format(format!(
                "unsupported scenario file version {} (expected {SCENARIO_FILE_VERSION})",
                file.version
            )));
        }
        check_unique_names(&file.scenarios)?;
        for s in &file.scenarios {
            s.validate()?;
        }
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        // Plain data, serialization cannot fail.
        serde_json::to_string_pretty(self).unwrap()
    }
}

pub fn check_unique_names(scenarios: &[ScenarioSpec]) -> Result<()> {
    let mut seen = HashSet::new();
    for s in scenarios {
        if !seen.insert(s.name.as_str()) {
            return Err(Error::validation(format!("duplicate scenario name '{}'", s.name)));
        }
    }
    Ok(())
}

/// The 27 built-in scenarios: prognostic strength by treatment-effect
/// pattern 1..=9, in that order.
pub fn builtin_scenarios() -> &'static [ScenarioSpec] {
    static CELL: OnceLock<Vec<ScenarioSpec>> = OnceLock::new();
    CELL.get_or_init(|| {
        ScenarioFile::from_json(BUILTIN_JSON)
            .expect("bundled scenario file is valid")
            .scenarios
    })
}

pub fn builtin_file() -> ScenarioFile {
    ScenarioFile {
        version: SCENARIO_FILE_VERSION,
        scenarios: builtin_scenarios().to_vec(),
    }
}

/// Built-in scenario for a prognostic strength and effect pattern.
///
/// Patterns: 1-3 proportional hazards (homogeneous, poor stratum benefits
/// more, good stratum benefits more); 4-6 the same three shapes after a
/// 6-month delay during which the arms share a hazard; 7 no effect; 8 and 9
/// opposite effects in the two strata with no marginal log-rank effect.
pub fn builtin_scenario(prognostic: Prognostic, effect: u8) -> Result<ScenarioSpec> {
    if !(1..=9).contains(&effect) {
        return Err(Error::validation(format!("effect pattern {effect} outside 1..=9")));
    }
    builtin_scenarios()
        .iter()
        .find(|s| s.prognostic == Some(prognostic) && s.effect == Some(effect))
        .cloned()
        .ok_or_else(|| Error::Internal(format!("built-in scenario {prognostic}-{effect} missing")))
}

pub fn builtin_by_name(name: &str) -> Result<ScenarioSpec> {
    builtin_scenarios()
        .iter()
        .find(|s| s.name == name)
        .cloned()
        .ok_or_else(|| Error::validation(format!("unknown built-in scenario '{name}'")))
}

/// How subjects are randomised to arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Allocation {
    /// Fixed arm totals (by the allocation ratio) shuffled across the whole
    /// trial, independently of stratum.
    #[default]
    Complete,
    /// Shuffled blocks of `experimental + control` assignments per stratum.
    Permuted,
    /// Independent draws with probability `experimental / (experimental + control)`.
    Bernoulli,
}

impl FromStr for Allocation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complete" => Ok(Allocation::Complete),
            "permuted" => Ok(Allocation::Permuted),
            "bernoulli" => Ok(Allocation::Bernoulli),
            other => Err(Error::validation(format!(
                "unknown allocation '{other}' (expected complete, permuted or bernoulli)"
            ))),
        }
    }
}

impl fmt::Display for Allocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Allocation::Complete => "complete",
            Allocation::Permuted => "permuted",
            Allocation::Bernoulli => "bernoulli",
        })
    }
}

/// Trial and Monte Carlo settings. Defaults describe a 344-patient trial
/// with 9 months of uniform accrual, 24 months total duration and 1:1
/// randomisation, analysed at one-sided alpha 0.025 with `t* = 12`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_total: usize,
    pub recruitment_months: f64,
    pub study_months: f64,
    /// Experimental:control allocation ratio.
    pub alloc_ratio: (u32, u32),
    pub allocation: Allocation,
    pub n_reps: u64,
    pub alpha_one_sided: f64,
    pub t_star: f64,
    pub pooling: Pooling,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_total: 344,
            recruitment_months: 9.0,
            study_months: 24.0,
            alloc_ratio: (1, 1),
            allocation: Allocation::Complete,
            n_reps: 1000,
            alpha_one_sided: 0.025,
            t_star: 12.0,
            pooling: Pooling::PerStratum,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_total < 2 {
            return Err(Error::validation("need at least 2 subjects"));
        }
        if !(self.recruitment_months >= 0.0 && self.recruitment_months.is_finite()) {
            return Err(Error::validation("recruitment duration must be finite and >= 0"));
        }
        if !(self.study_months >= self.recruitment_months && self.study_months.is_finite()) {
            return Err(Error::validation(
                "study duration must be finite and at least the recruitment duration",
            ));
        }
        if self.alloc_ratio.0 == 0 || self.alloc_ratio.1 == 0 {
            return Err(Error::validation("allocation ratio terms must be positive"));
        }
        if self.n_reps == 0 {
            return Err(Error::validation("number of replicates must be at least 1"));
        }
        if !(self.alpha_one_sided > 0.0 && self.alpha_one_sided < 1.0) {
            return Err(Error::validation("alpha must lie in (0, 1)"));
        }
        WeightSpec::modest(self.t_star)?;
        Ok(())
    }

    pub fn weight_spec(&self) -> WeightSpec {
        WeightSpec::Modest { t_star: self.t_star }
    }

    pub fn experimental_fraction(&self) -> f64 {
        let (e, c) = self.alloc_ratio;
        f64::from(e) / f64::from(e + c)
    }
}

/// Random stream for one replicate: the ChaCha8 key comes from the master
/// seed and the stream number is the replicate index, so replicates are
/// independent of each other and of evaluation order.
pub fn replicate_rng(master_seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replicate);
    rng
}

/// Draws one trial. Deterministic in `(spec, config, replicate)`.
///
/// Per replicate the draws are: all stratum labels, then arm assignments in
/// subject order, then recruitment and latent event time per subject.
pub fn sample_trial(spec: &ScenarioSpec, config: &SimConfig, replicate: u64) -> Vec<SubjectRecord> {
    let mut rng = replicate_rng(config.seed, replicate);
    sample_trial_with(spec, config, &mut rng)
}

pub fn sample_trial_with<R: Rng>(
    spec: &ScenarioSpec,
    config: &SimConfig,
    rng: &mut R,
) -> Vec<SubjectRecord> {
    let n = config.n_total;
    let cumulative: Vec<f64> = spec
        .strata
        .iter()
        .scan(0.0, |acc, s| {
            *acc += s.prevalence;
            Some(*acc)
        })
        .collect();
    let last = spec.strata.len() - 1;
    let strata: Vec<usize> = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            cumulative.iter().position(|&c| u < c).unwrap_or(last)
        })
        .collect();

    let (e, c) = config.alloc_ratio;
    let arms: Vec<Arm> = match config.allocation {
        Allocation::Bernoulli => {
            let p = config.experimental_fraction();
            (0..n)
                .map(|_| {
                    if rng.random::<f64>() < p {
                        Arm::Experimental
                    } else {
                        Arm::Control
                    }
                })
                .collect()
        }
        Allocation::Complete => {
            let n_exp = (n as f64 * config.experimental_fraction()).round() as usize;
            let mut arms: Vec<Arm> = std::iter::repeat_n(Arm::Experimental, n_exp)
                .chain(std::iter::repeat_n(Arm::Control, n - n_exp))
                .collect();
            shuffle(&mut arms, rng);
            arms
        }
        Allocation::Permuted => {
            let mut blocks: Vec<Vec<Arm>> = vec![Vec::new(); spec.strata.len()];
            strata
                .iter()
                .map(|&s| {
                    let block = &mut blocks[s];
                    if block.is_empty() {
                        block.extend(std::iter::repeat_n(Arm::Experimental, e as usize));
                        block.extend(std::iter::repeat_n(Arm::Control, c as usize));
                        shuffle(block, rng);
                    }
                    block.pop().expect("block refilled above")
                })
                .collect()
        }
    };

    strata
        .into_iter()
        .zip(arms)
        .map(|(s, arm)| {
            let recruited = config.recruitment_months * rng.random::<f64>();
            let follow_up = config.study_months - recruited;
            let u: f64 = rng.sample(Open01);
            let latent = spec.strata[s]
                .arm(arm)
                .inverse_cdf(u)
                .expect("Open01 lies in (0, 1)");
            let event = latent <= follow_up;
            SubjectRecord::new(if event { latent } else { follow_up }, event, arm, s)
        })
        .collect()
}

/// Fisher-Yates, written out so the draw sequence is pinned by this crate.
fn shuffle<T, R: Rng>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}
