//! Per-event-time weights for the weighted log-rank statistics.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survival::KmCurve;

/// Weight scheme applied to each event time's observed-minus-expected term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WeightSpec {
    /// `w_j = 1`, the ordinary log-rank test.
    Unit,
    /// `w_j = 1 / max(S(t_j-), S(t*))` with `S` the arm-pooled Kaplan-Meier
    /// estimate. `t_star = 0` reproduces the unit weights.
    Modest { t_star: f64 },
}

impl WeightSpec {
    pub fn modest(t_star: f64) -> Result<Self> {
        if !t_star.is_finite() || t_star < 0.0 {
            return Err(Error::validation(format!(
                "t* must be finite and >= 0, got {t_star}"
            )));
        }
        Ok(WeightSpec::Modest { t_star })
    }

    pub fn t_star(&self) -> f64 {
        match *self {
            WeightSpec::Unit => 0.0,
            WeightSpec::Modest { t_star } => t_star,
        }
    }
}

/// Which Kaplan-Meier curve supplies `S` for stratified weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    /// Each stratum uses the curve pooled over arms within that stratum.
    #[default]
    PerStratum,
    /// Every stratum uses the curve pooled over arms and strata.
    AcrossStrata,
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pooling::PerStratum => "per-stratum",
            Pooling::AcrossStrata => "across-strata",
        })
    }
}

impl FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-stratum" => Ok(Pooling::PerStratum),
            "across-strata" => Ok(Pooling::AcrossStrata),
            other => Err(Error::validation(format!(
                "unknown pooling '{other}' (expected per-stratum or across-strata)"
            ))),
        }
    }
}

/// Weights aligned with `event_times`, every one of which must be an event
/// time of `km`.
pub fn compute_weights(spec: WeightSpec, km: &KmCurve, event_times: &[f64]) -> Result<Vec<f64>> {
    let t_star = match spec {
        WeightSpec::Unit => return Ok(vec![1.0; event_times.len()]),
        WeightSpec::Modest { t_star: 0.0 } => return Ok(vec![1.0; event_times.len()]),
        WeightSpec::Modest { t_star } => t_star,
    };
    let floor = km.survival_at(t_star);
    event_times
        .iter()
        .map(|&t| {
            let idx = km.index_of(t).ok_or_else(|| {
                Error::Internal(format!("event time {t} missing from the Kaplan-Meier support"))
            })?;
            let left = km.surv_left[idx];
            // Someone is at risk at every event time, so S(t_j-) > 0.
            if left <= 0.0 {
                return Err(Error::Internal(format!("S({t}-) = 0 at an event time")));
            }
            Ok(1.0 / left.max(floor))
        })
        .collect()
}
