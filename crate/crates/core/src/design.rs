//! Fixed-design sample size for a 1:1 trial with exponential survival and
//! uniform accrual.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;

/// Schoenfeld's required number of events for a 1:1 log-rank test,
/// `4 ((z_{1-alpha} + z_{power}) / log(m_c / m_e))^2`, rounded up.
pub fn required_events(median_control: f64, median_exp: f64, alpha_one_sided: f64, power: f64) -> Result<u64> {
    for (name, m) in [("control", median_control), ("experimental", median_exp)] {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::validation(format!("{name} median must be positive, got {m}")));
        }
    }
    if median_control == median_exp {
        return Err(Error::Domain("equal medians: zero treatment effect".into()));
    }
    if !(alpha_one_sided > 0.0 && alpha_one_sided < 1.0) {
        return Err(Error::validation("alpha must lie in (0, 1)"));
    }
    if !(power > 0.0 && power < 1.0) {
        return Err(Error::validation("power must lie in (0, 1)"));
    }
    let z = normal::quantile(1.0 - alpha_one_sided) + normal::quantile(power);
    let log_hr = (median_control / median_exp).ln();
    Ok((4.0 * (z / log_hr).powi(2)).ceil() as u64)
}

/// Probability that a subject recruited uniformly over `recruit_months` has
/// an exponential event (median `median`) before `study_months`.
pub fn event_probability(median: f64, recruit_months: f64, study_months: f64) -> f64 {
    let rate = std::f64::consts::LN_2 / median;
    if recruit_months == 0.0 {
        return -(-rate * study_months).exp_m1();
    }
    let min_follow = study_months - recruit_months;
    // 1 - (1/R) * integral_{T-R}^{T} exp(-rate f) df
    1.0 - ((-rate * min_follow).exp() - (-rate * study_months).exp()) / (rate * recruit_months)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub events: u64,
    pub patients: u64,
    pub per_arm: u64,
    pub event_prob_control: f64,
    pub event_prob_experimental: f64,
    /// Expected events at study end with `patients` enrolled.
    pub expected_events: f64,
}

const MAX_PATIENTS: u64 = 100_000_000;

/// Smallest balanced enrolment whose expected event count at study end
/// reaches the Schoenfeld target.
pub fn design(
    median_control: f64,
    median_exp: f64,
    alpha_one_sided: f64,
    power: f64,
    recruit_months: f64,
    study_months: f64,
) -> Result<Design> {
    let events = required_events(median_control, median_exp, alpha_one_sided, power)?;
    if !(recruit_months >= 0.0 && recruit_months.is_finite()) {
        return Err(Error::validation("recruitment duration must be finite and >= 0"));
    }
    if !(study_months >= recruit_months && study_months.is_finite()) {
        return Err(Error::validation(
            "study duration must be finite and at least the recruitment duration",
        ));
    }
    let pc = event_probability(median_control, recruit_months, study_months);
    let pe = event_probability(median_exp, recruit_months, study_months);
    let per_pair = pc + pe;
    if per_pair.is_nan() || per_pair <= 0.0 {
        return Err(Error::Domain(format!(
            "infeasible horizon: no events expected within {study_months} months"
        )));
    }
    let expected = |per_arm: u64| per_arm as f64 * per_pair;
    // Start from the closed-form bound and step to the smallest per-arm size
    // that reaches the target; the float guard only ever moves it by one.
    let mut per_arm = (events as f64 / per_pair).ceil() as u64;
    while per_arm > 0 && expected(per_arm - 1) >= events as f64 {
        per_arm -= 1;
    }
    while expected(per_arm) < events as f64 {
        per_arm += 1;
    }
    if 2 * per_arm > MAX_PATIENTS {
        return Err(Error::Domain(format!(
            "infeasible horizon: {} patients needed for {events} events",
            2 * per_arm
        )));
    }
    Ok(Design {
        events,
        patients: 2 * per_arm,
        per_arm,
        event_prob_control: pc,
        event_prob_experimental: pe,
        expected_events: expected(per_arm),
    })
}
