//! Large-sample drift of the log-rank score under a scenario.
//!
//! For a trial of `n` subjects the score `U` and its null variance `V` grow
//! like `n * drift` and `n * information`, so the log-rank statistic is
//! approximately `N(sqrt(n) * drift / sqrt(information), 1)`. These
//! integrals are evaluated numerically and are used to check the
//! calibration of the built-in scenarios (for instance that patterns 8 and 9
//! carry no marginal effect).

use super::{ScenarioSpec, SimConfig};
use crate::survival::Arm;

/// Per-subject score drift and information.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreRate {
    pub drift: f64,
    pub information: f64,
}

impl ScoreRate {
    /// Noncentrality of the standardised statistic for `n` subjects.
    pub fn noncentrality(&self, n: f64) -> f64 {
        n.sqrt() * self.drift / self.information.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Drift {
    /// Whole population treated as one stratum.
    pub marginal: ScoreRate,
    /// Per stratum, scaled to the full trial size (prevalence included).
    pub strata: Vec<ScoreRate>,
}

impl Drift {
    /// Noncentrality of the unstratified log-rank statistic.
    pub fn z_marginal(&self, n: f64) -> f64 {
        self.marginal.noncentrality(n)
    }

    /// Noncentrality of the stratified log-rank statistic.
    pub fn z_stratified(&self, n: f64) -> f64 {
        let u: f64 = self.strata.iter().map(|s| s.drift).sum();
        let v: f64 = self.strata.iter().map(|s| s.information).sum();
        n.sqrt() * u / v.sqrt()
    }
}

const GRID: usize = 20_000;

/// Probability that a subject is still under follow-up at time `t`.
fn follow_up(config: &SimConfig, t: f64) -> f64 {
    let min_follow = config.study_months - config.recruitment_months;
    if t <= min_follow {
        1.0
    } else if t >= config.study_months {
        0.0
    } else {
        (config.study_months - t) / config.recruitment_months
    }
}

/// Integrates `f` over `[0, study_months]` with the composite Simpson rule.
fn simpson(config: &SimConfig, f: impl Fn(f64) -> f64) -> f64 {
    let h = config.study_months / GRID as f64;
    let mut acc = f(0.0) + f(config.study_months);
    for k in 1..GRID {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(k as f64 * h);
    }
    acc * h / 3.0
}

/// Drift and information given at-risk densities `y_a(t)` and hazards
/// `lambda_a(t)` for control (`a = 0`) and experimental (`a = 1`).
fn rate(config: &SimConfig, at_risk: impl Fn(f64) -> ([f64; 2], [f64; 2])) -> ScoreRate {
    let drift = simpson(config, |t| {
        let ([y0, y1], [l0, l1]) = at_risk(t);
        let y = y0 + y1;
        if y <= 0.0 {
            0.0
        } else {
            y0 * y1 / y * (l1 - l0)
        }
    });
    let information = simpson(config, |t| {
        let ([y0, y1], [l0, l1]) = at_risk(t);
        let y = y0 + y1;
        if y <= 0.0 {
            0.0
        } else {
            y0 * y1 / (y * y) * (y0 * l0 + y1 * l1)
        }
    });
    ScoreRate { drift, information }
}

pub fn drift(spec: &ScenarioSpec, config: &SimConfig) -> Drift {
    let p_exp = config.experimental_fraction();
    let share = |arm: Arm| match arm {
        Arm::Control => 1.0 - p_exp,
        Arm::Experimental => p_exp,
    };
    let strata = spec
        .strata
        .iter()
        .map(|s| {
            rate(config, |t| {
                let g = follow_up(config, t);
                let mut y = [0.0; 2];
                let mut l = [0.0; 2];
                for arm in [Arm::Control, Arm::Experimental] {
                    let d = s.arm(arm);
                    y[arm.index()] = s.prevalence * share(arm) * d.survival(t) * g;
                    l[arm.index()] = d.hazard(t);
                }
                (y, l)
            })
        })
        .collect();
    let marginal = rate(config, |t| {
        let g = follow_up(config, t);
        let mut y = [0.0; 2];
        let mut l = [0.0; 2];
        for arm in [Arm::Control, Arm::Experimental] {
            let (surv, dens) = spec.strata.iter().fold((0.0, 0.0), |(s, f), st| {
                let d = st.arm(arm);
                (s + st.prevalence * d.survival(t), f + st.prevalence * d.density(t))
            });
            y[arm.index()] = share(arm) * surv * g;
            l[arm.index()] = if surv > 0.0 { dens / surv } else { 0.0 };
        }
        (y, l)
    });
    Drift { marginal, strata }
}
