//! Risk tables and Kaplan-Meier curves.
//!
//! Every test statistic in this crate is built from a [`RiskTable`]: one
//! [`RiskRow`] per distinct event time holding the margins of the 2x2 table
//! (arm by event/no event) among the subjects still at risk.
//!
//! Tie convention: a subject censored at exactly an event time is counted
//! as at risk at that time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Treatment arm. `Experimental` is the arm whose events are counted in the
/// score, so negative statistics favour the experimental treatment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arm {
    Control,
    Experimental,
}

impl Arm {
    pub fn index(self) -> usize {
        match self {
            Arm::Control => 0,
            Arm::Experimental => 1,
        }
    }

    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            0 => Ok(Arm::Control),
            1 => Ok(Arm::Experimental),
            _ => Err(Error::validation(format!("arm must be 0 or 1, got {i}"))),
        }
    }

    pub fn swapped(self) -> Self {
        match self {
            Arm::Control => Arm::Experimental,
            Arm::Experimental => Arm::Control,
        }
    }
}

/// One patient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    /// Follow-up time in months.
    pub time: f64,
    /// `true` when the event was observed, `false` when censored.
    pub event: bool,
    pub arm: Arm,
    /// 0-based stratum index.
    pub stratum: usize,
}

impl SubjectRecord {
    pub fn new(time: f64, event: bool, arm: Arm, stratum: usize) -> Self {
        Self {
            time,
            event,
            arm,
            stratum,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.time.is_finite() || self.time < 0.0 {
            return Err(Error::validation(format!(
                "follow-up time must be finite and >= 0, got {}",
                self.time
            )));
        }
        Ok(())
    }
}

/// The 2x2 margins at one distinct event time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub time: f64,
    pub at_risk: u32,
    pub at_risk_exp: u32,
    pub at_risk_ctl: u32,
    pub events: u32,
    pub events_exp: u32,
}

impl RiskRow {
    pub fn events_ctl(&self) -> u32 {
        self.events - self.events_exp
    }

    /// Hypergeometric mean of the experimental-arm event count.
    pub fn expected_exp(&self) -> f64 {
        f64::from(self.events) * f64::from(self.at_risk_exp) / f64::from(self.at_risk)
    }

    /// Hypergeometric variance of the experimental-arm event count. Zero when
    /// only one subject is at risk.
    pub fn variance(&self) -> f64 {
        if self.at_risk < 2 {
            return 0.0;
        }
        let n = f64::from(self.at_risk);
        let o = f64::from(self.events);
        f64::from(self.at_risk_ctl) * f64::from(self.at_risk_exp) * o * (n - o) / (n * n * (n - 1.0))
    }

    /// Observed minus expected on the experimental arm.
    pub fn excess(&self) -> f64 {
        f64::from(self.events_exp) - self.expected_exp()
    }
}

/// Ordered risk rows for one group of subjects (a stratum, or the whole
/// sample when treated as a single stratum).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RiskTable {
    rows: Vec<RiskRow>,
    n_subjects: usize,
}

impl RiskTable {
    /// Tabulates all `records` as one group, ignoring their stratum labels.
    pub fn from_records(records: &[SubjectRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Domain("empty stratum".into()));
        }
        for r in records {
            r.validate()?;
        }
        let mut sorted: Vec<(f64, bool, Arm)> =
            records.iter().map(|r| (r.time, r.event, r.arm)).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut at_risk = [0u32; 2];
        for &(_, _, arm) in &sorted {
            at_risk[arm.index()] += 1;
        }
        let mut rows = Vec::new();
        let mut i = 0;
        while i < sorted.len() {
            let t = sorted[i].0;
            let mut events = [0u32; 2];
            let mut leaving = [0u32; 2];
            while i < sorted.len() && sorted[i].0 == t {
                let (_, event, arm) = sorted[i];
                leaving[arm.index()] += 1;
                if event {
                    events[arm.index()] += 1;
                }
                i += 1;
            }
            if events[0] + events[1] > 0 {
                rows.push(RiskRow {
                    time: t,
                    at_risk: at_risk[0] + at_risk[1],
                    at_risk_exp: at_risk[1],
                    at_risk_ctl: at_risk[0],
                    events: events[0] + events[1],
                    events_exp: events[1],
                });
            }
            at_risk[0] -= leaving[0];
            at_risk[1] -= leaving[1];
        }
        Ok(Self {
            rows,
            n_subjects: records.len(),
        })
    }

    pub fn rows(&self) -> &[RiskRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Number of subjects tabulated, including those censored before the
    /// first event.
    pub fn n_subjects(&self) -> usize {
        self.n_subjects
    }

    pub fn event_times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.time).collect()
    }

    pub fn total_events(&self) -> u32 {
        self.rows.iter().map(|r| r.events).sum()
    }
}

/// Builds the risk table of a single stratum. All records must carry the
/// same stratum index.
pub fn build_risk_table(records: &[SubjectRecord]) -> Result<RiskTable> {
    let Some(first) = records.first() else {
        return Err(Error::Domain("empty stratum".into()));
    };
    if let Some(other) = records.iter().find(|r| r.stratum != first.stratum) {
        return Err(Error::validation(format!(
            "records span strata {} and {}",
            first.stratum, other.stratum
        )));
    }
    RiskTable::from_records(records)
}

/// Kaplan-Meier product-limit curve evaluated at the distinct event times.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct KmCurve {
    pub times: Vec<f64>,
    /// `S(t_j)`.
    pub surv: Vec<f64>,
    /// `S(t_j-)`, the value just before `t_j`.
    pub surv_left: Vec<f64>,
    pub n_risk: Vec<u32>,
    pub n_event: Vec<u32>,
}

impl KmCurve {
    pub fn from_table(table: &RiskTable) -> Self {
        let len = table.len();
        let mut curve = KmCurve {
            times: Vec::with_capacity(len),
            surv: Vec::with_capacity(len),
            surv_left: Vec::with_capacity(len),
            n_risk: Vec::with_capacity(len),
            n_event: Vec::with_capacity(len),
        };
        let mut s = 1.0;
        for row in table.rows() {
            curve.times.push(row.time);
            curve.surv_left.push(s);
            s *= 1.0 - f64::from(row.events) / f64::from(row.at_risk);
            curve.surv.push(s);
            curve.n_risk.push(row.at_risk);
            curve.n_event.push(row.events);
        }
        curve
    }

    /// Right-continuous step function: `S` at the largest event time `<= t`,
    /// or 1 before the first event.
    pub fn survival_at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&x| x <= t);
        if k == 0 {
            1.0
        } else {
            self.surv[k - 1]
        }
    }

    /// Position of `t` among the event times, requiring an exact match.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times
            .binary_search_by(|x| x.total_cmp(&t))
            .ok()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Product-limit estimate from all `records`, pooled over arms and strata.
pub fn km_estimate(records: &[SubjectRecord]) -> Result<KmCurve> {
    if records.is_empty() {
        return Err(Error::Domain("cannot estimate survival from no records".into()));
    }
    Ok(KmCurve::from_table(&RiskTable::from_records(records)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(time: f64, event: bool, arm: u8) -> SubjectRecord {
        SubjectRecord::new(time, event, Arm::from_index(arm).unwrap(), 0)
    }

    #[test]
    fn two_subject_table() {
        let t = build_risk_table(&[rec(2.0, false, 0), rec(1.0, true, 1)]).unwrap();
        assert_eq!(
            t.rows(),
            &[RiskRow {
                time: 1.0,
                at_risk: 2,
                at_risk_exp: 1,
                at_risk_ctl: 1,
                events: 1,
                events_exp: 1
            }]
        );
        assert_eq!(t.n_subjects(), 2);
    }

    #[test]
    fn no_events_gives_empty_table() {
        let t = build_risk_table(&[rec(2.0, false, 0), rec(3.0, false, 1)]).unwrap();
        assert!(t.is_empty());
        assert_eq!(t.n_subjects(), 2);
    }

    #[test]
    fn tied_events_across_arms() {
        // Hand tabulation:
        //   t=1 censored (arm0) -> no row, leaves risk set
        //   t=2 event arm1: at risk {2,3,3,3,5} = 5 (n1=3: t2,t3,t5; n0=2: t3,t3)
        //   t=3 events arm0 + arm1, plus a censored arm0 tie: at risk 4
        //       (n1: t3, t5 = 2; n0: t3, t3 = 2), O=2, O1=1
        //   t=5 censored -> no row
        let data = [
            rec(1.0, false, 0),
            rec(2.0, true, 1),
            rec(3.0, true, 0),
            rec(3.0, true, 1),
            rec(3.0, false, 0),
            rec(5.0, false, 1),
        ];
        let t = build_risk_table(&data).unwrap();
        assert_eq!(t.len(), 2);
        let r = t.rows()[1];
        assert_eq!(r.time, 3.0);
        assert_eq!((r.at_risk, r.at_risk_exp, r.at_risk_ctl), (4, 2, 2));
        assert_eq!((r.events, r.events_exp, r.events_ctl()), (2, 1, 1));
        let r0 = t.rows()[0];
        assert_eq!((r0.at_risk, r0.at_risk_exp, r0.at_risk_ctl), (5, 3, 2));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(build_risk_table(&[]), Err(Error::Domain(_))));
        assert!(matches!(
            build_risk_table(&[rec(-1.0, true, 0)]),
            Err(Error::Validation(_))
        ));
        assert!(build_risk_table(&[rec(f64::NAN, true, 0)]).is_err());
        let mixed = [rec(1.0, true, 0), SubjectRecord::new(2.0, true, Arm::Control, 1)];
        assert!(matches!(build_risk_table(&mixed), Err(Error::Validation(_))));
        assert!(km_estimate(&[]).is_err());
    }

    #[test]
    fn km_two_subjects() {
        let km = km_estimate(&[rec(1.0, true, 1), rec(2.0, false, 0)]).unwrap();
        assert_eq!(km.times, vec![1.0]);
        assert_eq!(km.surv, vec![0.5]);
        assert_eq!(km.surv_left, vec![1.0]);
        assert_eq!(km.survival_at(0.5), 1.0);
        assert_eq!(km.survival_at(1.0), 0.5);
        assert_eq!(km.survival_at(7.0), 0.5);
    }

    #[test]
    fn km_all_censored() {
        let km = km_estimate(&[rec(1.0, false, 1), rec(2.0, false, 0)]).unwrap();
        assert!(km.is_empty());
        for t in [0.0, 1.0, 5.0] {
            assert_eq!(km.survival_at(t), 1.0);
        }
    }

    #[test]
    fn km_interleaved_censoring() {
        // times 1e, 2c, 3e, 4e, 5c
        // S(1) = 4/5; S(3) = 4/5 * 2/3 = 8/15; S(4) = 8/15 * 1/2 = 4/15
        let data = [
            rec(3.0, true, 0),
            rec(1.0, true, 1),
            rec(5.0, false, 0),
            rec(2.0, false, 1),
            rec(4.0, true, 1),
        ];
        let km = km_estimate(&data).unwrap();
        assert_eq!(km.times, vec![1.0, 3.0, 4.0]);
        let expect = [0.8, 8.0 / 15.0, 4.0 / 15.0];
        for (s, e) in km.surv.iter().zip(expect) {
            assert!((s - e).abs() < 1e-15);
        }
        let left = [1.0, 0.8, 8.0 / 15.0];
        for (s, e) in km.surv_left.iter().zip(left) {
            assert!((s - e).abs() < 1e-15);
        }
        assert_eq!(km.n_risk, vec![5, 3, 2]);
        assert!((km.survival_at(3.5) - 8.0 / 15.0).abs() < 1e-15);
    }

    fn arb_records() -> impl Strategy<Value = Vec<SubjectRecord>> {
        prop::collection::vec((1u32..15, any::<bool>(), 0u8..2), 1..40).prop_map(|v| {
            v.into_iter()
                .map(|(t, e, a)| rec(f64::from(t), e, a))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn rows_respect_hypergeometric_support(data in arb_records()) {
            let t = RiskTable::from_records(&data).unwrap();
            let mut prev_risk = u32::MAX;
            let mut prev_time = f64::NEG_INFINITY;
            for r in t.rows() {
                prop_assert_eq!(r.at_risk, r.at_risk_exp + r.at_risk_ctl);
                prop_assert!(r.events >= 1 && r.events <= r.at_risk);
                let lo = r.events.saturating_sub(r.at_risk_ctl);
                prop_assert!(lo <= r.events_exp);
                prop_assert!(r.events_exp <= r.events.min(r.at_risk_exp));
                prop_assert!(r.at_risk <= prev_risk);
                prop_assert!(r.time > prev_time);
                prev_risk = r.at_risk;
                prev_time = r.time;
            }
        }

        #[test]
        fn arm_relabel_swaps_margins(data in arb_records()) {
            let swapped: Vec<_> = data
                .iter()
                .map(|r| SubjectRecord { arm: r.arm.swapped(), ..*r })
                .collect();
            let a = RiskTable::from_records(&data).unwrap();
            let b = RiskTable::from_records(&swapped).unwrap();
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.rows().iter().zip(b.rows()) {
                prop_assert_eq!(x.at_risk, y.at_risk);
                prop_assert_eq!(x.events, y.events);
                prop_assert_eq!(x.at_risk_exp, y.at_risk_ctl);
                prop_assert_eq!(x.events_exp, y.events_ctl());
            }
        }

        #[test]
        fn km_without_censoring_is_empirical_survival(
            times in prop::collection::vec(1u32..20, 1..30)
        ) {
            let data: Vec<_> = times.iter().map(|&t| rec(f64::from(t), true, 0)).collect();
            let km = km_estimate(&data).unwrap();
            let n = data.len() as f64;
            for q in 0..22 {
                let q = f64::from(q);
                let beyond = times.iter().filter(|&&t| f64::from(t) > q).count() as f64;
                prop_assert!((km.survival_at(q) - beyond / n).abs() < 1e-12);
            }
            for w in km.surv.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
        }
    }
}
