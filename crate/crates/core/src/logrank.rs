//! Score statistics and the seven log-rank test variants.
//!
//! Each stratum contributes a [`StratumScore`]: the unweighted score and
//! variance `(U, V)` and their weighted counterparts `(U_W, V_W)`. The
//! stratified statistics differ only in how those per-stratum quantities are
//! combined:
//!
//! | name    | combination                                              |
//! |---------|----------------------------------------------------------|
//! | `Zs`    | `sum U / sqrt(sum V)`                                    |
//! | `Zs_n`  | `sum n U/V / sqrt(sum n^2/V)`                            |
//! | `Zs_Wu` | `sum U_W / sqrt(sum V_W)`                                |
//! | `Zs_Wz` | `sum sqrt(V) U_W/sqrt(V_W) / sqrt(sum V)`                |
//! | `Zs_Wn` | `sum n U_W/V_W / sqrt(sum n^2/V_W)`                      |
//!
//! Negative statistics favour the experimental arm.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::survival::{KmCurve, RiskTable, SubjectRecord};
use crate::weights::{compute_weights, Pooling, WeightSpec};

/// Score sums for one stratum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StratumScore {
    pub u: f64,
    pub v: f64,
    pub u_w: f64,
    pub v_w: f64,
    /// Subjects in the stratum.
    pub n: usize,
    /// Distinct event times.
    pub d: usize,
}

impl StratumScore {
    /// Peto log-hazard-ratio estimate `U / V`; `None` when `V = 0`.
    pub fn peto_log_hr(&self) -> Option<f64> {
        (self.v > 0.0).then(|| self.u / self.v)
    }

    pub fn weighted_peto_log_hr(&self) -> Option<f64> {
        (self.v_w > 0.0).then(|| self.u_w / self.v_w)
    }

    /// Unit-weight view of this score, i.e. `(U_W, V_W) := (U, V)`.
    pub fn unweighted(&self) -> Self {
        Self {
            u_w: self.u,
            v_w: self.v,
            ..*self
        }
    }
}

/// Accumulates scores over the rows of `table` with `weights` aligned to the
/// rows.
pub fn stratum_score(table: &RiskTable, weights: &[f64]) -> Result<StratumScore> {
    if weights.len() != table.len() {
        return Err(Error::Internal(format!(
            "{} weights for {} risk rows",
            weights.len(),
            table.len()
        )));
    }
    let mut s = StratumScore {
        n: table.n_subjects(),
        d: table.len(),
        ..Default::default()
    };
    for (row, &w) in table.rows().iter().zip(weights) {
        let excess = row.excess();
        let var = row.variance();
        s.u += excess;
        s.v += var;
        s.u_w += w * excess;
        s.v_w += w * w * var;
    }
    Ok(s)
}

/// Identifier of each test statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TestName {
    /// Unstratified log-rank.
    Z,
    /// Unstratified weighted log-rank.
    ZW,
    /// Stratified log-rank.
    Zs,
    /// Stratified log-rank combining Peto estimates by stratum size.
    #[serde(rename = "Zs_n")]
    ZsN,
    /// Stratified weighted, summed on the score scale.
    #[serde(rename = "Zs_Wu")]
    ZsWu,
    /// Stratified weighted, combined on the z scale.
    #[serde(rename = "Zs_Wz")]
    ZsWz,
    /// Stratified weighted, combined by stratum size.
    #[serde(rename = "Zs_Wn")]
    ZsWn,
}

impl TestName {
    pub const ALL: [TestName; 7] = [
        TestName::Z,
        TestName::ZW,
        TestName::Zs,
        TestName::ZsN,
        TestName::ZsWu,
        TestName::ZsWz,
        TestName::ZsWn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TestName::Z => "Z",
            TestName::ZW => "ZW",
            TestName::Zs => "Zs",
            TestName::ZsN => "Zs_n",
            TestName::ZsWu => "Zs_Wu",
            TestName::ZsWz => "Zs_Wz",
            TestName::ZsWn => "Zs_Wn",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            TestName::Z => "unstratified log-rank",
            TestName::ZW => "unstratified weighted log-rank",
            TestName::Zs => "stratified log-rank",
            TestName::ZsN => "stratified log-rank (sample-size combination)",
            TestName::ZsWu => "stratified weighted log-rank (U-statistic scale)",
            TestName::ZsWz => "stratified weighted log-rank (Z-statistic scale)",
            TestName::ZsWn => "stratified weighted log-rank (sample-size scale)",
        }
    }

    pub fn is_stratified(self) -> bool {
        !matches!(self, TestName::Z | TestName::ZW)
    }

    pub fn is_weighted(self) -> bool {
        matches!(
            self,
            TestName::ZW | TestName::ZsWu | TestName::ZsWz | TestName::ZsWn
        )
    }
}

impl fmt::Display for TestName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TestName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TestName::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::validation(format!("unknown test statistic '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub name: TestName,
    pub z: f64,
    /// `Phi(z)`: small when the experimental arm does better.
    pub p_one_sided: f64,
    pub p_two_sided: f64,
}

impl TestResult {
    pub fn new(name: TestName, z: f64) -> Self {
        let tail = normal::sf(z.abs());
        Self {
            name,
            z,
            p_one_sided: normal::cdf(z),
            p_two_sided: (2.0 * tail).min(1.0),
        }
    }
}

/// `Z` or `Z^W` from the score of the whole sample treated as one stratum.
pub fn unstratified_test(score: &StratumScore, weighted: bool) -> Result<TestResult> {
    let (name, u, v) = if weighted {
        (TestName::ZW, score.u_w, score.v_w)
    } else {
        (TestName::Z, score.u, score.v)
    };
    if v <= 0.0 {
        return Err(Error::Degenerate(
            "no events / degenerate variance".into(),
        ));
    }
    Ok(TestResult::new(name, u / v.sqrt()))
}

fn sum_scale(name: TestName, pairs: impl Iterator<Item = (f64, f64)>) -> Result<TestResult> {
    let (mut u, mut v) = (0.0, 0.0);
    for (ui, vi) in pairs {
        if vi > 0.0 {
            u += ui;
            v += vi;
        }
    }
    if v <= 0.0 {
        return Err(Error::Degenerate(format!(
            "{name}: every stratum has zero variance"
        )));
    }
    Ok(TestResult::new(name, u / v.sqrt()))
}

fn size_scale(
    name: TestName,
    scores: &[StratumScore],
    pick: impl Fn(&StratumScore) -> (f64, f64),
) -> Result<TestResult> {
    if scores.is_empty() {
        return Err(Error::Degenerate(format!("{name}: no strata")));
    }
    let (mut num, mut var) = (0.0, 0.0);
    for (i, s) in scores.iter().enumerate() {
        let (u, v) = pick(s);
        if v <= 0.0 {
            return Err(Error::Degenerate(format!(
                "{name}: degenerate stratum {i} for sample-size combination"
            )));
        }
        let n = s.n as f64;
        num += n * u / v;
        var += n * n / v;
    }
    Ok(TestResult::new(name, num / var.sqrt()))
}

/// `Zs`: summed scores over summed variances.
pub fn stratified_lr(scores: &[StratumScore]) -> Result<TestResult> {
    sum_scale(TestName::Zs, scores.iter().map(|s| (s.u, s.v)))
}

/// `Zs_n`: per-stratum Peto estimates weighted by stratum size.
pub fn stratified_lr_n(scores: &[StratumScore]) -> Result<TestResult> {
    size_scale(TestName::ZsN, scores, |s| (s.u, s.v))
}

/// `Zs_Wu`: weighted scores summed across strata.
pub fn stratified_wlr_u(scores: &[StratumScore]) -> Result<TestResult> {
    sum_scale(TestName::ZsWu, scores.iter().map(|s| (s.u_w, s.v_w)))
}

/// `Zs_Wz`: per-stratum weighted z statistics combined with weights
/// `sqrt(V_i)`. Strata with `V_i = 0` are skipped.
pub fn stratified_wlr_z(scores: &[StratumScore]) -> Result<TestResult> {
    let (mut num, mut var) = (0.0, 0.0);
    for (i, s) in scores.iter().enumerate() {
        if s.v <= 0.0 {
            log::warn!("Zs_Wz: skipping stratum {i} with zero variance");
            continue;
        }
        if s.v_w <= 0.0 {
            return Err(Error::Degenerate(format!(
                "Zs_Wz: stratum {i} has V > 0 but zero weighted variance"
            )));
        }
        num += s.v.sqrt() * s.u_w / s.v_w.sqrt();
        var += s.v;
    }
    if var <= 0.0 {
        return Err(Error::Degenerate(
            "Zs_Wz: every stratum has zero variance".into(),
        ));
    }
    Ok(TestResult::new(TestName::ZsWz, num / var.sqrt()))
}

/// `Zs_Wn`: weighted Peto-type estimates `U_W / V_W` weighted by stratum size.
pub fn stratified_wlr_n(scores: &[StratumScore]) -> Result<TestResult> {
    size_scale(TestName::ZsWn, scores, |s| (s.u_w, s.v_w))
}

/// Everything computed for one data set.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    /// Per-stratum scores in stratum-index order.
    pub strata: Vec<StratumScore>,
    /// Score of the full sample treated as a single stratum.
    pub overall: StratumScore,
    /// Arm-pooled Kaplan-Meier curve per stratum.
    pub stratum_km: Vec<KmCurve>,
    /// Kaplan-Meier curve pooled over arms and strata.
    pub overall_km: KmCurve,
    /// One entry per [`TestName::ALL`], in that order.
    pub results: Vec<(TestName, Result<TestResult>)>,
}

impl Analysis {
    pub fn get(&self, name: TestName) -> Option<&Result<TestResult>> {
        self.results.iter().find(|(n, _)| *n == name).map(|(_, r)| r)
    }

    pub fn z(&self, name: TestName) -> Option<f64> {
        self.get(name).and_then(|r| r.as_ref().ok()).map(|r| r.z)
    }

    pub fn failures(&self) -> impl Iterator<Item = (TestName, &Error)> {
        self.results
            .iter()
            .filter_map(|(n, r)| r.as_ref().err().map(|e| (*n, e)))
    }
}

/// Computes all seven statistics. `n_strata` is the number of declared
/// strata; every record's stratum index must be below it and every stratum
/// must contain at least one record.
pub fn run_all(
    records: &[SubjectRecord],
    n_strata: usize,
    spec: WeightSpec,
    pooling: Pooling,
) -> Result<Analysis> {
    if records.is_empty() {
        return Err(Error::Domain("no records".into()));
    }
    if n_strata == 0 {
        return Err(Error::validation("at least one stratum must be declared"));
    }
    let mut groups: Vec<Vec<SubjectRecord>> = vec![Vec::new(); n_strata];
    let mut arms = [false; 2];
    for r in records {
        r.validate()?;
        let g = groups.get_mut(r.stratum).ok_or_else(|| {
            Error::validation(format!(
                "stratum index {} out of range for {n_strata} strata",
                r.stratum
            ))
        })?;
        g.push(*r);
        arms[r.arm.index()] = true;
    }
    if !(arms[0] && arms[1]) {
        return Err(Error::Domain("both arms must be present".into()));
    }

    let overall_table = RiskTable::from_records(records)?;
    let overall_km = KmCurve::from_table(&overall_table);
    let overall_w = compute_weights(spec, &overall_km, &overall_table.event_times())?;
    let overall = stratum_score(&overall_table, &overall_w)?;

    let mut strata = Vec::with_capacity(n_strata);
    let mut stratum_km = Vec::with_capacity(n_strata);
    for (i, g) in groups.iter().enumerate() {
        let table = RiskTable::from_records(g)
            .map_err(|e| Error::Domain(format!("stratum {i}: {e}")))?;
        let km = KmCurve::from_table(&table);
        let times = table.event_times();
        let w = match pooling {
            Pooling::PerStratum => compute_weights(spec, &km, &times)?,
            Pooling::AcrossStrata => compute_weights(spec, &overall_km, &times)?,
        };
        strata.push(stratum_score(&table, &w)?);
        stratum_km.push(km);
    }

    let results = TestName::ALL
        .into_iter()
        .map(|name| {
            let r = match name {
                TestName::Z => unstratified_test(&overall, false),
                TestName::ZW => unstratified_test(&overall, true),
                TestName::Zs => stratified_lr(&strata),
                TestName::ZsN => stratified_lr_n(&strata),
                TestName::ZsWu => stratified_wlr_u(&strata),
                TestName::ZsWz => stratified_wlr_z(&strata),
                TestName::ZsWn => stratified_wlr_n(&strata),
            };
            (name, r)
        })
        .collect();

    Ok(Analysis {
        strata,
        overall,
        stratum_km,
        overall_km,
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::{Arm, RiskTable, SubjectRecord};

    fn single_row(arm_with_event: Arm) -> RiskTable {
        let other = arm_with_event.swapped();
        RiskTable::from_records(&[
            SubjectRecord::new(1.0, true, arm_with_event, 0),
            SubjectRecord::new(2.0, false, other, 0),
        ])
        .unwrap()
    }

    #[test]
    fn single_row_score() {
        let s = stratum_score(&single_row(Arm::Experimental), &[1.0]).unwrap();
        assert_eq!((s.u, s.v, s.u_w, s.v_w, s.n, s.d), (0.5, 0.25, 0.5, 0.25, 2, 1));
        let s = stratum_score(&single_row(Arm::Control), &[1.0]).unwrap();
        assert_eq!((s.u, s.v), (-0.5, 0.25));
        let z = unstratified_test(&s, false).unwrap();
        assert_eq!(z.z, -1.0);
    }

    #[test]
    fn empty_table_score() {
        let t = RiskTable::from_records(&[SubjectRecord::new(1.0, false, Arm::Control, 0)]).unwrap();
        let s = stratum_score(&t, &[]).unwrap();
        assert_eq!((s.u, s.v, s.u_w, s.v_w, s.d, s.n), (0.0, 0.0, 0.0, 0.0, 0, 1));
        assert!(matches!(unstratified_test(&s, false), Err(Error::Degenerate(_))));
        assert_eq!(s.peto_log_hr(), None);
    }

    #[test]
    fn weight_length_mismatch() {
        let r = stratum_score(&single_row(Arm::Experimental), &[1.0, 1.0]);
        assert!(matches!(r, Err(Error::Internal(_))));
    }

    #[test]
    fn single_row_z_is_one() {
        let s = stratum_score(&single_row(Arm::Experimental), &[1.0]).unwrap();
        let z = unstratified_test(&s, false).unwrap();
        assert_eq!(z.z, 1.0);
        assert_eq!(unstratified_test(&s, true).unwrap().z, 1.0);
        assert!((z.p_one_sided - 0.8413447460685429).abs() < 1e-14);
        assert!((z.p_two_sided - 0.31731050786291415).abs() < 1e-14);
    }

    #[test]
    fn two_identical_strata() {
        let s = stratum_score(&single_row(Arm::Experimental), &[1.0]).unwrap();
        let z = stratified_lr(&[s, s]).unwrap().z;
        assert!((z - 1.0 / 0.5f64.sqrt()).abs() < 1e-15);
        for f in [stratified_lr_n, stratified_wlr_u, stratified_wlr_z, stratified_wlr_n] {
            assert!((f(&[s, s]).unwrap().z - z).abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_strata_handling() {
        let good = stratum_score(&single_row(Arm::Experimental), &[1.0]).unwrap();
        let empty = StratumScore {
            n: 3,
            ..Default::default()
        };
        // sum scales skip the empty stratum
        assert_eq!(stratified_lr(&[good, empty]).unwrap().z, 1.0);
        assert_eq!(stratified_wlr_u(&[good, empty]).unwrap().z, 1.0);
        assert_eq!(stratified_wlr_z(&[good, empty]).unwrap().z, 1.0);
        // size scales cannot form U/V
        assert!(matches!(stratified_lr_n(&[good, empty]), Err(Error::Degenerate(_))));
        assert!(matches!(stratified_wlr_n(&[good, empty]), Err(Error::Degenerate(_))));
        for f in [stratified_lr, stratified_lr_n, stratified_wlr_u, stratified_wlr_z, stratified_wlr_n] {
            assert!(f(&[empty, empty]).is_err());
            assert!(f(&[]).is_err());
        }
    }

    #[test]
    fn test_names_round_trip() {
        for t in TestName::ALL {
            assert_eq!(t.as_str().parse::<TestName>().unwrap(), t);
            assert_eq!(serde_json::to_string(&t).unwrap(), format!("\"{}\"", t.as_str()));
        }
        assert_eq!(TestName::ALL.iter().filter(|t| t.is_stratified()).count(), 5);
        assert_eq!(TestName::ALL.iter().filter(|t| t.is_weighted()).count(), 4);
    }

    #[test]
    fn run_all_requires_both_arms_and_valid_strata() {
        let one_arm = [
            SubjectRecord::new(1.0, true, Arm::Control, 0),
            SubjectRecord::new(2.0, true, Arm::Control, 0),
        ];
        assert!(run_all(&one_arm, 1, WeightSpec::Unit, Pooling::PerStratum).is_err());
        let out_of_range = [
            SubjectRecord::new(1.0, true, Arm::Control, 0),
            SubjectRecord::new(2.0, true, Arm::Experimental, 2),
        ];
        assert!(matches!(
            run_all(&out_of_range, 2, WeightSpec::Unit, Pooling::PerStratum),
            Err(Error::Validation(_))
        ));
        // declared stratum with no subjects
        let ok = [
            SubjectRecord::new(1.0, true, Arm::Control, 0),
            SubjectRecord::new(2.0, true, Arm::Experimental, 0),
        ];
        assert!(matches!(
            run_all(&ok, 2, WeightSpec::Unit, Pooling::PerStratum),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn all_censored_stratum_fails_only_size_scale() {
        let recs = [
            SubjectRecord::new(1.0, true, Arm::Control, 0),
            SubjectRecord::new(2.0, true, Arm::Experimental, 0),
            SubjectRecord::new(3.0, true, Arm::Control, 0),
            SubjectRecord::new(1.5, false, Arm::Control, 1),
            SubjectRecord::new(2.5, false, Arm::Experimental, 1),
        ];
        let a = run_all(&recs, 2, WeightSpec::modest(1.5).unwrap(), Pooling::PerStratum).unwrap();
        let failed: Vec<_> = a.failures().map(|(n, _)| n).collect();
        assert_eq!(failed, vec![TestName::ZsN, TestName::ZsWn]);
        assert_eq!(a.results.len(), 7);
    }
}
