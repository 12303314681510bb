//! Human-readable and machine-readable renderings of analysis results.

use std::fmt::Write as _;
use std::io::Write;

use swlrt::{Analysis, KmCurve, TestName};

use crate::error::CliError;
use crate::input::Dataset;

pub const KM_HEADER: [&str; 6] = ["stratum", "arm", "time", "n_risk", "n_event", "survival"];
pub const RESULTS_HEADER: [&str; 6] = ["test", "description", "z", "p_one_sided", "p_two_sided", "error"];
pub const STRATA_HEADER: [&str; 8] = ["stratum", "n", "d", "U", "V", "U_W", "V_W", "peto_log_hr"];

/// Label used for rows pooled over every stratum.
pub const ALL_STRATA: &str = "(all)";

fn fmt4(x: f64) -> String {
    format!("{x:.4}")
}

fn opt4(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), fmt4)
}

fn opt_full(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

/// Plain-text report with four decimals.
pub fn human_report(data: &Dataset, analysis: &Analysis, t_star: f64, pooling: &str) -> String {
    let mut s = String::new();
    let n_exp = data
        .records
        .iter()
        .filter(|r| r.arm == swlrt::Arm::Experimental)
        .count();
    let _ = writeln!(
        s,
        "subjects: {} ({} control, {} experimental), events: {}",
        data.records.len(),
        data.records.len() - n_exp,
        n_exp,
        analysis.overall.d
    );
    let _ = writeln!(s, "weights: t* = {t_star}, KM pooling: {pooling}");
    let _ = writeln!(s);

    let _ = writeln!(s, "{:<7} {:>9} {:>9} {:>9}  description", "test", "z", "p(1s)", "p(2s)");
    for (name, res) in &analysis.results {
        match res {
            Ok(r) => {
                let _ = writeln!(
                    s,
                    "{:<7} {:>9} {:>9} {:>9}  {}",
                    name.as_str(),
                    fmt4(r.z),
                    fmt4(r.p_one_sided),
                    fmt4(r.p_two_sided),
                    name.description()
                );
            }
            Err(e) => {
                let _ = writeln!(s, "{:<7} {:>9} {:>9} {:>9}  FAILED: {e}", name.as_str(), "-", "-", "-");
            }
        }
    }
    let _ = writeln!(s);

    let _ = writeln!(
        s,
        "{:<12} {:>6} {:>6} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "stratum", "n", "d", "U", "V", "U_W", "V_W", "Peto"
    );
    for (label, sc) in data.strata.iter().zip(&analysis.strata) {
        let _ = writeln!(
            s,
            "{:<12} {:>6} {:>6} {:>9} {:>9} {:>9} {:>9} {:>9}",
            label,
            sc.n,
            sc.d,
            fmt4(sc.u),
            fmt4(sc.v),
            fmt4(sc.u_w),
            fmt4(sc.v_w),
            opt4(sc.peto_log_hr())
        );
    }

    if data.n_strata() == 1 {
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "note: single stratum, so Zs = Zs_n = Z and Zs_Wu = Zs_Wz = Zs_Wn = ZW"
        );
    }
    s
}

pub fn write_results_csv<W: Write>(analysis: &Analysis, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for (name, res) in &analysis.results {
        let (z, p1, p2, err) = match res {
            Ok(r) => (r.z.to_string(), r.p_one_sided.to_string(), r.p_two_sided.to_string(), String::new()),
            Err(e) => (String::new(), String::new(), String::new(), e.to_string()),
        };
        w.write_record([name.as_str(), name.description(), &z, &p1, &p2, &err])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_strata_csv<W: Write>(data: &Dataset, analysis: &Analysis, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STRATA_HEADER)?;
    let rows = data
        .strata
        .iter()
        .map(String::as_str)
        .zip(&analysis.strata)
        .chain(std::iter::once((ALL_STRATA, &analysis.overall)));
    for (label, sc) in rows {
        w.write_record([
            label.to_string(),
            sc.n.to_string(),
            sc.d.to_string(),
            sc.u.to_string(),
            sc.v.to_string(),
            sc.u_w.to_string(),
            sc.v_w.to_string(),
            opt_full(sc.peto_log_hr()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One labelled Kaplan-Meier curve.
pub struct KmEntry<'a> {
    pub stratum: &'a str,
    pub arm: &'a str,
    pub curve: &'a KmCurve,
}

pub fn write_km_csv<'a, W: Write>(
    entries: impl IntoIterator<Item = KmEntry<'a>>,
    out: W,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(KM_HEADER)?;
    for e in entries {
        let c = e.curve;
        for i in 0..c.len() {
            w.write_record([
                e.stratum.to_string(),
                e.arm.to_string(),
                c.times[i].to_string(),
                c.n_risk[i].to_string(),
                c.n_event[i].to_string(),
                c.surv[i].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Curves used for the weights: arm-pooled per stratum, then over all strata.
pub fn weight_curves<'a>(data: &'a Dataset, analysis: &'a Analysis) -> Vec<KmEntry<'a>> {
    let mut v: Vec<KmEntry<'a>> = data
        .strata
        .iter()
        .zip(&analysis.stratum_km)
        .map(|(label, curve)| KmEntry {
            stratum: label,
            arm: "pooled",
            curve,
        })
        .collect();
    v.push(KmEntry {
        stratum: ALL_STRATA,
        arm: "pooled",
        curve: &analysis.overall_km,
    });
    v
}

/// Names of the statistics that could not be formed, with reasons.
pub fn failure_summary(analysis: &Analysis) -> Option<String> {
    let lines: Vec<String> = analysis
        .failures()
        .map(|(n, e): (TestName, _)| format!("{n}: {e}"))
        .collect();
    (!lines.is_empty()).then(|| format!("statistic(s) failed: {}", lines.join("; ")))
}
