//! Subcommand definitions and their implementations.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use swlrt::scenarios::{builtin_file, builtin_scenarios, ScenarioFile};
use swlrt::simulate::{run_grid, with_workers, write_csv};
use swlrt::{Allocation, Arm, KmCurve, Pooling, Prognostic, RiskTable, ScenarioSpec, SimConfig, WeightSpec};

use crate::error::CliError;
use crate::input::{read_path, ColumnMap, Dataset, ReadOptions};
use crate::report::{self, KmEntry, ALL_STRATA};

/// Stratified and modestly-weighted log-rank tests, trial simulation and
/// sample-size design.
#[derive(Debug, Parser)]
#[command(name = "swlrt", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute all seven test statistics for a data file.
    Analyze(AnalyzeArgs),
    /// Estimate rejection rates over simulated trials.
    Simulate(SimulateArgs),
    /// Required events and patients for a two-arm exponential trial.
    Design(DesignArgs),
    /// Kaplan-Meier tables by stratum and arm.
    Km(KmArgs),
    /// Write the built-in scenarios as JSON.
    ExportScenarios(ExportArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Delimited data file with a header row.
    pub path: PathBuf,
    /// Column holding follow-up times.
    #[arg(long, default_value = "time")]
    pub time: String,
    /// Column holding event indicators (1 = event, 0 = censored).
    #[arg(long, default_value = "event")]
    pub event: String,
    /// Column holding treatment arms (1 = experimental, 0 = control).
    #[arg(long, default_value = "arm")]
    pub arm: String,
    /// Column holding stratum labels; omit for a single stratum.
    #[arg(long)]
    pub stratum: Option<String>,
    /// Comma-separated stratum labels, fixing their order and rejecting others.
    #[arg(long, value_delimiter = ',')]
    pub strata: Option<Vec<String>>,
    /// Arm label to treat as experimental; all other labels are control.
    #[arg(long)]
    pub experimental: Option<String>,
    /// Field delimiter: a single character, or "tab". Detected when omitted.
    #[arg(long, value_parser = parse_delimiter)]
    pub delimiter: Option<u8>,
}

fn parse_delimiter(s: &str) -> Result<u8, String> {
    match s {
        "tab" | "\\t" | "\t" => Ok(b'\t'),
        _ if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        _ => Err(format!("delimiter must be a single ASCII character or 'tab', got '{s}'")),
    }
}

impl InputArgs {
    fn options(&self) -> ReadOptions {
        ReadOptions {
            columns: ColumnMap {
                time: self.time.clone(),
                event: self.event.clone(),
                arm: self.arm.clone(),
                stratum: self.stratum.clone(),
            },
            delimiter: self.delimiter,
            experimental: self.experimental.clone(),
            strata: self.strata.clone(),
        }
    }

    fn load(&self) -> Result<Dataset, CliError> {
        read_path(&self.path, &self.options())
    }

    fn metadata(&self) -> serde_json::Value {
        json!({
            "input": self.path,
            "time": self.time,
            "event": self.event,
            "arm": self.arm,
            "stratum": self.stratum,
            "strata": self.strata,
            "experimental": self.experimental,
            "delimiter": self.delimiter.map(|d| (d as char).to_string()),
        })
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Weight cap time for the modest weights (0 gives unit weights).
    #[arg(long, default_value_t = 12.0)]
    pub t_star: f64,
    /// Kaplan-Meier curve used for stratified weights.
    #[arg(long, default_value_t = Pooling::PerStratum)]
    pub pooling: Pooling,
    /// Directory for results.csv, strata.csv, km.csv and metadata.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario name (repeatable), e.g. strong-4.
    #[arg(long, conflicts_with_all = ["prognostic", "effect", "all"])]
    pub scenario: Vec<String>,
    /// JSON scenario file to draw scenarios from instead of the built-ins.
    #[arg(long)]
    pub scenario_file: Option<PathBuf>,
    /// Restrict to one prognostic strength.
    #[arg(long, conflicts_with = "all")]
    pub prognostic: Option<Prognostic>,
    /// Restrict to one effect pattern (1-9).
    #[arg(long, conflicts_with = "all")]
    pub effect: Option<u8>,
    /// Every scenario (the full built-in grid unless a file is given).
    #[arg(long)]
    pub all: bool,
    /// Monte Carlo replicates per scenario.
    #[arg(long, default_value_t = 1000)]
    pub reps: u64,
    /// Master seed.
    #[arg(long, env = "SWLRT_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 12.0)]
    pub t_star: f64,
    /// Patients per trial.
    #[arg(long, default_value_t = 344)]
    pub n: usize,
    /// One-sided significance level.
    #[arg(long, default_value_t = 0.025)]
    pub alpha: f64,
    #[arg(long, default_value_t = 9.0)]
    pub recruit_months: f64,
    #[arg(long, default_value_t = 24.0)]
    pub study_months: f64,
    /// Randomisation scheme: complete, permuted or bernoulli.
    #[arg(long, default_value_t = Allocation::Complete)]
    pub alloc: Allocation,
    #[arg(long, default_value_t = Pooling::PerStratum)]
    pub pooling: Pooling,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Results CSV path; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run metadata path (default: <out>.meta.json when --out is given).
    #[arg(long)]
    pub meta: Option<PathBuf>,
}

impl SimulateArgs {
    fn config(&self) -> SimConfig {
        SimConfig {
            n_total: self.n,
            recruitment_months: self.recruit_months,
            study_months: self.study_months,
            allocation: self.alloc,
            n_reps: self.reps,
            alpha_one_sided: self.alpha,
            t_star: self.t_star,
            pooling: self.pooling,
            seed: self.seed,
            ..SimConfig::default()
        }
    }

    fn select(&self) -> Result<Vec<ScenarioSpec>, CliError> {
        let pool: Vec<ScenarioSpec> = match &self.scenario_file {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
                ScenarioFile::from_json(&text)?.scenarios
            }
            None => builtin_scenarios().to_vec(),
        };
        if !self.scenario.is_empty() {
            return self
                .scenario
                .iter()
                .map(|name| {
                    pool.iter().find(|s| &s.name == name).cloned().ok_or_else(|| {
                        CliError::input(format!("unknown scenario '{name}'"))
                    })
                })
                .collect();
        }
        if let Some(e) = self.effect {
            if self.scenario_file.is_none() && !(1..=9).contains(&e) {
                return Err(CliError::input(format!("effect must be in 1..=9, got {e}")));
            }
        }
        let filtered = self.prognostic.is_some() || self.effect.is_some();
        if !(filtered || self.all || self.scenario_file.is_some()) {
            return Err(CliError::input(
                "select scenarios with --scenario, --prognostic/--effect, --all or --scenario-file",
            ));
        }
        Ok(pool
            .into_iter()
            .filter(|s| self.prognostic.is_none_or(|p| s.prognostic == Some(p)))
            .filter(|s| self.effect.is_none_or(|e| s.effect == Some(e)))
            .collect())
    }

    fn meta_path(&self) -> Option<PathBuf> {
        self.meta.clone().or_else(|| {
            self.out.as_ref().map(|o| {
                let mut s = o.clone().into_os_string();
                s.push(".meta.json");
                PathBuf::from(s)
            })
        })
    }
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    #[arg(long, default_value_t = 8.0)]
    pub median_control: f64,
    #[arg(long, default_value_t = 12.0)]
    pub median_exp: f64,
    /// One-sided significance level.
    #[arg(long, default_value_t = 0.025)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.9)]
    pub power: f64,
    #[arg(long, default_value_t = 9.0)]
    pub recruit_months: f64,
    #[arg(long, default_value_t = 24.0)]
    pub study_months: f64,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct KmArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Output CSV path; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Output path; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Analyze(a) => analyze(&a, &mut out),
        Command::Simulate(a) => simulate(&a, &mut out),
        Command::Design(a) => design(&a, &mut out),
        Command::Km(a) => km(&a, &mut out),
        Command::ExportScenarios(a) => export_scenarios(&a, &mut out),
    }
}

fn create(path: &Path) -> Result<io::BufWriter<fs::File>, CliError> {
    let f = fs::File::create(path)
        .map_err(|e| CliError::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(io::BufWriter::new(f))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(anyhow::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn metadata(command: &str, flags: serde_json::Value, seed: Option<u64>) -> serde_json::Value {
    json!({
        "tool": "swlrt",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "flags": flags,
        "seed": seed,
    })
}

pub fn analyze(args: &AnalyzeArgs, out: &mut impl Write) -> Result<(), CliError> {
    let spec = WeightSpec::modest(args.t_star)?;
    let data = args.input.load()?;
    for arm in [Arm::Control, Arm::Experimental] {
        let n = data.records.iter().filter(|r| r.arm == arm).count();
        if n < 2 {
            return Err(CliError::input(format!(
                "need at least 2 subjects per arm, {arm:?} has {n}"
            )));
        }
    }
    let analysis = swlrt::run_all(&data.records, data.n_strata(), spec, args.pooling)?;
    write!(out, "{}", report::human_report(&data, &analysis, args.t_star, &args.pooling.to_string()))?;
    out.flush()?;

    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        let mut w = create(&dir.join("results.csv"))?;
        report::write_results_csv(&analysis, &mut w)?;
        let mut w = create(&dir.join("strata.csv"))?;
        report::write_strata_csv(&data, &analysis, &mut w)?;
        let mut w = create(&dir.join("km.csv"))?;
        report::write_km_csv(report::weight_curves(&data, &analysis), &mut w)?;
        let mut flags = args.input.metadata();
        flags["t_star"] = json!(args.t_star);
        flags["pooling"] = json!(args.pooling);
        flags["strata_labels"] = json!(data.strata);
        write_json(&dir.join("metadata.json"), &metadata("analyze", flags, None))?;
    }

    match report::failure_summary(&analysis) {
        Some(msg) => Err(CliError::Degenerate(msg)),
        None => Ok(()),
    }
}

pub fn simulate(args: &SimulateArgs, out: &mut impl Write) -> Result<(), CliError> {
    let scenarios = args.select()?;
    let config = args.config();
    let results = match args.workers {
        Some(0) => return Err(CliError::input("--workers must be at least 1")),
        Some(n) => with_workers(n, || run_grid(&scenarios, &config))??,
        None => run_grid(&scenarios, &config)?,
    };
    match &args.out {
        Some(path) => {
            let mut w = create(path)?;
            write_csv(&results, &mut w)?;
            w.flush()?;
        }
        None => {
            write_csv(&results, &mut *out)?;
            out.flush()?;
        }
    }
    if let Some(meta) = args.meta_path() {
        let flags = json!({
            "scenarios": scenarios.iter().map(|s| s.name.as_str()).collect::<Vec<_>>(),
            "scenario_file": args.scenario_file,
            "config": config,
            "workers": args.workers,
        });
        write_json(&meta, &metadata("simulate", flags, Some(config.seed)))?;
    }
    Ok(())
}

pub fn design(args: &DesignArgs, out: &mut impl Write) -> Result<(), CliError> {
    let d = swlrt::design::design(
        args.median_control,
        args.median_exp,
        args.alpha,
        args.power,
        args.recruit_months,
        args.study_months,
    )?;
    if args.json {
        serde_json::to_writer_pretty(&mut *out, &d).map_err(anyhow::Error::from)?;
        writeln!(out)?;
    } else {
        writeln!(out, "events required:     {}", d.events)?;
        writeln!(out, "patients:            {} ({} per arm)", d.patients, d.per_arm)?;
        writeln!(out, "P(event) control:    {:.4}", d.event_prob_control)?;
        writeln!(out, "P(event) exp:        {:.4}", d.event_prob_experimental)?;
        writeln!(out, "expected events:     {:.4}", d.expected_events)?;
    }
    out.flush()?;
    Ok(())
}

fn curve(records: &[swlrt::SubjectRecord]) -> Result<Option<KmCurve>, CliError> {
    if records.is_empty() {
        return Ok(None);
    }
    Ok(Some(KmCurve::from_table(&RiskTable::from_records(records)?)))
}

/// Curves for each arm and the arm-pooled sample of `records`.
fn arm_curves(records: &[swlrt::SubjectRecord]) -> Result<Vec<(&'static str, KmCurve)>, CliError> {
    let mut v = Vec::new();
    for (label, arm) in [("0", Arm::Control), ("1", Arm::Experimental)] {
        let sub: Vec<_> = records.iter().copied().filter(|r| r.arm == arm).collect();
        if let Some(c) = curve(&sub)? {
            v.push((label, c));
        }
    }
    if let Some(c) = curve(records)? {
        v.push(("pooled", c));
    }
    Ok(v)
}

pub fn km(args: &KmArgs, out: &mut impl Write) -> Result<(), CliError> {
    let data = args.input.load()?;
    let mut groups: Vec<(String, Vec<(&'static str, KmCurve)>)> = Vec::new();
    for (i, label) in data.strata.iter().enumerate() {
        let sub: Vec<_> = data.records.iter().copied().filter(|r| r.stratum == i).collect();
        groups.push((label.clone(), arm_curves(&sub)?));
    }
    if data.n_strata() > 1 {
        groups.push((ALL_STRATA.to_string(), arm_curves(&data.records)?));
    }
    let entries = groups.iter().flat_map(|(stratum, curves)| {
        curves.iter().map(move |(arm, curve)| KmEntry { stratum, arm, curve })
    });
    match &args.out {
        Some(path) => {
            let mut w = create(path)?;
            report::write_km_csv(entries, &mut w)?;
        }
        None => report::write_km_csv(entries, &mut *out)?,
    }
    Ok(())
}

pub fn export_scenarios(args: &ExportArgs, out: &mut impl Write) -> Result<(), CliError> {
    let text = builtin_file().to_json();
    match &args.out {
        Some(path) => {
            let mut w = create(path)?;
            writeln!(w, "{text}")?;
            w.flush()?;
        }
        None => {
            writeln!(out, "{text}")?;
            out.flush()?;
        }
    }
    Ok(())
}
