//! The operations behind the command-line tool: run, check, selftest, sweep.
//!
//! Exit codes: [`EXIT_PASS`] when every certified property holds,
//! [`EXIT_PROPERTY`] when one fails, [`EXIT_CONFIG`] for unusable input.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::certificates::{check_validity, ArenaSampler, ValidityReport};
use crate::report::{num, summary_text, validity_text, write_trajectory};
use crate::scenario::Scenario;
use crate::selftest::{self, SuiteResult};
use crate::sim::{metrics, run, PropertyStatus, SummaryMetrics};
use crate::{Error, Result};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_PROPERTY: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const VALIDITY_FILE: &str = "validity.txt";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(io_err(path))
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub scenario: String,
    pub certificate: &'static str,
    pub metrics: SummaryMetrics,
    pub trajectory: PathBuf,
    pub summary: PathBuf,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.metrics.certified_pass()
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            EXIT_PASS
        } else {
            EXIT_PROPERTY
        }
    }

    /// Human-readable pass/fail listing.
    pub fn render(&self) -> String {
        let m = &self.metrics;
        let mut s = String::new();
        let _ = writeln!(s, "scenario {} [{}]: {} records", self.scenario, self.certificate, m.records);
        let _ = writeln!(s, "  min pair distance   {}", num(m.min_pair_distance));
        if let Some(b) = m.min_log_b {
            let _ = writeln!(s, "  min ln B            {}", num(b));
        }
        let visited: Vec<String> = m
            .waypoints_visited
            .iter()
            .zip(&m.waypoints_planned)
            .map(|(v, p)| format!("{v}/{p}"))
            .collect();
        let _ = writeln!(s, "  waypoints visited   {}", visited.join(" "));
        if m.satisfied_graph.is_some() {
            let _ = writeln!(s, "  graph switches      {}", m.graph_switches);
        }
        if m.fallback_steps > 0 {
            let _ = writeln!(s, "  fallback steps      {}", m.fallback_steps);
        }
        for c in &m.conditions {
            let status = match (c.status, c.certified) {
                (PropertyStatus::Pass, _) => "PASS",
                (PropertyStatus::NotApplicable, _) => "N/A ",
                (PropertyStatus::Fail, true) => "FAIL",
                (PropertyStatus::Fail, false) => "FAIL (not certified)",
            };
            let _ = writeln!(s, "  {status} {}", c.name);
        }
        let _ = writeln!(s, "  trajectory {}", self.trajectory.display());
        let _ = writeln!(s, "  summary    {}", self.summary.display());
        let _ = write!(s, "result: {}", if self.passed() { "pass" } else { "fail" });
        s
    }
}

/// Simulates a scenario and writes its trajectory table and summary into `out_dir`.
pub fn run_scenario(scenario: &Scenario, out_dir: &Path) -> Result<RunReport> {
    let log = run(&scenario.config)?;
    let m = metrics(&log, &scenario.config)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let trajectory = out_dir.join(TRAJECTORY_FILE);
    let file = File::create(&trajectory).map_err(io_err(&trajectory))?;
    let mut w = BufWriter::new(file);
    write_trajectory(&mut w, &log, scenario.config.params.robot_count)
        .and_then(|_| w.flush())
        .map_err(io_err(&trajectory))?;

    let kind = scenario.config.certificate.kind();
    let summary = out_dir.join(SUMMARY_FILE);
    write_file(&summary, &summary_text(&scenario.name, &log, &m, kind))?;

    Ok(RunReport {
        scenario: scenario.name.clone(),
        certificate: kind,
        metrics: m,
        trajectory,
        summary,
    })
}

pub fn run_command(path: &Path, out_dir: &Path) -> Result<RunReport> {
    run_scenario(&Scenario::load(path)?, out_dir)
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub scenario: String,
    pub expression: String,
    pub seed: u64,
    pub validity: ValidityReport,
    pub written: Option<PathBuf>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.validity.all_feasible()
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            EXIT_PASS
        } else {
            EXIT_PROPERTY
        }
    }

    pub fn render(&self) -> String {
        let r = &self.validity;
        let mut s = String::new();
        let _ = writeln!(s, "scenario {}: B = {}", self.scenario, self.expression);
        let _ = writeln!(
            s,
            "  {} of {} in-set samples admit a control (fraction {}), seed {}",
            r.feasible,
            r.evaluated,
            num(r.feasible_fraction()),
            self.seed
        );
        let _ = writeln!(s, "  worst box margin    {}", num(r.worst_margin));
        for c in &r.counterexamples {
            let p: Vec<String> = c
                .state
                .positions
                .iter()
                .map(|p| format!("({}, {})", num(p[0]), num(p[1])))
                .collect();
            let _ = writeln!(s, "  counterexample #{} margin {} at {}", c.index, num(c.margin), p.join(" "));
        }
        if r.infeasible > r.counterexamples.len() {
            let _ = writeln!(s, "  ... {} more", r.infeasible - r.counterexamples.len());
        }
        if let Some(path) = &self.written {
            let _ = writeln!(s, "  report {}", path.display());
        }
        let _ = write!(s, "result: {}", if self.passed() { "pass" } else { "fail" });
        s
    }
}

/// Validity audit of a scenario's certificate over in-set samples from its arena.
pub fn check_scenario(scenario: &Scenario, samples: Option<usize>, seed: Option<u64>) -> Result<CheckReport> {
    let config = &scenario.config;
    let Some(tree) = config.certificate.build(&config.params)? else {
        return Err(Error::config(format!("scenario {} has no certificate to check", scenario.name)));
    };
    let seed = seed.unwrap_or(config.seed);
    let count = samples.unwrap_or(scenario.samples);
    let mut sampler = ArenaSampler::new(&config.params, scenario.arena, seed).inside(tree.clone());
    let validity = check_validity(&tree, &config.params, &config.alpha, &mut sampler, count)?;
    Ok(CheckReport {
        scenario: scenario.name.clone(),
        expression: tree.to_string(),
        seed,
        validity,
        written: None,
    })
}

pub fn check_command(
    path: &Path,
    samples: Option<usize>,
    seed: Option<u64>,
    out_dir: Option<&Path>,
) -> Result<CheckReport> {
    let scenario = Scenario::load(path)?;
    let mut report = check_scenario(&scenario, samples, seed)?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let file = dir.join(VALIDITY_FILE);
        write_file(
            &file,
            &validity_text(&report.scenario, &report.expression, report.seed, &report.validity),
        )?;
        report.written = Some(file);
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct SelftestReport {
    pub suites: Vec<SuiteResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteResult::passed)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            EXIT_PASS
        } else {
            EXIT_PROPERTY
        }
    }

    /// Table of suites with case counts, worst errors and tolerances.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<36} {:>6} {:>16} {:>16}  status", "suite", "cases", "max error", "tolerance");
        for r in &self.suites {
            let _ = writeln!(
                s,
                "{:<36} {:>6} {:>16} {:>16}  {}",
                r.name,
                r.cases,
                num(r.max_error),
                num(r.tolerance),
                if r.passed() { "pass" } else { "FAIL" }
            );
        }
        let _ = write!(s, "result: {}", if self.passed() { "pass" } else { "fail" });
        s
    }
}

pub fn selftest_command(seed: u64) -> Result<SelftestReport> {
    Ok(SelftestReport {
        suites: selftest::run_all(seed)?,
    })
}

#[derive(Debug)]
pub struct SweepEntry {
    pub path: PathBuf,
    pub outcome: Result<RunReport>,
}

impl SweepEntry {
    pub fn exit_code(&self) -> i32 {
        match &self.outcome {
            Ok(r) => r.exit_code(),
            Err(_) => EXIT_CONFIG,
        }
    }
}

/// Scenario files (`*.toml`) in `dir`, sorted by name.
pub fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    files.sort();
    Ok(files)
}

/// Runs every scenario in `dir` in parallel, each writing into `out_dir/<stem>/`.
pub fn sweep_command(dir: &Path, out_dir: &Path) -> Result<Vec<SweepEntry>> {
    let files = scenario_files(dir)?;
    Ok(files
        .into_par_iter()
        .map(|path| {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let outcome = run_command(&path, &out_dir.join(stem));
            SweepEntry { path, outcome }
        })
        .collect())
}

/// Worst exit code across a sweep; an empty sweep is a configuration error.
pub fn sweep_exit_code(entries: &[SweepEntry]) -> i32 {
    if entries.is_empty() {
        return EXIT_CONFIG;
    }
    entries.iter().map(SweepEntry::exit_code).max().unwrap_or(EXIT_PASS)
}
