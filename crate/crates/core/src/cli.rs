//! Command-line front end: `run`, `suite` and `validate`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compliance::{ComplianceReport, ToleranceProfile};
use crate::error::{Error, Result};
use crate::scenario::Scenario;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const EXIT_SCENARIO_ERROR: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "qthermo", version, about = "Thermodynamic-compatibility harness for quantum equations of motion")]
struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and report the ten conditions.
    Run {
        file: PathBuf,
        /// Write the JSON report here (overrides outputs.report).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the main trajectory as CSV (overrides outputs.trajectory_csv).
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Print the JSON report instead of the text table.
        #[arg(long)]
        json: bool,
    },
    /// Run every *.json scenario in a directory.
    Suite {
        dir: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Write the aggregate JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and build a scenario without running it.
    Validate { file: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteStatus {
    /// Failing conditions equal the scenario's expectation.
    Matched,
    Mismatch,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub file: String,
    pub status: SuiteStatus,
    pub dynamics: Option<String>,
    pub pass_count: usize,
    pub fail_count: usize,
    pub info_count: usize,
    pub failed: Vec<u8>,
    pub expected_fail: Vec<u8>,
    pub error: Option<String>,
    pub report: Option<ComplianceReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub profile: ToleranceProfile,
    pub scenarios: BTreeMap<String, SuiteEntry>,
    pub matched: usize,
    pub mismatched: usize,
    pub errors: usize,
}

impl SuiteReport {
    pub fn exit_code(&self) -> i32 {
        if self.errors > 0 {
            EXIT_SCENARIO_ERROR
        } else if self.mismatched > 0 {
            EXIT_CHECK_FAILED
        } else {
            EXIT_OK
        }
    }

    pub fn to_json(&self) -> Result<String> {
        crate::json::to_canonical_string(self)
    }

    pub fn text_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<28} {:<18} {:>4} {:>4} {:>4}  {:<10} failed (expected)",
            "scenario", "dynamics", "pass", "fail", "info", "status"
        );
        for (id, e) in &self.scenarios {
            let status = match e.status {
                SuiteStatus::Matched => "ok",
                SuiteStatus::Mismatch => "MISMATCH",
                SuiteStatus::Error => "ERROR",
            };
            let list = |v: &[u8]| v.iter().map(u8::to_string).collect::<Vec<_>>().join(",");
            let detail = match &e.error {
                Some(msg) => msg.clone(),
                None => format!("[{}] ([{}])", list(&e.failed), list(&e.expected_fail)),
            };
            let _ = writeln!(
                out,
                "{:<28} {:<18} {:>4} {:>4} {:>4}  {:<10} {}",
                id,
                e.dynamics.as_deref().unwrap_or("-"),
                e.pass_count,
                e.fail_count,
                e.info_count,
                status,
                detail
            );
        }
        let _ = writeln!(
            out,
            "{} scenario(s): {} matched, {} mismatched, {} error(s)",
            self.scenarios.len(),
            self.matched,
            self.mismatched,
            self.errors
        );
        out
    }
}

fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

fn file_label(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn suite_entry(path: &Path, profile: ToleranceProfile) -> (String, SuiteEntry) {
    let file = file_label(path);
    let error_entry = |file: String, e: Error| SuiteEntry {
        file,
        status: SuiteStatus::Error,
        dynamics: None,
        pass_count: 0,
        fail_count: 0,
        info_count: 0,
        failed: vec![],
        expected_fail: vec![],
        error: Some(e.to_string()),
        report: None,
    };
    let sc = match Scenario::load(path) {
        Ok(sc) => sc,
        Err(e) => return (file.clone(), error_entry(file, e)),
    };
    log::info!("running {} ({file})", sc.id);
    match sc.run(profile) {
        Ok((report, _)) => {
            let status = if sc.expectation_met(&report) {
                SuiteStatus::Matched
            } else {
                SuiteStatus::Mismatch
            };
            let entry = SuiteEntry {
                file,
                status,
                dynamics: Some(report.dynamics.kind.as_str().to_string()),
                pass_count: report.pass_count,
                fail_count: report.fail_count,
                info_count: report.info_count,
                failed: report.failed_conditions(),
                expected_fail: sc.expect_fail.clone(),
                error: None,
                report: Some(report),
            };
            (sc.id, entry)
        }
        Err(e) => (sc.id, error_entry(file, e)),
    }
}

/// Run every scenario file in `dir`; per-scenario errors are recorded, not
/// propagated. Results are keyed and ordered by scenario id.
pub fn run_suite(dir: &Path, jobs: Option<usize>, profile: ToleranceProfile) -> Result<SuiteReport> {
    let files = scenario_files(dir)?;
    let work = || -> Vec<(String, SuiteEntry)> { files.par_iter().map(|p| suite_entry(p, profile)).collect() };
    let results = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let mut scenarios = BTreeMap::new();
    for (id, entry) in results {
        if scenarios.contains_key(&id) {
            let mut dup = entry;
            dup.status = SuiteStatus::Error;
            dup.error = Some(format!("duplicate scenario id '{id}'"));
            dup.report = None;
            scenarios.insert(format!("{id} ({})", dup.file), dup);
        } else {
            scenarios.insert(id, entry);
        }
    }
    let count = |s: SuiteStatus| scenarios.values().filter(|e| e.status == s).count();
    Ok(SuiteReport {
        profile,
        matched: count(SuiteStatus::Matched),
        mismatched: count(SuiteStatus::Mismatch),
        errors: count(SuiteStatus::Error),
        scenarios,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

fn cmd_run(
    file: &Path,
    out: Option<PathBuf>,
    csv: Option<PathBuf>,
    json: bool,
    profile: ToleranceProfile,
    stdout: &mut dyn Write,
) -> Result<i32> {
    let sc = Scenario::load(file)?;
    let (report, traj) = sc.run(profile)?;
    let text = report.to_json()?;
    if let Some(p) = out.or(sc.outputs.report.clone()) {
        write_file(&p, &text)?;
        log::info!("report written to {}", p.display());
    }
    if let Some(p) = csv.or(sc.outputs.trajectory_csv.clone()) {
        match &traj {
            Some(t) => {
                write_file(&p, &t.to_csv_string()?)?;
                log::info!("trajectory written to {}", p.display());
            }
            None => log::warn!("no main trajectory for the requested checks; {} not written", p.display()),
        }
    }
    if json {
        stdout.write_all(text.as_bytes())?;
    } else {
        stdout.write_all(report.text_table().as_bytes())?;
    }
    Ok(if report.all_passed() { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn cmd_suite(
    dir: &Path,
    jobs: Option<usize>,
    out: Option<PathBuf>,
    profile: ToleranceProfile,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32> {
    if !dir.is_dir() {
        return Err(Error::InvalidConfig(format!("{} is not a directory", dir.display())));
    }
    let report = run_suite(dir, jobs, profile)?;
    if report.scenarios.is_empty() {
        writeln!(stderr, "warning: no scenario files (*.json) in {}", dir.display())?;
    }
    if let Some(p) = out {
        write_file(&p, &report.to_json()?)?;
    }
    stdout.write_all(report.text_table().as_bytes())?;
    Ok(report.exit_code())
}

fn cmd_validate(file: &Path, stdout: &mut dyn Write) -> Result<i32> {
    let sc = Scenario::load(file)?;
    let times = &sc.integration.sample_times;
    writeln!(
        stdout,
        "ok {}: dim {}, {} dynamics, checks {:?}, t in [{}, {}], expected failures {:?}",
        sc.id,
        sc.model.dim(),
        sc.dynamics.kind.as_str(),
        sc.checks,
        times.first().copied().unwrap_or(0.0),
        times.last().copied().unwrap_or(0.0),
        sc.expect_fail
    )?;
    Ok(EXIT_OK)
}

/// Parse `args` (including the program name) and execute. Returns the exit
/// status: 0 all checks pass (suite: every scenario matches its
/// expectation), 2 check failure, 3 scenario or usage error.
pub fn execute<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { EXIT_SCENARIO_ERROR } else { EXIT_OK };
        }
    };
    let profile = match ToleranceProfile::from_env() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_SCENARIO_ERROR;
        }
    };
    let outcome = match cli.command {
        Command::Run { file, out, csv, json } => cmd_run(&file, out, csv, json, profile, stdout),
        Command::Suite { dir, jobs, out } => cmd_suite(&dir, jobs, out, profile, stdout, stderr),
        Command::Validate { file } => cmd_validate(&file, stdout),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_SCENARIO_ERROR
        }
    }
}

/// Verbosity requested on the command line, for logger setup before parsing
/// proper.
pub fn verbosity<T: AsRef<str>>(args: &[T]) -> u8 {
    args.iter()
        .map(|a| a.as_ref())
        .map(|a| match a {
            "--verbose" => 1,
            s if s.starts_with('-') && !s.starts_with("--") && s[1..].chars().all(|c| c == 'v') => s.len() as u8 - 1,
            _ => 0,
        })
        .sum()
}
