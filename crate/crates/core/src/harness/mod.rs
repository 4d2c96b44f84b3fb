//! Seeded instance generation, suite execution and residual reports.

mod checks;
mod instances;

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cstar::AlgebraShape;
use crate::error::{Error, Result};
use crate::numkernel::Tolerance;
use crate::random::split_seed;

pub use checks::evaluate;
pub use instances::{generate_instance, inject_fault, ArrowData, Instance, InstanceData, MapData, MorphismData};

/// Largest admissible `dim A · dim E`, which bounds the pre-space of every dilation.
pub const MAX_PRE_DIM: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Ksgns,
    Lift,
    Idempotency,
    Tensor,
    Category,
    Equivariant,
    Dilation,
    Continuity,
    Uniqueness,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::Ksgns,
        Suite::Lift,
        Suite::Idempotency,
        Suite::Tensor,
        Suite::Category,
        Suite::Equivariant,
        Suite::Dilation,
        Suite::Continuity,
        Suite::Uniqueness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Ksgns => "ksgns",
            Suite::Lift => "lift",
            Suite::Idempotency => "idempotency",
            Suite::Tensor => "tensor",
            Suite::Category => "category",
            Suite::Equivariant => "equivariant",
            Suite::Dilation => "dilation",
            Suite::Continuity => "continuity",
            Suite::Uniqueness => "uniqueness",
        }
    }

    /// Stable stream index used to derive instance seeds.
    fn stream(self) -> u64 {
        Suite::ALL.iter().position(|s| *s == self).expect("listed") as u64
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| Error::InvalidConfig(format!("unknown suite '{s}'")))
    }
}

/// Parses a comma-separated suite list; `all` selects every suite.
pub fn parse_suites(s: &str) -> Result<Vec<Suite>> {
    if s.trim() == "all" {
        return Ok(Suite::ALL.to_vec());
    }
    s.split(',').filter(|p| !p.trim().is_empty()).map(|p| p.trim().parse()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caps {
    pub max_block: usize,
    pub max_blocks: usize,
    pub max_module_dim: usize,
    pub max_group_order: usize,
    pub instances_per_suite: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps { max_block: 2, max_blocks: 2, max_module_dim: 4, max_group_order: 6, instances_per_suite: 4 }
    }
}

impl Caps {
    /// Parses `key=value` pairs separated by commas, starting from the defaults.
    pub fn parse(s: &str) -> Result<Caps> {
        let mut caps = Caps::default();
        for part in s.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| Error::InvalidConfig(format!("cap '{part}' is not key=value")))?;
            let v: usize = v.trim().parse().map_err(|_| Error::InvalidConfig(format!("cap '{part}' has a non-integer value")))?;
            match k.trim() {
                "max_block" => caps.max_block = v,
                "max_blocks" => caps.max_blocks = v,
                "max_module_dim" => caps.max_module_dim = v,
                "max_group_order" => caps.max_group_order = v,
                "instances_per_suite" | "instances" => caps.instances_per_suite = v,
                other => return Err(Error::InvalidConfig(format!("unknown cap '{other}'"))),
            }
        }
        Ok(caps)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    pub tolerance: Tolerance,
    pub caps: Caps,
    pub suites: Vec<Suite>,
    /// Explicit coefficient and source algebra shapes; derived from the caps when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shapes: Option<Vec<Vec<usize>>>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig { seed: 0, tolerance: Tolerance::default(), caps: Caps::default(), suites: Suite::ALL.to_vec(), shapes: None }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        let c = &self.caps;
        if [c.max_block, c.max_blocks, c.max_module_dim, c.max_group_order].contains(&0) {
            return Err(Error::InvalidConfig("caps must be positive".into()));
        }
        Tolerance::new(self.tolerance.rtol, self.tolerance.ctol)?;
        let shapes = self.shapes()?;
        if shapes.is_empty() {
            return Err(Error::InvalidConfig("no algebra shape satisfies the caps".into()));
        }
        let max_a = shapes.iter().map(AlgebraShape::dim).max().unwrap_or(0);
        if max_a * c.max_module_dim > MAX_PRE_DIM {
            return Err(Error::InvalidConfig(format!("dim A · dim E = {} exceeds {MAX_PRE_DIM}", max_a * c.max_module_dim)));
        }
        Ok(())
    }

    /// Candidate algebra shapes: the explicit list, or every sorted block list
    /// within the caps.
    pub fn shapes(&self) -> Result<Vec<AlgebraShape>> {
        if let Some(list) = &self.shapes {
            return list.iter().map(|b| AlgebraShape::new(b.clone())).collect();
        }
        let mut out = Vec::new();
        let mut current = Vec::new();
        fn rec(max_block: usize, left: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if !current.is_empty() {
                out.push(current.clone());
            }
            if left == 0 {
                return;
            }
            for n in start..=max_block {
                current.push(n);
                rec(max_block, left - 1, n, current, out);
                current.pop();
            }
        }
        rec(self.caps.max_block, self.caps.max_blocks, 1, &mut current, &mut out);
        out.into_iter().map(AlgebraShape::new).collect()
    }

    pub fn instance_seed(&self, suite: Suite, index: usize) -> u64 {
        split_seed(split_seed(self.seed, suite.stream()), index as u64)
    }
}

/// One residual compared against its threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub suite: Suite,
    pub instance_seed: u64,
    pub check_name: String,
    /// The statement whose conclusion or hypothesis this residual measures.
    pub theorem: String,
    pub residual: f64,
    pub threshold: f64,
    pub pass: bool,
    /// Seconds spent on the instance this record belongs to.
    pub wall_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub max_residual: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub records: Vec<Record>,
    pub summary: Summary,
}

impl Report {
    pub fn from_records(mut records: Vec<Record>) -> Report {
        records.sort_by(|a, b| (a.suite, a.instance_seed, &a.check_name).cmp(&(b.suite, b.instance_seed, &b.check_name)));
        let summary = Summary {
            total: records.len(),
            passed: records.iter().filter(|r| r.pass).count(),
            max_residual: records.iter().filter(|r| r.error.is_none()).map(|r| r.residual).fold(0.0, f64::max),
        };
        Report { records, summary }
    }

    pub fn passes(&self) -> bool {
        self.summary.passed == self.summary.total
    }

    pub fn failures(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| !r.pass)
    }

    /// Checks `pass ⟺ residual ≤ threshold` and the summary counts.
    pub fn is_consistent(&self) -> bool {
        let recomputed = Report::from_records(self.records.clone());
        recomputed.summary == self.summary && self.records.iter().all(|r| r.pass == (r.error.is_none() && r.residual <= r.threshold))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Text,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "text" => Ok(Format::Text),
            other => Err(Error::InvalidConfig(format!("unknown format '{other}'"))),
        }
    }
}

pub fn report_emit(report: &Report, format: Format) -> Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(report)?),
        Format::Text => {
            let mut out = String::new();
            out.push_str(&format!(
                "{:<4}  {:<11}  {:>20}  {:<28}  {:>10}  {:>10}  {}\n",
                "", "suite", "instance", "check", "residual", "threshold", "theorem"
            ));
            for r in &report.records {
                let tag = if r.pass { "PASS" } else { "FAIL" };
                out.push_str(&format!(
                    "{tag:<4}  {:<11}  {:>20}  {:<28}  {:>10.3e}  {:>10.3e}  {}",
                    r.suite.name(),
                    r.instance_seed,
                    r.check_name,
                    r.residual,
                    r.threshold,
                    r.theorem
                ));
                if let Some(e) = &r.error {
                    out.push_str(&format!("  [{e}]"));
                }
                out.push('\n');
            }
            out.push_str(&format!(
                "{} of {} checks passed, max residual {:.3e}\n",
                report.summary.passed, report.summary.total, report.summary.max_residual
            ));
            Ok(out)
        }
    }
}

pub fn report_parse(json: &str) -> Result<Report> {
    Ok(serde_json::from_str(json)?)
}

/// Instances of one suite as stored on disk.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteFile {
    pub suite: Suite,
    pub instances: Vec<Instance>,
}

pub fn generate_suite(config: &SuiteConfig, suite: Suite) -> Result<Vec<Instance>> {
    (0..config.caps.instances_per_suite).map(|i| generate_instance(config, suite, i)).collect()
}

/// Writes `config.json` and one `<suite>.json` per enabled suite.
pub fn generate(config: &SuiteConfig, out: &Path) -> Result<Vec<std::path::PathBuf>> {
    config.validate()?;
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    let cfg_path = out.join("config.json");
    fs::write(&cfg_path, serde_json::to_string_pretty(config)?)?;
    written.push(cfg_path);
    for &suite in &config.suites {
        let file = SuiteFile { suite, instances: generate_suite(config, suite)? };
        let path = out.join(format!("{}.json", suite.name()));
        fs::write(&path, serde_json::to_string_pretty(&file)?)?;
        written.push(path);
    }
    Ok(written)
}

/// Reads the configuration and the suite files present in `dir`.
pub fn load(dir: &Path) -> Result<(SuiteConfig, Vec<Instance>)> {
    let config: SuiteConfig = serde_json::from_str(&fs::read_to_string(dir.join("config.json"))?)?;
    let mut instances = Vec::new();
    for &suite in &config.suites {
        let path = dir.join(format!("{}.json", suite.name()));
        if !path.exists() {
            continue;
        }
        let file: SuiteFile = serde_json::from_str(&fs::read_to_string(&path)?)?;
        if file.suite != suite || file.instances.iter().any(|i| i.data.suite() != suite) {
            return Err(Error::Validation(format!("{} holds instances of another suite", path.display())));
        }
        instances.extend(file.instances);
    }
    Ok((config, instances))
}

/// Evaluates every instance on a pool of `jobs` workers; a failing instance
/// only contributes failing records.
pub fn run_instances(instances: &[Instance], tol: &Tolerance, jobs: usize) -> Result<Report> {
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    let records: Vec<Vec<Record>> = pool.install(|| {
        instances
            .par_iter()
            .map(|inst| {
                let start = Instant::now();
                let mut recs = evaluate(inst, tol);
                let secs = start.elapsed().as_secs_f64();
                for r in &mut recs {
                    r.wall_time = secs;
                }
                recs
            })
            .collect()
    });
    Ok(Report::from_records(records.into_iter().flatten().collect()))
}

/// Generates in memory and evaluates every enabled suite.
pub fn run(config: &SuiteConfig, jobs: usize) -> Result<Report> {
    config.validate()?;
    let mut instances = Vec::new();
    for &suite in &config.suites {
        instances.extend(generate_suite(config, suite)?);
    }
    run_instances(&instances, &config.tolerance, jobs)
}
