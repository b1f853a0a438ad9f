//! Command-line front end: run configuration, batch execution and CSV /
//! manifest output.
//!
//! Every subcommand resolves to a [`RunConfig`], which is validated before
//! anything touches the output directory. Precedence for each setting is
//! flag, then environment (output directory only), then config file, then
//! default.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gencoords::BeliefLayout;
use crate::tasks::{
    posner_specs, reach_specs, run_ctoa_sweep, run_parallel, run_perception, run_posner_trial, run_reach_trial,
    sort_records, summarize, ConditionSummary, CueType, PosnerTrialSpec, ReachMode, ReachTrialSpec, TaskConfig,
    TraceRow, TrialRecord, Validity,
};

/// Version of the CSV layouts written by [`run`].
pub const SCHEMA_VERSION: u32 = 1;

pub const TRIALS_FILE: &str = "trials.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const CROSSOVER_FILE: &str = "crossover.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub const TRIAL_HEADER: [&str; 12] = [
    "experiment",
    "cue_type",
    "validity",
    "mode",
    "ctoa",
    "eccentricity_px",
    "angle",
    "seed",
    "outcome",
    "rt_steps",
    "focus_arrival",
    "belief_arrival",
];

pub const SUMMARY_HEADER: [&str; 15] = [
    "experiment",
    "cue_type",
    "validity",
    "mode",
    "ctoa",
    "n",
    "timeouts",
    "timeout_rate",
    "mean_rt",
    "median_rt",
    "std_rt",
    "spearman",
    "slope",
    "covert_first_rate",
    "completed",
];

pub const CROSSOVER_HEADER: [&str; 2] = ["cue_type", "crossover_ctoa"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Posner,
    CtoaSweep,
    Reach,
    SingleTrial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SingleKind {
    /// Static visible target, action disabled, precision held fixed.
    Perception,
    Posner,
    Reach,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SingleTrialConfig {
    pub kind: SingleKind,
    pub cue_type: CueType,
    pub validity: Validity,
    pub mode: ReachMode,
    /// Overrides the geometry sampled from the seed.
    pub eccentricity_px: Option<f64>,
    pub angle: Option<f64>,
    /// Length of a perception run.
    pub steps: usize,
}

impl Default for SingleTrialConfig {
    fn default() -> Self {
        SingleTrialConfig {
            kind: SingleKind::Perception,
            cue_type: CueType::Endogenous,
            validity: Validity::Valid,
            mode: ReachMode::BottomUp,
            eccentricity_px: None,
            angle: None,
            steps: 300,
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    /// Trials per condition cell.
    pub n_trials: usize,
    /// Trial `i` of every cell uses seed `seed + i`.
    pub seed: u64,
    /// Worker threads; 0 uses all cores. Does not affect the output.
    pub jobs: usize,
    pub out_dir: PathBuf,
    /// Write the per-step trace (single-trial only).
    pub trace: bool,
    pub cue_types: Vec<CueType>,
    pub validities: Vec<Validity>,
    pub ctoa: usize,
    pub ctoas: Vec<usize>,
    pub modes: Vec<ReachMode>,
    pub single: SingleTrialConfig,
    pub task: TaskConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: ExperimentKind::Posner,
            n_trials: 200,
            seed: 0,
            jobs: 0,
            out_dir: PathBuf::from("foveate-out"),
            trace: false,
            cue_types: vec![CueType::Endogenous, CueType::Exogenous],
            validities: vec![Validity::Valid, Validity::Invalid],
            ctoa: 100,
            ctoas: (1..=12).map(|i| 50 * i).collect(),
            modes: vec![ReachMode::BottomUp, ReachMode::TopDown],
            single: SingleTrialConfig::default(),
            task: TaskConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses a TOML config. An empty file is rejected.
    pub fn from_toml(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::Config("config file is empty".into()));
        }
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        let batch = self.experiment != ExperimentKind::SingleTrial;
        if batch && self.n_trials == 0 {
            return Err(Error::invalid("n_trials must be positive"));
        }
        if batch && self.trace {
            return Err(Error::invalid("traces are only written for single-trial runs"));
        }
        if self.seed.checked_add(self.n_trials as u64).is_none() {
            return Err(Error::invalid("seed range overflows"));
        }
        match self.experiment {
            ExperimentKind::Posner => {
                if self.cue_types.is_empty() || self.validities.is_empty() {
                    return Err(Error::invalid("posner needs at least one cue type and validity"));
                }
            }
            ExperimentKind::CtoaSweep => {
                if self.cue_types.is_empty() || self.ctoas.is_empty() {
                    return Err(Error::invalid("ctoa-sweep needs cue types and CTOAs"));
                }
            }
            ExperimentKind::Reach => {
                if self.modes.is_empty() {
                    return Err(Error::invalid("reach needs at least one mode"));
                }
            }
            ExperimentKind::SingleTrial => match self.single.kind {
                SingleKind::Perception => {
                    if self.single.steps == 0 {
                        return Err(Error::invalid("perception run needs at least one step"));
                    }
                }
                SingleKind::Posner => self.posner_trial().validate()?,
                SingleKind::Reach => self.reach_trial().validate()?,
            },
        }
        Ok(())
    }

    fn geometry(&self, spec_ecc: f64, spec_angle: f64) -> (f64, f64) {
        (
            self.single.eccentricity_px.unwrap_or(spec_ecc),
            self.single.angle.unwrap_or(spec_angle),
        )
    }

    /// The cueing trial of a single-trial run.
    pub fn posner_trial(&self) -> PosnerTrialSpec {
        let s = &self.single;
        let mut spec = PosnerTrialSpec::sampled(s.cue_type, s.validity, self.ctoa, self.seed, &self.task);
        (spec.eccentricity_px, spec.angle) = self.geometry(spec.eccentricity_px, spec.angle);
        spec
    }

    /// The reach trial of a single-trial run.
    pub fn reach_trial(&self) -> ReachTrialSpec {
        let mut spec = ReachTrialSpec::sampled(self.single.mode, self.seed, &self.task);
        (spec.eccentricity_px, spec.angle) = self.geometry(spec.eccentricity_px, spec.angle);
        spec
    }
}

#[derive(Debug, Parser)]
#[command(name = "foveate", version, about = "Covert and overt attention experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum CueArg {
    Endogenous,
    Exogenous,
    Both,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ValidityArg {
    Valid,
    Invalid,
    Both,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    TopDown,
    BottomUp,
    Both,
}

impl CueArg {
    fn cue_types(self) -> Vec<CueType> {
        match self {
            CueArg::Endogenous => vec![CueType::Endogenous],
            CueArg::Exogenous => vec![CueType::Exogenous],
            CueArg::Both => vec![CueType::Endogenous, CueType::Exogenous],
        }
    }
}

impl ValidityArg {
    fn validities(self) -> Vec<Validity> {
        match self {
            ValidityArg::Valid => vec![Validity::Valid],
            ValidityArg::Invalid => vec![Validity::Invalid],
            ValidityArg::Both => vec![Validity::Valid, Validity::Invalid],
        }
    }
}

impl ModeArg {
    fn modes(self) -> Vec<ReachMode> {
        match self {
            ModeArg::TopDown => vec![ReachMode::TopDown],
            ModeArg::BottomUp => vec![ReachMode::BottomUp],
            ModeArg::Both => vec![ReachMode::BottomUp, ReachMode::TopDown],
        }
    }
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "FOVEATE_OUT_DIR")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trials per condition cell.
    #[arg(long)]
    pub n: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cueing task at one CTOA.
    Posner {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        cue: Option<CueArg>,
        #[arg(long, value_enum)]
        validity: Option<ValidityArg>,
        #[arg(long)]
        ctoa: Option<usize>,
    },
    /// Cueing task over a list of CTOAs, valid and invalid.
    CtoaSweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        cue: Option<CueArg>,
        /// Comma-separated CTOAs.
        #[arg(long, value_delimiter = ',')]
        ctoas: Option<Vec<usize>>,
    },
    /// Overt reach task.
    Reach {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// One traced trial.
    SingleTrial {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        kind: Option<SingleKind>,
        #[arg(long, value_enum)]
        cue: Option<CueArg>,
        #[arg(long, value_enum)]
        validity: Option<ValidityArg>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        ctoa: Option<usize>,
        #[arg(long)]
        eccentricity: Option<f64>,
        #[arg(long)]
        angle: Option<f64>,
        /// Steps of a perception run.
        #[arg(long)]
        steps: Option<usize>,
        /// Write the per-step trace.
        #[arg(long)]
        trace: bool,
    },
}

fn single<T: Clone>(v: Vec<T>, what: &str) -> Result<T> {
    match v.as_slice() {
        [x] => Ok(x.clone()),
        _ => Err(Error::invalid(format!("single-trial needs exactly one {what}"))),
    }
}

impl CommonArgs {
    fn base(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(n) = self.n {
            cfg.n_trials = n;
        }
        if let Some(jobs) = self.jobs {
            cfg.jobs = jobs;
        }
        Ok(cfg)
    }
}

impl Command {
    /// Resolves the subcommand and its config file into a run config.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg;
        match self {
            Command::Posner {
                common,
                cue,
                validity,
                ctoa,
            } => {
                cfg = common.base()?;
                cfg.experiment = ExperimentKind::Posner;
                if let Some(c) = cue {
                    cfg.cue_types = c.cue_types();
                }
                if let Some(v) = validity {
                    cfg.validities = v.validities();
                }
                if let Some(c) = ctoa {
                    cfg.ctoa = *c;
                }
            }
            Command::CtoaSweep { common, cue, ctoas } => {
                cfg = common.base()?;
                cfg.experiment = ExperimentKind::CtoaSweep;
                if let Some(c) = cue {
                    cfg.cue_types = c.cue_types();
                }
                if let Some(c) = ctoas {
                    cfg.ctoas = c.clone();
                }
            }
            Command::Reach { common, mode } => {
                cfg = common.base()?;
                cfg.experiment = ExperimentKind::Reach;
                if let Some(m) = mode {
                    cfg.modes = m.modes();
                }
            }
            Command::SingleTrial {
                common,
                kind,
                cue,
                validity,
                mode,
                ctoa,
                eccentricity,
                angle,
                steps,
                trace,
            } => {
                cfg = common.base()?;
                cfg.experiment = ExperimentKind::SingleTrial;
                let s = &mut cfg.single;
                if let Some(k) = kind {
                    s.kind = *k;
                }
                if let Some(c) = cue {
                    s.cue_type = single(c.cue_types(), "cue type")?;
                }
                if let Some(v) = validity {
                    s.validity = single(v.validities(), "validity")?;
                }
                if let Some(m) = mode {
                    s.mode = single(m.modes(), "mode")?;
                }
                if eccentricity.is_some() {
                    s.eccentricity_px = *eccentricity;
                }
                if angle.is_some() {
                    s.angle = *angle;
                }
                if let Some(n) = steps {
                    s.steps = *n;
                }
                if let Some(c) = ctoa {
                    cfg.ctoa = *c;
                }
                cfg.trace |= *trace;
            }
        }
        Ok(cfg)
    }
}

/// Files written by a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOutput {
    pub records: Vec<TrialRecord>,
    pub summaries: Vec<ConditionSummary>,
    pub crossovers: Vec<(CueType, Option<usize>)>,
    pub trace: Vec<TraceRow>,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    package: &'static str,
    version: &'static str,
    seeds: Seeds,
    files: Vec<FileEntry>,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct Seeds {
    first: u64,
    count: u64,
}

#[derive(Serialize)]
struct FileEntry {
    name: String,
    columns: Vec<String>,
    rows: usize,
}

/// Validates `cfg`, runs the experiment and writes its outputs.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let task = &cfg.task;
    let mut out = RunOutput::default();
    let mut seeds = Seeds {
        first: cfg.seed,
        count: cfg.n_trials as u64,
    };
    match cfg.experiment {
        ExperimentKind::Posner => {
            let mut specs = Vec::new();
            for &ct in &cfg.cue_types {
                for &v in &cfg.validities {
                    specs.extend(posner_specs(ct, v, cfg.ctoa, cfg.n_trials, cfg.seed, task));
                }
            }
            out.records = run_parallel(&specs, cfg.jobs, |s| run_posner_trial(s, task, false))?;
        }
        ExperimentKind::CtoaSweep => {
            let table = run_ctoa_sweep(&cfg.cue_types, &cfg.ctoas, cfg.n_trials, cfg.seed, task, cfg.jobs)?;
            out.records = table.records;
            out.crossovers = table.crossovers;
        }
        ExperimentKind::Reach => {
            let mut specs = Vec::new();
            for &m in &cfg.modes {
                specs.extend(reach_specs(m, cfg.n_trials, cfg.seed, task));
            }
            out.records = run_parallel(&specs, cfg.jobs, |s| run_reach_trial(s, task, false))?;
        }
        ExperimentKind::SingleTrial => {
            seeds.count = 1;
            match cfg.single.kind {
                SingleKind::Perception => out.trace = run_perception(cfg.seed, cfg.single.steps, task)?,
                SingleKind::Posner => {
                    let mut r = run_posner_trial(&cfg.posner_trial(), task, cfg.trace)?;
                    out.trace = std::mem::take(&mut r.trace);
                    out.records.push(r);
                }
                SingleKind::Reach => {
                    let mut r = run_reach_trial(&cfg.reach_trial(), task, cfg.trace)?;
                    out.trace = std::mem::take(&mut r.trace);
                    out.records.push(r);
                }
            }
        }
    }
    sort_records(&mut out.records);
    if !out.records.is_empty() {
        out.summaries = summarize(&out.records)?;
    }

    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    if !out.records.is_empty() {
        entries.push(write_csv(
            dir,
            TRIALS_FILE,
            &TRIAL_HEADER,
            out.records.iter().map(trial_row),
        )?);
        entries.push(write_csv(
            dir,
            SUMMARY_FILE,
            &SUMMARY_HEADER,
            out.summaries.iter().map(summary_row),
        )?);
    }
    if cfg.experiment == ExperimentKind::CtoaSweep {
        let rows = out.crossovers.iter().map(|(ct, c)| vec![ct.to_string(), opt(*c)]);
        entries.push(write_csv(dir, CROSSOVER_FILE, &CROSSOVER_HEADER, rows)?);
    }
    if cfg.trace || cfg.single.kind == SingleKind::Perception && cfg.experiment == ExperimentKind::SingleTrial {
        let header = trace_header(&task.agent.layout);
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        entries.push(write_csv(dir, TRACE_FILE, &header, out.trace.iter().map(trace_row))?);
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        seeds,
        files: entries,
        config: cfg,
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    out.files = manifest.files.iter().map(|f| dir.join(&f.name)).collect();
    out.files.push(path);
    Ok(out)
}

fn write_csv<I>(dir: &Path, name: &str, header: &[&str], rows: I) -> Result<FileEntry>
where
    I: Iterator<Item = Vec<String>>,
{
    let path = dir.join(name);
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header)?;
    let mut count = 0;
    for row in rows {
        w.write_record(&row)?;
        count += 1;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(FileEntry {
        name: name.to_string(),
        columns: header.iter().map(|s| s.to_string()).collect(),
        rows: count,
    })
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn trial_row(r: &TrialRecord) -> Vec<String> {
    vec![
        r.experiment.to_string(),
        opt(r.cue_type),
        opt(r.validity),
        opt(r.mode),
        opt(r.ctoa),
        r.eccentricity_px.to_string(),
        r.angle.to_string(),
        r.seed.to_string(),
        r.outcome.to_string(),
        opt(r.rt_steps),
        opt(r.focus_arrival),
        opt(r.belief_arrival),
    ]
}

fn summary_row(s: &ConditionSummary) -> Vec<String> {
    let c = &s.condition;
    vec![
        c.experiment.to_string(),
        opt(c.cue_type),
        opt(c.validity),
        opt(c.mode),
        opt(c.ctoa),
        s.n.to_string(),
        s.timeouts.to_string(),
        s.timeout_rate.to_string(),
        opt(s.mean_rt),
        opt(s.median_rt),
        opt(s.std_rt),
        opt(s.spearman),
        opt(s.slope),
        opt(s.covert_first_rate),
        (s.n - s.timeouts).to_string(),
    ]
}

/// Column names of the trace CSV for a belief layout.
pub fn trace_header(layout: &BeliefLayout) -> Vec<String> {
    let mut h: Vec<String> = ["step", "phase", "free_energy"].map(String::from).to_vec();
    h.extend(["cue_u", "cue_v", "pitch", "yaw", "target_u", "target_v", "presence"].map(String::from));
    h.extend((3..layout.visual_dim).map(|k| format!("latent_{k}")));
    h.extend(["amp", "focus_u", "focus_v"].map(String::from));
    h.extend(["action_pitch", "action_yaw", "camera_pitch", "camera_yaw", "clipped"].map(String::from));
    h
}

fn trace_row(t: &TraceRow) -> Vec<String> {
    let mut row = vec![t.step.to_string(), t.phase.to_string(), t.free_energy.to_string()];
    row.extend(t.mu.iter().map(f64::to_string));
    row.extend(t.action.iter().chain(&t.camera).map(f64::to_string));
    row.push(t.clipped.to_string());
    row
}

/// Process exit code for an error: 1 for usage problems, 2 for failures
/// while running.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::Config(_) => 1,
        _ => 2,
    }
}

/// Parses `args`, runs and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = cli.command.resolve().and_then(|cfg| run(&cfg));
    match result {
        Ok(out) => {
            for f in &out.files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("foveate: {e}");
            exit_code(&e)
        }
    }
}
