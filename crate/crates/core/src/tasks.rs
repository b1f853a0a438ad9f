//! Cueing and reach experiments, batch execution and statistics.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, Discrete};
use statrs::statistics::{Data, Median, OrderStatistics, RankTieBreaker};

use crate::agent::{make_posner_intentions, make_reach_intentions, ActionMode, Agent, AgentConfig, IntentionGains};
use crate::error::{Error, Result};
use crate::gencoords::px_to_unit;
use crate::world::{apply_action, observe, sensory_action_jacobian, CameraModel, SceneState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CueType {
    Endogenous,
    Exogenous,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Validity {
    Valid,
    Invalid,
}

/// Action contribution driving the camera in the reach task.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReachMode {
    TopDown,
    BottomUp,
}

impl ReachMode {
    fn action_mode(self) -> ActionMode {
        match self {
            ReachMode::TopDown => ActionMode::TopDown,
            ReachMode::BottomUp => ActionMode::BottomUp,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Posner,
    Reach,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Detected,
    Completed,
    Timeout,
}

macro_rules! kebab_display {
    ($($t:ty),*) => {$(
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let s = serde_json::to_value(self).map_err(|_| fmt::Error)?;
                f.write_str(s.as_str().ok_or(fmt::Error)?)
            }
        }
    )*};
}

kebab_display!(CueType, Validity, ReachMode, Experiment, Outcome);

/// Trial phase, in protocol order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Init,
    Cue,
    Ctoa,
    Target,
}

kebab_display!(Phase);

/// Protocol constants shared by both experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskConfig {
    pub agent: AgentConfig,
    pub camera: CameraModel,
    pub gains: IntentionGains,
    pub init_steps: usize,
    pub cue_steps: usize,
    /// Maximum number of target-phase steps.
    pub max_target_steps: usize,
    /// Belief-to-target distance for detection, normalized units.
    pub detection_radius: f64,
    pub detection_presence: f64,
    /// Distance of the target from the image center that counts as reached.
    pub reach_radius: f64,
    /// Consecutive in-zone steps needed to complete a reach.
    pub reach_dwell: usize,
    /// Range of target eccentricities, pixels.
    pub eccentricity_px: [f64; 2],
    /// Distance to the cue at which the focus or target belief counts as
    /// having arrived.
    pub arrival_radius: f64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig {
            agent: AgentConfig::default(),
            camera: CameraModel::default(),
            gains: IntentionGains::default(),
            init_steps: 10,
            cue_steps: 50,
            max_target_steps: 1000,
            detection_radius: 0.0625,
            detection_presence: 0.5,
            reach_radius: 0.0625,
            reach_dwell: 5,
            eccentricity_px: [2.0, 10.0],
            arrival_radius: 0.1,
        }
    }
}

impl TaskConfig {
    pub fn validate(&self) -> Result<()> {
        self.agent.validate()?;
        self.camera.validate()?;
        let [lo, hi] = self.eccentricity_px;
        if !(lo >= 0.0 && lo <= hi && px_to_unit(hi) < 1.0) {
            return Err(Error::invalid("eccentricity range must lie within the frame"));
        }
        if self.max_target_steps == 0 || self.reach_dwell == 0 {
            return Err(Error::invalid("max_target_steps and reach_dwell must be positive"));
        }
        if !(self.detection_radius > 0.0 && self.reach_radius > 0.0 && self.arrival_radius > 0.0) {
            return Err(Error::invalid("radii must be positive"));
        }
        Ok(())
    }
}

/// Target geometry drawn from `seed`: eccentricity uniform on the
/// configured range, angle uniform on `[0, 2 pi)`.
pub fn sample_geometry(seed: u64, eccentricity_px: [f64; 2]) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [lo, hi] = eccentricity_px;
    let ecc = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    (ecc, rng.random_range(0.0..2.0 * PI))
}

fn polar_uv(eccentricity_px: f64, angle: f64) -> [f64; 2] {
    let r = px_to_unit(eccentricity_px);
    [r * angle.cos(), r * angle.sin()]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosnerTrialSpec {
    pub cue_type: CueType,
    pub validity: Validity,
    pub ctoa: usize,
    pub eccentricity_px: f64,
    /// Position of the cue on the circle, radians.
    pub angle: f64,
    pub seed: u64,
}

impl PosnerTrialSpec {
    /// Spec with geometry drawn from `seed`; conditions sharing a seed share
    /// the geometry.
    pub fn sampled(cue_type: CueType, validity: Validity, ctoa: usize, seed: u64, cfg: &TaskConfig) -> Self {
        let (eccentricity_px, angle) = sample_geometry(seed, cfg.eccentricity_px);
        PosnerTrialSpec {
            cue_type,
            validity,
            ctoa,
            eccentricity_px,
            angle,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eccentricity_px >= 0.0 && px_to_unit(self.eccentricity_px) < 1.0) || !self.angle.is_finite() {
            return Err(Error::invalid("cue eccentricity must lie within the frame"));
        }
        Ok(())
    }

    pub fn cue_uv(&self) -> [f64; 2] {
        polar_uv(self.eccentricity_px, self.angle)
    }

    /// Target position: the cue location or its reflection through the center.
    pub fn target_uv(&self) -> [f64; 2] {
        let c = self.cue_uv();
        match self.validity {
            Validity::Valid => c,
            Validity::Invalid => [-c[0], -c[1]],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReachTrialSpec {
    pub mode: ReachMode,
    pub eccentricity_px: f64,
    pub angle: f64,
    pub seed: u64,
}

impl ReachTrialSpec {
    pub fn sampled(mode: ReachMode, seed: u64, cfg: &TaskConfig) -> Self {
        let (eccentricity_px, angle) = sample_geometry(seed, cfg.eccentricity_px);
        ReachTrialSpec {
            mode,
            eccentricity_px,
            angle,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eccentricity_px >= 0.0 && px_to_unit(self.eccentricity_px) < 1.0) || !self.angle.is_finite() {
            return Err(Error::invalid("target eccentricity must lie within the frame"));
        }
        Ok(())
    }

    pub fn target_uv(&self) -> [f64; 2] {
        polar_uv(self.eccentricity_px, self.angle)
    }
}

/// Per-step record of a traced trial.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    /// Global step, from 1.
    pub step: usize,
    pub phase: Phase,
    pub free_energy: f64,
    pub mu: Vec<f64>,
    pub action: [f64; 2],
    pub camera: [f64; 2],
    pub clipped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub experiment: Experiment,
    pub cue_type: Option<CueType>,
    pub validity: Option<Validity>,
    pub mode: Option<ReachMode>,
    pub ctoa: Option<usize>,
    pub eccentricity_px: f64,
    pub angle: f64,
    pub seed: u64,
    pub outcome: Outcome,
    /// Target-phase steps until detection or completion; `None` on timeout.
    pub rt_steps: Option<usize>,
    /// Steps from cue onset until the covert focus is within the arrival
    /// radius of the cue location.
    pub focus_arrival: Option<usize>,
    /// Same for the target-position belief.
    pub belief_arrival: Option<usize>,
    pub trace: Vec<TraceRow>,
}

impl TrialRecord {
    /// Condition key used for grouping and sorting.
    pub fn condition(&self) -> Condition {
        Condition {
            experiment: self.experiment,
            cue_type: self.cue_type,
            validity: self.validity,
            mode: self.mode,
            ctoa: self.ctoa,
        }
    }

    /// Whether the focus reached the cue strictly before the target belief.
    pub fn covert_first(&self) -> bool {
        match (self.focus_arrival, self.belief_arrival) {
            (Some(f), Some(b)) => f < b,
            (Some(_), None) => true,
            _ => false,
        }
    }
}

/// Number of steps in each phase of a cueing trial.
pub fn posner_schedule(cfg: &TaskConfig, ctoa: usize) -> [(Phase, usize); 4] {
    [
        (Phase::Init, cfg.init_steps),
        (Phase::Cue, cfg.cue_steps),
        (Phase::Ctoa, ctoa),
        (Phase::Target, cfg.max_target_steps),
    ]
}

/// Runs one cueing trial with action disabled.
pub fn run_posner_trial(spec: &PosnerTrialSpec, cfg: &TaskConfig, trace: bool) -> Result<TrialRecord> {
    spec.validate()?;
    let mut agent_cfg = cfg.agent.clone();
    agent_cfg.action_mode = ActionMode::Disabled;
    let mut agent = Agent::new(agent_cfg, make_posner_intentions(&cfg.gains))?;
    let layout = agent.belief.layout;
    let cam = &cfg.camera;
    let renderer = &cfg.agent.renderer;
    let cue = spec.cue_uv();
    let target = spec.target_uv();

    let mut record = TrialRecord {
        experiment: Experiment::Posner,
        cue_type: Some(spec.cue_type),
        validity: Some(spec.validity),
        mode: None,
        ctoa: Some(spec.ctoa),
        eccentricity_px: spec.eccentricity_px,
        angle: spec.angle,
        seed: spec.seed,
        outcome: Outcome::Timeout,
        rt_steps: None,
        focus_arrival: None,
        belief_arrival: None,
        trace: Vec::new(),
    };

    let mut step = 0;
    let mut since_cue = 0;
    for (phase, len) in posner_schedule(cfg, spec.ctoa) {
        let mut scene = SceneState::empty();
        match phase {
            Phase::Init | Phase::Ctoa => {}
            Phase::Cue => match spec.cue_type {
                CueType::Endogenous => scene.cue = Some(cue),
                CueType::Exogenous => {
                    scene.target = cam.direction_of(cue, scene.camera);
                    scene.target_visible = true;
                }
            },
            Phase::Target => {
                scene.target = cam.direction_of(target, scene.camera);
                scene.target_visible = true;
            }
        }
        let s = observe(&scene, cam, renderer);
        for k in 1..=len {
            step += 1;
            let out = agent.step(&s, None)?;
            if trace {
                record.trace.push(TraceRow {
                    step,
                    phase,
                    free_energy: out.trace.free_energy,
                    mu: out.trace.mu.clone(),
                    action: [0.0; 2],
                    camera: scene.camera,
                    clipped: out.trace.clamped,
                });
            }
            let gb = &agent.belief;
            if phase >= Phase::Cue {
                since_cue += 1;
                if record.focus_arrival.is_none() && dist(gb.focus_center(), cue) < cfg.arrival_radius {
                    record.focus_arrival = Some(since_cue);
                }
                if record.belief_arrival.is_none() && dist(gb.target_position(), cue) < cfg.arrival_radius {
                    record.belief_arrival = Some(since_cue);
                }
            }
            if phase == Phase::Target
                && dist(gb.target_position(), target) < cfg.detection_radius
                && gb.mu[layout.presence()] > cfg.detection_presence
            {
                record.outcome = Outcome::Detected;
                record.rt_steps = Some(k);
                return Ok(record);
            }
        }
    }
    Ok(record)
}

/// Runs one reach trial: `init_steps` on an empty scene, then the target
/// appears and the camera is driven by the selected action contribution
/// until the target stays within `reach_radius` of the image center for
/// `reach_dwell` consecutive steps.
pub fn run_reach_trial(spec: &ReachTrialSpec, cfg: &TaskConfig, trace: bool) -> Result<TrialRecord> {
    spec.validate()?;
    let mut agent_cfg = cfg.agent.clone();
    agent_cfg.action_mode = spec.mode.action_mode();
    let intentions = match spec.mode {
        ReachMode::TopDown => make_reach_intentions(&cfg.gains, cfg.camera.focal),
        ReachMode::BottomUp => make_posner_intentions(&cfg.gains),
    };
    let mut agent = Agent::new(agent_cfg, intentions)?;
    let cam = &cfg.camera;
    let renderer = &cfg.agent.renderer;
    let dt = cfg.agent.dt;
    let k_a = cfg.agent.k_a;
    let tau = cfg.agent.rbf.tau_mass;

    let mut record = TrialRecord {
        experiment: Experiment::Reach,
        cue_type: None,
        validity: None,
        mode: Some(spec.mode),
        ctoa: None,
        eccentricity_px: spec.eccentricity_px,
        angle: spec.angle,
        seed: spec.seed,
        outcome: Outcome::Timeout,
        rt_steps: None,
        focus_arrival: None,
        belief_arrival: None,
        trace: Vec::new(),
    };

    let mut scene = SceneState::empty();
    let mut step = 0;
    let mut streak = 0;
    for (phase, len) in [(Phase::Init, cfg.init_steps), (Phase::Target, cfg.max_target_steps)] {
        if phase == Phase::Target {
            scene.target = cam.direction_of(spec.target_uv(), scene.camera);
            scene.target_visible = true;
        }
        for k in 1..=len {
            step += 1;
            let s = observe(&scene, cam, renderer);
            if phase == Phase::Target {
                if dist(scene.target_image(cam), [0.0, 0.0]) < cfg.reach_radius {
                    streak += 1;
                } else {
                    streak = 0;
                }
                if streak == cfg.reach_dwell {
                    record.outcome = Outcome::Completed;
                    record.rt_steps = Some(k);
                    return Ok(record);
                }
            }
            let jac = sensory_action_jacobian(&s, cam, dt, tau);
            let out = agent.step(&s, Some(&jac))?;
            let rate = [k_a * out.action.a_dot[0], k_a * out.action.a_dot[1]];
            let (next, clipped) = apply_action(&scene, rate, cam, dt)?;
            if trace {
                record.trace.push(TraceRow {
                    step,
                    phase,
                    free_energy: out.trace.free_energy,
                    mu: out.trace.mu.clone(),
                    action: rate,
                    camera: next.camera,
                    clipped,
                });
            }
            scene = next;
        }
    }
    Ok(record)
}

/// Pure perception of a static, visible target: action disabled, camera
/// fixed, no intentions, and the covert focus (hence the precision field)
/// held at rest.
pub fn run_perception(seed: u64, steps: usize, cfg: &TaskConfig) -> Result<Vec<TraceRow>> {
    cfg.validate()?;
    let mut agent_cfg = cfg.agent.clone();
    agent_cfg.action_mode = ActionMode::Disabled;
    let mut agent = Agent::new(agent_cfg, Vec::new())?;
    let (ecc, angle) = sample_geometry(seed, cfg.eccentricity_px);
    let mut scene = SceneState::empty();
    scene.target = cfg.camera.direction_of(polar_uv(ecc, angle), scene.camera);
    scene.target_visible = true;
    let s = observe(&scene, &cfg.camera, &cfg.agent.renderer);
    let focus = agent.belief.layout.focus();
    let rest = agent.belief.clone();
    (1..=steps)
        .map(|step| {
            let out = agent.step(&s, None)?;
            agent.belief.mu[focus.clone()].copy_from_slice(&rest.mu[focus.clone()]);
            agent.belief.mu_prime[focus.clone()].copy_from_slice(&rest.mu_prime[focus.clone()]);
            Ok(TraceRow {
                step,
                phase: Phase::Target,
                free_energy: out.trace.free_energy,
                mu: agent.belief.mu.clone(),
                action: [0.0; 2],
                camera: scene.camera,
                clipped: false,
            })
        })
        .collect()
}

/// True when `series` never rises by more than `tol` (relative to
/// `max(1, |F|)`) after the first `transient` steps.
pub fn non_increasing_after(series: &[f64], transient: usize, tol: f64) -> bool {
    series
        .iter()
        .skip(transient)
        .zip(series.iter().skip(transient + 1))
        .all(|(a, b)| b - a <= tol * a.abs().max(1.0))
}

/// Runs `f` over `items` on `jobs` worker threads (all cores when 0),
/// preserving input order.
pub fn run_parallel<T, F>(items: &[T], jobs: usize, f: F) -> Result<Vec<TrialRecord>>
where
    T: Sync,
    F: Fn(&T) -> Result<TrialRecord> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| items.par_iter().map(&f).collect())
}

/// Trials `seed, seed + 1, ..` for one cueing condition.
pub fn posner_specs(
    cue_type: CueType,
    validity: Validity,
    ctoa: usize,
    n: usize,
    seed: u64,
    cfg: &TaskConfig,
) -> Vec<PosnerTrialSpec> {
    (0..n as u64)
        .map(|i| PosnerTrialSpec::sampled(cue_type, validity, ctoa, seed.wrapping_add(i), cfg))
        .collect()
}

pub fn reach_specs(mode: ReachMode, n: usize, seed: u64, cfg: &TaskConfig) -> Vec<ReachTrialSpec> {
    (0..n as u64)
        .map(|i| ReachTrialSpec::sampled(mode, seed.wrapping_add(i), cfg))
        .collect()
}

/// Sorts records by condition, then seed.
pub fn sort_records(records: &mut [TrialRecord]) {
    records.sort_by(|a, b| a.condition().cmp(&b.condition()).then(a.seed.cmp(&b.seed)));
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Condition {
    pub experiment: Experiment,
    pub cue_type: Option<CueType>,
    pub validity: Option<Validity>,
    pub mode: Option<ReachMode>,
    pub ctoa: Option<usize>,
}

/// Statistics of one condition cell. RT statistics exclude timeouts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionSummary {
    pub condition: Condition,
    pub n: usize,
    pub timeouts: usize,
    pub timeout_rate: f64,
    pub mean_rt: Option<f64>,
    pub median_rt: Option<f64>,
    pub std_rt: Option<f64>,
    /// Rank correlation between eccentricity and RT.
    pub spearman: Option<f64>,
    /// Least-squares slope of RT on eccentricity, steps per pixel.
    pub slope: Option<f64>,
    /// Fraction of valid trials in which the focus reached the cue first.
    pub covert_first_rate: Option<f64>,
    /// `(eccentricity_px, rt_steps)` of the non-timeout trials.
    pub series: Vec<(f64, usize)>,
}

/// Per-condition statistics, sorted by condition.
pub fn summarize(records: &[TrialRecord]) -> Result<Vec<ConditionSummary>> {
    if records.is_empty() {
        return Err(Error::invalid("cannot summarize an empty batch"));
    }
    let mut groups: BTreeMap<Condition, Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.condition()).or_default().push(r);
    }
    Ok(groups
        .into_iter()
        .map(|(condition, rs)| {
            let mut series: Vec<(f64, usize)> = rs
                .iter()
                .filter_map(|r| r.rt_steps.map(|rt| (r.eccentricity_px, rt)))
                .collect();
            series.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let rts: Vec<f64> = series.iter().map(|s| s.1 as f64).collect();
            let eccs: Vec<f64> = series.iter().map(|s| s.0).collect();
            let n = rs.len();
            let timeouts = n - rts.len();
            let valid_trials: Vec<_> = rs
                .iter()
                .filter(|r| r.experiment == Experiment::Posner && r.validity == Some(Validity::Valid))
                .collect();
            let covert_first_rate = (!valid_trials.is_empty())
                .then(|| valid_trials.iter().filter(|r| r.covert_first()).count() as f64 / valid_trials.len() as f64);
            ConditionSummary {
                condition,
                n,
                timeouts,
                timeout_rate: timeouts as f64 / n as f64,
                mean_rt: mean(&rts),
                median_rt: (!rts.is_empty()).then(|| Data::new(rts.clone()).median()),
                std_rt: std_dev(&rts),
                spearman: spearman(&eccs, &rts),
                slope: ols_slope(&eccs, &rts),
                covert_first_rate,
                series,
            }
        })
        .collect())
}

pub fn mean(x: &[f64]) -> Option<f64> {
    (!x.is_empty()).then(|| x.iter().sum::<f64>() / x.len() as f64)
}

/// Sample standard deviation; zero for a single value.
pub fn std_dev(x: &[f64]) -> Option<f64> {
    let m = mean(x)?;
    if x.len() < 2 {
        return Some(0.0);
    }
    let ss: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    Some((ss / (x.len() - 1) as f64).sqrt())
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mx, my) = (mean(x)?, mean(y)?);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation with average ranks for ties. `None` for fewer
/// than two points or a constant series.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let rx = Data::new(x.to_vec()).ranks(RankTieBreaker::Average);
    let ry = Data::new(y.to_vec()).ranks(RankTieBreaker::Average);
    pearson(&rx, &ry)
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(x)?, mean(y)?);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Paired one-sided sign test of "first is faster".
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SignTest {
    pub wins: u64,
    pub losses: u64,
    pub ties: u64,
    /// Exact binomial `P(W >= wins)` under `p = 1/2`, ties dropped.
    pub p_value: f64,
}

/// Compares paired reaction times; a timeout counts as slower than any RT
/// and two timeouts tie.
pub fn sign_test(pairs: &[(Option<usize>, Option<usize>)]) -> SignTest {
    let key = |x: Option<usize>| x.unwrap_or(usize::MAX);
    let (mut wins, mut losses, mut ties) = (0u64, 0u64, 0u64);
    for (a, b) in pairs {
        match key(*a).cmp(&key(*b)) {
            std::cmp::Ordering::Less => wins += 1,
            std::cmp::Ordering::Greater => losses += 1,
            std::cmp::Ordering::Equal => ties += 1,
        }
    }
    let n = wins + losses;
    let p_value = if n == 0 || wins == 0 {
        1.0
    } else {
        let b = Binomial::new(0.5, n).expect("valid binomial parameters");
        (wins..=n).map(|k| b.pmf(k)).sum::<f64>().min(1.0)
    };
    SignTest {
        wins,
        losses,
        ties,
        p_value,
    }
}

/// Pairs the RTs of two batches by seed.
pub fn pair_by_seed(a: &[TrialRecord], b: &[TrialRecord]) -> Vec<(Option<usize>, Option<usize>)> {
    let index: BTreeMap<u64, Option<usize>> = b.iter().map(|r| (r.seed, r.rt_steps)).collect();
    a.iter()
        .filter_map(|r| index.get(&r.seed).map(|rb| (r.rt_steps, *rb)))
        .collect()
}

/// One cell of a CTOA sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepCell {
    pub cue_type: CueType,
    pub validity: Validity,
    pub ctoa: usize,
    pub mean_rt: Option<f64>,
    pub timeout_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepTable {
    pub cells: Vec<SweepCell>,
    /// Per cue type, the smallest swept CTOA from which on the invalid mean
    /// RT stays below the valid one, if any.
    pub crossovers: Vec<(CueType, Option<usize>)>,
    pub records: Vec<TrialRecord>,
}

/// Runs valid and invalid cells with matched seeds for each cue type and
/// CTOA, then locates the crossover.
pub fn run_ctoa_sweep(
    cue_types: &[CueType],
    ctoas: &[usize],
    n_per_cell: usize,
    seed: u64,
    cfg: &TaskConfig,
    jobs: usize,
) -> Result<SweepTable> {
    if cue_types.is_empty() || ctoas.is_empty() || n_per_cell == 0 {
        return Err(Error::invalid("sweep needs cue types, CTOAs and a positive cell size"));
    }
    let mut specs = Vec::new();
    for &cue_type in cue_types {
        for &ctoa in ctoas {
            for validity in [Validity::Valid, Validity::Invalid] {
                specs.extend(posner_specs(cue_type, validity, ctoa, n_per_cell, seed, cfg));
            }
        }
    }
    let mut records = run_parallel(&specs, jobs, |s| run_posner_trial(s, cfg, false))?;
    sort_records(&mut records);
    let summaries = summarize(&records)?;
    let cells: Vec<SweepCell> = summaries
        .iter()
        .map(|s| SweepCell {
            cue_type: s.condition.cue_type.expect("cueing record"),
            validity: s.condition.validity.expect("cueing record"),
            ctoa: s.condition.ctoa.expect("cueing record"),
            mean_rt: s.mean_rt,
            timeout_rate: s.timeout_rate,
        })
        .collect();
    let crossovers = cue_types.iter().map(|&ct| (ct, crossover(&cells, ct))).collect();
    Ok(SweepTable {
        cells,
        crossovers,
        records,
    })
}

/// Smallest CTOA `c` such that for every swept CTOA `>= c` the invalid mean
/// RT is below the valid one.
pub fn crossover(cells: &[SweepCell], cue_type: CueType) -> Option<usize> {
    let mut by_ctoa: BTreeMap<usize, [Option<f64>; 2]> = BTreeMap::new();
    for c in cells.iter().filter(|c| c.cue_type == cue_type) {
        let slot = by_ctoa.entry(c.ctoa).or_default();
        slot[(c.validity == Validity::Invalid) as usize] = c.mean_rt;
    }
    let mut found = None;
    for (ctoa, [valid, invalid]) in by_ctoa.into_iter().rev() {
        match (valid, invalid) {
            (Some(v), Some(i)) if i < v => found = Some(ctoa),
            _ => break,
        }
    }
    found
}
