//! Python bindings: configuration, the agent and scene for step-by-step
//! simulation, single trials, full experiments and the paired statistics.

use std::path::PathBuf;

use foveate::agent::{make_posner_intentions, make_reach_intentions, ActionMode, Agent as CoreAgent};
use foveate::attention::red_centroid as core_red_centroid;
use foveate::cli::{self, RunConfig};
use foveate::gencoords::Image;
use foveate::genmodels::draw_blob;
use foveate::tasks::{self, PosnerTrialSpec, ReachTrialSpec, TaskConfig as CoreTaskConfig};
use foveate::world::{apply_action, observe, sensory_action_jacobian, SceneState};
use foveate::Error;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_) | Error::Config(_) => PyValueError::new_err(e.to_string()),
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Parses an enum from its kebab-case name, e.g. `"bottom-up"`.
fn parse_name<T: DeserializeOwned>(what: &str, name: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(name.to_owned()))
        .map_err(|_| PyValueError::new_err(format!("unknown {what} {name:?}")))
}

fn to_object<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Task and agent parameters. Built from defaults or a TOML document with
/// the same tables as the `task` section of a run configuration.
#[pyclass(from_py_object)]
#[derive(Clone)]
pub struct TaskConfig {
    inner: CoreTaskConfig,
}

#[pymethods]
impl TaskConfig {
    #[new]
    #[pyo3(signature = (toml=None))]
    fn new(toml: Option<&str>) -> PyResult<Self> {
        let inner = match toml {
            Some(text) => toml::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
            None => CoreTaskConfig::default(),
        };
        inner.validate().map_err(to_py)?;
        Ok(TaskConfig { inner })
    }

    fn to_toml(&self) -> PyResult<String> {
        toml::to_string(&self.inner).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_object(py, &self.inner)
    }

    #[getter]
    fn max_target_steps(&self) -> usize {
        self.inner.max_target_steps
    }

    fn __repr__(&self) -> String {
        format!("TaskConfig(k_mu={}, dt={})", self.inner.agent.k_mu, self.inner.agent.dt)
    }
}

fn config_or_default(config: Option<&TaskConfig>) -> CoreTaskConfig {
    config.map(|c| c.inner.clone()).unwrap_or_default()
}

/// Camera and target of one trial.
#[pyclass(from_py_object)]
#[derive(Clone)]
pub struct Scene {
    inner: SceneState,
    config: CoreTaskConfig,
}

#[pymethods]
impl Scene {
    #[new]
    #[pyo3(signature = (config=None))]
    fn new(config: Option<&TaskConfig>) -> Self {
        Scene {
            inner: SceneState::empty(),
            config: config_or_default(config),
        }
    }

    /// Places a visible target where image point `(u, v)` currently is.
    fn show_target(&mut self, u: f64, v: f64) {
        self.inner.target = self.config.camera.direction_of([u, v], self.inner.camera);
        self.inner.target_visible = true;
    }

    fn hide_target(&mut self) {
        self.inner.target_visible = false;
    }

    fn show_cue(&mut self, u: f64, v: f64) {
        self.inner.cue = Some([u, v]);
    }

    fn hide_cue(&mut self) {
        self.inner.cue = None;
    }

    #[getter]
    fn camera(&self) -> (f64, f64) {
        (self.inner.camera[0], self.inner.camera[1])
    }

    /// Image position of the target for the current camera.
    fn target_image(&self) -> (f64, f64) {
        let [u, v] = self.inner.target_image(&self.config.camera);
        (u, v)
    }

    /// Moves the camera at rate `(pitch, yaw)` for one step; returns whether
    /// a joint limit clipped the motion.
    fn apply(&mut self, pitch_rate: f64, yaw_rate: f64) -> PyResult<bool> {
        let (next, clipped) = apply_action(
            &self.inner,
            [pitch_rate, yaw_rate],
            &self.config.camera,
            self.config.agent.dt,
        )
        .map_err(to_py)?;
        self.inner = next;
        Ok(clipped)
    }

    /// Sensations as a dict with `proprio`, `cue` and a flat RGB `image`.
    fn observe(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let s = observe(&self.inner, &self.config.camera, &self.config.agent.renderer);
        let d = pyo3::types::PyDict::new(py);
        d.set_item("proprio", s.proprio.to_vec())?;
        d.set_item("cue", s.cue.to_vec())?;
        d.set_item("image", s.visual.as_slice().to_vec())?;
        d.set_item("size", s.visual.size())?;
        Ok(d.into_any().unbind())
    }
}

/// The active-inference agent.
#[pyclass]
pub struct Agent {
    inner: CoreAgent,
    config: CoreTaskConfig,
}

#[pymethods]
impl Agent {
    /// `intentions` is `"none"`, `"posner"` or `"reach"`; `action` is an
    /// action mode such as `"disabled"` or `"bottom-up"`.
    #[new]
    #[pyo3(signature = (config=None, intentions="posner", action="disabled"))]
    fn new(config: Option<&TaskConfig>, intentions: &str, action: &str) -> PyResult<Self> {
        let config = config_or_default(config);
        let mut agent_cfg = config.agent.clone();
        agent_cfg.action_mode = parse_name::<ActionMode>("action mode", action)?;
        let intents = match intentions {
            "none" => Vec::new(),
            "posner" => make_posner_intentions(&config.gains),
            "reach" => make_reach_intentions(&config.gains, config.camera.focal),
            other => return Err(PyValueError::new_err(format!("unknown intention set {other:?}"))),
        };
        let inner = CoreAgent::new(agent_cfg, intents).map_err(to_py)?;
        Ok(Agent { inner, config })
    }

    /// Current belief `mu`.
    #[getter]
    fn belief(&self) -> Vec<f64> {
        self.inner.belief.mu.clone()
    }

    #[getter]
    fn belief_prime(&self) -> Vec<f64> {
        self.inner.belief.mu_prime.clone()
    }

    fn focus(&self) -> (f64, f64, f64) {
        let l = self.inner.config.layout;
        let mu = &self.inner.belief.mu;
        (mu[l.amp()], mu[l.focus_u()], mu[l.focus_v()])
    }

    fn target_belief(&self) -> (f64, f64, f64) {
        let [u, v] = self.inner.belief.target_position();
        (u, v, self.inner.belief.presence())
    }

    /// One perception-action step against `scene`. The camera moves by the
    /// resulting action unless the action mode is disabled. Returns the free
    /// energy, the belief after the update and the camera rate.
    fn step(&mut self, py: Python<'_>, scene: &mut Scene) -> PyResult<Py<PyAny>> {
        let cam = &self.config.camera;
        let s = observe(&scene.inner, cam, &self.config.agent.renderer);
        let jac = sensory_action_jacobian(&s, cam, self.config.agent.dt, self.config.agent.rbf.tau_mass);
        let out = self.inner.step(&s, Some(&jac)).map_err(to_py)?;
        let k_a = self.config.agent.k_a;
        let rate = [k_a * out.action.a_dot[0], k_a * out.action.a_dot[1]];
        let (next, clipped) = apply_action(&scene.inner, rate, cam, self.config.agent.dt).map_err(to_py)?;
        scene.inner = next;
        let d = pyo3::types::PyDict::new(py);
        d.set_item("free_energy", out.trace.free_energy)?;
        d.set_item("mu", out.trace.mu)?;
        d.set_item("action", rate.to_vec())?;
        d.set_item("clipped", clipped)?;
        Ok(d.into_any().unbind())
    }
}

/// Flat RGB image (row-major, channel-last) of a blob at `(u, v)`.
#[pyfunction]
#[pyo3(signature = (u, v, presence=1.0, config=None))]
fn render(u: f64, v: f64, presence: f64, config: Option<&TaskConfig>) -> Vec<f64> {
    draw_blob(u, v, presence, &config_or_default(config).agent.renderer).into_vec()
}

/// Soft red centroid `(u, v)` of a flat square RGB image, or `None` when
/// too little red is present.
#[pyfunction]
#[pyo3(signature = (image, tau_mass=0.5))]
fn red_centroid(image: Vec<f64>, tau_mass: f64) -> PyResult<Option<(f64, f64)>> {
    let size = ((image.len() / 3) as f64).sqrt().round() as usize;
    let img = Image::from_vec(size, image).map_err(to_py)?;
    let c = core_red_centroid(&img, tau_mass);
    Ok(c.present.then_some((c.u, c.v)))
}

/// One cueing trial. Geometry is drawn from `seed` unless both
/// `eccentricity_px` and `angle` are given.
#[pyfunction]
#[pyo3(signature = (cue_type, validity, ctoa=100, seed=0, eccentricity_px=None, angle=None, trace=false, config=None))]
#[allow(clippy::too_many_arguments)]
fn run_posner_trial(
    py: Python<'_>,
    cue_type: &str,
    validity: &str,
    ctoa: usize,
    seed: u64,
    eccentricity_px: Option<f64>,
    angle: Option<f64>,
    trace: bool,
    config: Option<&TaskConfig>,
) -> PyResult<Py<PyAny>> {
    let cfg = config_or_default(config);
    let mut spec = PosnerTrialSpec::sampled(
        parse_name("cue type", cue_type)?,
        parse_name("validity", validity)?,
        ctoa,
        seed,
        &cfg,
    );
    if let (Some(e), Some(a)) = (eccentricity_px, angle) {
        spec.eccentricity_px = e;
        spec.angle = a;
    }
    let record = py
        .detach(|| tasks::run_posner_trial(&spec, &cfg, trace))
        .map_err(to_py)?;
    to_object(py, &record)
}

/// One camera-reach trial in `"top-down"` or `"bottom-up"` mode.
#[pyfunction]
#[pyo3(signature = (mode, seed=0, eccentricity_px=None, angle=None, trace=false, config=None))]
fn run_reach_trial(
    py: Python<'_>,
    mode: &str,
    seed: u64,
    eccentricity_px: Option<f64>,
    angle: Option<f64>,
    trace: bool,
    config: Option<&TaskConfig>,
) -> PyResult<Py<PyAny>> {
    let cfg = config_or_default(config);
    let mut spec = ReachTrialSpec::sampled(parse_name("reach mode", mode)?, seed, &cfg);
    if let (Some(e), Some(a)) = (eccentricity_px, angle) {
        spec.eccentricity_px = e;
        spec.angle = a;
    }
    let record = py
        .detach(|| tasks::run_reach_trial(&spec, &cfg, trace))
        .map_err(to_py)?;
    to_object(py, &record)
}

/// Runs an experiment described by a TOML run configuration (the format
/// the command-line tool reads) and returns the paths it wrote.
#[pyfunction]
#[pyo3(signature = (toml, out_dir=None))]
fn run_experiment(py: Python<'_>, toml: &str, out_dir: Option<PathBuf>) -> PyResult<Vec<String>> {
    let mut cfg = RunConfig::from_toml(toml).map_err(to_py)?;
    if let Some(dir) = out_dir {
        cfg.out_dir = dir;
    }
    let out = py.detach(|| cli::run(&cfg)).map_err(to_py)?;
    Ok(out.files.iter().map(|p| p.display().to_string()).collect())
}

/// Exact one-sided sign test on paired reaction times, `None` marking a
/// timeout. Returns `(wins, losses, ties, p_value)` for "first is faster".
#[pyfunction]
fn sign_test(pairs: Vec<(Option<usize>, Option<usize>)>) -> (u64, u64, u64, f64) {
    let t = tasks::sign_test(&pairs);
    (t.wins, t.losses, t.ties, t.p_value)
}

#[pyfunction]
fn spearman(x: Vec<f64>, y: Vec<f64>) -> Option<f64> {
    tasks::spearman(&x, &y)
}

#[pymodule]
fn foveate_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<TaskConfig>()?;
    m.add_class::<Scene>()?;
    m.add_class::<Agent>()?;
    m.add_function(wrap_pyfunction!(render, m)?)?;
    m.add_function(wrap_pyfunction!(red_centroid, m)?)?;
    m.add_function(wrap_pyfunction!(run_posner_trial, m)?)?;
    m.add_function(wrap_pyfunction!(run_reach_trial, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(sign_test, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    Ok(())
}
