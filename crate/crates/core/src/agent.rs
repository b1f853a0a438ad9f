//! Belief and action updates.
//!
//! For the generalized belief `(mu, mu')` the flow is
//!
//! ```text
//! mu_dot  = mu' + dg/dmu' Pi_s e_s + df/dmu' Pi_mu e_mu + 1/2 Tr[Pi_s^-1 dPi_s/dmu] -/+ 1/2 e_s' dPi_s/dmu e_s
//! mu'_dot = -Pi_mu e_mu
//! ```
//!
//! with `e_s = s - g(mu)`, `e_mu = mu' - f(mu)` and `f` the sum of the active
//! intentions. `Pi_mu` is constant, so its gradient terms vanish. The sign of
//! the last term is selected by [`FocusDrive`]. Both orders are integrated
//! with `x <- x + dt * k_mu * s_b * x_dot`, where `s_b` is a per-block rate
//! multiplier (a diagonal preconditioner).

use serde::{Deserialize, Serialize};

use crate::attention::{precision_field, CovertFocus, PrecisionField, RbfParams};
use crate::error::{Error, Result};
use crate::gencoords::{
    free_energy, BeliefLayout, DiagonalPrecision, GeneralizedBelief, PredictionError, SensoryBundle, SensoryPrecisions,
};
use crate::genmodels::{BlobRenderer, BlobRendererConfig, ExteroceptiveModel, VisualPrediction};
use crate::world::SensoryActionJacobian;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionMode {
    Disabled,
    TopDown,
    BottomUp,
    Both,
}

impl ActionMode {
    pub fn top_down(self) -> bool {
        matches!(self, ActionMode::TopDown | ActionMode::Both)
    }

    pub fn bottom_up(self) -> bool {
        matches!(self, ActionMode::BottomUp | ActionMode::Both)
    }
}

/// How the precision-weighted prediction error moves the covert focus.
///
/// `Descent` applies `-1/2 e' dPi/dmu e`, the exact free-energy gradient,
/// which pushes precision away from unexplained error. `Salience` flips that
/// one term so the focus is drawn toward unexplained error; the focus block
/// then descends `-1/2 e' Pi e - 1/2 ln|Pi| + dynamics` while every other
/// block still descends the free energy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FocusDrive {
    Salience,
    Descent,
}

impl FocusDrive {
    fn sign(self) -> f64 {
        match self {
            FocusDrive::Salience => 1.0,
            FocusDrive::Descent => -1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    /// Belief learning rate.
    pub k_mu: f64,
    /// Per-block multipliers of `k_mu` (cue, proprio, visual, focus).
    pub rate_scale: [f64; 4],
    /// Action learning rate.
    pub k_a: f64,
    pub dt: f64,
    /// Dynamics precision per belief block (cue, proprio, visual, focus).
    pub pi_mu_blocks: [f64; 4],
    pub pi_proprio: f64,
    pub pi_cue: f64,
    /// Tempering weight of the visual log-likelihood.
    pub visual_weight: f64,
    /// Weight of the visual free energy in the action update.
    pub action_visual_weight: f64,
    pub rbf: RbfParams,
    pub renderer: BlobRendererConfig,
    pub action_mode: ActionMode,
    pub focus_drive: FocusDrive,
    /// Propagate the backward term through the attractor's dependence on
    /// the belief (`dh/dmu`). When false, `h` is held fixed within a step.
    pub intention_coupling: bool,
    /// Damp the visual-block step by the diagonal Gauss-Newton curvature of
    /// the likelihood, `k / (1 + dt k H_jj)`, keeping Euler stable when the
    /// precision is large.
    pub implicit_visual: bool,
    pub layout: BeliefLayout,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            k_mu: 0.1,
            rate_scale: [1.0, 1.0, 0.4, 30.0],
            k_a: 0.05,
            dt: 1.0,
            pi_mu_blocks: [1.0, 1.0, 1.0, 0.25],
            pi_proprio: 1.0,
            pi_cue: 9.0,
            visual_weight: 2e-6,
            action_visual_weight: 3e-4,
            rbf: RbfParams {
                gain: 25_000.0,
                ..RbfParams::default()
            },
            renderer: BlobRendererConfig::default(),
            action_mode: ActionMode::Disabled,
            focus_drive: FocusDrive::Salience,
            intention_coupling: false,
            implicit_visual: true,
            layout: BeliefLayout::default(),
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if !pos(self.k_mu) || !pos(self.k_a) || !pos(self.dt) {
            return Err(Error::invalid("k_mu, k_a and dt must be positive"));
        }
        if !self.rate_scale.iter().all(|x| pos(*x)) {
            return Err(Error::invalid("rate_scale entries must be positive"));
        }
        if !self.pi_mu_blocks.iter().all(|x| pos(*x)) || !pos(self.pi_proprio) || !pos(self.pi_cue) {
            return Err(Error::invalid("precisions must be positive"));
        }
        if !pos(self.visual_weight) || !pos(self.action_visual_weight) {
            return Err(Error::invalid("visual weights must be positive"));
        }
        self.rbf.validate()?;
        self.renderer.validate()?;
        self.layout.validate()
    }

    /// Learning rate per belief entry.
    pub fn rates(&self) -> Vec<f64> {
        let l = &self.layout;
        let mut out = vec![0.0; l.total()];
        for (block, scale) in [l.cue(), l.proprio(), l.visual(), l.focus()]
            .into_iter()
            .zip(self.rate_scale)
        {
            out[block].fill(self.k_mu * scale);
        }
        out
    }

    /// The constant dynamics precision `Pi_mu` expanded to the belief length.
    pub fn pi_mu(&self) -> DiagonalPrecision {
        let l = &self.layout;
        let mut diag = vec![0.0; l.total()];
        for (block, value) in [l.cue(), l.proprio(), l.visual(), l.focus()]
            .into_iter()
            .zip(self.pi_mu_blocks)
        {
            diag[block].fill(value);
        }
        DiagonalPrecision::floored(diag, self.rbf.floor.min(1e-3))
    }

    fn scalar_precision(&self, value: f64) -> DiagonalPrecision {
        DiagonalPrecision::floored(vec![value; 2], self.rbf.floor.min(value))
    }
}

/// Whether the cue belief lies on the image (the sentinel sits off-screen).
pub fn cue_believed(mu: &[f64], layout: &BeliefLayout) -> bool {
    const ON_SCREEN: f64 = 1.25;
    mu[layout.cue()].iter().all(|x| x.abs() <= ON_SCREEN)
}

/// Presence belief above which the target counts as believed present.
pub const PRESENCE_THRESHOLD: f64 = 0.5;

/// Attractor-generating rule of a flexible intention.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntentionKind {
    /// Focus center and target position are drawn to the believed cue
    /// location while a cue is believed present.
    CueFollowing,
    /// The focus center returns to the image center when neither a cue nor
    /// a target is believed present.
    Home,
    /// Focus amplitude is drawn to `amp`.
    Amplitude { amp: f64 },
    /// While the target is believed absent, the target-position hypothesis
    /// follows the covert focus.
    Search,
    /// While the target is believed present and no cue is, the covert focus
    /// follows the target-position belief.
    Track,
    /// While the target is believed present, the camera belief is drawn to
    /// the orientation that centers the believed target.
    Reach { focal: f64 },
    /// Constant attractor on the masked entries.
    Fixed { target: Vec<f64>, mask: Vec<bool> },
}

/// A flexible intention `f(mu) = gain * (h(mu) - mu)` on the masked entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intention {
    pub name: String,
    pub gain: f64,
    pub kind: IntentionKind,
}

/// Sparse dependence of an attractor entry on a belief entry:
/// `d h[row] / d mu[col] = 1`.
type Coupling = (usize, usize);

impl Intention {
    pub fn new(name: impl Into<String>, gain: f64, kind: IntentionKind) -> Self {
        Intention {
            name: name.into(),
            gain,
            kind,
        }
    }

    /// Attractor `h`, active mask and the unit couplings `dh/dmu`.
    pub fn attractor(&self, mu: &[f64], layout: &BeliefLayout) -> (Vec<f64>, Vec<bool>, Vec<Coupling>) {
        let m = layout.total();
        let mut h = mu.to_vec();
        let mut mask = vec![false; m];
        let mut couplings = Vec::new();
        let mut link = |h: &mut Vec<f64>, mask: &mut Vec<bool>, row: usize, col: usize| {
            h[row] = mu[col];
            mask[row] = true;
            couplings.push((row, col));
        };
        let cue = cue_believed(mu, layout);
        let present = mu[layout.presence()] >= PRESENCE_THRESHOLD;
        match &self.kind {
            IntentionKind::CueFollowing => {
                if cue {
                    link(&mut h, &mut mask, layout.focus_u(), layout.cue_u());
                    link(&mut h, &mut mask, layout.focus_v(), layout.cue_v());
                    link(&mut h, &mut mask, layout.target_u(), layout.cue_u());
                    link(&mut h, &mut mask, layout.target_v(), layout.cue_v());
                }
            }
            IntentionKind::Amplitude { amp } => {
                h[layout.amp()] = *amp;
                mask[layout.amp()] = true;
            }
            IntentionKind::Home => {
                if !cue && !present {
                    for i in [layout.focus_u(), layout.focus_v()] {
                        h[i] = 0.0;
                        mask[i] = true;
                    }
                }
            }
            IntentionKind::Search => {
                if !present {
                    link(&mut h, &mut mask, layout.target_u(), layout.focus_u());
                    link(&mut h, &mut mask, layout.target_v(), layout.focus_v());
                }
            }
            IntentionKind::Track => {
                if present && !cue {
                    link(&mut h, &mut mask, layout.focus_u(), layout.target_u());
                    link(&mut h, &mut mask, layout.focus_v(), layout.target_v());
                }
            }
            IntentionKind::Reach { focal } => {
                if present {
                    // h_pitch = pitch + v / focal, h_yaw = yaw + u / focal
                    let (p, y) = (layout.pitch(), layout.yaw());
                    h[p] = mu[p] + mu[layout.target_v()] / focal;
                    h[y] = mu[y] + mu[layout.target_u()] / focal;
                    mask[p] = true;
                    mask[y] = true;
                }
            }
            IntentionKind::Fixed { target, mask: fixed } => {
                for i in 0..m.min(target.len()).min(fixed.len()) {
                    if fixed[i] {
                        h[i] = target[i];
                        mask[i] = true;
                    }
                }
            }
        }
        (h, mask, couplings)
    }

    /// Adds this intention's `f(mu)` and `df/dmu` (row-major `M x M`).
    /// Without `coupled`, `h` counts as constant and only `-gain` on the
    /// masked diagonal enters the Jacobian.
    pub fn accumulate(&self, mu: &[f64], layout: &BeliefLayout, coupled: bool, f: &mut [f64], jac: &mut [f64]) {
        let m = layout.total();
        let (h, mask, couplings) = self.attractor(mu, layout);
        let l = self.gain;
        for i in 0..m {
            if mask[i] {
                f[i] += l * (h[i] - mu[i]);
                jac[i * m + i] -= l;
            }
        }
        if !coupled {
            return;
        }
        for (row, col) in couplings {
            jac[row * m + col] += l;
        }
        if let IntentionKind::Reach { focal } = self.kind {
            if mask[layout.pitch()] {
                // h - mu = target / focal; the identity parts cancel
                jac[layout.pitch() * m + layout.pitch()] += l;
                jac[layout.yaw() * m + layout.yaw()] += l;
                jac[layout.pitch() * m + layout.target_v()] += l / focal;
                jac[layout.yaw() * m + layout.target_u()] += l / focal;
            }
        }
    }
}

/// Gains of the stock intentions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntentionGains {
    pub cue: f64,
    pub home: f64,
    pub amplitude: f64,
    /// Resting focus amplitude.
    pub amp: f64,
    pub search: f64,
    pub track: f64,
    pub reach: f64,
}

impl Default for IntentionGains {
    fn default() -> Self {
        IntentionGains {
            cue: 0.3,
            home: 0.012,
            amplitude: 0.005,
            amp: 1.0,
            search: 0.3,
            track: 0.3,
            reach: 0.3,
        }
    }
}

/// Intentions for the cueing task: cue following, home, amplitude, search
/// and track.
pub fn make_posner_intentions(gains: &IntentionGains) -> Vec<Intention> {
    vec![
        Intention::new("cue-following", gains.cue, IntentionKind::CueFollowing),
        Intention::new("home", gains.home, IntentionKind::Home),
        Intention::new(
            "amplitude",
            gains.amplitude,
            IntentionKind::Amplitude { amp: gains.amp },
        ),
        Intention::new("search", gains.search, IntentionKind::Search),
        Intention::new("track", gains.track, IntentionKind::Track),
    ]
}

/// Cueing-task intentions plus the top-down camera reach.
pub fn make_reach_intentions(gains: &IntentionGains, focal: f64) -> Vec<Intention> {
    let mut v = make_posner_intentions(gains);
    v.push(Intention::new("reach", gains.reach, IntentionKind::Reach { focal }));
    v
}

/// Belief flow split into its named contributions (all length `M`).
#[derive(Clone, Debug, PartialEq)]
pub struct UpdateTerms {
    pub shift: Vec<f64>,
    pub likelihood: Vec<f64>,
    pub backward: Vec<f64>,
    /// Order-1 flow `-Pi_mu e_mu`.
    pub forward: Vec<f64>,
    pub precision_trace: Vec<f64>,
    pub precision_error: Vec<f64>,
}

impl UpdateTerms {
    pub fn mu_dot(&self) -> Vec<f64> {
        (0..self.shift.len())
            .map(|i| {
                self.shift[i]
                    + self.likelihood[i]
                    + self.backward[i]
                    + self.precision_trace[i]
                    + self.precision_error[i]
            })
            .collect()
    }

    pub fn mu_prime_dot(&self) -> Vec<f64> {
        self.forward.clone()
    }
}

/// Everything derived from one `(belief, sensation)` pair.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub prediction: VisualPrediction,
    pub field: PrecisionField,
    pub errors: PredictionError,
    /// `f(mu)` summed over intentions.
    pub dynamics: Vec<f64>,
    /// `df/dmu`, row-major `M x M`.
    pub dynamics_jacobian: Vec<f64>,
    /// Diagonal Gauss-Newton curvature of the visual likelihood, zero
    /// outside the visual block.
    pub curvature: Vec<f64>,
    pub terms: UpdateTerms,
    pub free_energy: f64,
}

/// Evaluates predictions, errors, precisions, the free energy and the
/// named belief-update terms.
pub fn evaluate(
    gb: &GeneralizedBelief,
    s: &SensoryBundle,
    intents: &[Intention],
    cfg: &AgentConfig,
    model: &dyn ExteroceptiveModel,
) -> Result<Evaluation> {
    let layout = &gb.layout;
    let m = layout.total();
    if gb.dim() != m || gb.mu_prime.len() != m {
        return Err(Error::invalid("belief does not match its layout"));
    }
    if !gb.is_finite() {
        return Err(Error::numeric("belief is not finite"));
    }
    let mu = &gb.mu;
    let prediction = model.predict(&mu[layout.visual()])?;
    if prediction.pixels.as_slice().len() != s.visual.as_slice().len() {
        return Err(Error::invalid("visual prediction and observation differ in size"));
    }
    let focus = CovertFocus::new(mu[layout.amp()], mu[layout.focus_u()], mu[layout.focus_v()]);
    let field = precision_field(&focus, &s.visual, &cfg.rbf);

    let mut f = vec![0.0; m];
    let mut jac = vec![0.0; m * m];
    for intent in intents {
        intent.accumulate(mu, layout, cfg.intention_coupling, &mut f, &mut jac);
    }
    let errors = PredictionError::compute(
        s,
        &mu[layout.proprio()],
        &mu[layout.cue()],
        &prediction.pixels,
        &gb.mu_prime,
        &f,
    )?;

    let pi_mu = cfg.pi_mu();
    let pi_p = cfg.scalar_precision(cfg.pi_proprio);
    let pi_c = cfg.scalar_precision(cfg.pi_cue);
    let w = cfg.visual_weight;

    let mut likelihood = vec![0.0; m];
    for (k, i) in layout.proprio().enumerate() {
        likelihood[i] = cfg.pi_proprio * errors.proprio[k];
    }
    for (k, i) in layout.cue().enumerate() {
        likelihood[i] = cfg.pi_cue * errors.cue[k];
    }
    let weighted: Vec<f64> = errors
        .visual
        .iter()
        .zip(field.pi.diag())
        .map(|(e, p)| w * p * e)
        .collect();
    let visual_force = prediction.transpose_mul(&weighted);
    let mut curvature = vec![0.0; m];
    for (k, p) in field.pi.diag().iter().enumerate() {
        for (j, i) in layout.visual().enumerate() {
            let d = prediction.jacobian_row(k)[j];
            curvature[i] += w * p * d * d;
        }
    }
    for (i, v) in layout.visual().zip(visual_force) {
        likelihood[i] = v;
    }

    let pe_mu: Vec<f64> = errors.dynamics.iter().zip(pi_mu.diag()).map(|(e, p)| p * e).collect();
    let mut backward = vec![0.0; m];
    for r in 0..m {
        if pe_mu[r] == 0.0 {
            continue;
        }
        for (c, b) in backward.iter_mut().enumerate() {
            *b += jac[r * m + c] * pe_mu[r];
        }
    }
    let forward: Vec<f64> = pe_mu.iter().map(|x| -x).collect();

    let (trace, quad) = field.focus_gradient_terms(&errors.visual);
    let mut precision_trace = vec![0.0; m];
    let mut precision_error = vec![0.0; m];
    let sign = cfg.focus_drive.sign();
    for (d, i) in layout.focus().enumerate() {
        precision_trace[i] = w * trace[d];
        precision_error[i] = sign * w * quad[d];
    }

    let pis = SensoryPrecisions {
        proprio: &pi_p,
        cue: &pi_c,
        visual: &field.pi,
        visual_weight: w,
    };
    let fe = free_energy(&pis, &pi_mu, &errors)?;

    let terms = UpdateTerms {
        shift: gb.mu_prime.clone(),
        likelihood,
        backward,
        forward,
        precision_trace,
        precision_error,
    };
    Ok(Evaluation {
        prediction,
        field,
        errors,
        dynamics: f,
        dynamics_jacobian: jac,
        curvature,
        terms,
        free_energy: fe,
    })
}

/// One step's diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct StepTrace {
    pub free_energy: f64,
    /// Belief after the update.
    pub mu: Vec<f64>,
    pub action: [f64; 2],
    /// L2 norms of the likelihood, backward, forward, sensory-precision and
    /// dynamics-precision contributions. The last is identically zero.
    pub term_norms: [f64; 5],
    pub clamped: bool,
    pub action_missing_visual: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn integrate(gb: &GeneralizedBelief, ev: &Evaluation, cfg: &AgentConfig) -> Result<(GeneralizedBelief, bool)> {
    let terms = &ev.terms;
    let rates = cfg.rates();
    let mut next = gb.clone();
    for (((x, d), k), h) in next.mu.iter_mut().zip(terms.mu_dot()).zip(&rates).zip(&ev.curvature) {
        let k = if cfg.implicit_visual {
            k / (1.0 + cfg.dt * k * h)
        } else {
            *k
        };
        *x += cfg.dt * k * d;
    }
    for ((x, d), k) in next.mu_prime.iter_mut().zip(terms.mu_prime_dot()).zip(&rates) {
        *x += cfg.dt * k * d;
    }
    if !next.is_finite() {
        return Err(Error::numeric(format!(
            "non-finite belief update: likelihood {:.3e}, backward {:.3e}, forward {:.3e}, precision {:.3e}/{:.3e}",
            norm(&terms.likelihood),
            norm(&terms.backward),
            norm(&terms.forward),
            norm(&terms.precision_trace),
            norm(&terms.precision_error),
        )));
    }
    let clamped = next.enforce_bounds();
    Ok((next, clamped))
}

fn trace_of(ev: &Evaluation, next: &GeneralizedBelief, clamped: bool) -> StepTrace {
    let t = &ev.terms;
    let precision: Vec<f64> = t
        .precision_trace
        .iter()
        .zip(&t.precision_error)
        .map(|(a, b)| a + b)
        .collect();
    StepTrace {
        free_energy: ev.free_energy,
        mu: next.mu.clone(),
        action: [0.0; 2],
        term_norms: [
            norm(&t.likelihood),
            norm(&t.backward),
            norm(&t.forward),
            norm(&precision),
            0.0,
        ],
        clamped: clamped || ev.prediction.clamped,
        action_missing_visual: false,
    }
}

/// Integrates one belief update.
pub fn belief_step(
    gb: &GeneralizedBelief,
    s: &SensoryBundle,
    intents: &[Intention],
    cfg: &AgentConfig,
    model: &dyn ExteroceptiveModel,
) -> Result<(GeneralizedBelief, StepTrace)> {
    let ev = evaluate(gb, s, intents, cfg, model)?;
    let (next, clamped) = integrate(gb, &ev, cfg)?;
    let trace = trace_of(&ev, &next, clamped);
    Ok((next, trace))
}

/// Action rate and its two contributions, `(pitch, yaw)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ActionSignal {
    pub a_dot: [f64; 2],
    pub top_down: [f64; 2],
    pub bottom_up: [f64; 2],
    /// Bottom-up action was requested but no red centroid was visible.
    pub missing_visual: bool,
}

/// Action rate `a_dot = -dF/da` restricted to the configured contributions.
///
/// The top-down part acts through the proprioceptive channel; the bottom-up
/// part acts through the centroid-dependent half of the visual precision.
pub fn action_step(
    gb: &GeneralizedBelief,
    s: &SensoryBundle,
    field: &PrecisionField,
    e_visual: &[f64],
    jac: &SensoryActionJacobian,
    cfg: &AgentConfig,
) -> Result<ActionSignal> {
    let mut out = ActionSignal::default();
    if cfg.action_mode == ActionMode::Disabled {
        return Ok(out);
    }
    if cfg.action_mode.top_down() {
        let mu_p = gb.proprio();
        let e = [s.proprio[0] - mu_p[0], s.proprio[1] - mu_p[1]];
        let pe = [cfg.pi_proprio * e[0], cfg.pi_proprio * e[1]];
        for (a, td) in out.top_down.iter_mut().enumerate() {
            *td = -(jac.proprio[0][a] * pe[0] + jac.proprio[1][a] * pe[1]);
        }
    }
    if cfg.action_mode.bottom_up() {
        match (&jac.visual, field.centroid.present) {
            (Some(dr_da), true) => {
                let (trace, quad) = field.centroid_gradient_terms(e_visual);
                let w = cfg.action_visual_weight;
                let g = [w * (trace[0] - quad[0]), w * (trace[1] - quad[1])];
                for (a, bu) in out.bottom_up.iter_mut().enumerate() {
                    *bu = g[0] * dr_da[0][a] + g[1] * dr_da[1][a];
                }
            }
            _ => out.missing_visual = true,
        }
    }
    out.a_dot = [out.top_down[0] + out.bottom_up[0], out.top_down[1] + out.bottom_up[1]];
    if !out.a_dot.iter().all(|x| x.is_finite()) {
        return Err(Error::numeric("non-finite action"));
    }
    Ok(out)
}

/// Belief state, configuration and generative model of one agent.
pub struct Agent<M: ExteroceptiveModel = BlobRenderer> {
    pub belief: GeneralizedBelief,
    pub config: AgentConfig,
    pub intentions: Vec<Intention>,
    model: M,
}

/// Result of one perception-action step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutput {
    pub trace: StepTrace,
    pub action: ActionSignal,
}

impl Agent<BlobRenderer> {
    pub fn new(config: AgentConfig, intentions: Vec<Intention>) -> Result<Self> {
        config.validate()?;
        let model = BlobRenderer::new(config.renderer.clone())?;
        Ok(Self::with_model(config, intentions, model))
    }
}

impl<M: ExteroceptiveModel> Agent<M> {
    pub fn with_model(config: AgentConfig, intentions: Vec<Intention>, model: M) -> Self {
        Agent {
            belief: GeneralizedBelief::resting(config.layout),
            config,
            intentions,
            model,
        }
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn evaluate(&self, s: &SensoryBundle) -> Result<Evaluation> {
        evaluate(&self.belief, s, &self.intentions, &self.config, &self.model)
    }

    /// Updates the belief from `s`; computes the action when `jac` is given
    /// and action is enabled. The returned action is the rate `a_dot`; the
    /// caller integrates `k_a * a_dot`.
    pub fn step(&mut self, s: &SensoryBundle, jac: Option<&SensoryActionJacobian>) -> Result<StepOutput> {
        let ev = self.evaluate(s)?;
        let action = match jac {
            Some(j) if self.config.action_mode != ActionMode::Disabled => {
                action_step(&self.belief, s, &ev.field, &ev.errors.visual, j, &self.config)?
            }
            _ => ActionSignal::default(),
        };
        let (next, clamped) = integrate(&self.belief, &ev, &self.config)?;
        let mut trace = trace_of(&ev, &next, clamped);
        trace.action = action.a_dot;
        trace.action_missing_visual = action.missing_visual;
        self.belief = next;
        Ok(StepOutput { trace, action })
    }
}
