//! Generalized belief state, sensory containers, diagonal precisions and
//! free-energy bookkeeping.
//!
//! Beliefs are carried in generalized coordinates truncated at the first
//! temporal order: `mu` (order 0) and `mu_prime` (order 1). The belief vector
//! is the concatenation
//!
//! ```text
//! [ cue_u cue_v | pitch yaw | target_u target_v presence free.. | amp focus_u focus_v ]
//! ```
//!
//! Image coordinates are normalized to `[-1, 1]` on both axes; `u` grows with
//! the column index and `v` with the row index.

use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::error::{Error, Result};

/// Side length of the square sensor image.
pub const IMAGE_SIZE: usize = 32;
/// Colour channels per pixel.
pub const CHANNELS: usize = 3;
/// Number of scalar visual observations, `32 * 32 * 3`.
pub const VISUAL_LEN: usize = IMAGE_SIZE * IMAGE_SIZE * CHANNELS;
/// Pixels per normalized image unit (the half-width of the image is 1.0).
pub const PX_PER_UNIT: f64 = IMAGE_SIZE as f64 / 2.0;
/// Off-screen value carried by the cue channel when no cue is displayed.
pub const CUE_SENTINEL: [f64; 2] = [-2.0, -2.0];
/// Default lower bound on every precision entry.
pub const DEFAULT_PRECISION_FLOOR: f64 = 1e-3;

/// Normalized coordinate of the center of pixel `index` along one axis.
#[inline]
pub fn pixel_coord(index: usize, size: usize) -> f64 {
    (2 * index + 1) as f64 / size as f64 - 1.0
}

/// Normalized `(x, y)` center of the pixel at flat pixel index `p`
/// (row-major, no channel).
#[inline]
pub fn pixel_center(p: usize, size: usize) -> (f64, f64) {
    (pixel_coord(p % size, size), pixel_coord(p / size, size))
}

/// Converts a distance in pixels to normalized image units.
pub fn px_to_unit(px: f64) -> f64 {
    px / PX_PER_UNIT
}

/// Converts a distance in normalized image units to pixels.
pub fn unit_to_px(unit: f64) -> f64 {
    unit * PX_PER_UNIT
}

/// A `size x size x 3` RGB image stored row-major with interleaved channels.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    size: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn filled(size: usize, rgb: [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(size * size * CHANNELS);
        for _ in 0..size * size {
            data.extend_from_slice(&rgb);
        }
        Image { size, data }
    }

    pub fn from_vec(size: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != size * size * CHANNELS {
            return Err(Error::invalid(format!(
                "image buffer has {} entries, expected {}",
                data.len(),
                size * size * CHANNELS
            )));
        }
        Ok(Image { size, data })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn pixel_count(&self) -> usize {
        self.size * self.size
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn rgb(&self, row: usize, col: usize) -> [f64; 3] {
        let k = (row * self.size + col) * CHANNELS;
        [self.data[k], self.data[k + 1], self.data[k + 2]]
    }

    pub fn set_rgb(&mut self, row: usize, col: usize, rgb: [f64; 3]) {
        let k = (row * self.size + col) * CHANNELS;
        self.data[k..k + CHANNELS].copy_from_slice(&rgb);
    }

    pub fn in_unit_range(&self) -> bool {
        self.data.iter().all(|x| (0.0..=1.0).contains(x))
    }
}

/// Block sizes of the belief vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeliefLayout {
    pub cue_dim: usize,
    pub proprio_dim: usize,
    pub visual_dim: usize,
    pub focus_dim: usize,
}

impl Default for BeliefLayout {
    fn default() -> Self {
        BeliefLayout {
            cue_dim: 2,
            proprio_dim: 2,
            visual_dim: 3,
            focus_dim: 3,
        }
    }
}

impl BeliefLayout {
    /// Layout with `free` extra visual latents after (u, v, presence).
    pub fn with_free_latents(free: usize) -> Self {
        BeliefLayout {
            visual_dim: 3 + free,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cue_dim != 2 || self.proprio_dim != 2 || self.focus_dim != 3 {
            return Err(Error::invalid(
                "belief layout requires cue_dim = 2, proprio_dim = 2, focus_dim = 3",
            ));
        }
        if self.visual_dim < 3 {
            return Err(Error::invalid("visual_dim must be at least 3"));
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.cue_dim + self.proprio_dim + self.visual_dim + self.focus_dim
    }

    pub fn cue(&self) -> Range<usize> {
        0..self.cue_dim
    }

    pub fn proprio(&self) -> Range<usize> {
        let s = self.cue_dim;
        s..s + self.proprio_dim
    }

    pub fn visual(&self) -> Range<usize> {
        let s = self.cue_dim + self.proprio_dim;
        s..s + self.visual_dim
    }

    pub fn focus(&self) -> Range<usize> {
        let s = self.cue_dim + self.proprio_dim + self.visual_dim;
        s..s + self.focus_dim
    }

    pub fn cue_u(&self) -> usize {
        0
    }
    pub fn cue_v(&self) -> usize {
        1
    }
    pub fn pitch(&self) -> usize {
        self.proprio().start
    }
    pub fn yaw(&self) -> usize {
        self.proprio().start + 1
    }
    pub fn target_u(&self) -> usize {
        self.visual().start
    }
    pub fn target_v(&self) -> usize {
        self.visual().start + 1
    }
    pub fn presence(&self) -> usize {
        self.visual().start + 2
    }
    pub fn amp(&self) -> usize {
        self.focus().start
    }
    pub fn focus_u(&self) -> usize {
        self.focus().start + 1
    }
    pub fn focus_v(&self) -> usize {
        self.focus().start + 2
    }

    /// Splits a belief-sized vector into its four blocks.
    pub fn split<'a>(&self, v: &'a [f64]) -> [&'a [f64]; 4] {
        [&v[self.cue()], &v[self.proprio()], &v[self.visual()], &v[self.focus()]]
    }

    pub fn concat(&self, blocks: [&[f64]; 4]) -> Result<Vec<f64>> {
        let dims = [self.cue_dim, self.proprio_dim, self.visual_dim, self.focus_dim];
        if blocks.iter().zip(dims).any(|(b, d)| b.len() != d) {
            return Err(Error::invalid("block lengths do not match layout"));
        }
        Ok(blocks.concat())
    }
}

/// Belief `mu` and its first temporal derivative `mu_prime`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralizedBelief {
    pub mu: Vec<f64>,
    pub mu_prime: Vec<f64>,
    pub layout: BeliefLayout,
}

impl GeneralizedBelief {
    pub fn zeros(layout: BeliefLayout) -> Self {
        let m = layout.total();
        GeneralizedBelief {
            mu: vec![0.0; m],
            mu_prime: vec![0.0; m],
            layout,
        }
    }

    /// Resting belief: no cue, camera at the origin, target absent at the
    /// image center, focus centered with unit amplitude.
    pub fn resting(layout: BeliefLayout) -> Self {
        let mut gb = Self::zeros(layout);
        gb.mu[layout.cue_u()] = CUE_SENTINEL[0];
        gb.mu[layout.cue_v()] = CUE_SENTINEL[1];
        gb.mu[layout.amp()] = 1.0;
        gb
    }

    pub fn from_parts(mu: Vec<f64>, mu_prime: Vec<f64>, layout: BeliefLayout) -> Result<Self> {
        layout.validate()?;
        if mu.len() != layout.total() || mu_prime.len() != layout.total() {
            return Err(Error::invalid("belief length does not match layout"));
        }
        Ok(GeneralizedBelief { mu, mu_prime, layout })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn is_finite(&self) -> bool {
        self.mu.iter().chain(&self.mu_prime).all(|x| x.is_finite())
    }

    /// Clamps presence into `[0, 1]` and the focus amplitude to `>= 0`.
    /// Returns true when anything was clamped.
    pub fn enforce_bounds(&mut self) -> bool {
        let mut clamped = false;
        let p = self.layout.presence();
        if !(0.0..=1.0).contains(&self.mu[p]) {
            self.mu[p] = self.mu[p].clamp(0.0, 1.0);
            clamped = true;
        }
        let a = self.layout.amp();
        if self.mu[a] < 0.0 {
            self.mu[a] = 0.0;
            clamped = true;
        }
        clamped
    }

    pub fn target_position(&self) -> [f64; 2] {
        [self.mu[self.layout.target_u()], self.mu[self.layout.target_v()]]
    }

    pub fn presence(&self) -> f64 {
        self.mu[self.layout.presence()]
    }

    pub fn focus_center(&self) -> [f64; 2] {
        [self.mu[self.layout.focus_u()], self.mu[self.layout.focus_v()]]
    }

    pub fn cue(&self) -> [f64; 2] {
        [self.mu[self.layout.cue_u()], self.mu[self.layout.cue_v()]]
    }

    pub fn proprio(&self) -> [f64; 2] {
        [self.mu[self.layout.pitch()], self.mu[self.layout.yaw()]]
    }
}

/// Order-0 slot of the shifted state `D mu~`, i.e. `mu'`. Orders above the
/// first are truncated, so the order-1 slot of the shift is zero.
pub fn shift(gb: &GeneralizedBelief) -> Vec<f64> {
    gb.mu_prime.clone()
}

/// One step of observations from all three sensory channels.
#[derive(Clone, Debug, PartialEq)]
pub struct SensoryBundle {
    /// Camera `(pitch, yaw)` in radians.
    pub proprio: [f64; 2],
    /// Cue position in normalized image coordinates, or [`CUE_SENTINEL`].
    pub cue: [f64; 2],
    pub visual: Image,
}

impl SensoryBundle {
    pub fn cue_present(&self) -> bool {
        self.cue != CUE_SENTINEL
    }
}

/// Diagonal precision matrix with a strictly positive floor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalPrecision {
    diag: Vec<f64>,
    floor: f64,
}

impl DiagonalPrecision {
    /// Validating constructor; every entry must be finite and `>= floor > 0`.
    pub fn new(diag: Vec<f64>, floor: f64) -> Result<Self> {
        if !(floor > 0.0 && floor.is_finite()) {
            return Err(Error::invalid(format!("precision floor {floor} must be positive")));
        }
        if let Some(x) = diag.iter().find(|x| !x.is_finite() || **x < floor) {
            return Err(Error::invalid(format!("precision entry {x} below floor {floor}")));
        }
        Ok(DiagonalPrecision { diag, floor })
    }

    /// Builds a precision by raising every entry to at least `floor`.
    pub fn floored(mut diag: Vec<f64>, floor: f64) -> Self {
        assert!(floor > 0.0, "precision floor must be positive");
        for x in &mut diag {
            if x.is_nan() || *x < floor {
                *x = floor;
            }
        }
        DiagonalPrecision { diag, floor }
    }

    pub fn uniform(len: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; len], DEFAULT_PRECISION_FLOOR.min(value))
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn log_det(&self) -> f64 {
        self.diag.iter().map(|x| x.ln()).sum()
    }
}

/// `sum_i pi_i * e_i^2`.
pub fn weighted_sq_error(e: &[f64], pi: &DiagonalPrecision) -> Result<f64> {
    if e.len() != pi.len() {
        return Err(Error::invalid(format!(
            "error has {} entries, precision has {}",
            e.len(),
            pi.len()
        )));
    }
    Ok(e.iter().zip(pi.diag()).map(|(e, p)| p * e * e).sum())
}

/// Sensory and dynamics prediction errors for one step.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionError {
    pub proprio: Vec<f64>,
    pub cue: Vec<f64>,
    pub visual: Vec<f64>,
    /// `mu' - f(mu)`.
    pub dynamics: Vec<f64>,
}

impl PredictionError {
    /// Builds `s - g(mu)` per channel and `mu' - f(mu)`.
    pub fn compute(
        s: &SensoryBundle,
        proprio_pred: &[f64],
        cue_pred: &[f64],
        visual_pred: &Image,
        mu_prime: &[f64],
        f: &[f64],
    ) -> Result<Self> {
        if visual_pred.as_slice().len() != s.visual.as_slice().len() {
            return Err(Error::invalid("visual prediction size mismatch"));
        }
        if mu_prime.len() != f.len() {
            return Err(Error::invalid("dynamics size mismatch"));
        }
        let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(a, b)| a - b).collect::<Vec<_>>();
        Ok(PredictionError {
            proprio: diff(&s.proprio, proprio_pred),
            cue: diff(&s.cue, cue_pred),
            visual: diff(s.visual.as_slice(), visual_pred.as_slice()),
            dynamics: diff(mu_prime, f),
        })
    }
}

/// Precisions of the three sensory channels. `visual_weight` tempers the
/// whole visual log-likelihood (quadratic and log-determinant terms alike).
#[derive(Clone, Copy, Debug)]
pub struct SensoryPrecisions<'a> {
    pub proprio: &'a DiagonalPrecision,
    pub cue: &'a DiagonalPrecision,
    pub visual: &'a DiagonalPrecision,
    pub visual_weight: f64,
}

/// Free energy up to an additive constant:
///
/// ```text
/// F = 1/2 sum_c w_c [ e_c' Pi_c e_c - ln|Pi_c| ] + 1/2 [ e_mu' Pi_mu e_mu - ln|Pi_mu| ]
/// ```
pub fn free_energy(pis: &SensoryPrecisions<'_>, pi_mu: &DiagonalPrecision, preds: &PredictionError) -> Result<f64> {
    let channel =
        |e: &[f64], pi: &DiagonalPrecision| -> Result<f64> { Ok(0.5 * (weighted_sq_error(e, pi)? - pi.log_det())) };
    let f = channel(&preds.proprio, pis.proprio)?
        + channel(&preds.cue, pis.cue)?
        + pis.visual_weight * channel(&preds.visual, pis.visual)?
        + channel(&preds.dynamics, pi_mu)?;
    if !f.is_finite() {
        return Err(Error::numeric("free energy is not finite"));
    }
    Ok(f)
}
