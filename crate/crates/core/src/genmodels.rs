//! Generative sensor models: the exteroceptive blob renderer and the identity
//! maps of the proprioceptive and interoceptive channels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gencoords::{pixel_center, Image, CHANNELS, IMAGE_SIZE};

/// Appearance of the rendered target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlobRendererConfig {
    pub image_size: usize,
    /// Standard deviation of the radial intensity profile, normalized units.
    pub blob_sigma: f64,
    pub background_color: [f64; 3],
    pub blob_color: [f64; 3],
}

impl Default for BlobRendererConfig {
    fn default() -> Self {
        BlobRendererConfig {
            image_size: IMAGE_SIZE,
            blob_sigma: 0.12,
            background_color: [0.5, 0.5, 0.5],
            blob_color: [1.0, 0.0, 0.0],
        }
    }
}

impl BlobRendererConfig {
    pub fn validate(&self) -> Result<()> {
        if self.image_size == 0 {
            return Err(Error::invalid("image_size must be positive"));
        }
        if !(self.blob_sigma > 0.0 && self.blob_sigma.is_finite()) {
            return Err(Error::invalid("blob_sigma must be positive"));
        }
        let in_unit = |c: &[f64; 3]| c.iter().all(|x| (0.0..=1.0).contains(x));
        if !in_unit(&self.background_color) || !in_unit(&self.blob_color) {
            return Err(Error::invalid("colors must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn visual_len(&self) -> usize {
        self.image_size * self.image_size * CHANNELS
    }
}

/// Predicted image and its Jacobian with respect to the visual belief.
#[derive(Clone, Debug, PartialEq)]
pub struct VisualPrediction {
    pub pixels: Image,
    /// Row-major `L x visual_dim`; row `k` holds `d pixels[k] / d belief`.
    pub jacobian: Vec<f64>,
    pub visual_dim: usize,
    /// True when the belief had to be clamped into the renderer's domain.
    pub clamped: bool,
}

impl VisualPrediction {
    pub fn jacobian_row(&self, k: usize) -> &[f64] {
        &self.jacobian[k * self.visual_dim..(k + 1) * self.visual_dim]
    }

    /// `J' * v` for an `L`-vector `v`.
    pub fn transpose_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.visual_dim];
        for (k, vk) in v.iter().enumerate() {
            if *vk == 0.0 {
                continue;
            }
            for (o, j) in out.iter_mut().zip(self.jacobian_row(k)) {
                *o += j * vk;
            }
        }
        out
    }
}

/// Exteroceptive generative model. Any implementation producing a
/// [`VisualPrediction`] of matching shape can drive the agent.
pub trait ExteroceptiveModel: Send + Sync {
    fn predict(&self, visual_belief: &[f64]) -> Result<VisualPrediction>;
}

/// Renders a Gaussian blob over a uniform background:
///
/// ```text
/// pixel(x, y) = bg + presence * exp(-((x-u)^2 + (y-v)^2) / (2 sigma^2)) * (color - bg)
/// ```
///
/// Beliefs outside `u, v in [-1, 1]`, `presence in [0, 1]` are clamped, and the
/// corresponding Jacobian columns are zero. Free latents after the first
/// three slots have zero Jacobian columns.
pub fn render(visual_belief: &[f64], cfg: &BlobRendererConfig) -> Result<VisualPrediction> {
    if visual_belief.len() < 3 {
        return Err(Error::invalid("visual belief needs at least (u, v, presence)"));
    }
    if visual_belief.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric("visual belief is not finite"));
    }
    let dim = visual_belief.len();
    let (u, cu) = clamp_flag(visual_belief[0], -1.0, 1.0);
    let (v, cv) = clamp_flag(visual_belief[1], -1.0, 1.0);
    let (presence, cp) = clamp_flag(visual_belief[2], 0.0, 1.0);

    let size = cfg.image_size;
    let bg = cfg.background_color;
    let delta = [
        cfg.blob_color[0] - bg[0],
        cfg.blob_color[1] - bg[1],
        cfg.blob_color[2] - bg[2],
    ];
    let inv_two_s2 = 1.0 / (2.0 * cfg.blob_sigma * cfg.blob_sigma);
    let inv_s2 = 2.0 * inv_two_s2;

    let mut pixels = Image::filled(size, bg);
    let mut jacobian = vec![0.0; size * size * CHANNELS * dim];
    let data = pixels.as_mut_slice();
    for p in 0..size * size {
        let (x, y) = pixel_center(p, size);
        let (dx, dy) = (x - u, y - v);
        let g = (-(dx * dx + dy * dy) * inv_two_s2).exp();
        let pg = presence * g;
        for c in 0..CHANNELS {
            let k = p * CHANNELS + c;
            data[k] = bg[c] + pg * delta[c];
            let row = &mut jacobian[k * dim..k * dim + 3];
            if !cu {
                row[0] = pg * dx * inv_s2 * delta[c];
            }
            if !cv {
                row[1] = pg * dy * inv_s2 * delta[c];
            }
            if !cp {
                row[2] = g * delta[c];
            }
        }
    }
    Ok(VisualPrediction {
        pixels,
        jacobian,
        visual_dim: dim,
        clamped: cu || cv || cp,
    })
}

/// Draws the blob at any position, including off-image, without a Jacobian.
/// Used by the world to produce observations.
pub fn draw_blob(u: f64, v: f64, presence: f64, cfg: &BlobRendererConfig) -> Image {
    let size = cfg.image_size;
    let bg = cfg.background_color;
    let inv_two_s2 = 1.0 / (2.0 * cfg.blob_sigma * cfg.blob_sigma);
    let mut img = Image::filled(size, bg);
    if presence == 0.0 {
        return img;
    }
    let data = img.as_mut_slice();
    for p in 0..size * size {
        let (x, y) = pixel_center(p, size);
        let g = presence * (-((x - u).powi(2) + (y - v).powi(2)) * inv_two_s2).exp();
        for c in 0..CHANNELS {
            data[p * CHANNELS + c] = bg[c] + g * (cfg.blob_color[c] - bg[c]);
        }
    }
    img
}

fn clamp_flag(x: f64, lo: f64, hi: f64) -> (f64, bool) {
    if x < lo {
        (lo, true)
    } else if x > hi {
        (hi, true)
    } else {
        (x, false)
    }
}

/// The analytic renderer as an [`ExteroceptiveModel`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BlobRenderer {
    pub config: BlobRendererConfig,
}

impl BlobRenderer {
    pub fn new(config: BlobRendererConfig) -> Result<Self> {
        config.validate()?;
        Ok(BlobRenderer { config })
    }
}

impl ExteroceptiveModel for BlobRenderer {
    fn predict(&self, visual_belief: &[f64]) -> Result<VisualPrediction> {
        render(visual_belief, &self.config)
    }
}

/// Identity prediction of camera `(pitch, yaw)` with its Jacobian.
pub fn proprio_predict(belief: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
    (belief, [[1.0, 0.0], [0.0, 1.0]])
}

/// Identity prediction of the symbolic cue with its Jacobian.
pub fn intero_predict(belief: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
    (belief, [[1.0, 0.0], [0.0, 1.0]])
}
