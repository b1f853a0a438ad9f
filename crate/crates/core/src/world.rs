//! Simulated pan-tilt camera and scene.
//!
//! The target is fixed in world angles `(pitch, yaw)`. It projects to image
//! coordinates `u = focal * (yaw_t - yaw_c)`, `v = focal * (pitch_t - pitch_c)`,
//! so the visual observation depends on the camera orientation while the
//! symbolic cue does not.

use serde::{Deserialize, Serialize};

use crate::attention::red_centroid;
use crate::error::{Error, Result};
use crate::gencoords::{SensoryBundle, CUE_SENTINEL};
use crate::genmodels::{draw_blob, BlobRendererConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraModel {
    /// Normalized image units per radian.
    pub focal: f64,
    /// Symmetric joint limits, radians.
    pub pitch_limit: f64,
    pub yaw_limit: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        // half-width 1.0 covers 0.3 rad
        CameraModel {
            focal: 1.0 / 0.3,
            pitch_limit: 0.35,
            yaw_limit: 0.35,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if !pos(self.focal) || !pos(self.pitch_limit) || !pos(self.yaw_limit) {
            return Err(Error::invalid("camera focal length and limits must be positive"));
        }
        Ok(())
    }

    /// World direction `(pitch, yaw)` that appears at image `(u, v)` when the
    /// camera points at `camera`.
    pub fn direction_of(&self, uv: [f64; 2], camera: [f64; 2]) -> [f64; 2] {
        [camera[0] + uv[1] / self.focal, camera[1] + uv[0] / self.focal]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneState {
    /// Camera `(pitch, yaw)`, radians.
    pub camera: [f64; 2],
    /// Target direction `(pitch, yaw)`, radians.
    pub target: [f64; 2],
    pub target_visible: bool,
    /// Symbolic cue location in image coordinates, if shown.
    pub cue: Option<[f64; 2]>,
}

impl SceneState {
    pub fn empty() -> Self {
        SceneState {
            camera: [0.0, 0.0],
            target: [0.0, 0.0],
            target_visible: false,
            cue: None,
        }
    }

    /// Image position `(u, v)` of the target for the current camera.
    pub fn target_image(&self, cam: &CameraModel) -> [f64; 2] {
        [
            cam.focal * (self.target[1] - self.camera[1]),
            cam.focal * (self.target[0] - self.camera[0]),
        ]
    }
}

/// Renders the scene into a sensory bundle.
pub fn observe(state: &SceneState, cam: &CameraModel, renderer: &BlobRendererConfig) -> SensoryBundle {
    let [u, v] = state.target_image(cam);
    let in_frame = u.abs() <= 1.0 && v.abs() <= 1.0;
    let presence = if state.target_visible && in_frame { 1.0 } else { 0.0 };
    SensoryBundle {
        proprio: state.camera,
        cue: state.cue.unwrap_or(CUE_SENTINEL),
        visual: draw_blob(u, v, presence, renderer),
    }
}

/// Integrates the camera rate `a_dot` over `dt`, clipped to the joint
/// limits. Returns the new state and whether clipping occurred.
pub fn apply_action(state: &SceneState, a_dot: [f64; 2], cam: &CameraModel, dt: f64) -> Result<(SceneState, bool)> {
    if !a_dot.iter().all(|x| x.is_finite()) || !dt.is_finite() {
        return Err(Error::numeric("non-finite action"));
    }
    let delta = [dt * a_dot[0], dt * a_dot[1]];
    let mut next = state.clone();
    let limits = [cam.pitch_limit, cam.yaw_limit];
    let mut clipped = false;
    for i in 0..2 {
        let want = state.camera[i] + delta[i];
        next.camera[i] = want.clamp(-limits[i], limits[i]);
        clipped |= next.camera[i] != want;
    }
    Ok((next, clipped))
}

/// Sensitivities of the sensations to the action `a = (pitch, yaw)` rate,
/// for a camera displaced by `dt * a` per step.
#[derive(Clone, Debug, PartialEq)]
pub struct SensoryActionJacobian {
    /// `d s_proprio / d a`, rows `(pitch, yaw)`.
    pub proprio: [[f64; 2]; 2],
    /// `d (r_u, r_v) / d a` of the red centroid; `None` when no red
    /// region is visible.
    pub visual: Option<[[f64; 2]; 2]>,
}

/// Jacobian of the sensations with respect to the action.
///
/// Turning the camera by `da` shifts the image content by `-focal * da`, so
/// `d r_u / d yaw = d r_v / d pitch = -focal * dt`.
pub fn sensory_action_jacobian(s: &SensoryBundle, cam: &CameraModel, dt: f64, tau_mass: f64) -> SensoryActionJacobian {
    let centroid = red_centroid(&s.visual, tau_mass);
    let k = -cam.focal * dt;
    SensoryActionJacobian {
        proprio: [[dt, 0.0], [0.0, dt]],
        visual: centroid.present.then_some([[0.0, k], [k, 0.0]]),
    }
}
