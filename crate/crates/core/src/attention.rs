//! Visual sensory precision driven by the covert focus and by red stimuli.
//!
//! Every pixel `i` at normalized center `(x, y)` receives the precision
//!
//! ```text
//! pi_i = gain * [ amp/2 (ln(1 - d_mu^2 / b^2) + c) + 1/2 (ln(1 - d_r^2 / b^2) + c) ]
//! ```
//!
//! where `d_mu` is the distance to the focus center and `d_r` the distance to
//! the red centroid of the image. The log argument is clamped at `ln_eps` and
//! the result floored at `floor`. The three colour channels of a pixel share
//! its precision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gencoords::{pixel_center, DiagonalPrecision, Image, CHANNELS, DEFAULT_PRECISION_FLOOR};

/// Shape parameters of the precision function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RbfParams {
    pub b: f64,
    pub c: f64,
    pub ln_eps: f64,
    pub floor: f64,
    /// Overall scale applied before flooring.
    pub gain: f64,
    /// Minimum summed redness for a centroid to count as present.
    pub tau_mass: f64,
}

impl Default for RbfParams {
    fn default() -> Self {
        RbfParams {
            b: 2.6,
            c: 1.0,
            ln_eps: 1e-3,
            floor: DEFAULT_PRECISION_FLOOR,
            gain: 1.0,
            tau_mass: 0.5,
        }
    }
}

impl RbfParams {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if !pos(self.b) || !pos(self.ln_eps) || !pos(self.floor) || !pos(self.gain) {
            return Err(Error::invalid("b, ln_eps, floor and gain must be positive"));
        }
        if !self.c.is_finite() || self.tau_mass.is_nan() || self.tau_mass < 0.0 {
            return Err(Error::invalid("c must be finite and tau_mass non-negative"));
        }
        Ok(())
    }
}

/// Amplitude and center of the covert-attention RBF.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovertFocus {
    pub amp: f64,
    pub u: f64,
    pub v: f64,
}

impl CovertFocus {
    pub fn new(amp: f64, u: f64, v: f64) -> Self {
        CovertFocus { amp, u, v }
    }
}

/// Redness-weighted centroid of an image.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RedCentroid {
    pub u: f64,
    pub v: f64,
    pub mass: f64,
    pub present: bool,
}

impl RedCentroid {
    pub const ABSENT: RedCentroid = RedCentroid {
        u: 0.0,
        v: 0.0,
        mass: 0.0,
        present: false,
    };
}

/// Redness of one pixel, `max(0, R - max(G, B))`.
#[inline]
pub fn redness(rgb: &[f64]) -> f64 {
    (rgb[0] - rgb[1].max(rgb[2])).max(0.0)
}

/// Soft red centroid: redness-weighted mean of the pixel centers.
pub fn red_centroid(image: &Image, tau_mass: f64) -> RedCentroid {
    let size = image.size();
    let (mut m, mut mu, mut mv) = (0.0, 0.0, 0.0);
    for (p, rgb) in image.as_slice().chunks_exact(CHANNELS).enumerate() {
        let w = redness(rgb);
        if w > 0.0 {
            let (x, y) = pixel_center(p, size);
            m += w;
            mu += w * x;
            mv += w * y;
        }
    }
    if m >= tau_mass && m > 0.0 {
        RedCentroid {
            u: mu / m,
            v: mv / m,
            mass: m,
            present: true,
        }
    } else {
        RedCentroid {
            mass: m,
            ..RedCentroid::ABSENT
        }
    }
}

/// Sparse Jacobian of the centroid with respect to the image entries:
/// `(entry, d r_u / d s, d r_v / d s)`. Empty when the centroid is absent.
/// At `G == B` ties the green channel carries the subgradient.
pub fn red_centroid_jacobian(image: &Image, centroid: &RedCentroid) -> Vec<(usize, f64, f64)> {
    if !centroid.present {
        return Vec::new();
    }
    let size = image.size();
    let inv_m = 1.0 / centroid.mass;
    let mut out = Vec::new();
    for (p, rgb) in image.as_slice().chunks_exact(CHANNELS).enumerate() {
        if redness(rgb) <= 0.0 {
            continue;
        }
        let (x, y) = pixel_center(p, size);
        let du = (x - centroid.u) * inv_m;
        let dv = (y - centroid.v) * inv_m;
        let k = p * CHANNELS;
        out.push((k, du, dv));
        let rival = if rgb[1] >= rgb[2] { k + 1 } else { k + 2 };
        out.push((rival, -du, -dv));
    }
    out
}

/// Log-RBF contribution `(ln(max(1 - d2/b^2, eps)) + c)` and whether the
/// clamp is active.
#[inline]
fn log_rbf(d2: f64, params: &RbfParams) -> (f64, f64, bool) {
    let arg = 1.0 - d2 / (params.b * params.b);
    if arg > params.ln_eps {
        (arg.ln() + params.c, arg, false)
    } else {
        (params.ln_eps.ln() + params.c, params.ln_eps, true)
    }
}

/// Unfloored, ungained per-pixel value with its pieces.
struct PixelTerms {
    focus_term: f64,
    focus_arg: f64,
    focus_clamped: bool,
    red_term: f64,
    red_arg: f64,
    red_clamped: bool,
}

fn pixel_terms(x: f64, y: f64, focus: &CovertFocus, centroid: &RedCentroid, params: &RbfParams) -> PixelTerms {
    let d2 = (x - focus.u).powi(2) + (y - focus.v).powi(2);
    let (focus_term, focus_arg, focus_clamped) = log_rbf(d2, params);
    let (red_term, red_arg, red_clamped) = if centroid.present {
        let d2r = (x - centroid.u).powi(2) + (y - centroid.v).powi(2);
        log_rbf(d2r, params)
    } else {
        (params.c, 1.0, true)
    };
    PixelTerms {
        focus_term,
        focus_arg,
        focus_clamped,
        red_term,
        red_arg,
        red_clamped,
    }
}

/// Precision at image point `(x, y)`.
pub fn precision_at(x: f64, y: f64, focus: &CovertFocus, centroid: &RedCentroid, params: &RbfParams) -> f64 {
    let t = pixel_terms(x, y, focus, centroid, params);
    let raw = params.gain * (0.5 * focus.amp * t.focus_term + 0.5 * t.red_term);
    raw.max(params.floor)
}

/// Diagonal visual precision with its gradients.
#[derive(Clone, Debug)]
pub struct PrecisionField {
    /// One entry per visual observation (`L`), constant across a pixel's channels.
    pub pi: DiagonalPrecision,
    /// Per pixel: `d pi / d (amp, u, v)` of the covert focus.
    pub dpi_dmu: Vec<[f64; 3]>,
    /// Per pixel: `d pi / d (r_u, r_v)` of the red centroid.
    pub dpi_dr: Vec<[f64; 2]>,
    pub centroid: RedCentroid,
    /// Sparse `d (r_u, r_v) / d s`; see [`red_centroid_jacobian`].
    pub dr_ds: Vec<(usize, f64, f64)>,
    /// Pixels where the floor is active.
    pub floored: Vec<bool>,
}

impl PrecisionField {
    pub fn pixel_count(&self) -> usize {
        self.dpi_dmu.len()
    }

    /// Entry `(i, j)` of the `L x L` slice `d pi_i / d s_j`.
    pub fn dpi_ds(&self, i: usize, j: usize) -> f64 {
        let g = self.dpi_dr[i / CHANNELS];
        self.dr_ds
            .iter()
            .filter(|(k, _, _)| *k == j)
            .map(|(_, du, dv)| g[0] * du + g[1] * dv)
            .sum()
    }

    /// `1/2 Tr[Pi^-1 dPi/dtheta]` and `1/2 e' dPi/dtheta e` for the focus
    /// parameters `theta = (amp, u, v)`.
    pub fn focus_gradient_terms(&self, e_visual: &[f64]) -> ([f64; 3], [f64; 3]) {
        let mut trace = [0.0; 3];
        let mut quad = [0.0; 3];
        let pis = self.pi.diag();
        for (p, g) in self.dpi_dmu.iter().enumerate() {
            if g == &[0.0; 3] {
                continue;
            }
            let k = p * CHANNELS;
            let inv = CHANNELS as f64 / pis[k];
            let e2: f64 = e_visual[k..k + CHANNELS].iter().map(|e| e * e).sum();
            for d in 0..3 {
                trace[d] += 0.5 * inv * g[d];
                quad[d] += 0.5 * e2 * g[d];
            }
        }
        (trace, quad)
    }

    /// Same as [`Self::focus_gradient_terms`] for the centroid `(r_u, r_v)`.
    pub fn centroid_gradient_terms(&self, e_visual: &[f64]) -> ([f64; 2], [f64; 2]) {
        let mut trace = [0.0; 2];
        let mut quad = [0.0; 2];
        if !self.centroid.present {
            return (trace, quad);
        }
        let pis = self.pi.diag();
        for (p, g) in self.dpi_dr.iter().enumerate() {
            if g == &[0.0; 2] {
                continue;
            }
            let k = p * CHANNELS;
            let inv = CHANNELS as f64 / pis[k];
            let e2: f64 = e_visual[k..k + CHANNELS].iter().map(|e| e * e).sum();
            for d in 0..2 {
                trace[d] += 0.5 * inv * g[d];
                quad[d] += 0.5 * e2 * g[d];
            }
        }
        (trace, quad)
    }
}

/// Evaluates the precision of every pixel and its gradients with respect to
/// the focus and, through the soft centroid, to the image.
pub fn precision_field(focus: &CovertFocus, image: &Image, params: &RbfParams) -> PrecisionField {
    let centroid = red_centroid(image, params.tau_mass);
    let dr_ds = red_centroid_jacobian(image, &centroid);
    let size = image.size();
    let n = size * size;
    let b2 = params.b * params.b;
    let mut diag = Vec::with_capacity(n * CHANNELS);
    let mut dpi_dmu = Vec::with_capacity(n);
    let mut dpi_dr = Vec::with_capacity(n);
    let mut floored = Vec::with_capacity(n);
    for p in 0..n {
        let (x, y) = pixel_center(p, size);
        let t = pixel_terms(x, y, focus, &centroid, params);
        let raw = params.gain * (0.5 * focus.amp * t.focus_term + 0.5 * t.red_term);
        let is_floored = raw.is_nan() || raw <= params.floor;
        let value = if is_floored { params.floor } else { raw };
        for _ in 0..CHANNELS {
            diag.push(value);
        }
        floored.push(is_floored);
        if is_floored {
            dpi_dmu.push([0.0; 3]);
            dpi_dr.push([0.0; 2]);
            continue;
        }
        let d_amp = params.gain * 0.5 * t.focus_term;
        let (d_u, d_v) = if t.focus_clamped {
            (0.0, 0.0)
        } else {
            let s = params.gain * focus.amp / (b2 * t.focus_arg);
            (s * (x - focus.u), s * (y - focus.v))
        };
        dpi_dmu.push([d_amp, d_u, d_v]);
        if t.red_clamped {
            dpi_dr.push([0.0; 2]);
        } else {
            let s = params.gain / (b2 * t.red_arg);
            dpi_dr.push([s * (x - centroid.u), s * (y - centroid.v)]);
        }
    }
    PrecisionField {
        pi: DiagonalPrecision::floored(diag, params.floor),
        dpi_dmu,
        dpi_dr,
        centroid,
        dr_ds,
        floored,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gencoords::pixel_coord;
    use crate::genmodels::{render, BlobRendererConfig};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gray() -> Image {
        Image::filled(32, [0.5, 0.5, 0.5])
    }

    fn noisy_blob(rng: &mut ChaCha8Rng, u: f64, v: f64) -> Image {
        let mut img = render(&[u, v, 1.0], &BlobRendererConfig::default()).unwrap().pixels;
        for x in img.as_mut_slice() {
            *x = (*x + rng.random_range(-0.02..0.02)).clamp(0.0, 1.0);
        }
        img
    }

    #[test]
    fn gray_image_has_no_centroid() {
        assert!(!red_centroid(&gray(), 0.5).present);
    }

    #[test]
    fn single_red_pixel_centroid() {
        let mut img = gray();
        // nearest pixel centers to (0.4, -0.2)
        let col = ((0.4 + 1.0) * 16.0) as usize;
        let row = ((-0.2 + 1.0) * 16.0) as usize;
        img.set_rgb(row, col, [1.0, 0.0, 0.0]);
        let c = red_centroid(&img, 0.5);
        assert!(c.present);
        assert_eq!((c.u, c.v), (pixel_coord(col, 32), pixel_coord(row, 32)));
        assert!((c.u - 0.4).abs() <= 1.0 / 32.0 && (c.v + 0.2).abs() <= 1.0 / 32.0);

        let mut faint = gray();
        faint.set_rgb(row, col, [0.7, 0.5, 0.5]);
        assert!(!red_centroid(&faint, 0.5).present);
    }

    #[test]
    fn rendered_blob_centroid_matches_weighted_mean() {
        let cfg = BlobRendererConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let (u, v) = (rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7));
            let img = render(&[u, v, 1.0], &cfg).unwrap().pixels;
            // brute-force weighted mean over (row, col) loops
            let (mut m, mut su, mut sv) = (0.0, 0.0, 0.0);
            for r in 0..32 {
                for c in 0..32 {
                    let [rr, g, b] = img.rgb(r, c);
                    let w = (rr - g.max(b)).max(0.0);
                    m += w;
                    su += w * pixel_coord(c, 32);
                    sv += w * pixel_coord(r, 32);
                }
            }
            let got = red_centroid(&img, 0.5);
            assert!((got.u - su / m).abs() < 1e-12 && (got.v - sv / m).abs() < 1e-12);
            assert!((got.u - u).abs() < 0.05 && (got.v - v).abs() < 0.05);
        }
    }

    #[test]
    fn precision_at_focus_center_is_one() {
        let p = precision_at(
            0.1,
            -0.3,
            &CovertFocus::new(1.0, 0.1, -0.3),
            &RedCentroid::ABSENT,
            &RbfParams::default(),
        );
        assert!((p - 1.0).abs() < 1e-15);
    }

    #[test]
    fn precision_decreases_with_distance_from_focus() {
        let params = RbfParams::default();
        let focus = CovertFocus::new(1.0, -0.25, 0.0);
        let mut last = f64::INFINITY;
        for k in 0..200 {
            let d = k as f64 * 0.013;
            let p = precision_at(-0.25 + d, 0.0, &focus, &RedCentroid::ABSENT, &params);
            assert!(p <= last);
            last = p;
        }
    }

    #[test]
    fn field_maximum_at_focus_when_centroid_coincides() {
        let mut img = gray();
        let (row, col) = (9, 22);
        img.set_rgb(row, col, [1.0, 0.0, 0.0]);
        let (x, y) = (pixel_coord(col, 32), pixel_coord(row, 32));
        let field = precision_field(&CovertFocus::new(1.3, x, y), &img, &RbfParams::default());
        let argmax = (0..1024)
            .max_by(|a, b| field.pi.diag()[a * 3].total_cmp(&field.pi.diag()[b * 3]))
            .unwrap();
        assert_eq!(argmax, row * 32 + col);
    }

    #[test]
    fn dpi_dmu_matches_finite_differences() {
        let params = RbfParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 1e-4;
        for _ in 0..100 {
            let focus = CovertFocus::new(
                rng.random_range(0.2..2.0),
                rng.random_range(-0.9..0.9),
                rng.random_range(-0.9..0.9),
            );
            let (u, v) = (rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7));
            let img = noisy_blob(&mut rng, u, v);
            let field = precision_field(&focus, &img, &params);
            for d in 0..3 {
                let mut fp = focus;
                let mut fm = focus;
                match d {
                    0 => {
                        fp.amp += h;
                        fm.amp -= h
                    }
                    1 => {
                        fp.u += h;
                        fm.u -= h
                    }
                    _ => {
                        fp.v += h;
                        fm.v -= h
                    }
                }
                let a = precision_field(&fp, &img, &params);
                let b = precision_field(&fm, &img, &params);
                for p in 0..1024 {
                    let fd = (a.pi.diag()[p * 3] - b.pi.diag()[p * 3]) / (2.0 * h);
                    let an = field.dpi_dmu[p][d];
                    assert!(
                        (fd - an).abs() <= 1e-4 * an.abs().max(1e-3),
                        "pixel {p} dim {d}: {an} vs {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn dpi_ds_matches_finite_differences() {
        let params = RbfParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = 1e-6;
        for _ in 0..5 {
            let focus = CovertFocus::new(1.0, rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
            let (u, v) = (rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6));
            let img = noisy_blob(&mut rng, u, v);
            let field = precision_field(&focus, &img, &params);
            // probe the entries that carry centroid sensitivity plus a few inert ones
            let mut probes: Vec<usize> = field.dr_ds.iter().map(|t| t.0).step_by(7).collect();
            probes.extend([0, 1, 2, 1500]);
            for &j in &probes {
                let mut plus = img.clone();
                let mut minus = img.clone();
                plus.as_mut_slice()[j] += h;
                minus.as_mut_slice()[j] -= h;
                let a = precision_field(&focus, &plus, &params);
                let b = precision_field(&focus, &minus, &params);
                for i in (0..3072).step_by(97) {
                    let fd = (a.pi.diag()[i] - b.pi.diag()[i]) / (2.0 * h);
                    let an = field.dpi_ds(i, j);
                    assert!((fd - an).abs() <= 1e-3 * an.abs().max(1e-6), "({i},{j}): {an} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn dpi_ds_is_zero_for_pixels_without_redness() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let img = noisy_blob(&mut rng, 0.2, 0.1);
        let field = precision_field(&CovertFocus::new(1.0, 0.0, 0.0), &img, &RbfParams::default());
        for p in 0..1024 {
            let rgb = &img.as_slice()[p * 3..p * 3 + 3];
            if redness(rgb) == 0.0 {
                for c in 0..3 {
                    assert_eq!(field.dpi_ds(5, p * 3 + c), 0.0);
                }
            }
        }
    }

    #[test]
    fn clamped_and_floored_pixels_have_zero_focus_gradient() {
        let params = RbfParams::default();
        let focus = CovertFocus::new(3.0, -0.95, -0.95);
        let field = precision_field(&focus, &gray(), &params);
        // the far corner is past the RBF radius
        let far = 31 * 32 + 31;
        assert!(field.floored[far]);
        assert_eq!(field.dpi_dmu[far], [0.0; 3]);
        assert!(field.pi.diag().iter().all(|p| *p >= params.floor));
    }

    proptest! {
        #[test]
        fn precision_is_floored_everywhere(
            amp in 0.0f64..5.0, u in -1.0f64..1.0, v in -1.0f64..1.0,
            ru in -1.0f64..1.0, rv in -1.0f64..1.0, gain in 0.1f64..300.0,
        ) {
            let params = RbfParams { gain, ..RbfParams::default() };
            let img = render(&[ru, rv, 1.0], &BlobRendererConfig::default()).unwrap().pixels;
            let field = precision_field(&CovertFocus::new(amp, u, v), &img, &params);
            prop_assert!(field.pi.diag().iter().all(|p| *p >= params.floor && p.is_finite()));
        }

        #[test]
        fn foveation_without_centroid(amp in 0.01f64..5.0, d1 in 0.0f64..2.8, d2 in 0.0f64..2.8, angle in 0.0f64..std::f64::consts::TAU) {
            let params = RbfParams::default();
            let focus = CovertFocus::new(amp, 0.0, 0.0);
            let (near, far) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let p = |d: f64| precision_at(d * angle.cos(), d * angle.sin(), &focus, &RedCentroid::ABSENT, &params);
            prop_assert!(p(near) >= p(far));
        }
    }
}
