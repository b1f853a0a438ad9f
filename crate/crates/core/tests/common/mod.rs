#![allow(dead_code)]

use foveate::agent::{evaluate, AgentConfig, Evaluation, Intention};
use foveate::attention::redness;
use foveate::gencoords::{pixel_center, BeliefLayout, GeneralizedBelief, Image, SensoryBundle, CHANNELS, CUE_SENTINEL};
use foveate::genmodels::{draw_blob, BlobRenderer, BlobRendererConfig};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Centroid of the largest 4-connected set of pixels whose redness exceeds
/// half the image maximum, with every member weighted equally.
pub fn hard_centroid(img: &Image) -> Option<(f64, f64)> {
    let n = img.size();
    let red: Vec<f64> = img.as_slice().chunks_exact(CHANNELS).map(redness).collect();
    let peak = red.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return None;
    }
    let on: Vec<bool> = red.iter().map(|r| *r > 0.5 * peak).collect();
    let mut label = vec![usize::MAX; n * n];
    let mut best: Vec<usize> = Vec::new();
    for start in 0..n * n {
        if !on[start] || label[start] != usize::MAX {
            continue;
        }
        let mut members = vec![start];
        label[start] = start;
        let mut i = 0;
        while i < members.len() {
            let p = members[i];
            let (r, c) = (p / n, p % n);
            let mut push = |q: usize| {
                if on[q] && label[q] == usize::MAX {
                    label[q] = start;
                    members.push(q);
                }
            };
            if r > 0 {
                push(p - n);
            }
            if r + 1 < n {
                push(p + n);
            }
            if c > 0 {
                push(p - 1);
            }
            if c + 1 < n {
                push(p + 1);
            }
            i += 1;
        }
        if members.len() > best.len() {
            best = members;
        }
    }
    let k = best.len() as f64;
    let (su, sv) = best.iter().fold((0.0, 0.0), |(su, sv), &p| {
        let (x, y) = pixel_center(p, n);
        (su + x, sv + y)
    });
    Some((su / k, sv / k))
}

/// `|a - b| <= rel * max(|a|, |b|, floor)`.
pub fn close(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(floor)
}

pub fn central_diff(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (f(h) - f(-h)) / (2.0 * h)
}

/// Random belief and sensation away from clamps, gates and the precision
/// floor.
pub fn random_case(rng: &mut ChaCha8Rng) -> (GeneralizedBelief, SensoryBundle) {
    let l = BeliefLayout::default();
    let mut gb = GeneralizedBelief::resting(l);
    if rng.random_bool(0.5) {
        gb.mu[l.cue_u()] = rng.random_range(-0.8..0.8);
        gb.mu[l.cue_v()] = rng.random_range(-0.8..0.8);
    }
    gb.mu[l.pitch()] = rng.random_range(-0.2..0.2);
    gb.mu[l.yaw()] = rng.random_range(-0.2..0.2);
    gb.mu[l.target_u()] = rng.random_range(-0.6..0.6);
    gb.mu[l.target_v()] = rng.random_range(-0.6..0.6);
    gb.mu[l.presence()] = if rng.random_bool(0.5) {
        rng.random_range(0.05..0.4)
    } else {
        rng.random_range(0.6..0.95)
    };
    gb.mu[l.amp()] = rng.random_range(0.5..3.0);
    gb.mu[l.focus_u()] = rng.random_range(-0.5..0.5);
    gb.mu[l.focus_v()] = rng.random_range(-0.5..0.5);
    for x in gb.mu_prime.iter_mut() {
        *x = rng.random_range(-0.05..0.05);
    }
    let visual = draw_blob(
        rng.random_range(-0.6..0.6),
        rng.random_range(-0.6..0.6),
        rng.random_range(0.6..1.0),
        &BlobRendererConfig::default(),
    );
    let cue = if rng.random_bool(0.5) {
        [rng.random_range(-0.8..0.8), rng.random_range(-0.8..0.8)]
    } else {
        CUE_SENTINEL
    };
    let proprio = [rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2)];
    (gb, SensoryBundle { proprio, cue, visual })
}

pub fn eval(gb: &GeneralizedBelief, s: &SensoryBundle, intents: &[Intention], cfg: &AgentConfig) -> Evaluation {
    let model = BlobRenderer::new(cfg.renderer.clone()).unwrap();
    evaluate(gb, s, intents, cfg, &model).unwrap()
}

/// Sensory quadratic form `1/2 sum_c w_c e_c' Pi_c e_c`.
pub fn sensory_quad(ev: &Evaluation, cfg: &AgentConfig) -> f64 {
    let sq = |e: &[f64], p: f64| 0.5 * p * e.iter().map(|x| x * x).sum::<f64>();
    sq(&ev.errors.proprio, cfg.pi_proprio) + sq(&ev.errors.cue, cfg.pi_cue) + visual_quad(ev, cfg)
}

pub fn visual_quad(ev: &Evaluation, cfg: &AgentConfig) -> f64 {
    0.5 * cfg.visual_weight
        * ev.errors
            .visual
            .iter()
            .zip(ev.field.pi.diag())
            .map(|(e, p)| p * e * e)
            .sum::<f64>()
}

/// `1/2 w ln|Pi_s|`.
pub fn half_log_det(ev: &Evaluation, cfg: &AgentConfig) -> f64 {
    0.5 * cfg.visual_weight * ev.field.pi.diag().iter().map(|p| p.ln()).sum::<f64>()
}

/// `1/2 e_mu' Pi_mu e_mu`.
pub fn dynamics_quad(ev: &Evaluation, cfg: &AgentConfig) -> f64 {
    0.5 * ev
        .errors
        .dynamics
        .iter()
        .zip(cfg.pi_mu().diag())
        .map(|(e, p)| p * e * e)
        .sum::<f64>()
}

/// Central difference of a scalar of the evaluation along `mu[i]`, or
/// `mu'[i]` when `prime`.
#[allow(clippy::too_many_arguments)]
pub fn belief_fd(
    gb: &GeneralizedBelief,
    s: &SensoryBundle,
    intents: &[Intention],
    cfg: &AgentConfig,
    i: usize,
    prime: bool,
    h: f64,
    scalar: impl Fn(&Evaluation, &AgentConfig) -> f64,
) -> f64 {
    central_diff(
        |d| {
            let mut g = gb.clone();
            if prime {
                g.mu_prime[i] += d;
            } else {
                g.mu[i] += d;
            }
            scalar(&eval(&g, s, intents, cfg), cfg)
        },
        h,
    )
}
