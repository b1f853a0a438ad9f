mod common;

use common::hard_centroid;
use foveate::agent::AgentConfig;
use foveate::attention::{precision_field, red_centroid, CovertFocus, RbfParams};
use foveate::gencoords::{pixel_center, weighted_sq_error, DiagonalPrecision, Image, CHANNELS};
use foveate::genmodels::{draw_blob, BlobRendererConfig};
use foveate::tasks::{
    run_posner_trial, run_reach_trial, CueType, Outcome, PosnerTrialSpec, ReachMode, ReachTrialSpec, TaskConfig,
    Validity,
};
use foveate::world::{apply_action, observe, CameraModel, SceneState};
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn weighted_error_is_nonnegative_and_zero_only_at_zero(
        e in prop::collection::vec(-10.0f64..10.0, 1..40),
        scale in 1e-3f64..1e3,
    ) {
        let pi = DiagonalPrecision::new(e.iter().enumerate().map(|(i, _)| scale * (1.0 + i as f64)).collect(), 1e-3).unwrap();
        let q = weighted_sq_error(&e, &pi).unwrap();
        prop_assert!(q >= 0.0);
        prop_assert_eq!(q == 0.0, e.iter().all(|x| *x == 0.0));
        let zeros = vec![0.0; e.len()];
        prop_assert_eq!(weighted_sq_error(&zeros, &pi).unwrap(), 0.0);
    }

    #[test]
    fn camera_shift_moves_the_blob_the_other_way(
        u in -0.5f64..0.5,
        v in -0.5f64..0.5,
        dp in -0.05f64..0.05,
        dy in -0.05f64..0.05,
    ) {
        let cam = CameraModel::default();
        let renderer = BlobRendererConfig::default();
        let mut scene = SceneState::empty();
        scene.target = cam.direction_of([u, v], scene.camera);
        scene.target_visible = true;
        let (moved, clipped) = apply_action(&scene, [dp, dy], &cam, 1.0).unwrap();
        prop_assert!(!clipped);
        let tau = AgentConfig::default().rbf.tau_mass;
        let before = red_centroid(&observe(&scene, &cam, &renderer).visual, tau);
        let after = red_centroid(&observe(&moved, &cam, &renderer).visual, tau);
        prop_assert!((after.u - before.u + cam.focal * dy).abs() < 0.05);
        prop_assert!((after.v - before.v + cam.focal * dp).abs() < 0.05);
    }

    #[test]
    fn point_error_attracts_the_focus(
        fu in -0.6f64..0.6,
        fv in -0.6f64..0.6,
        p in 0usize..1024,
        amp in 0.2f64..4.0,
    ) {
        let params = RbfParams::default();
        let img = Image::filled(32, [0.5; 3]);
        let focus = CovertFocus::new(amp, fu, fv);
        let field = precision_field(&focus, &img, &params);
        let (x, y) = pixel_center(p, 32);
        let d = (x - fu).hypot(y - fv);
        let clamp_radius = params.b * (1.0 - params.ln_eps).sqrt();
        prop_assume!(d > 1e-3 && d < 0.95 * clamp_radius && !field.floored[p]);
        let mut e = vec![0.0; 32 * 32 * CHANNELS];
        e[p * CHANNELS] = 1.0;
        let (_, quad) = field.focus_gradient_terms(&e);
        // the error term raises precision at the error, so it points there
        prop_assert!(quad[1] * (x - fu) + quad[2] * (y - fv) > 0.0);
    }

    #[test]
    fn redness_free_pixels_outside_the_clamp_have_no_image_sensitivity(
        bu in -0.7f64..0.7,
        bv in -0.7f64..0.7,
        fu in -0.9f64..0.9,
        fv in -0.9f64..0.9,
    ) {
        let params = RbfParams::default();
        let img = draw_blob(bu, bv, 1.0, &BlobRendererConfig::default());
        let field = precision_field(&CovertFocus::new(1.0, fu, fv), &img, &params);
        let c = field.centroid;
        prop_assume!(c.present);
        let clamp_radius = params.b * (1.0 - params.ln_eps).sqrt();
        for q in 0..32 * 32 {
            let (x, y) = pixel_center(q, 32);
            let rgb = &img.as_slice()[q * CHANNELS..][..CHANNELS];
            let outside = (x - c.u).hypot(y - c.v) >= clamp_radius;
            if foveate::attention::redness(rgb) == 0.0 && outside {
                for j in [q * CHANNELS, q * CHANNELS + 1, q * CHANNELS + 2] {
                    for i in (0..32 * 32 * CHANNELS).step_by(131) {
                        prop_assert_eq!(field.dpi_ds(i, j), 0.0);
                    }
                    prop_assert_eq!(field.dpi_ds(q * CHANNELS, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn soft_and_hard_centroids_agree(u in -0.8f64..0.8, v in -0.8f64..0.8, presence in 0.5f64..1.0) {
        let img = draw_blob(u, v, presence, &BlobRendererConfig::default());
        let soft = red_centroid(&img, AgentConfig::default().rbf.tau_mass);
        let (hu, hv) = hard_centroid(&img).unwrap();
        prop_assert!(soft.present);
        prop_assert!((soft.u - hu).hypot(soft.v - hv) < 0.05);
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn posner_trials_are_reproducible_and_consistent(
        seed in 0u64..10_000,
        exo in any::<bool>(),
        valid in any::<bool>(),
        ctoa in 0usize..120,
    ) {
        let cfg = TaskConfig::default();
        let cue_type = if exo { CueType::Exogenous } else { CueType::Endogenous };
        let validity = if valid { Validity::Valid } else { Validity::Invalid };
        let spec = PosnerTrialSpec::sampled(cue_type, validity, ctoa, seed, &cfg);
        let a = run_posner_trial(&spec, &cfg, true).unwrap();
        let b = run_posner_trial(&spec, &cfg, true).unwrap();
        prop_assert_eq!(&a, &b);
        let schedule: usize = cfg.init_steps + cfg.cue_steps + ctoa;
        match a.outcome {
            Outcome::Detected => {
                let rt = a.rt_steps.unwrap();
                prop_assert!(rt >= 1 && rt <= cfg.max_target_steps);
                prop_assert_eq!(a.trace.len(), schedule + rt);
            }
            _ => prop_assert!(a.rt_steps.is_none()),
        }
        prop_assert!(a.trace.iter().all(|r| r.free_energy.is_finite() && r.mu.iter().all(|x| x.is_finite())));
    }

    #[test]
    fn reach_keeps_the_camera_within_limits(seed in 0u64..10_000, bottom_up in any::<bool>()) {
        let cfg = TaskConfig::default();
        let mode = if bottom_up { ReachMode::BottomUp } else { ReachMode::TopDown };
        let spec = ReachTrialSpec::sampled(mode, seed, &cfg);
        let r = run_reach_trial(&spec, &cfg, true).unwrap();
        for row in &r.trace {
            prop_assert!(row.camera[0].abs() <= cfg.camera.pitch_limit);
            prop_assert!(row.camera[1].abs() <= cfg.camera.yaw_limit);
        }
        prop_assert_eq!(r.outcome, Outcome::Completed);
    }
}
