"""Quick end-to-end check of the Python bindings."""

import os
import tempfile

import foveate_py as fv


def main():
    cfg = fv.TaskConfig()
    assert fv.TaskConfig(cfg.to_toml()).to_dict() == cfg.to_dict()

    img = fv.render(0.3, -0.2)
    assert len(img) == 32 * 32 * 3
    u, v = fv.red_centroid(img)
    assert abs(u - 0.3) < 0.05 and abs(v + 0.2) < 0.05

    scene = fv.Scene()
    scene.show_target(0.4, 0.1)
    agent = fv.Agent(intentions="posner", action="bottom-up")
    for _ in range(60):
        out = agent.step(scene)
    tu, tv, presence = agent.target_belief()
    print(f"after 60 steps: target belief ({tu:.3f}, {tv:.3f}), presence {presence:.2f}, "
          f"free energy {out['free_energy']:.1f}, camera {scene.camera}")
    assert presence > 0.5

    valid = fv.run_posner_trial("exogenous", "valid", seed=3)
    invalid = fv.run_posner_trial("exogenous", "invalid", seed=3)
    print("posner rt valid/invalid:", valid["rt_steps"], invalid["rt_steps"])
    assert valid["rt_steps"] < invalid["rt_steps"]

    reach = fv.run_reach_trial("bottom-up", seed=3)
    assert reach["outcome"] == "completed"

    wins, losses, ties, p = fv.sign_test([(1, 2)] * 10)
    assert (wins, losses, ties) == (10, 0, 0) and p < 1e-3

    with tempfile.TemporaryDirectory() as d:
        paths = fv.run_experiment('experiment = "reach"\nn_trials = 2\n', os.path.join(d, "out"))
        assert any(p.endswith("trials.csv") for p in paths)

    try:
        fv.Agent(action="sideways")
    except ValueError as e:
        print("rejected:", e)
    else:
        raise AssertionError("bad action mode accepted")

    print("smoke test passed, version", fv.__version__)


if __name__ == "__main__":
    main()
