"""Shared fixtures. The expensive ones are session-scoped."""

import numpy as np
import pytest

from reachintent import generator as gen, kinematics as kin, surrogate as sg


@pytest.fixture(scope="session")
def arm_model():
    return kin.default_arm_model()


@pytest.fixture(scope="session")
def small_net(arm_model):
    """Surrogate trained on a modest dataset; a few seconds, built once.

    Good to roughly 2 cm held-out error, enough for behavioral tests;
    the acceptance suite trains the full-size net itself.
    """
    ds = sg.build_dataset(arm_model, gen.ControllerGains(),
                          gen.empty_scene(), gen.rest_posture(arm_model),
                          n=2000, seed=1)
    net, _ = sg.train(ds, sg.TrainConfig(epochs=200))
    return net


@pytest.fixture(scope="session")
def reach_observation(arm_model):
    """One simulated reach with 5 mm point noise, plus its target."""
    gains = gen.ControllerGains()
    target = np.array([0.22, 0.41, 0.0])
    pts, _ = gen.simulate_reach(arm_model, gains, gen.empty_scene(),
                                gen.rest_posture(arm_model), target)
    rng = np.random.default_rng(42)
    noisy = gen.Trajectory(points=pts + rng.normal(0.0, 0.005, pts.shape),
                           dt=gains.dt)
    return noisy, target
