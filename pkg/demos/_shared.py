"""Helpers shared by the demo scripts.

The interesting demos need a trained surrogate. Training a small one
takes ~15 s, so the first demo that needs it trains and caches the
weights next to this file; later runs just load them.
"""

import os
import time

from reachintent import generator as gen, kinematics as kin
from reachintent import surrogate as sg

CACHE = os.path.join(os.path.dirname(__file__), ".quick_surrogate.isur")


def quick_net(verbose=True):
    if os.path.exists(CACHE):
        if verbose:
            print(f"loading cached surrogate from {CACHE}")
        return sg.load_weights(CACHE)
    model = kin.default_arm_model()
    if verbose:
        print("no cached surrogate; generating 2,000 trajectories "
              "and training a quick net (one-time, ~20 s)")
    t0 = time.time()
    ds = sg.build_dataset(model, gen.ControllerGains(), gen.empty_scene(),
                          gen.rest_posture(model), n=2000, seed=8)
    net, report = sg.train(ds, sg.TrainConfig(epochs=200))
    sg.save_weights(net, CACHE)
    if verbose:
        print(f"trained in {time.time() - t0:.0f} s, held-out error "
              f"{report.test_mean_point_error * 100:.2f} cm, "
              f"cached at {CACHE}")
    return net
