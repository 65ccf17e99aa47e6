"""
Why the surrogate exists
========================

Grid inference wants one trajectory per cell, 9,100 of them, rebuilt
whenever the start posture or controller changes. The physical
simulator takes ~10 ms per trajectory; a small trained net emits the
same 90-point trajectories in microseconds.
"""

import time

import numpy as np

from _shared import quick_net
from reachintent import generator as gen, inference as inf
from reachintent import kinematics as kin, surrogate as sg

net = quick_net()
model = kin.default_arm_model()
gains = gen.ControllerGains()
grid = inf.default_grid()
centers = grid.cell_centers()

# surrogate: all 9,100 cells in one batched forward pass
t0 = time.perf_counter()
batch = sg.batch_forward_array(net, centers)
surrogate_s = time.perf_counter() - t0
print(f"surrogate: {len(centers)} trajectories in {surrogate_s * 1e3:.1f} ms "
      f"({surrogate_s / len(centers) * 1e6:.1f} us each)")

# simulator: a 64-cell sample is enough to see the per-trajectory cost
sim = inf.SimulatorGenerator(model, gains, gen.empty_scene(),
                             gen.rest_posture(model))
sample = centers[:: len(centers) // 64]
t0 = time.perf_counter()
sim_batch = sim.batch_points(sample)
per_traj = (time.perf_counter() - t0) / len(sample)
print(f"simulator: {per_traj * 1e3:.1f} ms each, so the full grid would "
      f"take ~{per_traj * len(centers):.0f} s")
print(f"speedup: ~{per_traj * len(centers) / surrogate_s:,.0f}x\n")

# speed is worthless if the trajectories are wrong; compare the two
# generators on the sampled cells
idx = np.arange(0, len(centers), len(centers) // 64)[:len(sample)]
err = np.linalg.norm(batch[idx] - sim_batch, axis=2).mean()
print(f"mean per-point disagreement on those cells: {err * 100:.2f} cm")

# the cache ties trajectories to the net that made them; a different
# net cannot silently serve stale trajectories
cached = inf.build_cache(grid, inf.SurrogateGenerator(net))
print(f"\ncache tagged {cached.generation_tag[:24]}...")
other = sg.SurrogateNet(
    [np.asarray(w) for w in net.weights],
    [np.asarray(b) + 1e-3 for b in net.biases],
    norm_lo=net.norm_lo, norm_hi=net.norm_hi)
try:
    inf.grid_posterior(cached, lambda xy: np.ones(len(xy)),
                       inf.InferenceConfig(),
                       gen.Trajectory(points=batch[0], dt=gains.dt), 45,
                       generator=inf.SurrogateGenerator(other))
except Exception as exc:
    print(f"posterior with a retrained net refuses: {exc}")
