"""
From prior to posterior as the hand moves
=========================================

Intent inference is approximate Bayesian computation: sample a
candidate target, generate the reach it would produce, keep it when the
generated motion resembles the observed motion. On a fixed grid the
same math runs in closed form per cell, which is what the interactive
path uses.
"""

import numpy as np

from _shared import quick_net
from reachintent import generator as gen, inference as inf
from reachintent import kinematics as kin, priors, tasksim

# Part 1: the sampler on a problem with a checkable answer.
# Prior N(0,1), the "reach" to z is just z plus noise, observation 0.5.
result = inf.abc_reject(
    prior=lambda rng: rng.normal(0.0, 1.0),
    generator=lambda z, _r=np.random.default_rng(1): z + _r.normal(0, 0.1),
    similarity=lambda obs, x: (obs - x) ** 2,
    inference_config=inf.InferenceConfig(epsilon=0.02, kernel="indicator",
                                         n_samples=4000,
                                         max_draws=2_000_000, seed=4),
    observed=0.5)
print("1-D toy: prior N(0,1), observation 0.5, noise 0.1")
print(f"  accepted {len(result)} samples after {result.n_draws} draws "
      f"({result.acceptance_rate:.1%} acceptance)")
print(f"  posterior mean {result.samples.mean():.3f} "
      f"(prior mean 0, pulled toward the observation)\n")

# Part 2: the grid posterior watching a real reach.
model = kin.default_arm_model()
gains = gen.ControllerGains()
net = quick_net()
grid = inf.build_cache(inf.default_grid(), inf.SurrogateGenerator(net))
print(f"\ngrid: {grid.nx} x {grid.ny} = {grid.n_cells} one-cm cells, "
      "one cached trajectory per cell")

scene = tasksim.default_task_scene(seed=0)
target = np.asarray(scene.objects[11].position)
pts, _ = gen.simulate_reach(model, gains, scene, gen.rest_posture(model),
                            target)
rng = np.random.default_rng(0)
observed = gen.Trajectory(points=pts + rng.normal(0, 0.005, pts.shape),
                          dt=gains.dt)
prior = priors.default_intent_prior(scene)
truth = grid.cell_of(target)

print(f"hand reaches for object 11 at ({target[0]:.2f}, {target[1]:.2f}) "
      "with 5 mm tracking noise; posterior MAP as observation grows:")
for frac in (0.1, 0.25, 0.5, 0.75, 1.0):
    t_index = int(round(frac * len(pts))) - 1
    post = inf.grid_posterior(grid, prior, inf.InferenceConfig(),
                              observed, t_index)
    mp = post.map_point
    cells_off = grid.chebyshev(post.map_cell, truth)
    print(f"  {frac:4.0%} observed: MAP ({mp[0]:.2f}, {mp[1]:.2f}), "
          f"{cells_off} cells from truth, "
          f"n_eff {post.n_effective:.0f}")

probs = inf.decision_summary(post, scene)
top = sorted(probs, key=probs.get, reverse=True)[:3]
print("\nreach probability near each object (top 3): "
      + ", ".join(f"object {i}: {probs[i]:.2f}" for i in top))
