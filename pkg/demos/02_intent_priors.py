"""
Priors over reaching intent
===========================

Where will the hand go next, before it has moved? Three cues each give
a density over the table plane: closeness to the human, the gaze
direction, and the detected objects. The working prior is their
weighted mixture.
"""

import numpy as np

from reachintent import priors, tasksim

scene = tasksim.default_task_scene(seed=0)
print(f"scene: {len(scene.objects)} objects on a 1.30 x 0.70 m table\n")

# each cue alone
prox = priors.proximity_prior()
obj = priors.objects_prior(scene)
print("proximity prior peaks at the human edge of the table:")
print(f"  density at (0, 0.05): {priors.evaluate(prox, (0.0, 0.05)):.3f}")
print(f"  density at (0, 0.65): {priors.evaluate(prox, (0.0, 0.65)):.3f}")

first = np.asarray(scene.objects[0].position[:2])
away = first + (0.05, 0.0)
print("\nobjects prior concentrates on the objects:")
print(f"  at object 0           {priors.evaluate(obj, first):8.1f}")
print(f"  5 cm to the side      {priors.evaluate(obj, away):8.1f}")

# a steady gaze is a sharp cue. The buffer keeps a 0.3 s window of
# gaze-table intersections; their spread sets the covariance.
gaze = priors.GazeBuffer(window=0.3)
looked_at = np.asarray(scene.objects[5].position[:2])
rng = np.random.default_rng(3)
for i in range(10):
    gaze.push(i / 30.0, looked_at + rng.normal(0.0, 0.004, 2))
gz = priors.gaze_prior(gaze, now=9 / 30.0)
mean = gz.components["mean"]
print(f"\ngaze fixated near object 5 "
      f"({looked_at[0]:.3f}, {looked_at[1]:.3f}):")
print(f"  gaze prior mean ({mean[0]:.3f}, {mean[1]:.3f})")

# the mixture: 0.2 proximity + 0.4 gaze + 0.4 objects. Missing cues
# drop out and the rest renormalize.
with_gaze = priors.default_intent_prior(scene, gaze, now=9 / 30.0)
without = priors.default_intent_prior(scene)
r_with = priors.evaluate(with_gaze, looked_at)
r_without = priors.evaluate(without, looked_at)
print(f"\nmixture density at the gazed object, with gaze: {r_with:.1f}, "
      f"without: {r_without:.1f} ({r_with / r_without:.1f}x)")

# sampling follows the same spec; a histogram over the objects shows
# the gaze pulling draws toward object 5
samples = priors.sample(with_gaze, rng=7, size=4000)
near5 = np.linalg.norm(samples - looked_at, axis=1) < 0.05
print(f"{near5.mean():.0%} of 4,000 draws fall within 5 cm of the gazed "
      "object")
