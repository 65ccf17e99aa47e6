"""Frozen geometry and controller constants shared by the whole pipeline.

All lengths are meters, angles radians, times seconds. The world frame has
its origin on the table surface: z=0 is the table plane, the human sits at
the y=0 edge facing +y, x runs left/right along the table edge.
"""

import numpy as np

# Workspace rectangle on the table plane (shared human/robot pick area).
WORKSPACE_X = (-0.65, 0.65)     # left/right extent, 1.30 m
WORKSPACE_Y = (0.0, 0.70)       # depth away from the human, 0.70 m
TABLE_Z = 0.0

# Inference grid: 1 cm cells over the workspace, 130 x 70 = 9,100 cells.
GRID_CELL_SIZE = 0.01
GRID_NX = 130
GRID_NY = 70
GRID_ORIGIN = (WORKSPACE_X[0], WORKSPACE_Y[0])

# Margin around the workspace rectangle inside which reach targets are valid.
TARGET_MARGIN = 0.05

# Anthropometry for the seated 9-DoF torso + left arm chain.
# One documented, frozen set; tests depend on these exact values.
TORSO_LENGTH = 0.55
SHOULDER_OFFSET = 0.20
UPPER_ARM_LENGTH = 0.37
FOREARM_LENGTH = 0.27
HAND_LENGTH = 0.08

# Torso base sits behind the table edge and below the table surface.
HUMAN_BASE_POSITION = (0.0, -0.10, -0.40)

# Sampling of generated hand trajectories: 3 s at 30 Hz.
SAMPLE_RATE_HZ = 30
TRAJECTORY_DT = 1.0 / SAMPLE_RATE_HZ
TRAJECTORY_POINTS = 90

# Task-space controller gains (tuned for smooth, convergent reaches).
K_P = 6.0
K_I = 0.01
K_D = 0.1
K_REP = 8.5

# Repulsion field influence distance; obstacles farther than this exert
# no force on the hand.
REPULSION_CUTOFF = 0.15

# Damping for the damped least-squares Jacobian inverse.
PINV_DAMPING = 0.01

# Integral anti-windup bound on the accumulated error norm (m*s).
INTEGRAL_CLAMP = 1.0

# Euler substeps per 1/30 s output sample.
CONTROLLER_SUBSTEPS = 4

# Motion onset detection threshold on hand speed.
ONSET_SPEED = 0.05

# Perception noise model of the object pose estimator (std, meters).
OBJECT_POSE_SIGMA = 0.005

# Gaze window for the gaze-conditioned prior.
GAZE_WINDOW = 0.3

# Default mixture weights for the combined prior.
PRIOR_WEIGHT_PROXIMITY = 0.2
PRIOR_WEIGHT_GAZE = 0.4
PRIOR_WEIGHT_OBJECTS = 0.4

# Default similarity window length (points) and acceptance thresholds.
SIMILARITY_WINDOW = 10
EPSILON_INDICATOR = 0.02    # m^2, indicator kernel threshold
KERNEL_BANDWIDTH = 0.05     # m, gaussian kernel bandwidth

# Table-plane origin of the proximity prior (in front of the human) and its
# default covariance scale.
PROXIMITY_ORIGIN = (0.0, 0.0)
PROXIMITY_VARIANCE = 0.1


def workspace_rectangle():
    """Return ((x_lo, x_hi), (y_lo, y_hi)) of the workspace."""
    return WORKSPACE_X, WORKSPACE_Y


def in_workspace(point, margin=0.0):
    """True if the table-plane projection of `point` is inside the workspace."""
    p = np.asarray(point, dtype=float)
    return bool(
        WORKSPACE_X[0] - margin <= p[0] <= WORKSPACE_X[1] + margin
        and WORKSPACE_Y[0] - margin <= p[1] <= WORKSPACE_Y[1] + margin
    )
