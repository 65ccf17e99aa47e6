"""9-DoF torso + left arm kinematic chain.

The chain is 3 torso joints (yaw, pitch, roll), 3 shoulder joints
(flexion, abduction, rotation), 1 elbow and 2 wrist joints. At the zero
configuration the torso is vertical and the arm hangs straight down from
the left shoulder. Link offsets are derived from the five named segment
lengths; joint axes are unit vectors in the parent frame.

All operations are pure functions of their inputs; ArmModel is immutable
after construction. The chain walk is hand-unrolled scalar arithmetic
because it sits inside the controller substep loop (360 calls per
generated trajectory).
"""

import math

import numpy as np

from . import config
from .errors import JointLimitError, ModelError, SingularityError

N_JOINTS = 9

LINK_NAMES = ("torso", "shoulder_offset", "upper_arm", "forearm", "hand")

# Default joint axes (parent frame): z yaw, x pitch/flexion, y roll/abduction.
_DEFAULT_AXES = np.array([
    [0.0, 0.0, 1.0],   # torso yaw
    [1.0, 0.0, 0.0],   # torso pitch (negative leans toward the table)
    [0.0, 1.0, 0.0],   # torso roll
    [1.0, 0.0, 0.0],   # shoulder flexion (positive swings the arm forward)
    [0.0, 1.0, 0.0],   # shoulder abduction (positive moves away from torso)
    [0.0, 0.0, 1.0],   # shoulder internal rotation
    [1.0, 0.0, 0.0],   # elbow flexion
    [1.0, 0.0, 0.0],   # wrist pitch
    [0.0, 1.0, 0.0],   # wrist yaw
])

_DEFAULT_LIMITS = np.array([
    [-1.2, 1.2],       # torso yaw
    [-1.35, 0.5],      # torso pitch
    [-0.6, 0.6],       # torso roll
    [-0.8, 2.4],       # shoulder flexion
    [-0.6, 1.8],       # shoulder abduction
    [-1.6, 1.6],       # shoulder rotation
    [0.0, 2.62],       # elbow
    [-1.2, 1.2],       # wrist pitch
    [-1.2, 1.2],       # wrist yaw
])

# Relaxed posture objective; places the hand hovering near the table
# edge at roughly (-0.18, 0.20, 0.03) for the default model.
DEFAULT_THETA_SEC = np.array([
    0.0242, 0.1378, 0.0469, 0.1834, 0.0584, -0.0679, 1.9598, 0.0140, -0.0172,
])


class ArmModel:
    """Immutable 9-DoF kinematic chain description.

    Fields mirror the serialized form: link_lengths, joint_axes,
    joint_limits, theta_sec, base_pose (rotation + translation).
    """

    def __init__(self, link_lengths, joint_axes, joint_limits, theta_sec,
                 base_rotation=None, base_translation=None):
        self.link_lengths = dict(link_lengths)
        self.joint_axes = np.array(joint_axes, dtype=float)
        self.joint_limits = np.array(joint_limits, dtype=float)
        self.theta_sec = np.array(theta_sec, dtype=float)
        self.base_rotation = (np.eye(3) if base_rotation is None
                              else np.array(base_rotation, dtype=float))
        self.base_translation = (np.zeros(3) if base_translation is None
                                 else np.array(base_translation, dtype=float))
        self._validate()
        # Fixed translation applied before each joint's rotation, plus the
        # final hand offset; this encodes the chain layout.
        off = np.zeros((N_JOINTS, 3))
        off[3] = (-self.link_lengths["shoulder_offset"], 0.0,
                  self.link_lengths["torso"])
        off[6] = (0.0, 0.0, -self.link_lengths["upper_arm"])
        off[7] = (0.0, 0.0, -self.link_lengths["forearm"])
        self._joint_offsets = off
        self._tool_offset = np.array([0.0, 0.0, -self.link_lengths["hand"]])
        for a in (self.joint_axes, self.joint_limits, self.theta_sec,
                  self.base_rotation, self.base_translation,
                  self._joint_offsets, self._tool_offset):
            a.setflags(write=False)
        # Plain-float copies for the unrolled chain walk.
        self._axes_f = tuple(tuple(map(float, ax)) for ax in self.joint_axes)
        self._offsets_f = tuple(tuple(map(float, o)) for o in off)
        self._tool_f = tuple(map(float, self._tool_offset))
        self._base_r_f = tuple(map(float, self.base_rotation.ravel()))
        self._base_t_f = tuple(map(float, self.base_translation))
        self._limits_f = tuple((float(lo), float(hi))
                               for lo, hi in self.joint_limits)

    def _validate(self):
        for name in LINK_NAMES:
            if name not in self.link_lengths:
                raise ModelError(f"missing link length '{name}'")
            if not self.link_lengths[name] > 0:
                raise ModelError(f"link length '{name}' must be positive")
        if self.joint_axes.shape != (N_JOINTS, 3):
            raise ModelError("joint_axes must be 9 unit 3-vectors")
        norms = np.linalg.norm(self.joint_axes, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ModelError("joint axes must be unit-norm within 1e-9")
        if self.joint_limits.shape != (N_JOINTS, 2):
            raise ModelError("joint_limits must be 9 (lower, upper) pairs")
        if np.any(self.joint_limits[:, 0] >= self.joint_limits[:, 1]):
            raise ModelError("every joint limit pair needs lower < upper")
        if self.theta_sec.shape != (N_JOINTS,):
            raise ModelError("theta_sec must be a 9-vector")
        lo, hi = self.joint_limits[:, 0], self.joint_limits[:, 1]
        if np.any(self.theta_sec < lo) or np.any(self.theta_sec > hi):
            raise ModelError("theta_sec must lie within joint limits")
        if self.base_rotation.shape != (3, 3):
            raise ModelError("base rotation must be 3x3")
        if not np.allclose(self.base_rotation @ self.base_rotation.T,
                           np.eye(3), atol=1e-9):
            raise ModelError("base rotation must be orthonormal")

    @property
    def arm_span(self):
        """Shoulder-to-fingertip length of the straight arm."""
        return (self.link_lengths["upper_arm"] + self.link_lengths["forearm"]
                + self.link_lengths["hand"])

    def shoulder_rest_position(self):
        """World position of the shoulder at the zero configuration."""
        local = np.array([-self.link_lengths["shoulder_offset"], 0.0,
                          self.link_lengths["torso"]])
        return self.base_translation + self.base_rotation @ local

    def reach_radius(self):
        """Maximum distance the hand can get from the rest shoulder.

        Arm span plus the extra reach gained by leaning the torso to its
        pitch limit (the shoulder travels roughly torso * sin(lean)).
        """
        lean = max(abs(self.joint_limits[1, 0]), abs(self.joint_limits[1, 1]))
        assist = self.link_lengths["torso"] * math.sin(min(lean, math.pi / 2))
        return self.arm_span + assist

    def to_json(self):
        return {
            "link_lengths": {k: float(v) for k, v in self.link_lengths.items()},
            "joint_axes": self.joint_axes.tolist(),
            "joint_limits": self.joint_limits.tolist(),
            "theta_sec": self.theta_sec.tolist(),
            "base_pose": {
                "rotation": self.base_rotation.tolist(),
                "translation": self.base_translation.tolist(),
            },
        }

    @classmethod
    def from_json(cls, doc):
        pose = doc["base_pose"]
        return cls(doc["link_lengths"], doc["joint_axes"], doc["joint_limits"],
                   doc["theta_sec"], pose["rotation"], pose["translation"])


class JointState:
    """Joint positions and velocities of the chain."""

    __slots__ = ("theta", "theta_dot")

    def __init__(self, theta, theta_dot=None):
        self.theta = np.array(theta, dtype=float)
        self.theta_dot = (np.zeros(N_JOINTS) if theta_dot is None
                          else np.array(theta_dot, dtype=float))


def default_arm_model():
    """The documented average-adult model seated behind the table edge."""
    lengths = {
        "torso": config.TORSO_LENGTH,
        "shoulder_offset": config.SHOULDER_OFFSET,
        "upper_arm": config.UPPER_ARM_LENGTH,
        "forearm": config.FOREARM_LENGTH,
        "hand": config.HAND_LENGTH,
    }
    return ArmModel(lengths, _DEFAULT_AXES, _DEFAULT_LIMITS, DEFAULT_THETA_SEC,
                    base_translation=config.HUMAN_BASE_POSITION)


def within_limits(model, theta, tol=1e-12):
    theta = np.asarray(theta)
    return bool(np.all(theta >= model.joint_limits[:, 0] - tol)
                and np.all(theta <= model.joint_limits[:, 1] + tol))


def clamp_to_limits(model, theta):
    return np.clip(theta, model.joint_limits[:, 0], model.joint_limits[:, 1])


def chain_pass(model, theta, want_jacobian):
    """One unrolled walk down the chain.

    Returns (hand xyz floats, jacobian rows or None). Rows are length-9
    lists [dh/dtheta_i] for the x, y, z hand coordinates. No limit
    checking here; public wrappers do that.
    """
    r00, r01, r02, r10, r11, r12, r20, r21, r22 = model._base_r_f
    px, py, pz = model._base_t_f
    axes = model._axes_f
    offs = model._offsets_f
    wax = []
    wor = []
    cos = math.cos
    sin = math.sin
    for i in range(N_JOINTS):
        ox, oy, oz = offs[i]
        if ox != 0.0 or oy != 0.0 or oz != 0.0:
            px += r00 * ox + r01 * oy + r02 * oz
            py += r10 * ox + r11 * oy + r12 * oz
            pz += r20 * ox + r21 * oy + r22 * oz
        ax, ay, az = axes[i]
        if want_jacobian:
            wax.append((r00 * ax + r01 * ay + r02 * az,
                        r10 * ax + r11 * ay + r12 * az,
                        r20 * ax + r21 * ay + r22 * az))
            wor.append((px, py, pz))
        th = theta[i]
        c = cos(th)
        s = sin(th)
        t = 1.0 - c
        m00 = c + ax * ax * t
        m01 = ax * ay * t - az * s
        m02 = ax * az * t + ay * s
        m10 = ay * ax * t + az * s
        m11 = c + ay * ay * t
        m12 = ay * az * t - ax * s
        m20 = az * ax * t - ay * s
        m21 = az * ay * t + ax * s
        m22 = c + az * az * t
        n00 = r00 * m00 + r01 * m10 + r02 * m20
        n01 = r00 * m01 + r01 * m11 + r02 * m21
        n02 = r00 * m02 + r01 * m12 + r02 * m22
        n10 = r10 * m00 + r11 * m10 + r12 * m20
        n11 = r10 * m01 + r11 * m11 + r12 * m21
        n12 = r10 * m02 + r11 * m12 + r12 * m22
        n20 = r20 * m00 + r21 * m10 + r22 * m20
        n21 = r20 * m01 + r21 * m11 + r22 * m21
        n22 = r20 * m02 + r21 * m12 + r22 * m22
        r00, r01, r02 = n00, n01, n02
        r10, r11, r12 = n10, n11, n12
        r20, r21, r22 = n20, n21, n22
    tx, ty, tz = model._tool_f
    hx = px + r00 * tx + r01 * ty + r02 * tz
    hy = py + r10 * tx + r11 * ty + r12 * tz
    hz = pz + r20 * tx + r21 * ty + r22 * tz
    if not want_jacobian:
        return (hx, hy, hz), None
    ja = []
    jb = []
    jc = []
    for i in range(N_JOINTS):
        axw, ayw, azw = wax[i]
        ox, oy, oz = wor[i]
        dx = hx - ox
        dy = hy - oy
        dz = hz - oz
        ja.append(ayw * dz - azw * dy)
        jb.append(azw * dx - axw * dz)
        jc.append(axw * dy - ayw * dx)
    return (hx, hy, hz), (ja, jb, jc)


def _check_theta(model, theta):
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (N_JOINTS,):
        raise ModelError("theta must be a 9-vector")
    if not within_limits(model, theta):
        raise JointLimitError("theta outside joint limits")
    return theta


def forward_kinematics(model, theta):
    """Hand position (world frame) for joint angles `theta`.

    Raises JointLimitError if `theta` is outside the model's limits.
    """
    theta = _check_theta(model, theta)
    hand, _ = chain_pass(model, theta.tolist(), want_jacobian=False)
    return np.array(hand)


def jacobian(model, theta):
    """3x9 Jacobian of the hand position with respect to `theta`."""
    theta = _check_theta(model, theta)
    _, rows = chain_pass(model, theta.tolist(), want_jacobian=True)
    return np.array(rows)


def fk_and_jacobian(model, theta):
    """Hand position and Jacobian as arrays, no limit check.

    Callers on the controller path guarantee clamped theta.
    """
    hand, rows = chain_pass(model, list(theta), want_jacobian=True)
    return np.array(hand), np.array(rows)


def pseudo_inverse(J, damping=config.PINV_DAMPING):
    """Damped least-squares inverse J^T (J J^T + damping^2 I)^-1.

    With damping 0 the Jacobian must have full row rank; a rank-deficient
    J raises SingularityError.
    """
    J = np.asarray(J, dtype=float)
    if damping < 0:
        raise ModelError("damping must be >= 0")
    JJt = J @ J.T
    m = JJt.shape[0]
    if damping == 0.0:
        svals = np.linalg.svd(J, compute_uv=False)
        if svals[-1] < 1e-10 * max(svals[0], 1.0):
            raise SingularityError(
                "rank-deficient Jacobian with zero damping; use damping > 0")
        return J.T @ np.linalg.inv(JJt)
    return J.T @ np.linalg.inv(JJt + (damping * damping) * np.eye(m))


def nullspace_projector(J_dagger, J):
    """N = I - J_dagger J; projects joint velocities into the task nullspace."""
    n = J_dagger.shape[0]
    return np.eye(n) - J_dagger @ J
