"""Reaching-trajectory generation with a task-space PID + potential-field
controller projected to joint space.

The control law per substep:

    e = target - hand
    v = k_p e + k_i * integral(e) + k_d * d(e)/dt + repulsion
    theta_dot = d + Jdagger (v - J d),   d = theta_sec - theta

which equals Jdagger v + (I - Jdagger J)(theta_sec - theta) exactly in
real arithmetic; the factored form skips building the 9x9 projector.
Explicit Euler at dt/substeps, hand sampled every dt, 90 samples.

The inner loop is plain-float arithmetic for the same reason as the
chain walk in kinematics: it runs 360 times per trajectory.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import config
from .errors import ParameterError, SingularityError, UnreachableTargetError
from .kinematics import (N_JOINTS, chain_pass, clamp_to_limits,
                         default_arm_model, within_limits)


@dataclass(frozen=True)
class ControllerGains:
    """Controller parameters; defaults are the published operating point."""

    k_p: float = config.K_P
    k_i: float = config.K_I
    k_d: float = config.K_D
    k_rep: float = config.K_REP
    dt: float = config.TRAJECTORY_DT
    horizon: int = config.TRAJECTORY_POINTS
    substeps: int = config.CONTROLLER_SUBSTEPS
    repulsion_cutoff: float = config.REPULSION_CUTOFF
    damping: float = config.PINV_DAMPING
    integral_clamp: float = config.INTEGRAL_CLAMP

    def __post_init__(self):
        if not self.dt > 0:
            raise ParameterError("dt must be positive")
        if self.horizon < 1:
            raise ParameterError("horizon must be >= 1")
        if self.substeps < 1:
            raise ParameterError("substeps must be >= 1")
        if not self.repulsion_cutoff > 0:
            raise ParameterError("repulsion cutoff must be positive")
        if self.damping < 0:
            raise ParameterError("damping must be >= 0")
        if not self.integral_clamp > 0:
            raise ParameterError("integral clamp must be positive")


@dataclass(frozen=True)
class Trajectory:
    """A hand path: `points` is an (n, 3) float array sampled every `dt`
    seconds starting at absolute time `t0`."""

    points: np.ndarray
    dt: float = config.TRAJECTORY_DT
    t0: float = 0.0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ParameterError("points must be an (n, 3) array")
        if not np.all(np.isfinite(pts)):
            raise ParameterError("points must be finite")
        if not self.dt > 0:
            raise ParameterError("dt must be positive")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    @property
    def duration(self):
        return len(self.points) * self.dt

    def times(self):
        return self.t0 + self.dt * np.arange(len(self.points))


@dataclass(frozen=True)
class TableFrame:
    """Table-plane pose plus the rectangle the workspace occupies."""

    rotation: tuple = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
    translation: tuple = (0.0, 0.0, 0.0)
    x_range: tuple = config.WORKSPACE_X
    y_range: tuple = config.WORKSPACE_Y


@dataclass(frozen=True)
class SceneObject:
    id: int
    position: tuple
    extent: float
    confidence: float = 1.0


@dataclass(frozen=True)
class Scene:
    """Objects on the table, the drop-off box, and the obstacle set the
    controller should avoid (explicit so callers control the policy of
    which entities repel the hand)."""

    objects: tuple = ()
    table_frame: TableFrame = field(default_factory=TableFrame)
    box_position: tuple = None
    obstacles: tuple = ()

    def __post_init__(self):
        objects = tuple(self.objects)
        xr, yr = self.table_frame.x_range, self.table_frame.y_range
        for obj in objects:
            if not obj.extent > 0:
                raise ParameterError(f"object {obj.id}: extent must be > 0")
            if not 0.0 <= obj.confidence <= 1.0:
                raise ParameterError(f"object {obj.id}: confidence in [0, 1]")
            x, y = obj.position[0], obj.position[1]
            if not (xr[0] <= x <= xr[1] and yr[0] <= y <= yr[1]):
                raise ParameterError(
                    f"object {obj.id}: position off the table rectangle")
        object.__setattr__(self, "objects", objects)
        object.__setattr__(
            self, "obstacles",
            tuple(tuple(map(float, o)) for o in self.obstacles))


def empty_scene():
    return Scene()


def obstacles_for_target(scene, target, exclude_radius=0.05):
    """Obstacle positions when reaching for `target`: every scene object
    except those within `exclude_radius` of the target, plus the box."""
    out = []
    tx, ty, tz = float(target[0]), float(target[1]), float(target[2])
    for obj in scene.objects:
        p = obj.position
        d = math.sqrt((p[0] - tx) ** 2 + (p[1] - ty) ** 2
                      + (p[2] - tz) ** 2)
        if d > exclude_radius:
            out.append(tuple(map(float, p)))
    if scene.box_position is not None:
        out.append(tuple(map(float, scene.box_position)))
    return tuple(out)


def repulsion_term(hand, obstacles, k_rep=config.K_REP,
                   cutoff=config.REPULSION_CUTOFF):
    """Velocity pushing the hand away from the nearest obstacle.

    Zero beyond `cutoff`; inside, magnitude ramps linearly from 0 at the
    cutoff to k_rep at contact: k_rep * (x - x_nearest) * (1 - d/cutoff) / d.
    """
    if not cutoff > 0:
        raise ParameterError("cutoff must be positive")
    hx, hy, hz = float(hand[0]), float(hand[1]), float(hand[2])
    obs = [tuple(map(float, o)) for o in obstacles]
    return np.array(_repulsion(hx, hy, hz, obs, float(k_rep), float(cutoff)))


def _repulsion(hx, hy, hz, obstacles, k_rep, cutoff):
    """Float core of repulsion_term; obstacles is a list of xyz tuples."""
    if not obstacles:
        return 0.0, 0.0, 0.0
    best = None
    bd2 = math.inf
    for ox, oy, oz in obstacles:
        dx = hx - ox
        dy = hy - oy
        dz = hz - oz
        d2 = dx * dx + dy * dy + dz * dz
        if d2 < bd2:
            bd2 = d2
            best = (dx, dy, dz)
    d = math.sqrt(bd2)
    if d >= cutoff:
        return 0.0, 0.0, 0.0
    if d < 1e-6:
        warnings.warn("hand coincident with an obstacle; clamping distance",
                      RuntimeWarning, stacklevel=2)
        d = 1e-6
    g = k_rep * (1.0 - d / cutoff) / d
    return best[0] * g, best[1] * g, best[2] * g


def _check_target(model, scene, target):
    tx, ty, tz = float(target[0]), float(target[1]), float(target[2])
    xr, yr = scene.table_frame.x_range, scene.table_frame.y_range
    m = config.TARGET_MARGIN
    if not (xr[0] - m <= tx <= xr[1] + m and yr[0] - m <= ty <= yr[1] + m):
        raise UnreachableTargetError(
            f"target ({tx:.3f}, {ty:.3f}, {tz:.3f}) outside the workspace")
    sx, sy, sz = model.shoulder_rest_position()
    d = math.sqrt((tx - sx) ** 2 + (ty - sy) ** 2 + (tz - sz) ** 2)
    if d > model.reach_radius():
        raise UnreachableTargetError(
            f"target {d:.3f} m from shoulder exceeds reach "
            f"{model.reach_radius():.3f} m")
    return tx, ty, tz


def simulate_reach(model, gains, scene, start_theta, target):
    """Run the controller; returns (points (horizon,3), thetas (horizon,9)).

    Same contract as `generate` but also exposing the joint path, which
    the task simulator and the limit-respect checks want.
    """
    start_theta = np.asarray(start_theta, dtype=float)
    if start_theta.shape != (N_JOINTS,):
        raise ParameterError("start_theta must be a 9-vector")
    if not within_limits(model, start_theta):
        raise UnreachableTargetError("start_theta outside joint limits")
    tx, ty, tz = _check_target(model, scene, target)

    kp, ki, kd = gains.k_p, gains.k_i, gains.k_d
    krep, cutoff = gains.k_rep, gains.repulsion_cutoff
    lam2 = gains.damping * gains.damping
    clamp2 = gains.integral_clamp * gains.integral_clamp
    sdt = gains.dt / gains.substeps
    limits = model._limits_f
    sec = [float(v) for v in model.theta_sec]
    obstacles = [tuple(o) for o in scene.obstacles]

    theta = [float(v) for v in start_theta]
    points = np.empty((gains.horizon, 3))
    thetas = np.empty((gains.horizon, N_JOINTS))
    ix = iy = iz = 0.0
    pex = pey = pez = 0.0
    have_prev = False

    hand, _ = chain_pass(model, theta, want_jacobian=False)
    points[0] = hand
    thetas[0] = theta
    d_list = [0.0] * N_JOINTS
    td_list = [0.0] * N_JOINTS

    for k in range(1, gains.horizon):
        for _ in range(gains.substeps):
            (hx, hy, hz), (ja, jb, jc) = chain_pass(model, theta, True)
            ex = tx - hx
            ey = ty - hy
            ez = tz - hz
            ix += ex * sdt
            iy += ey * sdt
            iz += ez * sdt
            n2 = ix * ix + iy * iy + iz * iz
            if n2 > clamp2:
                scale = gains.integral_clamp / math.sqrt(n2)
                ix *= scale
                iy *= scale
                iz *= scale
            if have_prev:
                dex = (ex - pex) / sdt
                dey = (ey - pey) / sdt
                dez = (ez - pez) / sdt
            else:
                dex = dey = dez = 0.0
                have_prev = True
            pex, pey, pez = ex, ey, ez
            rx, ry, rz = _repulsion(hx, hy, hz, obstacles, krep, cutoff)
            vx = kp * ex + ki * ix + kd * dex + rx
            vy = kp * ey + ki * iy + kd * dey + ry
            vz = kp * ez + ki * iz + kd * dez + rz
            # Solve theta_dot = d + Jdagger (v - J d). Joints pinned at a
            # limit and pushing outward are frozen (column zeroed) and the
            # system re-solved, so the others pick up the task velocity
            # instead of stalling against the clamp.
            frozen = 0
            for _attempt in range(3):
                aa = ab = ac = bb = bc = cc = 0.0
                jda = jdb = jdc = 0.0
                for q in range(N_JOINTS):
                    if frozen & (1 << q):
                        d_list[q] = 0.0
                        continue
                    raq = ja[q]
                    rbq = jb[q]
                    rcq = jc[q]
                    dq = sec[q] - theta[q]
                    d_list[q] = dq
                    aa += raq * raq
                    ab += raq * rbq
                    ac += raq * rcq
                    bb += rbq * rbq
                    bc += rbq * rcq
                    cc += rcq * rcq
                    jda += raq * dq
                    jdb += rbq * dq
                    jdc += rcq * dq
                aa += lam2
                bb += lam2
                cc += lam2
                c00 = bb * cc - bc * bc
                c01 = ac * bc - ab * cc
                c02 = ab * bc - ac * bb
                det = aa * c00 + ab * c01 + ac * c02
                if det < 1e-18:
                    raise SingularityError(
                        "task Jacobian became singular; increase damping")
                c11 = aa * cc - ac * ac
                c12 = ab * ac - aa * bc
                c22 = aa * bb - ab * ab
                wx = vx - jda
                wy = vy - jdb
                wz = vz - jdc
                ux = (c00 * wx + c01 * wy + c02 * wz) / det
                uy = (c01 * wx + c11 * wy + c12 * wz) / det
                uz = (c02 * wx + c12 * wy + c22 * wz) / det
                newly = 0
                for q in range(N_JOINTS):
                    if frozen & (1 << q):
                        continue
                    td = d_list[q] + ja[q] * ux + jb[q] * uy + jc[q] * uz
                    lo, hi = limits[q]
                    if (theta[q] == lo and td < 0.0) or \
                       (theta[q] == hi and td > 0.0):
                        newly |= 1 << q
                    else:
                        td_list[q] = td
                if not newly:
                    break
                frozen |= newly
            for q in range(N_JOINTS):
                if frozen & (1 << q):
                    continue
                nq = theta[q] + td_list[q] * sdt
                lo, hi = limits[q]
                if nq < lo:
                    nq = lo
                elif nq > hi:
                    nq = hi
                theta[q] = nq
        hand, _ = chain_pass(model, theta, want_jacobian=False)
        points[k] = hand
        thetas[k] = theta
    return points, thetas


def generate(model, gains, scene, start_theta, target):
    """Generate one reaching trajectory toward `target`.

    Deterministic: identical inputs give bit-identical output. Raises
    UnreachableTargetError before simulating if the target is outside
    the workspace (plus margin) or beyond the model's reach radius.
    """
    points, _ = simulate_reach(model, gains, scene, start_theta, target)
    return Trajectory(points=points, dt=gains.dt, t0=0.0)


def batch_generate(model, gains, scene, start_theta, targets):
    """Sequentially generate one trajectory per target, order preserved.

    All targets are validated up front so a bad one aborts, by index,
    before any simulation runs.
    """
    targets = [np.asarray(t, dtype=float) for t in targets]
    for i, t in enumerate(targets):
        try:
            _check_target(model, scene, t)
        except UnreachableTargetError as exc:
            raise UnreachableTargetError(f"target {i}: {exc}") from None
    return [generate(model, gains, scene, start_theta, t) for t in targets]


def rest_posture(model=None):
    """The canonical dataset start posture: hand hovering at the near
    table edge. Equal to the model's secondary objective."""
    model = model or default_arm_model()
    return np.array(model.theta_sec)
