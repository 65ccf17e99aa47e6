"""Pick-and-place task simulation with four coordination policies.

Sixteen objects on the table go into a shared box. Depending on the
policy a simulated human does all the work, a timed robot does, or the
two split the set dynamically: each agent takes whatever object its
policy selects next until none remain. The robot is abstracted to
point-to-point timed segments; the human hand comes from the reaching
controller plus noise, with transports and retreats synthesized as
smoothstep segments.

The intent_prediction policy closes the loop with the inference stack:
while the human reaches, the robot feeds the observed hand stream and
gaze into the grid posterior, summarizes per-object reach
probabilities, and commits to the candidate farthest from everything
the human is likely to want. Fluency metrics (T, FD, RI, HI) and an
SVG task diagram are computed from the resulting action log.
"""

import json
import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import config, priors
from .errors import ParameterError, TaskError
from .generator import (ControllerGains, Scene, SceneObject, Trajectory,
                        rest_posture, simulate_reach)
from .inference import decision_summary, grid_posterior
from .kinematics import forward_kinematics

AGENTS = ("human", "robot")
ACTION_KINDS = ("reach", "grasp", "transport", "release", "retreat")
POLICIES = ("solo_human", "solo_robot", "turn_taking", "intent_prediction")

DT = config.TRAJECTORY_DT


@dataclass(frozen=True)
class AtomicAction:
    agent: str
    kind: str
    t_start: float
    t_end: float
    object_id: int = None

    def __post_init__(self):
        if self.agent not in AGENTS:
            raise ParameterError(f"unknown agent {self.agent!r}")
        if self.kind not in ACTION_KINDS:
            raise ParameterError(f"unknown action kind {self.kind!r}")
        if not self.t_start < self.t_end:
            raise ParameterError(
                f"{self.agent} {self.kind}: t_start {self.t_start} must "
                f"precede t_end {self.t_end}")

    @property
    def duration(self):
        return self.t_end - self.t_start


@dataclass(frozen=True)
class TaskLog:
    """Completed run: every atomic action of both agents."""

    actions: tuple
    t0: float
    t_final: float
    policy: str
    seed: int
    diagnostics: tuple = ()

    def __post_init__(self):
        actions = tuple(sorted(self.actions,
                               key=lambda a: (a.t_start, a.agent)))
        for agent in AGENTS:
            mine = [a for a in actions if a.agent == agent]
            for prev, cur in zip(mine, mine[1:]):
                if cur.t_start < prev.t_end - 1e-9:
                    raise ParameterError(
                        f"{agent} actions overlap at t={cur.t_start:.3f}")
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "diagnostics", tuple(self.diagnostics))

    def by_agent(self, agent):
        return [a for a in self.actions if a.agent == agent]

    def placements(self):
        return [a for a in self.actions if a.kind == "release"]


@dataclass(frozen=True)
class FluencyMetrics:
    """T elapsed, FD functional delay, RI/HI robot and human idle.

    FD is the mean over handovers of (robot reach start - human retreat
    end) and can be negative; fd_total is the sum over the same events.
    Metrics that do not exist for a log (FD on solo runs, the idle time
    of an absent agent) are None.
    """

    T: float
    FD: float
    RI: float
    HI: float
    fd_total: float = None
    n_handovers: int = 0


@dataclass(frozen=True)
class HumanConfig:
    """Simulated-human motion and noise parameters.

    Hand tracking error is modeled as drift: an AR(1) process whose
    stationary deviation is hand_sigma. White noise of that size would
    alias to 0.2 m/s of apparent speed at 30 Hz and bury any velocity
    threshold; real tracker error is dominated by slow bias wobble.
    """

    hand_sigma: float = 0.003
    hand_noise_rho: float = 0.98
    gaze_sigma: float = 0.02
    gaze_lead: float = 0.3
    transport_speed: float = 0.7
    retreat_speed: float = 0.9
    grasp_duration: float = 0.25
    release_duration: float = 0.25
    # 12 samples at 30 Hz; shorter pauses blur into the next reach
    decision_pause: float = 0.4
    arrive_tol: float = 0.01

    def __post_init__(self):
        if self.transport_speed <= 0 or self.retreat_speed <= 0:
            raise ParameterError("speeds must be positive")
        if self.hand_sigma < 0 or self.gaze_sigma < 0:
            raise ParameterError("noise sigmas must be non-negative")
        if not 0 <= self.hand_noise_rho < 1:
            raise ParameterError("hand_noise_rho must be in [0, 1)")


@dataclass(frozen=True)
class RobotTimings:
    """Durations of the robot's timed motion segments, seconds."""

    reach: float = 1.4
    grasp: float = 0.25
    transport: float = 1.6
    release: float = 0.25
    retreat: float = 0.5

    def __post_init__(self):
        for name in ("reach", "grasp", "transport", "release", "retreat"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} duration must be positive")

    @property
    def cycle(self):
        return (self.reach + self.grasp + self.transport + self.release
                + self.retreat)


@dataclass(frozen=True)
class EngineHandles:
    """Everything the intent policy needs to run inference."""

    model: object
    gains: ControllerGains
    grid: object
    inference_config: object
    conflict_radius: float = 0.10
    p_safe: float = 0.05
    abort_threshold: float = 0.5
    commit_ticks: int = 3
    deadlock_timeout: float = 10.0
    robot_base: tuple = (0.0, 0.90, 0.0)


@dataclass(frozen=True)
class Stream:
    """Fixed-rate samples: (n, d) points starting at t0."""

    points: np.ndarray
    t0: float = 0.0
    dt: float = DT

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    def times(self):
        return self.t0 + np.arange(len(self.points)) * self.dt


@dataclass
class HumanRun:
    hand: Stream
    gaze: Stream
    actions: list


def default_task_scene(seed=0):
    """Sixteen objects on a jittered 4x4 grid plus the drop-off box.

    Rows start deep enough that no object sits next to the resting
    hand, and the jitter keeps every pair more than 10 cm apart.
    """
    rng = np.random.default_rng(seed)
    xs = [-0.195, -0.065, 0.065, 0.195]
    ys = [0.30, 0.415, 0.53, 0.645]
    objects = []
    k = 0
    for y in ys:
        for x in xs:
            jx, jy = rng.uniform(-0.005, 0.005, 2)
            objects.append(SceneObject(id=k, position=(x + jx, y + jy, 0.0),
                                       extent=0.04))
            k += 1
    return Scene(objects=tuple(objects), box_position=(0.50, 0.10, 0.0))


def _smoothstep_points(start, end, speed):
    """30 Hz samples of a smoothstep segment; returns (points, duration)."""
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    dist = float(np.linalg.norm(end - start))
    duration = max(dist / speed, 2 * DT)
    n = max(int(math.ceil(duration / DT)), 2)
    u = np.arange(1, n + 1) * DT / duration
    u = np.clip(u, 0.0, 1.0)
    s = u * u * (3.0 - 2.0 * u)
    return start + s[:, None] * (end - start), n * DT


def _hold_points(pos, duration):
    n = max(int(round(duration / DT)), 1)
    return np.tile(np.asarray(pos, dtype=float), (n, 1)), n * DT


class _Ar1Noise:
    """Drifting tracker error, advanced sample by sample.

    Stationary per-axis deviation is sigma regardless of rho; the state
    carries across segments so the drift is continuous.
    """

    def __init__(self, rng, sigma, rho, dims=3):
        self.rng = rng
        self.sigma = sigma
        self.rho = rho
        self.state = rng.normal(0.0, sigma, dims) if sigma > 0 \
            else np.zeros(dims)

    def block(self, n):
        out = np.empty((n, len(self.state)))
        if self.sigma == 0:
            out[:] = 0.0
            return out
        step = self.sigma * math.sqrt(1.0 - self.rho ** 2)
        innov = self.rng.normal(0.0, step, out.shape)
        x = self.state
        for i in range(n):
            x = self.rho * x + innov[i]
            out[i] = x
        self.state = x
        return out


def _truncate_at_arrival(points, target, tol):
    """Index one past the first sample within tol of the target."""
    d = np.linalg.norm(points - np.asarray(target, dtype=float), axis=1)
    hits = np.nonzero(d <= tol)[0]
    if len(hits) == 0:
        return len(points)
    return int(hits[0]) + 1


class _HumanSim:
    """Incremental simulated human: one pick-and-place cycle at a time.

    Used directly by run_policy; simulate_human wraps it for open-loop
    streams. All randomness comes from the rng handed in, so a fixed
    seed fixes every sample.
    """

    def __init__(self, scene, human_config, rng, model, gains):
        self.scene = scene
        self.cfg = human_config
        self.rng = rng
        self.model = model
        self.gains = gains
        self.start_theta = rest_posture(model)
        self.rest_hand = forward_kinematics(model, self.start_theta)
        if scene.box_position is None:
            raise TaskError("task scene needs a box position")
        self.box = np.asarray(scene.box_position, dtype=float)

    def cycle(self, t0, target_obj):
        """One reach-grasp-transport-release-retreat cycle from rest.

        Returns (actions, hand segments, clean reach points, t_end).
        Hand segments are noise-free (t_start, points) pairs at 30 Hz;
        callers add tracker noise over the assembled stream.
        """
        cfg = self.cfg
        target = np.asarray(target_obj.position, dtype=float)
        clean, _ = simulate_reach(self.model, self.gains, self.scene,
                                  self.start_theta, target)
        n_reach = _truncate_at_arrival(clean, target, cfg.arrive_tol)
        reach_pts = np.array(clean[:n_reach])
        t = t0
        actions = []
        segments = []
        reach_dur = n_reach * DT
        actions.append(AtomicAction("human", "reach", t, t + reach_dur,
                                    target_obj.id))
        segments.append((t, reach_pts))
        t += reach_dur

        grasp_pts, grasp_dur = _hold_points(reach_pts[-1],
                                            cfg.grasp_duration)
        actions.append(AtomicAction("human", "grasp", t, t + grasp_dur,
                                    target_obj.id))
        segments.append((t, grasp_pts))
        t += grasp_dur

        tr_pts, tr_dur = _smoothstep_points(grasp_pts[-1], self.box,
                                            cfg.transport_speed)
        actions.append(AtomicAction("human", "transport", t, t + tr_dur,
                                    target_obj.id))
        segments.append((t, tr_pts))
        t += tr_dur

        rel_pts, rel_dur = _hold_points(tr_pts[-1], cfg.release_duration)
        actions.append(AtomicAction("human", "release", t, t + rel_dur,
                                    target_obj.id))
        segments.append((t, rel_pts))
        t += rel_dur

        re_pts, re_dur = _smoothstep_points(rel_pts[-1], self.rest_hand,
                                            cfg.retreat_speed)
        actions.append(AtomicAction("human", "retreat", t, t + re_dur,
                                    target_obj.id))
        segments.append((t, re_pts))
        t += re_dur

        return actions, segments, reach_pts, t


def simulate_human(scene, target_sequence, human_config=HumanConfig(),
                   seed=0, model=None, gains=None):
    """Open-loop human streams for a fixed sequence of object ids.

    Returns a HumanRun: 30 Hz hand stream, 30 Hz gaze stream of
    table-plane intersection points, and the ground-truth actions. Gaze
    locks onto each target `gaze_lead` seconds before the reach starts
    and carries `gaze_sigma` jitter; the hand carries `hand_sigma`
    per-point noise (zero sigma reproduces the reach controller output
    exactly).
    """
    if model is None:
        from .kinematics import default_arm_model
        model = default_arm_model()
    if gains is None:
        gains = ControllerGains()
    rng = np.random.default_rng(seed)
    sim = _HumanSim(scene, human_config, rng, model, gains)
    by_id = {obj.id: obj for obj in scene.objects}

    actions = []
    segments = []
    focus_switches = []
    t = 0.0
    for k, obj_id in enumerate(target_sequence):
        if obj_id not in by_id:
            raise TaskError(f"object {obj_id} is not in the scene")
        if k > 0:
            t += human_config.decision_pause
        target = by_id[obj_id]
        focus_switches.append((t - human_config.gaze_lead,
                               np.asarray(target.position[:2])))
        acts, segs, _, t = sim.cycle(t, target)
        # after the grasp the eyes move to the box
        focus_switches.append((acts[1].t_end, sim.box[:2]))
        actions.extend(acts)
        segments.extend(segs)

    n_total = int(math.ceil(t / DT)) if actions else 0
    hand = np.tile(sim.rest_hand, (n_total, 1))
    for seg_t0, pts in segments:
        i0 = int(round(seg_t0 / DT))
        hand[i0:i0 + len(pts)] = pts[:max(0, n_total - i0)]
    hand += _Ar1Noise(rng, human_config.hand_sigma,
                      human_config.hand_noise_rho).block(n_total)

    gaze = np.tile(sim.rest_hand[:2], (n_total, 1))
    times = np.arange(n_total) * DT
    for switch_t, point in focus_switches:
        gaze[times >= switch_t] = point
    gaze += rng.normal(0.0, human_config.gaze_sigma, gaze.shape)

    return HumanRun(hand=Stream(points=hand),
                    gaze=Stream(points=gaze),
                    actions=actions)


def _stream_speed(pts, dt, smooth=3, span=1):
    """Per-sample speed from lightly smoothed positions.

    A short centered moving average plus a centered difference is
    enough against drifting tracker error while keeping boundary blur
    within two samples; anything wider leaks sharp reach onsets
    backwards past the boundary budget.
    """
    half = smooth // 2
    padded = np.pad(pts, ((half, half), (0, 0)), mode="edge")
    kernel = np.ones(smooth) / smooth
    sm = np.stack([np.convolve(padded[:, a], kernel, mode="valid")
                   for a in range(pts.shape[1])], axis=1)
    n = len(pts)
    v = np.zeros(n)
    core = slice(span, n - span)
    v[core] = np.linalg.norm(sm[2 * span:] - sm[:n - 2 * span],
                             axis=1) / (2 * span * dt)
    v[:span] = v[span]
    v[n - span:] = v[n - span - 1]
    return v


def segment_phases(stream, events, speed_threshold=config.ONSET_SPEED,
                   hysteresis=0.1):
    """Split a hand stream into atomic actions by speed thresholding.

    Samples faster than `speed_threshold` (after a state flip is
    confirmed for `hysteresis` seconds) form motion bouts; each bout is
    labeled reach, transport, or retreat from the grasp/release events:
    a bout while an object is held is a transport, a bout ending at a
    grasp is a reach, anything after a release is a retreat. The events
    themselves are returned as actions too, so the result partitions
    everything but idle time.
    """
    pts = np.asarray(stream.points, dtype=float)
    if len(pts) < 2:
        warnings.warn("no motion detected in stream")
        return []
    speed = _stream_speed(pts, stream.dt)
    fast = speed > speed_threshold
    confirm = max(int(round(hysteresis / stream.dt)), 1)

    # state flips only after `confirm` consecutive opposite samples,
    # and the flip is backdated to the first of them
    bouts = []
    state = False
    run = 0
    flip_at = 0
    bout_start = 0
    for i, f in enumerate(fast):
        if f != state:
            if run == 0:
                flip_at = i
            run += 1
            if run >= confirm:
                if state:
                    bouts.append((bout_start, flip_at))
                else:
                    bout_start = flip_at
                state = not state
                run = 0
        else:
            run = 0
    if state:
        bouts.append((bout_start, len(fast)))
    bouts = [(i0, i1) for i0, i1 in bouts if i1 - i0 >= confirm]

    if not bouts:
        warnings.warn("no motion detected in stream")
        return []

    events = sorted((e for e in events if e.kind in ("grasp", "release")),
                    key=lambda e: e.t_start)
    holds = []
    held_since = None
    held_obj = None
    for e in events:
        if e.kind == "grasp":
            held_since = e.t_end
            held_obj = e.object_id
        elif held_since is not None:
            holds.append((held_since, e.t_start, held_obj))
            held_since = None
    if held_since is not None:
        holds.append((held_since, np.inf, held_obj))

    def holding_at(t):
        for lo, hi, obj in holds:
            if lo - 1e-9 <= t <= hi + 1e-9:
                return obj
        return None

    # a bout borders a grasp ahead (reach), sits inside a hold
    # (transport), or borders a release behind (retreat); pick the
    # association with the smaller time gap
    slack = 4 * stream.dt
    actions = []
    for i0, i1 in bouts:
        t_start = stream.t0 + i0 * stream.dt
        t_end = stream.t0 + i1 * stream.dt
        mid_obj = holding_at(0.5 * (t_start + t_end))
        if mid_obj is not None:
            actions.append(AtomicAction("human", "transport", t_start,
                                        t_end, mid_obj))
            continue
        next_grasp = next(
            (e for e in events
             if e.kind == "grasp" and e.t_start >= t_end - slack), None)
        prior_release = next(
            (e for e in reversed(events)
             if e.kind == "release" and e.t_end <= t_start + slack), None)
        gap_grasp = abs(next_grasp.t_start - t_end) \
            if next_grasp is not None else np.inf
        gap_release = abs(t_start - prior_release.t_end) \
            if prior_release is not None else np.inf
        if gap_grasp <= gap_release:
            obj = next_grasp.object_id if next_grasp is not None else None
            actions.append(AtomicAction("human", "reach", t_start, t_end,
                                        obj))
        else:
            actions.append(AtomicAction("human", "retreat", t_start, t_end,
                                        prior_release.object_id))
    actions.extend(events)
    return sorted(actions, key=lambda a: a.t_start)


class _RobotSim:
    """Timed robot: schedules one cycle's actions from a start time."""

    def __init__(self, timings):
        self.t = timings

    def cycle_actions(self, t0, obj_id, transport_gate=None):
        """Actions of one robot cycle; transport waits for the gate."""
        t = t0
        acts = [AtomicAction("robot", "reach", t, t + self.t.reach, obj_id)]
        t += self.t.reach
        acts.append(AtomicAction("robot", "grasp", t, t + self.t.grasp,
                                 obj_id))
        t += self.t.grasp
        if transport_gate is not None and transport_gate > t:
            t = transport_gate
        acts.append(AtomicAction("robot", "transport", t,
                                 t + self.t.transport, obj_id))
        t += self.t.transport
        acts.append(AtomicAction("robot", "release", t, t + self.t.release,
                                 obj_id))
        t += self.t.release
        acts.append(AtomicAction("robot", "retreat", t, t + self.t.retreat,
                                 obj_id))
        return acts, t + self.t.retreat


def _nearest_object(objects, position):
    best = None
    best_d = np.inf
    for obj in sorted(objects, key=lambda o: o.id):
        d = float(np.linalg.norm(
            np.asarray(obj.position[:2]) - np.asarray(position[:2])))
        if d < best_d:
            best, best_d = obj, d
    return best


def run_policy(policy, scene, handles=None, seed=0,
               human_config=HumanConfig(), robot_timings=RobotTimings(),
               human_sequence=None):
    """Simulate one full 16-object run under a coordination policy.

    solo_human and solo_robot run one agent alone. turn_taking
    alternates: the robot starts its reach when the human starts
    retreating, and the human starts its next reach when the robot
    starts retreating. intent_prediction runs both concurrently, the
    robot committing to objects the inference stack marks safe
    (requires `handles`). `human_sequence` pins the human's object
    choices for tests; by default the human picks uniformly among
    objects not claimed by the robot.
    """
    if policy not in POLICIES:
        raise ParameterError(f"unknown policy {policy!r}")
    if len(scene.objects) != 16:
        raise TaskError(f"task needs 16 objects, scene has "
                        f"{len(scene.objects)}")
    if scene.box_position is None:
        raise TaskError("task scene needs a box position")
    rng = np.random.default_rng(seed)

    if policy == "solo_robot":
        return _run_solo_robot(scene, robot_timings, seed, handles)
    if policy == "solo_human":
        return _run_solo_human(scene, human_config, seed, rng,
                               human_sequence, handles)
    if policy == "turn_taking":
        return _run_turn_taking(scene, human_config, robot_timings, seed,
                                rng, human_sequence, handles)
    return _run_intent(scene, handles, human_config, robot_timings, seed,
                       rng, human_sequence)


def _model_and_gains(handles):
    if handles is not None:
        return handles.model, handles.gains
    from .kinematics import default_arm_model
    return default_arm_model(), ControllerGains()


def _robot_base(handles):
    return handles.robot_base if handles is not None else (0.0, 0.90, 0.0)


def _pick_human(rng, remaining, claimed, sequence, k):
    if sequence is not None:
        if k >= len(sequence):
            return None
        by_id = {o.id: o for o in remaining}
        return by_id.get(sequence[k])
    options = sorted((o for o in remaining if o.id not in claimed),
                     key=lambda o: o.id)
    if not options:
        return None
    return options[int(rng.integers(0, len(options)))]


def select_safe_object(candidates, probs, p_safe=0.05, repel=()):
    """Pick the candidate a second agent can take with least conflict.

    `probs` maps object id to reach probability. Candidates above
    p_safe, plus any `repel` objects above it, count as likely targets;
    the pick is the candidate below p_safe farthest from the nearest
    likely object, ties toward the lowest id. None when every candidate
    is in doubt.
    """
    likely = {c.id: c for c in candidates
              if probs.get(c.id, 0.0) > p_safe}
    for o in repel:
        if probs.get(o.id, 0.0) > p_safe:
            likely.setdefault(o.id, o)
    safe = [c for c in candidates if probs.get(c.id, 0.0) < p_safe]
    if not safe:
        return None
    likely_objs = list(likely.values())

    def min_dist(c):
        if not likely_objs:
            return np.inf
        return min(float(np.linalg.norm(
            np.asarray(c.position[:2]) - np.asarray(o.position[:2])))
            for o in likely_objs)

    return max(safe, key=lambda c: (min_dist(c), -c.id))


def _run_solo_human(scene, human_config, seed, rng, sequence, handles):
    model, gains = _model_and_gains(handles)
    sim = _HumanSim(scene, human_config, rng, model, gains)
    remaining = list(scene.objects)
    actions = []
    t = 0.0
    k = 0
    while remaining:
        obj = _pick_human(rng, remaining, set(), sequence, k)
        if obj is None:
            raise TaskError("human sequence exhausted before 16 placements")
        acts, _, _, t_end = sim.cycle(t, obj)
        actions.extend(acts)
        remaining.remove(obj)
        t = t_end + human_config.decision_pause
        k += 1
    t_final = max(a.t_end for a in actions)
    return TaskLog(actions=tuple(actions), t0=0.0, t_final=t_final,
                   policy="solo_human", seed=seed)


def _run_solo_robot(scene, timings, seed, handles):
    robot = _RobotSim(timings)
    base = _robot_base(handles)
    remaining = list(scene.objects)
    actions = []
    t = 0.0
    while remaining:
        obj = _nearest_object(remaining, base)
        acts, t = robot.cycle_actions(t, obj.id)
        actions.extend(acts)
        remaining.remove(obj)
    return TaskLog(actions=tuple(actions), t0=0.0,
                   t_final=max(a.t_end for a in actions),
                   policy="solo_robot", seed=seed)


def _run_turn_taking(scene, human_config, timings, seed, rng, sequence,
                     handles):
    model, gains = _model_and_gains(handles)
    sim = _HumanSim(scene, human_config, rng, model, gains)
    robot = _RobotSim(timings)
    base = _robot_base(handles)
    remaining = list(scene.objects)
    actions = []
    t = 0.0
    k = 0
    while remaining:
        human_obj = _pick_human(rng, remaining, set(), sequence, k)
        k += 1
        if human_obj is not None:
            acts, _, _, h_end = sim.cycle(t, human_obj)
            actions.extend(acts)
            remaining.remove(human_obj)
            retreat = acts[-1]
            if remaining:
                robot_obj = _nearest_object(remaining, base)
                # robot reach onset = human retreat onset
                r_acts, _ = robot.cycle_actions(retreat.t_start,
                                                robot_obj.id)
                actions.extend(r_acts)
                remaining.remove(robot_obj)
                # next human reach starts at robot retreat onset
                t = max(r_acts[-1].t_start,
                        h_end + human_config.decision_pause)
            else:
                t = h_end
        else:
            robot_obj = _nearest_object(remaining, base)
            r_acts, t = robot.cycle_actions(t, robot_obj.id)
            actions.extend(r_acts)
            remaining.remove(robot_obj)
    return TaskLog(actions=tuple(actions), t0=0.0,
                   t_final=max(a.t_end for a in actions),
                   policy="turn_taking", seed=seed)


def _prune_scene(scene, remaining_ids):
    objects = tuple(o for o in scene.objects if o.id in remaining_ids)
    return replace(scene, objects=objects)


def _run_intent(scene, handles, human_config, timings, seed, rng,
                sequence):
    if handles is None:
        raise ParameterError("intent_prediction requires engine handles")
    model, gains = handles.model, handles.gains
    sim = _HumanSim(scene, human_config, rng, model, gains)
    robot = _RobotSim(timings)
    diagnostics = []
    actions = []

    remaining = {o.id: o for o in scene.objects}
    on_table = set(remaining)
    gaze_buffer = priors.GazeBuffer(window=human_config.gaze_lead)
    hand_noise = _Ar1Noise(rng, human_config.hand_sigma,
                           human_config.hand_noise_rho)
    posterior = None

    human_acts = []
    human_done = False
    pick_k = 0
    cur_reach = None

    robot_busy_until = 0.0
    robot_claim = None
    claim_forced = False
    commit_streak = 0
    last_best = None
    deadlock_since = None

    def human_state_at(t):
        for a in human_acts:
            if a.t_start - 1e-9 <= t < a.t_end - 1e-9:
                return a
        return None

    def schedule_human(t):
        nonlocal pick_k, cur_reach, human_done
        claimed = {robot_claim} if robot_claim is not None else set()
        held = [remaining[i] for i in sorted(remaining)
                if i in on_table and i not in claimed]
        obj = _pick_human(rng, held, claimed, sequence, pick_k)
        pick_k += 1
        if obj is None:
            human_done = True
            return None
        acts, _, reach_pts, _ = sim.cycle(t, obj)
        human_acts.extend(acts)
        actions.extend(acts)
        noisy = reach_pts + hand_noise.block(len(reach_pts))
        cur_reach = (acts[0], noisy, obj)
        return acts

    schedule_human(0.0)
    t_final_bound = 600.0
    tick = 0
    while True:
        t = tick * DT
        if t > t_final_bound:
            raise TaskError("simulation exceeded the time bound")

        # human bookkeeping: remove objects at grasp end, advance cycles
        for a in human_acts:
            if a.kind == "grasp" and a.t_end <= t and a.object_id in on_table:
                on_table.discard(a.object_id)
            if a.kind == "release" and a.t_end <= t \
                    and a.object_id in remaining:
                del remaining[a.object_id]
        if human_acts and not human_done:
            last_end = max(a.t_end for a in human_acts)
            if t >= last_end + human_config.decision_pause:
                schedule_human(t)

        # robot bookkeeping
        if robot_claim is not None and t >= robot_busy_until:
            del remaining[robot_claim]
            robot_claim = None
            commit_streak = 0

        if not remaining and t >= robot_busy_until:
            break

        # observe the human's active reach
        state = human_state_at(t)
        if cur_reach is not None and state is cur_reach[0]:
            reach_act, pts, obj = cur_reach
            n_avail = int(math.floor(
                (t - reach_act.t_start) / DT + 1e-9)) + 1
            n_avail = min(max(n_avail, 0), len(pts))
            gaze_pt = np.asarray(obj.position[:2]) \
                + rng.normal(0.0, human_config.gaze_sigma, 2)
            gaze_buffer.push(t, gaze_pt)
            if n_avail >= 1:
                obs = Trajectory(points=np.array(pts[:n_avail]), dt=DT)
                prior_scene = _prune_scene(scene,
                                           on_table & set(remaining))
                prior = priors.default_intent_prior(
                    prior_scene, gaze_buffer, now=t)
                posterior = grid_posterior(
                    handles.grid, prior, handles.inference_config, obs,
                    n_avail - 1)

        # robot decision logic
        if robot_claim is None and t >= robot_busy_until and remaining:
            candidates = [remaining[i] for i in sorted(remaining)
                          if i in on_table]
            if state is not None and state.kind in ("reach", "grasp") \
                    and cur_reach is not None:
                candidates = [c for c in candidates
                              if c.id != cur_reach[2].id]
            if candidates:
                probs = {}
                if posterior is not None:
                    prob_scene = _prune_scene(
                        scene, {c.id for c in candidates}
                        | ({cur_reach[2].id} if cur_reach else set()))
                    if prob_scene.objects:
                        probs = decision_summary(
                            posterior, prob_scene,
                            handles.conflict_radius)
                repel = []
                if cur_reach is not None \
                        and cur_reach[2].id in remaining:
                    repel.append(remaining[cur_reach[2].id])
                best = select_safe_object(candidates, probs,
                                          handles.p_safe, repel)
                if best is not None:
                    deadlock_since = None
                    # streak counts consecutive ticks on the same safe
                    # candidate
                    if best.id == last_best:
                        commit_streak += 1
                    else:
                        commit_streak = 1
                        last_best = best.id
                    if commit_streak >= handles.commit_ticks:
                        gate = None
                        if state is not None \
                                and state.kind in ("reach", "grasp",
                                                   "transport", "release"):
                            cycle_acts = [
                                a for a in human_acts
                                if a.object_id == state.object_id
                                and a.kind == "retreat"]
                            gate = cycle_acts[0].t_start if cycle_acts \
                                else None
                        r_acts, r_end = robot.cycle_actions(
                            t, best.id, transport_gate=gate)
                        actions.extend(r_acts)
                        robot_claim = best.id
                        claim_forced = False
                        on_table.discard(best.id)
                        robot_busy_until = r_end
                        commit_streak = 0
                        last_best = None
                else:
                    commit_streak = 0
                    last_best = None
                    human_idle = state is None
                    if human_idle:
                        if deadlock_since is None:
                            deadlock_since = t
                        elif t - deadlock_since >= handles.deadlock_timeout:
                            diagnostics.append(
                                f"deadlock at t={t:.2f}: no safe object "
                                f"with the human idle; taking nearest")
                            warnings.warn(diagnostics[-1])
                            best = _nearest_object(candidates,
                                                   handles.robot_base)
                            r_acts, r_end = robot.cycle_actions(t, best.id)
                            actions.extend(r_acts)
                            robot_claim = best.id
                            # the pick already looks unsafe; aborting it
                            # would reinstate the deadlock
                            claim_forced = True
                            on_table.discard(best.id)
                            robot_busy_until = r_end
                            deadlock_since = None
                    else:
                        deadlock_since = None

        # safety override: abort if the committed object turns likely
        if robot_claim is not None and posterior is not None \
                and not claim_forced:
            active = [a for a in actions
                      if a.agent == "robot" and a.object_id == robot_claim
                      and a.kind in ("reach",)
                      and a.t_start <= t < a.t_end]
            if active and robot_claim in remaining:
                prob_scene = _prune_scene(scene, {robot_claim})
                if prob_scene.objects:
                    prob = decision_summary(
                        posterior, prob_scene,
                        handles.conflict_radius).get(robot_claim, 0.0)
                    if prob > handles.abort_threshold:
                        diagnostics.append(
                            f"abort at t={t:.2f}: object {robot_claim} "
                            f"probability {prob:.2f}")
                        actions[:] = [a for a in actions
                                      if not (a.agent == "robot"
                                              and a.object_id == robot_claim
                                              and a.t_end > t)]
                        stub = active[0]
                        if t > stub.t_start:
                            actions.append(AtomicAction(
                                "robot", "reach", stub.t_start, t,
                                robot_claim))
                        retreat_end = t + timings.retreat
                        actions.append(AtomicAction(
                            "robot", "retreat", t, retreat_end,
                            robot_claim))
                        on_table.add(robot_claim)
                        robot_claim = None
                        robot_busy_until = retreat_end
                        commit_streak = 0
                        last_best = None

        tick += 1

    t_final = max(a.t_end for a in actions)
    return TaskLog(actions=tuple(actions), t0=0.0, t_final=t_final,
                   policy="intent_prediction", seed=seed,
                   diagnostics=tuple(diagnostics))


def compute_metrics(log):
    """Fluency metrics of a completed run.

    T spans the first action start to the last retreat end. FD pairs
    each robot reach with the human retreat of the cycle that triggered
    it and averages (reach start - retreat end); without both agents it
    is None. RI and HI are each agent's time not spent inside any
    action, None for an agent with no actions at all.
    """
    if len(log.placements()) != 16:
        raise TaskError(
            f"incomplete task: {len(log.placements())} of 16 placements")
    T = log.t_final - log.t0

    idle = {}
    for agent in AGENTS:
        mine = log.by_agent(agent)
        if not mine:
            idle[agent] = None
            continue
        busy = sum(a.duration for a in mine)
        idle[agent] = T - busy

    human_retreats = [a for a in log.by_agent("human")
                      if a.kind == "retreat"]
    robot_reaches = [a for a in log.by_agent("robot") if a.kind == "reach"]
    fds = []
    if human_retreats and robot_reaches:
        for reach in robot_reaches:
            inside = [r for r in human_retreats
                      if r.t_start <= reach.t_start <= r.t_end]
            if inside:
                fds.append(reach.t_start - inside[0].t_end)
                continue
            after = [r for r in human_retreats if r.t_end >= reach.t_start]
            if after:
                fds.append(reach.t_start - after[0].t_end)
                continue
            before = [r for r in human_retreats if r.t_end < reach.t_start]
            fds.append(reach.t_start - before[-1].t_end)
    fd_mean = float(np.mean(fds)) if fds else None
    fd_total = float(np.sum(fds)) if fds else None
    return FluencyMetrics(T=T, FD=fd_mean, RI=idle["robot"],
                          HI=idle["human"], fd_total=fd_total,
                          n_handovers=len(fds))


def aggregate_metrics(logs):
    """Mean and standard deviation of each metric over seeded runs."""
    if not logs:
        raise ParameterError("no logs to aggregate")
    policies = {log.policy for log in logs}
    if len(policies) != 1:
        raise ParameterError(f"mixed policies {sorted(policies)}")
    rows = [compute_metrics(log) for log in logs]
    out = {"policy": logs[0].policy,
           "seeds": [log.seed for log in logs],
           "metrics": {}}
    for name in ("T", "FD", "RI", "HI"):
        vals = [getattr(r, name) for r in rows]
        if any(v is None for v in vals):
            out["metrics"][name] = None
        else:
            out["metrics"][name] = {
                "mean": float(np.mean(vals)),
                "std": float(np.std(vals)),
            }
    return out


_DIAGRAM_COLORS = {"reach": "#4c78a8", "transport": "#f58518",
                   "retreat": "#54a24b"}


def export_task_diagram(log, path=None):
    """SVG task diagram: one row per agent, one block per motion action.

    Grasp and release contribute to the metrics but are left out of the
    diagram; blocks are labeled with their duration in seconds.
    """
    width, row_h, pad = 900, 46, 48
    T = max(log.t_final - log.t0, 1e-9)
    scale = (width - 2 * pad) / T
    rows = {"human": pad, "robot": pad + row_h + 18}
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{rows["robot"] + row_h + 60}" '
        f'font-family="sans-serif" font-size="11">',
        f'<text x="{pad}" y="20">policy: {log.policy}  seed: {log.seed}'
        f'  T: {T:.2f} s</text>',
    ]
    for agent, y in rows.items():
        parts.append(f'<text x="8" y="{y + row_h / 2 + 4}">{agent}</text>')
        parts.append(
            f'<line x1="{pad}" y1="{y + row_h}" x2="{width - pad}" '
            f'y2="{y + row_h}" stroke="#999"/>')
    n_blocks = 0
    for a in log.actions:
        if a.kind not in _DIAGRAM_COLORS:
            continue
        x = pad + (a.t_start - log.t0) * scale
        w = max(a.duration * scale, 1.0)
        y = rows[a.agent]
        parts.append(
            f'<rect x="{x:.2f}" y="{y}" width="{w:.2f}" '
            f'height="{row_h - 8}" fill="{_DIAGRAM_COLORS[a.kind]}" '
            f'opacity="0.85"><title>{a.kind} '
            f'{a.duration:.2f}</title></rect>')
        parts.append(
            f'<text x="{x + 2:.2f}" y="{y + row_h - 14}" fill="#fff">'
            f'{a.duration:.2f}</text>')
        n_blocks += 1
    axis_y = rows["robot"] + row_h + 30
    parts.append(
        f'<line x1="{pad}" y1="{axis_y}" x2="{width - pad}" '
        f'y2="{axis_y}" stroke="#333"/>')
    for s in range(0, int(T) + 1, 5):
        x = pad + s * scale
        parts.append(f'<line x1="{x:.2f}" y1="{axis_y}" x2="{x:.2f}" '
                     f'y2="{axis_y + 5}" stroke="#333"/>')
        parts.append(f'<text x="{x - 6:.2f}" y="{axis_y + 18}">{s}</text>')
    parts.append("</svg>")
    svg = "\n".join(parts)
    if path is not None:
        Path(path).write_text(svg)
    return svg


def write_task_log(path, log):
    """JSONL: one header line, then one action per line."""
    path = Path(path)
    with open(path, "w") as fh:
        fh.write(json.dumps({"policy": log.policy, "seed": log.seed,
                             "t0": log.t0, "t_final": log.t_final,
                             "diagnostics": list(log.diagnostics)}))
        fh.write("\n")
        for a in log.actions:
            fh.write(json.dumps({
                "agent": a.agent, "kind": a.kind,
                "t_start": round(a.t_start, 6),
                "t_end": round(a.t_end, 6),
                "object_id": a.object_id}))
            fh.write("\n")
    return path


def read_task_log(path):
    with open(path) as fh:
        header = json.loads(fh.readline())
        actions = [AtomicAction(agent=d["agent"], kind=d["kind"],
                                t_start=d["t_start"], t_end=d["t_end"],
                                object_id=d["object_id"])
                   for d in map(json.loads, fh) if d]
    return TaskLog(actions=tuple(actions), t0=header["t0"],
                   t_final=header["t_final"], policy=header["policy"],
                   seed=header["seed"],
                   diagnostics=tuple(header.get("diagnostics", ())))
