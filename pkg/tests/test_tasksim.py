import dataclasses
import warnings

import numpy as np
import pytest

import reachintent.tasksim as ts
from reachintent import generator as gen
from reachintent import inference
from reachintent.errors import ParameterError, TaskError
from reachintent.generator import Scene, SceneObject
from reachintent.kinematics import forward_kinematics


@pytest.fixture(scope="module")
def scene0():
    return ts.default_task_scene(0)


@pytest.fixture(scope="module")
def handles(arm_model, small_net):
    grid = inference.build_cache(inference.default_grid(),
                                 inference.SurrogateGenerator(small_net))
    return ts.EngineHandles(model=arm_model, gains=gen.ControllerGains(),
                            grid=grid,
                            inference_config=inference.InferenceConfig())


class TestAtomicAction:
    def test_validates_fields(self):
        with pytest.raises(ParameterError, match="agent"):
            ts.AtomicAction("dog", "reach", 0.0, 1.0)
        with pytest.raises(ParameterError, match="kind"):
            ts.AtomicAction("human", "jump", 0.0, 1.0)
        with pytest.raises(ParameterError, match="precede"):
            ts.AtomicAction("human", "reach", 1.0, 1.0)

    def test_duration(self):
        a = ts.AtomicAction("robot", "grasp", 2.0, 2.25, 3)
        assert a.duration == pytest.approx(0.25)


class TestTaskLog:
    def test_sorts_actions(self):
        a = ts.AtomicAction("human", "grasp", 1.0, 1.25, 0)
        b = ts.AtomicAction("human", "reach", 0.0, 1.0, 0)
        log = ts.TaskLog(actions=(a, b), t0=0.0, t_final=1.25,
                         policy="solo_human", seed=0)
        assert [x.kind for x in log.actions] == ["reach", "grasp"]

    def test_rejects_overlap_same_agent(self):
        a = ts.AtomicAction("human", "reach", 0.0, 1.0, 0)
        b = ts.AtomicAction("human", "grasp", 0.9, 1.2, 0)
        with pytest.raises(ParameterError, match="overlap"):
            ts.TaskLog(actions=(a, b), t0=0.0, t_final=1.2,
                       policy="solo_human", seed=0)

    def test_cross_agent_overlap_allowed(self):
        a = ts.AtomicAction("human", "reach", 0.0, 1.0, 0)
        b = ts.AtomicAction("robot", "reach", 0.5, 1.5, 1)
        log = ts.TaskLog(actions=(a, b), t0=0.0, t_final=1.5,
                         policy="turn_taking", seed=0)
        assert len(log.by_agent("robot")) == 1


class TestDefaultScene:
    def test_layout(self, scene0):
        assert len(scene0.objects) == 16
        assert scene0.box_position is not None
        pos = np.array([o.position[:2] for o in scene0.objects])
        for i in range(16):
            for j in range(i + 1, 16):
                assert np.linalg.norm(pos[i] - pos[j]) > 0.10

    def test_seeded(self):
        a = ts.default_task_scene(4)
        b = ts.default_task_scene(4)
        assert a.objects == b.objects
        assert ts.default_task_scene(5).objects != a.objects


QUIET = ts.HumanConfig(hand_sigma=0.0, gaze_sigma=0.0)


class TestSimulateHuman:
    def test_zero_noise_reach_equals_controller_output(self, arm_model,
                                                       scene0):
        run = ts.simulate_human(scene0, [10], QUIET, seed=0,
                                model=arm_model)
        reach = next(a for a in run.actions if a.kind == "reach")
        n = int(round(reach.duration / run.hand.dt))
        target = next(o for o in scene0.objects if o.id == 10)
        pts, _ = gen.simulate_reach(
            arm_model, gen.ControllerGains(), scene0,
            gen.rest_posture(arm_model),
            np.asarray(target.position, dtype=float))
        assert np.array_equal(run.hand.points[:n], pts[:n])

    def test_seed_determinism(self, arm_model, scene0):
        a = ts.simulate_human(scene0, [1, 2], seed=9, model=arm_model)
        b = ts.simulate_human(scene0, [1, 2], seed=9, model=arm_model)
        assert np.array_equal(a.hand.points, b.hand.points)
        assert np.array_equal(a.gaze.points, b.gaze.points)
        c = ts.simulate_human(scene0, [1, 2], seed=10, model=arm_model)
        assert not np.array_equal(a.hand.points, c.hand.points)

    def test_gaze_window_mean_near_target(self, arm_model, scene0):
        cfg = ts.HumanConfig()
        run = ts.simulate_human(scene0, [3, 12], cfg, seed=2,
                                model=arm_model)
        times = run.gaze.times()
        for a in run.actions:
            if a.kind != "reach":
                continue
            sel = (times >= a.t_start - cfg.gaze_lead) & \
                  (times <= a.t_start)
            if sel.sum() < 3:
                continue
            mean = run.gaze.points[sel].mean(axis=0)
            target = next(o for o in scene0.objects
                          if o.id == a.object_id)
            err = np.linalg.norm(mean - np.asarray(target.position[:2]))
            assert err < 3 * cfg.gaze_sigma

    def test_hand_noise_magnitude(self, arm_model, scene0):
        noisy = ts.simulate_human(scene0, [6], seed=5, model=arm_model)
        clean = ts.simulate_human(scene0, [6], QUIET, seed=5,
                                  model=arm_model)
        n = min(len(noisy.hand.points), len(clean.hand.points))
        err = noisy.hand.points[:n] - clean.hand.points[:n]
        per_axis = err.std(axis=0).mean()
        assert 0.001 < per_axis < 0.012

    def test_unknown_object(self, arm_model, scene0):
        with pytest.raises(TaskError, match="99"):
            ts.simulate_human(scene0, [99], model=arm_model)


class TestSegmentPhases:
    def test_clean_single_cycle_three_motion_actions(self, arm_model,
                                                     scene0):
        run = ts.simulate_human(scene0, [10], QUIET, seed=0,
                                model=arm_model)
        events = [a for a in run.actions
                  if a.kind in ("grasp", "release")]
        got = [a for a in ts.segment_phases(run.hand, events)
               if a.kind in ("reach", "transport", "retreat")]
        assert [a.kind for a in got] == ["reach", "transport", "retreat"]
        assert all(a.object_id == 10 for a in got)

    def test_boundaries_within_two_samples(self, arm_model, scene0):
        for seed in (0, 3):
            run = ts.simulate_human(scene0, [0, 5, 10, 15], seed=seed,
                                    model=arm_model)
            events = [a for a in run.actions
                      if a.kind in ("grasp", "release")]
            got = [a for a in ts.segment_phases(run.hand, events)
                   if a.kind in ("reach", "transport", "retreat")]
            truth = [a for a in run.actions
                     if a.kind in ("reach", "transport", "retreat")]
            assert len(got) == len(truth)
            budget = 2 * run.hand.dt + 1e-9
            for tr, g in zip(truth, got):
                assert g.kind == tr.kind
                assert g.object_id == tr.object_id
                assert abs(g.t_start - tr.t_start) <= budget
                assert abs(g.t_end - tr.t_end) <= budget

    def test_stationary_stream_warns_and_returns_empty(self):
        pts = np.tile([0.1, 0.2, 0.0], (60, 1))
        with pytest.warns(UserWarning, match="no motion"):
            got = ts.segment_phases(ts.Stream(points=pts), [])
        assert got == []


class TestSoloRobot:
    def test_timing_arithmetic(self, scene0):
        log = ts.run_policy("solo_robot", scene0, seed=0)
        m = ts.compute_metrics(log)
        # 16 cycles of 1.4 + 0.25 + 1.6 + 0.25 + 0.5 seconds
        assert m.T == pytest.approx(64.0, abs=1e-9)
        assert m.RI == pytest.approx(0.0, abs=1e-9)
        assert m.HI is None and m.FD is None
        assert len(log.placements()) == 16

    def test_cycle_durations(self, scene0):
        log = ts.run_policy("solo_robot", scene0, seed=0)
        first = log.actions[:5]
        assert [a.kind for a in first] == ["reach", "grasp", "transport",
                                          "release", "retreat"]
        assert [pytest.approx(a.duration) for a in first] == \
            [1.4, 0.25, 1.6, 0.25, 0.5]


class TestSoloHuman:
    def test_run(self, scene0):
        log = ts.run_policy("solo_human", scene0, seed=0)
        m = ts.compute_metrics(log)
        assert len(log.placements()) == 16
        assert m.RI is None and m.FD is None
        assert m.HI == pytest.approx(15 * ts.HumanConfig().decision_pause,
                                     abs=1e-6)
        assert 40.0 < m.T < 64.0

    def test_determinism(self, scene0):
        a = ts.run_policy("solo_human", scene0, seed=7)
        b = ts.run_policy("solo_human", scene0, seed=7)
        assert a.actions == b.actions


class TestTurnTaking:
    def test_robot_reach_starts_at_human_retreat_onset(self, scene0):
        log = ts.run_policy("turn_taking", scene0, seed=1)
        retreat_onsets = {round(a.t_start, 9)
                          for a in log.by_agent("human")
                          if a.kind == "retreat"}
        reaches = [a for a in log.by_agent("robot") if a.kind == "reach"]
        assert reaches
        for r in reaches:
            assert round(r.t_start, 9) in retreat_onsets

    def test_negative_fd(self, scene0):
        m = ts.compute_metrics(ts.run_policy("turn_taking", scene0,
                                             seed=2))
        assert m.FD is not None and m.FD < 0
        assert m.n_handovers == 8


def _cycle(agent, t, obj, durs):
    kinds = ("reach", "grasp", "transport", "release", "retreat")
    out = []
    for kind, d in zip(kinds, durs):
        out.append(ts.AtomicAction(agent, kind, t, t + d, obj))
        t += d
    return out


class TestComputeMetrics:
    def constructed_log(self):
        """Eight handover pairs; all back-to-back except the first.

        The first human retreat ends at 10.0 and the paired robot reach
        starts at 9.2, so that handover contributes -0.8 while the
        seven others contribute exactly zero.
        """
        actions = []
        for p in range(8):
            base = 40.0 * p
            human = _cycle("human", base, 2 * p,
                           (1.0, 0.25, 1.0, 0.25, 1.5))
            if p == 0:
                human[-1] = ts.AtomicAction("human", "retreat", 8.5, 10.0,
                                            0)
            actions.extend(human)
            retreat_end = human[-1].t_end
            start = 9.2 if p == 0 else retreat_end
            actions.extend(_cycle("robot", start, 2 * p + 1,
                                  (1.4, 0.25, 1.6, 0.25, 0.5)))
        t_final = max(a.t_end for a in actions)
        return ts.TaskLog(actions=tuple(actions), t0=0.0, t_final=t_final,
                          policy="turn_taking", seed=0)

    def test_handover_contribution(self):
        m = ts.compute_metrics(self.constructed_log())
        assert m.n_handovers == 8
        assert m.fd_total == pytest.approx(-0.8, abs=1e-9)
        assert m.FD == pytest.approx(-0.1, abs=1e-9)

    def test_idle_partition(self, scene0):
        for policy in ("solo_robot", "turn_taking"):
            log = ts.run_policy(policy, scene0, seed=0)
            m = ts.compute_metrics(log)
            for agent, idle in (("human", m.HI), ("robot", m.RI)):
                if idle is None:
                    continue
                busy = sum(a.duration for a in log.by_agent(agent))
                assert busy + idle == pytest.approx(m.T, abs=1e-6)
                assert idle >= 0

    def test_incomplete_log_rejected(self):
        actions = tuple(_cycle("human", 0.0, 0,
                               (1.0, 0.25, 1.0, 0.25, 1.0)))
        log = ts.TaskLog(actions=actions, t0=0.0, t_final=3.5,
                         policy="solo_human", seed=0)
        with pytest.raises(TaskError, match="incomplete"):
            ts.compute_metrics(log)

    def test_aggregate(self, scene0):
        logs = [ts.run_policy("solo_robot", scene0, seed=s)
                for s in (0, 1)]
        agg = ts.aggregate_metrics(logs)
        assert agg["policy"] == "solo_robot"
        assert agg["seeds"] == [0, 1]
        assert agg["metrics"]["T"]["mean"] == pytest.approx(64.0)
        assert agg["metrics"]["T"]["std"] == pytest.approx(0.0)
        assert agg["metrics"]["FD"] is None

    def test_aggregate_rejects_mixed(self, scene0):
        logs = [ts.run_policy("solo_robot", scene0, seed=0),
                ts.run_policy("solo_human", scene0, seed=0)]
        with pytest.raises(ParameterError, match="mixed"):
            ts.aggregate_metrics(logs)


class TestIntentPolicy:
    def test_completes_with_negative_fd(self, scene0, handles):
        log = ts.run_policy("intent_prediction", scene0, handles, seed=0)
        m = ts.compute_metrics(log)
        assert len(log.placements()) == 16
        assert m.n_handovers >= 1
        assert m.FD < 0
        robot_reaches = [a for a in log.by_agent("robot")
                         if a.kind == "reach"]
        assert len(robot_reaches) >= 1

    def test_determinism(self, scene0, handles):
        a = ts.run_policy("intent_prediction", scene0, handles, seed=4)
        b = ts.run_policy("intent_prediction", scene0, handles, seed=4)
        assert a.actions == b.actions

    def test_no_target_co_occupancy(self, scene0, handles):
        pos = {o.id: np.asarray(o.position[:2]) for o in scene0.objects}
        for seed in (0, 1, 2):
            log = ts.run_policy("intent_prediction", scene0, handles,
                                seed=seed)
            active = ("reach", "grasp", "transport")
            h = [a for a in log.by_agent("human") if a.kind in active]
            r = [a for a in log.by_agent("robot") if a.kind in active]
            for ha in h:
                for ra in r:
                    if ha.t_start < ra.t_end and ra.t_start < ha.t_end:
                        d = np.linalg.norm(pos[ha.object_id]
                                           - pos[ra.object_id])
                        assert d >= handles.conflict_radius

    def test_beats_turn_taking(self, handles):
        per = {"turn_taking": [], "intent_prediction": []}
        for seed in (0, 1, 2):
            scene = ts.default_task_scene(seed)
            for policy in per:
                per[policy].append(ts.compute_metrics(
                    ts.run_policy(policy, scene, handles, seed=seed)))
        for name in ("T", "RI", "HI", "FD"):
            intent = np.mean([getattr(m, name)
                              for m in per["intent_prediction"]])
            turn = np.mean([getattr(m, name) for m in per["turn_taking"]])
            assert intent < turn, name

    def test_requires_handles(self, scene0):
        with pytest.raises(ParameterError, match="handles"):
            ts.run_policy("intent_prediction", scene0)

    def test_deadlock_timeout(self, handles):
        objects = []
        k = 0
        for y in (0.30, 0.415, 0.53, 0.645):
            for x in (-0.195, -0.065, 0.065, 0.195):
                objects.append(SceneObject(id=k, position=(x, y, 0.0),
                                           extent=0.04))
                k += 1
        # object 15 sits 6 cm from the human's final target, inside
        # the conflict radius, so it can never look safe
        objects[15] = SceneObject(id=15, position=(0.125, 0.645, 0.0),
                                  extent=0.04)
        scene = Scene(objects=tuple(objects),
                      box_position=(0.50, 0.10, 0.0))
        tight = dataclasses.replace(handles, conflict_radius=0.08)
        with pytest.warns(UserWarning, match="deadlock"):
            log = ts.run_policy("intent_prediction", scene, tight,
                                seed=0, human_sequence=[14])
        assert any("deadlock" in d for d in log.diagnostics)
        assert len(log.placements()) == 16
        # the forced commit comes only after the timeout has elapsed
        reach15 = next(a for a in log.by_agent("robot")
                       if a.kind == "reach" and a.object_id == 15)
        prior_robot = [a.t_end for a in log.by_agent("robot")
                       if a.t_end <= reach15.t_start + 1e-9]
        assert reach15.t_start - max(prior_robot) >= \
            tight.deadlock_timeout - 0.1

    def test_abort_on_probability_spike(self, scene0, handles,
                                        monkeypatch):
        fired = {"done": False}
        real = ts.decision_summary

        def fake(posterior, scene, conflict_radius=0.15):
            if len(scene.objects) == 1:
                obj_id = scene.objects[0].id
                if not fired["done"]:
                    fired["done"] = True
                    return {obj_id: 0.9}
                return {obj_id: 0.0}
            return {o.id: 0.0 for o in scene.objects}

        monkeypatch.setattr(ts, "decision_summary", fake)
        log = ts.run_policy("intent_prediction", scene0, handles, seed=0)
        monkeypatch.setattr(ts, "decision_summary", real)
        assert any("abort" in d for d in log.diagnostics)
        assert len(log.placements()) == 16
        robot = log.by_agent("robot")
        retreats = [a for a in robot if a.kind == "retreat"]
        releases = [a for a in robot if a.kind == "release"]
        assert len(retreats) == len(releases) + 1


class TestRunPolicyValidation:
    def test_unknown_policy(self, scene0):
        with pytest.raises(ParameterError, match="policy"):
            ts.run_policy("psychic", scene0)

    def test_wrong_object_count(self):
        scene = Scene(objects=(SceneObject(id=0,
                                           position=(0.0, 0.3, 0.0),
                                           extent=0.04),),
                      box_position=(0.5, 0.1, 0.0))
        with pytest.raises(TaskError, match="16"):
            ts.run_policy("solo_robot", scene)

    def test_missing_box(self, scene0):
        scene = dataclasses.replace(scene0, box_position=None)
        with pytest.raises(TaskError, match="box"):
            ts.run_policy("solo_robot", scene)


class TestDiagram:
    def test_blocks_and_labels(self, scene0):
        log = ts.run_policy("solo_robot", scene0, seed=0)
        svg = ts.export_task_diagram(log)
        motion = [a for a in log.actions
                  if a.kind in ("reach", "transport", "retreat")]
        assert svg.count("<rect") == len(motion)
        assert ">1.40<" in svg and ">1.60<" in svg and ">0.50<" in svg
        # grasp and release do not get blocks
        assert svg.count("<rect") == 16 * 3

    def test_deterministic(self, scene0):
        log = ts.run_policy("turn_taking", scene0, seed=0)
        assert ts.export_task_diagram(log) == ts.export_task_diagram(log)

    def test_empty_log_axes_only(self):
        log = ts.TaskLog(actions=(), t0=0.0, t_final=0.0,
                         policy="solo_human", seed=0)
        svg = ts.export_task_diagram(log)
        assert "<rect" not in svg
        assert "<line" in svg

    def test_writes_file(self, scene0, tmp_path):
        log = ts.run_policy("solo_robot", scene0, seed=0)
        out = tmp_path / "diagram.svg"
        ts.export_task_diagram(log, out)
        assert out.read_text().startswith("<svg")


class TestTaskLogIO:
    def test_round_trip(self, scene0, tmp_path):
        log = ts.run_policy("turn_taking", scene0, seed=3)
        path = tmp_path / "log.jsonl"
        ts.write_task_log(path, log)
        back = ts.read_task_log(path)
        assert back.policy == log.policy
        assert back.seed == log.seed
        assert back.t_final == pytest.approx(log.t_final, abs=1e-5)
        assert len(back.actions) == len(log.actions)
        for a, b in zip(log.actions, back.actions):
            assert (a.agent, a.kind, a.object_id) == \
                (b.agent, b.kind, b.object_id)
            assert b.t_start == pytest.approx(a.t_start, abs=1e-5)
            assert b.t_end == pytest.approx(a.t_end, abs=1e-5)

    def test_one_action_per_line(self, scene0, tmp_path):
        log = ts.run_policy("solo_robot", scene0, seed=0)
        path = tmp_path / "log.jsonl"
        ts.write_task_log(path, log)
        lines = path.read_text().strip().split("\n")
        assert len(lines) == 1 + len(log.actions)
