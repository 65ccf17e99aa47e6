"""Streaming inference sessions over newline-delimited JSON.

One TCP connection is one session: the client greets with a hello,
optionally installs a scene, then streams hand (and gaze) samples.
Every hand sample comes back as a posterior heat map frame plus a
decision message. An optional WebSocket endpoint relays the identical
protocol for browsers, one JSON document per text frame.

Wire messages, client to server:
    {"type": "hello", "proto": 1}
    {"type": "scene", "objects": [{"id", "position", "extent"?,
        "confidence"?}, ...], "box": [x, y, z] | null}
    {"type": "hand", "t": seconds, "p": [x, y, z]}
    {"type": "gaze", "t": seconds, "p": [x, y]}
    {"type": "reset"}
and server to client:
    {"type": "ready", "grid": {"nx", "ny", "origin", "cell_size"}}
    {"type": "posterior", "t", "weights_u8"}  base64, nx*ny bytes
    {"type": "decision", "object_probs", "safe_object", "latency_ms"}
    {"type": "error", "code", "detail"}  then the connection closes

The heat map is quantized to u8 with the max cell scaled to 255;
full-precision posteriors are available through the file-based
inference command instead. Hand and gaze timestamps must each be
strictly increasing. A single hand point is not yet motion evidence,
so the first frame after connect or reset reports the prior itself.
Sessions are independent; within a session messages are processed
strictly in arrival order. The trajectory cache and surrogate are
shared read-only across sessions.
"""

import asyncio
import base64
import json
import time

import numpy as np

from . import config, priors
from .errors import ParameterError, ReachIntentError, StaleCacheError
from .generator import Scene, SceneObject, Trajectory
from .inference import (InferenceConfig, PosteriorEstimate,
                        SurrogateGenerator, build_cache, decision_summary,
                        default_grid)
from .inference import grid_posterior as _grid_posterior
from .surrogate import generation_tag, load_weights
from .tasksim import select_safe_object

PROTO_VERSION = 1


class ProtocolViolation(Exception):
    """A client message the protocol does not allow; closes the session."""

    def __init__(self, code, detail=""):
        super().__init__(detail or code)
        self.code = code
        self.detail = detail


def scene_to_json(scene):
    doc = {"objects": [{"id": o.id,
                        "position": [float(v) for v in o.position],
                        "extent": o.extent,
                        "confidence": o.confidence}
                       for o in scene.objects]}
    doc["box"] = None if scene.box_position is None \
        else [float(v) for v in scene.box_position]
    return doc


def scene_from_json(doc):
    """Scene from the wire/file layout; position may omit z."""
    objects = []
    for entry in doc.get("objects", ()):
        pos = [float(v) for v in entry["position"]]
        if len(pos) == 2:
            pos.append(0.0)
        if len(pos) != 3:
            raise ParameterError("object position must be [x, y] or "
                                 "[x, y, z]")
        objects.append(SceneObject(id=int(entry["id"]),
                                   position=tuple(pos),
                                   extent=float(entry.get("extent", 0.04)),
                                   confidence=float(
                                       entry.get("confidence", 1.0))))
    box = doc.get("box")
    if box is not None:
        box = tuple(float(v) for v in box)
    return Scene(objects=tuple(objects), box_position=box)


def encode_weights_u8(weights):
    """Base64 of the weights scaled so the max cell is 255."""
    w = np.asarray(weights, dtype=float)
    top = float(w.max())
    scaled = np.zeros(len(w), dtype=np.uint8) if top <= 0.0 \
        else np.round(w * (255.0 / top)).astype(np.uint8)
    return base64.b64encode(scaled.tobytes()).decode("ascii")


class ServiceRuntime:
    """Shared read-only state: cached grid, surrogate, scene defaults."""

    def __init__(self, grid, net=None, scene=None,
                 inference_config=InferenceConfig(), p_safe=0.05,
                 conflict_radius=0.15):
        if grid.cell_trajectories is None:
            raise ParameterError("service needs a cached grid")
        if net is not None and generation_tag(net) != grid.generation_tag:
            raise StaleCacheError(
                f"cache built by {grid.generation_tag}, surrogate is "
                f"{generation_tag(net)}")
        self.grid = grid
        self.net = net
        self.scene = scene if scene is not None else Scene()
        self.inference_config = inference_config
        self.p_safe = p_safe
        self.conflict_radius = conflict_radius


def build_runtime(weights_path, scene=None, inference_config=None,
                  p_safe=0.05, conflict_radius=0.15):
    net = load_weights(weights_path)
    grid = build_cache(default_grid(), SurrogateGenerator(net))
    return ServiceRuntime(grid, net=net, scene=scene,
                          inference_config=inference_config
                          or InferenceConfig(),
                          p_safe=p_safe, conflict_radius=conflict_radius)


def _number(msg, key):
    v = msg.get(key)
    if not isinstance(v, (int, float)) or isinstance(v, bool) \
            or not np.isfinite(v):
        raise ProtocolViolation("bad_message",
                                f"'{key}' must be a finite number")
    return float(v)


def _point(msg, key, dims):
    v = msg.get(key)
    if not isinstance(v, list) or len(v) != dims:
        raise ProtocolViolation("bad_message",
                                f"'{key}' must be a list of {dims} numbers")
    out = []
    for x in v:
        if not isinstance(x, (int, float)) or isinstance(x, bool) \
                or not np.isfinite(x):
            raise ProtocolViolation("bad_message",
                                    f"'{key}' must be finite numbers")
        out.append(float(x))
    return out


class Session:
    """Per-connection state machine; transport-agnostic."""

    def __init__(self, runtime):
        self.runtime = runtime
        self.grid = runtime.grid
        self.greeted = False
        self._set_scene(runtime.scene)
        self._clear()

    def _set_scene(self, scene):
        # the objects spec is rebuilt only here, so its density memo
        # stays warm across the per-message prior construction
        self.scene = scene
        self._objects_spec = priors.objects_prior(scene) \
            if scene.objects else None

    def _clear(self):
        self.hand_points = []
        self.last_hand_t = None
        self.gaze = priors.GazeBuffer(window=config.GAZE_WINDOW)

    def handle_line(self, line):
        """Replies for one raw message line. ProtocolViolation on bad
        input; the transport sends the error document and closes."""
        try:
            msg = json.loads(line)
        except ValueError as exc:
            raise ProtocolViolation("bad_json", str(exc)) from exc
        if not isinstance(msg, dict) or not isinstance(msg.get("type"),
                                                       str):
            raise ProtocolViolation("bad_message",
                                    "expected an object with a 'type'")
        return self.handle(msg)

    def handle(self, msg):
        mtype = msg["type"]
        if not self.greeted and mtype != "hello":
            raise ProtocolViolation("hello_required",
                                    "first message must be hello")
        if mtype == "hello":
            if msg.get("proto") != PROTO_VERSION:
                raise ProtocolViolation(
                    "proto_mismatch",
                    f"server speaks proto {PROTO_VERSION}")
            self.greeted = True
            g = self.grid
            return [{"type": "ready",
                     "grid": {"nx": g.nx, "ny": g.ny,
                              "origin": [float(g.origin[0]),
                                         float(g.origin[1])],
                              "cell_size": g.cell_size}}]
        if mtype == "scene":
            try:
                self._set_scene(scene_from_json(msg))
            except (ParameterError, KeyError, TypeError,
                    ValueError) as exc:
                raise ProtocolViolation("bad_scene", str(exc)) from exc
            return []
        if mtype == "hand":
            return self._on_hand(msg)
        if mtype == "gaze":
            return self._on_gaze(msg)
        if mtype == "reset":
            self._clear()
            return []
        raise ProtocolViolation("unknown_type", mtype)

    def _on_gaze(self, msg):
        t = _number(msg, "t")
        p = _point(msg, "p", 2)
        try:
            self.gaze.push(t, p)
        except ParameterError as exc:
            raise ProtocolViolation("non_monotone", str(exc)) from exc
        return []

    def _on_hand(self, msg):
        t = _number(msg, "t")
        p = _point(msg, "p", 3)
        if self.last_hand_t is not None and t <= self.last_hand_t:
            raise ProtocolViolation(
                "non_monotone",
                f"hand t {t} after {self.last_hand_t}")
        started = time.perf_counter()
        self.last_hand_t = t
        self.hand_points.append(p)
        horizon = self.grid.cell_trajectories.shape[1]
        if len(self.hand_points) > horizon:
            # the kernel only reads a trailing window, so older samples
            # can slide off once the cache horizon is reached
            self.hand_points = self.hand_points[-horizon:]
        posterior = self._posterior(t)
        replies = [{"type": "posterior", "t": t,
                    "weights_u8": encode_weights_u8(posterior.weights)}]
        probs, pick = {}, None
        if self.scene.objects:
            probs = decision_summary(posterior, self.scene,
                                     self.runtime.conflict_radius)
            pick = select_safe_object(self.scene.objects, probs,
                                      self.runtime.p_safe)
        latency_ms = (time.perf_counter() - started) * 1e3
        replies.append({
            "type": "decision",
            "object_probs": {str(i): probs[i] for i in sorted(probs)},
            "safe_object": None if pick is None else pick.id,
            "latency_ms": latency_ms,
        })
        return replies

    def _posterior(self, now):
        prior = priors.default_intent_prior(
            self.scene, self.gaze, now=now,
            objects_spec=self._objects_spec)
        if len(self.hand_points) < 2:
            vals = priors.evaluate(prior, self.grid.plane_centers())
            return PosteriorEstimate(weights=vals / float(vals.sum()),
                                     grid=self.grid)
        observed = Trajectory(points=np.array(self.hand_points),
                              dt=config.TRAJECTORY_DT)
        return _grid_posterior(self.grid, prior,
                               self.runtime.inference_config, observed,
                               len(self.hand_points) - 1)


def _error_doc(violation):
    return {"type": "error", "code": violation.code,
            "detail": violation.detail}


def _encode(doc):
    return json.dumps(doc, separators=(",", ":")).encode() + b"\n"


async def _tcp_loop(session, reader, writer):
    try:
        while True:
            line = await reader.readline()
            if not line:
                break
            if not line.strip():
                continue
            try:
                replies = session.handle_line(line)
            except ProtocolViolation as violation:
                writer.write(_encode(_error_doc(violation)))
                await writer.drain()
                break
            except ReachIntentError as exc:
                writer.write(_encode(_error_doc(
                    ProtocolViolation("internal", str(exc)))))
                await writer.drain()
                break
            for doc in replies:
                writer.write(_encode(doc))
            await writer.drain()
    except (ConnectionResetError, BrokenPipeError):
        pass
    finally:
        writer.close()
        try:
            await writer.wait_closed()
        except (ConnectionResetError, BrokenPipeError):
            pass


async def start_tcp(runtime, host="127.0.0.1", port=0):
    """Listening asyncio server; port 0 picks a free one."""

    async def on_connect(reader, writer):
        await _tcp_loop(Session(runtime), reader, writer)

    return await asyncio.start_server(on_connect, host, port)


async def _ws_loop(session, ws):
    import websockets

    try:
        async for raw in ws:
            if isinstance(raw, (bytes, bytearray)):
                raw = raw.decode("utf-8", "replace")
            if not raw.strip():
                continue
            try:
                replies = session.handle_line(raw)
            except ProtocolViolation as violation:
                await ws.send(json.dumps(_error_doc(violation)))
                await ws.close()
                return
            except ReachIntentError as exc:
                await ws.send(json.dumps(_error_doc(
                    ProtocolViolation("internal", str(exc)))))
                await ws.close()
                return
            for doc in replies:
                await ws.send(json.dumps(doc, separators=(",", ":")))
    except websockets.exceptions.ConnectionClosed:
        pass


async def start_ws(runtime, host="127.0.0.1", port=0):
    """WebSocket endpoint speaking the same messages, for browsers."""
    try:
        from websockets.asyncio.server import serve as ws_serve
    except ImportError as exc:
        raise ParameterError(
            "the websocket endpoint needs the optional 'websockets' "
            "package; install reachintent[ws]") from exc

    async def on_connect(ws):
        await _ws_loop(Session(runtime), ws)

    return await ws_serve(on_connect, host, port)


async def _serve_async(runtime, host, port, ws_port):
    server = await start_tcp(runtime, host, port)
    bound = server.sockets[0].getsockname()[1]
    print(f"session service on {host}:{bound}", flush=True)
    ws_server = None
    if ws_port is not None:
        ws_server = await start_ws(runtime, host, ws_port)
        ws_bound = next(iter(ws_server.sockets)).getsockname()[1]
        print(f"websocket endpoint on {host}:{ws_bound}", flush=True)
    try:
        async with server:
            await server.serve_forever()
    finally:
        if ws_server is not None:
            ws_server.close()


def run_service(runtime, host="127.0.0.1", port=8734, ws_port=None):
    """Blocking entry point; returns on interrupt."""
    try:
        asyncio.run(_serve_async(runtime, host, port, ws_port))
    except KeyboardInterrupt:
        pass
    return 0
