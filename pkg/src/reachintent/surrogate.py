"""Neural surrogate of the trajectory generator.

A small fully connected net (3 -> 32 -> 64 -> 270, rectifier hidden
activations, linear output) maps a target position to a 90-point hand
trajectory. Everything is in this file: dataset building, the affine
layer forward/backward, seeded minibatch training, batch inference, and
the self-describing weights file.

Inference parameters are float32; training runs in float64 and casts
once at the end. Inputs are normalized to the workspace unit box,
outputs are raw meters; the normalization box travels with the weights.
"""

import base64
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import config
from .errors import DataFormatError, ModelError, TrainingError
from .generator import ControllerGains, Trajectory, batch_generate
from .trajio import TrajectoryDataset

LAYER_SHAPES = ((3, 32), (32, 64), (64, 270))
OUTPUT_POINTS = config.TRAJECTORY_POINTS

ISUR_MAGIC = "ISUR"
ISUR_VERSION = 1

# Input normalization box; z spans an arbitrary unit so table-plane
# targets (z = 0) map to 0 without dividing by zero.
NORM_LO = (config.WORKSPACE_X[0], config.WORKSPACE_Y[0], 0.0)
NORM_HI = (config.WORKSPACE_X[1], config.WORKSPACE_Y[1], 1.0)


class SurrogateNet:
    """Immutable trained net: per-layer float32 weights and biases."""

    def __init__(self, weights, biases, norm_lo=NORM_LO, norm_hi=NORM_HI,
                 seed=None):
        weights = [np.ascontiguousarray(w, dtype=np.float32)
                   for w in weights]
        biases = [np.ascontiguousarray(b, dtype=np.float32) for b in biases]
        if len(weights) != len(LAYER_SHAPES) or len(biases) != len(weights):
            raise ModelError("expected 3 affine layers")
        for w, b, shape in zip(weights, biases, LAYER_SHAPES):
            if w.shape != shape or b.shape != (shape[1],):
                raise ModelError(
                    f"layer shape {w.shape}/{b.shape} != {shape}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ModelError("non-finite parameters; model is corrupt")
        self.weights = weights
        self.biases = biases
        self.norm_lo = np.asarray(norm_lo, dtype=np.float32)
        self.norm_hi = np.asarray(norm_hi, dtype=np.float32)
        if np.any(self.norm_hi <= self.norm_lo):
            raise ModelError("normalization box must have positive extent")
        self.seed = seed
        for a in (*self.weights, *self.biases, self.norm_lo, self.norm_hi):
            a.setflags(write=False)

    def param_blob(self):
        """Little-endian row-major concatenation of all parameters."""
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(np.ascontiguousarray(w, dtype="<f4").tobytes())
            parts.append(np.ascontiguousarray(b, dtype="<f4").tobytes())
        return b"".join(parts)


def weights_hash(net):
    return hashlib.sha256(net.param_blob()).hexdigest()


def generation_tag(net):
    """Identity of this net for cache consistency checks."""
    return "surrogate:" + weights_hash(net)[:16]


def batch_forward_array(net, targets):
    """Raw (k, 90, 3) float32 trajectories for (k, 3) targets.

    The grid cache path; float32 BLAS throughout.
    """
    x = np.ascontiguousarray(targets, dtype=np.float32)
    if x.ndim != 2 or x.shape[1] != 3:
        raise ModelError("targets must be (k, 3)")
    if not np.all(np.isfinite(x)):
        raise ModelError("targets must be finite")
    h = (x - net.norm_lo) / (net.norm_hi - net.norm_lo)
    h = np.maximum(h @ net.weights[0] + net.biases[0], np.float32(0.0))
    h = np.maximum(h @ net.weights[1] + net.biases[1], np.float32(0.0))
    out = h @ net.weights[2] + net.biases[2]
    return out.reshape(len(x), OUTPUT_POINTS, 3)


def forward(net, target):
    """One target -> one 90-point Trajectory."""
    pts = batch_forward_array(net, np.asarray(target, dtype=np.float32)
                              .reshape(1, 3))[0]
    return Trajectory(points=pts, dt=config.TRAJECTORY_DT, t0=0.0)


def batch_forward(net, targets):
    """Vectorized forward returning a list of Trajectory.

    Fused BLAS matmuls may round differently from the k=1 path; outputs
    agree with per-target `forward` within 1e-6 m.
    """
    pts = batch_forward_array(net, targets)
    return [Trajectory(points=p, dt=config.TRAJECTORY_DT, t0=0.0)
            for p in pts]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    batch_size: int = 64
    learning_rate: float = 1e-2
    momentum: float = 0.9
    seed: int = 0


@dataclass(frozen=True)
class TrainReport:
    epochs: int
    train_loss: float
    test_loss: float
    test_mean_point_error: float
    seed: int
    split: tuple = (0.8, 0.2)


def _init_params(shapes, rng):
    """He-normal weights, zero biases, float64."""
    params = []
    for n_in, n_out in shapes:
        w = rng.standard_normal((n_in, n_out)) * np.sqrt(2.0 / n_in)
        params.append([w, np.zeros(n_out)])
    return params


def _forward_cached(params, x):
    """All layer inputs plus output; rectifier on all but the last."""
    acts = [x]
    h = x
    last = len(params) - 1
    for i, (w, b) in enumerate(params):
        h = h @ w + b
        if i != last:
            h = np.maximum(h, 0.0)
        acts.append(h)
    return acts


def _backward(params, acts, grad_out):
    """Gradients of each layer's (W, b) given dLoss/d(output)."""
    grads = [None] * len(params)
    g = grad_out
    for i in range(len(params) - 1, -1, -1):
        w, _ = params[i]
        if i != len(params) - 1:
            g = g * (acts[i + 1] > 0.0)
        grads[i] = (acts[i].T @ g, g.sum(axis=0))
        if i > 0:
            g = g @ w.T
    return grads


def _loss_and_grad(params, x, y):
    """Mean squared point distance (m^2 per point) and its param grads."""
    acts = _forward_cached(params, x)
    diff = acts[-1] - y
    n_points = y.shape[1] // 3
    loss = float((diff * diff).sum() / (len(x) * n_points))
    grad_out = 2.0 * diff / (len(x) * n_points)
    return loss, _backward(params, acts, grad_out)


def _normalize_targets(targets, lo=NORM_LO, hi=NORM_HI):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    return (np.asarray(targets, dtype=float) - lo) / (hi - lo)


def _point_errors(pred_flat, true_flat):
    """Per-sample mean Euclidean point error, meters."""
    diff = (pred_flat - true_flat).reshape(len(pred_flat), -1, 3)
    return np.sqrt((diff * diff).sum(axis=2)).mean(axis=1)


def train(dataset, train_config=TrainConfig()):
    """Fit the surrogate to a generated dataset.

    Deterministic for a fixed config: seeded init, seeded split, seeded
    epoch shuffles. Raises TrainingError if the loss leaves the finite
    world, with the epoch where it happened.
    """
    if len(dataset) < 1000:
        raise TrainingError(
            f"dataset has {len(dataset)} records; need >= 1000")
    rng = np.random.default_rng(train_config.seed)
    x_all = _normalize_targets(dataset.targets)
    y_all = np.asarray(dataset.points, dtype=float).reshape(len(dataset), -1)

    order = rng.permutation(len(dataset))
    n_train = int(round(0.8 * len(dataset)))
    tr, te = order[:n_train], order[n_train:]
    x_tr, y_tr = x_all[tr], y_all[tr]
    x_te, y_te = x_all[te], y_all[te]

    params = _init_params(LAYER_SHAPES, rng)
    velocity = [[np.zeros_like(w), np.zeros_like(b)] for w, b in params]
    lr = train_config.learning_rate
    mu = train_config.momentum
    bs = train_config.batch_size

    train_loss = np.inf
    for epoch in range(train_config.epochs):
        perm = rng.permutation(n_train)
        total = 0.0
        for s in range(0, n_train, bs):
            idx = perm[s:s + bs]
            loss, grads = _loss_and_grad(params, x_tr[idx], y_tr[idx])
            if not np.isfinite(loss):
                raise TrainingError(f"loss diverged at epoch {epoch}")
            total += loss * len(idx)
            for p, v, g in zip(params, velocity, grads):
                v[0] *= mu
                v[0] -= lr * g[0]
                v[1] *= mu
                v[1] -= lr * g[1]
                p[0] += v[0]
                p[1] += v[1]
        train_loss = total / n_train

    test_pred = _forward_cached(params, x_te)[-1]
    diff = test_pred - y_te
    n_points = y_te.shape[1] // 3
    test_loss = float((diff * diff).sum() / (len(x_te) * n_points))
    test_err = float(_point_errors(test_pred, y_te).mean())

    net = SurrogateNet([p[0] for p in params], [p[1] for p in params],
                       seed=train_config.seed)
    report = TrainReport(epochs=train_config.epochs,
                         train_loss=float(train_loss),
                         test_loss=test_loss,
                         test_mean_point_error=test_err,
                         seed=train_config.seed)
    return net, report


def build_dataset(model, gains, scene, start_theta, n, seed,
                  x_range=config.WORKSPACE_X, y_range=config.WORKSPACE_Y):
    """Generate n reaching trajectories to uniform table targets."""
    rng = np.random.default_rng(seed)
    targets = np.column_stack([
        rng.uniform(x_range[0], x_range[1], n),
        rng.uniform(y_range[0], y_range[1], n),
        np.zeros(n),
    ])
    trajectories = batch_generate(model, gains, scene, start_theta, targets)
    points = np.stack([t.points for t in trajectories])
    meta = {
        "seed": int(seed),
        "start_theta": [float(v) for v in start_theta],
        "gains": {
            "k_p": gains.k_p, "k_i": gains.k_i, "k_d": gains.k_d,
            "k_rep": gains.k_rep, "dt": gains.dt, "horizon": gains.horizon,
            "substeps": gains.substeps,
        },
        "model": model.to_json(),
        "obstacles": [list(o) for o in scene.obstacles],
    }
    return TrajectoryDataset(targets=targets, points=points,
                             dt=gains.dt, meta=meta)


def _b64(arr):
    return base64.b64encode(
        np.ascontiguousarray(arr, dtype="<f4").tobytes()).decode("ascii")


def _unb64(blob, shape, what):
    raw = base64.b64decode(blob.encode("ascii"))
    expect = 4 * int(np.prod(shape))
    if len(raw) != expect:
        raise DataFormatError(
            f"{what}: expected {expect} bytes, got {len(raw)}")
    return np.frombuffer(raw, dtype="<f4").reshape(shape)


def save_weights(net, path):
    doc = {
        "magic": ISUR_MAGIC,
        "version": ISUR_VERSION,
        "shapes": [list(s) for s in LAYER_SHAPES],
        "normalization": {"lo": net.norm_lo.tolist(),
                          "hi": net.norm_hi.tolist()},
        "seed": net.seed,
        "sha256": weights_hash(net),
        "layers": [{"W": _b64(w), "b": _b64(b)}
                   for w, b in zip(net.weights, net.biases)],
    }
    Path(path).write_text(json.dumps(doc))
    return Path(path)


def load_weights(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: not a weights file ({exc})") from None
    if doc.get("magic") != ISUR_MAGIC:
        raise DataFormatError(f"{path}: bad magic {doc.get('magic')!r}")
    if doc.get("version") != ISUR_VERSION:
        raise DataFormatError(
            f"{path}: unsupported version {doc.get('version')}")
    if [tuple(s) for s in doc["shapes"]] != list(LAYER_SHAPES):
        raise DataFormatError(f"{path}: shape mismatch {doc['shapes']}")
    weights = []
    biases = []
    for i, layer in enumerate(doc["layers"]):
        shape = LAYER_SHAPES[i]
        weights.append(_unb64(layer["W"], shape, f"{path} layer {i} W"))
        biases.append(_unb64(layer["b"], (shape[1],), f"{path} layer {i} b"))
    net = SurrogateNet(weights, biases,
                       norm_lo=doc["normalization"]["lo"],
                       norm_hi=doc["normalization"]["hi"],
                       seed=doc.get("seed"))
    if weights_hash(net) != doc["sha256"]:
        raise DataFormatError(f"{path}: parameter checksum mismatch")
    return net
