"""Priors over reaching intent on the table plane.

Three cue-specific priors (proximity to the human, gaze, detected
objects) and their weighted mixture. Every prior is a PriorSpec: a
variant tag plus variant-specific parameters, supporting density
evaluation, seeded sampling, and JSON round-trips.

Coordinates are 2-D table-plane positions in meters; densities are
1/m^2.
"""

import weakref
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import config
from .errors import InsufficientDataError, ParameterError

GAZE_COV_REGULARIZER = 1e-4  # m^2; keeps a steady gaze SPD


def _as_spd(mat, name):
    mat = np.asarray(mat, dtype=float)
    if mat.shape != (2, 2):
        raise ParameterError(f"{name} must be 2x2")
    if not np.allclose(mat, mat.T, atol=1e-12):
        raise ParameterError(f"{name} must be symmetric")
    if np.any(np.linalg.eigvalsh(mat) <= 0):
        raise ParameterError(f"{name} must be positive-definite")
    return mat


@dataclass(frozen=True, eq=False)
class PriorSpec:
    """Tagged prior: variant in {proximity, gaze, objects, mixture} with
    variant-specific `components`."""

    variant: str
    components: dict

    def __post_init__(self):
        if self.variant not in ("proximity", "gaze", "objects", "mixture"):
            raise ParameterError(f"unknown prior variant '{self.variant}'")


def _gaussian_spec(variant, mean, cov):
    mean = np.asarray(mean, dtype=float).reshape(2)
    cov = _as_spd(cov, "covariance")
    chol = np.linalg.cholesky(cov)
    inv = np.linalg.inv(cov)
    norm = 1.0 / (2.0 * np.pi * np.sqrt(np.linalg.det(cov)))
    for a in (mean, cov, chol, inv):
        a.setflags(write=False)
    return PriorSpec(variant, {
        "mean": mean, "cov": cov, "_chol": chol, "_inv": inv, "_norm": norm,
    })


def proximity_prior(human_origin=config.PROXIMITY_ORIGIN,
                    scale=None):
    """Gaussian centered on the human's table-edge position.

    Default covariance is 0.1 * I m^2: broad, favoring the near half of
    the table.
    """
    if scale is None:
        scale = config.PROXIMITY_VARIANCE * np.eye(2)
    return _gaussian_spec("proximity", human_origin, scale)


class GazeBuffer:
    """Ring buffer of timestamped gaze/table intersection points.

    Single writer; timestamps must be strictly increasing. Entries older
    than `window` seconds behind the newest are evicted on push.
    """

    def __init__(self, window=config.GAZE_WINDOW):
        if not window > 0:
            raise ParameterError("window must be positive")
        self.window = window
        self._entries = deque()

    def push(self, time, intersection):
        time = float(time)
        if self._entries and time <= self._entries[-1][0]:
            raise ParameterError("gaze timestamps must be strictly increasing")
        point = (float(intersection[0]), float(intersection[1]))
        self._entries.append((time, point))
        cutoff = time - self.window
        while self._entries[0][0] < cutoff:
            self._entries.popleft()

    def window_points(self, now):
        """Intersections with timestamp in [now - window, now]."""
        lo = now - self.window
        return [p for t, p in self._entries if lo <= t <= now]

    def __len__(self):
        return len(self._entries)


def gaze_prior(buffer, now, cov_gain=1.0):
    """Gaussian at the windowed mean gaze intersection.

    Covariance is cov_gain * (unbiased sample covariance) plus a small
    regularizer so a perfectly steady gaze stays SPD. Fewer than 2
    in-window points raise InsufficientDataError; callers fall back to
    the other priors.
    """
    pts = np.array(buffer.window_points(now), dtype=float)
    if len(pts) < 2:
        raise InsufficientDataError(
            f"{len(pts)} gaze points in window; need >= 2")
    mean = pts.mean(axis=0)
    cov = cov_gain * np.cov(pts.T, ddof=1) + GAZE_COV_REGULARIZER * np.eye(2)
    return _gaussian_spec("gaze", mean, cov)


def objects_prior(scene, perception_sigma=config.OBJECT_POSE_SIGMA):
    """Mixture with one mode per detected object.

    Component scale grows with object extent plus the perception noise
    floor; weights follow detection confidence.
    """
    if not scene.objects:
        raise InsufficientDataError("scene has no objects")
    means = np.array([[o.position[0], o.position[1]] for o in scene.objects])
    var = np.array([(o.extent / 2.0) ** 2 + perception_sigma ** 2
                    for o in scene.objects])
    covs = var[:, None, None] * np.eye(2)[None, :, :]
    weights = np.array([o.confidence for o in scene.objects], dtype=float)
    if not np.all(weights >= 0) or weights.sum() <= 0:
        raise ParameterError("confidences must be >= 0 with a positive sum")
    weights = weights / weights.sum()
    chols = np.sqrt(var)
    norms = 1.0 / (2.0 * np.pi * var)
    for a in (means, covs, weights, chols, norms):
        a.setflags(write=False)
    return PriorSpec("objects", {
        "means": means, "covs": covs, "weights": weights,
        "_scales": chols, "_norms": norms, "_vars": var,
    })


def mixture(children, weights):
    """Weighted mixture of priors; weights are normalized to sum 1."""
    children = tuple(children)
    weights = np.asarray(weights, dtype=float)
    if len(children) != len(weights):
        raise ParameterError("children and weights must have equal length")
    if len(children) == 0:
        raise ParameterError("mixture needs at least one child")
    if np.any(weights < 0) or weights.sum() <= 0:
        raise ParameterError("weights must be >= 0 with a positive sum")
    weights = weights / weights.sum()
    weights.setflags(write=False)
    return PriorSpec("mixture", {"children": children, "weights": weights})


def _gaussian_density(mean, inv, norm, z):
    d = z - mean
    q = (d @ inv * d).sum(axis=-1)
    return norm * np.exp(-0.5 * q)


def evaluate(prior, z):
    """Density at `z`; accepts a single 2-vector or an (N, 2) array.

    Evaluation at a read-only point array is memoized per spec (one
    slot, identity-keyed), so per-step inference over a fixed cell grid
    pays for the density once. The memoized result is returned
    read-only.
    """
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    pts = z if z.ndim == 2 else z.reshape(-1, 2)
    # only memoize arrays that provably cannot change underneath us
    memoable = (pts is z and not z.flags.writeable
                and (z.base is None or not z.base.flags.writeable))
    if memoable:
        memo = prior.components.get("_memo")
        if memo is not None and memo[0]() is z:
            return memo[1]
    c = prior.components
    if prior.variant in ("proximity", "gaze"):
        out = _gaussian_density(c["mean"], c["_inv"], c["_norm"], pts)
    elif prior.variant == "objects":
        # ||p - m||^2 expanded so the cross term is one matmul and the
        # exponential runs once over (N, K); this sits on the per-step
        # inference path where a per-component loop is measurable
        means = c["means"]
        q = ((pts * pts).sum(axis=1)[:, None]
             - 2.0 * pts @ means.T
             + (means * means).sum(axis=1)[None, :]) / c["_vars"][None, :]
        # expansion can dip a hair below zero right at a component mean
        np.maximum(q, 0.0, out=q)
        out = np.exp(-0.5 * q) @ (c["weights"] * c["_norms"])
    elif prior.variant == "mixture":
        out = np.zeros(len(pts))
        for w, child in zip(c["weights"], c["children"]):
            out += w * evaluate(child, pts)
    else:  # pragma: no cover - guarded in __post_init__
        raise ParameterError(prior.variant)
    if single:
        return float(out[0])
    if memoable:
        out.setflags(write=False)
        prior.components["_memo"] = (weakref.ref(z), out)
    return out


def sample(prior, rng, size=None):
    """Draw from the prior; deterministic for a fixed seed.

    `rng` is an int seed or a numpy Generator. Returns a 2-vector, or
    (size, 2) when size is given.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    n = 1 if size is None else int(size)
    out = _sample_n(prior, rng, n)
    return out[0] if size is None else out


def _sample_n(prior, rng, n):
    c = prior.components
    if prior.variant in ("proximity", "gaze"):
        normals = rng.standard_normal((n, 2))
        return c["mean"] + normals @ c["_chol"].T
    if prior.variant == "objects":
        idx = rng.choice(len(c["weights"]), size=n, p=c["weights"])
        normals = rng.standard_normal((n, 2))
        return c["means"][idx] + normals * c["_scales"][idx, None]
    # mixture: pick a child per draw, then sample children in order,
    # scattering results back to their draw positions
    idx = rng.choice(len(c["weights"]), size=n, p=c["weights"])
    out = np.empty((n, 2))
    for k, child in enumerate(c["children"]):
        mask = idx == k
        cnt = int(mask.sum())
        if cnt:
            out[mask] = _sample_n(child, rng, cnt)
    return out


def spec_to_json(prior):
    c = prior.components
    if prior.variant in ("proximity", "gaze"):
        return {"variant": prior.variant, "mean": c["mean"].tolist(),
                "cov": c["cov"].tolist()}
    if prior.variant == "objects":
        return {"variant": "objects", "means": c["means"].tolist(),
                "covs": c["covs"].tolist(), "weights": c["weights"].tolist()}
    return {"variant": "mixture",
            "weights": c["weights"].tolist(),
            "children": [spec_to_json(ch) for ch in c["children"]]}


def spec_from_json(doc):
    variant = doc["variant"]
    if variant in ("proximity", "gaze"):
        return _gaussian_spec(variant, doc["mean"], doc["cov"])
    if variant == "objects":
        means = np.asarray(doc["means"], dtype=float)
        covs = np.asarray(doc["covs"], dtype=float)
        weights = np.asarray(doc["weights"], dtype=float)
        if not (len(means) == len(covs) == len(weights)) or len(means) == 0:
            raise ParameterError("objects prior arrays must align, non-empty")
        var = covs[:, 0, 0]
        for k in range(len(covs)):
            _as_spd(covs[k], f"component {k} covariance")
            if not np.allclose(covs[k], var[k] * np.eye(2), atol=1e-12):
                raise ParameterError("object components must be isotropic")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise ParameterError("weights must be >= 0 and sum to 1")
        chols = np.sqrt(var)
        norms = 1.0 / (2.0 * np.pi * var)
        for a in (means, covs, weights, chols, norms):
            a.setflags(write=False)
        return PriorSpec("objects", {
            "means": means, "covs": covs, "weights": weights,
            "_scales": chols, "_norms": norms, "_vars": var,
        })
    if variant == "mixture":
        children = tuple(spec_from_json(ch) for ch in doc["children"])
        return mixture(children, doc["weights"])
    raise ParameterError(f"unknown prior variant '{variant}'")


def default_intent_prior(scene, gaze_buffer=None, now=None,
                         weights=(config.PRIOR_WEIGHT_PROXIMITY,
                                  config.PRIOR_WEIGHT_GAZE,
                                  config.PRIOR_WEIGHT_OBJECTS),
                         objects_spec=None):
    """The standard combined prior: proximity + gaze + objects.

    Cues that are unavailable (no gaze data yet, empty scene) drop out
    and the remaining weights renormalize. Callers that hold the scene
    fixed across many calls can pass a prebuilt `objects_spec` to keep
    its density memo warm.
    """
    children = [proximity_prior()]
    kept = [weights[0]]
    if gaze_buffer is not None and now is not None:
        try:
            children.append(gaze_prior(gaze_buffer, now))
            kept.append(weights[1])
        except InsufficientDataError:
            pass
    try:
        children.append(objects_spec if objects_spec is not None
                        else objects_prior(scene))
        kept.append(weights[2])
    except InsufficientDataError:
        pass
    return mixture(children, kept)
