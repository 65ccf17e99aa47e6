"""Intent inference over hand trajectories.

Two routes to the same question (where is this reach going?):

* `abc_reject`: classic rejection sampling. Draw z from the prior, run
  the generator, keep z when the similarity to the observation is below
  a threshold. Exact but slow; the reference implementation.
* `grid_posterior`: the interactive route. The workspace is discretized
  into 130 x 70 = 9,100 one-centimeter cells, one candidate trajectory
  is cached per cell, and each new observed point re-weights all cells
  in a single vectorized pass.

Both routes share `InferenceConfig`. The grid path weights cell i by
pi(z_i) * K(L_i) with K either a hard indicator 1[L < epsilon] or the
soft kernel exp(-L / (2 epsilon^2)); with the soft kernel, epsilon
plays the role of a bandwidth (0.05 default) rather than the indicator
threshold (0.02 m^2 is the tuned value there).
"""

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import config, priors
from .errors import (DataFormatError, ParameterError, StaleCacheError,
                     TaskError)
from .generator import simulate_reach
from .similarity import Window, windowed_mse_many
from .surrogate import SurrogateNet, batch_forward_array, generation_tag

KERNELS = ("indicator", "gaussian")

IPOS_MAGIC = b"IPOS"
IPOS_VERSION = 1
_IPOS_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True)
class InferenceConfig:
    """Shared knobs for both inference routes.

    epsilon is the indicator threshold (m^2) or, with the gaussian
    kernel, the bandwidth of exp(-L / (2 epsilon^2)).
    """

    epsilon: float = config.KERNEL_BANDWIDTH
    kernel: str = "gaussian"
    window: Window = Window()
    n_samples: int = 1000
    max_draws: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise ParameterError("epsilon must be positive")
        if self.kernel not in KERNELS:
            raise ParameterError(
                f"kernel must be one of {KERNELS}, got {self.kernel!r}")
        if self.n_samples < 1:
            raise ParameterError("n_samples must be >= 1")
        if self.max_draws < self.n_samples:
            raise ParameterError("max_draws must be >= n_samples")


@dataclass(frozen=True)
class AbcResult:
    """Accepted samples plus bookkeeping from the rejection loop."""

    samples: np.ndarray
    n_draws: int
    starved: bool

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self):
        return len(self.samples)

    @property
    def acceptance_rate(self):
        return len(self.samples) / self.n_draws if self.n_draws else 0.0


def abc_reject(prior, generator, similarity, inference_config, observed):
    """Rejection sampler: keep z whenever similarity(observed, x) < eps.

    `prior` is a PriorSpec or a callable rng -> z. `generator` maps z to
    whatever `similarity(observed, generated)` accepts; any stochastic
    part lives inside the generator closure. The loop stops after
    n_samples acceptances or max_draws attempts; in the second case the
    result is partial and flagged starved (epsilon too small, or the
    prior too broad for the observation).
    """
    cfg = inference_config
    rng = np.random.default_rng(cfg.seed)
    draw = prior if callable(prior) else (
        lambda r: priors.sample(prior, r))
    accepted = []
    n_draws = 0
    while len(accepted) < cfg.n_samples and n_draws < cfg.max_draws:
        z = draw(rng)
        n_draws += 1
        value = float(similarity(observed, generator(z)))
        if value < cfg.epsilon:
            accepted.append(z)
    return AbcResult(samples=np.asarray(accepted, dtype=float),
                     n_draws=n_draws,
                     starved=len(accepted) < cfg.n_samples)


@dataclass(frozen=True)
class InferenceGrid:
    """Regular cell grid over the table with an optional trajectory cache.

    Cells are indexed row-major: index = iy * nx + ix, center of cell
    (ix, iy) at origin + ((ix + 0.5) c, (iy + 0.5) c). The cache, when
    present, is a float32 (nx * ny, points, 3) array generated by the
    generator identified by generation_tag.
    """

    origin: tuple = (config.WORKSPACE_X[0], config.WORKSPACE_Y[0])
    cell_size: float = config.GRID_CELL_SIZE
    nx: int = config.GRID_NX
    ny: int = config.GRID_NY
    cell_trajectories: np.ndarray = None
    generation_tag: str = None

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1 or self.cell_size <= 0.0:
            raise ParameterError("grid must have positive size")
        if self.cell_trajectories is not None:
            cache = np.ascontiguousarray(self.cell_trajectories,
                                         dtype=np.float32)
            if cache.ndim != 3 or cache.shape[0] != self.n_cells \
                    or cache.shape[2] != 3:
                raise ParameterError(
                    f"cache shape {cache.shape} does not cover "
                    f"{self.n_cells} cells")
            if self.generation_tag is None:
                raise ParameterError("cached grid requires generation_tag")
            cache.setflags(write=False)
            object.__setattr__(self, "cell_trajectories", cache)

    @property
    def n_cells(self):
        return self.nx * self.ny

    def cell_centers(self):
        """(n_cells, 3) centers on the table plane, row-major.

        Computed once and memoized read-only; callers on the per-step
        inference path ask for this every call.
        """
        cached = self.__dict__.get("_centers")
        if cached is not None:
            return cached
        ox, oy = self.origin
        c = self.cell_size
        xs = ox + (np.arange(self.nx) + 0.5) * c
        ys = oy + (np.arange(self.ny) + 0.5) * c
        gx, gy = np.meshgrid(xs, ys)
        out = np.column_stack([gx.ravel(), gy.ravel(),
                               np.zeros(self.n_cells)])
        out.setflags(write=False)
        object.__setattr__(self, "_centers", out)
        return out

    def plane_centers(self):
        """(n_cells, 2) table-plane centers, memoized read-only.

        A stable array object, so prior densities evaluated over it can
        be memoized by identity.
        """
        cached = self.__dict__.get("_centers_plane")
        if cached is not None:
            return cached
        out = np.ascontiguousarray(self.cell_centers()[:, :2])
        out.setflags(write=False)
        object.__setattr__(self, "_centers_plane", out)
        return out

    def cell_center(self, index):
        ix, iy = index % self.nx, index // self.nx
        ox, oy = self.origin
        return np.array([ox + (ix + 0.5) * self.cell_size,
                         oy + (iy + 0.5) * self.cell_size, 0.0])

    def cell_of(self, point):
        """Linear index of the cell containing an (x, y[, z]) point."""
        ox, oy = self.origin
        ix = int(np.floor((point[0] - ox) / self.cell_size))
        iy = int(np.floor((point[1] - oy) / self.cell_size))
        if not (0 <= ix < self.nx and 0 <= iy < self.ny):
            raise ParameterError(f"point {tuple(point)} outside the grid")
        return iy * self.nx + ix

    def chebyshev(self, i, j):
        """Cell distance in cells: max of |dx|, |dy|."""
        return max(abs(i % self.nx - j % self.nx),
                   abs(i // self.nx - j // self.nx))


def default_grid():
    return InferenceGrid()


class SimulatorGenerator:
    """Per-cell trajectory source backed by the physical simulator."""

    def __init__(self, model, gains, scene, start_theta):
        self.model = model
        self.gains = gains
        self.scene = scene
        self.start_theta = np.asarray(start_theta, dtype=float)
        ident = json.dumps({
            "model": model.to_json(),
            "gains": [gains.k_p, gains.k_i, gains.k_d, gains.k_rep,
                      gains.dt, gains.horizon, gains.substeps,
                      gains.repulsion_cutoff, gains.damping,
                      gains.integral_clamp],
            "start": self.start_theta.tolist(),
            "obstacles": [list(o) for o in scene.obstacles],
        }, sort_keys=True)
        digest = hashlib.sha256(ident.encode()).hexdigest()
        self.tag = "simulator:" + digest[:16]

    def batch_points(self, targets):
        out = np.empty((len(targets), self.gains.horizon, 3),
                       dtype=np.float32)
        for i, target in enumerate(targets):
            try:
                pts, _ = simulate_reach(self.model, self.gains, self.scene,
                                        self.start_theta, target)
            except Exception as exc:
                raise type(exc)(f"cell {i}: {exc}") from exc
            out[i] = pts
        return out


class SurrogateGenerator:
    """Per-cell trajectory source backed by the trained net."""

    def __init__(self, net):
        if not isinstance(net, SurrogateNet):
            raise ParameterError("expected a SurrogateNet")
        self.net = net
        self.tag = generation_tag(net)

    def batch_points(self, targets):
        return batch_forward_array(self.net, targets)


def build_cache(grid, generator):
    """Return a grid with one generated trajectory per cell.

    Deterministic, so rebuilding with the same generator is
    bit-identical. A grid already cached under this generator's tag is
    returned unchanged.
    """
    if grid.cell_trajectories is not None \
            and grid.generation_tag == generator.tag:
        return grid
    cache = generator.batch_points(grid.cell_centers())
    return InferenceGrid(origin=grid.origin, cell_size=grid.cell_size,
                         nx=grid.nx, ny=grid.ny,
                         cell_trajectories=cache,
                         generation_tag=generator.tag)


@dataclass(frozen=True)
class PosteriorEstimate:
    """Normalized cell weights with the grid geometry they live on."""

    weights: np.ndarray
    grid: InferenceGrid
    degenerate: bool = False

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.grid.n_cells,):
            raise ParameterError(
                f"weights shape {w.shape} != ({self.grid.n_cells},)")
        if np.any(w < 0.0):
            raise ParameterError("weights must be non-negative")
        if abs(float(w.sum()) - 1.0) > 1e-9:
            raise ParameterError("weights must sum to 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def map_cell(self):
        # argmax takes the lowest index on ties
        return int(np.argmax(self.weights))

    @property
    def map_point(self):
        return self.grid.cell_center(self.map_cell)

    @property
    def n_effective(self):
        return float(1.0 / np.sum(self.weights * self.weights))

    def credible_mass_at(self, cells):
        cells = np.asarray(cells, dtype=int)
        return float(self.weights[cells].sum())

    def entropy(self):
        w = self.weights[self.weights > 0.0]
        return float(-(w * np.log(w)).sum())


def grid_posterior(grid, prior, inference_config, observed, t_index,
                   generator=None):
    """Posterior over grid cells after observing points up to t_index.

    Uses the grid's cache when present; `generator` is then only
    consulted for identity and must carry the tag the cache was built
    under (otherwise the cache is stale and the caller has to rebuild).
    Without a cache, a generator is required and every call generates
    all cells, which gives identical weights at simulator speed.

    `prior` is a PriorSpec, or a callable mapping an (N, 2) array of
    cell centers to N unnormalized densities.

    All-zero weights (observation unlike every candidate under an
    indicator kernel, typically) fall back to the prior restricted to
    the grid, flagged `degenerate`.
    """
    cfg = inference_config
    if grid.cell_trajectories is not None:
        if generator is not None and generator.tag != grid.generation_tag:
            raise StaleCacheError(
                f"cache built by {grid.generation_tag}, generator is "
                f"{generator.tag}; rebuild the cache")
        batch = grid.cell_trajectories
    else:
        if generator is None:
            raise ParameterError("uncached grid needs a generator")
        batch = generator.batch_points(grid.cell_centers())

    values, _ = windowed_mse_many(observed, batch, t_index, cfg.window)
    centers = grid.plane_centers()
    if callable(prior):
        prior_vals = np.asarray(prior(centers), dtype=float)
    else:
        prior_vals = priors.evaluate(prior, centers)

    if cfg.kernel == "indicator":
        kernel_vals = (values < cfg.epsilon).astype(float)
    else:
        kernel_vals = np.exp(-values / (2.0 * cfg.epsilon * cfg.epsilon))

    weights = prior_vals * kernel_vals
    total = float(weights.sum())
    if total <= 0.0 or not np.isfinite(total):
        prior_total = float(prior_vals.sum())
        return PosteriorEstimate(weights=prior_vals / prior_total,
                                 grid=grid, degenerate=True)
    return PosteriorEstimate(weights=weights / total, grid=grid)


def decision_summary(posterior, scene, conflict_radius=0.15):
    """Posterior reach-probability near each scene object.

    Sums the cell mass within conflict_radius (in the plane) of every
    object position. Radii around nearby objects overlap, so the values
    can sum to more than 1; each is a marginal statement per object.
    """
    if not scene.objects:
        raise TaskError("scene has no objects to summarize")
    centers = posterior.grid.cell_centers()[:, :2]
    out = {}
    for obj in scene.objects:
        pos = np.asarray(obj.position[:2], dtype=float)
        d2 = ((centers - pos) ** 2).sum(axis=1)
        mask = d2 <= conflict_radius * conflict_radius
        out[obj.id] = float(posterior.weights[mask].sum())
    return out


def posterior_to_json(posterior):
    """Flat row-major weights plus grid metadata, for the UI heat map."""
    grid = posterior.grid
    return {
        "origin": [float(grid.origin[0]), float(grid.origin[1])],
        "cell_size": grid.cell_size,
        "nx": grid.nx,
        "ny": grid.ny,
        "map_cell": posterior.map_cell,
        "degenerate": posterior.degenerate,
        "weights": [float(v) for v in posterior.weights],
    }


def write_ipos(path, posterior):
    """Binary posterior: magic, version u32, nx u32, ny u32, f32 weights."""
    grid = posterior.grid
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_IPOS_HEADER.pack(IPOS_MAGIC, IPOS_VERSION,
                                   grid.nx, grid.ny))
        fh.write(np.asarray(posterior.weights, dtype="<f4").tobytes())
    return path


def read_ipos(path):
    """Weights and (nx, ny) from an IPOS file; no grid origin carried."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _IPOS_HEADER.size:
        raise DataFormatError(f"{path}: truncated header")
    magic, version, nx, ny = _IPOS_HEADER.unpack_from(raw)
    if magic != IPOS_MAGIC:
        raise DataFormatError(f"{path}: bad magic {magic!r}")
    if version != IPOS_VERSION:
        raise DataFormatError(f"{path}: unsupported version {version}")
    expect = _IPOS_HEADER.size + 4 * nx * ny
    if len(raw) != expect:
        raise DataFormatError(
            f"{path}: expected {expect} bytes, got {len(raw)}")
    weights = np.frombuffer(raw, dtype="<f4", offset=_IPOS_HEADER.size)
    return weights.astype(float), (nx, ny)
