"""Trajectory dataset files.

Binary format, little-endian: header = magic "ITRJ", version u32,
count u32, points_per_traj u32, dt f32; then per record a f32x3 target
followed by f32x(3*points_per_traj) points, row-major. Generation
provenance (start posture, gains, seed, arm model) that does not fit the
fixed header goes to a JSON sidecar at <path>.meta.json.

A JSONL export (one {target, points} object per line) exists for
interchange with anything that dislikes binary.
"""

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import config
from .errors import DataFormatError

ITRJ_MAGIC = b"ITRJ"
ITRJ_VERSION = 1
_HEADER = struct.Struct("<4sIIIf")


@dataclass(frozen=True)
class TrajectoryDataset:
    """In-memory dataset: targets (N, 3) and points (N, P, 3), float32."""

    targets: np.ndarray
    points: np.ndarray
    dt: float
    meta: dict = None

    def __post_init__(self):
        targets = np.ascontiguousarray(self.targets, dtype=np.float32)
        points = np.ascontiguousarray(self.points, dtype=np.float32)
        if targets.ndim != 2 or targets.shape[1] != 3:
            raise DataFormatError("targets must be (N, 3)")
        if points.ndim != 3 or points.shape[2] != 3 \
                or points.shape[0] != targets.shape[0]:
            raise DataFormatError("points must be (N, P, 3) matching targets")
        targets.setflags(write=False)
        points.setflags(write=False)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "points", points)

    def __len__(self):
        return len(self.targets)

    @property
    def points_per_traj(self):
        return self.points.shape[1]


def sidecar_path(path):
    return Path(str(path) + ".meta.json")


def write_dataset(path, dataset):
    """Write ITRJ binary; meta, if any, goes to the JSON sidecar."""
    path = Path(path)
    n = len(dataset)
    p = dataset.points_per_traj
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(ITRJ_MAGIC, ITRJ_VERSION, n, p,
                              float(dataset.dt)))
        record = np.empty((n, 3 + 3 * p), dtype="<f4")
        record[:, :3] = dataset.targets
        record[:, 3:] = dataset.points.reshape(n, 3 * p)
        fh.write(record.tobytes())
    if dataset.meta is not None:
        sidecar_path(path).write_text(json.dumps(dataset.meta, indent=1))
    return path


def read_dataset(path):
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise DataFormatError(f"{path}: truncated header")
    magic, version, n, p, dt = _HEADER.unpack_from(raw)
    if magic != ITRJ_MAGIC:
        raise DataFormatError(f"{path}: bad magic {magic!r}")
    if version != ITRJ_VERSION:
        raise DataFormatError(f"{path}: unsupported version {version}")
    record_floats = 3 + 3 * p
    expect = _HEADER.size + 4 * n * record_floats
    if len(raw) != expect:
        raise DataFormatError(
            f"{path}: expected {expect} bytes for {n} records, "
            f"got {len(raw)}")
    body = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    body = body.reshape(n, record_floats)
    meta = None
    side = sidecar_path(path)
    if side.exists():
        meta = json.loads(side.read_text())
    return TrajectoryDataset(targets=body[:, :3],
                             points=body[:, 3:].reshape(n, p, 3),
                             dt=dt, meta=meta)


def write_jsonl(path, dataset):
    path = Path(path)
    with open(path, "w") as fh:
        for target, points in zip(dataset.targets, dataset.points):
            fh.write(json.dumps({
                "target": [round(float(v), 6) for v in target],
                "points": [[round(float(v), 6) for v in pt]
                           for pt in points],
            }))
            fh.write("\n")
    return path


def read_jsonl(path, dt=config.TRAJECTORY_DT):
    targets = []
    points = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                targets.append(doc["target"])
                points.append(doc["points"])
            except (json.JSONDecodeError, KeyError) as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from None
    if not targets:
        raise DataFormatError(f"{path}: no records")
    return TrajectoryDataset(targets=np.array(targets),
                             points=np.array(points), dt=dt)
