"""Vector primitives shared by every other module.

All similarity in the engine is cosine on unit vectors; all gap/spread
measurements are Euclidean on the same vectors. Loss and gradient paths
work in float64; caches may store float32.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimMismatch, EmptySet, ZeroVector

MODALITIES = ("text", "image", "audio", "video")

ZERO_NORM_EPS = 1e-12


def normalize(v) -> np.ndarray:
    """Return v / ||v||_2 as float64. Raises ZeroVector for ||v|| < 1e-12."""
    v = np.asarray(v, dtype=np.float64)
    n = float(np.linalg.norm(v))
    if n < ZERO_NORM_EPS:
        raise ZeroVector(f"cannot normalize vector with norm {n!r}")
    return v / n


def cosine_sim(u, v) -> float:
    """Dot product of two unit vectors, clamped to [-1, 1] against rounding."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimMismatch(f"cosine_sim: {u.shape} vs {v.shape}")
    return float(np.clip(np.dot(u, v), -1.0, 1.0))


def centroid(vectors) -> np.ndarray:
    """Component-wise mean. Not re-normalized: centroids of unit vectors lie inside the ball."""
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1) if arr.size else arr.reshape(0, 0)
    if arr.shape[0] == 0:
        raise EmptySet("centroid of empty set")
    return arr.mean(axis=0)


def spread(vectors, center) -> float:
    """Mean Euclidean distance of the vectors from ``center``."""
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1) if arr.size else arr.reshape(0, 0)
    if arr.shape[0] == 0:
        raise EmptySet("spread of empty set")
    center = np.asarray(center, dtype=np.float64)
    if center.shape[0] != arr.shape[1]:
        raise DimMismatch(f"spread: center dim {center.shape[0]} vs vectors dim {arr.shape[1]}")
    return float(np.linalg.norm(arr - center, axis=1).mean())


@dataclass(frozen=True)
class Embedding:
    """A unit-norm vector tagged with its origin.

    ``sample_id`` is the id of the embedded item; sub-items of a paired
    sample (components, descriptions) use derived ids like ``<id>#r0``.
    """

    values: np.ndarray
    expert_id: str
    modality: str
    sample_id: str
    dim: int = field(default=0)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "dim", int(values.shape[0]))
        n = float(np.linalg.norm(values))
        if abs(n - 1.0) > 1e-6:
            raise ZeroVector(f"embedding for {self.sample_id!r} is not unit-norm (|v|={n})")


def make_embedding(values, expert_id: str, modality: str, sample_id: str) -> Embedding:
    """Normalize raw values and wrap them in an Embedding."""
    return Embedding(normalize(values), expert_id, modality, sample_id)
