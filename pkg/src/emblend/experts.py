"""Embedding backends: the expert interface and the deterministic synthetic expert.

The synthetic expert reproduces modality-gapped geometry at desk scale. It
derives a unit semantic payload from item content, offsets it along a fixed
per-modality direction, adds counter-based noise keyed by (seed, item id),
and normalizes:

    embed(item) = normalize(pad(payload) + gap_magnitude * offset[modality] + noise)

Content conventions:
  * ``@vec:<base64 of little-endian float32>`` carries an explicit payload
    (used by synthetic corpora for non-text media stand-ins).
  * Any other string is feature-hashed by token into the payload space, so
    texts sharing words embed nearby.
"""
from __future__ import annotations

import base64
import binascii
import hashlib
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DimMismatch, ParseError, UnsupportedModality
from .geometry import MODALITIES, Embedding, make_embedding, normalize

EXPERT_KINDS = ("end_to_end", "fusion", "text_based", "synthetic", "remote")

VEC_PREFIX = "@vec:"

_TOKEN_RE = re.compile(r"\w+")


@dataclass(frozen=True)
class ExpertDescriptor:
    expert_id: str
    kind: str
    dim: int
    supported_modalities: frozenset = frozenset(MODALITIES)

    def __post_init__(self):
        if self.kind not in EXPERT_KINDS:
            raise ValueError(f"unknown expert kind {self.kind!r}")
        if self.dim < 2:
            raise ValueError("expert dim must be >= 2")
        object.__setattr__(self, "supported_modalities", frozenset(self.supported_modalities))


@dataclass(frozen=True)
class EmbedItem:
    """One thing to embed: a sample side, a component, or a description."""

    item_id: str
    modality: str
    content: str


def encode_payload(vec) -> str:
    """Serialize a payload vector into the ``@vec:`` content convention."""
    arr = np.asarray(vec, dtype="<f4")
    return VEC_PREFIX + base64.b64encode(arr.tobytes()).decode("ascii")


def decode_payload(content: str) -> np.ndarray | None:
    """Parse ``@vec:`` content into a float64 vector, or None for plain text."""
    if not content.startswith(VEC_PREFIX):
        return None
    try:
        raw = base64.b64decode(content[len(VEC_PREFIX):].encode("ascii"))
        return np.frombuffer(raw, dtype="<f4").astype(np.float64)
    except (ValueError, binascii.Error) as exc:
        raise ParseError(f"malformed @vec payload: {exc}") from exc


def hash_payload(text: str, semantic_dim: int) -> np.ndarray:
    """Deterministic token feature-hash into a unit vector of semantic_dim."""
    vec = np.zeros(semantic_dim)
    tokens = _TOKEN_RE.findall(text.lower()) or [text]
    for tok in tokens:
        digest = hashlib.blake2b(tok.encode("utf-8"), digest_size=8).digest()
        idx = int.from_bytes(digest[:4], "little") % semantic_dim
        sign = 1.0 if digest[4] & 1 else -1.0
        vec[idx] += sign
    norm = np.linalg.norm(vec)
    if norm < 1e-12:
        # cancelled or empty token set: deterministic fallback direction
        vec[:] = 0.0
        vec[0] = 1.0
        return vec
    return vec / norm


def orthogonal_offsets(dim: int, semantic_dim: int, seed: int) -> dict:
    """One fixed unit offset per modality, pairwise orthogonal where dim allows.

    When the non-semantic coordinates have room for all modalities, offsets
    live there so they do not interfere with payload geometry.
    """
    n = len(MODALITIES)
    rng = np.random.Generator(np.random.PCG64(seed))
    free = dim - semantic_dim
    if free >= n:
        block = rng.normal(size=(free, n))
        q, _ = np.linalg.qr(block)
        offsets = np.zeros((n, dim))
        offsets[:, semantic_dim:] = q[:, :n].T
    elif dim >= n:
        block = rng.normal(size=(dim, n))
        q, _ = np.linalg.qr(block)
        offsets = q[:, :n].T
    else:
        offsets = rng.normal(size=(n, dim))
        offsets /= np.linalg.norm(offsets, axis=1, keepdims=True)
    return {m: offsets[i] for i, m in enumerate(MODALITIES)}


@dataclass
class SyntheticExpertConfig:
    expert_id: str
    seed: int
    dim: int
    semantic_dim: int
    gap_magnitude: float = 0.0
    noise_sigma: float = 0.0
    modality_offsets: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 1 <= self.semantic_dim <= self.dim:
            raise ValueError("semantic_dim must be in [1, dim]")
        if self.gap_magnitude < 0 or self.noise_sigma < 0:
            raise ValueError("gap_magnitude and noise_sigma must be >= 0")
        if not self.modality_offsets:
            self.modality_offsets = orthogonal_offsets(self.dim, self.semantic_dim, self.seed)
        for m, off in self.modality_offsets.items():
            self.modality_offsets[m] = np.asarray(off, dtype=np.float64)


def _noise_rng(seed: int, item_id: str) -> np.random.Generator:
    digest = hashlib.blake2b(f"{seed}|{item_id}".encode("utf-8"), digest_size=16).digest()
    return np.random.Generator(np.random.Philox(key=int.from_bytes(digest, "little")))


def synthetic_generate(config: SyntheticExpertConfig, semantic_payload, modality: str,
                       item_id: str = "") -> np.ndarray:
    """normalize(pad(payload) + gap * offset[modality] + noise keyed by (seed, item_id))."""
    payload = np.asarray(semantic_payload, dtype=np.float64)
    if payload.shape != (config.semantic_dim,):
        raise DimMismatch(
            f"payload has {payload.shape} entries, expected ({config.semantic_dim},)")
    vec = np.zeros(config.dim)
    vec[: config.semantic_dim] = payload
    if config.gap_magnitude > 0:
        vec = vec + config.gap_magnitude * config.modality_offsets[modality]
    if config.noise_sigma > 0:
        vec = vec + _noise_rng(config.seed, item_id).normal(0.0, config.noise_sigma, config.dim)
    return normalize(vec)


class SyntheticExpert:
    """Deterministic expert: same (seed, item) always yields the same embedding."""

    def __init__(self, config: SyntheticExpertConfig, kind: str = "synthetic",
                 supported_modalities=MODALITIES):
        self.config = config
        self.descriptor = ExpertDescriptor(
            expert_id=config.expert_id, kind=kind, dim=config.dim,
            supported_modalities=frozenset(supported_modalities))

    @property
    def expert_id(self) -> str:
        return self.config.expert_id

    @property
    def dim(self) -> int:
        return self.config.dim

    def payload_of(self, content: str) -> np.ndarray:
        explicit = decode_payload(content)
        if explicit is not None:
            if explicit.shape != (self.config.semantic_dim,):
                raise DimMismatch(
                    f"@vec payload has {explicit.shape[0]} entries, "
                    f"expected {self.config.semantic_dim}")
            return normalize(explicit)
        return hash_payload(content, self.config.semantic_dim)

    def embed(self, item: EmbedItem) -> Embedding:
        if item.modality not in self.descriptor.supported_modalities:
            raise UnsupportedModality(
                f"expert {self.expert_id!r} does not support {item.modality!r}")
        payload = self.payload_of(item.content)
        vec = synthetic_generate(self.config, payload, item.modality, item.item_id)
        return make_embedding(vec, self.expert_id, item.modality, item.item_id)

    def embed_batch(self, items) -> list:
        return [self.embed(it) for it in items]
