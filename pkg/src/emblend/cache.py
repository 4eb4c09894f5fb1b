"""Persistent embedding cache.

Binary layout: magic ``EEC1`` (4 bytes), version uint32 LE, dim uint32 LE,
count uint64 LE, then per record: id_len uint16 LE, id UTF-8, expert_id_len
uint16 LE, expert_id UTF-8, modality byte, dim x float32 LE. Values are
stored at float32 precision; reads return exact float64 upcasts.
"""
from __future__ import annotations

import os
import struct
import threading

import numpy as np

from .errors import CacheCorrupt
from .geometry import MODALITIES, Embedding

MAGIC = b"EEC1"
VERSION = 1
_HEADER = struct.Struct("<4sIIQ")

_MODALITY_BYTE = {m: i for i, m in enumerate(MODALITIES)}
_BYTE_MODALITY = {i: m for m, i in _MODALITY_BYTE.items()}


class EmbeddingCache:
    """Content-addressed on-disk store keyed by (sample_id, expert_id).

    Writes serialize through an internal lock; reads hit the in-memory map.
    """

    def __init__(self, path, dim: int):
        self.path = os.fspath(path)
        self.dim = int(dim)
        self._lock = threading.Lock()
        self._map: dict = {}
        self._record_count = 0  # records on disk; last write per key wins
        if os.path.exists(self.path) and os.path.getsize(self.path) > 0:
            self._load()
        else:
            with open(self.path, "wb") as fh:
                fh.write(_HEADER.pack(MAGIC, VERSION, self.dim, 0))

    def _load(self):
        with open(self.path, "rb") as fh:
            head = fh.read(_HEADER.size)
            if len(head) < _HEADER.size:
                raise CacheCorrupt(f"{self.path}: truncated header")
            magic, version, dim, count = _HEADER.unpack(head)
            if magic != MAGIC:
                raise CacheCorrupt(f"{self.path}: bad magic {magic!r}")
            if version != VERSION:
                raise CacheCorrupt(f"{self.path}: unsupported version {version}")
            if dim != self.dim:
                raise CacheCorrupt(f"{self.path}: cache dim {dim} != expected {self.dim}")
            vec_bytes = 4 * self.dim
            for _ in range(count):
                rec = self._read_record(fh, vec_bytes)
                if rec is None:
                    raise CacheCorrupt(f"{self.path}: truncated record")
                sample_id, expert_id, modality, values = rec
                self._map[(sample_id, expert_id)] = (modality, values)
            self._record_count = count

    @staticmethod
    def _read_record(fh, vec_bytes):
        raw = fh.read(2)
        if len(raw) < 2:
            return None
        (id_len,) = struct.unpack("<H", raw)
        sample_id = fh.read(id_len)
        raw = fh.read(2)
        if len(sample_id) < id_len or len(raw) < 2:
            return None
        (eid_len,) = struct.unpack("<H", raw)
        expert_id = fh.read(eid_len)
        mod = fh.read(1)
        vec = fh.read(vec_bytes)
        if len(expert_id) < eid_len or len(mod) < 1 or len(vec) < vec_bytes:
            return None
        modality = _BYTE_MODALITY.get(mod[0])
        if modality is None:
            raise CacheCorrupt(f"unknown modality byte {mod[0]}")
        values = np.frombuffer(vec, dtype="<f4").copy()
        return sample_id.decode("utf-8"), expert_id.decode("utf-8"), modality, values

    def get(self, sample_id: str, expert_id: str):
        """Return the cached Embedding, or None when absent."""
        hit = self._map.get((sample_id, expert_id))
        if hit is None:
            return None
        modality, values = hit
        return Embedding(values.astype(np.float64), expert_id, modality, sample_id)

    def put(self, embedding: Embedding) -> None:
        key = (embedding.sample_id, embedding.expert_id)
        values = np.asarray(embedding.values, dtype="<f4")
        with self._lock:
            prior = self._map.get(key)
            if prior is not None and np.array_equal(prior[1], values):
                return
            sid = embedding.sample_id.encode("utf-8")
            eid = embedding.expert_id.encode("utf-8")
            record = (struct.pack("<H", len(sid)) + sid
                      + struct.pack("<H", len(eid)) + eid
                      + bytes([_MODALITY_BYTE[embedding.modality]])
                      + values.tobytes())
            self._map[key] = (embedding.modality, values)
            self._record_count += 1
            with open(self.path, "r+b") as fh:
                fh.seek(0, os.SEEK_END)
                fh.write(record)
                fh.seek(len(MAGIC) + 4 + 4)
                fh.write(struct.pack("<Q", self._record_count))

    def __len__(self) -> int:
        return len(self._map)

    def __contains__(self, key) -> bool:
        return key in self._map
