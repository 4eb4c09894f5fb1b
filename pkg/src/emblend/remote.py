"""HTTP client for remote embedding and describer services.

Embedding request:  POST {"model": str, "inputs": [{"id", "modality", "content"}]}
Embedding response: {"embeddings": [{"id": str, "vector": [float, ...]}]}
Describe request adds "task": "describe"; the response carries
{"descriptions": [{"id": str, "text": str}]}.

Non-2xx status, a missing id, or a wrong-dimension vector raise RemoteFailure
(DescriberFailure for describe). Requests are chunked into batches and issued
through a pool bounded by ``max_in_flight``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import requests

from .errors import DescriberFailure, RemoteFailure, UnsupportedModality
from .experts import EmbedItem, ExpertDescriptor
from .geometry import make_embedding


def _post_json(endpoint, payload, headers, timeout, failure_cls):
    try:
        resp = requests.post(endpoint, json=payload, headers=headers, timeout=timeout)
    except requests.RequestException as exc:
        raise failure_cls(f"request to {endpoint} failed: {exc}") from exc
    if not 200 <= resp.status_code < 300:
        raise failure_cls(f"{endpoint} returned status {resp.status_code}")
    try:
        return resp.json()
    except ValueError as exc:
        raise failure_cls(f"{endpoint} returned non-JSON body") from exc


class RemoteExpert:
    """Expert backed by a remote embedding endpoint."""

    def __init__(self, descriptor: ExpertDescriptor, endpoint: str, model: str,
                 api_key: str | None = None, batch_size: int = 32,
                 max_in_flight: int = 4, timeout: float = 30.0):
        self.descriptor = descriptor
        self.endpoint = endpoint
        self.model = model
        self.batch_size = max(1, int(batch_size))
        self.max_in_flight = max(1, int(max_in_flight))
        self.timeout = timeout
        self._headers = {"Content-Type": "application/json"}
        if api_key:
            self._headers["Authorization"] = f"Bearer {api_key}"

    @property
    def expert_id(self) -> str:
        return self.descriptor.expert_id

    @property
    def dim(self) -> int:
        return self.descriptor.dim

    def _embed_chunk(self, items):
        payload = {
            "model": self.model,
            "inputs": [
                {"id": it.item_id, "modality": it.modality, "content": it.content}
                for it in items
            ],
        }
        body = _post_json(self.endpoint, payload, self._headers, self.timeout, RemoteFailure)
        vectors = {e.get("id"): e.get("vector") for e in body.get("embeddings", [])}
        out = []
        for it in items:
            vec = vectors.get(it.item_id)
            if vec is None:
                raise RemoteFailure(f"response missing embedding for id {it.item_id!r}")
            if len(vec) != self.dim:
                raise RemoteFailure(
                    f"expert {self.expert_id!r} returned dim {len(vec)}, expected {self.dim}")
            out.append(make_embedding(vec, self.expert_id, it.modality, it.item_id))
        return out

    def embed(self, item: EmbedItem):
        return self.embed_batch([item])[0]

    def embed_batch(self, items) -> list:
        items = list(items)
        for it in items:
            if it.modality not in self.descriptor.supported_modalities:
                raise UnsupportedModality(
                    f"expert {self.expert_id!r} does not support {it.modality!r}")
        if not items:
            return []
        chunks = [items[i:i + self.batch_size] for i in range(0, len(items), self.batch_size)]
        if len(chunks) == 1:
            return self._embed_chunk(chunks[0])
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            results = list(pool.map(self._embed_chunk, chunks))
        return [emb for chunk in results for emb in chunk]


class RemoteDescriber:
    """Describer backed by a remote modality-to-text endpoint."""

    def __init__(self, endpoint: str, model: str, api_key: str | None = None,
                 timeout: float = 60.0):
        self.endpoint = endpoint
        self.model = model
        self.timeout = timeout
        self._headers = {"Content-Type": "application/json"}
        if api_key:
            self._headers["Authorization"] = f"Bearer {api_key}"

    def describe(self, item_id: str, modality: str, content: str) -> str:
        payload = {
            "model": self.model,
            "task": "describe",
            "inputs": [{"id": item_id, "modality": modality, "content": content}],
        }
        body = _post_json(self.endpoint, payload, self._headers, self.timeout, DescriberFailure)
        for entry in body.get("descriptions", []):
            if entry.get("id") == item_id and isinstance(entry.get("text"), str):
                return entry["text"]
        raise DescriberFailure(f"response missing description for id {item_id!r}")
