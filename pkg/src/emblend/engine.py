"""Assembly of experts, caches and side-embedding rules into one engine.

A sample side embeds as the normalized mean of its component embeddings,
for every expert, which keeps gating, fusion inputs and anchors consistent.
Raw sides of each sample pass through all experts and concatenate in config
order into the projection input; annotation sides embed once through the
anchor expert.
"""
from __future__ import annotations

import os

import numpy as np

from .cache import EmbeddingCache
from .config import EngineConfig, build_describer, build_expert
from .experts import EmbedItem, SyntheticExpert
from .projection import forward
from .sns import PayloadDescriber, component_item_id, side_vector


class ExpertHandle:
    """Cache-through wrapper around one expert backend."""

    def __init__(self, expert, cache: EmbeddingCache | None):
        self.expert = expert
        self.cache = cache
        self._memo: dict = {}

    @property
    def expert_id(self) -> str:
        return self.expert.expert_id

    @property
    def dim(self) -> int:
        return self.expert.dim

    def embed(self, item: EmbedItem):
        hit = self._memo.get(item.item_id)
        if hit is not None:
            return hit
        if self.cache is not None:
            cached = self.cache.get(item.item_id, self.expert_id)
            if cached is not None:
                self._memo[item.item_id] = cached
                return cached
        emb = self.expert.embed(item)
        if self.cache is not None:
            # return the storage-precision value so results do not depend on
            # whether the cache was already populated
            self.cache.put(emb)
            emb = self.cache.get(item.item_id, self.expert_id)
        self._memo[item.item_id] = emb
        return emb


class Engine:
    def __init__(self, config: EngineConfig):
        self.config = config
        self.handles = {}
        self.expert_order = []
        for entry in config.experts:
            expert = build_expert(entry, config.remote)
            cache = None
            if config.cache_dir:
                os.makedirs(config.cache_dir, exist_ok=True)
                cache = EmbeddingCache(
                    os.path.join(config.cache_dir, f"{expert.expert_id}.eec"), expert.dim)
            self.handles[expert.expert_id] = ExpertHandle(expert, cache)
            self.expert_order.append(expert.expert_id)
        self.gating = self.handles[config.gating_expert]
        self.anchor = self.handles[config.anchor_expert]
        self.describer = build_describer(config)

    @property
    def dim(self) -> int:
        return self.config.dim

    @property
    def n_experts(self) -> int:
        return len(self.expert_order)

    def describe_fn(self):
        """Describer callable for non-text backward extraction."""
        if self.describer is not None:
            remote = self.describer

            def _remote(pair, components):
                content = "\n".join(c.content for c in components)
                return remote.describe(pair.sample_id, pair.raw_modality, content)

            return _remote
        gating = self.gating.expert
        if isinstance(gating, SyntheticExpert):
            return PayloadDescriber(gating.config.semantic_dim)
        return None

    def _side_vector(self, handle: ExpertHandle, sample, side: str) -> np.ndarray:
        if side == "raw":
            components, modality, tag = sample.raw_components, sample.raw_modality, "r"
        else:
            components, modality, tag = sample.annotation_components, "text", "a"
        vecs = [
            handle.embed(EmbedItem(component_item_id(sample.sample_id, tag, c.content),
                                   modality, c.content)).values
            for c in components
        ]
        return side_vector(vecs)

    def side_matrix(self, samples, side: str, expert_id: str) -> np.ndarray:
        handle = self.handles[expert_id]
        return np.vstack([self._side_vector(handle, s, side) for s in samples])

    def anchor_matrix(self, samples) -> np.ndarray:
        return self.side_matrix(samples, "annotation", self.config.anchor_expert)

    def fused_inputs(self, samples) -> np.ndarray:
        """Concatenated raw-side embeddings across all experts, config order."""
        blocks = [self.side_matrix(samples, "raw", eid) for eid in self.expert_order]
        return np.concatenate(blocks, axis=1)

    def fused_outputs(self, samples, model) -> np.ndarray:
        fused, _ = forward(model, self.fused_inputs(samples))
        return fused

    def expert_space(self, samples, expert_id: str):
        """(raw, annotation) side matrices within one expert's own space."""
        return (self.side_matrix(samples, "raw", expert_id),
                self.side_matrix(samples, "annotation", expert_id))

    def embed_query(self, text: str) -> np.ndarray:
        item = EmbedItem(component_item_id("query", "q", text), "text", text)
        return self.anchor.embed(item).values

    def populate_caches(self, samples) -> dict:
        """Embed every component of every sample through every expert."""
        counts = {}
        for eid in self.expert_order:
            handle = self.handles[eid]
            n = 0
            for sample in samples:
                for side in ("raw", "annotation"):
                    self._side_vector(handle, sample, side)
                n += len(sample.raw_components) + len(sample.annotation_components)
            counts[eid] = n
        return counts
