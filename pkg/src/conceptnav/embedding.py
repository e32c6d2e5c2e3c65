"""Joint text/view embedding providers and knowledge ranking.

The default providers are deterministic stubs living in a shared cosine
geometry: text labels map to unit vectors seeded by a stable hash of the
label, and a synthetic view embeds as the normalized mean of its object
label vectors plus a room-seeded component. Real pretrained encoders can
be plugged in behind the same two methods.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .knowledge import KnowledgeTriple, normalize_label

DEFAULT_DIM = 64
_HASH_SALT = b"conceptnav-embed-v1:"


class EmptyLabelError(ValueError):
    pass


class UnknownViewError(KeyError):
    pass


class ZeroVectorError(ValueError):
    pass


class DimensionMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class RankedFact:
    """A retrieved fact with its non-object endpoint and similarity score."""

    triple: KnowledgeTriple
    knowledge_label: str
    score: float


class HashTextEmbedder:
    """Deterministic unit-norm label embeddings seeded by a stable hash.

    Same label -> bit-identical vector, on any platform, in any process.
    """

    def __init__(self, dim: int = DEFAULT_DIM):
        self.dim = dim
        self._cache: dict[str, np.ndarray] = {}

    def embed_text(self, label: str) -> np.ndarray:
        label = normalize_label(label)
        if not label:
            raise EmptyLabelError("cannot embed an empty label")
        vec = self._cache.get(label)
        if vec is None:
            digest = hashlib.blake2b(
                _HASH_SALT + label.encode("utf-8"), digest_size=8
            ).digest()
            rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest, "big")))
            vec = rng.standard_normal(self.dim)
            vec /= np.linalg.norm(vec)
            vec.setflags(write=False)
            self._cache[label] = vec
        return vec


class SyntheticViewEmbedder:
    """View embeddings for synthetic environments.

    A view embeds as the normalized mean of its object label embeddings
    plus `noise_scale` times a room-seeded vector (the room label's own
    embedding), mimicking a joint image/text space where a photo of a
    bedroom lands near the text "bedroom". With `noise_scale=0` a
    single-object view embeds exactly as its label.
    """

    def __init__(self, text_embedder: HashTextEmbedder, noise_scale: float = 0.5):
        self.text = text_embedder
        self.noise_scale = noise_scale
        self._views: dict[str, tuple[tuple[str, ...], str | None]] = {}

    def register_view(self, view_id: str, objects, room: str | None = None):
        self._views[view_id] = (tuple(objects), room)

    def embed_image(self, view_id: str) -> np.ndarray:
        try:
            objects, room = self._views[view_id]
        except KeyError:
            raise UnknownViewError(f"unregistered view: {view_id!r}") from None
        vecs = [self.text.embed_text(o) for o in objects]
        vec = np.mean(vecs, axis=0) if vecs else np.zeros(self.text.dim)
        if room is not None and self.noise_scale != 0.0:
            vec = vec + self.noise_scale * self.text.embed_text(room)
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            raise ZeroVectorError(f"view {view_id!r} embeds to the zero vector")
        return vec / norm


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity, clipped into [-1, 1] against rounding spill."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"{a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroVectorError("cosine undefined for zero vectors")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def knowledge_endpoint(triple: KnowledgeTriple, objects) -> str:
    """The fact endpoint that is not a detected object (end wins if both are)."""
    if triple.start in objects and triple.end not in objects:
        return triple.end
    if triple.end in objects and triple.start not in objects:
        return triple.start
    return triple.end


def rank_knowledge(
    view_id: str,
    objects,
    facts,
    k: int,
    *,
    text_embedder: HashTextEmbedder,
    image_embedder: SyntheticViewEmbedder,
) -> list[RankedFact]:
    """Score each fact and keep the k best.

    score = mean( cos(knowledge, view image),
                  mean over objects of cos(knowledge, object) )

    Sorted by descending score; ties break on the knowledge label, then
    on the triple itself, so rankings are a total order.
    """
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    objects = sorted({normalize_label(o) for o in objects})
    if k == 0 or not facts:
        return []
    view_vec = image_embedder.embed_image(view_id)
    obj_vecs = [text_embedder.embed_text(o) for o in objects]

    ranked = []
    for triple in facts:
        label = knowledge_endpoint(triple, objects)
        vec = text_embedder.embed_text(label)
        image_sim = cosine(vec, view_vec)
        object_sim = (
            float(np.mean([cosine(vec, ov) for ov in obj_vecs])) if obj_vecs else 0.0
        )
        ranked.append(RankedFact(triple, label, 0.5 * image_sim + 0.5 * object_sim))
    ranked.sort(key=lambda rf: (-rf.score, rf.knowledge_label, rf.triple))
    return ranked[:k]


def export_rankings(fh, view_id: str, ranked) -> None:
    """Write ranked facts as JSON lines for inspection/plotting."""
    for rf in ranked:
        fh.write(
            json.dumps(
                {"view": view_id, "knowledge": rf.knowledge_label, "score": rf.score},
                sort_keys=True,
            )
            + "\n"
        )
