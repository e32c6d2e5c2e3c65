"""Per-view concept graphs: objects, retrieved knowledge, and a history node.

Node order is always [history?, objects..., knowledge...] with objects
sorted by (label, d_theta) and knowledge in descending ranking order, so
rebuilding the same view yields a byte-identical graph.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .embedding import HashTextEmbedder, RankedFact
from .knowledge import KnowledgeStore

HISTORY, OBJECT, KNOWLEDGE = 0, 1, 2
HISTORY_LABEL = "[history]"


class NonFiniteAngleError(ValueError):
    pass


class DimensionMismatchError(ValueError):
    pass


def directional_encoding(theta, psi, d_theta, d_psi) -> np.ndarray:
    """Orientation feature of an object seen at offset (d_theta, d_psi)
    from a view centered at heading `theta`, elevation `psi`:

        (sin(theta + d_theta), cos(theta + d_theta),
         sin(psi + d_psi),     cos(psi + d_psi))
    """
    vals = (theta, psi, d_theta, d_psi)
    if not all(math.isfinite(v) for v in vals):
        raise NonFiniteAngleError(f"non-finite angle in {vals}")
    return np.array(
        [
            math.sin(theta + d_theta),
            math.cos(theta + d_theta),
            math.sin(psi + d_psi),
            math.cos(psi + d_psi),
        ]
    )


@dataclass(frozen=True)
class ConceptGraph:
    """Immutable concept graph for one candidate view.

    labels/node_types/base/directional are row-aligned; `history` holds
    the current history vector once :func:`add_history_node` ran.
    """

    labels: tuple[str, ...]
    node_types: np.ndarray  # (n,) in {0 history, 1 object, 2 knowledge}
    base: np.ndarray  # (n, d_e) label embeddings; history row is zeros
    directional: np.ndarray  # (n, 4); zero rows for history and knowledge
    adjacency: np.ndarray  # (n, n) symmetric 0/1, zero diagonal
    history: np.ndarray | None = None  # (d,) once the history node exists

    @property
    def n_nodes(self) -> int:
        return len(self.labels)

    @property
    def has_history(self) -> bool:
        return self.n_nodes > 0 and self.node_types[0] == HISTORY

    def concept_labels(self) -> tuple[str, ...]:
        return self.labels[1:] if self.has_history else self.labels

    def feature_matrix(self, w_base, type_table, w_dir) -> np.ndarray:
        """(n, d) node features: projected base + type row + projected
        directional; the history row is the history vector itself plus
        its type row."""
        feats = self.base @ w_base + type_table[self.node_types] + self.directional @ w_dir
        if self.has_history:
            feats[0] = self.history + type_table[HISTORY]
        return feats

    def to_json(self) -> str:
        edges = [
            [int(i), int(j)]
            for i in range(self.n_nodes)
            for j in range(i + 1, self.n_nodes)
            if self.adjacency[i, j]
        ]
        doc = {
            "nodes": [
                {
                    "label": lab,
                    "type": int(t),
                    "directional": [float(x) for x in d],
                }
                for lab, t, d in zip(self.labels, self.node_types, self.directional)
            ],
            "edges": edges,
        }
        return json.dumps(doc, sort_keys=True)


def build_scene_graph(
    objects,
    view_pose,
    *,
    text_embedder: HashTextEmbedder,
) -> ConceptGraph:
    """Fully connected graph over detected objects.

    `objects` is a list of (label, d_theta, d_psi); `view_pose` the view's
    (theta, psi). The history node is added separately.
    """
    theta, psi = view_pose
    ordered = sorted(objects, key=lambda o: (o[0], o[1], o[2]))
    n = len(ordered)
    d_e = text_embedder.dim
    labels = tuple(o[0] for o in ordered)
    base = np.zeros((n, d_e))
    directional = np.zeros((n, 4))
    for i, (label, d_theta, d_psi) in enumerate(ordered):
        base[i] = text_embedder.embed_text(label)
        directional[i] = directional_encoding(theta, psi, d_theta, d_psi)
    adjacency = np.ones((n, n)) - np.eye(n) if n else np.zeros((0, 0))
    return ConceptGraph(
        labels=labels,
        node_types=np.full(n, OBJECT, dtype=np.int64),
        base=base,
        directional=directional,
        adjacency=adjacency,
    )


def expand_with_knowledge(
    graph: ConceptGraph,
    ranked,
    store: KnowledgeStore,
    *,
    text_embedder: HashTextEmbedder,
) -> ConceptGraph:
    """Append knowledge nodes for the ranked facts and wire edges from the
    store: any pair involving a knowledge node is connected iff some stored
    triple links the two labels. Labels already present (as objects or
    earlier, better-ranked knowledge) are not duplicated.
    """
    if graph.has_history:
        raise ValueError("expand before adding the history node")
    existing = set(graph.labels)
    new_labels: list[str] = []
    for rf in ranked:
        label = rf.knowledge_label
        if label not in existing:
            existing.add(label)
            new_labels.append(label)
    if not new_labels:
        return graph

    n_old, n_new = graph.n_nodes, len(new_labels)
    n = n_old + n_new
    labels = graph.labels + tuple(new_labels)
    node_types = np.concatenate(
        [graph.node_types, np.full(n_new, KNOWLEDGE, dtype=np.int64)]
    )
    base = np.vstack(
        [graph.base] + [text_embedder.embed_text(lab)[None, :] for lab in new_labels]
    )
    directional = np.vstack([graph.directional, np.zeros((n_new, 4))])

    adjacency = np.zeros((n, n))
    adjacency[:n_old, :n_old] = graph.adjacency
    for j in range(n_old, n):
        for i in range(n):
            if i == j:
                continue
            if store.linked(labels[i], labels[j]):
                adjacency[i, j] = adjacency[j, i] = 1.0
    return ConceptGraph(
        labels=labels,
        node_types=node_types,
        base=base,
        directional=directional,
        adjacency=adjacency,
    )


def add_history_node(graph: ConceptGraph, h_prev: np.ndarray) -> ConceptGraph:
    """Insert the history node at index 0, connected to every other node."""
    h_prev = np.asarray(h_prev, dtype=float)
    if h_prev.ndim != 1:
        raise DimensionMismatchError(
            f"history vector must be 1-D, got shape {h_prev.shape}"
        )
    if graph.has_history:
        return replace(graph, history=h_prev)
    n = graph.n_nodes + 1
    adjacency = np.zeros((n, n))
    adjacency[1:, 1:] = graph.adjacency
    adjacency[0, 1:] = 1.0
    adjacency[1:, 0] = 1.0
    return ConceptGraph(
        labels=(HISTORY_LABEL,) + graph.labels,
        node_types=np.concatenate([[HISTORY], graph.node_types]).astype(np.int64),
        base=np.vstack([np.zeros((1, graph.base.shape[1])), graph.base]),
        directional=np.vstack([np.zeros((1, 4)), graph.directional]),
        adjacency=adjacency,
        history=h_prev,
    )


def build_concept_graph(
    objects,
    view_pose,
    ranked,
    store,
    *,
    text_embedder,
) -> ConceptGraph:
    """Scene graph + knowledge expansion, without the history node."""
    g = build_scene_graph(objects, view_pose, text_embedder=text_embedder)
    return expand_with_knowledge(g, ranked, store, text_embedder=text_embedder)
