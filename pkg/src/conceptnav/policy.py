"""Policies over synthetic environments.

ObservationEncoder turns a node into per-candidate concept graphs
(objects + ranked knowledge) and caches the padded arrays, since a
viewpoint's observation never changes within an environment. ModelPolicy
wires the encoder into the model's step pipeline; RandomPolicy and
DemonstratorPolicy are the reference baselines.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import HashTextEmbedder, SyntheticViewEmbedder, rank_knowledge
from .env import Episode, NavEnvironment, demonstrator_action
from .graph import add_history_node, build_concept_graph
from .knowledge import KnowledgeStore, query_by_objects
from .model import ConceptNavModel, StepScores, fuse_scores, pack_graphs
from .nn import no_grad


@dataclass
class ActResult:
    candidates: tuple[int, ...]  # target node per candidate, order fixed
    distribution: np.ndarray  # (len(candidates) + 1,), STOP last
    step_scores: StepScores | None
    predicted_object: str | None
    encoding: object | None = None


@dataclass
class _NodeCache:
    graphs: list  # per candidate, knowledge-expanded, no history yet
    batch_template: object  # ViewBatch sans history vector
    candidates: tuple[int, ...]
    objects: tuple[str, ...]  # current node's own objects (grounding)
    object_embeddings: np.ndarray


class ObservationEncoder:
    """Builds and caches concept graphs for every (node, candidate) view."""

    def __init__(
        self,
        env: NavEnvironment,
        store: KnowledgeStore,
        text_embedder: HashTextEmbedder,
        top_k: int = 10,
        noise_scale: float = 0.5,
    ):
        self.env = env
        self.store = store
        self.text = text_embedder
        self.top_k = top_k
        self.images = SyntheticViewEmbedder(text_embedder, noise_scale)
        for vp in env.viewpoints:
            for cand in vp.candidates:
                self.images.register_view(
                    cand.view_id,
                    tuple(o[0] for o in cand.objects),
                    room=cand.room_ahead,
                )
        self._cache: dict[int, _NodeCache] = {}

    def build_candidate_graph(self, node: int, candidate_index: int):
        """Concept graph (no history node) for one candidate view."""
        vp = self.env.viewpoints[node]
        cand = vp.candidates[candidate_index]
        labels = {o[0] for o in cand.objects}
        ranked = []
        if self.top_k > 0:
            facts = query_by_objects(self.store, labels)
            ranked = rank_knowledge(
                cand.view_id,
                labels,
                facts,
                self.top_k,
                text_embedder=self.text,
                image_embedder=self.images,
            )
        return build_concept_graph(
            cand.objects,
            (cand.theta, cand.psi),
            ranked,
            self.store,
            text_embedder=self.text,
        )

    def node_cache(self, node: int) -> _NodeCache:
        cached = self._cache.get(node)
        if cached is not None:
            return cached
        vp = self.env.viewpoints[node]
        graphs = [
            self.build_candidate_graph(node, i) for i in range(len(vp.candidates))
        ]
        # build the padded template once with a placeholder history row
        dim_probe = np.zeros(1)
        rooted = [add_history_node(g, dim_probe) for g in graphs]
        batch = pack_graphs(rooted)
        objects = vp.object_labels()
        obj_emb = (
            np.stack([self.text.embed_text(o) for o in objects])
            if objects
            else np.zeros((0, self.text.dim))
        )
        cached = _NodeCache(
            graphs=graphs,
            batch_template=batch,
            candidates=tuple(c.to_node for c in vp.candidates),
            objects=objects,
            object_embeddings=obj_emb,
        )
        self._cache[node] = cached
        return cached

    def step_inputs(self, node: int, h: np.ndarray):
        """(history-rooted graphs, padded batch, node cache) for one step."""
        cache = self.node_cache(node)
        rooted = [add_history_node(g, h) for g in cache.graphs]
        return rooted, cache.batch_template, cache


class ModelPolicy:
    """Greedy/sampled policy driven by the navigation model."""

    def __init__(self, model: ConceptNavModel, encoder_factory, sigma: float = 1.0, record: bool = False):
        self.model = model
        self.encoder_factory = encoder_factory  # env -> ObservationEncoder
        self.sigma = sigma
        self.record = record  # keep the autodiff tape for training
        self.state = None
        self.encoder = None

    def reset(self, env: NavEnvironment, episode: Episode):
        self.encoder = self.encoder_factory(env)
        if self.record:
            self.state = self.model.init_history(np.asarray(episode.tokens))
        else:
            with no_grad():
                self.state = self.model.init_history(np.asarray(episode.tokens))

    def _step(self, node: int):
        graphs, batch, cache = self.encoder.step_inputs(node, self.state.h.data)
        encoding = self.model.encode_step(self.state, graphs, batch)
        scores = self.model.decision_pipeline(
            encoding, self.state, cache.objects, cache.object_embeddings
        )
        dist = fuse_scores(scores, None, self.sigma)
        self.state = self.model.advance(self.state, encoding)
        predicted = None
        if scores.obj_scores is not None and len(cache.objects):
            predicted = cache.objects[int(np.argmax(scores.obj_scores.data))]
        return ActResult(
            candidates=cache.candidates,
            distribution=dist.data.copy(),
            step_scores=scores,
            predicted_object=predicted,
            encoding=encoding,
        )

    def act(self, node: int) -> ActResult:
        if self.record:
            return self._step(node)
        with no_grad():
            return self._step(node)


class RandomPolicy:
    """Uniform over candidates + STOP; grounds a random visible object."""

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)
        self.env = None

    def reset(self, env: NavEnvironment, episode: Episode):
        self.env = env

    def act(self, node: int) -> ActResult:
        vp = self.env.viewpoints[node]
        k = len(vp.candidates) + 1
        objects = vp.object_labels()
        predicted = str(self.rng.choice(objects)) if objects else None
        return ActResult(
            candidates=tuple(c.to_node for c in vp.candidates),
            distribution=np.full(k, 1.0 / k),
            step_scores=None,
            predicted_object=predicted,
        )


class DemonstratorPolicy:
    """Shortest-path oracle; grounds the episode target (upper bound)."""

    def __init__(self):
        self.env = None
        self.episode = None

    def reset(self, env: NavEnvironment, episode: Episode):
        self.env = env
        self.episode = episode

    def act(self, node: int) -> ActResult:
        candidates = self.env.neighbors(node)
        action = demonstrator_action(self.env, node, self.episode.goal)
        dist = np.zeros(len(candidates) + 1)
        if action == -1:
            dist[-1] = 1.0
        else:
            dist[candidates.index(action)] = 1.0
        return ActResult(
            candidates=candidates,
            distribution=dist,
            step_scores=None,
            predicted_object=self.episode.target_object,
        )
