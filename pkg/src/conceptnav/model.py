"""Navigation model: instruction encoding, graph-aware cross-modal step
encoding, concept aggregation, decision heads, and imitation losses.

One step works on a batch of candidate views. Each view contributes a
concept graph whose history node (index 0) carries the running history
vector h; the encoder runs cross-attention of [h; concepts] against the
cached instruction encoding, then graph-biased self-attention with the
view's adjacency, then a feed-forward block, all with residuals and layer
norm. The new history is the mean of the per-candidate history outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .graph import HISTORY, ConceptGraph
from .nn import tensor as T
from .nn.layers import MultiHeadAttention, _uniform_init
from .nn.tensor import Tensor


class EmptyCandidatesError(ValueError):
    pass


class LengthMismatchError(ValueError):
    pass


class MissingDemonstratorActionError(ValueError):
    pass


@dataclass
class ModelConfig:
    dim: int = 96
    n_heads: int = 12
    n_layers: int = 2
    embed_dim: int = 64
    ff_mult: int = 2
    text_layers: int = 2
    max_len: int = 32
    vocab_size: int = 64
    cls_id: int = 0
    sep_id: int = 1
    seed: int = 7

    def validate(self):
        if self.dim % self.n_heads != 0:
            raise ValueError(f"dim {self.dim} not divisible by heads {self.n_heads}")


@dataclass
class NavState:
    """Per-step model state: running history vector and the instruction
    encoding computed once at initialization."""

    h: Tensor  # (dim,)
    instruction: Tensor  # (L, dim)
    step: int = 0


@dataclass
class StepEncoding:
    """Everything encode_step produces for one batch of candidate views."""

    new_h: Tensor  # (dim,)
    aggregated: Tensor  # (B, dim) one collapsed concept vector per candidate
    concept_weights: list[np.ndarray]  # per candidate: (n_concepts,) weights
    concept_labels: list[tuple[str, ...]]
    per_head_scores: list[Tensor]  # per candidate: (heads, n_concepts)
    kgs_matrices: list[np.ndarray]  # per candidate: head-averaged (n, n)


@dataclass
class StepScores:
    """Action and grounding scores for one step."""

    nav_scores: Tensor  # (B + 1,): one logit per candidate, then STOP
    obj_scores: Tensor | None  # (n_objects,) over the current view's objects
    object_labels: tuple[str, ...] = ()
    concept_weights: list[np.ndarray] = field(default_factory=list)
    concept_labels: list[tuple[str, ...]] = field(default_factory=list)


@dataclass
class ViewBatch:
    """Padded per-candidate graph arrays (constant w.r.t. the model)."""

    base: np.ndarray  # (B, n, d_e)
    types: np.ndarray  # (B, n) int
    directional: np.ndarray  # (B, n, 4)
    adjacency: np.ndarray  # (B, n, n)
    key_mask: np.ndarray  # (B, 1, 1, n) bool
    hist_onehot: np.ndarray  # (B, n, 1)
    lengths: list[int]
    labels: list[tuple[str, ...]]


def pack_graphs(graphs: list[ConceptGraph]) -> ViewBatch:
    """Pad a list of history-rooted concept graphs into batched arrays."""
    if not graphs:
        raise EmptyCandidatesError("need at least one candidate view")
    for g in graphs:
        if not g.has_history:
            raise ValueError("candidate graphs must carry the history node")
    b = len(graphs)
    n = max(g.n_nodes for g in graphs)
    d_e = graphs[0].base.shape[1]
    batch = ViewBatch(
        base=np.zeros((b, n, d_e)),
        types=np.zeros((b, n), dtype=np.int64),
        directional=np.zeros((b, n, 4)),
        adjacency=np.zeros((b, n, n)),
        key_mask=np.zeros((b, 1, 1, n), dtype=bool),
        hist_onehot=np.zeros((b, n, 1)),
        lengths=[g.n_nodes for g in graphs],
        labels=[g.labels for g in graphs],
    )
    for i, g in enumerate(graphs):
        k = g.n_nodes
        batch.base[i, :k] = g.base
        batch.types[i, :k] = g.node_types
        batch.directional[i, :k] = g.directional
        batch.adjacency[i, :k, :k] = g.adjacency
        batch.key_mask[i, 0, 0, :k] = True
        batch.hist_onehot[i, 0, 0] = 1.0
        # padded rows keep type OBJECT=1 semantics out of the history slot
        batch.types[i, k:] = 1
    return batch


class EncoderBlock(nn.Module):
    """cross-attention -> graph-biased self-attention -> feed-forward,
    each wrapped in residual + layer norm."""

    def __init__(self, dim, n_heads, ff_hidden, rng):
        self.cross = MultiHeadAttention(dim, n_heads, rng)
        self.kgs = MultiHeadAttention(dim, n_heads, rng, graph_bias=True)
        self.ffn = nn.FeedForward(dim, ff_hidden, rng)
        self.ln_cross = nn.LayerNorm(dim)
        self.ln_kgs = nn.LayerNorm(dim)
        self.ln_ffn = nn.LayerNorm(dim)

    def __call__(self, x, instruction, adjacency, key_mask):
        att = self.cross(x, instruction)
        x = self.ln_cross(T.add(x, att.values))
        kg = self.kgs(x, x, bias=self.kgs.graph_bias(adjacency), key_mask=key_mask)
        x = self.ln_kgs(T.add(x, kg.values))
        x = self.ln_ffn(T.add(x, self.ffn(x)))
        return x, kg.weights


class MLPHead(nn.Module):
    def __init__(self, d_in, hidden, rng):
        self.lin1 = nn.Linear(d_in, hidden, rng)
        self.lin2 = nn.Linear(hidden, 1, rng)

    def __call__(self, x):
        return self.lin2(T.relu(self.lin1(x)))


class ConceptNavModel(nn.Module):
    def __init__(self, config: ModelConfig):
        config.validate()
        self.config = config
        rng = np.random.default_rng(config.seed)
        d = config.dim
        self.text_encoder = nn.TextEncoder(
            config.vocab_size,
            d,
            config.n_heads,
            config.text_layers,
            config.max_len,
            config.cls_id,
            config.sep_id,
            rng,
        )
        self.base_proj = nn.Linear(config.embed_dim, d, rng, bias=False)
        self.dir_proj = nn.Linear(4, d, rng, bias=False)
        self.type_emb = _uniform_init(rng, (3, d), d)
        self.blocks = [
            EncoderBlock(d, config.n_heads, config.ff_mult * d, rng)
            for _ in range(config.n_layers)
        ]
        self.nav_head = MLPHead(2 * d, d, rng)
        self.stop_head = MLPHead(d, d, rng)
        self.obj_head = MLPHead(2 * d, d, rng)
        # ablation switches (not parameters; toggled by the trainer)
        self.use_history = True
        self.use_aggregated = True

    # ---- history initialization --------------------------------------
    def init_history(self, instruction_tokens) -> NavState:
        h0, seq = self.text_encoder(instruction_tokens)
        return NavState(h=h0, instruction=seq, step=0)

    # ---- one encoding step -------------------------------------------
    def encode_step(self, state: NavState, graphs, batch: ViewBatch | None = None) -> StepEncoding:
        if not graphs:
            raise EmptyCandidatesError("no candidate views to encode")
        for g in graphs:
            if not g.has_history:
                raise ValueError("graphs must have the history node at index 0")
            if g.history.shape != state.h.shape:
                raise nn.DimensionMismatchError(
                    f"history dim {g.history.shape} vs state {state.h.shape}"
                )
        if batch is None:
            batch = pack_graphs(graphs)

        d = self.config.dim
        h_row = T.reshape(state.h, (1, d))
        x = T.add(
            T.add(
                T.add(
                    self.base_proj(Tensor(batch.base)),
                    T.take_rows(self.type_emb, batch.types),
                ),
                self.dir_proj(Tensor(batch.directional)),
            ),
            T.matmul(Tensor(batch.hist_onehot), h_row),
        )
        x0 = x  # raw concept tokens, reused by the aggregation
        weights = None
        for block in self.blocks:
            x, weights = block(x, state.instruction, batch.adjacency, batch.key_mask)

        new_h = T.tmean(x[:, 0, :], axis=0)  # (d,)

        aggregated_rows = []
        concept_weights = []
        concept_labels = []
        per_head_scores = []
        kgs_matrices = []
        for i, length in enumerate(batch.lengths):
            scores = weights[i, :, 0, 1:length]  # (heads, n_concepts)
            concepts = x0[i, 1:length, :]  # (n_concepts, d)
            agg, what = aggregate_concepts(scores, concepts, return_weights=True)
            aggregated_rows.append(T.reshape(agg, (1, d)))
            concept_weights.append(what.data.copy())
            concept_labels.append(batch.labels[i][1:])
            per_head_scores.append(scores)
            kgs_matrices.append(weights.data[i, :, :length, :length].mean(axis=0))
        aggregated = T.concat(aggregated_rows, axis=0)
        return StepEncoding(
            new_h=new_h,
            aggregated=aggregated,
            concept_weights=concept_weights,
            concept_labels=concept_labels,
            per_head_scores=per_head_scores,
            kgs_matrices=kgs_matrices,
        )

    # ---- decision pipeline --------------------------------------------
    def decision_pipeline(self, encoding: StepEncoding, state: NavState, candidate_objects, object_embeddings=None) -> StepScores:
        b = encoding.aggregated.shape[0]
        if b < 1:
            raise EmptyCandidatesError("no candidates to score")
        d = self.config.dim
        h_row = T.reshape(encoding.new_h, (1, d))
        h_rows = T.matmul(Tensor(np.ones((b, 1))), h_row)  # (B, d)
        agg = encoding.aggregated
        if not self.use_aggregated:
            agg = T.mul(agg, 0.0)
        nav = self.nav_head(T.concat([agg, h_rows], axis=1))  # (B, 1)
        stop = self.stop_head(h_row)  # (1, 1)
        nav_scores = T.concat([T.reshape(nav, (b,)), T.reshape(stop, (1,))], axis=0)

        obj_scores = None
        labels = tuple(candidate_objects) if candidate_objects else ()
        if labels:
            if object_embeddings is None:
                raise ValueError("object_embeddings required when objects are given")
            obj_feat = self.base_proj(Tensor(object_embeddings))  # (n_o, d)
            h_obj = T.matmul(Tensor(np.ones((len(labels), 1))), h_row)
            obj_scores = T.reshape(
                self.obj_head(T.concat([obj_feat, h_obj], axis=1)), (len(labels),)
            )
        return StepScores(
            nav_scores=nav_scores,
            obj_scores=obj_scores,
            object_labels=labels,
            concept_weights=encoding.concept_weights,
            concept_labels=encoding.concept_labels,
        )

    def advance(self, state: NavState, encoding: StepEncoding) -> NavState:
        h = encoding.new_h if self.use_history else state.h
        return NavState(h=h, instruction=state.instruction, step=state.step + 1)


def aggregate_concepts(per_head_scores, concepts, return_weights=False):
    """Collapse concept tokens into one vector: average the per-head
    attention rows, renormalize with a softmax, and take the weighted sum
    of the raw concept tokens."""
    per_head_scores = T.as_tensor(per_head_scores)
    concepts = T.as_tensor(concepts)
    if per_head_scores.ndim != 2 or concepts.ndim != 2:
        raise nn.DimensionMismatchError("expected (heads, n) scores and (n, d) concepts")
    if per_head_scores.shape[1] != concepts.shape[0]:
        raise nn.DimensionMismatchError(
            f"{per_head_scores.shape[1]} scores vs {concepts.shape[0]} concepts"
        )
    weights = T.softmax(T.tmean(per_head_scores, axis=0), axis=-1)  # (n,)
    out = T.reshape(
        T.matmul(T.reshape(weights, (1, -1)), concepts), (concepts.shape[1],)
    )
    return (out, weights) if return_weights else out


def _fused_logits(local, base=None, sigma=1.0):
    local = local.nav_scores if isinstance(local, StepScores) else T.as_tensor(local)
    if base is None:
        return local
    base = base.nav_scores if isinstance(base, StepScores) else T.as_tensor(base)
    if base.shape != local.shape:
        raise LengthMismatchError(f"local {local.shape} vs base {base.shape}")
    return T.add(T.mul(local, sigma), T.mul(base, 1.0 - sigma))


def fuse_scores(local, base=None, sigma=1.0):
    """softmax(sigma * local + (1 - sigma) * base); plain softmax of the
    local scores when no baseline scores are supplied."""
    if not 0.0 <= sigma <= 1.0:
        raise ValueError(f"sigma must be in [0, 1], got {sigma}")
    return T.softmax(_fused_logits(local, base, sigma), axis=-1)


def _cross_entropy(logits, target_idx):
    return -T.log_softmax(logits, axis=-1)[int(target_idx)]


def losses(step_scores, demonstrator_actions, target_index, *, base_scores=None, sigma=1.0, weights=(1.0, 1.0, 1.0)):
    """Imitation losses over one trajectory.

    `step_scores` is one StepScores per executed step and
    `demonstrator_actions` the matching action indices (STOP is the last
    index). The grounding loss compares the final step's object scores
    against `target_index`. Per-step terms are summed over steps. Returns
    (L_SAP, L_OG, L_CD, total) as scalar Tensors.
    """
    if len(step_scores) != len(demonstrator_actions):
        raise MissingDemonstratorActionError(
            f"{len(step_scores)} steps vs {len(demonstrator_actions)} actions"
        )
    if not step_scores:
        raise MissingDemonstratorActionError("empty trajectory")
    bases = base_scores if base_scores is not None else [None] * len(step_scores)
    l_sap = Tensor(0.0)
    l_cd = Tensor(0.0)
    for scores, action, base in zip(step_scores, demonstrator_actions, bases):
        if action is None:
            raise MissingDemonstratorActionError("demonstrator action undefined")
        n_actions = scores.nav_scores.shape[0]
        if not 0 <= action < n_actions:
            raise MissingDemonstratorActionError(
                f"action {action} out of range for {n_actions} scores"
            )
        l_sap = T.add(l_sap, _cross_entropy(_fused_logits(scores, base, sigma), action))
        l_cd = T.add(l_cd, _cross_entropy(scores.nav_scores, action))
    final = step_scores[-1]
    if final.obj_scores is None:
        raise MissingDemonstratorActionError("final step has no object scores")
    if not 0 <= target_index < final.obj_scores.shape[0]:
        raise MissingDemonstratorActionError(
            f"target index {target_index} not among final objects"
        )
    l_og = _cross_entropy(final.obj_scores, target_index)
    w_sap, w_og, w_cd = weights
    total = T.add(
        T.add(T.mul(l_sap, w_sap), T.mul(l_og, w_og)), T.mul(l_cd, w_cd)
    )
    return l_sap, l_og, l_cd, total


def export_step_attention(step, scores: StepScores) -> list[dict]:
    """JSON-ready per-candidate concept weights for one step."""
    records = []
    for cand, (labels, weights) in enumerate(
        zip(scores.concept_labels, scores.concept_weights)
    ):
        records.append(
            {
                "step": int(step),
                "candidate": int(cand),
                "concepts": list(labels),
                "weights": [float(w) for w in weights],
            }
        )
    return records
