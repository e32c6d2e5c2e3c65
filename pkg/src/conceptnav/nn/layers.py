"""Neural building blocks: linear maps, attention, graph-biased attention,
and a small text encoder.

Shapes follow two conventions. Unbatched calls take (n, d) matrices and
return (n, d); batched calls take (B, n, d) and return (B, n, d) with
attention weights (B, heads, n, L). Everything runs in float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Tensor

MASK_NEG = -1e9  # additive logit for masked keys; exp underflows to exactly 0


class DimensionMismatchError(ValueError):
    pass


class AsymmetricAdjacencyError(ValueError):
    pass


class AllMaskedError(ValueError):
    pass


class MissingSpecialTokensError(ValueError):
    pass


class SequenceTooLongError(ValueError):
    pass


@dataclass
class AttentionOutput:
    """Attention values plus the post-softmax weights per head."""

    values: Tensor  # (..., m, d)
    weights: Tensor  # (..., heads, m, L); rows are distributions


class Module:
    """Minimal parameter container with stable, sorted names."""

    def named_parameters(self, prefix=""):
        for key in sorted(vars(self)):
            val = vars(self)[key]
            name = f"{prefix}{key}"
            if isinstance(val, Tensor) and val.requires_grad:
                yield name, val
            elif isinstance(val, Module):
                yield from val.named_parameters(f"{name}.")
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}.")
                    elif isinstance(item, Tensor) and item.requires_grad:
                        yield f"{name}.{i}", item

    def parameters(self):
        return [p for _, p in self.named_parameters()]


def _uniform_init(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


class Linear(Module):
    def __init__(self, d_in, d_out, rng, bias=True):
        self.weight = _uniform_init(rng, (d_in, d_out), d_in)
        self.bias = _uniform_init(rng, (d_out,), d_in) if bias else None

    def __call__(self, x):
        out = T.matmul(x, self.weight)
        return out if self.bias is None else T.add(out, self.bias)


class LayerNorm(Module):
    def __init__(self, dim, eps=1e-5):
        self.gamma = Tensor(np.ones(dim), requires_grad=True)
        self.beta = Tensor(np.zeros(dim), requires_grad=True)
        self.eps = eps

    def __call__(self, x):
        return T.layer_norm(x, self.gamma, self.beta, self.eps)


class FeedForward(Module):
    def __init__(self, dim, hidden, rng):
        self.lin1 = Linear(dim, hidden, rng)
        self.lin2 = Linear(hidden, dim, rng)

    def __call__(self, x):
        return self.lin2(T.relu(self.lin1(x)))


def softmax(x, mask=None):
    """Softmax over the last axis with an optional boolean keep-mask.

    Masked entries come out exactly 0; raises AllMaskedError when nothing
    survives the mask. Accepts Tensors or arrays, returns a Tensor.
    """
    x = T.as_tensor(x)
    if mask is None:
        return T.softmax(x, axis=-1)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != x.shape[-mask.ndim:]:
        raise DimensionMismatchError(f"mask shape {mask.shape} vs input {x.shape}")
    if not mask.any(axis=-1).all():
        raise AllMaskedError("softmax over a fully masked axis")
    biased = T.add(x, np.where(mask, 0.0, MASK_NEG))
    out = T.softmax(biased, axis=-1)
    # exp(MASK_NEG - max) underflows to 0, so masked entries are exact zeros
    return out


class MultiHeadAttention(Module):
    """Scaled dot-product attention with an optional additive logit bias.

    The bias hook carries the graph structure: for adjacency A and the
    per-head scalars w_a, b_a, the logits get `A * w_a + b_a` added before
    the softmax.
    """

    def __init__(self, dim, n_heads, rng, graph_bias=False):
        if dim % n_heads != 0:
            raise DimensionMismatchError(f"dim {dim} not divisible by heads {n_heads}")
        self.n_heads = n_heads
        self.d_head = dim // n_heads
        self.wq = Linear(dim, dim, rng)
        self.wk = Linear(dim, dim, rng)
        self.wv = Linear(dim, dim, rng)
        self.wo = Linear(dim, dim, rng)
        if graph_bias:
            self.w_a = _uniform_init(rng, (n_heads, 1, 1), dim)
            self.b_a = _uniform_init(rng, (n_heads, 1, 1), dim)
        else:
            self.w_a = None
            self.b_a = None

    def _split(self, x, batched):
        # (B, n, d) -> (B, H, n, d_head); (n, d) -> (H, n, d_head)
        if batched:
            b, n, _ = x.shape
            return T.transpose(
                T.reshape(x, (b, n, self.n_heads, self.d_head)), (0, 2, 1, 3)
            )
        n, _ = x.shape
        return T.transpose(T.reshape(x, (n, self.n_heads, self.d_head)), (1, 0, 2))

    def _merge(self, x, batched):
        if batched:
            b, h, n, dh = x.shape
            return T.reshape(T.transpose(x, (0, 2, 1, 3)), (b, n, h * dh))
        h, n, dh = x.shape
        return T.reshape(T.transpose(x, (1, 0, 2)), (n, h * dh))

    def __call__(self, queries, keys_values, bias=None, key_mask=None) -> AttentionOutput:
        queries = T.as_tensor(queries)
        keys_values = T.as_tensor(keys_values)
        if queries.shape[-1] != keys_values.shape[-1]:
            raise DimensionMismatchError(
                f"query dim {queries.shape[-1]} vs key dim {keys_values.shape[-1]}"
            )
        if queries.shape[-1] != self.n_heads * self.d_head:
            raise DimensionMismatchError(
                f"input dim {queries.shape[-1]} vs configured {self.n_heads * self.d_head}"
            )
        batched = queries.ndim == 3
        if keys_values.ndim == 2 and batched:
            # shared keys across the batch: add a broadcastable leading axis
            keys_values = T.reshape(
                keys_values, (1,) + tuple(keys_values.shape)
            )
        q = self._split(self.wq(queries), batched)
        k = self._split(self.wk(keys_values), keys_values.ndim == 3)
        v = self._split(self.wv(keys_values), keys_values.ndim == 3)

        logits = T.mul(T.matmul(q, k.mT), 1.0 / np.sqrt(self.d_head))
        if bias is not None:
            logits = T.add(logits, bias)
        if key_mask is not None:
            logits = T.add(logits, np.where(key_mask, 0.0, MASK_NEG))
        weights = T.softmax(logits, axis=-1)
        out = self._merge(T.matmul(weights, v), batched)
        return AttentionOutput(values=self.wo(out), weights=weights)

    def graph_bias(self, adjacency):
        """Additive logit bias `A * w_a + b_a` with per-head scalars.

        `adjacency` is (n, n) or (B, n, n); the result broadcasts against
        (B, heads, n, n) logits. Returns 0 bias when the block was built
        without graph parameters.
        """
        if self.w_a is None:
            return None
        adjacency = np.asarray(adjacency, dtype=np.float64)
        if adjacency.ndim == 3:
            adjacency = adjacency[:, None, :, :]  # (B, 1, n, n)
        return T.add(T.mul(self.w_a, adjacency), self.b_a)


def _check_adjacency(adjacency, n):
    adjacency = np.asarray(adjacency, dtype=np.float64)
    mats = adjacency if adjacency.ndim == 3 else adjacency[None]
    for a in mats:
        if a.shape != (n, n):
            raise DimensionMismatchError(f"adjacency {a.shape} vs {n} nodes")
        if not np.array_equal(a, a.T):
            raise AsymmetricAdjacencyError("adjacency must be symmetric")
        if np.trace(a) != 0.0:
            raise AsymmetricAdjacencyError("adjacency must have a zero diagonal")
        if not np.isin(a, (0.0, 1.0)).all():
            raise AsymmetricAdjacencyError("adjacency entries must be 0 or 1")
    return adjacency


def cross_attention(queries, keys_values, params: MultiHeadAttention) -> AttentionOutput:
    """Standard multi-head attention of `queries` against `keys_values`."""
    return params(queries, keys_values)


def kgs_attention(x, adjacency, params: MultiHeadAttention, key_mask=None) -> AttentionOutput:
    """Knowledge-graph-aware self-attention.

    Per head: Softmax(X Wq (X Wk)^T / sqrt(d_head) + A*w_a + b_a) X Wv,
    where w_a/b_a are learned per-head scalars applied elementwise to the
    adjacency matrix.
    """
    x = T.as_tensor(x)
    n = x.shape[-2]
    adjacency = _check_adjacency(adjacency, n)
    bias = params.graph_bias(adjacency)
    return params(x, x, bias=bias, key_mask=key_mask)


class SelfAttentionBlock(Module):
    def __init__(self, dim, n_heads, ff_hidden, rng):
        self.attn = MultiHeadAttention(dim, n_heads, rng)
        self.ffn = FeedForward(dim, ff_hidden, rng)
        self.ln1 = LayerNorm(dim)
        self.ln2 = LayerNorm(dim)

    def __call__(self, x, key_mask=None):
        att = self.attn(x, x, key_mask=key_mask)
        x = self.ln1(T.add(x, att.values))
        x = self.ln2(T.add(x, self.ffn(x)))
        return x


class TextEncoder(Module):
    """Multi-layer self-attention encoder over token ids.

    Sequences must start with the CLS id and end with the SEP id; the
    output at the CLS position doubles as the instruction summary.
    """

    def __init__(self, vocab_size, dim, n_heads, n_layers, max_len, cls_id, sep_id, rng):
        self.tok_emb = _uniform_init(rng, (vocab_size, dim), dim)
        self.pos_emb = _uniform_init(rng, (max_len, dim), dim)
        self.blocks = [
            SelfAttentionBlock(dim, n_heads, 2 * dim, rng) for _ in range(n_layers)
        ]
        self.max_len = max_len
        self.cls_id = cls_id
        self.sep_id = sep_id

    def __call__(self, token_ids):
        token_ids = np.asarray(token_ids, dtype=np.int64)
        if token_ids.ndim != 1 or len(token_ids) < 2:
            raise MissingSpecialTokensError("need at least [CLS] ... [SEP]")
        if token_ids[0] != self.cls_id or token_ids[-1] != self.sep_id:
            raise MissingSpecialTokensError(
                f"sequence must be [CLS](id {self.cls_id}) ... [SEP](id {self.sep_id})"
            )
        if len(token_ids) > self.max_len:
            raise SequenceTooLongError(f"{len(token_ids)} > max_len {self.max_len}")
        x = T.add(
            T.take_rows(self.tok_emb, token_ids),
            T.take_rows(self.pos_emb, np.arange(len(token_ids))),
        )
        for block in self.blocks:
            x = block(x)
        return x[0], x


def text_encode(token_ids, params: TextEncoder):
    """(instruction summary h0, full sequence encoding)."""
    return params(token_ids)
