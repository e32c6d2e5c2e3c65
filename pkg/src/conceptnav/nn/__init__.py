"""Minimal differentiable tensor layer used by the navigation model."""

from .gradcheck import check_gradients
from .layers import (
    AllMaskedError,
    AsymmetricAdjacencyError,
    AttentionOutput,
    DimensionMismatchError,
    FeedForward,
    LayerNorm,
    Linear,
    MissingSpecialTokensError,
    Module,
    MultiHeadAttention,
    SelfAttentionBlock,
    SequenceTooLongError,
    TextEncoder,
    cross_attention,
    kgs_attention,
    softmax,
    text_encode,
)
from .optim import Adam
from .serialize import load_checkpoint, restore_into, save_checkpoint
from .tensor import Tensor, no_grad

__all__ = [
    "Adam",
    "AllMaskedError",
    "AsymmetricAdjacencyError",
    "AttentionOutput",
    "DimensionMismatchError",
    "FeedForward",
    "LayerNorm",
    "Linear",
    "MissingSpecialTokensError",
    "Module",
    "MultiHeadAttention",
    "SelfAttentionBlock",
    "SequenceTooLongError",
    "Tensor",
    "TextEncoder",
    "check_gradients",
    "cross_attention",
    "kgs_attention",
    "load_checkpoint",
    "no_grad",
    "restore_into",
    "save_checkpoint",
    "softmax",
    "text_encode",
]
