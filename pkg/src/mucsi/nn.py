"""Differentiable building blocks for the token pipelines.

Token matrices are real (..., n_tokens, d) arrays; every op below is
row-batched, so the same code serves a single (n, d) matrix and a
(batch, n, d) stack. Attention projections carry no biases; dense layers
elsewhere do.

The residual cross-attention block queries with the *other* users'
aggregated embedding and subtracts the attended summary from it before the
output projection, so the block adds complementary rather than common
information to the querying user's features.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

LAYER_NORM_EPS = 1e-5


@dataclass
class AttentionParams:
    """Projection matrices (all d x d, no biases) and the head count."""

    wq: Tensor
    wk: Tensor
    wv: Tensor
    wo: Tensor
    heads: int


@dataclass
class LayerParams:
    """One attention block: projections, two LayerNorms and the FFN."""

    attn: AttentionParams
    ln1_gain: Tensor
    ln1_bias: Tensor
    ffn_w1: Tensor
    ffn_b1: Tensor
    ffn_w2: Tensor
    ffn_b2: Tensor
    ln2_gain: Tensor
    ln2_bias: Tensor


def positional_encoding(n_tokens: int, d: int) -> np.ndarray:
    """Sinusoidal position table: sin on even columns, cos on odd ones."""
    if d % 2 != 0:
        raise ValueError("feature width must be even for sinusoidal encoding")
    pos = np.arange(n_tokens, dtype=np.float64)[:, None]
    i = np.arange(d // 2, dtype=np.float64)[None, :]
    angles = pos / np.power(10000.0, 2.0 * i / d)
    pe = np.empty((n_tokens, d))
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles)
    return pe


def split_heads(x, heads):
    """(..., n, d) -> (..., heads, n, d/heads)"""
    *lead, n, d = x.shape
    if d % heads != 0:
        raise ValueError(f"head count {heads} must divide feature width {d}")
    y = ad.reshape(x, (*lead, n, heads, d // heads))
    return ad.swapaxes(y, -3, -2)


def merge_heads(x):
    """(..., heads, n, d/heads) -> (..., n, d)"""
    y = ad.swapaxes(x, -3, -2)
    *lead, n, heads, dh = y.shape
    return ad.reshape(y, (*lead, n, heads * dh))


def scaled_dot_attention(q, k, v):
    """softmax(q k^T / sqrt(d_head)) v with the per-head width as scale."""
    d_head = q.shape[-1]
    scores = ad.scale(ad.matmul(q, ad.swapaxes(k, -1, -2)), 1.0 / np.sqrt(d_head))
    return ad.matmul(ad.softmax_last(scores), v)


def attended_summary(x_kv, x_q, p: AttentionParams):
    """Multi-head attention read of x_kv driven by queries from x_q.

    Returns the concatenated head outputs, before any output projection.
    """
    q = split_heads(ad.matmul(x_q, p.wq), p.heads)
    k = split_heads(ad.matmul(x_kv, p.wk), p.heads)
    v = split_heads(ad.matmul(x_kv, p.wv), p.heads)
    return merge_heads(scaled_dot_attention(q, k, v))


def residual_cross_attention(x_kv, x_q, p: AttentionParams):
    """(x_q - attended_summary) @ wo: keeps what x_kv could not explain."""
    return ad.matmul(ad.sub(x_q, attended_summary(x_kv, x_q, p)), p.wo)


def cross_attention_plain(x_kv, x_q, p: AttentionParams):
    """attended_summary @ wo, the conventional cross-attention output."""
    return ad.matmul(attended_summary(x_kv, x_q, p), p.wo)


def self_attention(x, p: AttentionParams):
    return cross_attention_plain(x, x, p)


def layer_norm(x, gain, bias, eps: float = LAYER_NORM_EPS):
    return ad.layer_norm(x, gain, bias, eps)


def ffn(x, p: LayerParams):
    hidden = ad.relu(ad.add(ad.matmul(x, p.ffn_w1), p.ffn_b1))
    return ad.add(ad.matmul(hidden, p.ffn_w2), p.ffn_b2)


def _finish_block(attn_out, skip, p: LayerParams):
    # post-norm ordering: Add then LayerNorm, twice
    z = layer_norm(ad.add(attn_out, skip), p.ln1_gain, p.ln1_bias)
    return layer_norm(ad.add(z, ffn(z, p)), p.ln2_gain, p.ln2_bias)


def rca_block(x, x_others, p: LayerParams):
    """Residual cross-attention block; skip connection keeps x."""
    return _finish_block(residual_cross_attention(x, x_others, p.attn), x, p)


def ca_block(x, x_others, p: LayerParams):
    """Ablation twin of rca_block with plain cross-attention."""
    return _finish_block(cross_attention_plain(x, x_others, p.attn), x, p)


def transformer_layer(x, p: LayerParams):
    """Standard post-norm encoder layer (self-attention + FFN)."""
    return _finish_block(self_attention(x, p.attn), x, p)


def aggregate_others(embeddings, i):
    """Elementwise mean of all embeddings except index ``i``."""
    m = len(embeddings)
    if m < 2:
        raise ValueError("aggregation needs at least two users")
    if not 0 <= i < m:
        raise ValueError(f"user index {i} out of range for {m} users")
    others = [e for j, e in enumerate(embeddings) if j != i]
    acc = others[0]
    for e in others[1:]:
        acc = ad.add(acc, e)
    return ad.scale(acc, 1.0 / len(others))


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------


def uniform_fan_in(rng, fan_in, shape):
    limit = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-limit, limit, size=shape)


def init_attention_params(rng, d, heads) -> AttentionParams:
    if d % heads != 0:
        raise ValueError(f"head count {heads} must divide feature width {d}")
    make = lambda: ad.parameter(uniform_fan_in(rng, d, (d, d)))
    return AttentionParams(wq=make(), wk=make(), wv=make(), wo=make(), heads=heads)


def init_layer_params(rng, d, heads, d_ff=None) -> LayerParams:
    d_ff = 4 * d if d_ff is None else d_ff
    return LayerParams(
        attn=init_attention_params(rng, d, heads),
        ln1_gain=ad.parameter(np.ones(d)),
        ln1_bias=ad.parameter(np.zeros(d)),
        ffn_w1=ad.parameter(uniform_fan_in(rng, d, (d, d_ff))),
        ffn_b1=ad.parameter(uniform_fan_in(rng, d, (d_ff,))),
        ffn_w2=ad.parameter(uniform_fan_in(rng, d_ff, (d_ff, d))),
        ffn_b2=ad.parameter(uniform_fan_in(rng, d_ff, (d,))),
        ln2_gain=ad.parameter(np.ones(d)),
        ln2_bias=ad.parameter(np.zeros(d)),
    )
