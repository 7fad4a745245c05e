"""Masked scaled-dot-product attention, multi-head wrapper, SIA block, fusion.

All public functions accept plain float64 arrays or autodiff Tensors and
return the matching kind; the model harness calls them with Tensors so
gradients flow through the whole graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, as_tensor
from .masks import AttentionMask

MASK_MODES = ("additive", "multiplicative", "none")

#: additive-mode penalty applied to blocked logits before the softmax
BLOCKED_LOGIT_BIAS = -1.0e9

LAYER_NORM_EPS = 1e-5


@dataclass(frozen=True)
class AttentionConfig:
    model_dim: int
    num_heads: int
    mask_mode: str = "additive"

    def __post_init__(self):
        if self.model_dim % self.num_heads != 0:
            raise ValueError(f"model_dim {self.model_dim} not divisible by num_heads {self.num_heads}")
        if self.model_dim // self.num_heads < 1:
            raise ValueError("head_dim must be >= 1")
        if self.mask_mode not in MASK_MODES:
            raise ValueError(f"mask_mode must be one of {MASK_MODES}, got {self.mask_mode!r}")

    @property
    def head_dim(self) -> int:
        return self.model_dim // self.num_heads


@dataclass
class MultiHeadParams:
    """Per-head Q/K/V projections (model_dim x head_dim each) plus the output projection."""

    wq: list  # one (model_dim, head_dim) matrix per head
    wk: list
    wv: list
    wo: object  # (model_dim, model_dim)


@dataclass
class EncoderLayerParams:
    """One post-norm self-attention sublayer: x -> LN(x + MHA(x))."""

    mha: MultiHeadParams
    ln_gain: object  # (model_dim,)
    ln_bias: object


@dataclass
class SiaBlockParams:
    """Two stacked masked layers followed by a linear output projection."""

    layers: list  # two EncoderLayerParams
    out_proj: object  # (model_dim, model_dim); zeroing it silences the block


def _mask_cells(mask) -> np.ndarray | None:
    if mask is None:
        return None
    if isinstance(mask, AttentionMask):
        return mask.cells
    return np.asarray(mask, dtype=bool)


def _is_tensor_input(*objs) -> bool:
    return any(isinstance(o, Tensor) for o in objs)


def _check_finite(value: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(value)):
        raise FloatingPointError(f"non-finite values in {what}")


def _attention(q: Tensor, k: Tensor, v: Tensor, cells: np.ndarray | None,
               cfg: AttentionConfig) -> tuple[Tensor, Tensor]:
    """Single-head attention; returns (output, attention weights)."""
    n = q.shape[0]
    for name, t in (("Q", q), ("K", k), ("V", v)):
        if t.shape != (n, cfg.head_dim):
            raise ValueError(f"{name} must be {n}x{cfg.head_dim}, got {t.shape}")
    if cfg.mask_mode != "none":
        if cells is None:
            raise ValueError(f"mask_mode {cfg.mask_mode!r} requires a mask")
        if cells.shape != (n, n):
            raise ValueError(f"mask is {cells.shape}, expected {(n, n)}")
    scale = 1.0 / math.sqrt(cfg.head_dim)
    scores = ad.matmul(q, ad.transpose(k)) * scale
    if cfg.mask_mode == "additive":
        eff = cells
        dead = ~cells.any(axis=1)
        if dead.any():
            # a fully blocked query row degenerates to self-attention
            eff = cells.copy()
            eff[dead, np.arange(len(dead))[dead]] = True
        scores = scores + np.where(eff, 0.0, BLOCKED_LOGIT_BIAS)
    elif cfg.mask_mode == "multiplicative":
        # literal masked-logit product: blocked entries keep logit 0, not weight 0
        scores = scores * cells.astype(np.float64)
    weights = ad.softmax_rows(scores)
    return ad.matmul(weights, v), weights


def masked_attention(q, k, v, mask, cfg: AttentionConfig):
    """Scaled dot-product attention over one head, restricted by ``mask``.

    In additive mode blocked logits get ``BLOCKED_LOGIT_BIAS`` before the
    softmax, so blocked keys end up with (numerically) zero weight; the
    multiplicative mode reproduces the literal mask-times-logits product.
    """
    tensor_out = _is_tensor_input(q, k, v)
    out, _ = _attention(as_tensor(q), as_tensor(k), as_tensor(v), _mask_cells(mask), cfg)
    if tensor_out:
        return out
    _check_finite(out.value, "attention output")
    return out.value


def _multi_head(x: Tensor, params: MultiHeadParams, cells: np.ndarray | None,
                cfg: AttentionConfig) -> tuple[Tensor, list[Tensor]]:
    if x.shape[1] != cfg.model_dim:
        raise ValueError(f"input width {x.shape[1]} != model_dim {cfg.model_dim}")
    if not (len(params.wq) == len(params.wk) == len(params.wv) == cfg.num_heads):
        raise ValueError(f"expected {cfg.num_heads} per-head projections")
    heads = []
    all_weights = []
    for h in range(cfg.num_heads):
        q = ad.matmul(x, as_tensor(params.wq[h]))
        k = ad.matmul(x, as_tensor(params.wk[h]))
        v = ad.matmul(x, as_tensor(params.wv[h]))
        out, weights = _attention(q, k, v, cells, cfg)
        heads.append(out)
        all_weights.append(weights)
    concat = heads[0] if len(heads) == 1 else ad.concat_cols(heads)
    return ad.matmul(concat, as_tensor(params.wo)), all_weights


def multi_head(x, params: MultiHeadParams, mask, cfg: AttentionConfig):
    """Multi-head self-attention: every head shares the same mask."""
    tensor_out = _is_tensor_input(x, params.wo, *params.wq)
    out, _ = _multi_head(as_tensor(x), params, _mask_cells(mask), cfg)
    if tensor_out:
        return out
    _check_finite(out.value, "multi_head output")
    return out.value


def layer_norm(x, gain, bias, eps: float = LAYER_NORM_EPS):
    """Per-position layer normalization with learnable gain and bias."""
    x = as_tensor(x)
    mu = ad.tmean(x, axis=1, keepdims=True)
    centered = x - mu
    var = ad.tmean(centered * centered, axis=1, keepdims=True)
    inv = (var + eps) ** -0.5
    return centered * inv * as_tensor(gain) + as_tensor(bias)


def _encoder_layer(x: Tensor, params: EncoderLayerParams, cells: np.ndarray | None,
                   cfg: AttentionConfig) -> tuple[Tensor, list[Tensor]]:
    attn, weights = _multi_head(x, params.mha, cells, cfg)
    return layer_norm(x + attn, params.ln_gain, params.ln_bias), weights


def _sia_block(h_k: Tensor, params: SiaBlockParams, cells: np.ndarray | None,
               cfg: AttentionConfig) -> tuple[Tensor, list[list[Tensor]]]:
    x = h_k
    per_layer_weights = []
    for layer in params.layers:
        x, weights = _encoder_layer(x, layer, cells, cfg)
        per_layer_weights.append(weights)
    return ad.matmul(x, as_tensor(params.out_proj)), per_layer_weights


def sia_block(h_k, params: SiaBlockParams, mask, cfg: AttentionConfig):
    """Two stacked masked self-attention layers plus a linear output projection.

    Both layers share the same mask. The final projection is what the fusion
    sees; setting it to zero disables the branch exactly.
    """
    if len(params.layers) != 2:
        raise ValueError(f"SIA block expects 2 layers, got {len(params.layers)}")
    tensor_out = _is_tensor_input(h_k, params.out_proj)
    out, _ = _sia_block(as_tensor(h_k), params, _mask_cells(mask), cfg)
    if tensor_out:
        return out
    _check_finite(out.value, "sia_block output")
    return out.value


def fuse(h, h_sia):
    """Elementwise sum of the backbone state and the syntax branch output."""
    tensor_out = _is_tensor_input(h, h_sia)
    ht, st = as_tensor(h), as_tensor(h_sia)
    if ht.shape != st.shape:
        raise ValueError(f"fuse shape mismatch: {ht.shape} vs {st.shape}")
    out = ht + st
    return out if tensor_out else out.value
