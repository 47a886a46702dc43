"""Transformer encoder that turns data tokens + learnable INR tokens into INR parameters."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad


@dataclass(frozen=True)
class HyperNetConfig:
    n_blocks: int = 6
    d_model: int = 64
    n_heads: int = 4
    ff_mult: int = 4

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ValueError("d_model must be divisible by n_heads")


def block_shapes(cfg: HyperNetConfig) -> dict[str, tuple[int, ...]]:
    d, f = cfg.d_model, cfg.d_model * cfg.ff_mult
    shapes = {}
    for i in range(cfg.n_blocks):
        p = f"block{i}."
        shapes.update({
            p + "ln1.g": (d,), p + "ln1.b": (d,),
            p + "attn.Wq": (d, d), p + "attn.bq": (d,),
            p + "attn.Wk": (d, d), p + "attn.bk": (d,),
            p + "attn.Wv": (d, d), p + "attn.bv": (d,),
            p + "attn.Wo": (d, d), p + "attn.bo": (d,),
            p + "ln2.g": (d,), p + "ln2.b": (d,),
            p + "ff.W1": (d, f), p + "ff.b1": (f,),
            p + "ff.W2": (f, d), p + "ff.b2": (d,),
        })
    return shapes


def token_bank_shapes(cfg: HyperNetConfig, inr_blocks) -> dict[str, tuple[int, ...]]:
    """One learnable token per INR parameter block, each with its own projection."""
    shapes = {"inr_tokens": (len(inr_blocks), cfg.d_model)}
    for j, (_, shape) in enumerate(inr_blocks):
        size = int(np.prod(shape))
        shapes[f"proj{j}.W"] = (cfg.d_model, size)
        shapes[f"proj{j}.b"] = (size,)
    return shapes


def sinusoidal_positions(M: int, d: int) -> np.ndarray:
    pos = np.arange(M)[:, None]
    i = np.arange(d // 2)[None, :]
    angle = pos / 10000 ** (2 * i / d)
    pe = np.zeros((M, d))
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle)[:, : d - d // 2]
    return pe


def attention(x, weights, prefix: str, n_heads: int, record=None):
    S, d = x.shape
    dh = d // n_heads

    def heads(name):
        y = x @ weights[prefix + "W" + name] + weights[prefix + "b" + name]
        return y.reshape(S, n_heads, dh).transpose(1, 0, 2)

    q, k, v = heads("q"), heads("k"), heads("v")
    kt = k.transpose(0, 2, 1)
    probs = ad.softmax((q @ kt) * (1.0 / np.sqrt(dh)), axis=-1)
    if record is not None:
        record.append(ad.value(probs))
    out = (probs @ v).transpose(1, 0, 2).reshape(S, d)
    return out @ weights[prefix + "Wo"] + weights[prefix + "bo"]


def transformer_forward(data_tokens, inr_tokens, weights, cfg: HyperNetConfig, record=None):
    """Pre-norm encoder over [data tokens ; INR tokens]; returns the INR-token slice."""
    M = data_tokens.shape[0]
    x = ad.concat([data_tokens, inr_tokens], axis=0)
    for i in range(cfg.n_blocks):
        p = f"block{i}."
        h = ad.layer_norm(x, weights[p + "ln1.g"], weights[p + "ln1.b"])
        x = x + attention(h, weights, p + "attn.", cfg.n_heads, record)
        h = ad.layer_norm(x, weights[p + "ln2.g"], weights[p + "ln2.b"])
        x = x + (ad.gelu(h @ weights[p + "ff.W1"] + weights[p + "ff.b1"]) @ weights[p + "ff.W2"] + weights[p + "ff.b2"])
        ad.check_finite(x, f"activation in transformer block {i}")
    return x[M:]


def project_tokens(tokens, weights, inr_blocks) -> list:
    """Map each transformed INR token to its parameter block."""
    out = []
    for j, (_, shape) in enumerate(inr_blocks):
        flat = tokens[j] @ weights[f"proj{j}.W"] + weights[f"proj{j}.b"]
        out.append(flat.reshape(*shape))
    return out
