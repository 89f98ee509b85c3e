"""Memory attention aggregation.

Per frame, the spatial positions of ``O_t`` (``P = H * W`` rows of ``C``
channels) attend over ``S < C`` learned memory slots::

    M     = O W_mk                       (P, S)
    A     = softmax over S of M          (P, S)
    H'    = A * M   (element-wise)       (P, S)
    O_mem = A W_mv                       (P, C)
    beta  = sigmoid(tanh(H') W_ta) * O_mem
    h'    = mean over P of dwconv1d_P(beta * O)     (C,)

``W_ta`` is ``S x C`` so that the gate lands in ``(P, C)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


def maa_param_count(C: int, S: int, r: int) -> int:
    return 3 * C * S + r * C


@dataclass
class MaaParams:
    w_mk: object  # (C, S)
    w_mv: object  # (S, C)
    w_ta: object  # (S, C)
    dw_w: object  # (C, r)

    NAMES = ("w_mk", "w_mv", "w_ta", "dw_w")

    @staticmethod
    def shapes(C: int, S: int, r: int) -> dict:
        if not 1 <= S < C:
            raise ValueError(f"MAA: memory size S={S} must satisfy 1 <= S < C={C}")
        if r < 1 or r % 2 == 0:
            raise ValueError(f"MAA: kernel width r={r} must be odd")
        return {"w_mk": (C, S), "w_mv": (S, C), "w_ta": (S, C), "dw_w": (C, r)}

    @classmethod
    def init(cls, C: int, S: int, r: int, rng: np.random.Generator) -> "MaaParams":
        sh = cls.shapes(C, S, r)
        return cls(rng.normal(0.0, 1.0 / np.sqrt(C), size=sh["w_mk"]),
                   rng.normal(0.0, 1.0 / np.sqrt(S), size=sh["w_mv"]),
                   rng.normal(0.0, 1.0 / np.sqrt(S), size=sh["w_ta"]),
                   np.full(sh["dw_w"], 1.0 / r))

    @classmethod
    def from_flat(cls, flat: dict, prefix: str = "maa.") -> "MaaParams":
        return cls(*(flat[prefix + n] for n in cls.NAMES))

    def to_flat(self, prefix: str = "maa.") -> dict:
        return {prefix + n: getattr(self, n) for n in self.NAMES}


def flatten_positions(O) -> Tensor:
    """``(..., C, H, W) -> (..., H*W, C)``."""
    O = ad.as_tensor(O)
    *lead, C, H, W = O.shape
    x = ad.reshape(O, tuple(lead) + (C, H * W))
    axes = tuple(range(len(lead))) + (len(lead) + 1, len(lead))
    return ad.transpose(x, axes)


def memory_attention(O_flat, params: MaaParams):
    """Return ``(A_t, H'_t, O_mem)`` for positions ``O_flat`` of shape ``(..., P, C)``."""
    O_flat = ad.as_tensor(O_flat)
    w_mk = ad.as_tensor(params.w_mk)
    if O_flat.shape[-1] != w_mk.shape[0]:
        raise ValueError(f"memory_attention: input has C={O_flat.shape[-1]}, W_mk expects {w_mk.shape[0]}")
    M = ad.matmul(O_flat, w_mk)
    A = ad.softmax(M, axis=-1)
    Hp = ad.mul(A, M)
    O_mem = ad.matmul(A, params.w_mv)
    return A, Hp, O_mem


def maa_forward(O, params: MaaParams, force_beta: float | None = None) -> Tensor:
    """``(..., C, H, W) -> (..., C)``.

    ``force_beta`` replaces the temporal weights with a constant; it exists
    for tests that isolate the fusion convolution.
    """
    r = ad.as_tensor(params.dw_w).shape[-1]
    if r % 2 == 0:
        raise ValueError(f"maa_forward: kernel width r={r} must be odd")
    O_flat = flatten_positions(O)
    A, Hp, O_mem = memory_attention(O_flat, params)
    if force_beta is None:
        beta = ad.mul(ad.sigmoid(ad.matmul(ad.tanh(Hp), params.w_ta)), O_mem)
    else:
        beta = ad.Tensor(np.full(O_flat.shape, float(force_beta)))
    gated = ad.mul(beta, O_flat)  # (..., P, C)
    nd = gated.ndim
    axes = tuple(range(nd - 2)) + (nd - 1, nd - 2)
    fused = ad.depthwise_conv1d(ad.transpose(gated, axes), params.dw_w)  # (..., C, P)
    return ad.mean(fused, axis=-1)
