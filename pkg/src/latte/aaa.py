"""Auxiliary self-attention aggregation over per-frame descriptors.

For descriptors ``U`` of frames ``1..t`` (shape ``(t, d_u)``)::

    S    = U U^T                                   (t, t)
    F    = sigmoid(dwconv1d_rows(S))               (t, t)   shared width-r kernel
    rho  = mean over columns of F                  (t,)
    Z    = (rho^T (U W_pw)) W_aaa                  (d_u,)
    w    = softmax(swish(swish(Z B_v0) B_v1))      (d_u,)
    out  = w * Z

Only frames ``1..t`` are read, so the output at ``t`` is causal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


def swish(x):
    """``x * sigmoid(x)``."""
    return ad.swish(x)


def aaa_param_count(d_u: int, r: int) -> int:
    return r + 4 * d_u * d_u


def separable_param_count(d_u: int, r: int) -> int:
    """Depthwise (r per channel) plus pointwise (d_u^2) parameters."""
    return r * d_u + d_u * d_u


def dense_conv_param_count(d_u: int, r: int) -> int:
    return r * d_u * d_u


@dataclass
class AaaParams:
    dw_w: object  # (r,)
    pw_w: object  # (d_u, d_u)
    w_aaa: object  # (d_u, d_u)
    b_v0: object  # (d_u, d_u)
    b_v1: object  # (d_u, d_u)

    NAMES = ("dw_w", "pw_w", "w_aaa", "b_v0", "b_v1")

    @staticmethod
    def shapes(d_u: int, r: int) -> dict:
        if r < 1 or r % 2 == 0:
            raise ValueError(f"AAA: kernel width r={r} must be odd")
        sq = (d_u, d_u)
        return {"dw_w": (r,), "pw_w": sq, "w_aaa": sq, "b_v0": sq, "b_v1": sq}

    @classmethod
    def init(cls, d_u: int, r: int, rng: np.random.Generator) -> "AaaParams":
        sh = cls.shapes(d_u, r)
        dw = np.zeros(sh["dw_w"])
        dw[r // 2] = 1.0
        scale = 1.0 / np.sqrt(d_u)
        return cls(dw, *(rng.normal(0.0, scale, size=sh[n]) for n in cls.NAMES[1:]))

    @classmethod
    def from_flat(cls, flat: dict, prefix: str = "aaa.") -> "AaaParams":
        return cls(*(flat[prefix + n] for n in cls.NAMES))

    def to_flat(self, prefix: str = "aaa.") -> dict:
        return {prefix + n: getattr(self, n) for n in self.NAMES}


def aaa_forward(U, params: AaaParams, mixed=None) -> Tensor:
    """Context vector for the last frame of ``U`` (shape ``(..., t, d_u)``).

    ``mixed`` may carry a precomputed ``U @ W_pw`` for the same frames.
    """
    U = ad.as_tensor(U)
    if U.ndim < 2 or U.shape[-2] == 0:
        raise ValueError(f"aaa_forward: need at least one frame, got shape {U.shape}")
    lead, t, du = U.shape[:-2], U.shape[-2], U.shape[-1]
    nd = U.ndim
    Ut = ad.transpose(U, tuple(range(nd - 2)) + (nd - 1, nd - 2))
    S = ad.matmul(U, Ut)
    F = ad.sigmoid(ad.depthwise_conv1d(S, params.dw_w))
    rho = ad.reshape(ad.mean(F, axis=-1), lead + (1, t))
    if mixed is None:
        mixed = ad.matmul(U, params.pw_w)
    Z = ad.reshape(ad.matmul(ad.matmul(rho, mixed), params.w_aaa), lead + (du,))
    w = ad.softmax(ad.swish(ad.linear(ad.swish(ad.linear(Z, params.b_v0)), params.b_v1)), axis=-1)
    return ad.mul(w, Z)


def aaa_sequence(U, params: AaaParams) -> Tensor:
    """Causal context for every prefix: ``(..., T, d_u) -> (..., T, d_u)``.

    Evaluates :func:`aaa_forward` on every prefix at once. Within a prefix of
    length ``L`` only the last ``r // 2`` columns of the row convolution touch
    the zero padding at ``L``; the other columns equal the full-sequence
    convolution. Interior columns are therefore summed with a triangular
    selector and the boundary columns come from convolutions whose taps
    beyond ``L`` are masked. Matches the per-prefix loop up to rounding.
    """
    U = ad.as_tensor(U)
    if U.ndim < 2 or U.shape[-2] == 0:
        raise ValueError(f"aaa_sequence: need at least one frame, got shape {U.shape}")
    T, nd = U.shape[-2], U.ndim
    r = np.shape(ad.as_tensor(params.dw_w).data)[-1]
    p = r // 2
    swap = tuple(range(nd - 2)) + (nd - 1, nd - 2)
    S = ad.matmul(U, ad.transpose(U, swap))
    j = np.arange(T)[:, None]  # column index
    L = np.arange(1, T + 1)[None, :]  # prefix length
    col_sums = ad.matmul(ad.sigmoid(ad.depthwise_conv1d(S, params.dw_w)), (j <= L - 1 - p).astype(float))
    for q in range(1, p + 1):
        taps = (np.arange(r) < p + q).astype(float)
        edge = ad.sigmoid(ad.depthwise_conv1d(S, ad.mul(params.dw_w, taps)))
        col_sums = ad.add(col_sums, ad.matmul(edge, (j == L - q).astype(float)))
    # rows: prefix length; columns: frame i, kept only when i is inside the prefix
    rho = ad.mul(ad.transpose(col_sums, swap), (j.T < L.T) / L.T)
    Z = ad.matmul(ad.matmul(rho, ad.matmul(U, params.pw_w)), params.w_aaa)
    w = ad.softmax(ad.swish(ad.linear(ad.swish(ad.linear(Z, params.b_v0)), params.b_v1)), axis=-1)
    return ad.mul(w, Z)
