"""Efficient multiscale spatial aggregation.

The input ``O_t`` of shape ``(..., C, H, W)`` is split into ``G`` channel
groups. Each group runs two parallel branches:

* coarse: directional average pooling (over W and over H), a shared
  per-group 1x1 convolution on the concatenated ``(C_g, H + W)`` profile,
  sigmoid, then the two gate vectors rescale the group along rows and
  columns (``x1``);
* fine: a 3x3 depthwise convolution with zero padding (``x2``).

The branches are fused by contracting the softmaxed channel descriptor of
one branch against the other branch's map, in both directions, and gating
both branches with ``sigmoid(t1 + t2)``. The group output stacks the two
gated branches, so the module doubles the channel count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

KERNEL_SIZE = 3


def global_pool_2d(x) -> Tensor:
    """Mean over the last two (spatial) axes: ``(..., C, H, W) -> (..., C)``."""
    x = ad.as_tensor(x)
    if x.ndim < 2 or x.shape[-1] < 1 or x.shape[-2] < 1:
        raise ValueError(f"global_pool_2d: empty spatial extent in shape {x.shape}")
    return ad.mean(x, axis=(-2, -1))


def emsa_param_count(C: int, G: int) -> int:
    """``C^2/G + C`` for the grouped 1x1 mixes plus ``10 C`` for the 3x3 depthwise stack."""
    if G < 1 or C % G:
        raise ValueError(f"emsa_param_count: G={G} does not divide C={C}")
    cg = C // G
    return G * (cg * cg + cg) + G * (KERNEL_SIZE * KERNEL_SIZE * cg + cg)


@dataclass
class EmsaParams:
    groups: int
    mix_w: object  # (G, C_g, C_g)
    mix_b: object  # (G, C_g)
    dw_w: object  # (C, 3, 3)
    dw_b: object  # (C,)

    NAMES = ("mix_w", "mix_b", "dw_w", "dw_b")

    @property
    def channels(self) -> int:
        return ad.as_tensor(self.dw_w).shape[0]

    @staticmethod
    def shapes(C: int, G: int) -> dict:
        if G < 1 or C % G:
            raise ValueError(f"EMSA: G={G} does not divide C={C}")
        cg = C // G
        return {"mix_w": (G, cg, cg), "mix_b": (G, cg),
                "dw_w": (C, KERNEL_SIZE, KERNEL_SIZE), "dw_b": (C,)}

    @classmethod
    def init(cls, C: int, G: int, rng: np.random.Generator) -> "EmsaParams":
        shapes = cls.shapes(C, G)
        cg = C // G
        dw = rng.normal(0.0, 0.1, size=shapes["dw_w"])
        dw[:, 1, 1] += 1.0
        return cls(G,
                   rng.normal(0.0, 1.0 / np.sqrt(cg), size=shapes["mix_w"]),
                   np.zeros(shapes["mix_b"]),
                   dw,
                   np.zeros(shapes["dw_b"]))

    @classmethod
    def from_flat(cls, flat: dict, G: int, prefix: str = "emsa.") -> "EmsaParams":
        return cls(G, *(flat[prefix + n] for n in cls.NAMES))

    def to_flat(self, prefix: str = "emsa.") -> dict:
        return {prefix + n: getattr(self, n) for n in self.NAMES}


def emsa_forward(O, params: EmsaParams) -> Tensor:
    """``(..., C, H, W) -> (..., 2C, H, W)``."""
    O = ad.as_tensor(O)
    if O.ndim < 3:
        raise ValueError(f"emsa_forward: expected (..., C, H, W), got {O.shape}")
    *lead, C, H, W = O.shape
    lead = tuple(lead)
    G = params.groups
    if G < 1 or C % G:
        raise ValueError(f"emsa_forward: G={G} does not divide C={C}")
    if ad.as_tensor(params.dw_w).shape[0] != C:
        raise ValueError(f"emsa_forward: parameters built for C={params.channels}, input has C={C}")
    cg = C // G

    x = ad.reshape(O, lead + (G, cg, H, W))

    # coarse branch
    pooled = ad.concat([ad.mean(x, axis=-1), ad.mean(x, axis=-2)], axis=-1)  # (..., G, cg, H+W)
    mix_b = ad.reshape(params.mix_b, (G, cg, 1))
    gates = ad.sigmoid(ad.add(ad.conv1x1(pooled, params.mix_w), mix_b))
    a_h = ad.reshape(gates[..., :H], lead + (G, cg, H, 1))
    a_w = ad.reshape(gates[..., H:], lead + (G, cg, 1, W))
    x1 = ad.mul(ad.mul(x, a_h), a_w)

    # fine branch
    x2 = ad.add(ad.depthwise_conv2d(O, params.dw_w), ad.reshape(params.dw_b, (C, 1, 1)))
    x2 = ad.reshape(x2, lead + (G, cg, H, W))

    # cross-branch fusion
    s1 = ad.reshape(ad.softmax(global_pool_2d(x1), axis=-1), lead + (G, 1, cg))
    s2 = ad.reshape(ad.softmax(global_pool_2d(x2), axis=-1), lead + (G, 1, cg))
    flat1 = ad.reshape(x1, lead + (G, cg, H * W))
    flat2 = ad.reshape(x2, lead + (G, cg, H * W))
    t = ad.add(ad.matmul(s1, flat2), ad.matmul(s2, flat1))  # (..., G, 1, HW)
    attn = ad.reshape(ad.sigmoid(t), lead + (G, 1, H, W))

    out = ad.concat([ad.mul(x1, attn), ad.mul(x2, attn)], axis=-3)  # (..., G, 2cg, H, W)
    return ad.reshape(out, lead + (2 * C, H, W))
