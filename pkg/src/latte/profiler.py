"""Closed-form FLOP and parameter accounting.

Counting rules (frozen; all counts are exact integers):

* matrix multiply ``(m x k) @ (k x n)``: ``2 m k n`` flops;
* depthwise convolution, ``k`` taps per output, ``P`` positions, ``C``
  channels: ``2 k P C`` flops, ``k C`` parameters (a 3x3 kernel has 9 taps);
* pointwise / 1x1 convolution over ``P`` positions: ``2 P C_in C_out``;
* element-wise ops (bias add, products, activations, dropout): one flop per
  output element;
* reductions (means, sums, max): one flop per input element;
* softmax over ``n`` entries: ``4 n``.

Reshapes, transposes, slices and concatenations are free. Only learnable
scalars count as parameters. The per-frame profile evaluates the causal
context at ``t = T``; the per-video figure sums every frame with the
context evaluated on its own prefix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import ModelConfig

MODULES = ("emsa", "maa", "aaa", "fuse", "head")


@dataclass(frozen=True)
class LayerCost:
    name: str
    flops: int
    params: int = 0
    scaling: str = "const"  # spatial (~H*W), directional (~H+W), temporal (~t), const

    @property
    def module(self) -> str:
        return self.name.split(".", 1)[0]


@dataclass
class CostProfile:
    layers: list = field(default_factory=list)
    T: int = 1
    per_video_flops: int = 0

    @property
    def total_flops(self) -> int:
        return sum(layer.flops for layer in self.layers)

    @property
    def total_params(self) -> int:
        return sum(layer.params for layer in self.layers)

    def module_params(self, module: str) -> int:
        return sum(layer.params for layer in self.layers if layer.module == module)

    def module_flops(self, module: str) -> int:
        return sum(layer.flops for layer in self.layers if layer.module == module)

    def to_dict(self) -> dict:
        return {
            "per_layer": [{"name": l.name, "flops": l.flops, "params": l.params, "scaling": l.scaling}
                          for l in self.layers],
            "modules": {m: {"flops": self.module_flops(m), "params": self.module_params(m)}
                        for m in MODULES},
            "totals": {"flops_per_frame": self.total_flops, "params": self.total_params,
                       "flops_per_video": self.per_video_flops, "T": self.T},
        }


def matmul_flops(m: int, k: int, n: int) -> int:
    return 2 * m * k * n


def softmax_flops(n: int) -> int:
    return 4 * n


def emsa_layers(C: int, G: int, H: int, W: int) -> list[LayerCost]:
    P, cg = H * W, C // G
    L = H + W
    return [
        LayerCost("emsa.directional_pool", 2 * C * P, 0, "spatial"),
        LayerCost("emsa.mix1x1", G * matmul_flops(cg, cg, L) + C * L, G * (cg * cg + cg), "directional"),
        LayerCost("emsa.gate_sigmoid", C * L, 0, "directional"),
        LayerCost("emsa.gate_apply", 2 * C * P, 0, "spatial"),
        LayerCost("emsa.dwconv3x3", 2 * 9 * P * C + C * P, 9 * C + C, "spatial"),
        LayerCost("emsa.branch_pool", 2 * C * P, 0, "spatial"),
        LayerCost("emsa.branch_softmax", 2 * G * softmax_flops(cg), 0, "const"),
        LayerCost("emsa.cross_contract", 2 * G * matmul_flops(1, cg, P) + G * P, 0, "spatial"),
        LayerCost("emsa.attn_sigmoid", G * P, 0, "spatial"),
        LayerCost("emsa.attn_apply", 2 * C * P, 0, "spatial"),
        LayerCost("emsa.output_pool", 2 * C * P, 0, "spatial"),
    ]


def maa_layers(C: int, S: int, r: int, P: int) -> list[LayerCost]:
    return [
        LayerCost("maa.key_proj", matmul_flops(P, C, S), C * S, "spatial"),
        LayerCost("maa.softmax", P * softmax_flops(S), 0, "spatial"),
        LayerCost("maa.hadamard", P * S, 0, "spatial"),
        LayerCost("maa.value_proj", matmul_flops(P, S, C), S * C, "spatial"),
        LayerCost("maa.tanh", P * S, 0, "spatial"),
        LayerCost("maa.temporal_proj", matmul_flops(P, S, C), S * C, "spatial"),
        LayerCost("maa.sigmoid", P * C, 0, "spatial"),
        LayerCost("maa.beta", P * C, 0, "spatial"),
        LayerCost("maa.gate", P * C, 0, "spatial"),
        LayerCost("maa.dwconv", 2 * r * P * C, r * C, "spatial"),
        LayerCost("maa.pool", P * C, 0, "spatial"),
    ]


def aaa_layers(d_u: int, r: int, t: int) -> list[LayerCost]:
    return [
        LayerCost("aaa.pointwise", matmul_flops(t, d_u, d_u), d_u * d_u, "temporal"),
        LayerCost("aaa.gram", matmul_flops(t, d_u, t), 0, "temporal"),
        LayerCost("aaa.dwconv", 2 * r * t * t, r, "temporal"),
        LayerCost("aaa.sigmoid", t * t, 0, "temporal"),
        LayerCost("aaa.row_pool", t * t, 0, "temporal"),
        LayerCost("aaa.weighted_sum", matmul_flops(1, t, d_u), 0, "temporal"),
        LayerCost("aaa.project", matmul_flops(1, d_u, d_u), d_u * d_u, "const"),
        LayerCost("aaa.factor0", matmul_flops(1, d_u, d_u) + d_u, d_u * d_u, "const"),
        LayerCost("aaa.factor1", matmul_flops(1, d_u, d_u) + d_u, d_u * d_u, "const"),
        LayerCost("aaa.softmax", softmax_flops(d_u), 0, "const"),
        LayerCost("aaa.gate", d_u, 0, "const"),
    ]


def fuse_layers(config: ModelConfig) -> list[LayerCost]:
    C, P, du = config.C, config.P, config.d_u
    layers = [LayerCost("fuse.input_pool", C * P, 0, "spatial"),
              LayerCost("fuse.w_pool", matmul_flops(1, C, du), C * du)]
    terms = 1
    if config.emsa_on:
        layers.append(LayerCost("fuse.w_emsa", matmul_flops(1, 2 * C, du), 2 * C * du))
        terms += 1
    if config.maa_on:
        layers.append(LayerCost("fuse.w_maa", matmul_flops(1, C, du), C * du))
        terms += 1
    layers.append(LayerCost("fuse.bias_sum", terms * du, du))
    return layers


def head_layers(config: ModelConfig) -> list[LayerCost]:
    du, hh = config.d_u, config.head_hidden
    layers = [LayerCost("head.fc1", matmul_flops(1, 2 * du, hh) + hh, 2 * du * hh + hh),
              LayerCost("head.swish", hh)]
    if config.dropout_p > 0:
        layers.append(LayerCost("head.dropout", hh))
    layers += [LayerCost("head.fc2", matmul_flops(1, hh, 1) + 1, hh + 1),
               LayerCost("head.sigmoid", 1)]
    return layers


def profile_model(config: ModelConfig, T: int = 50) -> CostProfile:
    """Per-layer costs of one forward pass (one head sample)."""
    if not isinstance(config, ModelConfig):
        raise TypeError("profile_model expects a ModelConfig")
    config.validate()
    if T < 1:
        raise ValueError(f"profile_model: T must be >= 1, got {T}")
    frame_layers: list[LayerCost] = []
    if config.emsa_on:
        frame_layers += emsa_layers(config.C, config.G, config.H, config.W)
    if config.maa_on:
        frame_layers += maa_layers(config.C, config.S, config.r_maa, config.P)
    frame_layers += fuse_layers(config)
    head = head_layers(config)
    layers = list(frame_layers)
    if config.aaa_on:
        layers += aaa_layers(config.d_u, config.r_aaa, T)
    layers += head
    per_frame_fixed = sum(l.flops for l in frame_layers) + sum(l.flops for l in head)
    per_video = T * per_frame_fixed
    if config.aaa_on:
        per_video += sum(l.flops for t in range(1, T + 1) for l in aaa_layers(config.d_u, config.r_aaa, t))
    return CostProfile(layers, T, per_video)
