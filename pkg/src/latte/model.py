"""Full anticipation model: trunk, causal context, MC-dropout head, alerts.

Per frame ``t``::

    O_t = spatialize(Q_t, g_t)
    u_t = W_e pool(EMSA(O_t)) + W_m MAA(O_t) + W_o pool(O_t) + b     (d_u,)
    c_t = AAA(u_1..u_t)            (or u_t when AAA is switched off)
    p_t = sigmoid(w2 . dropout(swish(W1 [u_t, c_t] + b1)) + b2)

The EMSA and MAA terms vanish when their switches are off; the pooled
``O_t`` term is always present so every ablation stays well posed.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .aaa import AaaParams, aaa_forward, aaa_sequence
from .emsa import EmsaParams, emsa_forward, global_pool_2d
from .features import FeatureSequence, SpatialLayout, spatialize
from .maa import MaaParams, maa_forward

__all__ = [
    "ModelConfig",
    "PredictionSeries",
    "AlertRecord",
    "param_shapes",
    "module_of",
    "init_params",
    "frame_descriptors",
    "head_probability",
    "sequence_forward",
    "frame_step",
    "predict_video",
    "attribute_entities",
    "generate_alerts",
    "save_checkpoint",
    "load_checkpoint",
]

ALERT_TEMPLATE = "accident risk {prob:.2f} at t={sec:.1f}s; entities {ids}"


@dataclass(frozen=True)
class ModelConfig:
    N: int = 19
    d: int = 512
    layout: SpatialLayout | None = None
    G: int = 4
    S: int | None = None  # default C // 4
    r_maa: int = 3
    r_aaa: int = 3
    d_u: int = 512
    head_hidden: int = 64
    dropout_p: float = 0.1
    mc_samples: int = 8
    emsa_on: bool = True
    maa_on: bool = True
    aaa_on: bool = True
    threshold: float = 0.5

    def __post_init__(self):
        if self.layout is None:
            object.__setattr__(self, "layout", SpatialLayout.default_for(self.d))
        elif isinstance(self.layout, (list, tuple)):
            object.__setattr__(self, "layout", SpatialLayout(*self.layout))
        elif isinstance(self.layout, dict):
            object.__setattr__(self, "layout", SpatialLayout(**self.layout))
        if self.S is None:
            object.__setattr__(self, "S", max(1, self.C // 4))
        self.validate()

    @property
    def C(self) -> int:
        return self.layout.channels(self.N)

    @property
    def H(self) -> int:
        return self.layout.grid_h

    @property
    def W(self) -> int:
        return self.layout.grid_w

    @property
    def P(self) -> int:
        return self.layout.positions

    def validate(self) -> None:
        if self.N < 0 or self.d < 1:
            raise ValueError(f"ModelConfig: invalid N={self.N} or d={self.d}")
        if self.layout.d != self.d:
            raise ValueError(f"ModelConfig: layout {self.layout} does not factor d={self.d}")
        if self.G < 1 or self.C % self.G:
            raise ValueError(f"ModelConfig: G={self.G} does not divide C={self.C}")
        if not 1 <= self.S < self.C:
            raise ValueError(f"ModelConfig: S={self.S} must satisfy 1 <= S < C={self.C}")
        for name in ("r_maa", "r_aaa"):
            r = getattr(self, name)
            if r < 1 or r % 2 == 0:
                raise ValueError(f"ModelConfig: {name}={r} must be a positive odd integer")
        if self.d_u < 1 or self.head_hidden < 1 or self.mc_samples < 1:
            raise ValueError("ModelConfig: d_u, head_hidden and mc_samples must be positive")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError(f"ModelConfig: dropout_p={self.dropout_p} outside [0, 1)")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"ModelConfig: threshold={self.threshold} outside (0, 1)")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["layout"] = [self.layout.entity_channels, self.layout.grid_h, self.layout.grid_w]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"ModelConfig: unknown keys {sorted(unknown)}")
        return cls(**data)

    def with_switches(self, emsa: bool = True, maa: bool = True, aaa: bool = True) -> "ModelConfig":
        return replace(self, emsa_on=emsa, maa_on=maa, aaa_on=aaa)


# ----------------------------------------------------------------------------
# parameters


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Ordered name -> shape inventory of every learnable array."""
    C, du, hh = config.C, config.d_u, config.head_hidden
    shapes: dict[str, tuple[int, ...]] = {}
    if config.emsa_on:
        shapes.update({f"emsa.{k}": v for k, v in EmsaParams.shapes(C, config.G).items()})
    if config.maa_on:
        shapes.update({f"maa.{k}": v for k, v in MaaParams.shapes(C, config.S, config.r_maa).items()})
    if config.aaa_on:
        shapes.update({f"aaa.{k}": v for k, v in AaaParams.shapes(du, config.r_aaa).items()})
    if config.emsa_on:
        shapes["fuse.w_emsa"] = (2 * C, du)
    if config.maa_on:
        shapes["fuse.w_maa"] = (C, du)
    shapes["fuse.w_pool"] = (C, du)
    shapes["fuse.b"] = (du,)
    shapes["head.w1"] = (2 * du, hh)
    shapes["head.b1"] = (hh,)
    shapes["head.w2"] = (hh, 1)
    shapes["head.b2"] = (1,)
    return shapes


def module_of(name: str) -> str:
    return name.split(".", 1)[0]


def init_params(config: ModelConfig, seed: int = 0) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    C, du, hh = config.C, config.d_u, config.head_hidden
    params: dict[str, np.ndarray] = {}
    if config.emsa_on:
        params.update(EmsaParams.init(C, config.G, rng).to_flat())
    if config.maa_on:
        params.update(MaaParams.init(C, config.S, config.r_maa, rng).to_flat())
    if config.aaa_on:
        params.update(AaaParams.init(du, config.r_aaa, rng).to_flat())
    fan_in = C * (1 + 2 * config.emsa_on + config.maa_on)
    if config.emsa_on:
        params["fuse.w_emsa"] = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(2 * C, du))
    if config.maa_on:
        params["fuse.w_maa"] = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(C, du))
    params["fuse.w_pool"] = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(C, du))
    params["fuse.b"] = np.zeros(du)
    params["head.w1"] = rng.normal(0.0, 1.0 / np.sqrt(2 * du), size=(2 * du, hh))
    params["head.b1"] = np.zeros(hh)
    params["head.w2"] = rng.normal(0.0, 1.0 / np.sqrt(hh), size=(hh, 1))
    params["head.b2"] = np.zeros(1)
    check_params(params, config)
    return params


def check_params(params: dict, config: ModelConfig) -> None:
    expected = param_shapes(config)
    missing = sorted(set(expected) - set(params))
    extra = sorted(set(params) - set(expected))
    if missing or extra:
        raise ValueError(f"parameters do not match config: missing {missing}, unexpected {extra}")
    for name, shape in expected.items():
        got = tuple(ad.as_tensor(params[name]).shape)
        if got != tuple(shape):
            raise ValueError(f"parameter {name} has shape {got}, config expects {tuple(shape)}")


# ----------------------------------------------------------------------------
# forward pieces


def frame_descriptors(params: dict, objects, frame, config: ModelConfig) -> ad.Tensor:
    """``(..., N, d), (..., d) -> (..., d_u)``."""
    O = spatialize(objects, frame, config.layout)
    u = ad.add(ad.linear(global_pool_2d(O), params["fuse.w_pool"]), params["fuse.b"])
    if config.emsa_on:
        e = global_pool_2d(emsa_forward(O, EmsaParams.from_flat(params, config.G)))
        u = ad.add(u, ad.linear(e, params["fuse.w_emsa"]))
    if config.maa_on:
        m = maa_forward(O, MaaParams.from_flat(params))
        u = ad.add(u, ad.linear(m, params["fuse.w_maa"]))
    return u


def _head_logit(params, hidden, config, rng, sample: bool):
    if sample:
        hidden = ad.dropout(hidden, config.dropout_p, rng, training=True)
    return ad.add(ad.linear(hidden, params["head.w2"]), params["head.b2"])


def head_probability(params: dict, u, c, config: ModelConfig, mode: str = "eval",
                     rng: np.random.Generator | None = None, samples: int | None = None) -> ad.Tensor:
    """Per-frame probability from descriptor ``u`` and context ``c``.

    ``mode="train"`` draws one dropout mask. In ``"eval"`` mode the mean of
    ``samples`` (default ``config.mc_samples``) dropout-sampled passes is
    returned; a single sample means no dropout. ``mode="sample"`` always
    draws masks, which is what the variance comparison between sample counts
    needs.
    """
    x = ad.concat([u, c], axis=-1)
    hidden = ad.swish(ad.add(ad.linear(x, params["head.w1"]), params["head.b1"]))
    lead = tuple(hidden.shape[:-1])
    k = config.mc_samples if samples is None else samples
    if mode == "train":
        return ad.reshape(ad.sigmoid(_head_logit(params, hidden, config, rng, True)), lead)
    if mode not in ("eval", "sample"):
        raise ValueError(f"unknown mode {mode!r}")
    sample = mode == "sample" or k > 1
    if sample and config.dropout_p > 0 and rng is None:
        raise ValueError("MC-dropout sampling needs a random generator")
    total = None
    for _ in range(k):
        p = ad.sigmoid(_head_logit(params, hidden, config, rng, sample and config.dropout_p > 0))
        total = p if total is None else ad.add(total, p)
    if k > 1:
        total = ad.mul(total, 1.0 / k)
    return ad.reshape(total, lead)


def sequence_forward(params: dict, objects, frames, config: ModelConfig, mode: str = "train",
                     rng: np.random.Generator | None = None) -> ad.Tensor:
    """Batched causal forward: ``(b, T, N, d), (b, T, d) -> probabilities (b, T)``."""
    u = frame_descriptors(params, objects, frames, config)
    c = aaa_sequence(u, AaaParams.from_flat(params)) if config.aaa_on else u
    return head_probability(params, u, c, config, mode=mode, rng=rng)


def frame_step(history, Q_t, g_t, params: dict, config: ModelConfig, mode: str = "eval",
               rng: np.random.Generator | None = None):
    """Advance one frame: returns ``(U_1..t as (t, d_u) array, p_t)``.

    Every array handled here has a shape fixed by ``t`` alone, so the first
    ``t`` probabilities of a video never depend on later frames, bit for bit.
    """
    Q_t = np.asarray(Q_t, dtype=np.float64)
    g_t = np.asarray(g_t, dtype=np.float64)
    if Q_t.shape != (config.N, config.d) or g_t.shape != (config.d,):
        raise ValueError(f"frame_step: expected objects ({config.N}, {config.d}) and frame ({config.d},), "
                         f"got {Q_t.shape} and {g_t.shape}")
    u_t = frame_descriptors(params, Q_t, g_t, config).data
    if history is None or len(history) == 0:
        U = u_t[None, :]
    else:
        U = np.concatenate([np.asarray(history), u_t[None, :]], axis=0)
    c_t = aaa_forward(U, AaaParams.from_flat(params)).data if config.aaa_on else u_t
    p = head_probability(params, u_t, c_t, config, mode=mode, rng=rng)
    return U, float(p.item())


# ----------------------------------------------------------------------------
# prediction records


@dataclass
class PredictionSeries:
    video_id: str
    probs: np.ndarray
    threshold: float = 0.5
    fps: float = 10.0

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)

    @property
    def p_vid(self) -> float:
        return float(self.probs.max())

    @property
    def crossing_frame(self) -> int | None:
        """First 1-based frame with ``p_t >= threshold``."""
        hits = np.flatnonzero(self.probs >= self.threshold)
        return int(hits[0]) + 1 if hits.size else None

    def to_dict(self) -> dict:
        return {"video_id": self.video_id, "probs": self.probs.tolist(), "p_vid": self.p_vid,
                "crossing_frame": self.crossing_frame, "threshold": self.threshold, "fps": self.fps}


@dataclass
class AlertRecord:
    video_id: str
    frame: int
    seconds: float
    probability: float
    entities: list = field(default_factory=list)  # [(index, saliency), ...]
    message: str = ""

    def to_dict(self) -> dict:
        return {"video_id": self.video_id, "frame": self.frame, "seconds": self.seconds,
                "probability": self.probability,
                "entities": [{"index": int(i), "saliency": float(s)} for i, s in self.entities],
                "message": self.message}


def predict_video(seq: FeatureSequence, params: dict, config: ModelConfig, seed: int = 0,
                  mode: str = "eval") -> PredictionSeries:
    check_params(params, config)
    rng = np.random.default_rng(seed)
    history = None
    probs = np.empty(seq.T)
    for i in range(seq.T):
        history, probs[i] = frame_step(history, seq.object_features[i], seq.frame_features[i],
                                       params, config, mode=mode, rng=rng)
    return PredictionSeries(seq.video_id, probs, config.threshold, seq.fps)


def attribute_entities(seq: FeatureSequence, params: dict, config: ModelConfig, t: int):
    """Rank valid objects at 1-based frame ``t`` by ``||d p_t / d q_t^i||``.

    The head is evaluated without dropout. Ties keep ascending index order.
    """
    if not 1 <= t <= seq.T:
        raise ValueError(f"attribute_entities: frame {t} outside [1, {seq.T}]")
    check_params(params, config)
    history = None
    if t > 1:
        history = np.stack([frame_descriptors(params, seq.object_features[i], seq.frame_features[i],
                                              config).data for i in range(t - 1)])
    tape = ad.Tape()
    q = tape.watch(seq.object_features[t - 1], name="objects")
    u_t = frame_descriptors(params, q, seq.frame_features[t - 1], config)
    if config.aaa_on:
        u_row = ad.reshape(u_t, (1, config.d_u))
        U = u_row if history is None else ad.concat([ad.Tensor(history), u_row], axis=0)
        c_t = aaa_forward(U, AaaParams.from_flat(params))
    else:
        c_t = u_t
    p = head_probability(params, u_t, c_t, config, mode="eval", samples=1)
    grad = ad.backward(p)[q.tape_id]
    saliency = np.linalg.norm(grad, axis=-1)
    valid = np.flatnonzero(seq.valid[t - 1])
    order = sorted(valid, key=lambda i: (-saliency[i], i))
    return [(int(i), float(saliency[i])) for i in order]


def generate_alerts(series: PredictionSeries, attribution=None, config: ModelConfig | None = None,
                    top_k: int = 2) -> list[AlertRecord]:
    """One record per upward crossing ``p_{t-1} < theta <= p_t`` (``p_0 = 0``).

    ``attribution`` is ``None``, a callable ``frame -> ranked list`` or a
    mapping from frame to ranked list of ``(index, saliency)``.
    """
    theta = series.threshold if config is None else config.threshold
    prev = np.concatenate([[0.0], series.probs[:-1]])
    frames = np.flatnonzero((prev < theta) & (series.probs >= theta)) + 1
    alerts = []
    for t in frames:
        t = int(t)
        if attribution is None:
            ranked = []
        elif callable(attribution):
            ranked = list(attribution(t))
        else:
            ranked = list(attribution.get(t, []))
        sec = t / series.fps
        prob = float(series.probs[t - 1])
        ids = ", ".join(str(i) for i, _ in ranked[:top_k]) or "none"
        alerts.append(AlertRecord(series.video_id, t, sec, prob, ranked,
                                  ALERT_TEMPLATE.format(prob=prob, sec=sec, ids=ids)))
    return alerts


# ----------------------------------------------------------------------------
# LCK1 checkpoints


def save_checkpoint(directory, params: dict, config: ModelConfig, extra: dict | None = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    inventory, chunks, offset = [], [], 0
    for name, shape in param_shapes(config).items():
        arr = np.ascontiguousarray(params[name], dtype="<f8")
        inventory.append({"name": name, "shape": list(shape), "offset": offset})
        chunks.append(arr.tobytes())
        offset += arr.nbytes
    manifest = {"format": "LCK1", "config": config.to_dict(), "parameters": inventory,
                "blob": "params.bin", "blob_bytes": offset}
    if extra:
        manifest.update(extra)
    (directory / "params.bin").write_bytes(b"".join(chunks))
    with open(directory / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
    return directory


def load_checkpoint(path) -> tuple[dict, ModelConfig]:
    path = Path(path)
    directory = path.parent if path.name == "manifest.json" else path
    with open(directory / "manifest.json", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format") != "LCK1":
        raise ValueError(f"{directory}: not an LCK1 checkpoint")
    config = ModelConfig.from_dict(manifest["config"])
    blob = (directory / manifest.get("blob", "params.bin")).read_bytes()
    expected = param_shapes(config)
    params = {}
    for item in manifest["parameters"]:
        name, shape, off = item["name"], tuple(item["shape"]), int(item["offset"])
        if name not in expected:
            raise ValueError(f"{directory}: parameter {name} is not part of the configured model")
        if shape != tuple(expected[name]):
            raise ValueError(f"{directory}: parameter {name} has shape {shape}, config expects {expected[name]}")
        n = int(np.prod(shape))
        if off + 8 * n > len(blob):
            raise ValueError(f"{directory}: blob too short for parameter {name}")
        params[name] = np.frombuffer(blob, dtype="<f8", count=n, offset=off).astype(np.float64).reshape(shape)
    check_params(params, config)
    return params, config
