"""Synthetic pre-crash feature sequences.

The generator works directly in feature space:

* every entity (frame feature and N objects) follows a Gaussian random walk
  starting from ``N(0, INIT_STD^2)`` with per-step std ``STEP_STD``;
* one unit "precursor" direction is drawn per dataset from the first child
  of ``SeedSequence(seed)`` as the normalised absolute value of a Gaussian
  draw, so it lies in the nonnegative orthant; video ``k`` uses child
  ``k + 1``;
* positive videos pick an onset ``tau`` uniformly among the integer frames in
  ``[0.6 T, 0.95 T]`` and an accident pair of objects. Over frames
  ``[tau - 0.3 T, tau]`` both objects receive ``m(t) * direction`` where
  ``m`` grows linearly from 0 to ``(1 - difficulty) * 2.0 + 0.2`` and is held
  after ``tau``; their boxes move linearly toward each other;
* negative videos add the same direction to one object with a target
  magnitude of at most ``0.3 * difficulty`` that is cut to zero before it
  reaches half of its growth (a near miss).

All values are rounded to float32 so LFS1 round trips are bit-exact.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .features import FeatureSequence

INIT_STD = 0.1
STEP_STD = 0.05
RAMP_FRACTION = 0.3
BOX_STEP = 0.01
BOX_CONVERGE = 0.8


@dataclass(frozen=True)
class SynthConfig:
    num_positive: int = 1
    num_negative: int = 1
    T: int = 50
    N: int = 5
    d: int = 32
    fps: float = 10.0
    difficulty: float = 0.2
    seed: int = 0

    def validate(self) -> None:
        if self.num_positive < 0 or self.num_negative < 0:
            raise ValueError("synthesize_dataset: video counts must be non-negative")
        if self.T < 1 or self.N < 1 or self.d < 1:
            raise ValueError(f"synthesize_dataset: T, N, d must be >= 1, got {self.T}, {self.N}, {self.d}")
        if self.T < 4:
            raise ValueError(f"synthesize_dataset: onset window is empty for T={self.T} (need T >= 4)")
        if not 0.0 <= self.difficulty <= 1.0:
            raise ValueError(f"synthesize_dataset: difficulty {self.difficulty} outside [0, 1]")
        if not self.fps > 0:
            raise ValueError(f"synthesize_dataset: fps must be positive, got {self.fps}")
        if self.num_positive > 0 and self.N < 2:
            raise ValueError("synthesize_dataset: positive videos need N >= 2 for an accident pair")

    def to_dict(self) -> dict:
        return asdict(self)


def ramp_peak(difficulty: float) -> float:
    """Final precursor magnitude for a positive video."""
    return (1.0 - difficulty) * 2.0 + 0.2


def onset_bounds(T: int) -> tuple[int, int]:
    """Inclusive integer range of onset frames inside ``[0.6 T, 0.95 T]``."""
    return math.ceil(0.6 * T), math.floor(0.95 * T)


def precursor_direction(seed: int, d: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    v = np.abs(rng.standard_normal(d))
    return v / np.linalg.norm(v)


def _random_walk(rng, T, shape):
    start = rng.normal(0.0, INIT_STD, size=shape)
    steps = rng.normal(0.0, STEP_STD, size=(T - 1,) + shape)
    return np.concatenate([start[None], start[None] + np.cumsum(steps, axis=0)], axis=0)


def _random_boxes(rng, T, N):
    centers = rng.uniform(0.2, 0.8, size=(N, 2))
    size = rng.uniform(0.05, 0.2, size=(N, 2))
    drift = np.cumsum(rng.normal(0.0, BOX_STEP, size=(T, N, 2)), axis=0)
    return centers[None] + drift, np.broadcast_to(size, (T, N, 2)).copy()


def _boxes_from(centers, size):
    half = size / 2
    return np.clip(np.concatenate([centers - half, centers + half], axis=-1), 0.0, 1.0)


def _ramp(T: int, start: float, end: float) -> np.ndarray:
    """Fraction in [0, 1] per 1-based frame, linear from ``start`` to ``end``."""
    t = np.arange(1, T + 1, dtype=np.float64)
    return np.clip((t - start) / (end - start), 0.0, 1.0)


def _make_video(cfg: SynthConfig, index: int, positive: bool, direction, ss_child) -> FeatureSequence:
    rng = np.random.default_rng(ss_child)
    T, N, d = cfg.T, cfg.N, cfg.d
    walks = _random_walk(rng, T, (N + 1, d))
    frame, objects = walks[:, 0], walks[:, 1:].copy()
    centers, size = _random_boxes(rng, T, N)
    meta: dict = {}
    if positive:
        lo, hi = onset_bounds(T)
        tau = int(rng.integers(lo, hi + 1))
        pair = tuple(int(i) for i in sorted(rng.choice(N, size=2, replace=False)))
        frac = _ramp(T, tau - RAMP_FRACTION * T, tau)
        mag = frac * ramp_peak(cfg.difficulty)
        for i in pair:
            objects[:, i] += mag[:, None] * direction
        a, b = pair
        gap = centers[:, b] - centers[:, a]
        shift = (BOX_CONVERGE / 2) * frac[:, None] * gap
        centers[:, a] += shift
        centers[:, b] -= shift
        label, onset = 1, tau
    else:
        target = 0.3 * cfg.difficulty * rng.uniform(0.5, 1.0)
        cut = rng.uniform(0.2, 0.5)
        length = RAMP_FRACTION * T
        start = rng.uniform(0.0, T - length)
        obj = int(rng.integers(N))
        frac = _ramp(T, start, start + length)
        mag = np.where(frac < cut, frac * target, 0.0)
        objects[:, obj] += mag[:, None] * direction
        label, onset, pair = 0, None, None
        meta["distractor"] = obj
    boxes = _boxes_from(centers, size)
    f32 = lambda a: a.astype(np.float32).astype(np.float64)  # noqa: E731
    return FeatureSequence(
        video_id=f"vid_{index:04d}",
        object_features=f32(objects),
        frame_features=f32(frame),
        object_boxes=f32(boxes),
        label=label,
        onset_frame=onset,
        fps=float(cfg.fps),
        accident_pair=pair,
        meta=meta,
    )


def synthesize_dataset(config: SynthConfig | dict) -> list[FeatureSequence]:
    """Positives first (``vid_0000`` ...), then negatives; deterministic in seed."""
    cfg = config if isinstance(config, SynthConfig) else SynthConfig(**config)
    cfg.validate()
    n = cfg.num_positive + cfg.num_negative
    children = np.random.SeedSequence(cfg.seed).spawn(n + 1)
    direction = precursor_direction(cfg.seed, cfg.d)
    return [_make_video(cfg, k, k < cfg.num_positive, direction, children[k + 1]) for k in range(n)]


def split_dataset(seqs, test_positive: int, test_negative: int):
    """Hold out the last ``test_positive`` positives and ``test_negative`` negatives."""
    pos = [s for s in seqs if s.label == 1]
    neg = [s for s in seqs if s.label == 0]
    if test_positive > len(pos) or test_negative > len(neg):
        raise ValueError("split_dataset: not enough videos to hold out")
    train = pos[:len(pos) - test_positive] + neg[:len(neg) - test_negative]
    test = pos[len(pos) - test_positive:] + neg[len(neg) - test_negative:]
    for s in train:
        s.meta["split"] = "train"
    for s in test:
        s.meta["split"] = "test"
    return train, test
