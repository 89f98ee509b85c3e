"""Feature sequences, the multi-scale input tensor and the LFS1 container.

An LFS1 dataset is a directory holding ``manifest.json`` and one binary
file per video::

    b"LFS1" | u32 T | u32 N | u32 d                     (little endian)
    T * (N + 1) * d  float32   frame feature, then N objects, per frame
    T * N * 4        float32   object boxes (x1, y1, x2, y2), relative

Features live as float64 in memory and are narrowed to float32 on disk, so
a sequence survives a store/load round trip bit-exactly only if its values
are float32-representable. :func:`synthesize_dataset` produces such values.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Tensor, concat, reshape

MAGIC = b"LFS1"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIII")


class FeatureFormatError(ValueError):
    """Base class for malformed or inconsistent feature data."""


class BadMagicError(FeatureFormatError):
    pass


class HeaderMismatchError(FeatureFormatError):
    pass


class TruncatedFileError(FeatureFormatError):
    pass


class OnsetRangeError(FeatureFormatError):
    pass


@dataclass(frozen=True)
class SpatialLayout:
    """How a d-vector is folded into ``(entity_channels, grid_h, grid_w)``."""

    entity_channels: int
    grid_h: int
    grid_w: int

    def __post_init__(self):
        for name in ("entity_channels", "grid_h", "grid_w"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ValueError(f"SpatialLayout.{name} must be a positive integer, got {v!r}")

    @property
    def d(self) -> int:
        return self.entity_channels * self.grid_h * self.grid_w

    @property
    def positions(self) -> int:
        return self.grid_h * self.grid_w

    def channels(self, num_objects: int) -> int:
        return (num_objects + 1) * self.entity_channels

    @classmethod
    def default_for(cls, d: int) -> "SpatialLayout":
        """(8, 8, 8) for d=512, (2, 4, 4) for d=32, else the squarest grid."""
        if d == 512:
            return cls(8, 8, 8)
        if d == 32:
            return cls(2, 4, 4)
        best = None
        for h in range(1, d + 1):
            for w in range(h, d + 1):
                if d % (h * w) == 0:
                    c = d // (h * w)
                    key = (abs(c - h), abs(w - h), -h * w)
                    if best is None or key < best[0]:
                        best = (key, cls(c, h, w))
        return best[1]


@dataclass
class FeatureSequence:
    """One video's per-frame features.

    ``onset_frame`` is a 1-based frame number; array index ``t - 1`` holds
    frame ``t``. ``valid`` marks real (non-padded) objects per frame.
    """

    video_id: str
    object_features: np.ndarray  # (T, N, d)
    frame_features: np.ndarray  # (T, d)
    object_boxes: np.ndarray  # (T, N, 4)
    label: int
    onset_frame: int | None
    fps: float
    valid: np.ndarray | None = None  # (T, N) bool
    accident_pair: tuple[int, int] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.object_features = np.asarray(self.object_features, dtype=np.float64)
        self.frame_features = np.asarray(self.frame_features, dtype=np.float64)
        self.object_boxes = np.asarray(self.object_boxes, dtype=np.float64)
        if self.valid is None:
            self.valid = np.ones(self.object_features.shape[:2], dtype=bool)
        else:
            self.valid = np.asarray(self.valid, dtype=bool)
        self.validate()

    @property
    def T(self) -> int:
        return self.object_features.shape[0]

    @property
    def N(self) -> int:
        return self.object_features.shape[1]

    @property
    def d(self) -> int:
        return self.object_features.shape[2]

    def validate(self) -> None:
        of, ff, bx = self.object_features, self.frame_features, self.object_boxes
        if of.ndim != 3:
            raise HeaderMismatchError(f"{self.video_id}: object features must be (T, N, d), got {of.shape}")
        T, N, d = of.shape
        if ff.shape != (T, d):
            raise HeaderMismatchError(f"{self.video_id}: frame features {ff.shape} != ({T}, {d})")
        if bx.shape != (T, N, 4):
            raise HeaderMismatchError(f"{self.video_id}: boxes {bx.shape} != ({T}, {N}, 4)")
        if self.valid.shape != (T, N):
            raise HeaderMismatchError(f"{self.video_id}: validity mask {self.valid.shape} != ({T}, {N})")
        if not self.fps > 0:
            raise FeatureFormatError(f"{self.video_id}: fps must be positive, got {self.fps}")
        if self.label not in (0, 1):
            raise FeatureFormatError(f"{self.video_id}: label must be 0 or 1, got {self.label}")
        if self.label == 1:
            if self.onset_frame is None or not 1 <= self.onset_frame <= T:
                raise OnsetRangeError(
                    f"{self.video_id}: onset frame {self.onset_frame} outside [1, {T}] for a positive video")
        elif self.onset_frame is not None:
            raise OnsetRangeError(f"{self.video_id}: negative video must not carry an onset frame")

    def truncated(self, t: int) -> "FeatureSequence":
        """The first ``t`` frames; the onset is dropped if it falls later."""
        onset = self.onset_frame if self.onset_frame is not None and self.onset_frame <= t else None
        return FeatureSequence(
            self.video_id, self.object_features[:t], self.frame_features[:t], self.object_boxes[:t],
            self.label if onset is not None else 0, onset, self.fps,
            self.valid[:t], self.accident_pair if onset is not None else None, dict(self.meta))


def spatialize(objects, frame, layout: SpatialLayout) -> Tensor:
    """Stack the frame feature and object features into ``O_t``.

    ``objects`` has shape ``(..., N, d)`` and ``frame`` ``(..., d)``. The
    result is ``(..., (N+1) * c_e, H, W)`` with the frame feature in channel
    block 0 and object ``i`` in block ``i + 1``, each reshaped row-major.
    Works on tensors so gradients reach the inputs.
    """
    objects = objects if isinstance(objects, Tensor) else Tensor(objects)
    frame = frame if isinstance(frame, Tensor) else Tensor(frame)
    d = objects.shape[-1]
    if frame.shape[-1] != d:
        raise ValueError(f"spatialize: frame dimension {frame.shape[-1]} != object dimension {d}")
    if d != layout.d:
        raise ValueError(
            f"spatialize: dimension {d} does not factor as {layout.entity_channels}x"
            f"{layout.grid_h}x{layout.grid_w} = {layout.d}")
    lead = objects.shape[:-2]
    n = objects.shape[-2]
    entities = concat([reshape(frame, lead + (1, d)), objects], axis=-2)
    return reshape(entities, lead + ((n + 1) * layout.entity_channels, layout.grid_h, layout.grid_w))


# ----------------------------------------------------------------------------
# LFS1 container


def _expected_bytes(T: int, N: int, d: int) -> int:
    return _HEADER.size + 4 * T * (N + 1) * d + 4 * T * N * 4


def store_sequence(seq: FeatureSequence, path) -> dict:
    """Write the binary part of ``seq`` to ``path``; return its manifest entry."""
    path = Path(path)
    seq.validate()
    T, N, d = seq.T, seq.N, seq.d
    feats = np.concatenate([seq.frame_features[:, None, :], seq.object_features], axis=1)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, T, N, d))
        fh.write(feats.astype("<f4").tobytes())
        fh.write(seq.object_boxes.astype("<f4").tobytes())
    entry = {
        "video_id": seq.video_id,
        "file": path.name,
        "label": int(seq.label),
        "onset_frame": None if seq.onset_frame is None else int(seq.onset_frame),
        "fps": float(seq.fps),
        "T": T,
        "N": N,
        "d": d,
    }
    if not seq.valid.all():
        entry["valid"] = seq.valid.astype(int).tolist()
    if seq.accident_pair is not None:
        entry["accident_pair"] = [int(i) for i in seq.accident_pair]
    if seq.meta:
        entry["meta"] = seq.meta
    return entry


def load_sequence(path, entry: dict) -> FeatureSequence:
    """Read one LFS1 video file, checking it against its manifest entry."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise TruncatedFileError(
            f"{path}: truncated header, expected at least {_HEADER.size} bytes, got {len(raw)}")
    magic, T, N, d = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic bytes {magic!r}, expected {MAGIC!r}")
    for key, got in (("T", T), ("N", N), ("d", d)):
        if key in entry and int(entry[key]) != got:
            raise HeaderMismatchError(f"{path}: header {key}={got} but manifest says {entry[key]}")
    expected = _expected_bytes(T, N, d)
    if len(raw) < expected:
        raise TruncatedFileError(f"{path}: truncated, expected {expected} bytes, got {len(raw)}")
    if len(raw) > expected:
        raise HeaderMismatchError(
            f"{path}: header (T={T}, N={N}, d={d}) implies {expected} bytes, file has {len(raw)}")
    off = _HEADER.size
    nfeat = T * (N + 1) * d
    feats = np.frombuffer(raw, dtype="<f4", count=nfeat, offset=off).astype(np.float64)
    feats = feats.reshape(T, N + 1, d)
    boxes = np.frombuffer(raw, dtype="<f4", count=T * N * 4, offset=off + 4 * nfeat)
    boxes = boxes.astype(np.float64).reshape(T, N, 4)
    label = int(entry.get("label", 0))
    onset = entry.get("onset_frame")
    if label == 1 and (onset is None or not 1 <= int(onset) <= T):
        raise OnsetRangeError(f"{path}: onset frame {onset} outside [1, {T}] for a positive video")
    pair = entry.get("accident_pair")
    return FeatureSequence(
        video_id=str(entry.get("video_id", path.stem)),
        object_features=feats[:, 1:, :],
        frame_features=feats[:, 0, :],
        object_boxes=boxes,
        label=label,
        onset_frame=None if onset is None else int(onset),
        fps=float(entry.get("fps", 0.0)),
        valid=None if "valid" not in entry else np.asarray(entry["valid"], dtype=bool),
        accident_pair=None if pair is None else (int(pair[0]), int(pair[1])),
        meta=dict(entry.get("meta", {})),
    )


def store_dataset(seqs, directory, extra: dict | None = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    videos = []
    for seq in seqs:
        videos.append(store_sequence(seq, directory / f"{seq.video_id}.lfs"))
    manifest = {"format_version": FORMAT_VERSION, "videos": videos}
    if extra:
        manifest.update(extra)
    with open(directory / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
    return directory


def load_dataset(directory, split: str | None = None) -> list[FeatureSequence]:
    """Load every video listed in ``directory/manifest.json``.

    With ``split`` given, only entries whose ``meta.split`` matches are kept
    (entries without a split tag are always kept).
    """
    directory = Path(directory)
    with open(directory / "manifest.json", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise FeatureFormatError(
            f"{directory}: unsupported format_version {manifest.get('format_version')!r}")
    seqs = []
    for entry in manifest["videos"]:
        tag = entry.get("meta", {}).get("split")
        if split is not None and tag is not None and tag != split:
            continue
        seqs.append(load_sequence(directory / entry["file"], entry))
    return seqs


def stack_batch(seqs):
    """Stack equal-length sequences into ``(b, T, N, d)`` / ``(b, T, d)`` arrays."""
    shapes = {s.object_features.shape for s in seqs}
    if len(shapes) != 1:
        raise ValueError(f"stack_batch: sequences differ in shape: {sorted(shapes)}")
    objs = np.stack([s.object_features for s in seqs])
    frames = np.stack([s.frame_features for s in seqs])
    return objs, frames
