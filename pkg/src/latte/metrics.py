"""Video-level AP, time-to-accident and the TTA@R80 recall sweep.

All metrics use the per-video score ``p_vid = max_t p_t``. AP uses
all-points interpolation over a strict ranking (descending score, ties by
ascending video position). Time-to-accident is ``(tau - t_p) / fps`` where
``t_p`` is the first frame with ``p_t >= threshold``; a video that never
crosses, or crosses after ``tau``, contributes 0.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import ModelConfig, PredictionSeries, predict_video

RECALL_TARGET = 0.80


@dataclass
class EvalResult:
    ap: float
    mtta_seconds: float
    tta_r80_seconds: float | None
    curve: list = field(default_factory=list)  # (threshold, precision, recall, mean_tta)

    def to_dict(self) -> dict:
        return {
            "ap": self.ap,
            "mtta_s": self.mtta_seconds,
            "tta_r80_s": self.tta_r80_seconds,
            "curve": [{"threshold": th, "precision": p, "recall": r, "mean_tta_s": m}
                      for th, p, r, m in self.curve],
        }


def _ranking(scores) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    return np.lexsort((np.arange(scores.size), -scores))


def average_precision(scores, labels) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(int)
    if scores.shape != labels.shape:
        raise ValueError(f"average_precision: {scores.shape} scores vs {labels.shape} labels")
    npos = int(labels.sum())
    if npos == 0:
        raise ValueError("average_precision: no positive videos, AP undefined")
    y = labels[_ranking(scores)]
    tp = np.cumsum(y)
    precision = tp / np.arange(1, y.size + 1)
    interp = np.maximum.accumulate(precision[::-1])[::-1]
    return float(interp[y == 1].sum() / npos)


def time_to_accident(series, onset: int, fps: float, threshold: float = 0.5) -> float:
    probs = np.asarray(series.probs if isinstance(series, PredictionSeries) else series)
    hits = np.flatnonzero(probs >= threshold)
    if hits.size == 0:
        return 0.0
    t_p = int(hits[0]) + 1
    if t_p > onset:
        return 0.0
    return max(0.0, (onset - t_p) / fps)


def _mean_tta(pos_series, onsets, fps, threshold) -> float:
    if not pos_series:
        return 0.0
    return float(np.mean([time_to_accident(s, tau, f, threshold)
                          for s, tau, f in zip(pos_series, onsets, fps)]))


def evaluate(predictions, labels, onsets, fps, threshold: float = 0.5,
             recall_target: float = RECALL_TARGET) -> EvalResult:
    """Score a prediction set.

    ``predictions`` holds per-video probability series (arrays or
    :class:`PredictionSeries`); ``onsets``/``fps`` are per video (onsets of
    negatives are ignored).
    """
    probs = [np.asarray(p.probs if isinstance(p, PredictionSeries) else p, dtype=np.float64)
             for p in predictions]
    labels = np.asarray(labels).astype(int)
    fps = np.broadcast_to(np.asarray(fps, dtype=np.float64), labels.shape)
    if len(probs) != labels.size:
        raise ValueError(f"evaluate: {len(probs)} predictions for {labels.size} videos")
    scores = np.array([p.max() for p in probs])
    ap = average_precision(scores, labels)
    pos = np.flatnonzero(labels == 1)
    pos_series = [probs[i] for i in pos]
    pos_onsets = [int(onsets[i]) for i in pos]
    pos_fps = [fps[i] for i in pos]
    mtta = _mean_tta(pos_series, pos_onsets, pos_fps, threshold)

    curve = []
    tta_r80 = None
    for th in np.unique(scores)[::-1]:
        predicted = scores >= th
        tp = int(np.sum(predicted & (labels == 1)))
        fp = int(np.sum(predicted & (labels == 0)))
        recall = tp / pos.size
        precision = tp / (tp + fp)
        m = _mean_tta(pos_series, pos_onsets, pos_fps, th)
        curve.append((float(th), precision, recall, m))
        if tta_r80 is None and recall >= recall_target:
            tta_r80 = m
    return EvalResult(ap, mtta, tta_r80, curve)


def evaluate_dataset(seqs, predictions, threshold: float = 0.5) -> EvalResult:
    return evaluate(predictions, [s.label for s in seqs], [s.onset_frame for s in seqs],
                    [s.fps for s in seqs], threshold)


def evaluate_model(seqs, params: dict, config: ModelConfig, seed: int = 0,
                   threshold: float | None = None) -> EvalResult:
    preds = [predict_video(s, params, config, seed=seed) for s in seqs]
    return evaluate_dataset(seqs, preds, config.threshold if threshold is None else threshold)


def write_report(result: EvalResult, directory, cost: dict | None = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    report = result.to_dict()
    if cost is not None:
        report["cost"] = cost
    with open(directory / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1)
    with open(directory / "pr_curve.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["threshold", "precision", "recall", "mean_tta_s"])
        w.writerows(result.curve)
    return directory / "report.json"
