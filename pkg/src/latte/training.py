"""Exponentially weighted frame loss, max-pooled video loss and training loop."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .features import FeatureSequence, stack_batch
from .model import ModelConfig, init_params, save_checkpoint, sequence_forward

logger = logging.getLogger(__name__)

PROB_EPS = 1e-12
CONVENTIONS = ("as_printed", "decay")


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class LossConfig:
    beta: float = 0.1
    lam: float = 1.0
    sign_convention: str = "as_printed"

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"LossConfig: lambda must be >= 0, got {self.lam}")
        if self.sign_convention not in CONVENTIONS:
            raise ValueError(f"LossConfig: sign_convention must be one of {CONVENTIONS}")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 15
    lr: float = 1e-3
    batch_size: int = 10
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    checkpoint_every: int = 0  # epochs; 0 = final checkpoint only

    def __post_init__(self):
        if not self.lr >= 0:
            raise ValueError(f"TrainConfig: learning rate must be >= 0, got {self.lr}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("TrainConfig: epochs and batch_size must be >= 1")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"TrainConfig: unknown optimizer {self.optimizer!r}")


def temporal_weight(t, tau, beta: float, convention: str = "as_printed"):
    """``exp(+/- beta * max(tau - t, 0))``; works element-wise on arrays."""
    gap = np.maximum(np.asarray(tau, dtype=np.float64) - np.asarray(t, dtype=np.float64), 0.0)
    if convention == "as_printed":
        return np.exp(beta * gap)
    if convention == "decay":
        return np.exp(-beta * gap)
    raise ValueError(f"unknown sign convention {convention!r}")


def _as_rows(probs):
    if isinstance(probs, (list, tuple)):
        return [ad.as_tensor(p) for p in probs]
    p = ad.as_tensor(probs)
    if p.ndim == 1:
        return [p]
    return [p[i] for i in range(p.shape[0])]


def _clamped_logs(p):
    logp = ad.log(p, floor=PROB_EPS, ceil=1.0 - PROB_EPS)
    log1mp = ad.log(ad.sub(1.0, p), floor=PROB_EPS, ceil=1.0 - PROB_EPS)
    return logp, log1mp


def frame_loss(probs, labels, onsets, loss_config: LossConfig = LossConfig()) -> ad.Tensor:
    """Sum over videos of the temporally weighted frame cross-entropy.

    ``probs`` is a ``(b, T)`` tensor or a list of per-video ``(T_v,)``
    tensors; ``onsets`` are 1-based frames (ignored for negatives).
    """
    labels = [int(v) for v in np.atleast_1d(labels)]
    onsets = list(onsets) if onsets is not None else [None] * len(labels)
    if isinstance(probs, (list, tuple)) or ad.as_tensor(probs).ndim == 1:
        rows = _as_rows(probs)
        if len(rows) != len(labels):
            raise ValueError(f"frame_loss: {len(rows)} videos but {len(labels)} labels")
        total = None
        for p, y, tau in zip(rows, labels, onsets):
            term = _frame_loss_batch(ad.reshape(p, (1, p.shape[-1])), [y], [tau], loss_config)
            total = term if total is None else ad.add(total, term)
        return total
    return _frame_loss_batch(ad.as_tensor(probs), labels, onsets, loss_config)


def _frame_loss_batch(p, labels, onsets, cfg):
    b, T = p.shape
    if len(labels) != b:
        raise ValueError(f"frame_loss: {b} videos but {len(labels)} labels")
    t = np.arange(1, T + 1, dtype=np.float64)
    pos_w = np.zeros((b, T))
    neg_w = np.zeros((b, T))
    for v, (y, tau) in enumerate(zip(labels, onsets)):
        if y == 1:
            if tau is None:
                raise ValueError(f"frame_loss: positive video {v} has no onset frame")
            pos_w[v] = temporal_weight(t, tau, cfg.beta, cfg.sign_convention)
        else:
            neg_w[v] = 1.0
    logp, log1mp = _clamped_logs(p)
    s = ad.add(ad.mul(logp, pos_w), ad.mul(log1mp, neg_w))
    return ad.mul(ad.sum_(s), -1.0)


def video_loss(probs, labels) -> ad.Tensor:
    """Cross-entropy of ``p_vid = max_t p_t``; gradient flows through the argmax frame."""
    labels = np.atleast_1d(np.asarray(labels, dtype=np.float64))
    rows = _as_rows(probs)
    if len(rows) != labels.size:
        raise ValueError(f"video_loss: {len(rows)} videos but {labels.size} labels")
    if not isinstance(probs, (list, tuple)) and ad.as_tensor(probs).ndim == 2:
        pv = ad.max_(ad.as_tensor(probs), axis=-1)
    else:
        pv = ad.concat([ad.reshape(ad.max_(r, axis=-1), (1,)) for r in rows], axis=0)
    logp, log1mp = _clamped_logs(pv)
    s = ad.add(ad.mul(logp, labels), ad.mul(log1mp, 1.0 - labels))
    return ad.mul(ad.sum_(s), -1.0)


def total_loss(frame_part, video_part, lam: float) -> ad.Tensor:
    if lam < 0:
        raise ValueError(f"total_loss: lambda must be >= 0, got {lam}")
    return ad.add(frame_part, ad.mul(video_part, float(lam)))


# ----------------------------------------------------------------------------
# optimizers


class Adam:
    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m: dict = {}
        self.v: dict = {}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for name, g in grads.items():
            m = self.m.get(name, 0.0) * b1 + (1 - b1) * g
            v = self.v.get(name, 0.0) * b2 + (1 - b2) * g * g
            self.m[name], self.v[name] = m, v
            mhat = m / (1 - b1 ** self.t)
            vhat = v / (1 - b2 ** self.t)
            params[name] = params[name] - self.lr * mhat / (np.sqrt(vhat) + self.eps)


class SGD:
    def __init__(self, lr=1e-3):
        self.lr = lr

    def step(self, params: dict, grads: dict) -> None:
        for name, g in grads.items():
            params[name] = params[name] - self.lr * g


def make_optimizer(cfg: TrainConfig):
    if cfg.optimizer == "adam":
        return Adam(cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    return SGD(cfg.lr)


# ----------------------------------------------------------------------------


def batch_loss(params: dict, seqs, model_config: ModelConfig, loss_config: LossConfig,
               mode: str = "train", rng: np.random.Generator | None = None):
    """Forward a batch of equal-length videos; returns ``(total, frame, video)`` tensors."""
    objs, frames = stack_batch(seqs)
    probs = sequence_forward(params, objs, frames, model_config, mode=mode, rng=rng)
    labels = [s.label for s in seqs]
    onsets = [s.onset_frame for s in seqs]
    lf = frame_loss(probs, labels, onsets, loss_config)
    lv = video_loss(probs, labels)
    return total_loss(lf, lv, loss_config.lam), lf, lv


def loss_and_grads(params: dict, seqs, model_config: ModelConfig, loss_config: LossConfig,
                   rng: np.random.Generator | None = None, mode: str = "train"):
    """Sum of per-shape-group losses and their gradients w.r.t. ``params``."""
    groups: dict = {}
    for s in seqs:
        groups.setdefault(s.object_features.shape, []).append(s)
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    parts = np.zeros(3)
    for group in groups.values():
        tape = ad.Tape()
        watched = tape.watch_all(params)
        lt, lf, lv = batch_loss(watched, group, model_config, loss_config, mode=mode, rng=rng)
        g = ad.backward(lt)
        for k, t in watched.items():
            grads[k] += g[t.tape_id]
        parts += [lf.item(), lv.item(), lt.item()]
    return parts, grads


@dataclass
class TrainResult:
    params: dict
    log: list = field(default_factory=list)
    epoch_losses: list = field(default_factory=list)
    val_ap: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)


def train(dataset, model_config: ModelConfig, train_config: TrainConfig = TrainConfig(),
          loss_config: LossConfig = LossConfig(), out_dir=None, params: dict | None = None,
          validation=None, eval_seed: int = 0) -> TrainResult:
    """Mini-batch training with per-epoch shuffling, all driven by ``train_config.seed``.

    Gradients are summed over the videos of a batch. With ``out_dir`` set,
    ``train_log.jsonl`` and LCK1 checkpoints are written there.
    """
    dataset = list(dataset)
    if not dataset:
        raise ValueError("train: empty dataset")
    seeds = np.random.SeedSequence(train_config.seed).spawn(3)
    if params is None:
        params = init_params(model_config, seed=int(seeds[0].generate_state(1)[0]))
    else:
        params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    shuffle_rng = np.random.default_rng(seeds[1])
    dropout_rng = np.random.default_rng(seeds[2])
    opt = make_optimizer(train_config)
    out = Path(out_dir) if out_dir is not None else None
    log_fh = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        log_fh = open(out / "train_log.jsonl", "w", encoding="utf-8")
    result = TrainResult(params)
    step = 0
    try:
        for epoch in range(1, train_config.epochs + 1):
            order = shuffle_rng.permutation(len(dataset))
            epoch_total = 0.0
            for start in range(0, len(order), train_config.batch_size):
                batch = [dataset[i] for i in order[start:start + train_config.batch_size]]
                t0 = time.perf_counter()
                (lf, lv, lt), grads = loss_and_grads(params, batch, model_config, loss_config,
                                                     rng=dropout_rng)
                if not all(np.isfinite([lf, lv, lt])) or not all(
                        np.all(np.isfinite(g)) for g in grads.values()):
                    raise TrainingError(
                        f"non-finite loss at epoch {epoch} step {step + 1} in batch "
                        f"{[s.video_id for s in batch]}")
                opt.step(params, grads)
                step += 1
                epoch_total += lt
                rec = {"epoch": epoch, "step": step, "loss_frame": lf, "loss_video": lv,
                       "loss_total": lt, "wall_ms": (time.perf_counter() - t0) * 1e3}
                result.log.append(rec)
                if log_fh:
                    log_fh.write(json.dumps(rec) + "\n")
            result.epoch_losses.append(epoch_total)
            logger.info("epoch %d loss %.4f", epoch, epoch_total)
            if validation is not None:
                from .metrics import evaluate_model

                ap = evaluate_model(validation, params, model_config, seed=eval_seed).ap
                result.val_ap.append(ap)
                logger.info("epoch %d validation AP %.4f", epoch, ap)
            if out is not None and train_config.checkpoint_every and epoch % train_config.checkpoint_every == 0:
                result.checkpoints.append(_write_ckpt(out / f"ckpt_epoch{epoch:03d}", params, model_config,
                                                      train_config, loss_config, epoch))
        if out is not None:
            result.checkpoints.append(_write_ckpt(out / "checkpoint", params, model_config,
                                                  train_config, loss_config, train_config.epochs))
    finally:
        if log_fh:
            log_fh.close()
    result.params = params
    return result


def _write_ckpt(path, params, model_config, train_config, loss_config, epoch):
    try:
        return save_checkpoint(path, params, model_config,
                               extra={"epoch": epoch, "train": asdict(train_config), "loss": asdict(loss_config)})
    except OSError as exc:
        raise TrainingError(f"checkpoint write failed at {path}: {exc}") from exc
