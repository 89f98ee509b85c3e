"""``latte`` command line: synth, train, eval, predict and profile.

Configuration is a versioned JSON document (see :data:`DEFAULT_CONFIG`).
Any leaf can be overridden with ``--set section.key=value`` where the value
is parsed as JSON when possible. The effective configuration of every run is
written to ``<out>/resolved_config.json``; feeding that file back through
``--config`` reproduces the run.

Exit status: 0 on success, 1 on validation errors (bad flags, unreadable
paths, invalid configuration or data), 2 on runtime failures. Diagnostics go
to standard error as a single line starting with ``error:``.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from threadpoolctl import threadpool_limits

from .features import FeatureFormatError, load_dataset, store_dataset
from .metrics import evaluate_model, write_report
from .model import ModelConfig, attribute_entities, generate_alerts, load_checkpoint, predict_video
from .profiler import profile_model
from .synth import SynthConfig, split_dataset, synthesize_dataset
from .training import LossConfig, TrainConfig, TrainingError, train

CONFIG_VERSION = 1
SEED_ENV = "LATTE_SEED"

# Test-scale defaults; the synthetic split matches the learnability benchmark.
DEFAULT_CONFIG: dict = {
    "version": CONFIG_VERSION,
    "seed": None,
    "synth": {"num_positive": 125, "num_negative": 125, "T": 50, "N": 5, "d": 32, "fps": 10.0,
              "difficulty": 0.2, "test_positive": 25, "test_negative": 25},
    "model": {"N": 5, "d": 32, "layout": None, "G": 4, "S": None, "r_maa": 3, "r_aaa": 3,
              "d_u": 32, "head_hidden": 32, "dropout_p": 0.1, "mc_samples": 8,
              "emsa_on": True, "maa_on": True, "aaa_on": True, "threshold": 0.5},
    "train": {"epochs": 15, "lr": 1e-3, "batch_size": 10, "optimizer": "adam",
              "adam_beta1": 0.9, "adam_beta2": 0.999, "adam_eps": 1e-8, "checkpoint_every": 0,
              "split": "train"},
    "loss": {"beta": 0.1, "lam": 1.0, "sign_convention": "decay"},
    "eval": {"split": "test"},
    "predict": {"top_k": 2, "csv": True},
    "profile": {"T": 50},
}

logger = logging.getLogger("latte")


class UsageError(Exception):
    """Validation failure reported with exit status 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ----------------------------------------------------------------------------
# configuration


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise UsageError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise UsageError(f"config key {where!r} must be an object")
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = value
    return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _apply_override(config: dict, assignment: str) -> None:
    key, sep, raw = assignment.partition("=")
    if not sep or not key:
        raise UsageError(f"--set expects dotted.key=value, got {assignment!r}")
    parts = key.split(".")
    node = config
    for part in parts[:-1]:
        if not isinstance(node.get(part), dict):
            raise UsageError(f"unknown config key {key!r}")
        node = node[part]
    if parts[-1] not in node or isinstance(node[parts[-1]], dict):
        raise UsageError(f"unknown config key {key!r}")
    node[parts[-1]] = _parse_value(raw)


def resolve_config(path: str | None, overrides=(), seed: int | None = None) -> dict:
    """Defaults, then the config file, then ``--set`` overrides, then the seed."""
    config = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise UsageError(f"config {path} must be a JSON object")
        if loaded.get("version", CONFIG_VERSION) != CONFIG_VERSION:
            raise UsageError(f"config {path} has version {loaded.get('version')!r}, "
                             f"expected {CONFIG_VERSION}")
        config = _merge(config, loaded)
    for assignment in overrides:
        _apply_override(config, assignment)
    if seed is not None:
        config["seed"] = seed
    if config["seed"] is None:
        env = os.environ.get(SEED_ENV)
        if env is not None:
            try:
                config["seed"] = int(env)
            except ValueError as exc:
                raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from exc
        else:
            config["seed"] = 0
    if not isinstance(config["seed"], int) or isinstance(config["seed"], bool):
        raise UsageError(f"seed must be an integer, got {config['seed']!r}")
    return config


def _section(config: dict, name: str, drop=()) -> dict:
    return {k: v for k, v in config[name].items() if k not in drop}


def model_config(config: dict) -> ModelConfig:
    try:
        return ModelConfig.from_dict(config["model"])
    except (TypeError, ValueError) as exc:
        raise UsageError(f"model config: {exc}") from exc


def _write_json(path: Path, data) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=1)


def _prepare_out(out: str, config: dict) -> Path:
    directory = Path(out)
    directory.mkdir(parents=True, exist_ok=True)
    _write_json(directory / "resolved_config.json", config)
    return directory


def _load(data: str, split: str | None):
    if not Path(data, "manifest.json").is_file():
        raise UsageError(f"{data} is not a dataset directory (manifest.json missing)")
    seqs = load_dataset(data, split=split)
    if not seqs:
        raise UsageError(f"{data}: no videos in split {split!r}")
    return seqs


def _load_ckpt(path: str, config: dict):
    """Checkpoint weights and architecture; inference settings come from the run config."""
    if not Path(path).exists():
        raise UsageError(f"checkpoint {path} does not exist")
    params, mc = load_checkpoint(path)
    try:
        mc = replace(mc, threshold=config["model"]["threshold"], mc_samples=config["model"]["mc_samples"])
    except (TypeError, ValueError) as exc:
        raise UsageError(f"model config: {exc}") from exc
    return params, mc


# ----------------------------------------------------------------------------
# subcommands


def cmd_synth(args, config) -> None:
    syn = _section(config, "synth", drop=("test_positive", "test_negative"))
    try:
        cfg = SynthConfig(**syn, seed=config["seed"])
        cfg.validate()
    except (TypeError, ValueError) as exc:
        raise UsageError(f"synth config: {exc}") from exc
    seqs = synthesize_dataset(cfg)
    tp, tn = config["synth"]["test_positive"], config["synth"]["test_negative"]
    if tp or tn:
        try:
            split_dataset(seqs, tp, tn)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    out = _prepare_out(args.out, config)
    store_dataset(seqs, out, extra={"generator": cfg.to_dict()})
    logger.info("wrote %d videos to %s", len(seqs), out)


def cmd_train(args, config) -> None:
    mc = model_config(config)
    try:
        tc = TrainConfig(**_section(config, "train", drop=("split",)), seed=config["seed"])
        lc = LossConfig(**config["loss"])
    except (TypeError, ValueError) as exc:
        raise UsageError(f"train config: {exc}") from exc
    seqs = _load(args.data, config["train"]["split"])
    out = _prepare_out(args.out, config)
    res = train(seqs, mc, tc, lc, out_dir=out)
    logger.info("final epoch loss %.6f; checkpoint %s", res.epoch_losses[-1], res.checkpoints[-1])


def cmd_eval(args, config) -> None:
    params, mc = _load_ckpt(args.ckpt, config)
    seqs = _load(args.data, config["eval"]["split"])
    out = _prepare_out(args.out, config)
    result = evaluate_model(seqs, params, mc, seed=config["seed"])
    cost = profile_model(mc, T=seqs[0].T).to_dict()
    write_report(result, out, cost=cost)
    logger.info("AP %.4f mTTA %.3f s", result.ap, result.mtta_seconds)


def cmd_predict(args, config) -> None:
    params, mc = _load_ckpt(args.ckpt, config)
    seqs = {s.video_id: s for s in _load(args.data, None)}
    if args.video not in seqs:
        raise UsageError(f"video {args.video!r} not found in {args.data}")
    seq = seqs[args.video]
    out = _prepare_out(args.out, config)
    series = predict_video(seq, params, mc, seed=config["seed"])
    alerts = generate_alerts(series, lambda t: attribute_entities(seq, params, mc, t), mc,
                             top_k=config["predict"]["top_k"])
    _write_json(out / "prediction.json", series.to_dict())
    _write_json(out / "alerts.json", [a.to_dict() for a in alerts])
    if config["predict"]["csv"]:
        with open(out / "probs.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["frame", "seconds", "probability"])
            for t, p in enumerate(series.probs, start=1):
                w.writerow([t, t / seq.fps, repr(float(p))])


def cmd_profile(args, config) -> None:
    mc = model_config(config)
    profile = profile_model(mc, T=int(config["profile"]["T"]))
    if args.out:
        _prepare_out(args.out, config)
    json.dump(profile.to_dict(), sys.stdout, indent=1)
    sys.stdout.write("\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="latte", description="Accident anticipation on precomputed features.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, handler, *, data=False, ckpt=False, out=True):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config leaf by dotted path")
        p.add_argument("--seed", type=int, help=f"run seed (fallback: ${SEED_ENV}, then 0)")
        p.add_argument("--threads", type=int, default=1, help="cap on BLAS worker threads")
        p.add_argument("-v", "--verbose", action="store_true")
        if data:
            p.add_argument("--data", required=True, help="LFS1 dataset directory")
        if ckpt:
            p.add_argument("--ckpt", required=True, help="LCK1 checkpoint directory")
        p.add_argument("--out", required=out, help="output directory")
        p.set_defaults(handler=handler)
        return p

    add("synth", cmd_synth)
    add("train", cmd_train, data=True)
    add("eval", cmd_eval, data=True, ckpt=True)
    add("predict", cmd_predict, data=True, ckpt=True).add_argument("--video", required=True)
    add("profile", cmd_profile, out=False)
    return parser


def run_cli(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.threads < 1:
            raise UsageError(f"--threads must be >= 1, got {args.threads}")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
        config = resolve_config(args.config, args.set, args.seed)
        with threadpool_limits(limits=args.threads):
            args.handler(args, config)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FeatureFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except TrainingError as exc:
        print(f"error: training failed: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"error: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
