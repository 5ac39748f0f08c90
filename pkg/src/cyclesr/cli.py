"""Command-line entry point for the full pipeline.

Subcommands: degrade, pretrain-sr, train-lr, train-joint, evaluate, ablate,
inspect-checkpoint. All are driven by one flat config file plus --set
key=value overrides, and all honor --dry-run.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import degradation, evaluation, training
from .config import ConfigError, RunConfig, validate_config
from .data import build_unpaired_split, list_eval_set

SUBCOMMANDS = (
    "degrade", "pretrain-sr", "train-lr", "train-joint",
    "evaluate", "ablate", "inspect-checkpoint",
)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cyclesr")
    p.add_argument("command", choices=SUBCOMMANDS)
    p.add_argument("--config", default=None, help="flat key=value config file")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE", help="override one config key")
    p.add_argument("--dry-run", action="store_true",
                   help="validate, print the plan, touch nothing")
    p.add_argument("--method", choices=["model", "bicubic"], default="model",
                   help="evaluate: inference method")
    p.add_argument("--checkpoint", default=None,
                   help="inspect-checkpoint: file to inspect; "
                        "evaluate: model checkpoint override")
    return p


def _echo_config(cfg: RunConfig) -> str:
    out_dir = Path(cfg["paths.out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config_resolved.cfg").write_text(cfg.dump())
    return cfg.dump()


def _build_split(cfg: RunConfig):
    root = Path(cfg["paths.train_root"])
    return build_unpaired_split(
        root / "lr", root / "hr",
        (cfg["data.lr_index_lo"], cfg["data.lr_index_hi"]),
        (cfg["data.hr_index_lo"], cfg["data.hr_index_hi"]),
        lr_crop=cfg["data.lr_crop"],
        scale=cfg["degradation.scale"],
    )


def _eval_pairs(cfg: RunConfig):
    root = Path(cfg["paths.eval_root"])
    return list_eval_set(root / "lr", root / "hr")


def _ckpt_path(cfg: RunConfig, name: str) -> Path:
    return Path(cfg["paths.out_dir"]) / f"{name}.ckpt"


def _fresh_state(cfg: RunConfig) -> training.TrainState:
    return training.TrainState(cfg.network_specs(), cfg.training_config(), cfg["seed"])


def _load_or_fresh(cfg: RunConfig, name: str) -> training.TrainState:
    path = _ckpt_path(cfg, name)
    if cfg["train.resume"] == "auto" and path.is_file():
        return training.load_checkpoint(path)
    return _fresh_state(cfg)


def _open_log(cfg: RunConfig):
    out_dir = Path(cfg["paths.out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    return open(out_dir / "train_log.jsonl", "a")


def cmd_degrade(cfg: RunConfig) -> None:
    dcfg = cfg.degradation_config()
    for root_key in ("paths.train_root", "paths.eval_root"):
        root = Path(cfg[root_key])
        hr_dir = root / "hr"
        if not hr_dir.is_dir():
            raise FileNotFoundError(f"missing HR directory: {hr_dir}")
        degradation.degrade_corpus(hr_dir, dcfg, root / "lr")


def cmd_pretrain_sr(cfg: RunConfig, echo: str) -> None:
    split = _build_split(cfg)
    state = _fresh_state(cfg)
    with _open_log(cfg) as log:
        training.pretrain_sr(state, split, cfg["train.pretrain_steps"], log)
    training.save_checkpoint(state, _ckpt_path(cfg, "pretrain"), echo)


def cmd_train_lr(cfg: RunConfig, echo: str) -> None:
    split = _build_split(cfg)
    path = _ckpt_path(cfg, "phase1")
    if cfg["train.resume"] == "auto" and path.is_file():
        state = training.load_checkpoint(path)
    else:
        state = _load_or_fresh(cfg, "pretrain")
    interval = cfg["train.checkpoint_interval"]
    # an interrupted run continues from wherever its checkpoint left off
    done = state.phase_iteration if state.phase == 1 else 0
    steps = cfg["train.phase1_steps"]
    with _open_log(cfg) as log:
        while done < steps:
            chunk = min(interval, steps - done)
            training.train_phase1(state, split, chunk, log)
            done += chunk
            training.save_checkpoint(state, path, echo)


def cmd_train_joint(cfg: RunConfig, echo: str) -> None:
    split = _build_split(cfg)
    state = _load_or_fresh(cfg, "phase2")
    if state.phase < 1:  # no phase-2 checkpoint yet: resume from phase 1
        state = training.load_checkpoint(_ckpt_path(cfg, "phase1"))
    path = _ckpt_path(cfg, "phase2")
    interval = cfg["train.checkpoint_interval"]
    done = state.phase_iteration if state.phase == 2 else 0
    steps = cfg["train.phase2_steps"]
    with _open_log(cfg) as log:
        while done < steps:
            chunk = min(interval, steps - done)
            training.train_phase2(state, split, chunk, log)
            done += chunk
            training.save_checkpoint(state, path, echo)


def _model_nets(cfg: RunConfig, checkpoint: str | None):
    path = Path(checkpoint) if checkpoint else None
    if path is None:
        for name in ("phase2", "phase1", "pretrain"):
            cand = _ckpt_path(cfg, name)
            if cand.is_file():
                path = cand
                break
    if path is None or not path.is_file():
        raise FileNotFoundError("no checkpoint found for model evaluation")
    state = training.load_checkpoint(path)
    return state.nets["g1"], state.nets["sr"]


def cmd_evaluate(cfg: RunConfig, method: str, checkpoint: str | None) -> None:
    pairs = _eval_pairs(cfg)
    scale = cfg["degradation.scale"]
    kwargs = dict(
        scale=scale,
        border_crop=cfg["eval.border_crop"],
        tile=cfg["eval.tile"],
        tile_overlap=cfg["eval.tile_overlap"],
        config_fingerprint=cfg.fingerprint(),
    )
    out_dir = Path(cfg["paths.out_dir"])
    if method == "bicubic":
        report = evaluation.evaluate("bicubic", pairs, **kwargs)
        evaluation.emit_report([report], out_dir / "report_bicubic.txt")
    else:
        g1, sr = _model_nets(cfg, checkpoint)
        report = evaluation.evaluate("model", pairs, g1=g1, sr=sr, **kwargs)
        baseline = evaluation.evaluate("bicubic", pairs, **kwargs)
        evaluation.emit_report([report, baseline], out_dir / "report_model.txt")
        evaluation.emit_panels(pairs, g1, sr, out_dir / "panels", scale,
                               cfg["eval.tile"], cfg["eval.tile_overlap"])


def cmd_ablate(cfg: RunConfig) -> None:
    split = _build_split(cfg)
    pairs = _eval_pairs(cfg)
    steps = cfg["ablate.steps"]
    phase1_path = _ckpt_path(cfg, "phase1")
    if not phase1_path.is_file():
        raise FileNotFoundError(f"ablation needs the phase-1 checkpoint: {phase1_path}")
    reports = []
    for sid in evaluation.STRUCTURE_IDS:
        structure = evaluation.ablation_structure(sid)
        state = training.load_checkpoint(phase1_path)
        state.phase = 2
        state.phase_iteration = 0
        # one shared data stream: every structure sees identical batches
        state.rng = np.random.default_rng(cfg["seed"] + 7919)
        if sid == "structure1":
            # fresh inner networks are irrelevant here; SR/G3/D2 train from scratch
            networks_to_reset = ("g3", "d2")
            for name in networks_to_reset:
                from .networks import init_weights
                init_weights(state.nets[name], seed=cfg["seed"] * 6451 + 99)
        report = evaluation.run_ablation(
            structure, state, split, pairs, steps,
            scale=cfg["degradation.scale"],
            border_crop=cfg["eval.border_crop"],
            tile=cfg["eval.tile"], tile_overlap=cfg["eval.tile_overlap"],
        )
        report.config_fingerprint = cfg.fingerprint()
        reports.append(report)
    out_dir = Path(cfg["paths.out_dir"])
    evaluation.emit_report(reports, out_dir / "report_ablation.txt")
    by_id = {r.method: r.mean_psnr for r in reports}
    best_reduced = max(v for k, v in by_id.items() if k != "full")
    if by_id["full"] < best_reduced - 0.1:
        print(f"ablation ordering violation: full {by_id['full']:.4f} dB < "
              f"best reduced {best_reduced:.4f} dB - 0.1")


def dispatch(argv: list[str]) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        if args.command == "inspect-checkpoint":
            if not args.checkpoint:
                raise ConfigError(["inspect-checkpoint requires --checkpoint"])
            header = training.read_checkpoint_header(args.checkpoint)
            print(json.dumps(header, indent=1, sort_keys=True))
            return 0
        cfg = validate_config(args.config, args.overrides)
        if args.dry_run:
            print(f"plan: {args.command}")
            print(cfg.dump(), end="")
            return 0
        echo = _echo_config(cfg)
        if args.command == "degrade":
            cmd_degrade(cfg)
        elif args.command == "pretrain-sr":
            cmd_pretrain_sr(cfg, echo)
        elif args.command == "train-lr":
            cmd_train_lr(cfg, echo)
        elif args.command == "train-joint":
            cmd_train_joint(cfg, echo)
        elif args.command == "evaluate":
            cmd_evaluate(cfg, args.method, args.checkpoint)
        elif args.command == "ablate":
            cmd_ablate(cfg)
        return 0
    except (ConfigError, ValueError, RuntimeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
