"""Flat dotted-key run configuration.

One config file drives every subcommand. Format: `key = value` lines with
`#` comments; values are Python literals (ints, floats, strings). Unknown
keys are rejected and constraint violations are reported all at once.
"""

from __future__ import annotations

import ast
import hashlib
from pathlib import Path

from .degradation import DegradationConfig
from .losses import LossWeights
from .networks import NetworkSpec
from .training import OptimizerConfig, TrainingConfig, default_specs

# key -> (default, type)
DEFAULTS: dict[str, tuple] = {
    "seed": (0, int),
    "workers": (0, int),
    "paths.train_root": ("data/train", str),
    "paths.eval_root": ("data/eval", str),
    "paths.out_dir": ("runs/default", str),
    "degradation.blur_sigma_lo": (1.0, float),
    "degradation.blur_sigma_hi": (3.0, float),
    "degradation.shift_lo": (-2.0, float),
    "degradation.shift_hi": (2.0, float),
    "degradation.noise_sigma": (0.02, float),
    "degradation.scale": (4, int),
    "degradation.seed": (0, int),
    "data.lr_index_lo": (1, int),
    "data.lr_index_hi": (400, int),
    "data.hr_index_lo": (401, int),
    "data.hr_index_hi": (800, int),
    "data.lr_crop": (32, int),
    "data.hr_crop": (128, int),
    "data.batch_size": (16, int),
    "net.g_resblocks": (6, int),
    "net.g_channels": (64, int),
    "net.d_channels": (64, int),
    "net.sr_resblocks": (8, int),
    "net.sr_channels": (64, int),
    "loss.w1": (10.0, float),
    "loss.w2": (5.0, float),
    "loss.w3": (0.5, float),
    "loss.w2_phase2": (1.0, float),
    "loss.lambda1": (10.0, float),
    "loss.lambda2": (5.0, float),
    "loss.lambda3": (2.0, float),
    "optim.beta1": (0.5, float),
    "optim.beta2": (0.999, float),
    "optim.epsilon": (1e-8, float),
    "optim.weight_decay": (0.0, float),
    "optim.lr_pretrain": (1e-4, float),
    "optim.lr_phase1": (2e-4, float),
    "optim.lr_phase2": (1e-4, float),
    "optim.halving_period": (40000, int),
    "optim.grad_clip": (0.0, float),
    "train.pretrain_steps": (2000, int),
    "train.phase1_steps": (400000, int),
    "train.phase2_steps": (200000, int),
    "train.log_interval": (100, int),
    "train.checkpoint_interval": (1000, int),
    "train.resume": ("auto", str),
    "eval.border_crop": (4, int),
    "eval.tile": (32, int),
    "eval.tile_overlap": (8, int),
    "ablate.steps": (2000, int),
}


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class RunConfig:
    """Resolved configuration: defaults overlaid with file and CLI overrides."""

    def __init__(self, values: dict):
        self._values = dict(values)

    def __getitem__(self, key: str):
        return self._values[key]

    def as_dict(self) -> dict:
        return dict(self._values)

    def dump(self) -> str:
        return "".join(
            f"{k} = {self._values[k]!r}\n" for k in sorted(self._values)
        )

    def fingerprint(self) -> str:
        return hashlib.sha256(self.dump().encode()).hexdigest()

    # -- typed views onto the module configs ---------------------------------

    def degradation_config(self) -> DegradationConfig:
        v = self._values
        return DegradationConfig(
            blur_sigma_range=(v["degradation.blur_sigma_lo"], v["degradation.blur_sigma_hi"]),
            shift_range=(v["degradation.shift_lo"], v["degradation.shift_hi"]),
            noise_sigma=v["degradation.noise_sigma"],
            scale=v["degradation.scale"],
            seed=v["degradation.seed"],
        )

    def loss_weights(self) -> LossWeights:
        v = self._values
        return LossWeights(
            w1=v["loss.w1"], w2=v["loss.w2"], w3=v["loss.w3"],
            lambda1=v["loss.lambda1"], lambda2=v["loss.lambda2"], lambda3=v["loss.lambda3"],
        )

    def _opt(self, lr_key: str) -> OptimizerConfig:
        v = self._values
        return OptimizerConfig(
            lr_init=v[lr_key],
            beta1=v["optim.beta1"], beta2=v["optim.beta2"],
            epsilon=v["optim.epsilon"], weight_decay=v["optim.weight_decay"],
            lr_halving_period=v["optim.halving_period"],
        )

    def training_config(self) -> TrainingConfig:
        v = self._values
        return TrainingConfig(
            weights=self.loss_weights(),
            opt_pretrain=self._opt("optim.lr_pretrain"),
            opt_phase1=self._opt("optim.lr_phase1"),
            opt_phase2=self._opt("optim.lr_phase2"),
            w2_phase2=v["loss.w2_phase2"],
            batch_size=v["data.batch_size"],
            log_interval=v["train.log_interval"],
            grad_clip=v["optim.grad_clip"],
        )

    def network_specs(self) -> dict[str, NetworkSpec]:
        v = self._values
        return default_specs(
            g_resblocks=v["net.g_resblocks"],
            g_channels=v["net.g_channels"],
            d_channels=v["net.d_channels"],
            sr_resblocks=v["net.sr_resblocks"],
            sr_channels=v["net.sr_channels"],
        )


def _parse_value(raw: str):
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        return raw


def parse_config_text(text: str) -> dict:
    values = {}
    problems = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            problems.append(f"line {lineno}: expected 'key = value', got {stripped!r}")
            continue
        key, _, raw = stripped.partition("=")
        values[key.strip()] = _parse_value(raw.strip())
    if problems:
        raise ConfigError(problems)
    return values


def apply_overrides(values: dict, overrides: list[str]) -> dict:
    out = dict(values)
    problems = []
    for item in overrides:
        if "=" not in item:
            problems.append(f"override {item!r} is not of the form key=value")
            continue
        key, _, raw = item.partition("=")
        out[key.strip()] = _parse_value(raw.strip())
    if problems:
        raise ConfigError(problems)
    return out


def resolve(values: dict) -> RunConfig:
    """Overlay values onto defaults, coerce types, and check every constraint."""
    problems = []
    resolved = {k: default for k, (default, _) in DEFAULTS.items()}
    for key, value in values.items():
        if key not in DEFAULTS:
            problems.append(f"unknown config key {key!r}")
            continue
        _, typ = DEFAULTS[key]
        try:
            if typ is float and isinstance(value, (int, float)):
                resolved[key] = float(value)
            elif typ is int and isinstance(value, int) and not isinstance(value, bool):
                resolved[key] = value
            elif typ is str and isinstance(value, str):
                resolved[key] = value
            else:
                problems.append(
                    f"key {key!r}: expected {typ.__name__}, got {value!r}"
                )
        except (TypeError, ValueError):
            problems.append(f"key {key!r}: cannot coerce {value!r} to {typ.__name__}")

    v = resolved
    if not problems:
        scale = v["degradation.scale"]
        if v["data.hr_crop"] != scale * v["data.lr_crop"]:
            problems.append(
                f"data.hr_crop must equal degradation.scale * data.lr_crop "
                f"({v['data.hr_crop']} != {scale} * {v['data.lr_crop']})"
            )
        if v["degradation.blur_sigma_lo"] < 0 or \
                v["degradation.blur_sigma_lo"] > v["degradation.blur_sigma_hi"]:
            problems.append("degradation.blur_sigma range must satisfy 0 <= lo <= hi")
        if v["degradation.shift_lo"] > v["degradation.shift_hi"]:
            problems.append("degradation.shift range must satisfy lo <= hi")
        if v["degradation.noise_sigma"] < 0:
            problems.append("degradation.noise_sigma must be >= 0")
        if max(v["data.lr_index_lo"], v["data.hr_index_lo"]) <= \
                min(v["data.lr_index_hi"], v["data.hr_index_hi"]):
            problems.append("data LR and HR index ranges must be disjoint")
        for key in ("loss.w1", "loss.w2", "loss.w3", "loss.w2_phase2",
                    "loss.lambda1", "loss.lambda2", "loss.lambda3"):
            if v[key] < 0:
                problems.append(f"{key} must be >= 0")
        if not 0 < v["optim.beta1"] < v["optim.beta2"] < 1:
            problems.append("need 0 < optim.beta1 < optim.beta2 < 1")
        for key in ("optim.lr_pretrain", "optim.lr_phase1", "optim.lr_phase2"):
            if v[key] <= 0:
                problems.append(f"{key} must be positive")
        if v["optim.halving_period"] < 1:
            problems.append("optim.halving_period must be >= 1")
        if v["data.batch_size"] < 1:
            problems.append("data.batch_size must be >= 1")
        if v["eval.tile_overlap"] >= v["eval.tile"]:
            problems.append("eval.tile_overlap must be smaller than eval.tile")
        if v["train.resume"] not in ("auto", "never"):
            problems.append("train.resume must be 'auto' or 'never'")
    if problems:
        raise ConfigError(problems)
    return RunConfig(resolved)


def validate_config(path=None, overrides: list[str] | None = None) -> RunConfig:
    values: dict = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError([f"config file not found: {p}"])
        values = parse_config_text(p.read_text())
    if overrides:
        values = apply_overrides(values, overrides)
    return resolve(values)
