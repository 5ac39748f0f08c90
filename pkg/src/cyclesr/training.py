"""Three-phase training orchestration.

Phase 0 pretrains the SR backbone on bicubic pairs from domain Z. Phase 1
trains the LR restoration cycle (G1, G2, D1). Phase 2 jointly fine-tunes,
alternating the LR-cycle update and the HR-cycle update each iteration.
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch

from . import losses, networks
from .data import UnpairedSplit, sample_training_batch
from .losses import LossWeights
from .networks import NetworkSpec

CHECKPOINT_MAGIC = b"CSRC"
CHECKPOINT_VERSION = 1

NET_NAMES = ("g1", "g2", "g3", "d1", "d2", "sr")


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    lr_init: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.0
    lr_halving_period: int = 40000

    def __post_init__(self):
        if not 0 < self.beta1 < self.beta2 < 1:
            raise TrainingError("need 0 < beta1 < beta2 < 1")
        if self.lr_init <= 0:
            raise TrainingError("lr_init must be positive")
        if self.lr_halving_period < 1:
            raise TrainingError("lr_halving_period must be >= 1")


def lr_at(iteration: int, cfg: OptimizerConfig) -> float:
    if iteration < 0:
        raise TrainingError("iteration must be >= 0")
    return cfg.lr_init * 2.0 ** (-(iteration // cfg.lr_halving_period))


@dataclass
class TrainingConfig:
    weights: LossWeights = field(default_factory=LossWeights)
    opt_pretrain: OptimizerConfig = field(default_factory=lambda: OptimizerConfig(lr_init=1e-4))
    opt_phase1: OptimizerConfig = field(default_factory=lambda: OptimizerConfig(lr_init=2e-4))
    opt_phase2: OptimizerConfig = field(default_factory=lambda: OptimizerConfig(lr_init=1e-4))
    w2_phase2: float = 1.0
    batch_size: int = 16
    log_interval: int = 1
    grad_clip: float = 0.0  # off by default
    history_size: int = 10000


def default_specs(
    g_resblocks: int = 6,
    g_channels: int = 64,
    d_channels: int = 64,
    sr_resblocks: int = 8,
    sr_channels: int = 64,
) -> dict[str, NetworkSpec]:
    return {
        "g1": NetworkSpec("generator-same-size", g_resblocks, g_channels),
        "g2": NetworkSpec("generator-same-size", g_resblocks, g_channels),
        "g3": NetworkSpec("generator-downscale", g_resblocks, g_channels),
        "d1": NetworkSpec("discriminator-patch16", 0, d_channels),
        "d2": NetworkSpec("discriminator-patch70", 0, d_channels),
        "sr": NetworkSpec("sr-backbone", sr_resblocks, sr_channels, scale=4),
    }


class TrainState:
    """Checkpointable unit: all six networks, optimizer moments, rng, history."""

    def __init__(self, specs: dict[str, NetworkSpec], cfg: TrainingConfig, seed: int):
        if set(specs) != set(NET_NAMES):
            raise TrainingError(f"specs must cover exactly {NET_NAMES}")
        self.specs = dict(specs)
        self.cfg = cfg
        self.phase = 0
        self.iteration = 0
        self.phase_iteration = 0
        self.nets: dict[str, torch.nn.Module] = {}
        self.opts: dict[str, torch.optim.Adam] = {}
        for i, name in enumerate(NET_NAMES):
            net = networks.build_network(specs[name])
            networks.init_weights(net, seed=seed * 6451 + i)
            self.nets[name] = net
            self.opts[name] = _adam(net, cfg.opt_phase1)
        self.rng = np.random.default_rng(seed)
        self.loss_history: list[dict] = []

    def log(self, record: dict, log_file=None) -> None:
        self.loss_history.append(record)
        if len(self.loss_history) > self.cfg.history_size:
            del self.loss_history[: -self.cfg.history_size]
        if log_file is not None:
            log_file.write(json.dumps(record, sort_keys=True) + "\n")
            log_file.flush()


def _adam(net: torch.nn.Module, ocfg: OptimizerConfig) -> torch.optim.Adam:
    return torch.optim.Adam(
        net.parameters(),
        lr=ocfg.lr_init,
        betas=(ocfg.beta1, ocfg.beta2),
        eps=ocfg.epsilon,
        weight_decay=ocfg.weight_decay,
    )


def _set_lr(opt: torch.optim.Adam, lr: float) -> None:
    for group in opt.param_groups:
        group["lr"] = lr


def _check_finite(value: torch.Tensor, what: str) -> None:
    if not torch.isfinite(value):
        raise TrainingError(f"non-finite {what}; aborting (last checkpoint retained)")


def _step(opt: torch.optim.Adam, net: torch.nn.Module, clip: float) -> None:
    if clip > 0:
        torch.nn.utils.clip_grad_norm_(net.parameters(), clip)
    opt.step()


def pretrain_sr(
    state: TrainState, split: UnpairedSplit, steps: int, log_file=None
) -> networks.nn.Module:
    """Phase 0: supervised MAE training of SR on (bicubic z, z) pairs from Z."""
    cfg = state.cfg
    sr = state.nets["sr"]
    opt = state.opts["sr"]
    sr.train()
    for _ in range(steps):
        lr = lr_at(state.phase_iteration, cfg.opt_pretrain)
        _set_lr(opt, lr)
        batch = sample_training_batch(split, cfg.batch_size, state.rng)
        pred = sr(batch.y)  # y is the bicubic 1/scale downsample of z
        loss = (pred - batch.z).abs().mean()
        _check_finite(loss, "pretrain loss")
        opt.zero_grad()
        loss.backward()
        _step(opt, sr, cfg.grad_clip)
        state.iteration += 1
        state.phase_iteration += 1
        if state.phase_iteration % cfg.log_interval == 0:
            state.log(
                {"iteration": state.iteration, "phase": 0, "lr": lr,
                 "mae": float(loss.detach())},
                log_file,
            )
    return sr


def _lr_cycle_update(state: TrainState, batch, ocfg: OptimizerConfig, lr: float,
                     w2_override: float | None) -> losses.LossBreakdown:
    cfg = state.cfg
    g1, g2, d1 = state.nets["g1"], state.nets["g2"], state.nets["d1"]
    x, y = batch.x, batch.y

    # discriminator step
    _set_lr(state.opts["d1"], lr)
    with torch.no_grad():
        fake = g1(x)
    d_loss = losses.lsgan_d_loss(d1(y), d1(fake))
    _check_finite(d_loss, "D1 loss")
    state.opts["d1"].zero_grad()
    d_loss.backward()
    _step(state.opts["d1"], d1, cfg.grad_clip)

    # generator step on the LR-cycle objective
    for name in ("g1", "g2"):
        _set_lr(state.opts[name], lr)
    fake = g1(x)
    gan = losses.lsgan_g_loss(d1(fake))
    cyc = losses.cycle_loss(g2(fake), x)
    idt = losses.identity_loss_lr(g1(y), y)
    tv = losses.tv_loss(fake)
    total, breakdown = losses.total_loss_lr(gan, cyc, idt, tv, cfg.weights, w2_override)
    _check_finite(total, "LR-cycle loss")
    state.opts["g1"].zero_grad()
    state.opts["g2"].zero_grad()
    total.backward()
    _step(state.opts["g1"], g1, cfg.grad_clip)
    _step(state.opts["g2"], g2, cfg.grad_clip)
    return breakdown


def _hr_cycle_update(state: TrainState, batch, lr: float) -> losses.LossBreakdown:
    cfg = state.cfg
    g1, g3, d2, sr = state.nets["g1"], state.nets["g3"], state.nets["d2"], state.nets["sr"]
    x, y, z = batch.x, batch.y, batch.z

    # discriminator step
    _set_lr(state.opts["d2"], lr)
    with torch.no_grad():
        fake_hr = sr(g1(x))
    d_loss = losses.lsgan_d_loss(d2(z), d2(fake_hr))
    _check_finite(d_loss, "D2 loss")
    state.opts["d2"].zero_grad()
    d_loss.backward()
    _step(state.opts["d2"], d2, cfg.grad_clip)

    # generator step on the HR-cycle objective; y doubles as bicubic(z)
    for name in ("g1", "g3", "sr"):
        _set_lr(state.opts[name], lr)
    fake_hr = sr(g1(x))
    gan = losses.lsgan_g_loss(d2(fake_hr))
    cyc = losses.cycle_loss(g3(fake_hr), x)
    idt = losses.identity_loss_hr(sr(y), z)
    tv = losses.tv_loss(fake_hr)
    total, breakdown = losses.total_loss_hr(gan, cyc, idt, tv, cfg.weights)
    _check_finite(total, "HR-cycle loss")
    for name in ("g1", "g3", "sr"):
        state.opts[name].zero_grad()
    total.backward()
    for name in ("g1", "g3", "sr"):
        _step(state.opts[name], state.nets[name], cfg.grad_clip)
    return breakdown


def train_phase1(state: TrainState, split: UnpairedSplit, steps: int, log_file=None) -> TrainState:
    if state.phase not in (0, 1):
        raise TrainingError(f"cannot enter phase 1 from phase {state.phase}")
    if state.phase != 1:
        state.phase = 1
        state.phase_iteration = 0
    cfg = state.cfg
    for name in ("g1", "g2", "d1"):
        state.nets[name].train()
    for _ in range(steps):
        lr = lr_at(state.phase_iteration, cfg.opt_phase1)
        batch = sample_training_batch(split, cfg.batch_size, state.rng)
        breakdown = _lr_cycle_update(state, batch, cfg.opt_phase1, lr, None)
        state.iteration += 1
        state.phase_iteration += 1
        if state.phase_iteration % cfg.log_interval == 0:
            record = {"iteration": state.iteration, "phase": 1, "lr": lr}
            record.update({f"lr_cycle_{k}": v for k, v in breakdown.as_dict().items()
                           if k != "side"})
            state.log(record, log_file)
    return state


def train_phase2(state: TrainState, split: UnpairedSplit, steps: int, log_file=None) -> TrainState:
    if state.phase not in (1, 2):
        raise TrainingError(f"cannot enter phase 2 from phase {state.phase}")
    if state.phase != 2:
        state.phase = 2
        state.phase_iteration = 0
    cfg = state.cfg
    for name in ("g1", "g2", "g3", "d1", "d2", "sr"):
        state.nets[name].train()
    for _ in range(steps):
        lr = lr_at(state.phase_iteration, cfg.opt_phase2)
        batch = sample_training_batch(split, cfg.batch_size, state.rng)
        # the (5)-side and (10)-side objectives are updated in turn
        lr_bd = _lr_cycle_update(state, batch, cfg.opt_phase2, lr, cfg.w2_phase2)
        hr_bd = _hr_cycle_update(state, batch, lr)
        state.iteration += 1
        state.phase_iteration += 1
        if state.phase_iteration % cfg.log_interval == 0:
            record = {"iteration": state.iteration, "phase": 2, "lr": lr}
            record.update({f"lr_cycle_{k}": v for k, v in lr_bd.as_dict().items()
                           if k != "side"})
            record.update({f"hr_cycle_{k}": v for k, v in hr_bd.as_dict().items()
                           if k != "side"})
            state.log(record, log_file)
    return state


# ----------------------------------------------------------------------------
# Checkpointing: JSON header (version, spec echo, checksum) + torch payload.

def save_checkpoint(state: TrainState, path, config_echo: str = "") -> None:
    payload = {
        "config_echo": config_echo,
        "phase": state.phase,
        "iteration": state.iteration,
        "phase_iteration": state.phase_iteration,
        "cfg": {
            "weights": asdict(state.cfg.weights),
            "opt_pretrain": asdict(state.cfg.opt_pretrain),
            "opt_phase1": asdict(state.cfg.opt_phase1),
            "opt_phase2": asdict(state.cfg.opt_phase2),
            "w2_phase2": state.cfg.w2_phase2,
            "batch_size": state.cfg.batch_size,
            "log_interval": state.cfg.log_interval,
            "grad_clip": state.cfg.grad_clip,
            "history_size": state.cfg.history_size,
        },
        "nets": {k: v.state_dict() for k, v in state.nets.items()},
        "opts": {k: v.state_dict() for k, v in state.opts.items()},
        "rng_state": state.rng.bit_generator.state,
        "loss_history": state.loss_history,
    }
    buf = io.BytesIO()
    torch.save(payload, buf)
    blob = buf.getvalue()
    header = {
        "version": CHECKPOINT_VERSION,
        "specs": {k: asdict(v) for k, v in state.specs.items()},
        "sha256": hashlib.sha256(blob).hexdigest(),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode()
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(len(header_bytes).to_bytes(8, "little"))
        f.write(header_bytes)
        f.write(blob)
    tmp.replace(path)


def read_checkpoint_header(path) -> dict:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise TrainingError(f"not a checkpoint file: {path}")
        header_len = int.from_bytes(f.read(8), "little")
        return json.loads(f.read(header_len).decode())


def load_checkpoint(path) -> TrainState:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise TrainingError(f"not a checkpoint file: {path}")
        header_len = int.from_bytes(f.read(8), "little")
        header = json.loads(f.read(header_len).decode())
        blob = f.read()
    if header.get("version") != CHECKPOINT_VERSION:
        raise TrainingError(f"unsupported checkpoint version {header.get('version')}")
    if hashlib.sha256(blob).hexdigest() != header["sha256"]:
        raise TrainingError(f"corrupt checkpoint: {path}")
    payload = torch.load(io.BytesIO(blob), weights_only=False)

    specs = {k: NetworkSpec(**v) for k, v in header["specs"].items()}
    c = payload["cfg"]
    cfg = TrainingConfig(
        weights=LossWeights(**c["weights"]),
        opt_pretrain=OptimizerConfig(**c["opt_pretrain"]),
        opt_phase1=OptimizerConfig(**c["opt_phase1"]),
        opt_phase2=OptimizerConfig(**c["opt_phase2"]),
        w2_phase2=c["w2_phase2"],
        batch_size=c["batch_size"],
        log_interval=c["log_interval"],
        grad_clip=c["grad_clip"],
        history_size=c["history_size"],
    )
    state = TrainState(specs, cfg, seed=0)
    state.phase = payload["phase"]
    state.iteration = payload["iteration"]
    state.phase_iteration = payload["phase_iteration"]
    for k in NET_NAMES:
        state.nets[k].load_state_dict(payload["nets"][k])
        state.opts[k].load_state_dict(payload["opts"][k])
    state.rng.bit_generator.state = payload["rng_state"]
    state.loss_history = payload["loss_history"]
    return state
