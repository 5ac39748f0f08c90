"""Validation metrics, the bicubic baseline, and the ablation harness."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import imaging
from .data import EvalPair, UnpairedSplit, sample_training_batch
from .training import TrainState, TrainingError, lr_at, _set_lr, _check_finite, _step
from . import losses

REPORT_VERSION = 1

STRUCTURE_IDS = ("structure1", "structure2", "structure3", "full")


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class AblationStructure:
    id: str
    active_networks: frozenset[str]
    active_losses: frozenset[str]


def ablation_structure(structure_id: str) -> AblationStructure:
    if structure_id == "structure1":
        # single outer cycle, SR applied to x directly
        return AblationStructure(
            "structure1",
            frozenset({"sr", "g3", "d2"}),
            frozenset({"gan_hr", "cyc_hr", "idt_hr", "tv_hr"}),
        )
    if structure_id == "structure2":
        return AblationStructure(
            "structure2",
            frozenset({"g1", "g2", "d1", "sr"}),
            frozenset({"gan_lr", "cyc_lr", "idt_lr", "tv_lr"}),
        )
    if structure_id == "structure3":
        # inner discriminator/cycle removed; LR identity and TV terms kept
        return AblationStructure(
            "structure3",
            frozenset({"g1", "g3", "d2", "sr"}),
            frozenset({"gan_hr", "cyc_hr", "idt_hr", "tv_hr", "idt_lr", "tv_lr"}),
        )
    if structure_id == "full":
        return AblationStructure(
            "full",
            frozenset({"g1", "g2", "g3", "d1", "d2", "sr"}),
            frozenset({"gan_lr", "cyc_lr", "idt_lr", "tv_lr",
                       "gan_hr", "cyc_hr", "idt_hr", "tv_hr"}),
        )
    raise EvaluationError(f"unknown ablation structure {structure_id!r}")


@dataclass
class EvalReport:
    method: str
    names: list[str]
    psnr_values: list[float]
    ssim_values: list[float]
    config_fingerprint: str = ""
    border_crop: int = 4
    metric_convention: str = "RGB, border_crop at evaluation time"

    @property
    def mean_psnr(self) -> float:
        return float(np.mean(self.psnr_values))

    @property
    def mean_ssim(self) -> float:
        return float(np.mean(self.ssim_values))

    def as_dict(self) -> dict:
        return {
            "version": REPORT_VERSION,
            "method": self.method,
            "border_crop": self.border_crop,
            "metric_convention": self.metric_convention,
            "config_fingerprint": self.config_fingerprint,
            "mean_psnr": self.mean_psnr,
            "mean_ssim": self.mean_ssim,
            "per_image": [
                {"name": n, "psnr": p, "ssim": s}
                for n, p, s in zip(self.names, self.psnr_values, self.ssim_values)
            ],
        }


# ----------------------------------------------------------------------------
# Inference

def _run_net(net: torch.nn.Module, img: np.ndarray) -> np.ndarray:
    arr = imaging.to_model_range(img).transpose(2, 0, 1)[None]
    with torch.no_grad():
        out = net(torch.from_numpy(np.ascontiguousarray(arr)).float())
    return imaging.from_model_range(out[0].numpy().transpose(1, 2, 0).astype(np.float64))


def sr_inference(
    g1: torch.nn.Module | None,
    sr: torch.nn.Module,
    lr_img: np.ndarray,
    scale: int = 4,
    tile: int = 32,
    tile_overlap: int = 8,
) -> np.ndarray:
    """z~ = SR(G1(x)) (or SR(x) when g1 is None), tiled when the input is large."""
    if g1 is not None:
        g1.eval()
    sr.eval()

    def _forward(img: np.ndarray) -> np.ndarray:
        mid = _run_net(g1, img) if g1 is not None else img
        return _run_net(sr, mid)

    h, w = lr_img.shape[:2]
    if h <= tile and w <= tile:
        return _forward(lr_img)
    return _tiled(_forward, lr_img, scale, tile, tile_overlap)


def _tiled(forward, lr_img: np.ndarray, scale: int, tile: int, overlap: int) -> np.ndarray:
    h, w = lr_img.shape[:2]
    step = tile - overlap
    out = np.zeros((h * scale, w * scale, 3), dtype=np.float64)
    weight = np.zeros((h * scale, w * scale, 1), dtype=np.float64)
    ramp = np.minimum(np.arange(1, tile * scale + 1), overlap * scale) / (overlap * scale)
    blend1d = np.minimum(ramp, ramp[::-1])

    tops = sorted({min(t, h - tile) for t in range(0, h, step)})
    lefts = sorted({min(l, w - tile) for l in range(0, w, step)})
    for top in tops:
        for left in lefts:
            patch = lr_img[top : top + tile, left : left + tile]
            pred = forward(patch)
            wy = blend1d.copy()
            wx = blend1d.copy()
            if top == 0:
                wy[: overlap * scale] = 1.0
            if top == h - tile:
                wy[-overlap * scale :] = 1.0
            if left == 0:
                wx[: overlap * scale] = 1.0
            if left == w - tile:
                wx[-overlap * scale :] = 1.0
            wmap = np.outer(wy, wx)[:, :, None]
            ys, xs = top * scale, left * scale
            out[ys : ys + tile * scale, xs : xs + tile * scale] += pred * wmap
            weight[ys : ys + tile * scale, xs : xs + tile * scale] += wmap
    return imaging.clamp01(out / weight)


def bicubic_baseline(lr_img: np.ndarray, scale: int = 4) -> np.ndarray:
    return imaging.bicubic_resize(lr_img, float(scale))


# ----------------------------------------------------------------------------
# Evaluation

def evaluate(
    method: str,
    eval_pairs: list[EvalPair],
    g1: torch.nn.Module | None = None,
    sr: torch.nn.Module | None = None,
    scale: int = 4,
    border_crop: int = 4,
    tile: int = 32,
    tile_overlap: int = 8,
    config_fingerprint: str = "",
) -> EvalReport:
    """Metric report for the trained model or the bicubic baseline."""
    if method not in ("model", "bicubic"):
        raise EvaluationError(f"unknown method {method!r}")
    if method == "model" and sr is None:
        raise EvaluationError("method 'model' requires the SR network")
    names, psnrs, ssims = [], [], []
    for pair in eval_pairs:
        if pair.gt_path is None:
            raise EvaluationError(f"missing ground truth for {pair.name}")
        lr_img = imaging.load_png(pair.lr_path)
        gt = imaging.load_png(pair.gt_path)
        if method == "bicubic":
            pred = bicubic_baseline(lr_img, scale)
        else:
            pred = sr_inference(g1, sr, lr_img, scale, tile, tile_overlap)
        if pred.shape != gt.shape:
            raise EvaluationError(
                f"{pair.name}: prediction {pred.shape[:2]} vs ground truth {gt.shape[:2]}"
            )
        names.append(pair.name)
        psnrs.append(imaging.psnr(pred, gt, border_crop))
        ssims.append(imaging.ssim(pred, gt))
    return EvalReport(
        method=method, names=names, psnr_values=psnrs, ssim_values=ssims,
        border_crop=border_crop, config_fingerprint=config_fingerprint,
    )


def evaluate_lr_restoration(
    g1: torch.nn.Module, eval_pairs: list[EvalPair], scale: int = 4
) -> tuple[float, float]:
    """Mean PSNR of (G1(x), clean LR) and (x, clean LR); clean LR = bicubic(gt)/scale.

    Evaluation-only privilege: uses the ground-truth pairing the trainer never sees.
    """
    g1.eval()
    restored, baseline = [], []
    for pair in eval_pairs:
        if pair.gt_path is None:
            raise EvaluationError(f"missing ground truth for {pair.name}")
        x = imaging.load_png(pair.lr_path)
        gt = imaging.load_png(pair.gt_path)
        y_clean = imaging.bicubic_resize(gt, 1.0 / scale)
        restored.append(imaging.psnr(_run_net(g1, x), y_clean))
        baseline.append(imaging.psnr(x, y_clean))
    return float(np.mean(restored)), float(np.mean(baseline))


# ----------------------------------------------------------------------------
# Ablation harness

def _structure_update(structure_id: str, state: TrainState, batch, lr: float) -> dict:
    """One training iteration of a reduced structure; mirrors the full updates."""
    from .training import _lr_cycle_update, _hr_cycle_update

    cfg = state.cfg
    if structure_id == "full":
        lr_bd = _lr_cycle_update(state, batch, cfg.opt_phase2, lr, cfg.w2_phase2)
        hr_bd = _hr_cycle_update(state, batch, lr)
        return {"lr_cycle_total": lr_bd.total, "hr_cycle_total": hr_bd.total}
    if structure_id == "structure2":
        lr_bd = _lr_cycle_update(state, batch, cfg.opt_phase2, lr, cfg.w2_phase2)
        return {"lr_cycle_total": lr_bd.total}

    # structures 1 and 3 train on the HR-cycle objective only
    g3, d2, sr = state.nets["g3"], state.nets["d2"], state.nets["sr"]
    g1 = state.nets["g1"] if structure_id == "structure3" else None
    x, y, z = batch.x, batch.y, batch.z

    def forward_hr(inp):
        return sr(g1(inp)) if g1 is not None else sr(inp)

    _set_lr(state.opts["d2"], lr)
    with torch.no_grad():
        fake_hr = forward_hr(x)
    d_loss = losses.lsgan_d_loss(d2(z), d2(fake_hr))
    _check_finite(d_loss, "D2 loss")
    state.opts["d2"].zero_grad()
    d_loss.backward()
    _step(state.opts["d2"], d2, cfg.grad_clip)

    gen_names = ["g3", "sr"] + (["g1"] if g1 is not None else [])
    for name in gen_names:
        _set_lr(state.opts[name], lr)
    fake_hr = forward_hr(x)
    gan = losses.lsgan_g_loss(d2(fake_hr))
    cyc = losses.cycle_loss(g3(fake_hr), x)
    idt = losses.identity_loss_hr(sr(y), z)
    tv = losses.tv_loss(fake_hr)
    total, hr_bd = losses.total_loss_hr(gan, cyc, idt, tv, cfg.weights)
    if g1 is not None:
        # structure 3 keeps the LR identity and TV regularizers on G1
        g1y = g1(x)
        total = total + cfg.w2_phase2 * losses.identity_loss_lr(g1(y), y) \
            + cfg.weights.w3 * losses.tv_loss(g1y)
    _check_finite(total, "ablation loss")
    for name in gen_names:
        state.opts[name].zero_grad()
    total.backward()
    for name in gen_names:
        _step(state.opts[name], state.nets[name], cfg.grad_clip)
    return {"hr_cycle_total": hr_bd.total}


def run_ablation(
    structure: AblationStructure,
    state: TrainState,
    split: UnpairedSplit,
    eval_pairs: list[EvalPair],
    steps: int,
    scale: int = 4,
    border_crop: int = 4,
    tile: int = 32,
    tile_overlap: int = 8,
) -> EvalReport:
    """Train the reduced structure from the given state and evaluate it.

    The caller provides identically-seeded states and the same step budget for
    every structure so the comparisons share one data stream.
    """
    if structure.id not in STRUCTURE_IDS:
        raise EvaluationError(f"unknown ablation structure {structure.id!r}")
    cfg = state.cfg
    for name in structure.active_networks:
        state.nets[name].train()
    for _ in range(steps):
        lr = lr_at(state.phase_iteration, cfg.opt_phase2)
        batch = sample_training_batch(split, cfg.batch_size, state.rng)
        _structure_update(structure.id, state, batch, lr)
        state.iteration += 1
        state.phase_iteration += 1
    g1 = state.nets["g1"] if "g1" in structure.active_networks else None
    report = evaluate(
        "model", eval_pairs, g1=g1, sr=state.nets["sr"], scale=scale,
        border_crop=border_crop, tile=tile, tile_overlap=tile_overlap,
    )
    report.method = structure.id
    return report


# ----------------------------------------------------------------------------
# Reporting

def emit_report(reports: list[EvalReport], path) -> None:
    """Write a method-comparison table in text and JSON forms."""
    if not reports:
        raise EvaluationError("no reports to emit")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{'method':<14}{'PSNR':>10}{'SSIM':>10}"]
    for r in reports:
        lines.append(f"{r.method:<14}{r.mean_psnr:>10.4f}{r.mean_ssim:>10.4f}")
    text = "\n".join(lines) + "\n"
    path.write_text(text)
    json_path = path.with_suffix(".json")
    with open(json_path, "w") as f:
        json.dump({"version": REPORT_VERSION, "reports": [r.as_dict() for r in reports]},
                  f, indent=1, sort_keys=True)
        f.write("\n")


def load_report(path) -> dict:
    with open(Path(path).with_suffix(".json")) as f:
        payload = json.load(f)
    if payload.get("version") != REPORT_VERSION:
        raise EvaluationError(f"unsupported report version {payload.get('version')}")
    return payload


def emit_panels(eval_pairs: list[EvalPair], g1, sr, out_dir, scale: int = 4,
                tile: int = 32, tile_overlap: int = 8) -> None:
    """Side-by-side PNG panels: bicubic-upsampled input / model output / ground truth."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for pair in eval_pairs:
        lr_img = imaging.load_png(pair.lr_path)
        panels = [bicubic_baseline(lr_img, scale),
                  sr_inference(g1, sr, lr_img, scale, tile, tile_overlap)]
        if pair.gt_path is not None:
            panels.append(imaging.load_png(pair.gt_path))
        imaging.save_png(np.concatenate(panels, axis=1), out_dir / f"{pair.name}_panel.png")
