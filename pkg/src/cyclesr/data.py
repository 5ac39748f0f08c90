"""Unpaired training corpus assembly and batch sampling.

Domain X comes from one half of the LR set, domain Z from a disjoint half of
the HR set, and Y is bicubic-downsampled on the fly from Z crops.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import imaging


class DatasetError(ValueError):
    pass


def _source_index(path: Path) -> int:
    """Numeric source-image index from the filename stem (e.g. '0401' -> 401)."""
    digits = re.findall(r"\d+", path.stem)
    if not digits:
        raise DatasetError(f"cannot extract a numeric index from {path.name}")
    return int(digits[-1])


def _select_by_index(directory: Path, lo: int, hi: int) -> list[Path]:
    paths = sorted(directory.glob("*.png"))
    selected = [p for p in paths if lo <= _source_index(p) <= hi]
    if not selected:
        raise DatasetError(f"no images with index in [{lo}, {hi}] under {directory}")
    return selected


@dataclass(frozen=True)
class UnpairedSplit:
    lr_paths: tuple[Path, ...]
    hr_paths: tuple[Path, ...]
    lr_crop: int = 32
    hr_crop: int = 128
    scale: int = 4

    def __post_init__(self):
        if self.hr_crop != self.lr_crop * self.scale:
            raise DatasetError(
                f"hr_crop must equal lr_crop * scale: {self.hr_crop} != {self.lr_crop} * {self.scale}"
            )
        lr_idx = {_source_index(p) for p in self.lr_paths}
        hr_idx = {_source_index(p) for p in self.hr_paths}
        overlap = lr_idx & hr_idx
        if overlap:
            raise DatasetError(
                f"pairing leak: LR and HR splits share source indices {sorted(overlap)[:5]}"
            )


def build_unpaired_split(
    lr_dir,
    hr_dir,
    lr_indices: tuple[int, int],
    hr_indices: tuple[int, int],
    lr_crop: int = 32,
    scale: int = 4,
) -> UnpairedSplit:
    lr_lo, lr_hi = lr_indices
    hr_lo, hr_hi = hr_indices
    if max(lr_lo, hr_lo) <= min(lr_hi, hr_hi):
        raise DatasetError(
            f"index ranges overlap: [{lr_lo},{lr_hi}] vs [{hr_lo},{hr_hi}]"
        )
    lr_paths = _select_by_index(Path(lr_dir), lr_lo, lr_hi)
    hr_paths = _select_by_index(Path(hr_dir), hr_lo, hr_hi)
    return UnpairedSplit(
        lr_paths=tuple(lr_paths),
        hr_paths=tuple(hr_paths),
        lr_crop=lr_crop,
        hr_crop=lr_crop * scale,
        scale=scale,
    )


@dataclass
class TrainingBatch:
    x: torch.Tensor  # (N, 3, lr_crop, lr_crop), model range
    y: torch.Tensor  # (N, 3, lr_crop, lr_crop), model range
    z: torch.Tensor  # (N, 3, hr_crop, hr_crop), model range
    x_sources: list[int] = field(default_factory=list)
    z_sources: list[int] = field(default_factory=list)


class _ImageCache:
    def __init__(self):
        self._store: dict[Path, np.ndarray] = {}

    def get(self, path: Path) -> np.ndarray:
        if path not in self._store:
            self._store[path] = imaging.load_png(path)
        return self._store[path]


_cache = _ImageCache()


def _random_crop(img: np.ndarray, size: int, rng: np.random.Generator, path: Path) -> np.ndarray:
    h, w = img.shape[:2]
    if h < size or w < size:
        raise DatasetError(f"{path.name} ({h}x{w}) smaller than crop {size}")
    top = int(rng.integers(0, h - size + 1))
    left = int(rng.integers(0, w - size + 1))
    return imaging.crop_patch(img, top, left, size)


def _to_tensor(img: np.ndarray) -> torch.Tensor:
    arr = imaging.to_model_range(img)
    return torch.from_numpy(np.ascontiguousarray(arr.transpose(2, 0, 1))).float()


def sample_training_batch(
    split: UnpairedSplit, batch_size: int, rng: np.random.Generator
) -> TrainingBatch:
    """Draw an unpaired batch; the same dihedral element is shared within each (y, z) pair."""
    if batch_size < 1:
        raise DatasetError("batch_size must be >= 1")
    xs, ys, zs, x_src, z_src = [], [], [], [], []
    for _ in range(batch_size):
        lr_path = split.lr_paths[int(rng.integers(0, len(split.lr_paths)))]
        x = _random_crop(_cache.get(lr_path), split.lr_crop, rng, lr_path)
        x = imaging.dihedral_transform(x, int(rng.integers(0, 8)))

        hr_path = split.hr_paths[int(rng.integers(0, len(split.hr_paths)))]
        z = _random_crop(_cache.get(hr_path), split.hr_crop, rng, hr_path)
        y = imaging.bicubic_resize(z, 1.0 / split.scale)
        k = int(rng.integers(0, 8))
        y = imaging.dihedral_transform(y, k)
        z = imaging.dihedral_transform(z, k)

        xs.append(_to_tensor(x))
        ys.append(_to_tensor(y))
        zs.append(_to_tensor(z))
        x_src.append(_source_index(lr_path))
        z_src.append(_source_index(hr_path))
    return TrainingBatch(
        x=torch.stack(xs), y=torch.stack(ys), z=torch.stack(zs),
        x_sources=x_src, z_sources=z_src,
    )


@dataclass(frozen=True)
class EvalPair:
    name: str
    lr_path: Path
    gt_path: Path | None


def list_eval_set(lr_dir, gt_dir=None) -> list[EvalPair]:
    lr_dir = Path(lr_dir)
    lr_paths = sorted(lr_dir.glob("*.png"))
    if gt_dir is None:
        return [EvalPair(p.stem, p, None) for p in lr_paths]
    gt_dir = Path(gt_dir)
    gt_paths = {p.stem: p for p in gt_dir.glob("*.png")}
    lr_stems = {p.stem for p in lr_paths}
    if lr_stems != set(gt_paths):
        missing = sorted(lr_stems ^ set(gt_paths))
        raise DatasetError(f"LR/GT filename mismatch: {missing[:5]}")
    return [EvalPair(p.stem, p, gt_paths[p.stem]) for p in lr_paths]
