"""The five cycle networks (G1, G2, G3, D1, D2) and the SR backbone.

Generators follow the CycleGAN convention (7x7 outer convs with reflection
padding, residual body); discriminators are PatchGAN stacks whose strides set
the receptive field (16x16 for D1, 70x70 for D2); the SR backbone is an
EDSR-style residual network with two x2 sub-pixel upsampling stages.
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

PARAMS_MAGIC = b"CSRP"
PARAMS_VERSION = 1

KINDS = (
    "generator-same-size",
    "generator-downscale",
    "discriminator-patch16",
    "discriminator-patch70",
    "sr-backbone",
)


class NetworkError(ValueError):
    pass


@dataclass(frozen=True)
class NetworkSpec:
    kind: str
    n_resblocks: int = 6
    base_channels: int = 64
    leaky_slope: float = 0.2
    norm: str = "batch"
    scale: int = 4

    def __post_init__(self):
        if self.kind not in KINDS:
            raise NetworkError(f"unknown network kind {self.kind!r}")
        if self.base_channels <= 0:
            raise NetworkError("base_channels must be positive")
        if not 0 < self.leaky_slope < 1:
            raise NetworkError("leaky_slope must be in (0, 1)")
        if self.norm not in ("batch", "none"):
            raise NetworkError(f"unknown norm {self.norm!r}")
        if self.kind == "sr-backbone" and self.scale != 4:
            raise NetworkError("sr-backbone supports scale 4 only")


def _norm_layer(spec: NetworkSpec, ch: int) -> nn.Module:
    return nn.BatchNorm2d(ch) if spec.norm == "batch" else nn.Identity()


class _EdgePad(nn.Module):
    """Reflection padding, falling back to replicate when a dim is <= pad."""

    def __init__(self, pad: int):
        super().__init__()
        self.pad = pad

    def forward(self, x):
        mode = "reflect" if min(x.shape[2], x.shape[3]) > self.pad else "replicate"
        return torch.nn.functional.pad(x, [self.pad] * 4, mode=mode)


class ResBlock(nn.Module):
    def __init__(self, ch: int, spec: NetworkSpec):
        super().__init__()
        self.conv1 = nn.Conv2d(ch, ch, 3, 1, 1)
        self.norm1 = _norm_layer(spec, ch)
        self.act = nn.LeakyReLU(spec.leaky_slope)
        self.conv2 = nn.Conv2d(ch, ch, 3, 1, 1)
        self.norm2 = _norm_layer(spec, ch)

    def forward(self, x):
        h = self.act(self.norm1(self.conv1(x)))
        h = self.norm2(self.conv2(h))
        return x + h


class CycleGenerator(nn.Module):
    """Size-preserving generator (G1/G2); downscale=True gives G3 (two stride-2 convs)."""

    def __init__(self, spec: NetworkSpec, downscale: bool = False):
        super().__init__()
        self.spec = spec
        self.downscale = downscale
        ch = spec.base_channels
        head: list[nn.Module] = [
            _EdgePad(3),
            nn.Conv2d(3, ch, 7, 1, 0),
            nn.LeakyReLU(spec.leaky_slope),
        ]
        for _ in range(2):
            if downscale:
                head += [nn.Conv2d(ch, ch, 4, 2, 1)]
            else:
                head += [nn.Conv2d(ch, ch, 3, 1, 1)]
            head += [_norm_layer(spec, ch), nn.LeakyReLU(spec.leaky_slope)]
        self.head = nn.Sequential(*head)
        self.body = nn.Sequential(*[ResBlock(ch, spec) for _ in range(spec.n_resblocks)])
        self.tail = nn.Sequential(
            nn.Conv2d(ch, ch, 3, 1, 1),
            _norm_layer(spec, ch),
            nn.LeakyReLU(spec.leaky_slope),
            nn.Conv2d(ch, ch, 3, 1, 1),
            _norm_layer(spec, ch),
            nn.LeakyReLU(spec.leaky_slope),
            _EdgePad(3),
            nn.Conv2d(ch, 3, 7, 1, 0),  # linear output
        )

    def forward(self, x):
        if x.dim() != 4 or x.shape[1] != 3:
            raise NetworkError(f"expected (N, 3, H, W) input, got {tuple(x.shape)}")
        if self.downscale and (x.shape[2] % 4 or x.shape[3] % 4):
            raise NetworkError(
                f"downscale generator needs dims divisible by 4, got {tuple(x.shape[2:])}"
            )
        out = self.tail(self.body(self.head(x)))
        # size-preserving generators predict a correction to the input, so the
        # identity map is the natural starting point for restoration
        return out if self.downscale else x + out


# PatchGAN stride tables: (kernel, out_channels, stride), final layer is 1-channel
_D_LAYERS = {
    "discriminator-patch16": [(4, 1, 1), (4, 2, 1), (4, 4, 1), (4, 8, 1), (4, None, 1)],
    "discriminator-patch70": [(4, 1, 2), (4, 2, 2), (4, 4, 2), (4, 8, 1), (4, None, 1)],
}

RECEPTIVE_FIELD = {"discriminator-patch16": 16, "discriminator-patch70": 70}


def patch_output_size(kind: str, h: int, w: int) -> tuple[int, int]:
    """Output patch-map dims from the stride arithmetic; raises if input is too small."""
    for k, _, s in _D_LAYERS[kind]:
        h = (h + 2 - k) // s + 1
        w = (w + 2 - k) // s + 1
    if h < 1 or w < 1:
        raise NetworkError("input smaller than the discriminator can classify")
    return h, w


class PatchDiscriminator(nn.Module):
    def __init__(self, spec: NetworkSpec):
        super().__init__()
        self.spec = spec
        ch = spec.base_channels
        layers: list[nn.Module] = []
        in_ch = 3
        table = _D_LAYERS[spec.kind]
        for i, (k, mult, s) in enumerate(table):
            out_ch = 1 if mult is None else ch * mult
            layers.append(nn.Conv2d(in_ch, out_ch, k, s, 1))
            last = i == len(table) - 1
            if not last:
                if i > 0:  # no norm on first and last layers
                    layers.append(_norm_layer(spec, out_ch))
                layers.append(nn.LeakyReLU(spec.leaky_slope))
            in_ch = out_ch
        self.model = nn.Sequential(*layers)

    def forward(self, x):
        if x.dim() != 4 or x.shape[1] != 3:
            raise NetworkError(f"expected (N, 3, H, W) input, got {tuple(x.shape)}")
        h, w = x.shape[2], x.shape[3]
        rf = RECEPTIVE_FIELD[self.spec.kind]
        if h < rf or w < rf:
            raise NetworkError(
                f"{self.spec.kind} needs input >= {rf}x{rf}, got {h}x{w}"
            )
        patch_output_size(self.spec.kind, h, w)
        return self.model(x)


class SRNetwork(nn.Module):
    """EDSR-style x4 backbone: residual body without norm, sub-pixel tail."""

    def __init__(self, spec: NetworkSpec):
        super().__init__()
        self.spec = spec
        ch = spec.base_channels
        self.head = nn.Conv2d(3, ch, 3, 1, 1)
        body = []
        for _ in range(spec.n_resblocks):
            body += [SRResBlock(ch)]
        body += [nn.Conv2d(ch, ch, 3, 1, 1)]
        self.body = nn.Sequential(*body)
        self.tail = nn.Sequential(
            nn.Conv2d(ch, 4 * ch, 3, 1, 1),
            nn.PixelShuffle(2),
            nn.Conv2d(ch, 4 * ch, 3, 1, 1),
            nn.PixelShuffle(2),
            nn.Conv2d(ch, 3, 3, 1, 1),
        )

    def forward(self, x):
        if x.dim() != 4 or x.shape[1] != 3:
            raise NetworkError(f"expected (N, 3, H, W) input, got {tuple(x.shape)}")
        h = self.head(x)
        h = h + self.body(h)
        return self.tail(h)


class SRResBlock(nn.Module):
    def __init__(self, ch: int):
        super().__init__()
        self.conv1 = nn.Conv2d(ch, ch, 3, 1, 1)
        self.conv2 = nn.Conv2d(ch, ch, 3, 1, 1)
        self.act = nn.ReLU()

    def forward(self, x):
        return x + self.conv2(self.act(self.conv1(x)))


def build_network(spec: NetworkSpec) -> nn.Module:
    if spec.kind == "generator-same-size":
        return CycleGenerator(spec, downscale=False)
    if spec.kind == "generator-downscale":
        return CycleGenerator(spec, downscale=True)
    if spec.kind in ("discriminator-patch16", "discriminator-patch70"):
        return PatchDiscriminator(spec)
    if spec.kind == "sr-backbone":
        return SRNetwork(spec)
    raise NetworkError(f"unknown kind {spec.kind}")


def init_weights(module: nn.Module, seed: int) -> nn.Module:
    """Conv weights ~ N(0, 0.02^2), biases 0, norm scale 1; deterministic per seed."""
    gen = torch.Generator().manual_seed(seed)
    for m in module.modules():
        if isinstance(m, nn.Conv2d):
            with torch.no_grad():
                m.weight.normal_(0.0, 0.02, generator=gen)
                if m.bias is not None:
                    m.bias.zero_()
        elif isinstance(m, nn.BatchNorm2d):
            with torch.no_grad():
                m.weight.fill_(1.0)
                m.bias.zero_()
                m.running_mean.zero_()
                m.running_var.fill_(1.0)
    return module


def parameter_count(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


def parameter_fingerprint(module: nn.Module) -> str:
    h = hashlib.sha256()
    for name, t in sorted(module.state_dict().items()):
        h.update(name.encode())
        h.update(t.detach().cpu().numpy().tobytes())
    return h.hexdigest()


# ----------------------------------------------------------------------------
# Named-tensor archive: JSON header (spec echo, shapes, dtype, version) + raw
# little-endian payload + sha256 checksum. Bit-exact round trip.

def _spec_to_dict(spec: NetworkSpec) -> dict:
    return asdict(spec)


def _spec_from_dict(d: dict) -> NetworkSpec:
    return NetworkSpec(**d)


def save_params(module: nn.Module, spec: NetworkSpec, path) -> None:
    state = module.state_dict()
    entries = []
    payload = io.BytesIO()
    for name, tensor in state.items():
        arr = tensor.detach().cpu().numpy()
        entries.append({"name": name, "shape": list(arr.shape), "dtype": str(arr.dtype)})
        payload.write(np.ascontiguousarray(arr).tobytes())
    blob = payload.getvalue()
    header = {
        "version": PARAMS_VERSION,
        "spec": _spec_to_dict(spec),
        "tensors": entries,
        "sha256": hashlib.sha256(blob).hexdigest(),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(PARAMS_MAGIC)
        f.write(len(header_bytes).to_bytes(8, "little"))
        f.write(header_bytes)
        f.write(blob)


def load_params(path) -> tuple[NetworkSpec, nn.Module]:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != PARAMS_MAGIC:
            raise NetworkError(f"not a parameter archive: {path}")
        header_len = int.from_bytes(f.read(8), "little")
        header = json.loads(f.read(header_len).decode())
        if header.get("version") != PARAMS_VERSION:
            raise NetworkError(f"unsupported archive version {header.get('version')}")
        blob = f.read()
    if hashlib.sha256(blob).hexdigest() != header["sha256"]:
        raise NetworkError(f"corrupt parameter archive: {path}")
    spec = _spec_from_dict(header["spec"])
    module = build_network(spec)
    state = {}
    offset = 0
    for entry in header["tensors"]:
        dtype = np.dtype(entry["dtype"])
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * dtype.itemsize
        arr = np.frombuffer(blob, dtype=dtype, count=count, offset=offset).reshape(shape)
        offset += nbytes
        state[entry["name"]] = torch.from_numpy(arr.copy())
    module.load_state_dict(state)
    return spec, module
