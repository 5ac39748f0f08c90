import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st

from cyclesr.losses import (
    LossError,
    LossWeights,
    cycle_loss,
    identity_loss_hr,
    identity_loss_lr,
    lsgan_d_loss,
    lsgan_g_loss,
    total_loss_hr,
    total_loss_lr,
    tv_loss,
)


def _rand(shape, seed=0):
    return torch.from_numpy(np.random.default_rng(seed).random(shape))


# ----------------------------------------------------------------------------
# Pointwise values

def test_lsgan_g_values():
    ones = torch.ones(2, 1, 4, 4)
    assert lsgan_g_loss(ones).item() == 0.0
    assert lsgan_g_loss(torch.zeros(2, 1, 4, 4)).item() == 1.0
    assert lsgan_g_loss(torch.full((2, 1, 4, 4), 0.5)).item() == pytest.approx(0.25)


def test_lsgan_d_values():
    ones = torch.ones(2, 1, 4, 4)
    zeros = torch.zeros(2, 1, 4, 4)
    half = torch.full((2, 1, 4, 4), 0.5)
    assert lsgan_d_loss(ones, zeros).item() == 0.0
    assert lsgan_d_loss(zeros, ones).item() == 1.0
    assert lsgan_d_loss(half, half).item() == pytest.approx(0.25)


def test_cycle_loss_values():
    a = _rand((2, 3, 8, 8), 1)
    assert cycle_loss(a, a).item() == 0.0
    assert cycle_loss(a + 0.3, a).item() == pytest.approx(0.09, abs=1e-10)
    b = _rand((2, 3, 8, 8), 2)
    # brute-force double loop oracle
    expected = float(np.mean((a.numpy() - b.numpy()) ** 2))
    total = 0.0
    for ai, bi in zip(a.flatten().tolist(), b.flatten().tolist()):
        total += (ai - bi) ** 2
    assert total / a.numel() == pytest.approx(expected, abs=1e-10)
    assert cycle_loss(a, b).item() == pytest.approx(expected, abs=1e-10)


def test_identity_lr_values():
    y = _rand((2, 3, 8, 8), 3)
    assert identity_loss_lr(y, y).item() == 0.0
    assert identity_loss_lr(y + 0.2, y).item() == pytest.approx(0.2, abs=1e-10)


def test_identity_hr_values():
    z = _rand((2, 3, 16, 16), 4)
    assert identity_loss_hr(z, z).item() == 0.0
    assert identity_loss_hr(z + 0.4, z).item() == pytest.approx(0.16, abs=1e-10)


def test_tv_loss_values():
    const = torch.full((2, 3, 8, 8), 0.7)
    assert tv_loss(const).item() == 0.0
    ramp = torch.arange(8, dtype=torch.float64).repeat(1, 3, 8, 1)
    assert tv_loss(ramp).item() == pytest.approx(1.0, abs=1e-12)


def test_tv_loss_rotation_invariant():
    batch = _rand((2, 3, 6, 6), 5)
    rotated = torch.flip(batch, dims=(2, 3))
    assert tv_loss(batch).item() == pytest.approx(tv_loss(rotated).item(), abs=1e-12)


def test_loss_errors():
    with pytest.raises(LossError):
        lsgan_g_loss(torch.empty(0))
    with pytest.raises(LossError):
        cycle_loss(torch.zeros(1, 3, 4, 4), torch.zeros(1, 3, 5, 5))
    with pytest.raises(LossError):
        tv_loss(torch.zeros(1, 3, 1, 1))
    with pytest.raises(LossError):
        LossWeights(w1=-1)


# ----------------------------------------------------------------------------
# Totals

def test_total_lr_default_weights():
    one = torch.tensor(1.0)
    total, bd = total_loss_lr(one, one, one, one, LossWeights())
    assert total.item() == pytest.approx(16.5)
    assert bd.total == pytest.approx(16.5)
    assert bd.side == "LR-cycle"


def test_total_hr_default_weights():
    one = torch.tensor(1.0)
    total, bd = total_loss_hr(one, one, one, one, LossWeights())
    assert total.item() == pytest.approx(18.0)


def test_total_zero_parts():
    zero = torch.tensor(0.0)
    total, _ = total_loss_lr(zero, zero, zero, zero, LossWeights())
    assert total.item() == 0.0


def test_total_zero_weights_leaves_gan():
    w = LossWeights(w1=0, w2=0, w3=0)
    total, _ = total_loss_lr(torch.tensor(0.7), torch.tensor(5.0),
                             torch.tensor(5.0), torch.tensor(5.0), w)
    assert total.item() == pytest.approx(0.7)


def test_total_linearity_in_weights():
    parts = [torch.tensor(v) for v in (0.3, 1.1, 0.6, 0.2)]
    base = LossWeights(w1=2, w2=3, w3=4)
    doubled = LossWeights(w1=4, w2=6, w3=8)
    t1, _ = total_loss_lr(*parts, base)
    t2, _ = total_loss_lr(*parts, doubled)
    gan = parts[0]
    assert (t2 - gan).item() == pytest.approx(2 * (t1 - gan).item(), abs=1e-10)


def test_doubling_lambda1_adds_cyc():
    parts = [torch.tensor(v, dtype=torch.float64) for v in (0.3, 1.1, 0.6, 0.2)]
    t1, _ = total_loss_hr(*parts, LossWeights(lambda1=10))
    t2, _ = total_loss_hr(*parts, LossWeights(lambda1=20))
    assert (t2 - t1).item() == pytest.approx(10 * 1.1, abs=1e-10)


def test_w2_phase_override():
    one = torch.tensor(1.0)
    total, _ = total_loss_lr(one, one, one, one, LossWeights(), w2_override=1.0)
    assert total.item() == pytest.approx(1 + 10 + 1 + 0.5)


def test_breakdown_recomposes():
    parts = [torch.tensor(v, dtype=torch.float64) for v in (0.37, 0.91, 0.13, 0.08)]
    w = LossWeights()
    _, bd = total_loss_hr(*parts, w)
    recomputed = bd.gan + w.lambda1 * bd.cyc + w.lambda2 * bd.idt + w.lambda3 * bd.tv
    assert bd.total == pytest.approx(recomputed, abs=1e-10)


# ----------------------------------------------------------------------------
# Reduction convention: batch loss equals mean of per-sample losses

@pytest.mark.parametrize("loss_fn", [cycle_loss, identity_loss_lr, identity_loss_hr])
def test_batch_mean_reduction(loss_fn):
    a = _rand((4, 3, 8, 8), 6)
    b = _rand((4, 3, 8, 8), 7)
    whole = loss_fn(a, b).item()
    per_sample = [loss_fn(a[i : i + 1], b[i : i + 1]).item() for i in range(4)]
    assert whole == pytest.approx(np.mean(per_sample), abs=1e-10)


def test_tv_batch_mean_reduction():
    batch = _rand((4, 3, 8, 8), 8)
    whole = tv_loss(batch).item()
    per_sample = [tv_loss(batch[i : i + 1]).item() for i in range(4)]
    assert whole == pytest.approx(np.mean(per_sample), abs=1e-10)


# ----------------------------------------------------------------------------
# Non-negativity and fixed points (property tests)

@given(seed=st.integers(0, 10**6))
@settings(max_examples=50, deadline=None)
def test_losses_nonnegative(seed):
    a = _rand((2, 3, 8, 8), seed)
    b = _rand((2, 3, 8, 8), seed + 1)
    assert cycle_loss(a, b).item() >= 0
    assert identity_loss_lr(a, b).item() >= 0
    assert identity_loss_hr(a, b).item() >= 0
    assert tv_loss(a).item() >= 0
    assert lsgan_g_loss(a).item() >= 0
    assert lsgan_d_loss(a, b).item() >= 0


# ----------------------------------------------------------------------------
# Gradient checks vs central finite differences (float64, 1x8x8x3)

def _fd_check(fn, x, h=1e-5, tol=1e-4):
    x = x.clone().requires_grad_(True)
    fn(x).backward()
    analytic = x.grad.reshape(-1)
    flat = x.detach().reshape(-1)
    for i in range(flat.numel()):
        orig = flat[i].item()
        flat[i] = orig + h
        fp = fn(x.detach()).item()
        flat[i] = orig - h
        fm = fn(x.detach()).item()
        flat[i] = orig
        numeric = (fp - fm) / (2 * h)
        a = analytic[i].item()
        denom = max(abs(a), abs(numeric), 1e-8)
        assert abs(a - numeric) / denom <= tol, (i, a, numeric)


def test_gradient_check_all_losses():
    rng = np.random.default_rng(42)
    x = torch.from_numpy(rng.random((1, 3, 8, 8)))
    target = torch.from_numpy(rng.random((1, 3, 8, 8)))
    # keep the L1 term away from its non-smooth ties
    gap = (x - target).abs().min().item()
    if gap < 1e-3:
        target = target + 2e-3
    _fd_check(lambda t: lsgan_g_loss(t), x)
    _fd_check(lambda t: lsgan_d_loss(t, target), x)
    _fd_check(lambda t: cycle_loss(t, target), x)
    _fd_check(lambda t: identity_loss_lr(t, target), x)
    _fd_check(lambda t: identity_loss_hr(t, target), x)
    _fd_check(lambda t: tv_loss(t), x)


def test_identity_lr_gradient_entries():
    x = torch.from_numpy(np.random.default_rng(0).random((1, 3, 8, 8))) + 0.01
    target = torch.zeros_like(x)
    x.requires_grad_(True)
    identity_loss_lr(x, target).backward()
    n = x.numel()
    grads = set(np.round(x.grad.reshape(-1).numpy() * n, 9).tolist())
    assert grads <= {1.0, -1.0}
