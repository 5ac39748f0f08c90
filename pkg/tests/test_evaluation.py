import json

import numpy as np
import pytest
import torch

from cyclesr import imaging
from cyclesr.data import build_unpaired_split, list_eval_set
from cyclesr.evaluation import (
    STRUCTURE_IDS,
    EvalReport,
    EvaluationError,
    ablation_structure,
    bicubic_baseline,
    emit_panels,
    emit_report,
    evaluate,
    evaluate_lr_restoration,
    load_report,
    run_ablation,
    sr_inference,
)
from cyclesr.networks import NetworkSpec, build_network, init_weights, parameter_fingerprint
from cyclesr.training import NET_NAMES, TrainState, TrainingConfig
from conftest import rand_image


def _toy_specs():
    return {
        "g1": NetworkSpec("generator-same-size", 1, 8),
        "g2": NetworkSpec("generator-same-size", 1, 8),
        "g3": NetworkSpec("generator-downscale", 1, 8),
        "d1": NetworkSpec("discriminator-patch16", 0, 8),
        "d2": NetworkSpec("discriminator-patch70", 0, 8),
        "sr": NetworkSpec("sr-backbone", 1, 8, scale=4),
    }


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    rng = np.random.default_rng(31)
    root = tmp_path_factory.mktemp("eval_corpus")
    for sub in ("lr", "hr", "eval_lr", "eval_gt"):
        (root / sub).mkdir()
    for i in range(1, 5):
        imaging.save_png(rand_image(rng, 40, 40), root / "lr" / f"{i:04d}.png")
        imaging.save_png(rand_image(rng, 160, 160), root / "hr" / f"{i + 4:04d}.png")
    for i in range(2):
        gt = rand_image(rng, 96, 96)
        imaging.save_png(gt, root / "eval_gt" / f"e{i}.png")
        imaging.save_png(imaging.bicubic_resize(gt, 0.25), root / "eval_lr" / f"e{i}.png")
    return root


@pytest.fixture(scope="module")
def pairs(corpus):
    return list_eval_set(corpus / "eval_lr", corpus / "eval_gt")


@pytest.fixture(scope="module")
def nets():
    g1 = init_weights(build_network(NetworkSpec("generator-same-size", 1, 8)), 0)
    sr = init_weights(build_network(NetworkSpec("sr-backbone", 1, 8, scale=4)), 1)
    return g1, sr


# ----------------------------------------------------------------------------
# Ablation structure census

def test_structure_definitions():
    s1 = ablation_structure("structure1")
    assert s1.active_networks == {"sr", "g3", "d2"}
    assert "gan_lr" not in s1.active_losses
    s2 = ablation_structure("structure2")
    assert s2.active_networks == {"g1", "g2", "d1", "sr"}
    assert s2.active_losses == {"gan_lr", "cyc_lr", "idt_lr", "tv_lr"}
    s3 = ablation_structure("structure3")
    assert s3.active_networks == {"g1", "g3", "d2", "sr"}
    assert {"idt_lr", "tv_lr"} <= s3.active_losses
    assert "cyc_lr" not in s3.active_losses
    full = ablation_structure("full")
    assert full.active_networks == set(NET_NAMES)
    assert len(full.active_losses) == 8
    with pytest.raises(EvaluationError):
        ablation_structure("structure9")


@pytest.mark.parametrize("structure_id", STRUCTURE_IDS)
def test_ablation_touches_only_active_networks(structure_id, corpus, pairs):
    split = build_unpaired_split(corpus / "lr", corpus / "hr", (1, 4), (5, 8),
                                 lr_crop=32, scale=4)
    state = TrainState(_toy_specs(), TrainingConfig(batch_size=2), seed=11)
    state.phase = 2
    structure = ablation_structure(structure_id)
    before = {n: parameter_fingerprint(state.nets[n]) for n in NET_NAMES}
    run_ablation(structure, state, split, pairs, steps=1)
    after = {n: parameter_fingerprint(state.nets[n]) for n in NET_NAMES}
    changed = {n for n in NET_NAMES if before[n] != after[n]}
    expected = set(structure.active_networks)
    if structure_id == "structure2":
        expected -= {"sr"}  # active at inference, frozen during LR-only training
    if structure_id == "structure3":
        expected -= {"g2", "d1"}  # only the listed nets carry gradients anyway
    assert changed == expected


# ----------------------------------------------------------------------------
# Inference

def test_sr_inference_output_shape(nets):
    g1, sr = nets
    out = sr_inference(g1, sr, np.random.default_rng(0).random((24, 24, 3)))
    assert out.shape == (96, 96, 3)
    assert out.min() >= 0 and out.max() <= 1


def test_sr_inference_without_restorer(nets):
    _, sr = nets
    out = sr_inference(None, sr, np.random.default_rng(0).random((16, 16, 3)))
    assert out.shape == (64, 64, 3)


def test_tiled_matches_whole_image(nets, rng):
    g1, sr = nets
    img = rand_image(rng, 48, 48)
    whole = sr_inference(g1, sr, img, tile=64, tile_overlap=8)
    tiled = sr_inference(g1, sr, img, tile=32, tile_overlap=8)
    # blending only changes the result where tiles meet; demand near-identity
    assert imaging.psnr(tiled, whole) > 40.0
    interior = (slice(8 * 4, -8 * 4),) * 2
    assert np.abs(tiled[interior] - whole[interior]).max() < 0.2


def test_bicubic_baseline_shape(rng):
    out = bicubic_baseline(rand_image(rng, 10, 14), 4)
    assert out.shape == (40, 56, 3)


# ----------------------------------------------------------------------------
# evaluate()

def test_evaluate_bicubic_report(pairs):
    report = evaluate("bicubic", pairs)
    assert report.method == "bicubic"
    assert len(report.psnr_values) == 2
    assert all(p > 10 for p in report.psnr_values)
    assert all(0 <= s <= 1 for s in report.ssim_values)
    assert report.mean_psnr == pytest.approx(np.mean(report.psnr_values))


def test_evaluate_deterministic(pairs, nets):
    g1, sr = nets
    r1 = evaluate("model", pairs, g1=g1, sr=sr)
    r2 = evaluate("model", pairs, g1=g1, sr=sr)
    assert r1.psnr_values == r2.psnr_values
    assert r1.ssim_values == r2.ssim_values


def test_evaluate_identity_stub_equals_bicubic(pairs):
    class BicubicStub(torch.nn.Module):
        def forward(self, x):
            arr = x[0].numpy().transpose(1, 2, 0).astype(np.float64)
            img = imaging.from_model_range(arr)
            up = imaging.bicubic_resize(img, 4.0)
            out = imaging.to_model_range(up).transpose(2, 0, 1)[None]
            return torch.from_numpy(np.ascontiguousarray(out)).float()

    stub = evaluate("model", pairs, g1=None, sr=BicubicStub(), tile=1000)
    base = evaluate("bicubic", pairs)
    for a, b in zip(stub.psnr_values, base.psnr_values):
        assert a == pytest.approx(b, abs=0.01)  # float32 round trip in the stub


def test_evaluate_gt_as_prediction_is_perfect(corpus, tmp_path):
    # feed the ground truth through a 'baseline' at scale 1 by pairing gt with itself
    gt_dir = corpus / "eval_gt"
    pairs_self = list_eval_set(gt_dir, gt_dir)
    report = evaluate("bicubic", pairs_self, scale=1)
    assert all(p == pytest.approx(imaging.PSNR_CAP) for p in report.psnr_values)
    assert all(s == pytest.approx(1.0, abs=1e-9) for s in report.ssim_values)


def test_evaluate_errors(pairs, nets, corpus):
    g1, sr = nets
    with pytest.raises(EvaluationError):
        evaluate("magic", pairs)
    with pytest.raises(EvaluationError):
        evaluate("model", pairs, g1=g1, sr=None)
    no_gt = list_eval_set(corpus / "eval_lr")
    with pytest.raises(EvaluationError, match="ground truth"):
        evaluate("bicubic", no_gt)


def test_evaluate_lr_restoration_identity_limit(pairs):
    class IdentityNet(torch.nn.Module):
        def forward(self, x):
            return x

    restored, baseline = evaluate_lr_restoration(IdentityNet(), pairs)
    # identity restorer scores exactly the no-op baseline
    assert restored == pytest.approx(baseline, abs=1e-6)


# ----------------------------------------------------------------------------
# Reports

def test_emit_report_round_trip(pairs, tmp_path):
    r1 = evaluate("bicubic", pairs, config_fingerprint="abc123")
    path = tmp_path / "table.txt"
    emit_report([r1], path)
    text = path.read_text()
    assert "bicubic" in text and "PSNR" in text
    payload = load_report(path)
    rec = payload["reports"][0]
    assert rec["method"] == "bicubic"
    assert rec["mean_psnr"] == pytest.approx(r1.mean_psnr)
    assert rec["config_fingerprint"] == "abc123"
    assert len(rec["per_image"]) == 2


def test_emit_report_empty_errors(tmp_path):
    with pytest.raises(EvaluationError):
        emit_report([], tmp_path / "t.txt")


def test_load_report_bad_version(tmp_path):
    path = tmp_path / "t.json"
    path.write_text(json.dumps({"version": 99, "reports": []}))
    with pytest.raises(EvaluationError):
        load_report(tmp_path / "t.txt")


def test_emit_panels(pairs, nets, tmp_path):
    g1, sr = nets
    emit_panels(pairs, g1, sr, tmp_path / "panels")
    files = sorted((tmp_path / "panels").glob("*_panel.png"))
    assert len(files) == 2
    panel = imaging.load_png(files[0])
    assert panel.shape == (96, 96 * 3, 3)  # input-upsampled / output / ground truth
