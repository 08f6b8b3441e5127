import numpy as np
import pytest

from smicqa.backbone import (BackboneConfig, SyntheticBackbone, extract_stage_features,
                             load_backbone, synthetic_backbone)
from smicqa.exceptions import (BackboneLoadError, MissingTapError, ModelFileNotFoundError,
                               PreconditionError)

# -- synthetic backbone ------------------------------------------------------------


def test_synthetic_stage_shapes():
    bb = synthetic_backbone(seed=0, channel_plan=(4, 8, 16, 32, 32))
    feats = extract_stage_features(bb, np.full((56, 56, 3), 0.5))
    assert feats[3].shape == (14, 14, 16)
    assert [feats[s].shape[:2] for s in range(1, 6)] == [(56, 56), (28, 28), (14, 14),
                                                         (7, 7), (3, 3)]
    assert feats.source == "synthetic"
    assert all(np.all(feats[s] >= 0) for s in range(1, 6))


def test_synthetic_is_deterministic():
    img = np.random.default_rng(0).random((32, 40, 3))
    a = synthetic_backbone(seed=2).extract_stage_features(img)
    b = synthetic_backbone(seed=2).extract_stage_features(img)
    for s in range(1, 6):
        np.testing.assert_array_equal(a[s], b[s])


def test_synthetic_grayscale_replicated():
    bb = synthetic_backbone()
    g = np.random.default_rng(0).random((32, 32))
    a = bb.extract_stage_features(g)
    b = bb.extract_stage_features(np.repeat(g[:, :, None], 3, axis=2))
    np.testing.assert_array_equal(a[2], b[2])


def test_synthetic_rejects_small_input():
    with pytest.raises(PreconditionError):
        synthetic_backbone().extract_stage_features(np.zeros((31, 64, 3)))


def test_synthetic_channel_plan_length():
    with pytest.raises(PreconditionError):
        SyntheticBackbone(0, (4, 8, 16))


# -- config ----------------------------------------------------------------------

def test_config_requires_five_taps():
    with pytest.raises(PreconditionError):
        BackboneConfig("m.onnx", stage_taps=("a", "b", "c", "d"))


def test_config_from_toml(tmp_path, monkeypatch):
    monkeypatch.delenv("SMICQA_MODEL_PATH", raising=False)
    cfg = tmp_path / "bb.toml"
    cfg.write_text('[backbone]\nmodel_path = "nets/vgg.onnx"\ninput_std = [1.0, 1.0, 1.0]\n')
    c = BackboneConfig.from_toml(cfg)
    assert c.model_path == str(tmp_path / "nets" / "vgg.onnx")
    assert c.input_std == (1.0, 1.0, 1.0)
    monkeypatch.setenv("SMICQA_MODEL_PATH", "/elsewhere/m.onnx")
    assert BackboneConfig.from_toml(cfg).model_path == "/elsewhere/m.onnx"


def test_config_from_toml_without_path(tmp_path, monkeypatch):
    monkeypatch.delenv("SMICQA_MODEL_PATH", raising=False)
    cfg = tmp_path / "bb.toml"
    cfg.write_text("[backbone]\n")
    with pytest.raises(PreconditionError):
        BackboneConfig.from_toml(cfg)


# -- ONNX backbone ----------------------------------------------------------------

def test_missing_model_file(tmp_path):
    pytest.importorskip("onnxruntime")
    with pytest.raises(ModelFileNotFoundError):
        load_backbone(BackboneConfig(str(tmp_path / "absent.onnx")))


def test_corrupted_model_file(tmp_path):
    pytest.importorskip("onnxruntime")
    bad = tmp_path / "bad.onnx"
    bad.write_bytes(b"\x00\x01not a protobuf" * 10)
    with pytest.raises(BackboneLoadError):
        load_backbone(BackboneConfig(str(bad)))


@pytest.mark.slow
def test_missing_tap(random_vgg_onnx):
    taps = ("relu1_2", "relu2_2", "relu3_3", "relu4_3", "relu6_1")
    with pytest.raises(MissingTapError, match="relu6_1"):
        load_backbone(BackboneConfig(str(random_vgg_onnx), stage_taps=taps))


@pytest.mark.slow
def test_probe_channels_and_strides(random_vgg_onnx):
    bb = load_backbone(BackboneConfig(str(random_vgg_onnx)))
    assert bb.stage_channels == (64, 128, 256, 512, 512)
    assert bb.stage_strides == (1, 2, 4, 8, 16)


@pytest.mark.slow
def test_onnx_stage_dims(random_vgg_onnx):
    bb = load_backbone(BackboneConfig(str(random_vgg_onnx)))
    feats = bb.extract_stage_features(np.random.default_rng(0).random((64, 64, 3)))
    assert feats.source == "pretrained"
    assert [feats[s].shape for s in range(1, 6)] == [(64, 64, 64), (32, 32, 128),
                                                     (16, 16, 256), (8, 8, 512), (4, 4, 512)]
    assert feats[4].dtype == np.float64


@pytest.mark.slow
def test_onnx_internal_taps_become_outputs(random_vgg_onnx, tmp_path):
    # strip the declared outputs down to the last tap; the others must be
    # recovered from intermediate node outputs
    onnx = pytest.importorskip("onnx")
    model = onnx.load(str(random_vgg_onnx))
    keep = [o for o in model.graph.output if o.name == "relu5_3"]
    del model.graph.output[:]
    model.graph.output.extend(keep)
    path = tmp_path / "one_output.onnx"
    onnx.save(model, str(path))
    bb = load_backbone(BackboneConfig(str(path)))
    feats = bb.extract_stage_features(np.zeros((32, 32, 3)))
    assert feats[3].shape == (8, 8, 256)
