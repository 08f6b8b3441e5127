"""Multi-stage deep feature extraction.

Two interchangeable backbones expose ``extract_stage_features``:

* :class:`OnnxBackbone`, a pretrained network read from an ONNX file whose
  five tap nodes give the stage outputs (default: the last ReLU of each
  VGG16 block, ``relu1_2`` ... ``relu5_3``);
* :class:`SyntheticBackbone`, a seeded random conv/pool stack needing no
  model file, used by the tests.
"""

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import (BackboneLoadError, InferenceError, MissingTapError,
                         ModelFileNotFoundError, PreconditionError, ShapeProbeError)
from .maps import as_image

try:  # Python 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

N_STAGES = 5
DEFAULT_TAPS = ("relu1_2", "relu2_2", "relu3_3", "relu4_3", "relu5_3")
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)
PROBE_SIZE = 224
MIN_INPUT = 32
MODEL_PATH_ENV = "SMICQA_MODEL_PATH"


@dataclass(frozen=True)
class FeatureStack:
    """Stage index (1..5) -> ``(H_s, W_s, C_s)`` float64 features."""

    stages: Dict[int, np.ndarray]
    source: str
    preprocessing: Dict[str, Tuple[float, ...]] = field(default_factory=dict)

    def __getitem__(self, stage):
        return self.stages[stage]


@dataclass(frozen=True)
class BackboneConfig:
    model_path: str
    stage_taps: Tuple[str, ...] = DEFAULT_TAPS
    input_mean: Tuple[float, float, float] = IMAGENET_MEAN
    input_std: Tuple[float, float, float] = IMAGENET_STD

    def __post_init__(self):
        if len(self.stage_taps) != N_STAGES:
            raise PreconditionError(
                f"expected exactly {N_STAGES} stage taps, got {len(self.stage_taps)}"
            )
        object.__setattr__(self, "stage_taps", tuple(self.stage_taps))
        object.__setattr__(self, "input_mean", tuple(float(v) for v in self.input_mean))
        object.__setattr__(self, "input_std", tuple(float(v) for v in self.input_std))

    @classmethod
    def from_toml(cls, path):
        """Read a ``[backbone]`` table; ``SMICQA_MODEL_PATH`` overrides the path."""
        with open(path, "rb") as fh:
            data = tomllib.load(fh).get("backbone", {})
        model_path = os.environ.get(MODEL_PATH_ENV) or data.get("model_path")
        if not model_path:
            raise PreconditionError(f"no model_path in {path} and {MODEL_PATH_ENV} unset")
        base = Path(path).resolve().parent
        kwargs = {"model_path": str(base / model_path)}
        for key in ("stage_taps", "input_mean", "input_std"):
            if key in data:
                kwargs[key] = tuple(data[key])
        return cls(**kwargs)


def _preprocess(image, mean, std):
    img = as_image(image)
    if img.shape[2] == 1:
        img = np.repeat(img, 3, axis=2)
    return (img - np.asarray(mean)) / np.asarray(std)


def _check_input(image):
    h, w = np.shape(image)[:2]
    if min(h, w) < MIN_INPUT:
        raise PreconditionError(f"image {h}x{w} too small; need at least {MIN_INPUT} per side")


class OnnxBackbone:
    """ONNX Runtime session returning the five tap outputs as HxWxC arrays."""

    source = "pretrained"

    def __init__(self, session, config, input_name, channels, strides):
        self._session = session  # InferenceSession.run is thread-safe
        self.config = config
        self.input_name = input_name
        self.stage_channels = tuple(channels)
        self.stage_strides = tuple(strides)

    def _run(self, batch):
        return self._session.run(list(self.config.stage_taps), {self.input_name: batch})

    def extract_stage_features(self, image):
        _check_input(image)
        x = _preprocess(image, self.config.input_mean, self.config.input_std)
        batch = np.ascontiguousarray(x.transpose(2, 0, 1)[None], dtype=np.float32)
        try:
            outputs = self._run(batch)
        except Exception as exc:
            raise InferenceError(f"inference failed: {exc}") from exc
        stages = {}
        for s, (tap, out) in enumerate(zip(self.config.stage_taps, outputs), start=1):
            if out.ndim != 4:
                raise InferenceError(f"stage {s} ({tap}) produced shape {out.shape}")
            stages[s] = np.ascontiguousarray(out[0].transpose(1, 2, 0), dtype=np.float64)
        return FeatureStack(stages, self.source, _prep_info(self.config.input_mean,
                                                            self.config.input_std))


def _prep_info(mean, std):
    return {"mean": tuple(mean), "std": tuple(std)}


def load_backbone(config):
    """Open an ONNX model, expose its taps as outputs and probe their shapes."""
    import onnx
    import onnxruntime as ort

    path = Path(config.model_path)
    if not path.is_file():
        raise ModelFileNotFoundError(f"model file not found: {path}")
    try:
        model = onnx.load(str(path))
    except Exception as exc:
        raise BackboneLoadError(f"cannot parse model file {path}: {exc}") from exc

    graph = model.graph
    produced = {o for node in graph.node for o in node.output}
    produced |= {o.name for o in graph.output}
    for tap in config.stage_taps:
        if tap not in produced:
            raise MissingTapError(tap)
    existing = {o.name for o in graph.output}
    for tap in config.stage_taps:
        if tap not in existing:
            graph.output.append(onnx.ValueInfoProto(name=tap))

    initializers = {i.name for i in graph.initializer}
    inputs = [i.name for i in graph.input if i.name not in initializers]
    if len(inputs) != 1:
        raise BackboneLoadError(f"expected one image input, found {inputs}")
    try:
        opts = ort.SessionOptions()
        opts.intra_op_num_threads = 1
        session = ort.InferenceSession(model.SerializeToString(), opts,
                                       providers=["CPUExecutionProvider"])
    except Exception as exc:
        raise BackboneLoadError(f"cannot create inference session for {path}: {exc}") from exc

    probe = np.zeros((1, 3, PROBE_SIZE, PROBE_SIZE), dtype=np.float32)
    try:
        outputs = session.run(list(config.stage_taps), {inputs[0]: probe})
    except Exception as exc:
        raise ShapeProbeError(f"probe inference failed: {exc}") from exc
    channels, strides = [], []
    for tap, out in zip(config.stage_taps, outputs):
        if out.ndim != 4 or out.shape[0] != 1 or out.shape[2] < 1:
            raise ShapeProbeError(f"tap {tap!r} has unexpected shape {out.shape}")
        stride = PROBE_SIZE / out.shape[2]
        if stride != int(stride):
            raise ShapeProbeError(f"tap {tap!r} has non-integer stride ({out.shape})")
        channels.append(int(out.shape[1]))
        strides.append(int(stride))
    if any(b < a for a, b in zip(channels[:4], channels[1:4])):
        raise ShapeProbeError(f"stage channels decrease through stage 4: {channels}")
    if any(b < a for a, b in zip(strides, strides[1:])):
        raise ShapeProbeError(f"tap strides are not ordered by depth: {strides}")
    return OnnxBackbone(session, config, inputs[0], channels, strides)


class SyntheticBackbone:
    """Seeded stack of 3x3 conv + ReLU stages with 2x2 max-pooling between them."""

    source = "synthetic"
    stage_strides = (1, 2, 4, 8, 16)

    def __init__(self, seed, channel_plan, input_mean=IMAGENET_MEAN, input_std=IMAGENET_STD):
        if len(channel_plan) != N_STAGES:
            raise PreconditionError(f"channel_plan needs {N_STAGES} entries")
        self.seed = int(seed)
        self.stage_channels = tuple(int(c) for c in channel_plan)
        self.input_mean = tuple(input_mean)
        self.input_std = tuple(input_std)
        rng = np.random.default_rng(self.seed)
        self._weights = []
        c_in = 3
        for c_out in self.stage_channels:
            w = rng.standard_normal((c_in, 3, 3, c_out)) * np.sqrt(2.0 / (9 * c_in))
            b = rng.standard_normal(c_out) * 0.1
            self._weights.append((w, b))
            c_in = c_out

    @staticmethod
    def _conv3x3(x, w, b):
        padded = np.pad(x, ((1, 1), (1, 1), (0, 0)))
        win = sliding_window_view(padded, (3, 3), axis=(0, 1))  # (H, W, C, 3, 3)
        return np.tensordot(win, w, axes=([2, 3, 4], [0, 1, 2])) + b

    @staticmethod
    def _pool(x):
        h, w = x.shape[0] // 2, x.shape[1] // 2
        return x[:2 * h, :2 * w].reshape(h, 2, w, 2, -1).max(axis=(1, 3))

    def extract_stage_features(self, image):
        _check_input(image)
        x = _preprocess(image, self.input_mean, self.input_std)
        stages = {}
        for s, (w, b) in enumerate(self._weights, start=1):
            if s > 1:
                x = self._pool(x)
            x = np.maximum(self._conv3x3(x, w, b), 0.0)
            stages[s] = np.ascontiguousarray(x)
        return FeatureStack(stages, self.source, _prep_info(self.input_mean, self.input_std))


def synthetic_backbone(seed=0, channel_plan=(8, 16, 32, 64, 64)):
    return SyntheticBackbone(seed, channel_plan)


def extract_stage_features(backbone, image):
    return backbone.extract_stage_features(image)
