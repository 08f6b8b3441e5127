import importlib.util
import sys
from pathlib import Path

import numpy as np
import pytest

from smicqa import synthetic_backbone

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(Path(__file__).resolve().parent))


@pytest.fixture(scope="session")
def backbone():
    return synthetic_backbone(seed=0, channel_plan=(4, 8, 16, 32, 32))


def noisy_pair(seed, size=64, sigma=0.08, channels=3):
    rng = np.random.default_rng(seed)
    # smooth-ish reference so features carry structure
    base = rng.random((size // 8, size // 8, channels))
    ref = np.kron(base, np.ones((8, 8, 1)))
    ref = np.clip(ref + 0.05 * rng.standard_normal(ref.shape), 0, 1)
    dist = np.clip(ref + sigma * rng.standard_normal(ref.shape), 0, 1)
    return ref, dist


@pytest.fixture
def pair():
    return noisy_pair(0)


@pytest.fixture(scope="session")
def random_vgg_onnx(tmp_path_factory):
    pytest.importorskip("torch")
    pytest.importorskip("onnxruntime")
    spec = importlib.util.spec_from_file_location(
        "export_vgg16_onnx", ROOT / "scripts" / "export_vgg16_onnx.py")
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    path = tmp_path_factory.mktemp("onnx") / "vgg16_random.onnx"
    return module.export(path, random=True)


@pytest.fixture
def deep_pair():
    # stage 5 sits at stride 16, so 112 px is the smallest input with a 7x7 tile
    return noisy_pair(0, size=112)


def make_dataset(root, n=12, size=112, polarity=None):
    """Write ``n`` noisy PNG pairs and a manifest; MOS falls with the noise level."""
    from PIL import Image

    root.mkdir(parents=True, exist_ok=True)
    lines = ["ref,dist,mos" + (",polarity" if polarity else "")]
    for i in range(n):
        sigma = 0.02 + 0.01 * i
        ref, dist = noisy_pair(100 + i % 3, size=size, sigma=sigma)
        names = (f"ref{i}.png", f"dist{i}.png")
        for name, arr in zip(names, (ref, dist)):
            Image.fromarray(np.round(arr * 255).astype(np.uint8)).save(root / name)
        mos = 5.0 - 20 * sigma + 0.05 * ((i * 7) % 5)
        if polarity == "dmos":
            mos = -mos
        lines.append(f"{names[0]},{names[1]},{mos}" + (f",{polarity}" if polarity else ""))
    path = root / "manifest.csv"
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture(scope="session")
def dataset(tmp_path_factory):
    return make_dataset(tmp_path_factory.mktemp("data"))
