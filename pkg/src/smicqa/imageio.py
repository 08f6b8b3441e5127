"""Reading images into [0, 1] arrays and exporting attention maps."""

from pathlib import Path

import numpy as np
from PIL import Image

from .exceptions import PreconditionError

_SIXTEEN_BIT_MODES = {"I;16", "I;16B", "I;16L", "I"}


def load_image(path):
    """Decode a PNG/BMP (8- or 16-bit) as float64 ``(H, W, C)`` in [0, 1]."""
    with Image.open(path) as im:
        im.load()
        if im.mode in _SIXTEEN_BIT_MODES:
            arr = np.asarray(im, dtype=np.float64) / 65535.0
            return np.clip(arr, 0.0, 1.0)[:, :, None]
        if im.mode in ("L", "LA"):
            arr = np.asarray(im.convert("L"), dtype=np.float64)[:, :, None]
        else:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    return arr / 255.0


def to_uint8(values):
    """Scale [0, 1] values by 255 and round half up."""
    values = np.asarray(values, dtype=np.float64)
    if values.size and (values.min() < 0.0 or values.max() > 1.0):
        raise PreconditionError("values must lie in [0, 1]")
    return np.floor(values * 255.0 + 0.5).astype(np.uint8)


def save_attention_png(attention, path):
    """Write an attention map as an 8-bit grayscale PNG."""
    values = getattr(attention, "values", attention)
    Image.fromarray(to_uint8(values), mode="L").save(Path(path), format="PNG")
