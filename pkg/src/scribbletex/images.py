"""Thin image I/O and conversion helpers on top of Pillow + numpy.

Images everywhere in the engine are numpy uint8 arrays, row-major:
(H, W) for single-channel masks, (H, W, 3) RGB, (H, W, 4) RGBA.
Boolean masks are numpy bool arrays of shape (H, W).
"""

from __future__ import annotations

import base64
import io

import numpy as np
from PIL import Image as PILImage, UnidentifiedImageError

from .errors import CorruptImage


def load_png(path, mode: str = "RGBA") -> np.ndarray:
    try:
        with PILImage.open(path) as im:
            return np.asarray(im.convert(mode), dtype=np.uint8)
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise CorruptImage(f"cannot read image {path}: {exc}") from exc


def save_png(path, array: np.ndarray) -> None:
    """Write an image as PNG; path may be a filename or a binary file object."""
    PILImage.fromarray(np.ascontiguousarray(array.astype(np.uint8))).save(
        path, format="PNG")


def encode_png_base64(array: np.ndarray) -> str:
    buf = io.BytesIO()
    PILImage.fromarray(np.ascontiguousarray(array.astype(np.uint8))).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_png_base64(data: str, mode: str = "RGB") -> np.ndarray:
    try:
        buf = io.BytesIO(base64.b64decode(data))
        with PILImage.open(buf) as im:
            return np.asarray(im.convert(mode), dtype=np.uint8)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise CorruptImage(f"cannot decode base64 image: {exc}") from exc


def mask_to_u8(mask: np.ndarray) -> np.ndarray:
    """Bool mask -> 0/255 uint8 image."""
    return (mask.astype(bool) * np.uint8(255))


def u8_to_mask(img: np.ndarray) -> np.ndarray:
    """Any single-channel image -> bool mask (nonzero = set)."""
    if img.ndim == 3:
        img = img[..., 0]
    return img > 0
