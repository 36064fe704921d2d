"""Panel image loading (PNG/TIFF, 8- or 16-bit RGB)."""
from __future__ import annotations

import logging
from pathlib import Path

import cv2
import numpy as np

from ..errors import InputError

log = logging.getLogger(__name__)

__all__ = ["read_panel"]


def read_panel(path: str | Path) -> np.ndarray:
    """Load an RGB raster as ``(H, W, 3)`` uint8 or uint16.

    An alpha channel is dropped with a warning. Greyscale, float and other
    layouts are rejected.
    """
    p = Path(path)
    if not p.is_file():
        raise InputError(f"{p}: no such image file")
    img = cv2.imread(str(p), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise InputError(f"{p}: unreadable or corrupt image")
    if img.dtype not in (np.uint8, np.uint16):
        raise InputError(f"{p}: unsupported sample type {img.dtype} (need 8- or 16-bit)")
    if img.ndim != 3 or img.shape[2] not in (3, 4):
        raise InputError(f"{p}: expected an RGB image, got shape {img.shape}")
    if img.shape[2] == 4:
        log.warning("%s: ignoring alpha channel", p)
        img = img[:, :, :3]
    return np.ascontiguousarray(img[:, :, ::-1])
