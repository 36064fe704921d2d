"""Sub-image and patch tiling of panel rasters."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..errors import InputError
from .config import TilingConfig

__all__ = ["TileIndex", "Rect", "subimage_grid", "tile", "subimage_patches"]


class TileIndex(NamedTuple):
    subimage: int      # row-major index within the panel
    grid_row: int      # sub-image grid coordinates
    grid_col: int
    patch_row: int     # patch coordinates within the sub-image
    patch_col: int
    patch_id: int      # global patch index within the panel


class Rect(NamedTuple):
    top: int
    left: int
    size: int


def subimage_grid(height: int, width: int, cfg: TilingConfig = TilingConfig()) -> tuple:
    """Rows and columns of whole sub-images, anchored top-left."""
    s = cfg.subimage_size
    if height < s or width < s:
        raise InputError(f"image {width}x{height} is smaller than one {s}x{s} sub-image")
    return height // s, width // s


def tile(height: int, width: int, cfg: TilingConfig = TilingConfig()) -> list:
    """Every patch of a panel as ``(TileIndex, Rect)`` in panel coordinates.

    Sub-images are row-major; inside each, patches are row-major too.
    Remainder strips at the right and bottom are dropped.
    """
    rows, cols = subimage_grid(height, width, cfg)
    n = cfg.patches_per_side
    out = []
    pid = 0
    for sr in range(rows):
        for sc in range(cols):
            for pr in range(n):
                for pc in range(n):
                    idx = TileIndex(sr * cols + sc, sr, sc, pr, pc, pid)
                    rect = Rect(sr * cfg.subimage_size + pr * cfg.patch_stride,
                                sc * cfg.subimage_size + pc * cfg.patch_stride, cfg.patch_size)
                    out.append((idx, rect))
                    pid += 1
    return out


def subimage_patches(sub: np.ndarray, cfg: TilingConfig = TilingConfig()) -> np.ndarray:
    """All patches of one ``(S, S, 3)`` sub-image, shape ``(n*n, P, P, 3)`` row-major."""
    p, st = cfg.patch_size, cfg.patch_stride
    win = np.lib.stride_tricks.sliding_window_view(sub, (p, p), axis=(0, 1))[::st, ::st]
    n = win.shape[0]
    return np.ascontiguousarray(np.moveaxis(win, 2, -1)).reshape(n * n, p, p, sub.shape[-1])
