"""Synthetic stripe-texture panels with known style ground truth."""
from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np

__all__ = ["stripe_panel", "write_stripe_corpus"]

_DARK = np.array([0.55, 0.35, 0.20])
_LIGHT = np.array([0.92, 0.82, 0.60])


def stripe_panel(height: int, width: int, angle: int = 45, period: float = 8.0, noise: float = 0.05,
                 seed: int = 0) -> np.ndarray:
    """uint8 RGB panel of oriented stripes plus Gaussian noise.

    ``angle`` is +45 or -45: crests run along that direction, measured
    counter-clockwise on screen (rows grow downwards), so +45 stripes rise
    to the right.
    """
    if angle not in (45, -45):
        raise ValueError("angle must be +45 or -45")
    rng = np.random.default_rng(seed)
    rows, cols = np.mgrid[0:height, 0:width].astype(np.float64)
    phase = cols + rows if angle == 45 else cols - rows
    s = 0.5 + 0.5 * np.sin(2 * np.pi * phase / (period * np.sqrt(2)))
    rgb = _DARK + (_LIGHT - _DARK) * s[..., None]
    rgb = rgb + noise * rng.standard_normal(rgb.shape)
    return np.round(np.clip(rgb, 0.0, 1.0) * 255).astype(np.uint8)


def write_stripe_corpus(out_dir, grid: tuple = (4, 4), subimage_size: int = 480,
                        noise: float | tuple = 0.05, seed: int = 0) -> dict:
    """Write panel ``A`` (+45 stripes) and ``B`` (-45 stripes) as PNG files.

    ``noise`` is one level for both panels or an ``(A, B)`` pair.
    Returns ``{panel_id: path}`` ready for the ``images`` config entry.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    h, w = grid[0] * subimage_size, grid[1] * subimage_size
    levels = (noise, noise) if np.isscalar(noise) else tuple(noise)
    paths = {}
    for i, (pid, angle) in enumerate((("A", 45), ("B", -45))):
        img = stripe_panel(h, w, angle, noise=levels[i], seed=seed + i)
        p = out / f"panel_{pid}.png"
        cv2.imwrite(str(p), np.ascontiguousarray(img[:, :, ::-1]))
        paths[pid] = str(p)
    return paths
