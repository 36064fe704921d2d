"""RGB -> HSL -> double-cone XYZ conversion and per-plane normalization.

The double cone places lightness on the axis and encodes hue and saturation as
a point in the transverse plane, with the radius pinched to zero at black and
white::

    X = L
    Y = S cos(2 pi H / 360) min(2L, 2(1 - L))
    Z = S sin(2 pi H / 360) min(2L, 2(1 - L))

All functions accept numpy arrays and broadcast elementwise, so a whole patch
(or a stack of patches) converts in one call.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import InputError

__all__ = [
    "HslPixel",
    "XyzPixel",
    "as_unit_rgb",
    "rgb_to_hsl",
    "hsl_to_xyz",
    "rgb_to_xyz",
    "normalize_plane",
    "patch_to_planes",
]


class HslPixel(NamedTuple):
    """Hue in degrees [0, 360), saturation and lightness in [0, 1]."""

    H: np.ndarray | float
    S: np.ndarray | float
    L: np.ndarray | float


class XyzPixel(NamedTuple):
    X: np.ndarray | float
    Y: np.ndarray | float
    Z: np.ndarray | float


def as_unit_rgb(image: np.ndarray) -> np.ndarray:
    """Scale an integer or float RGB array to floats in [0, 1].

    ``uint8`` is divided by 255 and ``uint16`` by 65535; floating input is
    returned as float64 unchanged.
    """
    image = np.asarray(image)
    if image.dtype == np.uint8:
        return image.astype(np.float64) / 255.0
    if image.dtype == np.uint16:
        return image.astype(np.float64) / 65535.0
    if np.issubdtype(image.dtype, np.floating):
        return image.astype(np.float64, copy=False)
    raise InputError(f"unsupported pixel dtype {image.dtype}")


def rgb_to_hsl(r, g, b) -> HslPixel:
    """Standard hexcone RGB -> HSL.

    Achromatic pixels (r == g == b) get ``S = 0`` and ``H = 0``.

    Raises
    ------
    InputError
        If any channel lies outside [0, 1].
    """
    r, g, b = (np.asarray(c, dtype=np.float64) for c in (r, g, b))
    for c in (r, g, b):
        if np.any(~np.isfinite(c)) or np.any(c < 0.0) or np.any(c > 1.0):
            raise InputError("RGB channels must lie in [0, 1]")
    r, g, b = np.broadcast_arrays(r, g, b)

    cmax = np.maximum(np.maximum(r, g), b)
    cmin = np.minimum(np.minimum(r, g), b)
    delta = cmax - cmin
    L = 0.5 * (cmax + cmin)

    chromatic = delta > 0
    safe = np.where(chromatic, delta, 1.0)
    denom = 1.0 - np.abs(2.0 * L - 1.0)
    S = np.where(chromatic, delta / np.where(denom > 0, denom, 1.0), 0.0)
    S = np.clip(S, 0.0, 1.0)

    # sector formulas; the order of the where() calls resolves ties between
    # equal maxima the same way as the textbook conversion
    h = np.where(cmax == b, 4.0 + (r - g) / safe, 0.0)
    h = np.where(cmax == g, 2.0 + (b - r) / safe, h)
    h = np.where(cmax == r, np.mod((g - b) / safe, 6.0), h)
    H = np.where(chromatic, 60.0 * h, 0.0)
    H = np.where(H >= 360.0, H - 360.0, H)

    if H.ndim == 0:
        return HslPixel(float(H), float(S), float(L))
    return HslPixel(H, S, L)


def hsl_to_xyz(p: HslPixel) -> XyzPixel:
    """Map HSL onto Cartesian double-cone coordinates."""
    H = np.asarray(p.H, dtype=np.float64)
    S = np.asarray(p.S, dtype=np.float64)
    L = np.asarray(p.L, dtype=np.float64)
    radius = S * np.minimum(2.0 * L, 2.0 * (1.0 - L))
    angle = 2.0 * np.pi * np.mod(H, 360.0) / 360.0
    X = L + 0.0 * radius
    Y = radius * np.cos(angle)
    Z = radius * np.sin(angle)
    if X.ndim == 0:
        return XyzPixel(float(X), float(Y), float(Z))
    return XyzPixel(X, Y, Z)


def rgb_to_xyz(rgb: np.ndarray) -> np.ndarray:
    """Convert an ``(..., 3)`` RGB array in [0, 1] to an ``(..., 3)`` XYZ array."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.shape[-1] != 3:
        raise InputError("last axis must hold the three RGB channels")
    xyz = hsl_to_xyz(rgb_to_hsl(rgb[..., 0], rgb[..., 1], rgb[..., 2]))
    return np.stack([np.asarray(c) for c in xyz], axis=-1)


def normalize_plane(plane: np.ndarray, axes=None) -> np.ndarray:
    """Z-score a plane: zero mean, unit (population) standard deviation.

    A constant plane maps to all zeros. ``axes`` selects the axes that make up
    one plane when a stack of planes is passed; by default the whole array is
    treated as a single plane.
    """
    plane = np.asarray(plane, dtype=np.float64)
    if plane.size == 0:
        raise InputError("cannot normalize an empty plane")
    mean = plane.mean(axis=axes, keepdims=True)
    centered = plane - mean
    sd = np.sqrt((centered * centered).mean(axis=axes, keepdims=True))
    # relative threshold: rounding noise on a flat plane is not texture
    scale = np.maximum(np.abs(mean), 1.0)
    flat = sd <= 1e-12 * scale
    return np.where(flat, 0.0, centered / np.where(flat, 1.0, sd))


def patch_to_planes(rgb_patch: np.ndarray) -> np.ndarray:
    """RGB patch(es) ``(..., h, w, 3)`` -> normalized XYZ planes ``(..., 3, h, w)``."""
    xyz = rgb_to_xyz(as_unit_rgb(rgb_patch))
    planes = np.moveaxis(xyz, -1, -3)
    return normalize_plane(planes, axes=(-2, -1))
