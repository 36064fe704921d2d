"""Dual-tree complex wavelet transform of square image planes.

The forward transform turns a plane of side ``n`` into ``levels`` sets of six
complex oriented subbands. Level ``l`` (1 = finest) holds ``(n / 2**l)**2``
coefficients per subband. Subbands are ordered

    0: +15 deg, 1: +45 deg, 2: +75 deg, 3: -75 deg, 4: -45 deg, 5: -15 deg

and this order is fixed everywhere downstream (feature layout depends on it).
Angles follow image conventions: x to the right, y down the rows; a subband
at angle ``a`` responds to stripes whose crests run along direction ``a`` from
the x axis, measured counter-clockwise as seen on screen.

Every routine accepts arbitrary leading batch axes; the last two axes are the
plane. Column filtering uses symmetric extension with repeated end samples,
which together with the near-symmetric/Q-shift filter pair gives perfect
reconstruction on finite planes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _filters as F
from .errors import ShapeError

__all__ = [
    "ORIENTATIONS",
    "WaveletPyramid",
    "MagnitudePyramid",
    "dtcwt_forward",
    "dtcwt_inverse",
    "fuse_magnitudes",
    "subband_energies",
    "dwt_forward",
]

ORIENTATIONS = (15, 45, 75, -75, -45, -15)

_SQRT_HALF = np.sqrt(0.5)


@dataclass(frozen=True)
class WaveletPyramid:
    """Complex highpass subbands plus the final real lowpass residual.

    ``highpasses[l - 1]`` has shape ``batch + (6, n / 2**l, n / 2**l)``.
    """

    lowpass: np.ndarray
    highpasses: tuple

    @property
    def levels(self) -> int:
        return len(self.highpasses)

    @property
    def batch_shape(self) -> tuple:
        return self.lowpass.shape[:-2]

    def select(self, index) -> "WaveletPyramid":
        """Index the leading batch axes of every array."""
        return WaveletPyramid(self.lowpass[index], tuple(h[index] for h in self.highpasses))


@dataclass(frozen=True)
class MagnitudePyramid:
    """Non-negative subband magnitudes, same layout as :class:`WaveletPyramid`."""

    levels_: tuple

    @property
    def levels(self) -> int:
        return len(self.levels_)

    def __getitem__(self, level: int) -> np.ndarray:
        """Magnitudes of 1-based ``level``, shape ``batch + (6, m, m)``."""
        return self.levels_[level - 1]

    @property
    def batch_shape(self) -> tuple:
        return self.levels_[0].shape[:-3]


def _reflect(idx: np.ndarray, n: int) -> np.ndarray:
    # half-sample symmetric extension: ... x1 x0 | x0 x1 ... x_{n-1} | x_{n-1} ...
    q = np.mod(idx, 2 * n)
    return np.where(q >= n, 2 * n - 1 - q, q)


def _taps(u: np.ndarray, h: np.ndarray, start: int, step: int, dilation: int, count: int) -> np.ndarray:
    """out[s] = sum_k h[k] * u[start + step*s - dilation*k] along axis -2."""
    out = None
    for k, hk in enumerate(h):
        first = start - dilation * k
        rows = u[..., first:first + step * (count - 1) + 1:step, :]
        term = hk * rows
        out = term if out is None else out + term
    return out


def _colfilter(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    # odd-length filter, no decimation; output aligned with input samples
    r = x.shape[-2]
    m = len(h)
    m2 = m // 2
    u = np.take(x, _reflect(np.arange(-m2, r + m2), r), axis=-2)
    return _taps(u, h, m - 1, 1, 1, r)


def _coldfilt(x: np.ndarray, ha: np.ndarray, hb: np.ndarray) -> np.ndarray:
    # two-tree decimation: tree-a samples filtered by ha, tree-b by hb,
    # results interleaved; halves the column count
    r = x.shape[-2]
    if r % 4:
        raise ShapeError("row count must be a multiple of 4 at Q-shift levels")
    m = len(ha)
    u = np.take(x, _reflect(np.arange(-m, r + m), r), axis=-2)
    ya = _taps(u, ha, 2 * m, 4, 2, r // 4)
    yb = _taps(u, hb, 2 * m + 1, 4, 2, r // 4)
    y = np.empty(x.shape[:-2] + (r // 2, x.shape[-1]), dtype=np.result_type(x, ha))
    if np.dot(ha, hb) > 0:
        y[..., 0::2, :], y[..., 1::2, :] = ya, yb
    else:
        y[..., 0::2, :], y[..., 1::2, :] = yb, ya
    return y


def _colifilt(x: np.ndarray, ha: np.ndarray, hb: np.ndarray) -> np.ndarray:
    # two-tree interpolation, inverse companion of _coldfilt; doubles rows
    r = x.shape[-2]
    m = len(ha)
    m2 = m // 2
    if r % 2 or m % 2 or m2 % 2 == 0:
        raise ShapeError("interpolation needs even rows and filters with odd half-length")
    u = np.take(x, _reflect(np.arange(-m2, r + m2), r), axis=-2)
    sa, sb = (m, m - 1) if np.dot(ha, hb) > 0 else (m - 1, m)
    y = np.empty(x.shape[:-2] + (2 * r, x.shape[-1]), dtype=np.result_type(x, ha))
    n = r // 2
    y[..., 0::4, :] = _taps(u, ha[0::2], sb, 2, 2, n)
    y[..., 1::4, :] = _taps(u, hb[0::2], sa, 2, 2, n)
    y[..., 2::4, :] = _taps(u, ha[1::2], sb, 2, 2, n)
    y[..., 3::4, :] = _taps(u, hb[1::2], sa, 2, 2, n)
    return y


def _rows(fn, x, *filters):
    return np.swapaxes(fn(np.swapaxes(x, -1, -2), *filters), -1, -2)


def _q2c(y: np.ndarray):
    # 2x2 quads of the four real trees -> two complex subbands
    p = (y[..., 0::2, 0::2] + 1j * y[..., 0::2, 1::2]) * _SQRT_HALF
    q = (y[..., 1::2, 1::2] - 1j * y[..., 1::2, 0::2]) * _SQRT_HALF
    return p - q, p + q


def _c2q(z1: np.ndarray, z2: np.ndarray) -> np.ndarray:
    p = (z1 + z2) * _SQRT_HALF
    q = (z1 - z2) * _SQRT_HALF
    shape = z1.shape[:-2] + (2 * z1.shape[-2], 2 * z1.shape[-1])
    y = np.empty(shape, dtype=np.float64)
    y[..., 0::2, 0::2] = p.real
    y[..., 0::2, 1::2] = p.imag
    y[..., 1::2, 0::2] = q.imag
    y[..., 1::2, 1::2] = -q.real
    return y


def _pack(horizontal, vertical, diagonal) -> np.ndarray:
    # fixed orientation order, see module docstring
    return np.stack(
        [horizontal[0], diagonal[0], vertical[0], vertical[1], diagonal[1], horizontal[1]],
        axis=-3,
    )


def _check_plane(x: np.ndarray, levels: int) -> None:
    if x.ndim < 2:
        raise ShapeError("expected at least a 2-D plane")
    if levels < 1:
        raise ShapeError("need at least one level")
    r, c = x.shape[-2:]
    if r != c:
        raise ShapeError(f"plane must be square, got {r}x{c}")
    block = 2 ** levels
    if r % block or c % block or r < block or c < block:
        raise ShapeError(f"plane sides {r}x{c} must be divisible by 2**levels = {block}")


def dtcwt_forward(plane: np.ndarray, levels: int = 6) -> WaveletPyramid:
    """Forward dual-tree complex wavelet transform.

    Parameters
    ----------
    plane : array, shape (..., n, n)
        Real plane(s); each side must be divisible by ``2**levels``.
    levels : int
        Number of decomposition levels.

    Returns
    -------
    WaveletPyramid
    """
    x = np.asarray(plane, dtype=np.float64)
    _check_plane(x, levels)

    lo = _colfilter(x, F.H0O)
    hi = _colfilter(x, F.H1O)
    lolo = _rows(_colfilter, lo, F.H0O)
    highs = [_pack(_q2c(_rows(_colfilter, hi, F.H0O)),
                   _q2c(_rows(_colfilter, lo, F.H1O)),
                   _q2c(_rows(_colfilter, hi, F.H1O)))]

    for _ in range(1, levels):
        lo = _coldfilt(lolo, F.H0B, F.H0A)
        hi = _coldfilt(lolo, F.H1B, F.H1A)
        lolo = _rows(_coldfilt, lo, F.H0B, F.H0A)
        highs.append(_pack(_q2c(_rows(_coldfilt, hi, F.H0B, F.H0A)),
                           _q2c(_rows(_coldfilt, lo, F.H1B, F.H1A)),
                           _q2c(_rows(_coldfilt, hi, F.H1B, F.H1A))))

    return WaveletPyramid(lolo, tuple(highs))


def dtcwt_inverse(pyr: WaveletPyramid) -> np.ndarray:
    """Reconstruct the plane(s) from a pyramid made by :func:`dtcwt_forward`."""
    if pyr.levels < 1:
        raise ShapeError("empty pyramid")
    z = np.asarray(pyr.lowpass, dtype=np.float64)
    for level in range(pyr.levels, 0, -1):
        w = pyr.highpasses[level - 1]
        expect = (6, z.shape[-2] // 2, z.shape[-1] // 2)
        if w.shape[-3:] != expect or z.shape[-2] % 2 or z.shape[-1] % 2:
            raise ShapeError(f"level {level} subbands have shape {w.shape[-3:]}, expected {expect}")
        lh = _c2q(w[..., 0, :, :], w[..., 5, :, :])
        hl = _c2q(w[..., 2, :, :], w[..., 3, :, :])
        hh = _c2q(w[..., 1, :, :], w[..., 4, :, :])
        if level > 1:
            y1 = _colifilt(z, F.G0B, F.G0A) + _colifilt(lh, F.G1B, F.G1A)
            y2 = _colifilt(hl, F.G0B, F.G0A) + _colifilt(hh, F.G1B, F.G1A)
            z = _rows(_colifilt, y1, F.G0B, F.G0A) + _rows(_colifilt, y2, F.G1B, F.G1A)
        else:
            y1 = _colfilter(z, F.G0O) + _colfilter(lh, F.G1O)
            y2 = _colfilter(hl, F.G0O) + _colfilter(hh, F.G1O)
            z = _rows(_colfilter, y1, F.G0O) + _rows(_colfilter, y2, F.G1O)
    return z


def fuse_magnitudes(px: WaveletPyramid, py: WaveletPyramid, pz: WaveletPyramid) -> MagnitudePyramid:
    """Elementwise ``sqrt(|wx|^2 + |wy|^2 + |wz|^2)`` over three channel pyramids."""
    if not (px.levels == py.levels == pz.levels):
        raise ShapeError("pyramids have different level counts")
    fused = []
    for hx, hy, hz in zip(px.highpasses, py.highpasses, pz.highpasses):
        if not (hx.shape == hy.shape == hz.shape):
            raise ShapeError("pyramid subband shapes differ")
        power = hx.real ** 2 + hx.imag ** 2
        power += hy.real ** 2 + hy.imag ** 2
        power += hz.real ** 2 + hz.imag ** 2
        fused.append(np.sqrt(power))
    return MagnitudePyramid(tuple(fused))


def subband_energies(pyr: WaveletPyramid) -> np.ndarray:
    """Sum of squared magnitudes per (level, subband): shape ``batch + (levels, 6)``."""
    return np.stack([(np.abs(h) ** 2).sum(axis=(-2, -1)) for h in pyr.highpasses], axis=-2)


def dwt_forward(plane: np.ndarray, levels: int) -> list:
    """Critically sampled separable DWT (Daubechies-8 filters).

    Baseline for shift-sensitivity comparisons only. Borders use the same
    half-sample symmetric extension as :func:`dtcwt_forward` so both
    transforms see identical boundary conditions. Returns one array per
    level (finest first) of shape ``batch + (3, m, m)`` holding the LH, HL
    and HH detail subbands.
    """
    x = np.asarray(plane, dtype=np.float64)
    _check_plane(x, levels)
    h = F.DB4
    g = h[::-1] * (-1.0) ** np.arange(len(h))
    m = len(h)

    def analyze(a, f):
        # filter along axis -2 and keep every second sample
        n = a.shape[-2]
        u = np.take(a, _reflect(np.arange(-m // 2, n + m // 2), n), axis=-2)
        return _taps(u, f, m - 1, 2, 1, n // 2)

    details = []
    a = x
    for _ in range(levels):
        lo = analyze(a, h)
        hi = analyze(a, g)
        details.append(np.stack([_rows(analyze, lo, g), _rows(analyze, hi, h), _rows(analyze, hi, g)], axis=-3))
        a = _rows(analyze, lo, h)
    return details
