"""Shared fixtures for transform tests: random textures and a shift metric."""
import numpy as np


def oriented_texture(rng, n=64):
    """Band-pass noise concentrated around a random frequency and orientation."""
    noise = rng.standard_normal((n, n))
    fy = np.fft.fftfreq(n)[:, None]
    fx = np.fft.fftfreq(n)[None, :]
    radius = rng.uniform(0.08, 0.3)
    theta = rng.uniform(0, np.pi)
    cy, cx = radius * np.sin(theta), radius * np.cos(theta)
    width = rng.uniform(0.03, 0.08)
    mask = (np.exp(-((fy - cy) ** 2 + (fx - cx) ** 2) / (2 * width ** 2))
            + np.exp(-((fy + cy) ** 2 + (fx + cx) ** 2) / (2 * width ** 2)))
    return np.real(np.fft.ifft2(np.fft.fft2(noise) * mask))


def relative_energy_change(before, after):
    """Relative L2 change of the per-subband energy vector."""
    before, after = np.ravel(before), np.ravel(after)
    return float(np.linalg.norm(after - before) / np.linalg.norm(before))


def dwt_energies(details):
    return np.array([(d ** 2).sum(axis=(-2, -1)) for d in details])


def stripes(n, angle, period=8.0):
    """Stripes whose crests run along ``angle`` (+45 or -45) on screen."""
    rows, cols = np.mgrid[0:n, 0:n].astype(float)
    phase = cols + rows if angle == 45 else cols - rows
    return np.sin(2 * np.pi * phase / (period * np.sqrt(2)))


def load_dtcwt():
    """Import the reference DTCWT package, patching NumPy names it still uses."""
    import pytest

    shims = {
        "asfarray": lambda a, dtype=np.float64: np.asarray(a, dtype=dtype),
        "issubsctype": lambda a, b: np.issubdtype(np.result_type(a), b),
    }
    for name, fn in shims.items():
        if name not in np.__dict__:
            setattr(np, name, fn)
    return pytest.importorskip("dtcwt")
