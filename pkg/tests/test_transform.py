import numpy as np
import pytest

from paintstyle.errors import ShapeError
from paintstyle.transform import (ORIENTATIONS, MagnitudePyramid, WaveletPyramid, dtcwt_forward,
                                  dtcwt_inverse, dwt_forward, fuse_magnitudes, subband_energies)
from support import dwt_energies, load_dtcwt, oriented_texture, relative_energy_change, stripes


def test_pyramid_shapes():
    pyr = dtcwt_forward(np.zeros((64, 64)))
    assert pyr.levels == 6
    for lvl, h in enumerate(pyr.highpasses, start=1):
        assert h.shape == (6, 64 // 2 ** lvl, 64 // 2 ** lvl)
        assert np.iscomplexobj(h)
    assert ORIENTATIONS == (15, 45, 75, -75, -45, -15)


@pytest.mark.parametrize("shape, levels", [((64, 48), 3), ((60, 60), 3), ((64, 64), 7), ((8,), 1)])
def test_bad_shapes_rejected(shape, levels):
    with pytest.raises(ShapeError):
        dtcwt_forward(np.zeros(shape), levels)


def test_constant_plane_detail_is_only_filter_dc_leakage():
    # near_sym_b annihilates constants exactly; the published 14-tap Q-shift
    # highpass has a DC response of about 9.3e-7, so deeper levels leak a
    # proportionally tiny amount
    c = 3.7
    pyr = dtcwt_forward(np.full((64, 64), c))
    assert np.abs(pyr.highpasses[0]).max() < 1e-10
    assert max(np.abs(h).max() for h in pyr.highpasses) < 1e-4 * c
    detail = sum((np.abs(h) ** 2).sum() for h in pyr.highpasses)
    assert detail < 1e-9 * (pyr.lowpass ** 2).sum()
    assert np.abs(dtcwt_inverse(pyr) - c).max() < 1e-10


def test_perfect_reconstruction_noise_and_stripes():
    rng = np.random.default_rng(0)
    for x in (rng.standard_normal((64, 64)), stripes(64, 45), stripes(64, -45, 5.0)):
        assert np.abs(dtcwt_inverse(dtcwt_forward(x)) - x).max() < 1e-8


def test_batched_matches_single():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((2, 3, 32, 32))
    batched = dtcwt_forward(x, 5)
    single = dtcwt_forward(x[1, 2], 5)
    for hb, hs in zip(batched.highpasses, single.highpasses):
        assert np.array_equal(hb[1, 2], hs)
    assert np.abs(dtcwt_inverse(batched) - x).max() < 1e-8


def test_linearity():
    rng = np.random.default_rng(2)
    x, y = rng.standard_normal((2, 64, 64))
    a, b = 1.7, -0.3
    lhs = dtcwt_forward(a * x + b * y)
    px, py = dtcwt_forward(x), dtcwt_forward(y)
    for h, hx, hy in zip(lhs.highpasses, px.highpasses, py.highpasses):
        assert np.abs(h - (a * hx + b * hy)).max() < 1e-10


def test_energy_bookkeeping_within_one_percent():
    rng = np.random.default_rng(3)
    ratios = []
    for _ in range(20):
        x = rng.standard_normal((64, 64))
        pyr = dtcwt_forward(x)
        e = sum((np.abs(h) ** 2).sum() for h in pyr.highpasses) + (pyr.lowpass ** 2).sum()
        ratios.append(e / (x ** 2).sum())
    assert abs(np.mean(ratios) - 1.0) < 0.01


def test_agrees_with_reference_implementation():
    dtcwt = load_dtcwt()
    rng = np.random.default_rng(4)
    x = rng.standard_normal((64, 64))
    ref = dtcwt.Transform2d(biort="near_sym_b", qshift="qshift_b").forward(x, nlevels=6)
    ours = dtcwt_forward(x)
    for h, r in zip(ours.highpasses, ref.highpasses):
        assert np.abs(h - np.moveaxis(r, -1, 0)).max() < 1e-10
    assert np.abs(ours.lowpass - ref.lowpass).max() < 1e-10


@pytest.mark.parametrize("angle, index", [(45, 1), (-45, 4)])
def test_stripe_orientation_selects_subband(angle, index):
    e = subband_energies(dtcwt_forward(stripes(64, angle)))
    level = int(np.argmax(e.sum(axis=1)))
    assert ORIENTATIONS[int(np.argmax(e[level]))] == angle
    assert int(np.argmax(e[level])) == index


def test_impulse_shift_dtcwt_below_five_percent_dwt_above():
    x = np.zeros((64, 64))
    y = np.zeros((64, 64))
    x[32, 32] = y[33, 32] = 1.0
    d = relative_energy_change(subband_energies(dtcwt_forward(x)), subband_energies(dtcwt_forward(y)))
    w = relative_energy_change(dwt_energies(dwt_forward(x, 6)), dwt_energies(dwt_forward(y, 6)))
    assert d < 0.05 < w


def test_textures_more_shift_invariant_than_dwt():
    rng = np.random.default_rng(5)
    wins = 0
    for _ in range(30):
        t = oriented_texture(rng)
        s = np.roll(t, 1, axis=1)
        d = relative_energy_change(subband_energies(dtcwt_forward(t)), subband_energies(dtcwt_forward(s)))
        w = relative_energy_change(dwt_energies(dwt_forward(t, 6)), dwt_energies(dwt_forward(s, 6)))
        wins += d < w
    assert wins >= 28


def test_fuse_magnitudes_examples():
    zero = dtcwt_forward(np.zeros((16, 16)), 2)
    assert all(np.all(m == 0) for m in fuse_magnitudes(zero, zero, zero).levels_)

    h = np.zeros((6, 8, 8), complex)
    h[2, 3, 4] = 3 + 4j
    px = WaveletPyramid(np.zeros((8, 8)), (h,))
    pz = WaveletPyramid(np.zeros((8, 8)), (np.zeros_like(h),))
    fused = fuse_magnitudes(px, pz, pz)
    assert isinstance(fused, MagnitudePyramid)
    assert fused[1][2, 3, 4] == 5.0


def test_fuse_dominates_each_channel():
    rng = np.random.default_rng(6)
    pyrs = [dtcwt_forward(rng.standard_normal((32, 32)), 5) for _ in range(3)]
    fused = fuse_magnitudes(*pyrs)
    for lvl in range(1, 6):
        m = fused[lvl]
        assert np.all(m >= 0)
        for p in pyrs:
            assert np.all(m >= np.abs(p.highpasses[lvl - 1]) - 1e-15)


def test_fuse_shape_mismatch():
    a = dtcwt_forward(np.zeros((32, 32)), 3)
    b = dtcwt_forward(np.zeros((32, 32)), 2)
    with pytest.raises(ShapeError):
        fuse_magnitudes(a, a, b)


def test_inverse_rejects_malformed_pyramid():
    pyr = dtcwt_forward(np.zeros((32, 32)), 3)
    broken = WaveletPyramid(pyr.lowpass, (pyr.highpasses[0][:, :4], *pyr.highpasses[1:]))
    with pytest.raises(ShapeError):
        dtcwt_inverse(broken)
