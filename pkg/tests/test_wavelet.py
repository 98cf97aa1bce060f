import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tmla.wavelet import (
    FILTER_NAMES,
    FilterSpec,
    combined_detail_magnitude,
    dwt2,
    dwt2_adjoint,
    get_filter,
    idwt2,
    plane_shapes,
)

pywt = pytest.importorskip("pywt")


def test_haar_block_formulas():
    x = np.array([[[1.0, 2.0], [3.0, 4.0]]])
    pyr = dwt2(x, "haar", 1)
    assert pyr.approx[0, 0, 0] == 5.0
    assert pyr.detail(1, "LH")[0, 0, 0] == -1.0
    assert pyr.detail(1, "HL")[0, 0, 0] == -2.0
    assert pyr.detail(1, "HH")[0, 0, 0] == 0.0
    np.testing.assert_array_equal(idwt2(pyr), x)


def test_haar_fast_path_matches_generic_bank(rng):
    # the closed-form Haar branch and the generic filter bank fed the same taps
    generic = FilterSpec.orthonormal("haar-generic", [2**-0.5, 2**-0.5])
    x = rng.random((3, 16, 24))
    a, b = dwt2(x, "haar", 3), dwt2(x, generic, 3)
    for u, v in zip(a.bands(), b.bands()):
        np.testing.assert_allclose(u, v, atol=1e-14)


@pytest.mark.parametrize("name", FILTER_NAMES)
def test_filter_taps_match_pywavelets(name):
    ours = np.asarray(get_filter(name).dec_lo)
    ref = np.asarray(pywt.Wavelet(name).dec_lo)[::-1]  # pywt stores reversed taps
    # pywt's coif2 table carries about 9 digits
    np.testing.assert_allclose(ours, ref, atol=1e-8 if name == "coif2" else 1e-12)


@pytest.mark.parametrize("name", FILTER_NAMES)
def test_filter_orthonormality(name):
    lo = np.asarray(get_filter(name).dec_lo)
    for m in range(len(lo) // 2):
        expected = 1.0 if m == 0 else 0.0
        assert abs(np.dot(lo[: len(lo) - 2 * m], lo[2 * m :]) - expected) < 1e-12
    assert abs(lo.sum() - np.sqrt(2)) < 1e-12


def test_unknown_filter():
    with pytest.raises(ValueError, match="unknown wavelet"):
        get_filter("db7")


@pytest.mark.parametrize("shape", [(1, 9, 7), (3, 5, 12), (1, 33, 2)])
def test_odd_sizes_reconstruct(shape, rng):
    x = rng.random(shape)
    for name in FILTER_NAMES:
        np.testing.assert_allclose(idwt2(dwt2(x, name, 1)), x, atol=1e-12)


def test_plane_shapes_ceil():
    assert plane_shapes(9, 7, 3) == [(5, 4), (3, 2), (2, 1)]
    pyr = dwt2(np.zeros((1, 9, 7)), "haar", 3)
    assert [d.shape[-2:] for d in pyr.details] == plane_shapes(9, 7, 3)


def test_two_dimensional_input_promoted():
    pyr = dwt2(np.ones((8, 8)), "haar", 2)
    assert pyr.approx.shape == (1, 2, 2)
    np.testing.assert_allclose(pyr.approx, 4.0)


def test_too_many_levels():
    with pytest.raises(ValueError, match="too deep"):
        dwt2(np.zeros((1, 4, 4)), "haar", 3)
    with pytest.raises(ValueError):
        dwt2(np.zeros((1, 4, 4)), "haar", 0)


def test_band_order_and_with_bands(rng):
    pyr = dwt2(rng.random((1, 16, 16)), "db2", 2)
    fine = pyr.bands()
    coarse = pyr.bands("coarse_to_fine")
    assert fine[-1] is pyr.approx and coarse[0] is pyr.approx
    assert coarse[1] is pyr.details[1]
    with pytest.raises(ValueError):
        pyr.bands("sideways")
    with pytest.raises(ValueError):
        pyr.with_bands(fine[:-1])
    with pytest.raises(ValueError):
        pyr.with_bands([np.zeros(3)] + fine[1:])


def test_inconsistent_pyramid_rejected(rng):
    pyr = dwt2(rng.random((1, 8, 8)), "haar", 2)
    pyr.details[0] = pyr.details[0][:, :, :2]
    with pytest.raises(ValueError, match="inconsistent"):
        idwt2(pyr)


def test_combined_detail_magnitude(rng):
    pyr = dwt2(rng.random((3, 8, 8)), "haar", 2)
    m = combined_detail_magnitude(pyr, 2)
    np.testing.assert_allclose(m, np.abs(pyr.details[1]).sum(axis=0))
    with pytest.raises(ValueError):
        combined_detail_magnitude(pyr, 3)


def test_adjoint_on_odd_sizes(rng):
    # cropping makes synthesis non-orthogonal on odd sizes; the adjoint still holds
    x = rng.random((1, 11, 13))
    for name in ("haar", "db2"):
        q = dwt2(x, name, 2).map(lambda b: rng.standard_normal(b.shape))
        y = rng.standard_normal(x.shape)
        assert abs(np.vdot(idwt2(q), y) - q.vdot(dwt2_adjoint(y, name, 2))) < 1e-10


images = arrays(
    np.float64,
    st.tuples(st.sampled_from([1, 3]), st.integers(2, 20), st.integers(2, 20)),
    elements=st.floats(0, 1, allow_nan=False),
)


@settings(max_examples=60, deadline=None)
@given(images, st.sampled_from(FILTER_NAMES))
def test_property_perfect_reconstruction(x, name):
    np.testing.assert_allclose(idwt2(dwt2(x, name, 1)), x, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3), st.integers(1, 4), st.integers(1, 4), st.sampled_from(FILTER_NAMES), st.integers(0, 10_000))
def test_property_energy_preserved(levels, bh, bw, name, seed):
    x = np.random.default_rng(seed).standard_normal((1, bh * 2**levels, bw * 2**levels))
    assert dwt2(x, name, levels).energy() == pytest.approx(np.sum(x**2), rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(images)
def test_property_linearity(x):
    y = x[..., ::-1, :].copy()
    a, b, c = dwt2(x, "haar", 1), dwt2(y, "haar", 1), dwt2(2 * x - y, "haar", 1)
    for u, v, w in zip(a.bands(), b.bands(), c.bands()):
        np.testing.assert_allclose(w, 2 * u - v, atol=1e-12)
