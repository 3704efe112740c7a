import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from qugeo.errors import ConfigurationError
from qugeo.metrics import gaussian_window, mse, report, ssim, ssim_batch

from . import oracles

maps8 = arrays(np.float64, (8, 8), elements=st.floats(0, 1))


def test_mse_trivial_cases():
    a = np.random.default_rng(0).uniform(size=(8, 8))
    assert mse(a, a) == 0
    assert mse(np.ones((8, 8)), np.zeros((8, 8))) == 1


def test_mse_vs_direct_summation():
    rng = np.random.default_rng(1)
    a, b = rng.uniform(size=(2, 8, 8))
    total = 0.0
    for i in range(8):
        for j in range(8):
            total += (a[i, j] - b[i, j]) ** 2
    assert abs(mse(a, b) - total / 64) < 1e-14


def test_gaussian_window_matches_oracle():
    np.testing.assert_allclose(gaussian_window(), oracles.gaussian_kernel(), atol=1e-16)


@pytest.mark.parametrize("n", [7, 8, 12])
def test_ssim_vs_window_oracle(n):
    rng = np.random.default_rng(n)
    for _ in range(5):
        a, b = rng.uniform(size=(2, n, n))
        assert abs(ssim(a, b) - oracles.ssim_loop(a, b)) < 1e-10


def test_ssim_identity_and_inverted_contrast():
    rng = np.random.default_rng(2)
    a = rng.uniform(size=(8, 8))
    assert ssim(a, a) == pytest.approx(1.0, abs=1e-12)
    assert ssim(a, 1 - a) < 0.5
    layered = np.repeat(np.linspace(0, 1, 8)[:, None], 8, axis=1)
    assert ssim(layered, 1 - layered) < 0.5


@settings(max_examples=50, deadline=None)
@given(a=maps8, b=maps8)
def test_symmetry(a, b):
    assert ssim(a, b) == ssim(b, a)
    assert mse(a, b) == mse(b, a)


@settings(max_examples=50, deadline=None)
@given(a=maps8)
def test_self_similarity_is_one(a):
    assert ssim(a, a) == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(a=maps8, b=maps8)
def test_ranges(a, b):
    assert -1 - 1e-12 <= ssim(a, b) <= 1 + 1e-12
    assert mse(a, b) >= 0


def test_errors():
    with pytest.raises(ConfigurationError):
        ssim(np.zeros((6, 6)), np.zeros((6, 6)))
    with pytest.raises(ConfigurationError):
        ssim(np.zeros((8, 8)), np.zeros((8, 7)))
    with pytest.raises(ConfigurationError):
        mse(np.zeros((8, 8)), np.zeros((7, 8)))


def test_report_is_mean_of_single_calls():
    rng = np.random.default_rng(3)
    p, t = rng.uniform(size=(2, 6, 8, 8))
    r = report(p, t)
    assert r.mse == pytest.approx(np.mean([mse(a, b) for a, b in zip(p, t)]), abs=1e-15)
    assert r.ssim == pytest.approx(np.mean([ssim(a, b) for a, b in zip(p, t)]), abs=1e-14)
    np.testing.assert_allclose(ssim_batch(p, t), [ssim(a, b) for a, b in zip(p, t)], atol=1e-14)
