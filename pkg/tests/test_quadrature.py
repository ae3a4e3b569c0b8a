import numpy as np
import pytest
from scipy.integrate import quad

from relcharge.errors import QuadraturePoleError
from relcharge.quadrature import CumulativeQuadrature, check_no_pole, integrate


def g(s):
    return 1.0 / (s**2 * (1.0 + 0.3 * np.sin(s)))


def test_matches_scipy_quad():
    ref, _ = quad(g, 1.0, 10.0, epsabs=1e-13, epsrel=1e-13)
    assert integrate(g, 1.0, 10.0) == pytest.approx(ref, abs=1e-10)


def test_cumulative_values_and_anchor():
    cq = CumulativeQuadrature(g, 1.0, 10.0)
    for s in (1.0, 2.5, 7.3, 10.0):
        ref, _ = quad(g, 1.0, s, epsabs=1e-13, epsrel=1e-13)
        assert cq(s) == pytest.approx(ref, abs=1e-10)
    assert cq(1.0) == 0.0
    assert np.allclose(cq(np.array([2.0, 3.0])), [cq(2.0), cq(3.0)])


def test_reversed_interval_is_signed():
    assert integrate(np.cos, 2.0, 0.0) == pytest.approx(-np.sin(2.0), abs=1e-12)
    cq = CumulativeQuadrature(np.cos, 2.0, 0.0)
    assert cq(1.0) == pytest.approx(np.sin(1.0) - np.sin(2.0), abs=1e-12)


def test_out_of_range_rejected():
    cq = CumulativeQuadrature(np.cos, 0.0, 1.0)
    with pytest.raises(ValueError, match="outside"):
        cq(1.5)


def test_oscillatory_integrand():
    f = lambda s: np.sin(40 * s) * np.exp(-s)  # noqa: E731
    ref, _ = quad(f, 0.0, 5.0, limit=400, epsabs=1e-13)
    assert integrate(f, 0.0, 5.0) == pytest.approx(ref, abs=1e-10)


def test_pole_detection():
    with pytest.raises(QuadraturePoleError, match="quadrature pole"):
        check_no_pole(lambda s: 1.0 + 2.0 * np.sin(s), 0.0, 6.0)
    with pytest.raises(QuadraturePoleError):
        check_no_pole(lambda s: s - 0.5, 0.0, 1.0)
    check_no_pole(lambda s: 2.0 + np.sin(s), 0.0, 10.0)
