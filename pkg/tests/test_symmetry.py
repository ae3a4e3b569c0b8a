import numpy as np
import pytest
from scipy.linalg import expm

from relcharge import core
from relcharge.core import (
    FrontFormState,
    LightFrontPoint,
    PoincareGenerator,
    SpacetimePoint,
    lower_to_light_front,
    to_spacetime,
)
from relcharge.errors import InsufficientSamplesError, NotASymmetryError
from relcharge.fields import Free, HelicalBoost, PlaneWave, TmMode, Vortex, potential
from relcharge.integrator import integrate
from relcharge.invariants import invariant_set
from relcharge.profiles import Profile
from relcharge.symmetry import (
    charge_rate,
    gauge_term,
    lie_derivative_field_strength,
    lie_derivative_potential,
    noether_balance,
    noether_charge,
    sample_points,
    symmetry_scan,
)

from conftest import SYSTEMS

TWO_PROFILE_WAVE = PlaneWave(Profile.cosine(1.0, 1.0), Profile.sinusoid(0.5, 2.0))


def _lf(xp, xm, x, y):
    return to_spacetime(LightFrontPoint(xp, xm, x, y))


def _random_generator(rng):
    return PoincareGenerator.from_coefficients(rng.uniform(-1, 1, 10))


def _pullback(spec, g, X, s):
    """``(Phi_s^* A)(X)`` for the affine flow of ``g`` built from an augmented exponential."""
    a = g.xi_upper(np.zeros(4))
    D = g.d_xi_upper()
    M = np.zeros((5, 5))
    M[:4, :4] = D
    M[:4, 4] = a
    E = expm(s * M)
    Y = E[:4, :4] @ X + E[:4, 4]
    return potential(spec, Y) @ E[:4, :4]


def _in_domain_point(spec, rng):
    X = rng.uniform(-1, 1, 4)
    if isinstance(spec, TmMode):
        X[0] = 1.0 + abs(X[0])
    return X


# --- Lie derivatives -------------------------------------------------------------------


def test_free_lie_derivative_vanishes(rng):
    g = _random_generator(rng)
    assert not np.any(lie_derivative_potential(Free(), g, SpacetimePoint(0.1, 0.2, 0.3, 0.4)))


def test_plane_wave_null_rotation_potential_derivative():
    for xp in (-0.7, 0.2, 1.3):
        L = lie_derivative_potential(TWO_PROFILE_WAVE, core.T(1), _lf(xp, 0.4, -0.3, 0.8))
        plus, minus, l1, l2 = lower_to_light_front(L)
        assert plus == pytest.approx(np.cos(xp), abs=1e-14)
        assert np.allclose([minus, l1, l2], 0.0, atol=1e-15)


def test_lie_derivative_matches_flow_pullback(system, rng):
    _, spec, _ = system
    h = 1e-4
    for _ in range(5):
        g = _random_generator(rng)
        X = _in_domain_point(spec, rng)
        fd = (_pullback(spec, g, X, h) - _pullback(spec, g, X, -h)) / (2 * h)
        assert np.allclose(lie_derivative_potential(spec, g, X), fd, atol=1e-6)


def test_exterior_derivative_identity(system, rng):
    _, spec, _ = system
    h = 1e-5
    for _ in range(5):
        g = _random_generator(rng)
        X = _in_domain_point(spec, rng)
        dL = np.empty((4, 4))  # dL[m, n] = d_m (L A)_n
        for m in range(4):
            e = np.zeros(4)
            e[m] = h
            dL[m] = (lie_derivative_potential(spec, g, X + e) - lie_derivative_potential(spec, g, X - e)) / (2 * h)
        assert np.allclose(lie_derivative_field_strength(spec, g, X), dL - dL.T, atol=1e-5)


def test_plane_wave_field_strength_derivatives():
    p = _lf(0.3, -0.5, 0.7, 0.2)
    assert not np.any(np.abs(lie_derivative_field_strength(TWO_PROFILE_WAVE, core.P_minus(), p)) > 1e-14)
    assert np.max(np.abs(lie_derivative_field_strength(TWO_PROFILE_WAVE, core.T(2), p))) <= 1e-14
    Lz = lie_derivative_field_strength(TWO_PROFILE_WAVE, core.L_z(), p)
    assert np.max(np.abs(Lz)) > 1e-2
    assert np.array_equal(Lz, -Lz.T)


# --- scans ----------------------------------------------------------------------------------------


EXPECTED_DIMENSION = {"free": 10, "plane_wave": 5, "tm_mode": 4, "undulator": 4, "helical_boost": 2, "vortex": 2}


def test_scan_dimensions_and_gap(system):
    name, spec, _ = system
    res = symmetry_scan(spec, sample_points(spec, 64, seed=3))
    assert res.dimension == EXPECTED_DIMENSION[name]
    assert np.allclose(res.coefficients @ res.coefficients.T, np.eye(res.dimension), atol=1e-12)
    assert np.all(res.residual <= res.tol * max(res.singular_values[0], 1.0))
    if name != "free":
        assert res.gap > 1e-3


def _in_span(res, g):
    c = g.coefficients()
    proj = res.coefficients.T @ (res.coefficients @ c)
    return np.allclose(proj, c, atol=1e-8)


def test_scan_spans_expected_generators():
    pw = symmetry_scan(TWO_PROFILE_WAVE, sample_points(TWO_PROFILE_WAVE, 40))
    for g in (core.P_minus(), core.P_transverse(1), core.P_transverse(2), core.T(1), core.T(2)):
        assert _in_span(pw, g)
    assert not _in_span(pw, core.L_z())
    vortex = Vortex(0.5, 1.2)
    vr = symmetry_scan(vortex, sample_points(vortex, 40))
    assert _in_span(vr, core.P_minus()) and _in_span(vr, core.P_plus() + 0.6 * core.L_z())


def test_scan_needs_enough_samples():
    spec = SYSTEMS["plane_wave"][0]
    with pytest.raises(InsufficientSamplesError, match="insufficient samples"):
        symmetry_scan(spec, sample_points(spec, 19))


def test_sample_points_are_seeded_and_avoid_tm_surface():
    spec = SYSTEMS["tm_mode"][0]
    a, b = sample_points(spec, 30, seed=4), sample_points(spec, 30, seed=4)
    assert a == b
    assert all(abs(p.t + p.z) > 0.1 for p in a)


# --- gauge terms and charges -----------------------------------------------------------------------


def test_free_gauge_term_is_zero(rng):
    g = _random_generator(rng)
    assert gauge_term(Free(), g, _lf(1, 2, 3, 4), _lf(0, 0, 0, 0)) == 0.0


def test_plane_wave_gauge_term_is_profile():
    s0 = 0.2
    for xp in (-1.0, 0.9, 2.5):
        lam = gauge_term(TWO_PROFILE_WAVE, core.T(1), _lf(xp, 0.3, 0.4, -0.6), _lf(s0, -0.2, 0.1, 0.5))
        assert lam == pytest.approx(np.sin(xp) - np.sin(s0), abs=1e-10)


def test_helical_gauge_term():
    spec = HelicalBoost(0.8, 0.3)
    g = core.P_plus() + 2 * spec.omega * core.T(1)

    def expected(xp, x, y):
        return spec.F0 * y * (x + spec.omega * xp**2)

    base = (0.1, 0.0, 0.2, -0.3)
    for pt in [(0.5, 0.3, -0.4, 0.7), (-0.8, 1.0, 0.6, 0.2)]:
        lam = gauge_term(spec, g, _lf(*pt), _lf(*base))
        assert lam == pytest.approx(expected(pt[0], pt[2], pt[3]) - expected(base[0], base[2], base[3]), abs=1e-9)


def test_tm_symmetries_have_no_gauge_term():
    spec = SYSTEMS["tm_mode"][0]
    for g in (core.L_z(), core.T(1), core.T(2)):
        assert gauge_term(spec, g, _lf(1.7, 0.3, 0.4, -0.6), _lf(0.8, -0.2, 0.1, 0.5)) == pytest.approx(0.0, abs=1e-12)


def test_broken_symmetry_is_rejected():
    with pytest.raises(NotASymmetryError, match="not a symmetry"):
        gauge_term(TWO_PROFILE_WAVE, core.L_z(), _lf(1.0, 0.0, 0.5, 0.5), _lf(0.0, 0.0, 0.0, 0.0))


def test_noether_charge_examples(cosine_wave):
    s = FrontFormState(0.6, 0.1, 0.4, -0.2, 0.7, 0.3, 0.1)
    assert noether_charge(core.P_minus(), 0.0, s, cosine_wave) == pytest.approx(s.p_minus)
    lam = np.sin(s.x_plus)
    q4 = invariant_set(cosine_wave)["Q4"](s.time, s.phase)
    assert noether_charge(core.T(1), lam, s, cosine_wave) == pytest.approx(q4, abs=1e-14)


# --- Noether balance -------------------------------------------------------------------------------


def test_charge_rate_vanishes_for_gauge_free_symmetry(rng):
    spec, gen = SYSTEMS["vortex"]
    g = core.P_plus() + spec.omega / 2 * core.L_z()
    for _ in range(10):
        assert abs(charge_rate(spec, g, gen(rng))) <= 1e-13


@pytest.mark.parametrize("name", ["plane_wave", "undulator", "vortex"])
def test_noether_balance_along_trajectory(name, rng):
    spec, gen = SYSTEMS[name]
    s0 = gen(rng)
    t0 = s0.time
    traj = integrate(spec, s0, (t0, t0 + 3.0), 1e-10, 1e-10)
    for _ in range(2):
        discrete, predicted = noether_balance(spec, _random_generator(rng), traj)
        assert np.max(np.abs(discrete - predicted)) <= 1e-9
