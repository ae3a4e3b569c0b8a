import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relcharge.core import FrontFormState, InstantFormState
from relcharge.dynamics import (
    PhaseFunction,
    conservation_residual,
    fd_gradient,
    front_to_instant,
    hamilton_rhs,
    hamiltonian,
    hamiltonian_function,
    instant_to_front,
    poisson_bracket,
    total_time_derivative,
)
from relcharge.errors import DomainError
from relcharge.fields import Free, HelicalBoost, PlaneWave, TmMode, Undulator
from relcharge.invariants import invariant_set
from relcharge.profiles import Profile

from conftest import SYSTEMS


def coord(i):
    return PhaseFunction(f"z{i}", lambda t, z: z[i], lambda t, z: (0.0, np.eye(6)[i]))


# --- Hamiltonians --------------------------------------------------------------------------


def test_free_instant_rest_energy():
    assert hamiltonian(Free(), InstantFormState(0, 0, 0, 0, 0, 0, 0)) == 1.0


def test_free_front_mass_shell():
    s = FrontFormState(0.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0)
    assert hamiltonian(Free(), s) == pytest.approx(0.5)
    # general p_perp: 4 p_+ p_- - p_perp^2 = 1
    s = FrontFormState(0.0, 0.0, 0.0, 0.0, 0.7, 0.3, -0.4)
    H = hamiltonian(Free(), s)
    assert 4 * H * 0.7 - (0.3**2 + 0.4**2) == pytest.approx(1.0)


def test_undulator_zero_kinetic_momentum():
    spec = Undulator(0.5, 1.0)
    assert hamiltonian(spec, InstantFormState(0, 0, 0, 0, spec.b0, 0, 0)) == pytest.approx(1.0)


def test_light_cone_is_a_hard_stop():
    # the TM potential has A_- = -f/2, so p_- = -f/2 puts the state on the light cone
    spec = TmMode(Profile.polynomial([0.4]))
    with pytest.raises(DomainError, match="on light cone"):
        hamiltonian(spec, FrontFormState(1.0, 0.0, 0.0, 0.0, -0.2, 0.0, 0.0))


# --- brackets ------------------------------------------------------------------------------------


def test_canonical_brackets():
    s = FrontFormState(0.3, 0.1, 0.2, -0.4, 0.9, 0.5, -0.2)
    assert poisson_bracket(coord(0), coord(3), s) == 1.0  # {x-, p-}
    assert poisson_bracket(coord(1), coord(5), s) == 0.0  # {x, p2}
    assert poisson_bracket(coord(3), coord(0), s) == -1.0


def test_plane_wave_q4_p1_bracket(rng, cosine_wave):
    Q4 = invariant_set(cosine_wave)["Q4"]
    p1 = coord(4)
    for _ in range(20):
        s = SYSTEMS["plane_wave"][1](rng)
        assert poisson_bracket(Q4, p1, s) == pytest.approx(2 * s.p_minus, abs=1e-13)
        assert poisson_bracket(Q4._value, p1._value, s) == pytest.approx(2 * s.p_minus, abs=1e-8)


def _poly(c):
    """Random polynomial phase function (quadratic plus a cubic term)."""
    c = np.asarray(c)

    def f(t, z):
        z = np.asarray(z)
        return c[0] + c[1:7] @ z + (c[7:13] @ z) ** 2 + c[13] * z[0] * z[3] * z[5]

    return f


coeffs = st.lists(st.floats(-1, 1, allow_nan=False), min_size=14, max_size=14)
phase = st.lists(st.floats(-1, 1, allow_nan=False), min_size=6, max_size=6)


@given(coeffs, coeffs, phase)
@settings(max_examples=40, deadline=None)
def test_bracket_antisymmetry_and_bilinearity(a, b, z):
    s = FrontFormState.from_phase(0.0, z)
    f, g = _poly(a), _poly(b)
    fg = poisson_bracket(f, g, s)
    assert poisson_bracket(g, f, s) == pytest.approx(-fg, abs=1e-8)
    assert poisson_bracket(lambda t, y: 2 * f(t, y) + g(t, y), g, s) == pytest.approx(2 * fg, abs=1e-7)


@given(coeffs, coeffs, coeffs, phase)
@settings(max_examples=30, deadline=None)
def test_leibniz_rule(a, b, c, z):
    s = FrontFormState.from_phase(0.0, z)
    f, g, h = _poly(a), _poly(b), _poly(c)
    t, y = s.time, s.phase
    lhs = poisson_bracket(lambda tt, yy: f(tt, yy) * g(tt, yy), h, s)
    rhs = f(t, y) * poisson_bracket(g, h, s) + g(t, y) * poisson_bracket(f, h, s)
    assert lhs == pytest.approx(rhs, abs=1e-6)


@given(coeffs, coeffs, coeffs, phase)
@settings(max_examples=15, deadline=None)
def test_jacobi_identity(a, b, c, z):
    s = FrontFormState.from_phase(0.0, z)
    f, g, h = _poly(a), _poly(b), _poly(c)

    def br(u, v):
        return lambda t, y: poisson_bracket(u, v, FrontFormState.from_phase(t, y))

    total = (
        poisson_bracket(f, br(g, h), s) + poisson_bracket(g, br(h, f), s) + poisson_bracket(h, br(f, g), s)
    )
    assert abs(total) <= 1e-6


# --- evolution law ----------------------------------------------------------------------------------


def test_free_front_velocity():
    s = FrontFormState(0.0, 0.0, 0.0, 0.0, 0.5, 0.3, -0.2)
    v = hamilton_rhs(Free(), s)
    assert v[0] == pytest.approx((1 + 0.3**2 + 0.2**2) / (4 * 0.5**2))


def test_plane_wave_velocity_and_constant_momenta(rng, cosine_wave):
    for _ in range(10):
        s = SYSTEMS["plane_wave"][1](rng)
        v = hamilton_rhs(cosine_wave, s)
        a1 = np.cos(s.x_plus)
        assert v[0] == pytest.approx((1 + (s.p1 - a1) ** 2 + s.p2**2) / (4 * s.p_minus**2))
        assert v[1] == pytest.approx(-(s.p1 - a1) / (2 * s.p_minus))
        assert np.allclose(v[3:], 0.0)


def test_undulator_velocity_and_force(rng):
    spec = Undulator(0.5, 1.0)
    b0 = spec.b0
    for _ in range(10):
        s = SYSTEMS["undulator"][1](rng)
        H = hamiltonian(spec, s)
        v = hamilton_rhs(spec, s)
        assert v[2] == pytest.approx(-s.p3 / H)
        c, sn = np.cos(s.z), np.sin(s.z)
        assert v[5] == pytest.approx(b0 * (s.p1 * sn - s.p2 * c) / H)


def test_rhs_matches_finite_differences(system, rng):
    name, spec, gen = system
    for _ in range(20):
        s = gen(rng)
        H = hamiltonian_function(spec, s.form)
        _, g = fd_gradient(H._value, s.time, s.phase)
        assert np.allclose(hamilton_rhs(spec, s), np.concatenate([-g[3:], g[:3]]), atol=1e-7)


def test_conserved_and_non_conserved(rng):
    spec = Undulator(0.5, 1.0)
    H = hamiltonian_function(spec, "instant")
    for _ in range(20):
        assert abs(total_time_derivative(H, spec, SYSTEMS["undulator"][1](rng))) < 1e-13
    tm = TmMode(Profile.cosine(0.3, 1.0))
    s = FrontFormState(1.0, 0.0, 0.4, -0.2, 0.5, 0.1, 0.3)
    assert abs(total_time_derivative(coord(4), tm, s)) > 1e-3


def test_plane_wave_q4_time_derivative_vanishes(rng, cosine_wave):
    Q4 = invariant_set(cosine_wave)["Q4"]
    for _ in range(100):
        r, scale = conservation_residual(Q4, cosine_wave, SYSTEMS["plane_wave"][1](rng))
        assert abs(r) <= 1e-12 * max(scale, 1.0)


def test_analytic_gradients_match_finite_differences(system, rng):
    name, spec, gen = system
    invset = invariant_set(spec, x_plus_ref=1.0) if isinstance(spec, TmMode) else invariant_set(spec)
    for _ in range(100 if name != "tm_mode" else 10):
        s = gen(rng)
        if invset.form != s.form:
            continue
        for q in invset.quantities.values():
            if isinstance(spec, HelicalBoost) and s.p_minus <= 0:
                continue
            dt, dz = q.gradient(s.time, s.phase)
            fdt, fdz = fd_gradient(q._value, s.time, s.phase)
            scale = max(1.0, np.max(np.abs(dz)), abs(dt))
            assert np.allclose(dz, fdz, atol=1e-7 * scale)
            assert dt == pytest.approx(fdt, abs=1e-7 * scale)


def test_form_conversion_round_trip(rng, cosine_wave):
    for _ in range(10):
        f = SYSTEMS["plane_wave"][1](rng)
        i = front_to_instant(cosine_wave, f)
        assert i.p3 == pytest.approx(hamiltonian(cosine_wave, f) - f.p_minus)
        back = instant_to_front(cosine_wave, i)
        assert np.allclose(back.phase, f.phase, atol=1e-12)
        assert back.time == pytest.approx(f.time)
        # both forms share the same kinetic energy-momentum
        assert hamiltonian(cosine_wave, i) == pytest.approx(hamiltonian(cosine_wave, f) + f.p_minus)
