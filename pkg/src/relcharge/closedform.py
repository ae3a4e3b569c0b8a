"""Analytic orbits used as oracles for the numerical integrator.

* plane wave: transverse orbit algebraic in the conserved quantities, ``x-``
  by one quadrature;
* TM mode: transverse orbit from one cached quadrature, ``x-`` by a second;
* vortex: the transverse motion reduces to a constant-coefficient linear
  system in ``phi = w x+``, solved by the matrix exponential.

Every quadrature is anchored at the launch time, so evaluating an orbit at
launch returns the initial state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import expm

from .core import FRONT, FrontFormState, LightFrontPoint, OscillatorState, lower_to_light_front, to_spacetime
from .errors import DomainError
from .fields import PlaneWave, TmMode, Vortex, compiled
from .invariants import invariant_set
from .quadrature import CumulativeQuadrature, check_no_pole

QUAD_TOL = 1e-10


class AnchoredIntegral:
    """``G(t) = integral_{t0}^t g(s) ds`` with panels cached and grown on demand.

    ``guard(lo, hi)`` is called before the cache is (re)built on ``[lo, hi]``
    and may raise for singular intervals.
    """

    def __init__(self, g: Callable, t0: float, guard: Callable | None = None, abs_tol: float = QUAD_TOL):
        self.g = g
        self.t0 = float(t0)
        self.guard = guard
        self.abs_tol = abs_tol
        self._quad = None
        self._lo = self._hi = self.t0

    def extend(self, lo: float, hi: float) -> None:
        lo, hi = min(lo, self.t0, self._lo), max(hi, self.t0, self._hi)
        if self._quad is not None and lo >= self._lo and hi <= self._hi:
            return
        if self.guard is not None:
            self.guard(lo, hi)
        self._quad = CumulativeQuadrature(self.g, lo, hi, self.abs_tol)
        self._lo, self._hi = lo, hi
        self._offset = self._quad(self.t0)

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        if t_arr.size == 0:
            return np.zeros(t_arr.shape)
        self.extend(float(t_arr.min()), float(t_arr.max()))
        if self._hi == self._lo:
            return np.zeros(t_arr.shape) if t_arr.ndim else 0.0
        return self._quad(t) - self._offset


@dataclass
class ClosedFormOrbit:
    """Orbit ``time -> phase`` of one system, with the launch-time invariants."""

    system: str
    form: str
    t0: float
    invariants: dict[str, float]
    phase_fn: Callable
    quadratures: dict[str, AnchoredIntegral] = field(default_factory=dict)

    def prepare(self, t_start: float, t_end: float) -> "ClosedFormOrbit":
        """Build the quadrature caches over a span in one pass."""
        for q in self.quadratures.values():
            q.extend(min(t_start, t_end), max(t_start, t_end))
        return self

    def phase_at(self, t) -> np.ndarray:
        """Phase vector at scalar ``t``, or an ``(n, d)`` array for array ``t``."""
        if np.ndim(t):
            t_arr = np.asarray(t, dtype=float)
            self.prepare(float(t_arr.min()), float(t_arr.max()))
            return np.array([self.phase_fn(float(v)) for v in t_arr])
        return np.asarray(self.phase_fn(float(t)), dtype=float)

    def state(self, t: float):
        if self.form == FRONT:
            return FrontFormState.from_phase(t, self.phase_at(t))
        return OscillatorState.from_phase(t, self.phase_at(t))


def _require_p_minus(p_minus: float):
    if p_minus == 0.0:
        raise DomainError("zero longitudinal momentum: p_- = 0")


# --- plane wave ------------------------------------------------------------------------


def plane_wave_orbit(spec: PlaneWave, initial: FrontFormState) -> ClosedFormOrbit:
    """``x(x+) = (Q4 + f1(x+) - Q1 x+)/(2 Q3)`` (``y`` likewise), momenta constant.

    ``dx-/dx+ = (1 + (Q1 - f1')^2 + (Q2 - f2')^2)/(4 Q3^2)`` is integrated from launch.
    """
    _require_p_minus(initial.p_minus)
    Q = invariant_set(spec).evaluate(initial)
    Q1, Q2, Q3, Q4, Q5 = (Q[k] for k in ("Q1", "Q2", "Q3", "Q4", "Q5"))
    f1, f2 = spec.f1, spec.f2

    def rate(s):
        r = (1 + (Q1 - f1.derivative(s)) ** 2 + (Q2 - f2.derivative(s)) ** 2) / (4 * Q3**2)
        return np.broadcast_to(r, np.shape(s))

    xm = AnchoredIntegral(rate, initial.x_plus)
    xm0 = initial.x_minus

    def phase(t):
        x = (Q4 + f1.value(t) - Q1 * t) / (2 * Q3)
        y = (Q5 + f2.value(t) - Q2 * t) / (2 * Q3)
        return np.array([xm0 + float(xm(t)), x, y, Q3, Q1, Q2])

    return ClosedFormOrbit("plane_wave", FRONT, initial.x_plus, Q, phase, {"x_minus": xm})


# --- TM mode ---------------------------------------------------------------------------------


def _tm_guard(spec: TmMode, p_minus: float):
    def guard(lo, hi):
        if lo <= 0.0 <= hi:
            raise DomainError("singular launch time: the span reaches x+ = 0")
        check_no_pole(lambda s: 2 * p_minus + spec.f.value(s), lo, hi)

    return guard


def tm_orbit(spec: TmMode, initial: FrontFormState) -> ClosedFormOrbit:
    """``x = x+ (Q5 - Q1 I)``, ``p1 = (Q1 - 2 x p_-)/x+`` with ``I = int ds/(s^2 (2p_- + f))``.

    ``dx-/dx+ = (1 + pi_perp^2)/(2p_- + f)^2`` gives the last coordinate.
    """
    t0 = initial.x_plus
    if t0 == 0.0:
        raise DomainError("singular launch time: x+ = 0")
    pm = initial.p_minus
    _require_p_minus(pm)
    Q = invariant_set(spec, x_plus_ref=t0).evaluate(initial)
    Q1, Q2, Q5, Q4t = Q["Q1"], Q["Q2"], Q["Q5"], Q["Q4tilde"]
    f = spec.f
    guard = _tm_guard(spec, pm)
    guard(t0, t0)
    I = AnchoredIntegral(lambda s: 1.0 / (s**2 * (2 * pm + f.value(s))), t0, guard)

    def transverse(t):
        It = float(I(t))
        x = t * (Q5 - Q1 * It)
        y = t * (Q4t - Q2 * It)
        return x, y, (Q1 - 2 * x * pm) / t, (Q2 - 2 * y * pm) / t

    def rate(s):
        s = np.atleast_1d(s)
        out = np.empty(len(s))
        for k, v in enumerate(s):
            x, y, p1, p2 = transverse(float(v))
            fv = f.value(v)
            pi1, pi2 = p1 - x * fv / v, p2 - y * fv / v
            out[k] = (1 + pi1**2 + pi2**2) / (2 * pm + fv) ** 2
        return out

    xm = AnchoredIntegral(rate, t0, guard)
    xm0 = initial.x_minus

    def phase(t):
        x, y, p1, p2 = transverse(t)
        return np.array([xm0 + float(xm(t)), x, y, pm, p1, p2])

    orbit = ClosedFormOrbit("tm_mode", FRONT, t0, Q, phase, {"I": I, "x_minus": xm})
    return orbit


# --- vortex ----------------------------------------------------------------------------------


def oscillator_matrix(eps: float) -> np.ndarray:
    """``Y' = M Y`` for ``Y = (alpha, beta, alpha', beta')``."""
    return np.array(
        [
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [0.25 + eps, 0.0, 0.0, 1.0],
            [0.0, 0.25 - eps, -1.0, 0.0],
        ]
    )


def _osc_to_velocity_form(y):
    a, b, pa, pb = y
    return np.array([a, b, pa + b / 2, pb - a / 2])


def _velocity_to_osc(Y):
    a, b, da, db = Y
    return np.array([a, b, da - b / 2, db + a / 2])


@dataclass
class OscillatorOrbit:
    """Closed-form solution of the reduced vortex oscillator."""

    eps: float
    phi0: float
    initial: np.ndarray  # (alpha, beta, p_alpha, p_beta) at phi0

    def __post_init__(self):
        self.M = oscillator_matrix(self.eps)
        self._Y0 = _osc_to_velocity_form(np.asarray(self.initial, dtype=float))

    def phase_at(self, phi) -> np.ndarray:
        if np.ndim(phi):
            return np.array([self.phase_at(float(p)) for p in np.asarray(phi)])
        return _velocity_to_osc(expm(self.M * (phi - self.phi0)) @ self._Y0)

    def state(self, phi: float) -> OscillatorState:
        return OscillatorState.from_phase(phi, self.phase_at(phi))


def vortex_transverse_orbit(eps: float, initial: OscillatorState, phi_span=None):
    """Oscillator orbit from ``initial``; with ``phi_span = (phi0, phi1, n)``
    the states at ``n`` equally spaced phases are returned as an array instead."""
    orbit = OscillatorOrbit(float(eps), initial.phi, initial.phase)
    if phi_span is None:
        return orbit
    phi0, phi1, n = phi_span
    phis = np.linspace(phi0, phi1, int(n))
    return phis, orbit.phase_at(phis)


def front_to_oscillator(spec: Vortex, state: FrontFormState) -> OscillatorState:
    """``chi = e^{-i phi/2} z`` with ``z = x + i y``, ``phi = w x+``.

    Transverse velocities come from the front-form Hamilton equations,
    ``dx/dx+ = -(p1 - A1)/(2 p_-)``; then ``chi' = e^{-i phi/2}(z' - i z/2)``
    with ``z' = dz/dphi``.
    """
    _require_p_minus(state.p_minus)
    w = spec.omega
    phi = w * state.x_plus
    _, _, A1, A2 = _front_transverse_potential(spec, state.x_plus, state.x, state.y)
    vx = -(state.p1 - A1) / (2 * state.p_minus)
    vy = -(state.p2 - A2) / (2 * state.p_minus)
    z = complex(state.x, state.y)
    dz = complex(vx, vy) / w
    rot = np.exp(-0.5j * phi)
    chi = rot * z
    dchi = rot * (dz - 0.5j * z)
    return OscillatorState(phi, chi.real, chi.imag, dchi.real - chi.imag / 2, dchi.imag + chi.real / 2)


def oscillator_to_front_transverse(spec: Vortex, p_minus: float, osc: OscillatorState):
    """``(x, y, p1, p2)`` at ``x+ = phi/w`` for an oscillator state (inverse of the above)."""
    w = spec.omega
    a, b, da, db = _osc_to_velocity_form(osc.phase)
    phi = osc.phi
    rot = np.exp(0.5j * phi)
    chi, dchi = complex(a, b), complex(da, db)
    z = rot * chi
    dz = rot * dchi + 0.5j * z
    vx, vy = (w * dz).real, (w * dz).imag
    xp = phi / w
    _, _, A1, A2 = _front_transverse_potential(spec, xp, z.real, z.imag)
    return z.real, z.imag, A1 - 2 * p_minus * vx, A2 - 2 * p_minus * vy


def _front_transverse_potential(spec: Vortex, xp, x, y):
    X = to_spacetime(LightFrontPoint(xp, 0.0, x, y)).as_array()
    return lower_to_light_front(compiled(spec).potential(X))


def vortex_xminus(spec: Vortex, transverse: Callable, p_minus: float, x_plus0: float, x_minus0: float):
    """``x-(x+) = x-_0 + integral_{x+_0}^{x+} H/p_- ds`` along a known transverse orbit.

    ``transverse(x+)`` returns ``(x, y, p1, p2)``.
    """
    _require_p_minus(p_minus)
    H = compiled(spec).fn("H", FRONT)
    params = compiled(spec).params

    def rate(s):
        s = np.atleast_1d(s)
        out = np.empty(len(s))
        for k, v in enumerate(s):
            x, y, p1, p2 = transverse(float(v))
            out[k] = H(float(v), 0.0, x, y, p_minus, p1, p2, *params) / p_minus
        return out

    q = AnchoredIntegral(rate, x_plus0)
    return lambda t: x_minus0 + q(t), q


def vortex_orbit(spec: Vortex, initial: FrontFormState) -> ClosedFormOrbit:
    """Front-form vortex orbit assembled from the oscillator solution and ``vortex_xminus``."""
    pm = initial.p_minus
    _require_p_minus(pm)
    w = spec.omega
    eps = spec.epsilon(pm)
    osc0 = front_to_oscillator(spec, initial)
    osc = OscillatorOrbit(eps, osc0.phi, osc0.phase)

    def transverse(t):
        return oscillator_to_front_transverse(spec, pm, osc.state(w * t))

    xm, q = vortex_xminus(spec, transverse, pm, initial.x_plus, initial.x_minus)

    def phase(t):
        x, y, p1, p2 = transverse(t)
        return np.array([float(xm(t)), x, y, pm, p1, p2])

    Q = invariant_set(spec).evaluate(initial)
    Q["epsilon"] = eps
    return ClosedFormOrbit("vortex", FRONT, initial.x_plus, Q, phase, {"x_minus": q})


CLOSED_FORMS = {"plane_wave": plane_wave_orbit, "tm_mode": tm_orbit, "vortex": vortex_orbit}
