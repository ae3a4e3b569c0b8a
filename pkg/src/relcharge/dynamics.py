"""Hamiltonians, Poisson brackets and the evolution law in both forms.

Evolution follows the sign convention that comes with ``p_mu = -dL/dxdot^mu``:

    dQ/dtime = dQ/dtime|explicit - {Q, H}

so ``dq/dtime = -dH/dp`` and ``dp/dtime = +dH/dq``.  Brackets themselves are
the usual ``{X, Y} = dX/dq dY/dp - dX/dp dY/dq`` over canonical pairs.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .core import FRONT, INSTANT, FrontFormState, InstantFormState
from .errors import DomainError
from .fields import FieldSpec, compiled

LIGHT_CONE_EPS = 1e-12


class PhaseFunction:
    """Scalar phase-space function ``Q(time, phase)``.

    ``gradient(time, phase)`` returns ``(dQ/dtime, dQ/dphase)``; when it is
    not supplied, central differences with Richardson refinement are used.
    ``vectorized`` is an optional array version taking ``(time[n], phase[n, k])``.
    """

    def __init__(self, name: str, value: Callable, gradient: Callable | None = None, vectorized=None):
        self.name = name
        self._value = value
        self._gradient = gradient
        self.vectorized = vectorized

    def __call__(self, time, phase) -> float:
        return float(self._value(time, phase))

    @property
    def has_gradient(self) -> bool:
        return self._gradient is not None

    def gradient(self, time, phase):
        if self._gradient is None:
            return fd_gradient(self._value, time, phase)
        dt, dz = self._gradient(time, phase)
        return float(dt), np.asarray(dz, dtype=float)

    def __repr__(self):
        return f"PhaseFunction({self.name!r})"


def _as_phase_function(f) -> PhaseFunction:
    if isinstance(f, PhaseFunction):
        return f
    return PhaseFunction(getattr(f, "__name__", "f"), f)


def _central(f, time, phase, i, h):
    zp = phase.copy()
    zm = phase.copy()
    if i < 0:
        return (f(time + h, phase) - f(time - h, phase)) / (2 * h)
    zp[i] += h
    zm[i] -= h
    return (f(time, zp) - f(time, zm)) / (2 * h)


def fd_gradient(f, time, phase, rel_step=1e-5, richardson=True):
    """Central-difference gradient ``(df/dtime, df/dphase)``.

    Step ``h = rel_step * max(1, |value|)`` per coordinate; with
    ``richardson`` the estimate ``(4 D(h/2) - D(h))/3`` is returned.
    """
    phase = np.asarray(phase, dtype=float)
    out = np.empty(len(phase) + 1)
    coords = [time, *phase]
    for k, c in enumerate(coords):
        h = rel_step * max(1.0, abs(c))
        d1 = _central(f, time, phase, k - 1, h)
        if richardson:
            d2 = _central(f, time, phase, k - 1, h / 2)
            out[k] = (4 * d2 - d1) / 3
        else:
            out[k] = d1
    return float(out[0]), out[1:]


# --- Hamiltonians -------------------------------------------------------------------


def _form_of(state) -> str:
    form = getattr(state, "form", None)
    if form not in (FRONT, INSTANT):
        raise TypeError(f"expected a front- or instant-form state, got {type(state).__name__}")
    return form


def check_domain(spec: FieldSpec, form: str, time: float, phase) -> None:
    spec.check_time(form, time, phase)
    if form == FRONT:
        cf = compiled(spec)
        pi_minus = cf.fn("pi_minus", FRONT)(time, *phase, *cf.params)
        if abs(pi_minus) < LIGHT_CONE_EPS:
            raise DomainError(f"on light cone: p_- - A_- = {pi_minus:.3g}")


def hamiltonian_at(spec: FieldSpec, form: str, time: float, phase) -> float:
    check_domain(spec, form, time, phase)
    cf = compiled(spec)
    return float(cf.fn("H", form)(time, *phase, *cf.params))


def hamiltonian_gradient(spec: FieldSpec, form: str, time: float, phase):
    """``(dH/dtime, dH/dphase)`` from the symbolic Hamiltonian."""
    check_domain(spec, form, time, phase)
    cf = compiled(spec)
    g = cf.fn("grad", form)(time, *phase, *cf.params)
    return float(g[0]), np.array(g[1:], dtype=float)


def hamiltonian(spec: FieldSpec, state) -> float:
    """Front form: ``((p_perp - A_perp)^2 + 1)/(4 (p_- - A_-)) + A_+``;
    instant form: ``sqrt(1 + (p_j - A_j)^2) + A_0``."""
    return hamiltonian_at(spec, _form_of(state), state.time, state.phase)


def hamiltonian_function(spec: FieldSpec, form: str) -> PhaseFunction:
    return PhaseFunction(
        "H",
        lambda t, z: hamiltonian_at(spec, form, t, z),
        lambda t, z: hamiltonian_gradient(spec, form, t, z),
    )


def hamilton_rhs(spec: FieldSpec, state) -> np.ndarray:
    """Phase velocity ``(-dH/dp, +dH/dq)`` with respect to the form's time."""
    form = _form_of(state)
    _, g = hamiltonian_gradient(spec, form, state.time, state.phase)
    return np.concatenate([-g[3:], g[:3]])


def make_rhs(spec: FieldSpec, form: str, vectorized: bool = False):
    """Fast right-hand side ``f(time, phase)`` for the integrator.

    With ``vectorized`` the callable takes ``time[n]``, ``phase[n, 6]`` and
    a parameter array ``params[n, k]`` (or ``None`` for the spec's values).
    """
    cf = compiled(spec)
    if not vectorized:
        grad = cf.fn("grad", form)
        params = cf.params

        def rhs(t, y):
            g = grad(t, *y, *params)
            return np.array((-g[4], -g[5], -g[6], g[1], g[2], g[3]))

        return rhs

    grad = cf.fn("grad", form, "numpy")
    default = np.asarray(cf.params, dtype=float)

    def rhs_batch(t, Y, params=None):
        P = default[None, :] if params is None else params
        g = grad(t, *Y.T, *P.T)
        n = Y.shape[0]
        out = np.empty((n, 6))
        for k, (src, sgn) in enumerate(((4, -1), (5, -1), (6, -1), (1, 1), (2, 1), (3, 1))):
            out[:, k] = sgn * np.broadcast_to(g[src], (n,))
        return out

    return rhs_batch


# --- brackets ------------------------------------------------------------------------


def bracket_from_gradients(df, dg) -> float:
    n = len(df) // 2
    return float(np.dot(df[:n], dg[n:]) - np.dot(df[n:], dg[:n]))


def poisson_bracket(f, g, state) -> float:
    """``{f, g}`` at ``state`` for phase functions ``f(time, phase)``.

    Works for any state exposing ``time`` and ``phase`` (front, instant or
    oscillator).  Analytic gradients are used when available.
    """
    f = _as_phase_function(f)
    g = _as_phase_function(g)
    _, df = f.gradient(state.time, state.phase)
    _, dg = g.gradient(state.time, state.phase)
    return bracket_from_gradients(df, dg)


def conservation_residual(Q, spec: FieldSpec, state):
    """``(dQ/dtime - {Q, H}, scale)`` at ``state``.

    ``scale`` is the sum of magnitudes of the individual terms, so
    ``residual/scale`` measures cancellation relative to the local gradient size.
    """
    Q = _as_phase_function(Q)
    form = _form_of(state)
    dHt, dH = hamiltonian_gradient(spec, form, state.time, state.phase)
    dQt, dQ = Q.gradient(state.time, state.phase)
    n = len(dQ) // 2
    terms = np.concatenate([dQ[:n] * dH[n:], -dQ[n:] * dH[:n]])
    residual = dQt - float(terms.sum())
    scale = abs(dQt) + float(np.abs(terms).sum())
    return residual, scale


def total_time_derivative(Q, spec: FieldSpec, state) -> float:
    """``dQ/dtime = dQ/dtime|explicit - {Q, H}``."""
    return conservation_residual(Q, spec, state)[0]


# --- form conversion -------------------------------------------------------------------


def front_to_instant(spec: FieldSpec, state: FrontFormState) -> InstantFormState:
    """Same physical point and momentum, expressed in the instant form.

    ``p_0 = p_+ + p_-`` and ``p_3 = p_+ - p_-`` with ``p_+ = H_front``.
    Both forms share the Cartesian gauge potential of ``spec``.
    """
    H = hamiltonian(spec, state)
    X = state.point
    return InstantFormState(X.t, X.x, X.y, X.z, state.p1, state.p2, H - state.p_minus)


def instant_to_front(spec: FieldSpec, state: InstantFormState) -> FrontFormState:
    H = hamiltonian(spec, state)
    t, z = state.t, state.z
    return FrontFormState(t + z, t - z, state.x, state.y, 0.5 * (H - state.p3), state.p1, state.p2)
