"""Closed-form conserved quantities of each background, their identities and brackets.

Quantity names are stable strings used in CSV headers and JSON reports:
``Q1``..``Q5``, ``Q4tilde``, ``Q2tilde``, ``X1``, ``X2``, ``H_E``, ``u``,
``r1``, ``r2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from . import core
from .core import FRONT, INSTANT, OscillatorState
from .dynamics import PhaseFunction, bracket_from_gradients, fd_gradient, make_rhs
from .errors import DomainError
from .fields import (
    FRONT_PHASE,
    FRONT_TIME,
    INSTANT_PHASE,
    INSTANT_TIME,
    FieldSpec,
    Free,
    HelicalBoost,
    PlaneWave,
    TmMode,
    Undulator,
    Vortex,
    _compiled,
    _profile_at,
)
from .quadrature import check_no_pole, integrate

XP, (XM, X, Y, PM, P1, P2) = FRONT_TIME, FRONT_PHASE
T, (_, _, Z, _, _, P3) = INSTANT_TIME, INSTANT_PHASE
ALPHA, BETA, PA, PB, PHI, EPS = sp.symbols("alpha beta p_alpha p_beta phi epsilon", real=True)
OSC_PHASE = (ALPHA, BETA, PA, PB)

QUAD_TOL = 1e-10


@dataclass
class InvariantSet:
    """Named conserved quantities of one system.

    ``identities`` are residuals that vanish identically; ``scales`` (optional,
    per quantity) give the magnitude of the terms that cancel inside a
    quantity and serve as the denominator of its relative drift.
    """

    system: str
    form: str
    quantities: dict[str, PhaseFunction]
    identities: dict[str, PhaseFunction] = field(default_factory=dict)
    scales: dict[str, PhaseFunction] = field(default_factory=dict)

    def __getitem__(self, name) -> PhaseFunction:
        if name in self.quantities:
            return self.quantities[name]
        return self.identities[name]

    @property
    def names(self) -> list[str]:
        return list(self.quantities) + list(self.identities)

    def evaluate(self, state) -> dict[str, float]:
        t, z = state.time, state.phase
        return {name: self[name](t, z) for name in self.names}


# --- symbolic compilation ----------------------------------------------------------


_CACHE: dict = {}


def _symbolic(key, args, nvars, exprs: dict, params, names=None):
    """PhaseFunctions from sympy expressions (value, exact gradient, numpy version)."""
    out = {}
    for name, expr in exprs.items():
        ck = (key, name)
        if ck not in _CACHE:
            grad = [sp.diff(expr, v) for v in args[:nvars]]
            _CACHE[ck] = (
                sp.lambdify(args, expr, modules="math", cse=True),
                sp.lambdify(args, grad, modules="math", cse=True),
                sp.lambdify(args, expr, modules="numpy", cse=True),
            )
        fv, fg, fn = _CACHE[ck]
        out[name] = _bind(name, fv, fg, fn, tuple(params))
    return out


def _bind(name, fv, fg, fn, params):
    def value(t, z):
        return fv(t, *z, *params)

    def gradient(t, z):
        g = fg(t, *z, *params)
        return g[0], np.array(g[1:], dtype=float)

    def vectorized(t, Z, P=None):
        P = np.asarray(params, dtype=float)[None, :] if P is None else P
        v = fn(t, *np.asarray(Z).T, *np.asarray(P).T)
        return np.broadcast_to(np.asarray(v, dtype=float), (np.shape(Z)[0],)).copy()

    return PhaseFunction(name, value, gradient, vectorized)


def _front_args(spec):
    P = spec.param_symbols()
    return (XP, *FRONT_PHASE, *P), P


def _instant_args(spec):
    P = spec.param_symbols()
    return (T, *INSTANT_PHASE, *P), P


# --- per-system sets -----------------------------------------------------------------


def _plane_wave_set(spec: PlaneWave) -> InvariantSet:
    args, P = _front_args(spec)
    n1 = len(spec.f1.params)
    f1 = _profile_at(spec.f1, XP, P[:n1])
    f2 = _profile_at(spec.f2, XP, P[n1:])
    exprs = {
        "Q1": P1,
        "Q2": P2,
        "Q3": PM,
        "Q4": 2 * X * PM + XP * P1 - f1,
        "Q5": 2 * Y * PM + XP * P2 - f2,
    }
    q = _symbolic(spec.structure_key(), args, 7, exprs, spec.param_values())
    return InvariantSet("plane_wave", FRONT, q)


def _tm_integral_parts(spec: TmMode, x_plus, p_minus, x_plus_ref, derivative=True):
    """``I = int_ref^x+ ds/(s^2 (2p_- + f))`` and, if requested, ``dI/dp_-``."""
    if x_plus == 0.0 or x_plus_ref == 0.0 or (x_plus > 0) != (x_plus_ref > 0):
        raise DomainError("TM integral crosses the singular surface x+ = 0")
    f = spec.f

    def denom(s):
        return 2 * p_minus + f.value(s)

    if x_plus != x_plus_ref:
        check_no_pole(denom, x_plus_ref, x_plus)
    I = integrate(lambda s: 1.0 / (s**2 * denom(s)), x_plus_ref, x_plus, QUAD_TOL)
    if not derivative:
        return I, None
    dI = integrate(lambda s: -2.0 / (s**2 * denom(s) ** 2), x_plus_ref, x_plus, QUAD_TOL)
    return I, dI


def _tm_nonpolynomial(spec: TmMode, name: str, x_plus_ref):
    """``Q5`` (``coord = x``) or ``Q4tilde`` (``coord = y``)."""
    ci, pi = (1, 4) if name == "Q5" else (2, 5)

    def ref(t):
        return t if x_plus_ref is None else x_plus_ref

    def value(t, z):
        I, _ = _tm_integral_parts(spec, t, z[3], ref(t), derivative=False)
        Qc = 2 * z[ci] * z[3] + t * z[pi]
        return z[ci] / t + Qc * I

    def gradient(t, z):
        if x_plus_ref is None:
            raise ValueError("gradient needs a fixed anchor x_plus_ref")
        pm = z[3]
        I, dI = _tm_integral_parts(spec, t, pm, x_plus_ref)
        Qc = 2 * z[ci] * pm + t * z[pi]
        d = np.zeros(6)
        d[ci] = 1.0 / t + 2 * pm * I
        d[3] = 2 * z[ci] * I + Qc * dI
        d[pi] = t * I
        dt = -z[ci] / t**2 + z[pi] * I + Qc / (t**2 * (2 * pm + spec.f.value(t)))
        return dt, d

    return PhaseFunction(name, value, gradient if x_plus_ref is not None else None)


def _tm_set(spec: TmMode, x_plus_ref) -> InvariantSet:
    args, P = _front_args(spec)
    exprs = {
        "Q1": 2 * X * PM + XP * P1,
        "Q2": 2 * Y * PM + XP * P2,
        "Q3": PM,
        "Q4": X * P2 - Y * P1,
    }
    q = _symbolic(spec.structure_key(), args, 7, exprs, spec.param_values())
    q["Q5"] = _tm_nonpolynomial(spec, "Q5", x_plus_ref)
    q["Q4tilde"] = _tm_nonpolynomial(spec, "Q4tilde", x_plus_ref)
    Q1, Q2, Q4, Q5, Q4t = q["Q1"], q["Q2"], q["Q4"], q["Q5"], q["Q4tilde"]

    def identity(t, z):
        return Q2(t, z) * Q5(t, z) - Q1(t, z) * Q4t(t, z) - Q4(t, z)

    return InvariantSet("tm_mode", FRONT, q, {"Q4_identity": PhaseFunction("Q4_identity", identity)})


def _undulator_set(spec: Undulator) -> InvariantSet:
    args, P = _instant_args(spec)
    B0, w = P
    b0 = B0 / w
    H = _compiled(spec).H_instant_expr
    exprs = {
        "Q1": P1,
        "Q2": P2,
        "Q3": H,
        "Q4": P3 + w * (X * P2 - Y * P1),
    }
    u = H**2 - P1**2 - P2**2 - 1 - b0**2
    extra = {
        "u": u,
        "r1": P3**2 - 2 * b0 * (P1 * sp.cos(w * Z) + P2 * sp.sin(w * Z)) - u,
    }
    q = _symbolic(spec.structure_key(), args, 7, {**exprs, **extra}, spec.param_values())
    quantities = {k: q[k] for k in ("Q1", "Q2", "Q3", "Q4", "u")}
    rhs = make_rhs(spec, INSTANT)
    b0v = spec.b0
    wv = spec.omega

    def r2(t, z):
        v = rhs(t, z)
        return v[1] * z[5] - v[2] * (z[4] - b0v * math.sin(wv * z[2]))

    identities = {"r1": q["r1"], "r2": PhaseFunction("r2", r2)}
    return InvariantSet("undulator", INSTANT, quantities, identities)


def helical_quintet_expressions(P):
    """Sympy expressions of the five linear integrals and their cancellation scales."""
    F0, w = P
    Om = sp.sqrt(F0 / (2 * PM))
    Dx, Sx = X - Y, X + Y
    Dp, Sp = (P1 - P2) / (2 * PM), (P1 + P2) / (2 * PM)
    a_s = Om * (Sx - w * XP**2 - 2 * w / Om**2)
    b_s = Sp + XP * (Om**2 * (w / 3 * XP**2 - Sx) + 2 * w)
    a_d = Om * (Dx - w * XP**2 + 2 * w / Om**2)
    b_d = Dp - XP * (Om**2 * (w / 3 * XP**2 - Dx) - 2 * w)
    ch, sh = sp.cosh(Om * XP), sp.sinh(Om * XP)
    c, s = sp.cos(Om * XP), sp.sin(Om * XP)
    quintet = {
        "Q1": PM,
        "Q2": a_s * sh + b_s * ch,
        "Q3": a_s * ch + b_s * sh,
        "Q4": a_d * c + b_d * s,
        "Q5": a_d * s - b_d * c,
    }
    hyper_scale = (sp.Abs(a_s) + sp.Abs(b_s)) * ch
    trig_scale = sp.Abs(a_d) + sp.Abs(b_d)
    scales = {"Q2": hyper_scale, "Q3": hyper_scale, "Q4": trig_scale, "Q5": trig_scale}
    return quintet, scales


def _helical_set(spec: HelicalBoost) -> InvariantSet:
    args, P = _front_args(spec)
    F0, w = P
    H = _compiled(spec).H_front_expr
    quintet, scales = helical_quintet_expressions(P)
    Q2t = H + 2 * w * (2 * PM * X + XP * P1) - F0 * Y * (X + w * XP**2)
    combo = Q2t - (
        quintet["Q1"] / 2 * (quintet["Q2"] ** 2 - quintet["Q3"] ** 2 + quintet["Q4"] ** 2 + quintet["Q5"] ** 2)
        + 1 / (4 * quintet["Q1"])
    )
    exprs = {**quintet, "Q2tilde": Q2t, "combo_residual": combo}
    q = _symbolic(spec.structure_key(), args, 7, exprs, spec.param_values())
    sc = _symbolic(spec.structure_key() + ("scale",), args, 7, scales, spec.param_values())
    F0v = spec.F0

    def guarded(pf):
        def value(t, z):
            _check_helical(F0v, z[3])
            return pf._value(t, z)

        def gradient(t, z):
            _check_helical(F0v, z[3])
            return pf.gradient(t, z)

        return PhaseFunction(pf.name, value, gradient, pf.vectorized)

    quantities = {k: guarded(q[k]) for k in ("Q1", "Q2", "Q3", "Q4", "Q5", "Q2tilde")}
    return InvariantSet(
        "helical_boost",
        FRONT,
        quantities,
        {"combo_residual": guarded(q["combo_residual"])},
        {k: guarded(v) for k, v in sc.items()},
    )


def _check_helical(F0, p_minus):
    if p_minus == 0.0:
        raise DomainError("helical integrals need p_- != 0")
    if not F0 / (2 * p_minus) > 0:
        raise DomainError(f"omega imaginary: F0/(2 p_-) = {F0 / (2 * p_minus):.3g} <= 0")


def _vortex_set(spec: Vortex) -> InvariantSet:
    args, P = _front_args(spec)
    B0, w = P
    H = _compiled(spec).H_front_expr
    exprs = {"Q1": PM, "Q2": H + w / 2 * (X * P2 - Y * P1)}
    q = _symbolic(spec.structure_key(), args, 7, exprs, spec.param_values())
    return InvariantSet("vortex", FRONT, q)


def _free_set(spec: Free) -> InvariantSet:
    args, P = _front_args(spec)
    exprs = {"Q1": P1, "Q2": P2, "Q3": PM}
    return InvariantSet("free", FRONT, _symbolic(spec.structure_key(), args, 7, exprs, ()))


def invariant_set(spec: FieldSpec, x_plus_ref: float | None = None) -> InvariantSet:
    """Built-in conserved quantities of ``spec``.

    ``x_plus_ref`` anchors the lower limit of the TM-mode quadrature (use the
    launch time); when omitted, each evaluation anchors at the state's own
    ``x+`` and analytic gradients are unavailable.
    """
    if isinstance(spec, PlaneWave):
        return _plane_wave_set(spec)
    if isinstance(spec, TmMode):
        return _tm_set(spec, x_plus_ref)
    if isinstance(spec, Undulator):
        return _undulator_set(spec)
    if isinstance(spec, HelicalBoost):
        return _helical_set(spec)
    if isinstance(spec, Vortex):
        return _vortex_set(spec)
    if isinstance(spec, Free):
        return _free_set(spec)
    raise TypeError(f"no invariants for {type(spec).__name__}")


def plane_wave_invariants(spec: PlaneWave, state) -> dict[str, float]:
    return invariant_set(spec).evaluate(state)


def tm_invariants(spec: TmMode, state, x_plus_ref: float | None = None) -> dict[str, float]:
    return invariant_set(spec, x_plus_ref).evaluate(state)


def undulator_invariants(spec: Undulator, state) -> dict[str, float]:
    return invariant_set(spec).evaluate(state)


def helical_invariants(spec: HelicalBoost, state) -> dict[str, float]:
    return invariant_set(spec).evaluate(state)


def vortex_invariants(spec: Vortex, state) -> dict[str, float]:
    return invariant_set(spec).evaluate(state)


# --- vortex transverse oscillator -------------------------------------------------------


def oscillator_set(eps: float) -> InvariantSet:
    """``X1``, ``X2`` and ``H_E`` of the reduced oscillator with coupling ``eps``."""
    if eps == 0.0:
        raise DomainError("epsilon zero: X1, X2 are singular at eps = 0")
    ep, em = sp.Rational(1, 4) + EPS, sp.Rational(1, 4) - EPS
    HE = ((PA + BETA / 2) ** 2 + (PB - ALPHA / 2) ** 2 - ep * ALPHA**2 - em * BETA**2) / 2
    X1 = (PA + BETA / 2) ** 2 - ep * ALPHA**2 - ep / EPS * ALPHA * PB + em / EPS * BETA * PA
    X2 = (PB - ALPHA / 2) ** 2 - em * BETA**2 + ep / EPS * ALPHA * PB - em / EPS * BETA * PA
    args = (PHI, *OSC_PHASE, EPS)
    q = _symbolic(("oscillator",), args, 5, {"X1": X1, "X2": X2, "H_E": HE, "sum_identity": X1 + X2 - 2 * HE}, (eps,))
    ident = q.pop("sum_identity")
    return InvariantSet("vortex_oscillator", "oscillator", q, {"sum_identity": ident})


def vortex_transverse_invariants(eps: float, state: OscillatorState) -> dict[str, float]:
    s = oscillator_set(eps)
    return {k: s[k](state.time, state.phase) for k in ("X1", "X2", "H_E")}


def oscillator_rhs(eps: float):
    """``(alpha, beta, p_alpha, p_beta)' `` under ``H_E`` (standard Hamilton signs)."""
    ep, em = 0.25 + eps, 0.25 - eps

    def rhs(phi, y):
        a, b, pa, pb = y[..., 0], y[..., 1], y[..., 2], y[..., 3]
        u = pa + b / 2
        v = pb - a / 2
        return np.stack([u, v, v / 2 + ep * a, -u / 2 + em * b], axis=-1)

    return rhs


# --- Poincare origin of the quantities -------------------------------------------------


def poincare_generators(spec: FieldSpec) -> dict[str, core.PoincareGenerator]:
    """Generators whose Noether charges give the Poincare-derived quantities."""
    if isinstance(spec, PlaneWave):
        return {"Q1": core.P_transverse(1), "Q2": core.P_transverse(2), "Q3": core.P_minus(),
                "Q4": core.T(1), "Q5": core.T(2)}
    if isinstance(spec, TmMode):
        return {"Q1": core.T(1), "Q2": core.T(2), "Q3": core.P_minus(), "Q4": core.L_z()}
    if isinstance(spec, Undulator):
        return {"Q1": core.P_transverse(1), "Q2": core.P_transverse(2), "Q3": core.P0(),
                "Q4": core.P3() + spec.omega * core.L_z()}
    if isinstance(spec, HelicalBoost):
        return {"Q1": core.P_minus(), "Q2tilde": core.P_plus() + 2 * spec.omega * core.T(1)}
    if isinstance(spec, Vortex):
        return {"Q1": core.P_minus(), "Q2": core.P_plus() + spec.omega / 2 * core.L_z()}
    if isinstance(spec, Free):
        return {"Q1": core.P_transverse(1), "Q2": core.P_transverse(2), "Q3": core.P_minus()}
    raise TypeError(type(spec).__name__)


# --- bracket tables ---------------------------------------------------------------------


def bracket_table(invset: InvariantSet, states, numeric: bool = False) -> dict:
    """Pairwise ``{Q_i, Q_j}`` over ``states``.

    Returns the names, the matrix of ``max |{Q_i, Q_j}|`` and, for nonzero
    entries of front-form sets, a fit ``{Q_i, Q_j} = c * p_-`` when it holds
    to 1e-8.  ``numeric`` forces finite-difference gradients.
    """
    names = list(invset.quantities)
    n = len(names)
    values = np.zeros((len(states), n, n))
    for k, st in enumerate(states):
        grads = []
        for name in names:
            q = invset.quantities[name]
            if numeric:
                grads.append(fd_gradient(q, st.time, st.phase)[1])
            else:
                grads.append(q.gradient(st.time, st.phase)[1])
        for i in range(n):
            for j in range(n):
                values[k, i, j] = bracket_from_gradients(grads[i], grads[j])
    max_abs = np.max(np.abs(values), axis=0)
    fits = {}
    if invset.form == FRONT:
        pm = np.array([st.p_minus for st in states])
        for i in range(n):
            for j in range(n):
                col = values[:, i, j]
                if max_abs[i, j] <= 1e-8:
                    continue
                c = float(np.dot(col, pm) / np.dot(pm, pm))
                if np.max(np.abs(col - c * pm)) <= 1e-8 * max(1.0, np.max(np.abs(col))):
                    fits[f"{{{names[i]},{names[j]}}}"] = f"{c:.6g}*p_minus"
    return {"names": names, "max_abs": max_abs, "values": values, "fits": fits}


# --- drift along trajectories ----------------------------------------------------------------


def relative_drift(invset: InvariantSet, trajectory, name: str) -> float:
    """``max |Q(t) - Q(t0)|`` relative to ``max(1, |Q(t0)|)``.

    Quantities with a cancellation scale (the helical quintet) are measured
    against the largest scale seen along the trajectory instead.
    """
    if name in invset.scales:
        sc = invset.scales[name]
        big = max(sc(t, y) for t, y in zip(trajectory.times, trajectory.phases))
        return trajectory.drift(name, max(1.0, big))
    return trajectory.drift(name)


def drift_report(invset: InvariantSet, trajectory, names) -> dict:
    """Relative drift of tracked quantities and max ``|residual|`` of tracked identities."""
    drift, ident = {}, {}
    for name in names:
        if name in invset.identities:
            ident[name] = float(np.max(np.abs(trajectory.invariants[name])))
        else:
            drift[name] = relative_drift(invset, trajectory, name)
    return {"drift": drift, "identity_max_abs": ident}
