"""Background electromagnetic fields.

Every field is defined once, symbolically, by its gauge potential; the field
strength, its derivatives and both Hamiltonians are derived from that single
expression with sympy and compiled to plain Python/numpy callables.  Compiled
code is cached per *structure* (field type plus profile kinds), with the
numerical parameters passed as trailing arguments.

E/B convention: ``E_i = F_{0i}`` and ``B_i = -(1/2) eps_ijk F_jk`` with
Cartesian lower indices.  With this single choice the TM-mode, helical-boost
and undulator fields come out exactly as
``E = f'(x+)/x+ (x, y, x+)``, ``B = f'(x+)/x+ (y, -x, 0)``;
``E = F0 (y, x - w x+^2, 0)``, ``B = F0 (x - w x+^2, -y, 0)``;
``B = B0 (cos wz, sin wz, 0)`` (global sign +1).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import ClassVar

import numpy as np
import sympy as sp

from .core import FRONT, INSTANT, LightFrontPoint, SpacetimePoint, to_spacetime
from .errors import DomainError
from .profiles import S, Profile

T_, X_, Y_, Z_ = sp.symbols("t x y z", real=True)
XP, XM = sp.symbols("x_plus x_minus", real=True)
PM, P1, P2, P3 = sp.symbols("p_minus p1 p2 p3", real=True)

CARTESIAN = (T_, X_, Y_, Z_)
FRONT_TIME, FRONT_PHASE = XP, (XM, X_, Y_, PM, P1, P2)
INSTANT_TIME, INSTANT_PHASE = T_, (X_, Y_, Z_, P1, P2, P3)

FIELD_NAMES = ("free", "plane_wave", "tm_mode", "undulator", "helical_boost", "vortex")


def _profile_at(profile: Profile, arg, syms, order=0):
    expr = profile.symbolic(S, syms)
    if order:
        expr = sp.diff(expr, S, order)
    return expr.subs(S, arg)


class FieldSpec:
    """Base class of the six background fields.

    Subclasses define the potential either in light-front components
    (``lf_potential``) or in Cartesian components (``cartesian_potential``).
    """

    name: ClassVar[str]
    natural_form: ClassVar[str] = FRONT

    # -- structure & parameters -------------------------------------------------
    def structure_key(self) -> tuple:
        return (self.name,)

    def param_values(self) -> tuple[float, ...]:
        return ()

    def param_symbols(self) -> tuple:
        n = len(self.param_values())
        return sp.symbols(f"k0:{n}", real=True) if n else ()

    # -- symbolic potential -----------------------------------------------------
    def lf_potential(self, xp, x, y, P):
        """``(A_+, A_-, A_1, A_2)`` as functions of light-front time ``xp``."""
        return None

    def cartesian_potential(self, t, x, y, z, P):
        Ap, Am, A1, A2 = self.lf_potential(t + z, x, y, P)
        return [Ap + Am, A1, A2, Ap - Am]

    def front_potential(self, P):
        lf = self.lf_potential(XP, X_, Y_, P)
        if lf is not None:
            return list(lf)
        At, Ax, Ay, Az = self.cartesian_potential(
            (XP + XM) / 2, X_, Y_, (XP - XM) / 2, P
        )
        return [(At + Az) / 2, (At - Az) / 2, Ax, Ay]

    # -- domain ----------------------------------------------------------------
    def check_point(self, X) -> None:
        """Raise ``DomainError`` if the Cartesian point ``X`` is singular."""

    def check_time(self, form: str, time: float, phase) -> None:
        """Raise ``DomainError`` if a phase point is singular for this field."""

    def compiled(self) -> "CompiledField":
        return CompiledField(self)

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Free(FieldSpec):
    name: ClassVar[str] = "free"

    def lf_potential(self, xp, x, y, P):
        return (sp.Integer(0),) * 4

    def to_dict(self):
        return {"name": self.name}


@dataclass(frozen=True)
class PlaneWave(FieldSpec):
    """``A_j = f_j'(x+)`` for ``j = 1, 2``; all other components vanish."""

    f1: Profile = Profile()
    f2: Profile = Profile()
    name: ClassVar[str] = "plane_wave"

    def structure_key(self):
        return (self.name, self.f1.structure_key(), self.f2.structure_key())

    def param_values(self):
        return self.f1.params + self.f2.params

    def lf_potential(self, xp, x, y, P):
        n1 = len(self.f1.params)
        return (
            sp.Integer(0),
            sp.Integer(0),
            _profile_at(self.f1, xp, P[:n1], 1),
            _profile_at(self.f2, xp, P[n1:], 1),
        )

    def to_dict(self):
        return {"name": self.name, "f1": profile_to_dict(self.f1), "f2": profile_to_dict(self.f2)}


@dataclass(frozen=True)
class TmMode(FieldSpec):
    """Toy TM beam: ``A_+ = -r^2 f/(2 x+^2)``, ``A_- = -f/2``, ``A_perp = x_perp f/x+``."""

    f: Profile = Profile()
    name: ClassVar[str] = "tm_mode"

    def structure_key(self):
        return (self.name, self.f.structure_key())

    def param_values(self):
        return self.f.params

    def lf_potential(self, xp, x, y, P):
        f = _profile_at(self.f, xp, P)
        return (-(x**2 + y**2) * f / (2 * xp**2), -f / 2, x * f / xp, y * f / xp)

    def check_point(self, X):
        if X[0] + X[3] == 0.0:
            raise DomainError("TM potential singular at x+ = 0")

    def check_time(self, form, time, phase):
        xp = time if form == FRONT else time + phase[2]
        if xp == 0.0:
            raise DomainError("TM potential singular at x+ = 0")

    def to_dict(self):
        return {"name": self.name, "f": profile_to_dict(self.f)}


def _positive_omega(omega):
    if not omega > 0:
        raise ValueError("omega must be positive")


@dataclass(frozen=True)
class Undulator(FieldSpec):
    """Static helical undulator, Weyl gauge: ``A_1 = b0 cos wz``, ``A_2 = b0 sin wz``."""

    B0: float = 1.0
    omega: float = 1.0
    name: ClassVar[str] = "undulator"
    natural_form: ClassVar[str] = INSTANT

    def __post_init__(self):
        _positive_omega(self.omega)

    @property
    def b0(self) -> float:
        return self.B0 / self.omega

    def param_values(self):
        return (float(self.B0), float(self.omega))

    def cartesian_potential(self, t, x, y, z, P):
        B0, w = P
        b0 = B0 / w
        return [sp.Integer(0), b0 * sp.cos(w * z), b0 * sp.sin(w * z), sp.Integer(0)]

    def to_dict(self):
        return {"name": self.name, "B0": self.B0, "omega": self.omega}


@dataclass(frozen=True)
class HelicalBoost(FieldSpec):
    """``A_1 = F0 x+ y``, ``A_2 = F0 x+ (x - w x+^2/3)``."""

    F0: float = 1.0
    omega: float = 1.0
    name: ClassVar[str] = "helical_boost"

    def __post_init__(self):
        _positive_omega(self.omega)

    def param_values(self):
        return (float(self.F0), float(self.omega))

    def lf_potential(self, xp, x, y, P):
        F0, w = P
        return (sp.Integer(0), sp.Integer(0), F0 * xp * y, F0 * xp * (x - w * xp**2 / 3))

    def to_dict(self):
        return {"name": self.name, "F0": self.F0, "omega": self.omega}


@dataclass(frozen=True)
class Vortex(FieldSpec):
    """Rotating vortex: ``A_1 = B0 (x sin phi - y cos phi)``, ``A_2 = -B0 (x cos phi + y sin phi)``, ``phi = w x+``."""

    B0: float = 1.0
    omega: float = 1.0
    name: ClassVar[str] = "vortex"

    def __post_init__(self):
        _positive_omega(self.omega)

    def param_values(self):
        return (float(self.B0), float(self.omega))

    def lf_potential(self, xp, x, y, P):
        B0, w = P
        phi = w * xp
        return (
            sp.Integer(0),
            sp.Integer(0),
            B0 * (x * sp.sin(phi) - y * sp.cos(phi)),
            B0 * (-x * sp.cos(phi) - y * sp.sin(phi)),
        )

    def epsilon(self, p_minus: float) -> float:
        """Effective oscillator coupling ``B0/(2 w p_-)``."""
        return self.B0 / (2.0 * self.omega * p_minus)

    def to_dict(self):
        return {"name": self.name, "B0": self.B0, "omega": self.omega}


FIELD_TYPES = {
    cls.name: cls for cls in (Free, PlaneWave, TmMode, Undulator, HelicalBoost, Vortex)
}


def profile_to_dict(p: Profile) -> dict:
    if p.kind == "expr":
        return {"kind": "expr", "expression": p.expression}
    if p.kind == "polynomial":
        return {"kind": "polynomial", "coefficients": list(p.params)}
    return {"kind": p.kind, **dict(zip(p.param_names, p.params))}


# --- compilation ------------------------------------------------------------------


def _lambdify(args, exprs, modules):
    return sp.lambdify(args, exprs, modules=modules, cse=True)


class _Compiled:
    """Symbolic derivations and compiled callables for one field structure."""

    def __init__(self, spec: FieldSpec):
        self.P = spec.param_symbols()
        self.A_cart = [sp.sympify(a) for a in spec.cartesian_potential(T_, X_, Y_, Z_, self.P)]
        self.A_front = [sp.sympify(a) for a in spec.front_potential(self.P)]

    # cartesian potential and its derivatives
    @cached_property
    def jac_expr(self):
        return [[sp.diff(self.A_cart[n], CARTESIAN[m]) for n in range(4)] for m in range(4)]

    @cached_property
    def potential(self):
        return _lambdify((*CARTESIAN, *self.P), self.A_cart, "math")

    @cached_property
    def jacobian(self):
        return _lambdify((*CARTESIAN, *self.P), self.jac_expr, "math")

    @cached_property
    def hessian(self):
        exprs = [
            [[sp.diff(self.jac_expr[m][n], CARTESIAN[s]) for n in range(4)] for m in range(4)]
            for s in range(4)
        ]
        return _lambdify((*CARTESIAN, *self.P), exprs, "math")

    # Hamiltonians
    @cached_property
    def H_front_expr(self):
        Ap, Am, A1, A2 = self.A_front
        return ((P1 - A1) ** 2 + (P2 - A2) ** 2 + 1) / (4 * (PM - Am)) + Ap

    @cached_property
    def H_instant_expr(self):
        At, Ax, Ay, Az = self.A_cart
        return sp.sqrt(1 + (P1 - Ax) ** 2 + (P2 - Ay) ** 2 + (P3 - Az) ** 2) + At

    def _args(self, form):
        if form == FRONT:
            return (FRONT_TIME, *FRONT_PHASE, *self.P)
        return (INSTANT_TIME, *INSTANT_PHASE, *self.P)

    def _H_expr(self, form):
        return self.H_front_expr if form == FRONT else self.H_instant_expr

    def _grad_exprs(self, form):
        args = self._args(form)[:7]
        H = self._H_expr(form)
        return [sp.diff(H, v) for v in args]

    @cached_property
    def _fns(self):
        return {}

    def fn(self, what: str, form: str, modules: str = "math"):
        key = (what, form, modules)
        if key not in self._fns:
            if what == "H":
                exprs = self._H_expr(form)
            elif what == "grad":
                exprs = self._grad_exprs(form)
            elif what == "pi_minus":
                exprs = PM - self.A_front[1]
            else:
                raise KeyError(what)
            self._fns[key] = _lambdify(self._args(form), exprs, modules)
        return self._fns[key]


_CACHE: dict[tuple, _Compiled] = {}


def _compiled(spec: FieldSpec) -> _Compiled:
    key = spec.structure_key()
    c = _CACHE.get(key)
    if c is None:
        c = _CACHE[key] = _Compiled(spec)
    return c


class CompiledField:
    """Numerical evaluators of one field spec (parameters bound)."""

    def __init__(self, spec: FieldSpec):
        self.spec = spec
        self.params = spec.param_values()
        self._c = _compiled(spec)

    def potential(self, X) -> np.ndarray:
        self.spec.check_point(X)
        return np.array(self._c.potential(*X, *self.params), dtype=float)

    def jacobian(self, X) -> np.ndarray:
        """``J[m, n] = d_m A_n``."""
        self.spec.check_point(X)
        return np.array(self._c.jacobian(*X, *self.params), dtype=float)

    def hessian(self, X) -> np.ndarray:
        """``K[s, m, n] = d_s d_m A_n``."""
        self.spec.check_point(X)
        return np.array(self._c.hessian(*X, *self.params), dtype=float)

    def fn(self, what, form, modules="math"):
        return self._c.fn(what, form, modules)


def compiled(spec: FieldSpec) -> CompiledField:
    return CompiledField(spec)


def _cartesian(p) -> np.ndarray:
    if isinstance(p, LightFrontPoint):
        p = to_spacetime(p)
    if isinstance(p, SpacetimePoint):
        return p.as_array()
    return np.asarray(p, dtype=float)


# --- public operations ------------------------------------------------------------


def potential(spec: FieldSpec, p) -> np.ndarray:
    """Covector ``A_mu`` (Cartesian lower components) at ``p``."""
    return compiled(spec).potential(_cartesian(p))


def potential_light_front(spec: FieldSpec, p) -> np.ndarray:
    """``(A_+, A_-, A_1, A_2)`` at ``p``."""
    from .core import lower_to_light_front

    return lower_to_light_front(potential(spec, p))


def field_strength(spec: FieldSpec, p) -> np.ndarray:
    """``F_mn = d_m A_n - d_n A_m``; exactly antisymmetric."""
    J = compiled(spec).jacobian(_cartesian(p))
    return J - J.T


def field_strength_gradient(spec: FieldSpec, p) -> np.ndarray:
    """``G[s, m, n] = d_s F_mn``."""
    K = compiled(spec).hessian(_cartesian(p))
    return K - K.transpose(0, 2, 1)


def eb_fields(spec: FieldSpec, p) -> tuple[np.ndarray, np.ndarray]:
    F = field_strength(spec, p)
    E = F[0, 1:].copy()
    B = np.array([-F[2, 3], -F[3, 1], -F[1, 2]]) + 0.0
    return E, B
