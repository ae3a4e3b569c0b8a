"""Scalar profile functions ``f(s)`` used by the plane-wave and TM-mode fields.

A profile is stored symbolically so that the fields can differentiate it
exactly (the field strength of a plane wave already needs ``f''`` and the
symmetry scan ``f'''``).  Numerical parameters stay symbolic inside compiled
expressions and are supplied at call time, so one compilation serves a whole
parameter sweep.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy as sp

S = sp.Symbol("s", real=True)

PROFILE_KINDS = ("zero", "sinusoid", "cosine", "polynomial", "gaussian", "expr")

_PARAM_NAMES = {
    "zero": (),
    "sinusoid": ("a", "omega"),
    "cosine": ("a", "omega"),
    "gaussian": ("a", "omega", "width", "center"),
    "expr": (),
}


@dataclass(frozen=True)
class Profile:
    """``f(s)`` of a given ``kind`` with numeric ``params``.

    ``sinusoid``: ``f = -(a/omega) cos(omega s)``, so ``f' = a sin(omega s)``.
    ``cosine``: ``f = (a/omega) sin(omega s)``, so ``f' = a cos(omega s)``.
    ``polynomial``: ``f = sum_k c_k s^k`` with ``params = (c_0, c_1, ...)``.
    ``gaussian``: ``f = a exp(-((s - center)/width)^2) sin(omega s)``.
    ``expr``: any sympy-parsable expression in ``s`` (kept in ``expression``).
    """

    kind: str = "zero"
    params: tuple[float, ...] = ()
    expression: str | None = None

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}; expected one of {PROFILE_KINDS}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.kind in _PARAM_NAMES and len(self.params) != len(_PARAM_NAMES[self.kind]):
            raise ValueError(
                f"profile {self.kind!r} takes parameters {_PARAM_NAMES[self.kind]}, got {len(self.params)}"
            )
        if self.kind == "expr":
            if not self.expression:
                raise ValueError("profile 'expr' needs an expression")
            _parse_expression(self.expression)
        if self.kind in ("sinusoid", "cosine") and self.params[1] == 0.0:
            raise ValueError("profile omega must be nonzero")
        if self.kind == "gaussian" and self.params[2] == 0.0:
            raise ValueError("gaussian width must be nonzero")

    # constructors
    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def sinusoid(cls, a=1.0, omega=1.0):
        return cls("sinusoid", (a, omega))

    @classmethod
    def cosine(cls, a=1.0, omega=1.0):
        return cls("cosine", (a, omega))

    @classmethod
    def polynomial(cls, coefficients):
        return cls("polynomial", tuple(coefficients))

    @classmethod
    def gaussian(cls, a=1.0, omega=1.0, width=1.0, center=0.0):
        return cls("gaussian", (a, omega, width, center))

    @classmethod
    def from_expression(cls, text: str):
        return cls("expr", (), text)

    @property
    def param_names(self) -> tuple[str, ...]:
        if self.kind == "polynomial":
            return tuple(f"c{k}" for k in range(len(self.params)))
        return _PARAM_NAMES[self.kind]

    def structure_key(self) -> tuple:
        return (self.kind, len(self.params), self.expression)

    def symbolic(self, s, syms):
        """Sympy expression of ``f`` at ``s`` with parameter symbols ``syms``."""
        k = self.kind
        if k == "zero":
            return sp.Integer(0)
        if k == "sinusoid":
            a, w = syms
            return -(a / w) * sp.cos(w * s)
        if k == "cosine":
            a, w = syms
            return (a / w) * sp.sin(w * s)
        if k == "polynomial":
            return sum((c * s**n for n, c in enumerate(syms)), sp.Integer(0))
        if k == "gaussian":
            a, w, width, center = syms
            return a * sp.exp(-(((s - center) / width) ** 2)) * sp.sin(w * s)
        return _parse_expression(self.expression).subs(S, s)

    def value(self, s):
        return self.derivative(s, 0)

    def derivative(self, s, order: int = 1):
        fn = _compiled_derivative(self.structure_key(), order)
        out = fn(s, *self.params)
        if np.ndim(s):
            return np.broadcast_to(np.asarray(out, dtype=float), np.shape(s)).copy()
        return float(out)


@lru_cache(maxsize=None)
def _parse_expression(text: str):
    expr = sp.sympify(text, locals={"s": S})
    extra = expr.free_symbols - {S}
    if extra:
        raise ValueError(f"profile expression may only depend on s, found {sorted(map(str, extra))}")
    return expr


def _template(key) -> Profile:
    kind, n, expression = key
    return Profile(kind, (1.0,) * n, expression) if kind != "expr" else Profile(kind, (), expression)


@lru_cache(maxsize=None)
def _compiled_derivative(key, order):
    prof = _template(key)
    syms = sp.symbols(f"q0:{len(prof.params)}", real=True)
    expr = sp.diff(prof.symbolic(S, syms), S, order)
    return sp.lambdify((S, *syms), expr, modules="numpy")
