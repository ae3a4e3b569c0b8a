"""Coordinates, metric conventions, phase-space states and Poincare generators.

Conventions (fixed here, reused everywhere):

* natural units, unit mass and unit charge;
* Cartesian coordinates ``(t, x, y, z)`` with metric ``diag(+1, -1, -1, -1)``;
* light-front coordinates ``x+ = t + z``, ``x- = t - z``; upper components of
  any vector map as ``v+ = v^t + v^z``, lower components as
  ``v_+ = (v_t + v_z)/2``, so ``a.b = (a+ b- + a- b+)/2 - a_perp.b_perp`` and
  the mass shell reads ``4 pi_+ pi_- - pi_perp^2 = 1``;
* canonical momenta are always lower-index components ``p_mu``;
* a Poincare generator is ``xi_mu(x) = a_mu + omega_{mu nu} x^nu`` with
  Cartesian lower indices; its charge is ``xi^mu p_mu``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar, Union

import numpy as np

ETA = np.diag([1.0, -1.0, -1.0, -1.0])
_ETA_DIAG = np.array([1.0, -1.0, -1.0, -1.0])

FRONT = "front"
INSTANT = "instant"
FORMS = (FRONT, INSTANT)


# --- points -----------------------------------------------------------------


@dataclass(frozen=True)
class SpacetimePoint:
    t: float
    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.t, self.x, self.y, self.z], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "SpacetimePoint":
        t, x, y, z = (float(v) for v in arr)
        return cls(t, x, y, z)


@dataclass(frozen=True)
class LightFrontPoint:
    x_plus: float
    x_minus: float
    x: float
    y: float

    @property
    def x_perp(self) -> tuple[float, float]:
        return (self.x, self.y)


def to_light_front(p: SpacetimePoint) -> LightFrontPoint:
    return LightFrontPoint(p.t + p.z, p.t - p.z, p.x, p.y)


def to_spacetime(p: LightFrontPoint) -> SpacetimePoint:
    return SpacetimePoint(
        0.5 * (p.x_plus + p.x_minus), p.x, p.y, 0.5 * (p.x_plus - p.x_minus)
    )


def raise_index(v) -> np.ndarray:
    """Raise (or lower) a Cartesian 4-vector index; the metric is its own inverse."""
    return _ETA_DIAG * np.asarray(v, dtype=float)


lower_index = raise_index


def upper_to_light_front(v) -> np.ndarray:
    """Cartesian upper components -> ``(v+, v-, v1, v2)``."""
    vt, vx, vy, vz = np.asarray(v, dtype=float)
    return np.array([vt + vz, vt - vz, vx, vy])


def lower_to_light_front(v) -> np.ndarray:
    """Cartesian lower components -> ``(v_+, v_-, v_1, v_2)``."""
    vt, vx, vy, vz = np.asarray(v, dtype=float)
    return np.array([0.5 * (vt + vz), 0.5 * (vt - vz), vx, vy])


def lower_from_light_front(v) -> np.ndarray:
    """``(v_+, v_-, v_1, v_2)`` -> Cartesian lower components."""
    vp, vm, v1, v2 = np.asarray(v, dtype=float)
    return np.array([vp + vm, v1, v2, vp - vm])


def minkowski_dot(a_upper, b_lower) -> float:
    return float(np.dot(a_upper, b_lower))


# --- phase-space states -------------------------------------------------------


@dataclass(frozen=True)
class FrontFormState:
    """Point of the front-form phase space at light-front time ``x_plus``.

    Phase vector order is ``(x_minus, x, y, p_minus, p1, p2)``.
    """

    x_plus: float
    x_minus: float
    x: float
    y: float
    p_minus: float
    p1: float
    p2: float

    form: ClassVar[str] = FRONT
    time_name: ClassVar[str] = "x_plus"
    phase_names: ClassVar[tuple[str, ...]] = ("x_minus", "x", "y", "p_minus", "p1", "p2")

    @property
    def time(self) -> float:
        return self.x_plus

    @property
    def phase(self) -> np.ndarray:
        return np.array(
            [self.x_minus, self.x, self.y, self.p_minus, self.p1, self.p2], dtype=float
        )

    @property
    def point(self) -> SpacetimePoint:
        return to_spacetime(LightFrontPoint(self.x_plus, self.x_minus, self.x, self.y))

    @classmethod
    def from_phase(cls, time, phase) -> "FrontFormState":
        return cls(float(time), *(float(v) for v in phase))


@dataclass(frozen=True)
class InstantFormState:
    """Point of the instant-form phase space at time ``t``.

    Phase vector order is ``(x, y, z, p1, p2, p3)``.
    """

    t: float
    x: float
    y: float
    z: float
    p1: float
    p2: float
    p3: float

    form: ClassVar[str] = INSTANT
    time_name: ClassVar[str] = "t"
    phase_names: ClassVar[tuple[str, ...]] = ("x", "y", "z", "p1", "p2", "p3")

    @property
    def time(self) -> float:
        return self.t

    @property
    def phase(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.p1, self.p2, self.p3], dtype=float)

    @property
    def point(self) -> SpacetimePoint:
        return SpacetimePoint(self.t, self.x, self.y, self.z)

    @classmethod
    def from_phase(cls, time, phase) -> "InstantFormState":
        return cls(float(time), *(float(v) for v in phase))


@dataclass(frozen=True)
class OscillatorState:
    """Phase point of the reduced two-dimensional oscillator (time ``phi``)."""

    phi: float
    alpha: float
    beta: float
    p_alpha: float
    p_beta: float

    form: ClassVar[str] = "oscillator"
    time_name: ClassVar[str] = "phi"
    phase_names: ClassVar[tuple[str, ...]] = ("alpha", "beta", "p_alpha", "p_beta")

    @property
    def time(self) -> float:
        return self.phi

    @property
    def phase(self) -> np.ndarray:
        return np.array([self.alpha, self.beta, self.p_alpha, self.p_beta], dtype=float)

    @classmethod
    def from_phase(cls, time, phase) -> "OscillatorState":
        return cls(float(time), *(float(v) for v in phase))


State = Union[FrontFormState, InstantFormState]
STATE_TYPES = {FRONT: FrontFormState, INSTANT: InstantFormState}


def state_class(form: str):
    try:
        return STATE_TYPES[form]
    except KeyError:
        raise ValueError(f"unknown form {form!r}; expected one of {FORMS}") from None


# --- Poincare generators --------------------------------------------------------

BASIS_NAMES = ("P+", "P-", "P1", "P2", "Lz", "Kz", "T1", "T2", "U1", "U2")


class PoincareGenerator:
    """Killing vector ``xi_mu(x) = a_mu + omega_{mu nu} x^nu`` (Cartesian, lower).

    ``omega`` must be exactly antisymmetric; generators form a vector space
    (``+``, ``-``, scalar ``*``), so combinations such as ``P+ + 2w T1`` are
    ordinary values.
    """

    __slots__ = ("a", "omega")

    def __init__(self, a=None, omega=None):
        a = np.zeros(4) if a is None else np.array(a, dtype=float)
        omega = np.zeros((4, 4)) if omega is None else np.array(omega, dtype=float)
        if a.shape != (4,) or omega.shape != (4, 4):
            raise ValueError("a must have shape (4,) and omega shape (4, 4)")
        if not np.array_equal(omega, -omega.T):
            raise ValueError("omega must be antisymmetric")
        a.flags.writeable = False
        omega.flags.writeable = False
        self.a = a
        self.omega = omega

    @classmethod
    def from_components(cls, a=None, upper=None) -> "PoincareGenerator":
        """Build from ``a`` and the six entries ``omega[i, j]``, ``i < j``.

        ``upper`` maps ``(i, j)`` pairs to values.
        """
        omega = np.zeros((4, 4))
        for (i, j), v in (upper or {}).items():
            omega[i, j] = v
            omega[j, i] = -v
        return cls(a, omega)

    def xi_lower(self, X) -> np.ndarray:
        return self.a + self.omega @ np.asarray(X, dtype=float)

    def xi_upper(self, X) -> np.ndarray:
        return raise_index(self.xi_lower(X))

    def d_xi_upper(self) -> np.ndarray:
        """``D[nu, mu] = d_mu xi^nu`` (constant for a Killing vector)."""
        return _ETA_DIAG[:, None] * self.omega

    def __add__(self, other):
        if not isinstance(other, PoincareGenerator):
            return NotImplemented
        return PoincareGenerator(self.a + other.a, self.omega + other.omega)

    def __sub__(self, other):
        if not isinstance(other, PoincareGenerator):
            return NotImplemented
        return PoincareGenerator(self.a - other.a, self.omega - other.omega)

    def __mul__(self, c):
        return PoincareGenerator(float(c) * self.a, float(c) * self.omega)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __eq__(self, other):
        return (
            isinstance(other, PoincareGenerator)
            and np.array_equal(self.a, other.a)
            and np.array_equal(self.omega, other.omega)
        )

    def __hash__(self):
        return hash((self.a.tobytes(), self.omega.tobytes()))

    def __repr__(self):
        return f"PoincareGenerator(coefficients={np.round(self.coefficients(), 12).tolist()})"

    def coefficients(self) -> np.ndarray:
        """Coordinates in the named basis ``BASIS_NAMES``."""
        return np.linalg.solve(_BASIS_MATRIX, self._flat())

    @classmethod
    def from_coefficients(cls, coeffs) -> "PoincareGenerator":
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (10,):
            raise ValueError("expected 10 coefficients")
        return cls._from_flat(_BASIS_MATRIX @ coeffs)

    def _flat(self) -> np.ndarray:
        iu = np.triu_indices(4, 1)
        return np.concatenate([self.a, self.omega[iu]])

    @classmethod
    def _from_flat(cls, flat) -> "PoincareGenerator":
        iu = np.triu_indices(4, 1)
        omega = np.zeros((4, 4))
        omega[iu] = flat[4:]
        return cls(flat[:4], omega - omega.T)


def P_plus():
    """Light-front energy ``p_+ = H``."""
    return PoincareGenerator(a=[0.5, 0.0, 0.0, -0.5])


def P_minus():
    return PoincareGenerator(a=[0.5, 0.0, 0.0, 0.5])


def P_transverse(i: int):
    a = np.zeros(4)
    a[i] = -1.0
    return PoincareGenerator(a=a)


def P0():
    """Instant-form energy ``p_0``."""
    return PoincareGenerator(a=[1.0, 0.0, 0.0, 0.0])


def P3():
    return PoincareGenerator(a=[0.0, 0.0, 0.0, -1.0])


def L_z():
    """Rotation with charge ``x p2 - y p1``."""
    return PoincareGenerator.from_components(upper={(1, 2): 1.0})


def K_z():
    """Longitudinal boost with charge ``x+ H - x- p_-``."""
    return PoincareGenerator.from_components(upper={(0, 3): 1.0})


def T(i: int):
    """Null rotation with charge ``2 x^i p_- + x+ p_i``."""
    return PoincareGenerator.from_components(upper={(0, i): 1.0, (i, 3): -1.0})


def U(i: int):
    """Null rotation with charge ``2 x^i H + x- p_i``."""
    return PoincareGenerator.from_components(upper={(0, i): 1.0, (i, 3): 1.0})


def named_basis() -> dict[str, PoincareGenerator]:
    return {
        "P+": P_plus(),
        "P-": P_minus(),
        "P1": P_transverse(1),
        "P2": P_transverse(2),
        "Lz": L_z(),
        "Kz": K_z(),
        "T1": T(1),
        "T2": T(2),
        "U1": U(1),
        "U2": U(2),
    }


_BASIS_MATRIX = np.column_stack([g._flat() for g in named_basis().values()])


def xi_at(g: PoincareGenerator, p: SpacetimePoint) -> np.ndarray:
    """Covector ``xi_mu`` (Cartesian lower components) of ``g`` at ``p``."""
    return g.xi_lower(p.as_array())


def contract(xi, state, spec) -> float:
    """Charge ``xi^mu p_mu`` at ``state``.

    ``xi`` holds Cartesian lower components evaluated at the state's point.
    The time component of the momentum (``p_+`` or ``p_0``) is the Hamiltonian
    of ``spec`` in the state's form.
    """
    from .dynamics import hamiltonian

    xi_up = raise_index(xi)
    H = hamiltonian(spec, state)
    if state.form == FRONT:
        xp, xm, x1, x2 = upper_to_light_front(xi_up)
        return float(xp * H + xm * state.p_minus + x1 * state.p1 + x2 * state.p2)
    if state.form == INSTANT:
        return float(xi_up[0] * H + xi_up[1] * state.p1 + xi_up[2] * state.p2 + xi_up[3] * state.p3)
    raise ValueError(f"cannot contract with a {type(state).__name__}")
