"""Poincare symmetries of a background: Lie derivatives, scans, gauge terms, charges.

A generator ``xi`` is a symmetry when ``L_xi F = 0``.  The potential may then
still change by a gauge transformation, ``L_xi A = dLambda``, and the
conserved charge is ``Q = xi.p - Lambda``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from . import core
from .core import FRONT, LightFrontPoint, PoincareGenerator, SpacetimePoint, contract, to_spacetime
from .errors import DomainError, InsufficientSamplesError, NotASymmetryError, PathDependenceError
from .fields import FieldSpec, TmMode, _cartesian, compiled
from .integrator import _dopri_step
from .dynamics import make_rhs
from .quadrature import integrate

SCAN_TOL = 1e-9
MIN_SAMPLES = 20
GAUGE_QUAD_TOL = 1e-10
PATH_TOL = 1e-6
PATH_CHECK_POINTS = 33
PATH_SYMMETRY_TOL = 1e-9
TM_EXCLUSION = 0.1


def lie_derivative_potential(spec: FieldSpec, g: PoincareGenerator, p) -> np.ndarray:
    """``(L_xi A)_mu = xi^nu d_nu A_mu + A_nu d_mu xi^nu`` (Cartesian lower)."""
    X = _cartesian(p)
    cf = compiled(spec)
    A = cf.potential(X)
    J = cf.jacobian(X)  # J[m, n] = d_m A_n
    xi = g.xi_upper(X)
    D = g.d_xi_upper()  # D[nu, mu] = d_mu xi^nu
    return xi @ J + A @ D


def _lie_F_terms(spec, g, X):
    cf = compiled(spec)
    J = cf.jacobian(X)
    K = cf.hessian(X)
    F = J - J.T
    G = K - K.transpose(0, 2, 1)  # G[s, m, n] = d_s F_mn
    xi = g.xi_upper(X)
    D = g.d_xi_upper()
    return np.tensordot(xi, G, axes=1), D.T @ F, F @ D


def lie_derivative_field_strength(spec: FieldSpec, g: PoincareGenerator, p) -> np.ndarray:
    """``(L_xi F)_mn = xi^s d_s F_mn + F_sn d_m xi^s + F_ms d_n xi^s``; antisymmetric."""
    t1, t2, t3 = _lie_F_terms(spec, g, _cartesian(p))
    L = t1 + t2 + t3
    return 0.5 * (L - L.T)


# --- scanning ------------------------------------------------------------------------


@dataclass
class SymmetryScanResult:
    """Null space of the map from the ten generator parameters to ``L_xi F`` samples.

    ``basis`` is orthonormal in the coefficient space of ``core.BASIS_NAMES``.
    """

    basis: list[PoincareGenerator]
    coefficients: np.ndarray
    singular_values: np.ndarray
    residual: np.ndarray
    sample_count: int
    tol: float

    @property
    def dimension(self) -> int:
        return len(self.basis)

    @property
    def gap(self) -> float:
        """Largest non-null singular value relative to the largest one."""
        s = self.singular_values
        k = len(s) - self.dimension
        return float(s[k - 1] / s[0]) if 0 < k and s[0] > 0 else float("nan")

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "basis_names": list(core.BASIS_NAMES),
            "basis": self.coefficients.tolist(),
            "singular_values": self.singular_values.tolist(),
            "residuals": self.residual.tolist(),
            "sample_count": self.sample_count,
            "tol": self.tol,
        }


def sample_points(spec: FieldSpec, n: int = 64, seed: int = 0, box: float = 2.0) -> list[SpacetimePoint]:
    """Scrambled Halton points in ``[-box, box]^4``, avoiding singular surfaces.

    For the TM mode, points with ``|x+| <= 0.1`` are skipped.
    """
    sampler = qmc.Halton(d=4, scramble=True, seed=seed)
    out: list[SpacetimePoint] = []
    while len(out) < n:
        batch = qmc.scale(sampler.random(2 * n), -box, box)
        for row in batch:
            if isinstance(spec, TmMode) and abs(row[0] + row[3]) <= TM_EXCLUSION:
                continue
            out.append(SpacetimePoint(*row))
            if len(out) == n:
                break
    return out


_IU = np.triu_indices(4, 1)


def scan_matrix(spec: FieldSpec, points) -> np.ndarray:
    """Rows: the six independent ``L_xi F`` components per point; columns: the named basis."""
    basis = list(core.named_basis().values())
    rows = np.empty((6 * len(points), len(basis)))
    for k, p in enumerate(points):
        X = _cartesian(p)
        for j, g in enumerate(basis):
            rows[6 * k : 6 * k + 6, j] = lie_derivative_field_strength(spec, g, X)[_IU]
    return rows


def symmetry_scan(spec: FieldSpec, sample_points, tol: float = SCAN_TOL) -> SymmetryScanResult:
    """Detect the Poincare symmetries of ``spec`` from ``L_xi F`` at ``sample_points``.

    Singular values below ``tol * sigma_max`` count as null.  A field with
    ``F = 0`` everywhere has every generator as a symmetry.
    """
    points = list(sample_points)
    if len(points) < MIN_SAMPLES:
        raise InsufficientSamplesError(
            f"insufficient samples: {len(points)} given, at least {MIN_SAMPLES} needed"
        )
    for p in points:
        spec.check_point(_cartesian(p))
    M = scan_matrix(spec, points)
    _, s, Vt = np.linalg.svd(M, full_matrices=True)
    s_full = np.zeros(10)
    s_full[: len(s)] = s
    smax = s_full[0]
    null = np.flatnonzero(s_full <= tol * smax) if smax > 0 else np.arange(10)
    coeffs = Vt[null]
    # deterministic sign: the largest-magnitude entry of each vector is positive
    for row in coeffs:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1
    basis = [PoincareGenerator.from_coefficients(c) for c in coeffs]
    residual = np.array([float(np.max(np.abs(M @ c))) if len(M) else 0.0 for c in coeffs])
    return SymmetryScanResult(basis, coeffs, s_full, residual, len(points), tol)


# --- gauge term ---------------------------------------------------------------------------


def _as_array(p) -> np.ndarray:
    if isinstance(p, LightFrontPoint):
        p = to_spacetime(p)
    return _cartesian(p)


def _segment_integral(spec, g, X0, X1) -> float:
    d = X1 - X0
    if not np.any(d):
        return 0.0

    def integrand(s):
        s = np.atleast_1d(s)
        return np.array([lie_derivative_potential(spec, g, X0 + v * d) @ d for v in s])

    return integrate(integrand, 0.0, 1.0, GAUGE_QUAD_TOL)


def _check_segment(spec, g, X0, X1):
    for v in np.linspace(0.0, 1.0, PATH_CHECK_POINTS):
        X = X0 + v * (X1 - X0)
        spec.check_point(X)
        t1, t2, t3 = _lie_F_terms(spec, g, X)
        L = t1 + t2 + t3
        scale = float(np.max(np.abs(t1) + np.abs(t2) + np.abs(t3)))
        if np.max(np.abs(L)) > PATH_SYMMETRY_TOL * max(scale, 1.0):
            raise NotASymmetryError(
                f"not a symmetry: |L_xi F| = {np.max(np.abs(L)):.3g} at x = {np.round(X, 6).tolist()}"
            )


def _axis_route(X0, X1) -> list[np.ndarray]:
    """Transverse leg first, then the (t, z) leg; x+ moves monotonically."""
    mid = X0.copy()
    mid[1:3] = X1[1:3]
    return [X0, mid, X1]


def gauge_term(spec: FieldSpec, g: PoincareGenerator, p, base) -> float:
    """``Lambda(p) - Lambda(base)`` with ``L_xi A = dLambda``.

    The line integral of ``L_xi A`` is taken along the straight segment and
    along a two-leg route; both must agree to 1e-6.
    """
    X0, X1 = _as_array(base), _as_array(p)
    if isinstance(spec, TmMode) and (X0[0] + X0[3]) * (X1[0] + X1[3]) <= 0:
        raise DomainError("gauge path crosses the singular surface x+ = 0")
    route = _axis_route(X0, X1)
    _check_segment(spec, g, X0, X1)
    for a, b in zip(route[:-1], route[1:]):
        _check_segment(spec, g, a, b)
    straight = _segment_integral(spec, g, X0, X1)
    legs = sum(_segment_integral(spec, g, a, b) for a, b in zip(route[:-1], route[1:]))
    if abs(straight - legs) > PATH_TOL * max(1.0, abs(straight)):
        raise PathDependenceError(
            f"path-dependent: straight {straight:.12g} vs two-leg {legs:.12g}"
        )
    return float(straight)


def noether_charge(g: PoincareGenerator, lambda_value: float, state, spec: FieldSpec) -> float:
    """``Q = xi.p - Lambda`` at ``state``."""
    xi = g.xi_lower(state.point.as_array())
    return contract(xi, state, spec) - float(lambda_value)


# --- Noether balance along a trajectory -------------------------------------------------------


def _velocity_upper(form, phase_velocity) -> np.ndarray:
    """Cartesian ``dx^mu/dtime`` from the phase velocity of either form."""
    if form == FRONT:
        dxm, dx, dy = phase_velocity[:3]
        return np.array([0.5 * (1 + dxm), dx, dy, 0.5 * (1 - dxm)])
    return np.array([1.0, *phase_velocity[:3]])


def charge_rate(spec: FieldSpec, g: PoincareGenerator, state) -> float:
    """Predicted ``d(xi.p)/dtime = xdot^mu (L_xi A)_mu``, valid for any generator."""
    v = make_rhs(spec, state.form)(state.time, state.phase)
    return float(_velocity_upper(state.form, v) @ lie_derivative_potential(spec, g, state.point))


def noether_balance(spec: FieldSpec, g: PoincareGenerator, trajectory, h: float = 1e-3):
    """Discrete ``d(xi.p)/dtime`` at each sample next to its prediction.

    The discrete derivative is a Richardson-refined central difference of
    ``xi.p`` over single Dormand-Prince steps of size ``h`` and ``h/2`` taken
    from each sampled state.
    """
    rhs = make_rhs(spec, trajectory.form)
    cls = trajectory.state_type

    def charge_at(t, y):
        st = cls.from_phase(t, y)
        return contract(g.xi_lower(st.point.as_array()), st, spec)

    def central(t, y, k1, step):
        yp, _, _ = _dopri_step(rhs, t, y, step, k1)
        ym, _, _ = _dopri_step(rhs, t, y, -step, k1)
        return (charge_at(t + step, yp) - charge_at(t - step, ym)) / (2 * step)

    discrete, predicted = [], []
    for k, t in enumerate(trajectory.times):
        y = trajectory.phases[k]
        k1 = rhs(t, y)
        d1, d2 = central(t, y, k1, h), central(t, y, k1, h / 2)
        discrete.append((4 * d2 - d1) / 3)
        predicted.append(charge_rate(spec, g, cls.from_phase(t, y)))
    return np.array(discrete), np.array(predicted)
