"""Adaptive Gauss-Legendre quadrature with pole detection.

:class:`CumulativeQuadrature` keeps bisecting the panel with the largest
10- vs 20-point Gauss-Legendre discrepancy until the summed discrepancy meets
the requested tolerance, then answers ``integral from a to s`` for any ``s``
in the interval from the cached panels.  Integrals anchored at a launch time (``x-`` orbits, the TM
non-polynomial integral) are built on it.
"""

from __future__ import annotations

import heapq
from bisect import bisect_right

import numpy as np

from .errors import QuadraturePoleError

_X10, _W10 = np.polynomial.legendre.leggauss(10)
_X20, _W20 = np.polynomial.legendre.leggauss(20)

POLE_SCAN_POINTS = 257
REL_TOL = 1e-13


def _gl(f, a, b, nodes, weights):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    return half * float(np.dot(weights, f(mid + half * nodes)))


def check_no_pole(denominator, a: float, b: float, points: int = POLE_SCAN_POINTS, rel_floor: float = 1e-12):
    """Raise ``QuadraturePoleError`` if ``denominator`` changes sign or (nearly) vanishes on ``[a, b]``.

    ``denominator`` must accept arrays.
    """
    s = np.linspace(a, b, points)
    d = np.asarray(denominator(s), dtype=float)
    d = np.broadcast_to(d, s.shape)
    scale = max(float(np.max(np.abs(d))), 1e-300)
    if not np.all(np.isfinite(d)):
        raise QuadraturePoleError(f"quadrature pole: non-finite denominator on [{a:g}, {b:g}]")
    sign_change = np.flatnonzero(np.signbit(d[:-1]) != np.signbit(d[1:]))
    if sign_change.size or np.min(np.abs(d)) <= rel_floor * scale:
        where = s[sign_change[0]] if sign_change.size else s[np.argmin(np.abs(d))]
        raise QuadraturePoleError(f"quadrature pole: denominator vanishes near s = {where:.6g}")


class CumulativeQuadrature:
    """Adaptive panels for ``F(s) = integral_a^s f``, ``s`` between ``a`` and ``b``.

    ``f`` must accept numpy arrays.  ``abs_tol`` bounds the summed error estimate
    over ``[a, b]`` (or ``1e-13`` of the integral, whichever is larger).
    """

    def __init__(self, f, a: float, b: float, abs_tol: float = 1e-10, max_panels: int = 100_000):
        self.f = f
        self.a = float(a)
        self.b = float(b)
        lo, hi = min(self.a, self.b), max(self.a, self.b)
        self._edges = [lo]
        self._cum = [0.0]
        if hi > lo:
            self._build(lo, hi, abs_tol, max_panels)
        self._lo, self._hi = lo, hi

    def _build(self, lo, hi, abs_tol, max_panels):
        # globally adaptive: split the panel with the largest error estimate
        # until the summed estimate meets the tolerance
        def panel(a, b):
            fine = _gl(self.f, a, b, _X20, _W20)
            return (-abs(fine - _gl(self.f, a, b, _X10, _W10)), a, b, fine)

        heap = [panel(lo, hi)]
        err, value = -heap[0][0], heap[0][3]
        while err > max(abs_tol, REL_TOL * abs(value)):
            e, a, b, v = heapq.heappop(heap)
            if b - a < 1e-13 * (hi - lo):
                raise QuadraturePoleError(
                    f"quadrature pole: integrand not resolvable near s = {0.5 * (a + b):.6g}"
                )
            m = 0.5 * (a + b)
            left, right = panel(a, m), panel(m, b)
            heapq.heappush(heap, left)
            heapq.heappush(heap, right)
            err += e - left[0] - right[0]
            value += left[3] + right[3] - v
            if len(heap) > max_panels:
                raise RuntimeError("adaptive quadrature exceeded the panel budget")
            if len(heap) % 256 == 0:  # refresh the running sums against drift
                err = -sum(p[0] for p in heap)
                value = sum(p[3] for p in heap)
        total = 0.0
        for _, a, b, v in sorted(heap, key=lambda p: p[1]):
            total += v
            self._edges.append(b)
            self._cum.append(total)

    def _from_lo(self, s: float) -> float:
        if s <= self._lo:
            return 0.0
        k = min(bisect_right(self._edges, s) - 1, len(self._edges) - 2)
        left = self._edges[k]
        partial = _gl(self.f, left, s, _X20, _W20) if s > left else 0.0
        return self._cum[k] + partial

    def __call__(self, s):
        """``integral_a^s f`` (scalar or array ``s``)."""
        if np.ndim(s):
            return np.array([self(float(v)) for v in np.asarray(s).ravel()]).reshape(np.shape(s))
        s = float(s)
        if s < self._lo - 1e-12 * max(1.0, abs(self._lo)) or s > self._hi + 1e-12 * max(1.0, abs(self._hi)):
            raise ValueError(f"{s} outside the cached interval [{self._lo}, {self._hi}]")
        val = self._from_lo(s) - self._from_lo(self.a)
        return val

    @property
    def total(self) -> float:
        return self(self.b)


def integrate(f, a: float, b: float, abs_tol: float = 1e-10) -> float:
    """Definite integral of the vectorised ``f`` from ``a`` to ``b``."""
    if a == b:
        return 0.0
    return CumulativeQuadrature(f, a, b, abs_tol).total
