"""Adaptive Dormand-Prince 5(4) integration of Hamilton's equations.

Two drivers share one tableau: :func:`solve` advances a single trajectory and
records every accepted step; :func:`solve_batch` advances many independent
trajectories in lock-step (each with its own step size), which is what the
parameter sweeps use.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import FRONT, INSTANT, state_class
from .dynamics import LIGHT_CONE_EPS, make_rhs
from .errors import DomainBoundaryError, DomainError, StepUnderflowError
from .fields import FieldSpec, compiled

BOUNDARY_EPS = 1e-9

# Dormand-Prince coefficients
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B_LOW = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B - _B_LOW

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


def _dopri_step(rhs, t, y, h, k1):
    """One DP5 step; works on ``y`` of shape ``(d,)`` or ``(n, d)`` with ``h`` broadcastable."""
    ks = [k1]
    hh = h if np.ndim(h) == 0 else h[:, None]
    for i in range(1, 7):
        yi = y + hh * sum(a * k for a, k in zip(_A[i], ks) if a != 0.0)
        ks.append(rhs(t + _C[i] * h, yi))
    y_new = y + hh * sum(b * k for b, k in zip(_B, ks) if b != 0.0)
    err = hh * sum(e * k for e, k in zip(_E, ks))
    return y_new, err, ks[-1]


def _error_norm(err, y0, y1, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return np.sqrt(np.mean((err / scale) ** 2, axis=-1))


def _initial_step(rhs, t0, y0, f0, direction, rtol, atol, order=5):
    scale = atol + np.abs(y0) * rtol
    d0 = np.linalg.norm(y0 / scale) / np.sqrt(len(y0))
    d1 = np.linalg.norm(f0 / scale) / np.sqrt(len(y0))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + direction * h0 * f0
    f1 = rhs(t0 + direction * h0, y1)
    d2 = np.linalg.norm((f1 - f0) / scale) / np.sqrt(len(y0)) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / order)
    return min(100 * h0, h1)


def _initial_step_batch(rhs, t0, Y0, F0, direction, rtol, atol, order=5):
    scale = atol + np.abs(Y0) * rtol
    d0 = np.sqrt(np.mean((Y0 / scale) ** 2, axis=1))
    d1 = np.sqrt(np.mean((F0 / scale) ** 2, axis=1))
    h0 = np.where((d0 < 1e-5) | (d1 < 1e-5), 1e-6, 0.01 * d0 / np.maximum(d1, 1e-300))
    F1 = rhs(t0 + direction * h0, Y0 + direction * h0[:, None] * F0)
    d2 = np.sqrt(np.mean(((F1 - F0) / scale) ** 2, axis=1)) / h0
    dmax = np.maximum(d1, d2)
    h1 = np.where(dmax <= 1e-15, np.maximum(1e-6, h0 * 1e-3), (0.01 / np.maximum(dmax, 1e-300)) ** (1.0 / order))
    return np.minimum(100 * h0, h1)


@dataclass
class SolveResult:
    times: np.ndarray
    ys: np.ndarray
    fs: np.ndarray
    steps: int
    rejected: int
    status: str = "ok"
    message: str = ""


def solve(
    rhs: Callable,
    t0: float,
    y0,
    t1: float,
    rtol: float = 1e-10,
    atol: float = 1e-10,
    check: Callable | None = None,
    max_steps: int = 1_000_000,
    raise_on_failure: bool = True,
) -> SolveResult:
    """Integrate ``y' = rhs(t, y)`` from ``t0`` to ``t1`` (either direction).

    ``check(t, y)`` runs on each accepted step and may raise ``DomainError``;
    the run then stops with status ``"domain_boundary"``.
    """
    y = np.array(y0, dtype=float)
    t = float(t0)
    direction = 1.0 if t1 >= t0 else -1.0
    f = rhs(t, y)
    times, ys, fs = [t], [y.copy()], [f]
    steps = rejected = 0
    if t1 == t0:
        return SolveResult(np.array(times), np.array(ys), np.array(fs), 0, 0)
    h = _initial_step(rhs, t, y, f, direction, rtol, atol)
    status, message = "ok", ""
    while direction * (t1 - t) > 0:
        if steps + rejected >= max_steps:
            status, message = "max_steps", f"exceeded {max_steps} steps"
            break
        h = min(h, abs(t1 - t))
        if h <= 16 * np.finfo(float).eps * max(1.0, abs(t)):
            status, message = "step_underflow", f"step size underflow at time {t:.17g}"
            break
        try:
            y_new, err, f_new = _dopri_step(rhs, t, y, direction * h, f)
            norm = float(_error_norm(err, y, y_new, rtol, atol))
            if not np.isfinite(norm):
                raise FloatingPointError
        except (ArithmeticError, ValueError):
            rejected += 1
            h *= MIN_FACTOR
            continue
        if norm <= 1.0:
            t_new = t1 if h == abs(t1 - t) else t + direction * h
            if check is not None:
                try:
                    check(t_new, y_new)
                except DomainError as exc:
                    status, message = "domain_boundary", f"domain boundary reached: {exc}"
                    break
            t, y, f = t_new, y_new, f_new
            times.append(t)
            ys.append(y.copy())
            fs.append(f)
            steps += 1
            factor = MAX_FACTOR if norm == 0 else min(MAX_FACTOR, SAFETY * norm ** -0.2)
        else:
            rejected += 1
            factor = max(MIN_FACTOR, SAFETY * norm ** -0.2)
        h *= factor
    result = SolveResult(np.array(times), np.array(ys), np.array(fs), steps, rejected, status, message)
    if raise_on_failure and status != "ok":
        exc_type = DomainBoundaryError if status == "domain_boundary" else StepUnderflowError
        raise exc_type(message, last_time=t, last_phase=y.copy(), trajectory=result)
    return result


def hermite(t, t0, t1, y0, y1, f0, f1):
    """Cubic Hermite interpolation on ``[t0, t1]``."""
    h = t1 - t0
    s = (t - t0) / h
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


# --- trajectories of a field system ----------------------------------------------------


@dataclass
class Trajectory:
    """Accepted integration steps of one charge trajectory.

    ``invariants`` maps each tracked name to its value at every sample.
    """

    form: str
    times: np.ndarray
    phases: np.ndarray
    derivatives: np.ndarray
    invariants: dict[str, np.ndarray] = field(default_factory=dict)
    steps: int = 0
    rejected: int = 0
    rtol: float = 0.0
    atol: float = 0.0
    status: str = "ok"
    message: str = ""

    @property
    def state_type(self):
        return state_class(self.form)

    def __len__(self):
        return len(self.times)

    @property
    def samples(self):
        cls = self.state_type
        for k, t in enumerate(self.times):
            yield t, cls.from_phase(t, self.phases[k]), {n: float(v[k]) for n, v in self.invariants.items()}

    def state(self, k: int):
        return self.state_type.from_phase(self.times[k], self.phases[k])

    def phase_at(self, t) -> np.ndarray:
        """Dense output by cubic Hermite interpolation (scalar or array ``t``)."""
        ts = self.times
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        increasing = ts[-1] >= ts[0]
        key = ts if increasing else ts[::-1]
        idx = np.clip(np.searchsorted(key, t_arr) - 1, 0, len(ts) - 2)
        if not increasing:
            idx = len(ts) - 2 - idx
        out = hermite(
            t_arr[:, None],
            ts[idx, None],
            ts[idx + 1, None],
            self.phases[idx],
            self.phases[idx + 1],
            self.derivatives[idx],
            self.derivatives[idx + 1],
        )
        return out[0] if np.ndim(t) == 0 else out

    def drift(self, name: str, scale=None) -> float:
        """Max ``|Q(t) - Q(t0)|`` divided by ``max(1, |Q(t0)|)`` (or by ``scale``)."""
        v = self.invariants[name]
        denom = max(1.0, abs(v[0])) if scale is None else scale
        return float(np.max(np.abs(v - v[0])) / denom)


def domain_check(spec: FieldSpec, form: str):
    cf = compiled(spec)
    pi_minus = cf.fn("pi_minus", FRONT)
    params = cf.params

    def check(t, y):
        spec.check_time(form, t, y)
        if form == FRONT:
            val = pi_minus(t, *y, *params)
            if abs(val) < BOUNDARY_EPS:
                raise DomainError(f"|p_- - A_-| = {abs(val):.3g} below {BOUNDARY_EPS:g}")

    return check


def integrate(
    spec: FieldSpec,
    initial,
    time_span: Sequence[float],
    rtol: float = 1e-10,
    atol: float = 1e-10,
    tracked: Sequence = (),
    max_steps: int = 1_000_000,
) -> Trajectory:
    """Integrate the charge in ``spec`` from ``initial`` over ``time_span``.

    The form follows the type of ``initial``.  ``tracked`` holds phase
    functions (anything with ``name`` and ``__call__(time, phase)``) evaluated
    at every accepted step.  Raises ``DomainBoundaryError`` or
    ``StepUnderflowError`` with the partial trajectory attached.
    """
    form = initial.form
    if form not in (FRONT, INSTANT):
        raise TypeError("initial state must be a front- or instant-form state")
    t0, t1 = float(time_span[0]), float(time_span[1])
    if t0 != initial.time:
        raise ValueError(f"time span starts at {t0} but the state is at {initial.time}")
    if isinstance(spec, _tm_type()) and form == FRONT and min(t0, t1) <= 0.0 <= max(t0, t1):
        raise DomainError("TM potential singular at x+ = 0: time span must exclude 0")
    check = domain_check(spec, form)
    check(t0, initial.phase)
    res = solve(
        make_rhs(spec, form), t0, initial.phase, t1, rtol, atol, check, max_steps, raise_on_failure=False
    )
    traj = Trajectory(
        form, res.times, res.ys, res.fs, steps=res.steps, rejected=res.rejected,
        rtol=rtol, atol=atol, status=res.status, message=res.message,
    )
    for q in tracked:
        traj.invariants[q.name] = np.array([q(t, y) for t, y in zip(res.times, res.ys)])
    if res.status != "ok":
        exc_type = DomainBoundaryError if res.status == "domain_boundary" else StepUnderflowError
        raise exc_type(res.message, last_time=res.times[-1], last_phase=res.ys[-1], trajectory=traj)
    return traj


def _tm_type():
    from .fields import TmMode

    return TmMode


# --- lock-step batch driver ------------------------------------------------------------------


@dataclass
class BatchResult:
    final_times: np.ndarray
    final_phases: np.ndarray
    steps: np.ndarray
    rejected: np.ndarray
    status: list[str]
    drift: dict[str, np.ndarray]


def solve_batch(
    spec: FieldSpec,
    form: str,
    t0: float,
    Y0: np.ndarray,
    t1: float,
    params: np.ndarray | None = None,
    rtol: float = 1e-8,
    atol: float = 1e-8,
    tracked: Sequence = (),
    max_steps: int = 200_000,
) -> BatchResult:
    """Integrate ``n`` trajectories of one field structure in lock-step.

    ``params[n, k]`` overrides the spec's parameter values per trajectory.
    Tracked phase functions must provide ``vectorized(time, phase, params)``;
    their max drift ``|Q - Q0|/max(1, |Q0|)`` is accumulated per trajectory.
    """
    rhs = make_rhs(spec, form, vectorized=True)
    Y = np.array(Y0, dtype=float)
    n = Y.shape[0]
    P = np.tile(np.asarray(compiled(spec).params, dtype=float), (n, 1)) if params is None else np.asarray(params, float)
    direction = 1.0 if t1 >= t0 else -1.0
    t = np.full(n, float(t0))
    status = ["ok"] * n
    steps = np.zeros(n, dtype=int)
    rejected = np.zeros(n, dtype=int)
    q0 = {q.name: q.vectorized(t, Y, P) for q in tracked}
    drift = {q.name: np.zeros(n) for q in tracked}
    cf = compiled(spec)
    pi_minus = cf.fn("pi_minus", FRONT, "numpy") if form == FRONT else None

    F = rhs(t, Y, P)
    h = _initial_step_batch(lambda tt, yy: rhs(tt, yy, P), t, Y, F, direction, rtol, atol) if n else np.zeros(0)
    active = np.ones(n, dtype=bool) if t1 != t0 else np.zeros(n, dtype=bool)
    tiny = 16 * np.finfo(float).eps
    while active.any():
        idx = np.flatnonzero(active)
        hi = np.minimum(h[idx], np.abs(t1 - t[idx]))
        under = hi <= tiny * np.maximum(1.0, np.abs(t[idx]))
        for k in idx[under]:
            status[k] = "step_underflow"
        active[idx[under]] = False
        idx, hi = idx[~under], hi[~under]
        if idx.size == 0:
            break
        Pi = P[idx]
        with np.errstate(all="ignore"):
            y_new, err, f_new = _dopri_step(lambda tt, yy: rhs(tt, yy, Pi), t[idx], Y[idx], direction * hi, F[idx])
            norm = _error_norm(err, Y[idx], y_new, rtol, atol)
        bad = ~np.isfinite(norm)
        norm[bad] = np.inf
        ok = norm <= 1.0
        acc = idx[ok]
        if acc.size:
            finish = hi[ok] >= np.abs(t1 - t[acc])
            t_new = np.where(finish, t1, t[acc] + direction * hi[ok])
            if pi_minus is not None:
                pm = np.broadcast_to(pi_minus(t_new, *y_new[ok].T, *P[acc].T), (acc.size,))
                hit = np.abs(pm) < BOUNDARY_EPS
                for k in acc[hit]:
                    status[k] = "domain_boundary"
                active[acc[hit]] = False
                keep = ~hit
            else:
                keep = np.ones(acc.size, dtype=bool)
            a = acc[keep]
            t[a] = t_new[keep]
            Y[a] = y_new[ok][keep]
            F[a] = f_new[ok][keep]
            steps[a] += 1
            for q in tracked:
                v = q.vectorized(t[a], Y[a], P[a])
                d = np.abs(v - q0[q.name][a]) / np.maximum(1.0, np.abs(q0[q.name][a]))
                drift[q.name][a] = np.maximum(drift[q.name][a], d)
            active[a[finish[keep]]] = False
        rej = idx[~ok]
        rejected[rej] += 1
        with np.errstate(divide="ignore"):
            factor = np.where(
                ok,
                np.minimum(MAX_FACTOR, SAFETY * np.where(norm == 0, np.inf, norm) ** -0.2),
                np.maximum(MIN_FACTOR, SAFETY * np.where(np.isfinite(norm), norm, 1e300) ** -0.2),
            )
        h[idx] = hi * factor
        over = (steps + rejected) >= max_steps
        for k in np.flatnonzero(over & active):
            status[k] = "max_steps"
        active &= ~over
    return BatchResult(t, Y, steps, rejected, status, drift)
