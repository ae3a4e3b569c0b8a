"""Acceptance criteria, each at its stated tolerance.

Every test records a one-line PASS/FAIL verdict with the measured figure;
the lines are printed together at the end of the pytest run.
"""

import json
import os
import time
from pathlib import Path

import numpy as np
import pytest

from relcharge.closedform import CLOSED_FORMS
from relcharge.cli import run_sweep
from relcharge.config import load_config, parse_config
from relcharge.core import OscillatorState, PoincareGenerator
from relcharge.dynamics import bracket_from_gradients, conservation_residual
from relcharge.integrator import integrate
from relcharge.invariants import bracket_table, drift_report, invariant_set, oscillator_set, poincare_generators
from relcharge.symmetry import gauge_term, noether_balance, noether_charge, sample_points, symmetry_scan

from conftest import ACCEPTANCE, SYSTEMS

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
RNG_SEED = 20240611


def record(number, ok, detail):
    ACCEPTANCE[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"


def _invset(name, spec, x_plus_ref=1.0):
    return invariant_set(spec, x_plus_ref=x_plus_ref) if name == "tm_mode" else invariant_set(spec)


def _run_config(name):
    cfg = load_config(CONFIGS / f"{name}.json")
    spec = cfg.spec()
    s0 = cfg.initial_state()
    invset = _invset(name, spec, s0.time)
    return cfg, spec, s0, invset


# --- 1 ----------------------------------------------------------------------------------------------


def test_criterion_1_scan_dimensions():
    expected = {"free": 10, "plane_wave": 5, "tm_mode": 4, "undulator": 4, "helical_boost": 2, "vortex": 2}
    found, ok = {}, True
    for name, want in expected.items():
        spec = SYSTEMS[name][0]
        res = symmetry_scan(spec, sample_points(spec, 64, seed=0), tol=1e-9)
        s = res.singular_values
        null = s[len(s) - res.dimension :]
        good = res.dimension == want
        if s[0] > 0:
            good &= bool(np.all(null < 1e-9 * s[0])) and res.gap > 1e-3
        found[name] = f"{res.dimension}" + ("" if s[0] == 0 else f" (gap {res.gap:.2g})")
        ok &= good
    record(1, ok, ", ".join(f"{k} {v}" for k, v in found.items()))
    assert ok, found


# --- 2 ----------------------------------------------------------------------------------------------


def test_criterion_2_pointwise_conservation():
    rng = np.random.default_rng(RNG_SEED)
    worst = {}
    for name, (spec, gen) in SYSTEMS.items():
        invset = _invset(name, spec)
        w = 0.0
        for _ in range(100):
            s = gen(rng)
            for q in invset.quantities.values():
                r, scale = conservation_residual(q, spec, s)
                w = max(w, abs(r) / max(scale, 1.0))
        worst[name] = w
    osc = oscillator_set(0.1)
    w = 0.0
    for _ in range(100):
        s = OscillatorState(0.0, *rng.uniform(-1, 1, 4))
        gH = osc["H_E"].gradient(s.time, s.phase)[1]
        for n in ("X1", "X2", "H_E"):
            g = osc[n].gradient(s.time, s.phase)[1]
            w = max(w, abs(bracket_from_gradients(g, gH)) / max(1.0, np.max(np.abs(g)) * np.max(np.abs(gH))))
    worst["vortex_oscillator"] = w
    ok = max(worst.values()) <= 1e-9
    record(2, ok, f"max scaled residual {max(worst.values()):.2e} (bound 1e-9)")
    assert ok, worst


# --- 3 ----------------------------------------------------------------------------------------------


DRIFT_CASES = {
    "plane_wave": (["Q1", "Q2", "Q3", "Q4", "Q5"], 1e-8),
    "tm_mode": (["Q1", "Q2", "Q3", "Q4", "Q5", "Q4tilde"], 1e-7),
    "undulator": (["Q1", "Q2", "Q3", "Q4"], 1e-8),
    "helical_boost": (["Q1", "Q2", "Q3", "Q4", "Q5"], 1e-7),
    "vortex": (["Q1", "Q2"], 1e-8),
}


def test_criterion_3_drift():
    parts, ok = [], True
    for name, (names, bound) in DRIFT_CASES.items():
        cfg, spec, s0, invset = _run_config(name)
        tracked = names + (["r2"] if name == "undulator" else [])
        traj = integrate(spec, s0, cfg.time_span, cfg.rtol, cfg.atol, [invset[n] for n in tracked])
        rep = drift_report(invset, traj, tracked)
        d = max(rep["drift"].values())
        ok &= d <= bound
        parts.append(f"{name} {d:.1e}")
        if name == "undulator":
            r2 = rep["identity_max_abs"]["r2"]
            ok &= r2 <= 1e-8
            parts.append(f"undulator |r2| {r2:.1e}")
        if name == "helical_boost":
            omega_span = np.sqrt(spec.F0 / (2 * s0.p_minus)) * (cfg.time_span[1] - cfg.time_span[0])
            ok &= omega_span <= 5.0 + 1e-12
    record(3, ok, "; ".join(parts))
    assert ok, parts


# --- 4 ----------------------------------------------------------------------------------------------


def test_criterion_4_identities():
    rng = np.random.default_rng(RNG_SEED + 4)
    cases = [("tm_mode", "Q4_identity", 1e-10), ("helical_boost", "combo_residual", 1e-9), ("undulator", "r1", 1e-9)]
    worst, ok = {}, True
    for name, ident, bound in cases:
        spec, gen = SYSTEMS[name]
        f = _invset(name, spec)[ident]
        worst[ident] = max(abs(f(s.time, s.phase)) for s in (gen(rng) for _ in range(100)))
        ok &= worst[ident] <= bound
    osc = oscillator_set(0.1)["sum_identity"]
    worst["X1+X2-2H_E"] = max(abs(osc(0.0, rng.uniform(-1, 1, 4))) for _ in range(100))
    ok &= worst["X1+X2-2H_E"] <= 1e-12
    record(4, ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert ok, worst


# --- 5 ----------------------------------------------------------------------------------------------


def test_criterion_5_brackets():
    rng = np.random.default_rng(RNG_SEED + 5)
    spec, gen = SYSTEMS["plane_wave"]
    states = [gen(rng) for _ in range(30)]
    pw = bracket_table(invariant_set(spec), states, numeric=True)
    i = {n: k for k, n in enumerate(pw["names"])}
    pm = np.array([s.p_minus for s in states])
    zero_pw = max(pw["max_abs"][i["Q4"], i[n]] for n in ("Q5", "Q2", "Q3"))
    q4q1 = float(np.max(np.abs(pw["values"][:, i["Q4"], i["Q1"]] - 2 * pm)))
    spec, gen = SYSTEMS["tm_mode"]
    tm = bracket_table(_invset("tm_mode", spec), [gen(rng) for _ in range(30)], numeric=True)
    zero_tm = float(np.max(tm["max_abs"][:3, :3]))
    osc = oscillator_set(0.1)
    ostates = [OscillatorState(0.0, *rng.uniform(-1, 1, 4)) for _ in range(30)]
    zero_osc = float(np.max(bracket_table(osc, ostates, numeric=True)["max_abs"]))
    worst = max(zero_pw, q4q1, zero_tm, zero_osc)
    ok = worst <= 1e-8
    record(
        5,
        ok,
        f"plane wave zeros {zero_pw:.1e}, |{{Q4,Q1}} - 2p-| {q4q1:.1e}; TM {zero_tm:.1e}; oscillator {zero_osc:.1e}",
    )
    assert ok


# --- 6 ----------------------------------------------------------------------------------------------


def test_criterion_6_closed_forms():
    devs = {}
    for name in ("plane_wave", "tm_mode", "vortex"):
        cfg, spec, s0, _ = _run_config(name)
        traj = integrate(spec, s0, cfg.time_span, cfg.rtol, cfg.atol)
        orbit = CLOSED_FORMS[name](spec, s0).prepare(*cfg.time_span)
        devs[name] = float(np.max(np.abs(orbit.phase_at(traj.times) - traj.phases)))
    ok = max(devs.values()) <= 1e-6
    record(6, ok, ", ".join(f"{k} {v:.1e}" for k, v in devs.items()) + " (bound 1e-6)")
    assert ok, devs


# --- 7 ----------------------------------------------------------------------------------------------


def test_criterion_7_noether_balance():
    rng = np.random.default_rng(RNG_SEED + 7)
    tol = 1e-10
    worst = {}
    for name, (spec, gen) in SYSTEMS.items():
        s0 = gen(rng)
        traj = integrate(spec, s0, (s0.time, s0.time + 3.0), tol, tol)
        w = 0.0
        for _ in range(5):
            g = PoincareGenerator.from_coefficients(rng.uniform(-1, 1, 10))
            discrete, predicted = noether_balance(spec, g, traj)
            w = max(w, float(np.max(np.abs(discrete - predicted) / np.maximum(1.0, np.abs(predicted)))))
        worst[name] = w
    ok = max(worst.values()) <= 10 * tol
    record(7, ok, f"max mismatch {max(worst.values()):.1e} (bound {10 * tol:.0e})")
    assert ok, worst


# --- 8 ----------------------------------------------------------------------------------------------


def test_criterion_8_cross_module():
    rng = np.random.default_rng(RNG_SEED + 8)
    worst = {}
    for name, (spec, gen) in SYSTEMS.items():
        invset = _invset(name, spec)
        gens = poincare_generators(spec)
        ref = gen(rng)
        w = 0.0
        for _ in range(50):
            s = gen(rng)
            for qname, g in gens.items():
                lam = gauge_term(spec, g, s.point, ref.point)
                dn = noether_charge(g, lam, s, spec) - noether_charge(g, 0.0, ref, spec)
                q = invset[qname]
                di = q(s.time, s.phase) - q(ref.time, ref.phase)
                w = max(w, abs(dn - di) / max(1.0, abs(di)))
        worst[name] = w
    ok = max(worst.values()) <= 1e-10
    record(8, ok, f"max relative mismatch {max(worst.values()):.1e} (bound 1e-10)")
    assert ok, worst


# --- 9 ----------------------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def sweep_timings():
    data = json.loads((CONFIGS / "plane_wave_sweep.json").read_text())
    data["sweep"] = {"parameter": "f1.a", "range": [0.5, 1.5], "count": 10_000, "jitter": 0.05}
    data["rtol"] = data["atol"] = 1e-8
    data["time_span"] = [0.0, 20.0]
    cfg = parse_config(data)
    timings, reports = {}, {}
    for workers in (1, 4):
        start = time.perf_counter()
        reports[workers] = run_sweep(cfg, workers)
        timings[workers] = time.perf_counter() - start
    speedup = timings[1] / timings[4]
    ok_time = timings[4] <= 60.0
    ok_speed = speedup >= 3.0
    record(
        9,
        ok_time and ok_speed,
        f"10^4 trajectories: 4 workers {timings[4]:.1f} s (bound 60 s), 1 worker {timings[1]:.1f} s, "
        f"speedup {speedup:.2f}x (bound 3x) on {os.cpu_count()} CPU(s)",
    )
    return timings, reports


def test_criterion_9_throughput(sweep_timings):
    timings, reports = sweep_timings
    assert reports[4]["integration_failures"] == 0 and reports[4]["count"] == 10_000
    assert reports[1] == reports[4]
    assert timings[4] <= 60.0


@pytest.mark.xfail(
    (os.cpu_count() or 1) < 4,
    reason="a 3x speedup from 1 to 4 workers needs at least 4 CPUs",
    strict=True,
)
def test_criterion_9_scaling(sweep_timings):
    timings, _ = sweep_timings
    assert timings[1] / timings[4] >= 3.0
