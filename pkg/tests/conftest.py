"""Shared fixtures: one representative spec per system and seeded random states."""

import numpy as np
import pytest

from relcharge.core import FrontFormState, InstantFormState
from relcharge.fields import Free, HelicalBoost, PlaneWave, TmMode, Undulator, Vortex
from relcharge.profiles import Profile


def random_front(rng, xp=(-1.0, 1.0), pm=(0.5, 1.5)):
    return FrontFormState(
        rng.uniform(*xp), *rng.uniform(-1, 1, 3), rng.uniform(*pm), *rng.uniform(-1, 1, 2)
    )


def random_instant(rng):
    return InstantFormState(*rng.uniform(-1, 1, 7))


# name -> (spec, state generator, x_plus_ref for TM)
SYSTEMS = {
    "free": (Free(), lambda rng: random_front(rng)),
    "plane_wave": (
        PlaneWave(Profile.cosine(1.0, 1.0), Profile.gaussian(0.5, 2.0, 1.0, 0.2)),
        lambda rng: random_front(rng),
    ),
    "tm_mode": (TmMode(Profile.cosine(0.3, 1.0)), lambda rng: random_front(rng, xp=(0.5, 2.0))),
    "undulator": (Undulator(0.5, 1.0), random_instant),
    "helical_boost": (HelicalBoost(1.0, 0.3), lambda rng: random_front(rng)),
    "vortex": (Vortex(0.5, 1.2), lambda rng: random_front(rng)),
}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=sorted(SYSTEMS))
def system(request):
    spec, gen = SYSTEMS[request.param]
    return request.param, spec, gen


@pytest.fixture
def cosine_wave():
    """Plane wave with ``f1' = cos``, ``f2 = 0``."""
    return PlaneWave(Profile.cosine(1.0, 1.0), Profile.zero())


# criterion number -> one-line verdict, filled in by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
