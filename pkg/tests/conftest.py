from __future__ import annotations

import math

import numpy as np
import pytest

from fpja.coupled_modes import ModeParams, PumpSet

DEVICE_KAPPA_MHZ = (83.0, 15.0, 45.0)
DEVICE_FREQ_GHZ = (6.876, 7.932, 10.782)
MHZ = 2 * math.pi * 1e6


def make_modes(kappa_mhz=DEVICE_KAPPA_MHZ, eta=(1.0, 1.0, 1.0), freq_ghz=DEVICE_FREQ_GHZ):
    return [ModeParams.from_lab_units(lab, f, k, k * e)
            for lab, f, k, e in zip("abc", freq_ghz, kappa_mhz, eta)]


def random_modes(rng: np.random.Generator, lossless: bool = True):
    k = 10 ** rng.uniform(0, 2, 3)
    eta = (1.0, 1.0, 1.0) if lossless else tuple(rng.uniform(0.8, 1.0, 3))
    return make_modes(tuple(k), eta)


@pytest.fixture
def lossless_modes():
    return make_modes()


@pytest.fixture
def device_modes():
    # b's internal loss does not enter a/c scattering but is kept for realism
    return make_modes(eta=(0.99, 0.9, 0.99))


@pytest.fixture
def device_pumps():
    return PumpSet.canonical(1.0, 1.0, 0.5, 2.275)


# acceptance lines are collected here and echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
