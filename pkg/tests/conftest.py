"""Shared fixtures and oracle helpers for the test suite."""

import numpy as np
import pytest

from vrft_lab.lti import RationalTransferFunction, SignalSeries, simulate_filter
from vrft_lab.vrft import IoDataset, ReferenceModel, make_reference_model

TS = 540.0
OMEGA0 = 0.002


@pytest.fixture(scope="session")
def mr() -> ReferenceModel:
    return make_reference_model(OMEGA0, TS)


def ideal_plant(theta: np.ndarray, lam: float, ts: float = TS) -> RationalTransferFunction:
    """LTI plant whose ideal controller is exactly theta over the PID basis.

    With the target loop M = (1-lam)^2 / (z-lam)^2 and controller
    C = (t1 z^2 + t2 z + t3) / (z (z-1)), the plant solving M = GC/(1+GC) is
    G = (1-lam)^2 z / ((z - (2 lam - 1)) (t1 z^2 + t2 z + t3)).
    """
    t1, t2, t3 = np.asarray(theta, dtype=float)
    num = np.array([(1.0 - lam) ** 2, 0.0])
    den = np.polymul([1.0, -(2.0 * lam - 1.0)], [t1, t2, t3])
    return RationalTransferFunction(num, den, ts)


def linear_dataset(g: RationalTransferFunction, n: int, seed: int,
                   scale: float = 1.0) -> IoDataset:
    """Open-loop record of an LTI plant driven by seeded noise from rest.

    The first input sample is forced to zero so a zero-initial-state
    simulation and a settled one agree sample for sample.
    """
    rng = np.random.default_rng(seed)
    u = scale * rng.standard_normal(n)
    u[0] = 0.0
    u_sig = SignalSeries(u, g.ts)
    y_sig = simulate_filter(g, u_sig)
    return IoDataset(u=u_sig, y=y_sig)


IDEAL_THETA = np.array([0.9, -1.2, 0.45])  # stable numerator roots


@pytest.fixture(scope="session")
def ideal_pair(mr):
    g = ideal_plant(IDEAL_THETA, mr.lam)
    return g, IDEAL_THETA
