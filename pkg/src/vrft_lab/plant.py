"""Surrogate building-thermal plant and experiment generation.

A two-state resistance-capacitance network (room air + wall mass) heated by
ventilation supply air. The ventilation heat transfer is bilinear in the
airflow fraction u, which is always saturated to [0, 1]. This stands in for
the proprietary building simulator the study design assumes: the defaults are
tuned so a full-airflow step from 15 degC reaches 20 degC in roughly eighty
minutes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import LengthTooShort, StateOutOfRange, UnstableLoop, VrftLabError
from .lti import RationalTransferFunction, SignalSeries, _lfilter_coeffs
from .vrft import IoDataset

DEFAULT_TS = 540.0
RK4_SUBSTEPS = 9

T_AIR_MIN, T_AIR_MAX = -50.0, 60.0


@dataclass(frozen=True)
class ThermalPlantConfig:
    """Lumped RC parameters of the surrogate apartment."""

    c_air: float = 3.6e6      # J/K, room air + fast furniture mass
    c_wall: float = 8.0e6     # J/K
    r_aw: float = 2.0e-3      # K/W, air <-> wall
    r_wo: float = 1.6e-2      # K/W, wall <-> outdoors
    t_supply: float = 26.0    # degC, ventilation supply air
    q_max: float = 700.0      # W/K at u = 1
    q_person: float = 900.0   # W internal gains per occupant present
    ts: float = DEFAULT_TS    # s

    def __post_init__(self):
        for name in ("c_air", "c_wall", "r_aw", "r_wo", "q_max", "q_person",
                     "ts"):
            if not getattr(self, name) > 0:
                raise VrftLabError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class PlantState:
    t_air: float
    t_wall: float

    def __post_init__(self):
        if not (math.isfinite(self.t_air) and math.isfinite(self.t_wall)):
            raise StateOutOfRange("non-finite plant state")
        if not (T_AIR_MIN <= self.t_air <= T_AIR_MAX):
            raise StateOutOfRange(f"t_air={self.t_air} outside sanity bounds")


@dataclass(frozen=True)
class ExogenousTraces:
    """Outdoor temperature and occupant count, aligned sample by sample."""

    t_out: SignalSeries
    occupancy: SignalSeries

    def __post_init__(self):
        if len(self.t_out) != len(self.occupancy):
            raise VrftLabError("t_out and occupancy must have equal length")
        if abs(self.t_out.ts - self.occupancy.ts) > 1e-12 * self.t_out.ts:
            raise VrftLabError("t_out and occupancy sample periods differ")
        occ = self.occupancy.samples
        if np.any(occ < 0) or np.any(np.abs(occ - np.round(occ)) > 1e-9):
            raise VrftLabError("occupancy must be non-negative integers")

    def __len__(self) -> int:
        return len(self.t_out)


@dataclass(frozen=True)
class ExcitationConfig:
    """Gaussian open-loop excitation, clipped to the actuator range."""

    mu: float
    sigma: float
    n: int
    seed: int

    def __post_init__(self):
        if not (0.0 <= self.mu <= 1.0):
            raise VrftLabError("mu must lie in [0, 1]")
        if not self.sigma > 0:
            raise VrftLabError("sigma must be positive")
        if self.n < 10:
            raise VrftLabError("need at least 10 excitation samples")


SCENARIOS = {"A": (0.5, 1.0 / 6.0), "B": (0.5, 1.0)}


def scenario_excitation(scenario: str, n: int, seed: int) -> ExcitationConfig:
    try:
        mu, sigma = SCENARIOS[scenario]
    except KeyError:
        raise VrftLabError(f"unknown scenario {scenario!r}") from None
    return ExcitationConfig(mu=mu, sigma=sigma, n=n, seed=seed)


def _derivs(cfg: ThermalPlantConfig, t_air: float, t_wall: float,
            u: float, t_out: float, occupants: float) -> tuple[float, float]:
    d_air = ((t_wall - t_air) / cfg.r_aw
             + u * cfg.q_max * (cfg.t_supply - t_air)
             + occupants * cfg.q_person) / cfg.c_air
    d_wall = ((t_out - t_wall) / cfg.r_wo
              + (t_air - t_wall) / cfg.r_aw) / cfg.c_wall
    return d_air, d_wall


def step_plant(cfg: ThermalPlantConfig, state: PlantState, u: float,
               t_out: float, occupants: float) -> PlantState:
    """Advance one sample period with fixed-step RK4; u is saturated to [0, 1]."""
    u = min(max(u, 0.0), 1.0)
    h = cfg.ts / RK4_SUBSTEPS
    ta, tw = state.t_air, state.t_wall
    for _ in range(RK4_SUBSTEPS):
        k1a, k1w = _derivs(cfg, ta, tw, u, t_out, occupants)
        k2a, k2w = _derivs(cfg, ta + 0.5 * h * k1a, tw + 0.5 * h * k1w, u, t_out, occupants)
        k3a, k3w = _derivs(cfg, ta + 0.5 * h * k2a, tw + 0.5 * h * k2w, u, t_out, occupants)
        k4a, k4w = _derivs(cfg, ta + h * k3a, tw + h * k3w, u, t_out, occupants)
        ta += h * (k1a + 2.0 * k2a + 2.0 * k3a + k4a) / 6.0
        tw += h * (k1w + 2.0 * k2w + 2.0 * k3w + k4w) / 6.0
    return PlantState(t_air=ta, t_wall=tw)


def steady_state(cfg: ThermalPlantConfig, u: float, t_out: float,
                 occupants: float) -> PlantState:
    """Equilibrium temperatures under constant inputs (2x2 linear solve)."""
    u = min(max(u, 0.0), 1.0)
    a = np.array([
        [-(1.0 / cfg.r_aw + u * cfg.q_max), 1.0 / cfg.r_aw],
        [1.0 / cfg.r_aw, -(1.0 / cfg.r_wo + 1.0 / cfg.r_aw)],
    ])
    b = np.array([
        -u * cfg.q_max * cfg.t_supply - occupants * cfg.q_person,
        -t_out / cfg.r_wo,
    ])
    ta, tw = np.linalg.solve(a, b)
    return PlantState(t_air=float(ta), t_wall=float(tw))


def generate_excitation(cfg: ExcitationConfig, ts: float = DEFAULT_TS) -> SignalSeries:
    """n i.i.d. Gaussian draws clipped to [0, 1]; deterministic given the seed."""
    rng = np.random.default_rng(cfg.seed)
    u = np.clip(rng.normal(cfg.mu, cfg.sigma, cfg.n), 0.0, 1.0)
    return SignalSeries(u, ts)


def run_open_loop(cfg: ThermalPlantConfig, exc: SignalSeries,
                  traces: ExogenousTraces, init: PlantState) -> IoDataset:
    """Apply the (saturated) excitation and record the measured air temperature.

    y[t] is the temperature *before* u[t] acts, so the output responds to the
    input strictly causally.
    """
    n = len(exc)
    if n == 0:
        raise LengthTooShort("empty excitation")
    if len(traces) < n:
        raise LengthTooShort("exogenous traces shorter than excitation")
    u_applied = np.clip(exc.samples, 0.0, 1.0)
    y = np.empty(n)
    state = init
    t_out = traces.t_out.samples
    occ = traces.occupancy.samples
    for t in range(n):
        y[t] = state.t_air
        state = step_plant(cfg, state, float(u_applied[t]), float(t_out[t]), float(occ[t]))
    return IoDataset(
        u=SignalSeries(u_applied, exc.ts),
        y=SignalSeries(y, exc.ts),
    )


class _OnlineFilter:
    """Direct-form difference equation stepper for a proper tf."""

    def __init__(self, tf: RationalTransferFunction):
        if not tf.is_proper:
            raise VrftLabError("online filtering requires a proper tf")
        b, a = _lfilter_coeffs(tf)
        self.b = b
        self.a = a
        self.x_hist = [0.0] * len(b)
        self.y_hist = [0.0] * len(a)

    def step(self, x: float) -> float:
        self.x_hist.insert(0, x)
        self.x_hist.pop()
        y = sum(bi * xi for bi, xi in zip(self.b, self.x_hist))
        y -= sum(ai * yi for ai, yi in zip(self.a[1:], self.y_hist))
        self.y_hist.insert(0, y)
        self.y_hist.pop()
        return y


def run_closed_loop(cfg: ThermalPlantConfig, controller: RationalTransferFunction,
                    r: float, traces: ExogenousTraces, init: PlantState,
                    n: int) -> SignalSeries:
    """Track the setpoint r for n steps; returns the measured air temperature.

    The controller runs linearly on the tracking-error history and its output
    is saturated to [0, 1] before it reaches the plant.
    """
    if n > len(traces):
        raise LengthTooShort("exogenous traces shorter than requested horizon")
    filt = _OnlineFilter(controller)
    state = init
    t_out = traces.t_out.samples
    occ = traces.occupancy.samples
    y = np.empty(n)
    for t in range(n):
        y[t] = state.t_air
        e = r - state.t_air
        u = min(max(filt.step(e), 0.0), 1.0)
        try:
            state = step_plant(cfg, state, u, float(t_out[t]), float(occ[t]))
        except StateOutOfRange as exc:
            raise UnstableLoop(f"closed loop diverged at step {t}") from exc
    return SignalSeries(y, cfg.ts)


def generate_occupancy(weeks: int, seed: int, ts: float = DEFAULT_TS) -> SignalSeries:
    """Single-occupant weekly schedule with seeded jitter on transition times.

    Present overnight and in the evening on weekdays, longer presence on
    weekends; transitions move by up to +-2 samples per seeded draw.
    """
    if weeks < 1:
        raise VrftLabError("weeks must be >= 1")
    rng = np.random.default_rng(seed)
    spd = int(round(86400.0 / ts))  # samples per day
    n = weeks * 7 * spd
    occ = np.zeros(n)
    weekday_hours = [(0.0, 8.0), (18.0, 24.0)]
    weekend_hours = [(0.0, 10.0), (14.0, 24.0)]
    for day in range(weeks * 7):
        hours = weekday_hours if day % 7 < 5 else weekend_hours
        base = day * spd
        for h0, h1 in hours:
            j0 = int(rng.integers(-2, 3))
            j1 = int(rng.integers(-2, 3))
            i0 = base + int(round(h0 * 3600.0 / ts)) + (j0 if h0 > 0 else 0)
            i1 = base + int(round(h1 * 3600.0 / ts)) + (j1 if h1 < 24 else 0)
            occ[max(i0, 0):min(i1, n)] = 1.0
    return SignalSeries(occ, ts)


def generate_weather(n: int, seed: int, ts: float = DEFAULT_TS,
                     mean: float = -3.0, amplitude: float = 4.0,
                     ar_coeff: float = 0.95, ar_scale: float = 0.4) -> SignalSeries:
    """Synthetic Stockholm-winter outdoor temperature: daily sinusoid + AR(1)."""
    rng = np.random.default_rng(seed)
    t = np.arange(n) * ts
    base = mean + amplitude * np.sin(2.0 * np.pi * t / 86400.0 - np.pi / 2.0)
    noise = np.empty(n)
    x = 0.0
    innov = rng.standard_normal(n)
    for i in range(n):
        x = ar_coeff * x + ar_scale * innov[i]
        noise[i] = x
    return SignalSeries(base + noise, ts)


def constant_traces(n: int, t_out: float, occupants: float = 0.0,
                    ts: float = DEFAULT_TS) -> ExogenousTraces:
    return ExogenousTraces(
        t_out=SignalSeries(np.full(n, t_out), ts),
        occupancy=SignalSeries(np.full(n, occupants), ts),
    )


def winter_traces(n: int, seed: int, occupancy: SignalSeries | None = None,
                  ts: float = DEFAULT_TS) -> ExogenousTraces:
    """Seeded synthetic weather paired with a given (or empty) occupancy."""
    if occupancy is None:
        occupancy = SignalSeries(np.zeros(n), ts)
    if len(occupancy) < n:
        raise LengthTooShort("occupancy shorter than requested horizon")
    occ = SignalSeries(occupancy.samples[:n], ts)
    return ExogenousTraces(t_out=generate_weather(n, seed, ts), occupancy=occ)
