"""Controller synthesis from input-output data.

The pipeline: build the desired closed-loop reference model, pre-filter the
recorded data, compute the virtual tracking error offline, regress the
recorded input on the PID basis applied to that error, and solve the least
squares problem for the controller gains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AlreadyPrefiltered,
    DegenerateBandwidth,
    LengthTooShort,
    RankDeficient,
    SamplePeriodMismatch,
    VrftLabError,
)
from .lti import (
    RationalTransferFunction,
    SignalSeries,
    frequency_response_grid,
    inverse_filter,
    is_stable,
    reduce_tf,
    simulate_filter,
    tf_feedback,
)

# Regressor edge policy: the leading rows absorb the unknown-initial-state
# transient of the virtual-error computation and the basis realization shift;
# the final row touches virtual-error samples that the recorded output does
# not determine.
HEAD_DROP = 3
TAIL_DROP = 1
MIN_DATASET_LEN = HEAD_DROP + TAIL_DROP + 3  # at least as many rows as gains

COND_LIMIT = 1e10
N_GAINS = 3


@dataclass(frozen=True)
class IoDataset:
    """Paired input/output records from one open-loop experiment."""

    u: SignalSeries
    y: SignalSeries
    meta: dict = field(default_factory=dict)
    prefiltered: bool = False

    def __post_init__(self):
        if abs(self.u.ts - self.y.ts) > 1e-12 * self.u.ts:
            raise SamplePeriodMismatch("u and y sample periods differ")
        if len(self.u) != len(self.y):
            raise VrftLabError("u and y must have equal length")
        if len(self.u) < MIN_DATASET_LEN:
            raise LengthTooShort(
                f"dataset needs at least {MIN_DATASET_LEN} samples, got {len(self.u)}")

    @property
    def ts(self) -> float:
        return self.u.ts

    def __len__(self) -> int:
        return len(self.u)


@dataclass(frozen=True)
class ReferenceModel:
    """Second-order target closed loop with a double real pole and unit DC gain."""

    omega0: float
    ts: float
    lam: float
    tf: RationalTransferFunction


def make_reference_model(omega0: float, ts: float) -> ReferenceModel:
    if not (omega0 > 0 and ts > 0):
        raise VrftLabError("omega0 and ts must be positive")
    if ts * omega0 >= 10:
        raise VrftLabError("ts*omega0 too large; pole collapses to the origin")
    lam = math.exp(-ts * omega0)
    if lam >= 1.0 - 1e-12:
        raise DegenerateBandwidth(f"pole {lam} too close to the unit circle")
    tf = RationalTransferFunction(
        [(1.0 - lam) ** 2], [1.0, -2.0 * lam, lam ** 2], ts)
    return ReferenceModel(omega0=omega0, ts=ts, lam=lam, tf=tf)


def make_prefilter(mr: ReferenceModel) -> RationalTransferFunction:
    """Data pre-filter (1 - M)*M built from the reference model M."""
    num_m, den_m = mr.tf.num, mr.tf.den
    one_minus = np.polysub(den_m, np.concatenate(
        [np.zeros(den_m.size - num_m.size), num_m]))
    tf = RationalTransferFunction(
        np.polymul(one_minus, num_m), np.polymul(den_m, den_m), mr.ts)
    return reduce_tf(tf)


@dataclass(frozen=True)
class ControllerParams:
    """PID gains over the fixed discrete-time basis z^{1-k}/(z-1), k=1..3."""

    theta: np.ndarray
    ts: float

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=float).ravel()
        if th.size != N_GAINS or not np.all(np.isfinite(th)):
            raise VrftLabError("theta must be a finite vector of length 3")
        th.setflags(write=False)
        object.__setattr__(self, "theta", th)

    def basis(self) -> list[RationalTransferFunction]:
        z_minus_1 = [1.0, -1.0]
        return [
            RationalTransferFunction([1.0, 0.0], z_minus_1, self.ts),
            RationalTransferFunction([1.0], z_minus_1, self.ts),
            RationalTransferFunction([1.0], [1.0, -1.0, 0.0], self.ts),
        ]


def realize_controller(cp: ControllerParams) -> RationalTransferFunction:
    """Common-denominator form (t1*z^2 + t2*z + t3) / (z*(z-1))."""
    return RationalTransferFunction(cp.theta, [1.0, -1.0, 0.0], cp.ts)


def delayed_basis(ts: float) -> list[RationalTransferFunction]:
    """One-sample-delayed basis realizations, proper for causal simulation.

    The delay is compensated by shifting the regression target identically
    (see :func:`target_vector`), which leaves the least-squares problem
    unchanged.
    """
    return [
        RationalTransferFunction([1.0], [1.0, -1.0], ts),
        RationalTransferFunction([1.0], [1.0, -1.0, 0.0], ts),
        RationalTransferFunction([1.0], [1.0, -1.0, 0.0, 0.0], ts),
    ]


def valid_slice(n: int) -> slice:
    return slice(HEAD_DROP, n - TAIL_DROP)


def virtual_error_series(y: SignalSeries, mr: ReferenceModel) -> SignalSeries:
    """e = (M^{-1} - 1) applied to y, computed offline.

    The inverse filter is anchored at the record's first sample so that a
    record starting at an operating point produces no startup transient.
    """
    r = inverse_filter(mr.tf, y, settle=True)
    return r - y


def virtual_error(ds: IoDataset, mr: ReferenceModel) -> SignalSeries:
    if abs(ds.ts - mr.ts) > 1e-12 * ds.ts:
        raise SamplePeriodMismatch("dataset and reference model ts differ")
    return virtual_error_series(ds.y, mr)


def build_regressor(e: SignalSeries,
                    basis: list[RationalTransferFunction] | None = None) -> np.ndarray:
    """Regressor matrix: basis columns applied to e, restricted to valid rows."""
    if basis is None:
        basis = delayed_basis(e.ts)
    cols = [simulate_filter(b, e).samples for b in basis]
    phi = np.column_stack(cols)
    return phi[valid_slice(len(e))]


def target_vector(u: SignalSeries) -> np.ndarray:
    """One-sample-delayed input, restricted to the same valid rows."""
    shifted = np.concatenate([[0.0], u.samples[:-1]])
    return shifted[valid_slice(len(u))]


@dataclass(frozen=True)
class ThetaFit:
    theta: np.ndarray
    loss: float
    cond: float


def solve_theta(phi: np.ndarray, u: np.ndarray) -> ThetaFit:
    """Least-squares gains via QR, with the mean-square residual loss.

    Raises RankDeficient when the regressor condition number exceeds 1e10,
    which in practice flags unexciting experiments.
    """
    phi = np.asarray(phi, dtype=float)
    u = np.asarray(u, dtype=float).ravel()
    if phi.ndim != 2 or phi.shape[0] != u.size:
        raise VrftLabError("phi and u have incompatible shapes")
    if phi.shape[0] < phi.shape[1]:
        raise RankDeficient("fewer rows than parameters")
    cond = float(np.linalg.cond(phi))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise RankDeficient(f"regressor condition number {cond:.3e}")
    q, r = np.linalg.qr(phi)
    theta = np.linalg.solve(r, q.T @ u)
    resid = u - phi @ theta
    loss = float(resid @ resid / u.size)
    return ThetaFit(theta=theta, loss=loss, cond=cond)


def jvr_loss(theta: np.ndarray, phi: np.ndarray, u: np.ndarray) -> float:
    """Mean-square input-matching loss for arbitrary gains."""
    resid = np.asarray(u).ravel() - np.asarray(phi) @ np.asarray(theta).ravel()
    return float(resid @ resid / resid.size)


def prefilter_dataset(ds: IoDataset, mr: ReferenceModel) -> IoDataset:
    """Apply the pre-filter to both channels; refuses to filter twice."""
    if ds.prefiltered:
        raise AlreadyPrefiltered("dataset is already pre-filtered")
    lf = make_prefilter(mr)
    meta = dict(ds.meta)
    # settled filtering: measured records start at an operating point, and a
    # zero-state startup transient would leak permanently into the integrator
    # basis columns and bias the fit at short record lengths
    return IoDataset(
        u=simulate_filter(lf, ds.u, settle=True),
        y=simulate_filter(lf, ds.y, settle=True),
        meta=meta,
        prefiltered=True,
    )


@dataclass(frozen=True)
class SynthesisResult:
    controller: ControllerParams
    loss: float
    cond: float


def fit_prefiltered(ds: IoDataset, mr: ReferenceModel) -> SynthesisResult:
    """Regressor assembly + LS solve on data that is already pre-filtered."""
    e = virtual_error(ds, mr)
    phi = build_regressor(e)
    fit = solve_theta(phi, target_vector(ds.u))
    return SynthesisResult(
        controller=ControllerParams(fit.theta, ds.ts),
        loss=fit.loss,
        cond=fit.cond,
    )


def synthesize(ds: IoDataset, mr: ReferenceModel) -> SynthesisResult:
    """Full pipeline on raw data: pre-filter, virtual error, regress, solve."""
    if ds.prefiltered:
        raise AlreadyPrefiltered(
            "synthesize expects raw data; use fit_prefiltered instead")
    return fit_prefiltered(prefilter_dataset(ds, mr), mr)


def model_reference_gap(g: RationalTransferFunction, cp: ControllerParams,
                        mr: ReferenceModel, grid_size: int = 8192) -> float:
    """Squared H2 distance between the reference model and the achieved loop.

    Only meaningful for known LTI plants. Returns +inf when the closed loop
    is unstable.
    """
    k = realize_controller(cp)
    closed = tf_feedback(g, k)
    if not is_stable(reduce_tf(closed)):
        return math.inf
    thetas = np.linspace(0.0, np.pi, grid_size // 2 + 1)
    delta = (frequency_response_grid(mr.tf, thetas)
             - frequency_response_grid(closed, thetas))
    return float(getattr(np, "trapezoid", np.trapz)(np.abs(delta) ** 2, thetas)
                 / np.pi)
