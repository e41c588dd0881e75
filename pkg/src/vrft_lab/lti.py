"""Discrete-time rational transfer-function algebra and filtering.

Coefficients are stored in descending powers of z. All values are immutable
after construction and every operation is a pure function, so they are safe
to share across workers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter, lfilter_zi

from .errors import (
    ImproperFilter,
    PoleOnUnitCircle,
    SamplePeriodMismatch,
    UnstableInversionWarning,
    UnstableSystem,
    VrftLabError,
    ZeroDenominator,
)

_trapezoid = getattr(np, "trapezoid", np.trapz)

STABILITY_TOL = 1e-9     # pole modulus margin
REDUCE_TOL = 1e-10       # coefficient tolerance for explicit cancellation
DEFAULT_H2_GRID = 8192


def _as_poly(coeffs) -> np.ndarray:
    c = np.atleast_1d(np.asarray(coeffs, dtype=float)).ravel()
    if c.size == 0:
        return np.zeros(1)
    nz = np.flatnonzero(c)
    if nz.size == 0:
        return np.zeros(1)
    return c[nz[0]:]


@dataclass(frozen=True)
class SignalSeries:
    """A uniformly sampled real-valued signal."""

    samples: np.ndarray
    ts: float

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float).ravel()
        if not np.all(np.isfinite(s)):
            raise VrftLabError("SignalSeries samples must be finite")
        if not self.ts > 0:
            raise VrftLabError("SignalSeries sample period must be positive")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return self.samples.size

    def __add__(self, other: "SignalSeries") -> "SignalSeries":
        _check_ts(self.ts, other.ts)
        return SignalSeries(self.samples + other.samples, self.ts)

    def __sub__(self, other: "SignalSeries") -> "SignalSeries":
        _check_ts(self.ts, other.ts)
        return SignalSeries(self.samples - other.samples, self.ts)

    def __rmul__(self, c: float) -> "SignalSeries":
        return SignalSeries(float(c) * self.samples, self.ts)


@dataclass(frozen=True)
class RationalTransferFunction:
    """Rational operator num(z)/den(z) at sample period ts.

    The denominator is normalized to be monic; common factors are never
    cancelled implicitly (see :func:`reduce_tf`).
    """

    num: np.ndarray
    den: np.ndarray
    ts: float

    def __post_init__(self):
        num = _as_poly(self.num)
        den = _as_poly(self.den)
        if np.all(den == 0.0):
            raise ZeroDenominator("denominator is identically zero")
        if not self.ts > 0:
            raise VrftLabError("sample period must be positive")
        lead = den[0]
        num = num / lead
        den = den / lead
        num.setflags(write=False)
        den.setflags(write=False)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @property
    def num_degree(self) -> int:
        return self.num.size - 1

    @property
    def den_degree(self) -> int:
        return self.den.size - 1

    @property
    def relative_degree(self) -> int:
        return self.den_degree - self.num_degree

    @property
    def is_proper(self) -> bool:
        return self.num_degree <= self.den_degree

    def poles(self) -> np.ndarray:
        # companion-matrix eigenvalues via np.roots
        return np.roots(self.den) if self.den.size > 1 else np.zeros(0)

    def zeros(self) -> np.ndarray:
        if np.all(self.num == 0.0):
            return np.zeros(0)
        return np.roots(self.num) if self.num.size > 1 else np.zeros(0)

    def __neg__(self) -> "RationalTransferFunction":
        return RationalTransferFunction(-self.num, self.den, self.ts)


@dataclass(frozen=True)
class StateSpace:
    """State-space model (A, B, C, D); used only for diagnostic LTI plants."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray = field(default_factory=lambda: np.zeros((1, 1)))

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        b = np.atleast_2d(np.asarray(self.b, dtype=float))
        c = np.atleast_2d(np.asarray(self.c, dtype=float))
        d = np.atleast_2d(np.asarray(self.d, dtype=float))
        n = a.shape[0]
        if a.shape != (n, n):
            raise VrftLabError("A must be square")
        if b.shape[0] != n or c.shape[1] != n:
            raise VrftLabError("B/C dimensions must conform with A")
        if d.shape != (c.shape[0], b.shape[1]):
            raise VrftLabError("D dimensions must conform with B and C")
        for name, m in (("a", a), ("b", b), ("c", c), ("d", d)):
            m.setflags(write=False)
            object.__setattr__(self, name, m)


def ss_to_tf(ss: StateSpace, ts: float) -> RationalTransferFunction:
    """SISO realization G(z) = C(zI-A)^{-1}B + D as a rational function."""
    if ss.b.shape[1] != 1 or ss.c.shape[0] != 1:
        raise VrftLabError("ss_to_tf supports SISO systems only")
    den = np.poly(ss.a)
    # det(zI - A + BC) = den(z) * (1 + C(zI-A)^{-1}B)
    num = np.poly(ss.a - ss.b @ ss.c) - den + float(ss.d[0, 0]) * den
    return RationalTransferFunction(num, den, ts)


def constant_tf(c: float, ts: float) -> RationalTransferFunction:
    return RationalTransferFunction([float(c)], [1.0], ts)


def _check_ts(ts_a: float, ts_b: float) -> None:
    if abs(ts_a - ts_b) > 1e-12 * max(ts_a, ts_b):
        raise SamplePeriodMismatch(f"sample periods differ: {ts_a} vs {ts_b}")


def _lfilter_coeffs(tf: RationalTransferFunction) -> tuple[np.ndarray, np.ndarray]:
    """(b, a) in powers of z^{-1} for a proper tf."""
    pad = tf.den.size - tf.num.size
    b = np.concatenate([np.zeros(pad), tf.num])
    return b, tf.den.copy()


def simulate_filter(tf: RationalTransferFunction, inp: SignalSeries,
                    settle: bool = False) -> SignalSeries:
    """Run the causal difference equation den*y = num*u.

    With ``settle=False`` the filter starts from zero internal state. With
    ``settle=True`` the state is seeded as if the input had been held at its
    first sample forever, which suppresses the startup transient on records
    that begin at an operating point (requires a strictly stable filter).
    The settled output is still a linear function of the input.
    """
    if not tf.is_proper:
        raise ImproperFilter(
            f"deg(num)={tf.num_degree} > deg(den)={tf.den_degree}")
    _check_ts(tf.ts, inp.ts)
    b, a = _lfilter_coeffs(tf)
    if settle:
        zi = lfilter_zi(b, a) * inp.samples[0]
        out, _ = lfilter(b, a, inp.samples, zi=zi)
    else:
        out = lfilter(b, a, inp.samples)
    return SignalSeries(out, inp.ts)


def inverse_filter(tf: RationalTransferFunction, output: SignalSeries,
                   settle: bool = False) -> SignalSeries:
    """Offline (non-causal) solve for s with simulate_filter(tf, s) == output.

    For a tf of relative degree d > 0 the solve runs the inverse difference
    equation with the advance realized as an index shift; the trailing d
    samples of the result do not influence the observed output and the
    leading samples inherit the initial-state assumption, so callers must
    treat the edges as extrapolation artifacts. ``settle=True`` seeds the
    inverse recursion as if the record had been held at its first sample
    forever and continues it at its last sample, matching records that start
    at an operating point; the result stays linear in ``output``.
    """
    _check_ts(tf.ts, output.ts)
    if np.all(tf.num == 0.0):
        raise ZeroDenominator("cannot invert a zero transfer function")
    zs = tf.zeros()
    if zs.size and np.max(np.abs(zs)) >= 1.0 - STABILITY_TOL:
        warnings.warn(
            "inverting a transfer function with zeros on/outside the unit "
            "circle; the inverse recursion may diverge",
            UnstableInversionWarning,
            stacklevel=2,
        )
    d = tf.relative_degree
    inv = RationalTransferFunction(tf.den, tf.num, tf.ts)
    if d <= 0:
        return simulate_filter(inv, output, settle=settle)
    pad_value = output.samples[-1] if settle else 0.0
    padded = np.concatenate([output.samples, np.full(d, pad_value)])
    b, a = _lfilter_coeffs_improper(inv)
    if settle:
        zi = lfilter_zi(b, a) * padded[0]
        w, _ = lfilter(b, a, padded, zi=zi)
    else:
        w = lfilter(b, a, padded)
    return SignalSeries(w[d:], output.ts)


def _lfilter_coeffs_improper(tf: RationalTransferFunction) -> tuple[np.ndarray, np.ndarray]:
    """(b, a) realizing z^{-d} * tf for an improper tf (d = numerator excess)."""
    return tf.num.copy(), tf.den.copy()


def tf_add(a: RationalTransferFunction, b: RationalTransferFunction) -> RationalTransferFunction:
    _check_ts(a.ts, b.ts)
    num = np.polyadd(np.polymul(a.num, b.den), np.polymul(b.num, a.den))
    return RationalTransferFunction(num, np.polymul(a.den, b.den), a.ts)


def tf_sub(a: RationalTransferFunction, b: RationalTransferFunction) -> RationalTransferFunction:
    return tf_add(a, -b)


def tf_mul(a: RationalTransferFunction, b: RationalTransferFunction) -> RationalTransferFunction:
    _check_ts(a.ts, b.ts)
    return RationalTransferFunction(
        np.polymul(a.num, b.num), np.polymul(a.den, b.den), a.ts)


def tf_feedback(g: RationalTransferFunction, k: RationalTransferFunction) -> RationalTransferFunction:
    """Closed loop GK/(1+GK) for a scalar unity-feedback loop."""
    _check_ts(g.ts, k.ts)
    num = np.polymul(g.num, k.num)
    den = np.polyadd(np.polymul(g.den, k.den), num)
    return RationalTransferFunction(num, den, g.ts)


def tf_arith(a: RationalTransferFunction, b: RationalTransferFunction,
             op: str) -> RationalTransferFunction:
    """Dispatching wrapper over add/mul/feedback."""
    try:
        fn = {"add": tf_add, "mul": tf_mul, "feedback": tf_feedback}[op]
    except KeyError:
        raise VrftLabError(f"unknown operation {op!r}") from None
    return fn(a, b)


def reduce_tf(tf: RationalTransferFunction, tol: float = REDUCE_TOL) -> RationalTransferFunction:
    """Explicitly cancel matching pole/zero pairs.

    Cancellation is intentionally not automatic anywhere else: silent
    cancellation masks modeling errors. Matching is done on roots with a
    tolerance derived from ``tol`` (roots of low-degree polynomials here are
    well conditioned).
    """
    if np.all(tf.num == 0.0):
        return RationalTransferFunction([0.0], [1.0], tf.ts)
    gain = tf.num[0]
    zs = list(tf.zeros())
    ps = list(tf.poles())
    root_tol = max(tol, 1e-8)
    kept_p = []
    for p in ps:
        hit = None
        for i, zz in enumerate(zs):
            if abs(p - zz) <= root_tol * max(1.0, abs(p)):
                hit = i
                break
        if hit is None:
            kept_p.append(p)
        else:
            zs.pop(hit)
    num = np.real_if_close(gain * np.poly(zs) if zs else np.array([gain]), tol=1000)
    den = np.real_if_close(np.poly(kept_p) if kept_p else np.array([1.0]), tol=1000)
    return RationalTransferFunction(np.real(num), np.real(den), tf.ts)


def frequency_response(tf: RationalTransferFunction, omega: float) -> complex:
    """Evaluate the tf at z = exp(j*omega*ts); omega in rad/s."""
    z = np.exp(1j * omega * tf.ts)
    den_val = np.polyval(tf.den, z)
    scale = np.sum(np.abs(tf.den))
    if abs(den_val) < 1e-12 * max(scale, 1.0):
        raise PoleOnUnitCircle(f"pole at omega={omega} rad/s")
    return complex(np.polyval(tf.num, z) / den_val)


def frequency_response_grid(tf: RationalTransferFunction,
                            thetas: np.ndarray) -> np.ndarray:
    """Vectorized evaluation at z = exp(j*theta); theta is omega*ts."""
    z = np.exp(1j * np.asarray(thetas, dtype=float))
    return np.polyval(tf.num, z) / np.polyval(tf.den, z)


def is_stable(tf: RationalTransferFunction, rho_tol: float = STABILITY_TOL) -> bool:
    """True iff every pole has modulus < 1 - rho_tol."""
    ps = tf.poles()
    if ps.size == 0:
        return True
    return bool(np.max(np.abs(ps)) < 1.0 - rho_tol)


def h2_norm_sq(tf: RationalTransferFunction,
               grid_size: int = DEFAULT_H2_GRID) -> float:
    """(1/2pi) * integral of |tf(e^{jw})|^2 over [-pi, pi].

    Trapezoid quadrature on a uniform grid; conjugate symmetry lets us
    integrate over [0, pi] and double.
    """
    if not is_stable(tf):
        raise UnstableSystem("H2 norm requires a stable transfer function")
    thetas = np.linspace(0.0, np.pi, grid_size // 2 + 1)
    vals = np.abs(frequency_response_grid(tf, thetas)) ** 2
    return float(_trapezoid(vals, thetas) / np.pi)
