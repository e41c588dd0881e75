"""Max-min data poisoning of the synthesis pipeline.

The attacker perturbs a pre-filtered training dataset with norm-bounded
signals (a_u, a_y) so that the gains fit on the poisoned data score as badly
as possible on the clean data. The inner fit has a closed-form least-squares
response, the outer maximization alternates a convex step in a_u (linearize
and move to the ball boundary, the convex-concave update for this geometry)
with projected gradient ascent in a_y, both with 20 random restarts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .errors import NotPrefiltered, RankDeficient, VrftLabError
from .lti import SignalSeries, _lfilter_coeffs
from .vrft import (
    ControllerParams,
    IoDataset,
    ReferenceModel,
    SynthesisResult,
    delayed_basis,
    fit_prefiltered,
    valid_slice,
    virtual_error_series,
)

DEFAULT_RESTARTS = 20
INPUT_STEP_MAX_ITER = 200
OUTPUT_STEP_MAX_ITER = 500
STEP_TOL = 1e-9
ARMIJO_C = 1e-4
BUDGET_SLACK = 1e-8


@dataclass(frozen=True)
class AttackBudget:
    """Relative perturbation budgets and their absolute l2 radii."""

    eps_u: float
    eps_y: float
    delta_u: float
    delta_y: float
    y_reference: str = "input_norm"

    def __post_init__(self):
        if not (0.0 <= self.eps_u <= 1.0 and 0.0 <= self.eps_y <= 1.0):
            raise VrftLabError("eps_u and eps_y must lie in [0, 1]")
        if self.delta_u < 0 or self.delta_y < 0:
            raise VrftLabError("budgets must be non-negative")


def make_budget(eps_u: float, eps_y: float, ds: IoDataset,
                y_reference: str = "input_norm") -> AttackBudget:
    """Scale the relative knobs by the dataset input norm.

    ``y_reference`` selects the norm that scales the output budget:
    ``input_norm`` is the literal convention used here by default,
    ``output_norm`` uses the output series instead.
    """
    norm_u = float(np.linalg.norm(ds.u.samples))
    if y_reference == "input_norm":
        ref_y = norm_u
    elif y_reference == "output_norm":
        ref_y = float(np.linalg.norm(ds.y.samples))
    else:
        raise VrftLabError(f"unknown y_reference {y_reference!r}")
    return AttackBudget(
        eps_u=eps_u, eps_y=eps_y,
        delta_u=eps_u * norm_u, delta_y=eps_y * ref_y,
        y_reference=y_reference,
    )


@dataclass(frozen=True)
class AttackResult:
    a_u: np.ndarray
    a_y: np.ndarray
    theta_clean: ControllerParams
    theta_poisoned: ControllerParams
    objective_trace: list[float]
    iterations: int
    restarts_used: int
    budget: AttackBudget
    seed: int

    def __post_init__(self):
        if np.linalg.norm(self.a_u) > self.budget.delta_u + BUDGET_SLACK:
            raise VrftLabError("a_u exceeds its budget")
        if np.linalg.norm(self.a_y) > self.budget.delta_y + BUDGET_SLACK:
            raise VrftLabError("a_y exceeds its budget")
        if any(b < a - 1e-12 for a, b in
               zip(self.objective_trace, self.objective_trace[1:])):
            raise VrftLabError("objective trace is not non-decreasing")


class AttackProblem:
    """Cached linear maps from (a_u, a_y) to the inner least-squares fit.

    Everything between the recorded sequences and the regressor is linear
    (inverse filtering, basis filtering, shifts, row selection), so the
    effect of a_y on the regressor is captured by three dense matrices and
    the effect of a_u on the target by an index shift.
    """

    def __init__(self, ds_clean: IoDataset, mr: ReferenceModel):
        if not ds_clean.prefiltered:
            raise NotPrefiltered("the attack operates on pre-filtered data")
        self.ds = ds_clean
        self.mr = mr
        n = len(ds_clean)
        self.n = n
        rows = valid_slice(n)
        self.row_u_idx = np.arange(rows.start, rows.stop) - 1  # target shift
        self.n_valid = self.row_u_idx.size

        # Columns of the identity pushed through the y -> regressor pipeline.
        # The virtual-error computation is linear in y (the settled initial
        # state is proportional to y[0]), so pushing unit vectors through the
        # very same library routine yields the exact dense maps.
        eye = np.eye(n)
        e_map = np.empty((n, n))
        for i in range(n):
            e_map[:, i] = virtual_error_series(
                SignalSeries(eye[:, i], ds_clean.ts), mr).samples
        self.col_maps = []
        for tf in delayed_basis(ds_clean.ts):
            b, a = _lfilter_coeffs(tf)
            self.col_maps.append(lfilter(b, a, e_map, axis=0)[rows, :])
        self.phi0 = np.column_stack([m @ ds_clean.y.samples for m in self.col_maps])
        self.t0 = np.concatenate([[0.0], ds_clean.u.samples[:-1]])[rows]

    # --- linear building blocks ---

    def phi_of(self, a_y: np.ndarray) -> np.ndarray:
        return np.column_stack([m @ a_y for m in self.col_maps])

    def target_shift(self, a_u: np.ndarray) -> np.ndarray:
        return np.asarray(a_u, dtype=float)[self.row_u_idx]

    def target_shift_adjoint(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n)
        out[self.row_u_idx] = v
        return out

    def _solve(self, phi: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        cond = np.linalg.cond(phi)
        if not np.isfinite(cond) or cond > 1e10:
            raise RankDeficient(f"poisoned regressor condition number {cond:.3e}")
        q, r = np.linalg.qr(phi)
        theta = np.linalg.solve(r, q.T @ t)
        return theta, r

    # --- objective and gradient ---

    def inner_theta(self, a_u: np.ndarray, a_y: np.ndarray) -> np.ndarray:
        phi = self.phi0 + self.phi_of(a_y)
        t = self.t0 + self.target_shift(a_u)
        theta, _ = self._solve(phi, t)
        return theta

    def clean_loss(self, theta: np.ndarray) -> float:
        resid = self.t0 - self.phi0 @ theta
        return float(resid @ resid / self.n_valid)

    def outer_objective(self, a_u: np.ndarray, a_y: np.ndarray) -> float:
        return self.clean_loss(self.inner_theta(a_u, a_y))

    def grad_outer(self, a_u: np.ndarray,
                   a_y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Analytic gradient of the clean-data loss through the inner fit."""
        phi = self.phi0 + self.phi_of(a_y)
        t = self.t0 + self.target_shift(a_u)
        theta, r = self._solve(phi, t)
        resid_clean = self.t0 - self.phi0 @ theta
        g = -2.0 * (self.phi0.T @ resid_clean) / self.n_valid
        # w = (phi^T phi)^{-1} g via the cached R factor
        w = np.linalg.solve(r, np.linalg.solve(r.T, g))
        q_vec = phi @ w
        grad_u = self.target_shift_adjoint(q_vec)
        resid_p = t - phi @ theta
        v = np.outer(w, resid_p) - np.outer(theta, q_vec)  # (3, n_valid)
        grad_y = sum(m.T @ v[k] for k, m in enumerate(self.col_maps))
        return grad_u, grad_y


def inner_solve(ds_poisoned: IoDataset, mr: ReferenceModel) -> SynthesisResult:
    """Learner best response on the (possibly poisoned) pre-filtered data."""
    if not ds_poisoned.prefiltered:
        raise NotPrefiltered("inner problem assumes pre-filtered data")
    return fit_prefiltered(ds_poisoned, mr)


def outer_objective(a_u: np.ndarray, a_y: np.ndarray, ds_clean: IoDataset,
                    mr: ReferenceModel) -> float:
    """Clean-data loss of the gains fit on the perturbed dataset."""
    return AttackProblem(ds_clean, mr).outer_objective(a_u, a_y)


def grad_outer(a_u: np.ndarray, a_y: np.ndarray, ds_clean: IoDataset,
               mr: ReferenceModel) -> tuple[np.ndarray, np.ndarray]:
    return AttackProblem(ds_clean, mr).grad_outer(a_u, a_y)


def _uniform_on_sphere(rng: np.random.Generator, dim: int, radius: float) -> np.ndarray:
    v = rng.standard_normal(dim)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        v = np.ones(dim)
        nv = np.linalg.norm(v)
    return radius * v / nv


def _uniform_in_ball(rng: np.random.Generator, dim: int, radius: float) -> np.ndarray:
    direction = _uniform_on_sphere(rng, dim, 1.0)
    return radius * rng.uniform() ** (1.0 / dim) * direction


def _project_ball(x: np.ndarray, radius: float) -> np.ndarray:
    nx = np.linalg.norm(x)
    if nx <= radius or nx == 0.0:
        return x
    return (radius / nx) * x


def input_step(problem: AttackProblem, a_y: np.ndarray, budget: AttackBudget,
               rng: np.random.Generator, restarts: int = DEFAULT_RESTARTS,
               a_u_init: np.ndarray | None = None,
               subspace: np.ndarray | None = None,
               max_iter: int = INPUT_STEP_MAX_ITER) -> np.ndarray:
    """Maximize the (convex in a_u) outer objective over the input ball.

    Fixed-point iteration: linearize at the current point and jump to the
    boundary point that maximizes the linearization; monotone for a convex
    objective, so every restart terminates on the boundary. ``subspace``
    (orthonormal columns) restricts the perturbation for oracle testing.
    """
    dim = problem.n if subspace is None else subspace.shape[1]
    embed = (lambda c: c) if subspace is None else (lambda c: subspace @ c)
    restrict = (lambda g: g) if subspace is None else (lambda g: subspace.T @ g)
    delta = budget.delta_u
    if delta == 0.0:
        return np.zeros(problem.n)

    def fval(c):
        return problem.outer_objective(embed(c), a_y)

    def fgrad(c):
        return restrict(problem.grad_outer(embed(c), a_y)[0])

    starts = [_uniform_on_sphere(rng, dim, delta) for _ in range(restarts)]
    if a_u_init is not None:
        starts.append(restrict(np.asarray(a_u_init, dtype=float)))
    best_c, best_f = None, -np.inf
    for c in starts:
        f = fval(c)
        for _ in range(max_iter):
            g = fgrad(c)
            ng = np.linalg.norm(g)
            if ng == 0.0:
                break
            c_new = delta * g / ng
            f_new = fval(c_new)
            if f_new <= f + STEP_TOL:
                c, f = c_new, max(f, f_new)
                break
            c, f = c_new, f_new
        if f > best_f:
            best_c, best_f = c, f
    return embed(best_c)


def output_step(problem: AttackProblem, a_u: np.ndarray, budget: AttackBudget,
                rng: np.random.Generator, restarts: int = DEFAULT_RESTARTS,
                a_y_init: np.ndarray | None = None,
                subspace: np.ndarray | None = None,
                max_iter: int = OUTPUT_STEP_MAX_ITER) -> np.ndarray:
    """Projected gradient ascent over the output ball (non-convex direction).

    Backtracking line search with an Armijo-style increase test, Euclidean
    projection after every step, best over ``restarts`` initial points drawn
    uniformly in the ball.
    """
    dim = problem.n if subspace is None else subspace.shape[1]
    embed = (lambda c: c) if subspace is None else (lambda c: subspace @ c)
    restrict = (lambda g: g) if subspace is None else (lambda g: subspace.T @ g)
    delta = budget.delta_y
    if delta == 0.0:
        return np.zeros(problem.n)

    def fval(c):
        return problem.outer_objective(a_u, embed(c))

    def fgrad(c):
        return restrict(problem.grad_outer(a_u, embed(c))[1])

    starts = [_uniform_in_ball(rng, dim, delta) for _ in range(restarts)]
    if a_y_init is not None:
        starts.append(_project_ball(restrict(np.asarray(a_y_init, dtype=float)), delta))
    best_c, best_f = None, -np.inf
    for c in starts:
        f = fval(c)
        for _ in range(max_iter):
            g = fgrad(c)
            ng = np.linalg.norm(g)
            if ng == 0.0:
                break
            step = 0.1 * delta / ng
            improved = False
            for _ in range(30):
                c_new = _project_ball(c + step * g, delta)
                f_new = fval(c_new)
                if f_new >= f + ARMIJO_C * step * ng * ng:
                    improved = True
                    break
                step *= 0.5
            if not improved:
                break
            gain = f_new - f
            c, f = c_new, f_new
            if gain < STEP_TOL:
                break
        if f > best_f:
            best_c, best_f = c, f
    return embed(best_c)


def run_attack(ds_clean: IoDataset, mr: ReferenceModel, budget: AttackBudget,
               eta: float | None = None, max_iter: int = 50, seed: int = 0,
               restarts: int = DEFAULT_RESTARTS) -> AttackResult:
    """Alternating max-min poisoning with an improvement stopping rule.

    Each iteration solves the input direction first, then the output
    direction, then re-fits the inner problem. Iterates that lower the outer
    objective are rejected (the trace is non-decreasing by construction) and
    the loop stops once the improvement drops to ``eta``, which defaults to
    1e-4 * (1 + clean loss).
    """
    problem = AttackProblem(ds_clean, mr)
    clean_fit = inner_solve(ds_clean, mr)
    theta_clean = clean_fit.controller
    j0 = problem.clean_loss(theta_clean.theta)
    if eta is None:
        eta = 1e-4 * (1.0 + j0)
    if not eta > 0:
        raise VrftLabError("eta must be positive")

    a_u = np.zeros(problem.n)
    a_y = np.zeros(problem.n)
    trace = [j0]
    restarts_used = 0
    iterations = 0
    for i in range(max_iter):
        rng_u = np.random.default_rng(np.random.SeedSequence((seed, i, 0)))
        rng_y = np.random.default_rng(np.random.SeedSequence((seed, i, 1)))
        try:
            a_u_new = input_step(problem, a_y, budget, rng_u,
                                 restarts=restarts, a_u_init=a_u)
            a_y_new = output_step(problem, a_u_new, budget, rng_y,
                                  restarts=restarts, a_y_init=a_y)
            j_new = problem.outer_objective(a_u_new, a_y_new)
        except RankDeficient:
            break  # excitation destroyed; keep best-so-far
        restarts_used += 2 * restarts
        if j_new < trace[-1]:
            break  # reject a non-improving iterate and stop
        a_u, a_y = a_u_new, a_y_new
        trace.append(j_new)
        iterations = i + 1
        if trace[-1] - trace[-2] <= eta:
            break

    if iterations == 0:
        theta_poisoned = theta_clean
    else:
        poisoned = poisoned_dataset(ds_clean, a_u, a_y)
        theta_poisoned = inner_solve(poisoned, mr).controller
    return AttackResult(
        a_u=a_u, a_y=a_y,
        theta_clean=theta_clean, theta_poisoned=theta_poisoned,
        objective_trace=trace, iterations=iterations,
        restarts_used=restarts_used, budget=budget, seed=seed,
    )


def poisoned_dataset(ds_clean: IoDataset, a_u: np.ndarray,
                     a_y: np.ndarray) -> IoDataset:
    meta = dict(ds_clean.meta)
    meta["poisoned"] = True
    return IoDataset(
        u=SignalSeries(ds_clean.u.samples + a_u, ds_clean.ts),
        y=SignalSeries(ds_clean.y.samples + a_y, ds_clean.ts),
        meta=meta,
        prefiltered=ds_clean.prefiltered,
    )
