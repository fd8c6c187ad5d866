"""Time integrators for ``C u'' + B u' + A u = f(t)``.

Three steppers share one problem description:

* ``run_vector_scheme``: two-level weighted scheme for the pair
  ``(y, w)`` with ``w ~ C u' + B u``; any grid, any weight ``sigma >= 0``.
* ``run_three_level_uniform``: classical three-level weighted scheme,
  uniform grids only.
* ``run_three_level_nonuniform``: the ``sigma = 1/2`` vector scheme with ``w``
  eliminated, a three-level scheme in ``y`` with variable weight
  ``tau_{n+1} / (tau_n + tau_{n+1})``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .linops import NotSPDError, PolyOperator
from .timegrid import TimeGrid

RHS_SAMPLINGS = ("point", "average")

# (sigma, tau, rhs) -> solution of (C + sigma*tau*B + sigma^2*tau^2*A) y = rhs, or None
StepSolver = Callable[[float, float, np.ndarray], Optional[np.ndarray]]


class StepError(RuntimeError):
    def __init__(self, level: int, cause: Exception):
        super().__init__(f"time step to level {level} failed: {cause}")
        self.level = level


@dataclass(frozen=True, eq=False)
class SecondOrderProblem:
    A: PolyOperator
    B: PolyOperator
    C: PolyOperator
    u0: np.ndarray
    du0: np.ndarray
    rhs: Optional[Callable[[float], np.ndarray]] = None
    step_solver: Optional[StepSolver] = None

    def __post_init__(self):
        n = self.A.n
        if self.B.n != n or self.C.n != n:
            raise ValueError("A, B, C must share one dimension")
        for name in ("u0", "du0"):
            v = np.array(getattr(self, name), dtype=float).ravel()
            if v.size != n:
                raise ValueError(f"{name} has length {v.size}, expected {n}")
            v.flags.writeable = False
            object.__setattr__(self, name, v)
        for name in ("A", "B", "C"):
            if not getattr(self, name).is_spd():
                raise NotSPDError(f"operator {name} is not symmetric positive definite")

    @property
    def n(self) -> int:
        return self.A.n

    @property
    def homogeneous(self) -> bool:
        return self.rhs is None

    def f(self, t: float) -> np.ndarray:
        if self.rhs is None:
            return np.zeros(self.n)
        v = np.asarray(self.rhs(t), dtype=float)
        if v.shape != (self.n,):
            raise ValueError(f"rhs({t}) has shape {v.shape}, expected ({self.n},)")
        return v

    def step_operator(self, sigma: float, tau: float) -> PolyOperator:
        return self.C + (sigma * tau) * self.B + (sigma * sigma * tau * tau) * self.A


@dataclass(frozen=True)
class VectorState:
    y: np.ndarray
    w: np.ndarray
    t: float = 0.0


@dataclass(frozen=True, eq=False)
class Trajectory:
    grid: TimeGrid
    y: np.ndarray                      # (N+1, n)
    w: Optional[np.ndarray]            # (N+1, n) or None
    scheme: str
    sigma: float
    rhs_sampling: str = "point"
    flags: tuple = field(default=())

    @property
    def times(self) -> np.ndarray:
        return self.grid.levels

    @property
    def states(self) -> list[VectorState]:
        if self.w is None:
            raise ValueError(f"{self.scheme} trajectory carries no w component")
        return [VectorState(self.y[n], self.w[n], float(t))
                for n, t in enumerate(self.grid.levels)]


def init_vector_state(problem: SecondOrderProblem) -> VectorState:
    w0 = problem.C.apply(problem.du0) + problem.B.apply(problem.u0)
    return VectorState(problem.u0.copy(), w0, 0.0)


def sample_rhs(problem: SecondOrderProblem, t_n: float, tau: float, sigma: float,
               sampling: str = "point") -> np.ndarray:
    """Right-hand side attached to the step ``[t_n, t_n + tau]``.

    ``point`` evaluates ``f(t_n + sigma*tau)``; ``average`` returns
    ``sigma*f(t_n + tau) + (1 - sigma)*f(t_n)``.
    """
    if problem.rhs is None:
        return np.zeros(problem.n)
    if sampling == "point":
        return problem.f(t_n + sigma * tau)
    if sampling == "average":
        return sigma * problem.f(t_n + tau) + (1.0 - sigma) * problem.f(t_n)
    raise ValueError(f"unknown rhs sampling {sampling!r}")


def _step_solve(problem, sigma, tau, rhs, op=None):
    if problem.step_solver is not None:
        y = problem.step_solver(sigma, tau, rhs)
        if y is not None:
            return y
    if op is None:
        op = problem.step_operator(sigma, tau)
    return op.solve(rhs, check=sigma < 0.0)


def vector_step(problem: SecondOrderProblem, state: VectorState, tau: float, sigma: float,
                sampling: str = "point", op: Optional[PolyOperator] = None) -> VectorState:
    if not (tau > 0.0):
        raise ValueError("time step must be positive")
    y, w = state.y, state.w
    f = sample_rhs(problem, state.t, tau, sigma, sampling)
    s1 = (1.0 - sigma) * tau
    chi1 = w - s1 * problem.A.apply(y) + tau * f
    chi2 = problem.C.apply(y) - s1 * problem.B.apply(y) + s1 * w
    chi = (sigma * tau) * chi1 + chi2
    y1 = _step_solve(problem, sigma, tau, chi, op)
    w1 = chi1 - (sigma * tau) * problem.A.apply(y1)
    return VectorState(y1, w1, state.t + tau)


def vector_residuals(problem: SecondOrderProblem, s0: VectorState, s1: VectorState,
                     tau: float, sigma: float, sampling: str = "point"):
    """Residuals of the two component equations of one vector-scheme step."""
    ys = sigma * s1.y + (1.0 - sigma) * s0.y
    ws = sigma * s1.w + (1.0 - sigma) * s0.w
    r1 = problem.C.apply((s1.y - s0.y) / tau) + problem.B.apply(ys) - ws
    r2 = (s1.w - s0.w) / tau + problem.A.apply(ys) - sample_rhs(problem, s0.t, tau, sigma, sampling)
    return r1, r2


def run_vector_scheme(problem: SecondOrderProblem, grid: TimeGrid, sigma: float = 0.5,
                      sampling: str = "point") -> Trajectory:
    if sigma < 0.0:
        raise ValueError("weight sigma must be nonnegative")
    if sampling not in RHS_SAMPLINGS:
        raise ValueError(f"unknown rhs sampling {sampling!r}")
    flags = () if sigma >= 0.5 else ("sigma<0.5: no unconditional stability guarantee",)
    N = grid.N
    Y = np.empty((N + 1, problem.n))
    W = np.empty((N + 1, problem.n))
    state = init_vector_state(problem)
    Y[0], W[0] = state.y, state.w
    ops: dict[float, PolyOperator] = {}
    for n in range(N):
        tau = float(grid.steps[n])
        op = ops.get(tau)
        if op is None:
            op = ops[tau] = problem.step_operator(sigma, tau)
        try:
            state = vector_step(problem, VectorState(state.y, state.w, float(grid.levels[n])),
                                tau, sigma, sampling, op)
        except Exception as exc:
            raise StepError(n + 1, exc) from exc
        Y[n + 1], W[n + 1] = state.y, state.w
    return Trajectory(grid, Y, W, "vector", float(sigma), sampling, flags)


def run_three_level_uniform(problem: SecondOrderProblem, grid: TimeGrid,
                            sigma: float = 0.25, y1=None) -> Trajectory:
    """Three-level weighted scheme with ``f^n = f(t_n)``.

    The first level defaults to ``y^1 = u0 + tau*u0'``, which limits the
    global accuracy to first order whenever ``u''(0) != 0``; pass ``y1`` to
    start from a better value.
    """
    if not np.allclose(grid.steps, grid.steps[0], rtol=1e-12, atol=0.0):
        raise ValueError("the three-level weighted scheme needs a uniform grid")
    if grid.N < 2:
        raise ValueError("three-level schemes need N >= 2")
    if sigma < 0.0:
        raise ValueError("weight sigma must be nonnegative")
    flags = ()
    if sigma < 0.25:
        warnings.warn(f"sigma={sigma} < 1/4: three-level scheme not unconditionally stable",
                      stacklevel=2)
        flags = ("sigma<0.25: no unconditional stability guarantee",)
    tau = float(grid.T / grid.N)
    A, B, C = problem.A, problem.B, problem.C
    op = C + (0.5 * tau) * B + (sigma * tau * tau) * A
    N = grid.N
    Y = np.empty((N + 1, problem.n))
    Y[0] = problem.u0
    Y[1] = problem.u0 + tau * problem.du0 if y1 is None else y1
    for n in range(1, N):
        y, ym = Y[n], Y[n - 1]
        chi = (C.apply(2.0 * y - ym) + (0.5 * tau) * B.apply(ym)
               - (tau * tau) * A.apply((1.0 - 2.0 * sigma) * y + sigma * ym))
        if problem.rhs is not None:
            chi = chi + (tau * tau) * problem.f(float(grid.levels[n]))
        try:
            Y[n + 1] = op.solve(chi, check=False)
        except Exception as exc:
            raise StepError(n + 1, exc) from exc
    return Trajectory(grid, Y, None, "three-level-uniform", float(sigma), "point", flags)


def three_level_residual(problem: SecondOrderProblem, yp, y, ym, tau: float, sigma: float,
                         t_n: float) -> np.ndarray:
    """Residual of the uniform three-level equation at level ``n``."""
    ysig = sigma * yp + (1.0 - 2.0 * sigma) * y + sigma * ym
    return (problem.C.apply((yp - 2.0 * y + ym) / tau**2)
            + problem.B.apply((yp - ym) / (2.0 * tau))
            + problem.A.apply(ysig) - problem.f(t_n))


def variable_weight(tau_prev: float, tau_next: float) -> float:
    return tau_next / (tau_prev + tau_next)


def _midpoint_rhs(problem, t_n, tau, sampling):
    return sample_rhs(problem, t_n, tau, 0.5, sampling)


def run_three_level_nonuniform(problem: SecondOrderProblem, grid: TimeGrid,
                               sampling: str = "point") -> Trajectory:
    """Eliminated ``sigma = 1/2`` scheme on an arbitrary grid.

    The first level comes from one vector-scheme step.  After each level the
    ``w`` component is recovered from the first vector equation, so the
    returned trajectory carries it as well.
    """
    if grid.N < 2:
        raise ValueError("three-level schemes need N >= 2")
    if sampling not in RHS_SAMPLINGS:
        raise ValueError(f"unknown rhs sampling {sampling!r}")
    A, B, C = problem.A, problem.B, problem.C
    N = grid.N
    t = grid.levels
    Y = np.empty((N + 1, problem.n))
    W = np.empty((N + 1, problem.n))
    s0 = init_vector_state(problem)
    Y[0], W[0] = s0.y, s0.w
    try:
        s1 = vector_step(problem, s0, float(grid.steps[0]), 0.5, sampling)
    except Exception as exc:
        raise StepError(1, exc) from exc
    Y[1], W[1] = s1.y, s1.w
    ops: dict[float, PolyOperator] = {}
    for n in range(1, N):
        tm, tp = float(grid.steps[n - 1]), float(grid.steps[n])
        y, ym = Y[n], Y[n - 1]
        rhs = (C.apply(y + (tp / tm) * (y - ym)) + (0.5 * tp) * B.apply(ym)
               - (0.25 * tp) * A.apply((tm + tp) * y + tm * ym))
        if problem.rhs is not None:
            fp = _midpoint_rhs(problem, float(t[n]), tp, sampling)
            fm = _midpoint_rhs(problem, float(t[n - 1]), tm, sampling)
            rhs = rhs + (0.5 * tp) * (tp * fp + tm * fm)
        op = ops.get(tp)
        if op is None:
            op = ops[tp] = problem.step_operator(0.5, tp)
        try:
            Y[n + 1] = _step_solve(problem, 0.5, tp, rhs, op)
        except Exception as exc:
            raise StepError(n + 1, exc) from exc
        W[n + 1] = 2.0 * (C.apply((Y[n + 1] - y) / tp) + 0.5 * B.apply(Y[n + 1] + y)) - W[n]
    return Trajectory(grid, Y, W, "three-level-nonuniform", 0.5, sampling)


def nonuniform_residual(problem: SecondOrderProblem, yp, y, ym, tau_prev: float,
                        tau_next: float, t_prev: float, sampling: str = "point") -> np.ndarray:
    """Residual of the variable-weight three-level equation at level ``n``."""
    sb = variable_weight(tau_prev, tau_next)
    dp = (yp - y) / tau_next
    dm = (y - ym) / tau_prev
    r = (problem.C.apply(2.0 / (tau_prev + tau_next) * (dp - dm))
         + problem.B.apply(sb * dp + (1.0 - sb) * dm)
         + problem.A.apply(sb * 0.5 * (yp + y) + (1.0 - sb) * 0.5 * (y + ym)))
    if problem.rhs is not None:
        fp = _midpoint_rhs(problem, t_prev + tau_prev, tau_next, sampling)
        fm = _midpoint_rhs(problem, t_prev, tau_prev, sampling)
        r = r - (sb * fp + (1.0 - sb) * fm)
    return r


SCHEMES = ("vector", "three-level-uniform", "three-level-nonuniform")


def run_scheme(problem: SecondOrderProblem, grid: TimeGrid, scheme: str = "vector",
               sigma: float = 0.5, sampling: str = "point") -> Trajectory:
    if scheme == "vector":
        return run_vector_scheme(problem, grid, sigma, sampling)
    if scheme == "three-level-uniform":
        return run_three_level_uniform(problem, grid, sigma)
    if scheme == "three-level-nonuniform":
        if sigma != 0.5:
            raise ValueError("the eliminated non-uniform scheme is defined for sigma=0.5 only")
        return run_three_level_nonuniform(problem, grid, sampling)
    raise ValueError(f"unknown scheme {scheme!r}")
