"""1D bi-parabolic test problem ``(d/dt + D)u + alpha (d/dt + D)^2 u = 0``.

``D`` is the Dirichlet grid Laplacian on the interior nodes of a uniform
mesh of [0, 1].  As a second-order equation the problem has
``C = alpha I``, ``B = I + 2 alpha D``, ``A = D + alpha D^2`` and initial
data ``u(0) = ramp``, ``u'(0) = 0``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.fft import dst

from .linops import PolyOperator, SymTridiag, shifted_solve
from .schemes import SecondOrderProblem
from .timegrid import fmt


def _mesh_size(h: float) -> int:
    M = round(1.0 / h)
    if M < 2 or abs(M * h - 1.0) > 1e-9:
        raise ValueError(f"1/h must be an integer >= 2, got h={h!r}")
    return M


def build_laplacian(h: float) -> SymTridiag:
    M = _mesh_size(h)
    n = M - 1
    return SymTridiag(np.full(n, 2.0 / h**2), np.full(n - 1, -1.0 / h**2))


def nodes(h: float) -> np.ndarray:
    M = _mesh_size(h)
    return np.arange(1, M) / M


def ramp_initial(h: float) -> np.ndarray:
    x = nodes(h)
    return np.where(x <= 0.5, x, 0.0)


def laplacian_eigenvalues(h: float) -> np.ndarray:
    M = _mesh_size(h)
    k = np.arange(1, M)
    return 4.0 / h**2 * np.sin(k * np.pi / (2 * M)) ** 2


@dataclass(frozen=True, eq=False)
class BiparabolicProblem:
    alpha: float
    h: float
    u0: np.ndarray = field(default=None)
    D: SymTridiag = field(init=False, repr=False)

    def __post_init__(self):
        if self.alpha < 0.0:
            raise ValueError("alpha must be nonnegative")
        D = build_laplacian(self.h)
        object.__setattr__(self, "D", D)
        u0 = ramp_initial(self.h) if self.u0 is None else np.asarray(self.u0, dtype=float)
        if u0.shape != (D.n,):
            raise ValueError(f"u0 must have {D.n} entries")
        object.__setattr__(self, "u0", u0)

    @property
    def M(self) -> int:
        return self.D.n + 1

    @property
    def x(self) -> np.ndarray:
        return nodes(self.h)

    @cached_property
    def C(self) -> PolyOperator:
        return PolyOperator(self.D, c0=self.alpha)

    @cached_property
    def B(self) -> PolyOperator:
        return PolyOperator(self.D, c0=1.0, c1=2.0 * self.alpha)

    @cached_property
    def A(self) -> PolyOperator:
        return PolyOperator(self.D, c1=1.0, c2=self.alpha)

    def as_problem(self) -> SecondOrderProblem:
        """Second-order problem with the factored ``sigma = 1/2`` step solver
        attached.  Needs ``alpha > 0``."""
        if not self.alpha > 0.0:
            raise ValueError("time stepping needs alpha > 0 (C = alpha I must be SPD)")

        def step_solver(sigma, tau, rhs):
            if sigma != 0.5:
                return None
            return factored_step_solve(self, tau, rhs)

        return SecondOrderProblem(self.A, self.B, self.C, self.u0, np.zeros(self.D.n),
                                  rhs=None, step_solver=step_solver)


def assemble(alpha: float, h: float) -> BiparabolicProblem:
    return BiparabolicProblem(alpha, h)


def modal_factor(alpha: float, lam, t: float):
    """Per-mode amplitude of the exact solution at time ``t``."""
    lam = np.asarray(lam, dtype=float)
    if alpha == 0.0:
        return np.exp(-lam * t)
    return (1.0 + alpha * (-np.expm1(-t / alpha)) * lam) * np.exp(-lam * t)


def exact_solution(problem: BiparabolicProblem, t: float) -> np.ndarray:
    """``(I + alpha (1 - exp(-t/alpha)) D) exp(-D t) u0`` through the sine basis."""
    lam = laplacian_eigenvalues(problem.h)
    c = dst(problem.u0, type=1, norm="ortho")
    return dst(c * modal_factor(problem.alpha, lam, t), type=1, norm="ortho")


def exact_solutions(problem: BiparabolicProblem, times: Sequence[float]) -> np.ndarray:
    lam = laplacian_eigenvalues(problem.h)
    c = dst(problem.u0, type=1, norm="ortho")
    modes = np.stack([c * modal_factor(problem.alpha, lam, t) for t in times])
    return dst(modes, type=1, norm="ortho", axis=1)


def factored_step_solve(problem: BiparabolicProblem, tau: float, rhs) -> np.ndarray:
    """Solve ``R y = rhs`` with ``R = (pD + I)(alpha p D + (p + alpha) I)``,
    ``p = tau/2``, by two shifted tridiagonal sweeps."""
    if not problem.alpha > 0.0:
        raise ValueError("factored step solve needs alpha > 0")
    if tau < 0.0:
        raise ValueError("time step must be nonnegative")
    p = 0.5 * tau
    rhs = np.asarray(rhs, dtype=float)
    if p == 0.0:
        return rhs / problem.alpha
    z = shifted_solve(problem.D, p, 1.0, rhs)
    return shifted_solve(problem.D, problem.alpha * p, p + problem.alpha, z)


def step_operator_direct(problem: BiparabolicProblem, tau: float) -> PolyOperator:
    """``alpha I + p (I + 2 alpha D) + p^2 (D + alpha D^2)``, ``p = tau/2``."""
    p = 0.5 * tau
    return problem.C + p * problem.B + (p * p) * problem.A


def step_operator_factored_dense(problem: BiparabolicProblem, tau: float) -> np.ndarray:
    p = 0.5 * tau
    Dd = problem.D.to_dense()
    I = np.eye(problem.D.n)
    return (p * Dd + I) @ (problem.alpha * p * Dd + (p + problem.alpha) * I)


def snapshots_csv(x: np.ndarray, times: Sequence[float], columns: Sequence[np.ndarray]) -> str:
    """Wide format ``x,u_t1,u_t2,...``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x"] + [f"u_{fmt(t)}" for t in times])
    for j, xj in enumerate(x):
        w.writerow([fmt(xj)] + [fmt(col[j]) for col in columns])
    return buf.getvalue()


def residual_norm(problem: BiparabolicProblem, t: float, delta: float) -> float:
    """Norm of the equation residual of the exact solution at ``t`` with central
    time differences of half-width ``delta``."""
    um, u, up = exact_solutions(problem, [t - delta, t, t + delta])
    utt = (up - 2.0 * u + um) / delta**2
    ut = (up - um) / (2.0 * delta)
    r = problem.C.apply(utt) + problem.B.apply(ut) + problem.A.apply(u)
    return math.sqrt(float(np.dot(r, r)))
