"""Stability monitors, the grid L2 error and observed convergence orders.

The monitors check the discrete energy inequalities of the two scheme
families along a computed trajectory.  They hold in exact arithmetic, so the
checks allow a fixed relative slack for round-off.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .linops import PolyOperator
from .schemes import SecondOrderProblem, Trajectory, VectorState, sample_rhs
from .timegrid import fmt

SLACK = 1e-12


@dataclass(frozen=True)
class StabilityRecord:
    n: int
    t: float
    monitor: float
    bound: float
    ok: bool
    violation: float = 0.0


@dataclass
class StabilityReport:
    scheme: str
    sigma: float
    rhs_sampling: str
    asserted: bool
    records: list = field(default_factory=list)
    precondition: Optional[str] = None

    @property
    def all_ok(self) -> bool:
        return all(r.ok for r in self.records)

    @property
    def max_violation(self) -> float:
        return max((r.violation for r in self.records), default=0.0)

    @property
    def passed(self) -> bool:
        """False only when an asserted estimate is violated."""
        return (not self.asserted) or self.all_ok

    @property
    def verdict(self) -> str:
        if not self.asserted:
            return "observed"
        return "pass" if self.all_ok else "fail"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "t_n", "monitor", "bound", "ok"])
        for r in self.records:
            w.writerow([r.n, fmt(r.t), fmt(r.monitor), fmt(r.bound), "true" if r.ok else "false"])
        return buf.getvalue()


def _excess(lhs: float, rhs: float) -> float:
    """Relative amount by which ``lhs <= rhs`` fails (0 when it holds)."""
    d = lhs - rhs
    if d <= 0.0:
        return 0.0
    scale = max(abs(lhs), abs(rhs))
    return d / scale if scale > 0.0 else math.inf


def _holds(lhs: float, rhs: float) -> bool:
    return lhs <= rhs + SLACK * max(abs(lhs), abs(rhs))


def energy_operator(C: PolyOperator, A: PolyOperator, sigma: float, tau: float) -> PolyOperator:
    """``C + (sigma - 1/4) tau^2 A``; positive definite for sigma >= 1/4."""
    if not (tau > 0.0):
        raise ValueError("time step must be positive")
    return C + ((sigma - 0.25) * tau * tau) * A


def _three_level_quad(y_n, y_nm1, tau, Dop: PolyOperator, A: PolyOperator) -> float:
    return Dop.quad((y_n - y_nm1) / tau) + A.quad(0.5 * (y_n + y_nm1))


def three_level_energy(y_n, y_nm1, tau: float, Dop: PolyOperator, A: PolyOperator) -> float:
    """``|(y_n - y_nm1)/tau|_D^2 + |(y_n + y_nm1)/2|_A^2``."""
    y_n = np.asarray(y_n, dtype=float)
    y_nm1 = np.asarray(y_nm1, dtype=float)
    a = Dop.norm((y_n - y_nm1) / tau)
    b = A.norm(0.5 * (y_n + y_nm1))
    return a * a + b * b


def check_three_level_estimate(traj: Trajectory, problem: SecondOrderProblem,
                               sigma: Optional[float] = None) -> StabilityReport:
    sigma = traj.sigma if sigma is None else sigma
    steps = traj.grid.steps
    if not np.allclose(steps, steps[0], rtol=1e-12, atol=0.0):
        raise ValueError("three-level energy check needs a uniform-grid trajectory")
    tau = float(traj.grid.T / traj.grid.N)
    Dop = energy_operator(problem.C, problem.A, sigma, tau)
    precondition = None
    if sigma < 0.25:
        precondition = f"sigma={sigma} below 1/4"
    if not Dop.is_spd():
        precondition = "energy operator C + (sigma - 1/4) tau^2 A is not positive definite"
    report = StabilityReport(traj.scheme, float(sigma), "point", precondition is None,
                             precondition=precondition)
    Y, t = traj.y, traj.times
    N = traj.grid.N
    energies = [math.nan] + [_three_level_quad(Y[n], Y[n - 1], tau, Dop, problem.A)
                             for n in range(1, N + 1)]
    forcing = [0.0] * (N + 1)
    if problem.rhs is not None:
        for k in range(1, N + 1):
            fk = problem.f(float(t[k]))
            forcing[k] = 0.5 * tau * float(np.dot(problem.B.solve(fk, check=False), fk))
    bound = energies[1]
    for n in range(1, N + 1):
        E = energies[n]
        if n == 1:
            ok, viol = True, 0.0
        else:
            one_step = energies[n - 1] + forcing[n - 1]
            bound += forcing[n - 1]
            ok = _holds(E, one_step) and _holds(E, bound)
            viol = max(_excess(E, one_step), _excess(E, bound))
        report.records.append(StabilityRecord(n, float(t[n]), E, bound, ok, viol))
    return report


def vector_monitor(state: VectorState, C: PolyOperator, A: PolyOperator) -> float:
    """``sqrt(|y|_C^2 + |w|_{A^-1}^2)``."""
    a = C.norm(state.y)
    b = A.inv_norm(state.w)
    return math.sqrt(a * a + b * b)


def check_vector_estimate(traj: Trajectory, problem: SecondOrderProblem,
                          sigma: Optional[float] = None) -> StabilityReport:
    if traj.w is None:
        raise ValueError(f"{traj.scheme} trajectory has no w component to monitor")
    sigma = traj.sigma if sigma is None else sigma
    precondition = None if sigma >= 0.5 else f"sigma={sigma} below 1/2"
    report = StabilityReport(traj.scheme, float(sigma), traj.rhs_sampling, precondition is None,
                             precondition=precondition)
    C, A = problem.C, problem.A
    t, steps = traj.times, traj.grid.steps
    prev = None
    bound = 0.0
    for n, state in enumerate(traj.states):
        m = vector_monitor(state, C, A)
        if n == 0:
            bound = m
            report.records.append(StabilityRecord(0, float(t[0]), m, bound, True))
            prev = m
            continue
        tau = float(steps[n - 1])
        inc = 0.0
        if problem.rhs is not None:
            f = sample_rhs(problem, float(t[n - 1]), tau, sigma, traj.rhs_sampling)
            inc = tau * A.inv_norm(f)
        bound += inc
        one_step = prev + inc
        ok = _holds(m, one_step) and _holds(m, bound)
        viol = max(_excess(m, one_step), _excess(m, bound))
        report.records.append(StabilityRecord(n, float(t[n]), m, bound, ok, viol))
        prev = m
    return report


def check_estimate(traj: Trajectory, problem: SecondOrderProblem) -> StabilityReport:
    """Pick the monitor that matches the scheme."""
    if traj.scheme == "three-level-uniform":
        return check_three_level_estimate(traj, problem)
    return check_vector_estimate(traj, problem)


def l2_error(y, u_exact, h: float) -> float:
    """``sqrt(h * sum (y - u)^2)`` over interior nodes."""
    y = np.asarray(y, dtype=float)
    u = np.asarray(u_exact, dtype=float)
    if y.shape != u.shape:
        raise ValueError(f"shape mismatch {y.shape} vs {u.shape}")
    d = y - u
    return math.sqrt(h * float(np.dot(d, d)))


def observed_order(errors: Sequence[tuple[float, float]]) -> list[float]:
    """Orders ``log(e1/e2) / log(N2/N1)`` between consecutive ``(N, e)`` pairs."""
    out = []
    for (n1, e1), (n2, e2) in zip(errors, errors[1:]):
        if not (n2 > n1):
            raise ValueError("N values must be strictly increasing")
        if not (e1 > 0.0 and e2 > 0.0):
            raise ValueError("errors must be positive")
        out.append(math.log(e1 / e2) / math.log(n2 / n1))
    return out
