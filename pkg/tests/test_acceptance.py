"""Acceptance gate.  Each test records one PASS/FAIL line, printed in the
terminal summary under "acceptance criteria", then asserts."""
import math
import time

import numpy as np
import pytest

from opdiff.analysis import (check_three_level_estimate, check_vector_estimate, l2_error,
                             observed_order)
from opdiff.biparabolic import (BiparabolicProblem, assemble, exact_solution, exact_solutions,
                                factored_step_solve, residual_norm, step_operator_direct,
                                step_operator_factored_dense)
from opdiff.linops import PolyOperator, SymTridiag
from opdiff.schemes import run_three_level_nonuniform, run_three_level_uniform, run_vector_scheme
from opdiff.timegrid import grid_stats, random_grid, uniform_grid
from conftest import ACCEPTANCE_LINES, random_problem

ALPHA, H, T = 0.01, 2e-3, 0.1
NS = (50, 100, 200)
SEEDS = (0, 1, 2)


def record(num, ok, text):
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'}  {text}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def fmt_list(xs, spec=".4g"):
    return "[" + ", ".join(format(x, spec) for x in xs) + "]"


@pytest.fixture(scope="module")
def desk():
    bp = assemble(ALPHA, H)
    return bp, bp.as_problem(), exact_solution(bp, T)


def _errors(desk, sigma, grid_for):
    bp, p, uT = desk
    return [(N, l2_error(run_vector_scheme(p, grid_for(N), sigma).y[-1], uT, H)) for N in NS]


def test_criterion_1_second_order(desk):
    t0 = time.perf_counter()
    errs = _errors(desk, 0.5, lambda N: uniform_grid(T, N))
    elapsed = time.perf_counter() - t0
    orders = observed_order(errs)
    ok = all(1.8 <= o <= 2.2 for o in orders) and elapsed < 30.0
    record(1, ok, f"sigma=0.5 uniform eps={fmt_list([e for _, e in errs])} "
                  f"orders={fmt_list(orders, '.3f')} (need [1.8, 2.2]) runtime={elapsed:.2f}s")


def test_criterion_2_nonuniform_robustness(desk):
    uniform = dict(_errors(desk, 0.5, lambda N: uniform_grid(T, N)))
    ratio_ok, order_ok = True, True
    worst_ratio, orders_all = 0.0, []
    for seed in SEEDS:
        errs = _errors(desk, 0.5, lambda N: random_grid(T, N, 0.5, seed))
        for N, e in errs:
            worst_ratio = max(worst_ratio, e / uniform[N])
            ratio_ok &= e <= 2.0 * uniform[N]
        orders = observed_order(errs)
        orders_all += orders
        order_ok &= all(o >= 1.7 for o in orders)
    record(2, ratio_ok and order_ok,
           f"random q=0.5 seeds={SEEDS} max eps/eps_uniform={worst_ratio:.3f} (need <= 2) "
           f"orders={fmt_list(orders_all, '.3f')} (need >= 1.7)")


def test_criterion_3_scheme_equivalence():
    rng = np.random.default_rng(3)
    worst, worst_ratio = 0.0, 0.0
    for i in range(10):
        n = int(rng.integers(1, 17))
        p = random_problem(rng, n)
        g = random_grid(1.0, 20, 0.5, seed=100 + i)
        worst_ratio = max(worst_ratio, grid_stats(g).max_adjacent_ratio)
        a = run_vector_scheme(p, g, 0.5).y
        b = run_three_level_nonuniform(p, g).y
        worst = max(worst, float(np.max(np.abs(a - b)) / np.max(np.abs(a))))
    record(3, worst <= 1e-10 and worst_ratio <= 5 / 3,
           f"10 SPD instances, 20 steps, max step ratio={worst_ratio:.3f}: "
           f"max rel diff={worst:.2e} (need <= 1e-10)")


def test_criterion_4_vector_monitor(desk):
    _, p, _ = desk
    worst, n_runs, ok = 0.0, 0, True
    for sigma in (0.5, 0.75, 1.0):
        for g in (uniform_grid(T, 100), random_grid(T, 100, 0.5, 0), random_grid(T, 100, 0.5, 1)):
            rep = check_vector_estimate(run_vector_scheme(p, g, sigma), p)
            m = [r.monitor for r in rep.records]
            mono = all(b <= a + 1e-12 * a for a, b in zip(m, m[1:]))
            ok &= rep.asserted and rep.all_ok and mono
            worst = max(worst, rep.max_violation)
            n_runs += 1
    record(4, ok, f"{n_runs} homogeneous runs, sigma in (0.5, 0.75, 1): vector monitor "
                  f"nonincreasing, max violation={worst:.1e} (slack 1e-12)")


def test_criterion_5_three_level_energy(desk):
    _, p, _ = desk
    ok, worst = True, 0.0
    for sigma in (0.25, 0.5):
        rep = check_three_level_estimate(run_three_level_uniform(p, uniform_grid(T, 100), sigma), p)
        E = [r.monitor for r in rep.records]
        mono = all(b <= a + 1e-12 * a for a, b in zip(E, E[1:]))
        ok &= rep.asserted and rep.all_ok and mono
        worst = max(worst, rep.max_violation)
    record(5, ok, f"three-level sigma in (0.25, 0.5): energy nonincreasing, "
                  f"max violation={worst:.1e} (slack 1e-12)")


def test_criterion_6_first_order(desk):
    errs = _errors(desk, 1.0, lambda N: uniform_grid(T, N))
    orders = observed_order(errs)
    record(6, all(0.8 <= o <= 1.2 for o in orders),
           f"sigma=1 eps={fmt_list([e for _, e in errs])} orders={fmt_list(orders, '.3f')} "
           f"(need [0.8, 1.2])")


def test_criterion_7_exact_solution():
    notes, ok = [], True
    for alpha in (0.01, 0.1):
        bp = assemble(alpha, H)
        ratio = residual_norm(bp, 0.01, 2e-5) / residual_norm(bp, 0.01, 1e-5)
        ok &= 3.5 <= ratio <= 4.5
        notes.append(f"residual ratio(alpha={alpha})={ratio:.2f}")

    bp = assemble(ALPHA, H)
    rel0 = np.linalg.norm(exact_solution(bp, 0.0) - bp.u0) / np.linalg.norm(bp.u0)
    ok &= rel0 <= 1e-12
    notes.append(f"t=0 rel={rel0:.1e}")

    # u'(0) = 0 by central differences; negative times blow up on fine meshes
    coarse = BiparabolicProblem(ALPHA, 1 / 16)
    d = 1e-5
    up, um = exact_solutions(coarse, [d, -d])
    du0 = np.linalg.norm((up - um) / (2 * d)) / np.linalg.norm(coarse.A.apply(coarse.u0) / ALPHA)
    ok &= du0 <= 1e-6
    notes.append(f"|u'(0)| rel={du0:.1e}")

    times = np.linspace(0.0, T, 101)
    neg = exact_solutions(assemble(0.1, H), times[1:]).min()
    ok &= neg < 0.0
    notes.append(f"min(alpha=0.1)={neg:.4f}")

    peaks = exact_solutions(BiparabolicProblem(0.0, H), times).max(axis=1)
    mono = bool(np.all(np.diff(peaks) <= 0.0))
    ok &= mono
    notes.append(f"alpha=0 max nonincreasing={mono}")
    record(7, ok, ", ".join(notes))


def test_criterion_8_solvers():
    rng = np.random.default_rng(8)
    worst_fact, worst_gen, worst_id = 0.0, 0.0, 0.0
    for M in (2, 3, 8, 17, 33, 65):
        for alpha in (1e-3, 0.01, 0.1, 1.0):
            bp = BiparabolicProblem(alpha, 1 / M)
            for tau in (1e-4, 1e-3, 0.02, 0.5):
                rhs = rng.standard_normal(M - 1)
                direct = step_operator_direct(bp, tau)
                dense = direct.to_dense()
                ref = np.linalg.solve(dense, rhs)
                nref = np.linalg.norm(ref)
                worst_fact = max(worst_fact,
                                 np.linalg.norm(factored_step_solve(bp, tau, rhs) - ref) / nref)
                worst_gen = max(worst_gen, np.linalg.norm(direct.solve(rhs) - ref) / nref)
                fact = step_operator_factored_dense(bp, tau)
                nz = dense != 0
                worst_id = max(worst_id, float(np.max(np.abs(fact[nz] - dense[nz])
                                                      / np.abs(dense[nz]))))
    # generic solve on random polynomial operators, complex-root ones included
    for n in (1, 5, 16, 64):
        D = SymTridiag(rng.uniform(2, 4, n), rng.uniform(-0.9, 0.9, n - 1))
        for coeffs in ((1.0, 2.0, 0.5), (5.0, 0.0, 1.0), (0.3, 1.0, 0.0)):
            op = PolyOperator(D, *coeffs)
            rhs = rng.standard_normal(n)
            ref = np.linalg.solve(op.to_dense(), rhs)
            worst_gen = max(worst_gen, np.linalg.norm(op.solve(rhs) - ref) / np.linalg.norm(ref))
    ok = worst_fact <= 1e-10 and worst_gen <= 1e-10 and worst_id <= 1e-13
    record(8, ok, f"n <= 64: factored rel={worst_fact:.1e}, generic rel={worst_gen:.1e} "
                  f"(need <= 1e-10), factorization identity rel={worst_id:.1e} (need <= 1e-13)")
