"""Acceptance criteria, one test each, each reporting a PASS/FAIL line.

The full six-level runs of the three examples are shared through
module-scoped fixtures (about 30 s in total). Run this module alone with::

    pytest tests/test_acceptance.py -v
"""
import time

import numpy as np
import pytest

import reference_values as ref
from conftest import ACCEPTANCE_LINES, SMALL_MESHES
from oracles import BruteForms, form_matrix
from vkmorley.cli import RunConfig, run
from vkmorley.forms import (
    StateVector,
    assemble_biharmonic,
    assemble_gradient,
    assemble_load,
    assemble_trilinear,
    problem_operator,
)
from vkmorley.mesh import level_mesh
from vkmorley.morley import MorleySpace
from vkmorley.problems import ALPHA_L, example1
from vkmorley.quadrature import MAX_DEGREE, triangle_rule
from vkmorley.solver import newton_solve

LEVELS = 6

pytestmark = pytest.mark.slow


def record(criterion, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _timed_run(example):
    t0 = time.perf_counter()
    rep = run(RunConfig(example=example, levels=LEVELS))
    return rep, time.perf_counter() - t0


@pytest.fixture(scope="module")
def ex1():
    return _timed_run(1)


@pytest.fixture(scope="module")
def ex2():
    return _timed_run(2)


@pytest.fixture(scope="module")
def ex3():
    return _timed_run(3)


def compare(report, field, table, table_rates, err_tol, rate_tol):
    """Worst relative error deviation, worst rate deviation, and a description of each."""
    keys = [f"e2_{field}", f"e1_{field}", f"e0_{field}"]
    worst_e, worst_r = (0.0, ""), (0.0, "")
    for k, key in enumerate(keys):
        rr = report.rate_column(key)
        for i, row in enumerate(report.rows):
            assert row.unknowns == table[i][0]
            dev = abs(row.errors[key] - table[i][k + 1]) / table[i][k + 1]
            if dev > worst_e[0]:
                worst_e = (dev, f"{key}@{row.unknowns}")
            if table_rates[i] is not None:
                dr = abs(rr[i] - table_rates[i][k])
                if dr > worst_r[0]:
                    worst_r = (dr, f"{key}@{row.unknowns}")
    ok = worst_e[0] <= err_tol and worst_r[0] <= rate_tol
    detail = (
        f"max error deviation {100 * worst_e[0]:.2f}% ({worst_e[1]}, limit {100 * err_tol:g}%), "
        f"max rate deviation {worst_r[0]:.4f} ({worst_r[1]}, limit {rate_tol})"
    )
    return ok, detail


def test_criterion_1_example1_displacement(ex1):
    rep, seconds = ex1
    ok, detail = compare(rep, "u", ref.EXAMPLE1_U, ref.EXAMPLE1_U_RATES, 0.02, 0.03)
    record(1, ok, f"{detail}; six levels in {seconds:.1f} s")


def test_criterion_2_example1_stress_function(ex1):
    rep, _ = ex1
    ok, detail = compare(rep, "v", ref.EXAMPLE1_V, ref.EXAMPLE1_V_RATES, 0.02, 0.03)
    record(2, ok, detail)


def test_criterion_3_lshape(ex2):
    rep, seconds = ex2
    ok_u, du = compare(rep, "u", ref.EXAMPLE2_U, ref.EXAMPLE2_U_RATES, 0.05, 0.05)
    ok_v, dv = compare(rep, "v", ref.EXAMPLE2_V, ref.EXAMPLE2_V_RATES, 0.05, 0.05)
    record(3, ok_u and ok_v, f"u: {du}; v: {dv}; {seconds:.1f} s")


def test_criterion_4_gradient_term(ex3):
    rep, _ = ex3
    ok_u, du = compare(rep, "u", ref.EXAMPLE3_U, ref.EXAMPLE3_U_RATES, 0.02, 0.03)
    ok_v, dv = compare(rep, "v", ref.EXAMPLE3_V, ref.EXAMPLE3_V_RATES, 0.02, 0.03)
    record(4, ok_u and ok_v, f"u: {du}; v: {dv}")


def _pair_norm(rep, m):
    return np.hypot(rep.column(f"e{m}_u"), rep.column(f"e{m}_v"))


def _fit(errors, last=3):
    e = np.asarray(errors)[-last:]
    return float(-np.polyfit(np.arange(len(e)), np.log2(e), 1)[0])


def test_criterion_5_energy_and_h1_orders(ex1, ex2, ex3):
    parts, ok = [], True
    for name, (rep, _) in (("example 1", ex1), ("example 3", ex3)):
        o2, o1 = _fit(_pair_norm(rep, 2)), _fit(_pair_norm(rep, 1))
        ok &= 0.95 <= o2 <= 1.05 and 1.9 <= o1 <= 2.1
        parts.append(f"{name} H2 {o2:.4f} in [0.95,1.05], H1 {o1:.4f} in [1.9,2.1]")
    rep2, _ = ex2
    o2 = _fit(_pair_norm(rep2, 2))
    window = [r for r in rep2.rate_column("e2_u")[-3:]]
    monotone = all(a > b for a, b in zip(window, window[1:])) and window[-1] > ALPHA_L
    ok &= 0.80 <= o2 <= 0.95 and monotone
    parts.append(
        f"l-shape H2 {o2:.4f} in [0.80,0.95], last rates "
        + ", ".join(f"{r:.4f}" for r in window)
        + f" decreasing towards alpha={ALPHA_L:.4f}: {monotone}"
    )
    record(5, ok, "; ".join(parts))


def test_criterion_6_quadratic_newton():
    mesh, n = level_mesh("unit-square", 3)
    assert n == 8
    op = problem_operator(MorleySpace(mesh), example1())
    _, log = newton_solve(op)
    floor = 1e-10 * (1 + np.linalg.norm(op.load))
    exps = log.contraction_exponents(floor)
    ok = log.converged and log.iterations <= 8 and bool(exps) and all(1.5 <= e <= 2.5 for e in exps)
    record(
        6, ok,
        f"{log.iterations} iterations, residuals "
        + ", ".join(f"{r:.2e}" for r in log.residuals)
        + ", exponents " + ", ".join(f"{e:.3f}" for e in exps) + " in [1.5, 2.5]",
    )


def _rel(a, b):
    return np.max(np.abs(a - b)) / np.max(np.abs(b))


def test_criterion_7_oracle_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    pb = example1()
    worst_forms = 0.0
    for make in SMALL_MESHES.values():
        mesh = make()
        space = MorleySpace(mesh)
        brute = BruteForms(mesh, space.dofmap)
        n = space.n_free
        w = rng.normal(size=n)
        I = np.eye(n)
        checks = [
            (assemble_biharmonic(space), form_matrix(n, brute.a)),
            (assemble_trilinear(space, w, 1), form_matrix(n, lambda c, p: brute.b(w, c, p))),
            (assemble_trilinear(space, w, 2), form_matrix(n, lambda e, p: brute.b(e, w, p))),
            (assemble_gradient(space, 3.0), form_matrix(n, lambda a, b: brute.c(a, b, 3.0))),
        ]
        for fast, slow in checks:
            worst_forms = max(worst_forms, _rel(fast.toarray(), slow))
        load = assemble_load(space, pb.rhs_f1, pb.rhs_f2)
        slow = np.concatenate([[brute.load(f, I[i]) for i in range(n)] for f in (pb.rhs_f1, pb.rhs_f2)])
        worst_forms = max(worst_forms, _rel(load, slow))

    # finite-difference Jacobian
    space = MorleySpace(SMALL_MESHES["square-perturbed"]())
    op = problem_operator(space, pb)
    x0 = rng.normal(size=2 * space.n_free)
    J = op.newton_system(StateVector.from_array(x0)).jacobian
    worst_jac = 0.0
    for _ in range(3):
        d = rng.normal(size=x0.size)
        fd = (op.residual(StateVector.from_array(x0 + 1e-6 * d))
              - op.residual(StateVector.from_array(x0 - 1e-6 * d))) / 2e-6
        worst_jac = max(worst_jac, np.linalg.norm(fd - J @ d) / np.linalg.norm(J @ d))

    # DOF duality and P2 reproduction on every element of the small meshes
    from test_morley import dof_functionals, random_quadratic

    worst_dual, worst_p2 = 0.0, 0.0
    for make in SMALL_MESHES.values():
        mesh = make()
        space = MorleySpace(mesh)
        q = random_quadratic(rng)
        for t in range(mesh.n_triangles):
            eb = space.basis[t]
            M = np.column_stack([
                dof_functionals(mesh, t, lambda p: eb.values(p)[j], lambda p: eb.gradients(p)[j])
                for j in range(6)
            ])
            worst_dual = max(worst_dual, np.abs(M - np.eye(6)).max())
            dofs = dof_functionals(mesh, t, lambda p: q.value(*p), lambda p: q.gradient(*p))
            pts = rng.dirichlet(np.ones(3), size=5) @ mesh.corners[t]
            worst_p2 = max(worst_p2, np.abs(eb.values(pts) @ dofs - q.value(pts[:, 0], pts[:, 1])).max())

    # quadrature exactness sweep on the reference triangle
    from test_quadrature import exact_reference_monomial

    worst_quad = 0.0
    tri = np.array([[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]])
    for d in range(1, MAX_DEGREE + 1):
        rule = triangle_rule(d)
        x = rule.physical_points(tri)[0]
        for i in range(d + 1):
            for j in range(d + 1 - i):
                exact = exact_reference_monomial(i, j)
                approx = 0.5 * np.sum(rule.weights * x[:, 0] ** i * x[:, 1] ** j)
                worst_quad = max(worst_quad, abs(approx - exact) / exact)

    seconds = time.perf_counter() - t0
    ok = worst_forms <= 1e-12 and worst_jac <= 1e-5 and worst_dual <= 1e-10 and worst_p2 <= 1e-10 \
        and worst_quad <= 1e-12
    record(
        7, ok,
        f"forms/load vs brute force {worst_forms:.1e} (<=1e-12), FD Jacobian {worst_jac:.1e} (<=1e-5), "
        f"DOF duality {worst_dual:.1e} and P2 reproduction {worst_p2:.1e} (<=1e-10), "
        f"quadrature {worst_quad:.1e} (<=1e-12); {seconds:.1f} s",
    )


def test_criterion_8_l2_not_better_than_h1(ex1):
    rep, _ = ex1
    parts, ok = [], True
    for f in ("u", "v"):
        o0, o1 = _fit(rep.column(f"e0_{f}")), _fit(rep.column(f"e1_{f}"))
        ok &= o0 <= o1 + 0.1
        parts.append(f"{f}: L2 order {o0:.4f} <= H1 order {o1:.4f} + 0.1")
    record(8, ok, "; ".join(parts))
