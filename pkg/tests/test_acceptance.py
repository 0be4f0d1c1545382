"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""
import math
import time

import numpy as np
import pytest

from oracles import enumerable, highs_pi, recession_value, vertex_enumeration
from pietsch.balls import Discretization
from pietsch.bruteforce import pi_by_multisets
from pietsch.core_model import build_instance, validate_axioms
from pietsch.corpus import (
    acceptance_corpus,
    collapse_dataset,
    engineered_rational_instance,
    random_instance,
    shipped_families,
    synthetic_violating_family,
)
from pietsch.domination import (
    DominationCertificate,
    certificate_tol,
    check_equivalence,
    easy_direction,
    residuals_for,
    summing_constant,
)
from pietsch.instances import LinearOperatorSpec, build_linear
from pietsch.lp_core import INFEASIBLE, OPTIMAL, UNBOUNDED, LpProblem, check_strong_duality, solve_lp
from pietsch.semi_infinite import EuclideanSphereOracle, solve_with_oracle


@pytest.fixture(scope="module")
def corpus_run():
    corpus = acceptance_corpus(2024, 500, 50)
    t0 = time.perf_counter()
    reports = [check_equivalence(inst) for inst in corpus]
    return corpus, reports, time.perf_counter() - t0


def test_c01_equivalence(corpus_run, report):
    corpus, reports, elapsed = corpus_run
    ps = {inst.p for inst in corpus}
    worst = max(r.gap / (1 + r.pi) for r in reports)
    ok = (len(corpus) >= 500 and max(max(i.k, i.m) for i in corpus) <= 50 and ps == {1.0, 1.5, 2.0, 4.0}
          and all(r.ok for r in reports) and elapsed < 30)
    assert report(1, ok, f"{len(corpus)} instances, worst |c^p-pi|/(1+pi) = {worst:.2e}, {elapsed:.1f} s")


def test_c02_certificates(corpus_run, report):
    corpus, reports, _ = corpus_run
    worst = math.inf
    ok = True
    for inst, rep in zip(corpus, reports):
        # residuals recomputed from (c, mu) independently of the stored ones
        res = rep.c ** inst.p * (rep.certificate.mu @ inst.r_pow) - inst.s_pow
        tol = 1e-9 * (1 + inst.s_vector.max())
        worst = min(worst, res.min() / tol)
        ok &= bool(res.min() >= -tol) and abs(rep.certificate.mu.sum() - 1) <= 1e-9
    assert report(2, ok, f"worst residual / tolerance = {worst:.3f}")


def test_c03_easy_direction(corpus_run, report):
    corpus, reports, _ = corpus_run
    rng = np.random.default_rng(3)
    results = [easy_direction(inst, rep.certificate, samples=100, rng=rng, rel_tol=1e-9)
               for inst, rep in zip(corpus, reports)]
    ok = all(r.holds and r.samples == 100 for r in results)
    assert report(3, ok, f"{len(results)} certificates x 100 samples, worst excess {max(r.worst_excess for r in results):.2e}")


def test_c04_circle_anchor(report):
    rng = np.random.default_rng(0)
    X = rng.standard_normal((32, 2))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    inst = build_linear(LinearOperatorSpec(np.eye(2), X, None, Discretization("sphere-grid", 720)), 2)
    rep = check_equivalence(inst)
    # analytic oracle: the uniform measure with c = sqrt(2) is a certificate
    mu = np.full(inst.k, 1 / inst.k)
    uniform_ok = residuals_for(inst, math.sqrt(2), mu).min() >= -certificate_tol(inst)
    in_pi = 2 - 2e-3 <= rep.pi <= 2
    in_c = math.sqrt(2) * (1 - 1e-3) <= rep.c <= math.sqrt(2)
    ex = solve_with_oracle(inst.s_vector, 2.0, EuclideanSphereOracle(X, np.ones(32), 2.0), [(1.0, 0.0)])
    ex_ok = ex.converged and abs(ex.pi - rep.pi) <= 1e-4 * rep.pi and ex.oracle_calls <= 50
    ok = in_pi and in_c and uniform_ok and ex_ok
    assert report(4, ok, f"pi = {rep.pi:.10f}, c = {rep.c:.10f}, exchange pi = {ex.pi:.10f} in {ex.oracle_calls} calls")


def test_c05_collapse(report):
    rng = np.random.default_rng(5)
    worst = 0.0
    for t in range(20):
        data = collapse_dataset(rng, (1.0, 1.5, 2.0, 4.0)[t % 4])
        ref = summing_constant(data["linear"])[0]
        worst = max(worst, max(abs(summing_constant(i)[0] - ref) for i in data.values()))
    assert report(5, worst <= 1e-9, f"20 datasets x 4 builders, worst |pi - pi_linear| = {worst:.2e}")


def test_c06_bruteforce(report):
    rng = np.random.default_rng(6)
    worst = -math.inf
    for _ in range(200):
        inst = random_instance(rng, int(rng.integers(1, 5)), int(rng.integers(1, 5)), (1.0, 2.0)[int(rng.integers(2))])
        rep = pi_by_multisets(inst, 20)
        pi, _ = summing_constant(inst)
        assert rep.complete
        worst = max(worst, rep.best_value - pi)
    exact = 0
    for _ in range(20):
        inst, _ = engineered_rational_instance(rng, int(rng.integers(1, 5)), 10)
        exact += pi_by_multisets(inst, 10).best_value == summing_constant(inst)[0]
    ok = worst <= 1e-9 and exact == 20
    assert report(6, ok, f"max(best - pi) = {worst:.2e} on 200 instances, exact on {exact}/20 engineered")


def test_c07_scaling(report):
    rng = np.random.default_rng(7)
    worst = 0.0
    for t in range(100):
        inst = random_instance(rng, int(rng.integers(1, 30)), int(rng.integers(1, 30)), (1.0, 1.5, 2.0, 4.0)[t % 4])
        pi, _ = summing_constant(inst)
        for factor in (0.5, 2.0, 10.0):
            scaled, _ = summing_constant(inst.with_s(factor * inst.s_vector))
            target = factor**inst.p * pi
            worst = max(worst, abs(scaled - target) / max(target, 1e-300) if target else abs(scaled))
    assert report(7, worst <= 1e-9, f"100 instances x t in {{0.5, 2, 10}}, worst relative error {worst:.2e}")


def test_c08_axioms(report):
    rng = np.random.default_rng(8)
    eta = tuple(i / 10 for i in range(11))
    bad = []
    for name, prep in shipped_families().items():
        rep = validate_axioms((prep.r_eval, prep.s_eval), prep.axiom_samples(100, rng), eta,
                              null_element=prep.null_element)
        if not rep.ok or rep.samples_checked < 100:
            bad.append(name)
    fam = synthetic_violating_family(0, 100)
    flagged = not validate_axioms((fam.r_eval, fam.s_eval), fam.samples, eta,
                                  null_element=fam.null_element).s_superhomogeneous_ok
    ok = not bad and flagged
    assert report(8, ok, f"shipped families with violations: {bad or 'none'}; synthetic flagged: {flagged}")


def test_c09_lp_vs_vertex_enumeration(report):
    rng = np.random.default_rng(9)
    mismatches = 0
    sizes = set()
    solved = 0
    while solved < 1000:
        # draw n, q <= 12 and keep the draws whose vertex count is enumerable in well under a second
        n, q = int(rng.integers(1, 13)), int(rng.integers(1, 13))
        if not enumerable(n, q, 100_000):
            continue
        solved += 1
        sizes.add(max(n, q))
        A = rng.integers(-5, 6, (q, n)).astype(float)
        b = rng.integers(-3, 11, q).astype(float)
        c = rng.integers(-5, 6, n).astype(float)
        P = LpProblem(c, A, b)
        sol = solve_lp(P)
        v = vertex_enumeration(A, b, c)
        if v is None:
            mismatches += sol.status != INFEASIBLE
            continue
        if recession_value(A, c) > 1e-9:
            mismatches += sol.status != UNBOUNDED
            continue
        mismatches += not (sol.status == OPTIMAL and abs(sol.value - v) <= 1e-8 * (1 + abs(v))
                           and check_strong_duality(P, sol).ok)
    terminated = 0
    for _ in range(50):
        base = rng.integers(0, 3, (int(rng.integers(2, 6)), 6)).astype(float)
        A = np.vstack([base] * int(rng.integers(2, 6)))
        sol = solve_lp(LpProblem(rng.integers(-2, 4, 6).astype(float), A, np.zeros(len(A))))
        terminated += sol.status in (OPTIMAL, UNBOUNDED)
    ok = mismatches == 0 and terminated == 50
    assert report(9, ok, f"1000 LPs (max(n, q) up to {max(sizes)}), {mismatches} mismatches vs vertex enumeration; {terminated}/50 degenerate LPs terminated")


def test_c10_performance_and_determinism(report):
    from pietsch.cli import SUITE_FIELDS, suite_rows

    rng = np.random.default_rng(10)
    inst = build_instance(rng.uniform(0, 1, (200, 200)), rng.uniform(0, 1, 200), 2.0)
    t0 = time.perf_counter()
    pi, _ = summing_constant(inst)
    elapsed = time.perf_counter() - t0
    ref = highs_pi(inst.r_matrix, inst.s_vector, 2.0)
    first, ok1 = suite_rows(2024)
    second, _ = suite_rows(2024)
    render = lambda rows: "\n".join(",".join(str(r[f]) for f in SUITE_FIELDS) for r in rows)
    identical = render(first) == render(second)
    ok = elapsed < 1.0 and abs(pi - ref) <= 1e-7 * (1 + ref) and identical and ok1
    assert report(10, ok, f"200x200 solve {elapsed:.3f} s; suite of {len(first)} entries rerun identical: {identical}")
