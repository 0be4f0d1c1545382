import json
import math

import numpy as np
import pytest

from pietsch.core_model import build_instance
from pietsch.domination import summing_constant
from pietsch.semi_infinite import EuclideanSphereOracle, FiniteKOracle, solve_with_oracle


def unit_rows(count, dim, seed=0):
    X = np.random.default_rng(seed).standard_normal((count, dim))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def test_single_point_k():
    r = np.array([[0.5, 1.0, 2.0]])
    s = np.array([1.0, 1.0, 3.0])
    res = solve_with_oracle(s, 1.0, FiniteKOracle(r, 1.0), [0])
    assert res.converged and res.oracle_calls == 1
    assert res.pi == pytest.approx(summing_constant(build_instance(r, s, 1.0))[0])


def test_finite_oracle_recovers_dense_solution():
    rng = np.random.default_rng(4)
    r = rng.uniform(0, 2, (40, 6))
    s = rng.uniform(0, 2, 6)
    res = solve_with_oracle(s, 2.0, FiniteKOracle(r, 2.0), [0])
    assert res.converged
    assert res.pi == pytest.approx(summing_constant(build_instance(r, s, 2.0))[0], rel=1e-6)
    assert res.lower_bound <= res.pi <= res.upper_bound


def test_zero_s():
    X = unit_rows(5, 2)
    res = solve_with_oracle(np.zeros(5), 2.0, EuclideanSphereOracle(X, np.ones(5), 2.0), [(1.0, 0.0)])
    assert res.pi == 0.0 and res.oracle_calls == 1


def test_circle_identity_p2():
    X = unit_rows(32, 2)
    res = solve_with_oracle(np.ones(32), 2.0, EuclideanSphereOracle(X, np.ones(32), 2.0), [(1.0, 0.0)])
    assert res.converged
    assert res.pi == pytest.approx(2.0, rel=1e-6)
    assert res.oracle_calls <= 10


def test_eigen_argmax_matches_grid():
    X = unit_rows(12, 2, seed=3)
    w = np.random.default_rng(1).uniform(0, 1, 12)
    oracle = EuclideanSphereOracle(X, np.ones(12), 2.0)
    _, val, _ = oracle.argmax(w)
    th = np.linspace(0, 2 * np.pi, 20000, endpoint=False)
    grid = np.column_stack([np.cos(th), np.sin(th)])
    ref = ((grid @ X.T) ** 2 @ w).max()
    assert val == pytest.approx(ref, rel=1e-6)
    assert val >= ref - 1e-12


@pytest.mark.parametrize("p, dim", [(1.0, 2), (3.0, 2), (2.0, 3), (1.5, 3)])
def test_other_p_converges(p, dim):
    X = unit_rows(10, dim, seed=7)
    res = solve_with_oracle(np.ones(10), p, EuclideanSphereOracle(X, np.ones(10), p), [tuple(np.eye(dim)[0])])
    assert res.converged
    assert res.lower_bound <= res.pi * (1 + 1e-12)


def test_max_iter_brackets():
    X = unit_rows(32, 2)
    res = solve_with_oracle(np.ones(32), 2.0, EuclideanSphereOracle(X, np.ones(32), 2.0), [(1.0, 0.0)],
                            gap_tol=1e-15, max_iter=2)
    assert not res.converged
    assert res.status in ("max_iter exceeded",) or res.status.startswith("stalled")
    assert res.lower_bound <= 2.0 + 1e-9 <= res.upper_bound + 1e-9 or math.isinf(res.upper_bound)


def test_not_summing_detected():
    # second pair has a zero row everywhere on K
    r = np.array([[1.0, 0.0], [2.0, 0.0]])
    res = solve_with_oracle(np.array([1.0, 1.0]), 1.0, FiniteKOracle(r, 1.0), [0])
    assert res.status == "not summing" and math.isinf(res.pi)


def test_history_jsonl():
    X = unit_rows(8, 2)
    res = solve_with_oracle(np.ones(8), 2.0, EuclideanSphereOracle(X, np.ones(8), 2.0), [(1.0, 0.0)])
    lines = res.history.to_jsonl().strip().split("\n")
    recs = [json.loads(line) for line in lines]
    assert recs[-1] == {"final_status": "converged"}
    assert [r["iteration"] for r in recs[:-1]] == list(range(1, len(recs)))
    assert {"oracle_point", "primal_value", "dual_value", "gap", "certificate_valid"} <= set(recs[0])


def test_seed_points_required():
    with pytest.raises(ValueError):
        solve_with_oracle(np.ones(2), 1.0, FiniteKOracle(np.eye(2), 1.0), [])
