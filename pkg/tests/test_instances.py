import functools

import numpy as np
import pytest

from pietsch.balls import Discretization
from pietsch.core_model import InstanceError, validate_axioms
from pietsch.corpus import collapse_dataset, shipped_families
from pietsch.domination import dominating_measure, summing_constant
from pietsch.instances import (
    LinearOperatorSpec,
    LipschitzSpec,
    MultilinearSpec,
    PolynomialSpec,
    SampledMap,
    build_arbitrary_at_point,
    build_from_spec,
    build_linear,
    build_lipschitz,
    build_multilinear,
    build_polynomial,
    build_subhomogeneous,
    check_metric,
    estimate_form_norm,
    prepare_from_spec,
    sample_lipschitz_ball,
    weighted_equivalence_check,
)

CUBE = Discretization("cube-dual")
FAMILIES = functools.lru_cache(maxsize=None)(shipped_families)


def pi_of(inst):
    return summing_constant(inst)[0]


# linear ---------------------------------------------------------------


@pytest.mark.parametrize("p", [0.7, 1, 2, 5])
def test_scalar_identity(p):
    inst = build_linear(LinearOperatorSpec([[1.0]], [[1.0]], [1.0], CUBE), p)
    assert inst.k == 2
    assert pi_of(inst) == pytest.approx(1.0)


def test_zero_operator():
    X = np.random.default_rng(0).standard_normal((5, 3))
    assert pi_of(build_linear(LinearOperatorSpec(np.zeros((2, 3)), X), 2)) == 0.0


def test_circle_grid_close_to_two():
    X = np.random.default_rng(0).standard_normal((32, 2))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    inst = build_linear(LinearOperatorSpec(np.eye(2), X, None, Discretization("sphere-grid", 720)), 2)
    assert abs(pi_of(inst) - 2) <= 1e-3


def test_linear_records_discretization():
    inst = build_linear(LinearOperatorSpec(np.eye(2), np.eye(2), None, Discretization("sphere-grid", 16, 4)), 2)
    assert inst.metadata["domain_ball"] == {"tag": "sphere-grid", "resolution": 16, "seed": 4}


# Lipschitz ------------------------------------------------------------


def two_point_spec(a=1.0):
    d = np.array([[0.0, 1.0], [1.0, 0.0]])
    return LipschitzSpec(d, d, [0, 1], [(0, 1, a)], k_functions=[[0.0, 1.0]])


def test_lipschitz_two_point():
    inst = build_lipschitz(two_point_spec(), 1)
    assert inst.r_matrix.tolist() == [[1.0]] and inst.s_vector.tolist() == [1.0]
    assert pi_of(inst) == pytest.approx(1.0)


@pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
def test_lipschitz_scalar_weight_cancels(p):
    rng = np.random.default_rng(1)
    pts = rng.standard_normal((5, 2))
    d = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    triples = [(0, 1, 1.0), (2, 3, 0.5), (1, 4, 2.0)]
    base = LipschitzSpec(d, d, [0, 2, 1, 4, 3], triples, sample_count=30)
    doubled = LipschitzSpec(d, d, [0, 2, 1, 4, 3], [(x, y, 2 * a) for x, y, a in triples], sample_count=30)
    assert pi_of(build_lipschitz(doubled, p)) == pytest.approx(pi_of(build_lipschitz(base, p)), rel=1e-9)


def test_lipschitz_null_triple():
    d = np.array([[0.0, 1.0], [1.0, 0.0]])
    inst = build_lipschitz(LipschitzSpec(d, d, [0, 1], [(0, 1, 1.0), (1, 1, 3.0)], sample_count=10), 1)
    assert inst.null_pair == 1
    assert not inst.r_matrix[:, 1].any() and inst.s_vector[1] == 0


def test_lipschitz_permutation_invariance():
    rng = np.random.default_rng(2)
    pts = rng.standard_normal((5, 2))
    d = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    G = sample_lipschitz_ball(d, 40, rng)
    fmap = np.array([1, 0, 3, 2, 4])
    triples = [(0, 1, 1.0), (2, 4, 1.0), (3, 1, 0.5)]
    perm = rng.permutation(5)
    inv = np.argsort(perm)  # new index of old point i is inv[i]
    dp = d[np.ix_(perm, perm)]
    Gp = G[:, perm]
    fp = inv[fmap[perm]]
    tp = [(int(inv[x]), int(inv[y]), a) for x, y, a in triples]
    a = build_lipschitz(LipschitzSpec(d, d, fmap, triples, k_functions=G), 2)
    b = build_lipschitz(LipschitzSpec(dp, dp, fp, tp, k_functions=Gp), 2)
    assert pi_of(a) == pytest.approx(pi_of(b), rel=1e-12)


def test_lipschitz_ball_samples_are_feasible():
    rng = np.random.default_rng(0)
    pts = rng.standard_normal((6, 3))
    d = np.abs(pts[:, None] - pts[None]).sum(axis=2)
    G = sample_lipschitz_ball(d, 25, rng, base=2)
    assert np.all(G[:, 2] == 0)
    assert np.all(np.abs(G[:, :, None] - G[:, None, :]) <= d + 1e-9)


def test_non_metric_rejected():
    d = np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0]], float)
    with pytest.raises(InstanceError, match="triangle"):
        check_metric(d)


def test_non_lipschitz_k_function_rejected():
    d = np.array([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(InstanceError, match="1-Lipschitz"):
        build_lipschitz(LipschitzSpec(d, d, [0, 1], [(0, 1, 1.0)], k_functions=[[0.0, 2.0]]), 1)


# multilinear / polynomial ---------------------------------------------


def test_scalar_multiplication_bilinear():
    T = np.ones((1, 1, 1))
    spec = MultilinearSpec(T, "dominated", [(np.ones(1), np.ones(1))], [1.0], component_balls=[CUBE, CUBE])
    inst = build_multilinear(spec, 2)
    assert np.allclose(inst.r_matrix[:, 0], inst.r_matrix[0, 0])
    assert inst.s_vector[0] == pytest.approx(1.0)
    assert pi_of(inst) == pytest.approx(1.0)


@pytest.mark.parametrize("family", ["dominated", "strongly-summing", "semi-integral", "tau-p"])
def test_zero_tensor(family):
    rng = np.random.default_rng(0)
    tuples = [(rng.standard_normal(2), rng.standard_normal(2)) for _ in range(3)]
    spec = MultilinearSpec(np.zeros((2, 2, 2)), family, tuples, np.ones(3),
                           functionals=rng.standard_normal((3, 2)) if family == "tau-p" else None,
                           component_balls=[CUBE, CUBE], target_ball=Discretization("sphere-grid", 8),
                           forms_count=4)
    assert pi_of(build_multilinear(spec, 2)) == 0.0


def test_polynomial_square():
    inst = build_polynomial(PolynomialSpec(np.ones((1, 1, 1)), "dominated", [[1.0]], None, CUBE), 2)
    assert inst.r_matrix[:, 0].tolist() == [1.0, 1.0]
    assert inst.s_vector.tolist() == [1.0]
    assert pi_of(inst) == pytest.approx(1.0)


def test_polynomial_zero_and_symmetry_check():
    X = np.random.default_rng(0).standard_normal((4, 2))
    assert pi_of(build_polynomial(PolynomialSpec(np.zeros((1, 2, 2)), "dominated", X, None, CUBE), 2)) == 0.0
    A = np.array([[[0.0, 1.0], [0.0, 0.0]]])
    with pytest.raises(InstanceError, match="symmetric"):
        build_polynomial(PolynomialSpec(A, "dominated", X, None, CUBE), 2)


def test_form_norm_estimate_is_lower_bound():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((3, 3))
    est = estimate_form_norm(A, ["l2", "l2"], rng)
    assert est <= np.linalg.norm(A, 2) + 1e-12
    assert est == pytest.approx(np.linalg.norm(A, 2), rel=1e-6)


def test_unknown_family():
    with pytest.raises(InstanceError, match="unknown multilinear family"):
        build_multilinear(MultilinearSpec(np.ones((1, 1, 1)), "bogus", [(np.ones(1), np.ones(1))]), 1)


# subhomogeneous / arbitrary-at-point ----------------------------------


def test_subhomogeneous_zero_map():
    X = np.random.default_rng(0).standard_normal((4, 2))
    table = SampledMap.from_function(lambda x: np.zeros(2), np.vstack([np.zeros(2), X]))
    assert pi_of(build_subhomogeneous(table, 1.5, X, CUBE, 2)) == 0.0


def test_subhomogeneous_square_point_mass():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((7, 2))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    y0 = np.array([0.6, 0.8])
    f = lambda x: float(x[0]) ** 2 * y0  # phi0 = e1 is in the cross-polytope dual
    table = SampledMap.from_function(f, np.vstack([np.zeros(2), X]))
    inst = build_subhomogeneous(table, 2.0, X, Discretization("cross-polytope-dual"), 1)
    assert inst.s_vector == pytest.approx(np.abs(X[:, 0]))
    assert dominating_measure(inst).c == pytest.approx(1.0, abs=1e-12)


def test_subhomogeneous_errors():
    X = np.eye(2)
    table = SampledMap.from_function(lambda x: x, np.vstack([np.zeros(2), X]))
    with pytest.raises(InstanceError, match="alpha"):
        build_subhomogeneous(table, 0.0, X, CUBE, 1)
    with pytest.raises(InstanceError, match="missing table entry"):
        build_subhomogeneous(table, 1.0, [[3.0, 3.0]], CUBE, 1)


def test_arbitrary_constant_map():
    X = np.random.default_rng(0).standard_normal((4, 2))
    assert pi_of(build_arbitrary_at_point(lambda x: np.ones(3), np.ones(2), X, CUBE, 2)) == 0.0


def test_arbitrary_scalar_example():
    f = lambda x: x + x**2
    inst = build_arbitrary_at_point(f, [1.0], [[0.1], [-0.1]], CUBE, 1)
    assert inst.s_vector == pytest.approx([0.31, 0.29])
    assert np.allclose(inst.r_matrix, 0.1)
    # max 0.31 w1 + 0.29 w2 s.t. 0.1 (w1 + w2) <= 1 is attained at w = (10, 0)
    assert pi_of(inst) == pytest.approx(3.1, abs=1e-12)
    rep = weighted_equivalence_check(inst, 20)
    assert rep.relative_gap <= 0.05
    assert weighted_equivalence_check(inst, 1).multiset_value <= rep.lp_value + 1e-12


def test_arbitrary_weights_fold():
    X = np.random.default_rng(0).standard_normal((3, 2))
    T = np.array([[1.0, 2.0], [0.0, 1.0]])
    b = np.array([0.5, 2.0, 3.0])
    inst = build_arbitrary_at_point(lambda x: T @ x, np.zeros(2), X, CUBE, 2.0, b)
    plain = build_arbitrary_at_point(lambda x: T @ x, np.zeros(2), X, CUBE, 2.0)
    assert inst.s_pow == pytest.approx(np.abs(b) * plain.s_pow)
    assert inst.r_pow == pytest.approx(np.abs(b) * plain.r_pow)


# cross-family ---------------------------------------------------------


@pytest.mark.parametrize("seed", range(3))
def test_collapse_to_linear(seed):
    data = collapse_dataset(np.random.default_rng(seed), 2.0)
    ref = pi_of(data["linear"])
    for name, inst in data.items():
        assert abs(pi_of(inst) - ref) <= 1e-9, name


@pytest.mark.parametrize("name", sorted(FAMILIES()))
def test_kernel_matches_matrices(name):
    prep = FAMILIES()[name]
    for i in range(0, len(prep.k_points), max(1, len(prep.k_points) // 7)):
        for j, (x, b) in enumerate(prep.pairs):
            assert prep.r_eval(prep.k_points[i], x, b) == pytest.approx(prep.r_matrix[i, j], abs=1e-12)
    for j, (x, b) in enumerate(prep.pairs):
        assert prep.s_eval(x, b) == pytest.approx(prep.s_vector[j], abs=1e-12)


@pytest.mark.parametrize("name", sorted(FAMILIES()))
def test_shipped_family_axioms(name):
    prep = FAMILIES()[name]
    rep = validate_axioms((prep.r_eval, prep.s_eval), prep.axiom_samples(30, np.random.default_rng(0)),
                          null_element=prep.null_element)
    assert rep.ok, rep.violations[:3]
    assert prep.instance().null_pair is not None


def test_spec_json_linear():
    d = {"builder": "linear", "p": 2, "matrix": [[1, 0], [0, 1]], "test_vectors": [[1, 0], [0, 1]],
         "domain_ball": {"tag": "sphere-grid", "resolution": 720}}
    assert pi_of(build_from_spec(d)) == pytest.approx(2.0, abs=1e-12)


def test_spec_json_table_builder():
    d = {"builder": "arbitrary_at_point", "p": 1, "a": [1.0], "test_vectors": [[0.1], [-0.1]],
         "table": {"points": [[1.0], [1.1], [0.9]], "values": [[2.0], [2.31], [1.71]]},
         "domain_ball": "cube-dual"}
    assert pi_of(build_from_spec(d)) == pytest.approx(3.1)


def test_spec_json_errors():
    with pytest.raises(InstanceError, match="missing field 'p'"):
        prepare_from_spec({"builder": "linear"})
    with pytest.raises(InstanceError, match="'matrix'"):
        prepare_from_spec({"builder": "linear", "p": 1})
    with pytest.raises(InstanceError, match="unknown builder"):
        prepare_from_spec({"builder": "nope", "p": 1})
