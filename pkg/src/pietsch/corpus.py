"""Seeded instance corpora shared by the test suite, the acceptance gate and ``suite``."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .balls import Discretization
from .core_model import SummingInstance, build_instance
from .instances import (
    LinearOperatorSpec,
    LipschitzSpec,
    MultilinearSpec,
    PolynomialSpec,
    Prepared,
    SampledMap,
    prepare_arbitrary_at_point,
    prepare_linear,
    prepare_lipschitz,
    prepare_multilinear,
    prepare_polynomial,
    prepare_subhomogeneous,
)

P_VALUES = (1.0, 1.5, 2.0, 4.0)


def random_instance(rng: np.random.Generator, k: int, m: int, p: float, *, style: str | None = None) -> SummingInstance:
    """A random summing instance (every pair with ``s_j > 0`` is covered by some row).

    ``style`` picks the shape: ``dense``, ``sparse``, ``null`` (contains a null
    pair), ``zero`` (``s`` identically 0), ``degenerate`` (repeated rows and
    columns) or ``integer``.
    """
    styles = ("dense", "sparse", "null", "zero", "degenerate", "integer")
    style = style or styles[int(rng.integers(len(styles)))]
    if style == "integer":
        r = rng.integers(0, 4, (k, m)).astype(float)
        s = rng.integers(0, 4, m).astype(float)
    else:
        density = 1.0 if style == "dense" else rng.uniform(0.2, 0.9)
        r = rng.uniform(0, 2, (k, m)) * (rng.random((k, m)) < density)
        s = rng.uniform(0, 2, m) * (rng.random(m) < 0.9)
    if style == "zero":
        s[:] = 0.0
    if style == "degenerate" and k > 1 and m > 1:
        r[k // 2 :] = r[: k - k // 2]
        r[:, m // 2] = r[:, 0]
        s[m // 2] = s[0]
    for j in range(m):
        if s[j] > 0 and not np.any(r[:, j] > 0):
            r[int(rng.integers(k)), j] = rng.uniform(0.1, 2.0)
    null = None
    if style == "null":
        j0 = int(rng.integers(m))
        r[:, j0] = 0.0
        s[j0] = 0.0
        null = j0
    return build_instance(r, s, p, null_pair=null, family=f"random-{style}",
                          metadata={"style": style})


def acceptance_corpus(seed: int = 2024, count: int = 500, max_size: int = 50) -> list[SummingInstance]:
    rng = np.random.default_rng(seed)
    out = []
    for t in range(count):
        k = int(rng.integers(1, max_size + 1))
        m = int(rng.integers(1, max_size + 1))
        out.append(random_instance(rng, k, m, P_VALUES[t % len(P_VALUES)]))
    return out


def _unit_rows(rng, count, dim):
    X = rng.standard_normal((count, dim))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def shipped_families(seed: int = 0, p: float = 2.0) -> dict[str, Prepared]:
    """One randomly populated instance of every shipped family."""
    rng = np.random.default_rng(seed)
    D = Discretization
    out: dict[str, Prepared] = {}

    T = rng.standard_normal((3, 2))
    X = np.vstack([rng.standard_normal((8, 2)), np.zeros((1, 2))])
    out["linear"] = prepare_linear(LinearOperatorSpec(T, X, rng.uniform(-2, 2, 9), D("sphere-grid", 64)), p)

    pts = rng.standard_normal((5, 2))
    dx = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    qts = rng.standard_normal((4, 2))
    dy = np.linalg.norm(qts[:, None] - qts[None], axis=2)
    triples = [(int(rng.integers(5)), int(rng.integers(5)), float(rng.uniform(-2, 2))) for _ in range(6)]
    triples.append((2, 2, 1.0))
    out["lipschitz"] = prepare_lipschitz(
        LipschitzSpec(dx, dy, rng.integers(0, 4, 5).tolist(), triples, rng.uniform(-1, 1, 7), sample_count=60, seed=seed), p)

    tensor = rng.standard_normal((2, 2, 2))
    tuples = [(rng.standard_normal(2), rng.standard_normal(2)) for _ in range(6)]
    tuples.append((np.zeros(2), rng.standard_normal(2)))
    tuples.append((np.zeros(2), np.zeros(2)))
    balls = [D("sphere-grid", 12), D("cube-dual")]
    for fam in ("dominated", "strongly-summing", "semi-integral", "tau-p"):
        spec = MultilinearSpec(
            tensor, fam, tuples,
            scalars=rng.uniform(-2, 2, 8),
            functionals=rng.standard_normal((8, 2)) if fam == "tau-p" else None,
            component_balls=balls, target_ball=D("sphere-grid", 12), forms_count=8, seed=seed,
        )
        out[f"multilinear-{fam}"] = prepare_multilinear(spec, p)

    A = rng.standard_normal((2, 2, 2))
    A = (A + A.transpose(0, 2, 1)) / 2
    Xp = np.vstack([rng.standard_normal((6, 2)), np.zeros((1, 2))])
    for fam in ("dominated", "strongly-summing"):
        out[f"polynomial-{fam}"] = prepare_polynomial(
            PolynomialSpec(A, fam, Xp, rng.uniform(-2, 2, 7), D("sphere-grid", 24), forms_count=8, seed=seed), p)

    # alpha-subhomogeneous: f(x) = ||x||^2 * y0 is 2-homogeneous with f(0) = 0
    y0 = np.array([0.6, 0.8])
    Xs = np.vstack([rng.standard_normal((6, 2)), np.zeros((1, 2))])
    table = SampledMap.from_function(lambda x: float(x @ x) * y0, Xs)
    out["subhomogeneous"] = prepare_subhomogeneous(table, 2.0, Xs, D("cube-dual"), p, scalars=rng.uniform(-2, 2, 7))

    a = rng.standard_normal(2)
    Xa = np.vstack([rng.standard_normal((6, 2)), np.zeros((1, 2))])
    g = lambda x: np.array([np.sin(x[0]) + x[1] ** 2, np.cos(x[1])])
    table = SampledMap.from_function(g, np.vstack([a, a + Xa]))
    out["arbitrary-at-point"] = prepare_arbitrary_at_point(table, a, Xa, D("cross-polytope-dual"), p, rng.uniform(0.1, 3, 7))
    return out


@dataclass
class SyntheticFamily:
    """A deliberately broken kernel: ``S(x, eta b) = eta^2 S(x, b)``."""

    samples: list
    null_element: np.ndarray

    @staticmethod
    def r_eval(phi, x, b):
        return float(abs(b) * abs(np.dot(phi, x)))

    @staticmethod
    def s_eval(x, b):
        return float(b * b * np.linalg.norm(x))


def synthetic_violating_family(seed: int = 0, count: int = 100) -> SyntheticFamily:
    rng = np.random.default_rng(seed)
    samples = [(_unit_rows(rng, 1, 2)[0], rng.standard_normal(2), float(rng.uniform(0.5, 2))) for _ in range(count)]
    return SyntheticFamily(samples, np.zeros(2))


def collapse_dataset(rng: np.random.Generator, p: float) -> dict[str, SummingInstance]:
    """One random linear dataset pushed through every builder that must reduce to it at n = 1."""
    d_in, d_out, m = int(rng.integers(1, 4)), int(rng.integers(1, 4)), int(rng.integers(2, 8))
    T = rng.standard_normal((d_out, d_in))
    X = rng.standard_normal((m, d_in))
    lam = rng.uniform(-2, 2, m)
    tag = ("cube-dual", "cross-polytope-dual", "sphere-grid")[int(rng.integers(3))]
    ball = Discretization(tag, 48, int(rng.integers(1000)))
    out = {"linear": prepare_linear(LinearOperatorSpec(T, X, lam, ball), p).instance()}
    out["multilinear-dominated"] = prepare_multilinear(
        MultilinearSpec(T, "dominated", [(x,) for x in X], scalars=lam, component_balls=[ball]), p).instance()
    out["polynomial-degree-1"] = prepare_polynomial(PolynomialSpec(T, "dominated", X, lam, ball), p).instance()
    table = SampledMap.from_function(lambda x: T @ x, np.vstack([np.zeros(d_in), X]))
    out["subhomogeneous-alpha-1"] = prepare_subhomogeneous(table, 1.0, X, ball, p, scalars=lam).instance()
    # weights |lam|^p reproduce lam after the 1/p fold
    out["arbitrary-at-0"] = prepare_arbitrary_at_point(
        lambda x: T @ x, np.zeros(d_in), X, ball, p, np.abs(lam) ** p).instance()
    return out


def engineered_rational_instance(rng: np.random.Generator, m: int, bound: int = 10) -> tuple[SummingInstance, np.ndarray]:
    """Integer data (p = 1) whose LP optimum is an integer vector with entries <= ``bound``.

    Pick an integer multiplicity vector ``v``, the row ``i*`` most loaded by
    ``v``, and set ``s_j = r_{i* j}`` where ``v_j > 0`` (smaller elsewhere).
    Then ``y = e_{i*}`` is dual feasible with value 1, and ``v`` attains ratio
    1, so ``pi = 1`` exactly.
    """
    k = int(rng.integers(1, 5))
    while True:
        r = rng.integers(0, 6, (k, m)).astype(float)
        v = rng.integers(0, bound + 1, m)
        if v.any() and np.any(r @ v > 0):
            break
    i_star = int(np.argmax(r @ v))
    s = r[i_star].copy()
    off = v == 0
    s[off] = np.floor(s[off] * rng.uniform(0, 1, off.sum()))
    return build_instance(r, s, 1.0, family="engineered-rational"), v


def summary_row(family: str, inst: SummingInstance, pi: float, c: float, gap: float, status: str) -> dict:
    fmt = lambda v: "inf" if math.isinf(v) else format(float(v), ".17g")
    return {"family": family, "m": inst.m, "k": inst.k, "p": format(inst.p, ".17g"),
            "pi": fmt(pi), "c": fmt(c), "gap": fmt(gap), "status": status}
