"""Builders turning concrete summing classes into :class:`SummingInstance` objects.

Every builder goes through a ``prepare_*`` step that produces a
:class:`Prepared` bundle: the finite K points, the test pairs ``(x_j, b_j)``,
and scalar evaluators ``R(phi, x, b)`` and ``S(x, b)`` for the family (the
mapping is bound inside ``S``).  The instance matrices are computed in
vectorized form; the scalar kernel is kept for axiom validation and for
cross-checking the matrices entry by entry.

Finite-dimensional reductions used throughout:

* dual unit balls are replaced by their extreme points when the ball is a
  polytope (l1 and linf domains) and by a grid or quasi-random sample of the
  sphere for Euclidean domains;
* the bidual ball of a finite-dimensional target is the target ball itself;
* the dual of a product ``X_1 x ... x X_n`` normed by the max of the
  component norms is the l1-sum of the component duals, whose extreme points
  are the component extreme points embedded one slot at a time.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .balls import (
    NORMS,
    Discretization,
    ball_argmax_linear,
    dual_ball_points,
    norm,
    sphere_of_norm_samples,
    unit_ball_extremes,
)
from .bruteforce import DEFAULT_BUDGET, pi_by_multisets
from .core_model import InstanceError, SummingInstance, build_instance
from .domination import summing_constant
from .lp_core import LpProblem, OPTIMAL, solve_lp

METRIC_TOL = 1e-12
SYMMETRY_TOL = 1e-12

MULTILINEAR_FAMILIES = ("dominated", "strongly-summing", "semi-integral", "tau-p")
POLYNOMIAL_FAMILIES = ("dominated", "strongly-summing")


class MissingEntryError(KeyError):
    pass


class SampledMap:
    """A mapping known only on finitely many points; lookups must hit a sample."""

    def __init__(self, points, values, tol: float = 1e-12):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        self.values = values
        if len(self.points) != len(self.values):
            raise InstanceError("table has different numbers of points and values")
        self.tol = tol

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        d = np.max(np.abs(self.points - x[None, :]), axis=1)
        i = int(np.argmin(d))
        if d[i] > self.tol:
            raise MissingEntryError(f"no table entry at {x.tolist()}")
        return self.values[i]

    @classmethod
    def from_function(cls, f: Callable, points) -> "SampledMap":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(pts, [np.atleast_1d(f(x)) for x in pts])

    def to_dict(self) -> dict:
        return {"points": self.points.tolist(), "values": self.values.tolist()}


def _apply(f, x) -> np.ndarray:
    try:
        return np.atleast_1d(np.asarray(f(x), dtype=float))
    except MissingEntryError as exc:
        raise InstanceError(f"missing table entry: {exc.args[0]}") from None


@dataclass
class Prepared:
    """K points, test pairs, and the scalar kernel of one family instance."""

    family: str
    p: float
    k_points: list
    pairs: list  # (x, b)
    r_eval: Callable[[Any, Any, Any], float]
    s_eval: Callable[[Any, Any], float]
    null_element: Any
    r_matrix: np.ndarray
    s_vector: np.ndarray
    null_pair: int | None
    k_labels: list
    pair_labels: list
    metadata: dict = field(default_factory=dict)

    def instance(self) -> SummingInstance:
        return build_instance(
            self.r_matrix,
            self.s_vector,
            self.p,
            k_labels=self.k_labels,
            pair_labels=self.pair_labels,
            null_pair=self.null_pair,
            family=self.family,
            metadata=self.metadata,
        )

    def axiom_samples(self, count: int, rng: np.random.Generator) -> list:
        out = []
        for _ in range(count):
            phi = self.k_points[rng.integers(len(self.k_points))]
            x, b = self.pairs[rng.integers(len(self.pairs))]
            out.append((phi, x, b))
        return out


def _first_null(mask) -> int | None:
    idx = np.flatnonzero(mask)
    return int(idx[0]) if idx.size else None


def _check_p(p):
    p = float(p)
    if not p > 0 or not math.isfinite(p):
        raise InstanceError(f"p must be finite and > 0, got {p}")
    return p


def _scalars(scalars, m: int) -> np.ndarray:
    if scalars is None:
        return np.ones(m)
    lam = np.asarray(scalars, dtype=float)
    if lam.shape != (m,):
        raise InstanceError(f"expected {m} scalars, got shape {lam.shape}")
    return lam


# ==========================================================================
# linear operators


@dataclass
class LinearOperatorSpec:
    matrix: Any
    test_vectors: Any
    scalars: Any = None
    domain_ball: Discretization = field(default_factory=Discretization)
    target_norm: str = "l2"


def _functional_kernel(family, p, phis, X, lam, s, target_meta, null_mask, extra_meta=None, s_eval=None):
    """Shared shape for every family with K = dual ball and R = |b| |phi(x)|."""
    r = np.abs(lam)[None, :] * np.abs(phis @ X.T)

    def r_eval(phi, x, b):
        return float(abs(b) * abs(np.dot(phi, x)))

    meta = {"family": family, **target_meta, **(extra_meta or {})}
    return Prepared(
        family=family,
        p=p,
        k_points=list(phis),
        pairs=list(zip(list(X), list(lam))),
        r_eval=r_eval,
        s_eval=s_eval,
        null_element=np.zeros(X.shape[1]),
        r_matrix=r,
        s_vector=s,
        null_pair=_first_null(null_mask),
        k_labels=[tuple(v) for v in phis.tolist()],
        pair_labels=[f"x{j}" for j in range(len(X))],
        metadata=meta,
    )


def prepare_linear(spec: LinearOperatorSpec, p) -> Prepared:
    p = _check_p(p)
    T = np.atleast_2d(np.asarray(spec.matrix, dtype=float))
    X = np.asarray(spec.test_vectors, dtype=float)
    if X.size == 0:
        raise InstanceError("empty test set")
    X = np.atleast_2d(X)
    if X.shape[1] != T.shape[1]:
        raise InstanceError(f"test vectors have dimension {X.shape[1]}, operator expects {T.shape[1]}")
    if not np.all(np.isfinite(T)):
        raise InstanceError("operator matrix has non-finite entries")
    if spec.target_norm not in NORMS:
        raise InstanceError(f"unknown target norm {spec.target_norm!r}")
    lam = _scalars(spec.scalars, len(X))
    phis = dual_ball_points(X.shape[1], spec.domain_ball)
    s = np.abs(lam) * norm(X @ T.T, spec.target_norm)
    tn = spec.target_norm

    def s_eval(x, b):
        return float(abs(b) * norm(T @ np.asarray(x, dtype=float), tn))

    null = ~np.any(X != 0, axis=1)
    return _functional_kernel(
        "linear", p, phis, X, lam, s,
        {"domain_ball": spec.domain_ball.to_dict(), "target_norm": tn},
        null, s_eval=s_eval,
    )


def build_linear(spec: LinearOperatorSpec, p) -> SummingInstance:
    """``r_ij = |lam_j| |phi_i(x_j)|`` and ``s_j = |lam_j| ||T x_j||``."""
    return prepare_linear(spec, p).instance()


# ==========================================================================
# Lipschitz maps between finite metric spaces


@dataclass
class LipschitzSpec:
    x_distances: Any
    y_distances: Any
    mapping: Sequence[int]
    triples: Sequence[tuple[int, int, float]]
    scalars: Any = None
    k_functions: Any = None
    sample_count: int = 200
    seed: int = 0
    base: int = 0


def check_metric(d, name: str = "distance matrix") -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise InstanceError(f"{name} must be square, got shape {d.shape}")
    if not np.all(np.isfinite(d)):
        raise InstanceError(f"{name} has non-finite entries")
    if np.any(np.abs(np.diag(d)) > METRIC_TOL):
        i = int(np.argmax(np.abs(np.diag(d))))
        raise InstanceError(f"{name} has nonzero diagonal at ({i},{i})")
    if np.any(d < -METRIC_TOL):
        i, j = np.argwhere(d < -METRIC_TOL)[0]
        raise InstanceError(f"{name} has a negative distance at ({i},{j})")
    if np.any(np.abs(d - d.T) > METRIC_TOL):
        i, j = np.argwhere(np.abs(d - d.T) > METRIC_TOL)[0]
        raise InstanceError(f"{name} is not symmetric at ({i},{j})")
    # d[u, w] <= d[u, v] + d[v, w]
    excess = d[:, None, :] - (d[:, :, None] + d[None, :, :])
    if np.any(excess > METRIC_TOL):
        u, v, w = np.argwhere(excess > METRIC_TOL)[0]
        raise InstanceError(
            f"{name} violates the triangle inequality at ({u},{v},{w}): "
            f"d({u},{w})={d[u, w]} > d({u},{v})+d({v},{w})={d[u, v] + d[v, w]}"
        )
    return d


def sample_lipschitz_ball(d, count: int, rng: np.random.Generator, base: int = 0) -> np.ndarray:
    """Extreme points of ``{g : |g(u) - g(v)| <= d(u, v), g(base) = 0}``.

    Each sample maximizes a random linear objective with the in-house
    simplex, so it is an exact vertex.  Shifting ``h_v = g_v + d(base, v)``
    makes every variable nonnegative and every right-hand side nonnegative.
    Duplicate vertices are dropped.
    """
    d = np.asarray(d, dtype=float)
    n = d.shape[0]
    if n == 1:
        return np.zeros((1, 1))
    others = [v for v in range(n) if v != base]
    idx = {v: t for t, v in enumerate(others)}
    rows, rhs = [], []
    for u in others:
        for v in others:
            if u == v:
                continue
            a = np.zeros(len(others))
            a[idx[v]] += 1.0
            a[idx[u]] -= 1.0
            rows.append(a)
            rhs.append(d[u, v] + d[base, v] - d[base, u])
    for v in others:
        a = np.zeros(len(others))
        a[idx[v]] = 1.0
        rows.append(a)
        rhs.append(2.0 * d[base, v])
    A = np.array(rows)
    b = np.maximum(np.array(rhs), 0.0)
    shift = d[base, others]
    out = []
    seen = set()
    for _ in range(count):
        c = rng.standard_normal(len(others))
        sol = solve_lp(LpProblem(c, A, b))
        if sol.status != OPTIMAL:
            continue
        g = np.zeros(n)
        g[others] = sol.primal - shift
        key = tuple(np.round(g, 12))
        if key in seen:
            continue
        seen.add(key)
        out.append(g)
    return np.array(out)


def prepare_lipschitz(spec: LipschitzSpec, p) -> Prepared:
    p = _check_p(p)
    dx = check_metric(spec.x_distances, "x_distances")
    dy = check_metric(spec.y_distances, "y_distances")
    n = dx.shape[0]
    fmap = np.asarray(spec.mapping, dtype=int)
    if fmap.shape != (n,) or np.any(fmap < 0) or np.any(fmap >= dy.shape[0]):
        raise InstanceError("mapping must assign a valid Y point to every X point")
    if len(spec.triples) == 0:
        raise InstanceError("empty test set")
    triples = [(int(x), int(y), float(a)) for x, y, a in spec.triples]
    for j, (x, y, _) in enumerate(triples):
        if not (0 <= x < n and 0 <= y < n):
            raise InstanceError(f"triple {j} refers to a point outside X")
    lam = _scalars(spec.scalars, len(triples))

    if spec.k_functions is None:
        G = sample_lipschitz_ball(dx, spec.sample_count, np.random.default_rng(spec.seed), spec.base)
        k_meta = {"k_functions": "sampled", "sample_count": spec.sample_count, "seed": spec.seed, "base": spec.base}
    else:
        G = np.atleast_2d(np.asarray(spec.k_functions, dtype=float))
        if G.shape[1] != n:
            raise InstanceError(f"k_functions must have {n} entries each")
        diff = np.abs(G[:, :, None] - G[:, None, :]) - dx[None, :, :]
        if np.any(diff > METRIC_TOL):
            i, u, v = np.argwhere(diff > METRIC_TOL)[0]
            raise InstanceError(f"k_function {i} is not 1-Lipschitz at ({u},{v})")
        k_meta = {"k_functions": "given"}

    xs = np.array([t[0] for t in triples])
    ys = np.array([t[1] for t in triples])
    a = np.array([t[2] for t in triples])
    weight = np.abs(a) ** (1.0 / p) * np.abs(lam)
    r = weight[None, :] * np.abs(G[:, xs] - G[:, ys])
    s = weight * dy[fmap[xs], fmap[ys]]

    def r_eval(g, triple, b):
        x, y, aa = triple
        return float(abs(aa) ** (1.0 / p) * abs(b) * abs(g[x] - g[y]))

    def s_eval(triple, b):
        x, y, aa = triple
        return float(abs(aa) ** (1.0 / p) * abs(b) * dy[fmap[x], fmap[y]])

    null = (xs == ys) | (a == 0) | (lam == 0)
    return Prepared(
        family="lipschitz",
        p=p,
        k_points=list(G),
        pairs=list(zip(triples, lam)),
        r_eval=r_eval,
        s_eval=s_eval,
        null_element=(0, 0, 0.0),
        r_matrix=r,
        s_vector=s,
        null_pair=_first_null(null),
        k_labels=[tuple(g) for g in G.tolist()],
        pair_labels=[list(t) for t in triples],
        metadata={"family": "lipschitz", **k_meta},
    )


def build_lipschitz(spec: LipschitzSpec, p) -> SummingInstance:
    """``r_ij = |a_j|^(1/p) |lam_j| |g_i(x_j) - g_i(y_j)|``; ``s_j`` uses ``d_Y(f x_j, f y_j)``."""
    return prepare_lipschitz(spec, p).instance()


# ==========================================================================
# multilinear maps and polynomials


def multilinear_apply(tensor: np.ndarray, xs: Sequence[np.ndarray]) -> np.ndarray:
    """Contract the trailing axes of ``tensor`` with ``xs`` (in order)."""
    out = np.asarray(tensor, dtype=float)
    for x in reversed(xs):
        out = np.tensordot(out, np.asarray(x, dtype=float), axes=([-1], [0]))
    return out


def _partial_contract(A: np.ndarray, xs, skip: int) -> np.ndarray:
    letters = "abcdefghijklmnop"[: A.ndim]
    ops = [letters[t] for t in range(A.ndim) if t != skip]
    expr = letters + "," + ",".join(ops) + "->" + letters[skip]
    return np.einsum(expr, A, *[xs[t] for t in range(A.ndim) if t != skip])


def estimate_form_norm(A: np.ndarray, norms: Sequence[str], rng: np.random.Generator, starts: int = 16) -> float:
    """Lower estimate of ``sup |A(x_1, ..., x_n)|`` over the product of unit balls.

    Block-coordinate ascent: with all but one argument fixed the form is a
    linear functional, maximized exactly on that ball.  Restarted from random
    extreme points; the result never exceeds the true norm.
    """
    n = A.ndim
    exts = [unit_ball_extremes(A.shape[t], norms[t], resolution=32) for t in range(n)]
    best = 0.0
    for _ in range(starts):
        xs = [exts[t][rng.integers(len(exts[t]))] for t in range(n)]
        val = abs(float(multilinear_apply(A, xs)))
        for _ in range(200):
            for t in range(n):
                xs[t] = ball_argmax_linear(_partial_contract(A, xs, t), norms[t])
            new = abs(float(multilinear_apply(A, xs)))
            if new <= val * (1 + 1e-14):
                val = max(val, new)
                break
            val = new
        best = max(best, val)
    return best


def estimate_polynomial_norm(Q: np.ndarray, kind: str, rng: np.random.Generator, samples: int = 256) -> float:
    """Lower estimate of ``sup_{||x|| <= 1} |Q(x, ..., x)|`` for a symmetric tensor ``Q``."""
    n = Q.ndim
    pts = sphere_of_norm_samples(Q.shape[0], kind, samples, rng)
    best = 0.0
    for x in pts:
        val = abs(float(multilinear_apply(Q, [x] * n)))
        for _ in range(100):
            g = _partial_contract(Q, [x] * n, 0)
            sgn = 1.0 if multilinear_apply(Q, [x] * n) >= 0 else -1.0
            x = ball_argmax_linear(sgn * g, kind)
            new = abs(float(multilinear_apply(Q, [x] * n)))
            if new <= val * (1 + 1e-14):
                val = max(val, new)
                break
            val = new
        best = max(best, val)
    return best


@dataclass
class MultilinearSpec:
    """An n-linear map ``T`` given by ``tensor`` of shape ``(out, d_1, ..., d_n)``.

    ``tuples[j]`` is ``(x_1, ..., x_n)``.  ``scalars`` are the ``lambda_j``
    for the dominated, strongly-summing and semi-integral families;
    ``functionals`` are the ``b_j`` in the target dual for ``tau-p``.
    """

    tensor: Any
    family: str
    tuples: Sequence[Sequence[Any]]
    scalars: Any = None
    functionals: Any = None
    component_balls: Sequence[Discretization] | None = None
    target_ball: Discretization | None = None
    target_norm: str = "l2"
    forms_count: int = 32
    max_elementary: int = 256
    seed: int = 0

    @property
    def arity(self) -> int:
        return np.asarray(self.tensor).ndim - 1


def _check_tensor(tensor, tuples):
    T = np.asarray(tensor, dtype=float)
    if T.ndim < 2:
        raise InstanceError("tensor must have shape (out, d_1, ..., d_n) with n >= 1")
    if not np.all(np.isfinite(T)):
        raise InstanceError("tensor has non-finite entries")
    n = T.ndim - 1
    if len(tuples) == 0:
        raise InstanceError("empty test set")
    tup = []
    for j, t in enumerate(tuples):
        if len(t) != n:
            raise InstanceError(f"arity mismatch: tuple {j} has {len(t)} entries, map is {n}-linear")
        vecs = [np.atleast_1d(np.asarray(x, dtype=float)) for x in t]
        for c, v in enumerate(vecs):
            if v.shape != (T.shape[c + 1],):
                raise InstanceError(f"tuple {j} component {c} has shape {v.shape}, expected ({T.shape[c + 1]},)")
        tup.append(vecs)
    return T, n, tup


def _component_balls(spec_balls, n) -> list[Discretization]:
    if spec_balls is None:
        return [Discretization("sphere-grid", 32, 0)] * n
    balls = list(spec_balls)
    if len(balls) != n:
        raise InstanceError(f"need {n} component balls, got {len(balls)}")
    return balls


def prepare_multilinear(spec: MultilinearSpec, p) -> Prepared:
    p = _check_p(p)
    if spec.family not in MULTILINEAR_FAMILIES:
        raise InstanceError(f"unknown multilinear family {spec.family!r}; expected one of {MULTILINEAR_FAMILIES}")
    if spec.target_norm not in NORMS:
        raise InstanceError(f"unknown target norm {spec.target_norm!r}")
    T, n, tuples = _check_tensor(spec.tensor, spec.tuples)
    m = len(tuples)
    balls = _component_balls(spec.component_balls, n)
    comp = [dual_ball_points(T.shape[t + 1], balls[t]) for t in range(n)]
    values = np.array([multilinear_apply(T, tup) for tup in tuples])  # (m, out)
    tn = spec.target_norm
    # |phi_t(x_{j,t})| for every component t: list of (k_t, m)
    absval = [np.abs(comp[t] @ np.array([tup[t] for tup in tuples]).T) for t in range(n)]
    zero_tuple = tuple(np.zeros(T.shape[t + 1]) for t in range(n))
    null = np.array([all(not np.any(x) for x in tup) for tup in tuples])
    meta = {
        "family": f"multilinear-{spec.family}",
        "arity": n,
        "component_balls": [b.to_dict() for b in balls],
        "target_norm": tn,
        "seed": spec.seed,
    }
    rng = np.random.default_rng(spec.seed)

    if spec.family == "tau-p":
        if spec.functionals is None:
            raise InstanceError("tau-p family needs target functionals b_j")
        B = np.atleast_2d(np.asarray(spec.functionals, dtype=float))
        if B.shape != (m, T.shape[0]):
            raise InstanceError(f"functionals must have shape ({m}, {T.shape[0]}), got {B.shape}")
        tb = spec.target_ball or Discretization("sphere-grid", 32, 0)
        # The bidual ball of a finite-dimensional target is its own unit ball;
        # extreme points of that ball are the dual-ball points of its dual norm.
        psi = unit_ball_extremes(T.shape[0], tn, resolution=tb.resolution, seed=tb.seed)
        combos = list(itertools.product(*[range(len(c)) for c in comp], range(len(psi))))
        r = np.ones((len(combos), m))
        for t in range(n):
            r *= absval[t][[c[t] for c in combos]]
        r *= np.abs(psi @ B.T)[[c[n] for c in combos]]
        s = np.abs(np.einsum("jo,jo->j", B, values))
        k_points = [(tuple(comp[t][c[t]] for t in range(n)), psi[c[n]]) for c in combos]

        def r_eval(phi, tup, b):
            phis, ps = phi
            prod = np.prod([abs(np.dot(phis[t], tup[t])) for t in range(n)])
            return float(prod * abs(np.dot(ps, b)))

        def s_eval(tup, b):
            return float(abs(np.dot(b, multilinear_apply(T, tup))))

        meta.update(target_ball="unit ball of target (bidual reduction)", target_resolution=tb.resolution)
        pairs = list(zip([tuple(t) for t in tuples], list(B)))
        null = null | ~np.any(B != 0, axis=1)
        labels = [f"k{i}" for i in range(len(combos))]
        return Prepared(
            f"multilinear-{spec.family}", p, k_points, pairs, r_eval, s_eval,
            zero_tuple, r, s, _first_null(null), labels,
            [f"t{j}" for j in range(m)], meta,
        )

    lam = _scalars(spec.scalars, m)
    pairs = list(zip([tuple(t) for t in tuples], list(lam)))

    if spec.family == "dominated":
        k_points = [(t, comp[t][i]) for t in range(n) for i in range(len(comp[t]))]
        r = np.abs(lam)[None, :] * np.vstack(absval)
        s = np.abs(lam) * norm(values, tn) ** (1.0 / n)

        def r_eval(phi, tup, b):
            t, f = phi
            return float(abs(b) * abs(np.dot(f, tup[t])))

        def s_eval(tup, b):
            return float(abs(b) * norm(multilinear_apply(T, tup), tn) ** (1.0 / n))

        meta.update(product_dual="l1-sum of component duals (max norm on the product)")
        labels = [[t, list(f)] for t, f in k_points]

    elif spec.family == "semi-integral":
        combos = list(itertools.product(*[range(len(c)) for c in comp]))
        r = np.ones((len(combos), m))
        for t in range(n):
            r *= absval[t][[c[t] for c in combos]]
        r *= np.abs(lam)[None, :]
        s = np.abs(lam) * norm(values, tn)
        k_points = [tuple(comp[t][c[t]] for t in range(n)) for c in combos]

        def r_eval(phi, tup, b):
            return float(abs(b) * np.prod([abs(np.dot(phi[t], tup[t])) for t in range(n)]))

        def s_eval(tup, b):
            return float(abs(b) * norm(multilinear_apply(T, tup), tn))

        meta.update(reading="phi = (phi_1, ..., phi_n) acting coordinatewise")
        labels = [f"k{i}" for i in range(len(combos))]

    else:  # strongly-summing
        shapes = T.shape[1:]
        forms = _elementary_forms(comp, spec.max_elementary, rng)
        norms = [b.domain_norm for b in balls]
        for _ in range(spec.forms_count):
            A = rng.standard_normal(shapes)
            est = estimate_form_norm(A, norms, rng)
            if est > 0:
                forms.append(A / est)
        F = np.array([f.ravel() for f in forms])
        E = np.array([_outer(tup).ravel() for tup in tuples])
        r = np.abs(lam)[None, :] * np.abs(F @ E.T)
        s = np.abs(lam) * norm(values, tn)
        k_points = forms

        def r_eval(A, tup, b):
            return float(abs(b) * abs(multilinear_apply(A, tup)))

        def s_eval(tup, b):
            return float(abs(b) * norm(multilinear_apply(T, tup), tn))

        meta.update(
            forms_count=spec.forms_count,
            elementary_forms=len(forms) - spec.forms_count,
            form_norm="block-coordinate-ascent estimate (lower bound of the true norm)",
        )
        labels = [f"form{i}" for i in range(len(forms))]

    return Prepared(
        f"multilinear-{spec.family}", p, k_points, pairs, r_eval, s_eval,
        zero_tuple, r, s, _first_null(null | (lam == 0)), labels,
        [f"t{j}" for j in range(m)], meta,
    )


def _outer(vecs) -> np.ndarray:
    out = np.asarray(vecs[0], dtype=float)
    for v in vecs[1:]:
        out = np.multiply.outer(out, v)
    return out


def _elementary_forms(comp, limit, rng) -> list[np.ndarray]:
    sizes = [len(c) for c in comp]
    total = int(np.prod(sizes))
    if total <= limit:
        combos = itertools.product(*[range(s) for s in sizes])
    else:
        combos = [tuple(int(rng.integers(s)) for s in sizes) for _ in range(limit)]
    return [_outer([comp[t][c[t]] for t in range(len(comp))]) for c in combos]


def build_multilinear(spec: MultilinearSpec, p) -> SummingInstance:
    """Instance for one of the dominated, strongly-summing, semi-integral or tau-p recipes."""
    return prepare_multilinear(spec, p).instance()


@dataclass
class PolynomialSpec:
    """An n-homogeneous polynomial via its symmetric tensor ``(out, d, ..., d)``."""

    tensor: Any
    family: str
    test_points: Any
    scalars: Any = None
    domain_ball: Discretization = field(default_factory=lambda: Discretization("sphere-grid", 32, 0))
    target_norm: str = "l2"
    forms_count: int = 32
    seed: int = 0

    @property
    def degree(self) -> int:
        return np.asarray(self.tensor).ndim - 1


def _check_symmetric(T: np.ndarray) -> None:
    n = T.ndim - 1
    for perm in itertools.permutations(range(1, n + 1)):
        diff = np.max(np.abs(T - np.transpose(T, (0, *perm))))
        if diff > SYMMETRY_TOL:
            raise InstanceError(f"tensor is not symmetric (deviation {diff:.3g} under permutation {perm})")


def prepare_polynomial(spec: PolynomialSpec, p) -> Prepared:
    p = _check_p(p)
    if spec.family not in POLYNOMIAL_FAMILIES:
        raise InstanceError(f"unknown polynomial family {spec.family!r}; expected one of {POLYNOMIAL_FAMILIES}")
    T = np.asarray(spec.tensor, dtype=float)
    if T.ndim < 2 or len(set(T.shape[1:])) != 1:
        raise InstanceError("polynomial tensor must have shape (out, d, ..., d)")
    _check_symmetric(T)
    n = T.ndim - 1
    X = np.atleast_2d(np.asarray(spec.test_points, dtype=float))
    if X.size == 0:
        raise InstanceError("empty test set")
    if X.shape[1] != T.shape[1]:
        raise InstanceError(f"test points have dimension {X.shape[1]}, polynomial expects {T.shape[1]}")
    m = len(X)
    lam = _scalars(spec.scalars, m)
    tn = spec.target_norm
    values = np.array([multilinear_apply(T, [x] * n) for x in X])
    phis = dual_ball_points(X.shape[1], spec.domain_ball)
    null = ~np.any(X != 0, axis=1) | (lam == 0)
    meta = {
        "family": f"polynomial-{spec.family}",
        "degree": n,
        "domain_ball": spec.domain_ball.to_dict(),
        "target_norm": tn,
        "seed": spec.seed,
    }

    if spec.family == "dominated":
        s = np.abs(lam) * norm(values, tn) ** (1.0 / n)

        def s_eval(x, b):
            return float(abs(b) * norm(multilinear_apply(T, [x] * n), tn) ** (1.0 / n))

        meta.update(certificate_exponent=n / p, k_reduction="diagonal: phi(x, ..., x) over the product dual, duplicate rows merged")
        prep = _functional_kernel(f"polynomial-{spec.family}", p, phis, X, lam, s, {}, null, meta, s_eval=s_eval)
        return prep

    rng = np.random.default_rng(spec.seed)
    kind = spec.domain_ball.domain_norm
    forms = [_outer([phi] * n) for phi in phis]
    for _ in range(spec.forms_count):
        A = rng.standard_normal(T.shape[1:])
        A = sum(np.transpose(A, perm) for perm in itertools.permutations(range(n))) / math.factorial(n)
        est = estimate_polynomial_norm(A, kind, rng)
        if est > 0:
            forms.append(A / est)
    F = np.array([f.ravel() for f in forms])
    E = np.array([_outer([x] * n).ravel() for x in X])
    r = np.abs(lam)[None, :] * np.abs(F @ E.T)
    s = np.abs(lam) * norm(values, tn)

    def r_eval(Q, x, b):
        return float(abs(b) * abs(multilinear_apply(Q, [x] * n)))

    def s_eval(x, b):
        return float(abs(b) * norm(multilinear_apply(T, [x] * n), tn))

    meta.update(
        forms_count=spec.forms_count,
        power_forms=len(phis),
        form_norm="sampled sup plus fixed-point ascent (lower bound of the true norm)",
    )
    return Prepared(
        f"polynomial-{spec.family}", p, forms, list(zip(list(X), list(lam))), r_eval, s_eval,
        np.zeros(X.shape[1]), r, s, _first_null(null),
        [f"form{i}" for i in range(len(forms))], [f"x{j}" for j in range(m)], meta,
    )


def build_polynomial(spec: PolynomialSpec, p) -> SummingInstance:
    """Dominated or strongly-summing instance of an n-homogeneous polynomial."""
    return prepare_polynomial(spec, p).instance()


# ==========================================================================
# alpha-subhomogeneous and arbitrary mappings


def prepare_subhomogeneous(f, alpha, test_points, dual_ball: Discretization, p, *, scalars=None, target_norm="l2") -> Prepared:
    p = _check_p(p)
    alpha = float(alpha)
    if not alpha > 0:
        raise InstanceError(f"alpha must be > 0, got {alpha}")
    X = np.atleast_2d(np.asarray(test_points, dtype=float))
    if X.size == 0:
        raise InstanceError("empty test set")
    f0 = _apply(f, np.zeros(X.shape[1]))
    if np.any(f0 != 0):
        raise InstanceError(f"f(0) must be 0, got {f0.tolist()}")
    lam = _scalars(scalars, len(X))
    fx = np.array([_apply(f, x) for x in X])
    s = np.abs(lam) * norm(fx, target_norm) ** (1.0 / alpha)
    phis = dual_ball_points(X.shape[1], dual_ball)

    def s_eval(x, b):
        return float(abs(b) * norm(_apply(f, x), target_norm) ** (1.0 / alpha))

    null = ~np.any(X != 0, axis=1) | (lam == 0)
    return _functional_kernel(
        "subhomogeneous", p, phis, X, lam, s,
        {"domain_ball": dual_ball.to_dict(), "target_norm": target_norm, "alpha": alpha},
        null, s_eval=s_eval,
    )


def build_subhomogeneous(f, alpha, test_points, dual_ball: Discretization, p, *, scalars=None, target_norm="l2") -> SummingInstance:
    """``r_ij = |eta_j| |phi_i(x_j)|`` and ``s_j = |eta_j| ||f(x_j)||^(1/alpha)``."""
    return prepare_subhomogeneous(f, alpha, test_points, dual_ball, p, scalars=scalars, target_norm=target_norm).instance()


def prepare_arbitrary_at_point(f, a, test_vectors, dual_ball: Discretization, p, scalar_weights=None, *, target_norm="l2") -> Prepared:
    p = _check_p(p)
    a = np.atleast_1d(np.asarray(a, dtype=float))
    X = np.atleast_2d(np.asarray(test_vectors, dtype=float))
    if X.size == 0:
        raise InstanceError("empty test set")
    if X.shape[1] != a.shape[0]:
        raise InstanceError(f"test vectors have dimension {X.shape[1]}, base point has {a.shape[0]}")
    weights = np.ones(len(X)) if scalar_weights is None else np.asarray(scalar_weights, dtype=float)
    if weights.shape != (len(X),):
        raise InstanceError(f"expected {len(X)} weights, got shape {weights.shape}")
    # The weight b_j enters the inequality at power one; folding it in as
    # lam_j = |b_j|^(1/p) reproduces it exactly after taking p-th powers.
    lam = np.abs(weights) ** (1.0 / p)
    fa = _apply(f, a)
    diffs = np.array([_apply(f, a + x) - fa for x in X])
    s = lam * norm(diffs, target_norm)
    phis = dual_ball_points(X.shape[1], dual_ball)

    def s_eval(x, b):
        return float(abs(b) * norm(_apply(f, a + np.asarray(x, dtype=float)) - fa, target_norm))

    null = ~np.any(X != 0, axis=1) | (weights == 0)
    return _functional_kernel(
        "arbitrary-at-point", p, phis, X, lam, s,
        {"domain_ball": dual_ball.to_dict(), "target_norm": target_norm, "base_point": a.tolist(),
         "weights": weights.tolist()},
        null, s_eval=s_eval,
    )


def build_arbitrary_at_point(f, a, test_vectors, dual_ball: Discretization, p, scalar_weights=None, *, target_norm="l2") -> SummingInstance:
    """``r_ij = |b_j|^(1/p) |phi_i(x_j)|``, ``s_j = |b_j|^(1/p) ||f(a + x_j) - f(a)||``."""
    return prepare_arbitrary_at_point(f, a, test_vectors, dual_ball, p, scalar_weights, target_norm=target_norm).instance()


@dataclass
class WeightedEquivalenceReport:
    lp_value: float
    multiset_value: float
    gap: float
    relative_gap: float
    bound: int
    mode: str
    multiplicities: np.ndarray


def weighted_equivalence_check(instance: SummingInstance, multiplicity_bound: int, budget: int = DEFAULT_BUDGET) -> WeightedEquivalenceReport:
    """Compare the real-weight LP value with the best integer-repetition ratio."""
    lp, _ = summing_constant(instance)
    rep = pi_by_multisets(instance, multiplicity_bound, budget)
    gap = lp - rep.best_value
    rel = gap / lp if lp and math.isfinite(lp) else (0.0 if gap == 0 else math.inf)
    return WeightedEquivalenceReport(lp, rep.best_value, gap, rel, multiplicity_bound, rep.mode, rep.best_multiplicities)


# ==========================================================================
# JSON family specs


def _disc(d) -> Discretization:
    if d is None:
        return Discretization()
    if isinstance(d, str):
        return Discretization(d)
    return Discretization(d.get("tag", "sphere-grid"), int(d.get("resolution", 720)), int(d.get("seed", 0)))


def _table(d) -> SampledMap:
    if not isinstance(d, dict) or "points" not in d or "values" not in d:
        raise InstanceError("field 'table' must be an object with 'points' and 'values'")
    return SampledMap(d["points"], d["values"])


def prepare_from_spec(d: dict) -> Prepared:
    """Dispatch a family-spec JSON object (``{"builder": ..., "p": ..., ...}``)."""
    if not isinstance(d, dict):
        raise InstanceError("family spec must be a JSON object")
    builder = d.get("builder")
    if "p" not in d:
        raise InstanceError("missing field 'p'")
    p = d["p"]

    def need(key):
        if key not in d:
            raise InstanceError(f"missing field {key!r} for builder {builder!r}")
        return d[key]

    if builder == "linear":
        return prepare_linear(
            LinearOperatorSpec(need("matrix"), need("test_vectors"), d.get("scalars"),
                               _disc(d.get("domain_ball")), d.get("target_norm", "l2")), p)
    if builder == "lipschitz":
        return prepare_lipschitz(
            LipschitzSpec(need("x_distances"), need("y_distances"), need("mapping"), need("triples"),
                          d.get("scalars"), d.get("k_functions"), int(d.get("sample_count", 200)),
                          int(d.get("seed", 0)), int(d.get("base", 0))), p)
    if builder == "multilinear":
        balls = d.get("component_balls")
        return prepare_multilinear(
            MultilinearSpec(need("tensor"), need("family"), need("tuples"), d.get("scalars"),
                            d.get("functionals"), None if balls is None else [_disc(b) for b in balls],
                            _disc(d["target_ball"]) if d.get("target_ball") else None,
                            d.get("target_norm", "l2"), int(d.get("forms_count", 32)),
                            int(d.get("max_elementary", 256)), int(d.get("seed", 0))), p)
    if builder == "polynomial":
        return prepare_polynomial(
            PolynomialSpec(need("tensor"), need("family"), need("test_points"), d.get("scalars"),
                           _disc(d.get("domain_ball", {"tag": "sphere-grid", "resolution": 32})),
                           d.get("target_norm", "l2"), int(d.get("forms_count", 32)), int(d.get("seed", 0))), p)
    if builder == "subhomogeneous":
        return prepare_subhomogeneous(
            _table(need("table")), need("alpha"), need("test_points"), _disc(d.get("domain_ball")), p,
            scalars=d.get("scalars"), target_norm=d.get("target_norm", "l2"))
    if builder == "arbitrary_at_point":
        return prepare_arbitrary_at_point(
            _table(need("table")), need("a"), need("test_vectors"), _disc(d.get("domain_ball")), p,
            d.get("weights"), target_norm=d.get("target_norm", "l2"))
    raise InstanceError(f"unknown builder {builder!r}")


def build_from_spec(d: dict) -> SummingInstance:
    return prepare_from_spec(d).instance()
