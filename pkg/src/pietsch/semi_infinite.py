"""Constraint generation for a continuum of K points.

The finite primal LP is solved on the K points generated so far; its optimal
multiplicities ``w`` are handed to a K-oracle, which returns the point of K
maximizing ``sum_j w_j R(phi, x_j, b_j)^p``.  If that maximum is at most
``1 + gap_tol`` the normalized ``w`` is (nearly) feasible for the full
problem and the loop stops; otherwise the maximizing point becomes a new row.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Protocol, Sequence

import numpy as np

from .core_model import _jsonable, build_instance, SummingInstance
from .domination import (
    DominationCertificate,
    dominating_measure,
    summing_constant,
    uncovered_pairs,
    verify_certificate,
)

DEFAULT_GAP_TOL = 1e-6
DEFAULT_MAX_ITER = 200
DUPLICATE_TOL = 1e-12


class KOracle(Protocol):
    """Argmax access to a compact K.

    ``row(point)`` returns the length-m vector ``R(point, x_j, b_j)``;
    ``argmax(w)`` returns ``(point, value, row)`` with ``value = sum_j w_j
    row_j^p`` maximal over K up to the oracle's own tolerance.
    """

    p: float

    def row(self, point: Any) -> np.ndarray: ...

    def argmax(self, weights: np.ndarray) -> tuple[Any, float, np.ndarray]: ...


@dataclass
class ExchangeRecord:
    iteration: int
    oracle_point: Any  # appended to the relaxation unless this record closes the loop
    primal_value: float
    dual_value: float
    lower_bound: float
    oracle_value: float
    gap: float
    certificate_valid: bool

    def to_dict(self) -> dict:
        d = {k: _jsonable(v) for k, v in self.__dict__.items()}
        for key in ("primal_value", "dual_value", "lower_bound", "oracle_value", "gap"):
            if isinstance(d[key], float) and not math.isfinite(d[key]):
                d[key] = None
        return d


@dataclass
class ExchangeHistory:
    iterations: list[ExchangeRecord] = field(default_factory=list)
    status: str = "running"

    def to_jsonl(self) -> str:
        lines = [json.dumps(r.to_dict(), sort_keys=True) for r in self.iterations]
        lines.append(json.dumps({"final_status": self.status}, sort_keys=True))
        return "\n".join(lines) + "\n"


@dataclass
class ExchangeResult:
    pi: float
    certificate: DominationCertificate | None
    history: ExchangeHistory
    converged: bool
    lower_bound: float
    upper_bound: float
    instance: SummingInstance
    points: list = field(default_factory=list)

    @property
    def status(self) -> str:
        return self.history.status

    @property
    def oracle_calls(self) -> int:
        return len(self.history.iterations)


def solve_with_oracle(
    s_vector,
    p: float,
    oracle: KOracle,
    seed_points: Sequence[Any],
    gap_tol: float = DEFAULT_GAP_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    *,
    pair_labels: Sequence | None = None,
) -> ExchangeResult:
    """Run the exchange method; see the module docstring for the loop.

    Returns an :class:`ExchangeResult`.  On success ``pi`` is the finite
    relaxation value, within ``gap_tol`` (relative) of the semi-infinite
    value, and the certificate lives on the generated rows.  If ``max_iter``
    is exhausted or the oracle repeats a row while the gap is open, the
    result is flagged non-converged and carries the bracket
    ``[lower_bound, upper_bound]``.
    """
    if not seed_points:
        raise ValueError("need at least one seed point")
    s = np.asarray(s_vector, dtype=float)
    points = list(seed_points)
    rows = [np.asarray(oracle.row(pt), dtype=float) for pt in points]
    history = ExchangeHistory()
    lower = 0.0
    upper = math.inf
    inst = None
    cert = None
    pi = math.inf

    for it in range(1, max_iter + 1):
        inst = build_instance(
            np.vstack(rows), s, p,
            k_labels=[_jsonable(pt) for pt in points],
            pair_labels=pair_labels,
            family="exchange",
        )
        pi, witness = summing_constant(inst)
        if math.isinf(pi):
            w = np.zeros(inst.m)
            w[uncovered_pairs(inst)] = 1.0
            pt, val, row = oracle.argmax(w)
            history.iterations.append(
                ExchangeRecord(it, pt, math.inf, math.inf, lower, float(val), math.inf, False)
            )
            if val <= 0:
                history.status = "not summing"
                return ExchangeResult(math.inf, None, history, True, math.inf, math.inf, inst, points)
            points.append(pt)
            rows.append(np.asarray(row, dtype=float))
            continue

        cert = dominating_measure(inst)
        valid = verify_certificate(inst, cert).valid
        upper = pi
        if pi == 0.0:
            history.iterations.append(ExchangeRecord(it, None, 0.0, cert.c ** p, 0.0, 0.0, 0.0, valid))
            history.status = "converged"
            return ExchangeResult(0.0, cert, history, True, 0.0, 0.0, inst, points)

        pt, val, row = oracle.argmax(witness.weights)
        val = float(val)
        lower = max(lower, pi / max(val, 1.0))
        gap = max(val - 1.0, 0.0)
        history.iterations.append(ExchangeRecord(it, pt, pi, cert.c ** p, lower, val, gap, valid))
        if val <= 1.0 + gap_tol:
            history.status = "converged"
            return ExchangeResult(pi, cert, history, True, lower, upper, inst, points)

        row = np.asarray(row, dtype=float)
        if any(np.max(np.abs(row - old)) <= DUPLICATE_TOL for old in rows):
            history.status = "stalled: oracle returned an existing row with the gap open"
            return ExchangeResult(pi, cert, history, False, lower, upper, inst, points)
        points.append(pt)
        rows.append(row)

    history.status = "max_iter exceeded"
    return ExchangeResult(pi, cert, history, False, lower, upper, inst, points)


# --------------------------------------------------------------------------
# built-in oracles


class FiniteKOracle:
    """Exhaustive argmax over an explicit finite K (rows given in advance)."""

    def __init__(self, rows, p: float, points: Sequence | None = None):
        self.rows = np.asarray(rows, dtype=float)
        self.p = float(p)
        self.points = list(range(len(self.rows))) if points is None else list(points)

    def row(self, point) -> np.ndarray:
        return self.rows[self.points.index(point)]

    def argmax(self, weights):
        vals = (self.rows ** self.p) @ np.asarray(weights, dtype=float)
        i = int(np.argmax(vals))
        return self.points[i], float(vals[i]), self.rows[i]


class EuclideanSphereOracle:
    """K = unit sphere of the dual of Euclidean R^d, R(phi, x, lam) = |lam| |<phi, x>|.

    For ``p = 2`` the argmax is the top eigenvector of ``sum_j w_j lam_j^2
    x_j x_j^T``.  In the plane the maximizer is found by an angular scan
    followed by golden-section refinement; in higher dimension by multistart
    normalized-gradient ascent (a monotone scheme for convex objectives, so
    only local optimality is guaranteed when ``p < 1``).
    """

    def __init__(self, test_vectors, scalars, p: float, *, scan: int = 4096, starts: int = 64, seed: int = 0):
        self.x = np.atleast_2d(np.asarray(test_vectors, dtype=float))
        self.lam = np.abs(np.asarray(scalars, dtype=float))
        self.p = float(p)
        self.d = self.x.shape[1]
        self.scan = scan
        self.starts = starts
        self.seed = seed

    def row(self, point) -> np.ndarray:
        phi = np.asarray(point, dtype=float)
        return self.lam * np.abs(self.x @ phi)

    def _objective(self, phis: np.ndarray, w: np.ndarray) -> np.ndarray:
        return (np.abs(phis @ self.x.T) ** self.p * self.lam ** self.p) @ w

    def argmax(self, weights):
        w = np.asarray(weights, dtype=float)
        if self.p == 2.0:
            M = (self.x * (w * self.lam ** 2)[:, None]).T @ self.x
            vals, vecs = np.linalg.eigh(M)
            phi = vecs[:, -1]
        elif self.d == 2:
            phi = self._circle_argmax(w)
        else:
            phi = self._ascent_argmax(w)
        phi = _canonical_sign(phi / np.linalg.norm(phi))
        row = self.row(phi)
        return tuple(float(v) for v in phi), float((row ** self.p) @ w), row

    def _circle_argmax(self, w):
        n = self.scan
        th = np.pi * np.arange(n) / n  # |<phi,x>| is even in phi: half circle suffices
        vals = self._objective(np.column_stack([np.cos(th), np.sin(th)]), w)
        i = int(np.argmax(vals))
        h = np.pi / n
        a, b = th[i] - h, th[i] + h
        f = lambda t: float(self._objective(np.array([[np.cos(t), np.sin(t)]]), w)[0])
        g = (math.sqrt(5) - 1) / 2
        c, d = b - g * (b - a), a + g * (b - a)
        fc, fd = f(c), f(d)
        for _ in range(80):
            if fc > fd:
                b, d, fd = d, c, fc
                c = b - g * (b - a)
                fc = f(c)
            else:
                a, c, fc = c, d, fd
                d = a + g * (b - a)
                fd = f(d)
        t = (a + b) / 2
        if f(t) < vals[i]:
            t = th[i]
        return np.array([math.cos(t), math.sin(t)])

    def _ascent_argmax(self, w):
        rng = np.random.default_rng(self.seed)
        starts = rng.standard_normal((self.starts, self.d))
        starts /= np.linalg.norm(starts, axis=1, keepdims=True)
        coef = w * self.lam ** self.p
        best, best_val = None, -math.inf
        for phi in starts:
            for _ in range(500):
                inner = self.x @ phi
                mag = np.abs(inner)
                scale = np.zeros_like(mag)
                nz = mag > 0
                scale[nz] = mag[nz] ** (self.p - 1)
                grad = self.x.T @ (coef * self.p * scale * np.sign(inner))
                norm = np.linalg.norm(grad)
                if norm == 0:
                    break
                new = grad / norm
                if np.max(np.abs(new - phi)) < 1e-14:
                    phi = new
                    break
                phi = new
            val = float(self._objective(phi[None, :], w)[0])
            if val > best_val:
                best, best_val = phi, val
        return best


def _canonical_sign(phi: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(phi) > 1e-15)
    if nz.size and phi[nz[0]] < 0:
        return -phi
    return phi
