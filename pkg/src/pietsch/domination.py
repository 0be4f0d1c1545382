"""Summing constants and dominating measures on finite instances.

``summing_constant`` solves the primal program

    max  sum_j w_j s_j^p   s.t.  sum_j w_j r_ij^p <= 1  (every row i),  w >= 0,

whose value is the least constant in the summing inequality (real
multiplicities stand in for repeated test pairs; the ratio is scale
invariant).  ``dominating_measure`` solves the dual

    min  sum_i y_i         s.t.  sum_i y_i r_ij^p >= s_j^p  (every pair j),  y >= 0

as its own LP and normalizes ``y`` into a probability vector ``mu`` with
constant ``c = (sum y)^(1/p)``.  Agreement of the two is the finite form of
the domination theorem.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core_model import SummingInstance, lhs_rhs
from .lp_core import OPTIMAL, UNBOUNDED, INFEASIBLE, LpProblem, solve_lp

EQUIVALENCE_TOL = 1e-7
CERTIFICATE_TOL = 1e-9

NOT_SUMMING = "not summing"


class NotSummingError(ValueError):
    """Some pair has ``s_j > 0`` while every K point gives ``r_ij = 0``."""

    def __init__(self, pairs):
        self.pairs = list(pairs)
        super().__init__(f"not summing: pairs {self.pairs} have s > 0 but a zero r-column")


@dataclass
class SummingWitness:
    weights: np.ndarray
    value: float
    active_row: int


@dataclass
class DominationCertificate:
    c: float
    mu: np.ndarray
    residuals: np.ndarray
    p: float
    instance_hash: str = ""

    @property
    def residual_min(self) -> float:
        return float(np.min(self.residuals))

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "c": float(self.c),
            "mu": [float(v) for v in self.mu],
            "p": float(self.p),
            "instance_hash": self.instance_hash,
            "residual_min": self.residual_min,
        }


@dataclass
class CertificateCheck:
    valid: bool
    worst_pair: int
    worst_residual: float
    residuals: np.ndarray
    tol: float


@dataclass
class EasyDirectionReport:
    c_power_p: float
    implied_pi_bound: float
    holds: bool
    samples: int
    worst_excess: float
    pi: float


@dataclass
class EquivalenceReport:
    pi: float
    c: float
    gap: float
    ok: bool
    primal_status: str
    dual_status: str
    tol: float
    certificate: DominationCertificate | None = field(default=None, repr=False)
    witness: SummingWitness | None = field(default=None, repr=False)


def uncovered_pairs(instance: SummingInstance) -> np.ndarray:
    """Pairs with ``s_j > 0`` whose r-column vanishes on every K point."""
    return np.flatnonzero((instance.s_vector > 0) & ~np.any(instance.r_matrix > 0, axis=0))


def primal_problem(instance: SummingInstance) -> LpProblem:
    return LpProblem(instance.s_pow, instance.r_pow, np.ones(instance.k))


def _active_pairs(instance: SummingInstance) -> np.ndarray:
    return np.flatnonzero(instance.s_pow > 0)


def dual_problem(instance: SummingInstance) -> LpProblem:
    """``min 1.y  s.t.  sum_i y_i r_ij^p / s_j^p >= 1`` over pairs with ``s_j^p > 0``.

    Dividing each constraint by ``s_j^p`` makes the solver's feasibility
    tolerance relative per pair; an absolute slack of 1e-9 on a pair with
    ``s_j^p ~ 1e-9`` would otherwise wipe out its residual after the p-th
    root.  Pairs with ``s_j^p = 0`` hold for every ``y >= 0`` and are dropped.
    Posed as ``max -1.y  s.t.  -(R^T / s^p) y <= -1``.
    """
    J = _active_pairs(instance)
    if J.size == 0:
        raise ValueError("dual LP has no active constraints (s^p vanishes)")
    A = instance.r_pow[:, J].T / instance.s_pow[J][:, None]
    return LpProblem(-np.ones(instance.k), -A, -np.ones(J.size))


def summing_constant(instance: SummingInstance) -> tuple[float, SummingWitness | None]:
    """Return ``(pi, witness)``; ``pi`` is ``math.inf`` and witness ``None`` when not summing."""
    if _active_pairs(instance).size == 0:
        w = np.zeros(instance.m)
        return 0.0, SummingWitness(w, 0.0, 0)
    sol = solve_lp(primal_problem(instance))
    if sol.status == UNBOUNDED:
        return math.inf, None
    w = sol.primal
    loads = instance.r_pow @ w
    top = float(loads.max())
    if top > 0:
        w = w / top
    value = float(instance.s_pow @ w)
    return sol.value, SummingWitness(w, value, int(np.argmax(loads)))


def residuals_for(instance: SummingInstance, c: float, mu: np.ndarray) -> np.ndarray:
    """``c (sum_i mu_i r_ij^p)^(1/p) - s_j`` for every pair."""
    avg = np.maximum(mu @ instance.r_pow, 0.0)
    return c * avg ** (1.0 / instance.p) - instance.s_vector


def dominating_measure(instance: SummingInstance) -> DominationCertificate:
    """Build ``(c, mu)`` from the dual LP.  Raises :class:`NotSummingError`."""
    k = instance.k
    h = instance.content_hash()
    if _active_pairs(instance).size == 0:
        mu = np.full(k, 1.0 / k)
        return DominationCertificate(0.0, mu, residuals_for(instance, 0.0, mu), instance.p, h)
    bad = uncovered_pairs(instance)
    if bad.size:
        raise NotSummingError(bad)
    sol = solve_lp(dual_problem(instance))
    if sol.status == INFEASIBLE:
        raise NotSummingError(uncovered_pairs(instance))
    if sol.status != OPTIMAL:
        raise RuntimeError(f"dual LP returned status {sol.status}")
    y = _repair(instance, sol.primal)
    total = float(y.sum())
    c = total ** (1.0 / instance.p)
    mu = y / total
    return DominationCertificate(c, mu, residuals_for(instance, c, mu), instance.p, h)


def _repair(instance: SummingInstance, y: np.ndarray) -> np.ndarray:
    """Top up pairs the LP left short by rounding.

    A pair ``j`` with coverage ``y . r_j^p`` below ``s_j^p`` receives the
    missing mass on its best-covering K point.  On well-scaled data the
    deficits are at rounding level; on data spanning many orders of magnitude
    they are what makes the certificate exact.  The added mass is at most the
    sum of deficits over ``max_i r_ij^p``, and the gap check still compares
    the result against the primal value.
    """
    y = np.maximum(np.asarray(y, dtype=float), 0.0).copy()
    R = instance.r_pow
    s_pow = instance.s_pow
    for j in np.flatnonzero(s_pow > 0):
        deficit = s_pow[j] - y @ R[:, j]
        if deficit > 0:
            i = int(np.argmax(R[:, j]))
            y[i] += deficit / R[i, j] * (1.0 + 1e-15)
    return y


def certificate_tol(instance: SummingInstance) -> float:
    return CERTIFICATE_TOL * (1.0 + float(instance.s_vector.max()))


def verify_certificate(
    instance: SummingInstance, cert: DominationCertificate, tol: float | None = None
) -> CertificateCheck:
    """Recompute every residual of the domination inequality from scratch."""
    mu = np.asarray(cert.mu, dtype=float)
    if mu.shape != (instance.k,):
        raise ValueError(f"mu has shape {mu.shape}, expected ({instance.k},)")
    if np.any(mu < 0) or not np.all(np.isfinite(mu)):
        raise ValueError("mu must be finite and nonnegative")
    if abs(mu.sum() - 1.0) > 1e-9:
        raise ValueError(f"mu sums to {mu.sum()!r}, not 1")
    if not math.isfinite(cert.c) or cert.c < 0:
        raise ValueError(f"certificate constant must be finite and >= 0, got {cert.c}")
    tol = certificate_tol(instance) if tol is None else tol
    res = residuals_for(instance, cert.c, mu)
    worst = int(np.argmin(res))
    return CertificateCheck(bool(res[worst] >= -tol), worst, float(res[worst]), res, tol)


def easy_direction(
    instance: SummingInstance,
    cert: DominationCertificate,
    *,
    samples: int = 100,
    rng: np.random.Generator | None = None,
    rel_tol: float = 1e-9,
) -> EasyDirectionReport:
    """Replay the measure-implies-summing chain on random multiplicity vectors.

    Each sample ``w`` must satisfy ``sum w s^p <= c^p max_i sum w r^p``; the
    summing constant computed by LP must not exceed ``c^p`` either.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    cp = cert.c ** instance.p
    m = instance.m
    draws = []
    for t in range(samples):
        kind = t % 3
        if kind == 0:
            w = rng.exponential(size=m)
        elif kind == 1:
            w = rng.integers(0, 4, size=m).astype(float)
        else:
            w = np.zeros(m)
            w[rng.integers(m)] = 1.0
        draws.append(w)
    worst = -math.inf
    holds = True
    for w in draws:
        lhs, rhs = lhs_rhs(instance, w)
        bound = cp * rhs
        excess = lhs - bound
        worst = max(worst, excess)
        if excess > rel_tol * max(1.0, abs(lhs), abs(bound)):
            holds = False
    pi, _ = summing_constant(instance)
    if pi > cp + rel_tol * (1.0 + cp):
        holds = False
    return EasyDirectionReport(cp, cp, holds, len(draws), worst, pi)


def check_equivalence(instance: SummingInstance, tol: float = EQUIVALENCE_TOL) -> EquivalenceReport:
    """Compute ``pi`` from the primal and ``c`` from the dual; compare ``c^p`` to ``pi``."""
    pi, witness = summing_constant(instance)
    if math.isinf(pi):
        return EquivalenceReport(pi, math.inf, math.inf, False, NOT_SUMMING, INFEASIBLE, tol, None, None)
    cert = dominating_measure(instance)
    gap = abs(cert.c ** instance.p - pi)
    ok = gap <= tol * (1.0 + pi)
    return EquivalenceReport(pi, cert.c, gap, ok, OPTIMAL, OPTIMAL, tol, cert, witness)
