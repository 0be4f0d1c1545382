"""Definition-level reference values by enumerating repeated test pairs.

A multiplicity vector ``w`` of nonnegative integers encodes the finite
sequence in which pair ``j`` appears ``w_j`` times.  The best ratio

    sum_j w_j s_j^p  /  max_i sum_j w_j r_ij^p

over all such sequences is a lower bound for the summing constant and never
touches an LP when the enumeration is complete.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core_model import SummingInstance

DEFAULT_BUDGET = 10**6
_CHUNK = 1 << 16


@dataclass
class MultisetSearchReport:
    best_value: float
    best_multiplicities: np.ndarray
    sequences_examined: int
    bound: int
    mode: str  # "enumeration" or "coordinate-ascent"

    @property
    def complete(self) -> bool:
        return self.mode == "enumeration"

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "best_value": None if math.isinf(self.best_value) else float(self.best_value),
            "not_summing": math.isinf(self.best_value),
            "best_multiplicities": [int(v) for v in self.best_multiplicities],
            "sequences_examined": int(self.sequences_examined),
            "bound": int(self.bound),
            "mode": self.mode,
        }


def _ratios(W: np.ndarray, s_pow: np.ndarray, r_pow_t: np.ndarray) -> np.ndarray:
    num = W @ s_pow
    den = (W @ r_pow_t).max(axis=1)
    out = np.zeros_like(num)
    pos = den > 0
    out[pos] = num[pos] / den[pos]
    out[~pos & (num > 0)] = math.inf
    return out


def pi_by_multisets(instance: SummingInstance, bound: int, budget: int = DEFAULT_BUDGET) -> MultisetSearchReport:
    """Best ratio over integer multiplicity vectors with entries in ``[0, bound]``.

    Full enumeration when ``(bound + 1)^m <= budget``; otherwise a
    deterministic coordinate ascent started from the rounded LP witness and
    from every single pair, and the report's ``mode`` says so.
    """
    if bound < 1:
        raise ValueError("bound must be >= 1")
    m = instance.m
    s_pow = instance.s_pow
    r_pow_t = instance.r_pow.T
    total = (bound + 1) ** m
    if total <= budget:
        return _enumerate(m, bound, total, s_pow, r_pow_t)
    return _ascent(instance, bound, s_pow, r_pow_t)


def _enumerate(m, bound, total, s_pow, r_pow_t) -> MultisetSearchReport:
    base = bound + 1
    powers = base ** np.arange(m - 1, -1, -1)
    best_val = -1.0
    best_w = np.zeros(m, dtype=np.int64)
    for start in range(1, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        W = (idx[:, None] // powers[None, :]) % base
        vals = _ratios(W.astype(float), s_pow, r_pow_t)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val = float(vals[i])
            best_w = W[i].copy()
    if total == 1:
        best_val = 0.0
    return MultisetSearchReport(max(best_val, 0.0), best_w, total - 1, bound, "enumeration")


def _ascent(instance, bound, s_pow, r_pow_t) -> MultisetSearchReport:
    from .domination import summing_constant  # local: only the heuristic path uses the LP

    m = instance.m
    starts = []
    pi, witness = summing_constant(instance)
    if witness is not None and witness.weights.max() > 0:
        w = witness.weights / witness.weights.max() * bound
        starts.append(np.rint(w).astype(np.int64))
    starts.extend(np.eye(m, dtype=np.int64))

    examined = 0

    def ratio(w):
        return float(_ratios(w[None, :].astype(float), s_pow, r_pow_t)[0])

    best_val, best_w = -1.0, np.zeros(m, dtype=np.int64)
    for w in starts:
        if not w.any():
            continue
        w = w.copy()
        cur = ratio(w)
        examined += 1
        improved = True
        while improved and not math.isinf(cur):
            improved = False
            for j in range(m):
                for delta in (1, -1):
                    cand = w.copy()
                    cand[j] += delta
                    if not 0 <= cand[j] <= bound or not cand.any():
                        continue
                    v = ratio(cand)
                    examined += 1
                    if v > cur + 1e-15 * max(1.0, abs(cur)):
                        w, cur, improved = cand, v, True
        if cur > best_val:
            best_val, best_w = cur, w
    return MultisetSearchReport(max(best_val, 0.0), best_w, examined, bound, "coordinate-ascent")
