"""Discretized R-S summing instances.

An instance is the finite shadow of the abstract setting: ``k`` points of the
compact index space K, ``m`` test pairs ``(x_j, b_j)``, the evaluated kernel
values ``r[i, j] = R(phi_i, x_j, b_j)`` and ``s[j] = S(f, x_j, b_j)``, and the
exponent ``p``.  Everything downstream (LPs, certificates, brute force) only
sees these numbers.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

SCHEMA_VERSION = 1
AXIOM_TOL = 1e-12


class InstanceError(ValueError):
    """Raised when instance data violates the instance contract."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SummingInstance:
    p: float
    k_labels: tuple
    pair_labels: tuple
    r_matrix: np.ndarray
    s_vector: np.ndarray
    null_pair: int | None = None
    family: str = "raw"
    metadata: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.r_matrix.shape[0]

    @property
    def m(self) -> int:
        return self.r_matrix.shape[1]

    @property
    def r_pow(self) -> np.ndarray:
        """``r ** p``; the p-th powers are what every LP actually consumes."""
        return self.r_matrix ** self.p

    @property
    def s_pow(self) -> np.ndarray:
        return self.s_vector ** self.p

    def with_rows(self, rows: np.ndarray, labels: Sequence | None = None) -> "SummingInstance":
        """Return a new instance with extra K rows appended."""
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        if labels is None:
            labels = [f"row{self.k + i}" for i in range(rows.shape[0])]
        return build_instance(
            np.vstack([self.r_matrix, rows]),
            self.s_vector,
            self.p,
            k_labels=list(self.k_labels) + list(labels),
            pair_labels=self.pair_labels,
            null_pair=self.null_pair,
            family=self.family,
            metadata=self.metadata,
        )

    def with_s(self, s_vector) -> "SummingInstance":
        return build_instance(
            self.r_matrix,
            s_vector,
            self.p,
            k_labels=self.k_labels,
            pair_labels=self.pair_labels,
            null_pair=self.null_pair,
            family=self.family,
            metadata=self.metadata,
        )

    def with_r(self, r_matrix) -> "SummingInstance":
        return build_instance(
            r_matrix,
            self.s_vector,
            self.p,
            k_labels=self.k_labels,
            pair_labels=self.pair_labels,
            null_pair=self.null_pair,
            family=self.family,
            metadata=self.metadata,
        )

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "p": float(self.p),
            "k_labels": _jsonable(self.k_labels),
            "pair_labels": _jsonable(self.pair_labels),
            "r_matrix": self.r_matrix.tolist(),
            "s_vector": self.s_vector.tolist(),
            "null_pair": self.null_pair,
            "family": self.family,
            "metadata": _jsonable(self.metadata),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)

    def content_hash(self) -> str:
        """SHA-256 of the canonical JSON form; binds certificates to inputs."""
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _freeze(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        return tuple(_freeze(v) for v in obj)
    return obj


def build_instance(
    r_matrix,
    s_vector,
    p: float,
    *,
    k_labels: Sequence | None = None,
    pair_labels: Sequence | None = None,
    null_pair: int | None = None,
    family: str = "raw",
    metadata: dict | None = None,
) -> SummingInstance:
    """Validate raw data and wrap it as an immutable :class:`SummingInstance`.

    Raises :class:`InstanceError` naming the offending index on any
    dimension mismatch, negative or non-finite entry, or ``p <= 0``.
    """
    try:
        p = float(p)
    except (TypeError, ValueError):
        raise InstanceError(f"p must be a real number, got {p!r}") from None
    if not math.isfinite(p) or p <= 0:
        raise InstanceError(f"p must be finite and > 0, got {p}")

    r = np.asarray(r_matrix, dtype=float)
    s = np.asarray(s_vector, dtype=float)
    if r.ndim != 2:
        raise InstanceError(f"r_matrix must be 2-dimensional, got shape {r.shape}")
    if s.ndim != 1:
        raise InstanceError(f"s_vector must be 1-dimensional, got shape {s.shape}")
    k, m = r.shape
    if k < 1 or m < 1:
        raise InstanceError(f"need k >= 1 and m >= 1, got k={k}, m={m}")
    if s.shape[0] != m:
        raise InstanceError(f"s_vector has length {s.shape[0]} but r_matrix has {m} columns")

    bad = np.argwhere(~np.isfinite(r))
    if bad.size:
        i, j = bad[0]
        raise InstanceError(f"non-finite entry at ({i},{j}) of r_matrix")
    bad = np.argwhere(r < 0)
    if bad.size:
        i, j = bad[0]
        raise InstanceError(f"negative entry at ({i},{j}) of r_matrix: {r[i, j]}")
    bad = np.flatnonzero(~np.isfinite(s))
    if bad.size:
        raise InstanceError(f"non-finite entry at ({bad[0]}) of s_vector")
    bad = np.flatnonzero(s < 0)
    if bad.size:
        raise InstanceError(f"negative entry at ({bad[0]}) of s_vector: {s[bad[0]]}")

    k_labels = tuple(range(k)) if k_labels is None else _freeze(k_labels)
    pair_labels = tuple(range(m)) if pair_labels is None else _freeze(pair_labels)
    if len(k_labels) != k:
        raise InstanceError(f"k_labels has length {len(k_labels)}, expected {k}")
    if len(pair_labels) != m:
        raise InstanceError(f"pair_labels has length {len(pair_labels)}, expected {m}")

    if null_pair is not None:
        if isinstance(null_pair, bool) or not isinstance(null_pair, (int, np.integer)):
            raise InstanceError(f"null_pair must be an integer index, got {null_pair!r}")
        null_pair = int(null_pair)
        if not 0 <= null_pair < m:
            raise InstanceError(f"null_pair index {null_pair} out of range for m={m}")
        nz = np.flatnonzero(r[:, null_pair])
        if nz.size:
            raise InstanceError(
                f"null pair column {null_pair} is nonzero at ({nz[0]},{null_pair})"
            )
        if s[null_pair] != 0:
            raise InstanceError(f"null pair entry ({null_pair}) of s_vector is nonzero")

    return SummingInstance(
        p=p,
        k_labels=k_labels,
        pair_labels=pair_labels,
        r_matrix=_readonly(r),
        s_vector=_readonly(s),
        null_pair=null_pair,
        family=str(family),
        metadata=dict(metadata or {}),
    )


def instance_from_dict(d: dict) -> SummingInstance:
    for key in ("p", "r_matrix", "s_vector"):
        if key not in d:
            raise InstanceError(f"missing field {key!r}")
    version = d.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise InstanceError(f"unsupported schema_version {version!r}")
    return build_instance(
        d["r_matrix"],
        d["s_vector"],
        d["p"],
        k_labels=d.get("k_labels"),
        pair_labels=d.get("pair_labels"),
        null_pair=d.get("null_pair"),
        family=d.get("family", "raw"),
        metadata=d.get("metadata") or {},
    )


def instance_from_json(text: str) -> SummingInstance:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"invalid JSON: {exc}") from None
    if not isinstance(d, dict):
        raise InstanceError("instance JSON must be an object")
    return instance_from_dict(d)


# --------------------------------------------------------------------------
# structural axioms


@dataclass
class AxiomViolation:
    axiom: str
    sample: Any
    eta: float | None
    lhs: float
    rhs: float


@dataclass
class AxiomReport:
    null_element_ok: bool
    r_subhomogeneous_ok: bool
    s_superhomogeneous_ok: bool
    violations: list[AxiomViolation]
    invalid_samples: list[tuple[Any, str]] = field(default_factory=list)
    continuity: str = "not applicable (finite K)"
    samples_checked: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations and not self.invalid_samples


def _value(fn: Callable, *args) -> float:
    v = float(fn(*args))
    if not math.isfinite(v) or v < 0:
        raise ValueError(f"evaluator returned {v}")
    return v


def validate_axioms(
    family_evaluators: tuple[Callable, Callable],
    sample_points: Sequence[tuple[Any, Any, Any]],
    eta_grid: Sequence[float] = tuple(i / 10 for i in range(11)),
    *,
    null_element: Any = None,
    tol: float = AXIOM_TOL,
) -> AxiomReport:
    """Check the three structural axioms on sampled data.

    ``family_evaluators`` is ``(r_eval, s_eval)`` with ``r_eval(phi, x, b)``
    and ``s_eval(x, b)`` (the mapping ``f`` is bound inside ``s_eval``).  For
    every sample and every ``eta`` we test ``R(phi, x, eta b) <= eta R(phi,
    x, b)`` and ``eta S(x, b) <= S(x, eta b)``, each up to ``tol``.  When
    ``null_element`` is given, ``R(phi, x0, b) = S(x0, b) = 0`` is checked at
    every sample's ``(phi, b)``.  Continuity in ``phi`` is vacuous on a finite
    K and is not checked.
    """
    r_eval, s_eval = family_evaluators
    etas = [float(e) for e in eta_grid]
    for e in etas:
        if not 0.0 <= e <= 1.0:
            raise ValueError(f"eta values must lie in [0, 1], got {e}")

    violations: list[AxiomViolation] = []
    invalid: list[tuple[Any, str]] = []
    null_ok = r_ok = s_ok = True

    for sample in sample_points:
        phi, x, b = sample
        b_arr = np.asarray(b, dtype=float)
        try:
            r0 = _value(r_eval, phi, x, b)
            s0 = _value(s_eval, x, b)
            rows = []
            for eta in etas:
                eb = eta * b_arr if b_arr.ndim else eta * float(b)
                rows.append((eta, _value(r_eval, phi, x, eb), _value(s_eval, x, eb)))
            if null_element is not None:
                rn = _value(r_eval, phi, null_element, b)
                sn = _value(s_eval, null_element, b)
        except (ValueError, ArithmeticError) as exc:
            invalid.append((sample, str(exc)))
            continue

        for eta, r_eta, s_eta in rows:
            if r_eta > eta * r0 + tol:
                r_ok = False
                violations.append(AxiomViolation("r_subhomogeneous", sample, eta, r_eta, eta * r0))
            if eta * s0 > s_eta + tol:
                s_ok = False
                violations.append(AxiomViolation("s_superhomogeneous", sample, eta, eta * s0, s_eta))
        if null_element is not None and (rn > tol or sn > tol):
            null_ok = False
            violations.append(AxiomViolation("null_element", sample, None, max(rn, sn), 0.0))

    return AxiomReport(
        null_element_ok=null_ok,
        r_subhomogeneous_ok=r_ok,
        s_superhomogeneous_ok=s_ok,
        violations=violations,
        invalid_samples=invalid,
        samples_checked=len(sample_points),
    )


# --------------------------------------------------------------------------
# the two sides of the defining inequality


def _multiplicities(instance: SummingInstance, w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (instance.m,):
        raise ValueError(f"multiplicities must have length {instance.m}, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValueError("multiplicities must be finite")
    bad = np.flatnonzero(w < 0)
    if bad.size:
        raise ValueError(f"negative multiplicity at ({bad[0]}): {w[bad[0]]}")
    return w


def lhs_rhs(instance: SummingInstance, multiplicities) -> tuple[float, float]:
    """Both sides of the summing inequality for a weighted finite sequence.

    ``lhs = sum_j w_j s_j^p`` and ``rhs = max_i sum_j w_j r_ij^p``.
    """
    w = _multiplicities(instance, multiplicities)
    lhs = float(instance.s_pow @ w)
    rhs = float(np.max(instance.r_pow @ w))
    return lhs, rhs


def psi_value(
    instance: SummingInstance, pi_value: float, member_multiplicities, k_index: int
) -> float:
    """Evaluate ``sum_j w_j (s_j^p - pi * r_{k_index, j}^p)`` at one K point."""
    if pi_value < 0:
        raise ValueError("pi_value must be >= 0")
    if isinstance(k_index, bool) or not 0 <= int(k_index) < instance.k:
        raise IndexError(f"k_index {k_index} out of range for k={instance.k}")
    w = _multiplicities(instance, member_multiplicities)
    row = instance.r_pow[int(k_index)]
    return float(w @ (instance.s_pow - pi_value * row))
