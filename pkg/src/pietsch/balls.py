"""Norms and finite discretizations of dual unit balls."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

NORMS = ("l1", "l2", "linf")
DUAL_NORM = {"l1": "linf", "l2": "l2", "linf": "l1"}
# domain norm -> discretization tag of its dual ball
BALL_TAG = {"l1": "cube-dual", "linf": "cross-polytope-dual", "l2": "sphere-grid"}
TAG_NORM = {v: k for k, v in BALL_TAG.items()}


def norm(v, kind: str = "l2", axis: int = -1):
    v = np.asarray(v, dtype=float)
    if kind == "l2":
        return np.sqrt(np.sum(v * v, axis=axis))
    if kind == "l1":
        return np.sum(np.abs(v), axis=axis)
    if kind == "linf":
        return np.max(np.abs(v), axis=axis)
    raise ValueError(f"unknown norm {kind!r}; expected one of {NORMS}")


@dataclass(frozen=True)
class Discretization:
    """How to discretize the dual unit ball of a finite-dimensional domain.

    ``tag`` is one of ``cube-dual`` (l1 domain, exact cube vertices),
    ``cross-polytope-dual`` (linf domain, exact vertices ``+-e_i``) or
    ``sphere-grid`` (l2 domain; ``resolution`` points).
    """

    tag: str = "sphere-grid"
    resolution: int = 720
    seed: int = 0

    def __post_init__(self):
        if self.tag not in TAG_NORM:
            raise ValueError(f"unknown dual-ball tag {self.tag!r}; expected one of {sorted(TAG_NORM)}")
        if self.tag == "sphere-grid" and self.resolution < 8:
            raise ValueError(f"sphere-grid resolution must be >= 8, got {self.resolution}")

    @property
    def domain_norm(self) -> str:
        return TAG_NORM[self.tag]

    @classmethod
    def for_norm(cls, kind: str, resolution: int = 720, seed: int = 0) -> "Discretization":
        return cls(BALL_TAG[kind], resolution, seed)

    def to_dict(self) -> dict:
        d = {"tag": self.tag}
        if self.tag == "sphere-grid":
            d.update(resolution=self.resolution, seed=self.seed)
        return d


def sphere_points(dim: int, count: int, seed: int = 0) -> np.ndarray:
    """Points on the Euclidean unit sphere of R^dim.

    Exact uniform angular grid in the plane; scrambled Halton points pushed
    through the normal quantile and normalized in dimension >= 3.
    """
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        th = 2.0 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(th), np.sin(th)])
    u = qmc.Halton(d=dim, scramble=True, seed=seed).random(count)
    u = np.clip(u, 1e-12, 1 - 1e-12)
    z = ndtri(u)
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def dual_ball_points(dim: int, disc: Discretization) -> np.ndarray:
    """Rows are functionals in the dual unit ball (extreme points or a grid)."""
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    if disc.tag == "cube-dual":
        return np.array(list(itertools.product((1.0, -1.0), repeat=dim)))
    if disc.tag == "cross-polytope-dual":
        eye = np.eye(dim)
        return np.vstack([eye, -eye])
    return sphere_points(dim, disc.resolution, disc.seed)


def unit_ball_extremes(dim: int, kind: str, resolution: int = 64, seed: int = 0) -> np.ndarray:
    """Extreme points (or a sphere grid for l2) of the unit ball of ``kind`` on R^dim."""
    if kind == "l1":
        eye = np.eye(dim)
        return np.vstack([eye, -eye])
    if kind == "linf":
        return np.array(list(itertools.product((1.0, -1.0), repeat=dim)))
    if kind == "l2":
        return sphere_points(dim, resolution, seed)
    raise ValueError(f"unknown norm {kind!r}")


def ball_argmax_linear(coef: np.ndarray, kind: str) -> np.ndarray:
    """Maximizer of ``<coef, x>`` over the unit ball of ``kind``."""
    coef = np.asarray(coef, dtype=float)
    if kind == "l2":
        n = np.linalg.norm(coef)
        return coef / n if n > 0 else np.eye(len(coef))[0]
    if kind == "linf":
        s = np.sign(coef)
        s[s == 0] = 1.0
        return s
    if kind == "l1":
        x = np.zeros_like(coef)
        i = int(np.argmax(np.abs(coef)))
        x[i] = 1.0 if coef[i] >= 0 else -1.0
        return x
    raise ValueError(f"unknown norm {kind!r}")


def sphere_of_norm_samples(dim: int, kind: str, count: int, rng: np.random.Generator) -> np.ndarray:
    """Random points on the unit sphere of ``kind`` plus the ball's extreme points."""
    z = rng.standard_normal((count, dim))
    z /= norm(z, kind)[:, None]
    ext = unit_ball_extremes(dim, kind, resolution=max(count // 4, 8))
    return np.vstack([ext, z])
