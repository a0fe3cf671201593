"""Smooth, strictly convex norms on R^dim: norm, dual norm and dual vectors.

Only the L_p family (1 < p < inf) is supported; ``euclidean`` is L_2 under
another name. Every evaluation accepts stacked vectors of shape ``(..., dim)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDirectionError, InvalidInputError

EPS_ZERO = 1e-12


@dataclass(frozen=True)
class Check:
    """Outcome of a validation: truthy when ``ok``."""

    ok: bool
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def _lp(x: np.ndarray, p: float) -> np.ndarray:
    # scale by the largest entry so large p neither overflows nor underflows
    a = np.abs(x)
    m = a.max(axis=-1)
    safe = np.where(m > 0, m, 1.0)
    r = a / safe[..., None]
    if p == 2.0:
        s = np.sqrt((r * r).sum(axis=-1))
    else:
        s = (r**p).sum(axis=-1) ** (1.0 / p)
    return np.where(m > 0, m * s, 0.0)


def _normalized_gradient(x: np.ndarray, p: float) -> np.ndarray:
    """Gradient of the L_p norm at nonzero rows of ``x``; rows equal to 0 map to 0."""
    n = _lp(x, p)
    safe = np.where(n > 0, n, 1.0)[..., None]
    r = np.abs(x) / safe
    g = np.sign(x) * (r if p == 2.0 else r ** (p - 1.0))
    return np.where(n[..., None] > 0, g, 0.0)


@dataclass(frozen=True)
class NormSpace:
    """R^dim with the L_p norm.

    Construction never fails on a bad exponent so that :func:`validate_space`
    can report it; instances refuse invalid spaces instead.
    """

    dim: int = 2
    p: float = 2.0
    kind: str = "lp"

    def __post_init__(self):
        if self.kind not in ("lp", "euclidean"):
            raise InvalidInputError(f"unknown norm kind {self.kind!r}", code="norm-kind")
        if self.kind == "euclidean":
            object.__setattr__(self, "p", 2.0)
        object.__setattr__(self, "p", float(self.p))

    @classmethod
    def euclidean(cls, dim: int = 2) -> NormSpace:
        return cls(dim=dim, kind="euclidean")

    @classmethod
    def lp(cls, p: float, dim: int = 2) -> NormSpace:
        return cls(dim=dim, p=p, kind="lp")

    @property
    def q(self) -> float:
        """Dual exponent, 1/p + 1/q = 1."""
        p = self.p
        if p == 2.0:
            return 2.0
        if p == 1.0:
            return math.inf
        if math.isinf(p):
            return 1.0
        return p / (p - 1.0)

    def _check(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.ndim == 0 or v.shape[-1] != self.dim:
            raise InvalidInputError(
                f"expected vectors of dimension {self.dim}, got shape {v.shape}",
                code="dimension",
            )
        return v

    def norm(self, v) -> np.ndarray | float:
        v = self._check(v)
        out = _lp(v, self.p)
        return float(out) if out.ndim == 0 else out

    def dual_norm(self, z) -> np.ndarray | float:
        """sup of <z, x> over the unit ball, i.e. the L_q norm."""
        z = self._check(z)
        out = _lp(z, self.q)
        return float(out) if out.ndim == 0 else out

    def dual_vector(self, x) -> np.ndarray:
        """The gradient of the norm at ``x``: <x*, x> = ||x|| and ||x*||_* = 1.

        Raises DegenerateDirectionError when ``x`` is (numerically) the origin;
        coincident vertices must be merged before asking for a direction.
        """
        x = self._check(x)
        n = np.atleast_1d(_lp(x, self.p))
        mag = np.atleast_1d(np.abs(x).max(axis=-1))
        if np.any(n <= EPS_ZERO * (1.0 + mag)):
            raise DegenerateDirectionError("dual vector undefined at the origin")
        return _normalized_gradient(x, self.p)

    def support_vector(self, z) -> np.ndarray:
        """Unit vector ``e`` (in the primal norm) with <z, e> = ||z||_*.

        This is the dual vector of ``z`` taken in the dual norm; it gives the
        direction of steepest first-order increase of <z, .> on the unit ball.
        """
        z = self._check(z)
        n = np.atleast_1d(_lp(z, self.q))
        mag = np.atleast_1d(np.abs(z).max(axis=-1))
        if np.any(n <= EPS_ZERO * (1.0 + mag)):
            raise DegenerateDirectionError("support vector undefined at the origin")
        return _normalized_gradient(z, self.q)

    def half_square_derivatives(self, v: np.ndarray):
        """Norms, gradients and Hessians of G(v) = ||v||^2 / 2 for rows of ``v``.

        Returns ``(n, grad, hess)`` with shapes ``(E,)``, ``(E, dim)`` and
        ``(E, dim, dim)``. G is C^1 everywhere but only C^2 off the coordinate
        hyperplanes when p < 2; there the diagonal curvature is capped.
        """
        p = self.p
        n = _lp(v, p)
        u = _normalized_gradient(v, p)
        grad = n[:, None] * u
        eye = np.eye(v.shape[-1])
        if p == 2.0:
            hess = np.broadcast_to(eye, (len(v),) + eye.shape).copy()
            return n, grad, hess
        safe = np.where(n > 0, n, 1.0)[:, None]
        r = np.maximum(np.abs(v) / safe, 1e-8)
        diag = (p - 1.0) * r ** (p - 2.0)
        hess = (2.0 - p) * u[:, :, None] * u[:, None, :] + diag[:, :, None] * eye
        hess[n == 0] = eye
        return n, grad, hess


def validate_space(space: NormSpace) -> Check:
    p = space.p
    if space.dim < 2:
        return Check(False, f"dimension must be at least 2, got {space.dim}")
    if not math.isfinite(p) or p <= 1.0:
        return Check(False, f"norm not smooth: L_p needs 1 < p < inf, got p={p}")
    return Check(True)
