"""The shared composite term ``(g, Q)`` and its constrained proximal operator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import StackedVector

G_KINDS = ("zero", "l1", "elastic-net")
Q_KINDS = ("all-space", "box", "euclidean-ball")

SUPPORTED_PAIRS = frozenset(
    {
        ("zero", "all-space"),
        ("zero", "box"),
        ("zero", "euclidean-ball"),
        ("l1", "all-space"),
        ("l1", "box"),
        ("elastic-net", "all-space"),
    }
)


class UnsupportedCompositeError(ValueError):
    """The requested (g, Q) pair has no closed-form prox."""


def soft_threshold(x: np.ndarray, t: float) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


@dataclass(frozen=True)
class CompositeTerm:
    """A proximal-friendly regularizer ``g`` restricted to a closed convex set ``Q``.

    ``g`` is one of ``zero``, ``l1`` (``w1 * ||x||_1``) or ``elastic-net``
    (``w1 * ||x||_1 + (w2 / 2) * ||x||^2``). ``Q`` is the whole space, an
    axis-aligned box ``[lo, hi]`` or a Euclidean ball. Box bounds and ball
    centers may be scalars (applied to every coordinate) or d-vectors.
    Unsupported pairs are rejected here, never at call time.
    """

    g_kind: str = "zero"
    w1: float = 0.0
    w2: float = 0.0
    q_kind: str = "all-space"
    lo: float | np.ndarray = -np.inf
    hi: float | np.ndarray = np.inf
    center: float | np.ndarray = 0.0
    radius: float = np.inf

    def __post_init__(self):
        if self.g_kind not in G_KINDS:
            raise UnsupportedCompositeError(f"unknown g kind {self.g_kind!r}; expected one of {G_KINDS}")
        if self.q_kind not in Q_KINDS:
            raise UnsupportedCompositeError(f"unknown Q kind {self.q_kind!r}; expected one of {Q_KINDS}")
        if (self.g_kind, self.q_kind) not in SUPPORTED_PAIRS:
            raise UnsupportedCompositeError(
                f"unsupported composite pair (g={self.g_kind}, Q={self.q_kind}): no closed-form prox"
            )
        if self.w1 < 0 or self.w2 < 0:
            raise UnsupportedCompositeError("regularization weights must be nonnegative")
        if self.q_kind == "box":
            lo = np.asarray(self.lo, dtype=float)
            hi = np.asarray(self.hi, dtype=float)
            if np.any(lo > hi):
                raise UnsupportedCompositeError("box needs lo <= hi")
            object.__setattr__(self, "lo", lo)
            object.__setattr__(self, "hi", hi)
        if self.q_kind == "euclidean-ball":
            if not 0 < self.radius < np.inf:
                raise UnsupportedCompositeError(f"ball radius must be positive and finite, got {self.radius}")
            object.__setattr__(self, "center", np.asarray(self.center, dtype=float))

    def value(self, x: np.ndarray) -> float:
        """``g(x)``; ``+inf`` outside ``Q``."""
        if not self.contains(x):
            return np.inf
        return self.g_value(x)

    def g_value(self, x: np.ndarray) -> float:
        """``g(x)`` ignoring the constraint set."""
        if self.g_kind == "zero":
            return 0.0
        val = self.w1 * float(np.sum(np.abs(x)))
        if self.g_kind == "elastic-net":
            val += 0.5 * self.w2 * float(x @ x)
        return val

    def contains(self, x: np.ndarray, tol: float = 1e-12) -> bool:
        if self.q_kind == "box":
            return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))
        if self.q_kind == "euclidean-ball":
            return float(np.linalg.norm(x - self.center)) <= self.radius * (1 + tol) + tol
        return True

    def project(self, x: np.ndarray) -> np.ndarray:
        """Euclidean projection onto ``Q``."""
        if self.q_kind == "box":
            return np.clip(x, self.lo, self.hi)
        if self.q_kind == "euclidean-ball":
            offset = x - self.center
            dist = float(np.linalg.norm(offset))
            if dist <= self.radius:
                return np.array(x, dtype=float)
            return self.center + offset * (self.radius / dist)
        return np.array(x, dtype=float)


def prox_point(term: CompositeTerm, gamma: float, x: np.ndarray) -> np.ndarray:
    """``argmin_{y in Q} g(y) + ||y - x||^2 / (2 gamma)`` in closed form."""
    if not gamma > 0:
        raise ValueError(f"prox step must be positive, got {gamma}")
    x = np.asarray(x, dtype=float)
    if term.g_kind == "zero":
        return term.project(x)
    shrunk = soft_threshold(x, gamma * term.w1)
    if term.g_kind == "elastic-net":
        return shrunk / (1.0 + gamma * term.w2)
    # l1 over a box is coordinatewise separable, so clamping the shrunk point is exact
    return term.project(shrunk)


def prox_stacked(term: CompositeTerm, gamma: float, x: StackedVector) -> StackedVector:
    """Blockwise prox of ``G(x) = sum_i g(x_i)`` over ``Q^m``."""
    if not gamma > 0:
        raise ValueError(f"prox step must be positive, got {gamma}")
    data = x.blocks
    if term.g_kind == "zero" and term.q_kind != "euclidean-ball":
        return StackedVector(term.project(data))
    if term.q_kind == "euclidean-ball":
        return StackedVector(np.stack([prox_point(term, gamma, xi) for xi in data]))
    shrunk = soft_threshold(data, gamma * term.w1)
    if term.g_kind == "elastic-net":
        return StackedVector(shrunk / (1.0 + gamma * term.w2))
    return StackedVector(term.project(shrunk))
