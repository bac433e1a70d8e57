"""Per-node smooth strongly convex objectives and their ensemble constants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import StackedVector


class ObjectiveError(ValueError):
    """Raised for malformed objectives or dimension mismatches."""


@dataclass(frozen=True, eq=False)
class QuadraticObjective:
    """``f(x) = 0.5 x^T A x - b^T x`` with ``A`` symmetric positive definite.

    ``L`` and ``mu`` are the extreme eigenvalues of ``A``, computed at
    construction.
    """

    A: np.ndarray
    b: np.ndarray
    L: float = field(init=False)
    mu: float = field(init=False)
    kind: str = field(init=False, default="quadratic")

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        b = np.array(self.b, dtype=float).ravel()
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] != b.size:
            raise ObjectiveError(f"incompatible shapes A{A.shape}, b{b.shape}")
        if not np.array_equal(A, A.T):
            raise ObjectiveError("A must be exactly symmetric")
        eig = np.linalg.eigvalsh(A)
        if eig[0] <= 0:
            raise ObjectiveError(f"A must be positive definite (lambda_min = {eig[0]:.3e})")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "L", float(eig[-1]))
        object.__setattr__(self, "mu", float(eig[0]))

    @property
    def d(self) -> int:
        return self.b.size

    def value(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.A @ x - self.b @ x)

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x - self.b

    def minimizer(self) -> np.ndarray:
        return np.linalg.solve(self.A, self.b)


def _log1pexp(t: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, t)


def _sigmoid(t: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * t))


@dataclass(frozen=True, eq=False)
class LogisticObjective:
    """Ridge-regularized logistic loss on the node's local samples.

    ``f(x) = (1/n) sum_j log(1 + exp(-y_j z_j^T x)) + (r/2) ||x||^2``.
    The smoothness constant uses the 1/4 bound on the sigmoid derivative:
    ``L = lambda_max(Z^T Z) / (4 n) + r``, and ``mu = r``.
    """

    Z: np.ndarray
    y: np.ndarray
    ridge: float
    L: float = field(init=False)
    mu: float = field(init=False)
    kind: str = field(init=False, default="logistic-l2")

    def __post_init__(self):
        Z = np.atleast_2d(np.array(self.Z, dtype=float))
        y = np.array(self.y, dtype=float).ravel()
        if Z.shape[0] != y.size or y.size == 0:
            raise ObjectiveError(f"need matching nonempty Z{Z.shape} and labels ({y.size})")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ObjectiveError("labels must be -1 or +1")
        if not self.ridge > 0:
            raise ObjectiveError(f"ridge coefficient must be positive, got {self.ridge}")
        n = y.size
        curv = float(np.linalg.eigvalsh(Z.T @ Z)[-1]) / (4.0 * n)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "ridge", float(self.ridge))
        object.__setattr__(self, "L", curv + float(self.ridge))
        object.__setattr__(self, "mu", float(self.ridge))

    @property
    def d(self) -> int:
        return self.Z.shape[1]

    def value(self, x: np.ndarray) -> float:
        margins = self.y * (self.Z @ x)
        return float(np.mean(_log1pexp(-margins)) + 0.5 * self.ridge * (x @ x))

    def grad(self, x: np.ndarray) -> np.ndarray:
        margins = self.y * (self.Z @ x)
        weights = -self.y * _sigmoid(-margins)
        return self.Z.T @ weights / self.y.size + self.ridge * x


class ObjectiveEnsemble:
    """The ``m`` local objectives ``f_1..f_m`` and their aggregate constants.

    Attributes ``L_l``/``mu_l`` are worst-case over nodes (max/min) and
    ``L_g``/``mu_g`` are node averages.
    """

    def __init__(self, objectives: Sequence, x_star: np.ndarray | None = None):
        if not objectives:
            raise ObjectiveError("ensemble needs at least one objective")
        dims = {obj.d for obj in objectives}
        if len(dims) != 1:
            raise ObjectiveError(f"objectives disagree on dimension: {sorted(dims)}")
        for i, obj in enumerate(objectives):
            if not 0 < obj.mu <= obj.L:
                raise ObjectiveError(f"node {i}: need 0 < mu <= L, got mu={obj.mu}, L={obj.L}")
        self.objectives = list(objectives)
        self.m = len(self.objectives)
        self.d = dims.pop()
        self.L_l, self.mu_l, self.L_g, self.mu_g = ensemble_constants(self.objectives)
        # unconstrained minimizer of the average f, when known in closed form
        self.x_star = None if x_star is None else np.asarray(x_star, dtype=float)
        self.grad_calls = 0

    def _check(self, x: StackedVector) -> None:
        if x.shape != (self.m, self.d):
            raise ObjectiveError(f"stacked vector shape {x.shape} does not match ensemble ({self.m}, {self.d})")

    def grad_stacked(self, x: StackedVector) -> StackedVector:
        """``grad F(x)``: block ``i`` is ``grad f_i(x_i)``. One oracle call per node."""
        self._check(x)
        self.grad_calls += 1
        return StackedVector(np.stack([obj.grad(xi) for obj, xi in zip(self.objectives, x.blocks)]))

    def value_stacked(self, x: StackedVector) -> float:
        """``F(x) = sum_i f_i(x_i)``."""
        self._check(x)
        return math.fsum(obj.value(xi) for obj, xi in zip(self.objectives, x.blocks))

    def value_avg(self, y: np.ndarray) -> float:
        """``f(y) = (1/m) sum_i f_i(y)``."""
        y = np.asarray(y, dtype=float)
        if y.shape != (self.d,):
            raise ObjectiveError(f"point has shape {y.shape}, expected ({self.d},)")
        return math.fsum(obj.value(y) for obj in self.objectives) / self.m

    def grad_avg(self, y: np.ndarray) -> np.ndarray:
        """Gradient of the average objective; used by centralized references only."""
        return sum(obj.grad(y) for obj in self.objectives) / self.m

    def constants(self) -> tuple[float, float, float, float]:
        return self.L_l, self.mu_l, self.L_g, self.mu_g


def ensemble_constants(objectives: Sequence) -> tuple[float, float, float, float]:
    """Return ``(L_l, mu_l, L_g, mu_g)`` for a list of node objectives."""
    Ls = [obj.L for obj in objectives]
    mus = [obj.mu for obj in objectives]
    m = len(objectives)
    return max(Ls), min(mus), math.fsum(Ls) / m, math.fsum(mus) / m


def generate_quadratic_ensemble(
    seed: int,
    m: int,
    d: int,
    condition_target: float,
    scale_spread: float = 10.0,
    cond_spread: float = 1.0,
) -> ObjectiveEnsemble:
    """Seeded heterogeneous quadratic ensemble with a prescribed global condition number.

    Node ``i`` gets strong-convexity scale ``s_i`` drawn log-uniformly from
    ``[1, scale_spread]`` and a condition number ``kappa_i`` around
    ``condition_target`` (log-uniform within a factor ``cond_spread``),
    renormalized so that ``L_g / mu_g`` equals the target. The spectrum of
    ``A_i`` is placed explicitly between ``mu_i = s_i`` and
    ``L_i = s_i * kappa_i`` in one random orthogonal basis shared by all
    nodes, with the extreme eigenvalues on the same basis vectors, so the
    average objective has condition number exactly ``L_g / mu_g``.

    With ``scale_spread > 1`` the local ratio ``L_l / mu_l`` exceeds the
    global one, which is what makes the local/global distinction visible.
    """
    if m < 1 or d < 1:
        raise ObjectiveError(f"need m, d >= 1, got m={m}, d={d}")
    if not condition_target >= 1:
        raise ObjectiveError(f"condition_target must be >= 1, got {condition_target}")
    if d == 1 and condition_target > 1:
        raise ObjectiveError("d = 1 forces unit condition number")
    if scale_spread < 1 or cond_spread < 1:
        raise ObjectiveError("spread factors must be >= 1")

    rng = np.random.default_rng(seed)
    scales = np.exp(rng.uniform(0.0, math.log(scale_spread), size=m))
    if condition_target == 1:
        kappas = np.ones(m)
    else:
        half = 0.5 * math.log(cond_spread)
        kappas = condition_target * np.exp(rng.uniform(-half, half, size=m))
        # global ratio is the scale-weighted mean of node ratios
        kappas *= condition_target * scales.sum() / (scales @ kappas)
        kappas = np.maximum(kappas, 1.0)

    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    Q = Q * np.sign(np.diag(R))
    objectives = []
    A_sum = np.zeros((d, d))
    b_sum = np.zeros(d)
    for s, kappa in zip(scales, kappas):
        b = rng.standard_normal(d)
        if kappa == 1.0:
            A = s * np.eye(d)
        else:
            inner = np.exp(rng.uniform(0.0, math.log(kappa), size=d - 2)) if d > 2 else np.empty(0)
            spectrum = s * np.concatenate(([1.0], inner, [kappa]))
            A = (Q * spectrum) @ Q.T
            A = 0.5 * (A + A.T)
        objectives.append(QuadraticObjective(A, b))
        A_sum += A
        b_sum += b
    x_star = np.linalg.solve(A_sum, b_sum)
    return ObjectiveEnsemble(objectives, x_star=x_star)


def load_libsvm(path: str | Path, n_features: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Read a LibSVM text file into a dense feature matrix and +-1 labels.

    Lines look like ``label idx:val idx:val ...`` with 1-based indices.
    Labels ``> 0`` map to +1, everything else to -1. Blank lines and
    ``#`` comments are skipped.
    """
    labels: list[float] = []
    rows: list[dict[int, float]] = []
    max_idx = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                label = float(parts[0])
                entries = {}
                for tok in parts[1:]:
                    idx_s, val_s = tok.split(":", 1)
                    idx = int(idx_s)
                    if idx < 1:
                        raise ValueError(f"feature index {idx} is not 1-based")
                    entries[idx] = float(val_s)
            except ValueError as exc:
                raise ObjectiveError(f"{path}:{lineno}: malformed LibSVM line ({exc})") from exc
            labels.append(1.0 if label > 0 else -1.0)
            rows.append(entries)
            if entries:
                max_idx = max(max_idx, max(entries))
    if not rows:
        raise ObjectiveError(f"{path}: no samples")
    d = n_features if n_features is not None else max_idx
    if max_idx > d:
        raise ObjectiveError(f"{path}: feature index {max_idx} exceeds n_features={d}")
    Z = np.zeros((len(rows), d))
    for r, entries in enumerate(rows):
        for idx, val in entries.items():
            Z[r, idx - 1] = val
    return Z, np.array(labels)


def logistic_ensemble(Z: np.ndarray, y: np.ndarray, m: int, ridge: float) -> ObjectiveEnsemble:
    """Split samples across ``m`` nodes round-robin by row (row ``j`` goes to node ``j mod m``)."""
    if m < 1 or Z.shape[0] < m:
        raise ObjectiveError(f"cannot split {Z.shape[0]} samples across {m} nodes")
    objectives = [LogisticObjective(Z[i::m], y[i::m], ridge) for i in range(m)]
    return ObjectiveEnsemble(objectives)
