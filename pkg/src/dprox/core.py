"""Stacked vectors in R^{md} and the averaging projector onto the consensus set."""

from __future__ import annotations

from typing import Iterable

import numpy as np


class StackedVector:
    """An element of R^{md} held as ``m`` contiguous blocks of length ``d``.

    Block ``i`` is the local copy held by node ``i``. Arithmetic is only
    defined between stacked vectors of identical shape; broadcasting a plain
    array into a stacked vector must be explicit (see :meth:`broadcast`).
    """

    __slots__ = ("_data",)

    def __init__(self, blocks: np.ndarray | Iterable[Iterable[float]]):
        data = np.array(blocks, dtype=float, order="C")
        if data.ndim != 2:
            raise ValueError(f"stacked vector needs an (m, d) array, got shape {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"stacked vector needs m >= 1 and d >= 1, got {data.shape}")
        self._data = data

    @classmethod
    def broadcast(cls, y: np.ndarray, m: int) -> StackedVector:
        """Return ``1 (x) y``: ``m`` identical copies of ``y``."""
        y = np.asarray(y, dtype=float).reshape(1, -1)
        return cls(np.repeat(y, m, axis=0))

    @classmethod
    def zeros(cls, m: int, d: int) -> StackedVector:
        return cls(np.zeros((m, d)))

    @property
    def blocks(self) -> np.ndarray:
        """The underlying (m, d) array. Treat as read-only."""
        return self._data

    @property
    def m(self) -> int:
        return self._data.shape[0]

    @property
    def d(self) -> int:
        return self._data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._data.shape

    def block(self, i: int) -> np.ndarray:
        return self._data[i]

    def copy(self) -> StackedVector:
        return StackedVector(self._data.copy())

    def _check(self, other: StackedVector) -> None:
        if not isinstance(other, StackedVector):
            raise TypeError(f"expected StackedVector, got {type(other).__name__}")
        if other.shape != self.shape:
            raise ValueError(f"shape mismatch: {self.shape} vs {other.shape}")

    def __add__(self, other: StackedVector) -> StackedVector:
        self._check(other)
        return StackedVector(self._data + other._data)

    def __sub__(self, other: StackedVector) -> StackedVector:
        self._check(other)
        return StackedVector(self._data - other._data)

    def __mul__(self, scalar: float) -> StackedVector:
        if isinstance(scalar, StackedVector):
            raise TypeError("use dot() for the inner product of stacked vectors")
        return StackedVector(self._data * float(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> StackedVector:
        return StackedVector(self._data / float(scalar))

    def __neg__(self) -> StackedVector:
        return StackedVector(-self._data)

    def dot(self, other: StackedVector) -> float:
        self._check(other)
        return float(np.vdot(self._data, other._data))

    def norm(self) -> float:
        return float(np.linalg.norm(self._data))

    def mean_block(self) -> np.ndarray:
        """Block average ``(1/m) sum_i v_i`` as a d-vector."""
        return self._data.mean(axis=0)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, StackedVector) and np.array_equal(self._data, other._data)

    __hash__ = None  # mutable-backed

    def __repr__(self) -> str:
        return f"StackedVector(m={self.m}, d={self.d})"


def project_consensus(v: StackedVector) -> StackedVector:
    """Apply ``P = (1/m) 1 1^T (x) I``: replace every block with the block mean."""
    return StackedVector.broadcast(v.mean_block(), v.m)


def consensus_error(v: StackedVector) -> float:
    """Euclidean distance from ``v`` to the consensus set, ``||v - P v||``."""
    dev = v.blocks - v.mean_block()
    return float(np.linalg.norm(dev))


def in_consensus(v: StackedVector, atol: float = 1e-12) -> bool:
    return consensus_error(v) <= atol
