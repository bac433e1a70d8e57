"""Time-varying communication graphs, Metropolis mixing, and the gossip consensus subroutine.

A :class:`MixingSchedule` is a deterministic, seeded sequence of doubly
stochastic mixing matrices ``W^0, W^1, ...``. Every matrix handed out is
checked against the certified contraction ``rho_max = 1 - 1/chi``; the
schedule cursor counts matrices consumed (one per communication round).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import StackedVector, consensus_error

logger = logging.getLogger(__name__)

TOPOLOGIES = ("complete", "ring", "path", "ring-chords")

Edge = tuple[int, int]


class MixingError(RuntimeError):
    """A mixing matrix violates the certified assumptions (e.g. disconnected round)."""


def _normalize_edges(edges: Iterable[Sequence[int]], m: int) -> tuple[Edge, ...]:
    seen: set[Edge] = set()
    for e in edges:
        i, j = int(e[0]), int(e[1])
        if i == j:
            raise ValueError(f"self-loop at node {i}")
        if not (0 <= i < m and 0 <= j < m):
            raise ValueError(f"edge ({i}, {j}) out of range for m={m}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise ValueError(f"duplicate edge {key}")
        seen.add(key)
    return tuple(sorted(seen))


def metropolis_weights(edges: Iterable[Sequence[int]], m: int) -> np.ndarray:
    """Metropolis-Hastings mixing matrix of a simple undirected graph.

    ``W_ij = 1 / (1 + max(deg_i, deg_j))`` on edges, ``W_ii = 1 - sum_{j != i} W_ij``.
    """
    edges = _normalize_edges(edges, m)
    deg = np.zeros(m, dtype=int)
    for i, j in edges:
        deg[i] += 1
        deg[j] += 1
    W = np.zeros((m, m))
    for i, j in edges:
        w = 1.0 / (1.0 + max(deg[i], deg[j]))
        W[i, j] = W[j, i] = w
    for i in range(m):
        W[i, i] = 1.0 - (W[i].sum() - W[i, i])
    return W


def deviation_norm(W: np.ndarray, tol: float = 1e-10, max_iter: int = 200_000) -> float:
    """``||W - (1/m) 1 1^T||_2`` for symmetric ``W`` by power iteration.

    Iterates on ``B = W - P`` and stops once the residual of the Rayleigh
    quotient of ``B^2`` drops below ``tol``.
    """
    m = W.shape[0]
    B = W - np.full((m, m), 1.0 / m)
    if m == 1 or not np.any(np.abs(B) > 1e-15):
        return 0.0
    # fixed start vector keeps certification deterministic
    x = np.cos(np.arange(1, m + 1) * 1.2345) + 0.1
    x -= x.mean()
    x /= np.linalg.norm(x)
    rho_sq = 0.0
    for _ in range(max_iter):
        Bx = B @ x
        BBx = B @ Bx
        rho_sq = float(x @ BBx)
        if np.linalg.norm(BBx - rho_sq * x) <= tol:
            break
        nrm = np.linalg.norm(BBx)
        if nrm == 0.0:
            return 0.0
        x = BBx / nrm
    else:
        logger.warning("power iteration hit max_iter=%d before reaching tol=%g", max_iter, tol)
    return float(np.sqrt(max(rho_sq, 0.0)))


def _ring_edges(m: int) -> list[Edge]:
    if m < 2:
        return []
    if m == 2:
        return [(0, 1)]
    return [(i, (i + 1) % m) for i in range(m)]


def base_graph(topology: str, m: int, rng: np.random.Generator | None = None, chords: int | None = None) -> tuple[Edge, ...]:
    """Edge set of a connected base graph on ``m`` nodes."""
    if m < 1:
        raise ValueError(f"need m >= 1, got {m}")
    if topology == "complete":
        edges = [(i, j) for i in range(m) for j in range(i + 1, m)]
    elif topology == "ring":
        edges = _ring_edges(m)
    elif topology == "path":
        edges = [(i, i + 1) for i in range(m - 1)]
    elif topology == "ring-chords":
        edges = _ring_edges(m)
        present = {(min(e), max(e)) for e in edges}
        candidates = [(i, j) for i in range(m) for j in range(i + 1, m) if (i, j) not in present]
        n_chords = m // 2 if chords is None else chords
        n_chords = min(n_chords, len(candidates))
        if n_chords:
            rng = rng if rng is not None else np.random.default_rng(0)
            pick = rng.choice(len(candidates), size=n_chords, replace=False)
            edges += [candidates[p] for p in sorted(pick)]
    else:
        raise ValueError(f"unknown topology {topology!r}; expected one of {TOPOLOGIES}")
    return _normalize_edges(edges, m)


def _find(parent: list[int], i: int) -> int:
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


def is_connected(edges: Iterable[Edge], m: int) -> bool:
    parent = list(range(m))
    comps = m
    for i, j in edges:
        ri, rj = _find(parent, i), _find(parent, j)
        if ri != rj:
            parent[ri] = rj
            comps -= 1
    return comps <= 1


def drop_edges(base: Sequence[Edge], m: int, p_drop: float, rng: np.random.Generator) -> tuple[Edge, ...]:
    """Delete each edge independently with probability ``p_drop``, then restore
    dropped edges (in random order) until the graph is connected again."""
    keep_mask = rng.random(len(base)) >= p_drop
    kept = [e for e, k in zip(base, keep_mask) if k]
    dropped = [e for e, k in zip(base, keep_mask) if not k]
    parent = list(range(m))
    comps = m
    for i, j in kept:
        ri, rj = _find(parent, i), _find(parent, j)
        if ri != rj:
            parent[ri] = rj
            comps -= 1
    if comps > 1:
        for idx in rng.permutation(len(dropped)):
            i, j = dropped[idx]
            ri, rj = _find(parent, i), _find(parent, j)
            if ri != rj:
                parent[ri] = rj
                comps -= 1
                kept.append((i, j))
                if comps == 1:
                    break
    return tuple(sorted(kept))


class Mixer:
    """One round's mixing matrix, stored both densely and as directed messages."""

    __slots__ = ("edges", "W", "self_weight", "src", "dst", "weight", "_rho")

    def __init__(self, edges: tuple[Edge, ...], m: int, lazy: bool = False):
        W = metropolis_weights(edges, m)
        if lazy:
            W = 0.5 * (W + np.eye(m))
        self.edges = edges
        self.W = W
        self.self_weight = np.diag(W).copy()
        src, dst = [], []
        for i, j in edges:
            src += [j, i]
            dst += [i, j]
        self.src = np.array(src, dtype=np.intp)
        self.dst = np.array(dst, dtype=np.intp)
        self.weight = W[self.dst, self.src].copy()
        self._rho: float | None = None

    @property
    def rho(self) -> float:
        if self._rho is None:
            self._rho = deviation_norm(self.W)
        return self._rho

    def apply(self, data: np.ndarray) -> np.ndarray:
        """Each node keeps ``W_ii x_i`` and adds the weighted values received from its neighbors."""
        out = self.self_weight[:, None] * data
        np.add.at(out, self.dst, self.weight[:, None] * data[self.src])
        return out


@dataclass(frozen=True)
class ConsensusTrace:
    rounds_used: int
    pre_error: float
    post_error: float
    first_round: int
    end_round: int  # exclusive


class MixingSchedule:
    """Seeded time-varying sequence of Metropolis mixing matrices.

    With ``p_drop == 0`` the base graph is used every round. Otherwise each
    round uses a graph obtained from the base by independent edge deletion
    with connectivity repair. When ``pool_size > 0`` those graphs are drawn
    once into a pool and every round picks a pool member uniformly; with
    ``pool_size == 0`` a fresh graph is generated for every round. Round
    ``k``'s graph depends only on ``(seed, k)``, so the sequence can be
    inspected ahead of the cursor without consuming it.
    """

    CHUNK = 4096

    def __init__(
        self,
        m: int,
        topology: str = "ring",
        p_drop: float = 0.0,
        lazy: bool = False,
        seed: int = 0,
        chords: int | None = None,
        pool_size: int = 64,
        certify_samples: int = 256,
    ):
        if not 0.0 <= p_drop < 1.0:
            raise ValueError(f"p_drop must lie in [0, 1), got {p_drop}")
        if pool_size < 0:
            raise ValueError("pool_size must be >= 0")
        self.m = m
        self.topology = topology
        self.p_drop = float(p_drop)
        self.lazy = bool(lazy)
        self.seed = int(seed)
        self.pool_size = int(pool_size)
        self.base = base_graph(topology, m, np.random.default_rng([self.seed, 0]), chords)
        if not is_connected(self.base, m):
            raise MixingError(f"base {topology} graph on {m} nodes is disconnected")
        self.cursor = 0
        self.rho_max: float | None = None
        self._mixers: dict[tuple[Edge, ...], Mixer] = {}
        self._pool: list[tuple[Edge, ...]] = []
        self._pool_index = np.empty(0, dtype=np.intp)
        if self.p_drop > 0 and self.pool_size > 0:
            rng = np.random.default_rng([self.seed, 1])
            self._pool = [drop_edges(self.base, m, self.p_drop, rng) for _ in range(self.pool_size)]
        if certify_samples:
            certify_chi(self, certify_samples)

    @property
    def time_varying(self) -> bool:
        return self.p_drop > 0

    @property
    def chi(self) -> float:
        if self.rho_max is None:
            raise MixingError("schedule has not been certified; call certify_chi first")
        return 1.0 / (1.0 - self.rho_max)

    @property
    def contraction(self) -> float:
        """Certified per-round contraction ``1 - 1/chi``."""
        if self.rho_max is None:
            raise MixingError("schedule has not been certified; call certify_chi first")
        return self.rho_max

    def graph(self, k: int) -> tuple[Edge, ...]:
        """Edge set used at round ``k``."""
        if not self.time_varying:
            return self.base
        if self._pool:
            while self._pool_index.size <= k:
                chunk = self._pool_index.size // self.CHUNK
                rng = np.random.default_rng([self.seed, 2, chunk])
                self._pool_index = np.concatenate(
                    [self._pool_index, rng.integers(0, len(self._pool), size=self.CHUNK)]
                )
            return self._pool[self._pool_index[k]]
        return drop_edges(self.base, self.m, self.p_drop, np.random.default_rng([self.seed, 3, k]))

    def mixer(self, k: int) -> Mixer:
        edges = self.graph(k)
        mix = self._mixers.get(edges)
        if mix is None:
            mix = Mixer(edges, self.m, self.lazy)
            self._mixers[edges] = mix
        return mix

    def matrix(self, k: int) -> np.ndarray:
        return self.mixer(k).W

    def next_mixer(self) -> Mixer:
        """Hand out the mixer at the cursor after re-checking it against ``rho_max``."""
        if self.rho_max is None:
            raise MixingError("schedule has not been certified; call certify_chi first")
        k = self.cursor
        mix = self.mixer(k)
        if mix.rho > self.rho_max + 1e-12:
            raise MixingError(
                f"round {k}: ||W - P|| = {mix.rho:.12g} exceeds certified {self.rho_max:.12g}"
            )
        self.cursor += 1
        return mix

    def dump(self, path: str | Path, rounds: int, start: int = 0) -> None:
        """Write one line per round with that round's edge set."""
        with open(path, "w", encoding="utf-8") as fh:
            for k in range(start, start + rounds):
                fh.write(f"{k}: " + " ".join(f"{i}-{j}" for i, j in self.graph(k)) + "\n")


def certify_chi(schedule: MixingSchedule, sample_count: int) -> float:
    """Certify the graph condition number from sampled rounds.

    Samples rounds ``cursor .. cursor + sample_count - 1`` (and every pool
    member when the schedule draws from a pool), sets
    ``schedule.rho_max`` to the largest ``||W - P||`` seen and returns
    ``chi = 1 / (1 - rho_max)``.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    keys: dict[tuple[Edge, ...], int] = {}
    for k in range(schedule.cursor, schedule.cursor + sample_count):
        keys.setdefault(schedule.graph(k), k)
    for p, edges in enumerate(schedule._pool):
        keys.setdefault(edges, -(p + 1))
    rho_max = 0.0
    for edges, k in keys.items():
        mix = schedule._mixers.get(edges) or Mixer(edges, schedule.m, schedule.lazy)
        schedule._mixers[edges] = mix
        if mix.rho >= 1.0 - 1e-12:
            where = f"round {k}" if k >= 0 else f"pool graph {-k - 1}"
            raise MixingError(f"{where}: mixing matrix does not contract (||W - P|| = {mix.rho:.6g}); graph disconnected?")
        rho_max = max(rho_max, mix.rho)
    schedule.rho_max = rho_max
    return schedule.chi


def consensus(schedule: MixingSchedule, v: StackedVector, T: int) -> tuple[StackedVector, ConsensusTrace]:
    """``T`` gossip rounds: ``(W^{c+T-1} (x) I) ... (W^c (x) I) v`` with ``c`` the cursor."""
    if T < 0:
        raise ValueError(f"T must be >= 0, got {T}")
    if v.m != schedule.m:
        raise ValueError(f"vector has {v.m} blocks, schedule has {schedule.m} nodes")
    start = schedule.cursor
    pre = consensus_error(v)
    data = v.blocks
    for _ in range(T):
        data = schedule.next_mixer().apply(data)
    out = StackedVector(data) if T else v.copy()
    return out, ConsensusTrace(T, pre, consensus_error(out), start, schedule.cursor)


def consensus_dense(schedule: MixingSchedule, v: StackedVector, T: int) -> StackedVector:
    """Reference path: multiply by the explicit dense matrices. Consumes ``T`` rounds."""
    data = v.blocks.copy()
    for _ in range(T):
        data = schedule.next_mixer().W @ data
    return StackedVector(data)
