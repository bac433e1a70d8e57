"""Seeded property suites behind ``dprox check``.

Every check yields a :class:`CheckResult` whose ``margin`` is nonnegative
exactly when the check passes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from ..core import StackedVector, consensus_error
from ..network import MixingSchedule, consensus, consensus_dense
from ..objectives import generate_quadratic_ensemble
from ..prox import CompositeTerm, prox_point
from ..solver import CoefficientSchedule
from ..theory import check_coefficient_bounds, check_sandwich

SANDWICH_TOL = 1e-8
CONTRACTION_TOL = 1e-9
PROX_TOL = 1e-6
LEMMA3_PAIRS = ((1.0, 1.0), (1.0, 0.1), (1.0, 0.01), (10.0, 0.1))


@dataclass(frozen=True)
class CheckResult:
    name: str
    where: str
    margin: float
    passed: bool

    def line(self) -> str:
        return f"{self.name},{self.where},{self.margin:.6e},{'pass' if self.passed else 'FAIL'}"


def lemma1_suite(n_ensembles: int = 10, draws: int = 1000, seed: int = 0) -> Iterator[CheckResult]:
    """Inexact-model sandwich on random draws over seeded quadratic ensembles.

    Draws ``y, z`` are Gaussian and ``x_i = y + s * noise`` with ``s`` cycling
    through 0.01, 1 and 10. The composite term rotates through zero, l1 and
    elastic-net.
    """
    terms = (CompositeTerm(), CompositeTerm("l1", w1=0.5), CompositeTerm("elastic-net", w1=0.3, w2=0.2))
    scales = (0.01, 1.0, 10.0)
    for e in range(n_ensembles):
        rng = np.random.default_rng([seed, e])
        m = int(rng.integers(2, 9))
        d = int(rng.integers(2, 7))
        kappa = float(np.exp(rng.uniform(0.0, math.log(50.0))))
        ens = generate_quadratic_ensemble(1000 * seed + e, m, d, kappa, scale_spread=5.0)
        term = terms[e % len(terms)]
        worst_lo = (math.inf, -1)
        worst_hi = (math.inf, -1)
        for j in range(draws):
            y = rng.standard_normal(d)
            z = term.project(rng.standard_normal(d))
            x = StackedVector(y + scales[j % 3] * rng.standard_normal((m, d)))
            lo, hi = check_sandwich(ens, term, y, z, x)
            worst_lo = min(worst_lo, (lo, j))
            worst_hi = min(worst_hi, (hi, j))
        yield CheckResult(f"lemma1.lower[ens={e}]", f"draw={worst_lo[1]}", worst_lo[0], worst_lo[0] >= -SANDWICH_TOL)
        yield CheckResult(f"lemma1.upper[ens={e}]", f"draw={worst_hi[1]}", worst_hi[0], worst_hi[0] >= -SANDWICH_TOL)


def lemma3_suite(N: int = 2000, pairs=LEMMA3_PAIRS) -> Iterator[CheckResult]:
    """Coefficient-growth bounds at every prefix up to ``N``; reports the tightest prefix."""
    for L, mu in pairs:
        report = check_coefficient_bounds(CoefficientSchedule.build(N, L, mu), N)
        n, margin = report.tightest_growth
        yield CheckResult(f"lemma3.growth[L={L:g},mu={mu:g}]", f"n={n}", margin, margin >= -1e-12)
        n, margin = report.tightest_ratio
        yield CheckResult(f"lemma3.ratio[L={L:g},mu={mu:g}]", f"n={n}", margin, margin >= -1e-12)


def consensus_suite(
    m: int = 20, p_drop: float = 0.2, n_vectors: int = 100, max_T: int = 50, seed: int = 0, d: int = 3
) -> Iterator[CheckResult]:
    """Geometric contraction, mean preservation and matrix-free equivalence of gossip."""
    schedule = MixingSchedule(m, "ring", p_drop=p_drop, seed=seed)
    rho = schedule.contraction
    rng = np.random.default_rng([seed, 99])
    worst = np.full(max_T, math.inf)
    worst_vec = np.zeros(max_T, dtype=int)
    mean_drift = 0.0
    for i in range(n_vectors):
        v = StackedVector(rng.standard_normal((m, d)) * rng.uniform(0.1, 10.0))
        e0 = consensus_error(v)
        cur = v
        for t in range(1, max_T + 1):
            cur, _ = consensus(schedule, cur, 1)
            margin = rho**t * e0 + CONTRACTION_TOL - consensus_error(cur)
            if margin < worst[t - 1]:
                worst[t - 1], worst_vec[t - 1] = margin, i
        mean_drift = max(mean_drift, float(np.linalg.norm(cur.mean_block() - v.mean_block())) * math.sqrt(m))
    for t in range(max_T):
        yield CheckResult(f"consensus.contraction[T={t + 1}]", f"vector={worst_vec[t]}", float(worst[t]), worst[t] >= 0)
    yield CheckResult("consensus.mean_preservation", f"T={max_T}", 1e-10 - mean_drift, mean_drift <= 1e-10)

    a = MixingSchedule(m, "ring", p_drop=p_drop, seed=seed + 1)
    b = MixingSchedule(m, "ring", p_drop=p_drop, seed=seed + 1)
    v = StackedVector(rng.standard_normal((m, d)))
    gossip, _ = consensus(a, v, max_T)
    dense = consensus_dense(b, v, max_T)
    diff = (gossip - dense).norm()
    yield CheckResult("consensus.matrix_free_equivalence", f"T={max_T}", 1e-12 - diff, diff <= 1e-12)


def golden_section(phi: Callable[[float], float], lo: float, hi: float, iters: int = 200) -> float:
    """Minimizer of a convex scalar function on ``[lo, hi]``."""
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - inv * (b - a), a + inv * (b - a)
    fc, fd = phi(c), phi(d)
    for _ in range(iters):
        if b - a <= 1e-15 * max(1.0, abs(a), abs(b)):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = phi(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = phi(d)
    return 0.5 * (a + b)


def prox_oracle(term: CompositeTerm, gamma: float, x: np.ndarray) -> np.ndarray:
    """Prox by one-dimensional search: per coordinate for separable pairs, radially for the ball."""
    if term.q_kind == "euclidean-ball":
        offset = x - term.center
        dist = float(np.linalg.norm(offset))
        if dist == 0.0:
            return np.array(x, dtype=float)
        u = offset / dist
        t = golden_section(lambda s: float(np.sum((term.center + s * u - x) ** 2)), 0.0, term.radius)
        return term.center + t * u
    lo = np.broadcast_to(term.lo, x.shape) if term.q_kind == "box" else np.full(x.shape, -np.inf)
    hi = np.broadcast_to(term.hi, x.shape) if term.q_kind == "box" else np.full(x.shape, np.inf)
    out = np.empty_like(x)
    for i, xi in enumerate(x):

        def phi(t: float, xi: float = xi) -> float:
            val = (t - xi) ** 2 / (2.0 * gamma)
            if term.g_kind != "zero":
                val += term.w1 * abs(t)
            if term.g_kind == "elastic-net":
                val += 0.5 * term.w2 * t * t
            return val

        a = max(lo[i], min(xi, 0.0) - 1.0)
        b = min(hi[i], max(xi, 0.0) + 1.0)
        if a > b:  # the box lies entirely on one side of the search window
            a, b = lo[i], hi[i]
        out[i] = golden_section(phi, a, b)
    return out


def prox_terms(rng: np.random.Generator, d: int) -> list[tuple[str, CompositeTerm]]:
    lo = -rng.uniform(0.1, 1.0, size=d)
    hi = rng.uniform(0.1, 1.0, size=d)
    return [
        ("zero/all-space", CompositeTerm()),
        ("zero/box", CompositeTerm(q_kind="box", lo=lo, hi=hi)),
        ("zero/euclidean-ball", CompositeTerm(q_kind="euclidean-ball", center=rng.standard_normal(d), radius=0.7)),
        ("l1/all-space", CompositeTerm("l1", w1=0.6)),
        ("l1/box", CompositeTerm("l1", w1=0.4, q_kind="box", lo=lo, hi=hi)),
        ("elastic-net/all-space", CompositeTerm("elastic-net", w1=0.5, w2=0.8)),
    ]


def prox_suite(n_points: int = 1000, d: int = 4, seed: int = 0) -> Iterator[CheckResult]:
    rng = np.random.default_rng([seed, 7])
    for name, term in prox_terms(rng, d):
        worst, worst_at = 0.0, 0
        expansion = -math.inf
        for j in range(n_points):
            gamma = float(np.exp(rng.uniform(math.log(0.05), math.log(5.0))))
            x = 2.0 * rng.standard_normal(d)
            err = float(np.max(np.abs(prox_point(term, gamma, x) - prox_oracle(term, gamma, x))))
            if err > worst:
                worst, worst_at = err, j
            x2 = 2.0 * rng.standard_normal(d)
            gap = float(np.linalg.norm(prox_point(term, gamma, x) - prox_point(term, gamma, x2)) - np.linalg.norm(x - x2))
            expansion = max(expansion, gap)
        yield CheckResult(f"prox.oracle[{name}]", f"point={worst_at}", PROX_TOL - worst, worst <= PROX_TOL)
        yield CheckResult(f"prox.nonexpansive[{name}]", f"points={n_points}", 1e-10 - expansion, expansion <= 1e-10)


SUITES: dict[str, Callable[[], Iterator[CheckResult]]] = {
    "lemma1": lemma1_suite,
    "lemma3": lemma3_suite,
    "consensus": consensus_suite,
    "prox": prox_suite,
}


def run_suite(name: str) -> Iterator[CheckResult]:
    names = list(SUITES) if name == "all" else [name]
    for n in names:
        yield from SUITES[n]()
