"""Numerical certificates for the inexact-oracle model, coefficient growth and complexity bookkeeping."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import StackedVector


def inexact_eta(L_l: float, mu_l: float, L_g: float, mu_g: float, m: int) -> float:
    """``eta = (L_l^2 / L_g + 2 L_l^2 / mu_g + L_l - mu_l) / (2 m)``."""
    return (L_l**2 / L_g + 2.0 * L_l**2 / mu_g + L_l - mu_l) / (2.0 * m)


@dataclass(frozen=True)
class InexactModel:
    f_delta: float
    psi_delta: float
    delta: float
    eta: float


def model_values(ens, term, y: np.ndarray, z: np.ndarray, x: StackedVector) -> InexactModel:
    """Evaluate the inexact first-order model of the average objective built from local points ``x_i``.

    ``f_delta(y, x) = (1/m) sum_i [f_i(x_i) + <grad f_i(x_i), y - x_i> + c ||y - x_i||^2]`` with
    ``c = (mu_l - 2 L_l^2 / mu_g) / 2`` (may be negative),
    ``psi_delta(z, y, x) = (1/m) sum_i [<grad f_i(x_i), z - y> + g(z) - g(x_i)]`` and
    ``delta = eta * sum_i ||x_i - y||^2``.
    """
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape != (ens.m, ens.d) or y.shape != (ens.d,) or z.shape != (ens.d,):
        raise ValueError(f"dimension mismatch: x{x.shape}, y{y.shape}, z{z.shape} for ensemble ({ens.m}, {ens.d})")
    L_l, mu_l, L_g, mu_g = ens.constants()
    c = 0.5 * (mu_l - 2.0 * L_l**2 / mu_g)
    eta = inexact_eta(L_l, mu_l, L_g, mu_g, ens.m)
    g_z = term.g_value(z)
    f_terms, psi_terms, sq = [], [], []
    for obj, xi in zip(ens.objectives, x.blocks):
        gi = obj.grad(xi)
        diff = y - xi
        dsq = float(diff @ diff)
        f_terms.append(obj.value(xi) + float(gi @ diff) + c * dsq)
        psi_terms.append(float(gi @ (z - y)) + g_z - term.g_value(xi))
        sq.append(dsq)
    m = ens.m
    return InexactModel(
        f_delta=math.fsum(f_terms) / m,
        psi_delta=math.fsum(psi_terms) / m,
        delta=eta * math.fsum(sq),
        eta=eta,
    )


def check_sandwich(ens, term, y: np.ndarray, z: np.ndarray, x: StackedVector) -> tuple[float, float]:
    """Slacks of ``(mu_g/4)||z-y||^2 <= h(z) - model <= L_g ||z-y||^2 + delta``.

    ``h = f + g`` is the composite objective; its model value is
    ``f_delta + (1/m) sum_i g(x_i) + psi_delta`` so that the ``g(x_i)`` terms
    inside ``psi_delta`` cancel. Returns ``(lower_slack, upper_slack)``; both
    are nonnegative when the model is valid.
    """
    model = model_values(ens, term, y, z, x)
    g_local = math.fsum(term.g_value(xi) for xi in x.blocks) / ens.m
    h_z = ens.value_avg(z) + term.g_value(z)
    excess = h_z - (model.f_delta + g_local) - model.psi_delta
    dist_sq = float(np.sum((z - y) ** 2))
    lower = excess - 0.25 * ens.mu_g * dist_sq
    upper = ens.L_g * dist_sq + model.delta - excess
    return lower, upper


@dataclass(frozen=True)
class CoefficientBoundReport:
    """Margins of the two coefficient-growth bounds at every prefix ``n = 1..N``.

    ``growth_margin[n-1] = A^n / lower_bound(n) - 1`` and
    ``ratio_margin[n-1] = (1 + 2 sqrt(L/mu)) - sum_{k<n} A^{k+1} / A^n``.
    """

    growth_margin: np.ndarray
    ratio_margin: np.ndarray

    @property
    def ok(self) -> bool:
        return bool(np.all(self.growth_margin >= -1e-12) and np.all(self.ratio_margin >= -1e-12))

    @property
    def tightest_growth(self) -> tuple[int, float]:
        i = int(np.argmin(self.growth_margin))
        return i + 1, float(self.growth_margin[i])

    @property
    def tightest_ratio(self) -> tuple[int, float]:
        i = int(np.argmin(self.ratio_margin))
        return i + 1, float(self.ratio_margin[i])

    def first_violation(self) -> int | None:
        bad = np.flatnonzero((self.growth_margin < -1e-12) | (self.ratio_margin < -1e-12))
        return int(bad[0]) + 1 if bad.size else None


def check_coefficient_bounds(schedule, N: int) -> CoefficientBoundReport:
    """Check ``A^n >= (1 + sqrt(mu/L)/4)^{2(n-1)} / (2L)`` and
    ``sum_{k=0}^{n-1} A^{k+1} / A^n <= 1 + 2 sqrt(L/mu)`` for ``n = 1..N``.

    Both are evaluated from the schedule's ``log_A`` and running ratio sums,
    so they stay finite for large ``N``.
    """
    log_A = np.asarray(schedule.log_A, dtype=float)
    if log_A.size < N + 1:
        raise ValueError(f"schedule has {log_A.size - 1} steps, need {N}")
    L, mu = schedule.L_g, schedule.mu_g
    n = np.arange(1, N + 1)
    log_lower = 2.0 * (n - 1) * math.log1p(0.25 * math.sqrt(mu / L)) - math.log(2.0 * L)
    growth = np.expm1(log_A[1 : N + 1] - log_lower)
    ratio = (1.0 + 2.0 * math.sqrt(L / mu)) - np.asarray(schedule.ratio_sum[1 : N + 1], dtype=float)
    return CoefficientBoundReport(growth, ratio)


@dataclass(frozen=True)
class ComplexityEnvelope:
    a: float
    b: float
    lam: float
    R0_sq: float

    def c(self, N: int) -> float:
        return N * ((1.0 + self.lam) ** (N - 1) - 1.0) ** 2


def complexity_envelope(L_g: float, mu_g: float, contraction: float, T: int, R0_sq: float) -> ComplexityEnvelope:
    """``a = 4 L^3 / mu``, ``b = (8 L^2 / mu)(1 + 2 sqrt(L / mu))``, ``lambda = contraction^T``."""
    a = 4.0 * L_g**3 / mu_g
    b = 8.0 * L_g**2 / mu_g * (1.0 + 2.0 * math.sqrt(L_g / mu_g))
    return ComplexityEnvelope(a, b, contraction**T, R0_sq)


def delta_total(betas: Sequence[float], eta: float, N: int | None = None) -> float:
    """``eta * sum_{k=0}^{N-1} beta_k^2``; ``betas[k]`` is ``beta_k``. ``N`` defaults to ``len(betas) - 1``."""
    if hasattr(betas, "betas"):
        betas = betas.betas
    betas = list(betas)
    if N is None:
        N = max(len(betas) - 1, 1)
    return eta * math.fsum(b * b for b in betas[:N])


def beta_recurrence_margins(report) -> np.ndarray:
    """``(1 + lam) beta_k + lam gamma_k ||grad F(y^{k+1})|| - beta_{k+1}`` for every logged step."""
    lam = report.lam
    recs = report.records
    return np.array(
        [(1.0 + lam) * prev.beta + lam * cur.gamma * cur.grad_norm - cur.beta for prev, cur in zip(recs, recs[1:])]
    )


def distance_envelope(report, L_g: float, mu_g: float, R0_sq: float, eta: float) -> float:
    """Upper bound ``2 R0^2 / (A^N mu) + 8 (sum_k A^{k+1}) delta_total / (A^N mu)`` at the final iterate.

    ``A^N`` and the ratio sum come from a freshly built coefficient schedule in
    log form, so the bound is finite even when ``A^N`` overflows.
    """
    from .solver import CoefficientSchedule

    N = report.N
    coeffs = CoefficientSchedule.build(N, L_g, mu_g)
    dt = delta_total(report.betas, eta, N)
    inv_A = math.exp(-coeffs.log_A[N])
    return 2.0 * R0_sq * inv_A / mu_g + 8.0 * coeffs.ratio_sum[N] * dt / mu_g


def fitted_rate(dist_sq: Sequence[float], floor: float = 1e-20, skip: int = 0) -> float:
    """Per-iteration geometric factor from a least-squares fit of ``log dist_sq`` against ``k``.

    Uses iterations ``skip..K`` where ``K`` is the last index above ``floor``.
    """
    vals = np.asarray(dist_sq, dtype=float)
    above = np.flatnonzero(vals > floor)
    if above.size == 0:
        raise ValueError("no iterate above the fitting floor")
    stop = above[-1] + 1
    ks = np.arange(skip, stop)
    if ks.size < 2:
        raise ValueError("not enough iterations to fit a rate")
    slope = np.polyfit(ks, np.log(vals[skip:stop]), 1)[0]
    return float(np.exp(slope))
