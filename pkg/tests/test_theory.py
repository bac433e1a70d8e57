import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dprox.core import StackedVector
from dprox.network import MixingSchedule
from dprox.objectives import generate_quadratic_ensemble
from dprox.prox import CompositeTerm
from dprox.solver import CoefficientSchedule, run
from dprox.theory import (
    check_coefficient_bounds,
    check_sandwich,
    complexity_envelope,
    delta_total,
    distance_envelope,
    fitted_rate,
    inexact_eta,
    model_values,
)

TERMS = [CompositeTerm(), CompositeTerm("l1", w1=0.4), CompositeTerm("elastic-net", w1=0.2, w2=0.5)]


def naive_model(ens, term, y, z, x):
    """Independent loop over nodes and coordinates."""
    L_l = max(o.L for o in ens.objectives)
    mu_l = min(o.mu for o in ens.objectives)
    L_g = sum(o.L for o in ens.objectives) / ens.m
    mu_g = sum(o.mu for o in ens.objectives) / ens.m
    c = (mu_l - 2 * L_l**2 / mu_g) / 2
    eta = (L_l**2 / L_g + 2 * L_l**2 / mu_g + L_l - mu_l) / (2 * ens.m)
    f = psi = sq = 0.0
    for obj, xi in zip(ens.objectives, x.blocks):
        g = obj.A @ xi - obj.b
        ip_y = sum(g[j] * (y[j] - xi[j]) for j in range(len(y)))
        ip_z = sum(g[j] * (z[j] - y[j]) for j in range(len(y)))
        dist = sum((y[j] - xi[j]) ** 2 for j in range(len(y)))
        f += obj.value(xi) + ip_y + c * dist
        psi += ip_z + term.g_value(z) - term.g_value(xi)
        sq += dist
    return f / ens.m, psi / ens.m, eta * sq


@pytest.mark.parametrize("term", TERMS)
def test_model_matches_naive_summation(term, rng):
    ens = generate_quadratic_ensemble(4, 5, 3, 12.0, scale_spread=4.0)
    for _ in range(20):
        y, z = rng.standard_normal(3), rng.standard_normal(3)
        x = StackedVector(y + rng.standard_normal((5, 3)))
        got = model_values(ens, term, y, z, x)
        f, psi, delta = naive_model(ens, term, y, z, x)
        assert got.f_delta == pytest.approx(f, rel=1e-12, abs=1e-12)
        assert got.psi_delta == pytest.approx(psi, rel=1e-12, abs=1e-12)
        assert got.delta == pytest.approx(delta, rel=1e-12)


def test_eta_formula(small_ensemble):
    L_l, mu_l, L_g, mu_g = small_ensemble.constants()
    expected = (L_l**2 / L_g + 2 * L_l**2 / mu_g + L_l - mu_l) / (2 * small_ensemble.m)
    assert inexact_eta(L_l, mu_l, L_g, mu_g, small_ensemble.m) == pytest.approx(expected)


@pytest.mark.parametrize("term", TERMS)
def test_collapsed_model(term, small_ensemble, rng):
    y, z = rng.standard_normal(4), rng.standard_normal(4)
    x = StackedVector.broadcast(y, 5)
    got = model_values(small_ensemble, term, y, z, x)
    assert got.delta == 0.0
    assert got.f_delta == pytest.approx(small_ensemble.value_avg(y), rel=1e-12)
    psi = small_ensemble.grad_avg(y) @ (z - y) + term.g_value(z) - term.g_value(y)
    assert got.psi_delta == pytest.approx(psi, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("term", TERMS)
def test_model_at_z_equals_y(term, small_ensemble, rng):
    y = rng.standard_normal(4)
    x = StackedVector(y + rng.standard_normal((5, 4)))
    got = model_values(small_ensemble, term, y, y, x)
    expected = np.mean([term.g_value(y) - term.g_value(xi) for xi in x.blocks])
    assert got.psi_delta == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("term", TERMS)
def test_sandwich_slacks_vanish_at_consensus(term, small_ensemble, rng):
    y = rng.standard_normal(4)
    lo, hi = check_sandwich(small_ensemble, term, y, y, StackedVector.broadcast(y, 5))
    assert abs(lo) <= 1e-10 and abs(hi) <= 1e-10


def test_model_dimension_mismatch(small_ensemble):
    with pytest.raises(ValueError):
        model_values(small_ensemble, CompositeTerm(), np.zeros(3), np.zeros(4), StackedVector(np.zeros((5, 4))))


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0.01, 1.0, 10.0]), st.integers(0, 2))
def test_sandwich_holds(seed, scale, t):
    rng = np.random.default_rng(seed)
    m, d = int(rng.integers(2, 7)), int(rng.integers(2, 6))
    ens = generate_quadratic_ensemble(seed, m, d, float(rng.uniform(1, 80)), scale_spread=6.0)
    y, z = rng.standard_normal(d), rng.standard_normal(d)
    x = StackedVector(y + scale * rng.standard_normal((m, d)))
    lo, hi = check_sandwich(ens, TERMS[t], y, z, x)
    assert lo >= -1e-8 and hi >= -1e-8


def test_sandwich_far_points(rng):
    ens = generate_quadratic_ensemble(7, 6, 4, 30.0, scale_spread=5.0)
    for _ in range(200):
        y, z = rng.standard_normal(4), 5 * rng.standard_normal(4)
        offsets = rng.standard_normal((6, 4))
        offsets *= 10.0 / np.linalg.norm(offsets, axis=1, keepdims=True)
        lo, hi = check_sandwich(ens, TERMS[1], y, z, StackedVector(y + offsets))
        assert lo >= -1e-8 and hi >= -1e-8


def test_coefficient_bounds_unit_case_is_tight():
    report = check_coefficient_bounds(CoefficientSchedule.build(1, 1.0, 1.0), 1)
    assert report.growth_margin[0] == pytest.approx(0.0, abs=1e-15)
    assert report.ok


def test_coefficient_bounds_long_run():
    sched = CoefficientSchedule.build(1000, 1.0, 0.01)
    report = check_coefficient_bounds(sched, 1000)
    assert report.ok and report.first_violation() is None
    # the ratio sum approaches but stays under 1 + 2 sqrt(100) = 21
    assert 15.0 < sched.ratio_sum[1000] <= 21.0


def test_ratio_sum_matches_direct_sum():
    sched = CoefficientSchedule.build(200, 2.0, 0.3)
    for n in (1, 7, 50, 200):
        direct = math.fsum(sched.A[k + 1] for k in range(n)) / sched.A[n]
        assert sched.ratio_sum[n] == pytest.approx(direct, rel=1e-12)


def test_coefficient_bounds_detect_violation():
    sched = CoefficientSchedule.build(10, 1.0, 0.1)
    sched.log_A[5] -= 3.0
    assert check_coefficient_bounds(sched, 10).first_violation() == 5
    with pytest.raises(ValueError):
        check_coefficient_bounds(sched, 11)


def test_envelope_constants():
    env = complexity_envelope(2.0, 0.5, 0.5, 3, 7.0)
    assert env.a == pytest.approx(64.0)
    assert env.b == pytest.approx(8 * 4 / 0.5 * (1 + 2 * 2))
    assert env.lam == 0.125
    assert env.c(3) == pytest.approx(3 * (1.125**2 - 1) ** 2)


def test_delta_total_trivial_cases():
    assert delta_total([0.0, 0.3], 2.0) == 0.0
    assert delta_total([1.0, 2.0, 3.0], 0.5) == pytest.approx(0.5 * 5)
    ens = generate_quadratic_ensemble(0, 5, 4, 10.0)
    rep = run(ens, CompositeTerm("l1", w1=0.1), MixingSchedule(5, "complete"), 1, 50, x0=np.ones(4))
    eta = inexact_eta(*ens.constants(), 5)
    assert delta_total(rep, eta) <= 1e-16
    assert delta_total(rep.betas, eta, 50) == delta_total(rep, eta)


def test_distance_envelope_bounds_measured_distance():
    ens = generate_quadratic_ensemble(1, 8, 5, 16.0)
    sched = MixingSchedule(8, "ring")
    x0 = np.full(5, 2.0)
    rep = run(ens, CompositeTerm(), sched, 10, 40, x0=x0, x_star=ens.x_star)
    R0_sq = 8 * float(np.sum((x0 - ens.x_star) ** 2))
    bound = distance_envelope(rep, ens.L_g, ens.mu_g, R0_sq, inexact_eta(*ens.constants(), 8))
    assert 0 < rep.records[-1].dist_sq <= bound


def test_fitted_rate_recovers_geometric_sequence():
    seq = 3.0 * 0.8 ** np.arange(40)
    assert fitted_rate(seq) == pytest.approx(0.8, rel=1e-12)
    assert fitted_rate(np.concatenate([seq, np.zeros(5)]), floor=1e-30) == pytest.approx(0.8, rel=1e-12)
    with pytest.raises(ValueError):
        fitted_rate([1e-30, 1e-31])
