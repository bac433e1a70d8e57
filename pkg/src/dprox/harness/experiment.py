"""Build a problem from a config, run the solver and write trace/summary files."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..network import MixingSchedule
from ..objectives import ObjectiveEnsemble, generate_quadratic_ensemble, load_libsvm, logistic_ensemble
from ..prox import CompositeTerm
from ..solver import RunReport, centralized_reference, iterations_for, run, select_T
from ..theory import delta_total, inexact_eta
from .config import ExperimentConfig, format_value

logger = logging.getLogger(__name__)


@dataclass
class Problem:
    ens: ObjectiveEnsemble
    term: CompositeTerm
    x_star: np.ndarray | None


def build_problem(cfg: ExperimentConfig) -> Problem:
    m = cfg["network.m"]
    if cfg["problem.kind"] == "quadratic":
        ens = generate_quadratic_ensemble(
            cfg["problem.seed"],
            m,
            cfg["problem.d"],
            cfg["problem.condition_target"],
            scale_spread=cfg["problem.scale_spread"],
            cond_spread=cfg["problem.cond_spread"],
        )
    else:
        data = Path(cfg["problem.data"])
        if not data.is_absolute() and cfg.source is not None:
            data = cfg.source.parent / data
        Z, y = load_libsvm(data)
        ens = logistic_ensemble(Z, y, m, cfg["problem.ridge"])
    term = cfg.composite_term()
    x_star = None
    if cfg["problem.reference"] == "auto":
        if term.g_kind == "zero" and term.q_kind == "all-space" and ens.x_star is not None:
            x_star = ens.x_star
        else:
            x_star = centralized_reference(ens, term)
    return Problem(ens, term, x_star)


def build_schedule(cfg: ExperimentConfig) -> MixingSchedule:
    return MixingSchedule(
        cfg["network.m"],
        topology=cfg["network.topology"],
        p_drop=cfg["network.p_drop"],
        lazy=cfg["network.lazy"],
        seed=cfg["network.seed"],
        chords=cfg["network.chords"],
        pool_size=cfg["network.pool_size"],
        certify_samples=cfg["network.certify_samples"],
    )


def initial_point(cfg: ExperimentConfig, d: int) -> np.ndarray:
    x0 = cfg["algorithm.x0"]
    if x0 == "zero":
        return np.zeros(d)
    arr = np.broadcast_to(np.asarray(x0, dtype=float), (d,))
    return np.array(arr)


@dataclass
class Outcome:
    report: RunReport
    problem: Problem
    schedule: MixingSchedule
    derived: dict[str, object]


def execute(cfg: ExperimentConfig) -> Outcome:
    """Resolve N and T from the config and run the solver once."""
    problem = build_problem(cfg)
    ens = problem.ens
    schedule = build_schedule(cfg)
    x0 = initial_point(cfg, ens.d)
    eps = cfg["algorithm.epsilon"]

    N = cfg["algorithm.N"]
    if N is None:
        N = iterations_for(eps, ens.L_g, ens.mu_g, cfg["algorithm.N_constant"])

    if problem.x_star is not None:
        # stacked-space norms: ||1 (x) (x0 - x*)||^2 and ||grad F(1 (x) x*)||^2
        R0_sq = float(ens.m * np.sum((x0 - problem.x_star) ** 2))
        grad_opt_sq = float(sum(np.sum(obj.grad(problem.x_star) ** 2) for obj in ens.objectives))
    else:
        R0_sq = cfg["problem.r0_sq_bound"]
        grad_opt_sq = cfg["problem.grad_norm_at_opt_bound"]
        grad_opt_sq = None if grad_opt_sq is None else grad_opt_sq**2

    T = cfg["algorithm.T"]
    if T == "theorem":
        T = select_T(schedule.chi, max(N, 1), eps, ens.constants(), ens.m, R0_sq, grad_opt_sq)

    report = run(
        ens,
        problem.term,
        schedule,
        T,
        N,
        x0=x0,
        x_star=problem.x_star,
        epsilon=eps if problem.x_star is not None else None,
    )
    eta = inexact_eta(*ens.constants(), ens.m)
    last = report.records[-1]
    derived: dict[str, object] = {
        "spec_hash": cfg.spec_hash(),
        "chi": schedule.chi,
        "contraction": schedule.contraction,
        "T": T,
        "lambda": report.lam,
        "N": report.N,
        "N_comp": report.N_comp,
        "N_comm": report.N_comm,
        "L_l": ens.L_l,
        "mu_l": ens.mu_l,
        "L_g": ens.L_g,
        "mu_g": ens.mu_g,
        "eta": eta,
        "R0_sq": R0_sq if R0_sq is not None else math.nan,
        "grad_norm_at_opt_sq": grad_opt_sq if grad_opt_sq is not None else math.nan,
        "delta_total": delta_total(report.betas, eta, report.N),
        "final_gap": last.gap,
        "final_dist_sq": last.dist_sq,
        "final_cons_err": last.cons_err,
        "reached_epsilon_at": report.reached_epsilon_at,
        "settled_at": report.settled_at(eps) if problem.x_star is not None else None,
    }
    return Outcome(report, problem, schedule, derived)


def write_outputs(cfg: ExperimentConfig, outcome: Outcome, outdir: Path) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    if cfg["output.csv"]:
        outcome.report.write_csv(outdir / "trace.csv")
    lines = ["# effective configuration"] + cfg.lines() + ["", "# derived quantities"]
    for key, val in outcome.derived.items():
        lines.append(f"derived.{key} = {format_value(val)}")
    (outdir / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if cfg["network.dump"]:
        outcome.schedule.dump(outdir / "schedule.txt", outcome.report.N_comm)
