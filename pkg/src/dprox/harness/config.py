"""Flat ``section.key = value`` experiment configuration."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from ..network import TOPOLOGIES
from ..prox import SUPPORTED_PAIRS, CompositeTerm, UnsupportedCompositeError


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _vector(text: str) -> float | tuple[float, ...]:
    parts = [p for p in text.replace(",", " ").split() if p]
    if not parts:
        raise ValueError("empty value")
    vals = tuple(float(p) for p in parts)
    return vals[0] if len(vals) == 1 else vals


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}; got {text!r}")
        return text

    return parse


def _T(text: str) -> int | str:
    if text == "theorem":
        return text
    val = int(text)
    if val < 0:
        raise ValueError("must be >= 0")
    return val


def _opt_int(text: str) -> int | None:
    return None if text in ("", "auto", "none") else int(text)


def _opt_float(text: str) -> float | None:
    return None if text in ("", "none") else float(text)


def _x0(text: str) -> str | float | tuple[float, ...]:
    return "zero" if text == "zero" else _vector(text)


# key -> (parser, default); defaults are stored in parsed form
SCHEMA: dict[str, tuple[Callable[[str], Any], Any]] = {
    "problem.kind": (_choice("quadratic", "logistic"), "quadratic"),
    "problem.seed": (int, 0),
    "problem.d": (int, 10),
    "problem.condition_target": (float, 10.0),
    "problem.scale_spread": (float, 10.0),
    "problem.cond_spread": (float, 1.0),
    "problem.data": (str, ""),
    "problem.ridge": (float, 0.1),
    "problem.g": (_choice("zero", "l1", "elastic-net"), "zero"),
    "problem.l1_weight": (float, 0.0),
    "problem.l2_weight": (float, 0.0),
    "problem.Q": (_choice("all-space", "box", "euclidean-ball"), "all-space"),
    "problem.box_lo": (_vector, -1.0),
    "problem.box_hi": (_vector, 1.0),
    "problem.ball_center": (_vector, 0.0),
    "problem.ball_radius": (float, 1.0),
    "problem.reference": (_choice("auto", "none"), "auto"),
    "problem.grad_norm_at_opt_bound": (_opt_float, None),
    "problem.r0_sq_bound": (_opt_float, None),
    "network.m": (int, 10),
    "network.topology": (_choice(*TOPOLOGIES), "ring"),
    "network.p_drop": (float, 0.0),
    "network.lazy": (_bool, False),
    "network.seed": (int, 0),
    "network.chords": (_opt_int, None),
    "network.pool_size": (int, 64),
    "network.certify_samples": (int, 256),
    "network.dump": (_bool, False),
    "algorithm.T": (_T, "theorem"),
    "algorithm.N": (_opt_int, None),
    "algorithm.epsilon": (float, 1e-6),
    "algorithm.N_constant": (float, 4.0),
    "algorithm.x0": (_x0, "zero"),
    "output.dir": (str, "out"),
    "output.csv": (_bool, True),
}


def format_value(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


@dataclass
class ExperimentConfig:
    """Validated experiment parameters, keyed by their dotted config names."""

    values: dict[str, Any] = field(default_factory=dict)
    source: Path | None = None

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def replace(self, **updates: Any) -> ExperimentConfig:
        vals = dict(self.values)
        for dotted, val in updates.items():
            vals[dotted.replace("__", ".")] = val
        cfg = ExperimentConfig(vals, self.source)
        validate(cfg)
        return cfg

    def lines(self) -> list[str]:
        return [f"{key} = {format_value(self.values[key])}" for key in SCHEMA]

    def spec_hash(self) -> str:
        text = "\n".join(line for line in self.lines() if not line.startswith("output."))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def composite_term(self) -> CompositeTerm:
        g, q = self["problem.g"], self["problem.Q"]
        kwargs: dict[str, Any] = {"g_kind": g, "q_kind": q}
        if g in ("l1", "elastic-net"):
            kwargs["w1"] = self["problem.l1_weight"]
        if g == "elastic-net":
            kwargs["w2"] = self["problem.l2_weight"]
        if q == "box":
            kwargs["lo"] = np.asarray(self["problem.box_lo"], dtype=float)
            kwargs["hi"] = np.asarray(self["problem.box_hi"], dtype=float)
        if q == "euclidean-ball":
            kwargs["center"] = np.asarray(self["problem.ball_center"], dtype=float)
            kwargs["radius"] = self["problem.ball_radius"]
        return CompositeTerm(**kwargs)


def parse_config(text: str, source: Path | None = None) -> ExperimentConfig:
    """Parse config text. ``derived.*`` keys (as echoed in summaries) are ignored."""
    values = {key: default for key, (_, default) in SCHEMA.items()}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'section.key = value', got {raw.strip()!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if key.startswith("derived."):
            continue
        if key not in SCHEMA:
            raise ConfigError(key, "unknown key")
        parser = SCHEMA[key][0]
        try:
            values[key] = parser(val)
        except ValueError as exc:
            raise ConfigError(key, str(exc)) from None
    cfg = ExperimentConfig(values, source)
    validate(cfg)
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), source=path)


def validate(cfg: ExperimentConfig) -> None:
    """Check every compatibility rule before any computation starts."""
    v = cfg.values
    if v["network.m"] < 1:
        raise ConfigError("network.m", "must be >= 1")
    if not 0.0 <= v["network.p_drop"] < 1.0:
        raise ConfigError("network.p_drop", "must lie in [0, 1)")
    if v["network.pool_size"] < 0:
        raise ConfigError("network.pool_size", "must be >= 0")
    if v["network.certify_samples"] < 1:
        raise ConfigError("network.certify_samples", "must be >= 1")
    if v["problem.d"] < 1:
        raise ConfigError("problem.d", "must be >= 1")
    if v["problem.condition_target"] < 1:
        raise ConfigError("problem.condition_target", "must be >= 1")
    if v["problem.kind"] == "logistic":
        if not v["problem.data"]:
            raise ConfigError("problem.data", "logistic problems need a LibSVM data path")
        if v["problem.ridge"] <= 0:
            raise ConfigError("problem.ridge", "must be positive")
    if (v["problem.g"], v["problem.Q"]) not in SUPPORTED_PAIRS:
        raise ConfigError("problem.g", f"unsupported composite pair (g={v['problem.g']}, Q={v['problem.Q']})")
    try:
        cfg.composite_term()
    except UnsupportedCompositeError as exc:
        raise ConfigError("problem.g", str(exc)) from None
    eps = v["algorithm.epsilon"]
    if not 0 < eps < 1:
        raise ConfigError("algorithm.epsilon", "must lie in (0, 1)")
    if v["algorithm.N"] is not None and v["algorithm.N"] < 0:
        raise ConfigError("algorithm.N", "must be >= 0")
    if v["problem.reference"] == "none":
        if v["algorithm.T"] == "theorem":
            for key in ("problem.grad_norm_at_opt_bound", "problem.r0_sq_bound"):
                if v[key] is None:
                    raise ConfigError(key, "required when algorithm.T = theorem and problem.reference = none")
        if v["algorithm.N"] is None:
            raise ConfigError("algorithm.N", "an explicit N is required without a reference solution")
