"""Versioned JSON configuration for experiments, sweeps and CLI runs.

Every document is validated strictly: unknown keys are rejected so that a
typo cannot silently fall back to a default and change a result.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Any

from .conditioning import LossBudget
from .detectors import per_pulse_dark_prob
from .errors import ConfigError
from .states import (
    PhotonDistribution,
    coherent_distribution,
    fock_distribution,
    heralded_single,
    smsv_distribution,
    thermal_distribution,
)

SCHEMA_VERSION = 1
STATE_KINDS = ("coherent", "smsv", "thermal", "fock", "heralded", "custom")
SWEEP_VARIABLES = ("R", "eta1", "displacement")
ENGINES = ("analytic", "montecarlo", "both")

_STATE_PARAMS = {
    "coherent": {"mean"},
    "thermal": {"mean"},
    "smsv": {"pair_prob"},
    "fock": {"n"},
    "heralded": {"beta"},
    "custom": {"probs"},
}


def _check_keys(d: dict, allowed: set, where: str, required: set = frozenset()):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object, got {type(d).__name__}")
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {sorted(unknown)}")
    missing = set(required) - set(d)
    if missing:
        raise ConfigError(f"{where}: missing field(s) {sorted(missing)}")


@dataclass(frozen=True)
class StateSpec:
    """Which input state to prepare, at the source (before input losses)."""

    kind: str
    mean: float | None = None
    pair_prob: float | None = None
    n: int | None = None
    beta: float | None = None
    probs: tuple[float, ...] | None = None
    cutoff: int | None = None

    def __post_init__(self):
        if self.kind not in STATE_KINDS:
            raise ConfigError(f"unknown state kind {self.kind!r}; expected one of {STATE_KINDS}")
        for name in _STATE_PARAMS[self.kind]:
            if getattr(self, name) is None:
                raise ConfigError(f"state kind {self.kind!r} needs {name!r}")
        if self.probs is not None:
            object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))

    def build(self) -> PhotonDistribution:
        k = self.kind
        if k == "coherent":
            return coherent_distribution(self.mean, self.cutoff)
        if k == "thermal":
            return thermal_distribution(self.mean, self.cutoff)
        if k == "smsv":
            return smsv_distribution(self.pair_prob, self.cutoff or 2)
        if k == "fock":
            return fock_distribution(self.n, self.cutoff)
        if k == "heralded":
            return heralded_single(self.beta)
        return PhotonDistribution.from_weights(self.probs)

    def label(self) -> str:
        return self.kind

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"kind": self.kind}
        for name in sorted(_STATE_PARAMS[self.kind]) + ["cutoff"]:
            v = getattr(self, name)
            if v is not None:
                d[name] = list(v) if isinstance(v, tuple) else v
        return d

    @classmethod
    def from_dict(cls, d: dict) -> StateSpec:
        _check_keys(d, {"kind", "cutoff"} | _STATE_PARAMS.get(d.get("kind"), set()), "state", {"kind"})
        return cls(**d)


@dataclass(frozen=True)
class ExperimentConfig:
    """One run of the pulsed experiment."""

    state: StateSpec
    R: float = 0.5
    budget: LossBudget = field(default_factory=LossBudget)
    dark1_hz: float = 0.0
    dark2_hz: float = 0.0
    rep_rate_hz: float = 1e8
    n_pulses: int = 1_000_000
    seed: int = 0
    shards: int = 1

    def __post_init__(self):
        if not 0.0 <= self.R <= 1.0:
            raise ConfigError(f"R={self.R} outside [0, 1]")
        if self.n_pulses < 1:
            raise ConfigError("n_pulses must be >= 1")
        if self.shards < 1:
            raise ConfigError("shards must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        try:
            self.dark1_prob, self.dark2_prob
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def dark1_prob(self) -> float:
        return per_pulse_dark_prob(self.dark1_hz, self.rep_rate_hz)

    @property
    def dark2_prob(self) -> float:
        return per_pulse_dark_prob(self.dark2_hz, self.rep_rate_hz)

    def with_(self, **changes) -> ExperimentConfig:
        budget_keys = {"kappa_pdc", "kappa_f", "eta1", "eta2"}
        budget_changes = {k: changes.pop(k) for k in list(changes) if k in budget_keys}
        cfg = replace(self, **changes)
        if budget_changes:
            cfg = replace(cfg, budget=replace(cfg.budget, **budget_changes))
        return cfg

    def to_dict(self) -> dict:
        b = self.budget
        return {
            "state": self.state.to_dict(),
            "R": self.R,
            "budget": {"kappa_pdc": b.kappa_pdc, "kappa_f": b.kappa_f, "eta1": b.eta1, "eta2": b.eta2},
            "dark1_hz": self.dark1_hz,
            "dark2_hz": self.dark2_hz,
            "rep_rate_hz": self.rep_rate_hz,
            "n_pulses": self.n_pulses,
            "seed": self.seed,
            "shards": self.shards,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        allowed = {"state", "R", "budget", "dark1_hz", "dark2_hz", "rep_rate_hz", "n_pulses", "seed", "shards"}
        _check_keys(d, allowed, "experiment", {"state"})
        kw = dict(d)
        kw["state"] = StateSpec.from_dict(d["state"])
        if "budget" in d:
            _check_keys(d["budget"], {"kappa_pdc", "kappa_f", "eta1", "eta2"}, "budget")
            try:
                kw["budget"] = LossBudget(**d["budget"])
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        for name in ("n_pulses", "seed", "shards"):
            if name in kw:
                kw[name] = _as_int(kw[name], name)
        return cls(**kw)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _as_int(v, name):
    if isinstance(v, float) and v.is_integer():
        return int(v)
    if not isinstance(v, int) or isinstance(v, bool):
        raise ConfigError(f"{name} must be an integer")
    return v


@dataclass(frozen=True)
class SweepSpec:
    """A one-dimensional parameter scan.

    ``companions`` are further experiments evaluated on the same grid, each
    contributing its own K columns (Fig. 4 style scans compare two states).
    For ``displacement`` scans the heralding efficiency follows a Gaussian
    mode overlap, ``eta1_max * exp(-2 dx^2 / waist^2)``.
    """

    base: ExperimentConfig
    variable: str = "R"
    grid: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 0.99)
    engines: str = "analytic"
    companions: tuple[ExperimentConfig, ...] = ()
    eta1_max: float | None = None
    waist: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(float(g) for g in self.grid))
        object.__setattr__(self, "companions", tuple(self.companions))
        if self.variable not in SWEEP_VARIABLES:
            raise ConfigError(f"unknown sweep variable {self.variable!r}")
        if self.engines not in ENGINES:
            raise ConfigError(f"unknown engines {self.engines!r}")
        if not self.grid:
            raise ConfigError("sweep grid is empty")
        if self.variable in ("R", "eta1") and not all(0.0 <= g <= 1.0 for g in self.grid):
            raise ConfigError(f"{self.variable} grid values must lie in [0, 1]")
        if self.variable == "displacement":
            if self.waist <= 0:
                raise ConfigError("waist must be positive")
            if any(g < 0 for g in self.grid):
                raise ConfigError("displacements must be nonnegative")
        if self.eta1_max is not None and not 0.0 < self.eta1_max <= 1.0:
            raise ConfigError("eta1_max must lie in (0, 1]")

    @property
    def experiments(self) -> tuple[ExperimentConfig, ...]:
        return (self.base, *self.companions)

    def to_dict(self) -> dict:
        d = {
            "variable": self.variable,
            "grid": list(self.grid),
            "engines": self.engines,
            "companions": [c.to_dict() for c in self.companions],
            "waist": self.waist,
        }
        if self.eta1_max is not None:
            d["eta1_max"] = self.eta1_max
        return d

    @classmethod
    def from_dict(cls, d: dict, base: ExperimentConfig) -> SweepSpec:
        _check_keys(d, {"variable", "grid", "engines", "companions", "eta1_max", "waist"}, "sweep")
        kw = dict(d)
        kw["companions"] = tuple(ExperimentConfig.from_dict(c) for c in d.get("companions", []))
        return cls(base=base, **kw)


@dataclass(frozen=True)
class RunConfig:
    """Top-level document read by the command-line tool."""

    experiment: ExperimentConfig
    sweep: SweepSpec | None = None
    out: str | None = None
    format: str = "csv"
    verbosity: int = 0

    def __post_init__(self):
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown output format {self.format!r}")

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"schema_version": SCHEMA_VERSION, "experiment": self.experiment.to_dict()}
        if self.sweep is not None:
            d["sweep"] = self.sweep.to_dict()
        d["out"] = self.out
        d["format"] = self.format
        d["verbosity"] = self.verbosity
        return d

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        _check_keys(d, {"schema_version", "experiment", "sweep", "out", "format", "verbosity", "description"},
                    "config", {"schema_version", "experiment"})
        if d["schema_version"] != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {d['schema_version']!r}")
        exp = ExperimentConfig.from_dict(d["experiment"])
        sweep = SweepSpec.from_dict(d["sweep"], exp) if d.get("sweep") is not None else None
        return cls(
            experiment=exp,
            sweep=sweep,
            out=d.get("out"),
            format=d.get("format", "csv"),
            verbosity=_as_int(d.get("verbosity", 0), "verbosity"),
        )

    @classmethod
    def from_json(cls, text: str) -> RunConfig:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        return cls.from_dict(data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)
