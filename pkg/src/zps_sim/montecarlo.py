"""Pulse-by-pulse Monte Carlo of the heralded attenuation experiment.

Each pulse draws a photon number from the source distribution, loses photons
binomially before the beamsplitter, splits the survivors between the
reflected (D1) and transmitted (D2) ports, thins each port by its detector
efficiency and ORs in independent dark clicks. The resulting click records
are post-selected exactly as time tags are in the lab: D2 count rates with
and without requiring a D1 no-click, dark-subtracted, then divided.

Randomness is organized in shards. Shard ``s`` owns a contiguous block of
pulses and a Philox stream keyed by ``(seed, s)``, so the output depends only
on ``(seed, shards)`` and never on thread scheduling.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .conditioning import k_click, relative_attenuation
from .config import ExperimentConfig, RunConfig
from .errors import DegenerateEstimateError

log = logging.getLogger(__name__)

CHUNK = 1 << 21
Z_LIMIT = 4.0


def shard_generator(seed: int, shard: int) -> np.random.Generator:
    """Independent counter-based stream for one shard."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(shard,))
    return np.random.Generator(np.random.Philox(ss))


def shard_bounds(n_pulses: int, shards: int) -> list[tuple[int, int]]:
    edges = [n_pulses * s // shards for s in range(shards + 1)]
    return list(zip(edges[:-1], edges[1:]))


def max_workers(shards: int) -> int:
    cap = os.environ.get("ZPS_SIM_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(shards, limit))


@dataclass(frozen=True)
class TagCounts:
    """Sufficient statistics of a tag stream for the K estimator."""

    n_pulses: int
    n_noclick: int
    d2_all: int
    d2_postselected: int

    def __add__(self, other: TagCounts) -> TagCounts:
        return TagCounts(
            self.n_pulses + other.n_pulses,
            self.n_noclick + other.n_noclick,
            self.d2_all + other.d2_all,
            self.d2_postselected + other.d2_postselected,
        )

    def counts(self) -> TagCounts:
        return self


@dataclass(frozen=True, eq=False)
class TagStream:
    """Per-pulse click records; the pulse index is the position in the arrays."""

    click_d1: np.ndarray
    click_d2: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.click_d1.shape != self.click_d2.shape or self.click_d1.ndim != 1:
            raise ValueError("click arrays must be 1-D and of equal length")

    def __len__(self):
        return self.click_d1.size

    @property
    def pulse_index(self) -> np.ndarray:
        return np.arange(len(self))

    def counts(self) -> TagCounts:
        nc = ~self.click_d1
        return TagCounts(
            n_pulses=len(self),
            n_noclick=int(nc.sum()),
            d2_all=int(self.click_d2.sum()),
            d2_postselected=int((self.click_d2 & nc).sum()),
        )

    def write(self, path) -> Path:
        """Write the records (CSV or ``.npz``) plus a JSON metadata sidecar.

        Returns the sidecar path.
        """
        path = Path(path)
        if path.suffix == ".npz":
            np.savez_compressed(path, click_d1=self.click_d1, click_d2=self.click_d2)
        else:
            rows = np.column_stack([self.pulse_index, self.click_d1, self.click_d2]).astype(np.int64)
            with open(path, "w", newline="") as fh:
                fh.write("pulse_index,click_d1,click_d2\n")
                np.savetxt(fh, rows, fmt="%d", delimiter=",")
        sidecar = sidecar_path(path)
        sidecar.write_text(json.dumps(self.metadata, indent=2, sort_keys=True) + "\n")
        return sidecar

    @classmethod
    def read(cls, path) -> TagStream:
        path = Path(path)
        sidecar = sidecar_path(path)
        meta = json.loads(sidecar.read_text()) if sidecar.exists() else {}
        if path.suffix == ".npz":
            with np.load(path) as data:
                return cls(data["click_d1"].astype(bool), data["click_d2"].astype(bool), meta)
        with open(path, newline="") as fh:
            header = next(csv.reader(fh))
            if header != ["pulse_index", "click_d1", "click_d2"]:
                raise ValueError(f"unexpected tag file header {header}")
            rows = np.loadtxt(fh, delimiter=",", dtype=np.int64, ndmin=2)
        if rows.size and np.any(np.diff(rows[:, 0]) <= 0):
            raise ValueError("pulse_index must be strictly increasing")
        return cls(rows[:, 1].astype(bool), rows[:, 2].astype(bool), meta)


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def stream_metadata(config: ExperimentConfig, run: RunConfig | None = None) -> dict:
    """Sidecar contents; ``config`` holds a full run document that re-parses with ``RunConfig``."""
    run = run or RunConfig(config)
    return {
        "artifact_version": __version__,
        "config": run.to_dict(),
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "shards": config.shards,
    }


class _PulseSampler:
    def __init__(self, config: ExperimentConfig):
        dist = config.state.build()
        cdf = np.cumsum(dist.probs)
        cdf[-1] = 1.0
        self.cdf = cdf
        self.kappa = config.budget.kappa
        self.R = config.R
        self.eta1 = config.budget.eta1
        self.eta2 = config.budget.eta2
        self.dark1 = config.dark1_prob
        self.dark2 = config.dark2_prob

    def sample(self, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
        n = np.searchsorted(self.cdf, rng.random(size), side="right")
        click1 = np.zeros(size, dtype=bool)
        click2 = np.zeros(size, dtype=bool)
        lit = np.flatnonzero(n)
        if lit.size:
            kept = rng.binomial(n[lit], self.kappa)
            refl = rng.binomial(kept, self.R)
            click1[lit] = rng.binomial(refl, self.eta1) > 0
            click2[lit] = rng.binomial(kept - refl, self.eta2) > 0
        if self.dark1 > 0:
            click1 |= rng.random(size) < self.dark1
        if self.dark2 > 0:
            click2 |= rng.random(size) < self.dark2
        return click1, click2


def _run_shard(sampler, seed, shard, size, keep_tags):
    rng = shard_generator(seed, shard)
    parts = []
    total = TagCounts(0, 0, 0, 0)
    done = 0
    while done < size:
        step = min(CHUNK, size - done)
        c1, c2 = sampler.sample(rng, step)
        if keep_tags:
            parts.append((c1, c2))
        else:
            nc = ~c1
            total = total + TagCounts(step, int(nc.sum()), int(c2.sum()), int((c2 & nc).sum()))
        done += step
    if keep_tags:
        if not parts:
            return np.zeros(0, bool), np.zeros(0, bool)
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])
    return total


def _run(config: ExperimentConfig, keep_tags: bool):
    sampler = _PulseSampler(config)
    bounds = shard_bounds(config.n_pulses, config.shards)
    jobs = [(sampler, config.seed, s, hi - lo, keep_tags) for s, (lo, hi) in enumerate(bounds)]
    workers = max_workers(config.shards)
    log.debug("simulating %d pulses in %d shards on %d workers", config.n_pulses, config.shards, workers)
    if workers == 1:
        return [_run_shard(*job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: _run_shard(*job), jobs))


def simulate(config: ExperimentConfig, run: RunConfig | None = None) -> TagStream:
    """Full per-pulse click record for ``config``."""
    results = _run(config, keep_tags=True)
    d1 = np.concatenate([r[0] for r in results])
    d2 = np.concatenate([r[1] for r in results])
    return TagStream(d1, d2, stream_metadata(config, run))


def simulate_counts(config: ExperimentConfig) -> TagCounts:
    """Same random experiment as :func:`simulate`, folded into counts on the fly.

    Memory stays bounded for long runs; the counts equal
    ``simulate(config).counts()`` exactly.
    """
    total = TagCounts(0, 0, 0, 0)
    for part in _run(config, keep_tags=False):
        total = total + part
    return total


@dataclass(frozen=True)
class KEstimate:
    k_hat: float
    std_err: float
    rate_d2_all: float
    rate_d2_postselected: float
    n_noclick_pulses: int


def estimate_k(tags, dark2_prob: float = 0.0) -> KEstimate:
    """Post-selection estimate of the relative attenuation.

    ``k_hat = (r_ps - dark) / (r_all - dark)`` where ``r_ps`` is the D2 click
    rate over pulses with no D1 click and ``r_all`` the rate over all pulses.
    The standard error combines the two binomial rate errors in quadrature,
    treating them as independent; since the post-selected pulses are a subset
    of all pulses the true error is somewhat smaller.
    """
    c = tags.counts()
    if c.n_noclick == 0:
        raise DegenerateEstimateError("no pulses without a D1 click")
    if c.d2_all == 0:
        raise DegenerateEstimateError("no D2 clicks recorded")
    r_all = c.d2_all / c.n_pulses
    r_ps = c.d2_postselected / c.n_noclick
    num = r_ps - dark2_prob
    den = r_all - dark2_prob
    if den <= 0 or num < 0:
        raise DegenerateEstimateError(
            f"dark-corrected D2 rate is not positive (all={den:.3e}, post-selected={num:.3e}); "
            "is the dark rate misconfigured?"
        )
    k = num / den
    var_ps = r_ps * (1 - r_ps) / c.n_noclick
    var_all = r_all * (1 - r_all) / c.n_pulses
    std = math.sqrt(var_ps / den**2 + var_all * num**2 / den**4)
    return KEstimate(k_hat=k, std_err=std, rate_d2_all=r_all, rate_d2_postselected=r_ps,
                     n_noclick_pulses=c.n_noclick)


def click_oracle(config: ExperimentConfig) -> float:
    """Exact expectation of the estimator for ``config`` (click detector at D2)."""
    b = config.budget
    return k_click(config.state.build(), config.R, b.kappa, b.eta1, b.eta2)


@dataclass(frozen=True)
class CrossCheck:
    k_hat: float
    std_err: float
    k_click: float
    k_analytic: float
    z: float

    @property
    def passed(self) -> bool:
        return abs(self.z) <= Z_LIMIT


def mc_vs_analytic(config: ExperimentConfig, oracle_config: ExperimentConfig | None = None) -> CrossCheck:
    """Compare the simulated estimator with its exact expectation.

    ``oracle_config`` lets the analytic side use different parameters, which
    is how a deliberately inconsistent pair is set up.
    """
    oracle_config = oracle_config or config
    est = estimate_k(simulate_counts(config), config.dark2_prob)
    kc = click_oracle(oracle_config)
    ka = relative_attenuation(oracle_config.state.build(), oracle_config.R, oracle_config.budget)
    z = (est.k_hat - kc) / est.std_err if est.std_err > 0 else (0.0 if est.k_hat == kc else math.inf)
    return CrossCheck(k_hat=est.k_hat, std_err=est.std_err, k_click=kc, k_analytic=ka, z=z)


def canonical_configs(n_pulses: int = 10_000_000, seed: int = 2024) -> dict[str, ExperimentConfig]:
    """Reference experiments covering Poissonian, super- and sub-Poissonian inputs."""
    from .conditioning import LossBudget
    from .config import StateSpec

    lab = LossBudget(kappa_pdc=0.50, kappa_f=0.86, eta1=0.32, eta2=0.28)
    heralded_lab = LossBudget(kappa_pdc=1.0, kappa_f=0.86, eta1=0.32, eta2=0.28)
    common = dict(n_pulses=n_pulses, dark1_hz=80.0, dark2_hz=80.0)
    configs = {
        "coherent_lab": ExperimentConfig(StateSpec("coherent", mean=1.0), R=0.5, budget=lab, **common),
        "smsv_lab": ExperimentConfig(StateSpec("smsv", pair_prob=1e-4), R=0.5, budget=lab, **common),
        "heralded_lab": ExperimentConfig(StateSpec("heralded", beta=0.38), R=0.9, budget=heralded_lab, **common),
        "heralded_ideal": ExperimentConfig(StateSpec("heralded", beta=2 / 3), R=0.5, **common),
        "thermal_lossy": ExperimentConfig(StateSpec("thermal", mean=1.0), R=0.3,
                                          budget=LossBudget(eta1=0.5, eta2=0.5), **common),
    }
    return {name: cfg.with_(seed=seed + i) for i, (name, cfg) in enumerate(configs.items())}
