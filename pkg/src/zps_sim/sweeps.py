"""Scans of K over beamsplitter reflectance or heralding efficiency."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .conditioning import k_closed_form, relative_attenuation, zps_condition, STATE_KINDS_WITH_CLOSED_FORM
from .config import ExperimentConfig, SweepSpec
from .detectors import DetectorModel
from .channels import loss_channel
from .errors import DegenerateEstimateError
from .montecarlo import Z_LIMIT, click_oracle, estimate_k, max_workers, simulate_counts

log = logging.getLogger(__name__)

R_COLUMNS = ("R", "K_analytic", "K_click", "K_closed_form", "K_mc", "K_mc_stderr", "herald_prob")


def _row_seed(seed: int, row: int) -> int:
    return int(np.random.SeedSequence(entropy=seed, spawn_key=(row,)).generate_state(1, np.uint64)[0])


def _closed_form(cfg: ExperimentConfig) -> float | None:
    if cfg.state.kind not in STATE_KINDS_WITH_CLOSED_FORM:
        return None
    b = cfg.budget
    return k_closed_form(cfg.state.kind, cfg.R, beta=cfg.state.beta,
                         kappa_pdc=b.kappa_pdc, kappa_f=b.kappa_f, eta1=b.eta1)


def herald_probability(cfg: ExperimentConfig) -> float:
    """Probability of a D1 no-click, dark clicks included."""
    at_vbs = loss_channel(cfg.state.build(), cfg.budget.kappa)
    herald = DetectorModel(efficiency=cfg.budget.eta1, dark_prob=cfg.dark1_prob)
    return zps_condition(at_vbs, cfg.R, herald).herald_prob


def evaluate(cfg: ExperimentConfig, engines: str, row: int = 0) -> dict:
    """K of one configuration by the requested engines.

    Monte Carlo rows get their own seed derived from ``(cfg.seed, row)``. Points
    where the click estimate is undefined (no light reaches D2, e.g. R = 1) keep
    their analytic columns and leave the Monte Carlo ones empty.
    """
    out = {
        "K_analytic": relative_attenuation(cfg.state.build(), cfg.R, cfg.budget),
        "K_click": None,
        "K_closed_form": _closed_form(cfg),
        "K_mc": None,
        "K_mc_stderr": None,
        "herald_prob": herald_probability(cfg),
    }
    try:
        out["K_click"] = click_oracle(cfg)
    except DegenerateEstimateError:
        pass
    if engines in ("montecarlo", "both"):
        try:
            est = estimate_k(simulate_counts(cfg.with_(seed=_row_seed(cfg.seed, row))), cfg.dark2_prob)
        except DegenerateEstimateError as exc:
            log.warning("row %d: no Monte Carlo estimate (%s)", row, exc)
        else:
            out["K_mc"] = est.k_hat
            out["K_mc_stderr"] = est.std_err
    return out


def _map_rows(fn, items):
    workers = max_workers(len(items))
    if workers == 1:
        return [fn(*it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda it: fn(*it), items))


def sweep_R(spec: SweepSpec) -> list[dict]:
    """K against reflectance for the base experiment, one row per grid value."""
    if spec.variable != "R":
        raise ValueError("sweep_R needs a reflectance grid")

    def row(i, R):
        return {"R": R, **evaluate(spec.base.with_(R=R), spec.engines, i)}

    return _map_rows(row, list(enumerate(spec.grid)))


def eta1_grid(spec: SweepSpec) -> list[tuple[float | None, float]]:
    """``(displacement, eta1)`` pairs for an efficiency scan."""
    eta_max = spec.eta1_max if spec.eta1_max is not None else spec.base.budget.eta1
    if spec.variable == "eta1":
        return [(None, g) for g in spec.grid]
    if spec.variable == "displacement":
        return [(dx, eta_max * math.exp(-2.0 * dx**2 / spec.waist**2)) for dx in spec.grid]
    raise ValueError("sweep_eta needs an eta1 or displacement grid")


def _labels(spec: SweepSpec) -> list[str]:
    labels, seen = [], {}
    for cfg in spec.experiments:
        kind = cfg.state.label()
        seen[kind] = seen.get(kind, 0) + 1
        labels.append(kind if seen[kind] == 1 else f"{kind}{seen[kind]}")
    return labels


def sweep_eta(spec: SweepSpec) -> list[dict]:
    """K against heralding efficiency at fixed reflectance for every experiment in the spec.

    Columns per experiment are suffixed by its state kind, e.g. ``K_smsv``.
    """
    eta_max = spec.eta1_max if spec.eta1_max is not None else spec.base.budget.eta1
    labels = _labels(spec)
    points = eta1_grid(spec)

    def row(i, point):
        dx, eta1 = point
        r = {}
        if dx is not None:
            r["displacement"] = dx
        r["eta1"] = eta1
        r["eta1_normalized"] = eta1 / eta_max if eta_max > 0 else None
        for j, (label, cfg) in enumerate(zip(labels, spec.experiments)):
            vals = evaluate(cfg.with_(eta1=eta1), spec.engines, i * len(labels) + j)
            r[f"K_{label}"] = vals["K_analytic"]
            r[f"K_click_{label}"] = vals["K_click"]
            r[f"K_mc_{label}"] = vals["K_mc"]
            r[f"K_mc_stderr_{label}"] = vals["K_mc_stderr"]
        return r

    return _map_rows(row, list(enumerate(points)))


def run_sweep(spec: SweepSpec) -> list[dict]:
    return sweep_R(spec) if spec.variable == "R" else sweep_eta(spec)


def consistency_violations(rows: list[dict]) -> list[str]:
    """Rows where the Monte Carlo estimate sits more than 4 sigma from its click oracle."""
    bad = []
    for i, r in enumerate(rows):
        for key, val in r.items():
            if not key.startswith("K_mc_stderr") or val is None:
                continue
            suffix = key[len("K_mc_stderr"):]
            k_mc, k_click = r[f"K_mc{suffix}"], r[f"K_click{suffix}"]
            if k_click is None:
                continue
            if val > 0 and abs(k_mc - k_click) > Z_LIMIT * val:
                bad.append(f"row {i}{suffix}: K_mc={k_mc:.5f} vs K_click={k_click:.5f} (stderr {val:.2e})")
    return bad


def summarize(spec: SweepSpec, rows: list[dict]) -> dict:
    """Headline numbers of a sweep: K extremes and the initial slope of the fit curve."""
    summary = {}
    if spec.variable == "R":
        ks = [r["K_analytic"] for r in rows]
        summary["K_min"] = min(ks)
        summary["K_max"] = max(ks)
        summary["K_at_grid_end"] = ks[-1]
        base = spec.base
        h = 1e-6
        slope = (relative_attenuation(base.state.build(), h, base.budget)
                 - relative_attenuation(base.state.build(), 0.0, base.budget)) / h
        summary["slope_at_R0"] = slope
    else:
        for key in rows[0]:
            if key.startswith("K_") and not key.startswith(("K_click", "K_mc")):
                summary[f"{key}_at_min_eta1"] = min(rows, key=lambda r: r["eta1"])[key]
    return summary


def _fmt(v):
    if v is None:
        return ""
    return repr(float(v))


def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    keys = list(rows[0])
    writer.writerow(keys)
    for r in rows:
        writer.writerow([_fmt(r[k]) for k in keys])
    return buf.getvalue()


def rows_to_json(rows: list[dict]) -> str:
    return json.dumps(rows, indent=2)
