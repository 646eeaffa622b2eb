"""Command-line front end: ``zps-sim state | sweep | mc | validate``.

Exit status is 0 when the command finished and its consistency checks
passed, 1 when a check failed, and 2 for usage, configuration, IO or
degenerate-estimator errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .conditioning import LossBudget, initial_slope, k_click, relative_attenuation, sps_condition, zps_condition
from .config import STATE_KINDS, ExperimentConfig, RunConfig, StateSpec
from .errors import ConfigError, DegenerateEstimateError, TruncationError
from .montecarlo import (
    Z_LIMIT,
    canonical_configs,
    click_oracle,
    estimate_k,
    mc_vs_analytic,
    simulate,
    simulate_counts,
)
from .states import moments
from .sweeps import consistency_violations, rows_to_csv, rows_to_json, run_sweep, summarize

log = logging.getLogger("zps_sim")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_ERROR = 0, 1, 2


def bundled_recipes() -> list[str]:
    return sorted(p.name for p in resources.files("zps_sim.recipes").iterdir() if p.name.endswith(".json"))


def load_config(ref: str) -> RunConfig:
    """Read a config from a path, falling back to a bundled recipe of that name."""
    path = Path(ref)
    if path.exists():
        text = path.read_text()
    else:
        name = ref if ref.endswith(".json") else ref + ".json"
        res = resources.files("zps_sim.recipes").joinpath(name)
        if not res.is_file():
            raise ConfigError(f"no config file {ref!r} and no bundled recipe of that name "
                              f"(bundled: {', '.join(bundled_recipes())})")
        text = res.read_text()
    return RunConfig.from_json(text)


def _add_state_flags(p):
    g = p.add_argument_group("state")
    g.add_argument("--kind", choices=[k for k in STATE_KINDS if k != "custom"])
    g.add_argument("--mean", type=float, help="mean photon number (coherent, thermal)")
    g.add_argument("--pair-prob", type=float, help="photon-pair probability per pulse (smsv)")
    g.add_argument("--n", type=int, help="photon number (fock)")
    g.add_argument("--beta", type=float, help="single-photon probability (heralded)")
    g.add_argument("--cutoff", type=int)


def _add_experiment_flags(p):
    g = p.add_argument_group("experiment overrides")
    g.add_argument("--R", type=float, dest="R")
    for name in ("kappa-pdc", "kappa-f", "eta1", "eta2", "dark1-hz", "dark2-hz"):
        g.add_argument(f"--{name}", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--pulses", type=float, help="number of pulses (1e6 notation accepted)")
    g.add_argument("--shards", type=int)


def _state_from_flags(args) -> StateSpec | None:
    if args.kind is None:
        return None
    return StateSpec(kind=args.kind, mean=args.mean, pair_prob=args.pair_prob, n=args.n,
                     beta=args.beta, cutoff=args.cutoff)


def _experiment(args) -> RunConfig:
    """Base RunConfig from --config (or state flags), with command-line overrides applied."""
    if args.config:
        run = load_config(args.config)
    else:
        state = _state_from_flags(args)
        if state is None:
            raise ConfigError("give --config or a state via --kind")
        run = RunConfig(ExperimentConfig(state))
    exp = run.experiment
    state = _state_from_flags(args)
    if state is not None and args.config:
        exp = replace(exp, state=state)
    overrides = {}
    if args.R is not None:
        overrides["R"] = args.R
    for name in ("kappa_pdc", "kappa_f", "eta1", "eta2", "dark1_hz", "dark2_hz", "seed", "shards"):
        v = getattr(args, name)
        if v is not None:
            overrides[name] = v
    if args.pulses is not None:
        overrides["n_pulses"] = int(args.pulses)
    try:
        exp = exp.with_(**overrides)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    sweep = run.sweep
    if sweep is not None:
        sweep = replace(sweep, base=exp)
    fmt = getattr(args, "format", None) or run.format
    out = getattr(args, "out", None) or run.out
    return RunConfig(experiment=exp, sweep=sweep, out=out, format=fmt, verbosity=args.verbose)


def _write_sidecar(path: Path, run: RunConfig, extra: dict | None = None):
    meta = {"artifact_version": __version__, "config": run.to_dict(),
            "config_hash": run.experiment.config_hash(), "seed": run.experiment.seed}
    meta.update(extra or {})
    sidecar = path.with_name(path.name + ".json")
    sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return sidecar


def cmd_state(args) -> int:
    if args.config:
        spec = load_config(args.config).experiment.state
    else:
        spec = _state_from_flags(args)
        if spec is None:
            raise ConfigError("give --kind or --config")
    dist = spec.build()
    m = moments(dist)
    report = {
        "kind": spec.kind,
        "cutoff": dist.cutoff,
        "tail_mass": dist.tail_mass,
        "probs_head": [float(p) for p in dist.probs[: args.head]],
        "mean_n": m.mean_n,
        "variance": m.variance,
        "mandel_q": m.mandel_q,
    }
    if args.format == "json":
        print(json.dumps(report, indent=2))
    else:
        print(f"state      {spec.kind}  (cutoff {dist.cutoff}, tail mass {dist.tail_mass:.3e})")
        for n, p in enumerate(report["probs_head"]):
            print(f"  p[{n}] = {p:.10g}")
        print(f"mean       {m.mean_n:.10g}")
        print(f"variance   {m.variance:.10g}")
        print(f"Q          {m.mandel_q:.10g}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    run = _experiment(args)
    if run.sweep is None:
        raise ConfigError("config has no 'sweep' section")
    spec = run.sweep
    if args.engine:
        spec = replace(spec, engines=args.engine)
        run = replace(run, sweep=spec)
    rows = run_sweep(spec)
    table = rows_to_json(rows) if run.format == "json" else rows_to_csv(rows)
    summary = summarize(spec, rows)
    if run.out:
        path = Path(run.out)
        path.write_text(table if table.endswith("\n") else table + "\n")
        _write_sidecar(path, run, {"summary": summary})
        stream = sys.stdout
    else:
        sys.stdout.write(table if table.endswith("\n") else table + "\n")
        stream = sys.stderr
    for key, val in summary.items():
        print(f"{key:>28s}  {val:.6f}", file=stream)
    bad = consistency_violations(rows)
    for line in bad:
        print(f"CHECK FAILED  {line}", file=sys.stderr)
    return EXIT_CHECK_FAILED if bad else EXIT_OK


def cmd_mc(args) -> int:
    run = _experiment(args)
    exp = run.experiment
    if run.out:
        tags = simulate(exp, run)
        tags.write(run.out)
        counts = tags.counts()
    else:
        counts = simulate_counts(exp)
    est = estimate_k(counts, exp.dark2_prob)
    oracle = click_oracle(exp)
    analytic = relative_attenuation(exp.state.build(), exp.R, exp.budget)
    z = (est.k_hat - oracle) / est.std_err if est.std_err > 0 else 0.0
    report = {**asdict(est), "n_pulses": counts.n_pulses, "K_click": oracle, "K_analytic": analytic, "z": z}
    if args.format == "json":
        print(json.dumps(report, indent=2))
    else:
        print(f"pulses           {counts.n_pulses}")
        print(f"no-click pulses  {est.n_noclick_pulses}")
        print(f"rate D2 all      {est.rate_d2_all:.6e}")
        print(f"rate D2 postsel  {est.rate_d2_postselected:.6e}")
        print(f"K_hat            {est.k_hat:.6f} +/- {est.std_err:.6f}")
        print(f"K_click oracle   {oracle:.6f}   (z = {z:+.2f})")
        print(f"K analytic       {analytic:.6f}")
    if abs(z) > Z_LIMIT:
        print(f"CHECK FAILED  |z| = {abs(z):.2f} > {Z_LIMIT}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def _analytic_checks() -> list[tuple[str, bool, str]]:
    from .states import (
        PureAmplitudes,
        coherent_distribution,
        fock_distribution,
        heralded_single,
        smsv_distribution,
        thermal_distribution,
    )

    results = []
    lab = LossBudget(0.5, 0.86, 0.32, 0.28)
    c = coherent_distribution(1.0)
    worst = max(abs(relative_attenuation(c, R, lab) - 1.0) for R in np.linspace(0, 0.99, 11))
    results.append(("coherent K = 1", worst < 1e-10, f"max |K-1| = {worst:.2e}"))
    k = relative_attenuation(smsv_distribution(1e-4), 1.0, lab)
    results.append(("lossy smsv endpoint", abs(k - 0.8624) < 1e-3, f"K(1) = {k:.5f}"))
    k = relative_attenuation(heralded_single(0.38), 1.0, LossBudget(1.0, 0.86, 0.32))
    results.append(("lossy heralded endpoint", abs(k - 1.1168) < 1e-4, f"K(1) = {k:.5f}"))
    for name, dist in [("coherent", c), ("thermal", thermal_distribution(0.5)), ("smsv", smsv_distribution(1e-4)),
                       ("heralded", heralded_single(0.38)), ("fock3", fock_distribution(3))]:
        fd = (relative_attenuation(dist, 1e-4) - relative_attenuation(dist, 0.0)) / 1e-4
        q = initial_slope(dist)
        results.append((f"slope = -Q ({name})", abs(fd - q) < 1e-3, f"{fd:.5f} vs {q:.5f}"))
    k = k_click(smsv_distribution(1e-4), 0.5, 1.0, 1.0, 1e-6)
    ref = relative_attenuation(smsv_distribution(1e-4), 0.5)
    results.append(("click K -> K at low eta2", abs(k - ref) < 1e-4, f"{k:.6f} vs {ref:.6f}"))
    worst = max(abs(relative_attenuation(d, R, lab) - zps_condition(d, lab.kappa * R * lab.eta1).K)
                for d in (thermal_distribution(0.5), heralded_single(0.38)) for R in np.linspace(0, 0.99, 11))
    results.append(("loss replacement", worst < 1e-10, f"max err = {worst:.1e}"))
    m = sps_condition(PureAmplitudes.normalized([0, 1, 0, 0, 0, 1]).distribution(), 1e-6).mean_out
    results.append(("SPS of |1>+|5>", abs(m - 10 / 3) < 1e-4, f"mean_out = {m:.6f}"))
    return results


def cmd_validate(args) -> int:
    ok = True
    for name, passed, detail in _analytic_checks():
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name:28s} {detail}")
    pulses = int(args.pulses)
    for name, cfg in canonical_configs(n_pulses=pulses, seed=args.seed).items():
        res = mc_vs_analytic(cfg)
        ok &= res.passed
        print(f"{'PASS' if res.passed else 'FAIL'}  mc {name:25s} K_hat={res.k_hat:.5f}+/-{res.std_err:.5f} "
              f"K_click={res.k_click:.5f} z={res.z:+.2f}")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zps-sim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config path or bundled recipe name (e.g. fig3b.json)")
        p.add_argument("--format", choices=["csv", "json"])
        p.add_argument("-v", "--verbose", action="count", default=0)

    p = sub.add_parser("state", help="photon statistics of an input state")
    common(p)
    _add_state_flags(p)
    p.add_argument("--head", type=int, default=6, help="number of probabilities to print")
    p.set_defaults(func=cmd_state)

    p = sub.add_parser("sweep", help="K against R or heralding efficiency")
    common(p)
    _add_state_flags(p)
    _add_experiment_flags(p)
    p.add_argument("--out", help="output table path (stdout if omitted)")
    p.add_argument("--engine", choices=["analytic", "montecarlo", "both"])
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("mc", help="Monte Carlo run and post-selection estimate of K")
    common(p)
    _add_state_flags(p)
    _add_experiment_flags(p)
    p.add_argument("--out", help="tag file (.csv or .npz); a .json sidecar is written next to it")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("validate", help="analytic identities and Monte Carlo cross-checks")
    p.add_argument("--pulses", type=float, default=1e6)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, TruncationError, DegenerateEstimateError, ValueError, OSError) as exc:
        print(f"zps-sim: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
