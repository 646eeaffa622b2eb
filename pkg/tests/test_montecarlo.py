import json
import math

import numpy as np
import pytest

from zps_sim.channels import beamsplitter_joint, loss_channel
from zps_sim.conditioning import LossBudget
from zps_sim.config import ExperimentConfig, RunConfig, StateSpec
from zps_sim.detectors import DetectorModel, no_click_probability
from zps_sim.errors import DegenerateEstimateError
from zps_sim.montecarlo import (
    TagCounts,
    TagStream,
    canonical_configs,
    click_oracle,
    estimate_k,
    mc_vs_analytic,
    shard_bounds,
    simulate,
    simulate_counts,
)

LAB = LossBudget(kappa_pdc=0.50, kappa_f=0.86, eta1=0.32, eta2=0.28)


def within_sigma(frac, p, n, k=3.0):
    return abs(frac - p) <= k * math.sqrt(p * (1 - p) / n)


def test_vacuum_never_clicks():
    tags = simulate(ExperimentConfig(StateSpec("fock", n=0), n_pulses=10_000))
    assert len(tags) == 10_000
    assert not tags.click_d1.any() and not tags.click_d2.any()


def test_coherent_click_fraction():
    cfg = ExperimentConfig(StateSpec("coherent", mean=1.0), R=0.5, n_pulses=1_000_000, seed=11)
    tags = simulate(cfg)
    assert within_sigma(tags.click_d1.mean(), 1 - math.exp(-0.5), len(tags))
    assert within_sigma(tags.click_d2.mean(), 1 - math.exp(-0.5), len(tags))


def test_single_photon_goes_one_way():
    cfg = ExperimentConfig(StateSpec("fock", n=1), R=0.3, n_pulses=200_000, seed=5)
    tags = simulate(cfg)
    assert np.all(tags.click_d1 ^ tags.click_d2)
    assert within_sigma(tags.click_d1.mean(), 0.3, len(tags))


def test_noclick_fraction_matches_povm():
    cfg = ExperimentConfig(StateSpec("thermal", mean=1.5), R=0.4, budget=LAB, dark1_hz=5e5,
                           n_pulses=500_000, seed=9)
    counts = simulate_counts(cfg)
    reflected = beamsplitter_joint(loss_channel(cfg.state.build(), LAB.kappa), 0.4).reflected()
    p = no_click_probability(reflected, DetectorModel(LAB.eta1, cfg.dark1_prob))
    assert within_sigma(counts.n_noclick / counts.n_pulses, p, counts.n_pulses)


def test_determinism_and_shard_layout(monkeypatch):
    cfg = ExperimentConfig(StateSpec("coherent", mean=0.8), R=0.3, budget=LAB, dark2_hz=1e4,
                           n_pulses=300_001, seed=123, shards=4)
    monkeypatch.setenv("ZPS_SIM_THREADS", "1")
    a = simulate(cfg)
    monkeypatch.setenv("ZPS_SIM_THREADS", "4")
    b = simulate(cfg)
    np.testing.assert_array_equal(a.click_d1, b.click_d1)
    np.testing.assert_array_equal(a.click_d2, b.click_d2)
    assert a.metadata == b.metadata
    assert estimate_k(a, cfg.dark2_prob) == estimate_k(b, cfg.dark2_prob)
    assert simulate_counts(cfg) == a.counts()
    # different seeds decorrelate
    c = simulate(cfg.with_(seed=124))
    assert not np.array_equal(a.click_d1, c.click_d1)


def test_shard_bounds_cover_pulses():
    bounds = shard_bounds(10, 3)
    assert bounds[0][0] == 0 and bounds[-1][1] == 10
    assert all(lo <= hi for lo, hi in bounds)
    assert sum(hi - lo for lo, hi in bounds) == 10


def test_counts_merge_is_associative():
    a, b, c = TagCounts(10, 5, 2, 1), TagCounts(3, 3, 0, 0), TagCounts(7, 1, 4, 1)
    assert (a + b) + c == a + (b + c) == c + (b + a)


def test_estimator_coherent_benchmark():
    cfg = ExperimentConfig(StateSpec("coherent", mean=1.0), R=0.5, budget=LAB, dark1_hz=80, dark2_hz=80,
                           n_pulses=1_000_000, seed=77)
    est = estimate_k(simulate(cfg), cfg.dark2_prob)
    assert abs(est.k_hat - 1.0) <= 3 * est.std_err
    assert 0 < est.rate_d2_postselected < 1 and 0 < est.rate_d2_all < 1


def test_estimator_smsv_ideal_law():
    # the 1 - R law holds for the click estimator once D2 is inefficient
    cfg = ExperimentConfig(StateSpec("smsv", pair_prob=1e-4), R=0.5, budget=LossBudget(eta2=0.01),
                           n_pulses=100_000_000, seed=8, shards=4)
    est = estimate_k(simulate_counts(cfg))
    assert abs(est.k_hat - 0.5) <= 3 * est.std_err
    assert click_oracle(cfg) == pytest.approx(0.5, abs=2e-3)


def test_estimator_smsv_with_perfect_click_detector():
    # a perfect threshold detector at D2 cannot count the pair, so the estimator
    # converges to the click oracle (1/3 here), not to the number-resolved K = 0.5
    cfg = ExperimentConfig(StateSpec("smsv", pair_prob=1e-4), R=0.5, n_pulses=20_000_000, seed=8)
    est = estimate_k(simulate_counts(cfg))
    assert click_oracle(cfg) == pytest.approx(1 / 3, abs=1e-4)
    assert abs(est.k_hat - click_oracle(cfg)) <= 4 * est.std_err
    assert abs(est.k_hat - 0.5) > 4 * est.std_err


def test_estimator_errors():
    with pytest.raises(DegenerateEstimateError):
        estimate_k(TagCounts(100, 0, 10, 0))
    with pytest.raises(DegenerateEstimateError):
        estimate_k(TagCounts(100, 90, 0, 0))
    with pytest.raises(DegenerateEstimateError):
        estimate_k(TagCounts(1000, 900, 1, 1), dark2_prob=0.01)
    vacuum = simulate(ExperimentConfig(StateSpec("fock", n=0), n_pulses=1000))
    with pytest.raises(DegenerateEstimateError):
        estimate_k(vacuum)


def test_estimator_formula():
    est = estimate_k(TagCounts(n_pulses=1000, n_noclick=800, d2_all=100, d2_postselected=60), dark2_prob=0.01)
    r_all, r_ps = 0.1, 60 / 800
    assert est.k_hat == pytest.approx((r_ps - 0.01) / (r_all - 0.01))
    expected_var = r_ps * (1 - r_ps) / 800 / 0.09**2 + r_all * (1 - r_all) / 1000 * (r_ps - 0.01) ** 2 / 0.09**4
    assert est.std_err == pytest.approx(math.sqrt(expected_var))
    assert est.n_noclick_pulses == 800


@pytest.mark.parametrize("name", ["coherent_lab", "smsv_lab"])
def test_cross_validation_passes(name):
    cfg = canonical_configs(n_pulses=2_000_000)[name]
    res = mc_vs_analytic(cfg)
    assert res.passed, res


def test_cross_validation_negative_control():
    cfg = ExperimentConfig(StateSpec("heralded", beta=0.6), R=0.5, n_pulses=1_000_000, seed=3)
    res = mc_vs_analytic(cfg, oracle_config=cfg.with_(eta1=0.32))
    assert not res.passed
    assert abs(res.z) > 20


def test_click_oracle_is_exact_for_dark_subtracted_estimator():
    # heavy darks, still unbiased after subtraction
    cfg = ExperimentConfig(StateSpec("thermal", mean=0.5), R=0.6, budget=LAB, dark1_hz=2e6, dark2_hz=2e6,
                           n_pulses=4_000_000, seed=21)
    res = mc_vs_analytic(cfg)
    assert abs(res.z) <= 4
    assert click_oracle(cfg) == pytest.approx(res.k_click)


@pytest.mark.parametrize("suffix", [".csv", ".npz"])
def test_tag_file_round_trip(tmp_path, suffix):
    cfg = ExperimentConfig(StateSpec("coherent", mean=0.5), R=0.5, n_pulses=5000, seed=4)
    tags = simulate(cfg)
    path = tmp_path / f"tags{suffix}"
    sidecar = tags.write(path)
    back = TagStream.read(path)
    np.testing.assert_array_equal(back.click_d1, tags.click_d1)
    np.testing.assert_array_equal(back.click_d2, tags.click_d2)
    meta = json.loads(sidecar.read_text())
    assert meta["seed"] == 4 and meta["artifact_version"]
    assert RunConfig.from_dict(meta["config"]).experiment == cfg
    if suffix == ".csv":
        assert path.read_text().splitlines()[0] == "pulse_index,click_d1,click_d2"


def test_tag_file_rejects_bad_index(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("pulse_index,click_d1,click_d2\n0,0,1\n0,1,0\n")
    with pytest.raises(ValueError):
        TagStream.read(path)
