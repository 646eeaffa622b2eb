import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from zps_sim.errors import TruncationError
from zps_sim.states import (
    PhotonDistribution,
    PureAmplitudes,
    attenuate_pure,
    coherent_distribution,
    fock_distribution,
    heralded_single,
    moments,
    smsv_distribution,
    thermal_distribution,
)


def test_vacuum_constructors():
    for dist in (coherent_distribution(0.0, 5), thermal_distribution(0.0, 5),
                 smsv_distribution(0.0), fock_distribution(0, 3), heralded_single(0.0)):
        assert dist.probs[0] == 1.0
        assert dist.probs[1:].sum() == 0.0


def test_coherent_vacuum_probability():
    dist = coherent_distribution(1.0, 20)
    assert dist.probs[0] == pytest.approx(oracles.poisson_pmf(1.0, 0), abs=1e-15)
    assert dist.probs[0] == pytest.approx(0.36787944117144233, abs=1e-12)


@pytest.mark.parametrize("mu", [0.1, 1.0, 5.0])
def test_coherent_is_poissonian(mu):
    assert moments(coherent_distribution(mu)).mandel_q == pytest.approx(0.0, abs=1e-9)


def test_coherent_rejects_short_cutoff():
    with pytest.raises(TruncationError):
        coherent_distribution(5.0, 8)
    with pytest.raises(ValueError):
        coherent_distribution(-1.0, 10)


def test_coherent_records_tail_mass():
    dist = coherent_distribution(1.0, 15)
    expected_tail = 1 - sum(oracles.poisson_pmf(1.0, n) for n in range(16))
    assert dist.tail_mass == pytest.approx(expected_tail, abs=1e-15)
    assert dist.tail_mass < 1e-10


def test_smsv_two_term_moments():
    m = moments(smsv_distribution(1e-4))
    assert m.mean_n == pytest.approx(2e-4, rel=1e-12)
    assert m.mandel_q == pytest.approx(1 - 2e-4, rel=1e-12)


def test_smsv_validation():
    with pytest.raises(ValueError):
        smsv_distribution(1e-4, cutoff=1)
    with pytest.warns(UserWarning):
        smsv_distribution(0.2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        smsv_distribution(0.05)


def test_thermal():
    dist = thermal_distribution(1.0, 60)
    assert dist.probs[0] == pytest.approx(0.5, abs=1e-15)
    assert moments(dist).mandel_q == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(TruncationError):
        thermal_distribution(1.0, 20)


@pytest.mark.parametrize("mu", [0.05, 0.5, 2.0, 7.0])
def test_thermal_q_equals_mean(mu):
    assert moments(thermal_distribution(mu)).mandel_q == pytest.approx(mu, abs=1e-6)


def test_fock():
    m = moments(fock_distribution(1))
    assert (m.mean_n, m.variance, m.mandel_q) == (1.0, 0.0, -1.0)
    with pytest.raises(ValueError):
        fock_distribution(4, cutoff=3)


def test_heralded_single():
    np.testing.assert_allclose(heralded_single(2 / 3).probs, [1 / 3, 2 / 3], atol=1e-15)
    assert moments(heralded_single(0.38)).mandel_q == pytest.approx(-0.38, abs=1e-12)
    with pytest.raises(ValueError):
        heralded_single(1.2)


def test_superposition_mean_is_three():
    dist = PhotonDistribution([0, 0.5, 0, 0, 0, 0.5])
    assert moments(dist).mean_n == 3.0


def test_vacuum_q_convention():
    assert moments(fock_distribution(0, 4)).mandel_q == 0.0


def test_distribution_validation():
    with pytest.raises(ValueError):
        PhotonDistribution([0.5, 0.6])
    with pytest.raises(ValueError):
        PhotonDistribution([1.1, -0.1])
    dist = PhotonDistribution([0.5, 0.5])
    with pytest.raises(ValueError):
        dist.probs[0] = 1.0


@given(mu=st.floats(0.0, 10.0))
@settings(max_examples=40, deadline=None)
def test_constructor_invariants(mu):
    for dist in (coherent_distribution(mu), thermal_distribution(mu)):
        assert np.all(dist.probs >= 0)
        assert abs(dist.probs.sum() - 1) <= 1e-12
        assert dist.tail_mass < 1e-10
    c = coherent_distribution(mu)
    if mu <= c.cutoff / 4:
        assert abs(moments(c).mandel_q) <= 1e-9


@given(beta=st.floats(0.0, 1.0))
def test_heralded_q_is_minus_beta(beta):
    m = moments(heralded_single(beta))
    assert m.mean_n == pytest.approx(beta, abs=1e-15)
    assert m.variance == pytest.approx(beta * (1 - beta), abs=1e-15)
    if beta > 0:
        assert m.mandel_q == pytest.approx(-beta, abs=1e-12)


# ---- pure-state noiseless attenuation

def test_attenuate_pure_identity_and_vacuum():
    psi = PureAmplitudes.normalized([0.3, 0.5j, -0.2, 0.1 + 0.4j])
    np.testing.assert_allclose(attenuate_pure(psi, 1.0).amps, psi.amps, atol=1e-15)
    vac = PureAmplitudes([1, 0, 0])
    for T in (0.0, 0.3, 1.0):
        np.testing.assert_allclose(attenuate_pure(vac, T).amps, [1, 0, 0])


def test_attenuate_pure_zero_norm():
    with pytest.raises(ValueError):
        attenuate_pure(PureAmplitudes([0, 1]), 0.0)


@pytest.mark.parametrize("T", [0.05, 0.3, 0.7, 0.95])
def test_attenuate_pure_mean_matches_diagonal_sum(T):
    psi = PureAmplitudes.normalized([0, 1, 0, 0, 0, 1])
    out = attenuate_pure(psi, T)
    mean_out = moments(out.distribution()).mean_n
    assert mean_out == pytest.approx(oracles.noiseless_mean([0, 0.5, 0, 0, 0, 0.5], T), rel=1e-12)


amp = st.complex_numbers(max_magnitude=1.0, allow_nan=False, allow_infinity=False)


@given(amps=st.lists(amp, min_size=1, max_size=12), T=st.floats(0.01, 1.0))
@settings(max_examples=100)
def test_attenuate_pure_commutes_with_diagonal_map(amps, T):
    a = np.array(amps)
    if np.sum(np.abs(a) ** 2) < 1e-6:
        return
    psi = PureAmplitudes.normalized(a)
    out = attenuate_pure(psi, T)
    p = np.abs(psi.amps) ** 2
    weights = p * T ** np.arange(p.size)
    expected = weights / weights.sum()
    np.testing.assert_allclose(np.abs(out.amps) ** 2, expected, atol=1e-12, rtol=0)
    # relative phases survive
    nz = np.abs(psi.amps) > 1e-6
    phase_in = psi.amps[nz] / np.abs(psi.amps[nz])
    phase_out = out.amps[nz] / np.abs(out.amps[nz])
    np.testing.assert_allclose(phase_out, phase_in, atol=1e-9)
