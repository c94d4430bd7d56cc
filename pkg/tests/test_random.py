import json

import numpy as np
import pytest

from channelcert.errors import DomainError, SamplingExhaustedError
from channelcert.random import (
    epsilon_far_unitary_channel,
    gaussian_direction_acceptance,
    gaussian_perturbed_depolarizing,
    haar_state,
    haar_state_batch,
    haar_unitary,
    haar_unitary_batch,
    random_channel,
    _gaussian_zero_diag_hermitian,
)
from channelcert.rng import RngStream


def test_rng_reproducibility():
    a = RngStream(99, 7).uniform(5)
    b = RngStream(99, 7).uniform(5)
    np.testing.assert_array_equal(a, b)
    c = RngStream(99, 8).uniform(5)
    assert not np.array_equal(a, c)
    d = RngStream(99, 7).substream(3).uniform(5)
    e = RngStream(99, 7).substream(3).uniform(5)
    np.testing.assert_array_equal(d, e)


def test_haar_unitary_is_unitary(rng):
    assert abs(abs(haar_unitary(1, rng)[0, 0]) - 1.0) < 1e-12
    u = haar_unitary(4, rng)
    np.testing.assert_allclose(u.conj().T @ u, np.eye(4), atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(u, axis=0), np.ones(4), atol=1e-12)


def test_haar_unitary_first_moment(rng):
    us = haar_unitary_batch(3, 100000, rng)
    vals = np.abs(us[:, 0, 0]) ** 2
    se = vals.std(ddof=1) / np.sqrt(vals.size)
    assert abs(vals.mean() - 1.0 / 3.0) < 4 * se


def test_haar_state_moments(rng):
    v = haar_state(1, rng)
    assert abs(abs(v[0]) - 1.0) < 1e-12

    phis = haar_state_batch(2, 100000, rng.substream(1))
    z_expect = np.abs(phis[:, 0]) ** 2 - np.abs(phis[:, 1]) ** 2
    se = z_expect.std(ddof=1) / np.sqrt(z_expect.size)
    assert abs(z_expect.mean()) < 4 * se

    phis = haar_state_batch(5, 100000, rng.substream(2))
    fourth = np.abs(phis[:, 0]) ** 4
    se = fourth.std(ddof=1) / np.sqrt(fourth.size)
    assert abs(fourth.mean() - 1.0 / 15.0) < 4 * se


def test_random_channel_is_cptp(rng):
    ch = random_channel(3, 2, 4, rng)  # constructor validates CPTP
    assert ch.kraus_rank == 4


def test_epsilon_far_unitary_witness(rng):
    adv = epsilon_far_unitary_channel(2, 0.3, rng)
    assert adv.family == "unitary_mixture"
    assert abs(adv.witness_distance() - 0.3) < 1e-10


def test_epsilon_far_unitary_cptp_and_small_eps(rng):
    adv = epsilon_far_unitary_channel(4, 0.5, rng)
    assert adv.channel.kraus_rank == 2  # {I, U_V}/sqrt(2) passes the validator
    eps = 1e-3
    tiny = epsilon_far_unitary_channel(3, eps, rng.substream(1))
    for i in range(3):
        basis = np.zeros((3, 3), dtype=complex)
        basis[i, i] = 1.0
        survival = tiny.channel.apply(basis)[i, i].real
        assert 1.0 - survival < 5 * eps**2  # basis states survive up to O(eps^2)
    with pytest.raises(DomainError):
        epsilon_far_unitary_channel(3, 0.0, rng)
    with pytest.raises(DomainError):
        epsilon_far_unitary_channel(3, 1.5, rng)


def test_gaussian_direction_structure(rng):
    u = _gaussian_zero_diag_hermitian(6, 1.0, rng)
    np.testing.assert_array_equal(np.diag(u), np.zeros(6))
    np.testing.assert_allclose(u, u.conj().T, atol=0)
    assert np.trace(u) == 0


def test_gaussian_perturbed_depolarizing_instance(rng):
    adv = gaussian_perturbed_depolarizing(2, 8, 1.0 / 32.0, rng)
    assert adv.channel.d_out == 8
    assert adv.witness_distance() >= 1.0 / 32.0 - 1e-10
    expected = (1.0 / 32.0 / 8.0) * adv.witness["direction_trace_norm"]
    assert abs(adv.witness_distance() - expected) < 1e-8
    assert adv.witness["direction_op_norm"] <= 32.0
    assert adv.witness["direction_trace_norm"] >= 8.0


def test_gaussian_perturbed_rejection_exhaustion():
    # seed 5's first direction draw at d_out=2 misses the acceptance event
    with pytest.raises(SamplingExhaustedError) as err:
        gaussian_perturbed_depolarizing(2, 2, 1.0 / 64.0, RngStream(5, 0), max_retries=1)
    assert "mean_trace_norm" in err.value.stats


def test_gaussian_perturbed_domain_errors(rng):
    with pytest.raises(DomainError):
        gaussian_perturbed_depolarizing(2, 8, 0.1, rng)  # eps > 1/32
    with pytest.raises(DomainError):
        gaussian_perturbed_depolarizing(1, 8, 1.0 / 64.0, rng)


def test_gaussian_acceptance_rate_small(rng):
    # quick version of the d_out=16 calibration (the acceptance suite runs 10^3)
    assert gaussian_direction_acceptance(16, 100, rng) >= 0.5


def test_direction_trace_norm_concentration(rng):
    sigma = 4.0 / np.sqrt(16)
    vals = []
    for t in range(1000):
        u = _gaussian_zero_diag_hermitian(16, sigma, rng)
        vals.append(np.abs(np.linalg.eigvalsh(u)).sum())
    # Lipschitz concentration: fluctuations at scale sqrt(d_out) * sigma
    assert np.std(vals) <= 2.0 * np.sqrt(16) * sigma


def test_adversarial_serialization(rng):
    adv = epsilon_far_unitary_channel(2, 0.25, rng)
    doc = json.loads(adv.to_json())
    assert doc["family"] == "unitary_mixture"
    assert doc["epsilon"] == 0.25
    assert "input_state" in doc["witness"]
    from channelcert.channel import KrausChannel

    back = KrausChannel.from_json(json.dumps({k: doc[k] for k in ("d_in", "d_out", "kraus")}))
    np.testing.assert_allclose(back.kraus, adv.channel.kraus, atol=1e-15)
