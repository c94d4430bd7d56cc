import numpy as np
import pytest

from channelcert import linalg
from channelcert.channel import (
    ChoiOperator,
    KrausChannel,
    average_fidelity,
    choi,
    choi_distance,
    depolarizing_channel,
    diamond_bounds,
    entanglement_fidelity,
    eta,
    identity_channel,
    kraus_from_choi,
    output_mean_offset,
    trace_distance_lb,
    unitary_channel,
)
from channelcert.errors import DomainError, InvalidChoiError, InvalidInputError, ShapeError
from channelcert.random import epsilon_far_unitary_channel, haar_state_batch, haar_unitary, random_channel
from channelcert.rng import RngStream

from conftest import channel_sweep, random_density, random_pure


def test_cptp_validation_rejects_corrupted_kraus(rng):
    good = random_channel(2, 2, 2, rng)
    with pytest.raises(InvalidInputError, match="deviates from identity"):
        KrausChannel(2, 2, good.kraus * 1.01)


def test_apply_depolarizing_and_unitary(rng):
    rho = random_density(3, rng)
    out = depolarizing_channel(3, 2).apply(rho)
    np.testing.assert_allclose(out, np.eye(2) / 2, atol=1e-12)
    u = haar_unitary(3, rng)
    np.testing.assert_allclose(
        unitary_channel(u).apply(rho), u @ rho @ u.conj().T, atol=1e-12
    )


def test_apply_preserves_trace_and_psd(rng):
    ch = random_channel(3, 2, 3, rng)
    rho = random_density(3, rng.substream(1))
    out = ch.apply(rho)
    assert abs(np.trace(out).real - 1.0) < 1e-10
    assert np.linalg.eigvalsh(linalg.hermitianize(out)).min() > -1e-9
    with pytest.raises(ShapeError):
        ch.apply(np.eye(2) / 2)


def test_choi_identity_and_depolarizing():
    psi = linalg.maximally_entangled(3)
    np.testing.assert_allclose(
        choi(identity_channel(3)).mat, np.outer(psi, psi.conj()), atol=1e-12
    )
    np.testing.assert_allclose(
        choi(depolarizing_channel(2, 3)).mat, np.eye(6) / 6, atol=1e-12
    )


def test_choi_reduced_trace(rng):
    ch = random_channel(3, 4, 3, rng)
    j = choi(ch)
    reduced = linalg.partial_trace(j.mat, (3, 4), keep="A")
    assert np.abs(reduced - np.eye(3) / 3).max() < 1e-9


def _same_action(a, b, tol=1e-8):
    return np.abs(choi(a).mat - choi(b).mat).max() * a.d_in < tol


def test_kraus_from_choi_entangled_projector():
    psi = linalg.maximally_entangled(4)
    ch = kraus_from_choi(ChoiOperator(4, 4, np.outer(psi, psi.conj())))
    assert ch.kraus_rank == 1
    scaled = ch.kraus[0] / ch.kraus[0][0, 0]
    np.testing.assert_allclose(scaled, np.eye(4), atol=1e-8)


def test_kraus_from_choi_depolarizing_action():
    d_in, d_out = 2, 3
    dim = d_in * d_out
    ch = kraus_from_choi(ChoiOperator(d_in, d_out, np.eye(dim) / dim))
    assert ch.kraus_rank == dim
    assert _same_action(ch, depolarizing_channel(d_in, d_out))


def test_kraus_from_choi_round_trip(rng):
    for t in range(10):
        ch = channel_sweep(1, [(2, 3), (3, 2), (3, 3)], rng.substream(t))[0]
        back = kraus_from_choi(choi(ch))
        assert _same_action(ch, back)


def test_kraus_from_choi_invalid_inputs():
    with pytest.raises(InvalidChoiError):
        ChoiOperator(2, 2, np.diag([0.5, 0.5, 0.5, -0.5]).astype(complex))
    with pytest.raises(InvalidChoiError):
        # PSD but wrong reduced trace
        ChoiOperator(2, 2, np.diag([0.7, 0.1, 0.1, 0.1]).astype(complex))


def test_eta_examples(rng):
    assert eta(depolarizing_channel(3, 2)) == pytest.approx(0.0, abs=1e-9)
    u = haar_unitary(2, rng)
    assert eta(unitary_channel(u)) == pytest.approx(np.sqrt(3.0), abs=1e-9)


def test_eta_matrix_unit_identity(rng):
    ch = random_channel(3, 2, 3, rng)
    dep = depolarizing_channel(3, 2)
    total = 0.0
    for x in range(3):
        for y in range(3):
            unit = np.zeros((3, 3), dtype=complex)
            unit[x, y] = 1.0
            diff = np.einsum("kab,bc,kdc->ad", ch.kraus, unit, ch.kraus.conj())
            diff -= np.einsum("kab,bc,kdc->ad", dep.kraus, unit, dep.kraus.conj())
            total += linalg.schatten_norm(diff, 2) ** 2
    assert abs(eta(ch) ** 2 - total) < 1e-8


def test_entanglement_fidelity(rng):
    assert entanglement_fidelity(identity_channel(3)) == pytest.approx(1.0)
    for d in (2, 3):
        assert entanglement_fidelity(depolarizing_channel(d, d)) == pytest.approx(
            1.0 / d**2, abs=1e-12
        )
    ch = random_channel(3, 3, 2, rng)
    psi = linalg.maximally_entangled(3)
    via_choi = linalg.fidelity(choi(ch).mat, np.outer(psi, psi.conj()))
    assert abs(entanglement_fidelity(ch) - via_choi) < 1e-8
    with pytest.raises(DomainError):
        entanglement_fidelity(depolarizing_channel(2, 3))


def test_average_fidelity_examples(rng):
    assert average_fidelity(identity_channel(4)) == pytest.approx(1.0)
    assert average_fidelity(depolarizing_channel(2, 2)) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        average_fidelity(depolarizing_channel(2, 3))


def test_average_fidelity_monte_carlo(rng):
    ch = random_channel(3, 3, 3, rng)
    closed = average_fidelity(ch)
    phis = haar_state_batch(3, 100000, rng.substream(9))
    cols = np.einsum("kab,sb->ska", ch.kraus, phis)
    amps = np.einsum("sa,ska->sk", phis.conj(), cols)
    fids = (np.abs(amps) ** 2).sum(axis=1)
    se = fids.std(ddof=1) / np.sqrt(fids.size)
    assert abs(fids.mean() - closed) < 3 * se


def test_choi_distance(rng):
    ch = random_channel(2, 2, 2, rng)
    assert choi_distance(ch, ch, 1) == pytest.approx(0.0, abs=1e-12)
    val = choi_distance(identity_channel(2), depolarizing_channel(2, 2), 1)
    assert val == pytest.approx(1.5, abs=1e-10)
    other = random_channel(2, 2, 3, rng.substream(1))
    assert choi_distance(ch, other, 2) <= choi_distance(ch, other, 1) + 1e-12
    with pytest.raises(ShapeError):
        choi_distance(ch, depolarizing_channel(2, 3), 1)
    with pytest.raises(DomainError):
        choi_distance(ch, other, 3)


def test_trace_distance_lb_zero_and_reflection(rng):
    ch = random_channel(2, 2, 2, rng)
    assert trace_distance_lb(ch, ch, restarts=4, rng=rng.substream(1)) < 1e-8
    refl = unitary_channel(np.diag([1.0, -1.0]).astype(complex))
    val = trace_distance_lb(refl, identity_channel(2), restarts=16, rng=rng.substream(2))
    # the equal-superposition input sends the outputs to orthogonal states
    assert val > 2.0 - 1e-6
    with pytest.raises(DomainError):
        trace_distance_lb(ch, ch, restarts=0)


def test_trace_distance_lb_witness_seed(rng):
    adv = epsilon_far_unitary_channel(3, 0.4, rng)
    val = trace_distance_lb(
        adv.channel,
        identity_channel(3),
        restarts=4,
        rng=rng.substream(3),
        seeds=[adv.witness["input_state"]],
    )
    assert val >= 0.4 - 1e-6


def test_diamond_bounds_identity_vs_depolarizing(rng):
    lo, hi = diamond_bounds(
        identity_channel(2), depolarizing_channel(2, 2), restarts=8, rng=rng
    )
    assert hi <= 2.0 + 1e-12
    assert lo >= 1.5 - 1e-6
    assert lo <= hi + 1e-9


def test_diamond_bounds_same_channel(rng):
    ch = random_channel(2, 3, 2, rng)
    lo, hi = diamond_bounds(ch, ch, restarts=4, rng=rng.substream(1))
    assert lo == pytest.approx(0.0, abs=1e-8)
    assert hi == pytest.approx(0.0, abs=1e-8)


def test_diamond_bounds_adversarial_witness(rng):
    adv = epsilon_far_unitary_channel(2, 0.3, rng)
    lo, hi = diamond_bounds(
        adv.channel,
        identity_channel(2),
        restarts=8,
        rng=rng.substream(4),
        seeds=[adv.witness["input_state"]],
    )
    assert lo >= 0.3 - 1e-6
    assert lo <= hi + 1e-9


def test_fidelity_trace_distance_inequality(rng):
    # entanglement fidelity vs any lower bound on the trace distance to identity
    for t in range(30):
        d = 2 + t % 3
        ch = random_channel(d, d, 1 + t % 3, rng.substream(50 + t))
        lb = trace_distance_lb(
            ch, identity_channel(d), restarts=4, rng=rng.substream(300 + t)
        )
        assert entanglement_fidelity(ch) <= 1.0 - lb**2 / (4 * d) + 1e-9


def test_channel_serialization_round_trip(rng):
    ch = random_channel(3, 2, 3, rng)
    back = KrausChannel.from_json(ch.to_json())
    assert back.d_in == 3 and back.d_out == 2
    np.testing.assert_allclose(back.kraus, ch.kraus, atol=1e-15)


def test_choi_round_trip_on_matrix_units(rng):
    ch = random_channel(2, 2, 2, rng)
    back = kraus_from_choi(choi(ch))
    for x in range(2):
        for y in range(2):
            unit = np.zeros((2, 2), dtype=complex)
            unit[x, y] = 1.0
            a = np.einsum("kab,bc,kdc->ad", ch.kraus, unit, ch.kraus.conj())
            b = np.einsum("kab,bc,kdc->ad", back.kraus, unit, back.kraus.conj())
            assert np.abs(a - b).max() < 1e-8
