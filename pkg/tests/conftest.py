import numpy as np
import pytest

from channelcert.random import random_channel
from channelcert.rng import RngStream


def stream(seed, sid=0):
    return RngStream(seed, sid)


def random_density(d, rng, rank=None):
    """Random full(ish)-rank density matrix from a Ginibre factor."""
    rank = rank or d
    g = rng.complex_normal((d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_pure(d, rng):
    v = rng.complex_normal(d)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return RngStream(12345, 0)


def channel_sweep(count, dims, rng, max_rank=4):
    """Deterministic list of random channels over the given (d_in, d_out) pairs."""
    out = []
    for t in range(count):
        d_in, d_out = dims[t % len(dims)]
        rank = 1 + (t % max_rank)
        out.append(random_channel(d_in, d_out, rank, rng.substream(t)))
    return out
