"""Haar and Gaussian samplers, plus the two adversarial channel families.

Haar unitaries are drawn by QR decomposition of a complex Ginibre matrix with
the diagonal-phase correction (plain QR is not Haar); Haar state vectors are
normalized complex Gaussians, which is the same distribution as a column of a
Haar unitary.

The two adversarial families are channels at a certified distance from their
reference channel:

* ``unitary_mixture``: N_V(rho) = rho/2 + U_V rho U_V^dag / 2 with U_V a
  Haar-conjugated planar rotation by angle arcsin(epsilon); the input V|0>
  witnesses trace distance exactly epsilon from the identity channel.
* ``gaussian_depolarizing``: N(rho) = Tr(rho) I/d_out +
  (epsilon/d_out) <w_bar|rho|w_bar> U with U a zero-diagonal Hermitian
  Gaussian matrix (off-diagonal variance 16/d_out), rejection-sampled until
  ||U||_1 >= d_out and ||U||_inf <= 32; the input |w_bar> then witnesses
  trace distance (epsilon/d_out)||U||_1 >= epsilon from the fully
  depolarizing channel, and the Choi matrix stays PSD for epsilon <= 1/32.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .channel import ChoiOperator, KrausChannel, kraus_from_choi
from .errors import DomainError, SamplingExhaustedError
from .rng import RngStream

__all__ = [
    "RngStream",
    "haar_unitary",
    "haar_state",
    "random_channel",
    "AdversarialChannel",
    "epsilon_far_unitary_channel",
    "gaussian_perturbed_depolarizing",
]


def haar_unitary(d: int, rng: RngStream) -> np.ndarray:
    """One d x d unitary from the Haar measure."""
    if d < 1:
        raise DomainError("dimension must be >= 1")
    z = rng.complex_normal((d, d))
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    return q * (diag / np.abs(diag))


def haar_unitary_batch(d: int, n: int, rng: RngStream) -> np.ndarray:
    """Stack of n independent Haar unitaries, shape (n, d, d)."""
    z = rng.complex_normal((n, d, d))
    q, r = np.linalg.qr(z)
    diag = np.einsum("sii->si", r)
    return q * (diag / np.abs(diag))[:, None, :]


def haar_state(d: int, rng: RngStream) -> np.ndarray:
    """One Haar-random unit vector in C^d."""
    if d < 1:
        raise DomainError("dimension must be >= 1")
    v = rng.complex_normal(d)
    return v / np.linalg.norm(v)


def haar_state_batch(d: int, n: int, rng: RngStream) -> np.ndarray:
    v = rng.complex_normal((n, d))
    return v / np.linalg.norm(v, axis=1)[:, None]


def random_channel(
    d_in: int, d_out: int, kraus_rank: int, rng: RngStream
) -> KrausChannel:
    """A generic CPTP map: Ginibre Kraus stack normalized by S^{-1/2}."""
    if kraus_rank < 1:
        raise DomainError("kraus_rank must be >= 1")
    g = rng.complex_normal((kraus_rank, d_out, d_in))
    s = np.einsum("kba,kbc->ac", g.conj(), g)
    w, v = linalg.hermitian_eig(s)
    inv_sqrt = (v * (1.0 / np.sqrt(w))) @ v.conj().T
    return KrausChannel(d_in, d_out, np.einsum("kab,bc->kac", g, inv_sqrt))


@dataclass
class AdversarialChannel:
    """A channel at certified distance >= epsilon from its reference channel.

    ``witness`` records the family-specific data certifying the distance: for
    ``unitary_mixture`` the maximizing input state, for
    ``gaussian_depolarizing`` the Gaussian direction and the norms of U.
    """

    channel: KrausChannel
    family: str
    epsilon: float
    witness: dict = field(default_factory=dict)

    def witness_input(self) -> np.ndarray:
        """The certifying pure input state."""
        if self.family == "unitary_mixture":
            return self.witness["input_state"]
        if self.family == "gaussian_depolarizing":
            return self.witness["w"].conj()
        raise DomainError(f"unknown adversarial family {self.family!r}")

    def reference_channel(self) -> KrausChannel:
        from .channel import depolarizing_channel, identity_channel

        d_in, d_out = self.channel.d_in, self.channel.d_out
        if self.family == "unitary_mixture":
            return identity_channel(d_in)
        if self.family == "gaussian_depolarizing":
            return depolarizing_channel(d_in, d_out)
        raise DomainError(f"unknown adversarial family {self.family!r}")

    def witness_distance(self) -> float:
        """Exact ||(channel - reference)(|witness><witness|)||_1."""
        phi = self.witness_input()
        diff = self.channel.apply_pure(phi) - self.reference_channel().apply_pure(phi)
        return linalg.trace_norm_hermitian(diff)

    def to_json(self) -> str:
        doc = json.loads(self.channel.to_json())
        witness = {}
        for key, value in self.witness.items():
            if isinstance(value, np.ndarray):
                witness[key] = [
                    [float(z.real), float(z.imag)] for z in value.reshape(-1)
                ]
            else:
                witness[key] = float(value)
        doc["family"] = self.family
        doc["epsilon"] = self.epsilon
        doc["witness"] = witness
        return json.dumps(doc)


def _rotation_by(epsilon: float, d: int) -> np.ndarray:
    """d x d unitary rotating the (0, 1) plane by arcsin(epsilon)."""
    r = np.eye(d, dtype=complex)
    c = np.sqrt(1.0 - epsilon**2)
    r[0, 0] = c
    r[1, 1] = c
    r[1, 0] = epsilon
    r[0, 1] = -epsilon
    return r


def epsilon_far_unitary_channel(
    d: int, epsilon: float, rng: RngStream
) -> AdversarialChannel:
    """Mixture channel rho/2 + U_V rho U_V^dag / 2 at trace distance exactly
    epsilon from the identity channel, witnessed by the input V|0>."""
    if d < 2:
        raise DomainError("dimension must be >= 2")
    if not 0.0 < epsilon <= 1.0:
        raise DomainError("epsilon must lie in (0, 1]")
    v = haar_unitary(d, rng)
    u_v = v @ _rotation_by(epsilon, d) @ v.conj().T
    kraus = np.stack([np.eye(d, dtype=complex), u_v]) / np.sqrt(2.0)
    ch = KrausChannel(d, d, kraus)
    return AdversarialChannel(
        channel=ch,
        family="unitary_mixture",
        epsilon=float(epsilon),
        witness={"input_state": v[:, 0].copy()},
    )


def _gaussian_zero_diag_hermitian(d: int, sigma: float, rng: RngStream) -> np.ndarray:
    """Hermitian matrix with zero diagonal and CN(0, sigma^2) above-diagonal entries."""
    u = np.zeros((d, d), dtype=complex)
    idx = np.triu_indices(d, k=1)
    vals = sigma * rng.complex_normal(len(idx[0]))
    u[idx] = vals
    return u + u.conj().T


def gaussian_perturbed_depolarizing(
    d_in: int,
    d_out: int,
    epsilon: float,
    rng: RngStream,
    max_retries: int = 1000,
) -> AdversarialChannel:
    """Gaussian perturbation of the fully depolarizing channel.

    The perturbation direction U is rejection-sampled until the acceptance
    event {||U||_1 >= d_out, ||U||_inf <= 32} holds, which keeps the Choi
    matrix PSD for epsilon <= 1/32 and certifies the witness distance
    (epsilon/d_out) ||U||_1 >= epsilon.
    """
    if d_in < 2 or d_out < 2:
        raise DomainError("dimensions must be >= 2")
    if not 0.0 < epsilon <= 1.0 / 32.0:
        raise DomainError("epsilon must lie in (0, 1/32]")
    if max_retries < 1:
        raise DomainError("max_retries must be >= 1")
    sigma = 4.0 / np.sqrt(d_out)

    trace_norms, op_norms = [], []
    u = None
    for _ in range(max_retries):
        cand = _gaussian_zero_diag_hermitian(d_out, sigma, rng)
        evals = np.linalg.eigvalsh(cand)
        nrm1 = float(np.abs(evals).sum())
        nrm_inf = float(np.abs(evals).max())
        trace_norms.append(nrm1)
        op_norms.append(nrm_inf)
        if nrm1 >= d_out and nrm_inf <= 32.0:
            u = cand
            break
    if u is None:
        raise SamplingExhaustedError(
            f"acceptance event not hit in {max_retries} draws",
            stats={
                "mean_trace_norm": float(np.mean(trace_norms)),
                "min_trace_norm": float(np.min(trace_norms)),
                "max_op_norm": float(np.max(op_norms)),
            },
        )

    w = haar_state(d_in, rng)
    dim = d_in * d_out
    j = np.eye(dim, dtype=complex) / dim
    j += (epsilon / dim) * np.kron(np.outer(w, w.conj()), u)
    ch = kraus_from_choi(ChoiOperator(d_in, d_out, j))
    evals_u = np.linalg.eigvalsh(u)
    return AdversarialChannel(
        channel=ch,
        family="gaussian_depolarizing",
        epsilon=float(epsilon),
        witness={
            "w": w.copy(),
            "direction": u,
            "direction_trace_norm": float(np.abs(evals_u).sum()),
            "direction_op_norm": float(np.abs(evals_u).max()),
        },
    )


def gaussian_direction_acceptance(
    d_out: int, draws: int, rng: RngStream
) -> float:
    """Empirical probability that the rejection event accepts a raw Gaussian draw."""
    sigma = 4.0 / np.sqrt(d_out)
    hits = 0
    for _ in range(draws):
        u = _gaussian_zero_diag_hermitian(d_out, sigma, rng)
        evals = np.linalg.eigvalsh(u)
        if np.abs(evals).sum() >= d_out and np.abs(evals).max() <= 32.0:
            hits += 1
    return hits / draws
