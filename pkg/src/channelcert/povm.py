"""POVM construction and Born-rule measurement simulation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import DomainError, InvalidInputError, ShapeError
from .random import haar_unitary_batch
from .rng import RngStream

TOL_POVM = 1e-8

# Born probabilities can dip microscopically below zero in floating point;
# anything above this threshold is a real negativity.
NEGATIVE_PROB_TOL = 1e-12


@dataclass
class Povm:
    """Finite POVM: a stack of PSD d x d elements summing to the identity."""

    d: int
    elements: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.elements, dtype=complex)
        if e.ndim != 3 or e.shape[1:] != (self.d, self.d) or e.shape[0] < 1:
            raise ShapeError(f"elements must be a stack of {self.d}x{self.d} matrices")
        total = e.sum(axis=0)
        if linalg.schatten_norm(total - np.eye(self.d), np.inf) > TOL_POVM:
            raise InvalidInputError("POVM elements do not sum to the identity")
        for m in e:
            evals = np.linalg.eigvalsh(linalg.hermitianize(m))
            if evals.min() < -linalg.TOL_PSD * max(1.0, evals.max()):
                raise InvalidInputError(
                    f"POVM element has eigenvalue {evals.min():.3e} < 0"
                )
        e.setflags(write=False)
        self.elements = e

    @property
    def n_outcomes(self) -> int:
        return self.elements.shape[0]

    @classmethod
    def trusted(cls, d: int, elements: np.ndarray) -> "Povm":
        """Skip validation for elements that are valid by construction.

        Internal hot-path constructor: used where validity is inherited from
        already-validated inputs (projector pairs from unit vectors, unitary
        conjugation of a valid POVM).
        """
        p = cls.__new__(cls)
        p.d = d
        elements.setflags(write=False)
        p.elements = elements
        return p


def two_outcome_projector(phi) -> Povm:
    """{|phi><phi|, I - |phi><phi|}."""
    v = linalg.check_pure_state(phi)
    p = np.outer(v, v.conj())
    return Povm.trusted(v.shape[0], np.stack([p, np.eye(v.shape[0]) - p]))


def conjugated(povm: Povm, u, check_unitary: bool = True) -> Povm:
    """Conjugate every element: M_x -> U M_x U^dag.

    ``check_unitary=False`` skips re-validating ``u`` in loops that conjugate
    many POVMs by one already-validated unitary.
    """
    u = linalg.as_matrix(u)
    if u.shape != (povm.d, povm.d):
        raise ShapeError(f"unitary must be {povm.d}x{povm.d}")
    if check_unitary and linalg.schatten_norm(
        u.conj().T @ u - np.eye(povm.d), np.inf
    ) > 1e-10:
        raise DomainError("conjugating matrix is not unitary within 1e-10")
    return Povm.trusted(povm.d, np.einsum("ab,xbc,dc->xad", u, povm.elements, u.conj()))


def haar_columns_povm(d: int, l: int, rng: RngStream) -> Povm:
    """Rank-1 POVM from the columns of l Haar unitaries, each weighted 1/l.

    Outcome (j, i) -> index j*d + i refers to column i of unitary j.  With
    l = 1 this is a Haar-random projective basis measurement.
    """
    if l < 1:
        raise DomainError("l must be >= 1")
    us = haar_unitary_batch(d, l, rng)
    cols = us.transpose(0, 2, 1).reshape(l * d, d)
    elements = np.einsum("xa,xb->xab", cols, cols.conj()) / l
    return Povm(d, elements)


def outcome_distribution(povm: Povm, rho) -> np.ndarray:
    """Born probabilities Tr(rho M_x), clipped at -1e-12 and renormalized."""
    r = linalg.as_matrix(rho)
    if r.shape != (povm.d, povm.d):
        raise ShapeError(f"state must be {povm.d}x{povm.d}, got {r.shape}")
    probs = np.einsum("xab,ba->x", povm.elements, r).real
    if probs.min() < -NEGATIVE_PROB_TOL:
        raise InvalidInputError(f"outcome probability {probs.min():.3e} below -1e-12")
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def sample_outcome(dist, n: int, rng: RngStream) -> np.ndarray:
    """n i.i.d. categorical draws from ``dist`` by inverse-CDF binary search."""
    p = np.asarray(dist, dtype=float)
    if p.ndim != 1:
        raise ShapeError("distribution must be a vector")
    if p.min() < 0:
        raise DomainError(f"negative probability {p.min()}")
    total = p.sum()
    if abs(total - 1.0) > 1e-9:
        raise DomainError(f"probabilities sum to {total}, expected 1")
    if n < 1:
        raise DomainError("n must be >= 1")
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.uniform(n), side="right").astype(np.int64)
