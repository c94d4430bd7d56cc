"""Quantum channels in Kraus and Choi form, and the distance/fidelity
quantities between them.

Conventions
-----------
* A channel with input dimension ``d_in`` and output dimension ``d_out`` is a
  list of Kraus operators ``A_k`` of shape ``(d_out, d_in)`` with
  ``sum_k A_k^dag A_k = I``.
* The Choi matrix is ``J = (id (x) N)(|Psi><Psi|)`` with the *input* system
  first, i.e. ``J[(i,a),(j,b)] = <a| N(|i><j|) |b> / d_in``.  Both orderings
  appear in the literature; fixing one prevents silent transposition bugs.
* Diamond-distance computations are out of scope as an exact SDP; instead we
  expose certified two-sided bounds built from Choi norms and an optimized
  lower bound over (optionally ancilla-extended) pure inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import DomainError, InvalidChoiError, InvalidInputError, ShapeError
from .rng import RngStream

TOL_CPTP = 1e-8


@dataclass
class KrausChannel:
    """A CPTP map given by a stack of Kraus operators of shape (K, d_out, d_in)."""

    d_in: int
    d_out: int
    kraus: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.kraus, dtype=complex)
        if a.ndim == 2:
            a = a[None, :, :]
        if a.ndim != 3 or a.shape[0] < 1:
            raise ShapeError("kraus must be a non-empty stack of matrices")
        if a.shape[1:] != (self.d_out, self.d_in):
            raise ShapeError(
                f"Kraus operators must be {self.d_out}x{self.d_in}, got {a.shape[1:]}"
            )
        if not np.isfinite(a).all():
            raise InvalidInputError("Kraus operators contain non-finite entries")
        gram = np.einsum("kba,kbc->ac", a.conj(), a)
        residual = linalg.schatten_norm(gram - np.eye(self.d_in), np.inf)
        if residual > TOL_CPTP:
            raise InvalidInputError(
                f"sum_k A_k^dag A_k deviates from identity by {residual:.3e}"
            )
        a.setflags(write=False)
        self.kraus = a

    @property
    def kraus_rank(self) -> int:
        return self.kraus.shape[0]

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """N(rho) = sum_k A_k rho A_k^dag."""
        r = linalg.as_matrix(rho)
        if r.shape != (self.d_in, self.d_in):
            raise ShapeError(f"input must be {self.d_in}x{self.d_in}, got {r.shape}")
        return np.einsum("kab,bc,kdc->ad", self.kraus, r, self.kraus.conj())

    def apply_pure(self, phi: np.ndarray) -> np.ndarray:
        """N(|phi><phi|) without forming the input projector."""
        v = np.asarray(phi, dtype=complex).reshape(-1)
        if v.shape != (self.d_in,):
            raise ShapeError(f"input vector must have dimension {self.d_in}")
        cols = self.kraus @ v
        return np.einsum("ka,kb->ab", cols, cols.conj())

    def apply_pure_batch(self, phis: np.ndarray) -> np.ndarray:
        """Vectorized N(|phi_s><phi_s|) for a stack of unit vectors (S, d_in)."""
        cols = np.einsum("kab,sb->ska", self.kraus, phis)
        return np.einsum("ska,skb->sab", cols, cols.conj())

    def adjoint_apply(self, x: np.ndarray) -> np.ndarray:
        """Heisenberg-picture adjoint: N^dag(X) = sum_k A_k^dag X A_k."""
        return np.einsum("kba,bc,kcd->ad", self.kraus.conj(), x, self.kraus)

    def to_json(self) -> str:
        kraus = [
            [[float(z.real), float(z.imag)] for z in a.reshape(-1)]
            for a in self.kraus
        ]
        return json.dumps({"d_in": self.d_in, "d_out": self.d_out, "kraus": kraus})

    @classmethod
    def from_json(cls, text: str) -> "KrausChannel":
        doc = json.loads(text)
        d_in, d_out = int(doc["d_in"]), int(doc["d_out"])
        mats = [
            np.array([complex(re, im) for re, im in entry], dtype=complex).reshape(
                d_out, d_in
            )
            for entry in doc["kraus"]
        ]
        return cls(d_in, d_out, np.stack(mats))


@dataclass
class ChoiOperator:
    """Choi matrix of a channel; ordering (input (x) output), dimension d_in*d_out."""

    d_in: int
    d_out: int
    mat: np.ndarray

    def __post_init__(self):
        m = linalg.as_matrix(self.mat)
        dim = self.d_in * self.d_out
        if m.shape != (dim, dim):
            raise ShapeError(f"Choi matrix must be {dim}x{dim}, got {m.shape}")
        evals = np.linalg.eigvalsh(linalg.hermitianize(m))
        if evals.min() < -linalg.TOL_PSD * max(1.0, abs(np.trace(m))):
            raise InvalidChoiError(f"Choi matrix has eigenvalue {evals.min():.3e} < 0")
        reduced = linalg.partial_trace(m, (self.d_in, self.d_out), keep="A")
        residual = np.abs(reduced - np.eye(self.d_in) / self.d_in).max()
        if residual > TOL_CPTP:
            raise InvalidChoiError(
                f"partial trace over output deviates from I/d_in by {residual:.3e}"
            )
        m.setflags(write=False)
        self.mat = m


def identity_channel(d: int) -> KrausChannel:
    return KrausChannel(d, d, np.eye(d, dtype=complex)[None, :, :])


def unitary_channel(u: np.ndarray) -> KrausChannel:
    u = linalg.as_matrix(u)
    d = u.shape[0]
    if u.shape != (d, d):
        raise ShapeError("unitary must be square")
    if linalg.schatten_norm(u.conj().T @ u - np.eye(d), np.inf) > 1e-10:
        raise DomainError("matrix is not unitary within 1e-10")
    return KrausChannel(d, d, u[None, :, :])


def depolarizing_channel(d_in: int, d_out: int) -> KrausChannel:
    """D(rho) = Tr(rho) I/d_out, with Kraus set {|i><j| / sqrt(d_out)}."""
    ops = np.zeros((d_in * d_out, d_out, d_in), dtype=complex)
    k = 0
    for i in range(d_out):
        for j in range(d_in):
            ops[k, i, j] = 1.0 / np.sqrt(d_out)
            k += 1
    return KrausChannel(d_in, d_out, ops)


def apply(ch: KrausChannel, rho: np.ndarray) -> np.ndarray:
    return ch.apply(rho)


def choi(ch: KrausChannel) -> ChoiOperator:
    """J = (1/d_in) sum_ij |i><j| (x) N(|i><j|)."""
    j = np.einsum("kai,kbj->iajb", ch.kraus, ch.kraus.conj()) / ch.d_in
    dim = ch.d_in * ch.d_out
    return ChoiOperator(ch.d_in, ch.d_out, j.reshape(dim, dim))


def kraus_from_choi(j: ChoiOperator, cutoff_rel: float = 1e-10) -> KrausChannel:
    """Reconstruct a Kraus representation from a Choi matrix.

    Eigenvalues below ``cutoff_rel * trace`` are dropped; if the truncated set
    drifts from trace preservation by more than the CPTP tolerance, one polar
    correction A_k -> A_k S^{-1/2} restores sum_k A_k^dag A_k = I.
    """
    m = j.mat
    d_in, d_out = j.d_in, j.d_out
    w, v = linalg.hermitian_eig(m)
    cutoff = cutoff_rel * max(abs(np.trace(m)), 1e-300)
    keep = w > cutoff
    if not np.any(keep):
        raise InvalidChoiError("Choi matrix has no eigenvalue above the cutoff")
    ops = []
    for lam, vec in zip(w[keep], v[:, keep].T):
        ops.append(np.sqrt(d_in * lam) * vec.reshape(d_in, d_out).T)
    a = np.stack(ops)
    gram = np.einsum("kba,kbc->ac", a.conj(), a)
    if linalg.schatten_norm(gram - np.eye(d_in), np.inf) > TOL_CPTP:
        wg, vg = linalg.hermitian_eig(gram)
        inv_sqrt = (vg * (1.0 / np.sqrt(np.clip(wg, 1e-300, None)))) @ vg.conj().T
        a = np.einsum("kab,bc->kac", a, inv_sqrt)
    return KrausChannel(d_in, d_out, a)


def kraus_overlap_gram(ch: KrausChannel) -> np.ndarray:
    """Matrix of Tr(A_k^dag A_l) over Kraus pairs."""
    return np.einsum("kba,lba->kl", ch.kraus.conj(), ch.kraus)


def eta(ch: KrausChannel) -> float:
    """Scaled average-case distance to the fully depolarizing channel.

    eta = d_in * || J - I/(d_in d_out) ||_2, evaluated both from the Choi
    matrix and from the Kraus-overlap identity
    eta^2 = sum_kl |Tr(A_k^dag A_l)|^2 - d_in/d_out; the two routes must agree.
    """
    overlaps = kraus_overlap_gram(ch)
    eta_sq_kraus = float((np.abs(overlaps) ** 2).sum() - ch.d_in / ch.d_out)
    dim = ch.d_in * ch.d_out
    diff = choi(ch).mat - np.eye(dim) / dim
    eta_choi = ch.d_in * linalg.schatten_norm(diff, 2)
    # Agreement is checked on eta^2: near eta = 0 the square root would
    # amplify benign cancellation noise (~1e-15) to ~3e-8.
    if abs(eta_sq_kraus - eta_choi**2) > 1e-8 * max(1.0, eta_choi**2):
        raise InvalidInputError(
            f"Kraus/Choi evaluations of eta^2 disagree: "
            f"{eta_sq_kraus} vs {eta_choi**2}"
        )
    return eta_choi


def output_mean_offset(ch: KrausChannel) -> float:
    """m = || N(I) - (d_in/d_out) I ||_2, the offset of the image of identity."""
    n_of_i = np.einsum("kab,kcb->ac", ch.kraus, ch.kraus.conj())
    return linalg.schatten_norm(
        n_of_i - (ch.d_in / ch.d_out) * np.eye(ch.d_out), 2
    )


def entanglement_fidelity(ch: KrausChannel) -> float:
    """F(J, |Psi><Psi|) = sum_k |Tr A_k|^2 / d^2 for square channels."""
    if ch.d_in != ch.d_out:
        raise DomainError("entanglement fidelity needs d_in = d_out")
    traces = np.einsum("kaa->k", ch.kraus)
    s = float((np.abs(traces) ** 2).sum())
    return min(max(s / ch.d_in**2, 0.0), 1.0)


def average_fidelity(ch: KrausChannel) -> float:
    """Haar-average of F(N(|phi><phi|), |phi><phi|) via the closed form
    (1 + d F_ent) / (1 + d)."""
    if ch.d_in != ch.d_out:
        raise DomainError("average fidelity needs d_in = d_out")
    d = ch.d_in
    return (1.0 + d * entanglement_fidelity(ch)) / (1.0 + d)


def _check_same_dims(a: KrausChannel, b: KrausChannel):
    if (a.d_in, a.d_out) != (b.d_in, b.d_out):
        raise ShapeError(
            f"channel dimensions differ: {(a.d_in, a.d_out)} vs {(b.d_in, b.d_out)}"
        )


def choi_distance(a: KrausChannel, b: KrausChannel, p) -> float:
    if p not in (1, 2):
        raise DomainError(f"p must be 1 or 2, got {p!r}")
    _check_same_dims(a, b)
    return linalg.schatten_norm(choi(a).mat - choi(b).mat, p)


def _diff_on_pure(a: KrausChannel, b: KrausChannel, phi_mat: np.ndarray) -> np.ndarray:
    """Hermitian matrix (id (x) (a - b))(|phi><phi|); phi_mat has shape (anc, d_in)."""
    va = np.einsum("xi,kai->kxa", phi_mat, a.kraus)
    va = va.reshape(a.kraus_rank, -1)
    vb = np.einsum("xi,kai->kxa", phi_mat, b.kraus)
    vb = vb.reshape(b.kraus_rank, -1)
    return np.einsum("ka,kb->ab", va, va.conj()) - np.einsum(
        "ka,kb->ab", vb, vb.conj()
    )


def _diff_adjoint_on(a, b, s, phi_mat):
    """Gradient direction ((id (x) (a-b))^dag)(S) |phi> as an (anc, d_in) matrix."""
    anc = phi_mat.shape[0]
    d_out = a.d_out
    s3 = s.reshape(anc, d_out, anc, d_out)

    def term(ch):
        cols = np.einsum("xi,kai->kxa", phi_mat, ch.kraus)
        su = np.einsum("xayb,kyb->kxa", s3, cols)
        return np.einsum("kxa,kai->xi", su, ch.kraus.conj())

    return term(a) - term(b)


def trace_distance_lb(
    a: KrausChannel,
    b: KrausChannel,
    restarts: int = 32,
    rng: RngStream | None = None,
    seeds=None,
    ancilla_dim: int = 1,
    max_iter: int = 200,
    tol: float = 1e-10,
) -> float:
    """Lower bound on max_phi ||(id_anc (x) (a-b))(|phi><phi|)||_1.

    Projected gradient ascent on the pure input with step halving, restarted
    from ``restarts`` random states plus any caller-provided ``seeds``
    (vectors of dimension ancilla_dim * d_in).  With ancilla_dim = 1 this
    lower-bounds the trace distance between the channels; with
    ancilla_dim = d_in it lower-bounds the diamond distance.
    """
    _check_same_dims(a, b)
    if restarts < 1:
        raise DomainError("restarts must be a positive integer")
    if ancilla_dim < 1:
        raise DomainError("ancilla_dim must be >= 1")
    rng = rng if rng is not None else RngStream(0, 0)
    dim = ancilla_dim * a.d_in

    starts = []
    for s in seeds or []:
        v = np.asarray(s, dtype=complex).reshape(-1)
        if v.shape != (dim,):
            raise ShapeError(f"seed must have dimension {dim}")
        starts.append(v / np.linalg.norm(v))
    raw = rng.complex_normal((restarts, dim))
    starts.extend(raw / np.linalg.norm(raw, axis=1)[:, None])

    best = 0.0
    for phi in starts:
        phi_mat = phi.reshape(ancilla_dim, a.d_in)
        x = _diff_on_pure(a, b, phi_mat)
        w, v = linalg.hermitian_eig(x)
        val = float(np.abs(w).sum())
        step = 1.0
        for _ in range(max_iter):
            sign = (v * np.sign(w)) @ v.conj().T
            grad = _diff_adjoint_on(a, b, sign, phi_mat)
            improved = False
            while step > 1e-12:
                cand = phi_mat + step * grad
                cand = cand / np.linalg.norm(cand)
                xc = _diff_on_pure(a, b, cand)
                wc, vc = linalg.hermitian_eig(xc)
                cand_val = float(np.abs(wc).sum())
                if cand_val > val + tol:
                    phi_mat, x, w, v, val = cand, xc, wc, vc, cand_val
                    improved = True
                    break
                step /= 2.0
            if not improved:
                break
        best = max(best, val)
    return best


def diamond_bounds(
    a: KrausChannel,
    b: KrausChannel,
    restarts: int = 32,
    rng: RngStream | None = None,
    seeds=None,
) -> tuple[float, float]:
    """Certified (lower, upper) bounds on the diamond distance.

    upper = min(d_in ||J_a - J_b||_1, d_in sqrt(d_out) ||J_a - J_b||_2, 2);
    lower = best optimized pure-input value, over both plain inputs and
    inputs extended with a d_in-dimensional ancilla (seeded with the
    maximally entangled state, which recovers the Choi-state witness).
    """
    _check_same_dims(a, b)
    rng = rng if rng is not None else RngStream(0, 0)
    dj = choi(a).mat - choi(b).mat
    upper = min(
        a.d_in * linalg.trace_norm_hermitian(dj),
        a.d_in * np.sqrt(a.d_out) * linalg.schatten_norm(dj, 2),
        2.0,
    )
    plain = trace_distance_lb(
        a, b, restarts=restarts, rng=rng.substream(0), seeds=seeds
    )
    ext_seeds = [linalg.maximally_entangled(a.d_in)]
    for s in seeds or []:
        v = np.asarray(s, dtype=complex).reshape(-1)
        if v.shape == (a.d_in,):
            # embed a plain input seed as |0>_anc (x) |s>
            emb = np.zeros(a.d_in * a.d_in, dtype=complex)
            emb[: a.d_in] = v
            ext_seeds.append(emb)
    extended = trace_distance_lb(
        a,
        b,
        restarts=restarts,
        rng=rng.substream(1),
        seeds=ext_seeds,
        ancilla_dim=a.d_in,
    )
    lower = min(max(plain, extended), upper)
    return lower, upper
