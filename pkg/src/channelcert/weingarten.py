"""Weingarten calculus for Haar moments over the unitary group (n <= 4) and
numerical verifiers for the fourth-moment machinery built on it.

The Weingarten values are obtained by inverting the Gram matrix
``G[s, t] = d^(#cycles(s^-1 t))`` of permutation operators on (C^d)^(x n),
which is a 24 x 24 inversion at worst and avoids representation-theory
machinery.  Six closed forms at n <= 3 and the sum identity
``sum_a W(a, d) = 1/(d (d+1) ... (d+n-1))`` serve as regression anchors.

The fourth-moment function evaluated here is, for a permutation ``a`` of
{1,2,3,4} and a channel with Kraus operators {A_k},

    F(a) = sum_{i,j,k,l,k',l'} Tr_a(A_l'^+ |j><i| A_k,  A_k^+ A_l,
                                    A_l^+ |i><j| A_k',  A_k'^+ A_l'),

whose 24 values determine the variance of the squared 2-norm distance
between a random pure-state output and the maximally mixed state.  Two
independent evaluators are provided (a contracted einsum path and a literal
sum) because expressions of this kind are easy to mistranscribe.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import linalg
from .channel import KrausChannel, choi, eta, output_mean_offset
from .errors import DomainError, ShapeError, TooLargeError, UnsupportedOrderError
from .random import haar_state_batch, haar_unitary_batch
from .rng import RngStream

F_ALPHA_GUARD = 10**7


@dataclass(frozen=True)
class Permutation:
    """A permutation of {1..n}, stored as a 0-based image tuple."""

    images: tuple

    def __post_init__(self):
        if sorted(self.images) != list(range(len(self.images))):
            raise DomainError(f"{self.images} is not a bijection on 0..n-1")

    @property
    def n(self) -> int:
        return len(self.images)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @classmethod
    def from_cycles(cls, n: int, *cycles) -> "Permutation":
        """Build from 1-based cycles, e.g. from_cycles(4, (1, 4, 2))."""
        images = list(range(n))
        for cyc in cycles:
            for a, b in zip(cyc, cyc[1:] + cyc[:1]):
                images[a - 1] = b - 1
        return cls(tuple(images))

    def __call__(self, x: int) -> int:
        return self.images[x]

    def compose(self, other: "Permutation") -> "Permutation":
        """self after other: (self . other)(x) = self(other(x))."""
        return Permutation(tuple(self.images[other.images[x]] for x in range(self.n)))

    def inverse(self) -> "Permutation":
        inv = [0] * self.n
        for x, y in enumerate(self.images):
            inv[y] = x
        return Permutation(tuple(inv))

    def cycles(self) -> tuple:
        """Cycle decomposition (1-based labels, fixed points included)."""
        seen = [False] * self.n
        out = []
        for start in range(self.n):
            if seen[start]:
                continue
            cyc = [start]
            seen[start] = True
            nxt = self.images[start]
            while nxt != start:
                cyc.append(nxt)
                seen[nxt] = True
                nxt = self.images[nxt]
            out.append(tuple(x + 1 for x in cyc))
        return tuple(out)

    def cycle_type(self) -> tuple:
        return tuple(sorted((len(c) for c in self.cycles()), reverse=True))

    def __repr__(self):
        nontrivial = [c for c in self.cycles() if len(c) > 1]
        if not nontrivial:
            return f"Permutation(id_{self.n})"
        return "Permutation(" + "".join(str(c).replace(" ", "") for c in nontrivial) + ")"


def all_permutations(n: int):
    return [Permutation(p) for p in itertools.permutations(range(n))]


def tr_alpha(mats, alpha: Permutation) -> complex:
    """Product over the cycles of ``alpha`` of traces of in-cycle products,
    Tr_a(M_1..M_n) = prod_cycles Tr(prod_{t in cycle} M_t)."""
    ms = [linalg.as_matrix(m) for m in mats]
    if len(ms) != alpha.n:
        raise ShapeError(f"need {alpha.n} matrices, got {len(ms)}")
    d = ms[0].shape[0]
    for m in ms:
        if m.shape != (d, d):
            raise ShapeError("all matrices must be square with equal dimension")
    value = 1.0 + 0.0j
    for cyc in alpha.cycles():
        prod = ms[cyc[0] - 1]
        for t in cyc[1:]:
            prod = prod @ ms[t - 1]
        value *= np.trace(prod)
    return complex(value)


@lru_cache(maxsize=None)
def _weingarten_table(n: int, d: int) -> dict:
    if d < n:
        raise DomainError(f"need d >= n for an invertible Gram matrix, got d={d}, n={n}")
    perms = all_permutations(n)
    index = {p: i for i, p in enumerate(perms)}
    gram = np.empty((len(perms), len(perms)))
    for i, p in enumerate(perms):
        p_inv = p.inverse()
        for q in perms:
            gram[i, index[q]] = float(d) ** len(p_inv.compose(q).cycles())
    winv = np.linalg.inv(gram)
    ident = index[Permutation.identity(n)]
    return {p: float(winv[ident, index[p]]) for p in perms}


def weingarten_matrix(n: int, d: int) -> dict:
    """W(a, d) for every a in S_n, n in 1..4, as a dict keyed by Permutation."""
    if not 1 <= n <= 4:
        raise UnsupportedOrderError(f"supported moment orders are 1..4, got {n}")
    return dict(_weingarten_table(n, int(d)))


def weingarten(alpha: Permutation, d: int) -> float:
    return _weingarten_table(alpha.n, int(d))[alpha]


@dataclass
class MomentReport:
    """Closed-form value of a Haar moment next to its Monte Carlo estimate."""

    closed_form: complex
    monte_carlo_mean: complex
    monte_carlo_stderr: float
    samples: int

    def deviation_sigmas(self) -> float:
        if self.monte_carlo_stderr == 0.0:
            return 0.0 if self.closed_form == self.monte_carlo_mean else np.inf
        return abs(self.closed_form - self.monte_carlo_mean) / self.monte_carlo_stderr


def haar_moment(a_list, b_list) -> complex:
    """Closed form of E_U[Tr(U B_1 U^+ A_1 U B_2 U^+ A_2 ... U B_n U^+ A_n)].

    Equals sum over permutation pairs (a, b) of
    W(b a^-1, d) Tr_{b^-1}(B_1..B_n) Tr_{a g_n}(A_1..A_n) with g_n the full
    cycle (1 2 ... n); supported for n <= 4.
    """
    a_ms = [linalg.as_matrix(m) for m in a_list]
    b_ms = [linalg.as_matrix(m) for m in b_list]
    n = len(a_ms)
    if n != len(b_ms) or n < 1:
        raise ShapeError("a_list and b_list must have equal positive length")
    if n > 4:
        raise UnsupportedOrderError(f"supported moment orders are 1..4, got {n}")
    d = a_ms[0].shape[0]
    for m in a_ms + b_ms:
        if m.shape != (d, d):
            raise ShapeError("all matrices must be d x d")
    table = weingarten_matrix(n, d)
    gamma = Permutation.from_cycles(n, tuple(range(1, n + 1)))
    total = 0.0 + 0.0j
    for alpha in all_permutations(n):
        tr_a = tr_alpha(a_ms, alpha.compose(gamma))
        for beta in all_permutations(n):
            w = table[beta.compose(alpha.inverse())]
            total += w * tr_alpha(b_ms, beta.inverse()) * tr_a
    return complex(total)


def _moment_mc(a_ms, b_ms, samples: int, rng: RngStream, batch: int = 2000):
    d = a_ms[0].shape[0]
    vals = np.empty(samples, dtype=complex)
    done = 0
    while done < samples:
        m = min(batch, samples - done)
        us = haar_unitary_batch(d, m, rng)
        us_h = us.conj().transpose(0, 2, 1)
        prod = np.broadcast_to(np.eye(d, dtype=complex), (m, d, d))
        for a, b in zip(a_ms, b_ms):
            prod = prod @ us @ b @ us_h @ a
        vals[done : done + m] = np.einsum("sii->s", prod)
        done += m
    return vals


def haar_moment_report(a_list, b_list, samples: int, rng: RngStream) -> MomentReport:
    """haar_moment next to a Monte Carlo estimate over ``samples`` Haar unitaries."""
    a_ms = [linalg.as_matrix(m) for m in a_list]
    b_ms = [linalg.as_matrix(m) for m in b_list]
    closed = haar_moment(a_ms, b_ms)
    vals = _moment_mc(a_ms, b_ms, samples, rng)
    mean = complex(vals.mean())
    stderr = float(
        np.sqrt((vals.real.var(ddof=1) + vals.imag.var(ddof=1)) / samples)
    )
    return MomentReport(closed, mean, stderr, samples)


# ---------------------------------------------------------------------------
# Fourth-moment function F over S_4.
# ---------------------------------------------------------------------------

def _guard_f_alpha(ch: KrausChannel):
    cost = ch.kraus_rank**4 * ch.d_in**2
    if cost > F_ALPHA_GUARD:
        raise TooLargeError(
            f"K^4 d_in^2 = {cost} exceeds {F_ALPHA_GUARD}; truncate the Kraus set first"
        )


def f_alpha(ch: KrausChannel, alpha: Permutation) -> complex:
    """Contracted evaluation of F(alpha) for alpha in S_4.

    The four slot matrices are M_1 = A_l'^+ |j><i| A_k, M_2 = A_k^+ A_l,
    M_3 = A_l^+ |i><j| A_k', M_4 = A_k'^+ A_l'; the sum over i, j and the
    four Kraus labels is carried out as one einsum whose wiring is derived
    from the cycle structure of alpha (column index of slot t = row index of
    slot alpha(t)).
    """
    if alpha.n != 4:
        raise DomainError("alpha must act on 4 elements")
    _guard_f_alpha(ch)
    a = ch.kraus
    ac = a.conj()
    # Letters: kraus k,l,k',l' -> a,b,c,d; i,j -> e,f; inner d_out sums -> g,h;
    # row index of slot t -> w,x,y,z and column of slot t = row of alpha(t).
    rows = ["w", "x", "y", "z"]
    cols = [rows[alpha.images[t]] for t in range(4)]
    spec = ",".join(
        [
            f"df{rows[0]}",  # conj A_l' [j, p1]
            f"ae{cols[0]}",  # A_k [i, q1]
            f"ag{rows[1]}",  # conj A_k [a2, p2]
            f"bg{cols[1]}",  # A_l [a2, q2]
            f"be{rows[2]}",  # conj A_l [i, p3]
            f"cf{cols[2]}",  # A_k' [j, q3]
            f"ch{rows[3]}",  # conj A_k' [a4, p4]
            f"dh{cols[3]}",  # A_l' [a4, q4]
        ]
    )
    return complex(
        np.einsum(
            spec + "->", ac, a, ac, a, ac, a, ac, a, optimize="greedy"
        )
    )


def f_alpha_direct(ch: KrausChannel, alpha: Permutation) -> complex:
    """Literal sextuple-sum reference evaluation of F(alpha); for differential
    testing on small channels only."""
    if alpha.n != 4:
        raise DomainError("alpha must act on 4 elements")
    _guard_f_alpha(ch)
    a = ch.kraus
    kk = ch.kraus_rank
    total = 0.0 + 0.0j
    eye = np.eye(ch.d_out, dtype=complex)
    for i in range(ch.d_out):
        for j in range(ch.d_out):
            eij = np.outer(eye[j], eye[i])
            eji = np.outer(eye[i], eye[j])
            for k in range(kk):
                for l in range(kk):
                    m2 = a[k].conj().T @ a[l]
                    for kp in range(kk):
                        m3 = a[l].conj().T @ eji @ a[kp]
                        for lp in range(kk):
                            m1 = a[lp].conj().T @ eij @ a[k]
                            m4 = a[kp].conj().T @ a[lp]
                            total += tr_alpha([m1, m2, m3, m4], alpha)
    return complex(total)


def f_alpha_all(ch: KrausChannel) -> dict:
    """F(alpha) for every alpha in S_4."""
    return {alpha: f_alpha(ch, alpha) for alpha in all_permutations(4)}


def second_moment_purity(ch: KrausChannel) -> float:
    """E_phi[(Tr(N(|phi><phi|)^2))^2] via the S_4 sum,
    sum_a F(a) / (d (d+1) (d+2) (d+3)) with d = d_in."""
    d = ch.d_in
    total = sum(f_alpha_all(ch).values())
    value = total / (d * (d + 1) * (d + 2) * (d + 3))
    if abs(value.imag) > 1e-8 * max(1.0, abs(value.real)):
        raise DomainError(f"second moment has non-real value {value}")
    return float(value.real)


def second_moment_purity_mc(
    ch: KrausChannel, samples: int, rng: RngStream, batch: int = 4000
) -> MomentReport:
    """Monte Carlo estimate of E[(Tr(N(|phi><phi|)^2))^2] over Haar inputs."""
    closed = second_moment_purity(ch)
    vals = np.empty(samples)
    done = 0
    while done < samples:
        m = min(batch, samples - done)
        phis = haar_state_batch(ch.d_in, m, rng)
        outs = ch.apply_pure_batch(phis)
        purity = np.einsum("sab,sba->s", outs, outs).real
        vals[done : done + m] = purity**2
        done += m
    mean = float(vals.mean())
    stderr = float(vals.std(ddof=1) / np.sqrt(samples))
    return MomentReport(complex(closed), complex(mean), stderr, samples)


def haar_mean_output_distance_sq(ch: KrausChannel) -> float:
    """Closed form of E_phi ||N(|phi><phi|) - I/d_out||_2^2:
    (||M(I)||_2^2 + d_in^2 ||J_M||_2^2) / (d_in (d_in + 1)) with M = N - D."""
    d_in, d_out = ch.d_in, ch.d_out
    m_sq = output_mean_offset(ch) ** 2
    dim = d_in * d_out
    j_diff = choi(ch).mat - np.eye(dim) / dim
    return (m_sq + d_in**2 * linalg.schatten_norm(j_diff, 2) ** 2) / (
        d_in * (d_in + 1)
    )


def haar_mean_output_distance_sq_mc(
    ch: KrausChannel, samples: int, rng: RngStream, batch: int = 4000
) -> MomentReport:
    closed = haar_mean_output_distance_sq(ch)
    vals = np.empty(samples)
    eye = np.eye(ch.d_out) / ch.d_out
    done = 0
    while done < samples:
        m = min(batch, samples - done)
        phis = haar_state_batch(ch.d_in, m, rng)
        outs = ch.apply_pure_batch(phis) - eye
        vals[done : done + m] = np.einsum("sab,sab->s", outs, outs.conj()).real
        done += m
    mean = float(vals.mean())
    stderr = float(vals.std(ddof=1) / np.sqrt(samples))
    return MomentReport(complex(closed), complex(mean), stderr, samples)


# The eight bound classes for F over S_4, keyed by representative cycles.
# Each bound is a function of (d_in, d_out, m, eta).
_F_BOUND_CLASSES = [
    ("(13)", [((1, 3),)], lambda di, do, m, e: (di / do + e**2) ** 2),
    (
        "id,(132),(314),(24)(13)",
        [(), ((1, 3, 2),), ((3, 1, 4),), ((2, 4), (1, 3))],
        lambda di, do, m, e: (di / do + e**2) / do + e**2 / do + 5 * e**4,
    ),
    (
        "(312),(134)",
        [((3, 1, 2),), ((1, 3, 4),)],
        lambda di, do, m, e: (di**2 / do + m**2) * (di / do + e**2),
    ),
    ("(1234)", [((1, 2, 3, 4),)], lambda di, do, m, e: (di**2 / do + m**2) ** 2),
    (
        "(24),(1432)",
        [((2, 4),), ((1, 4, 3, 2),)],
        lambda di, do, m, e: di**2 / do**2 + 2 * m**2 / do + 25 * e**4,
    ),
    (
        "(142),(243)",
        [((1, 4, 2),), ((2, 4, 3),)],
        lambda di, do, m, e: (di / do + e**2) / do + e**2 / do + 5 * e**4,
    ),
    (
        "(14),(12),(23),(34),(1324),(1423),(1243),(1342)",
        [
            ((1, 4),),
            ((1, 2),),
            ((2, 3),),
            ((3, 4),),
            ((1, 3, 2, 4),),
            ((1, 4, 2, 3),),
            ((1, 2, 4, 3),),
            ((1, 3, 4, 2),),
        ],
        lambda di, do, m, e: di**2 / do**2 + di / do * e**2 + m**2 / do + 5 * m * e**3,
    ),
    (
        "(12)(34),(14)(23),(234),(124)",
        [((1, 2), (3, 4)), ((1, 4), (2, 3)), ((2, 3, 4),), ((1, 2, 4),)],
        lambda di, do, m, e: di**3 / do**2 + 2 * di / do * m**2 + m**2 * e**2,
    ),
]


def verify_f_alpha_bounds(ch: KrausChannel, slack: float = 1e-8):
    """Evaluate F(alpha) for all 24 permutations against the table of upper
    bounds in terms of (d_in, d_out, m, eta); returns one record per
    permutation with its margin (bound - Re F)."""
    m = output_mean_offset(ch)
    e = eta(ch)
    records = []
    for class_name, cycle_sets, bound_fn in _F_BOUND_CLASSES:
        bound = float(bound_fn(ch.d_in, ch.d_out, m, e))
        for cycles in cycle_sets:
            alpha = Permutation.from_cycles(4, *cycles)
            value = f_alpha(ch, alpha)
            records.append(
                {
                    "class": class_name,
                    "permutation": alpha,
                    "value": value,
                    "bound": bound,
                    "margin": bound - value.real,
                    "holds": value.real <= bound + slack,
                }
            )
    return records


def variance_ratio_exact(ch: KrausChannel) -> float:
    """Var(X) / E[X]^2 for X = ||N(|phi><phi|) - I/d_out||_2^2 from closed-form
    moments (no Monte Carlo error)."""
    ex = haar_mean_output_distance_sq(ch)
    if ex < 1e-12:
        raise DomainError(
            "channel is (numerically) depolarizing: E[X] < 1e-12, ratio undefined"
        )
    second = second_moment_purity(ch)
    var = second - (ex + 1.0 / ch.d_out) ** 2
    return max(var, 0.0) / ex**2


def variance_ratio_mc(
    ch: KrausChannel, samples: int, rng: RngStream, chunks: int = 10
) -> tuple[float, float]:
    """Monte Carlo estimate of Var(X)/E[X]^2 with a chunked standard error."""
    if samples < 2 * chunks:
        raise DomainError("need at least 2 samples per chunk")
    per = samples // chunks
    ratios = []
    for c in range(chunks):
        phis = haar_state_batch(ch.d_in, per, rng)
        outs = ch.apply_pure_batch(phis) - np.eye(ch.d_out) / ch.d_out
        x = np.einsum("sab,sab->s", outs, outs.conj()).real
        mean = x.mean()
        if mean < 1e-12:
            raise DomainError("E[X] < 1e-12 in a Monte Carlo chunk, ratio undefined")
        ratios.append(x.var(ddof=1) / mean**2)
    ratios = np.asarray(ratios)
    return float(ratios.mean()), float(ratios.std(ddof=1) / np.sqrt(chunks))


def _pair_matrix(ch: KrausChannel) -> np.ndarray:
    """M = sum_k A_k (x) conj(A_k), mapping C^(d_in^2) to C^(d_out^2)."""
    return sum(np.kron(a, a.conj()) for a in ch.kraus)


def verify_m_psi(ch: KrausChannel) -> tuple[float, float, bool]:
    """Check ||M^+ M - (d_in/d_out) |Psi><Psi| ||_1 <= 5 eta^2."""
    m = _pair_matrix(ch)
    psi = linalg.maximally_entangled(ch.d_in)
    target = m.conj().T @ m - (ch.d_in / ch.d_out) * np.outer(psi, psi.conj())
    lhs = linalg.trace_norm_hermitian(target)
    rhs = 5.0 * eta(ch) ** 2
    return lhs, rhs, lhs <= rhs + 1e-8


def verify_mm_star(ch: KrausChannel, tol: float = 1e-8) -> dict:
    """Check the spectral facts about M = sum_k A_k (x) conj(A_k):

    1. sum_i lambda_i(M^+ M) = d_in/d_out + eta^2       (equality)
    2. lambda_1 >= d_in/d_out and sum_{i>1} lambda_i <= eta^2
    3. (d_in/d_out)^2 (1 - |<phi_1|Psi>|^2) <= 2 m^2 eta^2 / d_in + 2 eta^4
    4. <Psi_out| M M^+ |Psi_out> = d_in/d_out           (equality)
    """
    m_mat = _pair_matrix(ch)
    e = eta(ch)
    m_off = output_mean_offset(ch)
    ratio = ch.d_in / ch.d_out

    w, v = linalg.hermitian_eig(m_mat.conj().T @ m_mat)
    psi_in = linalg.maximally_entangled(ch.d_in)
    psi_out = linalg.maximally_entangled(ch.d_out)
    overlap_sq = float(np.abs(v[:, 0].conj() @ psi_in) ** 2)
    mm_dag_expect = float(
        np.real(psi_out.conj() @ (m_mat @ (m_mat.conj().T @ psi_out)))
    )

    checks = {
        "trace_sum": {
            "lhs": float(w.sum()),
            "rhs": ratio + e**2,
            "holds": abs(w.sum() - (ratio + e**2)) <= tol * max(1.0, ratio + e**2),
        },
        "top_eigenvalue": {
            "lhs": float(w[0]),
            "rhs": ratio,
            "holds": w[0] >= ratio - tol,
        },
        "tail_sum": {
            "lhs": float(w[1:].sum()),
            "rhs": e**2,
            "holds": float(w[1:].sum()) <= e**2 + tol,
        },
        "top_vector_overlap": {
            "lhs": ratio**2 * (1.0 - overlap_sq),
            "rhs": 2.0 * m_off**2 * e**2 / ch.d_in + 2.0 * e**4,
            "holds": ratio**2 * (1.0 - overlap_sq)
            <= 2.0 * m_off**2 * e**2 / ch.d_in + 2.0 * e**4 + tol,
        },
        "mm_dag_entangled_expectation": {
            "lhs": mm_dag_expect,
            "rhs": ratio,
            "holds": abs(mm_dag_expect - ratio) <= tol * max(1.0, ratio),
        },
    }
    checks["all_hold"] = all(c["holds"] for c in checks.values() if isinstance(c, dict))
    return checks
