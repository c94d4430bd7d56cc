"""Certification testers operating through a metered channel oracle, plus the
classical uniformity tester and divergence utilities they rely on.

The oracle model is incoherent and ancilla-free: one channel use per step,
each step choosing a pure input state and a POVM on the output and observing
a single outcome.  An ancilla-extended query is available for diagnostics but
is not used by the testers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .channel import KrausChannel
from .errors import DomainError, InsufficientSamplesError, ShapeError
from .povm import Povm, conjugated, haar_columns_povm, outcome_distribution, sample_outcome, two_outcome_projector
from .random import haar_state
from .rng import RngStream

# Calibrated constant of the batched collision tester; fixed once by the grid
# calibration in demos/calibrate_uniformity_constant.py (zero observed errors
# on both sides at C=8 across the (n, gamma, delta) grid, against worst-case
# spread perturbations at TV exactly gamma).
COLLISION_CONSTANT = 8.0

NULL_HYPOTHESIS = "null_hypothesis"
ALTERNATIVE = "alternative"


@dataclass
class ChannelOracle:
    """Metered black-box access to a channel.

    Every query consumes exactly one channel use; a batch of n draws with a
    fixed (state, POVM) pair consumes n uses.  Queries are independent given
    the fixed channel.
    """

    channel: KrausChannel
    rng: RngStream
    uses: int = 0

    @property
    def d_in(self) -> int:
        return self.channel.d_in

    @property
    def d_out(self) -> int:
        return self.channel.d_out

    def query(self, input_state, povm: Povm) -> int:
        return int(self.query_batch(input_state, povm, 1)[0])

    def query_batch(self, input_state, povm: Povm, n: int) -> np.ndarray:
        """n outcomes from measuring n fresh copies of channel(|input><input|)."""
        v = linalg.check_pure_state(input_state)
        if v.shape[0] != self.d_in:
            raise ShapeError(f"input dimension {v.shape[0]} != d_in={self.d_in}")
        if povm.d != self.d_out:
            raise ShapeError(f"POVM dimension {povm.d} != d_out={self.d_out}")
        dist = outcome_distribution(povm, self.channel.apply_pure(v))
        self.uses += n
        return sample_outcome(dist, n, self.rng)

    def query_ancilla(self, input_state, povm: Povm, d_anc: int) -> int:
        """One outcome from measuring (id (x) N)(|input><input|); diagnostics only."""
        v = linalg.check_pure_state(input_state)
        if v.shape[0] != d_anc * self.d_in:
            raise ShapeError("ancilla input dimension mismatch")
        if povm.d != d_anc * self.d_out:
            raise ShapeError("ancilla POVM dimension mismatch")
        phi_mat = v.reshape(d_anc, self.d_in)
        cols = np.einsum("xi,kai->kxa", phi_mat, self.channel.kraus)
        cols = cols.reshape(self.channel.kraus_rank, -1)
        out = np.einsum("ka,kb->ab", cols, cols.conj())
        dist = outcome_distribution(povm, out)
        self.uses += 1
        return int(sample_outcome(dist, 1, self.rng)[0])


@dataclass
class TestVerdict:
    decision: str
    uses_consumed: int
    detail: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "decision": self.decision,
            "uses": self.uses_consumed,
            "rounds": self.detail.get("rounds", []),
        }


def oracle_query(o: ChannelOracle, input_state, povm: Povm) -> int:
    """One incoherent ancilla-free query: Born-rule outcome, counter + 1."""
    return o.query(input_state, povm)


def unitary_test_uses(d: int, epsilon: float, mode: str) -> int:
    """Exact query count of the identity-to-unitary tester."""
    if mode == "trace":
        return math.ceil(4.0 * math.log(3.0) * (d + 1) / epsilon**2)
    if mode == "diamond":
        return math.ceil(16.0 * math.log(3.0) * (d + 1) / epsilon**4)
    raise DomainError(f"mode must be 'trace' or 'diamond', got {mode!r}")


def test_identity_unitary(
    o: ChannelOracle,
    u: np.ndarray,
    epsilon: float,
    mode: str = "trace",
    rng: RngStream | None = None,
) -> TestVerdict:
    """Test H0: channel = U . U^dag against H1: distance >= epsilon.

    Each round draws a Haar input |phi>, measures the output with the
    projector pair {|phi><phi|, I - |phi><phi|} conjugated by U, and rejects
    iff the complement outcome ever occurs.  Under H0 the rejecting outcome
    has Born probability exactly 0, so the false-alarm rate is 0; under H1
    (trace mode, distance d_Tr >= epsilon) the miss probability after
    ceil(4 ln3 (d+1)/eps^2) rounds is at most 1/3 (diamond mode uses
    ceil(16 ln3 (d+1)/eps^4) rounds).
    """
    if not 0.0 < epsilon <= 2.0:
        raise DomainError("epsilon must lie in (0, 2]")
    if o.d_in != o.d_out:
        raise DomainError("identity-to-unitary testing needs d_in = d_out")
    d = o.d_in
    u = linalg.as_matrix(u)
    if u.shape != (d, d):
        raise ShapeError(f"unitary must be {d}x{d}")
    if linalg.schatten_norm(u.conj().T @ u - np.eye(d), np.inf) > 1e-10:
        raise DomainError("reference matrix is not unitary within 1e-10")
    rng = rng if rng is not None else RngStream(0, 0)

    n_rounds = unitary_test_uses(d, epsilon, mode)
    start_uses = o.uses
    outcomes = []
    for _ in range(n_rounds):
        phi = haar_state(d, rng)
        povm = conjugated(two_outcome_projector(phi), u, check_unitary=False)
        outcomes.append(o.query(phi, povm))
    rejections = sum(outcomes)
    decision = ALTERNATIVE if rejections > 0 else NULL_HYPOTHESIS
    return TestVerdict(
        decision,
        o.uses - start_uses,
        {
            "mode": mode,
            "epsilon": epsilon,
            "n_rounds": n_rounds,
            "rejections": rejections,
            "rounds": outcomes,
        },
    )


def uniformity_sample_size(
    n: int, gamma: float, delta: float, c_cal: float = COLLISION_CONSTANT
) -> int:
    """Samples required by the collision tester: ceil(C sqrt(n) ln(1/delta) / gamma^2)."""
    return math.ceil(c_cal * math.sqrt(n) * math.log(1.0 / delta) / gamma**2)


def uniformity_test(
    samples,
    n: int,
    gamma: float,
    delta: float,
    c_cal: float = COLLISION_CONSTANT,
) -> str:
    """Batched collision test of H0: uniform on [n] vs H1: TV >= gamma.

    The samples are split into ceil(log2(1/delta)) batches; each batch
    compares its collision statistic (equal pairs over total pairs) to the
    threshold (1 + gamma^2/2)/n, and the majority vote decides.  The constant
    ``c_cal`` is calibrated so that both error sides stay below delta.
    """
    if not 0.0 < gamma < 1.0:
        raise DomainError("gamma must lie in (0, 1)")
    if not 0.0 < delta < 1.0:
        raise DomainError("delta must lie in (0, 1)")
    if n < 1:
        raise DomainError("alphabet size must be >= 1")
    if n == 1:
        return "uniform"
    idx = np.asarray(samples, dtype=np.int64).reshape(-1)
    required = uniformity_sample_size(n, gamma, delta, c_cal)
    if idx.size < required:
        raise InsufficientSamplesError(
            f"{idx.size} samples given, {required} required for "
            f"(n={n}, gamma={gamma}, delta={delta})",
            required=required,
        )
    if idx.min() < 0 or idx.max() >= n:
        raise DomainError("sample indices outside [0, n)")

    batches = math.ceil(math.log2(1.0 / delta))
    per = required // batches
    threshold = (1.0 + gamma**2 / 2.0) / n
    far_votes = 0
    for b in range(batches):
        chunk = idx[b * per : (b + 1) * per]
        counts = np.bincount(chunk, minlength=n).astype(np.int64)
        pairs = int((counts * (counts - 1)).sum() // 2)
        total_pairs = chunk.size * (chunk.size - 1) // 2
        if pairs / total_pairs > threshold:
            far_votes += 1
    return "far" if far_votes > batches / 2 else "uniform"


def density_matrix_source(rho, rng: RngStream):
    """Adapter: fresh-copy measurement opportunities for a fixed state.

    Returns a callable (povm, n) -> n outcome indices, precomputing the Born
    distribution once per POVM.
    """
    r = linalg.as_matrix(rho)

    def source(povm: Povm, n: int) -> np.ndarray:
        dist = outcome_distribution(povm, r)
        return sample_outcome(dist, n, rng)

    return source


def state_cert_2norm(
    state_source,
    d: int,
    eta: float,
    delta: float,
    rng: RngStream,
    c_cal: float = COLLISION_CONSTANT,
) -> str:
    """Certify h0: rho = I/d against h1: ||rho - I/d||_2 >= eta.

    Draws a fresh POVM from the columns of l = max(1, ceil(ln(2/delta)/4))
    Haar unitaries, measures ceil(C sqrt(l d) ln(1/delta) / (eta/20)^2)
    copies, and runs the collision tester on the outcomes with alphabet l*d
    and gamma = eta/20.  A fresh POVM draw per invocation keeps the
    POVM-failure probability independent across rounds.
    """
    if d < 1:
        raise DomainError("dimension must be >= 1")
    if not 0.0 < eta <= math.sqrt((d - 1) / d) + 1e-12:
        raise DomainError(f"eta must lie in (0, sqrt((d-1)/d)] for d={d}")
    if not 0.0 < delta < 1.0:
        raise DomainError("delta must lie in (0, 1)")
    l = max(1, math.ceil(math.log(2.0 / delta) / 4.0))
    povm = haar_columns_povm(d, l, rng)
    gamma = eta / 20.0
    n_out = l * d
    m = uniformity_sample_size(n_out, gamma, delta, c_cal)
    samples = state_source(povm, m)
    verdict = uniformity_test(samples, n_out, gamma, delta, c_cal)
    return "h0" if verdict == "uniform" else "h1"


def depolarizing_test_uses(
    d_in: int,
    d_out: int,
    epsilon: float,
    rounds: int = 2200,
    c_cal: float = COLLISION_CONSTANT,
) -> int:
    """Exact query count of the identity-to-depolarizing tester."""
    delta = 1.0 / (3.0 * rounds)
    eta = epsilon / (2.0 * math.sqrt(d_out) * d_in)
    l = max(1, math.ceil(math.log(2.0 / delta) / 4.0))
    return rounds * uniformity_sample_size(l * d_out, eta / 20.0, delta, c_cal)


def test_identity_depolarizing(
    o: ChannelOracle,
    epsilon: float,
    rounds: int = 2200,
    rng: RngStream | None = None,
    c_cal: float = COLLISION_CONSTANT,
) -> TestVerdict:
    """Test H0: channel = fully depolarizing against H1: diamond distance >= epsilon.

    Each of the ``rounds`` rounds sends a fresh Haar input |phi_k> and
    certifies the output state against I/d_out in the 2-norm at radius
    eta = epsilon / (2 sqrt(d_out) d_in) with per-round error 1/(3 rounds);
    the tester answers "alternative" iff any round certifies h1.
    """
    if not 0.0 < epsilon <= 2.0:
        raise DomainError("epsilon must lie in (0, 2]")
    if rounds < 1:
        raise DomainError("rounds must be >= 1")
    rng = rng if rng is not None else RngStream(0, 0)
    d_in, d_out = o.d_in, o.d_out
    eta = epsilon / (2.0 * math.sqrt(d_out) * d_in)
    delta = 1.0 / (3.0 * rounds)
    start_uses = o.uses
    round_records = []
    any_far = False
    for k in range(rounds):
        phi = haar_state(d_in, rng)

        def source(povm, n, _phi=phi):
            return o.query_batch(_phi, povm, n)

        verdict = state_cert_2norm(source, d_out, eta, delta, rng, c_cal)
        round_records.append({"round": k, "verdict": verdict})
        if verdict == "h1":
            any_far = True
    decision = ALTERNATIVE if any_far else NULL_HYPOTHESIS
    return TestVerdict(
        decision,
        o.uses - start_uses,
        {
            "epsilon": epsilon,
            "n_rounds": rounds,
            "eta": eta,
            "delta": delta,
            "rounds": round_records,
        },
    )


def _check_distribution(p, name: str) -> np.ndarray:
    a = np.asarray(p, dtype=float).reshape(-1)
    if a.min() < -1e-12:
        raise DomainError(f"{name} has negative entry {a.min()}")
    if abs(a.sum() - 1.0) > 1e-9:
        raise DomainError(f"{name} sums to {a.sum()}, expected 1")
    return np.clip(a, 0.0, None)


def tv_distance(p, q) -> float:
    """Total-variation distance (1/2) sum_i |p_i - q_i|."""
    a = np.asarray(p, dtype=float).reshape(-1)
    b = np.asarray(q, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise ShapeError(f"length mismatch: {a.shape} vs {b.shape}")
    a = _check_distribution(a, "p")
    b = _check_distribution(b, "q")
    return float(0.5 * np.abs(a - b).sum())


def kl_divergence(p, q) -> float:
    """KL(P||Q) = sum_i p_i ln(p_i/q_i) in nats; +inf if Q misses P's support."""
    a = np.asarray(p, dtype=float).reshape(-1)
    b = np.asarray(q, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise ShapeError(f"length mismatch: {a.shape} vs {b.shape}")
    a = _check_distribution(a, "p")
    b = _check_distribution(b, "q")
    support = a > 0
    if np.any(b[support] == 0):
        return float("inf")
    return float(np.sum(a[support] * np.log(a[support] / b[support])))
