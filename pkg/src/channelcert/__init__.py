"""channelcert: simulation and verification toolkit for quantum channel
certification.

The package provides dense complex linear algebra primitives (``linalg``),
Kraus/Choi channel machinery and distance bounds (``channel``), deterministic
Haar/Gaussian samplers and adversarial channel families (``random``),
POVM measurement simulation (``povm``), the certification testers and
classical distribution utilities (``certify``), a Weingarten-calculus moment
engine with numerical lemma verifiers (``weingarten``), and a deterministic
experiment harness (``cli``).
"""

from . import certify, channel, cli, linalg, povm, weingarten
from . import random as random  # noqa: PLC0414  (shadows stdlib name on purpose)
from .channel import (
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
    trace_distance_lb,
    unitary_channel,
)
from .certify import (
    ChannelOracle,
    TestVerdict,
    kl_divergence,
    state_cert_2norm,
    test_identity_depolarizing,
    test_identity_unitary,
    tv_distance,
    uniformity_test,
)
from .linalg import fidelity, hermitian_eig, partial_trace, partial_transpose, schatten_norm
from .povm import Povm, conjugated, haar_columns_povm, outcome_distribution, sample_outcome, two_outcome_projector
from .random import (
    AdversarialChannel,
    epsilon_far_unitary_channel,
    gaussian_perturbed_depolarizing,
    haar_state,
    haar_unitary,
    random_channel,
)
from .rng import RngStream
from .weingarten import (
    MomentReport,
    Permutation,
    f_alpha,
    haar_moment,
    second_moment_purity,
    tr_alpha,
    variance_ratio_mc,
    verify_f_alpha_bounds,
    verify_m_psi,
    verify_mm_star,
    weingarten_matrix,
)

__version__ = "0.1.0"
