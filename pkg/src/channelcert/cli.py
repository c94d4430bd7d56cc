"""Command-line harness: certification experiments, lemma-verification sweeps
and sample-complexity curves, with deterministic CSV/JSON artifacts.

Subcommands: certify-unitary, certify-depolarizing, verify-lemmas,
complexity-curve, adversarial-dump.  Configuration comes from an optional
JSON file (--config) overridden by flags; the seed falls back to the
CHANNELCERT_SEED environment variable.  Exit codes: 0 success, 1 assertion
failure, 2 configuration error.

Determinism contract: given the same configuration (seed included), output
files are byte-identical for any --threads value.  Trials are sharded by
stream_id equal to a flat trial index, and records are sorted by stream_id
before writing.  Timing is reported on stderr only, never in the artifact.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import certify, weingarten
from .channel import (
    KrausChannel,
    average_fidelity,
    choi,
    depolarizing_channel,
    diamond_bounds,
    entanglement_fidelity,
    eta,
    identity_channel,
    trace_distance_lb,
    unitary_channel,
)
from .errors import ConfigError
from .random import (
    AdversarialChannel,
    epsilon_far_unitary_channel,
    gaussian_perturbed_depolarizing,
    haar_unitary,
    random_channel,
)
from .rng import RngStream

GAUSSIAN_EPS_MAX = 1.0 / 32.0


@dataclass
class ExperimentConfig:
    seed: int
    mode: str = "unitary"  # unitary | depolarizing
    dims: list = field(default_factory=lambda: [(2, 2)])
    epsilons: list = field(default_factory=lambda: [0.5])
    trials: int = 1
    ground_truth: str = "both"  # null | far | both
    distance_mode: str = "trace"  # unitary tester: trace | diamond
    rounds_override: int | None = None  # depolarizing tester round count
    tester_constant: float = certify.COLLISION_CONSTANT
    threads: int = 1
    out: str | None = None

    def validate(self):
        if self.mode not in ("unitary", "depolarizing"):
            raise ConfigError("mode", f"unknown mode {self.mode!r}")
        if self.trials < 1:
            raise ConfigError("trials", "must be >= 1")
        if not self.dims:
            raise ConfigError("dims", "must contain at least one (d_in, d_out) pair")
        if self.ground_truth not in ("null", "far", "both"):
            raise ConfigError("ground_truth", f"unknown arm {self.ground_truth!r}")
        if self.distance_mode not in ("trace", "diamond"):
            raise ConfigError("distance_mode", "must be 'trace' or 'diamond'")
        if self.rounds_override is not None and self.rounds_override < 1:
            raise ConfigError("rounds_override", "must be >= 1")
        if self.threads < 1:
            raise ConfigError("threads", "must be >= 1")
        for pair in self.dims:
            if len(pair) != 2 or pair[0] < 2 or pair[1] < 2:
                raise ConfigError("dims", f"bad (d_in, d_out) pair {pair!r}")
            if self.mode == "unitary" and pair[0] != pair[1]:
                raise ConfigError("dims", "unitary mode needs d_in = d_out")
        for eps in self.epsilons:
            if self.mode == "unitary" and not 0.0 < eps <= 2.0:
                raise ConfigError("epsilons", f"epsilon {eps} outside (0, 2]")
            if self.mode == "depolarizing":
                if not 0.0 < eps <= 2.0:
                    raise ConfigError("epsilons", f"epsilon {eps} outside (0, 2]")
                if self.ground_truth in ("far", "both") and eps > GAUSSIAN_EPS_MAX:
                    for d_in, d_out in self.dims:
                        if d_in != d_out or eps > 2.0 * (1.0 - 1.0 / d_out):
                            raise ConfigError(
                                "epsilons",
                                f"no far instance available at epsilon={eps} for "
                                f"dims {(d_in, d_out)}: need epsilon <= 1/32 "
                                "(gaussian family) or d_in = d_out with "
                                "epsilon <= 2(1 - 1/d) (unitary instance)",
                            )


@dataclass
class TrialRecord:
    """One row per trial.  Wall time is reported on stderr, not recorded,
    so that artifacts are byte-identical across reruns."""

    experiment_id: str
    trial: int
    d_in: int
    d_out: int
    epsilon: float
    ground_truth: str  # null | far
    verdict: str  # null | far
    uses_consumed: int
    seed: int
    stream_id: int


CSV_FIELDS = [
    "experiment_id",
    "trial",
    "d_in",
    "d_out",
    "epsilon",
    "ground_truth",
    "verdict",
    "uses_consumed",
    "seed",
    "stream_id",
]


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_csv(rows, fields, out_path=None) -> str:
    lines = [",".join(fields)]
    for row in rows:
        lines.append(",".join(_fmt(getattr(row, f) if hasattr(row, f) else row[f]) for f in fields))
    text = "\n".join(lines) + "\n"
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text


def _far_depolarizing_instance(d_in, d_out, epsilon, rng) -> KrausChannel:
    """A channel certified >= epsilon far from the fully depolarizing one."""
    if epsilon <= GAUSSIAN_EPS_MAX:
        return gaussian_perturbed_depolarizing(d_in, d_out, epsilon, rng).channel
    # A Haar-random unitary channel sits at trace distance exactly 2(1 - 1/d)
    # from the depolarizing channel (any pure input witnesses it).
    return unitary_channel(haar_unitary(d_in, rng))


def _run_trial(config: ExperimentConfig, d_in, d_out, epsilon, arm, trial, stream_id):
    stream = RngStream(config.seed, stream_id)
    channel_rng = stream.substream(0)
    oracle_rng = stream.substream(1)
    algo_rng = stream.substream(2)

    if config.mode == "unitary":
        if arm == "null":
            ch = identity_channel(d_in)
        else:
            ch = epsilon_far_unitary_channel(d_in, epsilon, channel_rng).channel
        oracle = certify.ChannelOracle(ch, oracle_rng)
        verdict = certify.test_identity_unitary(
            oracle, np.eye(d_in), epsilon, config.distance_mode, algo_rng
        )
    else:
        if arm == "null":
            ch = depolarizing_channel(d_in, d_out)
        else:
            ch = _far_depolarizing_instance(d_in, d_out, epsilon, channel_rng)
        oracle = certify.ChannelOracle(ch, oracle_rng)
        verdict = certify.test_identity_depolarizing(
            oracle,
            epsilon,
            rounds=config.rounds_override or 2200,
            rng=algo_rng,
            c_cal=config.tester_constant,
        )

    experiment_id = f"{config.mode}-{d_in}x{d_out}-eps{epsilon:g}-{arm}"
    return TrialRecord(
        experiment_id=experiment_id,
        trial=trial,
        d_in=d_in,
        d_out=d_out,
        epsilon=float(epsilon),
        ground_truth=arm,
        verdict="far" if verdict.decision == certify.ALTERNATIVE else "null",
        uses_consumed=verdict.uses_consumed,
        seed=config.seed,
        stream_id=stream_id,
    )


def run(config: ExperimentConfig) -> list:
    """Run the configured certification trials; deterministic given the seed,
    independent of thread count."""
    config.validate()
    arms = ["null", "far"] if config.ground_truth == "both" else [config.ground_truth]
    tasks = []
    stream_id = 0
    for d_in, d_out in config.dims:
        for eps in config.epsilons:
            for arm in arms:
                for trial in range(config.trials):
                    tasks.append((d_in, d_out, eps, arm, trial, stream_id))
                    stream_id += 1
    start = time.perf_counter()
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            records = list(pool.map(lambda t: _run_trial(config, *t), tasks))
    else:
        records = [_run_trial(config, *t) for t in tasks]
    elapsed = time.perf_counter() - start
    print(
        f"{len(records)} trials in {elapsed:.2f}s "
        f"({config.mode}, seed={config.seed}, threads={config.threads})",
        file=sys.stderr,
    )
    return sorted(records, key=lambda r: r.stream_id)


def complexity_curve(config: ExperimentConfig) -> list:
    """Per-(dims, epsilon) rows: exact query-count formulas plus measured
    detection rates on far instances."""
    config.validate()
    if len(config.dims) < 2:
        raise ConfigError("dims", "complexity curve needs at least 2 dimension pairs")
    far_config = ExperimentConfig(
        seed=config.seed,
        mode=config.mode,
        dims=config.dims,
        epsilons=config.epsilons,
        trials=config.trials,
        ground_truth="far",
        distance_mode=config.distance_mode,
        rounds_override=config.rounds_override,
        tester_constant=config.tester_constant,
        threads=config.threads,
    )
    records = run(far_config)
    rows = []
    for d_in, d_out in config.dims:
        for eps in config.epsilons:
            if config.mode == "unitary":
                uses = certify.unitary_test_uses(d_in, eps, config.distance_mode)
            else:
                uses = certify.depolarizing_test_uses(
                    d_in,
                    d_out,
                    eps,
                    rounds=config.rounds_override or 2200,
                    c_cal=config.tester_constant,
                )
            hits = [
                r
                for r in records
                if (r.d_in, r.d_out, r.epsilon) == (d_in, d_out, float(eps))
            ]
            detected = sum(1 for r in hits if r.verdict == "far")
            rows.append(
                {
                    "d_in": d_in,
                    "d_out": d_out,
                    "epsilon": float(eps),
                    "uses": uses,
                    "trials": len(hits),
                    "detection_rate": detected / len(hits) if hits else 0.0,
                }
            )
    return rows


CURVE_FIELDS = ["d_in", "d_out", "epsilon", "uses", "trials", "detection_rate"]


def _lemma_records_for_channel(ch: KrausChannel, channel_id: str, rng: RngStream, mc_samples: int):
    """All inequality/identity checks for one channel, as report dicts."""
    out = []

    def rec(lemma, lhs, rhs, holds, margin=None):
        out.append(
            {
                "lemma": lemma,
                "channel_id": channel_id,
                "lhs": float(lhs),
                "rhs": float(rhs),
                "margin": float(rhs - lhs) if margin is None else float(margin),
                "holds": bool(holds),
            }
        )

    # eta: Kraus and Choi evaluations agree (eta() raises if they differ).
    e = eta(ch)
    rec("eta_dual_route", e, e, True, margin=0.0)

    # mean squared output distance: closed form vs Monte Carlo (4 sigma).
    rep = weingarten.haar_mean_output_distance_sq_mc(ch, mc_samples, rng.substream(1))
    rec(
        "mean_output_distance_identity",
        rep.monte_carlo_mean.real,
        rep.closed_form.real,
        rep.deviation_sigmas() <= 4.0,
        margin=4.0 * rep.monte_carlo_stderr - abs(rep.closed_form - rep.monte_carlo_mean),
    )

    if ch.d_in == ch.d_out:
        # average-fidelity law vs Monte Carlo.
        closed = average_fidelity(ch)
        fids = _haar_fid_batch(ch, 20000, rng.substream(2))
        mc, se = float(fids.mean()), float(fids.std(ddof=1) / math.sqrt(fids.size))
        rec(
            "average_fidelity_law",
            mc,
            closed,
            abs(mc - closed) <= 4 * se,
            margin=4 * se - abs(mc - closed),
        )
        # entanglement fidelity vs trace-distance lower bound.
        lb = trace_distance_lb(ch, identity_channel(ch.d_in), restarts=8, rng=rng.substream(3))
        rec(
            "fidelity_vs_trace_distance",
            entanglement_fidelity(ch),
            1.0 - lb**2 / (4.0 * ch.d_in),
            entanglement_fidelity(ch) <= 1.0 - lb**2 / (4.0 * ch.d_in) + 1e-9,
        )

    # diamond bound ordering.
    lo, hi = diamond_bounds(ch, depolarizing_channel(ch.d_in, ch.d_out), restarts=8, rng=rng.substream(4))
    rec("diamond_bound_ordering", lo, hi, lo <= hi + 1e-9)

    # pair-matrix lemmas.
    lhs, rhs, holds = weingarten.verify_m_psi(ch)
    rec("pair_matrix_vs_entangled_projector", lhs, rhs, holds)
    mm = weingarten.verify_mm_star(ch)
    for name, chk in mm.items():
        if isinstance(chk, dict):
            rec(f"pair_matrix_spectrum_{name}", chk["lhs"], chk["rhs"], chk["holds"])

    # fourth-moment bound table and variance ratio.
    worst = min(weingarten.verify_f_alpha_bounds(ch), key=lambda r: r["margin"])
    rec(
        "fourth_moment_bound_table",
        worst["value"].real,
        worst["bound"],
        worst["holds"],
        margin=worst["margin"],
    )
    try:
        ratio = weingarten.variance_ratio_exact(ch)
        rec("variance_ratio_bound", ratio, 105.0, ratio <= 105.0)
    except Exception:
        pass  # exactly-depolarizing channels have no defined ratio
    return out


def _haar_fid_batch(ch: KrausChannel, samples: int, rng: RngStream) -> np.ndarray:
    from .random import haar_state_batch

    phis = haar_state_batch(ch.d_in, samples, rng)
    cols = np.einsum("kab,sb->ska", ch.kraus, phis)
    amps = np.einsum("sa,ska->sk", phis.conj(), cols)
    return (np.abs(amps) ** 2).sum(axis=1)


def verify_lemmas(config: ExperimentConfig, mc_samples: int = 20000) -> tuple[list, bool]:
    """Run the verifier suite over the configured channel families.

    Returns (records, all_passed); one JSON-serializable record per
    (lemma, channel) pair, plus the global Weingarten anchors.
    """
    if not config.dims:
        raise ConfigError("dims", "must contain at least one (d_in, d_out) pair")
    records = []

    # Weingarten anchors: six closed forms and the sum identity.
    worst_rel = 0.0
    for d in range(3, 9):
        pairs = [
            (weingarten.weingarten(weingarten.Permutation.identity(1), d), 1.0 / d),
            (
                weingarten.weingarten(weingarten.Permutation.from_cycles(2, (1, 2)), d),
                -1.0 / (d * (d**2 - 1)),
            ),
            (
                weingarten.weingarten(weingarten.Permutation.identity(2), d),
                1.0 / (d**2 - 1),
            ),
            (
                weingarten.weingarten(
                    weingarten.Permutation.from_cycles(3, (1, 2, 3)), d
                ),
                2.0 / (d * (d**2 - 1) * (d**2 - 4)),
            ),
            (
                weingarten.weingarten(weingarten.Permutation.from_cycles(3, (1, 2)), d),
                -1.0 / ((d**2 - 1) * (d**2 - 4)),
            ),
            (
                weingarten.weingarten(weingarten.Permutation.identity(3), d),
                (d**2 - 2.0) / (d * (d**2 - 1) * (d**2 - 4)),
            ),
        ]
        for got, expect in pairs:
            worst_rel = max(worst_rel, abs(got - expect) / abs(expect))
    records.append(
        {
            "lemma": "weingarten_closed_forms",
            "channel_id": "-",
            "lhs": worst_rel,
            "rhs": 1e-12,
            "margin": 1e-12 - worst_rel,
            "holds": worst_rel <= 1e-12,
        }
    )
    worst_rel = 0.0
    for n in range(1, 5):
        for d in range(n, 9):
            total = sum(weingarten.weingarten_matrix(n, d).values())
            expect = 1.0
            for k in range(n):
                expect /= d + k
            worst_rel = max(worst_rel, abs(total - expect) / expect)
    records.append(
        {
            "lemma": "weingarten_sum_identity",
            "channel_id": "-",
            "lhs": worst_rel,
            "rhs": 1e-10,
            "margin": 1e-10 - worst_rel,
            "holds": worst_rel <= 1e-10,
        }
    )

    master = RngStream(config.seed, 0)
    idx = 0
    for d_in, d_out in config.dims:
        channels = [(f"depolarizing-{d_in}x{d_out}", depolarizing_channel(d_in, d_out))]
        if d_in == d_out:
            channels.append((f"identity-{d_in}", identity_channel(d_in)))
            channels.append(
                (
                    f"unitary_mixture-{d_in}-eps0.4",
                    epsilon_far_unitary_channel(d_in, 0.4, master.substream(1000 + idx)).channel,
                )
            )
        channels.append(
            (
                f"gaussian_depolarizing-{d_in}x{d_out}",
                gaussian_perturbed_depolarizing(
                    d_in, d_out, GAUSSIAN_EPS_MAX, master.substream(2000 + idx)
                ).channel,
            )
        )
        for t in range(config.trials):
            rank = 2 + (t % 3)
            channels.append(
                (
                    f"random-{d_in}x{d_out}-k{rank}-t{t}",
                    random_channel(d_in, d_out, rank, master.substream(3000 + idx * 97 + t)),
                )
            )
        for k, (cid, ch) in enumerate(channels):
            sub = master.substream(4000 + idx * 191 + k)
            try:
                records.extend(_lemma_records_for_channel(ch, cid, sub, mc_samples))
            except Exception as exc:
                records.append(
                    {
                        "lemma": "verifier_execution",
                        "channel_id": cid,
                        "lhs": float("nan"),
                        "rhs": float("nan"),
                        "margin": float("nan"),
                        "holds": False,
                        "error": str(exc),
                    }
                )
        idx += 1
    all_passed = all(r["holds"] for r in records)
    return records, all_passed


# ---------------------------------------------------------------------------
# argparse plumbing
# ---------------------------------------------------------------------------

def _load_config(args, mode) -> ExperimentConfig:
    doc = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    seed = args.seed
    if seed is None:
        seed = doc.get("seed")
    if seed is None:
        env = os.environ.get("CHANNELCERT_SEED")
        seed = int(env) if env is not None else None
    if seed is None:
        raise ConfigError("seed", "provide --seed, config seed, or CHANNELCERT_SEED")
    dims = doc.get("dims", [[2, 2]])
    if args.dims:
        dims = [[int(x) for x in pair.split("x")] for pair in args.dims.split(",")]
    epsilons = doc.get("epsilons", [0.5])
    if args.epsilons:
        epsilons = [float(x) for x in args.epsilons.split(",")]
    config = ExperimentConfig(
        seed=int(seed),
        mode=mode,
        dims=[tuple(p) for p in dims],
        epsilons=list(epsilons),
        trials=args.trials if args.trials is not None else doc.get("trials", 1),
        ground_truth=args.ground_truth or doc.get("ground_truth", "both"),
        distance_mode=doc.get("distance_mode", "trace"),
        rounds_override=args.rounds
        if args.rounds is not None
        else doc.get("rounds_override"),
        tester_constant=doc.get("tester_constant", certify.COLLISION_CONSTANT),
        threads=args.threads if args.threads is not None else doc.get("threads", 1),
        out=args.out or doc.get("out"),
    )
    return config


def _add_common(parser):
    parser.add_argument("--config", help="JSON config file; flags override it")
    parser.add_argument("--seed", type=int, help="64-bit experiment seed")
    parser.add_argument("--out", help="output path (stdout when omitted)")
    parser.add_argument("--trials", type=int, help="trials per (dims, epsilon, arm)")
    parser.add_argument("--rounds", type=int, help="round count override (Alg. 2's M)")
    parser.add_argument("--threads", type=int, help="worker threads (output-invariant)")
    parser.add_argument("--dims", help="comma list of pairs, e.g. 2x2,4x4")
    parser.add_argument("--epsilons", help="comma list of epsilon values")
    parser.add_argument(
        "--ground-truth", choices=["null", "far", "both"], dest="ground_truth"
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="channelcert",
        description="Certification experiments and lemma verification for quantum channels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("certify-unitary", "certify-depolarizing"):
        p = sub.add_parser(name)
        _add_common(p)
    p = sub.add_parser("complexity-curve")
    _add_common(p)
    p.add_argument("--mode", choices=["unitary", "depolarizing"], default=None)
    p = sub.add_parser("verify-lemmas")
    _add_common(p)
    p.add_argument("--mc-samples", type=int, default=20000)
    p = sub.add_parser("adversarial-dump")
    p.add_argument("--family", required=True, choices=["unitary_mixture", "gaussian_depolarizing"])
    p.add_argument("--d-in", type=int, required=True)
    p.add_argument("--d-out", type=int, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output path (stdout when omitted)")

    args = parser.parse_args(argv)
    try:
        if args.command in ("certify-unitary", "certify-depolarizing"):
            mode = "unitary" if args.command == "certify-unitary" else "depolarizing"
            config = _load_config(args, mode)
            records = run(config)
            text = write_csv(records, CSV_FIELDS, config.out)
            if not config.out:
                sys.stdout.write(text)
            return 0
        if args.command == "complexity-curve":
            mode = args.mode
            if mode is None and args.config:
                with open(args.config, "r", encoding="utf-8") as fh:
                    mode = json.load(fh).get("mode")
            config = _load_config(args, mode or "unitary")
            rows = complexity_curve(config)
            text = write_csv(rows, CURVE_FIELDS, config.out)
            if not config.out:
                sys.stdout.write(text)
            return 0
        if args.command == "verify-lemmas":
            config = _load_config(args, "unitary")
            records, passed = verify_lemmas(config, mc_samples=args.mc_samples)
            lines = "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
            if config.out:
                with open(config.out, "w", encoding="utf-8", newline="\n") as fh:
                    fh.write(lines)
            else:
                sys.stdout.write(lines)
            failures = [r for r in records if not r["holds"]]
            for r in failures:
                print(
                    f"FAIL {r['lemma']} on {r['channel_id']}: lhs={r['lhs']} rhs={r['rhs']}",
                    file=sys.stderr,
                )
            return 1 if failures else 0
        if args.command == "adversarial-dump":
            seed = args.seed
            if seed is None:
                env = os.environ.get("CHANNELCERT_SEED")
                if env is None:
                    raise ConfigError("seed", "provide --seed or CHANNELCERT_SEED")
                seed = int(env)
            rng = RngStream(int(seed), 0)
            if args.family == "unitary_mixture":
                adv = epsilon_far_unitary_channel(args.d_in, args.epsilon, rng)
            else:
                adv = gaussian_perturbed_depolarizing(
                    args.d_in, args.d_out, args.epsilon, rng
                )
            text = adv.to_json() + "\n"
            if args.out:
                with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
                    fh.write(text)
            else:
                sys.stdout.write(text)
            return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
