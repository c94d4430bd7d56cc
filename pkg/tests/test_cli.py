import hashlib
import json
import math
import os

import numpy as np
import pytest

from channelcert.certify import depolarizing_test_uses, unitary_test_uses
from channelcert.channel import KrausChannel
from channelcert.cli import (
    CSV_FIELDS,
    CURVE_FIELDS,
    ExperimentConfig,
    complexity_curve,
    main,
    run,
    verify_lemmas,
    write_csv,
)
from channelcert.errors import ConfigError


def _config(**kw):
    base = dict(seed=101, mode="unitary", dims=[(2, 2)], epsilons=[0.5], trials=3)
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(ConfigError):
        _config(mode="bogus").validate()
    with pytest.raises(ConfigError):
        _config(trials=0).validate()
    with pytest.raises(ConfigError):
        _config(dims=[]).validate()
    with pytest.raises(ConfigError):
        _config(dims=[(2, 3)]).validate()  # unitary mode needs square
    with pytest.raises(ConfigError):
        _config(epsilons=[3.0]).validate()
    with pytest.raises(ConfigError):
        _config(mode="depolarizing", dims=[(2, 3)], epsilons=[0.5]).validate()
    # depolarizing with small epsilon (gaussian family) is fine
    _config(mode="depolarizing", dims=[(2, 3)], epsilons=[1.0 / 32.0]).validate()


def test_run_unitary_records_and_uses():
    records = run(_config())
    assert len(records) == 6  # 3 trials x 2 arms
    for r in records:
        assert r.uses_consumed == unitary_test_uses(2, 0.5, "trace")
        assert r.verdict in ("null", "far")
    null_records = [r for r in records if r.ground_truth == "null"]
    assert all(r.verdict == "null" for r in null_records)  # zero false alarms


def test_run_deterministic_and_thread_invariant():
    base = _config(trials=4)
    text1 = write_csv(run(base), CSV_FIELDS)
    text2 = write_csv(run(_config(trials=4)), CSV_FIELDS)
    assert hashlib.sha256(text1.encode()).hexdigest() == hashlib.sha256(
        text2.encode()
    ).hexdigest()
    threaded = _config(trials=4, threads=4)
    text3 = write_csv(run(threaded), CSV_FIELDS)
    assert text1 == text3


def test_run_depolarizing_mode():
    config = _config(
        mode="depolarizing",
        dims=[(2, 2)],
        epsilons=[1.0],
        trials=1,
        rounds_override=10,
    )
    records = run(config)
    assert len(records) == 2
    for r in records:
        assert r.uses_consumed == depolarizing_test_uses(2, 2, 1.0, rounds=10)
    far = [r for r in records if r.ground_truth == "far"][0]
    assert far.verdict == "far"


def test_complexity_curve_unitary_scaling():
    config = _config(dims=[(2, 2), (4, 4), (8, 8)], epsilons=[0.4, 0.8], trials=2)
    rows = complexity_curve(config)
    by_key = {(r["d_in"], r["epsilon"]): r["uses"] for r in rows}
    # uses(d) / (d + 1) is constant at fixed epsilon
    for eps in (0.4, 0.8):
        base = 4 * math.log(3) / eps**2
        for d in (2, 4, 8):
            assert by_key[(d, eps)] == math.ceil(base * (d + 1))
    # halving epsilon multiplies uses by ~4 (exactly, modulo ceil)
    for d in (2, 4, 8):
        assert abs(by_key[(d, 0.4)] / by_key[(d, 0.8)] - 4.0) < 0.01


def test_complexity_curve_depolarizing_scaling():
    # formula audit: uses ~ d_in^2 d_out^1.5 at fixed epsilon and rounds
    eps, rounds = 1.0, 50
    u_22 = depolarizing_test_uses(2, 2, eps, rounds=rounds)
    u_42 = depolarizing_test_uses(4, 2, eps, rounds=rounds)
    u_28 = depolarizing_test_uses(2, 8, eps, rounds=rounds)
    assert abs(u_42 / u_22 - 4.0) < 0.05  # d_in doubled -> x4
    assert abs(u_28 / u_22 - 8.0) < 0.05  # d_out x4 -> x4^1.5 = 8


def test_complexity_curve_needs_two_dims():
    with pytest.raises(ConfigError):
        complexity_curve(_config(dims=[(2, 2)]))


def test_verify_lemmas_quick():
    config = _config(mode="depolarizing", dims=[(2, 2)], epsilons=[1.0 / 32.0], trials=2)
    records, passed = verify_lemmas(config, mc_samples=4000)
    assert passed, [r for r in records if not r["holds"]]
    lemmas = {r["lemma"] for r in records}
    assert "weingarten_closed_forms" in lemmas
    assert "variance_ratio_bound" in lemmas
    assert "fourth_moment_bound_table" in lemmas


def test_corrupted_kraus_reports_residual():
    from channelcert.channel import identity_channel

    good = identity_channel(2)
    with pytest.raises(Exception, match="deviates from identity"):
        KrausChannel(2, 2, good.kraus * 1.05)


def test_cli_main_csv_and_exit_codes(tmp_path):
    out = tmp_path / "trials.csv"
    code = main(
        [
            "certify-unitary",
            "--seed",
            "7",
            "--dims",
            "2x2",
            "--epsilons",
            "0.5",
            "--trials",
            "2",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(CSV_FIELDS)
    assert len(lines) == 5

    # rerun: byte-identical artifact
    out2 = tmp_path / "trials2.csv"
    main(
        [
            "certify-unitary",
            "--seed",
            "7",
            "--dims",
            "2x2",
            "--epsilons",
            "0.5",
            "--trials",
            "2",
            "--threads",
            "3",
            "--out",
            str(out2),
        ]
    )
    assert out.read_bytes() == out2.read_bytes()


def test_cli_main_config_error():
    assert main(["certify-unitary", "--dims", "2x2"]) == 2  # no seed anywhere
    assert (
        main(["certify-unitary", "--seed", "3", "--dims", "2x3", "--epsilons", "0.5"])
        == 2
    )


def test_cli_env_seed(tmp_path, monkeypatch):
    monkeypatch.setenv("CHANNELCERT_SEED", "55")
    out = tmp_path / "env.csv"
    code = main(
        [
            "certify-unitary",
            "--dims",
            "2x2",
            "--epsilons",
            "0.9",
            "--trials",
            "1",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    assert ",55," in out.read_text().splitlines()[1]


def test_cli_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(
        json.dumps(
            {
                "seed": 11,
                "dims": [[2, 2]],
                "epsilons": [0.9],
                "trials": 5,
                "ground_truth": "null",
            }
        )
    )
    out = tmp_path / "from_config.csv"
    code = main(
        ["certify-unitary", "--config", str(cfg), "--trials", "2", "--out", str(out)]
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 3  # flags win: 2 trials, null arm only


def test_cli_adversarial_dump(tmp_path):
    out = tmp_path / "adv.json"
    code = main(
        [
            "adversarial-dump",
            "--family",
            "gaussian_depolarizing",
            "--d-in",
            "2",
            "--d-out",
            "8",
            "--epsilon",
            str(1.0 / 32.0),
            "--seed",
            "3",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["family"] == "gaussian_depolarizing"
    ch = KrausChannel.from_json(
        json.dumps({k: doc[k] for k in ("d_in", "d_out", "kraus")})
    )
    assert (ch.d_in, ch.d_out) == (2, 8)
    assert "w" in doc["witness"] and "direction" in doc["witness"]


def test_cli_verify_lemmas_exit_zero(tmp_path):
    out = tmp_path / "lemmas.jsonl"
    code = main(
        [
            "verify-lemmas",
            "--seed",
            "9",
            "--dims",
            "2x2",
            "--trials",
            "1",
            "--mc-samples",
            "3000",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    records = [json.loads(line) for line in out.read_text().splitlines()]
    assert all(r["holds"] for r in records)
