import csv
import logging

import numpy as np
import pytest

from lfd.checkpoint import HEADER_SIZE, read_checkpoint, write_checkpoint
from lfd.cli import main
from lfd.config import InitialSpec, initial_condition, parse_config
from lfd.errors import CheckpointCorrupt, ParseError, ValidationError
from lfd.grid import build_grid


def test_auto_nu_is_grid_spacing():
    cfg = parse_config("gamma = -1\nn = 25\nr = 6\n")
    assert cfg.nu_value == 0.5


def test_sections_are_organisational():
    cfg = parse_config("[physics]\ngamma = -1.5\nepsilon = 0.05\n[grid]\nn = 9\nr = 4\n[initial]\ninitial = two-bump\n")
    assert (cfg.gamma, cfg.epsilon, cfg.N, cfg.R, cfg.initial.kind) == (-1.5, 0.05, 9, 4.0, "two-bump")


@pytest.mark.parametrize("text,key", [
    ("gamma =\n", "gamma"),
    ("gamma = -2.5\n", "gamma"),
    ("gamma = 0\n", "gamma"),
    ("epsilon = 0.1\n", "gamma"),
    ("gamma = -1\nepsilon = -0.1\n", "epsilon"),
    ("gamma = -1\nepsilon = 0\ninitial = saturated\n", "epsilon"),
    ("gamma = -1\nepsilon = 50\n", "epsilon"),
    ("gamma = -1\nnu = 1.5\n", "nu"),
    ("gamma = -1\ncfl = 0\n", "cfl"),
    ("gamma = -1\nscheme = rk4\n", "scheme"),
    ("gamma = -1\ngama = 1\n", "gama"),
    ("gamma = -1\nn = many\n", "n"),
    ("gamma = -1\ninitial = from-checkpoint\n", "checkpoint"),
    ("gamma = -1\nexp_moment = 0.1\n", "exp_moment"),
])
def test_validation_errors_name_the_key(text, key):
    with pytest.raises(ValidationError) as err:
        parse_config(text)
    assert err.value.key == key


def test_repeated_key_is_parse_error():
    with pytest.raises(ParseError):
        parse_config("gamma = -1\n[x]\ngamma = -1.5\n")


def test_malformed_text_is_parse_error():
    with pytest.raises(ParseError):
        parse_config("gamma -1\n")


def test_two_bump_initial_moments():
    g = build_grid(6.0, 17)
    spec = InitialSpec(kind="two-bump", rho=1.2, u=(0.1, 0.0, -0.2), theta=0.9)
    f = initial_condition(spec, g, 0.05)
    assert f.mass() == pytest.approx(1.2, abs=1e-8)
    np.testing.assert_allclose(f.momentum(), 1.2 * np.array([0.1, 0.0, -0.2]), atol=1e-8)
    u2 = 0.01 + 0.04
    assert f.energy() == pytest.approx(1.2 * (3 * 0.9 + u2), abs=1e-8)


def test_checkpoint_roundtrip_is_bitwise(tmp_path, grid9, rng):
    from lfd.admissible import random_bumps
    f = random_bumps(rng, grid9, 0.05)
    path = tmp_path / "f.lfd"
    write_checkpoint(f, path, gamma=-1.25, t=0.375)
    raw = path.read_bytes()
    assert len(raw) == HEADER_SIZE + 8 * 9 ** 3
    ck = read_checkpoint(path)
    assert np.array_equal(ck.distribution.values, f.values)
    assert ck.distribution.epsilon == 0.05 and ck.gamma == -1.25 and ck.t == 0.375
    assert ck.distribution.grid == grid9


@pytest.mark.parametrize("mangle", [lambda b: b[:-8], lambda b: b[:20], lambda b: b"XXXX" + b[4:]])
def test_corrupt_checkpoints(tmp_path, grid9, mangle):
    from lfd.distribution import Distribution
    path = tmp_path / "f.lfd"
    write_checkpoint(Distribution(grid9, np.zeros(grid9.shape)), path)
    path.write_bytes(mangle(path.read_bytes()))
    with pytest.raises(CheckpointCorrupt):
        read_checkpoint(path)


def test_checkpoint_epsilon_mismatch_warns(tmp_path, grid9, caplog):
    from lfd.distribution import Distribution
    path = tmp_path / "f.lfd"
    write_checkpoint(Distribution(grid9, np.zeros(grid9.shape), 0.1), path)
    with caplog.at_level(logging.WARNING, logger="lfd.checkpoint"):
        ck = read_checkpoint(path, epsilon=0.2)
    assert ck.distribution.epsilon == 0.2
    assert "differs" in caplog.text


# command line ------------------------------------------------------------------

def _config(tmp_path, extra=""):
    path = tmp_path / "run.ini"
    path.write_text("gamma = -1\nepsilon = 0.05\nr = 4\nn = 9\ntrials = 2\n" + extra)
    return str(path)


def test_cli_equilibrium(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["equilibrium", "--config", _config(tmp_path), "--out", str(out)]) == 0
    text = (out / "equilibrium.txt").read_text()
    assert "kappa0" in text and text == capsys.readouterr().out


def test_cli_simulate_t0_single_row(tmp_path):
    out = tmp_path / "o"
    assert main(["simulate", "--config", _config(tmp_path, "t_final = 0\ninitial = two-bump\n"),
                 "--out", str(out)]) == 0
    with open(out / "diagnostics.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 2 and float(rows[1][0]) == 0.0
    assert (out / "snapshots" / "00000.lfd").exists()


def test_cli_simulate_short_run(tmp_path):
    out = tmp_path / "o"
    assert main(["simulate", "--config", _config(tmp_path, "t_final = 0.05\ninitial = two-bump\n"),
                 "--out", str(out)]) == 0
    with open(out / "steps.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert float(rows[-1]["t"]) == 0.05
    masses = [float(r["mass"]) for r in rows]
    assert max(abs(m - masses[0]) for m in masses) <= 1e-12 * masses[0]


def test_cli_verify_is_byte_identical(tmp_path):
    cfg = _config(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["verify", "--config", cfg, "--out", str(a), "--seed", "5"]) == 0
    assert main(["verify", "--config", cfg, "--out", str(b), "--seed", "5"]) == 0
    assert (a / "oracles.jsonl").read_bytes() == (b / "oracles.jsonl").read_bytes()


def test_cli_env_overrides_and_flags_win(tmp_path, monkeypatch):
    cfg = _config(tmp_path)
    env_out = tmp_path / "env"
    monkeypatch.setenv("LFD_CONFIG", cfg)
    monkeypatch.setenv("LFD_OUT", str(env_out))
    assert main(["equilibrium"]) == 0
    assert (env_out / "equilibrium.txt").exists()
    flag_out = tmp_path / "flag"
    assert main(["equilibrium", "--out", str(flag_out)]) == 0
    assert (flag_out / "equilibrium.txt").exists()


def test_cli_bad_env_value_exits_2(tmp_path, monkeypatch):
    monkeypatch.setenv("LFD_SEED", "abc")
    assert main(["verify", "--config", _config(tmp_path)]) == 2


def test_cli_configuration_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("gamma = -3\n")
    assert main(["equilibrium", "--config", str(bad)]) == 2
    assert "gamma" in capsys.readouterr().err
    assert main(["equilibrium", "--config", str(tmp_path / "missing.ini")]) == 2


def test_cli_stepper_failure_exits_1(tmp_path, monkeypatch, capsys):
    import lfd.simulation
    from lfd.errors import BoundViolation

    def failing_step(*args, **kw):
        raise BoundViolation("forced", fmin=-1.0, fmax=1.0)

    monkeypatch.setattr(lfd.simulation, "step", failing_step)
    out = tmp_path / "o"
    assert main(["simulate", "--config", _config(tmp_path, "t_final = 0.1\n"), "--out", str(out)]) == 1
    assert "forced" in capsys.readouterr().err
    with open(out / "diagnostics.csv") as fh:
        assert len(list(csv.reader(fh))) == 2


def test_cli_convergence(tmp_path):
    out = tmp_path / "o"
    assert main(["convergence", "--config", _config(tmp_path, "convergence_n = 9, 11\nmax_pair_n = 11\n"),
                 "--out", str(out)]) == 0
    with open(out / "orders.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert {r["N"] for r in rows} == {"9", "11"}
