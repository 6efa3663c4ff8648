import json

import pytest

from hypernum import cli, runners
from hypernum.reports import load_report

REQUIRED_IDS = {"cauchy_formula", "plemelj", "involution", "alpha", "lemma_iterated_zero", "poincare_bertrand",
                "composition", "n1", "n2", "n2sq_nonzero", "k2_double_zero", "cimmino", "fundamental_solution"}


def test_unknown_key_is_named():
    with pytest.raises(cli.ConfigError, match="bogus"):
        cli.resolve({"command": "train", "bogus": "1"})


def test_key_of_other_command_is_named():
    with pytest.raises(cli.ConfigError, match="refinement"):
        cli.resolve({"command": "train", "refinement": "8,8,16"})


@pytest.mark.parametrize("key,value", [("eta", "fast"), ("refinement", "8,8"), ("refinement", "8,8,16"),
                                       ("seed", "-1"), ("checks", "nope")])
def test_bad_values_are_named(key, value):
    with pytest.raises(cli.ConfigError, match=key):
        cli.resolve({"command": "verify-quaternionic" if key in ("refinement", "checks") else "train", key: value})


def test_missing_command():
    with pytest.raises(cli.ConfigError, match="command"):
        cli.resolve({})


def test_precedence_flag_over_file_over_default(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# comment\ncommand = train\nseed = 5\neta = 0.2  # inline\n")
    opts = cli.gather(["--config", str(cfg), "--seed", "7"])
    assert opts["seed"] == 7 and opts["eta"] == 0.2 and opts["epochs"] == 5000 and opts["out"] == "reports"
    opts = cli.gather(["--config", str(cfg), "--set", "eta=0.9"])
    assert opts["eta"] == 0.9 and opts["seed"] == 5


def test_main_exit_code_for_bad_config(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("command = train\nlearning_rate = 3\n")
    assert cli.main(["--config", str(cfg)]) == 2
    assert "learning_rate" in capsys.readouterr().err
    assert cli.main(["--config", str(tmp_path / "missing.cfg")]) == 2


def test_help_lists_defaults(capsys):
    with pytest.raises(SystemExit):
        cli.main(["--help"])
    out = capsys.readouterr().out
    assert "--refinement" in out and "16,16,32" in out and "--workers" in out


def test_train_xor_writes_curves_and_summary(tmp_path):
    code = cli.main(["train", "--task", "xor", "--system", "R", "--seeds", "2", "--out", str(tmp_path)])
    assert code == 0
    recs = load_report(tmp_path / "train_xor_summary.json")
    assert all(set(r) >= {"task", "seed", "tolerance", "measured", "pass"} for r in recs)
    curve = (tmp_path / "loss_xor_R_seed0.csv").read_text().splitlines()
    assert curve[0] == "epoch,loss" and len(curve) > 2


def test_ft_kernels_command(tmp_path):
    assert cli.main(["ft-kernels", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "ft_kernels_triangular.csv").read_text().startswith("degree,offset,tap\n")


def test_verify_schema_on_coarse_grid(tmp_path):
    code = cli.main(["verify-quaternionic", "--refinement", "12,12,24", "--double-refinement", "8,8,16",
                     "--n-nodes", "5", "--out", str(tmp_path)])
    recs = json.loads((tmp_path / "verify_report.json").read_text())
    ids = [r["theorem_id"] for r in recs]
    assert REQUIRED_IDS <= set(ids) and len(ids) == len(set(ids))
    for r in recs:
        assert isinstance(r["pass"], bool)
        assert set(r) >= {"theorem_id", "refinement", "tolerance", "measured", "pass"}
    assert code == (0 if all(r["pass"] for r in recs) else 1)


def test_failed_check_gives_exit_one(tmp_path, capsys):
    code = cli.main(["verify-quaternionic", "--checks", "composition", "--refinement", "12,12,24",
                     "--double-refinement", "8,8,16", "--n-nodes", "3", "--out", str(tmp_path)])
    assert code == 1 and "composition" in capsys.readouterr().out


def test_divergence_gives_exit_three(tmp_path, monkeypatch, capsys):
    def boom(opts, out):
        raise FloatingPointError("overflow")
    monkeypatch.setattr(runners, "run_ode_fit", boom)
    assert cli.main(["ode-fit", "--out", str(tmp_path)]) == 3
    assert "ode-fit" in capsys.readouterr().err
