import csv

import pytest

from pomdpverify import cli
from pomdpverify.model import make_running_example, serialize_model

TINY = """pomdp 3 2 3
init 0
obs 0 0
obs 1 1
obs 2 2
tr 0 a 1 2/3
tr 0 a 2 1/3
tr 0 b 2 1
tr 1 a 1 1
tr 1 b 1 1
tr 2 a 2 1
tr 2 b 2 1
label target 1
spec max Preach
"""


@pytest.fixture
def tiny_model(tmp_path):
    path = tmp_path / "tiny.pomdp"
    path.write_text(TINY)
    return str(path)


@pytest.fixture
def running_model(tmp_path):
    pomdp, spec = make_running_example()
    path = tmp_path / "running.pomdp"
    path.write_text(serialize_model(pomdp, spec))
    return str(path)


def test_missing_file_errors():
    assert cli.main(["check", "/nonexistent.pomdp"]) == cli.EXIT_ERROR


def test_malformed_model_errors(tmp_path):
    path = tmp_path / "bad.pomdp"
    path.write_text("pomdp 1 1 1\n")
    assert cli.main(["check", str(path)]) == cli.EXIT_ERROR


def test_single_shot_mode(tiny_model, capsys):
    code = cli.main(["check", tiny_model, "--mode", "single-shot",
                     "--resolution", "2"])
    assert code == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "status=" in out and "L=" in out and "U=" in out


def test_refine_mode_with_outputs(running_model, tmp_path, capsys):
    csv_path = tmp_path / "out.csv"
    log_path = tmp_path / "out.log"
    dump_path = tmp_path / "abstraction.txt"
    code = cli.main(["check", running_model, "--mode", "refine",
                     "--time", "20", "--csv", str(csv_path),
                     "--log", str(log_path),
                     "--export-abstraction", str(dump_path)])
    assert code == cli.EXIT_OK
    assert csv_path.exists()
    assert (tmp_path / "out.png").exists()  # figure rendered alongside
    assert log_path.exists()
    assert dump_path.exists()
    with open(csv_path) as handle:
        rows = list(csv.DictReader(handle))
    assert rows
    final = rows[-1]
    assert 0.65 <= float(final["lower"]) <= float(final["upper"]) <= 0.70


def test_belief_explore_mode(running_model, capsys):
    code = cli.main(["check", running_model, "--mode", "belief-explore",
                     "--time", "20", "--max-iters", "6"])
    assert code == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "status=" in out


def test_threshold_exit_code(running_model):
    held = cli.main(["check", running_model, "--time", "20",
                     "--threshold", "<=0.75"])
    assert held == cli.EXIT_THRESHOLD
    refuted = cli.main(["check", running_model, "--time", "20",
                        "--threshold", "<=0.05"])
    assert refuted == cli.EXIT_OK
    lower_held = cli.main(["check", running_model, "--time", "20",
                           "--threshold", ">=0.5"])
    assert lower_held == cli.EXIT_THRESHOLD


def test_heuristic_flags_are_applied():
    args = cli.build_parser().parse_args(
        ["check", "x.pomdp", "--heuristic", "h3", "--rho-gap", "0.2",
         "--triangulation", "static"])
    config = cli._config_from_args(args)
    assert config.f_step == 2.0
    assert config.rho_gap == 0.2
    assert config.scheme == "static"


def test_generate_all_families(tmp_path):
    for family in ("grid-avoid", "maze-like", "refuel-lite", "rocks-lite"):
        out = tmp_path / ("%s.pomdp" % family)
        code = cli.main(["generate", family, "--out", str(out), "--seed", "3"])
        assert code == cli.EXIT_OK
        check = cli.main(["check", str(out), "--mode", "refine",
                          "--time", "5", "--max-iters", "2"])
        assert check in (cli.EXIT_OK, cli.EXIT_THRESHOLD)
