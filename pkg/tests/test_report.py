import csv
import math

from pomdpverify import report


RECORD = {
    "model": "toy.pomdp", "mode": "refine", "kind": "Preach",
    "direction": "max", "status": "gap-met",
    "lower": 0.65, "upper": 0.66, "states": 42, "iterations": 2, "time": 1.5,
}
ITERATIONS = [
    {"iteration": 1, "lower": 0.5, "upper": 0.9, "states": 20,
     "explored": 10, "rewired": 0, "cutoff": 3, "time": 0.7,
     "eta": {0: 3}},
    {"iteration": 2, "lower": 0.65, "upper": 0.66, "states": 42,
     "explored": 12, "rewired": 2, "cutoff": 1, "time": 1.5,
     "eta": {0: 6}},
]


def test_csv_schema_and_companion_figure(tmp_path):
    path = tmp_path / "run.csv"
    figure = report.write_csv(str(path), RECORD, ITERATIONS)
    assert figure == str(tmp_path / "run.png")
    assert (tmp_path / "run.png").stat().st_size > 0

    with open(path) as handle:
        rows = list(csv.DictReader(handle))
    assert list(rows[0].keys()) == report.CSV_FIELDS
    assert len(rows) == 3  # two iterations plus the summary row
    assert rows[0]["iteration"] == "1"
    assert rows[1]["upper"] == "0.66"
    summary = rows[-1]
    assert summary["iteration"] == ""
    assert summary["status"] == "gap-met"
    assert float(summary["lower"]) == 0.65


def test_csv_formats_infinity(tmp_path):
    record = dict(RECORD, upper=math.inf)
    path = tmp_path / "inf.csv"
    report.write_csv(str(path), record, [])
    with open(path) as handle:
        rows = list(csv.DictReader(handle))
    assert rows[-1]["upper"] == "inf"


def test_plain_text_log(tmp_path):
    path = tmp_path / "run.log"
    report.write_log(str(path), RECORD, ITERATIONS)
    text = path.read_text()
    assert "iter 1" in text and "iter 2" in text
    assert "final bounds=[0.65, 0.66]" in text
