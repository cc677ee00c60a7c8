"""Machine-readable run records: CSV output plus a bounds-per-iteration
figure rendered next to the CSV file."""
from __future__ import annotations

import csv
import math
import os

# Stable CSV schema, one header plus one row per refinement iteration and a
# final summary row (empty iteration column).  Documented in the README.
CSV_FIELDS = [
    "model", "mode", "kind", "direction", "status", "iteration",
    "lower", "upper", "states", "explored", "rewired", "cutoff", "time",
]


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return "%.10g" % value
    return value


def write_csv(path, record, iterations):
    """Write the run record; renders the companion figure alongside."""
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=CSV_FIELDS)
        writer.writeheader()
        base = {
            "model": record.get("model", ""),
            "mode": record.get("mode", ""),
            "kind": record.get("kind", ""),
            "direction": record.get("direction", ""),
            "status": record.get("status", ""),
        }
        for entry in iterations:
            row = dict(base)
            row.update({
                "iteration": entry.get("iteration"),
                "lower": _fmt(entry.get("lower")),
                "upper": _fmt(entry.get("upper")),
                "states": entry.get("states"),
                "explored": entry.get("explored"),
                "rewired": entry.get("rewired"),
                "cutoff": entry.get("cutoff"),
                "time": _fmt(entry.get("time")),
            })
            writer.writerow(row)
        summary = dict(base)
        summary.update({
            "iteration": "",
            "lower": _fmt(record.get("lower")),
            "upper": _fmt(record.get("upper")),
            "states": record.get("states"),
            "explored": "",
            "rewired": "",
            "cutoff": "",
            "time": _fmt(record.get("time")),
        })
        writer.writerow(summary)
    figure = os.path.splitext(path)[0] + ".png"
    render_bounds_figure(figure, record, iterations)
    return figure


def render_bounds_figure(path, record, iterations):
    """Step plot of the best-so-far lower and upper bounds per iteration."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    if iterations:
        xs = [entry["iteration"] for entry in iterations]
        lows = [entry.get("lower") for entry in iterations]
        ups = [entry.get("upper") for entry in iterations]
    else:
        xs = [1]
        lows = [record.get("lower")]
        ups = [record.get("upper")]
    finite_ups = [u for u in ups if u is not None and not math.isinf(u)]
    lows = [l if l is not None else float("nan") for l in lows]
    ups = [u if u is not None and not math.isinf(u) else float("nan") for u in ups]
    ax.step(xs, ups, where="post", label="upper bound", color="tab:red")
    ax.step(xs, lows, where="post", label="lower bound", color="tab:blue")
    ax.set_xlabel("iteration")
    ax.set_ylabel("value bound")
    title = record.get("model", "")
    status = record.get("status", "")
    ax.set_title("%s (%s)" % (os.path.basename(str(title)), status) if title else status)
    ax.legend(loc="best")
    ax.grid(True, alpha=0.3)
    if finite_ups or lows:
        fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def write_log(path, record, iterations):
    """Plain-text iteration log mirroring the CSV contents."""
    with open(path, "w") as handle:
        handle.write("model=%s mode=%s status=%s\n" % (
            record.get("model", ""), record.get("mode", ""), record.get("status", "")))
        for entry in iterations:
            handle.write(
                "iter %d: states=%s explored=%s rewired=%s cutoff=%s "
                "bounds=[%s, %s] eta=%s time=%.3fs\n" % (
                    entry.get("iteration", 0), entry.get("states"),
                    entry.get("explored"), entry.get("rewired"),
                    entry.get("cutoff"), _fmt(entry.get("lower")),
                    _fmt(entry.get("upper")), entry.get("eta"),
                    entry.get("time", 0.0)))
        handle.write("final bounds=[%s, %s] time=%s\n" % (
            _fmt(record.get("lower")), _fmt(record.get("upper")),
            _fmt(record.get("time"))))
