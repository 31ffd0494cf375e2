"""
Result files: CSV rows and a static SVG plot.

CSV columns are fixed:
    scenario,receiver,snr_db,sinr_db,metric,value,count,trials,seed
Floats are written with repr() so reading a file back reproduces the rows exactly.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import OutputError, ParameterError  # noqa: E402
from .models import Metric, ResultRow  # noqa: E402

CSV_HEADER = ["scenario", "receiver", "snr_db", "sinr_db", "metric", "value", "count", "trials", "seed"]
FORMATS = ("csv", "svg")

# Which dB axis each scenario is plotted against.
SINR_AXIS = {"detect-prob", "threshold"}


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, Metric):
        return value.value
    return str(value)


def write_csv(rows: list[ResultRow], path: str | Path) -> Path:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for row in rows:
                writer.writerow([_cell(getattr(row, column)) for column in CSV_HEADER])
    except OSError as e:
        raise OutputError(f"cannot write CSV ({e.strerror})", str(path)) from e
    return path


def read_rows(path: str | Path) -> list[ResultRow]:
    """Parse a CSV written by write_csv back into rows."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != CSV_HEADER:
                raise OutputError(f"unexpected CSV header {reader.fieldnames}", str(path))
            return [
                ResultRow(
                    scenario=rec["scenario"],
                    receiver=rec["receiver"],
                    snr_db=float(rec["snr_db"]),
                    sinr_db=float(rec["sinr_db"]),
                    metric=Metric(rec["metric"]),
                    value=float(rec["value"]),
                    count=int(rec["count"]),
                    trials=int(rec["trials"]),
                    seed=int(rec["seed"]),
                )
                for rec in reader
            ]
    except OSError as e:
        raise OutputError(f"cannot read CSV ({e.strerror})", str(path)) from e


def write_svg(rows: list[ResultRow], path: str | Path) -> Path:
    """
    Log-scale metric against dB, one line per (receiver, metric).

    Lines carry the gid "series-<receiver>" so they can be found in the SVG.
    Nonpositive values cannot be shown on a log axis and are left as gaps.
    """
    path = Path(path)
    series: dict[tuple[str, Metric], list[ResultRow]] = {}
    for row in rows:
        series.setdefault((row.receiver, row.metric), []).append(row)

    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    for (receiver, metric), members in series.items():
        use_sinr = members[0].scenario in SINR_AXIS
        x = np.array([r.sinr_db if use_sinr else r.snr_db for r in members])
        y = np.array([r.value for r in members], dtype=float)
        order = np.argsort(x, kind="stable")
        y = np.where(y > 0, y, np.nan)
        label = receiver if len(series) == len({k[0] for k in series}) else f"{receiver} ({metric.value})"
        (line,) = ax.semilogy(x[order], y[order], marker="o", label=label)
        line.set_gid(f"series-{receiver}")

    first = rows[0]
    ax.set_xlabel("SINR (dB)" if first.scenario in SINR_AXIS else "SNR (dB)")
    ax.set_ylabel(", ".join(sorted({m.value for _, m in series})))
    ax.set_title(f"{first.scenario} (seed {first.seed})")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(loc="best")
    fig.tight_layout()
    try:
        fig.savefig(path, format="svg")
    except OSError as e:
        raise OutputError(f"cannot write SVG ({e.strerror})", str(path)) from e
    finally:
        plt.close(fig)
    return path


def render_outputs(rows: list[ResultRow], path: str | Path, formats: tuple[str, ...] = FORMATS) -> list[Path]:
    """
    Write the rows in each requested format.

    `path` is the output stem; each format appends its own suffix
    (an existing .csv/.svg suffix on `path` is replaced).
    """
    if not rows:
        raise ParameterError("no result rows to render")
    unknown = set(formats) - set(FORMATS)
    if unknown:
        raise ParameterError(f"unknown output format(s): {', '.join(sorted(unknown))}")
    stem = Path(path)
    if stem.suffix in (".csv", ".svg"):
        stem = stem.with_suffix("")
    if stem.parent and not stem.parent.exists():
        try:
            stem.parent.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise OutputError(f"cannot create output directory ({e.strerror})", str(stem.parent)) from e
    written = []
    if "csv" in formats:
        written.append(write_csv(rows, stem.with_suffix(".csv")))
    if "svg" in formats:
        written.append(write_svg(rows, stem.with_suffix(".svg")))
    return written
