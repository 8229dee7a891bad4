"""CSV reports and companion figures.

Every report starts with comment lines carrying the config hash and the
seed; the generation timestamp sits on its own comment line so that
re-running a config reproduces a byte-identical body.  When a report is
written to a file, a figure with the same stem is rendered next to it
unless figures are disabled.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import sys
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path


def config_hash(params: dict) -> str:
    canon = json.dumps(params, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def render_cell(value) -> str:
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return str(value.numerator)
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def report_text(columns, rows, params: dict, timestamp: bool = True) -> str:
    """CSV body with a deterministic header block."""
    buf = io.StringIO()
    buf.write("# ssgrp report\n")
    buf.write(f"# config {config_hash(params)}\n")
    for key in sorted(params):
        buf.write(f"# param {key}={params[key]}\n")
    if timestamp:
        stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        buf.write(f"# generated {stamp}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([render_cell(v) for v in row])
    return buf.getvalue()


def report_body(text: str) -> str:
    """The reproducible part of a report (everything but the timestamp)."""
    return "\n".join(
        line for line in text.splitlines() if not line.startswith("# generated")
    )


def write_report(
    out: str | None,
    columns,
    rows,
    params: dict,
    figure: bool = True,
    figure_kind: str = "lines",
) -> str:
    """Write (or print) a report; render a figure next to a written file."""
    text = report_text(columns, rows, params)
    if out is None:
        sys.stdout.write(text)
        return text
    path = Path(out)
    path.write_text(text)
    if figure and rows:
        try:
            render_figure(path.with_suffix(".png"), columns, rows, figure_kind, params)
        except Exception as exc:  # figures must never break the data path
            print(f"figure rendering failed: {exc}", file=sys.stderr)
    return text


def _as_float(value) -> float | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float, Fraction)):
        return float(value)
    return None


def render_figure(png_path: Path, columns, rows, kind: str, params: dict):
    """One figure per report: numeric columns against the first column."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    xs = [_as_float(r[0]) for r in rows]
    if any(x is None for x in xs):
        xs = list(range(len(rows)))
    fig, ax = plt.subplots(figsize=(7, 4.5))
    plotted = False
    for j, name in enumerate(columns[1:], start=1):
        ys = [_as_float(r[j]) for r in rows]
        if any(y is None for y in ys):
            continue
        if kind == "bars" and not plotted:
            ax.bar([x + 0.8 * j / len(columns) for x in xs], ys, label=name, width=0.8 / len(columns))
        else:
            ax.plot(xs, ys, marker="o", label=name)
        plotted = True
    if not plotted:
        plt.close(fig)
        return
    ax.set_xlabel(columns[0])
    ax.legend(fontsize=8)
    ax.set_title(f"config {config_hash(params)}", fontsize=9)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
