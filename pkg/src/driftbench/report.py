"""Figure rendering and plot-script emission for filter runs.

Figures are rendered headless to PNG files next to the CSV output. The
gnuplot script is plain text referencing the comparison CSV by column, so
the same data can be replotted without Python at all.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .data import ResultFrame

__all__ = ["save_filter_figure", "save_compare_figure", "write_gnuplot_script"]

_SERIES_LABELS = {"kf": "kf", "ukf": "ukf", "pff": "pff"}


def _columns(rows):
    steps = np.array([r.step for r in rows])
    order = np.argsort(steps)
    pick = lambda name: np.array(
        [getattr(rows[i], name) for i in order], dtype=float
    )
    truth_present = all(r.true_yield is not None for r in rows)
    return {
        "step": steps[order],
        "obs_yield": pick("obs_yield"),
        "obs_return": pick("obs_return"),
        "est_yield": pick("est_yield"),
        "est_return": pick("est_return"),
        "true_yield": pick("true_yield") if truth_present else None,
        "true_return": pick("true_return") if truth_present else None,
    }


def _draw(ax, cols, est_series, variable):
    ax.plot(cols["step"], cols[f"obs_{variable}"], ".", color="0.6",
            markersize=4, label="observed")
    if cols[f"true_{variable}"] is not None:
        ax.plot(cols["step"], cols[f"true_{variable}"], "--", color="0.25",
                linewidth=1.0, label="true")
    for label, values in est_series:
        ax.plot(cols["step"], values, linewidth=1.2, label=label)
    ax.set_ylabel(variable)
    ax.legend(loc="best", fontsize=8)


def save_filter_figure(frame: ResultFrame, tag: str, path) -> None:
    """Two stacked panels, yield above return, for one filter's run."""
    rows = frame.rows_for(tag)
    if not rows:
        raise ValueError(f"no rows for filter {tag!r}")
    cols = _columns(rows)
    fig, (ax_yield, ax_return) = plt.subplots(2, 1, sharex=True, figsize=(8, 6))
    _draw(ax_yield, cols, [(_SERIES_LABELS.get(tag, tag), cols["est_yield"])], "yield")
    _draw(ax_return, cols, [(_SERIES_LABELS.get(tag, tag), cols["est_return"])], "return")
    ax_return.set_xlabel("step")
    fig.suptitle(f"{tag} estimates")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_compare_figure(frame: ResultFrame, path) -> None:
    """All filters' estimates over the shared series, one panel per variable."""
    tags = frame.filter_tags()
    if not tags:
        raise ValueError("frame holds no rows")
    per_tag = {tag: _columns(frame.rows_for(tag)) for tag in tags}
    base = per_tag[tags[0]]
    fig, (ax_yield, ax_return) = plt.subplots(2, 1, sharex=True, figsize=(8, 6))
    _draw(ax_yield, base, [(t, per_tag[t]["est_yield"]) for t in tags], "yield")
    _draw(ax_return, base, [(t, per_tag[t]["est_return"]) for t in tags], "return")
    ax_return.set_xlabel("step")
    fig.suptitle("filter comparison")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_gnuplot_script(path, csv_name: str, tags) -> None:
    """Gnuplot commands plotting the comparison CSV, one clause per filter.

    Column numbers follow the result schema: step 1, filter 2, observed
    yield/return 3/4, estimated 5/6, true 7/8 (blank when absent).
    """
    tags = list(tags)
    script_name = os.path.basename(os.fspath(path))
    lines = [
        f"# Renders the estimates in {csv_name}; run from the same directory.",
        f"# Usage: gnuplot -persist {script_name}",
        'set datafile separator ","',
        "set key outside",
        "set multiplot layout 2,1",
    ]
    for variable, obs_col, est_col, true_col in (
        ("yield", 3, 5, 7),
        ("return", 4, 6, 8),
    ):
        first = tags[0]
        clauses = [
            f'  "{csv_name}" using 1:(strcol(2) eq "{first}" ? ${obs_col} : NaN) '
            'skip 1 with points pt 6 ps 0.4 lc rgb "gray" title "observed"',
            f'  "{csv_name}" using 1:(strcol(2) eq "{first}" ? ${true_col} : NaN) '
            'skip 1 with lines dt 2 lc rgb "black" title "true"',
        ]
        clauses += [
            f'  "{csv_name}" using 1:(strcol(2) eq "{tag}" ? ${est_col} : NaN) '
            f'skip 1 with lines title "{tag}"'
            for tag in tags
        ]
        lines.append(f'set ylabel "{variable}"')
        lines.append("plot \\\n" + ", \\\n".join(clauses))
    lines.append("unset multiplot")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")
