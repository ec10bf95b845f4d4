"""Trace CSV files, run summaries and figures.

Trace CSV, schema version 1: one header row
``t,xi,u_applied,u_raw,lambda,lambda_ref,e,f_est,y1,y2,x1,x2,x3,x4`` then one
row per controller tick. Numbers are written as the shortest decimal string
that round-trips the double (Python ``repr``), ``.`` as decimal separator,
``\\n`` line endings. ``f_est`` is 0 while the estimator window fills.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path

import numpy as np

from .sim import TRACE_COLUMNS, Trace

CSV_SCHEMA_VERSION = 1


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trace_to_csv(trace: Trace) -> str:
    buf = io.StringIO()
    buf.write(",".join(TRACE_COLUMNS) + "\n")
    for row in trace.rows():
        buf.write(",".join(repr(float(v)) for v in row) + "\n")
    return buf.getvalue()


def write_trace(trace: Trace, path) -> None:
    atomic_write_text(path, trace_to_csv(trace))


def read_trace(path) -> Trace:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != TRACE_COLUMNS:
            raise ValueError(f"{path}: unexpected trace header {header}")
        rows = [[float(v) for v in row] for row in reader]
    data = np.asarray(rows, dtype=float).reshape(-1, len(TRACE_COLUMNS))
    return Trace({name: data[:, j] for j, name in enumerate(TRACE_COLUMNS)})


def _fmt(v, spec=".2f"):
    return "unsettled" if v is None else format(v, spec)


SUMMARY_COLUMNS = ("run", "group", "case", "status", "lambda_min", "starvation",
                   "max_abs_e", "integral_abs_e", "max_restoration_s", "restoration_s")


def summary_csv(results) -> str:
    """``results``: iterable of ``(RunSpec, RunMetrics | None, error | None)``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for spec, metrics, error in results:
        if metrics is None:
            w.writerow([spec.name, spec.group, spec.case, "aborted", "", "", "", "", "", ""])
            continue
        w.writerow([
            spec.name, spec.group, spec.case, "ok",
            repr(metrics.lambda_min), str(metrics.starvation).lower(),
            repr(metrics.max_abs_error), repr(metrics.integral_abs_error),
            "unsettled" if metrics.max_restoration is None else repr(metrics.max_restoration),
            ";".join(f"{t!r}:{'unsettled' if d is None else repr(d)}" for t, d in metrics.restoration),
        ])
    return buf.getvalue()


def summary_text(results) -> str:
    """Per-group table of restoration times, nominal and uncertain side by side."""
    groups: dict[str, dict[str, tuple]] = {}
    order = []
    for spec, metrics, error in results:
        if spec.group not in groups:
            groups[spec.group] = {}
            order.append(spec.group)
        groups[spec.group][spec.case] = (spec, metrics, error)

    lines = []
    for g in order:
        cases = groups[g]
        names = sorted(cases, key=lambda k: (k != "nominal", k))
        lines.append(f"== {g} ==")
        for case in names:
            spec, m, err = cases[case]
            if m is None:
                lines.append(f"  {case:<10} {spec.name}: ABORTED {err}")
            else:
                lines.append(
                    f"  {case:<10} {spec.name}: lambda_min={m.lambda_min:.3f} "
                    f"starvation={'YES' if m.starvation else 'no'} max|e|={m.max_abs_error:.3f} "
                    f"IAE={m.integral_abs_error:.3f} band=+/-{100 * m.band:g}%")
        ok = [c for c in names if cases[c][1] is not None]
        if ok:
            header = "  step_t[s]  " + "".join(f"{c:>12}" for c in ok)
            if "nominal" in ok and len(ok) > 1:
                header += "".join(f"{'d_' + c:>14}" for c in ok if c != "nominal")
            lines.append(header)
            steps = [t for t, _ in cases[ok[0]][1].restoration]
            for k, t in enumerate(steps):
                vals = {c: cases[c][1].restoration[k][1] for c in ok}
                row = f"  {t:9.2f}  " + "".join(f"{_fmt(vals[c]):>12}" for c in ok)
                if "nominal" in ok and len(ok) > 1:
                    for c in ok:
                        if c == "nominal":
                            continue
                        a, b = vals["nominal"], vals[c]
                        row += f"{_fmt(None if a is None or b is None else b - a, '+.2f'):>14}"
                lines.append(row)
        lines.append("")
    return "\n".join(lines)


def plot_group(group: str, traces: dict, path) -> None:
    """Stoichiometry, motor current and pressures for every case of one group."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    styles = {"nominal": "-", "uncertain": "--"}
    fig, axes = plt.subplots(4, 1, figsize=(8, 10), sharex=True)
    ax_xi, ax_lam, ax_u, ax_y = axes
    first = True
    for case, tr in traces.items():
        ls = styles.get(case, ":")
        t = tr["t"]
        if first:
            ax_xi.plot(t, tr["xi"], "k-", lw=1)
        ax_lam.plot(t, tr["lambda"], ls, lw=1, label=f"lambda ({case})")
        ax_lam.plot(t, tr["lambda_ref"], "k" + ls, lw=0.8, alpha=0.6,
                    label="lambda*" if first else None)
        ax_u.plot(t, tr["u_applied"], ls, lw=1, label=f"u ({case})")
        ax_y.plot(t, np.asarray(tr["y1"]) / 1e5, ls, lw=0.8, label=f"y1 ({case})")
        ax_y.plot(t, np.asarray(tr["y2"]) / 1e5, ls, lw=0.8, label=f"y2 ({case})")
        first = False
    ax_xi.set_ylabel("stack current [A]")
    ax_lam.set_ylabel("O2 stoichiometry [-]")
    ax_u.set_ylabel("motor current [A]")
    ax_y.set_ylabel("pressure [bar]")
    ax_y.set_xlabel("time [s]")
    for ax in axes[1:]:
        ax.legend(loc="best", fontsize=7)
    for ax in axes:
        ax.grid(True, lw=0.3)
    fig.suptitle(group)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)

