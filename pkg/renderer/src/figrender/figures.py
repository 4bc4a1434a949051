"""The four figure builders and the deterministic save path.

All builders draw onto a single axes: mean curve per group, with a shaded
min-max band once several input files (seeds) contribute to the same group.
With a single file the band collapses onto the curve.
"""

from collections import defaultdict
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .schema import SCHEMAS, SchemaError, load_rows


class DataError(Exception):
    """Input files validate individually but disagree with each other."""


def _band(curves, what):
    """Mean/min/max across per-file curves sharing one x grid."""
    x0, _ = curves[0]
    for x, _ in curves[1:]:
        if not np.array_equal(x, x0):
            raise DataError(f"input CSVs disagree on the {what}")
    ys = np.stack([y for _, y in curves])
    return x0, ys.mean(axis=0), ys.min(axis=0), ys.max(axis=0)


def _draw(ax, label, x, mean, lo, hi):
    line, = ax.plot(x, mean, label=label)
    ax.fill_between(x, lo, hi, color=line.get_color(), alpha=0.2, linewidth=0)
    return line


def _mean_by(rows, x_key, y_key):
    """Collapse rows to one curve: mean of y over rows sharing an x value."""
    groups = defaultdict(list)
    for row in rows:
        groups[row[x_key]].append(row[y_key])
    xs = sorted(groups)
    return np.array(xs, dtype=float), np.array([np.mean(groups[x]) for x in xs])


def build_convergence(files_rows, ax):
    curves = defaultdict(list)
    for rows in files_rows:
        for mode in sorted({r["mode"] for r in rows}):
            sub = [r for r in rows if r["mode"] == mode]
            curves[mode].append(_mean_by(sub, "iter", "gap"))
    for mode in sorted(curves):
        _draw(ax, mode, *_band(curves[mode], f"iteration grid for mode {mode!r}"))
    ax.set_xlabel("iteration")
    ax.set_ylabel("mean gap")


def build_sample_complexity(files_rows, ax):
    # thresholds are aligned by rank: every producer writes them in the same
    # (descending-epsilon) order, while the absolute epsilon values differ
    # per seed because they are fractions of that seed's initial gap
    per_mode = defaultdict(list)
    censored_pts = defaultdict(list)
    for rows in files_rows:
        seen = defaultdict(list)
        for row in rows:
            seen[row["mode"]].append(row)
            if row["censored"]:
                censored_pts[row["mode"]].append(
                    (row["epsilon"], row["total_queries"]))
        for mode, sub in seen.items():
            per_mode[mode].append(sub)
    for mode in sorted(per_mode):
        counts = {len(sub) for sub in per_mode[mode]}
        if len(counts) != 1:
            raise DataError("input CSVs disagree on the number of thresholds "
                            f"for mode {mode!r}")
        eps = np.stack([[r["epsilon"] for r in sub] for sub in per_mode[mode]])
        queries = np.stack([[r["total_queries"] for r in sub]
                            for sub in per_mode[mode]])
        line = _draw(ax, mode, eps.mean(axis=0), queries.mean(axis=0),
                     queries.min(axis=0), queries.max(axis=0))
        if censored_pts[mode]:
            cx, cy = zip(*censored_pts[mode])
            ax.scatter(cx, cy, facecolors="none", edgecolors=line.get_color(),
                       zorder=3, label=f"{mode} (censored)")
    ax.invert_xaxis()  # tighter targets to the right
    ax.set_xlabel("gap target")
    ax.set_ylabel("total queries")


def build_estimator(files_rows, ax):
    functions = {r["function"] for rows in files_rows for r in rows}
    curves = defaultdict(list)
    for rows in files_rows:
        per_key = defaultdict(dict)
        for row in rows:
            per_key[(row["function"], row["r"])][row["n_s"]] = row["median_abs_err"]
        for key, by_ns in per_key.items():
            ns = sorted(by_ns)
            curves[key].append((np.array(ns, dtype=float),
                                np.array([by_ns[n] for n in ns])))
    for function, r in sorted(curves):
        label = f"r={r:g}" if len(functions) == 1 else f"{function}, r={r:g}"
        _draw(ax, label, *_band(curves[(function, r)], f"sample grid for {label}"))
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("samples per estimate")
    ax.set_ylabel("median error")


def build_adaptation(files_rows, ax):
    curves = defaultdict(list)
    for rows in files_rows:
        for name in sorted({r["controller"] for r in rows}):
            sub = [r for r in rows if r["controller"] == name]
            curves[name].append(_mean_by(sub, "k", "gap"))
    for name in sorted(curves):
        _draw(ax, name, *_band(curves[name], f"step grid for controller {name!r}"))
    ax.set_xlabel("adaptation step")
    ax.set_ylabel("mean gap on unseen tasks")


BUILDERS = {
    "convergence": build_convergence,
    "sample_complexity": build_sample_complexity,
    "estimator": build_estimator,
    "adaptation": build_adaptation,
}


def _save(fig, out):
    """Write the figure without any timestamp so reruns are byte-identical."""
    out = Path(out)
    metadata = {".png": {"Software": "figrender"},
                ".svg": {"Date": None},
                ".pdf": {"CreationDate": None}}.get(out.suffix.lower())
    if metadata is None:
        raise DataError(f"unsupported output format {out.suffix!r}; "
                        "use .png, .svg, or .pdf")
    with plt.rc_context({"svg.hashsalt": "figrender"}):
        fig.savefig(out, metadata=metadata)
    return out


def render(kind, inputs, out, logy=False):
    """Draw one figure of the given kind from the input CSVs.

    Inputs are read-only; several files of the same layout are treated as
    repetitions and summarized as mean curves with min-max bands.
    """
    if kind not in BUILDERS:
        raise SchemaError(f"unknown figure kind {kind!r}; "
                          f"expected one of {sorted(BUILDERS)}")
    if not inputs:
        raise SchemaError("at least one input CSV is required")
    files_rows = [load_rows(kind, path) for path in inputs]
    fig, ax = plt.subplots(figsize=(6.4, 4.2), dpi=150)
    try:
        BUILDERS[kind](files_rows, ax)
        if logy:
            ax.set_yscale("log")
        ax.legend()
        fig.tight_layout()
        return _save(fig, out)
    finally:
        plt.close(fig)


# the kinds the CLI advertises, derived from one place
KINDS = tuple(sorted(BUILDERS))
assert set(KINDS) == set(SCHEMAS)
