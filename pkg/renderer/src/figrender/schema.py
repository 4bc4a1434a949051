"""Documented CSV layouts and strict, position-aware header validation.

Every figure kind maps to one expected header. A file whose header deviates
is refused before any data row is parsed, and the error names the first
offending column so the producer-side mismatch is obvious.
"""

import csv
from pathlib import Path


class SchemaError(Exception):
    """An input CSV does not match the documented layout."""


# expected header per figure kind, in order
SCHEMAS = {
    "convergence": ("iter", "mode", "task_id", "gap", "grad_norm_sq",
                    "cum_queries", "all_stable"),
    "sample_complexity": ("epsilon", "mode", "total_queries", "censored"),
    "estimator": ("function", "n_s", "r", "median_abs_err", "exact_grad_norm"),
    "adaptation": ("k", "controller", "task_id", "gap"),
}

# columns a kind tolerates after the required ones (producer extensions)
OPTIONAL_TRAILING = {
    "convergence": ("ergodic_avg",),
}

# how each column's cells are parsed
_PARSERS = {
    "iter": int, "task_id": int, "cum_queries": int, "all_stable": int,
    "total_queries": int, "censored": int, "n_s": int, "k": int,
    "gap": float, "grad_norm_sq": float, "epsilon": float, "r": float,
    "median_abs_err": float, "exact_grad_norm": float, "ergodic_avg": float,
    "mode": str, "controller": str, "function": str,
}


def check_header(kind, path, header):
    """Raise :class:`SchemaError` naming the first column that deviates."""
    expected = SCHEMAS[kind]
    optional = OPTIONAL_TRAILING.get(kind, ())
    for i, want in enumerate(expected):
        if i >= len(header):
            raise SchemaError(f"{path}: missing column {i + 1} ({want!r})")
        if header[i] != want:
            raise SchemaError(f"{path}: column {i + 1} should be {want!r}, "
                              f"found {header[i]!r}")
    for i, got in enumerate(header[len(expected):]):
        want_pos = len(expected) + i
        if i >= len(optional) or got != optional[i]:
            raise SchemaError(f"{path}: unexpected column {want_pos + 1} ({got!r})")


def load_rows(kind, path):
    """Validated rows of one CSV as dicts with typed values."""
    if kind not in SCHEMAS:
        raise SchemaError(f"unknown figure kind {kind!r}; "
                          f"expected one of {sorted(SCHEMAS)}")
    path = Path(path)
    if not path.is_file():
        raise SchemaError(f"{path}: no such file")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected a header row") from None
        check_header(kind, path, header)
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            if len(raw) != len(header):
                raise SchemaError(f"{path}:{lineno}: expected {len(header)} "
                                  f"cells, found {len(raw)}")
            row = {}
            for name, cell in zip(header, raw):
                try:
                    row[name] = _PARSERS[name](cell)
                except ValueError:
                    raise SchemaError(f"{path}:{lineno}: cannot parse {cell!r} "
                                      f"as {name}") from None
            rows.append(row)
    if not rows:
        raise SchemaError(f"{path}: header only, no data rows")
    return rows
