"""Aggregation of attack rows into an amplification table (noise level x mask)."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import numpy as np

from . import formats

TABLE_FIELDS = ["noise_rel", "lines", "count", "alpha_mean", "alpha_std"]


def collect_rows(result_dir) -> list[dict]:
    """All rows of every ``attacks.csv`` below ``result_dir``, sorted by path."""
    paths = sorted(Path(result_dir).rglob("attacks.csv"))
    rows = []
    for p in paths:
        rows.extend(formats.read_rows(p))
    if not rows:
        raise ValueError(f"no attack rows found under {result_dir}")
    return rows


def aggregate(rows) -> list[dict]:
    """Mean and sample standard deviation (ddof=1) of alpha per ``(noise_rel, lines)``.

    A group with a single row reports a standard deviation of 0.
    """
    groups = defaultdict(list)
    for row in rows:
        groups[(float(row["noise_rel"]), int(row["lines"]))].append(float(row["alpha"]))
    out = []
    for (noise, lines), alphas in sorted(groups.items()):
        a = np.array(alphas)
        out.append({
            "noise_rel": noise,
            "lines": lines,
            "count": a.size,
            "alpha_mean": float(a.mean()),
            "alpha_std": float(a.std(ddof=1)) if a.size > 1 else 0.0,
        })
    return out


def to_markdown(table: list[dict]) -> str:
    """One row per noise level, one column per line count, cells ``mean ± std``."""
    noises = sorted({t["noise_rel"] for t in table})
    lines = sorted({t["lines"] for t in table})
    cell = {(t["noise_rel"], t["lines"]): t for t in table}
    head = "| noise | " + " | ".join(f"TV ({n} lines)" for n in lines) + " |"
    sep = "|---|" + "---|" * len(lines)
    body = []
    for nz in noises:
        cells = []
        for ln in lines:
            t = cell.get((nz, ln))
            cells.append("" if t is None else f"{t['alpha_mean']:.2f} ± {t['alpha_std']:.2f}")
        body.append(f"| {100 * nz:.1f}% | " + " | ".join(cells) + " |")
    return "\n".join([head, sep, *body]) + "\n"
