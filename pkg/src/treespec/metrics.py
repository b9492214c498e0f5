"""Reporting helpers: token-level Rouge-L, speedup tables, plot data, writers."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Mapping, Sequence


def lcs_length(a: Sequence, b: Sequence) -> int:
    """Length of the longest common subsequence (two-row dynamic program)."""
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: Sequence, reference: Sequence, beta: float = 1.0) -> float:
    """LCS-based F-measure scaled to [0, 100]; 0 if either side is empty."""
    if not candidate or not reference:
        return 0.0
    lcs = lcs_length(candidate, reference)
    if lcs == 0:
        return 0.0
    p = lcs / len(candidate)
    r = lcs / len(reference)
    return 100.0 * (1 + beta ** 2) * p * r / (r + beta ** 2 * p)


def speedup_table(runs: Mapping[str, float], baseline: str = "Std") -> list[dict]:
    """Rows of (config, per_token_time, speedup_vs_Std), sorted by config name.

    ``runs`` maps a configuration name to its per-token time.
    """
    if baseline not in runs:
        raise ValueError(f"missing baseline run {baseline!r}")
    base = runs[baseline]
    rows = []
    for name in sorted(runs):
        t = runs[name]
        rows.append({"config": name, "per_token_time": t,
                     "speedup_vs_Std": base / t if t > 0 else float("inf")})
    return rows


def timeline_to_plot_data(timeline) -> dict[str, list[tuple[float, float]]]:
    """Per lane ``(start, duration)`` pairs, the shape ``broken_barh`` expects."""
    out: dict[str, list[tuple[float, float]]] = {}
    for e in sorted(timeline.events, key=lambda e: (e.lane, e.start)):
        out.setdefault(e.lane, []).append((e.start, e.end - e.start))
    return out


def write_csv(rows: list[dict], path=None) -> str:
    if not rows:
        raise ValueError("no rows to write")
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def write_json(doc, path=None) -> str:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
