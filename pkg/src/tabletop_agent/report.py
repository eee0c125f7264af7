"""Success-rate and latency aggregation into one summary row per run."""

from __future__ import annotations

import csv
import io
import statistics
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .corpus import CATEGORIES

SUMMARY_COLUMNS = ("mode", "model", "0", "1", "2", "CAN", "LEX", "SYN", "SEM", "HLR", "AVG", "latency_s")
MODE_LABELS = {"cap": "CaP", "tap": "TaP"}
MISSING = "--"


def _final(result: Any) -> int | float:
    return result["final"] if isinstance(result, Mapping) else result.final


def _category(result: Any) -> str:
    return result["category"] if isinstance(result, Mapping) else result.category


def _latency(result: Any) -> float:
    return result["latency"] if isinstance(result, Mapping) else result.latency


def success_rate(results: Iterable[Any], category: str | None = None) -> float | None:
    """100 * (sum of final scores) / (2 * N), or None when nothing matches."""
    finals = [_final(r) for r in results if category is None or _category(r) == category]
    if not finals:
        return None
    return 100.0 * sum(finals) / (2 * len(finals))


def score_counts(results: Iterable[Any]) -> tuple[int, int, int, int]:
    """(n0, n1, n2, n_split): split verdicts are three-way disagreements averaged to a float."""
    n0 = n1 = n2 = split = 0
    for r in results:
        final = _final(r)
        if isinstance(final, float):
            split += 1
        elif final == 0:
            n0 += 1
        elif final == 1:
            n1 += 1
        else:
            n2 += 1
    return n0, n1, n2, split


def latency_stats(results: Iterable[Any]) -> dict[str, float | None]:
    values = [_latency(r) for r in results]
    if not values:
        return {"mean": None, "median": None, "max": None}
    return {"mean": statistics.fmean(values), "median": statistics.median(values), "max": max(values)}


def fmt_rate(rate: float | None) -> str:
    return MISSING if rate is None else f"{rate:.1f}"


def summary_row(results: Sequence[Any], mode: str, model: str) -> dict[str, str]:
    n0, n1, n2, split = score_counts(results)
    row = {"mode": MODE_LABELS.get(mode, mode), "model": model, "0": str(n0), "1": str(n1), "2": str(n2)}
    for cat in CATEGORIES:
        row[cat] = fmt_rate(success_rate(results, cat))
    row["AVG"] = fmt_rate(success_rate(results))
    mean = latency_stats(results)["mean"]
    row["latency_s"] = MISSING if mean is None else f"{mean:.2f}"
    row["split"] = str(split)
    return row


def render_csv(rows: Sequence[Mapping[str, str]]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=[*SUMMARY_COLUMNS, "split"], lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row.get(k, "") for k in writer.fieldnames})
    return buf.getvalue()


def render_table(rows: Sequence[Mapping[str, str]]) -> str:
    """Pipe-separated table in ``SUMMARY_COLUMNS`` order.

    A ``split`` column (verdicts averaged from three different scores) is
    inserted after the score counts only when some row has one.
    """
    columns = list(SUMMARY_COLUMNS)
    if any(row.get("split", "0") != "0" for row in rows):
        columns.insert(columns.index("2") + 1, "split")
    headers = {"mode": "Mode", "model": "LLM", "latency_s": "Latency (s)"}
    table = [[headers.get(c, c) for c in columns]] + [[row.get(c, "") for c in columns] for row in rows]
    widths = [max(len(r[i]) for r in table) for i in range(len(columns))]
    lines = [" | ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in table]
    lines.insert(1, "-+-".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def write_summary(rows: Sequence[Mapping[str, str]], out_dir: str | Path,
                  formats: Sequence[str] = ("csv", "table")) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        path = out / "summary.csv"
        path.write_text(render_csv(rows), encoding="utf-8")
        written.append(path)
    if "table" in formats:
        path = out / "summary.txt"
        path.write_text(render_table(rows), encoding="utf-8")
        written.append(path)
    return written
