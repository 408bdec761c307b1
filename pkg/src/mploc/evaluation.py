"""Error statistics, CDF export, and run comparison for position fixes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import DataError

# Report rows, in the order they are always printed.
STAT_ROWS = ("RMS", "Max", "sub-2m", "sub-1m", "sub-30cm")


@dataclass(frozen=True)
class ErrorStats:
    """Summary statistics of a set of 2D positioning errors (meters)."""

    rms: float
    max: float
    pct_sub_2m: float
    pct_sub_1m: float
    pct_sub_30cm: float
    n: int

    def row_values(self) -> tuple[float, ...]:
        return (self.rms, self.max, self.pct_sub_2m, self.pct_sub_1m, self.pct_sub_30cm)


def error_stats(errors: Sequence[float]) -> ErrorStats:
    """RMS, maximum, and inclusive sub-threshold percentages of the errors."""
    if len(errors) == 0:
        raise DataError("no errors to summarize")
    if any(e < 0 or not math.isfinite(e) for e in errors):
        raise DataError("errors must be finite and non-negative")
    n = len(errors)
    ordered = sorted(errors)  # fixed summation order: permutation invariant
    rms = math.sqrt(sum(e * e for e in ordered) / n)
    pct = lambda thr: 100.0 * sum(1 for e in ordered if e <= thr) / n
    return ErrorStats(
        rms=rms,
        max=ordered[-1],
        pct_sub_2m=pct(2.0),
        pct_sub_1m=pct(1.0),
        pct_sub_30cm=pct(0.30),
        n=n,
    )


def cdf_points(errors: Sequence[float]) -> list[tuple[float, float]]:
    """Empirical CDF: sorted errors with cumulative fraction i/n at the i-th value."""
    if len(errors) == 0:
        raise DataError("no errors for CDF")
    n = len(errors)
    return [(e, (i + 1) / n) for i, e in enumerate(sorted(errors))]


def cdf_csv(errors: Sequence[float]) -> str:
    lines = ["err_m,cum_frac"]
    lines += [f"{e!r},{f!r}" for e, f in cdf_points(errors)]
    return "\n".join(lines) + "\n"


def _fmt_stat(value: float) -> str:
    return f"{value:.4g}"


def format_stats_table(columns: dict[str, ErrorStats]) -> str:
    """Aligned text table: one column per run, rows RMS through sub-30cm."""
    labels = list(columns)
    widths = [max(len(lab), 10) for lab in labels]
    header = f"{'':<10}" + "".join(f"  {lab:>{w}}" for lab, w in zip(labels, widths))
    lines = [header]
    for ri, row in enumerate(STAT_ROWS):
        cells = []
        for lab, w in zip(labels, widths):
            v = columns[lab].row_values()[ri]
            suffix = " m" if ri < 2 else " %"
            cells.append(f"  {_fmt_stat(v) + suffix:>{w}}")
        lines.append(f"{row:<10}" + "".join(cells))
    lines.append(f"{'n':<10}" + "".join(f"  {columns[lab].n:>{w}}" for lab, w in zip(labels, widths)))
    return "\n".join(lines)


def stats_csv(columns: dict[str, ErrorStats]) -> str:
    lines = ["stat," + ",".join(columns)]
    for ri, row in enumerate(STAT_ROWS):
        lines.append(row + "," + ",".join(repr(columns[lab].row_values()[ri]) for lab in columns))
    lines.append("n," + ",".join(str(columns[lab].n) for lab in columns))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class RunComparison:
    """Side-by-side statistics for two runs over the same epochs."""

    label_a: str
    label_b: str
    stats_a: ErrorStats
    stats_b: ErrorStats
    deltas: dict[str, float]

    @property
    def text(self) -> str:
        table = format_stats_table({self.label_a: self.stats_a, self.label_b: self.stats_b})
        lines = table.splitlines()
        out = [lines[0] + f"  {'delta(' + self.label_a + '-' + self.label_b + ')':>18}"]
        for row, line in zip(STAT_ROWS, lines[1:]):
            out.append(line + f"  {_fmt_stat(self.deltas[row]):>18}")
        out.append(lines[-1])
        return "\n".join(out)

    @property
    def csv(self) -> str:
        lines = [f"stat,{self.label_a},{self.label_b},delta"]
        for row, va, vb in zip(STAT_ROWS, self.stats_a.row_values(), self.stats_b.row_values()):
            lines.append(f"{row},{va!r},{vb!r},{self.deltas[row]!r}")
        return "\n".join(lines) + "\n"


def compare_runs(stats_a: ErrorStats, stats_b: ErrorStats,
                 label_a: str = "A", label_b: str = "B") -> RunComparison:
    """Compare two runs computed over the same epochs. Deltas are A minus B."""
    if stats_a.n != stats_b.n:
        raise DataError(f"runs cover different epoch counts: {stats_a.n} vs {stats_b.n}")
    deltas = {
        row: va - vb
        for row, va, vb in zip(STAT_ROWS, stats_a.row_values(), stats_b.row_values())
    }
    return RunComparison(label_a=label_a, label_b=label_b,
                         stats_a=stats_a, stats_b=stats_b, deltas=deltas)
