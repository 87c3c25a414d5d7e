"""Plain-text rendering of summaries and evaluation results."""

from __future__ import annotations

from collections import Counter
from typing import List, Sequence

import numpy as np

from ..schema import DoneReason, MetricsRecord, SummaryReport


class SummaryFormatter:
    """Formats summaries mode by mode, seeds first, then the downsampled curve."""

    def __init__(self, indent_size: int = 2, show_curves: bool = True, curve_rows: int = 10):
        self.indent_size = indent_size
        self.show_curves = show_curves
        self.curve_rows = curve_rows

    def format_report(self, report: SummaryReport) -> str:
        lines = []
        lines.append(f"Success threshold: {report.threshold:.4f} "
                     f"(median of the last {report.window} episodes)")
        lines.append("")
        for mode in report.modes():
            lines.extend(self._format_mode(report, mode))
            lines.append("")
        return "\n".join(lines).rstrip() + "\n"

    def _format_mode(self, report: SummaryReport, mode: str) -> List[str]:
        outcomes = [o for o in report.outcomes if o.mode == mode]
        succeeded = sum(1 for o in outcomes if o.success)
        lines = [f"{mode}: {succeeded}/{len(outcomes)} seeds succeeded "
                 f"(success rate {report.success_rate(mode):.2f})"]
        indent = self._indent(1)
        for o in outcomes:
            status = "SUCCESS" if o.success else "FAILED"
            lines.append(f"{indent}seed {o.seed}: final median {o.final_median:.4f} ({status})")
        curve = report.curves.get(mode, [])
        if self.show_curves and curve:
            lines.append(f"{indent}return curve (episode: median [q25, q75]):")
            step = max(1, len(curve) // self.curve_rows)
            shown = curve[::step]
            if shown[-1] is not curve[-1]:
                shown.append(curve[-1])
            for p in shown:
                lines.append(f"{self._indent(2)}{p.episode}: {p.median:.4f} [{p.q25:.4f}, {p.q75:.4f}]")
        return lines

    def format_records(self, records: Sequence[MetricsRecord]) -> str:
        """One line per episode plus a totals line."""
        lines = []
        for r in records:
            line = (f"episode {r.episode}: return {r.episode_return:.4f}, length {r.episode_length}, "
                    f"{r.done_reason.value}, final height {r.final_height:.4f}")
            if r.aen_mse is not None:
                line += f", aen mse {r.aen_mse:.3e}"
            lines.append(line)
        if records:
            reasons = Counter(r.done_reason for r in records)
            lines.append(
                f"mean return {np.mean([r.episode_return for r in records]):.4f}; "
                f"{reasons[DoneReason.SAFETY_TERMINATION]} safety termination(s), "
                f"{reasons[DoneReason.HORIZON_REACHED]} reached the horizon"
            )
        return "\n".join(lines) + "\n"

    def _indent(self, depth: int) -> str:
        return " " * (self.indent_size * depth)


def format_summary(report: SummaryReport, show_curves: bool = True) -> str:
    """Format a summary report as text."""
    return SummaryFormatter(show_curves=show_curves).format_report(report)
