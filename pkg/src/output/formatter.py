"""
Console summary of an experiment report.
"""
from typing import Any, Dict, List
import logging

from colorama import Fore, Style, init as colorama_init

logger = logging.getLogger(__name__)

colorama_init(autoreset=False)


class OutputFormatter:
    """Renders report bodies as plain-text tables for the terminal."""

    def __init__(self, use_color: bool = True):
        self.use_color = use_color

    def _paint(self, text: str, color: str) -> str:
        if not self.use_color:
            return text
        return f"{color}{text}{Style.RESET_ALL}"

    def verdict(self, passed: bool) -> str:
        return self._paint("PASS", Fore.GREEN) if passed else self._paint("FAIL", Fore.RED)

    def format_report(self, body: Dict[str, Any]) -> str:
        """Header, one line per row, fits and summary."""
        separator = "=" * 80
        params = body.get("params", {})
        lines: List[str] = [
            separator,
            f"Experiment: {body.get('experiment')}  "
            f"gamma={params.get('gamma')} beta={params.get('beta')} eps0={params.get('epsilon0')}",
            f"n={body.get('n')}  trials={body.get('trials')}  seed={body.get('seed')}",
            separator,
        ]
        for row in body.get("rows", []):
            lines.append(self._format_row(row))

        for fit in body.get("fits", []):
            lines.append(
                f"  fit {fit['label']}: slope={fit['slope']:.4g} "
                f"intercept={fit['intercept']:.4g} r2={fit['r_squared']:.3f}"
            )

        summary = body.get("summary") or {}
        if summary:
            lines.append("-" * 80)
            for key, value in summary.items():
                if isinstance(value, bool):
                    lines.append(f"  {key}: {self.verdict(value)}")
                else:
                    lines.append(f"  {key}: {value}")
        lines.append(separator)
        return "\n".join(lines)

    def _format_row(self, row: Dict[str, Any]) -> str:
        if "max_error" in row:
            return (
                f"  {self.verdict(row['passed'])} {row['label']:<38} "
                f"max_error={row['max_error']:.3e} tol={row['tolerance']:.0e}"
            )
        estimate = row.get("estimate")
        se = row.get("std_error")
        if isinstance(estimate, dict):
            value = f"{estimate['re']:.6g}{estimate['im']:+.6g}i ± ({se['re']:.2g}, {se['im']:.2g})"
        else:
            value = f"{estimate:.6g} ± {se:.2g}"
        line = f"  [{row.get('key')}] {row.get('label', ''):<32} {value}"
        if row.get("bound_ratio") is not None:
            line += f"  ratio={row['bound_ratio']:.4g}"
        if row.get("zero_count"):
            line += self._paint("  (zero count)", Fore.YELLOW)
        if row.get("truncation"):
            line += f"  [{row['truncation']}]"
        return line
