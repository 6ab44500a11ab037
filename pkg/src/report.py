"""Report rendering: text tables, CSV and JSON"""

import csv
import io
import json
import logging
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence

from jinja2 import Template

from .security_metrics import SecurityReport
from .utils import truncate_decimal
from .validation import ValidationReport

logger = logging.getLogger(__name__)

TABLE_COLUMNS = ["M", "mean_photons", "p_a", "p_b", "qcm_secure", "worst_N"]
SWEEP_COLUMNS = ["rs1", "mu"] + TABLE_COLUMNS
VALIDATION_COLUMNS = ["quantity", "closed_form", "monte_carlo", "std_error", "successes", "trials", "status"]


class OutputFormat(Enum):
    TEXT_TABLE = "table"
    CSV = "csv"
    JSON = "json"


SECURITY_TEMPLATE = Template('''# rs1={{ rs1 }} mu={{ mu }} prior=uniform
{% if sweep %}{{ "%8s"|format("rs1") }} {{ "%6s"|format("mu") }} {% endif %}{{ "%3s"|format("M") }} {{ "%9s"|format("<n>") }} {{ "%8s"|format("p_a(%)") }} {{ "%8s"|format("p_b(%)") }} {{ "%4s"|format("QCM") }}
{% for row in rows %}{% if sweep %}{{ "%8s"|format(row.rs1) }} {{ "%6s"|format(row.mu) }} {% endif %}{{ "%3s"|format(row.M) }} {{ "%9s"|format(row.mean_photons) }} {{ "%8s"|format(row.p_a) }} {{ "%8s"|format(row.p_b) }} {{ "%4s"|format(row.flag) }}
{% endfor %}{% if max_secure is not none %}# largest QCM-secure M: {{ max_secure }}
{% endif %}''')

VALIDATION_TEMPLATE = Template('''# M={{ M }} rs1={{ rs1 }} mu={{ mu }} trials={{ trials }} seed={{ seed }}
{{ "%-14s"|format("quantity") }} {{ "%12s"|format("closed_form") }} {{ "%12s"|format("monte_carlo") }} {{ "%12s"|format("std_error") }} {{ "%6s"|format("status") }}
{% for row in rows %}{{ "%-14s"|format(row.quantity) }} {{ "%12.8f"|format(row.closed_form) }} {{ "%12.8f"|format(row.monte_carlo) }} {{ "%12.8f"|format(row.std_error) }} {{ "%6s"|format(row.status) }}
{% endfor %}''')


def format_p_a_percent(p_a: float) -> str:
    return truncate_decimal(100.0 * p_a, 3)


def format_p_b_percent(p_b: float) -> str:
    """Percent with 3 decimals, or 4 below 0.001%, digits cut, not rounded."""
    percent = 100.0 * p_b
    return truncate_decimal(percent, 3 if percent >= 1e-3 else 4)


def _text_row(report: SecurityReport) -> Dict[str, str]:
    return {
        "rs1": f"{report.rs1:g}" if report.rs1 is not None else "",
        "mu": f"{report.mu:g}" if report.mu is not None else "",
        "M": str(report.M),
        "mean_photons": truncate_decimal(report.mean_photons, 3),
        "p_a": format_p_a_percent(report.p_a),
        "p_b": format_p_b_percent(report.p_b),
        "flag": "1" if report.qcm_secure else "0",
    }


def _csv_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(records: Sequence[Dict[str, Any]], columns: List[str]) -> str:
    """Render dictionaries as CSV; floats keep full precision."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for record in records:
        writer.writerow([_csv_value(record[c]) for c in columns])
    return buffer.getvalue()


def render_json(data: Any) -> str:
    return json.dumps(data, indent=2) + "\n"


def render_security(
    reports: Sequence[SecurityReport],
    fmt: OutputFormat,
    sweep: bool = False,
    max_secure: Optional[int] = None,
) -> str:
    """
    Render security rows.

    Args:
        reports: Rows to render
        fmt: Output format
        sweep: Include rs1 / mu columns (parameter sweeps)
        max_secure: Largest QCM-secure M, appended to text output when given

    Returns:
        Rendered report
    """
    columns = SWEEP_COLUMNS if sweep else TABLE_COLUMNS
    if fmt == OutputFormat.CSV:
        return render_csv([r.to_dict() for r in reports], columns)
    if fmt == OutputFormat.JSON:
        return render_json([{c: r.to_dict()[c] for c in columns} for r in reports])

    first = reports[0] if reports else None
    return SECURITY_TEMPLATE.render(
        rs1="varies" if sweep else f"{first.rs1:g}",
        mu="varies" if sweep else f"{first.mu:g}",
        rows=[_text_row(r) for r in reports],
        sweep=sweep,
        max_secure=max_secure,
    )


def render_validation(report: ValidationReport, fmt: OutputFormat) -> str:
    """Render a validation report."""
    records = [row.to_dict() for row in report.rows]
    if fmt == OutputFormat.CSV:
        return render_csv(records, VALIDATION_COLUMNS)
    if fmt == OutputFormat.JSON:
        return render_json({
            "M": report.params.M,
            "rs1": report.params.rs1,
            "mu": report.params.mu,
            "trials": report.cfg.trials,
            "seed": report.cfg.seed,
            "all_passed": report.all_passed,
            "rows": records,
        })
    return VALIDATION_TEMPLATE.render(
        M=report.params.M,
        rs1=f"{report.params.rs1:g}",
        mu=f"{report.params.mu:g}",
        trials=report.cfg.trials,
        seed=report.cfg.seed,
        rows=report.rows,
    )
