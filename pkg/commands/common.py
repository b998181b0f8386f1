import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import click
import typer
from pydantic import BaseModel

from dependencies import Stopwatch
from errors import InvariantViolation
from schemas import Report, Violation
from storage import write_report

logger = logging.getLogger(__name__)

# typer.Option has no open-interval flag; click does.
POSITIVE = click.FloatRange(min=0.0, min_open=True)


def digest(params: Mapping[str, Any]) -> str:
    """sha256 of the canonical JSON of the command inputs."""
    text = json.dumps(params, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()


def parse_floats(text: Optional[str], option: str) -> Optional[List[float]]:
    if text is None:
        return None
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise typer.BadParameter(f"expected comma-separated numbers, got {text!r}", param_hint=option)


def dump(model: BaseModel) -> Dict[str, Any]:
    return model.model_dump()


def finish(
    command: str,
    params: Mapping[str, Any],
    results: Dict[str, Any],
    violations: List[Violation],
    watch: Stopwatch,
    report_path: Optional[Path],
    seed: Optional[int] = None,
    budgets: Optional[Dict[str, int]] = None,
) -> Report:
    """Assemble the report, write it, and fail with exit code 2 on violations."""
    report = Report(
        command=command,
        input_digest=digest(params),
        seed=seed,
        budgets=budgets or {},
        results=results,
        violations=violations,
        wall_time=watch.lap(),
    )
    if report_path is not None:
        write_report(report_path, report)
        logger.info("report written to %s", report_path)
    for v in violations:
        logger.warning("violation %s: %s", v.check, v.detail)
    if violations:
        raise InvariantViolation(", ".join(v.check for v in violations))
    return report
