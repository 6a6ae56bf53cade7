"""
CSV and manifest writers for experiment artifacts.
"""

import csv
import logging
import math
from numbers import Integral, Real
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

from pydantic import BaseModel

from nqlab.core.config import settings

logger = logging.getLogger(__name__)


def format_value(value: Any, digits: Optional[int] = None) -> str:
    """
    Render one CSV cell.

    Floats use a fixed number of significant digits so repeated runs produce
    byte-identical files.
    """
    digits = settings.CSV_SIGNIFICANT_DIGITS if digits is None else digits
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Integral):
        return str(int(value))
    if isinstance(value, Real):
        number = float(value)
        if math.isnan(number):
            return "nan"
        if math.isinf(number):
            return "inf" if number > 0 else "-inf"
        return format(number, f".{digits}g")
    if hasattr(value, "value"):
        return str(value.value)
    return str(value)


def write_csv(path: Path, rows: Iterable[Dict[str, Any]], fieldnames: Sequence[str]) -> Path:
    """
    Write rows to path with a header line.

    Args:
        path: Destination file; parent directories are created
        rows: Mappings keyed by field name; missing keys become empty cells
        fieldnames: Column order

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(fieldnames), lineterminator="\n")
        writer.writeheader()
        count = 0
        for row in rows:
            writer.writerow({name: format_value(row.get(name)) for name in fieldnames})
            count += 1
    logger.info(f"Wrote {count} rows to {path}")
    return path


def write_manifest(path: Path, manifest: BaseModel) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.info(f"Wrote manifest to {path}")
    return path


def rows_from_models(models: Iterable[BaseModel], fields: List[str]) -> List[Dict[str, Any]]:
    return [{name: getattr(model, name) for name in fields} for model in models]
