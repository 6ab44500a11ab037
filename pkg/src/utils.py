"""Utility functions shared by the library and the CLI"""

import os
import sys
import json
import math
import logging
from pathlib import Path
from typing import Dict, Any, Optional, List, Iterable

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def configure_logging(verbose: bool = False, log_file: Optional[str] = None) -> None:
    """
    Configure root logging for command-line use.

    Log records go to stderr so that stdout only carries report data.

    Args:
        verbose: Enable DEBUG level
        log_file: Optional path of an additional log file
    """
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )


def ensure_parent_directory(filepath: Path) -> Path:
    """
    Create the parent directory of an output file.

    Args:
        filepath: Path of the file about to be written

    Returns:
        The same path
    """
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    return filepath


def jsonl_line(record: Dict[str, Any]) -> str:
    """Serialize one record as a compact JSON line, newline included."""
    return json.dumps(record, separators=(',', ':')) + '\n'


def write_jsonl(records: Iterable[Dict[str, Any]], filepath: Path) -> int:
    """
    Write records as JSON Lines, one compact object per line.

    Args:
        records: Iterable of JSON-serializable dictionaries
        filepath: Path to output file

    Returns:
        Number of lines written
    """
    ensure_parent_directory(filepath)
    count = 0
    with open(filepath, 'w') as f:
        for record in records:
            f.write(jsonl_line(record))
            count += 1
    logger.info(f"Wrote {count} line(s) to {filepath}")
    return count


def read_jsonl(filepath: Path) -> List[Dict[str, Any]]:
    """
    Read a JSON Lines file, skipping blank lines.

    Args:
        filepath: Path to JSON Lines file

    Returns:
        List of parsed objects
    """
    records = []
    with open(filepath, 'r') as f:
        for line in f:
            if line.strip():
                records.append(json.loads(line))
    return records


def get_env_int(name: str) -> Optional[int]:
    """
    Read an integer from the environment.

    Args:
        name: Variable name (e.g. QBSC_SEED)

    Returns:
        Parsed integer, or None when unset or empty

    Raises:
        ValueError: If the variable is set but not an integer
    """
    raw = os.environ.get(name)
    if raw is None or not raw.strip():
        return None
    try:
        return int(raw.strip(), 0)
    except ValueError:
        raise ValueError(f"{name} must be an integer, got {raw!r}")


def truncate_decimal(value: float, decimals: int) -> str:
    """
    Format a non-negative value cut (not rounded) to a number of decimals.

    Digits past the last place are dropped, e.g. 40.5107 -> "40.510".

    Args:
        value: Value to format
        decimals: Digits after the decimal point

    Returns:
        Formatted string
    """
    scale = 10 ** decimals
    # nudge by a few ulps so exact decimals like 0.29 survive the floor
    cut = math.floor(value * scale * (1 + 1e-12)) / scale
    return f"{cut:.{decimals}f}"
