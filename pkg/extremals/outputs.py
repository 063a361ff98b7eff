"""CSV output files: number formatting, atomic writes, and reading solutions back."""

import time
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np


def format_number(value: Any) -> str:
    """Render a value with 17 significant digits, independent of locale."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), '.17g')
    return str(value)


def render_csv(
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    comments: Iterable[str] = (),
) -> str:
    """Build the text of a CSV file with leading '# ' comment lines."""
    lines: List[str] = [f"# {c}" for c in comments]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(format_number(v) for v in row))
    return "\n".join(lines) + "\n"


def write_text_atomic(filepath: Path, text: str):
    """Write a file through a temporary sibling and an atomic replace."""
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    temp_file = filepath.with_suffix(filepath.suffix + '.tmp')
    with open(temp_file, 'w', encoding='utf-8', newline='\n') as f:
        f.write(text)

    # Retry the replace a few times (the target can be briefly locked on some filesystems)
    for attempt in range(5):
        try:
            temp_file.replace(filepath)
            return
        except PermissionError:
            if attempt < 4:
                time.sleep(0.2)
            else:
                with open(filepath, 'w', encoding='utf-8', newline='\n') as f:
                    f.write(text)
                if temp_file.exists():
                    temp_file.unlink()


def write_csv(
    filepath: Path,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    comments: Iterable[str] = (),
) -> Path:
    """Write a CSV file atomically and return its path."""
    write_text_atomic(Path(filepath), render_csv(header, rows, comments))
    return Path(filepath)


def read_solution_csv(filepath: Path) -> Tuple[Dict[str, str], List[str], np.ndarray]:
    """Read a solution.csv file.

    Returns the '# key=value' metadata, the column names, and the numeric
    table (one row per node).
    """
    filepath = Path(filepath)
    if not filepath.exists():
        raise FileNotFoundError(f"Solution file not found: {filepath}")

    metadata: Dict[str, str] = {}
    header: Optional[List[str]] = None
    rows: List[List[float]] = []
    with open(filepath, 'r', encoding='utf-8') as f:
        for line in f:
            line = line.rstrip('\n')
            if not line:
                continue
            if line.startswith('#'):
                key, sep, value = line[1:].strip().partition('=')
                if sep:
                    metadata[key.strip()] = value.strip()
                continue
            if header is None:
                header = line.split(',')
                continue
            rows.append([float(v) for v in line.split(',')])

    if header is None:
        raise ValueError(f"No header row in {filepath}")
    return metadata, header, np.array(rows, dtype=float).reshape(-1, len(header))
