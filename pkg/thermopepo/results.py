# thermopepo/results.py
import logging
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import pandas as pd

from thermopepo.exceptions import UsageError


def format_value(value) -> str:
    """Numbers as %.12g ('.' decimal, scientific below 1e-4), booleans as true/false, missing as empty."""
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return '' if math.isnan(value) else f"{value:.12g}"
    return str(value)


def results_frame(rows: Sequence[dict], columns: Sequence[str]) -> pd.DataFrame:
    frame = pd.DataFrame(list(rows), columns=list(columns))
    return frame.astype(object).where(frame.notna(), None)


def write_results(path: str | Path, rows: Sequence[dict], columns: Sequence[str],
                  command: Optional[str] = None) -> Path:
    """Writes rows as CSV; the timestamp goes into a leading '#' comment so bodies stay reproducible."""
    path = Path(path)
    if path.exists() and path.is_dir():
        raise UsageError(f"output path {path} is a directory")
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = results_frame(rows, columns)
    for column in frame.columns:
        frame[column] = frame[column].map(format_value)
    stamp = datetime.now(timezone.utc).strftime('%Y-%m-%dT%H:%M:%SZ')
    with open(path, 'w', encoding='utf-8', newline='') as handle:
        handle.write(f"# thermopepo {command or ''} generated {stamp}\n")
        frame.to_csv(handle, index=False, lineterminator='\n')
    logging.info(f"RESULTS: wrote {len(frame)} rows to {path}")
    return path


def read_results(path: str | Path) -> pd.DataFrame:
    return pd.read_csv(path, comment='#')


def runlog_path(output: str | Path) -> Path:
    output = Path(output)
    return output.with_name(f"{output.stem}_runlog.csv")
