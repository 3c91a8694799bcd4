"""
CSV output for completion records.
"""
from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable, List, Optional, TextIO

from src.schemas import CompletionRecord, RunManifest

CSV_COLUMNS = [
    "scheme",
    "n",
    "z",
    "b",
    "m",
    "ell",
    "scenario",
    "adversary_rule",
    "trial",
    "seed",
    "completion_time_s",
    "packets_sent",
    "epsilon_observed",
]


def _cell(value) -> str:
    if value is None:
        return ""
    if hasattr(value, "value"):
        return str(value.value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def record_row(record: CompletionRecord) -> List[str]:
    data = record.dict()
    return [_cell(data[column]) for column in CSV_COLUMNS]


def write_records(
    stream: TextIO,
    records: Iterable[CompletionRecord],
    manifest: Optional[RunManifest] = None,
) -> None:
    """Manifest comment line, header, one row per record."""
    if manifest is not None:
        stream.write(manifest.to_comment() + "\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for record in records:
        writer.writerow(record_row(record))


def records_to_csv(records: Iterable[CompletionRecord], manifest: Optional[RunManifest] = None) -> str:
    buffer = io.StringIO()
    write_records(buffer, records, manifest)
    return buffer.getvalue()


def save_records(
    path: Path,
    records: Iterable[CompletionRecord],
    manifest: Optional[RunManifest] = None,
) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        write_records(handle, records, manifest)


def read_records(path: Path) -> List[dict]:
    """Rows as dicts, skipping the manifest line."""
    with path.open(newline="", encoding="utf-8") as handle:
        lines = [line for line in handle if not line.startswith("#")]
    return list(csv.DictReader(lines))
