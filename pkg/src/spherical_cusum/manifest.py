"""
Run manifests and JSON-lines event records.

Every CLI output file gets a <stem>.manifest.json next to it recording the
command, parameters, seed, package version, wall time and output paths.
Timestamps live only in manifests and record files, never in payloads.
"""

from __future__ import annotations

import json
import logging
import uuid
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from spherical_cusum import __version__

logger = logging.getLogger(__name__)


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat().replace("+00:00", "Z")


def manifest_path(path: str | Path) -> Path:
    return Path(path).with_suffix(".manifest.json")


@dataclass
class RunManifest:
    command: str
    parameters: dict[str, Any]
    seed: int | None = None
    version: str = __version__
    wall_time: float = 0.0
    outputs: list[str] = field(default_factory=list)
    created_at: str = field(default_factory=_utc_now)

    def write(self, primary_output: str | Path) -> Path:
        """Write the manifest beside primary_output; returns its path."""
        path = manifest_path(primary_output)
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True, default=str) + "\n",
                        encoding="utf-8")
        logger.debug("Wrote manifest %s", path)
        return path


class RecordWriter:
    """
    Append-only JSON-lines writer.

    Each record gets timestamp, run_id and event_type fields unless it
    already has them.
    """

    def __init__(self, file_path: str | Path, run_id: str | None = None):
        self.file_path = Path(file_path)
        self.run_id = run_id or uuid.uuid4().hex[:8]
        self.file_handle = None

    def __enter__(self):
        self.file_handle = open(self.file_path, "w", encoding="utf-8")
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if self.file_handle:
            self.file_handle.close()
            self.file_handle = None

    def write(self, event: dict[str, Any]) -> None:
        record = dict(event)
        record.setdefault("event_type", "record")
        record.setdefault("timestamp", _utc_now())
        record.setdefault("run_id", self.run_id)
        if self.file_handle is None:
            raise RuntimeError("RecordWriter used outside its context manager")
        json.dump(record, self.file_handle, default=str, sort_keys=True)
        self.file_handle.write("\n")
        self.file_handle.flush()
