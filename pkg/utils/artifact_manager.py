"""
Artifact Utilities - atomic writers for run outputs
"""
import json
import math
import os
import tempfile
from contextlib import contextmanager
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd
import structlog


def json_safe(value: Any) -> Any:
    """Plain JSON value: numpy scalars and arrays unwrapped, non-finite floats as None."""
    if isinstance(value, dict):
        return {str(k): json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    if isinstance(value, np.ndarray):
        return [json_safe(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def canonical_line(record: Dict[str, Any]) -> str:
    return json.dumps(json_safe(record), sort_keys=True, separators=(",", ":"), allow_nan=False)


class ArtifactManager:
    """
    Writes every output file of a run through temp-file-and-rename, so an interrupted
    run never leaves a truncated data file behind.
    """

    def __init__(self, directory: str, manifest_hash: str):
        self.directory = directory
        self.manifest_hash = manifest_hash
        self.counts: Dict[str, int] = {}
        self.files: List[str] = []
        self.logger = structlog.get_logger(__name__)

    @contextmanager
    def _atomic(self, filename: str):
        os.makedirs(self.directory, exist_ok=True)
        target = os.path.join(self.directory, filename)
        fd, tmp_path = tempfile.mkstemp(prefix=f".{filename}.", dir=self.directory)
        try:
            with os.fdopen(fd, "w", newline="") as handle:
                yield handle
            os.replace(tmp_path, target)
        except BaseException:
            if os.path.exists(tmp_path):
                os.remove(tmp_path)
            raise
        self.files.append(filename)
        self.logger.debug("artifact written", path=target)

    def write_jsonl(self, filename: str, records: Iterable[Dict[str, Any]]) -> int:
        """One sorted-key JSON record per line, each tagged with the manifest hash."""
        written = 0
        with self._atomic(filename) as handle:
            for record in records:
                line = canonical_line({**record, "manifest_hash": self.manifest_hash})
                handle.write(line + "\n")
                written += 1
                op = record.get("op", "record")
                self.counts[op] = self.counts.get(op, 0) + 1
        return written

    def write_csv(self, filename: str, frame: pd.DataFrame):
        with self._atomic(filename) as handle:
            handle.write(f"# manifest {self.manifest_hash}\n")
            frame.to_csv(handle, index=False)

    def write_table(self, filename: str, columns: Sequence[str], rows: Sequence[Sequence[Any]]):
        """Whitespace-separated table with a '# manifest' header row and a '#' column row."""
        with self._atomic(filename) as handle:
            handle.write(f"# manifest {self.manifest_hash}\n")
            handle.write("# " + " ".join(columns) + "\n")
            for row in rows:
                handle.write(" ".join(_format_cell(v) for v in row) + "\n")

    def write_json(self, filename: str, document: Dict[str, Any]):
        with self._atomic(filename) as handle:
            json.dump(json_safe(document), handle, indent=2, sort_keys=True)
            handle.write("\n")

    def write_manifest(self, subcommand: str, version: str, wall_clock_seconds: float,
                       extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        """manifest.json with the config hash, version, wall clock and per-op record counts."""
        manifest = {
            "manifest_hash": self.manifest_hash,
            "artifact_version": version,
            "subcommand": subcommand,
            "wall_clock_seconds": wall_clock_seconds,
            "record_counts": dict(sorted(self.counts.items())),
            "files": sorted(self.files),
        }
        if extra:
            manifest.update(extra)
        self.write_json("manifest.json", manifest)
        return manifest


def _format_cell(value: Any) -> str:
    if value is None:
        return "nan"
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def read_jsonl(path: str) -> List[Dict[str, Any]]:
    """Records of a JSONL file; blank lines ignored."""
    with open(path, "r") as handle:
        return [json.loads(line) for line in handle if line.strip()]
