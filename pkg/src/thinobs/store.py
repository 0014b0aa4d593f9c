"""Result records, the content-addressed cache and the CSV writer.

A record is ``{schema_version, kind, key, payload, provenance}``.  Its address is
the SHA-256 of the canonical JSON of ``[kind, key]``, so the same parameters
always land in the same file.  Floats are written with ``repr`` (shortest
round-trip) both in JSON and CSV, which keeps payloads bit-exact.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import os
import tempfile
import threading
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence

import numpy as np

SCHEMA_VERSION = 1
KINDS = ("legendre", "eigen", "bundle", "root", "gap", "variant", "trend", "cpoint", "scan")
CACHE_ENV = "THINOBS_CACHE"


def code_version() -> str:
    from . import __version__

    return __version__


def to_plain(obj: Any) -> Any:
    """Convert dataclasses, numpy scalars/arrays and tuples into JSON-ready builtins."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)
                if not f.name.startswith("_")}
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def canonical_json(obj: Any) -> str:
    return json.dumps(to_plain(obj), sort_keys=True, separators=(",", ":"), allow_nan=True)


def key_digest(kind: str, key: Sequence) -> str:
    return hashlib.sha256(canonical_json([kind, list(key)]).encode()).hexdigest()


@dataclasses.dataclass
class ResultRecord:
    schema_version: int
    kind: str
    key: list
    payload: Any
    provenance: dict

    def to_json(self) -> str:
        return json.dumps(to_plain(self), sort_keys=True, indent=1, allow_nan=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ResultRecord":
        raw = json.loads(text)
        if raw.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema version {raw.get('schema_version')!r}")
        return cls(**raw)


def make_record(kind: str, key: Sequence, payload: Any, resolution_chain=None, timestamp: bool = True) -> ResultRecord:
    if kind not in KINDS:
        raise ValueError(f"unknown record kind {kind!r}")
    prov = {"code_version": code_version(), "resolution_chain": to_plain(resolution_chain or [])}
    if timestamp:
        prov["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return ResultRecord(SCHEMA_VERSION, kind, to_plain(list(key)), to_plain(payload), prov)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class RecordStore:
    """Content-addressed directory of records; writes go through one lock per store."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def path_for(self, kind: str, key: Sequence) -> Path:
        return self.root / kind / f"{key_digest(kind, key)}.json"

    def get_record(self, kind: str, key: Sequence) -> Optional[ResultRecord]:
        path = self.path_for(kind, key)
        if not path.exists():
            return None
        return ResultRecord.from_json(path.read_text(encoding="utf-8"))

    def get(self, kind: str, key: Sequence):
        rec = self.get_record(kind, key)
        return None if rec is None else rec.payload

    def put(self, kind: str, key: Sequence, payload: Any, resolution_chain=None) -> Path:
        rec = make_record(kind, key, payload, resolution_chain)
        path = self.path_for(kind, key)
        with self._lock:
            _atomic_write(path, rec.to_json())
        return path


def default_cache_dir(flag: Optional[str] = None) -> Optional[Path]:
    """Cache directory: the flag if given, else the environment override, else none."""
    if flag:
        return Path(flag)
    env = os.environ.get(CACHE_ENV)
    return Path(env) if env else None


def format_cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        return repr(value)
    if value is None:
        return ""
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """RFC 4180 CSV (CRLF line ends, minimal quoting) with shortest round-trip floats."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([format_cell(v) for v in row])
    return path


def read_csv(path) -> List[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def write_json(path, obj: Any) -> Path:
    """Deterministic JSON output (sorted keys, no timestamps added)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_plain(obj), sort_keys=True, indent=1, allow_nan=True) + "\n", encoding="utf-8")
    return path
