"""Append-only record persistence.

Every mutation is one JSON line in ``records.log``; a snapshot file holds
the folded state plus the count of log events it covers. Loading replays
any events past the snapshot, so replaying the log from scratch always
reconstructs the same state. Writes are serialized through a lock; reads
see plain dict copies.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Optional

LOG_NAME = "records.log"
SNAPSHOT_NAME = "snapshot.json"
SNAPSHOT_FORMAT = "vdpt.store-snapshot/1"


class OutcomeAlreadySet(Exception):
    pass


class UnknownRecord(Exception):
    pass


class RecordStore:
    def __init__(self, directory):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.log_path = self.dir / LOG_NAME
        self.snapshot_path = self.dir / SNAPSHOT_NAME
        self._lock = threading.Lock()
        self.records: dict[str, dict] = {}
        self.idempotency: dict[str, str] = {}
        self._next_id = 1
        self._events_applied = 0
        self._load()

    # -- state folding ------------------------------------------------------

    def _apply(self, event: dict) -> None:
        kind = event["event"]
        if kind == "create":
            record = event["record"]
            self.records[record["id"]] = record
            key = event.get("idempotency_key")
            if key:
                self.idempotency[key] = record["id"]
            num = int(record["id"].lstrip("r"))
            self._next_id = max(self._next_id, num + 1)
        elif kind == "outcome":
            self.records[event["record_id"]]["outcome"] = event["outcome"]
        else:
            raise ValueError(f"unknown event kind {kind!r}")

    def _load(self) -> None:
        start = 0
        if self.snapshot_path.exists():
            with open(self.snapshot_path, "r", encoding="utf-8") as fh:
                snap = json.load(fh)
            if snap.get("format") != SNAPSHOT_FORMAT:
                raise ValueError(f"unexpected snapshot format {snap.get('format')!r}")
            self.records = {r["id"]: r for r in snap["records"]}
            self.idempotency = dict(snap.get("idempotency", {}))
            self._next_id = int(snap.get("next_id", 1))
            start = int(snap.get("events_consumed", 0))
            self._events_applied = start
        if self.log_path.exists():
            with open(self.log_path, "r", encoding="utf-8") as fh:
                for i, line in enumerate(fh):
                    if i < start or not line.strip():
                        continue
                    self._apply(json.loads(line))
                    self._events_applied = i + 1

    def _append(self, event: dict) -> None:
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
        self._apply(event)
        self._events_applied += 1

    # -- public API ----------------------------------------------------------

    def create(self, record: dict, idempotency_key: Optional[str] = None) -> dict:
        with self._lock:
            if idempotency_key and idempotency_key in self.idempotency:
                return dict(self.records[self.idempotency[idempotency_key]])
            record = dict(record)
            record["id"] = f"r{self._next_id:06d}"
            event = {"event": "create", "record": record}
            if idempotency_key:
                event["idempotency_key"] = idempotency_key
            self._append(event)
            return dict(record)

    def set_outcome(self, record_id: str, outcome: str) -> dict:
        with self._lock:
            if record_id not in self.records:
                raise UnknownRecord(record_id)
            if self.records[record_id].get("outcome") is not None:
                raise OutcomeAlreadySet(record_id)
            self._append({"event": "outcome", "record_id": record_id, "outcome": outcome})
            return dict(self.records[record_id])

    def get(self, record_id: str) -> dict:
        with self._lock:
            if record_id not in self.records:
                raise UnknownRecord(record_id)
            return dict(self.records[record_id])

    def list_records(self) -> list[dict]:
        with self._lock:
            return [dict(r) for r in self.records.values()]

    def write_snapshot(self) -> None:
        with self._lock:
            snap = {
                "format": SNAPSHOT_FORMAT,
                "events_consumed": self._events_applied,
                "next_id": self._next_id,
                "records": list(self.records.values()),
                "idempotency": self.idempotency,
            }
            tmp = self.snapshot_path.with_suffix(".tmp")
            with open(tmp, "w", encoding="utf-8") as fh:
                json.dump(snap, fh, sort_keys=True)
            tmp.replace(self.snapshot_path)

    def state_digest(self) -> dict:
        """Full folded state, for replay-identity checks."""
        with self._lock:
            return {
                "records": {k: dict(v) for k, v in self.records.items()},
                "idempotency": dict(self.idempotency),
                "next_id": self._next_id,
            }

    @classmethod
    def replay_log_only(cls, directory) -> "RecordStore":
        """Rebuild state purely from the log, ignoring any snapshot."""
        store = cls.__new__(cls)
        store.dir = Path(directory)
        store.log_path = store.dir / LOG_NAME
        store.snapshot_path = store.dir / SNAPSHOT_NAME
        store._lock = threading.Lock()
        store.records = {}
        store.idempotency = {}
        store._next_id = 1
        store._events_applied = 0
        if store.log_path.exists():
            with open(store.log_path, "r", encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        store._apply(json.loads(line))
                        store._events_applied += 1
        return store
