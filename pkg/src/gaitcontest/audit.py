"""Append-only, hash-chained audit records for case mutations.

Each case carries its own chain: entry hashes commit to the previous hash
and the entry's canonical JSON, with a fixed domain-separation constant
hashed into the genesis link. Verification recomputes every link and fails
closed on any parse problem, so a single flipped byte anywhere in the
serialized log is detected.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, Iterable

_DOMAIN_CONSTANT = b"gaitcontest-audit-v1"
GENESIS_HASH = hashlib.sha256(_DOMAIN_CONSTANT).hexdigest()


@dataclass(frozen=True)
class AuditEntry:
    case_id: str
    seq: int
    timestamp: str
    actor: str
    action: str
    payload: dict
    prev_hash: str
    hash: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def _content_digest(case_id: str, seq: int, timestamp: str, actor: str,
                    action: str, payload: dict, prev_hash: str) -> str:
    content = json.dumps(
        {"case_id": case_id, "seq": seq, "timestamp": timestamp,
         "actor": actor, "action": action, "payload": payload},
        sort_keys=True, separators=(",", ":"),
    )
    h = hashlib.sha256()
    h.update(prev_hash.encode("ascii"))
    h.update(content.encode("utf-8"))
    return h.hexdigest()


def make_entry(case_id: str, seq: int, actor: str, action: str, payload: dict,
               prev_hash: str, timestamp: str | None = None) -> AuditEntry:
    """Build and seal one entry; prev_hash is GENESIS_HASH for seq 0."""
    ts = timestamp if timestamp is not None else utc_now_iso()
    digest = _content_digest(case_id, seq, ts, actor, action, payload, prev_hash)
    return AuditEntry(case_id, seq, ts, actor, action, payload, prev_hash, digest)


def append_entry(entries: list[AuditEntry], case_id: str, actor: str, action: str,
                 payload: dict, timestamp: str | None = None) -> AuditEntry:
    """Append the next link to a case's chain held as a list."""
    prev = entries[-1].hash if entries else GENESIS_HASH
    entry = make_entry(case_id, len(entries), actor, action, payload, prev, timestamp)
    entries.append(entry)
    return entry


def verify_entries(entries: Iterable[AuditEntry]) -> bool:
    """True iff the chain hashes recompute and link correctly from genesis."""
    prev = GENESIS_HASH
    for i, e in enumerate(entries):
        if e.seq != i or e.prev_hash != prev:
            return False
        digest = _content_digest(e.case_id, e.seq, e.timestamp, e.actor,
                                 e.action, e.payload, e.prev_hash)
        if digest != e.hash:
            return False
        prev = e.hash
    return True


def entry_from_json(line: str) -> AuditEntry:
    obj = json.loads(line)
    return AuditEntry(
        case_id=obj["case_id"], seq=int(obj["seq"]), timestamp=obj["timestamp"],
        actor=obj["actor"], action=obj["action"], payload=obj["payload"],
        prev_hash=obj["prev_hash"], hash=obj["hash"],
    )


def parse_log_lines(lines: Iterable[str]) -> dict[str, list[AuditEntry]]:
    """Group serialized entries by case, preserving order within each case."""
    chains: dict[str, list[AuditEntry]] = {}
    for line in lines:
        line = line.strip()
        if not line:
            continue
        entry = entry_from_json(line)
        chains.setdefault(entry.case_id, []).append(entry)
    return chains


def verify_log_lines(lines: Iterable[str]) -> bool:
    """Verify every case chain in a serialized log; malformed input is False."""
    try:
        chains = parse_log_lines(lines)
    except (ValueError, KeyError, TypeError):
        return False
    return all(verify_entries(chain) for chain in chains.values())


class AuditLog:
    """JSONL-file-backed log, flushed durably on every append."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def append(self, entry: AuditEntry) -> None:
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(entry.to_json())
            fh.write("\n")
            fh.flush()
            os.fsync(fh.fileno())

    def load(self) -> dict[str, list[AuditEntry]]:
        if not self.path.exists():
            return {}
        with self.path.open("r", encoding="utf-8") as fh:
            return parse_log_lines(fh)

    def verify(self) -> bool:
        if not self.path.exists():
            return True
        with self.path.open("r", encoding="utf-8") as fh:
            return verify_log_lines(fh)
