"""Durable session persistence: one directory per session.

Layout: ``header.json`` (identity and schema), ``events.jsonl`` (append-only
log, the source of truth), ``snapshot.json`` (state as of some event, purely
an optimization).  Whole-file writes go through a temp file and rename so a
crash never leaves a half-written header or snapshot.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from .errors import NotFoundError, ValidationError
from .ontology import Ontology
from .session import Session, SessionEvent

STORE_SCHEMA = "1"
SNAPSHOT_EVERY = 20


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


class SessionStore:
    def __init__(self, root) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _dir(self, session_id: str) -> Path:
        if not session_id or "/" in session_id or session_id.startswith("."):
            raise ValidationError(f"invalid session id {session_id!r}")
        return self.root / session_id

    def exists(self, session_id: str) -> bool:
        return (self._dir(session_id) / "header.json").is_file()

    def list_ids(self) -> list[str]:
        return sorted(
            p.name for p in self.root.iterdir() if (p / "header.json").is_file()
        )

    def save_new(self, session: Session) -> None:
        d = self._dir(session.session_id)
        if (d / "header.json").exists():
            raise ValidationError(f"session {session.session_id!r} already exists")
        d.mkdir(parents=True, exist_ok=True)
        header = {"schema": STORE_SCHEMA, "session_id": session.session_id}
        _write_atomic(d / "header.json", json.dumps(header, indent=2) + "\n")
        (d / "events.jsonl").touch()
        self.append_events(session, from_seq=0)

    def append_events(self, session: Session, from_seq: int) -> None:
        """Persist events with seq > from_seq and refresh the snapshot when
        enough have accumulated since the last one.
        """
        d = self._dir(session.session_id)
        new = [ev for ev in session.events if ev.seq > from_seq]
        if not new:
            return
        with open(d / "events.jsonl", "a", encoding="utf-8") as fh:
            for ev in new:
                fh.write(json.dumps(ev.as_dict(), ensure_ascii=False) + "\n")
        last_snap = self._snapshot_seq(d)
        if session.version - last_snap >= SNAPSHOT_EVERY:
            snap = {"schema": STORE_SCHEMA, "state": session.state_dict()}
            _write_atomic(d / "snapshot.json", json.dumps(snap, ensure_ascii=False) + "\n")

    def _snapshot_seq(self, d: Path) -> int:
        path = d / "snapshot.json"
        if not path.is_file():
            return 0
        try:
            snap = json.loads(path.read_text("utf-8"))
            return int(snap["state"]["version"])
        except (ValueError, KeyError):
            return 0

    def _read_events(self, d: Path) -> list[SessionEvent]:
        events = []
        with open(d / "events.jsonl", encoding="utf-8") as fh:
            for i, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    events.append(SessionEvent.from_dict(json.loads(line)))
                except (ValueError, KeyError) as exc:
                    raise ValidationError(
                        f"corrupt event log line {i} in {d.name}: {exc}"
                    ) from exc
        return events

    def load(self, session_id: str, ontology: Ontology | None = None) -> Session:
        """Rebuild a session, from the snapshot plus the tail of the log when
        a snapshot exists, otherwise by full replay.
        """
        d = self._dir(session_id)
        if not (d / "header.json").is_file():
            raise NotFoundError(f"no session {session_id!r} in store")
        events = self._read_events(d)
        snap_path = d / "snapshot.json"
        if snap_path.is_file():
            snap = json.loads(snap_path.read_text("utf-8"))
            state = snap["state"]
            if state["version"] <= len(events):
                return Session.from_state_dict(state, events, ontology=ontology)
        return Session.replay(events, ontology=ontology)

    def load_by_replay(self, session_id: str, ontology: Ontology | None = None) -> Session:
        """Rebuild strictly from the event log, ignoring any snapshot."""
        d = self._dir(session_id)
        if not (d / "header.json").is_file():
            raise NotFoundError(f"no session {session_id!r} in store")
        return Session.replay(self._read_events(d), ontology=ontology)
