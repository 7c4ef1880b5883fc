"""HTTP interface over sessions, evaluation, and corpus stats.

All mutating session routes take an optional ``expected_version`` in the
body; when it no longer matches, the service answers 412 so a stale client
can reload instead of silently clobbering newer edits.  Annotation conflicts
answer 409 with the pending prompt attached.
"""

from __future__ import annotations

import json
import threading
import uuid
from pathlib import Path

from fastapi import Body, FastAPI, Request
from fastapi.responses import JSONResponse

from . import __version__
from .corpus import compute_stats, load_corpus
from .dialogue import SpanAnnotation
from .errors import (
    BackendError,
    ContextOverflowError,
    DialweaveError,
    GenerationError,
    InconsistencyError,
    NotFoundError,
    ParameterError,
    ParseError,
    ScriptExhaustedError,
    StaleReferenceError,
    StateError,
    ValidationError,
)
from .metrics import DialoguePrediction, evaluate_corpus
from .corpus import Corpus
from .ontology import Ontology, builtin_ontology, render_ontology
from .scenario import ScenarioSpec, sample_scenario
from .session import Session, generate_story, generate_subdialogue
from .store import SessionStore

_STATUS_BY_CODE = {
    ValidationError: 400,
    ParameterError: 400,
    ParseError: 400,
    NotFoundError: 404,
    StateError: 409,
    InconsistencyError: 409,
    StaleReferenceError: 412,
    ContextOverflowError: 413,
    GenerationError: 502,
    ScriptExhaustedError: 502,
    BackendError: 502,
}


def _status_for(exc: DialweaveError) -> int:
    for klass, status in _STATUS_BY_CODE.items():
        if isinstance(exc, klass):
            return status
    return 500


def _error_body(exc: DialweaveError) -> dict:
    body = {"code": exc.code, "message": str(exc)}
    violations = getattr(exc, "violations", None)
    if violations:
        body["details"] = list(violations)
    return {"error": body}


class _Sessions:
    """In-memory handle cache over the store, one lock per session."""

    def __init__(self, store: SessionStore, ontology: Ontology):
        self.store = store
        self.ontology = ontology
        self._handles: dict[str, dict] = {}
        self._registry_lock = threading.Lock()

    def add(self, session: Session) -> dict:
        self.store.save_new(session)
        handle = {"session": session, "lock": threading.Lock(), "persisted": session.version}
        with self._registry_lock:
            self._handles[session.session_id] = handle
        return handle

    def get(self, session_id: str) -> dict:
        with self._registry_lock:
            handle = self._handles.get(session_id)
            if handle is None:
                session = self.store.load(session_id, ontology=self.ontology)
                handle = {
                    "session": session,
                    "lock": threading.Lock(),
                    "persisted": session.version,
                }
                self._handles[session_id] = handle
            return handle

    def sync(self, handle: dict) -> None:
        session = handle["session"]
        self.store.append_events(session, from_seq=handle["persisted"])
        handle["persisted"] = session.version

    def ids(self) -> list[str]:
        return self.store.list_ids()


def create_app(
    store_dir,
    backend,
    ontology: Ontology | None = None,
    corpus_dir=None,
) -> FastAPI:
    ontology = ontology or builtin_ontology()
    sessions = _Sessions(SessionStore(store_dir), ontology)
    app = FastAPI(title="dialweave", version=__version__)

    @app.exception_handler(DialweaveError)
    def _handle(request: Request, exc: DialweaveError):
        return JSONResponse(status_code=_status_for(exc), content=_error_body(exc))

    def _check_version(session: Session, payload: dict) -> JSONResponse | None:
        expected = payload.get("expected_version")
        if expected is not None and expected != session.version:
            return JSONResponse(
                status_code=412,
                content={
                    "error": {
                        "code": "version_conflict",
                        "message": f"expected version {expected}, session is at {session.version}",
                        "current_version": session.version,
                    }
                },
            )
        return None

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.get("/ontology")
    def get_ontology():
        return json.loads(render_ontology(ontology))

    @app.get("/sessions")
    def list_sessions():
        return {"sessions": sessions.ids()}

    @app.post("/sessions", status_code=201)
    def create_session(payload: dict = Body(default={})):
        session_id = payload.get("session_id") or f"s-{uuid.uuid4().hex[:12]}"
        if sessions.store.exists(session_id):
            raise ValidationError(f"session {session_id!r} already exists")
        if "scenario" in payload:
            spec = ScenarioSpec.from_dict(payload["scenario"])
        else:
            seed = payload.get("seed")
            if seed is None:
                seed = int.from_bytes(uuid.uuid4().bytes[:4], "big")
            spec = sample_scenario(
                ontology, seed=seed, count=payload.get("triplet_count", 3)
            )
        session = Session.create(session_id, spec, ontology=ontology)
        generate_story(session, backend)
        handle = sessions.add(session)
        sessions.sync(handle)
        return session.view()

    def _mutate(session_id: str, payload: dict, op):
        handle = sessions.get(session_id)
        with handle["lock"]:
            session = handle["session"]
            stale = _check_version(session, payload)
            if stale is not None:
                return stale
            result = op(session)
            sessions.sync(handle)
            return result

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        handle = sessions.get(session_id)
        with handle["lock"]:
            return handle["session"].view()

    @app.post("/sessions/{session_id}/subdialogue:propose")
    def propose(session_id: str, payload: dict = Body(default={})):
        def op(session: Session):
            generate_subdialogue(session, backend, instruction=payload.get("instruction"))
            return session.view()

        return _mutate(session_id, payload, op)

    @app.post("/sessions/{session_id}/subdialogue:regenerate")
    def regenerate(session_id: str, payload: dict = Body(default={})):
        def op(session: Session):
            generate_subdialogue(
                session, backend, instruction=payload.get("instruction"), regenerate=True
            )
            return session.view()

        return _mutate(session_id, payload, op)

    @app.patch("/sessions/{session_id}/turns/{index}")
    def edit_turn(session_id: str, index: int, payload: dict = Body(default={})):
        text = payload.get("text")
        if not isinstance(text, str):
            raise ParameterError('body must carry the new "text"')

        def op(session: Session):
            session.edit_turn(index, text)
            return session.view()

        return _mutate(session_id, payload, op)

    @app.delete("/sessions/{session_id}/turns/{index}")
    def delete_turn(session_id: str, index: int, payload: dict = Body(default={})):
        def op(session: Session):
            session.delete_turn(index)
            return session.view()

        return _mutate(session_id, payload, op)

    @app.post("/sessions/{session_id}/annotations")
    def annotate(session_id: str, payload: dict = Body(default={})):
        body = payload.get("annotation", payload)
        try:
            annotation = SpanAnnotation.from_dict(body)
        except (KeyError, TypeError) as exc:
            raise ParameterError(f"annotation body is missing field {exc}") from exc

        def op(session: Session):
            conflict = session.annotate(annotation)
            if conflict is not None:
                return JSONResponse(
                    status_code=409,
                    content={
                        "conflict": conflict.as_dict(),
                        "version": session.version,
                    },
                )
            return JSONResponse(
                status_code=201,
                content={
                    "accepted": True,
                    "annotation": annotation.as_dict(),
                    "state": session.state().as_dict(),
                    "version": session.version,
                },
            )

        return _mutate(session_id, payload, op)

    @app.post("/sessions/{session_id}/conflicts/{conflict_id}:resolve")
    def resolve(session_id: str, conflict_id: str, payload: dict = Body(default={})):
        resolution = payload.get("resolution")
        if not isinstance(resolution, str):
            raise ParameterError('body must carry a "resolution"')

        def op(session: Session):
            session.resolve_conflict(conflict_id, resolution, payload.get("target"))
            return {
                "resolved": conflict_id,
                "state": session.state().as_dict(),
                "version": session.version,
            }

        return _mutate(session_id, payload, op)

    @app.post("/sessions/{session_id}:commit")
    def commit(session_id: str, payload: dict = Body(default={})):
        def op(session: Session):
            session.commit()
            return session.view()

        return _mutate(session_id, payload, op)

    @app.post("/sessions/{session_id}:reject-ending")
    def reject_ending(session_id: str, payload: dict = Body(default={})):
        def op(session: Session):
            session.reject_ending()
            return session.view()

        return _mutate(session_id, payload, op)

    @app.post("/sessions/{session_id}:complete")
    def complete_session(session_id: str, payload: dict = Body(default={})):
        def op(session: Session):
            session.complete(force=bool(payload.get("force")))
            view = session.view()
            view["document"] = session.to_document().as_dict()
            return view

        return _mutate(session_id, payload, op)

    @app.get("/sessions/{session_id}/state")
    def get_state(session_id: str):
        handle = sessions.get(session_id)
        with handle["lock"]:
            session = handle["session"]
            return {"state": session.state().as_dict(), "version": session.version}

    @app.post("/evaluate")
    def evaluate(payload: dict = Body(default={})):
        if "gold" not in payload or "predictions" not in payload:
            raise ParameterError('body must carry "gold" and "predictions"')
        gold = Corpus.from_dict(payload["gold"])
        preds = {}
        for entry in payload["predictions"].get("predictions", []):
            pred = DialoguePrediction.from_dict(entry)
            if pred.dialogue_id in preds:
                raise ValidationError(f"duplicate prediction for dialogue {pred.dialogue_id!r}")
            preds[pred.dialogue_id] = pred
        report = evaluate_corpus(gold.documents, preds, ontology=ontology)
        return report.as_dict()

    @app.get("/corpora/{corpus_id}/stats")
    def corpus_stats(corpus_id: str):
        if corpus_dir is None:
            raise NotFoundError("no corpus directory configured")
        if "/" in corpus_id or corpus_id.startswith("."):
            raise ValidationError(f"invalid corpus id {corpus_id!r}")
        path = Path(corpus_dir) / f"{corpus_id}.json"
        if not path.is_file():
            raise NotFoundError(f"no corpus {corpus_id!r}")
        return compute_stats(load_corpus(path))

    return app
