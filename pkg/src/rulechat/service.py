"""HTTP service: rule catalog, dialog sessions, study export.

Sessions are persisted as append-only event logs (one JSONL file per
session); every view of a session is a fold over its events, so a
service restart loses nothing.  Two study arms are supported: "agent"
runs the dialog pipeline, "reading" hands the user the raw rule text
and only records their conclusion.
"""

from __future__ import annotations

import json
import os
import re
import secrets
import threading
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from fastapi import FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import __version__
from .core import (
    AnswerKind,
    HistoryTurn,
    NO,
    PipelineError,
    TERMINAL_ANSWERS,
    ValidationError,
    YES,
    make_utterance,
)
from .parsing import RuleLogic, parse_rule
from .pipeline import (
    AgentResponse,
    Components,
    SessionState,
    default_max_steps,
    heuristic_components,
    step,
)

AGENT = "agent"
READING = "reading"
MODES = (AGENT, READING)

AWAITING_USER = "awaiting_user"
FINISHED = "finished"
ABORTED = "aborted"

DEFAULT_IDLE_TIMEOUT_S = 24 * 60 * 60.0

_SESSION_ID_RE = re.compile(r"[A-Za-z0-9_-]{16,}")


class ApiError(Exception):
    """Error carrying the HTTP status and the response envelope."""

    def __init__(self, status_code: int, code: str, detail: str) -> None:
        super().__init__(detail)
        self.status_code = status_code
        self.code = code
        self.detail = detail


def _not_found(detail: str) -> ApiError:
    return ApiError(404, "not_found", detail)


def _conflict(detail: str) -> ApiError:
    return ApiError(409, "conflict", detail)


def _bad_request(detail: str) -> ApiError:
    return ApiError(400, "validation", detail)


# --- rule catalog ---------------------------------------------------------------


@dataclass(frozen=True)
class RuleCatalogEntry:
    rule_id: str
    title: str
    rule_text: str
    source_url: str = ""
    question: str = ""  # suggested opening question for the UI


class RuleCatalog:
    def __init__(self, entries: list[RuleCatalogEntry]) -> None:
        self._by_id: dict[str, RuleCatalogEntry] = {}
        self._logic: dict[str, RuleLogic] = {}
        for entry in entries:
            if entry.rule_id in self._by_id:
                raise ValidationError(f"duplicate rule_id {entry.rule_id!r}")
            self._by_id[entry.rule_id] = entry
            self._logic[entry.rule_id] = parse_rule(entry.rule_text)
        self.entries = tuple(entries)

    def get(self, rule_id: str) -> RuleCatalogEntry | None:
        return self._by_id.get(rule_id)

    def logic(self, rule_id: str) -> RuleLogic:
        return self._logic[rule_id]

    def describe(self) -> list[dict]:
        out = []
        for entry in self.entries:
            logic = self._logic[entry.rule_id]
            out.append(
                {
                    "rule_id": entry.rule_id,
                    "title": entry.title,
                    "rule_text": entry.rule_text,
                    "source_url": entry.source_url,
                    "question": entry.question,
                    "parsed": {
                        "conditions": len(logic.conditions),
                        "operator": logic.structure.op if logic.structure else None,
                        "outcome_negated": logic.outcome_negated,
                        "ambiguous": logic.ambiguous,
                    },
                }
            )
        return out


def load_catalog(path: str | Path | None = None) -> RuleCatalog:
    """Load a rule catalog; with no path, the packaged demo rules."""
    if path is None:
        raw = resources.files("rulechat.data").joinpath("demo_rules.json").read_text()
    else:
        raw = Path(path).read_text(encoding="utf-8")
    payload = json.loads(raw)
    records = payload["rules"] if isinstance(payload, dict) else payload
    entries = []
    for record in records:
        entries.append(
            RuleCatalogEntry(
                rule_id=str(record["rule_id"]),
                title=str(record.get("title", record["rule_id"])),
                rule_text=str(record["rule_text"]),
                source_url=str(record.get("source_url", "")),
                question=str(record.get("question", "")),
            )
        )
    return RuleCatalog(entries)


# --- session store ---------------------------------------------------------------


class SessionStore:
    """One append-only JSONL file per session under <data_dir>/sessions."""

    def __init__(self, data_dir: str | Path) -> None:
        self.root = Path(data_dir) / "sessions"
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def _path(self, session_id: str) -> Path:
        if not _SESSION_ID_RE.fullmatch(session_id):
            raise KeyError(session_id)
        return self.root / f"{session_id}.jsonl"

    def new_id(self) -> str:
        return secrets.token_urlsafe(24)

    def exists(self, session_id: str) -> bool:
        try:
            return self._path(session_id).is_file()
        except KeyError:
            return False

    def append(self, session_id: str, event: dict) -> dict:
        event = dict(event)
        event.setdefault("ts", time.time())
        with open(self._path(session_id), "a", encoding="utf-8") as handle:
            handle.write(json.dumps(event, ensure_ascii=False) + "\n")
        return event

    def events(self, session_id: str) -> list[dict]:
        path = self._path(session_id)
        if not path.is_file():
            raise KeyError(session_id)
        out = []
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if line:
                    out.append(json.loads(line))
        return out

    def ids(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.jsonl"))

    def lock(self, session_id: str) -> threading.Lock:
        with self._guard:
            lock = self._locks.get(session_id)
            if lock is None:
                lock = threading.Lock()
                self._locks[session_id] = lock
            return lock


@dataclass
class SessionView:
    """A session's state, folded from its event log."""

    session_id: str
    rule_id: str = ""
    question: str = ""
    scenario: str = ""
    mode: str = AGENT
    gold_answer: str | None = None
    item_id: str | None = None
    history: tuple[HistoryTurn, ...] = ()
    pending_followup: str | None = None
    final_answer: str | None = None
    conclusion: dict | None = None
    aborted: bool = False
    abort_reason: str = ""
    step_count: int = 0
    created_at: float = 0.0
    updated_at: float = 0.0
    turns: tuple[dict, ...] = ()

    def status(self, now: float | None = None, idle_timeout_s: float | None = None) -> str:
        if self.aborted:
            return ABORTED
        if self.conclusion is not None:
            return FINISHED
        if self.mode == AGENT and self.final_answer is not None:
            return FINISHED
        if (
            idle_timeout_s is not None
            and now is not None
            and now - self.updated_at > idle_timeout_s
        ):
            return ABORTED
        return AWAITING_USER


def fold_session(session_id: str, events: list[dict]) -> SessionView:
    view = SessionView(session_id=session_id)
    turns: list[dict] = []
    history: list[HistoryTurn] = []
    for event in events:
        kind = event.get("event")
        ts = float(event.get("ts", 0.0))
        if not view.created_at:
            view.created_at = ts
        view.updated_at = max(view.updated_at, ts)
        if kind == "session_started":
            view.rule_id = event.get("rule_id", "")
            view.question = event.get("question", "")
            view.scenario = event.get("scenario", "")
            view.mode = event.get("mode", AGENT)
            view.gold_answer = event.get("gold_answer")
            view.item_id = event.get("item_id")
        elif kind == "agent_turn":
            for followup, reply in event.get("resolved", []):
                history.append(HistoryTurn(followup, reply))
            if event.get("kind") == AnswerKind.FOLLOW_UP.value:
                view.pending_followup = event.get("text", "")
            else:
                view.pending_followup = None
                view.final_answer = event.get("text", "")
            view.step_count = int(event.get("step_count", view.step_count))
            turns.append({"speaker": "agent", "ts": ts, **{
                k: event[k] for k in ("kind", "text", "trace", "resolved") if k in event
            }})
        elif kind == "user_reply":
            if view.pending_followup is not None:
                history.append(HistoryTurn(view.pending_followup, event["reply"]))
                view.pending_followup = None
            turns.append({"speaker": "user", "ts": ts, "reply": event.get("reply", "")})
        elif kind == "conclusion":
            view.conclusion = {
                "answer": event.get("answer"),
                "correct": event.get("correct"),
                "elapsed_ms": event.get("elapsed_ms"),
                "ts": ts,
            }
        elif kind == "aborted":
            view.aborted = True
            view.abort_reason = event.get("reason", "")
    view.history = tuple(history)
    view.turns = tuple(turns)
    return view


# --- request bodies ---------------------------------------------------------------


class StartSessionBody(BaseModel):
    rule_id: str
    question: str
    scenario: str = ""
    mode: str = AGENT
    gold_answer: str | None = None
    item_id: str | None = None


class ReplyBody(BaseModel):
    reply: str


class ConclusionBody(BaseModel):
    answer: str


# --- the app ---------------------------------------------------------------------


def _response_dict(response: AgentResponse, status: str) -> dict:
    return {
        "kind": response.answer.kind.value,
        "text": response.answer.text,
        "trace": [[t.stage, t.detail] for t in response.trace],
        "status": status,
    }


def create_app(
    data_dir: str | Path | None = None,
    rules_path: str | Path | None = None,
    components: Components | None = None,
    idle_timeout_s: float = DEFAULT_IDLE_TIMEOUT_S,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    data_dir = Path(data_dir or os.environ.get("RULECHAT_DATA_DIR", "rulechat_data"))
    rules_path = rules_path or os.environ.get("RULECHAT_RULES") or None
    catalog = load_catalog(rules_path)
    store = SessionStore(data_dir)
    engine = components or heuristic_components()

    app = FastAPI(title="rulechat", version=__version__)

    @app.exception_handler(ApiError)
    def api_error_handler(request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status_code,
            content={"error": exc.code, "detail": exc.detail},
        )

    @app.exception_handler(RequestValidationError)
    def body_error_handler(request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"error": "validation", "detail": str(exc.errors())},
        )

    @app.exception_handler(ValidationError)
    def domain_error_handler(request, exc: ValidationError):
        return JSONResponse(
            status_code=400, content={"error": "validation", "detail": str(exc)}
        )

    @app.exception_handler(PipelineError)
    def pipeline_error_handler(request, exc: PipelineError):
        return JSONResponse(
            status_code=500, content={"error": "pipeline", "detail": str(exc)}
        )

    def load_view(session_id: str) -> SessionView:
        try:
            events = store.events(session_id)
        except KeyError:
            raise _not_found(f"unknown session {session_id!r}")
        return fold_session(session_id, events)

    def ensure_open(view: SessionView) -> None:
        """Reject writes to sessions that are finished or timed out."""
        status = view.status(time.time(), idle_timeout_s)
        if status == ABORTED:
            if not view.aborted:
                store.append(
                    view.session_id,
                    {"event": "aborted", "reason": "idle timeout"},
                )
            raise _conflict("session aborted")
        if status == FINISHED:
            raise _conflict("session finished")

    def run_agent_step(view: SessionView) -> tuple[dict, str]:
        entry = catalog.get(view.rule_id)
        if entry is None:
            raise _not_found(f"unknown rule {view.rule_id!r}")
        utterance = make_utterance(
            snippet=entry.rule_text,
            question=view.question,
            answer="",
            history=view.history,
            scenario=view.scenario,
            tree_id=view.rule_id,
            source_url=entry.source_url,
        )
        logic = catalog.logic(view.rule_id)
        state = SessionState(
            utterance=utterance,
            logic=logic,
            step_count=view.step_count,
            max_steps=default_max_steps(logic),
        )
        try:
            response, state = step(state, engine)
        except PipelineError as exc:
            store.append(
                view.session_id,
                {"event": "aborted", "reason": f"pipeline error: {exc}"},
            )
            raise
        resolved = [
            [t.followup, t.answer]
            for t in state.utterance.history[len(view.history):]
        ]
        status = (
            AWAITING_USER if not response.answer.is_terminal else FINISHED
        )
        store.append(
            view.session_id,
            {
                "event": "agent_turn",
                "kind": response.answer.kind.value,
                "text": response.answer.text,
                "trace": [[t.stage, t.detail] for t in response.trace],
                "resolved": resolved,
                "step_count": state.step_count,
            },
        )
        return _response_dict(response, status), status

    @app.get("/rules")
    def list_rules() -> list[dict]:
        return catalog.describe()

    @app.post("/sessions", status_code=201)
    def start_session(body: StartSessionBody) -> dict:
        if body.mode not in MODES:
            raise _bad_request(f"mode must be one of {MODES}, got {body.mode!r}")
        if not body.question.strip():
            raise _bad_request("question must be non-empty")
        entry = catalog.get(body.rule_id)
        if entry is None:
            raise _not_found(f"unknown rule {body.rule_id!r}")
        session_id = store.new_id()
        store.append(
            session_id,
            {
                "event": "session_started",
                "session_id": session_id,
                "rule_id": body.rule_id,
                "question": body.question,
                "scenario": body.scenario,
                "mode": body.mode,
                "gold_answer": body.gold_answer,
                "item_id": body.item_id,
            },
        )
        if body.mode == READING:
            response = {
                "kind": "RuleText",
                "text": entry.rule_text,
                "status": AWAITING_USER,
            }
            return JSONResponse(
                status_code=201,
                content={"session_id": session_id, "response": response},
            )
        view = load_view(session_id)
        response, _ = run_agent_step(view)
        return JSONResponse(
            status_code=201, content={"session_id": session_id, "response": response}
        )

    @app.post("/sessions/{session_id}/answers")
    def post_answer(session_id: str, body: ReplyBody) -> dict:
        lock = store.lock(session_id)
        if not lock.acquire(blocking=False):
            raise _conflict("session busy")
        try:
            view = load_view(session_id)
            ensure_open(view)
            if view.pending_followup is None:
                raise _conflict("no follow-up question pending")
            if body.reply not in (YES, NO):
                raise _bad_request(f"reply must be Yes or No, got {body.reply!r}")
            store.append(session_id, {"event": "user_reply", "reply": body.reply})
            view.history = view.history + (
                HistoryTurn(view.pending_followup, body.reply),
            )
            view.pending_followup = None
            response, _ = run_agent_step(view)
            return {"response": response}
        finally:
            lock.release()

    @app.post("/sessions/{session_id}/conclusion")
    def submit_conclusion(session_id: str, body: ConclusionBody) -> dict:
        lock = store.lock(session_id)
        if not lock.acquire(blocking=False):
            raise _conflict("session busy")
        try:
            view = load_view(session_id)
            now = time.time()
            if view.status(now, idle_timeout_s) == ABORTED:
                if not view.aborted:
                    store.append(
                        session_id, {"event": "aborted", "reason": "idle timeout"}
                    )
                raise _conflict("session aborted")
            if view.conclusion is not None:
                raise _conflict("conclusion already recorded")
            if body.answer not in TERMINAL_ANSWERS:
                raise _bad_request(
                    f"conclusion must be one of {TERMINAL_ANSWERS}, got {body.answer!r}"
                )
            gold = view.gold_answer or view.final_answer
            correct = (body.answer == gold) if gold else None
            elapsed_ms = max((now - view.created_at) * 1000.0, 0.001)
            event = store.append(
                session_id,
                {
                    "event": "conclusion",
                    "answer": body.answer,
                    "correct": correct,
                    "elapsed_ms": elapsed_ms,
                },
            )
            return {
                "answer": body.answer,
                "correct": correct,
                "elapsed_ms": event["elapsed_ms"],
                "status": FINISHED,
            }
        finally:
            lock.release()

    @app.get("/sessions/{session_id}/transcript")
    def get_transcript(session_id: str) -> dict:
        view = load_view(session_id)
        entry = catalog.get(view.rule_id)
        return {
            "session_id": view.session_id,
            "rule_id": view.rule_id,
            "rule_title": entry.title if entry else "",
            "rule_text": entry.rule_text if entry else "",
            "question": view.question,
            "scenario": view.scenario,
            "mode": view.mode,
            "status": view.status(time.time(), idle_timeout_s),
            "gold_answer": view.gold_answer,
            "item_id": view.item_id,
            "turns": list(view.turns),
            "pending_followup": view.pending_followup,
            "final_answer": view.final_answer,
            "conclusion": view.conclusion,
            "created_at": view.created_at,
            "updated_at": view.updated_at,
        }

    @app.get("/study/export")
    def study_export() -> dict:
        arms: dict[str, dict] = {
            mode: {"sessions": 0, "concluded": 0, "elapsed": [], "correct": []}
            for mode in MODES
        }
        for session_id in store.ids():
            try:
                view = fold_session(session_id, store.events(session_id))
            except (KeyError, json.JSONDecodeError):
                continue
            bucket = arms.get(view.mode)
            if bucket is None:
                continue
            bucket["sessions"] += 1
            if view.conclusion is not None:
                bucket["concluded"] += 1
                bucket["elapsed"].append(float(view.conclusion["elapsed_ms"]))
                if view.conclusion["correct"] is not None:
                    bucket["correct"].append(bool(view.conclusion["correct"]))
        out = {}
        for mode, bucket in arms.items():
            elapsed = bucket.pop("elapsed")
            correct = bucket.pop("correct")
            bucket["mean_elapsed_ms"] = (
                sum(elapsed) / len(elapsed) if elapsed else None
            )
            bucket["accuracy"] = (
                sum(correct) / len(correct) if correct else None
            )
            bucket["correct_known"] = len(correct)
            out[mode] = bucket
        return {"arms": out, "generated_at": time.time()}

    ui = ui_dir or os.environ.get("RULECHAT_UI_DIR")
    if ui and Path(ui).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui), html=True), name="ui")

    return app
