"""HTTP service: chat sessions, live correction with synchronous retrain,
uncertainty queue, corpus and checkpoint management, and experiment jobs
with server-sent progress events."""

from __future__ import annotations

import json
import threading
import time
import uuid
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from ..engine.core import DialogEngine, DomainError
from ..engine.corpus import (
    CorpusDialog,
    CorpusError,
    CorpusTurn,
    compile_corpus,
    parse_corpus,
    serialize_corpus,
)
from ..nn import init_model, load_checkpoint, save_checkpoint, init_adadelta
from ..phone.domain import PhoneDomain, AddressBook, default_address_book, default_corpus
from ..rl import rl_experiment
from ..sl import compare_architectures, loo_eval, roc_data, train_sl
from .config import ServiceConfig
from .jobs import Busy, JobManager, follow_events


@dataclass
class Session:
    id: str
    mode: str
    engine: DialogEngine
    created: float = field(default_factory=time.time)

    @property
    def closed(self) -> bool:
        return self.engine.closed


class _LivePolicy:
    """Policy view that re-reads the service's current model every step, so
    a correction's retrain takes effect on the very next turn."""

    def __init__(self, state: "ServiceState"):
        self.state = state

    def begin(self):
        from ..nn import initial_state

        return initial_state(self.state.model)

    def step(self, model_state, x, mask, mode, rng):
        from ..engine.core import NeuralPolicy

        return NeuralPolicy(self.state.model).step(model_state, x, mask, mode, rng)


class ServiceState:
    def __init__(self, config: ServiceConfig):
        self.config = config
        book = (
            AddressBook.from_json(config.address_book_path)
            if config.address_book_path
            else default_address_book()
        )
        self.domain = PhoneDomain(book)
        if config.corpus_path and Path(config.corpus_path).exists():
            self.corpus = parse_corpus(Path(config.corpus_path).read_text(encoding="utf-8"))
        else:
            self.corpus = default_corpus()
        layout = self.domain.layout
        if config.checkpoint_path and Path(config.checkpoint_path).exists():
            self.model = load_checkpoint(config.checkpoint_path)
        else:
            self.model = init_model(
                config.arch, layout.dim, config.hidden, layout.n_actions, seed=config.seed
            )
        self.opt = init_adadelta(self.model)
        self.train_lock = threading.Lock()
        self.jobs = JobManager(self.train_lock)
        self.sessions: dict[str, Session] = {}
        self.recent_turns: deque = deque(maxlen=config.recent_turn_window)
        self._session_counter = 0

    def train_to_reconstruction(self) -> dict:
        started = time.time()
        result = train_sl(self.model, self.domain, self.corpus, opt=self.opt)
        elapsed = time.time() - started
        # atomic swap: readers pick up the new reference on their next step
        self.model, self.opt = result.params, result.opt
        return {
            "epochs": result.epochs,
            "wall_clock_s": elapsed,
            "reconstructed": result.reconstructed,
            "corpus_size": len(self.corpus),
        }

    def new_session(self, mode: str) -> Session:
        self._session_counter += 1
        rng = np.random.default_rng([self.config.seed, self._session_counter])
        engine = DialogEngine(self.domain, _LivePolicy(self), mode=mode, rng=rng)
        session = Session(id=uuid.uuid4().hex[:12], mode=mode, engine=engine)
        self.sessions[session.id] = session
        return session


class CreateSession(BaseModel):
    mode: str = "greedy"


class Utterance(BaseModel):
    text: str


class Correction(BaseModel):
    session_id: str
    turn_index: int
    action_id: int


class CorpusBody(BaseModel):
    text: str


class CheckpointBody(BaseModel):
    path: str


class JobRequest(BaseModel):
    kind: str
    params: dict = {}


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    state = ServiceState(config)
    app = FastAPI(title="dialctl service")
    app.state.service = state

    def _session_or_404(session_id: str) -> Session:
        session = state.sessions.get(session_id)
        if session is None:
            raise HTTPException(404, f"no session {session_id}")
        return session

    def _steps_payload(session: Session, start: int) -> list[dict]:
        out = []
        for idx in range(start, len(session.engine.records)):
            rec = session.engine.records[idx]
            template = state.domain.templates[rec.action]
            out.append(
                {
                    "turn_index": idx,
                    "user_text": rec.user_text,
                    "action_id": rec.action,
                    "action_name": template.name,
                    "kind": template.kind,
                    "rendered": rec.rendered,
                    "distribution": [float(v) for v in rec.dist],
                    "mask": [bool(b) for b in rec.mask],
                    "chosen_prob": rec.behavior_prob,
                }
            )
        return out

    def _record_recent(session: Session, start: int) -> None:
        for idx in range(start, len(session.engine.records)):
            rec = session.engine.records[idx]
            state.recent_turns.append(
                {
                    "session_id": session.id,
                    "turn_index": idx,
                    "score": rec.behavior_prob,
                    "action_id": rec.action,
                    "action_name": state.domain.templates[rec.action].name,
                    "user_text": rec.user_text,
                }
            )

    # -- sessions ---------------------------------------------------------

    @app.post("/api/sessions")
    def create_session(body: CreateSession):
        if body.mode not in ("greedy", "sample"):
            raise HTTPException(422, f"unknown mode {body.mode!r}")
        session = state.new_session(body.mode)
        session.engine.start()
        _record_recent(session, 0)
        return {
            "session_id": session.id,
            "mode": session.mode,
            "steps": _steps_payload(session, 0),
            "closed": session.closed,
        }

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str):
        session = _session_or_404(session_id)
        return {
            "session_id": session.id,
            "mode": session.mode,
            "steps": _steps_payload(session, 0),
            "closed": session.closed,
        }

    @app.post("/api/sessions/{session_id}/utterance")
    def post_utterance(session_id: str, body: Utterance):
        session = _session_or_404(session_id)
        if session.closed:
            raise HTTPException(409, "session closed")
        start = len(session.engine.records)
        try:
            session.engine.run_turn(body.text)
        except DomainError as exc:
            raise HTTPException(409, str(exc)) from exc
        _record_recent(session, start)
        return {"steps": _steps_payload(session, start), "closed": session.closed}

    @app.post("/api/sessions/{session_id}/close")
    def close_session(session_id: str):
        session = _session_or_404(session_id)
        session.engine.closed = True
        return {"closed": True}

    # -- corrections ------------------------------------------------------

    @app.post("/api/corrections")
    def submit_correction(body: Correction):
        session = _session_or_404(body.session_id)
        records = session.engine.records
        if not 0 <= body.turn_index < len(records):
            raise HTTPException(422, f"turn {body.turn_index} outside transcript")
        rec = records[body.turn_index]
        if not 0 <= body.action_id < state.domain.layout.n_actions:
            raise HTTPException(422, f"action {body.action_id} out of range")
        if not rec.mask[body.action_id]:
            raise HTTPException(422, "corrected action is masked at that turn")
        lines = _prefix_lines(state, session, body.turn_index, body.action_id)
        dialog = CorpusDialog(turns=lines)
        if not state.train_lock.acquire(blocking=False):
            raise HTTPException(409, "busy: a training job is running")
        try:
            state.corpus.append(dialog)
            try:
                compile_corpus(state.domain, state.corpus)
            except CorpusError as exc:
                state.corpus.pop()
                raise HTTPException(422, f"correction not trainable: {exc}") from exc
            report = state.train_to_reconstruction()
            if config.corpus_path:
                Path(config.corpus_path).write_text(
                    serialize_corpus(state.corpus), encoding="utf-8"
                )
        finally:
            state.train_lock.release()
        return report

    @app.get("/api/uncertainty")
    def uncertainty(limit: int = 10):
        turns = sorted(state.recent_turns, key=lambda t: t["score"])
        return {"turns": turns[: max(0, limit)]}

    # -- corpus and checkpoints ------------------------------------------

    @app.get("/api/corpus", response_class=PlainTextResponse)
    def get_corpus():
        return serialize_corpus(state.corpus)

    @app.put("/api/corpus")
    def put_corpus(body: CorpusBody):
        try:
            dialogs = parse_corpus(body.text)
            compile_corpus(state.domain, dialogs)
        except CorpusError as exc:
            raise HTTPException(422, str(exc)) from exc
        if not state.train_lock.acquire(blocking=False):
            raise HTTPException(409, "busy: a training job is running")
        try:
            state.corpus = dialogs
            report = state.train_to_reconstruction()
            if config.corpus_path:
                Path(config.corpus_path).write_text(
                    serialize_corpus(state.corpus), encoding="utf-8"
                )
        finally:
            state.train_lock.release()
        return report

    @app.post("/api/checkpoint/save")
    def checkpoint_save(body: CheckpointBody):
        save_checkpoint(state.model, body.path)
        return {"saved": body.path}

    @app.post("/api/checkpoint/load")
    def checkpoint_load(body: CheckpointBody):
        if not state.train_lock.acquire(blocking=False):
            raise HTTPException(409, "busy: a training job is running")
        try:
            model = load_checkpoint(body.path)
            if (model.input_dim, model.n_actions) != (
                state.domain.layout.dim,
                state.domain.layout.n_actions,
            ):
                raise HTTPException(422, "checkpoint does not fit this domain")
            state.model = model
            state.opt = init_adadelta(model)
        finally:
            state.train_lock.release()
        return {"loaded": body.path, "kind": state.model.kind}

    @app.get("/api/model")
    def model_info():
        return {
            "kind": state.model.kind,
            "input_dim": state.model.input_dim,
            "hidden": state.model.hidden,
            "n_actions": state.model.n_actions,
            "corpus_size": len(state.corpus),
        }

    @app.get("/api/actions")
    def actions():
        return {
            "templates": [
                {
                    "id": t.id,
                    "name": t.name,
                    "kind": t.kind,
                    "pattern": t.pattern,
                    "terminal": t.terminal,
                }
                for t in state.domain.templates
            ]
        }

    @app.get("/api/sim")
    def sim_params():
        return {"sim": config.sim.as_dict()}

    # -- jobs --------------------------------------------------------------

    @app.post("/api/jobs")
    def start_job(body: JobRequest):
        fn = _job_fn(state, body.kind, body.params)
        try:
            job = state.jobs.start(body.kind, fn)
        except Busy as exc:
            raise HTTPException(409, str(exc)) from exc
        return {"job_id": job.id, "kind": body.kind}

    @app.get("/api/jobs/{job_id}")
    def job_status(job_id: str):
        job = state.jobs.get(job_id)
        if job is None:
            raise HTTPException(404, f"no job {job_id}")
        return {
            "job_id": job.id,
            "kind": job.kind,
            "status": job.status,
            "events": job.events,
            "result": job.result,
            "error": job.error,
        }

    @app.delete("/api/jobs/{job_id}")
    def cancel_job(job_id: str):
        if not state.jobs.cancel(job_id):
            raise HTTPException(409, "job is not running")
        return {"cancelled": True}

    @app.get("/api/jobs/{job_id}/events")
    def job_events(job_id: str):
        job = state.jobs.get(job_id)
        if job is None:
            raise HTTPException(404, f"no job {job_id}")

        def stream():
            for event in follow_events(job):
                yield f"data: {json.dumps(event)}\n\n"

        return StreamingResponse(stream(), media_type="text/event-stream")

    if config.frontend_dist and Path(config.frontend_dist).is_dir():
        app.mount("/", StaticFiles(directory=config.frontend_dist, html=True), name="ui")

    return app


def _prefix_lines(
    state: ServiceState, session: Session, turn_index: int, action_id: int
) -> list[CorpusTurn]:
    """The session transcript up to the corrected turn, with the corrected
    action substituted, as a (possibly partial) training dialog."""
    from ..engine.entities import render_markup

    lines: list[CorpusTurn] = []
    for idx, rec in enumerate(session.engine.records[: turn_index + 1]):
        if rec.user_text is not None:
            lines.append(
                CorpusTurn(speaker="U", text=render_markup(rec.user_text, rec.mentions))
            )
        action = action_id if idx == turn_index else rec.action
        lines.append(CorpusTurn(speaker="S", action=state.domain.templates[action].name))
    return lines


def _job_fn(state: ServiceState, kind: str, params: dict):
    domain, corpus = state.domain, state.corpus

    if kind == "loo":
        def run_loo(job):
            result = loo_eval(
                domain,
                corpus,
                sizes=tuple(params.get("sizes", (1, 2, 5, 10, 20))),
                seed=int(params.get("seed", 0)),
                arch=params.get("arch", "lstm"),
                hidden=int(params.get("hidden", 32)),
            )
            job.emit({"stage": "done", "sizes": list(result.sizes)})
            return {
                "sizes": list(result.sizes),
                "per_turn": {str(k): v for k, v in result.per_turn.items()},
                "whole_dialog": {str(k): v for k, v in result.whole_dialog.items()},
            }

        return run_loo

    if kind == "roc":
        def run_roc(job):
            result = roc_data(
                domain,
                corpus,
                n_repeats=int(params.get("n_repeats", 10)),
                seed=int(params.get("seed", 0)),
            )
            job.emit({"stage": "done", "auc": result.auc})
            return {
                "auc": result.auc,
                "n_correct": result.n_correct,
                "n_incorrect": result.n_incorrect,
                "low20_incorrect_frac": result.low20_incorrect_frac,
                "points": [
                    {"threshold": t, "fpr": f, "tpr": p} for t, f, p in result.points
                ],
                "scores": [
                    {"score": s, "correct": c} for s, c in result.scores
                ],
            }

        return run_roc

    if kind == "compare":
        def run_compare(job):
            table = compare_architectures(
                domain, corpus, seed=int(params.get("seed", 0))
            )
            job.emit({"stage": "done"})
            return {
                arch: {str(size): ok for size, ok in row.items()}
                for arch, row in table.items()
            }

        return run_compare

    if kind == "rl":
        def run_rl(job):
            curves = {}
            for n_sl in params.get("n_sl", [0, 1, 2, 5, 10]):
                if job.cancel_event.is_set():
                    break
                result = rl_experiment(
                    domain,
                    corpus,
                    state.config.sim,
                    n_sl=int(n_sl),
                    n_rl_dialogs=int(params.get("n_rl_dialogs", 2000)),
                    n_runs=int(params.get("runs", 5)),
                    eval_every=int(params.get("eval_every", 500)),
                    eval_dialogs=int(params.get("eval_dialogs", 300)),
                    seed=int(params.get("seed", 0)),
                    max_turns=int(params.get("max_turns", 12)),
                    progress=lambda run, k, tcr, n=n_sl: job.emit(
                        {"n_sl": n, "run": run, "dialogs": k, "tcr": tcr}
                    ),
                )
                curves[str(n_sl)] = {
                    "checkpoints": result.checkpoints,
                    "mean": [float(v) for v in result.mean],
                    "std": [float(v) for v in result.std],
                    "runs": [[float(v) for v in row] for row in result.tcr],
                }
            return {"curves": curves}

        return run_rl

    raise HTTPException(422, f"unknown job kind {kind!r}")
