"""JSON-over-HTTP session service for human-in-the-loop labeling.

Endpoints::

    GET  /healthz                    liveness probe
    GET  /datasets                   datasets loaded server-side
    POST /sessions                   create a session, returns round 0
    POST /sessions/{id}/labels       submit judgments, get next round / final
    GET  /sessions/{id}              full session view incl. history
    GET  /thumbnails/{sample_id}     thumbnail or a built-in placeholder

The service adds no numerical behavior: every session wraps a
:class:`~activerank.sessions.ProbeSession`, so transcripts replayed through
the core reproduce identical rankings.  Mutation per session is serialized
by a round token (round index + state hash); submitting the same token with
the same labels twice returns the cached response, while a mismatched token
or conflicting labels gets a 409.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response

from .datasets import Dataset
from .engine import IRRELEVANT, RELEVANT, UNSURE, RoundResult, SessionParams
from .sessions import ProbeSession

VALID_LABELS = (RELEVANT, IRRELEVANT, UNSURE)

#: 1x1 grey PNG served when a sample has no thumbnail
PLACEHOLDER_PNG = bytes.fromhex(
    "89504e470d0a1a0a0000000d49484452000000010000000108020000009077"
    "53de0000000c4944415408d763a8a9a90100029d017ad01c98a90000000049"
    "454e44ae426082"
)


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


@dataclass
class SessionRecord:
    """One live session: the wrapped engine state plus submission bookkeeping."""

    session_id: str
    dataset_name: str
    probe_id: str
    session: ProbeSession
    budget: int
    status: str = "awaiting_labels"
    submits_done: int = 0
    round_token: str | None = None
    outstanding: list[str] = field(default_factory=list)
    history: list[dict] = field(default_factory=list)
    consumed: dict[str, tuple[str, dict]] = field(default_factory=dict)
    created_at: float = field(default_factory=time.time)
    updated_at: float = field(default_factory=time.time)
    final_payload: dict | None = None
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


def _state_token(record: SessionRecord) -> str:
    state = record.session.state
    digest = hashlib.sha256()
    digest.update(state.scores.tobytes())
    digest.update(state.reference.tobytes())
    digest.update(state.confidence.tobytes())
    digest.update(json.dumps(sorted(state.labeled.items())).encode())
    digest.update(json.dumps(sorted(state.skipped)).encode())
    return f"{record.submits_done}:{digest.hexdigest()[:16]}"


def _labels_key(labels: Mapping[str, str]) -> str:
    return json.dumps(sorted(labels.items()))


def _round_payload(record: SessionRecord, result: RoundResult) -> dict:
    session = record.session
    suggestions = []
    for index in result.suggestions:
        sample_id = session.candidate_id(index)
        suggestions.append(
            {
                "id": sample_id,
                "initial_rank": int(index),
                "thumbnail": f"/thumbnails/{sample_id}",
            }
        )
    payload = {
        "round_index": result.round_index,
        "token": record.round_token,
        "suggestions": suggestions,
        "preview": session.merged_ranking(result)[:20],
        "elapsed_ms": result.elapsed * 1000.0,
    }
    if session.dataset.ground_truth is not None:
        payload["ap"] = session.ap(result)
    return payload


def _session_view(record: SessionRecord) -> dict:
    session = record.session
    view = {
        "session_id": record.session_id,
        "dataset": record.dataset_name,
        "probe": record.probe_id,
        "status": record.status,
        "rounds_budget": record.budget,
        "submits_done": record.submits_done,
        "created_at": record.created_at,
        "updated_at": record.updated_at,
        "history": record.history,
        "current_ranking_preview": session.merged_ranking()[:20] if session.rounds else [],
    }
    if session.dataset.ground_truth is not None and session.rounds:
        view["metrics"] = {"ap_per_round": session.ap_per_round()}
    if record.final_payload is not None:
        view["final_ranking"] = record.final_payload["final_ranking"]
    return view


class SessionStore:
    """In-memory session registry with optional JSON-lines event logs."""

    def __init__(self, datasets: dict[str, Dataset], default_params: SessionParams, log_dir: Path | None):
        self.datasets = datasets
        self.default_params = default_params
        self.log_dir = log_dir
        self.records: dict[str, SessionRecord] = {}
        self.lock = threading.Lock()
        if log_dir is not None:
            log_dir.mkdir(parents=True, exist_ok=True)

    def log_event(self, record: SessionRecord, event: str, payload: dict) -> None:
        if self.log_dir is None:
            return
        line = json.dumps({"ts": time.time(), "event": event, **payload})
        with (self.log_dir / f"{record.session_id}.jsonl").open("a") as handle:
            handle.write(line + "\n")

    def create(self, dataset_name: str, probe_id: str, params_overrides: Mapping | None) -> SessionRecord:
        if dataset_name not in self.datasets:
            raise ApiError(404, "unknown_dataset", f"dataset {dataset_name!r} is not loaded")
        dataset = self.datasets[dataset_name]
        if probe_id not in dataset.probe_ids:
            raise ApiError(404, "unknown_probe", f"probe {probe_id!r} not in dataset {dataset_name!r}")
        params = self.default_params
        if params_overrides:
            allowed = {
                "alpha", "beta", "gamma", "k", "q", "rounds",
                "solver", "mr_baseline", "soft_init",
            }
            unknown = set(params_overrides) - allowed
            if unknown:
                raise ApiError(400, "invalid_params", f"unknown parameters: {sorted(unknown)}")
            try:
                from dataclasses import replace

                params = replace(params, **dict(params_overrides))
            except (TypeError, ValueError) as exc:
                raise ApiError(400, "invalid_params", str(exc)) from exc

        try:
            session = ProbeSession(dataset, probe_id, params)
        except ValueError as exc:
            raise ApiError(400, "invalid_params", str(exc)) from exc
        record = SessionRecord(
            session_id=uuid.uuid4().hex,
            dataset_name=dataset_name,
            probe_id=probe_id,
            session=session,
            # interactive sessions always take at least one labeled batch
            budget=max(params.rounds, 1),
        )
        with self.lock:
            self.records[record.session_id] = record
        return record

    def get(self, session_id: str) -> SessionRecord:
        try:
            return self.records[session_id]
        except KeyError:
            raise ApiError(404, "unknown_session", f"no session {session_id!r}") from None


def create_app(
    datasets: dict[str, Dataset],
    default_params: SessionParams | None = None,
    session_log_dir: Path | None = None,
) -> FastAPI:
    """Build the service around the given preloaded datasets."""
    store = SessionStore(datasets, default_params or SessionParams(), session_log_dir)
    app = FastAPI(title="activerank session service")
    app.state.store = store

    @app.exception_handler(ApiError)
    async def _api_error(_request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={"code": exc.code, "message": exc.message})

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/datasets")
    def list_datasets():
        return [
            {
                "name": name,
                "n_gallery": len(ds.gallery_ids),
                "probes": ds.probe_ids,
                "has_ground_truth": ds.ground_truth is not None,
            }
            for name, ds in store.datasets.items()
        ]

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        body = await request.json()
        if not isinstance(body, dict) or "dataset" not in body or "probe" not in body:
            raise ApiError(400, "invalid_request", "body must carry 'dataset' and 'probe'")
        record = store.create(body["dataset"], body["probe"], body.get("params"))
        with record.lock:
            result = record.session.run_round()
            record.round_token = _state_token(record)
            record.outstanding = [record.session.candidate_id(i) for i in result.suggestions]
            round_payload = _round_payload(record, result)
            record.history.append({"round": round_payload, "labels": None})
            record.updated_at = time.time()
        store.log_event(record, "created", {
            "session": record.session_id,
            "dataset": record.dataset_name,
            "probe": record.probe_id,
            "round": round_payload,
        })
        return {
            "session_id": record.session_id,
            "status": record.status,
            "rounds_budget": record.budget,
            "round": round_payload,
        }

    @app.post("/sessions/{session_id}/labels")
    async def submit_labels(session_id: str, request: Request):
        body = await request.json()
        if not isinstance(body, dict) or "token" not in body:
            raise ApiError(400, "invalid_request", "body must carry 'token' and 'labels'")
        token = body["token"]
        labels = body.get("labels") or {}
        if not isinstance(labels, dict):
            raise ApiError(400, "invalid_labels", "labels must be an object of id -> judgment")

        record = store.get(session_id)
        with record.lock:
            if token in record.consumed:
                cached_labels, cached_response = record.consumed[token]
                if cached_labels == _labels_key(labels):
                    return cached_response
                raise ApiError(409, "stale_token", "token already consumed with different labels")
            if record.status == "finished":
                raise ApiError(409, "stale_token", "session already finished")
            if token != record.round_token:
                raise ApiError(409, "stale_token", "token does not match the awaited round")

            outstanding = set(record.outstanding)
            for sample_id, label in labels.items():
                if sample_id not in outstanding:
                    raise ApiError(400, "invalid_labels", f"{sample_id!r} was not suggested this round")
                if label not in VALID_LABELS:
                    raise ApiError(400, "invalid_labels", f"unknown judgment {label!r}")

            # outstanding suggestions without an explicit judgment are unsure
            full = {sample_id: labels.get(sample_id, UNSURE) for sample_id in record.outstanding}
            session = record.session
            session.apply_labels({session.session_index(sid): lab for sid, lab in full.items()})
            record.history[-1]["labels"] = full
            record.submits_done += 1

            result = session.run_round()
            if record.submits_done >= record.budget:
                record.status = "finished"
                record.outstanding = []
                final_ranking = session.merged_ranking(result)
                response = {
                    "session_id": record.session_id,
                    "status": record.status,
                    "final_ranking": final_ranking,
                }
                if session.dataset.ground_truth is not None:
                    response["metrics"] = {"ap_per_round": session.ap_per_round()}
                record.final_payload = response
                record.history.append({"round": {"round_index": result.round_index}, "labels": None})
            else:
                record.round_token = _state_token(record)
                record.outstanding = [session.candidate_id(i) for i in result.suggestions]
                round_payload = _round_payload(record, result)
                record.history.append({"round": round_payload, "labels": None})
                response = {
                    "session_id": record.session_id,
                    "status": record.status,
                    "round": round_payload,
                }
            record.consumed[token] = (_labels_key(labels), response)
            record.updated_at = time.time()
        store.log_event(record, "labels", {"session": session_id, "labels": full, "response_status": record.status})
        return response

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        record = store.get(session_id)
        with record.lock:
            return _session_view(record)

    @app.get("/thumbnails/{sample_id}")
    def thumbnail(sample_id: str):
        for dataset in store.datasets.values():
            path = dataset.features.thumbnail_paths.get(sample_id)
            if path and Path(path).exists():
                media = "image/jpeg" if path.endswith((".jpg", ".jpeg")) else "image/png"
                return Response(content=Path(path).read_bytes(), media_type=media)
        return Response(content=PLACEHOLDER_PNG, media_type="image/png")

    return app
