"""HTTP API over an :class:`Engine`, with experiment routing and outcome capture."""

from __future__ import annotations

import json
import threading
import uuid
from collections import OrderedDict
from dataclasses import dataclass
from typing import Any

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from . import __version__, kernels
from .core import (Interaction, InteractionKind, RecoError, RecordError, SlateRequest, Surface,
                   UnknownJob, embedding_from_dict, interaction_from_dict, job_from_dict,
                   now_seconds, parse_json_line)
from .engine import Engine, EngineConfig
from .experiment import (EmptyArm, ExperimentConfig, OutcomeLog, OutcomeRecord, assign, report)
from .strategies import Slate

MAX_TRACKED_SLATES = 200_000


@dataclass
class Served:
    slate_id: str
    user_id: str
    session_id: str
    items: list[str]
    record: OutcomeRecord | None


class Service:
    """Request handling independent of the web framework."""

    def __init__(self, engine: Engine | None = None, config: EngineConfig | None = None):
        self.engine = engine or Engine(config)
        self.config = self.engine.config
        self.experiments: dict[str, ExperimentConfig] = {
            e.experiment_id: e for e in self.config.experiments}
        self.outcomes = OutcomeLog()
        self._served: OrderedDict[str, Served] = OrderedDict()
        self._lock = threading.Lock()

    def now(self) -> int:
        return now_seconds(self.engine.clock)

    def experiment_for(self, surface: Surface, t: int) -> ExperimentConfig | None:
        for exp in self.experiments.values():
            if exp.surface is surface and exp.running(t):
                return exp
        return None

    def serve(self, surface: Surface, user_id: str, session_id: str,
              anchor: str | None = None) -> dict[str, Any]:
        t = self.now()
        exp = self.experiment_for(surface, t)
        arm = None
        if exp is not None:
            arm = assign(user_id, exp.salt)
            strategy, d = exp.strategy(arm)
        else:
            d = None
            strategy = (self.config.default_similar if surface is Surface.SIMILAR_JOBS
                        else self.config.default_homepage)
        req = SlateRequest(surface, user_id, session_id, t, anchor)
        slate: Slate = self.engine.recommend(req, strategy, d)
        slate_id = uuid.uuid4().hex
        record = None
        if exp is not None:
            record = OutcomeRecord(exp.experiment_id, arm, user_id, list(slate.items), t,
                                   slate.latency_ms, [], slate_id)
            self.outcomes.append(record)
        with self._lock:
            self._served[slate_id] = Served(slate_id, user_id, session_id, list(slate.items),
                                            record)
            while len(self._served) > MAX_TRACKED_SLATES:
                self._served.popitem(last=False)
        return {
            "slate_id": slate_id,
            "surface": surface.value,
            "items": slate.items,
            "strategy": slate.strategy.value,
            "arm": arm,
            "experiment_id": exp.experiment_id if exp else None,
            "latency_ms": slate.latency_ms,
            "fallback_used": slate.fallback_used,
            "personalized": slate.personalized,
        }

    def outcome(self, slate_id: str, clicked: list[str]) -> dict[str, Any]:
        served = self._served.get(slate_id)
        if served is None:
            raise KeyError(slate_id)
        bad = [j for j in clicked if j not in served.items]
        if bad:
            raise RecordError(f"items {bad} were not part of slate {slate_id}", 0, "clicked_items")
        if served.record is not None:
            self.outcomes.add_clicks(slate_id, clicked)
        t = self.now()
        for j in clicked:
            self.engine.record(Interaction(served.user_id, j, served.session_id, t,
                                           InteractionKind.CLICK))
        return {"slate_id": slate_id, "clicked": len(clicked)}


def _error(status: int, code: str, message: str, field: str | None = None) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"code": code, "field": field, "message": message})


def create_app(service: Service | None = None, config: EngineConfig | None = None) -> FastAPI:
    service = service or Service(config=config)
    app = FastAPI(title="jobreco", version=__version__)
    app.state.service = service

    @app.exception_handler(RecoError)
    async def reco_error(_: Request, exc: RecoError):
        status = 404 if isinstance(exc, UnknownJob) else 422
        return _error(status, exc.code, exc.message, exc.field)

    @app.exception_handler(RequestValidationError)
    async def bad_request(_: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        loc = first.get("loc", ())
        return _error(422, "validation_failed", first.get("msg", "invalid request"),
                      str(loc[-1]) if loc else None)

    async def body_json(request: Request) -> Any:
        raw = await request.body()
        try:
            return json.loads(raw)
        except json.JSONDecodeError as exc:
            raise RecordError(f"invalid JSON ({exc.msg})", 0) from None

    @app.post("/jobs")
    async def post_job(request: Request):
        obj = await body_json(request)
        if not isinstance(obj, dict):
            raise RecordError("expected a JSON object", 0)
        job = job_from_dict(obj)
        service.engine.add_job(job, obj.get("embedding"))
        return {"job_id": job.job_id, "status": "accepted"}

    @app.post("/embeddings")
    async def post_embeddings(request: Request):
        raw = (await request.body()).decode("utf-8")
        try:
            parsed = json.loads(raw)
            lines = [(i + 1, o) for i, o in enumerate(parsed)] if isinstance(parsed, list) else None
        except json.JSONDecodeError:
            lines = None
        if lines is None:
            lines = []
            for i, text in enumerate(raw.splitlines(), start=1):
                if text.strip():
                    try:
                        lines.append((i, parse_json_line(text, i)))
                    except RecordError as exc:
                        lines.append((i, exc))
        accepted, errors = 0, []
        for i, obj in lines:
            try:
                if isinstance(obj, RecordError):
                    raise obj
                if not isinstance(obj, dict):
                    raise RecordError("expected a JSON object", i)
                service.engine.add_embedding(*embedding_from_dict(obj, i))
                accepted += 1
            except RecoError as exc:
                errors.append({"line": i, "code": exc.code, "field": exc.field,
                               "message": exc.message})
        return {"accepted": accepted, "rejected": len(errors), "errors": errors[:20]}

    @app.post("/interactions")
    async def post_interactions(request: Request):
        obj = await body_json(request)
        objs = obj if isinstance(obj, list) else [obj]
        events = []
        for i, o in enumerate(objs, start=1):
            if not isinstance(o, dict):
                raise RecordError("expected a JSON object", i)
            o = dict(o)
            o.setdefault("timestamp", service.now())
            events.append(interaction_from_dict(o, i))
        for ev in events:
            service.engine.record(ev)
        return {"recorded": len(events)}

    @app.get("/recommend/similar")
    def similar(job_id: str, user_id: str, session_id: str = ""):
        return service.serve(Surface.SIMILAR_JOBS, user_id, session_id, job_id)

    @app.get("/recommend/homepage")
    def homepage(user_id: str, session_id: str = ""):
        return service.serve(Surface.HOMEPAGE, user_id, session_id)

    @app.post("/outcomes")
    async def post_outcome(request: Request):
        obj = await body_json(request)
        if not isinstance(obj, dict) or not isinstance(obj.get("slate_id"), str):
            raise RecordError("expected {slate_id, clicked_items}", 0, "slate_id")
        clicked = obj.get("clicked_items", [])
        if not isinstance(clicked, list) or not all(isinstance(c, str) for c in clicked):
            raise RecordError("clicked_items must be a list of job ids", 0, "clicked_items")
        try:
            return service.outcome(obj["slate_id"], clicked)
        except KeyError:
            return _error(404, "unknown_slate", f"no slate {obj['slate_id']!r}", "slate_id")

    @app.get("/experiments/{experiment_id}/report")
    def experiment_report(experiment_id: str):
        exp = service.experiments.get(experiment_id)
        if exp is None:
            return _error(404, "unknown_experiment", f"no experiment {experiment_id!r}",
                          "experiment_id")
        try:
            return report(exp, service.outcomes.snapshot(experiment_id)).to_dict()
        except EmptyArm as exc:
            return _error(409, exc.code, exc.message, exc.field)

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__, "kernels": kernels.backend,
                **service.engine.stats()}

    return app
