"""HTTP face of the failover pipeline.

One process serves the registry, the assessment matrices, the live
designations, the decision log, observation intake, and operator
commands, and pushes every state change over a server-sent-event
stream. Startup always goes through restart recovery: if the scenario
store directory already holds records, the pack, weights, and
designations are rebuilt from them before the first request is served.

Reads return snapshots of immutable values; mutations are serialized
behind one lock, so decisions and their store records never interleave.
Commands and other mutating requests carry a static bearer token
(config value or the SOURCEWATCH_TOKEN environment variable); when no
token is configured the service runs open, which is meant for local
rehearsals only.
"""

from __future__ import annotations

import asyncio
import json
import os
import time
from collections import deque
from contextlib import asynccontextmanager, contextmanager
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.responses import StreamingResponse

from . import __version__
from .errors import (
    ConfigurationError,
    MatrixError,
    NotActivatableError,
    RegistryParseError,
    SchemaViolation,
    StorageError,
    UnknownAttributeError,
    UnknownSourceError,
    ValueKindMismatch,
)
from .monitor import DEFAULT_GRACE_MULTIPLIER, DEFAULT_MARGIN_S, IngressMonitor
from .registry import load_registry_file
from .similarity import matrix_rows
from .stack import IngressStack
from .store import ScenarioStore

TOKEN_ENV = "SOURCEWATCH_TOKEN"


@dataclass
class ServiceConfig:
    registry_path: str
    store_dir: str
    host: str = "127.0.0.1"
    port: int = 8787
    grace_multiplier: float = DEFAULT_GRACE_MULTIPLIER
    margin_s: float = DEFAULT_MARGIN_S
    hysteresis: float = 0.0
    buffer_size: int = 256
    sweep_interval_s: float = 1.0
    token: str | None = None  # None falls back to SOURCEWATCH_TOKEN

    def __post_init__(self):
        if not Path(self.registry_path).is_file():
            raise ConfigurationError(
                f"registry file not found: {self.registry_path}")
        for name in ("grace_multiplier", "margin_s", "hysteresis",
                     "buffer_size", "sweep_interval_s", "port"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be non-negative")

    def resolved_token(self) -> str | None:
        return self.token or os.environ.get(TOKEN_ENV) or None


class EventBroker:
    """Fan-out of stack events to SSE subscribers, with a replay ring."""

    def __init__(self, buffer_size: int):
        self.buffer: deque = deque(maxlen=max(1, buffer_size))
        self.next_id = 1
        self.queues: set = set()

    def publish(self, kind: str, doc: dict):
        event = {"id": self.next_id, "kind": kind, "data": doc}
        self.next_id += 1
        self.buffer.append(event)
        for queue in list(self.queues):
            queue.put_nowait(event)

    def backlog(self, since: int) -> list:
        return [event for event in self.buffer if event["id"] > since]


def _sse(event: dict) -> str:
    return (f"id: {event['id']}\n"
            f"event: {event['kind']}\n"
            f"data: {json.dumps(event['data'], sort_keys=True)}\n\n")


@contextmanager
def _api_errors():
    try:
        yield
    except UnknownSourceError as exc:
        raise HTTPException(status_code=404, detail=str(exc)) from exc
    except NotActivatableError as exc:
        raise HTTPException(status_code=409, detail=str(exc)) from exc
    except (ConfigurationError, SchemaViolation, ValueKindMismatch,
            RegistryParseError, UnknownAttributeError, MatrixError,
            ValueError, KeyError, TypeError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    except StorageError as exc:
        raise HTTPException(status_code=500, detail=str(exc)) from exc


def create_app(config: ServiceConfig, clock=time.time) -> FastAPI:
    registry = load_registry_file(config.registry_path)
    store = ScenarioStore(Path(config.store_dir))
    monitor = IngressMonitor(registry,
                             grace_multiplier=config.grace_multiplier,
                             margin_s=config.margin_s)
    stack = IngressStack.restore(registry, store, now=clock(),
                                 hysteresis=config.hysteresis,
                                 monitor=monitor)
    broker = EventBroker(config.buffer_size)
    stack.subscribe(broker.publish)
    lock = asyncio.Lock()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        async def sweeper():
            while True:
                await asyncio.sleep(config.sweep_interval_s)
                async with lock:
                    stack.sweep(clock())

        task = asyncio.create_task(sweeper())
        try:
            yield
        finally:
            task.cancel()
            store.close()

    app = FastAPI(title="sourcewatch", version=__version__,
                  lifespan=lifespan)
    app.state.stack = stack
    app.state.broker = broker
    app.state.config = config

    def require_token(request: Request):
        token = config.resolved_token()
        if token is None:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {token}":
            raise HTTPException(status_code=401,
                                detail="invalid or missing bearer token")

    # -- read side ---------------------------------------------------------

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "version": __version__,
            "registry-version": stack.registry.version,
            "pack-digest": stack.manager.pack.digest,
            "data-types": sorted(stack.manager.pack.matrices),
            "latest-event-id": broker.next_id - 1,
            "time": clock(),
        }

    @app.get("/registry")
    def registry_doc():
        return {"version": stack.registry.version,
                "registry": stack.registry.to_doc()}

    @app.get("/matrix")
    def matrix(data_type: str = Query(...)):
        try:
            built = stack.manager.pack.matrix(data_type)
        except ConfigurationError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return {"digest": built.digest, "matrix": built.to_doc(),
                "table": matrix_rows(built)}

    @app.get("/active")
    def active():
        return stack.active()

    @app.get("/statuses")
    def statuses():
        # untracked sources report the "unknown" pseudo-state with no history
        snap = stack.monitor.snapshot()
        blank = {"state": "unknown", "since": None, "ready-at": None,
                 "last-seen": None, "staleness-horizon": None}
        return {"statuses": {source_id: snap.get(source_id, blank)
                             for source_id in stack.registry.sources}}

    @app.get("/decisions")
    def decisions(since: int = 0):
        records = stack.store.replay(kind="decision")
        out = [{"seq": record.seq, "at": record.at, **record.body}
               for record in records if record.seq > since]
        latest = max((record.seq for record in records), default=0)
        return {"decisions": out, "latest-seq": latest}

    # -- ingestion -----------------------------------------------------------

    @app.post("/observations")
    async def observations(request: Request):
        require_token(request)
        raw = (await request.body()).decode("utf-8")
        with _api_errors():
            docs = _parse_observation_batch(raw)
        transitions = []
        async with lock:
            with _api_errors():
                for doc in docs:
                    at = float(doc.get("at", clock()))
                    events = stack.observe(doc["source-id"], doc.get("value"),
                                           at)
                    transitions.extend(event.to_doc() for event in events)
        return {"accepted": len(docs), "transitions": transitions}

    # -- operator side ---------------------------------------------------------

    @app.post("/sources", status_code=201)
    async def register_source(request: Request):
        require_token(request)
        descriptor = await request.json()
        async with lock:
            with _api_errors():
                decided = stack.register_source(descriptor, clock())
        return {"registry-version": stack.registry.version,
                "decisions": [decision.to_doc() for decision in decided]}

    @app.put("/weights")
    async def set_weights(request: Request):
        require_token(request)
        weights = await request.json()
        if not isinstance(weights, dict):
            raise HTTPException(status_code=400,
                                detail="body must map attribute ids to "
                                       "weights")
        async with lock:
            with _api_errors():
                pack = stack.set_weights(weights, clock())
        return {"pack-digest": pack.digest,
                "matrices": {data_type: pack.matrices[data_type].digest
                             for data_type in sorted(pack.matrices)},
                "weights": dict(stack.registry.weights)}

    @app.post("/commands/pre-activate")
    async def pre_activate(request: Request):
        require_token(request)
        body = await request.json()
        async with lock:
            with _api_errors():
                ready_at = stack.pre_activate(body["source-id"], clock())
        return {"source-id": body["source-id"], "ready-at": ready_at}

    @app.post("/commands/force-switch")
    async def force_switch(request: Request):
        require_token(request)
        body = await request.json()
        async with lock:
            with _api_errors():
                decision = stack.force_switch(body["data-type"],
                                              body["source-id"], clock())
        return decision.to_doc()

    # -- events -------------------------------------------------------------------

    @app.get("/events")
    async def events(request: Request, since: int = 0, limit: int = 0):
        """SSE stream; ``limit`` > 0 closes after that many events (a
        debugging aid, live consumers leave it unset)."""
        queue: asyncio.Queue = asyncio.Queue()
        backlog = broker.backlog(since)
        broker.queues.add(queue)

        async def stream():
            sent = 0
            try:
                for event in backlog:
                    yield _sse(event)
                    sent += 1
                    if limit and sent >= limit:
                        return
                while True:
                    try:
                        event = await asyncio.wait_for(queue.get(),
                                                       timeout=15.0)
                    except asyncio.TimeoutError:
                        yield ": keepalive\n\n"
                        continue
                    yield _sse(event)
                    sent += 1
                    if limit and sent >= limit:
                        return
            finally:
                broker.queues.discard(queue)

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app


def _parse_observation_batch(raw: str) -> list:
    """Accept one JSON object, a JSON array, or NDJSON lines."""
    text = raw.strip()
    if not text:
        raise ValueError("empty observation body")
    try:
        parsed = json.loads(text)
    except json.JSONDecodeError:
        parsed = [json.loads(line) for line in text.splitlines()
                  if line.strip()]
    if isinstance(parsed, dict):
        parsed = [parsed]
    if not isinstance(parsed, list) or not all(
            isinstance(doc, dict) and "source-id" in doc for doc in parsed):
        raise ValueError("observations need a source-id each")
    return parsed


def serve(config: ServiceConfig):
    """Run the service until interrupted (blocking)."""
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port,
                log_level="warning")
