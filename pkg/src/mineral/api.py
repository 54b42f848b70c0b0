"""HTTP/JSON service exposing engine sessions for the web UI and scripts.

State machine mirrors the engine exactly: sessions are created paused, run or
resume toward a node / the next breakpoint / completion, snapshots are
immutable (ETag = content hash), parameter edits report the invalidated
nodes.  Per-session commands are serialized; a second command on a busy
session gets 409.
"""

from __future__ import annotations

import hashlib
import threading
from fractions import Fraction
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Header, HTTPException, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import dataio, dsl
from .dataio import DataError, DatasetConfig
from .engine import (
    EngineError,
    InvalidBreakpoint,
    NotMaterialized,
    Session,
    SessionBusy,
    UnboundSource,
)
from .expr import ExprError
from .explain import node_label
from .mining import ResourceLimit
from .model import NestedRelation, parse_type
from .optimizer import (apply_rewrites, choose_plan, enumerate_plans,
                        reference_plan, stats_from_relation)
from .params import InvalidValue, MiningParams, as_fraction
from .tree import InfeasibleConstraint, TreeError


def _frac(f: Fraction | None) -> dict | None:
    if f is None:
        return None
    return {"num": f.numerator, "den": f.denominator}


class DatasetUpload(BaseModel):
    name: str
    csv_text: str | None = None
    path: str | None = None
    tid_column: str = "tid"
    item_column: str = "item"
    columns: dict[str, str] | None = None
    delimiter: str = ","


class SessionRequest(BaseModel):
    dataset: str
    query: str | None = None  # MINE RULE / CAQ / query-spec text
    template: str | None = None
    minsup: str | float | None = None
    minconf: str | float | None = None
    threshold_mode: str = "strict"
    breakpoints: list[tuple[int, int]] | None = None
    max_plans: int = 64
    # interactive sessions default to the stepwise plan so every node can be
    # inspected; "best" takes the optimizer's minimum-cost plan instead
    plan: str = "reference"


class RunRequest(BaseModel):
    until: int | str = "end"


class ParamsPatch(BaseModel):
    minsup: str | float | None = None
    minconf: str | float | None = None


class BreakpointPatch(BaseModel):
    edge: tuple[int, int]
    enabled: bool


class _Held:
    """One engine session plus its command lock."""

    def __init__(self, session: Session, dataset: str):
        self.session = session
        self.dataset = dataset
        self.lock = threading.Lock()


def session_resource(held: _Held) -> dict[str, Any]:
    s = held.session
    tree = s.tree
    nodes = []
    for n in tree.nodes:
        nodes.append(
            {
                "id": n.id,
                "op": type(n.op).__name__.lower(),
                "label": node_label(n),
                "step": n.step,
                "children": list(n.children),
            }
        )
    spans = [
        {
            "kind": sp.kind,
            "nodes": sorted(sp.nodes),
            "label": sp.label,
            "params": list(sp.params),
            "fused": sp.fused,
        }
        for sp in tree.spans
    ]
    choices = [
        {
            "algorithm": c.algorithm,
            "node": c.node,
            "span": c.span.kind if c.span is not None else None,
        }
        for c in s.plan.choices
    ]
    return {
        "id": s.id,
        "dataset": held.dataset,
        "status": s.status,
        "params": {
            "minsup": _frac(s.params.minsup),
            "minconf": _frac(s.params.minconf),
            "n": s.params.n,
            "threshold_mode": s.params.threshold_mode,
        },
        "tree": {
            "root": tree.root,
            "kind": tree.kind,
            "nodes": nodes,
            "edges": [list(e) for e in tree.edges()],
            "spans": spans,
        },
        "node_states": {str(nid): state.value for nid, state in s.states.items()},
        "row_counts": {
            str(nid): snap.rows for nid, snap in s.snapshots.items()
        },
        "breakpoints": [list(e) for e in sorted(s.breakpoints)],
        "plan": {"choices": choices, "cost": _frac(s.plan.cost)},
    }


def create_app(
    allowed_paths: list[Path] | None = None,
    token: str | None = None,
    static_dir: str | None = None,
) -> FastAPI:
    app = FastAPI(title="mineral session api", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    datasets: dict[str, NestedRelation] = {}
    sessions: dict[str, _Held] = {}
    counter = {"n": 0}
    allowed = [p.resolve() for p in (allowed_paths or [])]
    # exposed for contract tests (lock contention is timing-dependent otherwise)
    app.state.sessions = sessions
    app.state.datasets = datasets

    def check_token(x_api_token: str | None):
        if token is not None and x_api_token != token:
            raise HTTPException(401, "missing or wrong X-Api-Token")

    @app.exception_handler(ResourceLimit)
    async def _resource_limit(request: Request, exc: ResourceLimit):
        return JSONResponse(
            status_code=500,
            content={"error": "resource_limit", "detail": str(exc)},
        )

    def get_held(session_id: str) -> _Held:
        held = sessions.get(session_id)
        if held is None:
            raise HTTPException(404, f"no session {session_id}")
        return held

    def locked(held: _Held):
        if not held.lock.acquire(blocking=False):
            raise HTTPException(409, "session busy")
        return held.lock

    @app.get("/health")
    def health():
        return {"ok": True}

    @app.post("/datasets", status_code=201)
    def upload_dataset(body: DatasetUpload, x_api_token: str | None = Header(None)):
        check_token(x_api_token)
        columns = None
        if body.columns:
            try:
                columns = tuple((n, parse_type(t)) for n, t in body.columns.items())
            except Exception as e:
                raise HTTPException(400, f"bad column declaration: {e}")
        if body.csv_text is not None:
            import tempfile

            with tempfile.NamedTemporaryFile(
                "w", suffix=".csv", delete=False, encoding="utf-8"
            ) as fh:
                fh.write(body.csv_text)
                tmpsrc = Path(fh.name)
            cfg = DatasetConfig(
                tmpsrc, body.tid_column, body.item_column, columns, body.delimiter
            )
            try:
                rel = dataio.load_transactions_csv(cfg)
            except DataError as e:
                raise HTTPException(400, str(e))
            finally:
                tmpsrc.unlink(missing_ok=True)
        elif body.path is not None:
            path = Path(body.path).resolve()
            if not any(str(path).startswith(str(a)) for a in allowed):
                raise HTTPException(403, f"path {path} is not allow-listed")
            cfg = DatasetConfig(
                path, body.tid_column, body.item_column, columns, body.delimiter
            )
            try:
                rel = dataio.load_transactions_csv(cfg)
            except DataError as e:
                raise HTTPException(400, str(e))
        else:
            raise HTTPException(400, "csv_text or path required")
        if len(dataio.emit_csv(rel)) > 10 * 1024 * 1024:
            raise HTTPException(413, "dataset exceeds the 10 MiB desk-scale cap")
        datasets[body.name] = rel
        return {"name": body.name, "rows": len(rel)}

    @app.get("/datasets")
    def list_datasets():
        return {
            name: {"rows": len(rel), "schema": [n for n in rel.schema.names]}
            for name, rel in datasets.items()
        }

    @app.post("/sessions", status_code=201)
    def create_session(body: SessionRequest, x_api_token: str | None = Header(None)):
        check_token(x_api_token)
        rel = datasets.get(body.dataset)
        if rel is None:
            raise HTTPException(404, f"no dataset {body.dataset!r}")
        try:
            params = MiningParams(
                as_fraction(body.minsup) if body.minsup is not None else Fraction(3, 10),
                as_fraction(body.minconf) if body.minconf is not None else Fraction(6, 10),
                threshold_mode=body.threshold_mode,
            )
            if body.query:
                tree = dsl.load_query(body.query, params=params, source=body.dataset)
            else:
                template = body.template or "classic"
                spec_text = f"template: {template}\nsource: {body.dataset}\n"
                tree = dsl.load_query(spec_text, params=params, source=body.dataset)
            if body.breakpoints:
                tree = tree.with_breakpoints([tuple(e) for e in body.breakpoints])
            rewrite = apply_rewrites(tree)
            plans = enumerate_plans(rewrite.tree, max_plans=body.max_plans)
            best = choose_plan(plans, stats_from_relation(rel))
            chosen = best if body.plan == "best" else reference_plan(rewrite.tree)
            counter["n"] += 1
            session = Session(chosen, {body.dataset: rel}, session_id=f"s{counter['n']}")
        except InfeasibleConstraint as e:
            raise HTTPException(422, str(e))
        except InvalidValue as e:
            raise HTTPException(422, str(e))
        except (dsl.SyntaxError_, TreeError, ExprError, InvalidBreakpoint,
                UnboundSource, EngineError) as e:
            raise HTTPException(400, str(e))
        held = _Held(session, body.dataset)
        sessions[session.id] = held
        return session_resource(held)

    @app.get("/sessions")
    def list_sessions():
        return [session_resource(h) for h in sessions.values()]

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return session_resource(get_held(session_id))

    @app.post("/sessions/{session_id}/run")
    def run_session(session_id: str, body: RunRequest,
                    x_api_token: str | None = Header(None)):
        check_token(x_api_token)
        held = get_held(session_id)
        lock = locked(held)
        try:
            until = body.until
            if until in ("end", "breakpoint"):
                report = held.session.run_until("end")
            else:
                report = held.session.run_until(int(until))
        except SessionBusy as e:
            raise HTTPException(409, str(e))
        except EngineError as e:
            raise HTTPException(400, str(e))
        finally:
            lock.release()
        return {
            "materialized": [list(x) for x in report.materialized],
            "paused_at": list(report.paused_at) if report.paused_at else None,
            "done": report.done,
            "session": session_resource(held),
        }

    @app.get("/sessions/{session_id}/nodes/{node_id}/snapshot")
    def get_snapshot(session_id: str, node_id: int, format: str = "json"):
        held = get_held(session_id)
        try:
            snap = held.session.inspect(node_id)
        except NotMaterialized as e:
            raise HTTPException(409, str(e))
        except EngineError as e:
            raise HTTPException(404, str(e))
        text = snap.render()
        etag = hashlib.sha256(text.encode()).hexdigest()[:32]
        headers = {"ETag": etag}
        if format == "text":
            return PlainTextResponse(text, headers=headers)
        payload = dataio.emit_json(snap.relation)
        payload.update({"node": snap.node, "row_count": snap.rows})
        return JSONResponse(payload, headers=headers)

    @app.patch("/sessions/{session_id}/params")
    def patch_params(session_id: str, body: ParamsPatch,
                     x_api_token: str | None = Header(None)):
        check_token(x_api_token)
        held = get_held(session_id)
        lock = locked(held)
        invalidated: list[int] = []
        try:
            for name in ("minsup", "minconf"):
                value = getattr(body, name)
                if value is None:
                    continue
                report = held.session.set_param(name, as_fraction(value))
                invalidated.extend(report.invalidated)
        except SessionBusy as e:
            raise HTTPException(409, str(e))
        except InvalidValue as e:
            raise HTTPException(400, str(e))
        finally:
            lock.release()
        return {"invalidated": invalidated, "session": session_resource(held)}

    @app.post("/sessions/{session_id}/breakpoints")
    def toggle_breakpoint(session_id: str, body: BreakpointPatch,
                          x_api_token: str | None = Header(None)):
        check_token(x_api_token)
        held = get_held(session_id)
        lock = locked(held)
        try:
            held.session.set_breakpoint(tuple(body.edge), body.enabled)
        except (SessionBusy,) as e:
            raise HTTPException(409, str(e))
        except (InvalidBreakpoint, EngineError) as e:
            raise HTTPException(400, str(e))
        finally:
            lock.release()
        return {"breakpoints": [list(e) for e in sorted(held.session.breakpoints)],
                "session": session_resource(held)}

    @app.post("/sessions/{session_id}/resume")
    def resume_session(session_id: str, x_api_token: str | None = Header(None)):
        check_token(x_api_token)
        held = get_held(session_id)
        lock = locked(held)
        try:
            report = held.session.resume()
        except SessionBusy as e:
            raise HTTPException(409, str(e))
        finally:
            lock.release()
        return {
            "materialized": [list(x) for x in report.materialized],
            "paused_at": list(report.paused_at) if report.paused_at else None,
            "done": report.done,
            "session": session_resource(held),
        }

    @app.delete("/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str, x_api_token: str | None = Header(None)):
        check_token(x_api_token)
        held = get_held(session_id)
        held.session.cancel()
        del sessions[session_id]
        return Response(status_code=204)

    @app.get("/sessions/{session_id}/events")
    def get_events(session_id: str):
        return PlainTextResponse("\n".join(get_held(session_id).session.events) + "\n")

    if static_dir:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    return app
