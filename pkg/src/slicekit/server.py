"""Session-scoped HTTP/JSON service for interactive subgroup exploration.

Each session holds one dataset, a cached candidate pool with masks, the
active ranking weights, favorites, and cached map layouts. Re-ranking
reorders the cached pool without touching masks; long discoveries run as
polled background jobs. Favorites and ranking configs snapshot to disk on
mutation so exploration state survives a restart.
"""

from __future__ import annotations

import json
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from .dataset import FeatureMatrix, load_schema, load_table
from .discovery import (
    SELECTION_OUTCOME,
    DiscoveryConfig,
    attach_raw_scores,
    evaluate_rule,
    targeted_discover,
)
from .errors import (
    ConfigError,
    RuleSyntaxError,
    RuleValueError,
    SliceKitError,
)
from .groupmap import (
    MAX_OVERLAY_SUBGROUPS,
    build_layout,
    bubbles_matching,
    distinguishing_feature,
    intersection_summary,
    overlay_subgroups,
)
from .ranking import RankingSpec, combine_and_rank
from .rules import (
    Mask,
    Rule,
    SetValues,
    ToggleFeature,
    edit_rule,
    evaluate_mask,
    parse_rule,
)


class Session:
    """In-memory exploration state for one dataset; single-writer."""

    def __init__(self, session_id: str, matrix: FeatureMatrix):
        self.id = session_id
        self.matrix = matrix
        self.lock = threading.Lock()
        self.pool = []                  # ranked SubgroupResult list with masks
        self.specs: tuple[RankingSpec, ...] = ()
        self.config: DiscoveryConfig | None = None
        self.jobs: dict[str, dict] = {}
        self.favorites: list[dict] = []
        self.layouts: dict[tuple, dict] = {}
        self.rerank_cache: dict[str, str] = {}

    def dataset_summary(self) -> dict:
        m = self.matrix
        return {
            "n_rows": m.n_rows,
            "n_features": m.n_features,
            "features": [
                {"name": c.name, "values": list(c.vocabulary)}
                for c in m.features
            ] if m.n_features <= 2000 else [],
            "outcomes": [
                {"name": o.name, "kind": o.kind,
                 "base_rate": float(
                     o.values[m.split.evaluation_rows].mean())}
                for o in m.outcomes.values()
            ],
            "discovery_rows": len(m.split.discovery_rows),
            "evaluation_rows": len(m.split.evaluation_rows),
        }


def _canonical_json(payload) -> Response:
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return Response(content=body, media_type="application/json")


def _results_payload(results, specs) -> dict:
    return {
        "specs": [s.to_json_dict() for s in specs],
        "results": [r.to_json_dict() for r in results],
    }


def create_app(data_root=None, snapshot_dir=None, static_dir=None) -> FastAPI:
    """Build the service. ``data_root`` restricts dataset paths; snapshots
    of favorites/configs go to ``snapshot_dir`` when set; ``static_dir``
    (the built web client) is mounted at the root, after the API routes."""
    app = FastAPI(title="slicekit", version="0.1.0")
    sessions: dict[str, Session] = {}
    executor = ThreadPoolExecutor(max_workers=2)
    snapshot_path = Path(snapshot_dir) if snapshot_dir else None

    def get_session(session_id: str) -> Session | None:
        return sessions.get(session_id)

    def snapshot(session: Session):
        if snapshot_path is None:
            return
        snapshot_path.mkdir(parents=True, exist_ok=True)
        state = {
            "session_id": session.id,
            "favorites": session.favorites,
            "specs": [s.to_json_dict() for s in session.specs],
        }
        (snapshot_path / f"{session.id}.json").write_text(
            json.dumps(state, indent=2))

    def register_matrix(matrix: FeatureMatrix) -> str:
        session_id = uuid.uuid4().hex[:12]
        sessions[session_id] = Session(session_id, matrix)
        return session_id

    # tests and embedders create sessions without the filesystem round trip
    app.state.register_matrix = register_matrix
    app.state.sessions = sessions

    def not_found():
        return JSONResponse({"detail": "unknown session"}, status_code=404)

    @app.exception_handler(SliceKitError)
    async def _domain_error(request: Request, exc: SliceKitError):
        status = 422 if isinstance(
            exc, (RuleSyntaxError, RuleValueError, ConfigError)) else 500
        payload = {"detail": str(exc)}
        if isinstance(exc, RuleSyntaxError):
            payload["position"] = exc.position
        return JSONResponse(payload, status_code=status)

    @app.post("/sessions")
    async def create_session(request: Request):
        body = await request.json()
        data = body.get("data")
        schema = body.get("schema")
        if not data or schema is None:
            return JSONResponse(
                {"detail": "need 'data' path and 'schema' path or object"},
                status_code=422)
        data_path = Path(data)
        if data_root is not None:
            data_path = Path(data_root) / data_path
        try:
            if isinstance(schema, str):
                schema_file = Path(schema)
                if data_root is not None:
                    schema_file = Path(data_root) / schema_file
                schema = load_schema(schema_file)
            matrix = load_table(data_path, schema)
        except FileNotFoundError as exc:
            return JSONResponse(
                {"detail": f"file not found: {exc.filename}"},
                status_code=404)
        session_id = register_matrix(matrix)
        return JSONResponse({
            "session_id": session_id,
            "dataset": sessions[session_id].dataset_summary(),
        })

    @app.get("/sessions/{session_id}")
    async def session_info(session_id: str):
        session = get_session(session_id)
        if session is None:
            return not_found()
        return JSONResponse({
            "session_id": session.id,
            "dataset": session.dataset_summary(),
            "pool_size": len(session.pool),
            "specs": [s.to_json_dict() for s in session.specs],
        })

    def run_discover(session: Session, config: DiscoveryConfig, job_id: str):
        from .discovery import discover

        try:
            results = discover(session.matrix, config)
            with session.lock:
                session.pool = results
                session.specs = config.specs
                session.config = config
                session.layouts.clear()
                session.rerank_cache.clear()
                session.jobs[job_id] = {
                    "status": "done",
                    "result": _results_payload(results, config.specs),
                }
        except Exception as exc:  # job errors surface via polling
            with session.lock:
                session.jobs[job_id] = {"status": "error", "detail": str(exc)}

    def _check_outcomes(session: Session, specs) -> None:
        known = set(session.matrix.outcomes)
        for spec in specs:
            if spec.outcome is not None and spec.outcome not in known:
                raise ConfigError(
                    f"unknown outcome {spec.outcome!r}; "
                    f"dataset outcomes: {sorted(known)}")

    @app.post("/sessions/{session_id}/discover")
    async def start_discover(session_id: str, request: Request):
        session = get_session(session_id)
        if session is None:
            return not_found()
        body = await request.json()
        source_mask = None
        if body.get("source_rows") is not None:
            rows = np.asarray(body["source_rows"], dtype=np.int64)
            if rows.size == 0:
                return JSONResponse(
                    {"detail": "source selection is empty"}, status_code=409)
            values = np.zeros(session.matrix.n_rows, dtype=bool)
            values[rows] = True
            source_mask = Mask.from_bool(values, session.matrix)
        config = DiscoveryConfig.from_json_dict(body, source_mask=source_mask)
        _check_outcomes(session, config.specs)
        job_id = uuid.uuid4().hex[:12]
        session.jobs[job_id] = {"status": "running"}
        executor.submit(run_discover, session, config, job_id)
        return JSONResponse({"job_id": job_id, "status": "running"})

    @app.get("/sessions/{session_id}/jobs/{job_id}")
    async def job_status(session_id: str, job_id: str):
        session = get_session(session_id)
        if session is None:
            return not_found()
        job = session.jobs.get(job_id)
        if job is None:
            return JSONResponse({"detail": "unknown job"}, status_code=404)
        if job["status"] == "done":
            return _canonical_json({"status": "done", **job["result"]})
        return JSONResponse(job)

    @app.post("/sessions/{session_id}/rerank")
    async def rerank(session_id: str, request: Request):
        session = get_session(session_id)
        if session is None:
            return not_found()
        body = await request.json()
        specs = tuple(RankingSpec.from_json_dict(s) for s in body["specs"])
        _check_outcomes(session, specs)
        with session.lock:
            if not session.pool:
                return JSONResponse(
                    {"detail": "no candidate pool; run discover first"},
                    status_code=409)
            # the ranking depends only on the candidate set and the specs,
            # so repeated weight settings serve a cached body
            cache_key = json.dumps([s.to_json_dict() for s in specs],
                                   sort_keys=True, separators=(",", ":"))
            cached = session.rerank_cache.get(cache_key)
            if cached is not None:
                session.specs = specs
                return Response(content=cached,
                                media_type="application/json")
            # new spec kinds need raw scores once; reordering never
            # re-evaluates masks because results cache them
            known = set(session.pool[0].scores.raw)
            missing = [s for s in specs if s.enabled and s.key not in known]
            if missing:
                attach_raw_scores(session.pool, missing, session.matrix)
            ranked = combine_and_rank(list(session.pool), list(specs))
            session.pool = ranked
            session.specs = specs
            snapshot(session)
            body = json.dumps(_results_payload(ranked, specs),
                              sort_keys=True, separators=(",", ":"))
            if len(session.rerank_cache) >= 32:
                session.rerank_cache.pop(next(iter(session.rerank_cache)))
            session.rerank_cache[cache_key] = body
            return Response(content=body, media_type="application/json")

    @app.post("/sessions/{session_id}/rules/evaluate")
    async def rules_evaluate(session_id: str, request: Request):
        session = get_session(session_id)
        if session is None:
            return not_found()
        body = await request.json()
        rule = parse_rule(body["rule"], session.matrix)
        result = evaluate_rule(rule, session.matrix, session.specs)
        return _canonical_json(result.to_json_dict())

    @app.post("/sessions/{session_id}/rules/edit")
    async def rules_edit(session_id: str, request: Request):
        session = get_session(session_id)
        if session is None:
            return not_found()
        body = await request.json()
        if "predicates" in body:
            rule = Rule.from_json_list(
                body["predicates"], dormant=body.get("dormant") or [])
        else:
            rule = parse_rule(body["rule"], session.matrix)
        op = body["edit"]
        if op["op"] == "toggle":
            edit = ToggleFeature(op["feature"])
        elif op["op"] == "set-values":
            edit = SetValues(op["feature"], frozenset(op["values"]))
        else:
            return JSONResponse(
                {"detail": f"unknown edit op {op['op']!r}"}, status_code=422)
        new_rule = edit_rule(rule, edit, session.matrix)
        result = evaluate_rule(new_rule, session.matrix, session.specs)
        payload = result.to_json_dict()
        payload["dormant"] = [
            {"feature": f, "values": sorted(v)} for f, v in new_rule.dormant
        ]
        return _canonical_json(payload)

    def layout_for(session: Session, selection: tuple[int, ...]):
        """Layout object + serializable payload, cached per selection."""
        cached = session.layouts.get(selection)
        if cached is None:
            cached = layout_payload(session, selection)
            session.layouts[selection] = cached
        return cached

    def layout_payload(session: Session, selection: tuple[int, ...]) -> dict:
        matrix = session.matrix
        rules = [session.pool[i].rule for i in selection]
        layout = build_layout(matrix, seed=0, subgroups=rules,
                              outcome=matrix.first_binary_outcome())
        overlays = overlay_subgroups(layout, len(rules)) if rules else []
        summary = (intersection_summary(
            matrix, rules, matrix.first_binary_outcome())
            if rules else None)
        distinguishing = None
        if len(selection) == 1:
            mask = session.pool[selection[0]].mask(matrix)
            name, value, precision, recall = distinguishing_feature(
                mask, matrix)
            distinguishing = {"feature": name, "value": value,
                              "precision": precision, "recall": recall}
        payload = {
            "bubbles": [
                {"x": b.x, "y": b.y, "r": b.radius, "count": b.count,
                 "outcome": b.outcome, "signature": list(b.signature)}
                for b in layout.bubbles
            ],
            "extent": list(layout.extent),
            "overlays": overlays,
            "intersections": summary.entries if summary else [],
            "unassigned": summary.unassigned if summary else None,
            "distinguishing": distinguishing,
        }
        return {"layout": layout, "payload": payload}

    @app.get("/sessions/{session_id}/map")
    async def get_map(session_id: str, selection: str = ""):
        session = get_session(session_id)
        if session is None:
            return not_found()
        try:
            picked = tuple(
                int(tok) for tok in selection.split(",") if tok.strip())
        except ValueError:
            return JSONResponse(
                {"detail": "selection must be comma-separated pool indices"},
                status_code=422)
        if len(picked) > MAX_OVERLAY_SUBGROUPS:
            return JSONResponse(
                {"detail": f"at most {MAX_OVERLAY_SUBGROUPS} subgroups"},
                status_code=422)
        if any(i < 0 or i >= len(session.pool) for i in picked):
            return JSONResponse(
                {"detail": "selection index out of range"}, status_code=422)
        with session.lock:
            cached = layout_for(session, picked)
        return _canonical_json(cached["payload"])

    @app.post("/sessions/{session_id}/map/matching")
    async def map_matching(session_id: str, request: Request):
        """Bubble indices (within the layout for ``selection``) whose members
        intersect the hovered rule; drives hover grey-out in clients."""
        session = get_session(session_id)
        if session is None:
            return not_found()
        body = await request.json()
        picked = tuple(int(i) for i in body.get("selection") or [])
        if len(picked) > MAX_OVERLAY_SUBGROUPS:
            return JSONResponse(
                {"detail": f"at most {MAX_OVERLAY_SUBGROUPS} subgroups"},
                status_code=422)
        if any(i < 0 or i >= len(session.pool) for i in picked):
            return JSONResponse(
                {"detail": "selection index out of range"}, status_code=422)
        rule = parse_rule(body["rule"], session.matrix)
        mask = evaluate_mask(rule, session.matrix)
        with session.lock:
            cached = layout_for(session, picked)
            indices = bubbles_matching(cached["layout"], mask)
        return _canonical_json({"bubbles": indices})

    @app.post("/sessions/{session_id}/map/search")
    async def map_search(session_id: str, request: Request):
        session = get_session(session_id)
        if session is None:
            return not_found()
        body = await request.json()
        rows = body.get("rows") or []
        if body.get("bubbles") is not None:
            # lasso clients send bubble indices from the current layout;
            # the member row ids never leave the server
            picked = tuple(int(i) for i in body.get("selection") or [])
            if any(i < 0 or i >= len(session.pool) for i in picked):
                return JSONResponse(
                    {"detail": "selection index out of range"},
                    status_code=422)
            with session.lock:
                cached = layout_for(session, picked)
            bubbles = cached["layout"].bubbles
            if any(i < 0 or i >= len(bubbles) for i in body["bubbles"]):
                return JSONResponse(
                    {"detail": "bubble index out of range"}, status_code=422)
            rows = [int(r) for i in body["bubbles"]
                    for r in bubbles[i].members.tolist()]
        if not rows:
            return JSONResponse(
                {"detail": "empty selection"}, status_code=409)
        matrix = session.matrix
        selection = np.zeros(matrix.n_rows, dtype=bool)
        rows = np.asarray(rows, dtype=np.int64)
        if rows.min() < 0 or rows.max() >= matrix.n_rows:
            return JSONResponse(
                {"detail": "row id out of range"}, status_code=422)
        selection[rows] = True
        base = session.config or DiscoveryConfig(
            specs=session.specs or (RankingSpec(
                kind="outcome-rate-high",
                outcome=matrix.first_binary_outcome()),))
        results = targeted_discover(matrix, base, selection)
        specs = tuple(base.specs) + (RankingSpec(
            kind="selection-score", outcome=SELECTION_OUTCOME, weight=2),)
        return _canonical_json(_results_payload(results, specs))

    @app.put("/sessions/{session_id}/favorites")
    async def put_favorites(session_id: str, request: Request):
        session = get_session(session_id)
        if session is None:
            return not_found()
        body = await request.json()
        favorites = []
        for entry in body.get("favorites", []):
            text = entry["rule"] if isinstance(entry, dict) else entry
            rule = parse_rule(text, session.matrix)
            favorites.append({"rule": str(rule),
                              "note": entry.get("note", "")
                              if isinstance(entry, dict) else ""})
        with session.lock:
            session.favorites = favorites
            snapshot(session)
        return JSONResponse({"favorites": favorites})

    @app.get("/sessions/{session_id}/favorites")
    async def get_favorites(session_id: str):
        session = get_session(session_id)
        if session is None:
            return not_found()
        return JSONResponse({"favorites": session.favorites})

    if static_dir is not None and Path(static_dir).is_dir():
        from starlette.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True),
                  name="ui")

    return app


def main(host: str = "127.0.0.1", port: int = 8000, data_root=None,
         snapshot_dir=None, static_dir=None):
    """Run the service under uvicorn (used by the CLI serve subcommand)."""
    import uvicorn

    uvicorn.run(create_app(data_root=data_root, snapshot_dir=snapshot_dir,
                           static_dir=static_dir),
                host=host, port=port)
