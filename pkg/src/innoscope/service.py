"""HTTP/JSON service over an artifacts bundle.

All endpoints are read-only with respect to the bundle; the only mutable
state is the per-session what-if trial logs, persisted as JSON files under
<bundle>/sessions/ and serialized per session key. Replaying a persisted log
against the bundled classifier reproduces identical probabilities.
"""

from __future__ import annotations

import json
import re
import threading
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import bundle as bundle_mod
from . import whatif
from .classifier import MembershipClassifier
from .errors import InnoscopeError
from .pipeline import load_bundle_panel

SESSION_PATTERN = re.compile(r"^[A-Za-z0-9_-]{1,64}$")


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str,
                 stage: str = "service"):
        super().__init__(message)
        self.status = status
        self.code = code
        self.stage = stage


class TrialRequest(BaseModel):
    base_region: str | None = None
    base_year: int | None = None
    overrides: dict = Field(default_factory=dict)
    cumulative: bool = True


class BundleState:
    """Immutable bundle documents plus the session-log store."""

    def __init__(self, bundle_dir):
        self.dir = Path(bundle_dir)
        self.panel = load_bundle_panel(self.dir)
        self.regions = bundle_mod.read_document(self.dir, "regions.json")
        self.clusters = bundle_mod.read_document(self.dir, "clusters.json")
        self.pca = bundle_mod.read_document(self.dir, "pca.json")
        self.shift = bundle_mod.read_document(self.dir, "shift.json")
        self.classifier = MembershipClassifier.from_dict(
            bundle_mod.read_document(self.dir, "classifier.json"))
        self.labeling = bundle_mod.read_document(self.dir, "labeling.json")
        self.sessions_dir = self.dir / "sessions"
        self._locks: dict = {}
        self._locks_guard = threading.Lock()

    def session_lock(self, session: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(session, threading.Lock())

    def session_path(self, session: str) -> Path:
        return self.sessions_dir / f"{session}.json"

    def load_session(self, session: str) -> whatif.TrialLog | None:
        path = self.session_path(session)
        if not path.exists():
            return None
        return whatif.TrialLog.loads(path.read_text(encoding="utf-8"))

    def save_session(self, log: whatif.TrialLog, session: str):
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self.session_path(session).write_text(log.dumps(), encoding="utf-8")

    def leader_label(self) -> str:
        leader = self.labeling["leader_cluster"]
        return self.labeling["labels"][str(leader)]

    def member_mask(self, label: str) -> np.ndarray:
        mask = np.array([r["fkm_label"] == label for r in self.regions])
        if not mask.any():
            # fall back to EURIS tier names
            mask = np.array([r["euris_label"] == label for r in self.regions])
        return mask


def _parse_base(value: str):
    """Sweep base parameter: '<region>::<year>'."""
    if "::" not in value:
        raise ServiceError(400, "bad_base",
                           "base must look like '<region>::<year>'")
    region, _, year = value.rpartition("::")
    try:
        return region, int(year)
    except ValueError:
        raise ServiceError(400, "bad_base", f"year part not an integer: "
                                            f"{year!r}") from None


def create_app(bundle_dir) -> FastAPI:
    state = BundleState(bundle_dir)
    app = FastAPI(title="innoscope service", version="1")
    app.state.bundle = state

    @app.exception_handler(ServiceError)
    async def service_error(_, exc: ServiceError):
        return JSONResponse(status_code=exc.status,
                            content={"code": exc.code, "stage": exc.stage,
                                     "message": str(exc)})

    @app.exception_handler(InnoscopeError)
    async def domain_error(_, exc: InnoscopeError):
        return JSONResponse(status_code=400,
                            content={"code": type(exc).__name__,
                                     "stage": "domain",
                                     "message": str(exc)})

    @app.exception_handler(Exception)
    async def internal_error(_, exc: Exception):
        return JSONResponse(status_code=500,
                            content={"code": "internal", "stage": "service",
                                     "message": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok", "rows": state.panel.n_rows}

    @app.get("/regions")
    def regions():
        return state.regions

    @app.get("/clusters")
    def clusters():
        return state.clusters

    @app.get("/pca")
    def pca_doc():
        return state.pca

    @app.get("/shift")
    def shift_doc():
        return state.shift

    @app.get("/donors")
    def donors(label: str, indicator: str):
        mask = state.member_mask(label)
        if not mask.any():
            raise ServiceError(404, "unknown_label",
                               f"no members carry label {label!r}")
        try:
            summary = whatif.donor_lookup(state.panel, mask, label, indicator)
        except KeyError as exc:
            raise ServiceError(400, "unknown_indicator", str(exc)) from exc
        return summary.to_dict()

    def _session_or_400(session: str) -> str:
        if not SESSION_PATTERN.match(session):
            raise ServiceError(400, "bad_session",
                               "session ids are 1-64 chars of [A-Za-z0-9_-]")
        return session

    @app.post("/whatif/{session}/trial")
    def run_trial(session: str, request: TrialRequest):
        session = _session_or_400(session)
        with state.session_lock(session):
            log = state.load_session(session)
            if log is None:
                if request.base_region is None or request.base_year is None:
                    raise ServiceError(400, "missing_base",
                                       "first trial must name base_region "
                                       "and base_year")
                log = whatif.TrialLog(request.base_region, request.base_year,
                                      state.leader_label(),
                                      request.cumulative)
            elif request.base_region is not None and (
                    request.base_region != log.base_region
                    or (request.base_year or log.base_year) != log.base_year):
                raise ServiceError(409, "base_mismatch",
                                   "session already bound to "
                                   f"{log.base_region}/{log.base_year}")
            try:
                entry = whatif.run_trial(log, state.panel, request.overrides,
                                         state.classifier)
            except KeyError as exc:
                raise ServiceError(400, "unknown_indicator", str(exc)) from exc
            except LookupError as exc:
                raise ServiceError(404, "unknown_base", str(exc)) from exc
            state.save_session(log, session)
        return {"session": session, "target_cluster": log.target_cluster,
                **entry.to_dict()}

    @app.get("/whatif/{session}/log")
    def session_log(session: str):
        session = _session_or_400(session)
        log = state.load_session(session)
        if log is None:
            raise ServiceError(404, "unknown_session",
                               f"no log for session {session!r}")
        return log.to_dict()

    @app.get("/sweep")
    def sweep(request: Request):
        # 'from' is a reserved word, so the range comes from raw query params
        params = request.query_params
        base = params.get("base")
        indicator = params.get("indicator")
        if not base or not indicator:
            raise ServiceError(400, "bad_request",
                               "sweep needs 'base' and 'indicator'")
        overrides = params.get("overrides")
        try:
            steps = int(params.get("steps", 21))
        except ValueError:
            raise ServiceError(400, "bad_steps", "steps must be an integer") \
                from None
        region, year = _parse_base(base)
        try:
            lo = float(params.get("from"))
            hi = float(params.get("to"))
        except (TypeError, ValueError):
            raise ServiceError(400, "bad_range",
                               "sweep needs numeric 'from' and 'to'") from None
        if steps < 1 or steps > 500:
            raise ServiceError(400, "bad_steps", "steps must be in [1, 500]")
        if hi < lo:
            raise ServiceError(400, "bad_range", "'to' must be >= 'from'")
        fixed = {}
        if overrides:
            try:
                fixed = json.loads(overrides)
            except json.JSONDecodeError as exc:
                raise ServiceError(400, "bad_overrides",
                                   f"overrides must be JSON: {exc}") from exc
        grid = np.linspace(lo, hi, steps) if steps > 1 else np.array([lo])
        try:
            curve = whatif.sensitivity_sweep(state.panel, region, year,
                                             indicator, grid,
                                             state.classifier, fixed)
        except KeyError as exc:
            raise ServiceError(400, "unknown_indicator", str(exc)) from exc
        except LookupError as exc:
            raise ServiceError(404, "unknown_base", str(exc)) from exc
        return {"base": base, "indicator": indicator,
                "values": [v for v, _ in curve],
                "probabilities": [p for _, p in curve]}

    return app


def serve(bundle_dir, bind: str = "127.0.0.1:8000"):
    """Run the service with uvicorn on the given address."""
    import uvicorn

    host, _, port = bind.rpartition(":")
    uvicorn.run(create_app(bundle_dir), host=host or "127.0.0.1",
                port=int(port or 8000))
