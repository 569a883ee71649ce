"""HTTP API over the store, caches, knowledge network, clusters, sessions, and prisms.

Every endpoint is a thin adapter around a module call; responses are its
output serialized.  GETs are pure; only the /sessions POST endpoints mutate,
and mutations are serialized per session id.
"""

from __future__ import annotations

import datetime
import logging
import math
import os
import re
import struct
import threading
import uuid
from collections import defaultdict
from pathlib import Path
from typing import Any, Mapping

from fastapi import Body, FastAPI, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import corrnet, knowledge, mvclust, prism, session as session_mod
from .errors import (
    EmptyYear,
    InvalidArgument,
    MissingBenchmark,
    PrismaticError,
    SessionNotFound,
    UnknownInstrument,
    UnknownItem,
)
from .ingest import CACHE_DIR, Store

log = logging.getLogger(__name__)

CACHE_PATTERN = re.compile(r"corr_(\d{4})\.prc1$")
SESSIONS_DIR = "sessions"
GMC_FILE = "gmc.json"


def cache_path(data_dir: Path, year: int) -> Path:
    return data_dir / CACHE_DIR / f"corr_{year}.prc1"


def _cache_instrument_count(path: Path) -> int:
    with path.open("rb") as fh:
        head = fh.read(12)
    if head[:4] != corrnet.CACHE_MAGIC:
        raise InvalidArgument(f"{path}: bad cache magic")
    return struct.unpack_from("<I", head, 8)[0]


class Workspace:
    """Loaded data plus per-session write locks; shared by all request handlers."""

    def __init__(self, data_dir: str | Path, benchmark: str | None = None) -> None:
        self.data_dir = Path(data_dir)
        self.store = Store.read(self.data_dir)
        if benchmark:
            if benchmark not in self.store.series:
                raise UnknownInstrument(f"benchmark {benchmark!r} has no price series")
            self.store.benchmark = benchmark
        self.net = (
            knowledge.build_network(list(self.store.profiles.values()))
            if self.store.profiles
            else None
        )
        gmc_path = self.data_dir / GMC_FILE
        self.gmc = mvclust.GmcResult.load(gmc_path) if gmc_path.exists() else None
        self._caches: dict[int, corrnet.YearlyCorrelationCache] = {}
        self._cache_lock = threading.Lock()
        self.sessions: dict[str, session_mod.ClusterSession] = {}
        self._session_locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._load_sessions()

    # --- caches -------------------------------------------------------------

    def years(self) -> list[tuple[int, int]]:
        out = []
        cache_dir = self.data_dir / CACHE_DIR
        if cache_dir.is_dir():
            for child in sorted(cache_dir.iterdir()):
                match = CACHE_PATTERN.search(child.name)
                if match:
                    out.append((int(match.group(1)), _cache_instrument_count(child)))
        return out

    def cache(self, year: int) -> corrnet.YearlyCorrelationCache:
        with self._cache_lock:
            if year not in self._caches:
                path = cache_path(self.data_dir, year)
                if not path.exists():
                    raise EmptyYear(f"no correlation cache for {year}")
                self._caches[year] = corrnet.YearlyCorrelationCache.load(path, year)
            return self._caches[year]

    @property
    def exclude(self) -> frozenset[str]:
        return frozenset({self.store.benchmark}) if self.store.benchmark else frozenset()

    # --- sessions -----------------------------------------------------------

    def _sessions_path(self, session_id: str) -> Path:
        return self.data_dir / SESSIONS_DIR / f"{session_id}.json"

    def _load_sessions(self) -> None:
        directory = self.data_dir / SESSIONS_DIR
        if not directory.is_dir():
            return
        for child in sorted(directory.glob("*.json")):
            try:
                loaded = session_mod.ClusterSession.from_json(child.read_text(encoding="utf-8"))
                self.sessions[loaded.id] = loaded
            except Exception:
                log.exception("skipping unreadable session file %s", child)

    def persist_session(self, sess: session_mod.ClusterSession) -> None:
        path = self._sessions_path(sess.id)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(sess.to_json(), encoding="utf-8")
        tmp.replace(path)

    def session(self, session_id: str) -> session_mod.ClusterSession:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise SessionNotFound(f"no session {session_id!r}") from None

    def session_lock(self, session_id: str) -> threading.Lock:
        return self._session_locks[session_id]


# --- serialization helpers ---------------------------------------------------


def _nan_to_none(values) -> list:
    return [None if (isinstance(v, float) and math.isnan(v)) else float(v) for v in values]


def _item_payload(item: knowledge.KnowledgeItem) -> dict:
    return {
        "layer": item.layer.value,
        "attribute": item.attribute.value,
        "value": item.value_key,
        "primary": knowledge.is_primary(item.attribute),
    }


def _distribution_payload(dist: corrnet.CorrelationDistribution) -> dict:
    return {"subject": dist.subject, "year": dist.year, "counts": list(dist.counts)}


def _ego_payload(result: knowledge.EgoResult) -> dict:
    by_layer: dict[str, list] = {layer.value: [] for layer in knowledge.Layer}
    for item, count in result.segments:
        by_layer[item.layer.value].append((item, count))
    segments = []
    for layer_name, entries in by_layer.items():
        widths = knowledge.layer_segment_widths([count for _, count in entries])
        for (item, count), width in zip(entries, widths):
            segments.append({**_item_payload(item), "holder_count": count, "width": width})
    return {
        "ego": result.ego,
        "segments": segments,
        "neighbors": [
            {
                "ticker": n.ticker,
                "ring": n.ring,
                "shared": [_item_payload(i) for i in sorted(n.shared_items, key=knowledge.KnowledgeItem.sort_key)],
            }
            for n in result.neighbors
        ],
    }


def _prism_payload(triangle: prism.PrismTriangle) -> dict:
    return {
        "a": triangle.a,
        "b": triangle.b,
        "from": triangle.start_date.isoformat(),
        "to": triangle.end_date.isoformat(),
        "n": triangle.n,
        "min_window": triangle.min_window,
        "dates": [d.isoformat() for d in triangle.dates],
        "values": _nan_to_none(triangle.values),
        "tip": None if math.isnan(triangle.tip) else triangle.tip,
        "full_corr": None if math.isnan(triangle.tip) else triangle.tip,
    }


def _session_state_payload(sess: session_mod.ClusterSession) -> dict:
    return {
        "id": sess.id,
        "year": sess.year,
        "range": {"from": sess.start.isoformat(), "to": sess.end.isoformat()},
        "members": [{"ticker": t, "provenance": p} for t, p in sess.members],
        "pinned_items": [_item_payload(i) for i in sess.pinned_items],
        "manual_order": sess.manual_order,
        "event_count": len(sess.events),
    }


def _matrix_payload(matrix: session_mod.OrderedMatrix) -> dict:
    return {
        "members": list(matrix.members),
        "permutation": list(matrix.permutation),
        "price_upper": _nan_to_none(matrix.price_corr),
        "volume_lower": _nan_to_none(matrix.volume_corr),
        "market_diag": _nan_to_none(matrix.market_diag),
        "returns": _nan_to_none(matrix.returns),
        "blocks": [list(b) for b in matrix.blocks],
    }


def _parse_date(raw: str | None, fallback: datetime.date | None = None) -> datetime.date:
    if raw is None:
        if fallback is None:
            raise InvalidArgument("missing date parameter")
        return fallback
    try:
        return datetime.date.fromisoformat(raw)
    except ValueError:
        raise InvalidArgument(f"bad date {raw!r}") from None


def _csv_param(raw: str | None) -> list[str]:
    if not raw:
        return []
    return [part.strip() for part in raw.split(",") if part.strip()]


# --- app ----------------------------------------------------------------------


def create_app(data_dir: str | Path | None = None, benchmark: str | None = None) -> FastAPI:
    data_dir = data_dir or os.environ.get("PRISMATIC_DATA")
    if not data_dir:
        raise InvalidArgument("data directory required (flag or PRISMATIC_DATA)")
    benchmark = benchmark or os.environ.get("PRISMATIC_BENCHMARK") or None
    ws = Workspace(data_dir, benchmark=benchmark)
    app = FastAPI(title="prismatic", version="0.1.0")
    app.state.workspace = ws
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(PrismaticError)
    def _prismatic_error(_request: Request, exc: PrismaticError) -> JSONResponse:
        return JSONResponse(
            status_code=exc.http_status,
            content={"code": exc.code, "message": exc.message, "details": exc.details},
        )

    # --- caches / communities ------------------------------------------------

    @app.get("/years")
    def years() -> list[dict]:
        return [{"year": y, "instrument_count": n} for y, n in ws.years()]

    @app.get("/years/{year}/distribution")
    def distribution(year: int, subjects: str | None = None) -> dict:
        cache = ws.cache(year)
        if ws.store.benchmark is None:
            raise MissingBenchmark("no benchmark ticker configured")
        bench = corrnet.correlation_distribution(cache, ws.store.benchmark)
        subject_list = _csv_param(subjects)
        return {
            "year": year,
            "bin_edges": corrnet.CorrelationDistribution.bin_edges(),
            "benchmark": _distribution_payload(bench),
            "subjects": [
                _distribution_payload(corrnet.correlation_distribution(cache, s))
                for s in subject_list
            ],
        }

    @app.get("/years/{year}/communities")
    def year_communities(
        year: int,
        tau_s: float = 0.0,
        tau_p: float = 0.0,
        must: str | None = None,
        tags: str | None = None,
        max_size: int = corrnet.DEFAULT_MAX_COMMUNITY,
        min_overlap: int = corrnet.DEFAULT_MIN_OVERLAP,
    ) -> dict:
        cache = ws.cache(year)
        selected = _csv_param(must)
        for ticker in selected:
            cache.index_of(ticker)
        cfg = corrnet.ThresholdConfig(
            tau_spearman=tau_s,
            tau_pearson=tau_p,
            min_overlap=min_overlap,
            must_have=frozenset(selected),
            industry_tags=frozenset(_csv_param(tags)),
        )
        industries = {t: p.industry for t, p in ws.store.profiles.items()}
        groups = corrnet.communities(
            cache, cfg, max_size=max_size, industries=industries, exclude=ws.exclude
        )
        in_cluster: set[str] | None = None
        if ws.gmc is not None and selected:
            in_cluster = set()
            for ticker in selected:
                if ticker in ws.gmc.assignment:
                    in_cluster |= mvclust.knowledge_cluster_of(ws.gmc, ticker)
        payload = []
        for community in groups:
            payload.append(
                {
                    "year": community.year,
                    "size": community.size,
                    "members": [
                        {
                            "ticker": t,
                            "in_knowledge_cluster_of_selected": (
                                True if in_cluster is None else t in in_cluster
                            ),
                        }
                        for t in community.members
                    ],
                }
            )
        return {"year": year, "communities": payload}

    # --- knowledge -------------------------------------------------------------

    @app.get("/stocks/{ticker}/ego")
    def ego(ticker: str) -> dict:
        if ws.net is None:
            raise UnknownInstrument("no company metadata loaded")
        return _ego_payload(knowledge.ego_search(ws.net, ticker))

    @app.get("/knowledge/items/{layer}/{attribute}/{value}/companies")
    def item_companies(layer: str, attribute: str, value: str) -> dict:
        if ws.net is None:
            raise UnknownItem("no company metadata loaded")
        item = knowledge.KnowledgeItem.from_parts(layer, attribute, value)
        return {
            "item": _item_payload(item),
            "companies": knowledge.companies_with_item(ws.net, item),
        }

    # --- sessions ----------------------------------------------------------------

    @app.post("/sessions")
    def create_session(payload: dict = Body(...)) -> dict:
        year = int(payload.get("year", 0))
        seeds = [str(s) for s in payload.get("seeds", [])]
        config: Mapping[str, Any] = payload.get("config", {})
        cache = ws.cache(year)
        cfg = corrnet.ThresholdConfig(
            tau_spearman=float(config.get("tau_spearman", 0.0)),
            tau_pearson=float(config.get("tau_pearson", 0.0)),
            min_overlap=int(config.get("min_overlap", corrnet.DEFAULT_MIN_OVERLAP)),
        )
        date_range = None
        if "range" in payload:
            date_range = (
                _parse_date(payload["range"].get("from")),
                _parse_date(payload["range"].get("to")),
            )
        sess = session_mod.ClusterSession.create(
            uuid.uuid4().hex,
            cache,
            seeds,
            cfg,
            max_size=int(config.get("max_size", corrnet.DEFAULT_MAX_COMMUNITY)),
            exclude=ws.exclude,
            date_range=date_range,
        )
        ws.sessions[sess.id] = sess
        ws.persist_session(sess)
        return _session_state_payload(sess)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        sess = ws.session(session_id)
        return {
            "state": _session_state_payload(sess),
            "log": [e.to_json_obj() for e in sess.events],
        }

    @app.post("/sessions/{session_id}/ops")
    def session_op(session_id: str, payload: dict = Body(...)) -> dict:
        sess = ws.session(session_id)
        op = str(payload.get("op", ""))
        event_id = payload.get("event_id")
        with ws.session_lock(session_id):
            if event_id and sess.has_event(str(event_id)):
                return {"applied": False, "state": _session_state_payload(sess)}
            if op == "add":
                sess.add_stock(
                    str(payload.get("ticker", "")),
                    provenance=str(payload.get("provenance", "knowledge_added")),
                    known=ws.store.series,
                    event_id=event_id,
                )
            elif op == "remove":
                sess.remove_stock(
                    str(payload.get("ticker", "")),
                    force=bool(payload.get("force", False)),
                    event_id=event_id,
                )
            elif op == "pin":
                if ws.net is None:
                    raise UnknownItem("no company metadata loaded")
                sess.pin_item(_parse_item(payload), ws.net, event_id=event_id)
            elif op == "unpin":
                sess.unpin_item(_parse_item(payload), event_id=event_id)
            elif op == "reorder":
                sess.reorder([str(t) for t in payload.get("order", [])], event_id=event_id)
            else:
                raise InvalidArgument(f"unknown op {op!r}")
            ws.persist_session(sess)
            return {"applied": True, "state": _session_state_payload(sess)}

    @app.get("/sessions/{session_id}/matrix")
    def session_matrix(
        session_id: str,
        frm: str | None = Query(None, alias="from"),
        to: str | None = None,
    ) -> dict:
        sess = ws.session(session_id)
        start = _parse_date(frm, sess.start)
        end = _parse_date(to, sess.end)
        matrix = session_mod.ordered_matrix(sess, ws.store, start, end)
        return _matrix_payload(matrix)

    @app.get("/sessions/{session_id}/upset")
    def session_upset(session_id: str) -> dict:
        sess = ws.session(session_id)
        table = session_mod.upset_table(sess, ws.net)
        return {
            "items": [_item_payload(i) for i in table.items],
            "members": sess.member_tickers(),
            "membership": [list(row) for row in table.membership],
        }

    @app.get("/sessions/{session_id}/returns")
    def session_returns(
        session_id: str,
        frm: str | None = Query(None, alias="from"),
        to: str | None = None,
    ) -> dict:
        sess = ws.session(session_id)
        start = _parse_date(frm, sess.start)
        end = _parse_date(to, sess.end)
        returns = session_mod.period_returns(sess, ws.store, start, end)
        return {
            "from": start.isoformat(),
            "to": end.isoformat(),
            "returns": {t: (None if math.isnan(v) else v) for t, v in returns.items()},
        }

    # --- prisms ----------------------------------------------------------------------

    @app.get("/prism")
    def prism_endpoint(
        a: str,
        b: str,
        frm: str | None = Query(None, alias="from"),
        to: str | None = None,
        min_window: int = prism.DEFAULT_MIN_WINDOW,
    ) -> dict:
        start = _parse_date(frm)
        end = _parse_date(to)
        triangle = prism.pair_triangle(ws.store, a, b, start, end, min_window)
        return _prism_payload(triangle)

    @app.get("/prism/refs")
    def prism_refs(
        stock: str,
        other: str | None = None,
        frm: str | None = Query(None, alias="from"),
        to: str | None = None,
        min_window: int = prism.DEFAULT_MIN_WINDOW,
    ) -> dict:
        start = _parse_date(frm)
        end = _parse_date(to)
        refs = prism.reference_prisms(
            ws.store, stock, other or stock, start, end, min_window
        )
        return {name: _prism_payload(tri) for name, tri in refs.items()}

    return app


def _parse_item(payload: Mapping) -> knowledge.KnowledgeItem:
    raw = payload.get("item")
    if not isinstance(raw, Mapping):
        raise InvalidArgument("op requires an item object {layer, attribute, value}")
    return knowledge.KnowledgeItem.from_parts(
        str(raw.get("layer", "")), str(raw.get("attribute", "")), str(raw.get("value", ""))
    )
