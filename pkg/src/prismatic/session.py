"""Interactive cluster sessions: event-sourced membership, pinned knowledge,
period returns, and the two-phase seriated correlation matrix."""

from __future__ import annotations

import datetime
import json
import math
from dataclasses import dataclass, field, replace
from typing import Container, Iterable, Mapping, Sequence

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform

from .corrnet import (
    ThresholdConfig,
    YearlyCorrelationCache,
    _masked_pearson_matrix,
    communities,
    pearson,
)
from .errors import (
    DuplicateItem,
    DuplicateMember,
    InvalidArgument,
    MustHaveProtected,
    NotAMember,
    TooFewMembers,
    UnknownInstrument,
    UnknownItem,
)
from .ingest import Store
from .knowledge import KnowledgeItem, MultiLayerNetwork

PROVENANCES = ("data_driven", "knowledge_added", "must_have")

MAX_PHASE1_CLUSTERS = 8


def _canonical_json(obj: object) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _item_to_args(item: KnowledgeItem) -> dict:
    return {"layer": item.layer.value, "attribute": item.attribute.value, "value": item.value_key}


def _item_from_args(args: Mapping) -> KnowledgeItem:
    return KnowledgeItem.from_parts(str(args["layer"]), str(args["attribute"]), str(args["value"]))


@dataclass(frozen=True)
class Event:
    ts: str
    op: str
    args: dict

    def to_json_obj(self) -> dict:
        return {"ts": self.ts, "op": self.op, "args": self.args}


@dataclass
class ClusterSession:
    """A working cluster: append-only event log plus the state derived from it."""

    id: str
    year: int
    start: datetime.date
    end: datetime.date
    events: list[Event] = field(default_factory=list)
    members: list[tuple[str, str]] = field(default_factory=list)
    pinned_items: list[KnowledgeItem] = field(default_factory=list)
    manual_order: list[str] | None = None

    # --- construction -----------------------------------------------------

    @classmethod
    def create(
        cls,
        session_id: str,
        cache: YearlyCorrelationCache,
        seed_stocks: Sequence[str],
        cfg: ThresholdConfig,
        max_size: int = 40,
        exclude: frozenset[str] = frozenset(),
        date_range: tuple[datetime.date, datetime.date] | None = None,
        ts: str | None = None,
    ) -> "ClusterSession":
        """Seed a session from the union of communities containing the seeds.

        Seeds become must-have members; the rest of their communities join
        with data-driven provenance.
        """
        seeds = list(dict.fromkeys(seed_stocks))
        if not seeds:
            raise InvalidArgument("at least one seed stock is required")
        for seed in seeds:
            cache.index_of(seed)
        seeded_cfg = replace(cfg, must_have=frozenset(cfg.must_have) | frozenset(seeds))
        groups = communities(cache, seeded_cfg, max_size=max_size, exclude=exclude)
        members: list[tuple[str, str]] = [(s, "must_have") for s in seeds]
        chosen = set(seeds)
        seed_set = set(seeds)
        for community in groups:
            if not seed_set.intersection(community.members):
                continue
            for ticker in community.members:
                if ticker not in chosen:
                    chosen.add(ticker)
                    members.append((ticker, "data_driven"))
        if date_range is None:
            date_range = (datetime.date(cache.year, 1, 1), datetime.date(cache.year, 12, 31))
        event = Event(
            ts=ts or _now(),
            op="create",
            args={
                "year": cache.year,
                "range": {"from": date_range[0].isoformat(), "to": date_range[1].isoformat()},
                "seeds": seeds,
                "members": [[t, p] for t, p in members],
                "config": {
                    "tau_spearman": cfg.tau_spearman,
                    "tau_pearson": cfg.tau_pearson,
                    "min_overlap": cfg.min_overlap,
                    "max_size": max_size,
                },
            },
        )
        session = cls(id=session_id, year=cache.year, start=date_range[0], end=date_range[1])
        session._append(event)
        return session

    # --- event machinery ----------------------------------------------------

    def _append(self, event: Event) -> None:
        self.events.append(event)
        self._apply(event)

    def _apply(self, event: Event) -> None:
        args = event.args
        if event.op == "create":
            self.members = [(t, p) for t, p in args["members"]]
            self.pinned_items = []
            self.manual_order = None
        elif event.op == "add":
            self.members.append((args["ticker"], args.get("provenance", "knowledge_added")))
        elif event.op == "remove":
            self.members = [(t, p) for t, p in self.members if t != args["ticker"]]
        elif event.op == "pin":
            self.pinned_items.append(_item_from_args(args["item"]))
        elif event.op == "unpin":
            item = _item_from_args(args["item"])
            self.pinned_items = [p for p in self.pinned_items if p != item]
        elif event.op == "reorder":
            self.manual_order = list(args["order"])
        else:
            raise InvalidArgument(f"unknown session op {event.op!r}")

    def member_tickers(self) -> list[str]:
        return [t for t, _ in self.members]

    def provenance_of(self, ticker: str) -> str:
        for t, p in self.members:
            if t == ticker:
                return p
        raise NotAMember(f"{ticker!r} is not a member")

    def has_event(self, event_id: str) -> bool:
        return any(e.args.get("event_id") == event_id for e in self.events)

    # --- mutations ------------------------------------------------------------

    def add_stock(
        self,
        ticker: str,
        provenance: str = "knowledge_added",
        known: Container[str] | None = None,
        ts: str | None = None,
        event_id: str | None = None,
    ) -> None:
        if provenance not in PROVENANCES:
            raise InvalidArgument(f"provenance must be one of {PROVENANCES}")
        if known is not None and ticker not in known:
            raise UnknownInstrument(f"unknown instrument {ticker!r}")
        if ticker in self.member_tickers():
            raise DuplicateMember(f"{ticker!r} is already a member")
        args: dict = {"ticker": ticker, "provenance": provenance}
        if event_id:
            args["event_id"] = event_id
        self._append(Event(ts=ts or _now(), op="add", args=args))

    def remove_stock(self, ticker: str, force: bool = False, ts: str | None = None, event_id: str | None = None) -> None:
        if ticker not in self.member_tickers():
            raise NotAMember(f"{ticker!r} is not a member")
        if self.provenance_of(ticker) == "must_have" and not force:
            raise MustHaveProtected(f"{ticker!r} is a must-have member; pass force to remove")
        args: dict = {"ticker": ticker}
        if force:
            args["force"] = True
        if event_id:
            args["event_id"] = event_id
        self._append(Event(ts=ts or _now(), op="remove", args=args))

    def pin_item(self, item: KnowledgeItem, net: MultiLayerNetwork, ts: str | None = None, event_id: str | None = None) -> None:
        if item not in net.holders_of:
            raise UnknownItem(f"item {item.attribute.value}:{item.value_key} not in the knowledge network")
        if item in self.pinned_items:
            raise DuplicateItem(f"item {item.attribute.value}:{item.value_key} already pinned")
        args: dict = {"item": _item_to_args(item)}
        if event_id:
            args["event_id"] = event_id
        self._append(Event(ts=ts or _now(), op="pin", args=args))

    def unpin_item(self, item: KnowledgeItem, ts: str | None = None, event_id: str | None = None) -> None:
        if item not in self.pinned_items:
            raise UnknownItem(f"item {item.attribute.value}:{item.value_key} is not pinned")
        args: dict = {"item": _item_to_args(item)}
        if event_id:
            args["event_id"] = event_id
        self._append(Event(ts=ts or _now(), op="unpin", args=args))

    def reorder(self, order: Sequence[str], ts: str | None = None, event_id: str | None = None) -> None:
        if sorted(order) != sorted(self.member_tickers()):
            raise InvalidArgument("reorder must be a permutation of the current members")
        args: dict = {"order": list(order)}
        if event_id:
            args["event_id"] = event_id
        self._append(Event(ts=ts or _now(), op="reorder", args=args))

    # --- persistence -------------------------------------------------------------

    def to_json(self) -> str:
        payload = {
            "id": self.id,
            "year": self.year,
            "range": {"from": self.start.isoformat(), "to": self.end.isoformat()},
            "events": [e.to_json_obj() for e in self.events],
        }
        return _canonical_json(payload)

    @classmethod
    def from_json(cls, text: str) -> "ClusterSession":
        payload = json.loads(text)
        rng = payload["range"]
        session = cls(
            id=str(payload["id"]),
            year=int(payload["year"]),
            start=datetime.date.fromisoformat(rng["from"]),
            end=datetime.date.fromisoformat(rng["to"]),
        )
        for raw in payload["events"]:
            session._append(Event(ts=str(raw["ts"]), op=str(raw["op"]), args=dict(raw["args"])))
        return session

    @classmethod
    def replay(cls, session_id: str, year: int, start: datetime.date, end: datetime.date, events: Iterable[Event]) -> "ClusterSession":
        session = cls(id=session_id, year=year, start=start, end=end)
        for event in events:
            session._append(event)
        return session


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


# --- derived views ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OrderedMatrix:
    """Seriated correlation matrix: price upper-right, volume lower-left."""

    members: tuple[str, ...]
    permutation: tuple[int, ...]
    price_corr: np.ndarray
    volume_corr: np.ndarray
    market_diag: tuple[float, ...]
    returns: tuple[float, ...]
    blocks: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class UpsetTable:
    items: tuple[KnowledgeItem, ...]
    membership: tuple[tuple[bool, ...], ...]


def _range_panel(
    store: Store, tickers: Sequence[str], start: datetime.date, end: datetime.date
) -> tuple[np.ndarray, np.ndarray]:
    """Union-date alignment of members' price/volume values over a range."""
    per_ticker = [store.analysis_values(t, start, end) for t in tickers]
    grid = sorted({d for dates, _, _ in per_ticker for d in dates})
    index = {d: i for i, d in enumerate(grid)}
    price = np.full((len(grid), len(tickers)), np.nan)
    volume = np.full((len(grid), len(tickers)), np.nan)
    for col, (dates, p, v) in enumerate(per_ticker):
        rows = [index[d] for d in dates]
        price[rows, col] = p
        volume[rows, col] = v
    return price, volume


def _silhouette(dist: np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette on a precomputed distance matrix; singletons score 0."""
    scores = []
    for i in range(len(labels)):
        own = (labels == labels[i]) & (np.arange(len(labels)) != i)
        if not own.any():
            scores.append(0.0)
            continue
        a = float(dist[i, own].mean())
        b = math.inf
        for other in np.unique(labels):
            if other == labels[i]:
                continue
            mask = labels == other
            b = min(b, float(dist[i, mask].mean()))
        if not math.isfinite(b):
            scores.append(0.0)
        else:
            denom = max(a, b)
            scores.append(0.0 if denom == 0 else (b - a) / denom)
    return float(np.mean(scores))


def _corr_distance(corr: np.ndarray) -> np.ndarray:
    dist = 1.0 - corr
    dist[np.isnan(dist)] = 2.0
    np.fill_diagonal(dist, 0.0)
    return np.clip(dist, 0.0, 2.0)


def _phase1_blocks(price_corr: np.ndarray, tickers: Sequence[str]) -> list[list[int]]:
    """Average-linkage blocks on price distance, cut at the best silhouette."""
    m = len(tickers)
    if m == 2:
        return [[0, 1]]
    dist = _corr_distance(price_corr.copy())
    link = linkage(squareform(dist, checks=False), method="average")
    best_labels: np.ndarray | None = None
    best_score = -math.inf
    for k in range(2, min(MAX_PHASE1_CLUSTERS, m - 1) + 1):
        labels = fcluster(link, k, criterion="maxclust")
        score = _silhouette(dist, labels)
        if score > best_score + 1e-12:
            best_score = score
            best_labels = labels
    assert best_labels is not None
    blocks: dict[int, list[int]] = {}
    for i, label in enumerate(best_labels):
        blocks.setdefault(int(label), []).append(i)
    return sorted(blocks.values(), key=lambda b: (-len(b), min(tickers[i] for i in b)))


def _leaf_order(link: np.ndarray, size: int, weight: Sequence[float], tickers: Sequence[str]) -> list[int]:
    """Dendrogram leaf order; at each merge the heavier subtree goes first."""

    def walk(node: int) -> tuple[list[int], float, str]:
        if node < size:
            return [node], float(weight[node]), tickers[node]
        left, right = int(link[node - size, 0]), int(link[node - size, 1])
        left_leaves, lw, lt = walk(left)
        right_leaves, rw, rt = walk(right)
        if (-(lw), lt) <= (-(rw), rt):
            return left_leaves + right_leaves, lw + rw, min(lt, rt)
        return right_leaves + left_leaves, lw + rw, min(lt, rt)

    return walk(2 * size - 2)[0]


def _phase2_order(
    block: list[int], volume_corr: np.ndarray, volumes: Sequence[float], tickers: Sequence[str]
) -> list[int]:
    if len(block) == 1:
        return block
    sub_tickers = [tickers[i] for i in block]
    sub_volumes = [volumes[i] for i in block]
    if len(block) == 2:
        ordered = sorted(range(2), key=lambda j: (-sub_volumes[j], sub_tickers[j]))
        return [block[j] for j in ordered]
    dist = _corr_distance(volume_corr[np.ix_(block, block)].copy())
    link = linkage(squareform(dist, checks=False), method="average")
    ordered = _leaf_order(link, len(block), sub_volumes, sub_tickers)
    return [block[j] for j in ordered]


def ordered_matrix(
    session: ClusterSession,
    store: Store,
    start: datetime.date | None = None,
    end: datetime.date | None = None,
) -> OrderedMatrix:
    """Two-phase seriation: price-correlation blocks, volume-correlation order.

    Phase 1 cuts an average-linkage tree on 1 - price correlation at the
    silhouette-optimal cluster count (ties prefer fewer clusters), ordering
    blocks by size.  Phase 2 orders members inside each block by an
    average-linkage tree on 1 - volume correlation, heavier total trading
    volume first on ties.  A manual reorder event overrides everything while
    the membership it captured is still current.
    """
    start = start or session.start
    end = end or session.end
    tickers = session.member_tickers()
    if len(tickers) < 2:
        raise TooFewMembers(f"matrix needs >= 2 members, got {len(tickers)}")
    for ticker in tickers:
        store.daily_series(ticker)

    price, volume = _range_panel(store, tickers, start, end)
    price_corr, _ = _masked_pearson_matrix(price)
    volume_corr, _ = _masked_pearson_matrix(volume)

    total_volume = [
        float(sum(bar.volume for bar in store.bars_in_range(t, start, end))) for t in tickers
    ]

    if session.manual_order is not None and sorted(session.manual_order) == sorted(tickers):
        index = {t: i for i, t in enumerate(tickers)}
        permutation = [index[t] for t in session.manual_order]
        blocks: list[tuple[int, int]] = []
    else:
        permutation = []
        blocks = []
        for block in _phase1_blocks(price_corr, tickers):
            ordered = _phase2_order(block, volume_corr, total_volume, tickers)
            blocks.append((len(permutation), len(permutation) + len(ordered)))
            permutation.extend(ordered)

    perm = np.array(permutation)
    price_p = price_corr[np.ix_(perm, perm)]
    volume_p = volume_corr[np.ix_(perm, perm)]
    iu, ju = np.triu_indices(len(tickers), k=1)

    benchmark_corr: list[float] = []
    if store.benchmark is not None:
        bench_dates, bench_price, _ = store.analysis_values(store.benchmark, start, end)
        bench_index = {d: i for i, d in enumerate(bench_dates)}
        for t in (tickers[i] for i in permutation):
            dates, values, _ = store.analysis_values(t, start, end)
            rows = [(k, bench_index[d]) for k, d in enumerate(dates) if d in bench_index]
            if len(rows) < 3:
                benchmark_corr.append(math.nan)
                continue
            ia = np.array([k for k, _ in rows])
            ib = np.array([k for _, k in rows])
            benchmark_corr.append(pearson(values[ia], bench_price[ib]))
    else:
        benchmark_corr = [math.nan] * len(tickers)

    period = period_returns(session, store, start, end)
    return OrderedMatrix(
        members=tuple(tickers[i] for i in permutation),
        permutation=tuple(int(i) for i in permutation),
        price_corr=price_p[iu, ju],
        volume_corr=volume_p[iu, ju],
        market_diag=tuple(benchmark_corr),
        returns=tuple(period[tickers[i]] for i in permutation),
        blocks=tuple(blocks),
    )


def upset_table(session: ClusterSession, net: MultiLayerNetwork | None) -> UpsetTable:
    """Boolean incidence of members versus pinned items, straight from the network."""
    items = tuple(session.pinned_items)
    rows = []
    for ticker, _ in session.members:
        held = net.items_of.get(ticker, frozenset()) if net is not None else frozenset()
        rows.append(tuple(item in held for item in items))
    return UpsetTable(items=items, membership=tuple(rows))


def period_returns(
    session: ClusterSession,
    store: Store,
    start: datetime.date | None = None,
    end: datetime.date | None = None,
) -> dict[str, float]:
    """Simple return close_end / close_start - 1 per member; NaN without data."""
    start = start or session.start
    end = end or session.end
    out: dict[str, float] = {}
    for ticker, _ in session.members:
        bars = store.bars_in_range(ticker, start, end)
        if not bars:
            out[ticker] = math.nan
        else:
            out[ticker] = bars[-1].close / bars[0].close - 1.0
    return out
