"""Yearly all-pairs correlations, threshold-pruned graphs, communities, and betweenness."""

from __future__ import annotations

import math
import struct
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import EmptyYear, InvalidArgument, LengthMismatch, UnknownInstrument
from .ingest import Store

MEASURES = ("pearson_price", "spearman_price", "pearson_volume", "spearman_volume")

CACHE_MAGIC = b"PRC1"
CACHE_VERSION = 1

HISTOGRAM_BINS = 40

DEFAULT_MIN_OVERLAP = 30
DEFAULT_MAX_COMMUNITY = 40


# --- coefficient primitives -------------------------------------------------


def _pearson_core(x: np.ndarray, y: np.ndarray) -> float:
    """Two-pass sample Pearson on clean, equal-length arrays."""
    if x.size < 3:
        return math.nan
    xc = x - x.mean()
    yc = y - y.mean()
    vx = float(xc @ xc)
    vy = float(yc @ yc)
    if vx <= 0.0 or vy <= 0.0:
        return math.nan
    return float(np.clip((xc @ yc) / math.sqrt(vx * vy), -1.0, 1.0))


def _joint_valid(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return ~(np.isnan(x) | np.isnan(y))


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation with pairwise NaN deletion; NaN when undefined.

    Undefined means fewer than 3 overlapping entries or zero variance.
    """
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape:
        raise LengthMismatch(f"length mismatch: {xa.shape} vs {ya.shape}")
    mask = _joint_valid(xa, ya)
    return _pearson_core(xa[mask], ya[mask])


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman correlation: Pearson of average ranks (ties get their mean rank)."""
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape:
        raise LengthMismatch(f"length mismatch: {xa.shape} vs {ya.shape}")
    mask = _joint_valid(xa, ya)
    xv, yv = xa[mask], ya[mask]
    if xv.size < 3:
        return math.nan
    return _pearson_core(rankdata(xv), rankdata(yv))


# --- vectorized all-pairs kernels --------------------------------------------


def _masked_pearson_matrix(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """All-pairs Pearson with pairwise NaN deletion; returns (R, joint counts).

    Columns are pre-centered by their masked means, so the product-moment
    identity below agrees with the per-pair two-pass evaluation to ~1e-15.
    """
    V = (~np.isnan(X)).astype(np.float64)
    Z = np.where(np.isnan(X), 0.0, X)
    col_n = V.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mu = np.where(col_n > 0, Z.sum(axis=0) / np.maximum(col_n, 1.0), 0.0)
    Z = np.where(V > 0, Z - mu, 0.0)

    N = V.T @ V
    Sx = Z.T @ V
    Sxx = (Z * Z).T @ V
    Sxy = Z.T @ Z
    with np.errstate(invalid="ignore", divide="ignore"):
        num = N * Sxy - Sx * Sx.T
        den2 = (N * Sxx - Sx**2) * (N * Sxx.T - Sx.T**2)
        R = np.where(den2 > 0, num / np.sqrt(np.where(den2 > 0, den2, 1.0)), np.nan)
    R[N < 3] = np.nan
    return np.clip(R, -1.0, 1.0), N.astype(np.int64)


def _masked_spearman_matrix(X: np.ndarray) -> np.ndarray:
    """All-pairs Spearman with pairwise deletion.

    Pairs of gap-free columns share global column ranks and go through the
    vectorized Pearson kernel; pairs touching a gappy column are re-ranked on
    their joint-valid subset, which is what pairwise deletion requires.
    """
    T, m = X.shape
    R = np.full((m, m), np.nan)
    np.fill_diagonal(R, 1.0)
    gappy = np.isnan(X).any(axis=0)
    full_idx = np.flatnonzero(~gappy)

    if full_idx.size >= 2:
        ranks = rankdata(X[:, full_idx], axis=0).astype(np.float64)
        block, _ = _masked_pearson_matrix(ranks)
        R[np.ix_(full_idx, full_idx)] = block

    valid = ~np.isnan(X)
    for i in range(m):
        for j in range(i + 1, m):
            if not (gappy[i] or gappy[j]):
                continue
            mask = valid[:, i] & valid[:, j]
            if int(mask.sum()) < 3:
                continue
            r = _pearson_core(rankdata(X[mask, i]), rankdata(X[mask, j]))
            R[i, j] = R[j, i] = r
    np.fill_diagonal(R, np.nan)
    return R


# --- yearly cache -------------------------------------------------------------


def tri_length(m: int) -> int:
    return m * (m - 1) // 2


def tri_index(i: int, j: int, m: int) -> int:
    """Row-major upper-triangle index for pair (i < j) of m instruments."""
    if i > j:
        i, j = j, i
    return i * (2 * m - i - 1) // 2 + (j - i - 1)


@dataclass(frozen=True)
class CorrelationEdge:
    a: str
    b: str
    pearson_price: float
    spearman_price: float
    pearson_volume: float
    spearman_volume: float
    overlap_days: int


@dataclass(eq=False)
class YearlyCorrelationCache:
    """All-pairs correlations for one year: four upper-triangular arrays plus overlaps."""

    year: int
    instruments: tuple[str, ...]
    values: dict[str, np.ndarray]
    overlap: np.ndarray
    _index: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        expected = tri_length(len(self.instruments))
        for name in MEASURES:
            if self.values[name].shape != (expected,):
                raise InvalidArgument(f"{name} array must have length {expected}")
        if self.overlap.shape != (expected,):
            raise InvalidArgument(f"overlap array must have length {expected}")
        self._index.update({t: i for i, t in enumerate(self.instruments)})

    def index_of(self, ticker: str) -> int:
        try:
            return self._index[ticker]
        except KeyError:
            raise UnknownInstrument(f"{ticker!r} not in {self.year} cache") from None

    def edge(self, a: str, b: str) -> CorrelationEdge:
        ia, ib = self.index_of(a), self.index_of(b)
        if ia == ib:
            raise InvalidArgument("edge endpoints must differ")
        k = tri_index(ia, ib, len(self.instruments))
        return CorrelationEdge(
            a=min(a, b),
            b=max(a, b),
            pearson_price=float(self.values["pearson_price"][k]),
            spearman_price=float(self.values["spearman_price"][k]),
            pearson_volume=float(self.values["pearson_volume"][k]),
            spearman_volume=float(self.values["spearman_volume"][k]),
            overlap_days=int(self.overlap[k]),
        )

    def subject_values(self, measure: str, ticker: str) -> np.ndarray:
        """The subject's correlations against every other instrument (NaN kept)."""
        i = self.index_of(ticker)
        m = len(self.instruments)
        arr = self.values[measure]
        return np.array([arr[tri_index(i, j, m)] for j in range(m) if j != i])

    def save(self, path: str | Path) -> None:
        """Binary cache: PRC1 magic, instrument table, four f32 triangles, u16 overlaps."""
        out = bytearray()
        out += CACHE_MAGIC
        out += struct.pack("<I", CACHE_VERSION)
        out += struct.pack("<I", len(self.instruments))
        for ticker in self.instruments:
            raw = ticker.encode("utf-8")
            out += struct.pack("<H", len(raw)) + raw
        for name in MEASURES:
            out += np.asarray(self.values[name], dtype="<f4").tobytes()
        out += np.asarray(self.overlap, dtype="<u2").tobytes()
        Path(path).write_bytes(bytes(out))

    @classmethod
    def load(cls, path: str | Path, year: int) -> "YearlyCorrelationCache":
        data = Path(path).read_bytes()
        if data[:4] != CACHE_MAGIC:
            raise InvalidArgument(f"{path}: bad cache magic {data[:4]!r}")
        (version,) = struct.unpack_from("<I", data, 4)
        if version != CACHE_VERSION:
            raise InvalidArgument(f"{path}: unsupported cache version {version}")
        (count,) = struct.unpack_from("<I", data, 8)
        offset = 12
        instruments = []
        for _ in range(count):
            (n,) = struct.unpack_from("<H", data, offset)
            offset += 2
            instruments.append(data[offset : offset + n].decode("utf-8"))
            offset += n
        pairs = tri_length(count)
        values: dict[str, np.ndarray] = {}
        for name in MEASURES:
            arr = np.frombuffer(data, dtype="<f4", count=pairs, offset=offset)
            values[name] = arr.astype(np.float64)
            offset += 4 * pairs
        overlap = np.frombuffer(data, dtype="<u2", count=pairs, offset=offset).astype(np.int64)
        return cls(year=year, instruments=tuple(instruments), values=values, overlap=overlap)


def build_yearly_cache(store: Store, year: int, min_overlap: int = DEFAULT_MIN_OVERLAP) -> YearlyCorrelationCache:
    """Compute all four correlation measures for every instrument pair of one year.

    Measures whose pairwise-valid day count is below ``max(3, min_overlap)``
    are NaN.  Output is deterministic regardless of evaluation order.
    """
    panel = store.year_panel(year)
    m = len(panel.tickers)
    if m == 0:
        raise EmptyYear(f"no instruments with data in {year}")
    threshold = max(3, min_overlap)

    pearson_price, n_price = _masked_pearson_matrix(panel.price)
    pearson_volume, n_volume = _masked_pearson_matrix(panel.volume)
    spearman_price = _masked_spearman_matrix(panel.price)
    spearman_volume = _masked_spearman_matrix(panel.volume)

    pearson_price[n_price < threshold] = np.nan
    spearman_price[n_price < threshold] = np.nan
    pearson_volume[n_volume < threshold] = np.nan
    spearman_volume[n_volume < threshold] = np.nan

    iu, ju = np.triu_indices(m, k=1)
    values = {
        "pearson_price": pearson_price[iu, ju],
        "spearman_price": spearman_price[iu, ju],
        "pearson_volume": pearson_volume[iu, ju],
        "spearman_volume": spearman_volume[iu, ju],
    }
    return YearlyCorrelationCache(
        year=year, instruments=panel.tickers, values=values, overlap=n_price[iu, ju]
    )


# --- threshold graph ----------------------------------------------------------


@dataclass(frozen=True)
class ThresholdConfig:
    """User pruning parameters; thresholds are clamped into [0, 1]."""

    tau_spearman: float = 0.0
    tau_pearson: float = 0.0
    min_overlap: int = DEFAULT_MIN_OVERLAP
    must_have: frozenset[str] = frozenset()
    industry_tags: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "tau_spearman", min(max(self.tau_spearman, 0.0), 1.0))
        object.__setattr__(self, "tau_pearson", min(max(self.tau_pearson, 0.0), 1.0))
        object.__setattr__(self, "must_have", frozenset(self.must_have))
        object.__setattr__(self, "industry_tags", frozenset(self.industry_tags))


@dataclass(frozen=True)
class Graph:
    nodes: tuple[str, ...]
    adj: Mapping[str, frozenset[str]]

    def edges(self) -> Iterator[tuple[str, str]]:
        for a in self.nodes:
            for b in self.adj.get(a, frozenset()):
                if a < b:
                    yield a, b

    def edge_count(self) -> int:
        return sum(len(self.adj.get(n, frozenset())) for n in self.nodes) // 2

    def subgraph(self, keep: Iterable[str]) -> "Graph":
        keep_set = set(keep)
        return Graph(
            nodes=tuple(sorted(keep_set)),
            adj={n: self.adj.get(n, frozenset()) & keep_set for n in keep_set},
        )


def prune_graph(
    cache: YearlyCorrelationCache, cfg: ThresholdConfig, exclude: frozenset[str] = frozenset()
) -> Graph:
    """Keep edges whose price comovement is monotone and strong enough.

    The monotonicity gate (Spearman) runs before the linear gate (Pearson);
    both must pass.  Isolated nodes are dropped unless listed as must-have.
    """
    m = len(cache.instruments)
    sp = cache.values["spearman_price"]
    pp = cache.values["pearson_price"]
    ov = cache.overlap
    adj: dict[str, set[str]] = {}
    for i in range(m):
        a = cache.instruments[i]
        if a in exclude:
            continue
        for j in range(i + 1, m):
            b = cache.instruments[j]
            if b in exclude:
                continue
            k = tri_index(i, j, m)
            if ov[k] < cfg.min_overlap:
                continue
            s, p = sp[k], pp[k]
            if math.isnan(s) or s < cfg.tau_spearman:
                continue
            if math.isnan(p) or p < cfg.tau_pearson:
                continue
            adj.setdefault(a, set()).add(b)
            adj.setdefault(b, set()).add(a)
    nodes = set(adj)
    nodes.update(t for t in cfg.must_have if t in cache._index and t not in exclude)
    return Graph(
        nodes=tuple(sorted(nodes)),
        adj={n: frozenset(adj.get(n, set())) for n in nodes},
    )


def connected_components(graph: Graph) -> list[set[str]]:
    """BFS components, ordered by size descending then smallest member ticker."""
    seen: set[str] = set()
    components: list[set[str]] = []
    for start in graph.nodes:
        if start in seen:
            continue
        comp = {start}
        queue = deque([start])
        seen.add(start)
        while queue:
            node = queue.popleft()
            for nxt in graph.adj.get(node, frozenset()):
                if nxt not in seen:
                    seen.add(nxt)
                    comp.add(nxt)
                    queue.append(nxt)
        components.append(comp)
    return sorted(components, key=lambda c: (-len(c), min(c)))


def betweenness(graph: Graph) -> dict[str, float]:
    """Exact unnormalized shortest-path betweenness over unordered node pairs.

    Brandes accumulation; the undirected double-count is halved at the end.
    """
    centrality = {v: 0.0 for v in graph.nodes}
    for source in graph.nodes:
        stack: list[str] = []
        preds: dict[str, list[str]] = {v: [] for v in graph.nodes}
        sigma = {v: 0.0 for v in graph.nodes}
        dist = {v: -1 for v in graph.nodes}
        sigma[source] = 1.0
        dist[source] = 0
        queue = deque([source])
        while queue:
            v = queue.popleft()
            stack.append(v)
            for w in graph.adj.get(v, frozenset()):
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = {v: 0.0 for v in graph.nodes}
        while stack:
            w = stack.pop()
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != source:
                centrality[w] += delta[w]
    return {v: c / 2.0 for v, c in centrality.items()}


# --- communities ---------------------------------------------------------------


@dataclass(frozen=True)
class Community:
    year: int
    members: tuple[str, ...]

    @property
    def size(self) -> int:
        return len(self.members)


def _split_oversize(graph: Graph, nodes: set[str], max_size: int) -> list[set[str]]:
    """Recursively split a component by removing its current super-connector.

    The removed node re-joins the finished sub-community it touches most,
    preferring larger ones on ties; when every candidate is already at the
    size cap it stays as its own group so the cap is never exceeded.
    """
    if len(nodes) <= max_size:
        return [nodes]
    sub = graph.subgraph(nodes)
    scores = betweenness(sub)
    hub = sorted(nodes, key=lambda n: (-scores[n], n))[0]
    rest = graph.subgraph(nodes - {hub})
    parts: list[set[str]] = []
    for comp in connected_components(rest):
        parts.extend(_split_oversize(graph, comp, max_size))
    neighbors = graph.adj.get(hub, frozenset())
    candidates = [p for p in parts if len(p) < max_size]
    if candidates:
        best = sorted(candidates, key=lambda p: (-len(neighbors & p), -len(p), min(p)))[0]
        best.add(hub)
    else:
        parts.append({hub})
    return parts


def communities(
    cache: YearlyCorrelationCache,
    cfg: ThresholdConfig,
    max_size: int = DEFAULT_MAX_COMMUNITY,
    industries: Mapping[str, str] | None = None,
    exclude: frozenset[str] = frozenset(),
) -> list[Community]:
    """Communities of the pruned graph: components, split at super-connectors.

    Members are ordered by betweenness (descending, ties by ticker) within
    their final community; communities are sorted by size descending.  With
    industry tags configured, only communities containing at least one tagged
    member are kept.
    """
    if max_size < 2:
        raise InvalidArgument(f"max_size must be >= 2, got {max_size}")
    graph = prune_graph(cache, cfg, exclude=exclude)
    groups: list[set[str]] = []
    for comp in connected_components(graph):
        if len(comp) == 1:
            if next(iter(comp)) in cfg.must_have:
                groups.append(comp)
        else:
            groups.extend(_split_oversize(graph, comp, max_size))

    out: list[Community] = []
    for group in groups:
        scores = betweenness(graph.subgraph(group))
        members = tuple(sorted(group, key=lambda n: (-scores[n], n)))
        out.append(Community(year=cache.year, members=members))
    out.sort(key=lambda c: (-c.size, min(c.members)))

    if cfg.industry_tags and industries is not None:
        out = [
            c
            for c in out
            if any(industries.get(m, "") in cfg.industry_tags for m in c.members)
        ]
    return out


# --- distributions ---------------------------------------------------------------


@dataclass(frozen=True)
class CorrelationDistribution:
    """Histogram of a subject's defined price correlations over fixed [-1, 1] bins."""

    subject: str
    year: int
    counts: tuple[int, ...]

    @staticmethod
    def bin_edges() -> list[float]:
        return [float(x) for x in np.linspace(-1.0, 1.0, HISTOGRAM_BINS + 1)]


def correlation_distribution(cache: YearlyCorrelationCache, subject: str) -> CorrelationDistribution:
    values = cache.subject_values("pearson_price", subject)
    defined = values[~np.isnan(values)]
    counts, _ = np.histogram(defined, bins=HISTOGRAM_BINS, range=(-1.0, 1.0))
    return CorrelationDistribution(subject=subject, year=cache.year, counts=tuple(int(c) for c in counts))
