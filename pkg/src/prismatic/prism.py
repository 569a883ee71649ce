"""All-subinterval correlation triangles with O(1) per-cell evaluation.

A triangle over n days holds one Pearson value for every (ending day, window
size) pair, flattened into a 1D array of length n(n+1)/2.  With the origin at
the top-left, array index i maps to

    y = floor((sqrt(8i + 1) - 1) / 2)
    x = n - 1 - y + i - y(y + 1)/2

so row y holds windows of size w = n - y and column x is the window's ending
day.  The tip (x = n-1, y = 0) summarizes the full range.
"""

from __future__ import annotations

import datetime
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    EmptyIndustry,
    IndexOutOfRange,
    InvalidArgument,
    InvalidCell,
    MissingBenchmark,
    SeriesTooShort,
)
from .ingest import Store

DEFAULT_MIN_WINDOW = 5

TRIANGLE_MAGIC = b"PRT1"
TRIANGLE_VERSION = 1


def triangle_cells(n: int) -> int:
    return n * (n + 1) // 2


def index_to_cell(i: int, n: int) -> tuple[int, int]:
    """Map a flat triangle index to (x, y) = (ending day, n - window size)."""
    if n < 1 or i < 0 or i >= triangle_cells(n):
        raise IndexOutOfRange(f"index {i} outside triangle of n={n}")
    y = (math.isqrt(8 * i + 1) - 1) // 2
    x = n - 1 - y + i - y * (y + 1) // 2
    return x, y


def cell_to_index(x: int, y: int, n: int) -> int:
    """Inverse of index_to_cell; rejects cells outside the triangle."""
    if not (0 <= y < n and n - 1 - y <= x <= n - 1):
        raise InvalidCell(f"cell ({x}, {y}) invalid for n={n}")
    return y * (y + 1) // 2 + x - (n - 1 - y)


def index_to_cell_array(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized index map for all cells of a size-n triangle."""
    if n < 1:
        raise IndexOutOfRange(f"triangle size must be >= 1, got {n}")
    i = np.arange(triangle_cells(n), dtype=np.int64)
    y = ((np.sqrt(8.0 * i + 1.0) - 1.0) / 2.0).astype(np.int64)
    x = n - 1 - y + i - y * (y + 1) // 2
    return x, y


@dataclass(frozen=True, eq=False)
class PrefixMoments:
    """Cumulative sums of a, b, a^2, b^2, ab and validity counts (leading zero)."""

    n: int
    count: np.ndarray
    sa: np.ndarray
    sb: np.ndarray
    saa: np.ndarray
    sbb: np.ndarray
    sab: np.ndarray
    min_window: int = DEFAULT_MIN_WINDOW

    @classmethod
    def build(cls, a: Sequence[float], b: Sequence[float], min_window: int = DEFAULT_MIN_WINDOW) -> "PrefixMoments":
        av = np.asarray(a, dtype=np.float64)
        bv = np.asarray(b, dtype=np.float64)
        if av.shape != bv.shape or av.ndim != 1:
            raise InvalidArgument("paired series must be 1D and equally long")
        valid = ~(np.isnan(av) | np.isnan(bv))
        az = np.where(valid, av, 0.0)
        bz = np.where(valid, bv, 0.0)

        def prefix(values: np.ndarray) -> np.ndarray:
            out = np.zeros(values.size + 1)
            np.cumsum(values, out=out[1:])
            return out

        return cls(
            n=av.size,
            count=prefix(valid.astype(np.float64)),
            sa=prefix(az),
            sb=prefix(bz),
            saa=prefix(az * az),
            sbb=prefix(bz * bz),
            sab=prefix(az * bz),
            min_window=min_window,
        )


def _interval_stats(m: PrefixMoments, start: np.ndarray, end: np.ndarray) -> np.ndarray:
    """Pearson over [start, end] from prefix moments; NaN below min_window or zero variance."""
    lo, hi = start, end + 1
    n = m.count[hi] - m.count[lo]
    sa = m.sa[hi] - m.sa[lo]
    sb = m.sb[hi] - m.sb[lo]
    saa = m.saa[hi] - m.saa[lo]
    sbb = m.sbb[hi] - m.sbb[lo]
    sab = m.sab[hi] - m.sab[lo]
    num = n * sab - sa * sb
    vx = n * saa - sa * sa
    vy = n * sbb - sb * sb
    den2 = vx * vy
    ok = (n >= m.min_window) & (vx > 0) & (vy > 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(ok, num / np.sqrt(np.where(ok, den2, 1.0)), np.nan)
    return np.clip(r, -1.0, 1.0)


def interval_pearson(m: PrefixMoments, start: int, end: int) -> float:
    if not (0 <= start <= end < m.n):
        raise InvalidArgument(f"interval [{start}, {end}] outside series of length {m.n}")
    return float(_interval_stats(m, np.array([start]), np.array([end]))[0])


@dataclass(frozen=True, eq=False)
class PrismTriangle:
    """Correlations over every subinterval of an aligned pair, flat-indexed."""

    a: str
    b: str
    start_date: datetime.date
    end_date: datetime.date
    dates: tuple[datetime.date, ...]
    n: int
    values: np.ndarray
    min_window: int

    def cell(self, x: int, y: int) -> float:
        return float(self.values[cell_to_index(x, y, self.n)])

    @property
    def tip(self) -> float:
        """Full-range correlation: the (x = n-1, y = 0) cell."""
        return float(self.values[0])


def build_triangle(
    a_values: Sequence[float],
    b_values: Sequence[float],
    dates: Sequence[datetime.date],
    a_label: str,
    b_label: str,
    min_window: int = DEFAULT_MIN_WINDOW,
) -> PrismTriangle:
    """Fill every valid cell: row y holds windows of w = n - y ending at day x."""
    if min_window < 1:
        raise InvalidArgument(f"min_window must be >= 1, got {min_window}")
    moments = PrefixMoments.build(a_values, b_values, min_window=min_window)
    n = moments.n
    if n < min_window or n < 1:
        raise SeriesTooShort(f"{a_label}/{b_label}: {n} aligned days < min_window {min_window}")
    if len(dates) != n:
        raise InvalidArgument("dates must align with the value arrays")
    values = np.full(triangle_cells(n), np.nan)
    for y in range(n):
        w = n - y
        ends = np.arange(w - 1, n, dtype=np.int64)
        starts = ends - w + 1
        base = y * (y + 1) // 2
        values[base : base + ends.size] = _interval_stats(moments, starts, ends)
    return PrismTriangle(
        a=a_label,
        b=b_label,
        start_date=dates[0],
        end_date=dates[-1],
        dates=tuple(dates),
        n=n,
        values=values,
        min_window=min_window,
    )


def aligned_pair(
    store: Store,
    a: str,
    b: str,
    start: datetime.date,
    end: datetime.date,
) -> tuple[list[datetime.date], np.ndarray, np.ndarray]:
    """Intersect two instruments' price observations inside a date range."""
    dates_a, price_a, _ = store.analysis_values(a, start, end)
    dates_b, price_b, _ = store.analysis_values(b, start, end)
    index_b = {d: k for k, d in enumerate(dates_b)}
    common = [(k, index_b[d]) for k, d in enumerate(dates_a) if d in index_b]
    if not common:
        raise SeriesTooShort(f"{a} and {b} share no dates in [{start}, {end}]")
    ia = np.array([k for k, _ in common])
    ib = np.array([k for _, k in common])
    dates = [dates_a[k] for k, _ in common]
    return dates, price_a[ia], price_b[ib]


def pair_triangle(
    store: Store,
    a: str,
    b: str,
    start: datetime.date,
    end: datetime.date,
    min_window: int = DEFAULT_MIN_WINDOW,
) -> PrismTriangle:
    dates, av, bv = aligned_pair(store, a, b, start, end)
    return build_triangle(av, bv, dates, a, b, min_window=min_window)


def industry_average(
    store: Store,
    industry: str,
    start: datetime.date,
    end: datetime.date,
) -> tuple[list[datetime.date], np.ndarray]:
    """Equal-weighted day-wise mean of the industry members' price values."""
    members = sorted(
        t for t, p in store.profiles.items() if p.industry == industry and t in store.series
    )
    if not members:
        raise EmptyIndustry(f"no instruments in industry {industry!r}")
    per_day: dict[datetime.date, list[float]] = {}
    for ticker in members:
        dates, price, _ = store.analysis_values(ticker, start, end)
        for day, value in zip(dates, price):
            if not math.isnan(value):
                per_day.setdefault(day, []).append(float(value))
    days = sorted(per_day)
    if not days:
        raise EmptyIndustry(f"industry {industry!r} has no data in [{start}, {end}]")
    means = np.array([sum(per_day[d]) / len(per_day[d]) for d in days])
    return days, means


def _align_to(
    dates_a: Sequence[datetime.date],
    values_a: np.ndarray,
    dates_b: Sequence[datetime.date],
    values_b: np.ndarray,
) -> tuple[list[datetime.date], np.ndarray, np.ndarray]:
    index_b = {d: k for k, d in enumerate(dates_b)}
    rows = [(k, index_b[d]) for k, d in enumerate(dates_a) if d in index_b]
    if not rows:
        raise SeriesTooShort("series share no dates")
    ia = np.array([k for k, _ in rows])
    ib = np.array([k for _, k in rows])
    return [dates_a[k] for k, _ in rows], values_a[ia], values_b[ib]


def reference_prisms(
    store: Store,
    stock: str,
    other: str,
    start: datetime.date,
    end: datetime.date,
    min_window: int = DEFAULT_MIN_WINDOW,
) -> dict[str, PrismTriangle]:
    """The three comparison triangles: versus market, industry average, and a chosen stock."""
    if store.benchmark is None:
        raise MissingBenchmark("no benchmark ticker configured")
    profile = store.profiles.get(stock)
    if profile is None or not profile.industry:
        raise EmptyIndustry(f"{stock!r} has no industry classification")
    market = pair_triangle(store, stock, store.benchmark, start, end, min_window)

    dates_s, price_s, _ = store.analysis_values(stock, start, end)
    ind_dates, ind_values = industry_average(store, profile.industry, start, end)
    dates, sv, iv = _align_to(dates_s, price_s, ind_dates, ind_values)
    industry = build_triangle(sv, iv, dates, stock, f"industry:{profile.industry}", min_window=min_window)

    pair = pair_triangle(store, stock, other, start, end, min_window)
    return {"market": market, "industry": industry, "pair": pair}


# --- exports ----------------------------------------------------------------


def triangle_to_csv(t: PrismTriangle) -> str:
    """Flat CSV: one row per cell; NaN serializes as an empty field."""
    x_arr, y_arr = index_to_cell_array(t.n)
    lines = ["i,x,y,window,end_date,corr"]
    for i in range(t.values.size):
        x, y = int(x_arr[i]), int(y_arr[i])
        value = t.values[i]
        corr = "" if math.isnan(value) else repr(float(value))
        lines.append(f"{i},{x},{y},{t.n - y},{t.dates[x].isoformat()},{corr}")
    return "\n".join(lines) + "\n"


def write_triangle(t: PrismTriangle, path: str | Path) -> None:
    """Binary triangle export: PRT1 magic, pair labels, date table, f32 cells."""
    out = bytearray()
    out += TRIANGLE_MAGIC
    out += struct.pack("<I", TRIANGLE_VERSION)
    out += struct.pack("<I", t.n)
    out += struct.pack("<I", t.min_window)
    for label in (t.a, t.b):
        raw = label.encode("utf-8")
        out += struct.pack("<H", len(raw)) + raw
    for day in t.dates:
        raw = day.isoformat().encode("utf-8")
        out += struct.pack("<H", len(raw)) + raw
    out += np.asarray(t.values, dtype="<f4").tobytes()
    Path(path).write_bytes(bytes(out))


def read_triangle(path: str | Path) -> PrismTriangle:
    data = Path(path).read_bytes()
    if data[:4] != TRIANGLE_MAGIC:
        raise InvalidArgument(f"{path}: bad triangle magic {data[:4]!r}")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != TRIANGLE_VERSION:
        raise InvalidArgument(f"{path}: unsupported triangle version {version}")
    (n,) = struct.unpack_from("<I", data, 8)
    (min_window,) = struct.unpack_from("<I", data, 12)
    offset = 16
    labels = []
    for _ in range(2):
        (ln,) = struct.unpack_from("<H", data, offset)
        offset += 2
        labels.append(data[offset : offset + ln].decode("utf-8"))
        offset += ln
    dates = []
    for _ in range(n):
        (ln,) = struct.unpack_from("<H", data, offset)
        offset += 2
        dates.append(datetime.date.fromisoformat(data[offset : offset + ln].decode("utf-8")))
        offset += ln
    values = np.frombuffer(data, dtype="<f4", count=triangle_cells(n), offset=offset).astype(np.float64)
    return PrismTriangle(
        a=labels[0],
        b=labels[1],
        start_date=dates[0],
        end_date=dates[-1],
        dates=tuple(dates),
        n=n,
        values=values,
        min_window=min_window,
    )


def shock_days(t: PrismTriangle, z: float = 3.0) -> list[int]:
    """Heuristic vertical-line detector: days whose column shifted abruptly.

    Scores each day x >= 1 by the mean |cell(x, w) - cell(x-1, w)| over window
    sizes valid in both columns, then flags scores more than ``z`` standard
    deviations above the mean score.  A visual-inspection aid, not a test.
    """
    x_arr, y_arr = index_to_cell_array(t.n)
    columns: dict[int, dict[int, float]] = {}
    for i in range(t.values.size):
        if not math.isnan(t.values[i]):
            columns.setdefault(int(x_arr[i]), {})[t.n - int(y_arr[i])] = float(t.values[i])
    scores: dict[int, float] = {}
    for x in range(1, t.n):
        prev, cur = columns.get(x - 1, {}), columns.get(x, {})
        deltas = [abs(cur[w] - prev[w]) for w in cur.keys() & prev.keys()]
        if deltas:
            scores[x] = sum(deltas) / len(deltas)
    if len(scores) < 3:
        return []
    arr = np.array(list(scores.values()))
    mean, std = float(arr.mean()), float(arr.std())
    if std == 0:
        return []
    return sorted(x for x, s in scores.items() if (s - mean) / std > z)
