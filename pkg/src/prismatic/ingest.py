"""Market-data ingestion: price/metadata parsing, return derivation, and the normalized store."""

from __future__ import annotations

import csv
import datetime
import io
import json
import logging
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Mapping

import numpy as np

from .errors import (
    DuplicateDate,
    EmptyInput,
    InvalidArgument,
    MalformedRow,
    SchemaError,
    SeriesTooShort,
    UnknownInstrument,
)

log = logging.getLogger(__name__)

PRICES_HEADER = ("ticker", "date", "close", "volume")
BASES = ("returns", "levels")

PRICES_FILE = "prices.csv"
META_FILE = "meta.json"
MANIFEST_FILE = "manifest.json"
CACHE_DIR = "caches"


def _normalize_name(name: str) -> str:
    return " ".join(name.split())


@dataclass(frozen=True)
class PersonIdentity:
    """A disambiguated person: full name plus birth year.

    An unknown birth year never matches a known one.  To avoid false merges,
    identities without a birth year are additionally pinned to their source
    company via ``scope``.
    """

    normalized_name: str
    birth_year: int | None = None
    scope: str | None = None

    def key(self) -> str:
        year = "" if self.birth_year is None else str(self.birth_year)
        return f"{self.normalized_name}|{year}|{self.scope or ''}"

    @staticmethod
    def from_key(key: str) -> "PersonIdentity":
        parts = key.rsplit("|", 2)  # the name itself may contain pipes
        if len(parts) != 3 or not parts[0]:
            raise InvalidArgument(f"bad person key: {key!r}")
        name, year, scope = parts
        try:
            birth_year = int(year) if year else None
        except ValueError:
            raise InvalidArgument(f"bad person key: {key!r}") from None
        return PersonIdentity(name, birth_year, scope or None)


@dataclass(frozen=True)
class DailyBar:
    date: datetime.date
    close: float
    volume: float


@dataclass(frozen=True)
class DailySeries:
    """Per-instrument bars, sorted by date with no duplicates."""

    instrument: str
    bars: tuple[DailyBar, ...]

    def __post_init__(self) -> None:
        for prev, cur in zip(self.bars, self.bars[1:]):
            if cur.date <= prev.date:
                raise ValueError(f"{self.instrument}: bars not strictly increasing at {cur.date}")

    @property
    def dates(self) -> list[datetime.date]:
        return [b.date for b in self.bars]


@dataclass(frozen=True, eq=False)
class ReturnSeries:
    """Log price returns and log volume ratios; entry k is dated at the later bar.

    Volume changes are NaN where either day's volume is zero (trading halts).
    """

    instrument: str
    dates: tuple[datetime.date, ...]
    price_returns: np.ndarray
    volume_changes: np.ndarray


@dataclass(frozen=True)
class CompanyProfile:
    instrument: str
    province: str = ""
    city: str = ""
    industry: str = ""
    concepts: frozenset[str] = frozenset()
    managers: frozenset[PersonIdentity] = frozenset()
    top_investors: frozenset[PersonIdentity] = frozenset()


def _decode(source: bytes | str | IO) -> str:
    if isinstance(source, str):
        return source
    if isinstance(source, bytes):
        data = source
    else:
        data = source.read()
        if isinstance(data, str):
            return data
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedRow(f"input is not valid UTF-8: {exc}") from exc


def parse_prices(source: bytes | str | IO) -> list[DailySeries]:
    """Parse the prices CSV (``ticker,date,close,volume``) into one series per ticker.

    Rows need not arrive sorted; each series is sorted by date.  Malformed
    rows and duplicate (ticker, date) pairs are reported with line numbers.
    """
    text = _decode(source)
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        raise EmptyInput("prices CSV is empty")
    if tuple(h.strip() for h in header) != PRICES_HEADER:
        raise MalformedRow(
            f"line 1: expected header {','.join(PRICES_HEADER)!r}, got {','.join(header)!r}", line=1
        )

    per_ticker: dict[str, dict[datetime.date, DailyBar]] = {}
    rows = 0
    for row in reader:
        line = reader.line_num
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 4:
            raise MalformedRow(f"line {line}: expected 4 fields, got {len(row)}", line=line)
        ticker = row[0].strip()
        if not ticker:
            raise MalformedRow(f"line {line}: empty ticker", line=line)
        try:
            day = datetime.date.fromisoformat(row[1].strip())
        except ValueError:
            raise MalformedRow(f"line {line}: bad date {row[1]!r}", line=line) from None
        try:
            close = float(row[2])
            volume = float(row[3])
        except ValueError:
            raise MalformedRow(f"line {line}: bad number in {row[2]!r}/{row[3]!r}", line=line) from None
        if not math.isfinite(close) or close <= 0:
            raise MalformedRow(f"line {line}: close must be positive, got {row[2]}", line=line)
        if not math.isfinite(volume) or volume < 0:
            raise MalformedRow(f"line {line}: volume must be non-negative, got {row[3]}", line=line)
        bars = per_ticker.setdefault(ticker, {})
        if day in bars:
            raise DuplicateDate(f"line {line}: duplicate date {day} for {ticker}", line=line, ticker=ticker)
        bars[day] = DailyBar(day, close, volume)
        rows += 1

    if rows == 0:
        raise EmptyInput("prices CSV has no data rows")
    return [
        DailySeries(ticker, tuple(bars[d] for d in sorted(bars)))
        for ticker, bars in sorted(per_ticker.items())
    ]


def _parse_person(obj: object, where: str, scope: str) -> PersonIdentity:
    if not isinstance(obj, Mapping):
        raise SchemaError(f"{where}: person entries must be objects")
    name = _normalize_name(str(obj.get("name", "")))
    if not name:
        raise SchemaError(f"{where}: person name is empty")
    birth_year = obj.get("birth_year")
    if birth_year is not None and not isinstance(birth_year, int):
        raise SchemaError(f"{where}: birth_year must be an integer or null")
    # Unknown birth years stay scoped to the source company (no cross-company merge).
    return PersonIdentity(name, birth_year, scope if birth_year is None else None)


def _optional_str(obj: Mapping, key: str, where: str) -> str:
    value = obj.get(key)
    if value is None:
        return ""
    if not isinstance(value, str):
        raise SchemaError(f"{where}: {key} must be a string")
    value = value.strip()
    if key in ("province", "city") and not value:
        raise SchemaError(f"{where}: {key} present but empty")
    return value


def parse_metadata(source: bytes | str | IO, known_tickers: Iterable[str] | None = None) -> list[CompanyProfile]:
    """Parse the metadata JSON array into company profiles.

    Person names are whitespace-collapsed with case preserved.  Tickers absent
    from ``known_tickers`` (when given) are reported as warnings, not errors.
    """
    text = _decode(source)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"metadata is not valid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise SchemaError("metadata must be a JSON array of profile objects")

    known = set(known_tickers) if known_tickers is not None else None
    profiles: list[CompanyProfile] = []
    seen: set[str] = set()
    city_province: dict[str, str] = {}
    for idx, obj in enumerate(data):
        where = f"profile[{idx}]"
        if not isinstance(obj, Mapping):
            raise SchemaError(f"{where}: not an object")
        ticker = str(obj.get("ticker", "")).strip()
        if not ticker:
            raise SchemaError(f"{where}: missing ticker")
        if ticker in seen:
            raise SchemaError(f"{where}: duplicate ticker {ticker}")
        seen.add(ticker)
        if known is not None and ticker not in known:
            log.warning("metadata profile %s has no price series", ticker)

        province = _optional_str(obj, "province", where)
        city = _optional_str(obj, "city", where)
        if city:
            prior = city_province.setdefault(city, province)
            if prior != province:
                log.warning("city %r appears under provinces %r and %r", city, prior, province)

        concepts_raw = obj.get("concepts", [])
        if not isinstance(concepts_raw, list):
            raise SchemaError(f"{where}: concepts must be a list")
        concepts = frozenset(c.strip() for c in map(str, concepts_raw) if c.strip())

        managers = frozenset(_parse_person(p, where, ticker) for p in obj.get("managers", []))
        investors = frozenset(_parse_person(p, where, ticker) for p in obj.get("investors", []))
        profiles.append(
            CompanyProfile(
                instrument=ticker,
                province=province,
                city=city,
                industry=_optional_str(obj, "industry", where),
                concepts=concepts,
                managers=managers,
                top_investors=investors,
            )
        )
    return profiles


def to_returns(series: DailySeries) -> ReturnSeries:
    """Derive log price returns and log volume ratios from consecutive bars."""
    if len(series.bars) < 2:
        raise SeriesTooShort(f"{series.instrument}: need at least 2 bars, got {len(series.bars)}")
    closes = np.array([b.close for b in series.bars], dtype=np.float64)
    volumes = np.array([b.volume for b in series.bars], dtype=np.float64)
    price_returns = np.log(closes[1:] / closes[:-1])
    with np.errstate(divide="ignore", invalid="ignore"):
        volume_changes = np.where(
            (volumes[1:] > 0) & (volumes[:-1] > 0), np.log(volumes[1:] / volumes[:-1]), np.nan
        )
    return ReturnSeries(
        instrument=series.instrument,
        dates=tuple(b.date for b in series.bars[1:]),
        price_returns=price_returns,
        volume_changes=volume_changes,
    )


def partition_years(series: ReturnSeries) -> dict[int, ReturnSeries]:
    """Split a return series by the calendar year of each return's date."""
    out: dict[int, ReturnSeries] = {}
    dates = series.dates
    i = 0
    while i < len(dates):
        year = dates[i].year
        j = i
        while j < len(dates) and dates[j].year == year:
            j += 1
        out[year] = ReturnSeries(
            instrument=series.instrument,
            dates=dates[i:j],
            price_returns=series.price_returns[i:j],
            volume_changes=series.volume_changes[i:j],
        )
        i = j
    return out


@dataclass(frozen=True, eq=False)
class YearPanel:
    """Date-aligned analysis values for one year: rows are the union of dates, NaN where absent."""

    year: int
    dates: tuple[datetime.date, ...]
    tickers: tuple[str, ...]
    price: np.ndarray
    volume: np.ndarray


@dataclass(eq=False)
class Store:
    """Normalized market store: immutable once built, shareable across readers."""

    series: dict[str, DailySeries]
    profiles: dict[str, CompanyProfile] = field(default_factory=dict)
    benchmark: str | None = None
    basis: str = "returns"
    _returns: dict[str, ReturnSeries] = field(default_factory=dict, repr=False)
    _panels: dict[int, YearPanel] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.basis not in BASES:
            raise InvalidArgument(f"basis must be one of {BASES}, got {self.basis!r}")
        if self.benchmark is not None and self.benchmark not in self.series:
            raise UnknownInstrument(f"benchmark {self.benchmark!r} has no price series")

    @property
    def instruments(self) -> list[str]:
        return sorted(self.series)

    def daily_series(self, ticker: str) -> DailySeries:
        try:
            return self.series[ticker]
        except KeyError:
            raise UnknownInstrument(f"unknown instrument {ticker!r}") from None

    def return_series(self, ticker: str) -> ReturnSeries:
        if ticker not in self._returns:
            self._returns[ticker] = to_returns(self.daily_series(ticker))
        return self._returns[ticker]

    def analysis_values(
        self,
        ticker: str,
        start: datetime.date | None = None,
        end: datetime.date | None = None,
    ) -> tuple[list[datetime.date], np.ndarray, np.ndarray]:
        """Per-instrument (dates, price values, volume values) under the store basis."""
        if self.basis == "returns":
            rs = self.return_series(ticker)
            dates = list(rs.dates)
            price = rs.price_returns
            volume = rs.volume_changes
        else:
            bars = self.daily_series(ticker).bars
            dates = [b.date for b in bars]
            price = np.array([b.close for b in bars], dtype=np.float64)
            volume = np.array([b.volume for b in bars], dtype=np.float64)
        lo = 0 if start is None else bisect_left(dates, start)
        hi = len(dates) if end is None else bisect_right(dates, end)
        return dates[lo:hi], price[lo:hi], volume[lo:hi]

    def bars_in_range(
        self, ticker: str, start: datetime.date | None = None, end: datetime.date | None = None
    ) -> list[DailyBar]:
        bars = self.daily_series(ticker).bars
        dates = [b.date for b in bars]
        lo = 0 if start is None else bisect_left(dates, start)
        hi = len(dates) if end is None else bisect_right(dates, end)
        return list(bars[lo:hi])

    def years(self) -> list[int]:
        seen: set[int] = set()
        for ticker in self.series:
            try:
                dates, _, _ = self.analysis_values(ticker)
            except SeriesTooShort:
                continue
            seen.update(d.year for d in dates)
        return sorted(seen)

    def year_panel(self, year: int) -> YearPanel:
        if year in self._panels:
            return self._panels[year]
        start, end = datetime.date(year, 1, 1), datetime.date(year, 12, 31)
        columns: list[tuple[str, list[datetime.date], np.ndarray, np.ndarray]] = []
        all_dates: set[datetime.date] = set()
        for ticker in self.instruments:
            try:
                dates, price, volume = self.analysis_values(ticker, start, end)
            except SeriesTooShort:
                continue
            if dates:
                columns.append((ticker, dates, price, volume))
                all_dates.update(dates)
        grid = sorted(all_dates)
        index = {d: i for i, d in enumerate(grid)}
        price_mat = np.full((len(grid), len(columns)), np.nan)
        volume_mat = np.full((len(grid), len(columns)), np.nan)
        for col, (_, dates, price, volume) in enumerate(columns):
            rows = [index[d] for d in dates]
            price_mat[rows, col] = price
            volume_mat[rows, col] = volume
        panel = YearPanel(
            year=year,
            dates=tuple(grid),
            tickers=tuple(t for t, _, _, _ in columns),
            price=price_mat,
            volume=volume_mat,
        )
        self._panels[year] = panel
        return panel

    # --- persistence -----------------------------------------------------

    def write(self, directory: str | Path) -> None:
        """Write the canonical store files; identical stores produce identical bytes."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        lines = ["ticker,date,close,volume"]
        for ticker in self.instruments:
            for bar in self.series[ticker].bars:
                # plain-float repr round-trips exactly; numpy scalars would not
                lines.append(f"{ticker},{bar.date.isoformat()},{float(bar.close)!r},{float(bar.volume)!r}")
        (directory / PRICES_FILE).write_text("\n".join(lines) + "\n", encoding="utf-8")
        (directory / META_FILE).write_text(dump_metadata(self.profiles.values()), encoding="utf-8")
        manifest = {"basis": self.basis, "benchmark": self.benchmark, "version": 1}
        (directory / MANIFEST_FILE).write_text(
            json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )

    @classmethod
    def read(cls, directory: str | Path) -> "Store":
        directory = Path(directory)
        prices_path = directory / PRICES_FILE
        if not prices_path.exists():
            raise EmptyInput(f"no {PRICES_FILE} in {directory}")
        series = {s.instrument: s for s in parse_prices(prices_path.read_bytes())}
        profiles: dict[str, CompanyProfile] = {}
        meta_path = directory / META_FILE
        if meta_path.exists():
            profiles = {p.instrument: p for p in parse_metadata(meta_path.read_bytes(), series)}
        basis, benchmark = "returns", None
        manifest_path = directory / MANIFEST_FILE
        if manifest_path.exists():
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
            basis = manifest.get("basis", "returns")
            benchmark = manifest.get("benchmark")
        return cls(series=series, profiles=profiles, benchmark=benchmark, basis=basis)


def dump_metadata(profiles: Iterable[CompanyProfile]) -> str:
    """Canonical JSON for profiles (ticker-sorted, stable person ordering)."""

    def person(p: PersonIdentity) -> dict:
        return {"name": p.normalized_name, "birth_year": p.birth_year}

    records = []
    for prof in sorted(profiles, key=lambda p: p.instrument):
        rec: dict = {"ticker": prof.instrument}
        if prof.province:
            rec["province"] = prof.province
        if prof.city:
            rec["city"] = prof.city
        if prof.industry:
            rec["industry"] = prof.industry
        rec["concepts"] = sorted(prof.concepts)
        rec["managers"] = [person(p) for p in sorted(prof.managers, key=PersonIdentity.key)]
        rec["investors"] = [person(p) for p in sorted(prof.top_investors, key=PersonIdentity.key)]
        records.append(rec)
    return json.dumps(records, ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def build_store(
    prices: bytes | str | IO,
    metadata: bytes | str | IO | None = None,
    benchmark: str | None = None,
    basis: str = "returns",
) -> Store:
    """Parse raw inputs into a Store, validating the benchmark ticker."""
    series = {s.instrument: s for s in parse_prices(prices)}
    profiles: dict[str, CompanyProfile] = {}
    if metadata is not None:
        profiles = {p.instrument: p for p in parse_metadata(metadata, series)}
    return Store(series=series, profiles=profiles, benchmark=benchmark, basis=basis)
