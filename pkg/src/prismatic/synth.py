"""Seeded synthetic market generator: planted correlated communities with
knowledge layers that agree with them at a configurable rate."""

from __future__ import annotations

import datetime
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArgument
from .ingest import CompanyProfile, PersonIdentity, dump_metadata

DEFAULT_BENCHMARK = "SH000001"
DEFAULT_START_YEAR = 2019

DAILY_VOL = 0.02
MARKET_BETA = 0.2
HALT_PROB = 0.3
ZERO_VOLUME_PROB = 0.2


@dataclass(frozen=True)
class SynthMarket:
    prices_csv: str
    metadata_json: str
    planted: dict[str, int]
    benchmark: str
    tickers: tuple[str, ...]

    def community_members(self, community: int) -> list[str]:
        return sorted(t for t, c in self.planted.items() if c == community)

    def planted_json(self) -> str:
        payload = {
            "benchmark": self.benchmark,
            "community_of": self.planted,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def trading_days(start_year: int, years: int) -> list[datetime.date]:
    """All weekdays of the requested calendar years."""
    days = []
    day = datetime.date(start_year, 1, 1)
    last = datetime.date(start_year + years - 1, 12, 31)
    while day <= last:
        if day.weekday() < 5:
            days.append(day)
        day += datetime.timedelta(days=1)
    return days


def _pick(rng: np.random.Generator, own: int, agreement: float, k_total: int) -> int:
    """Own community index with probability ``agreement``, else a random other."""
    if rng.random() < agreement or k_total == 1:
        return own
    other = int(rng.integers(0, k_total - 1))
    return other if other < own else other + 1


def generate(
    stocks: int,
    years: int,
    communities: int,
    seed: int,
    agreement: float = 0.8,
    loading: float = 0.7,
    start_year: int = DEFAULT_START_YEAR,
    benchmark: str = DEFAULT_BENCHMARK,
) -> SynthMarket:
    """Build a reproducible market with planted communities.

    Stock returns load on a shared per-community factor (strength ``loading``)
    plus a mild market beta and idiosyncratic noise, so within-community price
    correlation is strong and cross-community correlation is near zero.
    Knowledge items (location, people, business) follow the planted community
    with probability ``agreement`` per item.
    """
    if stocks < 2 or communities < 1 or years < 1:
        raise InvalidArgument("need stocks >= 2, communities >= 1, years >= 1")
    if communities > stocks:
        raise InvalidArgument("more communities than stocks")
    rng = np.random.default_rng(seed)
    days = trading_days(start_year, years)
    horizon = len(days)

    tickers = [f"{600000 + i}" for i in range(stocks)]
    community_of = {t: i % communities for i, t in enumerate(tickers)}

    market = rng.normal(0.0, 1.0, horizon)
    factors = rng.normal(0.0, 1.0, (communities, horizon))
    noise_scale = float(np.sqrt(max(1.0 - loading**2 - MARKET_BETA**2, 0.05)))

    lines = ["ticker,date,close,volume"]

    # benchmark index first: market factor only
    bench_close = 3000.0 * np.exp(np.cumsum(0.01 * market))
    for k, day in enumerate(days):
        lines.append(f"{benchmark},{day.isoformat()},{round(float(bench_close[k]), 4)!r},{8e9!r}")

    for i, ticker in enumerate(tickers):
        group = community_of[ticker]
        eps = rng.normal(0.0, 1.0, horizon)
        returns = DAILY_VOL * (loading * factors[group] + MARKET_BETA * market + noise_scale * eps)
        closes = np.round(30.0 * np.exp(np.cumsum(returns)), 4)
        log_volume = 14.0 + 0.6 * factors[group] + 0.8 * rng.normal(0.0, 1.0, horizon)
        volumes = np.round(np.exp(log_volume), 0)

        halted: set[int] = set()
        if rng.random() < HALT_PROB and horizon > 30:
            span = int(rng.integers(3, 11))
            at = int(rng.integers(5, horizon - span))
            halted = set(range(at, at + span))
        zeroed: set[int] = set()
        if rng.random() < ZERO_VOLUME_PROB:
            zeroed = set(int(v) for v in rng.integers(0, horizon, int(rng.integers(1, 4))))

        for k, day in enumerate(days):
            if k in halted:
                continue
            volume = 0.0 if k in zeroed else float(volumes[k])
            lines.append(f"{ticker},{day.isoformat()},{float(closes[k])!r},{volume!r}")

    profiles = _profiles(rng, tickers, community_of, communities, agreement)
    return SynthMarket(
        prices_csv="\n".join(lines) + "\n",
        metadata_json=dump_metadata(profiles),
        planted=community_of,
        benchmark=benchmark,
        tickers=tuple(tickers),
    )


def _profiles(
    rng: np.random.Generator,
    tickers: list[str],
    community_of: dict[str, int],
    communities: int,
    agreement: float,
) -> list[CompanyProfile]:
    provinces = [f"P{k:02d}" for k in range(communities)]
    industries = [f"IND{k:02d}" for k in range(communities)]
    concept_pool = [[f"concept-{k}-{j}" for j in range(3)] for k in range(communities)]

    def person_pool(prefix: str) -> list[list[PersonIdentity]]:
        pools = []
        for k in range(communities):
            pool = []
            for j in range(5):
                # one collision pair per community: same name, different birth years
                name = f"{prefix} {k:02d}-{j}" if j else f"{prefix} Shared"
                birth = 1950 + 2 * k + j if j != 4 else None
                pool.append(PersonIdentity(name, birth))
            pools.append(pool)
        return pools

    investor_pools = person_pool("Investor")
    manager_pools = person_pool("Manager")

    profiles = []
    for ticker in tickers:
        own = community_of[ticker]
        loc = _pick(rng, own, agreement, communities)
        province = provinces[loc]
        city = f"{province}-C{int(rng.integers(0, 3))}"
        industry = industries[_pick(rng, own, agreement, communities)]
        concepts = set()
        for _ in range(2):
            pool = concept_pool[_pick(rng, own, agreement, communities)]
            concepts.add(pool[int(rng.integers(0, len(pool)))])

        def sample_people(pools: list[list[PersonIdentity]]) -> frozenset[PersonIdentity]:
            chosen = set()
            for _ in range(2):
                pool = pools[_pick(rng, own, agreement, communities)]
                person = pool[int(rng.integers(0, len(pool)))]
                if person.birth_year is None:
                    person = PersonIdentity(person.normalized_name, None, ticker)
                chosen.add(person)
            return frozenset(chosen)

        profiles.append(
            CompanyProfile(
                instrument=ticker,
                province=province,
                city=city,
                industry=industry,
                concepts=frozenset(concepts),
                managers=sample_people(manager_pools),
                top_investors=sample_people(investor_pools),
            )
        )
    return profiles


def write_market(market: SynthMarket, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "prices.csv").write_text(market.prices_csv, encoding="utf-8")
    (directory / "meta.json").write_text(market.metadata_json, encoding="utf-8")
    (directory / "planted.json").write_text(market.planted_json(), encoding="utf-8")
