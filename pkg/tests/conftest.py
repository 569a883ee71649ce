"""Shared fixtures: a tiny hand-built store and a seeded synthetic market."""

from __future__ import annotations

import datetime

import numpy as np
import pytest

from prismatic import corrnet, ingest, synth
from prismatic.ingest import CompanyProfile, DailyBar, DailySeries, PersonIdentity, Store


def make_series(ticker: str, start: datetime.date, closes, volumes=None) -> DailySeries:
    bars = []
    day = start
    for k, close in enumerate(closes):
        while day.weekday() >= 5:
            day += datetime.timedelta(days=1)
        volume = 1_000_000.0 if volumes is None else float(volumes[k])
        bars.append(DailyBar(day, float(close), volume))
        day += datetime.timedelta(days=1)
    return DailySeries(ticker, tuple(bars))


def walk(rng: np.random.Generator, n: int, drift: float = 0.0) -> np.ndarray:
    return 50.0 * np.exp(np.cumsum(rng.normal(drift, 0.02, n)))


@pytest.fixture
def tiny_store() -> Store:
    """Four instruments plus a benchmark over ~120 weekdays of 2020."""
    rng = np.random.default_rng(42)
    start = datetime.date(2020, 1, 6)
    base = rng.normal(0.0, 0.02, 120)
    series = {}
    # AAA and BBB comove; CCC anticorrelates; DDD is independent noise
    for ticker, returns in (
        ("AAA", base + rng.normal(0, 0.004, 120)),
        ("BBB", base + rng.normal(0, 0.004, 120)),
        ("CCC", -base + rng.normal(0, 0.004, 120)),
        ("DDD", rng.normal(0, 0.02, 120)),
        ("IDX", 0.5 * base + rng.normal(0, 0.004, 120)),
    ):
        closes = 50.0 * np.exp(np.cumsum(returns))
        volumes = np.exp(rng.normal(13.0, 0.3, 120))
        series[ticker] = make_series(ticker, start, closes, volumes)
    profiles = {
        "AAA": CompanyProfile(
            "AAA",
            province="Zhejiang",
            city="Hangzhou",
            industry="medical",
            concepts=frozenset({"mask", "influenza"}),
            managers=frozenset({PersonIdentity("Li Wei", 1970)}),
            top_investors=frozenset({PersonIdentity("Fund One", 1990)}),
        ),
        "BBB": CompanyProfile(
            "BBB",
            province="Zhejiang",
            city="Hangzhou",
            industry="medical",
            concepts=frozenset({"mask"}),
            managers=frozenset({PersonIdentity("Li Wei", 1980)}),
            top_investors=frozenset({PersonIdentity("Fund One", 1990)}),
        ),
        "CCC": CompanyProfile(
            "CCC",
            province="Guangdong",
            city="Shenzhen",
            industry="media",
            concepts=frozenset({"e-sports"}),
            managers=frozenset({PersonIdentity("Chen Jing", 1975)}),
            top_investors=frozenset({PersonIdentity("Fund Two", 1991)}),
        ),
        "DDD": CompanyProfile(
            "DDD",
            province="Guangdong",
            city="Guangzhou",
            industry="media",
            concepts=frozenset({"mask", "e-sports"}),
            managers=frozenset({PersonIdentity("Chen Jing", 1975)}),
            top_investors=frozenset(),
        ),
    }
    return Store(series=series, profiles=profiles, benchmark="IDX")


@pytest.fixture(scope="session")
def synth_market() -> synth.SynthMarket:
    return synth.generate(stocks=60, years=1, communities=3, seed=7)


@pytest.fixture(scope="session")
def synth_store(synth_market) -> Store:
    return ingest.build_store(
        synth_market.prices_csv, synth_market.metadata_json, benchmark=synth_market.benchmark
    )


@pytest.fixture(scope="session")
def synth_cache(synth_store) -> corrnet.YearlyCorrelationCache:
    return corrnet.build_yearly_cache(synth_store, 2019)
