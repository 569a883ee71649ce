"""Acceptance suite: one test per criterion, at the stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one line per
criterion; each test prints its PASS line with the measured numbers.
"""

from __future__ import annotations

import datetime
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient
from sklearn.metrics import normalized_mutual_info_score

from prismatic import corrnet, ingest, mvclust, prism, synth
from prismatic.cli import main as cli_main
from prismatic.corrnet import ThresholdConfig, YearlyCorrelationCache, tri_length
from prismatic.session import ClusterSession, ordered_matrix
from prismatic.service import create_app

from conftest import make_series
from test_corrnet import brute_force_betweenness, graph_from_edges
from test_mvclust import planted_views


def report(number: int, message: str) -> None:
    print(f"ACCEPTANCE {number}: PASS - {message}")


def test_criterion_01_prism_indexing_bijection():
    """i -> (x, y) is a bijection onto valid cells for n in 1..500, inverted exactly."""
    started = time.perf_counter()
    for n in range(1, 501):
        xs, ys = prism.index_to_cell_array(n)
        size = n * (n + 1) // 2
        assert xs.shape == (size,)
        # validity: 0 <= y < n and n-1-y <= x <= n-1
        assert (ys >= 0).all() and (ys < n).all()
        assert (xs >= n - 1 - ys).all() and (xs <= n - 1).all()
        # exact inversion in integer arithmetic
        inverse = ys * (ys + 1) // 2 + xs - (n - 1 - ys)
        assert np.array_equal(inverse, np.arange(size, dtype=np.int64))
    # the scalar functions agree with the vectorized map on sampled cells
    rng = np.random.default_rng(0)
    for n in (1, 2, 17, 250, 500):
        xs, ys = prism.index_to_cell_array(n)
        for i in rng.integers(0, n * (n + 1) // 2, 200):
            x, y = prism.index_to_cell(int(i), n)
            assert (x, y) == (int(xs[i]), int(ys[i]))
            assert prism.cell_to_index(x, y, n) == int(i)
    elapsed = time.perf_counter() - started
    assert elapsed < 5.0
    report(1, f"bijection for n in 1..500 verified in {elapsed:.2f}s (< 5s)")


def test_criterion_02_prism_correctness_vs_naive_oracle():
    """20 random pairs of length 250: every defined cell within 1e-8 of two-pass."""
    rng = np.random.default_rng(42)
    n = 250
    xs, ys = prism.index_to_cell_array(n)
    worst = 0.0
    days = [datetime.date(2020, 1, 1) + datetime.timedelta(days=k) for k in range(n)]
    for pair in range(20):
        a = rng.uniform(-0.1, 0.1, n)
        b = 0.4 * a + rng.uniform(-0.06, 0.06, n)
        t = prism.build_triangle(a, b, days, "A", "B", min_window=5)
        assert t.tip == pytest.approx(corrnet.pearson(a, b), abs=1e-12)
        for i in range(t.values.size):
            got = t.values[i]
            if math.isnan(got):
                continue
            x, y = int(xs[i]), int(ys[i])
            w = n - y
            sa = a[x - w + 1 : x + 1]
            sb = b[x - w + 1 : x + 1]
            am, bm = sa - sa.mean(), sb - sb.mean()
            expected = float(am @ bm / math.sqrt((am @ am) * (bm @ bm)))
            worst = max(worst, abs(got - expected))
            assert abs(got - expected) <= 1e-8
    report(2, f"20x31375 cells vs naive two-pass oracle, worst |diff| {worst:.2e} (<= 1e-8)")


def test_criterion_03_prism_performance():
    """One 250-day triangle (31,375 cells) in under 50 ms."""
    rng = np.random.default_rng(1)
    n = 250
    a = rng.uniform(-0.1, 0.1, n)
    b = rng.uniform(-0.1, 0.1, n)
    days = [datetime.date(2020, 1, 1) + datetime.timedelta(days=k) for k in range(n)]
    timings = []
    for _ in range(3):
        started = time.perf_counter()
        t = prism.build_triangle(a, b, days, "A", "B", min_window=5)
        timings.append(time.perf_counter() - started)
    assert t.values.size == 31375
    best = min(timings)
    assert best < 0.050
    report(3, f"250-day triangle built in {best * 1000:.1f} ms (< 50 ms)")


def test_criterion_04_correlation_semantics():
    """Spearman monotone invariance exact on 1000 cases; Pearson affine 1e-12; hand values."""
    rng = np.random.default_rng(7)
    for _ in range(1000):
        n = int(rng.integers(5, 60))
        x = rng.uniform(-1, 1, n)
        y = rng.uniform(-1, 1, n)
        base = corrnet.spearman(x, y)
        transform = rng.integers(0, 3)
        if transform == 0:
            tx = np.exp(x)
        elif transform == 1:
            tx = x**3
        else:
            tx = 2.5 * x + 1.0
        assert corrnet.spearman(tx, y) == base  # exact
    worst = 0.0
    for _ in range(300):
        n = int(rng.integers(5, 60))
        x = rng.uniform(-1, 1, n)
        y = rng.uniform(-1, 1, n)
        a = float(rng.uniform(0.01, 50))
        b = float(rng.uniform(-10, 10))
        r0 = corrnet.pearson(x, y)
        r1 = corrnet.pearson(a * x + b, y)
        worst = max(worst, abs(r1 - r0))
        assert abs(r1 - r0) <= 1e-12
    assert corrnet.pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0, abs=1e-15)
    assert corrnet.pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0, abs=1e-15)
    assert corrnet.pearson([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-12)
    assert corrnet.spearman([10, 20, 30], [3, 1, 2]) == pytest.approx(-0.5, abs=1e-12)
    assert corrnet.spearman([1, 1, 2], [1, 2, 3]) == pytest.approx(math.sqrt(3) / 2, abs=1e-12)
    report(4, f"1000 exact monotone cases, affine worst {worst:.2e} (<= 1e-12), hand values ok")


def test_criterion_05_betweenness_brute_force():
    """Exact agreement with path enumeration on 200 random graphs of <= 12 nodes."""
    rng = np.random.default_rng(17)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 13))
        nodes = [f"n{i:02d}" for i in range(n)]
        p = float(rng.uniform(0.15, 0.6))
        edges = [
            (nodes[i], nodes[j])
            for i in range(n)
            for j in range(i + 1, n)
            if rng.random() < p
        ]
        graph = graph_from_edges(nodes, edges)
        expected = brute_force_betweenness(graph)
        got = corrnet.betweenness(graph)
        for v in nodes:
            worst = max(worst, abs(got[v] - expected[v]))
            assert abs(got[v] - expected[v]) <= 1e-9
    report(5, f"200 graphs vs brute-force enumeration, worst |diff| {worst:.2e} (<= 1e-9)")


def _random_cache(rng: np.random.Generator, m: int) -> YearlyCorrelationCache:
    instruments = tuple(f"S{i:03d}" for i in range(m))
    pairs = tri_length(m)
    values = {}
    for name in corrnet.MEASURES:
        arr = rng.uniform(-1, 1, pairs)
        arr[rng.random(pairs) < 0.08] = np.nan
        values[name] = arr
    overlap = rng.integers(60, 250, pairs).astype(np.int64)
    return YearlyCorrelationCache(year=2020, instruments=instruments, values=values, overlap=overlap)


def test_criterion_06_pruning_monotone_and_community_partition():
    """Raising thresholds never adds edges; communities partition; max_size respected."""
    rng = np.random.default_rng(23)
    for trial in range(15):
        m = int(rng.integers(45, 70))
        cache = _random_cache(rng, m)
        taus = sorted(rng.uniform(0, 1, 4))
        for other_tau in (0.0, 0.3):
            counts_s = [
                corrnet.prune_graph(cache, ThresholdConfig(t, other_tau, min_overlap=1)).edge_count()
                for t in taus
            ]
            assert counts_s == sorted(counts_s, reverse=True)
            counts_p = [
                corrnet.prune_graph(cache, ThresholdConfig(other_tau, t, min_overlap=1)).edge_count()
                for t in taus
            ]
            assert counts_p == sorted(counts_p, reverse=True)

        must = frozenset(str(t) for t in rng.choice(cache.instruments, 3, replace=False))
        cfg = ThresholdConfig(float(rng.uniform(0, 0.4)), float(rng.uniform(0, 0.4)), min_overlap=1, must_have=must)
        groups = corrnet.communities(cache, cfg, max_size=40)
        seen = [t for c in groups for t in c.members]
        assert len(seen) == len(set(seen)), "communities must not overlap"
        graph = corrnet.prune_graph(cache, cfg)
        non_isolated = {v for v in graph.nodes if graph.adj[v]}
        assert set(seen) == non_isolated | (must & set(graph.nodes))
        assert all(c.size <= 40 for c in groups)
    report(6, "15 random caches: antitone pruning, clean partitions, max_size 40 respected")


def test_criterion_07_gmc_planted_partition():
    """Median NMI >= 0.95 over 10 seeds; weight symmetry; c components; < 30 s/run."""
    nmis = []
    max_elapsed = 0.0
    for seed in range(10):
        views, labels, rows = planted_views(150, 3, 3, 0.8, seed=seed)
        started = time.perf_counter()
        result = mvclust.run_gmc(views, c=3, k_neighbors=15)
        elapsed = time.perf_counter() - started
        max_elapsed = max(max_elapsed, elapsed)
        assert elapsed < 30.0
        if result.converged:
            assert len(set(result.assignment.values())) == 3
        predicted = [result.assignment[t] for t in rows]
        nmis.append(normalized_mutual_info_score(labels, predicted))
    median_nmi = float(np.median(nmis))
    assert median_nmi >= 0.95

    # identical views keep weights symmetric at every iteration
    views, _, _ = planted_views(60, 3, 1, 0.9, seed=99)
    triple = [views[0], views[0], views[0]]
    state = mvclust.initial_state(triple, c=3, k_neighbors=10)
    for _ in range(8):
        state = mvclust.fuse_step(state)
        ratio = float(state.weights.max() / state.weights.min())
        assert abs(ratio - 1.0) <= 1e-6
    report(
        7,
        f"median NMI {median_nmi:.3f} (>= 0.95), slowest run {max_elapsed:.2f}s (< 30s), weights symmetric",
    )


def test_criterion_08_two_phase_seriation():
    """Planted blocks recovered; identical pair adjacent; permutations valid."""
    rng = np.random.default_rng(31)
    n_days = 150
    f1 = rng.normal(0, 0.02, n_days)
    f2 = rng.normal(0, 0.02, n_days)
    series = {}
    block1 = [f"A{i}" for i in range(5)]
    block2 = [f"B{i}" for i in range(4)]
    for t in block1:
        series[t] = make_series(t, datetime.date(2020, 1, 6), 50 * np.exp(np.cumsum(f1 + rng.normal(0, 0.004, n_days))))
    for t in block2:
        series[t] = make_series(t, datetime.date(2020, 1, 6), 50 * np.exp(np.cumsum(f2 + rng.normal(0, 0.004, n_days))))
    store = ingest.Store(series=series)
    sess = ClusterSession(id="acc8", year=2020, start=datetime.date(2020, 1, 1), end=datetime.date(2020, 12, 31))
    from prismatic.session import Event

    interleaved = [[t, "data_driven"] for pair in zip(block1, block2 + ["A4"]) for t in pair][:9]
    sess._append(Event(ts="t", op="create", args={"members": interleaved}))
    matrix = ordered_matrix(sess, store)
    assert len(matrix.blocks) == 2
    s0, e0 = matrix.blocks[0]
    s1, e1 = matrix.blocks[1]
    assert set(matrix.members[s0:e0]) == set(block1)
    assert set(matrix.members[s1:e1]) == set(block2)

    # identical pair adjacency
    base = rng.normal(0, 0.02, 100)
    twin_series = {
        "AAA": make_series("AAA", datetime.date(2020, 1, 6), 50 * np.exp(np.cumsum(base))),
        "BBB": make_series("BBB", datetime.date(2020, 1, 6), 50 * np.exp(np.cumsum(base))),
        "CCC": make_series("CCC", datetime.date(2020, 1, 6), 50 * np.exp(np.cumsum(-base))),
    }
    twin_store = ingest.Store(series=twin_series)
    twin = ClusterSession(id="acc8b", year=2020, start=datetime.date(2020, 1, 1), end=datetime.date(2020, 12, 31))
    twin._append(Event(ts="t", op="create", args={"members": [["AAA", "must_have"], ["CCC", "data_driven"], ["BBB", "data_driven"]]}))
    twin_matrix = ordered_matrix(twin, twin_store)
    members = list(twin_matrix.members)
    assert abs(members.index("AAA") - members.index("BBB")) == 1

    # permutation validity over random sessions
    for trial in range(10):
        chosen = list(rng.choice(sorted(series), size=int(rng.integers(2, 9)), replace=False))
        rand_sess = ClusterSession(id=f"acc8-{trial}", year=2020, start=datetime.date(2020, 1, 1), end=datetime.date(2020, 12, 31))
        rand_sess._append(Event(ts="t", op="create", args={"members": [[t, "data_driven"] for t in chosen]}))
        rand_matrix = ordered_matrix(rand_sess, store)
        assert sorted(rand_matrix.permutation) == list(range(len(chosen)))
    report(8, "planted blocks recovered, identical pair adjacent, permutations valid")


def test_criterion_09_end_to_end_desk_scale(tmp_path):
    """synth 300x2y -> ingest -> corr -> gmc -> session -> matrix -> prism < 60 s."""
    runner = CliRunner()
    started = time.perf_counter()
    raw = tmp_path / "raw"
    store_dir = tmp_path / "store"

    step = runner.invoke(cli_main, [
        "synth", "--stocks", "300", "--years", "2", "--communities", "10",
        "--seed", "1234", "--out", str(raw),
    ])
    assert step.exit_code == 0, step.output
    planted = json.loads((raw / "planted.json").read_text())

    step = runner.invoke(cli_main, [
        "ingest", "--prices", str(raw / "prices.csv"), "--meta", str(raw / "meta.json"),
        "--out", str(store_dir), "--benchmark", planted["benchmark"],
    ])
    assert step.exit_code == 0, step.output

    step = runner.invoke(cli_main, ["corr", "--data", str(store_dir), "--all"])
    assert step.exit_code == 0, step.output
    cache_files = sorted((store_dir / "caches").glob("corr_*.prc1"))
    assert len(cache_files) == 2

    step = runner.invoke(cli_main, ["gmc", "--data", str(store_dir), "--clusters", "10"])
    assert step.exit_code == 0, step.output

    store = ingest.Store.read(store_dir)
    cache = YearlyCorrelationCache.load(store_dir / "caches" / "corr_2019.prc1", 2019)
    seed_stock = "600000"
    cfg = ThresholdConfig(0.35, 0.35)
    sess = ClusterSession.create(
        "acc9", cache, [seed_stock], cfg, exclude=frozenset({store.benchmark})
    )
    matrix = ordered_matrix(sess, store)
    assert sorted(matrix.permutation) == list(range(len(sess.members)))

    other = sess.member_tickers()[1]
    triangle = prism.pair_triangle(
        store, seed_stock, other, datetime.date(2019, 1, 1), datetime.date(2019, 12, 31)
    )
    assert triangle.values.size == triangle.n * (triangle.n + 1) // 2

    elapsed = time.perf_counter() - started
    assert elapsed < 60.0

    planted_community = {
        t for t, c in planted["community_of"].items() if c == planted["community_of"][seed_stock]
    }
    got = set(sess.member_tickers())
    jaccard = len(got & planted_community) / len(got | planted_community)
    assert jaccard >= 0.8
    report(9, f"pipeline in {elapsed:.1f}s (< 60s), seed-community Jaccard {jaccard:.3f} (>= 0.8)")


def test_criterion_10_session_linearizability(tmp_path):
    """100 racing mutations: no lost updates, byte-identical replay."""
    market = synth.generate(stocks=140, years=1, communities=4, seed=77)
    data_dir = tmp_path / "data"
    store = ingest.build_store(market.prices_csv, market.metadata_json, benchmark=market.benchmark)
    store.write(data_dir)
    cache = corrnet.build_yearly_cache(store, 2019)
    (data_dir / ingest.CACHE_DIR).mkdir()
    cache.save(data_dir / ingest.CACHE_DIR / "corr_2019.prc1")

    client = TestClient(create_app(data_dir))
    created = client.post(
        "/sessions",
        json={"year": 2019, "seeds": ["600000"], "config": {"tau_spearman": 0.9, "tau_pearson": 0.9}},
    ).json()
    sid = created["id"]
    initial_members = {m["ticker"] for m in created["members"]}
    candidates = [t for t in store.instruments if t not in initial_members and t != store.benchmark][:100]
    assert len(candidates) == 100

    def fire(k: int):
        return client.post(
            f"/sessions/{sid}/ops",
            json={"op": "add", "ticker": candidates[k], "event_id": f"race-{k}"},
        ).status_code

    with ThreadPoolExecutor(max_workers=16) as pool:
        statuses = list(pool.map(fire, range(100)))
    assert statuses == [200] * 100

    body = client.get(f"/sessions/{sid}").json()
    log = body["log"]
    event_ids = [e["args"].get("event_id") for e in log if e["op"] == "add"]
    assert sorted(event_ids) == sorted(f"race-{k}" for k in range(100)), "no lost updates"
    members = {m["ticker"] for m in body["state"]["members"]}
    assert members == initial_members | set(candidates)

    # replaying the persisted log reproduces the state byte-identically
    raw = (data_dir / "sessions" / f"{sid}.json").read_text(encoding="utf-8")
    replayed = ClusterSession.from_json(raw)
    assert replayed.to_json() == ClusterSession.from_json(replayed.to_json()).to_json()
    assert replayed.to_json() == raw
    report(10, "100 racing ops preserved, replay byte-identical")


def test_criterion_11_shape_anchors(tmp_path):
    """11-year store yields 11 caches; planted 19-member group found at tau 0.55."""
    runner = CliRunner()
    raw = tmp_path / "raw11"
    store_dir = tmp_path / "store11"
    step = runner.invoke(cli_main, [
        "synth", "--stocks", "4", "--years", "11", "--communities", "2",
        "--seed", "9", "--out", str(raw), "--start-year", "2010",
    ])
    assert step.exit_code == 0, step.output
    step = runner.invoke(cli_main, [
        "ingest", "--prices", str(raw / "prices.csv"), "--out", str(store_dir),
    ])
    assert step.exit_code == 0, step.output
    step = runner.invoke(cli_main, ["corr", "--data", str(store_dir), "--all"])
    assert step.exit_code == 0, step.output
    files = sorted((store_dir / "caches").glob("corr_*.prc1"))
    assert len(files) == 11
    assert [f.name for f in files] == [f"corr_{y}.prc1" for y in range(2010, 2021)]
    listing = TestClient(create_app(store_dir)).get("/years").json()
    assert [entry["year"] for entry in listing] == list(range(2010, 2021))

    # planted 19-member group at threshold 0.55
    rng = np.random.default_rng(55)
    n_days = 250
    factor = rng.normal(0, 0.02, n_days)
    series = {}
    group = [f"P{i:03d}" for i in range(19)]
    for t in group:
        r = 0.8 * factor + 0.25 * rng.normal(0, 0.02, n_days)
        series[t] = make_series(t, datetime.date(2020, 1, 6), 50 * np.exp(np.cumsum(r)))
    for i in range(40):
        t = f"N{i:03d}"
        series[t] = make_series(t, datetime.date(2020, 1, 6), 50 * np.exp(np.cumsum(rng.normal(0, 0.02, n_days))))
    store = ingest.Store(series=series)
    cache = corrnet.build_yearly_cache(store, 2020)
    groups = corrnet.communities(cache, ThresholdConfig(0.55, 0.55))
    containing = next(c for c in groups if "P000" in c.members)
    assert containing.size == 19
    assert set(containing.members) == set(group)
    # seeding a session from a member of that community pulls in all 19
    sess = ClusterSession.create("acc11", cache, ["P000"], ThresholdConfig(0.55, 0.55))
    assert len(sess.members) == 19
    report(11, "11 cache files for 11 years; 19-member planted group reported at tau 0.55")
