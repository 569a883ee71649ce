"""HTTP endpoints as thin adapters: composition oracles against direct module calls."""

from __future__ import annotations

import datetime

import pytest
from fastapi.testclient import TestClient

from prismatic import corrnet, ingest, knowledge, mvclust, prism, synth
from prismatic.corrnet import ThresholdConfig
from prismatic.service import create_app


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    """A populated data directory: store, one cache, and a clustering result."""
    root = tmp_path_factory.mktemp("svc")
    market = synth.generate(stocks=40, years=1, communities=2, seed=13)
    store = ingest.build_store(market.prices_csv, market.metadata_json, benchmark=market.benchmark)
    store.write(root)
    cache = corrnet.build_yearly_cache(store, 2019)
    cache_dir = root / ingest.CACHE_DIR
    cache_dir.mkdir()
    cache.save(cache_dir / "corr_2019.prc1")

    net = knowledge.build_network(list(store.profiles.values()))
    companies = sorted(store.profiles)
    views = [mvclust.view_features(net, layer, companies) for layer in knowledge.Layer]
    result = mvclust.run_gmc(views, c=2, k_neighbors=8)
    (root / "gmc.json").write_text(result.to_json(), encoding="utf-8")
    return root


@pytest.fixture(scope="module")
def client(data_dir):
    return TestClient(create_app(data_dir))


@pytest.fixture(scope="module")
def store(data_dir):
    return ingest.Store.read(data_dir)


@pytest.fixture(scope="module")
def cache(data_dir):
    return corrnet.YearlyCorrelationCache.load(data_dir / ingest.CACHE_DIR / "corr_2019.prc1", 2019)


class TestYears:
    def test_lists_caches_with_counts(self, client, cache):
        body = client.get("/years").json()
        assert body == [{"year": 2019, "instrument_count": len(cache.instruments)}]


class TestDistribution:
    def test_benchmark_always_included(self, client, store):
        body = client.get("/years/2019/distribution").json()
        assert body["benchmark"]["subject"] == store.benchmark
        assert body["subjects"] == []

    def test_matches_module(self, client, cache):
        subject = cache.instruments[3]
        body = client.get(f"/years/2019/distribution?subjects={subject}").json()
        direct = corrnet.correlation_distribution(cache, subject)
        assert body["subjects"][0]["counts"] == list(direct.counts)

    def test_unknown_subject_404(self, client):
        response = client.get("/years/2019/distribution?subjects=NOPE")
        assert response.status_code == 404
        body = response.json()
        assert body["code"] == "UnknownInstrument"
        assert "message" in body and "details" in body

    def test_unknown_year_404(self, client):
        assert client.get("/years/1999/distribution").status_code == 404


class TestCommunities:
    def test_equals_direct_module_call(self, client, cache, store):
        response = client.get("/years/2019/communities?tau_s=0.35&tau_p=0.35").json()
        cfg = ThresholdConfig(0.35, 0.35)
        direct = corrnet.communities(
            cache,
            cfg,
            industries={t: p.industry for t, p in store.profiles.items()},
            exclude=frozenset({store.benchmark}),
        )
        got = [[m["ticker"] for m in c["members"]] for c in response["communities"]]
        assert got == [list(c.members) for c in direct]
        sizes = [c["size"] for c in response["communities"]]
        assert sizes == sorted(sizes, reverse=True)

    def test_knowledge_flag_definition(self, client, data_dir, cache):
        gmc = mvclust.GmcResult.load(data_dir / "gmc.json")
        selected = cache.instruments[0]
        response = client.get(
            f"/years/2019/communities?tau_s=0.35&tau_p=0.35&must={selected}"
        ).json()
        cluster = mvclust.knowledge_cluster_of(gmc, selected)
        for community in response["communities"]:
            for member in community["members"]:
                assert member["in_knowledge_cluster_of_selected"] == (member["ticker"] in cluster)


class TestKnowledgeEndpoints:
    def test_ego_mirrors_module(self, client, store):
        ticker = sorted(store.profiles)[0]
        body = client.get(f"/stocks/{ticker}/ego").json()
        net = knowledge.build_network(list(store.profiles.values()))
        direct = knowledge.ego_search(net, ticker)
        assert body["ego"] == ticker
        assert len(body["segments"]) == len(direct.segments)
        assert [n["ticker"] for n in body["neighbors"]] == [n.ticker for n in direct.neighbors]
        assert [n["ring"] for n in body["neighbors"]] == [n.ring for n in direct.neighbors]
        # per-layer widths sum to 1
        for layer in ("location", "human", "business"):
            widths = [s["width"] for s in body["segments"] if s["layer"] == layer]
            if widths:
                assert sum(widths) == pytest.approx(1.0, abs=1e-9)

    def test_ego_unknown_404(self, client):
        assert client.get("/stocks/NOPE/ego").status_code == 404

    def test_item_companies(self, client, store):
        profile = store.profiles[sorted(store.profiles)[0]]
        body = client.get(
            f"/knowledge/items/location/province/{profile.province}/companies"
        ).json()
        net = knowledge.build_network(list(store.profiles.values()))
        item = knowledge.KnowledgeItem(
            knowledge.Layer.LOCATION, knowledge.Attribute.PROVINCE, profile.province
        )
        assert body["companies"] == knowledge.companies_with_item(net, item)

    def test_unknown_item_is_empty(self, client):
        body = client.get("/knowledge/items/location/province/Atlantis/companies").json()
        assert body["companies"] == []


def create_session(client, cache, seeds=None, tau=0.35):
    seeds = seeds or [cache.instruments[0]]
    response = client.post(
        "/sessions",
        json={"year": 2019, "seeds": seeds, "config": {"tau_spearman": tau, "tau_pearson": tau}},
    )
    assert response.status_code == 200, response.text
    return response.json()


class TestSessions:
    def test_create_and_reload(self, client, cache):
        state = create_session(client, cache)
        body = client.get(f"/sessions/{state['id']}").json()
        assert body["state"]["members"] == state["members"]
        assert body["log"][0]["op"] == "create"

    def test_ops_and_idempotency(self, client, cache, store):
        state = create_session(client, cache)
        sid = state["id"]
        outsider = next(
            t for t in store.instruments
            if t != store.benchmark and t not in {m["ticker"] for m in state["members"]}
        )
        first = client.post(
            f"/sessions/{sid}/ops", json={"op": "add", "ticker": outsider, "event_id": "e1"}
        ).json()
        assert first["applied"] is True
        second = client.post(
            f"/sessions/{sid}/ops", json={"op": "add", "ticker": outsider, "event_id": "e1"}
        ).json()
        assert second["applied"] is False
        tickers = [m["ticker"] for m in second["state"]["members"]]
        assert tickers.count(outsider) == 1

    def test_duplicate_add_conflict(self, client, cache):
        state = create_session(client, cache)
        member = state["members"][0]["ticker"]
        response = client.post(f"/sessions/{state['id']}/ops", json={"op": "add", "ticker": member})
        assert response.status_code == 409
        assert response.json()["code"] == "DuplicateMember"

    def test_pin_flow(self, client, cache, store):
        state = create_session(client, cache)
        profile = store.profiles[state["members"][0]["ticker"]]
        item = {"layer": "business", "attribute": "industry", "value": profile.industry}
        ok = client.post(f"/sessions/{state['id']}/ops", json={"op": "pin", "item": item})
        assert ok.status_code == 200
        upset = client.get(f"/sessions/{state['id']}/upset").json()
        assert len(upset["items"]) == 1
        net = knowledge.build_network(list(store.profiles.values()))
        k_item = knowledge.KnowledgeItem(
            knowledge.Layer.BUSINESS, knowledge.Attribute.INDUSTRY, profile.industry
        )
        for member, row in zip(upset["members"], upset["membership"]):
            assert row[0] == (member in net.holders_of.get(k_item, frozenset()))

    def test_matrix_permutation_valid(self, client, cache):
        state = create_session(client, cache)
        body = client.get(f"/sessions/{state['id']}/matrix").json()
        m = len(body["members"])
        assert sorted(body["permutation"]) == list(range(m))
        assert len(body["price_upper"]) == m * (m - 1) // 2
        assert len(body["volume_lower"]) == m * (m - 1) // 2
        assert len(body["market_diag"]) == m

    def test_returns_endpoint(self, client, cache):
        state = create_session(client, cache)
        body = client.get(f"/sessions/{state['id']}/returns").json()
        assert set(body["returns"]) == {m["ticker"] for m in state["members"]}

    def test_session_not_found(self, client):
        assert client.get("/sessions/nope").status_code == 404
        assert client.get("/sessions/nope/matrix").status_code == 404

    def test_reorder_round_trip(self, client, cache):
        state = create_session(client, cache)
        members = [m["ticker"] for m in state["members"]]
        order = list(reversed(members))
        ok = client.post(f"/sessions/{state['id']}/ops", json={"op": "reorder", "order": order})
        assert ok.status_code == 200
        matrix = client.get(f"/sessions/{state['id']}/matrix").json()
        assert matrix["members"] == order

    def test_persisted_across_app_instances(self, client, cache, data_dir):
        state = create_session(client, cache)
        fresh = TestClient(create_app(data_dir))
        body = fresh.get(f"/sessions/{state['id']}").json()
        assert body["state"]["id"] == state["id"]


class TestPrismEndpoints:
    def test_payload_shape_and_tip(self, client, cache, store):
        a, b = cache.instruments[0], cache.instruments[1]
        body = client.get(
            f"/prism?a={a}&b={b}&from=2019-01-01&to=2019-12-31&min_window=5"
        ).json()
        n = body["n"]
        assert len(body["values"]) == n * (n + 1) // 2
        assert body["tip"] == body["full_corr"]
        assert body["tip"] == body["values"][0]
        direct = prism.pair_triangle(
            store, a, b, datetime.date(2019, 1, 1), datetime.date(2019, 12, 31), 5
        )
        assert body["tip"] == pytest.approx(direct.tip, abs=1e-12)

    def test_self_pair_all_ones(self, client, cache):
        a = cache.instruments[0]
        body = client.get(f"/prism?a={a}&b={a}&from=2019-01-01&to=2019-06-30").json()
        defined = [v for v in body["values"] if v is not None]
        assert defined and all(v == pytest.approx(1.0, abs=1e-9) for v in defined)

    def test_refs_endpoint(self, client, cache):
        stock, other = cache.instruments[0], cache.instruments[1]
        body = client.get(
            f"/prism/refs?stock={stock}&other={other}&from=2019-01-01&to=2019-12-31"
        ).json()
        assert set(body) == {"market", "industry", "pair"}
        assert body["pair"]["b"] == other

    def test_too_short_range(self, client, cache):
        a, b = cache.instruments[0], cache.instruments[1]
        response = client.get(f"/prism?a={a}&b={b}&from=2019-01-01&to=2019-01-02")
        assert response.status_code == 422
        assert response.json()["code"] == "SeriesTooShort"
