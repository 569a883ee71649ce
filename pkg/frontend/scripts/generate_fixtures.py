"""Regenerate the shared conformance fixtures from the primary implementation.

Run from the repo root with the package installed:

    python frontend/scripts/generate_fixtures.py
"""

from __future__ import annotations

import json
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from prismatic import corrnet, ingest, prism, synth
from prismatic.service import create_app

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def indexing_fixture(n: int) -> dict:
    xs, ys = prism.index_to_cell_array(n)
    return {"n": n, "cells": [[int(x), int(y)] for x, y in zip(xs, ys)]}


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    for n in (4, 250):
        path = FIXTURES / f"indexing_n{n}.json"
        path.write_text(json.dumps(indexing_fixture(n)) + "\n", encoding="utf-8")
        print(path)

    # one deterministic service round: session + matrix + prism payloads
    market = synth.generate(stocks=24, years=1, communities=2, seed=2024)
    with tempfile.TemporaryDirectory() as tmp:
        data_dir = Path(tmp)
        store = ingest.build_store(
            market.prices_csv, market.metadata_json, benchmark=market.benchmark
        )
        store.write(data_dir)
        cache = corrnet.build_yearly_cache(store, 2019)
        (data_dir / ingest.CACHE_DIR).mkdir()
        cache.save(data_dir / ingest.CACHE_DIR / "corr_2019.prc1")
        client = TestClient(create_app(data_dir))

        created = client.post(
            "/sessions",
            json={
                "year": 2019,
                "seeds": ["600000"],
                "config": {"tau_spearman": 0.35, "tau_pearson": 0.35},
            },
        ).json()
        matrix = client.get(f"/sessions/{created['id']}/matrix").json()
        (FIXTURES / "matrix_payload.json").write_text(
            json.dumps(matrix, indent=1) + "\n", encoding="utf-8"
        )
        print(FIXTURES / "matrix_payload.json")

        prism_payload = client.get(
            "/prism?a=600000&b=600001&from=2019-02-01&to=2019-04-30&min_window=5"
        ).json()
        (FIXTURES / "prism_payload.json").write_text(
            json.dumps(prism_payload, indent=1) + "\n", encoding="utf-8"
        )
        print(FIXTURES / "prism_payload.json")

        session_members = [m["ticker"] for m in created["members"]]
        extras = [t for t in store.instruments if t not in session_members and t != store.benchmark]
        (FIXTURES / "session_seed.json").write_text(
            json.dumps(
                {
                    "year": 2019,
                    "members": created["members"],
                    "available": extras,
                    "pinnable_item": {
                        "layer": "business",
                        "attribute": "industry",
                        "value": store.profiles["600000"].industry,
                    },
                },
                indent=1,
            )
            + "\n",
            encoding="utf-8",
        )
        print(FIXTURES / "session_seed.json")


if __name__ == "__main__":
    main()
