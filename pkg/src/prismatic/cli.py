"""Batch driver: ingestion, cache building, clustering runs, prism exports,
synthetic data generation, and serving."""

from __future__ import annotations

import datetime
import functools
import sys
from pathlib import Path

import click

from . import corrnet, mvclust, prism, synth
from .errors import EmptyYear, InvalidArgument, PrismaticError
from .ingest import CACHE_DIR, Store, build_store
from .knowledge import Layer, build_network


def _fail(exc: PrismaticError) -> None:
    click.echo(f"error: {exc.code}: {exc.message}", err=True)
    sys.exit(1)


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except PrismaticError as exc:
            _fail(exc)

    return wrapper


class DateParam(click.ParamType):
    name = "date"

    def convert(self, value, param, ctx):
        try:
            return datetime.date.fromisoformat(value)
        except ValueError:
            self.fail(f"{value!r} is not an ISO date", param, ctx)


DATE = DateParam()


@click.group()
def main() -> None:
    """Financial cluster-analysis toolkit."""


@main.command()
@click.option("--prices", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--meta", type=click.Path(exists=True, path_type=Path))
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.option("--benchmark", default=None, help="reserved ticker carrying the market index")
@click.option("--basis", type=click.Choice(["returns", "levels"]), default="returns")
@handle_errors
def ingest(prices: Path, meta: Path | None, out: Path, benchmark: str | None, basis: str) -> None:
    """Parse raw prices/metadata and write the normalized store."""
    store = build_store(
        prices.read_bytes(),
        meta.read_bytes() if meta else None,
        benchmark=benchmark,
        basis=basis,
    )
    store.write(out)
    click.echo(f"store written to {out} ({len(store.series)} instruments)")


@main.command()
@click.option("--data", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--year", "year_", type=int, default=None)
@click.option("--all", "all_", is_flag=True, help="build caches for every year in the store")
@click.option("--min-overlap", type=int, default=corrnet.DEFAULT_MIN_OVERLAP)
@handle_errors
def corr(data: Path, year_: int | None, all_: bool, min_overlap: int) -> None:
    """Build yearly correlation caches."""
    store = Store.read(data)
    if year_ is None and not all_:
        raise InvalidArgument("pass --year Y or --all")
    years = [year_] if year_ is not None else store.years()
    if not years:
        raise EmptyYear("store has no usable years")
    cache_dir = data / CACHE_DIR
    cache_dir.mkdir(parents=True, exist_ok=True)
    for year in years:
        cache = corrnet.build_yearly_cache(store, year, min_overlap=min_overlap)
        path = cache_dir / f"corr_{year}.prc1"
        cache.save(path)
        click.echo(f"{path} ({len(cache.instruments)} instruments)")


@main.command()
@click.option("--data", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--clusters", "clusters_", required=True, type=int)
@click.option("--k", type=int, default=mvclust.DEFAULT_K_NEIGHBORS)
@click.option("--max-iter", type=int, default=mvclust.DEFAULT_MAX_ITER)
@click.option("--out", type=click.Path(path_type=Path), default=None)
@handle_errors
def gmc(data: Path, clusters_: int, k: int, max_iter: int, out: Path | None) -> None:
    """Run multi-view clustering over the knowledge layers."""
    store = Store.read(data)
    if not store.profiles:
        raise InvalidArgument("store has no company metadata")
    net = build_network(list(store.profiles.values()))
    companies = sorted(store.profiles)
    views = [mvclust.view_features(net, layer, companies) for layer in Layer]
    result = mvclust.run_gmc(views, c=clusters_, k_neighbors=k, max_iter=max_iter)
    path = out or data / "gmc.json"
    Path(path).write_text(result.to_json(), encoding="utf-8")
    status = "converged" if result.converged else "best-effort"
    click.echo(f"{path} ({status} after {result.iterations} iterations)")


@main.command(name="prism")
@click.option("--data", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--a", "a_", required=True)
@click.option("--b", "b_", required=True)
@click.option("--from", "from_", required=True, type=DATE)
@click.option("--to", "to_", required=True, type=DATE)
@click.option("--min-window", type=int, default=prism.DEFAULT_MIN_WINDOW)
@click.option("--format", "format_", type=click.Choice(["csv", "bin"]), default="csv")
@click.option("--out", type=click.Path(path_type=Path), default=None)
@handle_errors
def prism_cmd(
    data: Path,
    a_: str,
    b_: str,
    from_: datetime.date,
    to_: datetime.date,
    min_window: int,
    format_: str,
    out: Path | None,
) -> None:
    """Export the all-subinterval correlation triangle for a pair."""
    store = Store.read(data)
    triangle = prism.pair_triangle(store, a_, b_, from_, to_, min_window)
    if format_ == "csv":
        text = prism.triangle_to_csv(triangle)
        if out is None:
            click.echo(text, nl=False)
        else:
            out.write_text(text, encoding="utf-8")
            click.echo(f"{out} ({triangle.values.size} cells)")
    else:
        if out is None:
            raise InvalidArgument("binary export needs --out")
        prism.write_triangle(triangle, out)
        click.echo(f"{out} ({triangle.values.size} cells)")


@main.command(name="synth")
@click.option("--stocks", required=True, type=int)
@click.option("--years", "years_", required=True, type=int)
@click.option("--communities", "communities_", required=True, type=int)
@click.option("--seed", required=True, type=int)
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.option("--agreement", type=float, default=0.8)
@click.option("--loading", type=float, default=0.7)
@click.option("--start-year", type=int, default=synth.DEFAULT_START_YEAR)
@handle_errors
def synth_cmd(
    stocks: int,
    years_: int,
    communities_: int,
    seed: int,
    out: Path,
    agreement: float,
    loading: float,
    start_year: int,
) -> None:
    """Generate a reproducible synthetic market with planted communities."""
    market = synth.generate(
        stocks=stocks,
        years=years_,
        communities=communities_,
        seed=seed,
        agreement=agreement,
        loading=loading,
        start_year=start_year,
    )
    synth.write_market(market, out)
    click.echo(f"{out} ({stocks} stocks, benchmark {market.benchmark})")


@main.command()
@click.option("--data", required=True, envvar="PRISMATIC_DATA", type=click.Path(exists=True, path_type=Path))
@click.option("--port", type=int, default=8400, envvar="PRISMATIC_PORT")
@click.option("--host", default="127.0.0.1")
@click.option("--benchmark", default=None, envvar="PRISMATIC_BENCHMARK")
@handle_errors
def serve(data: Path, port: int, host: str, benchmark: str | None) -> None:
    """Serve the HTTP API."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(data, benchmark=benchmark), host=host, port=port)


if __name__ == "__main__":
    main()
