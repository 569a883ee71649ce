"""Graph-based multi-view clustering over the knowledge layers.

Each layer yields a learned row-stochastic similarity graph (adaptive
nearest-neighbor weights with a closed-form simplex solution).  The graphs
are fused into a unified graph under agreement-based view weights and a
connected-component count constraint enforced through an adaptive spectral
penalty; the unified graph is propagated back to refine each view's graph.
Clusters are the connected components of the converged unified graph.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components as _sparse_components

from .errors import DegenerateView, InvalidArgument, NumericalFailure, UnknownInstrument
from .knowledge import Layer, MultiLayerNetwork

DEFAULT_K_NEIGHBORS = 15
DEFAULT_MAX_ITER = 50

_EPS = 1e-12
_LAMBDA_MIN = 1e-8
_LAMBDA_MAX = 1e12


@dataclass(frozen=True, eq=False)
class ViewFeatures:
    """Binary incidence of companies (rows) versus one layer's attribute values."""

    view: Layer
    rows: tuple[str, ...]
    columns: tuple[str, ...]
    matrix: np.ndarray


def view_features(net: MultiLayerNetwork, layer: Layer, companies: Sequence[str]) -> ViewFeatures:
    items = net.items_in_layer(layer)
    if not items:
        raise DegenerateView(f"layer {layer.value} has no attribute values")
    col_index = {item: j for j, item in enumerate(items)}
    matrix = np.zeros((len(companies), len(items)))
    for i, company in enumerate(companies):
        for item in net.items_of.get(company, frozenset()):
            j = col_index.get(item)
            if j is not None:
                matrix[i, j] = 1.0
    return ViewFeatures(
        view=layer,
        rows=tuple(companies),
        columns=tuple(f"{item.attribute.value}:{item.value_key}" for item in items),
        matrix=matrix,
    )


@dataclass(frozen=True, eq=False)
class SigMatrix:
    """Learned per-view similarity graph: row-stochastic, zero diagonal, <= k nonzeros per row."""

    view: Layer
    S: np.ndarray
    k_neighbors: int


def _pairwise_sq_dists(X: np.ndarray) -> np.ndarray:
    norms = (X * X).sum(axis=1)
    D = norms[:, None] + norms[None, :] - 2.0 * (X @ X.T)
    np.maximum(D, 0.0, out=D)
    np.fill_diagonal(D, 0.0)
    return D


def _ticker_rank_perm(rows: Sequence[str]) -> np.ndarray:
    """Column order by ticker so distance ties break identically under any row permutation."""
    return np.array(sorted(range(len(rows)), key=lambda i: rows[i]), dtype=np.int64)


def _solve_neighbor_rows(D: np.ndarray, k: int, perm: np.ndarray) -> np.ndarray:
    """Closed-form adaptive-neighbor weights per row over the k nearest candidates.

       minimize_s  sum_j d_ij s_j + gamma_i sum_j s_j^2   s.t.  s on the simplex, s_i = 0

    with gamma_i picked so exactly the k smallest-distance entries stay
    positive: s_j = (d_(k+1) - d_j) / (k d_(k+1) - sum_h<=k d_(h)).  Fully
    tied neighborhoods fall back to uniform 1/k.
    """
    n = D.shape[0]
    if not 2 <= k <= n - 1:
        raise InvalidArgument(f"k_neighbors must be in [2, {n - 1}], got {k}")
    work = D.copy()
    np.fill_diagonal(work, np.inf)
    ordered = work[:, perm]
    order = np.argsort(ordered, axis=1, kind="stable")
    top = order[:, :k]
    d_top = np.take_along_axis(ordered, top, axis=1)
    if k < n - 1:
        dk1 = np.take_along_axis(ordered, order[:, k : k + 1], axis=1)
    else:
        # no (k+1)-th candidate: the farthest kept neighbor gets weight zero
        dk1 = d_top[:, -1:].copy()
    denom = k * dk1 - d_top.sum(axis=1, keepdims=True)
    degenerate = denom <= _EPS * np.maximum(1.0, np.abs(dk1) * k)
    weights = np.where(degenerate, 1.0 / k, (dk1 - d_top) / np.where(degenerate, 1.0, denom))
    np.maximum(weights, 0.0, out=weights)
    weights /= weights.sum(axis=1, keepdims=True)
    S = np.zeros_like(D)
    np.put_along_axis(S, perm[top], weights, axis=1)
    return S


def init_sig(view: ViewFeatures, k_neighbors: int = DEFAULT_K_NEIGHBORS) -> SigMatrix:
    """Learn the initial similarity graph from squared Euclidean row distances."""
    X = view.matrix
    if np.all(X == X[0]):
        raise DegenerateView(f"view {view.view.value}: all rows identical")
    D = _pairwise_sq_dists(X)
    S = _solve_neighbor_rows(D, k_neighbors, _ticker_rank_perm(view.rows))
    return SigMatrix(view=view.view, S=S, k_neighbors=k_neighbors)


def _project_rows_to_simplex(Q: np.ndarray) -> np.ndarray:
    """Project each row of Q (diagonal excluded, forced to zero) onto the simplex."""
    n = Q.shape[0]
    mask = ~np.eye(n, dtype=bool)
    rows = Q[mask].reshape(n, n - 1)
    sorted_rows = np.sort(rows, axis=1)[:, ::-1]
    cumulative = np.cumsum(sorted_rows, axis=1)
    ranks = np.arange(1, n)
    positive = sorted_rows - (cumulative - 1.0) / ranks > 0
    rho = positive.sum(axis=1)
    theta = (cumulative[np.arange(n), rho - 1] - 1.0) / rho
    projected = np.maximum(rows - theta[:, None], 0.0)
    out = np.zeros_like(Q)
    out[mask] = projected.ravel()
    return out


def _symmetrize(U: np.ndarray) -> np.ndarray:
    return 0.5 * (U + U.T)


def _component_labels(A: np.ndarray) -> tuple[int, np.ndarray]:
    count, labels = _sparse_components(csr_matrix(A > 0), directed=False)
    return int(count), labels


def _spectral_embedding(A: np.ndarray, c: int) -> np.ndarray:
    """The c smallest Laplacian eigenvectors, sign-fixed for determinism."""
    laplacian = np.diag(A.sum(axis=1)) - A
    try:
        _, vectors = np.linalg.eigh(laplacian)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigendecomposition failed: {exc}") from exc
    F = vectors[:, :c].copy()
    for col in range(F.shape[1]):
        peak = np.argmax(np.abs(F[:, col]))
        if F[peak, col] < 0:
            F[:, col] = -F[:, col]
    return F


@dataclass(frozen=True, eq=False)
class GmcState:
    """One iteration's worth of fusion state."""

    tickers: tuple[str, ...]
    sigs: tuple[SigMatrix, ...]
    weights: np.ndarray
    unified: np.ndarray
    embedding: np.ndarray
    lam: float
    c: int
    view_dists: tuple[np.ndarray, ...]
    tie_perm: np.ndarray


def initial_state(views: Sequence[ViewFeatures], c: int, k_neighbors: int = DEFAULT_K_NEIGHBORS) -> GmcState:
    if not views:
        raise InvalidArgument("at least one view is required")
    rows = views[0].rows
    n = len(rows)
    for view in views[1:]:
        if view.rows != rows:
            raise InvalidArgument("all views must share the same company order")
    if not 2 <= c <= n - 1:
        raise InvalidArgument(f"cluster count must be in [2, {n - 1}], got {c}")
    k = min(max(k_neighbors, 2), n - 1)
    sigs = tuple(init_sig(view, k) for view in views)
    unified = np.mean([sig.S for sig in sigs], axis=0)
    return GmcState(
        tickers=rows,
        sigs=sigs,
        weights=np.full(len(sigs), 1.0 / len(sigs)),
        unified=unified,
        embedding=_spectral_embedding(_symmetrize(unified), c),
        lam=1.0,
        c=c,
        view_dists=tuple(_pairwise_sq_dists(view.matrix) for view in views),
        tie_perm=_ticker_rank_perm(rows),
    )


def fuse_step(state: GmcState) -> GmcState:
    """One fusion round: unified-graph update, view reweighting, back-propagation,
    embedding refresh, and component-count-driven penalty adaptation."""
    weights = state.weights
    average = np.tensordot(weights / weights.sum(), np.stack([s.S for s in state.sigs]), axes=1)
    F = state.embedding
    embed_dists = _pairwise_sq_dists(F)
    unified = _project_rows_to_simplex(average - 0.5 * state.lam * embed_dists)

    gaps = np.array([max(float(np.linalg.norm(unified - sig.S)), _EPS) for sig in state.sigs])
    new_weights = 1.0 / (2.0 * gaps)

    refined = []
    for sig, dists, w in zip(state.sigs, state.view_dists, new_weights):
        attracted = dists - 2.0 * w * unified
        refined.append(replace(sig, S=_solve_neighbor_rows(attracted, sig.k_neighbors, state.tie_perm)))

    symmetric = _symmetrize(unified)
    embedding = _spectral_embedding(symmetric, state.c)

    count, _ = _component_labels(symmetric)
    lam = state.lam
    # Too many components means the graph was cut too aggressively; relax the
    # penalty.  Too few means push harder.  (The component count increases
    # with the penalty, so this is the direction that actually converges.)
    if count > state.c:
        lam = max(lam / 2.0, _LAMBDA_MIN)
    elif count < state.c:
        lam = min(lam * 2.0, _LAMBDA_MAX)

    return replace(
        state,
        sigs=tuple(refined),
        weights=new_weights,
        unified=unified,
        embedding=embedding,
        lam=lam,
    )


@dataclass(frozen=True)
class GmcResult:
    assignment: dict[str, int]
    weights: dict[str, float]
    iterations: int
    converged: bool
    c: int

    def members_of(self, cluster_id: int) -> set[str]:
        return {t for t, cid in self.assignment.items() if cid == cluster_id}

    def to_json(self) -> str:
        payload = {
            "c": self.c,
            "weights": self.weights,
            "assignment": self.assignment,
            "iterations": self.iterations,
            "converged": self.converged,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "GmcResult":
        payload = json.loads(text)
        return cls(
            assignment={str(t): int(v) for t, v in payload["assignment"].items()},
            weights={str(k): float(v) for k, v in payload["weights"].items()},
            iterations=int(payload["iterations"]),
            converged=bool(payload["converged"]),
            c=int(payload["c"]),
        )

    @classmethod
    def load(cls, path: str | Path) -> "GmcResult":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def _canonical_partition(labels: np.ndarray) -> tuple[int, ...]:
    seen: dict[int, int] = {}
    out = []
    for label in labels:
        out.append(seen.setdefault(int(label), len(seen)))
    return tuple(out)


def _split_to_count(A: np.ndarray, c: int) -> np.ndarray:
    """Split clusters by deleting their weakest internal edges until c remain."""
    work = A.copy()
    count, labels = _component_labels(work)
    while count < c:
        sizes = np.bincount(labels)
        target = int(np.flatnonzero(sizes == sizes.max())[0])
        members = np.flatnonzero(labels == target)
        sub = work[np.ix_(members, members)]
        iu, ju = np.triu_indices(len(members), k=1)
        present = sub[iu, ju] > 0
        edge_order = np.lexsort((ju[present], iu[present], sub[iu, ju][present]))
        for e in edge_order:
            a, b = members[iu[present][e]], members[ju[present][e]]
            work[a, b] = work[b, a] = 0.0
            sub_count, _ = _component_labels(work[np.ix_(members, members)])
            if sub_count > 1:
                break
        count, labels = _component_labels(work)
    return labels


def _merge_to_count(A: np.ndarray, labels: np.ndarray, c: int, affinity: np.ndarray) -> np.ndarray:
    """Merge the most-affine cluster pairs until only c remain."""
    labels = labels.copy()
    sym_aff = _symmetrize(affinity)
    while len(np.unique(labels)) > c:
        ids = np.unique(labels)
        best = None
        for ai in range(len(ids)):
            for bi in range(ai + 1, len(ids)):
                ma = labels == ids[ai]
                mb = labels == ids[bi]
                score = float(sym_aff[np.ix_(ma, mb)].mean())
                key = (-score, ids[ai], ids[bi])
                if best is None or key < best[0]:
                    best = (key, ids[ai], ids[bi])
        assert best is not None
        _, keep, fold = best
        labels[labels == fold] = keep
    return labels


def run_gmc(
    views: Sequence[ViewFeatures],
    c: int,
    k_neighbors: int = DEFAULT_K_NEIGHBORS,
    max_iter: int = DEFAULT_MAX_ITER,
) -> GmcResult:
    """Iterate fusion until the unified graph has exactly c components and the
    assignment is stable for two consecutive iterations; repair at cutoff.

    Non-convergence is not an error: the best-effort result is flagged.
    """
    state = initial_state(views, c, k_neighbors)
    previous: tuple[int, tuple[int, ...]] | None = None
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        state = fuse_step(state)
        count, labels = _component_labels(_symmetrize(state.unified))
        current = (count, _canonical_partition(labels))
        if count == c and previous == current:
            converged = True
            break
        previous = current

    symmetric = _symmetrize(state.unified)
    count, labels = _component_labels(symmetric)
    if count < c:
        labels = _split_to_count(symmetric, c)
    elif count > c:
        weights = state.weights / state.weights.sum()
        affinity = np.tensordot(weights, np.stack([s.S for s in state.sigs]), axes=1)
        labels = _merge_to_count(symmetric, labels, c, affinity)

    # deterministic ids: by size descending, then first member position
    order: dict[int, tuple[int, int]] = {}
    for raw in np.unique(labels):
        members = np.flatnonzero(labels == raw)
        order[int(raw)] = (-len(members), int(members[0]))
    relabel = {raw: new for new, raw in enumerate(sorted(order, key=order.__getitem__))}

    assignment = {t: relabel[int(labels[i])] for i, t in enumerate(state.tickers)}
    weight_map = {
        sig.view.value: float(w) for sig, w in zip(state.sigs, state.weights)
    }
    return GmcResult(
        assignment=assignment,
        weights=weight_map,
        iterations=iterations,
        converged=converged,
        c=c,
    )


def knowledge_cluster_of(result: GmcResult, stock: str) -> set[str]:
    """All members of the stock's knowledge-driven cluster, itself included."""
    if stock not in result.assignment:
        raise UnknownInstrument(f"{stock!r} not in clustering result")
    return result.members_of(result.assignment[stock])
