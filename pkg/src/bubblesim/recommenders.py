"""Pluggable recommenders: random, popularity, item-kNN, BPR-MF and a
simplified graph-propagation model, plus the page randomization wrapper.

Every model is refit from scratch on each call to :func:`fit`; all randomness
flows from ``RecommenderSpec.seed`` so fit/recommend are pure functions of
their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numba
import numpy as np
import scipy.sparse as sp

from .catalog import Catalog, InteractionLog
from .seeding import derive_seed

KINDS = ("random", "popularity", "item_knn", "bpr_mf", "graph_prop")

DEFAULT_HYPERPARAMETERS = {
    "latent_dim": 32,
    "learning_rate": 0.05,
    "regularization": 0.01,
    "epochs": 30,
    "neighbors": 50,
    "propagation_layers": 2,
}
_INTEGER_PARAMS = {"latent_dim", "epochs", "neighbors", "propagation_layers"}


class CatalogExhausted(RuntimeError):
    """No candidate item remains for a user after exclusion."""

    def __init__(self, user_id, round_=None):
        self.user_id = user_id
        self.round = round_
        where = f" at round {round_}" if round_ is not None else ""
        super().__init__(f"catalog exhausted for user {user_id!r}{where}")


@dataclass(frozen=True)
class RecommenderSpec:
    kind: str
    hyperparameters: Mapping[str, float] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown recommender kind {self.kind!r}; expected one of {KINDS}")
        unknown = set(self.hyperparameters) - set(DEFAULT_HYPERPARAMETERS)
        if unknown:
            raise ValueError(f"unknown hyperparameters {sorted(unknown)}")
        hp = dict(DEFAULT_HYPERPARAMETERS)
        hp.update(self.hyperparameters)
        for name, value in hp.items():
            if name in _INTEGER_PARAMS:
                if int(value) != value:
                    raise ValueError(f"{name} must be an integer, got {value}")
                value = int(value)
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")
            hp[name] = value
        if not 1 <= hp["propagation_layers"] <= 4:
            raise ValueError("propagation_layers must lie in [1, 4]")
        object.__setattr__(self, "hyperparameters", hp)

    def __getitem__(self, name):
        return self.hyperparameters[name]

    def with_seed(self, seed: int) -> "RecommenderSpec":
        return replace(self, seed=int(seed))


@dataclass(frozen=True)
class RankedPage:
    user_id: object
    round: int
    items: tuple
    scores: tuple
    replaced: int = 0

    def __len__(self):
        return len(self.items)


@dataclass(frozen=True, eq=False)
class FittedModel:
    spec: RecommenderSpec
    fit_round: int
    item_ids: np.ndarray
    item_index: Mapping
    user_rows: Mapping
    user_items: Mapping
    counts: np.ndarray
    user_factors: np.ndarray | None = None
    item_factors: np.ndarray | None = None
    similarity: np.ndarray | None = None

    @property
    def kind(self) -> str:
        return self.spec.kind

    def scores(self, user_id) -> np.ndarray:
        """Score vector over ``item_ids`` for one user (higher is better)."""
        kind = self.spec.kind
        if kind == "random":
            return np.random.default_rng(derive_seed(self.spec.seed, user_id, self.fit_round)).random(len(self.item_ids))
        row = self.user_rows.get(user_id)
        if kind == "popularity" or row is None:
            return self.counts.astype(float)
        if kind == "item_knn":
            idx = self.user_items[user_id]
            return self.similarity[:, idx].sum(axis=1)
        s = self.item_factors @ self.user_factors[row]
        untrained = self.counts == 0
        if untrained.any() and not untrained.all():
            # items absent from the training log drop below every trained item
            s[untrained] = s[~untrained].min() - 1.0
        return s


def _index_log(log: InteractionLog, catalog: Catalog):
    item_ids = np.array(catalog.sorted_item_ids(), dtype=object)
    item_index = {i: k for k, i in enumerate(item_ids)}
    users = log.users()
    user_rows = {u: r for r, u in enumerate(users)}
    rows = np.fromiter((user_rows[e.user_id] for e in log), dtype=np.int64, count=len(log))
    cols = np.fromiter((item_index[e.item_id] for e in log), dtype=np.int64, count=len(log))
    return item_ids, item_index, user_rows, rows, cols


# --- BPR-MF -------------------------------------------------------------------


@numba.njit(cache=True)
def _softplus(x):
    if x > 0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


@numba.njit(cache=True)
def _triple_grad(pu, qi, qj, reg):
    """Loss and gradients of -ln sigmoid(pu.(qi - qj)) + reg/2 * (|pu|^2 + |qi|^2 + |qj|^2)."""
    diff = qi - qj
    x = np.dot(pu, diff)
    # d/dx of softplus(-x) is -sigmoid(-x)
    g = -1.0 / (1.0 + math.exp(x)) if x > -700 else -1.0
    loss = _softplus(-x) + 0.5 * reg * (np.dot(pu, pu) + np.dot(qi, qi) + np.dot(qj, qj))
    return loss, g * diff + reg * pu, g * pu + reg * qi, -g * pu + reg * qj


@numba.njit(cache=True)
def _sgd_epoch(P, Q, users, pos, neg, lr, reg):
    for n in range(users.shape[0]):
        u, i, j = users[n], pos[n], neg[n]
        _, gu, gi, gj = _triple_grad(P[u].copy(), Q[i].copy(), Q[j].copy(), reg)
        P[u] -= lr * gu
        Q[i] -= lr * gi
        Q[j] -= lr * gj


def bpr_triple_grad(pu, qi, qj, reg: float = 0.0):
    """Python entry point for the kernel gradient: ``(loss, d_pu, d_qi, d_qj)``."""
    f = lambda a: np.ascontiguousarray(a, dtype=np.float64)
    return _triple_grad(f(pu), f(qi), f(qj), float(reg))


def bpr_loss(user_factors, item_factors, triples) -> float:
    """Summed BPR loss -sum ln sigmoid(x_ui - x_uj) over ``(u, i, j)`` index triples."""
    t = np.asarray(triples)
    p = user_factors[t[:, 0]]
    x = np.einsum("nd,nd->n", p, item_factors[t[:, 1]] - item_factors[t[:, 2]])
    return float(np.logaddexp(0.0, -x).sum())


def sample_negatives(gen: np.random.Generator, users: np.ndarray, seen: np.ndarray) -> np.ndarray:
    """One uniform non-interacted item per entry of ``users`` (rejection sampling)."""
    n_items = seen.shape[1]
    neg = gen.integers(0, n_items, size=len(users))
    bad = seen[users, neg]
    while bad.any():
        neg[bad] = gen.integers(0, n_items, size=int(bad.sum()))
        bad = seen[users, neg]
    return neg


def train_bpr(rows, cols, n_users, n_items, spec: RecommenderSpec, trace_triples=None):
    """BPR-SGD from a seeded normal(0, 0.01) start.

    Returns ``(P, Q)``; with ``trace_triples`` also returns the loss on those
    triples before and after training.
    """
    gen = np.random.default_rng(derive_seed(spec.seed, "bpr_mf"))
    d = spec["latent_dim"]
    P = gen.normal(0.0, 0.01, size=(n_users, d))
    Q = gen.normal(0.0, 0.01, size=(n_items, d))
    seen = np.zeros((n_users, n_items), dtype=bool)
    seen[rows, cols] = True
    ok = seen.sum(axis=1)[rows] < n_items  # users who saw everything have no negatives
    rows, cols = rows[ok], cols[ok]
    before = bpr_loss(P, Q, trace_triples) if trace_triples is not None else None
    lr, reg = float(spec["learning_rate"]), float(spec["regularization"])
    for _ in range(spec["epochs"]):
        order = gen.permutation(len(rows))
        u, i = rows[order], cols[order]
        j = sample_negatives(gen, u, seen)
        _sgd_epoch(P, Q, u, i, j, lr, reg)
    if trace_triples is not None:
        return P, Q, (before, bpr_loss(P, Q, trace_triples))
    return P, Q


# --- graph propagation -------------------------------------------------------


def normalized_adjacency(rows, cols, n_users, n_items) -> sp.csr_matrix:
    """User-item block of D^-1/2 A D^-1/2 for the bipartite interaction graph."""
    R = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n_users, n_items))
    R.data[:] = 1.0  # collapse duplicates
    du = np.asarray(R.sum(axis=1)).ravel()
    di = np.asarray(R.sum(axis=0)).ravel()
    inv_u = np.divide(1.0, np.sqrt(du), out=np.zeros_like(du), where=du > 0)
    inv_i = np.divide(1.0, np.sqrt(di), out=np.zeros_like(di), where=di > 0)
    return sp.diags(inv_u) @ R @ sp.diags(inv_i)


def propagate(norm_adj: sp.csr_matrix, user_emb, item_emb, layers: int):
    """Layer-averaged propagation (layer 0 included) over the bipartite graph."""
    eu, ei = np.asarray(user_emb, float), np.asarray(item_emb, float)
    acc_u, acc_i = eu.copy(), ei.copy()
    for _ in range(layers):
        eu, ei = norm_adj @ ei, norm_adj.T @ eu
        acc_u += eu
        acc_i += ei
    return acc_u / (layers + 1), acc_i / (layers + 1)


# --- item kNN ------------------------------------------------------------------


def cosine_similarity(rows, cols, n_users, n_items) -> np.ndarray:
    """Item-item cosine over binary user vectors; zero-norm items get 0."""
    R = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n_users, n_items))
    R.data[:] = 1.0
    co = (R.T @ R).toarray()
    norms = np.sqrt(np.diag(co))
    denom = np.outer(norms, norms)
    return np.divide(co, denom, out=np.zeros_like(co), where=denom > 0)


def prune_neighbors(sim: np.ndarray, neighbors: int) -> np.ndarray:
    """Keep each item's top-``neighbors`` similarities (self excluded), symmetrized
    over the union of kept entries."""
    s = sim.copy()
    np.fill_diagonal(s, 0.0)
    n = s.shape[0]
    keep = np.zeros_like(s, dtype=bool)
    if neighbors >= n - 1:
        keep[:] = True
    else:
        top = np.argsort(-s, axis=1, kind="stable")[:, :neighbors]
        keep[np.repeat(np.arange(n), neighbors), top.ravel()] = True
    keep |= keep.T
    np.fill_diagonal(keep, False)
    return np.where(keep, s, 0.0)


# --- public API --------------------------------------------------------------


def fit(spec: RecommenderSpec, log: InteractionLog, catalog: Catalog, fit_round: int = 0) -> FittedModel:
    if len(log) == 0:
        raise ValueError("cannot fit on an empty log")
    if len(catalog) == 0:
        raise ValueError("catalog has no items")
    item_ids, item_index, user_rows, rows, cols = _index_log(log, catalog)
    n_users, n_items = len(user_rows), len(item_ids)
    counts = np.bincount(cols, minlength=n_items)
    order = np.argsort(rows, kind="stable")
    splits = np.split(cols[order], np.cumsum(np.bincount(rows, minlength=n_users))[:-1])
    user_items = {u: splits[user_rows[u]] for u in user_rows}

    extra = {}
    kind = spec.kind
    if kind in ("bpr_mf", "graph_prop"):
        P, Q = train_bpr(rows, cols, n_users, n_items, spec)
        if kind == "graph_prop":
            P, Q = propagate(normalized_adjacency(rows, cols, n_users, n_items), P, Q, spec["propagation_layers"])
        extra = {"user_factors": P, "item_factors": Q}
    elif kind == "item_knn":
        sim = cosine_similarity(rows, cols, n_users, n_items)
        extra = {"similarity": prune_neighbors(sim, spec["neighbors"])}
    return FittedModel(spec, fit_round, item_ids, item_index, user_rows, user_items, counts, **extra)


def recommend(model: FittedModel, user_id, k: int, exclude=frozenset()) -> RankedPage:
    """Top-``k`` unexcluded items by score, ties by ascending item id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = model.scores(user_id)
    mask = np.ones(len(model.item_ids), dtype=bool)
    for i in exclude:
        idx = model.item_index.get(i)
        if idx is not None:
            mask[idx] = False
    cand = np.flatnonzero(mask)
    if len(cand) == 0:
        raise CatalogExhausted(user_id, model.fit_round)
    # item_ids are sorted, so a stable sort on -score breaks ties by id
    top = cand[np.argsort(-scores[cand], kind="stable")[:k]]
    return RankedPage(
        user_id, model.fit_round, tuple(model.item_ids[top].tolist()), tuple(float(s) for s in scores[top])
    )


def full_ranking(model: FittedModel, user_id, exclude=frozenset()) -> list:
    """Every unexcluded item in recommendation order."""
    n = len(model.item_ids) - sum(1 for i in exclude if i in model.item_index)
    return list(recommend(model, user_id, max(n, 1), exclude).items)


def replacement_count(fraction: float, page_len: int) -> int:
    # guard against 0.3 * 20 evaluating a hair below 6
    return int(math.floor(fraction * page_len + 1e-9))


def randomize_page(page: RankedPage, fraction: float, catalog: Catalog, exclude, rng_seed) -> RankedPage:
    """Redraw ``floor(fraction * |page|)`` uniformly chosen slots from the unseen
    items that are not kept on the page.

    Candidates are ranked by a seeded per-item priority, the same construction
    the random recommender uses, so both arms of a contrast share their random
    draws and a fully replaced page is a uniform sample of the unseen catalog.
    Replaced slots keep the slot's score so the score column stays
    non-increasing.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    n = replacement_count(fraction, len(page))
    if n == 0:
        return page
    slots = np.random.default_rng(derive_seed(rng_seed, "randomize", "slots"))
    positions = np.sort(slots.choice(len(page), size=n, replace=False))
    kept = set(page.items) - {page.items[p] for p in positions}
    taken = set(exclude) | kept
    ids = catalog.sorted_item_ids()
    priority = np.random.default_rng(derive_seed(rng_seed, "randomize", "items")).random(len(ids))
    # the pool always contains the n items being replaced, so it never runs short
    picks = [ids[k] for k in np.argsort(-priority, kind="stable") if ids[k] not in taken][:n]
    items = list(page.items)
    for pos, item in zip(positions, picks):
        items[pos] = item
    return replace(page, items=tuple(items), replaced=n)
