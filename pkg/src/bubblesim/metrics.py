"""Bubble Escape Potential, baseline diversity metrics, leave-one-out ranking
accuracy and trait-group aggregation."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .agents import LEVELS, UserProfile
from .catalog import Catalog, InteractionLog, RawInteraction, category_of, dedupe_latest, user_histories
from .recommenders import RecommenderSpec, fit, randomize_page, recommend
from .seeding import derive_seed
from .simulation import ContrastPair, RunRecord

GROUPINGS = ("activity", "conformity", "diversity", "genre")


def _categories(page, catalog: Catalog) -> list:
    items = page.items if hasattr(page, "items") else page
    if len(items) == 0:
        raise ValueError("empty page")
    return [category_of(catalog, i) for i in items]


def diversity(page, catalog: Catalog) -> int:
    """Number of distinct primary categories on the page."""
    return len(set(_categories(page, catalog)))


def standardized_entropy(page, catalog: Catalog) -> float:
    """Category entropy normalized by ln(min(M, |page|)), the page's maximum."""
    cats = _categories(page, catalog)
    n = len(cats)
    f = np.array(list(Counter(cats).values()), dtype=float) / n
    s = float(-(f * np.log(f)).sum())
    cap = min(catalog.n_categories, n)
    norm = math.log(cap) if cap > 1 else 1.0
    return max(0.0, s / norm)


def category_coverage(page, catalog: Catalog) -> float:
    return diversity(page, catalog) / catalog.n_categories


def top1_genre_share(page, catalog: Catalog) -> float:
    cats = _categories(page, catalog)
    return Counter(cats).most_common(1)[0][1] / len(cats)


def top1_genre_percentage(record: RunRecord, catalog: Catalog) -> float:
    """Mean modal-category share over every page of the run."""
    if not record.pages:
        raise ValueError("run has no pages")
    return float(np.mean([top1_genre_share(p, catalog) for p in record.pages.values()]))


def diversity_series(record: RunRecord, catalog: Catalog) -> np.ndarray:
    """(cohort x rounds) array of page diversity, cohort order preserved."""
    out = np.empty((len(record.cohort), record.rounds), dtype=float)
    for a, u in enumerate(record.cohort):
        for t in range(1, record.rounds + 1):
            try:
                page = record.pages[(u, t)]
            except KeyError:
                raise KeyError(f"missing page for user {u!r} round {t}") from None
            out[a, t - 1] = diversity(page, catalog)
    return out


def bep_per_round(positive: np.ndarray, negative: np.ndarray) -> np.ndarray:
    """Round-wise ratio of summed positive-arm to summed negative-arm diversity."""
    positive, negative = np.asarray(positive, float), np.asarray(negative, float)
    if positive.shape != negative.shape:
        raise ValueError(f"series shape mismatch {positive.shape} vs {negative.shape}")
    return positive.sum(axis=0) / negative.sum(axis=0)


def bep_per_user(positive: np.ndarray, negative: np.ndarray) -> np.ndarray:
    return (np.asarray(positive, float) / np.asarray(negative, float)).mean(axis=1)


def bep_from_series(positive: np.ndarray, negative: np.ndarray) -> float:
    return float(bep_per_round(positive, negative).mean())


def bep_round(pair: ContrastPair, t: int, catalog: Catalog) -> float:
    if not 1 <= t <= pair.positive_run.rounds:
        raise KeyError(f"round {t} not simulated")
    pos = [diversity(pair.positive_run.pages[(u, t)], catalog) for u in pair.cohort]
    neg = [diversity(pair.negative_run.pages[(u, t)], catalog) for u in pair.cohort]
    return sum(pos) / sum(neg)


@dataclass
class BepReport:
    per_round: list
    overall: float
    per_user: dict
    groups: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "overall": self.overall,
            "per_round": list(self.per_round),
            "per_user": {str(u): v for u, v in self.per_user.items()},
            "groups": self.groups,
        }


def bep(pair: ContrastPair, catalog: Catalog, profiles: Mapping | None = None) -> BepReport:
    """BEP report; groups use ``profiles`` (default: the derived cohort traits)."""
    d_pos = diversity_series(pair.positive_run, catalog)
    d_neg = diversity_series(pair.negative_run, catalog)
    ratios = bep_per_round(d_pos, d_neg)
    per_user = dict(zip(pair.cohort, bep_per_user(d_pos, d_neg).tolist()))
    report = BepReport([float(r) for r in ratios], float(ratios.mean()), per_user)
    profiles = profiles if profiles is not None else pair.positive_run.profiles
    if profiles:
        plist = [profiles[u] for u in pair.cohort]
        report.groups = {g: group_mean_bep(report, plist, g) for g in GROUPINGS}
    return report


def group_key(profile: UserProfile, grouping: str) -> str:
    if grouping == "genre":
        return profile.favorite_genre
    if grouping in ("activity", "conformity", "diversity"):
        return getattr(profile, f"{grouping}_level")
    raise ValueError(f"unknown grouping {grouping!r}; expected one of {GROUPINGS}")


def group_mean_bep(report: BepReport, profiles: Iterable[UserProfile], grouping: str) -> dict:
    groups: dict = {}
    for p in profiles:
        groups.setdefault(group_key(p, grouping), []).append(report.per_user[p.user_id])
    # trait levels read low -> high; genres alphabetically
    order = lambda g: (LEVELS.index(g) if g in LEVELS else len(LEVELS), g)
    return {g: float(np.mean(groups[g])) for g in sorted(groups, key=order)}


# --- leave-one-out accuracy -------------------------------------------------


@dataclass
class AccuracyReport:
    hr: dict
    ndcg: dict
    map: float
    ranks: dict
    excluded_users: int = 0
    cold_items: int = 0

    def to_dict(self) -> dict:
        return {
            "hr": {str(k): v for k, v in self.hr.items()},
            "ndcg": {str(k): v for k, v in self.ndcg.items()},
            "map": self.map,
            "excluded_users": self.excluded_users,
        }


def ranking_metrics(ranks: Sequence[int], k_values: Sequence[int]) -> tuple[dict, dict, float]:
    """HR@k, NDCG@k and MAP for one relevant item per user at 1-based ``ranks``."""
    p = np.asarray(ranks, dtype=float)
    hr = {k: float((p <= k).mean()) for k in k_values}
    ndcg = {k: float(np.where(p <= k, 1.0 / np.log2(p + 1.0), 0.0).mean()) for k in k_values}
    return hr, ndcg, float((1.0 / p).mean())


def leave_one_out_split(raw: Iterable[RawInteraction]):
    """(train, {user: held-out item}, excluded user count); the held-out item is
    each user's timestamp-last interaction."""
    histories = user_histories(dedupe_latest(raw))
    train, test, excluded = [], {}, 0
    for u, hist in histories.items():
        if len(hist) < 2:
            excluded += 1
            train.extend(hist)
            continue
        train.extend(hist[:-1])
        test[u] = hist[-1].item_id
    return train, test, excluded


def evaluate_accuracy(
    spec: RecommenderSpec,
    raw: Sequence[RawInteraction],
    catalog: Catalog,
    k_values: Sequence[int] = (10, 20),
    randomize_fraction: float = 0.0,
) -> AccuracyReport:
    """Leave-one-out accuracy with full ranking over each user's unseen items.

    With ``randomize_fraction`` > 0 the top ``max(k_values)`` page is passed
    through :func:`randomize_page` and the rest of the ranking follows in model
    order.
    """
    train, test, excluded = leave_one_out_split(raw)
    if not test:
        raise ValueError("no user has at least two interactions")
    model = fit(spec, InteractionLog.from_raw(train), catalog)
    seen = InteractionLog.from_raw(train).items_by_user()
    k_max = max(k_values)
    ranks, cold = {}, 0
    for u in sorted(test):
        target = test[u]
        exclude = seen.get(u, set())
        if model.counts[model.item_index[target]] == 0:
            cold += 1
        if randomize_fraction > 0:
            page = recommend(model, u, k_max, exclude)
            page = randomize_page(page, randomize_fraction, catalog, exclude, derive_seed(spec.seed, "eval", u))
            if target in page.items:
                ranks[u] = page.items.index(target) + 1
                continue
            rest = recommend(model, u, len(model.item_ids), exclude | set(page.items)).items
            ranks[u] = len(page) + rest.index(target) + 1
            continue
        scores = model.scores(u)
        mask = np.ones(len(scores), dtype=bool)
        for i in exclude:
            mask[model.item_index[i]] = False
        t = model.item_index[target]
        idx = np.arange(len(scores))
        better = (scores > scores[t]) | ((scores == scores[t]) & (idx < t))
        ranks[u] = int((better & mask).sum()) + 1
    hr, ndcg, mrr = ranking_metrics(list(ranks.values()), k_values)
    return AccuracyReport(hr, ndcg, mrr, ranks, excluded, cold)
