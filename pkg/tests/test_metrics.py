import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bubblesim.agents import UserProfile
from bubblesim.catalog import Catalog, InteractionLog, Item, RawInteraction
from bubblesim.metrics import (
    BepReport,
    bep,
    bep_from_series,
    bep_per_round,
    bep_round,
    category_coverage,
    diversity,
    diversity_series,
    evaluate_accuracy,
    group_mean_bep,
    leave_one_out_split,
    ranking_metrics,
    standardized_entropy,
    top1_genre_percentage,
    top1_genre_share,
)
from bubblesim.recommenders import RankedPage, RecommenderSpec, fit

from .conftest import toy_catalog, toy_raw
from .helpers import N_CATS, pair_from_series, page_with_diversity, record_from_series, wide_catalog

POS = [[5, 6, 6], [7, 6, 6]]
NEG = [[4, 4, 3], [2, 4, 3]]


def test_bep_hand_series():
    assert bep_per_round(POS, NEG).tolist() == [2.0, 1.5, 2.0]
    assert bep_from_series(POS, NEG) == pytest.approx(5.5 / 3, abs=1e-12)


def test_bep_on_constructed_pair():
    catalog = wide_catalog()
    pair = pair_from_series(POS, NEG)
    assert diversity_series(pair.positive_run, catalog).tolist() == POS
    report = bep(pair, catalog)
    assert report.per_round == [2.0, 1.5, 2.0]
    assert report.overall == pytest.approx(5.5 / 3, abs=1e-12)
    assert report.overall == pytest.approx(np.mean([bep_round(pair, t, catalog) for t in (1, 2, 3)]), abs=1e-12)
    assert report.per_user[1] == pytest.approx((5 / 4 + 6 / 4 + 6 / 3) / 3)
    with pytest.raises(KeyError):
        bep_round(pair, 4, catalog)


def test_bep_examples():
    assert bep_per_round([[5], [7]], [[4], [2]]).tolist() == [2.0]
    assert bep_from_series([[1.0, 1.5, 2.0]], [[1.0, 1.0, 1.0]]) == pytest.approx(1.5)


def test_self_contrast_is_exactly_one():
    catalog = wide_catalog()
    rec = record_from_series("positive", POS)
    from bubblesim.simulation import ContrastPair, SimulationConfig

    pair = ContrastPair(rec, rec, rec.cohort, SimulationConfig(rounds=3, frequent_pool=2, sample_size=2))
    report = bep(pair, catalog)
    assert report.overall == 1.0 and all(r == 1.0 for r in report.per_round)
    assert all(v == 1.0 for v in report.per_user.values())


series = st.lists(st.lists(st.integers(1, 12), min_size=3, max_size=3), min_size=1, max_size=6)


@settings(max_examples=100, deadline=None)
@given(series, series, st.sampled_from([0.5, 3.0, 10.0]))
def test_scale_invariance(pos, neg, c):
    n = min(len(pos), len(neg))
    pos, neg = np.array(pos[:n], float), np.array(neg[:n], float)
    assert abs(bep_from_series(pos * c, neg * c) - bep_from_series(pos, neg)) < 1e-12


@settings(max_examples=100, deadline=None)
@given(series, series, st.data())
def test_monotone_in_positive_diversity(pos, neg, data):
    n = min(len(pos), len(neg))
    pos, neg = np.array(pos[:n], float), np.array(neg[:n], float)
    u = data.draw(st.integers(0, n - 1))
    t = data.draw(st.integers(0, 2))
    bumped = pos.copy()
    bumped[u, t] += 1
    assert bep_per_round(bumped, neg)[t] > bep_per_round(pos, neg)[t]
    assert bep_from_series(bumped, neg) > bep_from_series(pos, neg)


def test_bep_not_clamped():
    assert bep_from_series([[2]], [[4]]) == 0.5


def test_entropy_and_coverage_closed_forms():
    catalog = wide_catalog()
    uniform = page_with_diversity(1, 1, N_CATS, length=N_CATS * 2)
    single = page_with_diversity(1, 1, 1)
    assert abs(standardized_entropy(uniform, catalog) - 1.0) < 1e-12
    assert standardized_entropy(single, catalog) == 0.0
    assert abs(category_coverage(uniform, catalog) - 1.0) < 1e-12
    two = page_with_diversity(1, 1, 2, length=2)
    assert standardized_entropy(two, catalog) == pytest.approx(1.0, abs=1e-12)
    three = page_with_diversity(1, 1, 3, length=6)
    assert category_coverage(three, catalog) == pytest.approx(3 / N_CATS)
    # a page shorter than M reaches 1.0 when all entries differ
    assert standardized_entropy(page_with_diversity(1, 1, 5, length=5), catalog) == pytest.approx(1.0)


def test_coverage_eighteen_genres():
    items = [Item(k, str(k), (f"G{k}",)) for k in range(18)]
    catalog = Catalog.from_items(items)
    page = RankedPage(1, 1, (0, 1, 2, 0), (4.0, 3.0, 2.0, 1.0))
    assert category_coverage(page, catalog) == pytest.approx(3 / 18)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(1, 360), min_size=1, max_size=30, unique=True))
def test_metric_ranges(items):
    catalog = wide_catalog()
    page = RankedPage(1, 1, tuple(items), tuple(float(-k) for k in range(len(items))))
    assert 0.0 <= standardized_entropy(page, catalog) <= 1.0 + 1e-12
    assert 0.0 < category_coverage(page, catalog) <= 1.0
    assert 1 <= diversity(page, catalog) <= min(len(items), N_CATS)


def test_top1_genre():
    catalog = wide_catalog()
    items = tuple(list(range(1, 9)) + list(range(31, 43)))  # 8 of g00, 12 of g01
    page = RankedPage(1, 1, items, tuple(0.0 for _ in items))
    assert top1_genre_share(page, catalog) == pytest.approx(0.6)
    rec = record_from_series("positive", [[1, 2]])
    # single-category page -> 1.0, two categories alternating over 20 -> 0.5
    assert top1_genre_percentage(rec, catalog) == pytest.approx(0.75)


def test_group_means():
    report = BepReport([1.0], 1.5, {1: 1.0, 2: 2.0, 3: 4.0})
    profs = [
        UserProfile(1, "low", "mid", "mid", {"a": 1.0}),
        UserProfile(2, "low", "mid", "mid", {"a": 0.5, "b": 0.5}),
        UserProfile(3, "high", "mid", "mid", {"b": 1.0}),
    ]
    assert group_mean_bep(report, profs, "activity") == {"high": 4.0, "low": 1.5}
    assert group_mean_bep(report, profs, "conformity") == {"mid": pytest.approx(7 / 3)}
    genre = group_mean_bep(report, profs, "genre")
    assert genre == {"a": 1.5, "b": 4.0}
    with pytest.raises(ValueError):
        group_mean_bep(report, profs, "age")


# --- ranking metrics ---------------------------------------------------------


def test_ranking_metric_closed_forms():
    hr, ndcg, mrr = ranking_metrics([1, 1, 1], [5])
    assert hr[5] == 1.0 and ndcg[5] == 1.0 and mrr == 1.0
    hr, ndcg, mrr = ranking_metrics([5], [20])
    assert hr[20] == 1.0 and ndcg[20] == pytest.approx(1 / math.log2(6)) and mrr == 0.2


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(1, 50), min_size=1, max_size=30))
def test_ranking_metric_monotonicity(ranks):
    ks = [1, 5, 10, 20]
    hr, ndcg, _ = ranking_metrics(ranks, ks)
    assert all(hr[a] <= hr[b] for a, b in zip(ks, ks[1:]))
    assert all(ndcg[k] <= hr[k] + 1e-12 for k in ks)


def exhaustive_accuracy(spec, raw, catalog, k_values):
    """Independent oracle: split by timestamp, score every candidate, sort."""
    by_user = {}
    for r in raw:
        by_user.setdefault(r.user_id, []).append(r)
    train, test = [], {}
    for u, hist in by_user.items():
        hist = sorted(hist, key=lambda r: (r.timestamp, r.item_id))
        train += hist[:-1]
        test[u] = hist[-1].item_id
    model = fit(spec, InteractionLog.from_raw(train), catalog)
    ranks = []
    for u, target in sorted(test.items()):
        seen = {r.item_id for r in train if r.user_id == u}
        s = model.scores(u)
        cands = [i for i in sorted(catalog.items) if i not in seen]
        order = sorted(cands, key=lambda i: (-s[model.item_index[i]], i))
        ranks.append(order.index(target) + 1)
    hr = {k: sum(p <= k for p in ranks) / len(ranks) for k in k_values}
    ndcg = {k: sum(1 / math.log2(p + 1) for p in ranks if p <= k) / len(ranks) for k in k_values}
    return hr, ndcg, sum(1 / p for p in ranks) / len(ranks)


@pytest.mark.parametrize("kind", ["random", "popularity", "item_knn", "bpr_mf", "graph_prop"])
def test_accuracy_matches_exhaustive_oracle(kind):
    catalog, raw = toy_catalog(), toy_raw()
    spec = RecommenderSpec(kind, {"latent_dim": 4, "epochs": 5} if kind in ("bpr_mf", "graph_prop") else {}, seed=7)
    report = evaluate_accuracy(spec, raw, catalog, (1, 3, 5))
    hr, ndcg, mrr = exhaustive_accuracy(spec, raw, catalog, (1, 3, 5))
    assert report.hr == hr
    assert report.ndcg == pytest.approx(ndcg, abs=1e-15)
    assert report.map == pytest.approx(mrr, abs=1e-15)


def test_leave_one_out_excludes_singletons():
    raw = toy_raw() + [RawInteraction(9, 1, 3, 5)]
    train, test, excluded = leave_one_out_split(raw)
    assert excluded == 1 and 9 not in test
    assert test[1] == 6 and test[4] == 2


def test_popularity_hits_when_last_item_is_most_popular():
    catalog = toy_catalog()
    raw = [RawInteraction(u, 8, 4, 100) for u in range(1, 6)]
    raw += [RawInteraction(u, 1 + u % 3, 3, 0) for u in range(1, 6)]
    raw += [RawInteraction(u, 8, 4, 0) for u in range(6, 20)]  # item 8 dominates training counts
    report = evaluate_accuracy(RecommenderSpec("popularity"), raw, catalog, (1,))
    ranks = [report.ranks[u] for u in range(1, 6)]
    assert ranks == [1] * 5


def test_randomized_accuracy_fraction_zero_is_identity(synthetic):
    catalog, raw = synthetic
    spec = RecommenderSpec("popularity", seed=2)
    a = evaluate_accuracy(spec, raw, catalog, (10, 20))
    b = evaluate_accuracy(spec, raw, catalog, (10, 20), randomize_fraction=0.0)
    assert a.ranks == b.ranks
    c = evaluate_accuracy(spec, raw, catalog, (10, 20), randomize_fraction=0.5)
    assert set(c.ranks) == set(a.ranks)
