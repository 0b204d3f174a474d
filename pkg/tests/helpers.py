"""Builders for hand-specified runs whose pages have prescribed diversity."""

from bubblesim.agents import DEFAULT_POLICIES
from bubblesim.catalog import Catalog, InteractionLog, Item
from bubblesim.recommenders import RankedPage
from bubblesim.simulation import ContrastPair, RunRecord, SimulationConfig

N_CATS = 12


def wide_catalog(n_cats=N_CATS, per_cat=30):
    items = [Item(c * per_cat + k + 1, f"I{c}-{k}", (f"g{c:02d}",)) for c in range(n_cats) for k in range(per_cat)]
    return Catalog.from_items(items)


def page_with_diversity(user, t, d, length=20, per_cat=30):
    """A page of ``length`` items spanning exactly ``d`` categories."""
    items = [(k % d) * per_cat + k // d + 1 for k in range(length)]
    return RankedPage(user, t, tuple(items), tuple(float(length - k) for k in range(length)))


def record_from_series(arm, series, length=20):
    cohort = tuple(range(1, len(series) + 1))
    rounds = len(series[0])
    pages = {
        (u, t + 1): page_with_diversity(u, t + 1, series[a][t], length)
        for a, u in enumerate(cohort)
        for t in range(rounds)
    }
    return RunRecord(arm, DEFAULT_POLICIES[arm], cohort, rounds, pages, {}, InteractionLog.from_raw([]), {}, {})


def pair_from_series(pos, neg):
    p, n = record_from_series("positive", pos), record_from_series("negative", neg)
    return ContrastPair(p, n, p.cohort, SimulationConfig(rounds=p.rounds, frequent_pool=len(pos), sample_size=len(pos)))
