"""Seeded synthetic catalogs and interaction histories.

Category sizes are long-tailed (a few large genres, many small ones) and each
user concentrates on one or two favorite genres, which is the regime where
feedback loops narrow exposure.
"""

from __future__ import annotations

import numpy as np

from .catalog import Catalog, Item, RawInteraction


def _allocate(total: int, weights: np.ndarray, minimum: int) -> np.ndarray:
    base = np.full(len(weights), minimum)
    share = weights / weights.sum() * (total - base.sum())
    counts = base + np.floor(share).astype(int)
    remainder = total - counts.sum()
    order = np.argsort(-(share - np.floor(share)), kind="stable")
    counts[order[:remainder]] += 1
    return counts


def make_synthetic(
    n_users: int = 50,
    n_items: int = 300,
    n_categories: int = 10,
    seed: int = 0,
    history_range: tuple[int, int] = (20, 60),
    category_decay: float = 0.75,
    focus: float = 0.85,
    favorite_bias: float = 1.0,
    popularity_sigma: float = 1.0,
    two_favorites: float = 0.5,
) -> tuple[Catalog, list[RawInteraction]]:
    """Catalog plus raw interactions.

    ``focus`` is the share of each user's taste mass on their favorite genres;
    the rest spreads in proportion to genre size.
    """
    gen = np.random.default_rng(seed)
    genre_weight = category_decay ** np.arange(n_categories)
    sizes = _allocate(n_items, genre_weight, minimum=3)
    names = [f"genre{c:02d}" for c in range(n_categories)]

    item_cat = np.repeat(np.arange(n_categories), sizes)
    popularity = gen.lognormal(0.0, popularity_sigma, size=n_items)
    items = [Item(k + 1, f"Item {k + 1}", (names[item_cat[k]],)) for k in range(n_items)]
    catalog = Catalog(dict((it.item_id, it) for it in items), tuple(names))

    raw = []
    base = genre_weight / genre_weight.sum()
    for u in range(1, n_users + 1):
        n_fav = 1 + int(gen.random() < two_favorites)
        fav_p = base**favorite_bias / (base**favorite_bias).sum()
        favs = gen.choice(n_categories, size=n_fav, replace=False, p=fav_p)
        taste = (1 - focus) * base
        taste[favs] += focus / n_fav
        n_hist = int(gen.integers(history_range[0], history_range[1] + 1))
        # P(item) proportional to taste of its genre spread over the genre, times popularity
        p = taste[item_cat] / sizes[item_cat] * popularity
        picks = gen.choice(n_items, size=min(n_hist, n_items), replace=False, p=p / p.sum())
        ts = np.sort(gen.integers(0, 10_000_000, size=len(picks)))
        for k, t in zip(picks, ts):
            liked = item_cat[k] in favs
            rating = int(np.clip(np.rint(gen.normal(4.2 if liked else 3.0, 0.8)), 1, 5))
            raw.append(RawInteraction(u, int(k) + 1, rating, int(t)))
    return catalog, raw
