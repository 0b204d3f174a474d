import pytest

from bubblesim.catalog import Catalog, Item, RawInteraction
from bubblesim.synthetic import make_synthetic


def toy_catalog():
    """8 items over 3 genres."""
    cats = ["a", "a", "a", "b", "b", "c", "c", "c"]
    return Catalog.from_items(Item(k + 1, f"T{k + 1}", (c,)) for k, c in enumerate(cats))


def toy_raw():
    """5 users, each with a short timestamped history over the toy catalog."""
    hist = {
        1: [1, 2, 4, 6],
        2: [1, 3, 5],
        3: [2, 3, 7, 8],
        4: [1, 4, 5, 6, 2],
        5: [6, 7, 1],
    }
    raw = []
    for u, items in hist.items():
        for ts, i in enumerate(items):
            raw.append(RawInteraction(u, i, 1 + (u + i) % 5, 100 * u + ts))
    return raw


@pytest.fixture
def catalog():
    return toy_catalog()


@pytest.fixture
def raw():
    return toy_raw()


@pytest.fixture(scope="session")
def synthetic():
    return make_synthetic(n_users=30, n_items=120, n_categories=6, seed=3, history_range=(10, 25))


def pytest_terminal_summary(terminalreporter):
    from tests.acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
