import pytest
from hypothesis import given, settings, strategies as st

from bubblesim.catalog import (
    IngestError,
    InteractionLog,
    Item,
    RawInteraction,
    category_of,
    dedupe_latest,
    load_generic_csv,
    load_movielens,
    write_generic_csv,
)


def test_primary_category_is_first_listed():
    item = Item(7, "x", ("Comedy", "Drama"))
    assert item.primary_category == "Comedy"


def test_category_of_unknown_item(catalog):
    assert category_of(catalog, 4) == "b"
    with pytest.raises(KeyError, match="unknown item"):
        category_of(catalog, 99)


def test_dedupe_keeps_latest():
    raw = [RawInteraction(1, 5, 2, 10), RawInteraction(1, 5, 4, 30), RawInteraction(1, 6, 3, 20)]
    out = dedupe_latest(raw)
    assert [(r.item_id, r.rating) for r in out] == [(6, 3), (5, 4)]


def _write(tmp_path, name, text, encoding="utf-8"):
    p = tmp_path / name
    p.write_bytes(text.encode(encoding))
    return p


def test_movielens_loader(tmp_path):
    movies = _write(tmp_path, "movies.dat", "1::Amélie (2001)::Comedy|Romance\n2::Heat (1995)::Action\n", "latin-1")
    ratings = _write(tmp_path, "ratings.dat", "1::1::5::100\n1::2::3::101\n2::2::4::50\n")
    catalog, raw = load_movielens(ratings, movies)
    assert catalog.categories == ("Comedy", "Romance", "Action")
    assert catalog.items[1].title.startswith("Amélie")
    assert catalog.items[1].primary_category == "Comedy"
    assert len(raw) == 3


def test_movielens_errors_carry_line(tmp_path):
    movies = _write(tmp_path, "movies.dat", "1::A::Comedy\n")
    bad = _write(tmp_path, "ratings.dat", "1::1::5::100\n1::1::x::101\n")
    with pytest.raises(IngestError, match=r"ratings.dat:2.*Rating"):
        load_movielens(bad, movies)
    unknown = _write(tmp_path, "r2.dat", "1::9::5::100\n")
    with pytest.raises(IngestError, match="unknown item"):
        load_movielens(unknown, movies)
    out_of_range = _write(tmp_path, "r3.dat", "1::1::6::100\n")
    with pytest.raises(IngestError):
        load_movielens(out_of_range, movies)


def test_generic_csv_errors(tmp_path):
    items = _write(tmp_path, "items.csv", "item_id,title,categories\n1,A,x\n2,B,\n")
    inter = _write(tmp_path, "inter.csv", "user_id,item_id,rating,timestamp\n")
    with pytest.raises(IngestError, match="empty categories"):
        load_generic_csv(inter, items)
    items = _write(tmp_path, "items.csv", "item_id,title,categories\n1,A,x\n1,B,y\n")
    with pytest.raises(IngestError, match="duplicate"):
        load_generic_csv(inter, items)
    items = _write(tmp_path, "items.csv", "item_id,title\n1,A\n")
    with pytest.raises(IngestError, match="missing header"):
        load_generic_csv(inter, items)


def test_string_ids_survive(tmp_path):
    items = _write(tmp_path, "items.csv", "item_id,title,categories\nB001,A,x|y\nB002,B,y\n")
    inter = _write(tmp_path, "inter.csv", "user_id,item_id,rating,timestamp\nu1,B001,4,3\nu1,B002,5,4\n")
    catalog, raw = load_generic_csv(inter, items)
    assert set(catalog.items) == {"B001", "B002"}
    assert {r.user_id for r in raw} == {"u1"}


def test_round_trip(tmp_path, synthetic):
    catalog, raw = synthetic
    write_generic_csv(catalog, raw, tmp_path / "i.csv", tmp_path / "items.csv")
    catalog2, raw2 = load_generic_csv(tmp_path / "i.csv", tmp_path / "items.csv")
    assert catalog2 == catalog
    assert raw2 == dedupe_latest(raw)


def test_log_rejects_duplicates_and_merge_dedupes(raw):
    log = InteractionLog.from_raw(raw)
    assert (1, 1) in log and log.last_round == 0
    new, dropped = log.merge(1, [(1, 1, 5), (1, 3, 4), (1, 3, 2)])
    assert dropped == 2
    assert len(new) == len(log) + 1
    assert len(log) == len(raw)  # original untouched
    with pytest.raises(ValueError):
        new.merge(0, [(2, 8, 3)])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 4), st.integers(1, 8), st.integers(1, 5)), max_size=40))
def test_merge_never_duplicates(picks):
    log = InteractionLog.from_raw([])
    new, dropped = log.merge(1, picks)
    pairs = [(e.user_id, e.item_id) for e in new]
    assert len(pairs) == len(set(pairs))
    assert len(pairs) + dropped == len(picks)
    assert set(pairs) == {(u, i) for u, i, _ in picks}
