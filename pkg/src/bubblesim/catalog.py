"""Item/category data model and dataset ingestion.

Two on-disk formats are understood: the MovieLens ``.dat`` layout
(``::``-delimited, genres ``|``-separated) and a headered generic CSV layout
used for Amazon-Books subsamples and synthetic fixtures.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence


class IngestError(ValueError):
    """Raised on malformed or inconsistent dataset files."""


@dataclass(frozen=True)
class Item:
    item_id: int | str
    title: str
    all_categories: tuple[str, ...]

    def __post_init__(self):
        if not self.all_categories:
            raise IngestError(f"item {self.item_id!r}: empty categories")
        if len(set(self.all_categories)) != len(self.all_categories):
            raise IngestError(f"item {self.item_id!r}: duplicate categories")

    @property
    def primary_category(self) -> str:
        return self.all_categories[0]


@dataclass(frozen=True)
class Catalog:
    """Item universe with its ordered category set."""

    items: Mapping[int | str, Item]
    categories: tuple[str, ...]

    def __post_init__(self):
        if not self.categories:
            raise IngestError("catalog has no categories")
        known = set(self.categories)
        for item in self.items.values():
            missing = set(item.all_categories) - known
            if missing:
                raise IngestError(f"item {item.item_id!r}: unknown categories {sorted(missing)}")

    @classmethod
    def from_items(cls, items: Iterable[Item]) -> "Catalog":
        """Build a catalog whose category universe is the union of item genres,
        in order of first appearance."""
        mapping: dict = {}
        cats: dict[str, None] = {}
        for item in items:
            if item.item_id in mapping:
                raise IngestError(f"duplicate item_id {item.item_id!r}")
            mapping[item.item_id] = item
            for c in item.all_categories:
                cats.setdefault(c, None)
        return cls(mapping, tuple(cats))

    @property
    def n_categories(self) -> int:
        return len(self.categories)

    def sorted_item_ids(self) -> list:
        return sorted(self.items)

    def __contains__(self, item_id) -> bool:
        return item_id in self.items

    def __len__(self) -> int:
        return len(self.items)


def category_of(catalog: Catalog, item_id) -> str:
    """Primary (first-listed) category of ``item_id``."""
    try:
        return catalog.items[item_id].primary_category
    except KeyError:
        raise KeyError(f"unknown item {item_id!r}") from None


@dataclass(frozen=True, order=True)
class RawInteraction:
    user_id: int | str
    item_id: int | str
    rating: int
    timestamp: int


def _check_rating(rating: int, where: str) -> int:
    if not 1 <= rating <= 5:
        raise IngestError(f"{where}: rating {rating} outside [1,5]")
    return rating


def dedupe_latest(raw: Iterable[RawInteraction]) -> list[RawInteraction]:
    """Keep one interaction per (user, item), the latest by timestamp.

    Output is sorted per user by (timestamp, item_id), users ascending.
    """
    latest: dict[tuple, RawInteraction] = {}
    for r in raw:
        key = (r.user_id, r.item_id)
        prev = latest.get(key)
        if prev is None or r.timestamp >= prev.timestamp:
            latest[key] = r
    return sorted(latest.values(), key=lambda r: (r.user_id, r.timestamp, r.item_id))


def user_histories(raw: Iterable[RawInteraction]) -> dict:
    """Group interactions per user in (timestamp, item_id) order."""
    out: dict = {}
    for r in sorted(raw, key=lambda r: (r.user_id, r.timestamp, r.item_id)):
        out.setdefault(r.user_id, []).append(r)
    return out


def _read_lines(path: Path) -> Iterator[tuple[int, str]]:
    # latin-1 decodes every byte, which covers the MovieLens files
    with open(path, encoding="latin-1", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if line.strip():
                yield lineno, line


def _parse_int(value: str, where: str, name: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise IngestError(f"{where}: field {name!r} is not an integer: {value!r}") from None


def load_movielens(ratings_path, items_path) -> tuple[Catalog, list[RawInteraction]]:
    ratings_path, items_path = Path(ratings_path), Path(items_path)
    items = []
    for lineno, line in _read_lines(items_path):
        where = f"{items_path.name}:{lineno}"
        parts = line.split("::")
        if len(parts) != 3:
            raise IngestError(f"{where}: expected 3 fields MovieID::Title::Genres, got {len(parts)}")
        item_id = _parse_int(parts[0], where, "MovieID")
        genres = tuple(g for g in parts[2].split("|") if g)
        if not genres:
            raise IngestError(f"{where}: field 'Genres' is empty")
        items.append(Item(item_id, parts[1], genres))
    catalog = Catalog.from_items(items)

    raw = []
    for lineno, line in _read_lines(ratings_path):
        where = f"{ratings_path.name}:{lineno}"
        parts = line.split("::")
        if len(parts) != 4:
            raise IngestError(f"{where}: expected 4 fields UserID::MovieID::Rating::Timestamp, got {len(parts)}")
        user = _parse_int(parts[0], where, "UserID")
        item = _parse_int(parts[1], where, "MovieID")
        rating = _check_rating(_parse_int(parts[2], where, "Rating"), where)
        ts = _parse_int(parts[3], where, "Timestamp")
        if item not in catalog:
            raise IngestError(f"{where}: unknown item {item}")
        raw.append(RawInteraction(user, item, rating, ts))
    return catalog, dedupe_latest(raw)


def _coerce_ids(values: Sequence[str]) -> list:
    """Integer ids when every value parses as an integer, else the raw strings."""
    try:
        return [int(v) for v in values]
    except ValueError:
        return list(values)


def _read_csv(path: Path, required: Sequence[str]) -> list[dict]:
    text = Path(path).read_text(encoding="utf-8-sig")
    reader = csv.DictReader(io.StringIO(text, newline=""))
    header = reader.fieldnames or []
    missing = [c for c in required if c not in header]
    if missing:
        raise IngestError(f"{Path(path).name}: missing header column(s) {missing}")
    return list(reader)


def load_generic_csv(interactions_path, items_path) -> tuple[Catalog, list[RawInteraction]]:
    items_path, interactions_path = Path(items_path), Path(interactions_path)
    rows = _read_csv(items_path, ("item_id", "title", "categories"))
    ids = _coerce_ids([r["item_id"] for r in rows])
    items = []
    seen = set()
    for lineno, (item_id, row) in enumerate(zip(ids, rows), start=2):
        where = f"{items_path.name}:{lineno}"
        if item_id in seen:
            raise IngestError(f"{where}: duplicate item_id {item_id!r}")
        seen.add(item_id)
        cats = tuple(c for c in (row["categories"] or "").split("|") if c)
        if not cats:
            raise IngestError(f"{where}: empty categories")
        items.append(Item(item_id, row["title"] or "", cats))
    catalog = Catalog.from_items(items)
    item_ids_are_int = all(isinstance(i, int) for i in catalog.items)

    rows = _read_csv(interactions_path, ("user_id", "item_id", "rating", "timestamp"))
    users = _coerce_ids([r["user_id"] for r in rows])
    raw = []
    for lineno, (user, row) in enumerate(zip(users, rows), start=2):
        where = f"{interactions_path.name}:{lineno}"
        item = row["item_id"]
        if item_ids_are_int:
            item = _parse_int(item, where, "item_id")
        rating = _check_rating(_parse_int(row["rating"], where, "rating"), where)
        ts = _parse_int(row["timestamp"], where, "timestamp")
        if item not in catalog:
            raise IngestError(f"{where}: unknown item {item!r}")
        raw.append(RawInteraction(user, item, rating, ts))
    return catalog, dedupe_latest(raw)


def write_generic_csv(catalog: Catalog, raw: Iterable[RawInteraction], interactions_path, items_path) -> None:
    """Serialize to the generic CSV layout read by :func:`load_generic_csv`."""
    with open(items_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["item_id", "title", "categories"])
        for item in catalog.items.values():
            w.writerow([item.item_id, item.title, "|".join(item.all_categories)])
    with open(interactions_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "item_id", "rating", "timestamp"])
        for r in raw:
            w.writerow([r.user_id, r.item_id, r.rating, r.timestamp])


@dataclass(frozen=True)
class LogEntry:
    user_id: int | str
    item_id: int | str
    rating: int
    round: int


@dataclass(frozen=True)
class InteractionLog:
    """Append-only interaction record A_t. Instances are immutable snapshots;
    :meth:`merge` returns a new log."""

    entries: tuple[LogEntry, ...] = ()
    _pairs: frozenset = field(default=frozenset(), repr=False, compare=False)

    def __post_init__(self):
        if not self._pairs and self.entries:
            pairs = frozenset((e.user_id, e.item_id) for e in self.entries)
            if len(pairs) != len(self.entries):
                raise ValueError("duplicate (user_id, item_id) pair in log")
            rounds = [e.round for e in self.entries]
            if any(b < a for a, b in zip(rounds, rounds[1:])):
                raise ValueError("log rounds must be non-decreasing")
            object.__setattr__(self, "_pairs", pairs)

    @classmethod
    def from_raw(cls, raw: Iterable[RawInteraction]) -> "InteractionLog":
        """Cold-start log (round 0) from raw interactions, latest duplicate kept."""
        return cls(tuple(LogEntry(r.user_id, r.item_id, r.rating, 0) for r in dedupe_latest(raw)))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __contains__(self, pair) -> bool:
        return pair in self._pairs

    @property
    def last_round(self) -> int:
        return self.entries[-1].round if self.entries else 0

    def users(self) -> list:
        return sorted({e.user_id for e in self.entries})

    def items_of(self, user_id) -> set:
        return {e.item_id for e in self.entries if e.user_id == user_id}

    def items_by_user(self) -> dict:
        out: dict = {}
        for e in self.entries:
            out.setdefault(e.user_id, set()).add(e.item_id)
        return out

    def item_means(self) -> dict:
        sums: dict = {}
        for e in self.entries:
            s = sums.setdefault(e.item_id, [0, 0])
            s[0] += e.rating
            s[1] += 1
        return {i: s / n for i, (s, n) in sums.items()}

    def merge(self, round_: int, picks: Iterable[tuple]) -> tuple["InteractionLog", int]:
        """Append ``(user_id, item_id, rating)`` picks as round ``round_``.

        Pairs already present are skipped; returns the new log and the number
        of skipped picks.
        """
        if round_ < self.last_round:
            raise ValueError(f"round {round_} precedes last logged round {self.last_round}")
        pairs = set(self._pairs)
        new = []
        dropped = 0
        for user, item, rating in picks:
            if (user, item) in pairs:
                dropped += 1
                continue
            pairs.add((user, item))
            new.append(LogEntry(user, item, int(rating), round_))
        log = InteractionLog(self.entries + tuple(new), frozenset(pairs))
        return log, dropped
