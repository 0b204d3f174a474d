"""Simulated users: profiles derived from cold-start history and the
positive/negative (and weakened) behavior policies that pick items from a page.
"""

from __future__ import annotations

import bisect
import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping, Sequence

import numpy as np

from .catalog import Catalog, RawInteraction, category_of
from .recommenders import RankedPage
from .seeding import derive_seed

log = logging.getLogger(__name__)

LEVELS = ("low", "mid", "high")
ACTIVITY_SCALE = {"low": 0.5, "mid": 1.0, "high": 1.5}
POSITIVE_KINDS = ("positive", "weakly_positive")
NEGATIVE_KINDS = ("negative", "weakly_negative")
POLICY_KINDS = POSITIVE_KINDS + NEGATIVE_KINDS + ("custom",)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class UserProfile:
    user_id: object
    activity_level: str
    conformity_level: str
    diversity_level: str
    taste_weights: Mapping[str, float]
    taste_summary: str | None = None

    def __post_init__(self):
        for name in ("activity_level", "conformity_level", "diversity_level"):
            if getattr(self, name) not in LEVELS:
                raise ValueError(f"{name} must be one of {LEVELS}")
        total = sum(self.taste_weights.values())
        if abs(total - 1.0) > 1e-9 or any(w < 0 for w in self.taste_weights.values()):
            raise ValueError("taste_weights must be non-negative and sum to 1")

    def weight(self, category: str) -> float:
        return self.taste_weights.get(category, 0.0)

    @property
    def favorite_genre(self) -> str:
        """Argmax of taste weights, ties to the lexicographically smallest genre."""
        return min(self.taste_weights, key=lambda c: (-self.taste_weights[c], c))

    def with_levels(self, **levels) -> "UserProfile":
        return UserProfile(**{**self.__dict__, **levels})


@dataclass(frozen=True)
class BehaviorPolicy:
    """Rule-based decision parameters.

    Positive kinds take ``n_match`` taste-aligned items in page order plus
    ``n_explore`` random non-matching ones; negative kinds take the top
    ``n_top`` ranks plus ``n_match`` items by taste weight.
    """

    kind: str
    n_match: int
    n_explore: int = 0
    n_top: int = 0
    taste_threshold: float = 0.05
    conformity_alpha: Mapping[str, float] = field(
        default_factory=lambda: {"low": 0.2, "mid": 0.5, "high": 0.8}
    )

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if not 0.0 < self.taste_threshold < 1.0:
            raise ValueError("taste_threshold must lie in (0, 1)")
        if min(self.n_match, self.n_explore, self.n_top) < 0:
            raise ValueError("pick counts must be non-negative")
        if self.is_positive and self.n_explore < 1:
            raise ValueError("positive policies need n_explore >= 1")
        if self.is_negative and self.n_top < 1:
            raise ValueError("negative policies need n_top >= 1")
        if set(self.conformity_alpha) != set(LEVELS) or not all(
            0.0 <= a <= 1.0 for a in self.conformity_alpha.values()
        ):
            raise ValueError("conformity_alpha needs low/mid/high values in [0, 1]")

    @property
    def is_positive(self) -> bool:
        return self.kind in POSITIVE_KINDS

    @property
    def is_negative(self) -> bool:
        return self.kind in NEGATIVE_KINDS

    def pick_counts(self, activity_level: str) -> tuple[int, int]:
        """(protected, taste) pick counts after activity scaling.

        The protected component (explore picks for positive kinds, top picks
        for negative kinds) keeps its nominal size, capped by the scaled total;
        the rest of the total goes to taste-aligned picks.
        """
        f = ACTIVITY_SCALE[activity_level]
        protected = self.n_top if self.is_negative else self.n_explore
        total = max(1, round_half_up((protected + self.n_match) * f))
        protected = min(protected, total)
        return protected, total - protected


DEFAULT_POLICIES = {
    "positive": BehaviorPolicy("positive", n_match=4, n_explore=2),
    "weakly_positive": BehaviorPolicy("weakly_positive", n_match=4, n_explore=1),
    "negative": BehaviorPolicy("negative", n_match=3, n_top=2),
    "weakly_negative": BehaviorPolicy("weakly_negative", n_match=3, n_top=1),
}


def arm_levels(policy: BehaviorPolicy) -> dict:
    """Trait overrides applied to every user running ``policy``."""
    if policy.is_positive:
        return {"activity_level": "high", "diversity_level": "high"}
    if policy.is_negative:
        return {"activity_level": "low", "diversity_level": "low"}
    return {}


@dataclass(frozen=True)
class AgentDecision:
    user_id: object
    round: int
    chosen: tuple  # of (item_id, rating)
    provenance: str = "rule_based"
    dropped: int = 0

    @property
    def items(self) -> tuple:
        return tuple(i for i, _ in self.chosen)


# --- profiles ------------------------------------------------------------------


def _user_statistics(history: Sequence[RawInteraction], catalog: Catalog, item_means: Mapping):
    activity = len(history)
    diversity = len({category_of(catalog, r.item_id) for r in history})
    deviation = float(np.mean([abs(r.rating - item_means.get(r.item_id, r.rating)) for r in history]))
    return activity, diversity, deviation


@dataclass(frozen=True)
class PopulationStats:
    """Per-statistic sorted (value, user_id) keys used for tercile levels."""

    item_means: Mapping
    activity: tuple
    diversity: tuple
    deviation: tuple

    @classmethod
    def from_histories(cls, histories: Mapping, catalog: Catalog) -> "PopulationStats":
        sums: dict = {}
        for hist in histories.values():
            for r in hist:
                s = sums.setdefault(r.item_id, [0, 0])
                s[0] += r.rating
                s[1] += 1
        means = {i: s / n for i, (s, n) in sums.items()}
        keys = ([], [], [])
        for user in sorted(histories):
            for bucket, value in zip(keys, _user_statistics(histories[user], catalog, means)):
                bucket.append((value, user))
        return cls(means, *(tuple(sorted(k)) for k in keys))

    @staticmethod
    def level(keys: tuple, value, user_id) -> str:
        pos = bisect.bisect_left(keys, (value, user_id))
        return LEVELS[min(2, pos * 3 // max(len(keys), 1))]


def derive_profile(user_id, cold_start_history: Sequence[RawInteraction], catalog: Catalog, population_stats: PopulationStats) -> UserProfile:
    if not cold_start_history:
        raise ValueError(f"user {user_id!r} has an empty history")
    counts: dict = {}
    for r in cold_start_history:
        c = category_of(catalog, r.item_id)
        counts[c] = counts.get(c, 0) + 1
    n = len(cold_start_history)
    weights = {c: counts[c] / n for c in catalog.categories if c in counts}
    activity, diversity, deviation = _user_statistics(cold_start_history, catalog, population_stats.item_means)
    ps = population_stats
    conformity_low_to_high = PopulationStats.level(ps.deviation, deviation, user_id)
    return UserProfile(
        user_id,
        activity_level=PopulationStats.level(ps.activity, activity, user_id),
        conformity_level=LEVELS[2 - LEVELS.index(conformity_low_to_high)],
        diversity_level=PopulationStats.level(ps.diversity, diversity, user_id),
        taste_weights=weights,
    )


# --- rule-based decisions ------------------------------------------------------


def rate_item(profile: UserProfile, policy: BehaviorPolicy, category: str, item_mean: float) -> int:
    alpha = policy.conformity_alpha[profile.conformity_level]
    top = max(profile.taste_weights.values())
    w_hat = profile.weight(category) / top
    return min(5, max(1, round_half_up(alpha * item_mean + (1 - alpha) * (1 + 4 * w_hat))))


def decide_rule_based(
    profile: UserProfile,
    policy: BehaviorPolicy,
    page: RankedPage,
    catalog: Catalog,
    rng_seed,
    item_means: Mapping | None = None,
) -> AgentDecision:
    if len(page) == 0:
        raise ValueError("cannot decide on an empty page")
    item_means = item_means or {}
    cats = [category_of(catalog, i) for i in page.items]
    weights = [profile.weight(c) for c in cats]
    protected, n_taste = policy.pick_counts(profile.activity_level)

    if policy.is_negative:
        picked = list(range(min(protected, len(page))))
        rest = sorted(range(len(picked), len(page)), key=lambda k: (-weights[k], k))
        picked += rest[:n_taste]
    else:
        tau = policy.taste_threshold
        matching = [k for k in range(len(page)) if weights[k] >= tau]
        other = [k for k in range(len(page)) if weights[k] < tau]
        picked = matching[:n_taste]
        if other and protected:
            gen = np.random.default_rng(derive_seed(rng_seed, "explore"))
            chosen = gen.choice(len(other), size=min(protected, len(other)), replace=False)
            picked += sorted(other[c] for c in chosen)
        if not picked:
            picked = [0]

    chosen = tuple(
        (page.items[k], rate_item(profile, policy, cats[k], item_means.get(page.items[k], 3.0))) for k in picked
    )
    return AgentDecision(page.user_id, page.round, chosen, "rule_based")


# --- LLM prompts ---------------------------------------------------------------


def _template(name: str) -> str:
    return resources.files("bubblesim").joinpath("prompts", f"{name}.txt").read_text(encoding="utf-8").strip()


def describe_tastes(profile: UserProfile) -> str:
    if profile.taste_summary:
        return profile.taste_summary
    ranked = sorted(profile.taste_weights.items(), key=lambda kv: (-kv[1], kv[0]))
    return ", ".join(f"{c} ({w:.2f})" for c, w in ranked)


def render_prompt(profile: UserProfile, policy: BehaviorPolicy, page: RankedPage, item_noun: str, catalog: Catalog) -> str:
    kind = policy.kind if policy.kind != "custom" else ("positive" if policy.n_explore else "negative")
    persona = (
        _template("persona")
        .replace("[activity]", profile.activity_level)
        .replace("[conformity]", profile.conformity_level)
        .replace("[diversity]", profile.diversity_level)
        .replace("[tastes]", describe_tastes(profile))
    )
    listing = ["Recommended list:"]
    for rank, item_id in enumerate(page.items, start=1):
        item = catalog.items[item_id]
        listing.append(f"{rank}. item_id={item_id} | {item.title} | {item.primary_category}")
    parts = [persona, _template(kind), "\n".join(listing), _template("output_format")]
    return "\n\n".join(p.replace("[item]", item_noun) for p in parts)


class LlmDecisionError(ValueError):
    """The reply could not be turned into a valid decision."""


def _first_json_object(text: str):
    decoder = json.JSONDecoder()
    start = text.find("{")
    while start != -1:
        try:
            obj, _ = decoder.raw_decode(text, start)
            if isinstance(obj, dict):
                return obj
        except json.JSONDecodeError:
            pass
        start = text.find("{", start + 1)
    raise LlmDecisionError("no JSON object found in reply")


def parse_llm_decision(reply: str, page: RankedPage) -> AgentDecision:
    obj = _first_json_object(reply)
    entries = obj.get("chosen")
    if not isinstance(entries, list):
        raise LlmDecisionError("reply has no 'chosen' list")
    if not entries:
        raise LlmDecisionError("empty decision")
    by_text = {str(i): i for i in page.items}
    chosen, seen, dropped = [], set(), 0
    for entry in entries:
        try:
            item = by_text[str(entry["item_id"])]
            rating = entry["rating"]
            ok = isinstance(rating, (int, float)) and float(rating).is_integer() and 1 <= rating <= 5
        except (KeyError, TypeError):
            ok = False
        if not ok or item in seen:
            dropped += 1
            continue
        seen.add(item)
        chosen.append((item, int(rating)))
    if dropped:
        log.warning("dropped %d invalid pick(s) from LLM reply for user %r", dropped, page.user_id)
    if not chosen:
        raise LlmDecisionError("all chosen items invalid")
    return AgentDecision(page.user_id, page.round, tuple(chosen), "llm", dropped)
