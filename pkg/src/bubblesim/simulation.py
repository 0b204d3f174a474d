"""Cold start, the retrain -> recommend -> decide -> merge loop, and the paired
positive/negative execution."""

from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .agents import (
    DEFAULT_POLICIES,
    AgentDecision,
    BehaviorPolicy,
    LlmDecisionError,
    PopulationStats,
    arm_levels,
    decide_rule_based,
    derive_profile,
    parse_llm_decision,
    render_prompt,
)
from .catalog import Catalog, InteractionLog, RawInteraction, dedupe_latest, user_histories
from .llm import LlmClient, LlmError
from .recommenders import CatalogExhausted, RankedPage, RecommenderSpec, fit, randomize_page, recommend
from .seeding import derive_seed

log = logging.getLogger(__name__)

ARMS = ("positive", "negative")

SYSTEM_PROMPT = "You are simulating a user browsing a recommendation list. Follow the instructions exactly."


@dataclass(frozen=True)
class SimulationConfig:
    rounds: int = 8
    page_size: int = 20
    recommender: RecommenderSpec = field(default_factory=lambda: RecommenderSpec("bpr_mf"))
    policies: Mapping[str, BehaviorPolicy] = field(
        default_factory=lambda: {"positive": DEFAULT_POLICIES["positive"], "negative": DEFAULT_POLICIES["negative"]}
    )
    randomize_fraction: float = 0.0
    master_seed: int = 0
    llm_enabled: bool = False
    frequent_pool: int = 1000
    sample_size: int = 200
    item_noun: str = "movies"

    def __post_init__(self):
        if self.rounds < 1 or self.page_size < 1:
            raise ValueError("rounds and page_size must be >= 1")
        if not 0.0 <= self.randomize_fraction <= 1.0:
            raise ValueError("randomize_fraction must lie in [0, 1]")
        if not 1 <= self.sample_size <= self.frequent_pool:
            raise ValueError("need 1 <= sample_size <= frequent_pool")
        if set(self.policies) != set(ARMS):
            raise ValueError(f"policies must be assigned for arms {ARMS}")

    @property
    def cohort_size(self) -> int:
        return self.sample_size


@dataclass
class RunRecord:
    arm: str
    policy: BehaviorPolicy
    cohort: tuple
    rounds: int
    pages: dict  # (user_id, t) -> RankedPage
    decisions: dict  # (user_id, t) -> AgentDecision
    log: InteractionLog
    profiles: dict  # derived traits, before arm overrides
    arm_profiles: dict  # profiles as simulated
    dropped_picks: int = 0
    llm_fallbacks: int = 0

    def page(self, user_id, t) -> RankedPage:
        return self.pages[(user_id, t)]


@dataclass
class ContrastPair:
    positive_run: RunRecord
    negative_run: RunRecord
    cohort: tuple
    config: SimulationConfig

    def __post_init__(self):
        if self.positive_run.cohort != self.cohort or self.negative_run.cohort != self.cohort:
            raise ValueError("both arms must cover the identical cohort")
        if self.positive_run.rounds != self.negative_run.rounds:
            raise ValueError("both arms must run the same number of rounds")


def build_cold_start(raw: Sequence[RawInteraction], catalog: Catalog, frequent_pool: int, sample_size: int, seed):
    """A_0 from the ``frequent_pool`` most active users and a seeded cohort of
    ``sample_size`` users drawn from them."""
    counts: dict = {}
    for r in raw:
        counts[r.user_id] = counts.get(r.user_id, 0) + 1
    if len(counts) < frequent_pool:
        raise ValueError(f"dataset has {len(counts)} users, fewer than frequent_pool={frequent_pool}")
    if sample_size > frequent_pool:
        raise ValueError("sample_size exceeds frequent_pool")
    pool = sorted(counts, key=lambda u: (-counts[u], u))[:frequent_pool]
    members = set(pool)
    a0 = InteractionLog.from_raw(r for r in raw if r.user_id in members)
    gen = np.random.default_rng(derive_seed(seed, "cohort"))
    pool_sorted = sorted(pool)
    picks = gen.choice(len(pool_sorted), size=sample_size, replace=False)
    cohort = sorted(pool_sorted[k] for k in picks)
    return a0, cohort


class LlmDecider:
    """LLM-backed decisions with rule-based fallback on any failure."""

    def __init__(self, client: LlmClient, catalog: Catalog, item_noun: str):
        self.client = client
        self.catalog = catalog
        self.item_noun = item_noun
        self.fallbacks = 0
        self._lock = threading.Lock()

    def __call__(self, profile, policy, page, seed, item_means) -> AgentDecision:
        prompt = render_prompt(profile, policy, page, self.item_noun, self.catalog)
        try:
            return parse_llm_decision(self.client.complete(SYSTEM_PROMPT, prompt), page)
        except (LlmError, LlmDecisionError) as exc:
            log.warning("LLM decision failed for user %r round %d (%s); using rule-based policy", page.user_id, page.round, exc)
            with self._lock:
                self.fallbacks += 1
            return decide_rule_based(profile, policy, page, self.catalog, seed, item_means)


@dataclass
class RoundResult:
    pages: dict
    decisions: dict
    log: InteractionLog
    dropped: int


def run_round(
    t: int,
    log_: InteractionLog,
    cohort: Sequence,
    profiles: Mapping,
    policy: BehaviorPolicy,
    config: SimulationConfig,
    catalog: Catalog,
    decider: LlmDecider | None = None,
) -> RoundResult:
    if not 1 <= t <= config.rounds:
        raise ValueError(f"round {t} outside 1..{config.rounds}")
    model = fit(config.recommender.with_seed(derive_seed(config.master_seed, t)), log_, catalog, fit_round=t)
    seen = log_.items_by_user()
    item_means = log_.item_means()
    pages = {}
    for u in cohort:
        exclude = seen.get(u, set())
        try:
            page = recommend(model, u, config.page_size, exclude)
        except CatalogExhausted:
            raise CatalogExhausted(u, t) from None
        if config.randomize_fraction > 0:
            page = randomize_page(page, config.randomize_fraction, catalog, exclude, derive_seed(config.master_seed, t, u))
        pages[u] = page

    def decide(u):
        seed = derive_seed(config.master_seed, t, u)
        if decider is not None:
            return decider(profiles[u], policy, pages[u], seed, item_means)
        return decide_rule_based(profiles[u], policy, pages[u], catalog, seed, item_means)

    if decider is not None:
        with ThreadPoolExecutor(max_workers=decider.client.config.in_flight_limit) as pool:
            decided = list(pool.map(decide, cohort))  # map preserves cohort order
    else:
        decided = [decide(u) for u in cohort]
    decisions = dict(zip(cohort, decided))

    picks = []
    for u in sorted(cohort):
        d = decisions[u]
        if not set(d.items) <= set(pages[u].items):
            raise AssertionError(f"decision for user {u!r} round {t} leaves its page")
        picks.extend((u, i, r) for i, r in d.chosen)
    new_log, dropped = log_.merge(t, picks)
    if dropped:
        log.info("round %d: dropped %d already-logged picks", t, dropped)
    return RoundResult(pages, decisions, new_log, dropped)


def cohort_profiles(a0: InteractionLog, raw: Sequence[RawInteraction], cohort: Sequence, catalog: Catalog) -> dict:
    """Derived (pre-override) profiles; population terciles span the A_0 pool."""
    members = set(a0.users())
    histories = user_histories(r for r in dedupe_latest(raw) if r.user_id in members)
    stats = PopulationStats.from_histories(histories, catalog)
    return {u: derive_profile(u, histories[u], catalog, stats) for u in cohort}


def run_simulation(
    config: SimulationConfig,
    arm: str,
    catalog: Catalog,
    raw: Sequence[RawInteraction],
    llm_client: LlmClient | None = None,
) -> RunRecord:
    if arm not in ARMS:
        raise ValueError(f"arm must be one of {ARMS}")
    policy = config.policies[arm]
    a0, cohort = build_cold_start(raw, catalog, config.frequent_pool, config.sample_size, config.master_seed)
    profiles = cohort_profiles(a0, raw, cohort, catalog)
    overrides = arm_levels(policy)
    arm_profiles = {u: p.with_levels(**overrides) for u, p in profiles.items()}
    decider = None
    if config.llm_enabled:
        if llm_client is None:
            raise ValueError("llm_enabled requires an LlmClient")
        decider = LlmDecider(llm_client, catalog, config.item_noun)

    record = RunRecord(arm, policy, tuple(cohort), config.rounds, {}, {}, a0, profiles, arm_profiles)
    current = a0
    for t in range(1, config.rounds + 1):
        result = run_round(t, current, cohort, arm_profiles, policy, config, catalog, decider)
        for u in cohort:
            record.pages[(u, t)] = result.pages[u]
            record.decisions[(u, t)] = result.decisions[u]
        record.dropped_picks += result.dropped
        current = result.log
    record.log = current
    record.llm_fallbacks = decider.fallbacks if decider else 0
    return record


def run_contrastive(
    config: SimulationConfig,
    catalog: Catalog,
    raw: Sequence[RawInteraction],
    llm_client: LlmClient | None = None,
) -> ContrastPair:
    """Positive arm then negative arm, both from the same A_0 and cohort."""
    pos = run_simulation(config, "positive", catalog, raw, llm_client)
    neg = run_simulation(config, "negative", catalog, raw, llm_client)
    return ContrastPair(pos, neg, pos.cohort, config)
