import json

import pytest
from hypothesis import given, settings, strategies as st

from bubblesim.agents import (
    DEFAULT_POLICIES,
    LEVELS,
    BehaviorPolicy,
    LlmDecisionError,
    PopulationStats,
    UserProfile,
    arm_levels,
    decide_rule_based,
    derive_profile,
    parse_llm_decision,
    rate_item,
    render_prompt,
    round_half_up,
)
from bubblesim.catalog import RawInteraction
from bubblesim.recommenders import RankedPage

from .conftest import toy_catalog


def profile(activity="mid", conformity="mid", diversity="mid", tastes=None):
    return UserProfile(1, activity, conformity, diversity, tastes or {"a": 0.7, "b": 0.3})


PAGE = RankedPage(1, 1, (6, 1, 4, 7, 2, 8, 3, 5), tuple(float(8 - k) for k in range(8)))
# categories on PAGE: c a b c a c a b


def test_round_half_up():
    assert [round_half_up(x) for x in (0.5, 1.5, 2.5, 2.49)] == [1, 2, 3, 2]


@pytest.mark.parametrize(
    "kind,activity,expected",
    [
        ("positive", "high", (2, 7)),
        ("positive", "mid", (2, 4)),
        ("positive", "low", (2, 1)),
        ("weakly_positive", "high", (1, 7)),
        ("negative", "low", (2, 1)),
        ("negative", "mid", (2, 3)),
        ("weakly_negative", "low", (1, 1)),
    ],
)
def test_pick_counts(kind, activity, expected):
    assert DEFAULT_POLICIES[kind].pick_counts(activity) == expected


def test_policy_validation():
    with pytest.raises(ValueError):
        BehaviorPolicy("cautious", n_match=1)
    with pytest.raises(ValueError):
        BehaviorPolicy("positive", n_match=1, n_explore=0)
    with pytest.raises(ValueError):
        BehaviorPolicy("negative", n_match=1, n_top=0)


def test_negative_takes_top_then_taste():
    catalog = toy_catalog()
    d = decide_rule_based(profile(), DEFAULT_POLICIES["negative"], PAGE, catalog, 0)
    # top 2 ranks (6, 1), then 3 taste picks by weight with page-order ties: a-items 2, 3 then b-item 4
    assert d.items == (6, 1, 2, 3, 4)


def test_positive_takes_matches_in_order_plus_explore():
    catalog = toy_catalog()
    d = decide_rule_based(profile(), DEFAULT_POLICIES["positive"], PAGE, catalog, 5)
    matching = [1, 4, 2, 3]  # first 4 taste-aligned items in page order
    assert d.items[:4] == tuple(matching)
    explore = d.items[4:]
    assert len(explore) == 2 and set(explore) <= {6, 7, 8}
    assert d == decide_rule_based(profile(), DEFAULT_POLICIES["positive"], PAGE, catalog, 5)


def test_positive_with_no_matching_items_still_picks():
    catalog = toy_catalog()
    page = RankedPage(1, 1, (6, 7), (2.0, 1.0))
    d = decide_rule_based(profile(activity="low"), DEFAULT_POLICIES["positive"], page, catalog, 0)
    assert 1 <= len(d.items) <= 2 and set(d.items) <= {6, 7}


@settings(max_examples=60, deadline=None)
@given(
    st.permutations(list(range(1, 9))).map(tuple),
    st.sampled_from(LEVELS),
    st.integers(0, 1000),
    st.floats(0.01, 0.99),
)
def test_decision_invariants(items, activity, seed, wa):
    catalog = toy_catalog()
    page = RankedPage(1, 1, items, tuple(float(-k) for k in range(len(items))))
    p = profile(activity=activity, tastes={"a": wa, "b": 1 - wa})
    results = {}
    for kind, policy in DEFAULT_POLICIES.items():
        d = decide_rule_based(p, policy, page, catalog, seed)
        assert set(d.items) <= set(page.items)
        assert len(set(d.items)) == len(d.items) >= 1
        assert all(1 <= r <= 5 for _, r in d.chosen)
        results[kind] = d
    cats = {i: catalog.items[i].primary_category for i in items}
    non_matching = lambda d: sum(p.weight(cats[i]) < 0.05 for i in d.items)
    assert non_matching(results["weakly_positive"]) <= non_matching(results["positive"])
    top = lambda d, n: len([i for i in d.items[:n] if i in items[:n]])
    assert top(results["weakly_negative"], 1) <= top(results["negative"], 2)


def test_rating_formula():
    p = profile(conformity="high")  # alpha 0.8
    pol = DEFAULT_POLICIES["positive"]
    # 0.8 * 4.5 + 0.2 * (1 + 4 * 1.0) = 4.6 -> 5
    assert rate_item(p, pol, "a", 4.5) == 5
    # w_hat for b = 0.3/0.7; 0.8*2 + 0.2*(1 + 4*0.428571) = 2.142857 -> 2
    assert rate_item(p, pol, "b", 2.0) == 2
    assert rate_item(profile(conformity="low"), pol, "c", 1.0) == 1


def test_arm_levels():
    assert arm_levels(DEFAULT_POLICIES["positive"]) == {"activity_level": "high", "diversity_level": "high"}
    assert arm_levels(DEFAULT_POLICIES["weakly_negative"]) == {"activity_level": "low", "diversity_level": "low"}


def test_profile_validation_and_favorite():
    with pytest.raises(ValueError):
        UserProfile(1, "huge", "mid", "mid", {"a": 1.0})
    with pytest.raises(ValueError):
        UserProfile(1, "mid", "mid", "mid", {"a": 0.5})
    assert UserProfile(1, "mid", "mid", "mid", {"b": 0.5, "a": 0.5}).favorite_genre == "a"


def test_tercile_split_of_200_users():
    catalog = toy_catalog()
    histories = {
        u: [RawInteraction(u, 1 + (u + k) % 8, 3, k) for k in range(1 + u % 7)] for u in range(200)
    }
    stats = PopulationStats.from_histories(histories, catalog)
    levels = [PopulationStats.level(stats.activity, len(h), u) for u, h in histories.items()]
    counts = [levels.count(lv) for lv in LEVELS]
    assert sum(counts) == 200 and all(66 <= c <= 67 for c in counts)


def test_derive_profile_weights_and_conformity_reversal():
    catalog = toy_catalog()
    histories = {
        1: [RawInteraction(1, 1, 5, 0), RawInteraction(1, 2, 5, 1), RawInteraction(1, 6, 5, 2)],
        2: [RawInteraction(2, 1, 1, 0), RawInteraction(2, 4, 3, 1)],
        3: [RawInteraction(3, 2, 5, 0)],
    }
    stats = PopulationStats.from_histories(histories, catalog)
    p1 = derive_profile(1, histories[1], catalog, stats)
    assert p1.taste_weights == pytest.approx({"a": 2 / 3, "c": 1 / 3})
    assert p1.activity_level == "high"
    # users 1 and 2 tie on two categories; the tie goes to the larger user id
    assert p1.diversity_level == "mid"
    assert derive_profile(2, histories[2], catalog, stats).diversity_level == "high"
    # user 3 matches its only item mean exactly: smallest deviation -> most conforming
    assert derive_profile(3, histories[3], catalog, stats).conformity_level == "high"


def test_prompt_rendering():
    catalog = toy_catalog()
    text = render_prompt(profile(), DEFAULT_POLICIES["negative"], PAGE, "books", catalog)
    assert "[item]" not in text and "books" in text
    assert "item_id=6" in text and "1. " in text
    assert "chosen" in text
    assert render_prompt(profile(), DEFAULT_POLICIES["positive"], PAGE, "books", catalog) != text


def test_parse_llm_decision():
    reply = 'Sure!\n{"chosen": [{"item_id": 6, "rating": 4}, {"item_id": 99, "rating": 5}, {"item_id": 1, "rating": 7}]}'
    d = parse_llm_decision(reply, PAGE)
    assert d.chosen == ((6, 4),) and d.dropped == 2 and d.provenance == "llm"
    with pytest.raises(LlmDecisionError, match="empty decision"):
        parse_llm_decision(json.dumps({"chosen": []}), PAGE)
    with pytest.raises(LlmDecisionError, match="all chosen items invalid"):
        parse_llm_decision(json.dumps({"chosen": [{"item_id": 99, "rating": 3}]}), PAGE)
    with pytest.raises(LlmDecisionError):
        parse_llm_decision("no json here", PAGE)
